use std::fs;
use std::path::PathBuf;

use clap::Args;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use graspkit::datasets::{write_detections, write_tensor, DetectionRecord, Tensor};
use graspkit::fixture::build_scene_fixture;

use super::common::{read_scenes_file, CodecFlags};
use super::{CmdResult, Failure};

#[derive(Args, Debug)]
pub struct FitFixtureArgs {
    /// Ground-truth scenes to fit against (JSON-lines)
    #[arg(long)]
    pub scenes: PathBuf,
    /// Prototype count per scene (needs k >= 5 * objects)
    #[arg(long, default_value_t = 32)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory for per-scene prototype tensors (<scene_id>.gkt)
    #[arg(long)]
    pub out_protos: PathBuf,
    /// Output JSON-lines detections file
    #[arg(long)]
    pub out_detections: PathBuf,
    #[command(flatten)]
    pub codec: CodecFlags,
}

pub fn run(args: &FitFixtureArgs) -> CmdResult {
    let cfg = args.codec.config()?;
    let scenes = read_scenes_file(&args.scenes)?;
    fs::create_dir_all(&args.out_protos)
        .map_err(|e| Failure::User(format!("cannot create {}: {e}", args.out_protos.display())))?;

    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut records = Vec::with_capacity(scenes.len());
    let mut fitted = 0usize;
    for scene in &scenes {
        let fx = build_scene_fixture(scene, args.k, &cfg, &mut rng)
            .map_err(|e| Failure::User(format!("scene '{}': {e}", scene.scene_id)))?;
        let path = args.out_protos.join(format!("{}.gkt", scene.scene_id));
        let bytes = write_tensor(&Tensor::from_array3(fx.protos.data()));
        fs::write(&path, bytes)
            .map_err(|e| Failure::User(format!("cannot write {}: {e}", path.display())))?;
        fitted += fx.detections.len();
        records.push(DetectionRecord {
            scene_id: scene.scene_id.clone(),
            image_size: scene.image_size,
            detections: fx.detections,
        });
    }

    if let Some(parent) = args.out_detections.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)
            .map_err(|e| Failure::User(format!("cannot create {}: {e}", parent.display())))?;
    }
    let mut file = fs::File::create(&args.out_detections).map_err(|e| {
        Failure::User(format!("cannot write {}: {e}", args.out_detections.display()))
    })?;
    write_detections(&mut file, &records)?;
    println!("fitted {fitted} detections across {} scenes", records.len());
    Ok(())
}
