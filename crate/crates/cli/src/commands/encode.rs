use std::fs;
use std::path::PathBuf;

use clap::Args;

use graspkit::datasets::{write_tensor, Tensor};
use graspkit::maskcodec::encode_grasps;

use super::common::{read_scenes_file, CodecFlags};
use super::{CmdResult, Failure};

#[derive(Args, Debug)]
pub struct EncodeArgs {
    /// Canonical scenes file (JSON-lines)
    #[arg(long)]
    pub scenes: PathBuf,
    /// Output directory; tensors are written as <scene_id>/<object_index>.gkt
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub codec: CodecFlags,
}

pub fn run(args: &EncodeArgs) -> CmdResult {
    let cfg = args.codec.config()?;
    let scenes = read_scenes_file(&args.scenes)?;
    let mut objects = 0usize;
    for scene in &scenes {
        let (h, w) = (scene.image_size.0 as usize, scene.image_size.1 as usize);
        let dir = args.out.join(&scene.scene_id);
        fs::create_dir_all(&dir)
            .map_err(|e| Failure::User(format!("cannot create {}: {e}", dir.display())))?;
        for (oi, obj) in scene.objects.iter().enumerate() {
            let maps = encode_grasps(&obj.grasps, h, w, &cfg)
                .map_err(|e| Failure::User(format!("scene '{}': {e}", scene.scene_id)))?;
            let bytes = write_tensor(&Tensor::from_grasp_maps(&maps));
            let path = dir.join(format!("{oi}.gkt"));
            fs::write(&path, bytes)
                .map_err(|e| Failure::User(format!("cannot write {}: {e}", path.display())))?;
            objects += 1;
        }
    }
    println!("encoded {objects} objects from {} scenes", scenes.len());
    Ok(())
}
