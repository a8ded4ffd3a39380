use std::fs;
use std::path::PathBuf;
use std::sync::Arc;

use clap::Args;
use log::debug;
use rayon::prelude::*;

use graspkit::assembly::{infer_scene, InferParams, PrototypeStack};
use graspkit::datasets::{write_tensor, DetectionRecord, Scene, SceneObject, Tensor};
use graspkit::geometry::{BoundingBox, GraspRect};

use super::common::{
    build_pool, load_prototypes, read_detections_file, write_scenes_file, CodecFlags,
};
use super::{CmdResult, Failure};

#[derive(Args, Debug)]
pub struct InferArgs {
    /// Prototype tensor: a single .gkt file shared by all scenes, or a
    /// directory holding <scene_id>.gkt per scene
    #[arg(long)]
    pub protos: PathBuf,
    /// JSON-lines detection records
    #[arg(long)]
    pub detections: PathBuf,
    /// Output predictions scenes file (JSON-lines)
    #[arg(long)]
    pub out: PathBuf,
    /// NMS box-IoU suppression threshold
    #[arg(long, default_value_t = 0.5)]
    pub nms_iou: f64,
    /// Minimum detection score
    #[arg(long, default_value_t = 0.05)]
    pub score_thr: f64,
    /// Grasp candidates kept per object
    #[arg(long, default_value_t = 1)]
    pub top_n: usize,
    /// Factor converting prototype-resolution coordinates to image pixels
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    /// Write instance masks as GKT tensors under this directory
    #[arg(long)]
    pub mask_dir: Option<PathBuf>,
    /// Worker pool size for per-scene work
    #[arg(long, default_value_t = 1)]
    pub parallelism: usize,
    #[command(flatten)]
    pub codec: CodecFlags,
}

enum ProtoSource {
    Shared(Arc<PrototypeStack>),
    PerScene(PathBuf),
}

pub fn run(args: &InferArgs) -> CmdResult {
    let cfg = args.codec.config()?;
    if !(args.scale > 0.0 && args.scale.is_finite()) {
        return Err(Failure::User(format!("scale must be > 0, got {}", args.scale)));
    }
    let params = InferParams {
        nms_iou: args.nms_iou,
        score_thr: args.score_thr,
        top_n: args.top_n,
    };
    let records = read_detections_file(&args.detections)?;
    let source = if args.protos.is_dir() {
        ProtoSource::PerScene(args.protos.clone())
    } else {
        ProtoSource::Shared(Arc::new(load_prototypes(&args.protos)?))
    };
    if let Some(dir) = &args.mask_dir {
        fs::create_dir_all(dir)
            .map_err(|e| Failure::User(format!("cannot create {}: {e}", dir.display())))?;
    }

    let pool = build_pool(args.parallelism)?;
    let scenes: Result<Vec<Scene>, Failure> = pool.install(|| {
        records
            .par_iter()
            .map(|rec| infer_record(rec, &source, &cfg, &params, args))
            .collect()
    });
    let scenes = scenes?;
    write_scenes_file(&args.out, &scenes)?;
    let objects: usize = scenes.iter().map(|s| s.objects.len()).sum();
    println!("inferred {} scenes, {objects} objects", scenes.len());
    Ok(())
}

fn infer_record(
    rec: &DetectionRecord,
    source: &ProtoSource,
    cfg: &graspkit::maskcodec::CodecConfig,
    params: &InferParams,
    args: &InferArgs,
) -> Result<Scene, Failure> {
    let protos = match source {
        ProtoSource::Shared(p) => Arc::clone(p),
        ProtoSource::PerScene(dir) => {
            let path = dir.join(format!("{}.gkt", rec.scene_id));
            Arc::new(load_prototypes(&path)?)
        }
    };
    let (ph, pw, _) = protos.dims();
    if (rec.image_size.0 as usize, rec.image_size.1 as usize) != (ph, pw) {
        return Err(Failure::User(format!(
            "scene '{}': detection canvas {:?} does not match prototype map {}x{}",
            rec.scene_id, rec.image_size, ph, pw
        )));
    }
    debug!("scene {}: {} detections", rec.scene_id, rec.detections.len());
    let predicted = infer_scene(&protos, &rec.detections, cfg, params)
        .map_err(|e| Failure::User(format!("scene '{}': {e}", rec.scene_id)))?;

    let s = args.scale;
    let mut objects = Vec::with_capacity(predicted.len());
    for (oi, p) in predicted.iter().enumerate() {
        let mask_ref = match &args.mask_dir {
            Some(dir) => {
                let scene_dir = dir.join(&rec.scene_id);
                fs::create_dir_all(&scene_dir).map_err(|e| {
                    Failure::User(format!("cannot create {}: {e}", scene_dir.display()))
                })?;
                let path = scene_dir.join(format!("{oi}.gkt"));
                let bytes = write_tensor(&Tensor::from_array2(&p.instance_mask));
                fs::write(&path, bytes)
                    .map_err(|e| Failure::User(format!("cannot write {}: {e}", path.display())))?;
                Some(format!("{}/{oi}.gkt", rec.scene_id))
            }
            None => None,
        };
        let bbox = BoundingBox {
            x_min: p.bbox.x_min * s,
            y_min: p.bbox.y_min * s,
            x_max: p.bbox.x_max * s,
            y_max: p.bbox.y_max * s,
        };
        let grasps: Vec<GraspRect> = p
            .grasps
            .iter()
            .map(|g| {
                GraspRect::new(
                    g.x() * s,
                    g.y() * s,
                    g.angle(),
                    g.width() * s,
                    g.height() * s,
                    g.quality(),
                    g.class_id(),
                )
                .expect("scaling a valid grasp stays valid")
            })
            .collect();
        objects.push(SceneObject {
            class_id: p.class_id,
            class_name: p.class_id.to_string(),
            bbox,
            grasps,
            instance_mask_ref: mask_ref,
            score: Some(p.score),
        });
    }
    Ok(Scene {
        scene_id: rec.scene_id.clone(),
        image_size: (
            (rec.image_size.0 as f64 * s).round() as u32,
            (rec.image_size.1 as f64 * s).round() as u32,
        ),
        objects,
    })
}
