//! Canonical scene annotations, the GKT1 tensor file format, and importers
//! for external grasp-dataset annotation layouts.
//!
//! The canonical on-disk scene format is JSON-lines: one [`Scene`] object
//! per line, angles in radians, boxes as `{x_min, y_min, x_max, y_max}`.

mod jacquard;
mod ocid;
mod tensor;

pub use jacquard::import_jacquard;
pub use ocid::import_ocid;
pub use tensor::{read_tensor, write_tensor, Tensor, GRASP_MAP_CHANNELS, TENSOR_MAGIC};

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BoundingBox, GraspRect};

/// One annotated object: class, box, the grasps affiliated with it, and an
/// optional instance-mask file reference. Predictions additionally carry
/// the detector score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneObject {
    pub class_id: u32,
    pub class_name: String,
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
    pub grasps: Vec<GraspRect>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance_mask_ref: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

/// One image's worth of ground truth or predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scene {
    pub scene_id: String,
    /// `(h, w)` in pixels.
    pub image_size: (u32, u32),
    pub objects: Vec<SceneObject>,
}

impl Scene {
    /// Enforces the scene invariants: every grasp center inside the image
    /// bounds and every grasp carrying its object's class id. Offending
    /// grasps are listed rather than silently clamped.
    pub fn validate(&self) -> Result<()> {
        let (h, w) = self.image_size;
        let mut offending = Vec::new();
        for (oi, obj) in self.objects.iter().enumerate() {
            for (gi, g) in obj.grasps.iter().enumerate() {
                if g.class_id() != obj.class_id {
                    return Err(Error::SceneInvariant {
                        scene_id: self.scene_id.clone(),
                        msg: format!(
                            "object {oi} has class {} but grasp {gi} carries class {}",
                            obj.class_id,
                            g.class_id()
                        ),
                    });
                }
                if !(g.x() >= 0.0 && g.x() < w as f64 && g.y() >= 0.0 && g.y() < h as f64) {
                    offending.push(format!("object {oi} grasp {gi} at ({}, {})", g.x(), g.y()));
                }
            }
        }
        if !offending.is_empty() {
            return Err(Error::SceneInvariant {
                scene_id: self.scene_id.clone(),
                msg: format!(
                    "grasp centers outside {h}x{w} image bounds: {}",
                    offending.join("; ")
                ),
            });
        }
        Ok(())
    }
}

/// Writes scenes as JSON-lines. Numbers round-trip exactly (shortest
/// representation that parses back to the same f64).
pub fn write_scenes<W: Write>(mut out: W, scenes: &[Scene]) -> Result<()> {
    for s in scenes {
        let line = serde_json::to_string(s)
            .map_err(|e| Error::Invalid(format!("scene '{}': {e}", s.scene_id)))?;
        out.write_all(line.as_bytes())?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads JSON-lines scenes, validating schema and invariants. Blank lines
/// are skipped; errors carry the 1-based line number.
pub fn read_scenes<R: BufRead>(input: R) -> Result<Vec<Scene>> {
    let mut scenes = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let scene: Scene = serde_json::from_str(&line).map_err(|e| Error::SceneSchema {
            line: i + 1,
            msg: e.to_string(),
        })?;
        scene.validate().map_err(|e| Error::SceneSchema {
            line: i + 1,
            msg: e.to_string(),
        })?;
        scenes.push(scene);
    }
    Ok(scenes)
}

/// One scene's worth of detector output: the canvas size of the prototype
/// stack the coefficients were predicted for, plus the detections. Stored
/// as JSON-lines, one record per scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionRecord {
    pub scene_id: String,
    /// `(h, w)` of the prototype canvas.
    pub image_size: (u32, u32),
    pub detections: Vec<crate::assembly::Detection>,
}

/// Writes detection records as JSON-lines.
pub fn write_detections<W: Write>(mut out: W, records: &[DetectionRecord]) -> Result<()> {
    for r in records {
        let line = serde_json::to_string(r)
            .map_err(|e| Error::Invalid(format!("detections '{}': {e}", r.scene_id)))?;
        out.write_all(line.as_bytes())?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads JSON-lines detection records, validating scores and coefficient
/// shapes. Errors carry the 1-based line number.
pub fn read_detections<R: BufRead>(input: R) -> Result<Vec<DetectionRecord>> {
    let mut records = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: DetectionRecord = serde_json::from_str(&line).map_err(|e| Error::SceneSchema {
            line: i + 1,
            msg: e.to_string(),
        })?;
        for det in &rec.detections {
            det.validate().map_err(|e| Error::SceneSchema {
                line: i + 1,
                msg: format!("scene '{}': {e}", rec.scene_id),
            })?;
        }
        records.push(rec);
    }
    Ok(records)
}

/// Smallest box containing all grasp rectangle polygons of an object,
/// clamped to the image. Used by importers that have no explicit boxes.
pub(crate) fn grasp_union_box(grasps: &[GraspRect], image_size: (u32, u32)) -> Result<BoundingBox> {
    let mut boxes = grasps
        .iter()
        .filter_map(|g| g.to_polygon().bounding_box());
    let first = boxes.next().ok_or(Error::NoGrasps)?;
    let joined = boxes.fold(first, |acc, b| acc.union(&b));
    let (h, w) = image_size;
    Ok(joined.clamp_to(h as usize, w as usize))
}
