//! Importer for Jacquard-style annotation text.
//!
//! One grasp per non-empty line, five semicolon-separated numeric fields:
//! `x; y; theta_degrees; opening_px; jaw_px`. The angle is converted to
//! radians and normalized; the whole file forms a single class-agnostic
//! object (class id 0, "object") whose box is the union of the grasp
//! rectangle polygons.

use crate::datasets::{grasp_union_box, Scene, SceneObject};
use crate::error::{Error, Result};
use crate::geometry::GraspRect;

pub fn import_jacquard(text: &str, scene_id: &str, image_size: (u32, u32)) -> Result<Scene> {
    let mut grasps = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(';').map(str::trim).collect();
        if fields.len() != 5 {
            return Err(Error::Parse {
                line: i + 1,
                msg: format!("expected 5 ';'-separated fields, found {}", fields.len()),
            });
        }
        let mut nums = [0.0f64; 5];
        for (slot, f) in nums.iter_mut().zip(&fields) {
            *slot = f.parse().map_err(|_| Error::Parse {
                line: i + 1,
                msg: format!("non-numeric field '{f}'"),
            })?;
        }
        let [x, y, theta_deg, opening, jaw] = nums;
        let grasp = GraspRect::new(x, y, theta_deg.to_radians(), opening, jaw, 1.0, 0)
            .map_err(|e| Error::Parse {
                line: i + 1,
                msg: e.to_string(),
            })?;
        grasps.push(grasp);
    }
    if grasps.is_empty() {
        return Err(Error::NoGrasps);
    }
    let bbox = grasp_union_box(&grasps, image_size)?;
    let scene = Scene {
        scene_id: scene_id.to_string(),
        image_size,
        objects: vec![SceneObject {
            class_id: 0,
            class_name: "object".into(),
            bbox,
            grasps,
            instance_mask_ref: None,
            score: None,
        }],
    };
    scene.validate()?;
    Ok(scene)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_line_field_mapping() {
        let scene = import_jacquard("510.0;360.0;-60.0;119.0;40.0\n", "j0", (1024, 1024)).unwrap();
        assert_eq!(scene.objects.len(), 1);
        let o = &scene.objects[0];
        assert_eq!(o.class_id, 0);
        assert_eq!(o.class_name, "object");
        let g = &o.grasps[0];
        assert_eq!(g.x(), 510.0);
        assert_eq!(g.y(), 360.0);
        assert!((g.angle() - (-60f64).to_radians()).abs() < 1e-12);
        assert_eq!(g.width(), 119.0);
        assert_eq!(g.height(), 40.0);
    }

    #[test]
    fn empty_text_is_a_no_grasps_error() {
        assert!(matches!(
            import_jacquard("", "j0", (1024, 1024)),
            Err(Error::NoGrasps)
        ));
    }

    #[test]
    fn wrong_field_count_names_the_line() {
        let err = import_jacquard("1;2;3;4;5\n10;20;30;40\n", "j0", (1024, 1024)).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn non_numeric_token_names_the_line() {
        let err = import_jacquard("1;2;three;4;5\n", "j0", (1024, 1024)).unwrap_err();
        match err {
            Error::Parse { line, msg } => {
                assert_eq!(line, 1);
                assert!(msg.contains("three"));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn importing_twice_is_identical() {
        let text = "100;120;15;40;18\n200;230;-75;60;22\n";
        let a = import_jacquard(text, "j1", (512, 512)).unwrap();
        let b = import_jacquard(text, "j1", (512, 512)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn out_of_bounds_center_fails_validation() {
        let err = import_jacquard("600;100;0;20;10\n", "j0", (512, 512)).unwrap_err();
        assert!(err.to_string().contains("outside"));
    }
}
