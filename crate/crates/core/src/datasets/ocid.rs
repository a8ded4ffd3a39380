//! Importer for OCID-style corner annotations with class tokens.
//!
//! Layout: a class-token line opens an object section; the numeric lines
//! that follow are rectangle corners, `x y` per line, consumed four at a
//! time (one grasp per group of four). Sections sharing a token merge into
//! one object. Corners are ordered so consecutive edges alternate between
//! the jaw and gripper-opening sides; by default the first edge
//! (corner 0 to corner 1) is a jaw side, and `opening_edge_first` flips
//! that per dataset.
//!
//! ```text
//! banana
//! 8 9
//! 8 11
//! 12 11
//! 12 9
//! ```

use std::collections::BTreeMap;

use crate::datasets::{grasp_union_box, Scene, SceneObject};
use crate::error::{Error, Result};
use crate::geometry::{GraspRect, Point, Polygon};

/// Corner groups with a quad area below this are rejected as degenerate.
const MIN_CORNER_AREA: f64 = 1.0;

pub fn import_ocid(
    text: &str,
    class_map: &BTreeMap<String, u32>,
    scene_id: &str,
    image_size: (u32, u32),
    opening_edge_first: bool,
) -> Result<Scene> {
    struct Section {
        token: String,
        token_line: usize,
        corners: Vec<(f64, f64, usize)>, // x, y, line
    }
    let mut sections: Vec<Section> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some((x, y)) = parse_corner(line) {
            let Some(cur) = sections.last_mut() else {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: "corner line before any class token".into(),
                });
            };
            cur.corners.push((x, y, i + 1));
        } else {
            sections.push(Section {
                token: line.to_string(),
                token_line: i + 1,
                corners: Vec::new(),
            });
        }
    }

    // token -> (class_id, grasps), in first-appearance order
    let mut order: Vec<String> = Vec::new();
    let mut objects: BTreeMap<String, (u32, Vec<GraspRect>)> = BTreeMap::new();
    for sec in &sections {
        if sec.corners.len() % 4 != 0 {
            return Err(Error::Parse {
                line: sec.token_line,
                msg: format!(
                    "section '{}' has {} corner lines, not divisible by 4",
                    sec.token,
                    sec.corners.len()
                ),
            });
        }
        let class_id = *class_map.get(&sec.token).ok_or_else(|| Error::UnknownClass {
            name: sec.token.clone(),
            line: sec.token_line,
        })?;
        let entry = objects.entry(sec.token.clone()).or_insert_with(|| {
            order.push(sec.token.clone());
            (class_id, Vec::new())
        });
        for quad in sec.corners.chunks_exact(4) {
            let grasp = corners_to_grasp(quad, class_id, opening_edge_first)?;
            entry.1.push(grasp);
        }
    }

    if order.is_empty() || objects.values().all(|(_, g)| g.is_empty()) {
        return Err(Error::NoGrasps);
    }

    let mut scene_objects = Vec::with_capacity(order.len());
    for token in order {
        let (class_id, grasps) = objects.remove(&token).expect("token recorded in order");
        if grasps.is_empty() {
            continue;
        }
        let bbox = grasp_union_box(&grasps, image_size)?;
        scene_objects.push(SceneObject {
            class_id,
            class_name: token,
            bbox,
            grasps,
            instance_mask_ref: None,
            score: None,
        });
    }
    let scene = Scene {
        scene_id: scene_id.to_string(),
        image_size,
        objects: scene_objects,
    };
    scene.validate()?;
    Ok(scene)
}

fn parse_corner(line: &str) -> Option<(f64, f64)> {
    let mut it = line.split_whitespace();
    let x: f64 = it.next()?.parse().ok()?;
    let y: f64 = it.next()?.parse().ok()?;
    if it.next().is_some() {
        return None;
    }
    Some((x, y))
}

/// Converts one 4-corner group to (center, theta, width, height) via edge
/// midpoints: the grasp axis runs between the midpoints of the two jaw
/// edges, its length is the opening, and the jaw extent is the mean jaw
/// edge length.
fn corners_to_grasp(quad: &[(f64, f64, usize)], class_id: u32, opening_edge_first: bool) -> Result<GraspRect> {
    let line = quad[0].2;
    let p: Vec<Point> = quad.iter().map(|&(x, y, _)| Point::new(x, y)).collect();

    let poly_area = Polygon::new(p.clone()).area();
    if poly_area < MIN_CORNER_AREA || !is_convex_quad(&p) {
        return Err(Error::Parse {
            line,
            msg: format!("degenerate or non-convex corner group (area {poly_area:.3})"),
        });
    }

    // Jaw edges are (0,1) and (2,3) by default, (1,2) and (3,0) when the
    // opening side comes first.
    let (j0, j1) = if opening_edge_first {
        ((1, 2), (3, 0))
    } else {
        ((0, 1), (2, 3))
    };
    let mid = |a: usize, b: usize| Point::new(0.5 * (p[a].x + p[b].x), 0.5 * (p[a].y + p[b].y));
    let m1 = mid(j0.0, j0.1);
    let m2 = mid(j1.0, j1.1);
    let dx = m2.x - m1.x;
    let dy = m2.y - m1.y;
    let width = (dx * dx + dy * dy).sqrt();
    let dist = |a: usize, b: usize| ((p[a].x - p[b].x).powi(2) + (p[a].y - p[b].y).powi(2)).sqrt();
    let height = 0.5 * (dist(j0.0, j0.1) + dist(j1.0, j1.1));
    // image y grows downward; angles live in the (x, -y) frame
    let theta = (-dy).atan2(dx);
    let cx = 0.5 * (m1.x + m2.x);
    let cy = 0.5 * (m1.y + m2.y);
    GraspRect::new(cx, cy, theta, width, height, 1.0, class_id).map_err(|e| Error::Parse {
        line,
        msg: e.to_string(),
    })
}

fn is_convex_quad(p: &[Point]) -> bool {
    let mut sign = 0.0f64;
    for i in 0..4 {
        let a = p[i];
        let b = p[(i + 1) % 4];
        let c = p[(i + 2) % 4];
        let cross = (b.x - a.x) * (c.y - b.y) - (b.y - a.y) * (c.x - b.x);
        if cross.abs() < f64::EPSILON {
            continue;
        }
        if sign == 0.0 {
            sign = cross.signum();
        } else if cross.signum() != sign {
            return false;
        }
    }
    sign != 0.0
}
