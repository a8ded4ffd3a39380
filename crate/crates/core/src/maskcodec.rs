//! Bidirectional codec between grasp-rectangle annotations and per-object
//! grasp map stacks: ground-truth encoding produces the training targets,
//! decoding infers grasp configurations back from quality/angle/width maps.
//!
//! Maps are `h x w` arrays indexed `[row, col]`; the pixel at `(row, col)`
//! sits at image coordinates `(x = col, y = row)`.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BoundingBox, GraspRect, Point};

/// Neighboring quality values within this absolute tolerance belong to the
/// same plateau during local-maximum search. Ground-truth quality maps are
/// piecewise constant, so decoded peaks are plateaus rather than single
/// pixels; the tolerance also absorbs float noise from assembled maps.
const PLATEAU_TOLERANCE: f64 = 1e-9;

/// The per-object stack of grasp target maps.
///
/// `quality` is the sigmoid-transferred overlap count, `position` the
/// binary center-region mask, `sin2t`/`cos2t` the doubled-angle embedding
/// and `width` the opening normalized by `CodecConfig::width_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct GraspMaps {
    pub quality: Array2<f64>,
    pub position: Array2<f64>,
    pub sin2t: Array2<f64>,
    pub cos2t: Array2<f64>,
    pub width: Array2<f64>,
}

impl GraspMaps {
    pub fn zeros(h: usize, w: usize) -> Self {
        Self {
            quality: Array2::zeros((h, w)),
            position: Array2::zeros((h, w)),
            sin2t: Array2::zeros((h, w)),
            cos2t: Array2::zeros((h, w)),
            width: Array2::zeros((h, w)),
        }
    }

    /// `(h, w)` of every channel.
    pub fn dims(&self) -> (usize, usize) {
        self.quality.dim()
    }

    /// Checks that all five channels share dimensions and stay within their
    /// value ranges.
    pub fn validate(&self) -> Result<()> {
        let d = self.quality.dim();
        for (name, m) in [
            ("position", &self.position),
            ("sin2t", &self.sin2t),
            ("cos2t", &self.cos2t),
            ("width", &self.width),
        ] {
            if m.dim() != d {
                return Err(Error::DimensionMismatch(format!(
                    "channel {name} is {:?}, quality is {:?}",
                    m.dim(),
                    d
                )));
            }
        }
        let in_range = |m: &Array2<f64>, lo: f64, hi: f64| {
            m.iter().all(|&v| v.is_finite() && v >= lo && v <= hi)
        };
        if !in_range(&self.quality, 0.0, 1.0) {
            return Err(Error::Invalid("quality outside [0, 1]".into()));
        }
        if !in_range(&self.width, 0.0, 1.0) {
            return Err(Error::Invalid("width outside [0, 1]".into()));
        }
        if !in_range(&self.sin2t, -1.0, 1.0) || !in_range(&self.cos2t, -1.0, 1.0) {
            return Err(Error::Invalid("angle channels outside [-1, 1]".into()));
        }
        if !self.position.iter().all(|&v| v == 0.0 || v == 1.0) {
            return Err(Error::Invalid("position mask is not binary".into()));
        }
        Ok(())
    }
}

/// Codec parameters. The paper-level embedding fixes the map semantics;
/// these are the artifact-level constants left open by it.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CodecConfig {
    /// Width normalization constant in pixels.
    pub width_max: f64,
    /// Fraction of the rectangle extent along the grasp axis that carries
    /// position/angle/width values.
    pub center_fraction: f64,
    /// Quality threshold below which decoded candidates are dropped.
    pub q_min: f64,
    /// `height = ratio * width` when a source provides no jaw size.
    pub default_height_ratio: f64,
    /// Use the raw sigmoid of the overlap count as quality instead of the
    /// zero-based transfer `2*sigmoid(c) - 1`.
    pub raw_sigmoid_quality: bool,
}

impl Default for CodecConfig {
    fn default() -> Self {
        Self {
            width_max: 150.0,
            center_fraction: 1.0 / 3.0,
            q_min: 0.1,
            default_height_ratio: 0.5,
            raw_sigmoid_quality: false,
        }
    }
}

impl CodecConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.width_max > 0.0 && self.width_max.is_finite()) {
            return Err(Error::InvalidConfig("width_max must be > 0".into()));
        }
        if !(self.center_fraction > 0.0 && self.center_fraction <= 1.0) {
            return Err(Error::InvalidConfig("center_fraction must be in (0, 1]".into()));
        }
        if !(0.0..1.0).contains(&self.q_min) {
            return Err(Error::InvalidConfig("q_min must be in [0, 1)".into()));
        }
        if !(self.default_height_ratio > 0.0 && self.default_height_ratio.is_finite()) {
            return Err(Error::InvalidConfig("default_height_ratio must be > 0".into()));
        }
        Ok(())
    }

    /// Quality transfer applied to an overlap count: `2*sigmoid(c) - 1`
    /// by default (0 on empty background, saturating toward 1), or the raw
    /// sigmoid when `raw_sigmoid_quality` is set.
    pub fn quality_transfer(&self, count: usize) -> f64 {
        let s = sigmoid(count as f64);
        if self.raw_sigmoid_quality {
            s
        } else {
            2.0 * s - 1.0
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Number of grasp rectangles whose polygon contains the pixel center at
/// `(x, y)`; the boundary counts as inside.
pub fn overlap_count(x: f64, y: f64, grasps: &[GraspRect]) -> usize {
    let p = Point::new(x, y);
    grasps.iter().filter(|g| g.to_polygon().contains(p)).count()
}

/// Embeds grasp rectangles into the five target maps on an `h x w` canvas.
///
/// Quality is the transferred overlap count over each full rectangle. The
/// position/angle/width channels are written on the central
/// `center_fraction` of each rectangle along its grasp axis (full jaw
/// extent across); overlapping center regions resolve to the later grasp
/// in list order.
pub fn encode_grasps(
    grasps: &[GraspRect],
    h: usize,
    w: usize,
    cfg: &CodecConfig,
) -> Result<GraspMaps> {
    cfg.validate()?;
    for (i, g) in grasps.iter().enumerate() {
        if !(g.x() >= 0.0 && g.x() < w as f64 && g.y() >= 0.0 && g.y() < h as f64) {
            return Err(Error::InvalidGrasp(format!(
                "grasp {i} center ({}, {}) outside {h}x{w} canvas",
                g.x(),
                g.y()
            )));
        }
    }

    let mut counts: Array2<u32> = Array2::zeros((h, w));
    for g in grasps {
        let poly = g.to_polygon();
        stamp(&poly, h, w, |r, c| counts[[r, c]] += 1);
    }

    let mut maps = GraspMaps::zeros(h, w);
    // In the default transfer the background maps to exactly 0; in strict
    // raw-sigmoid mode it stays at sigmoid(0) = 0.5.
    maps.quality = counts.mapv(|c| cfg.quality_transfer(c as usize));

    for g in grasps {
        let region = g.scaled_polygon(cfg.center_fraction);
        let s2 = (2.0 * g.angle()).sin();
        let c2 = (2.0 * g.angle()).cos();
        let wn = (g.width() / cfg.width_max).min(1.0);
        stamp(&region, h, w, |r, c| {
            maps.position[[r, c]] = 1.0;
            maps.sin2t[[r, c]] = s2;
            maps.cos2t[[r, c]] = c2;
            maps.width[[r, c]] = wn;
        });
    }
    Ok(maps)
}

/// Visits every canvas pixel whose center lies inside the polygon.
fn stamp(poly: &crate::geometry::Polygon, h: usize, w: usize, mut f: impl FnMut(usize, usize)) {
    let Some(bb) = poly.bounding_box() else {
        return;
    };
    let r0 = bb.y_min.floor().max(0.0) as usize;
    let r1 = (bb.y_max.ceil() as i64).clamp(0, h as i64 - 1) as usize;
    let c0 = bb.x_min.floor().max(0.0) as usize;
    let c1 = (bb.x_max.ceil() as i64).clamp(0, w as i64 - 1) as usize;
    if h == 0 || w == 0 {
        return;
    }
    for r in r0..=r1.min(h - 1) {
        for c in c0..=c1.min(w - 1) {
            if poly.contains(Point::new(c as f64, r as f64)) {
                f(r, c);
            }
        }
    }
}

/// Decodes grasp candidates from a grasp map stack within `region`.
///
/// Candidates are regional maxima of the quality map under 8-connectivity:
/// connected plateaus (values equal within a small tolerance) whose
/// in-region border neighbors are all strictly lower. Each plateau
/// contributes the pixel nearest its centroid, so flat ground-truth
/// plateaus decode to the rectangle center. Candidates below
/// `cfg.q_min` are dropped; the result is sorted by quality descending
/// with row-major ties and truncated to `top_n`.
pub fn decode_grasps(
    maps: &GraspMaps,
    region: &BoundingBox,
    top_n: usize,
    cfg: &CodecConfig,
) -> Vec<GraspRect> {
    decode_channels(
        &maps.quality,
        &maps.sin2t,
        &maps.cos2t,
        &maps.width,
        region,
        top_n,
        cfg,
    )
}

pub(crate) fn decode_channels(
    quality: &Array2<f64>,
    sin2t: &Array2<f64>,
    cos2t: &Array2<f64>,
    width: &Array2<f64>,
    region: &BoundingBox,
    top_n: usize,
    cfg: &CodecConfig,
) -> Vec<GraspRect> {
    let (h, w) = quality.dim();
    let rows = region.pixel_rows(h);
    let cols = region.pixel_cols(w);
    if rows.is_empty() || cols.is_empty() {
        return Vec::new();
    }
    let (r0, r1) = (rows.start, rows.end);
    let (c0, c1) = (cols.start, cols.end);
    let rh = r1 - r0;
    let rw = c1 - c0;

    let mut visited = vec![false; rh * rw];
    let idx = |r: usize, c: usize| (r - r0) * rw + (c - c0);

    // (quality, rep_row, rep_col)
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();

    for sr in r0..r1 {
        for sc in c0..c1 {
            if visited[idx(sr, sc)] {
                continue;
            }
            let seed = quality[[sr, sc]];
            // Flood-fill the plateau of values within tolerance of the seed.
            let mut plateau: Vec<(usize, usize)> = Vec::new();
            let mut queue: Vec<(usize, usize)> = vec![(sr, sc)];
            visited[idx(sr, sc)] = true;
            let mut is_max = true;
            while let Some((r, c)) = queue.pop() {
                plateau.push((r, c));
                for (nr, nc) in neighbors8(r, c, r0, r1, c0, c1) {
                    let v = quality[[nr, nc]];
                    if (v - seed).abs() <= PLATEAU_TOLERANCE {
                        if !visited[idx(nr, nc)] {
                            visited[idx(nr, nc)] = true;
                            queue.push((nr, nc));
                        }
                    } else if v > seed {
                        is_max = false;
                    }
                }
            }
            if !is_max {
                continue;
            }
            // Representative pixel: plateau member nearest the plateau
            // centroid, row-major on ties.
            let n = plateau.len() as f64;
            let cy: f64 = plateau.iter().map(|&(r, _)| r as f64).sum::<f64>() / n;
            let cx: f64 = plateau.iter().map(|&(_, c)| c as f64).sum::<f64>() / n;
            plateau.sort_unstable();
            let &(br, bc) = plateau
                .iter()
                .min_by(|&&(ar, ac), &&(pr, pc)| {
                    let da = (ar as f64 - cy).powi(2) + (ac as f64 - cx).powi(2);
                    let db = (pr as f64 - cy).powi(2) + (pc as f64 - cx).powi(2);
                    da.partial_cmp(&db).unwrap()
                })
                .expect("plateau is non-empty");
            let q = quality[[br, bc]];
            if q >= cfg.q_min {
                candidates.push((q, br, bc));
            }
        }
    }

    candidates.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap()
            .then_with(|| (a.1, a.2).cmp(&(b.1, b.2)))
    });

    let mut out = Vec::with_capacity(top_n.min(candidates.len()));
    for (q, r, c) in candidates.into_iter().take(top_n) {
        let theta = 0.5 * sin2t[[r, c]].atan2(cos2t[[r, c]]);
        let gw = width[[r, c]] * cfg.width_max;
        if gw <= 0.0 {
            // No width signal at the peak (e.g. a ground-truth peak outside
            // any center region); the candidate cannot form a rectangle.
            continue;
        }
        let gh = cfg.default_height_ratio * gw;
        match GraspRect::new(c as f64, r as f64, theta, gw, gh, q.clamp(0.0, 1.0), 0) {
            Ok(g) => out.push(g),
            Err(_) => continue,
        }
    }
    out
}

fn neighbors8(
    r: usize,
    c: usize,
    r0: usize,
    r1: usize,
    c0: usize,
    c1: usize,
) -> impl Iterator<Item = (usize, usize)> {
    let rs = r.saturating_sub(1).max(r0)..=(r + 1).min(r1 - 1);
    rs.flat_map(move |nr| {
        let cs = c.saturating_sub(1).max(c0)..=(c + 1).min(c1 - 1);
        cs.filter_map(move |nc| if nr == r && nc == c { None } else { Some((nr, nc)) })
    })
}
