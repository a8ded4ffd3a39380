//! Instance-wise grasp-accuracy evaluation: a grasp candidate is valid when
//! its class is correct, its angle is within the threshold of some
//! ground-truth grasp and the rotated-rectangle IoU with that grasp exceeds
//! the IoU threshold. Reports both object-level accuracy (per ground-truth
//! object) and image-level accuracy (best-scoring detection per scene), and
//! produces threshold-sweep tables over IoU x angle grids.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::datasets::Scene;
use crate::error::{Error, Result};
use crate::geometry::{angle_delta, rotated_iou, GraspRect};

/// Validity thresholds and detection-matching parameters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MetricConfig {
    /// Rotated-rectangle IoU must exceed this (strict) to count.
    pub iou_thr: f64,
    /// Angle difference must be within this (inclusive), radians.
    pub angle_thr: f64,
    /// Require the predicted class to equal the ground-truth class.
    pub require_class: bool,
    /// Minimum box IoU for a prediction to match a ground-truth object.
    pub match_iou: f64,
    /// Leading grasp candidates considered per object. Headline numbers
    /// score only the top-1 grasp.
    pub top_n: usize,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            iou_thr: 0.25,
            angle_thr: 30f64.to_radians(),
            require_class: true,
            match_iou: 0.5,
            top_n: 1,
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.iou_thr) {
            return Err(Error::InvalidConfig("iou_thr must be in [0, 1)".into()));
        }
        if !(self.angle_thr >= 0.0 && self.angle_thr.is_finite()) {
            return Err(Error::InvalidConfig("angle_thr must be >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.match_iou) {
            return Err(Error::InvalidConfig("match_iou must be in [0, 1]".into()));
        }
        if self.top_n == 0 {
            return Err(Error::InvalidConfig("top_n must be >= 1".into()));
        }
        Ok(())
    }
}

/// Greedy box matching between predicted and ground-truth objects of one
/// scene: pairs are taken in descending box-IoU order (ties by prediction
/// index, then ground-truth index), each side used at most once, and pairs
/// below `match_iou` are discarded. Returns `(pred_index, gt_index)` pairs.
pub fn match_detections(pred: &Scene, gt: &Scene, match_iou: f64) -> Vec<(usize, usize)> {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (pi, p) in pred.objects.iter().enumerate() {
        for (gi, g) in gt.objects.iter().enumerate() {
            let iou = p.bbox.iou(&g.bbox);
            if iou >= match_iou {
                pairs.push((iou, pi, gi));
            }
        }
    }
    pairs.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then((a.1, a.2).cmp(&(b.1, b.2)))
    });
    let mut pred_used = vec![false; pred.objects.len()];
    let mut gt_used = vec![false; gt.objects.len()];
    let mut out = Vec::new();
    for (_, pi, gi) in pairs {
        if !pred_used[pi] && !gt_used[gi] {
            pred_used[pi] = true;
            gt_used[gi] = true;
            out.push((pi, gi));
        }
    }
    out
}

/// The validity criterion for one predicted grasp against a set of
/// ground-truth grasps.
pub fn grasp_valid(
    pred: &GraspRect,
    gt_grasps: &[GraspRect],
    cfg: &MetricConfig,
    class_ok: bool,
) -> bool {
    if cfg.require_class && !class_ok {
        return false;
    }
    gt_grasps.iter().any(|g| {
        angle_delta(pred.angle(), g.angle()) <= cfg.angle_thr
            && rotated_iou(pred, g) > cfg.iou_thr
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalCounts {
    pub scenes: usize,
    pub objects: usize,
    pub matched: usize,
    pub false_positives: usize,
    pub missed: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneResult {
    pub scene_id: String,
    pub valid: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObjectResult {
    pub scene_id: String,
    pub object_index: usize,
    pub valid: bool,
}

/// Aggregate evaluation result. Accuracies are exact ratios of the counts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub image_accuracy: f64,
    pub object_accuracy: f64,
    pub counts: EvalCounts,
    pub scenes: Vec<SceneResult>,
    pub objects: Vec<ObjectResult>,
}

/// Per-scene evaluation, exposed so callers can distribute scenes over
/// workers and reduce with [`aggregate`].
#[derive(Debug, Clone)]
pub struct SceneEval {
    pub scene_id: String,
    /// Image-level verdict: the best-scoring prediction is matched and its
    /// top-1 grasp is valid against the matched object's grasps.
    pub scene_valid: bool,
    /// Per ground-truth object verdicts.
    pub object_valid: Vec<bool>,
    pub pred_objects: usize,
    pub matched: usize,
}

/// Evaluates one scene pair (already aligned by scene id).
pub fn evaluate_scene(pred: &Scene, gt: &Scene, cfg: &MetricConfig) -> SceneEval {
    let matches = match_detections(pred, gt, cfg.match_iou);
    let check = |pi: usize, gi: usize| {
        let p = &pred.objects[pi];
        let g = &gt.objects[gi];
        if g.grasps.is_empty() {
            return false;
        }
        p.grasps
            .iter()
            .take(cfg.top_n)
            .any(|cand| grasp_valid(cand, &g.grasps, cfg, p.class_id == g.class_id))
    };
    let mut object_valid = vec![false; gt.objects.len()];
    for &(pi, gi) in &matches {
        object_valid[gi] = check(pi, gi);
    }

    // Image-level criterion (single-object datasets reduce to the plain
    // Jacquard-style check): rank predictions by score, missing scores
    // count as 1.0, ties by object order.
    let best = pred
        .objects
        .iter()
        .enumerate()
        .max_by(|(ai, a), (bi, b)| {
            let sa = a.score.unwrap_or(1.0);
            let sb = b.score.unwrap_or(1.0);
            sa.partial_cmp(&sb)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(bi.cmp(ai))
        })
        .map(|(i, _)| i);
    let scene_valid = match best {
        Some(pi) => matches
            .iter()
            .find(|&&(mp, _)| mp == pi)
            .map(|&(_, gi)| check(pi, gi))
            .unwrap_or(false),
        None => false,
    };

    SceneEval {
        scene_id: gt.scene_id.clone(),
        scene_valid,
        object_valid,
        pred_objects: pred.objects.len(),
        matched: matches.len(),
    }
}

/// Reduces per-scene evaluations into a report. Order-independent:
/// outputs are sorted by scene id.
pub fn aggregate(mut evals: Vec<SceneEval>) -> EvalReport {
    evals.sort_by(|a, b| a.scene_id.cmp(&b.scene_id));
    let mut counts = EvalCounts::default();
    let mut scenes = Vec::with_capacity(evals.len());
    let mut objects = Vec::new();
    let mut valid_scenes = 0usize;
    let mut valid_objects = 0usize;
    for e in &evals {
        counts.scenes += 1;
        counts.objects += e.object_valid.len();
        counts.matched += e.matched;
        counts.false_positives += e.pred_objects - e.matched;
        counts.missed += e.object_valid.len() - e.matched;
        if e.scene_valid {
            valid_scenes += 1;
        }
        scenes.push(SceneResult {
            scene_id: e.scene_id.clone(),
            valid: e.scene_valid,
        });
        for (oi, &v) in e.object_valid.iter().enumerate() {
            if v {
                valid_objects += 1;
            }
            objects.push(ObjectResult {
                scene_id: e.scene_id.clone(),
                object_index: oi,
                valid: v,
            });
        }
    }
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    EvalReport {
        image_accuracy: ratio(valid_scenes, counts.scenes),
        object_accuracy: ratio(valid_objects, counts.objects),
        counts,
        scenes,
        objects,
    }
}

/// Pairs prediction and ground-truth scenes by scene id (1:1 required).
pub fn pair_scenes<'a>(
    pred: &'a [Scene],
    gt: &'a [Scene],
) -> Result<Vec<(&'a Scene, &'a Scene)>> {
    let mut pred_map: BTreeMap<&str, &Scene> = BTreeMap::new();
    for p in pred {
        if pred_map.insert(&p.scene_id, p).is_some() {
            return Err(Error::SceneMismatch(format!(
                "duplicate prediction scene id '{}'",
                p.scene_id
            )));
        }
    }
    let mut gt_seen: BTreeMap<&str, ()> = BTreeMap::new();
    let mut pairs = Vec::with_capacity(gt.len());
    for g in gt {
        if gt_seen.insert(&g.scene_id, ()).is_some() {
            return Err(Error::SceneMismatch(format!(
                "duplicate ground-truth scene id '{}'",
                g.scene_id
            )));
        }
        let p = pred_map.remove(g.scene_id.as_str()).ok_or_else(|| {
            Error::SceneMismatch(format!("no prediction for scene '{}'", g.scene_id))
        })?;
        pairs.push((p, g));
    }
    if let Some((id, _)) = pred_map.into_iter().next() {
        return Err(Error::SceneMismatch(format!(
            "prediction scene '{id}' has no ground truth"
        )));
    }
    Ok(pairs)
}

/// Full evaluation over aligned scene lists.
pub fn evaluate(pred: &[Scene], gt: &[Scene], cfg: &MetricConfig) -> Result<EvalReport> {
    cfg.validate()?;
    let evals = pair_scenes(pred, gt)?
        .into_iter()
        .map(|(p, g)| evaluate_scene(p, g, cfg))
        .collect();
    Ok(aggregate(evals))
}

/// IoU thresholds of the default sweep grid.
pub const DEFAULT_SWEEP_IOUS: [f64; 3] = [0.25, 0.30, 0.35];
/// Angle thresholds of the default sweep grid, degrees.
pub const DEFAULT_SWEEP_ANGLES_DEG: [f64; 6] = [5.0, 10.0, 15.0, 20.0, 25.0, 30.0];

/// One cell of a threshold sweep. `angle_thr` is stored in radians; the
/// CSV emitter converts to degrees.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SweepCell {
    pub iou_thr: f64,
    pub angle_thr: f64,
    pub image_accuracy: f64,
    pub object_accuracy: f64,
    pub scenes: usize,
    pub objects: usize,
}

/// Evaluates the full IoU x angle grid (IoU outer, angle inner).
pub fn threshold_sweep(
    pred: &[Scene],
    gt: &[Scene],
    ious: &[f64],
    angles: &[f64],
    base: &MetricConfig,
) -> Result<Vec<SweepCell>> {
    if ious.is_empty() || angles.is_empty() {
        return Err(Error::InvalidConfig("threshold lists must be non-empty".into()));
    }
    let mut cells = Vec::with_capacity(ious.len() * angles.len());
    for &iou in ious {
        for &angle in angles {
            let cfg = MetricConfig {
                iou_thr: iou,
                angle_thr: angle,
                ..*base
            };
            let report = evaluate(pred, gt, &cfg)?;
            cells.push(SweepCell {
                iou_thr: iou,
                angle_thr: angle,
                image_accuracy: report.image_accuracy,
                object_accuracy: report.object_accuracy,
                scenes: report.counts.scenes,
                objects: report.counts.objects,
            });
        }
    }
    Ok(cells)
}

/// CSV rendering of a sweep; angle thresholds are reported in degrees.
pub fn sweep_csv(cells: &[SweepCell]) -> String {
    let mut out = String::from("iou_thr,angle_thr,image_acc,object_acc,n_scenes,n_objects\n");
    for c in cells {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            c.iou_thr,
            c.angle_thr.to_degrees().round(),
            c.image_accuracy,
            c.object_accuracy,
            c.scenes,
            c.objects
        ));
    }
    out
}
