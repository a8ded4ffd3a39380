use std::path::PathBuf;

use clap::Args;
use rayon::prelude::*;

use graspkit::evaluator::{
    aggregate, evaluate_scene, pair_scenes, sweep_csv, MetricConfig, SweepCell,
};

use super::common::{build_pool, parse_f64_list, read_scenes_file, write_output};
use super::{CmdResult, Failure};

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Predicted scenes (JSON-lines)
    #[arg(long)]
    pub pred: PathBuf,
    /// Ground-truth scenes (JSON-lines)
    #[arg(long)]
    pub gt: PathBuf,
    /// Rotated-rectangle IoU threshold (validity requires IoU strictly above)
    #[arg(long, default_value_t = 0.25)]
    pub iou_thr: f64,
    /// Angle threshold in degrees (inclusive)
    #[arg(long, default_value_t = 30.0)]
    pub angle_thr: f64,
    /// Box IoU for matching predictions to ground-truth objects
    #[arg(long, default_value_t = 0.5)]
    pub match_iou: f64,
    /// Score grasps without requiring the predicted class to match
    #[arg(long)]
    pub no_require_class: bool,
    /// Consider the best of the leading top-n grasps per object
    #[arg(long, default_value_t = 1)]
    pub top_n: usize,
    /// Worker pool size for per-scene work
    #[arg(long, default_value_t = 1)]
    pub parallelism: usize,
    /// Output file for the JSON report (default: stdout)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl EvalArgs {
    fn config(&self) -> Result<MetricConfig, Failure> {
        let cfg = MetricConfig {
            iou_thr: self.iou_thr,
            angle_thr: self.angle_thr.to_radians(),
            require_class: !self.no_require_class,
            match_iou: self.match_iou,
            top_n: self.top_n,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn run_eval(args: &EvalArgs) -> CmdResult {
    let cfg = args.config()?;
    let pred = read_scenes_file(&args.pred)?;
    let gt = read_scenes_file(&args.gt)?;
    let pairs = pair_scenes(&pred, &gt)?;
    let pool = build_pool(args.parallelism)?;
    let evals = pool.install(|| {
        pairs
            .par_iter()
            .map(|(p, g)| evaluate_scene(p, g, &cfg))
            .collect::<Vec<_>>()
    });
    let report = aggregate(evals);
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| Failure::Internal(format!("serialization failed: {e}")))?;
    write_output(args.out.as_deref(), &json)
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    /// Predicted scenes (JSON-lines)
    #[arg(long)]
    pub pred: PathBuf,
    /// Ground-truth scenes (JSON-lines)
    #[arg(long)]
    pub gt: PathBuf,
    /// Comma-separated IoU thresholds
    #[arg(long, default_value = "0.25,0.30,0.35")]
    pub iou_values: String,
    /// Comma-separated angle thresholds in degrees
    #[arg(long, default_value = "5,10,15,20,25,30")]
    pub angle_values: String,
    /// Box IoU for matching predictions to ground-truth objects
    #[arg(long, default_value_t = 0.5)]
    pub match_iou: f64,
    /// Score grasps without requiring the predicted class to match
    #[arg(long)]
    pub no_require_class: bool,
    /// Worker pool size (cells are evaluated in parallel)
    #[arg(long, default_value_t = 1)]
    pub parallelism: usize,
    /// Output CSV file (default: stdout)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run_sweep(args: &SweepArgs) -> CmdResult {
    let ious = parse_f64_list(&args.iou_values, "--iou-values")?;
    let angles_deg = parse_f64_list(&args.angle_values, "--angle-values")?;
    let pred = read_scenes_file(&args.pred)?;
    let gt = read_scenes_file(&args.gt)?;
    // fail early on misaligned ids
    pair_scenes(&pred, &gt)?;

    let base = MetricConfig {
        match_iou: args.match_iou,
        require_class: !args.no_require_class,
        ..MetricConfig::default()
    };
    let grid: Vec<(f64, f64)> = ious
        .iter()
        .flat_map(|&i| angles_deg.iter().map(move |&a| (i, a.to_radians())))
        .collect();
    let pool = build_pool(args.parallelism)?;
    let cells: Result<Vec<SweepCell>, Failure> = pool.install(|| {
        grid.par_iter()
            .map(|&(iou, angle)| {
                let cfg = MetricConfig {
                    iou_thr: iou,
                    angle_thr: angle,
                    ..base
                };
                cfg.validate()?;
                let report = graspkit::evaluator::evaluate(&pred, &gt, &cfg)?;
                Ok(SweepCell {
                    iou_thr: iou,
                    angle_thr: angle,
                    image_accuracy: report.image_accuracy,
                    object_accuracy: report.object_accuracy,
                    scenes: report.counts.scenes,
                    objects: report.counts.objects,
                })
            })
            .collect()
    });
    write_output(args.out.as_deref(), &sweep_csv(&cells?))
}
