use clap::Args;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use graspkit::geometry::{angle_delta, rotated_iou, BoundingBox, GraspRect};
use graspkit::loss::LossWeights;
use graspkit::maskcodec::{decode_grasps, encode_grasps, CodecConfig};
use graspkit::oracle::raster_iou;

use super::gradcheck::run_trials;
use super::{CmdResult, Failure};

#[derive(Args, Debug)]
pub struct SelftestArgs {
    /// Seed for the randomized cases; changes the cases, not the verdict
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Test hook: bias added to the exact IoU inside the oracle comparison
    #[arg(long, hide = true, default_value_t = 0.0)]
    pub inject_iou_bias: f64,
}

pub fn run(args: &SelftestArgs) -> CmdResult {
    let mut all_ok = true;
    all_ok &= iou_oracle_suite(args.seed, args.inject_iou_bias);
    all_ok &= codec_round_trip_suite(args.seed.wrapping_add(1));
    all_ok &= grad_check_suite(args.seed.wrapping_add(2))?;
    if all_ok {
        println!("selftest: PASS");
        Ok(())
    } else {
        println!("selftest: FAIL");
        Err(Failure::Internal("selftest failed".into()))
    }
}

/// 1000 random rectangle pairs: exact polygon-clipping IoU against the
/// 512x512 rasterized counting reference, within 0.02.
fn iou_oracle_suite(seed: u64, bias: f64) -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rect = |rng: &mut ChaCha8Rng| {
        GraspRect::new(
            rng.random_range(0.0..256.0),
            rng.random_range(0.0..256.0),
            rng.random_range(-std::f64::consts::FRAC_PI_2..std::f64::consts::FRAC_PI_2),
            rng.random_range(4.0..64.0),
            rng.random_range(4.0..64.0),
            1.0,
            0,
        )
        .expect("valid by construction")
    };
    let mut passed = 0usize;
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let a = rect(&mut rng);
        let b = rect(&mut rng);
        let exact = rotated_iou(&a, &b) + bias;
        let reference = raster_iou(&a, &b, 512);
        let diff = (exact - reference).abs();
        worst = worst.max(diff);
        passed += (diff <= 0.02) as usize;
    }
    let ok = passed == 1000;
    println!(
        "iou-oracle: {passed}/1000 pairs within 0.02 of the rasterized reference (worst {worst:.4}) {}",
        verdict(ok)
    );
    ok
}

/// 200 random single-grasp scenes: encode then decode recovers the center
/// within 1 px, the angle within 1 degree and the width within 2%.
fn codec_round_trip_suite(seed: u64) -> bool {
    let cfg = CodecConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut passed = 0usize;
    for _ in 0..200 {
        let width = rng.random_range(10.0..cfg.width_max);
        let margin = width / 2.0 + 2.0;
        let g = GraspRect::new(
            rng.random_range(margin..400.0 - margin),
            rng.random_range(margin..400.0 - margin),
            rng.random_range(-std::f64::consts::FRAC_PI_2..std::f64::consts::FRAC_PI_2),
            width,
            cfg.default_height_ratio * width,
            1.0,
            0,
        )
        .expect("valid by construction");
        let ok = encode_grasps(&[g], 400, 400, &cfg)
            .ok()
            .and_then(|maps| decode_grasps(&maps, &BoundingBox::full(400, 400), 1, &cfg).pop())
            .is_some_and(|d| {
                (d.x() - g.x()).abs() <= 1.0
                    && (d.y() - g.y()).abs() <= 1.0
                    && angle_delta(d.angle(), g.angle()) <= 1f64.to_radians()
                    && (d.width() - g.width()).abs() / g.width() <= 0.02
            });
        passed += ok as usize;
    }
    let ok = passed == 200;
    println!(
        "codec-roundtrip: {passed}/200 scenes within 1 px / 1 deg / 2% width {}",
        verdict(ok)
    );
    ok
}

/// 20 seeded trials of the analytic-vs-finite-difference gradient check at
/// k = 16, step 1e-3, threshold 1e-4.
fn grad_check_suite(seed: u64) -> Result<bool, Failure> {
    let errors = run_trials(seed, 24, 24, 16, 20, 1e-3, &LossWeights::default())?;
    let passed = errors.iter().filter(|e| **e < 1e-4).count();
    let worst = errors.iter().cloned().fold(0.0f64, f64::max);
    let ok = passed == errors.len();
    println!(
        "grad-check: {passed}/{} trials with max rel error < 1e-4 (worst {worst:.3e}) {}",
        errors.len(),
        verdict(ok)
    );
    Ok(ok)
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}
