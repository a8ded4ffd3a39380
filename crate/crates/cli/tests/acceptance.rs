//! Acceptance suite: one test per release criterion, each asserting the
//! pinned tolerance and printing a `[PASS]` line (run with `--nocapture`
//! to see them). Criteria cover the IoU oracle, the codec round trip,
//! assembly contracts, the gradient check, the metric fixtures, sweep
//! structure, the end-to-end offline pipeline, NMS properties, file round
//! trips and post-network throughput.

mod common;

use std::f64::consts::FRAC_PI_2;
use std::fs;
use std::time::Instant;

use ndarray::Array3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use graspkit::assembly::{
    assemble, infer_scene, nms, CoefficientSet, Detection, InferParams, PrototypeStack,
};
use graspkit::datasets::{
    read_scenes, read_tensor, write_scenes, write_tensor, Scene, SceneObject, Tensor,
};
use graspkit::evaluator::{evaluate, MetricConfig};
use graspkit::geometry::{angle_delta, rotated_iou, BoundingBox, GraspRect};
use graspkit::maskcodec::{decode_grasps, encode_grasps, CodecConfig};
use graspkit::oracle::raster_iou;

use common::run_in;

fn random_rect(rng: &mut ChaCha8Rng) -> GraspRect {
    GraspRect::new(
        rng.random_range(0.0..256.0),
        rng.random_range(0.0..256.0),
        rng.random_range(-FRAC_PI_2..FRAC_PI_2),
        rng.random_range(4.0..64.0),
        rng.random_range(4.0..64.0),
        1.0,
        0,
    )
    .unwrap()
}

/// Rotated-IoU oracle: 1000 seeded random rectangle pairs within 0.02 of
/// the 512x512 rasterized counting reference, in under 30 s.
#[test]
fn criterion_rotated_iou_oracle() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let a = random_rect(&mut rng);
        let b = random_rect(&mut rng);
        let diff = (rotated_iou(&a, &b) - raster_iou(&a, &b, 512)).abs();
        worst = worst.max(diff);
        assert!(diff <= 0.02, "pair diverged from the oracle by {diff}");
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "oracle run took {elapsed:?}");
    println!("[PASS] rotated-iou oracle: 1000 pairs within 0.02 (worst {worst:.4}, {elapsed:?})");
}

/// Codec round trip: 200 seeded single-grasp scenes recover the center
/// within 1 px, the angle within 1 degree and the width within 2%, in
/// under 10 s.
#[test]
fn criterion_codec_round_trip() {
    let start = Instant::now();
    let cfg = CodecConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for i in 0..200 {
        let width = rng.random_range(10.0..cfg.width_max);
        let margin = width / 2.0 + 2.0;
        let g = GraspRect::new(
            rng.random_range(margin..400.0 - margin),
            rng.random_range(margin..400.0 - margin),
            rng.random_range(-FRAC_PI_2..FRAC_PI_2),
            width,
            cfg.default_height_ratio * width,
            1.0,
            0,
        )
        .unwrap();
        let maps = encode_grasps(&[g], 400, 400, &cfg).unwrap();
        let out = decode_grasps(&maps, &BoundingBox::full(400, 400), 1, &cfg);
        assert_eq!(out.len(), 1, "scene {i} decoded nothing");
        let d = &out[0];
        assert!(
            (d.x() - g.x()).abs() <= 1.0 && (d.y() - g.y()).abs() <= 1.0,
            "scene {i}: center ({}, {}) vs ({}, {})",
            d.x(),
            d.y(),
            g.x(),
            g.y()
        );
        assert!(angle_delta(d.angle(), g.angle()) <= 1f64.to_radians(), "scene {i}: angle");
        assert!((d.width() - g.width()).abs() / g.width() <= 0.02, "scene {i}: width");
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "round trip took {elapsed:?}");
    println!("[PASS] codec round trip: 200 scenes within 1 px / 1 deg / 2% ({elapsed:?})");
}

/// Assembly contracts: sigmoid channels stay inside (0, 1) and tanh
/// channels inside (-1, 1), and the pre-activation is linear in the
/// coefficients within 1e-9, over 100 random draws.
#[test]
fn criterion_assembly_contracts() {
    let mut rng = ChaCha8Rng::seed_from_u64(5150);
    for _ in 0..100 {
        let k = rng.random_range(1..40usize);
        let h = rng.random_range(4..24usize);
        let w = rng.random_range(4..24usize);
        let protos = PrototypeStack::new(Array3::from_shape_fn((h, w, k), |_| {
            rng.random_range(-1.0..1.0)
        }))
        .unwrap();
        let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            (0..k).map(|_| rng.random_range(-1.0..1.0)).collect()
        };
        let coeffs = CoefficientSet {
            instance: draw(&mut rng),
            quality: draw(&mut rng),
            sin2t: draw(&mut rng),
            cos2t: draw(&mut rng),
            width: draw(&mut rng),
            extra: Vec::new(),
        };
        let masks = assemble(&protos, &coeffs).unwrap();
        for m in [&masks.instance, &masks.quality, &masks.width] {
            assert!(m.iter().all(|&v| v > 0.0 && v < 1.0));
        }
        for m in [&masks.sin2t, &masks.cos2t] {
            assert!(m.iter().all(|&v| v > -1.0 && v < 1.0));
        }

        let c2 = draw(&mut rng);
        let sum: Vec<f64> = coeffs.quality.iter().zip(&c2).map(|(a, b)| a + b).collect();
        let p1 = protos.project(&coeffs.quality).unwrap();
        let p2 = protos.project(&c2).unwrap();
        let ps = protos.project(&sum).unwrap();
        for ((a, b), s) in p1.iter().zip(p2.iter()).zip(ps.iter()) {
            assert!((a + b - s).abs() <= 1e-9);
        }
    }
    println!("[PASS] assembly contracts: ranges and pre-activation linearity on 100 draws");
}

/// Gradient check: analytic gradient of the grasp loss through assembly
/// matches central finite differences (step 1e-3) with max relative error
/// below 1e-4 on 20 seeded k=16 trials, in under 10 s.
#[test]
fn criterion_gradient_check() {
    let start = Instant::now();
    let (code, stdout, stderr) = run_in(
        std::env::temp_dir().as_path(),
        &["gradcheck", "--k", "16", "--trials", "20", "--step", "1e-3", "--seed", "31"],
    );
    let elapsed = start.elapsed();
    assert_eq!(code, 0, "gradcheck failed:\n{stdout}{stderr}");
    assert!(stdout.contains("20/20 trials"), "{stdout}");
    assert!(elapsed.as_secs_f64() < 10.0, "gradcheck took {elapsed:?}");
    println!("[PASS] gradient check: 20 trials, k=16, step 1e-3, max rel error < 1e-4 ({elapsed:?})");
}

fn single_object_scene(id: &str, grasps: Vec<GraspRect>, bbox: BoundingBox, score: Option<f64>) -> Scene {
    let class_id = grasps.first().map(|g| g.class_id()).unwrap_or(0);
    Scene {
        scene_id: id.to_string(),
        image_size: (200, 200),
        objects: vec![SceneObject {
            class_id,
            class_name: class_id.to_string(),
            bbox,
            grasps,
            instance_mask_ref: None,
            score,
        }],
    }
}

/// Metric fixture: the hand-verified 4-scene micro-dataset scores exactly
/// 0.75 image-level, and the constructed IoU-0.28 pair is valid at the
/// 0.25 threshold but not at 0.30 or 0.35.
#[test]
fn criterion_metric_fixture() {
    let bbox = BoundingBox::new(20.0, 20.0, 120.0, 120.0).unwrap();
    let base = |theta: f64| GraspRect::new(60.0, 60.0, theta, 32.0, 16.0, 1.0, 0).unwrap();
    let gt: Vec<Scene> = (0..4)
        .map(|i| single_object_scene(&format!("m{i}"), vec![base(0.3)], bbox, None))
        .collect();
    // three exact predictions, one rotated 45 degrees out of tolerance
    let pred: Vec<Scene> = (0..4)
        .map(|i| {
            let g = if i < 3 { base(0.3) } else { base(0.3 + std::f64::consts::FRAC_PI_4) };
            single_object_scene(&format!("m{i}"), vec![g], bbox, Some(0.9))
        })
        .collect();
    let report = evaluate(&pred, &gt, &MetricConfig::default()).unwrap();
    assert_eq!(report.image_accuracy, 0.75);

    // and through the binary
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, scenes: &[Scene]| {
        let mut buf = Vec::new();
        write_scenes(&mut buf, scenes).unwrap();
        fs::write(dir.path().join(name), buf).unwrap();
    };
    write("gt.jsonl", &gt);
    write("pred.jsonl", &pred);
    let (code, stdout, _) = run_in(dir.path(), &["eval", "--pred", "pred.jsonl", "--gt", "gt.jsonl"]);
    assert_eq!(code, 0);
    let json: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(json["image_accuracy"].as_f64().unwrap(), 0.75);

    // iou-0.28 pair: axis-aligned 32x16 rectangles offset by 18 px
    let g_gt = GraspRect::new(50.0, 50.0, 0.0, 32.0, 16.0, 1.0, 0).unwrap();
    let g_pred = GraspRect::new(68.0, 50.0, 0.0, 32.0, 16.0, 1.0, 0).unwrap();
    let iou = rotated_iou(&g_pred, &g_gt);
    assert!((iou - 0.28).abs() < 1e-12, "constructed iou {iou}");
    assert!((raster_iou(&g_pred, &g_gt, 512) - iou).abs() <= 0.02);
    let flip_box = BoundingBox::new(20.0, 30.0, 100.0, 70.0).unwrap();
    let flip_gt = vec![single_object_scene("f", vec![g_gt], flip_box, None)];
    let flip_pred = vec![single_object_scene("f", vec![g_pred], flip_box, Some(0.9))];
    for (thr, expect) in [(0.25, 1.0), (0.30, 0.0), (0.35, 0.0)] {
        let cfg = MetricConfig {
            iou_thr: thr,
            ..MetricConfig::default()
        };
        let r = evaluate(&flip_pred, &flip_gt, &cfg).unwrap();
        assert_eq!(r.object_accuracy, expect, "threshold {thr}");
    }
    println!("[PASS] metric fixture: 4-scene accuracy exactly 0.75; iou-0.28 flips between 0.25 and 0.30");
}

/// Sweep structure and monotonicity: the sweep command emits the 3x6 grid
/// (IoU 25/30/35% x angle 5..30 deg) and accuracy is non-increasing along
/// the IoU axis and non-decreasing along the angle axis.
#[test]
fn criterion_sweep_structure_and_monotonicity() {
    let bbox = BoundingBox::new(20.0, 20.0, 120.0, 120.0).unwrap();
    let gt_grasp = GraspRect::new(60.0, 60.0, 0.2, 32.0, 16.0, 1.0, 0).unwrap();
    // predictions spanning angle errors and IoU levels so cells vary
    let preds = [
        GraspRect::new(60.0, 60.0, 0.2, 32.0, 16.0, 1.0, 0).unwrap(), // exact
        GraspRect::new(60.0, 60.0, 0.2 + 8f64.to_radians(), 32.0, 16.0, 1.0, 0).unwrap(),
        GraspRect::new(60.0, 60.0, 0.2 + 22f64.to_radians(), 32.0, 16.0, 1.0, 0).unwrap(),
        GraspRect::new(78.0, 60.0, 0.2, 32.0, 16.0, 1.0, 0).unwrap(), // iou 0.28
        GraspRect::new(76.5, 60.0, 0.2, 32.0, 16.0, 1.0, 0).unwrap(), // iou ~0.32
        GraspRect::new(60.0, 60.0, 0.2 + 1.3, 10.0, 5.0, 1.0, 0).unwrap(), // hopeless
    ];
    let gt: Vec<Scene> = (0..6)
        .map(|i| single_object_scene(&format!("s{i}"), vec![gt_grasp], bbox, None))
        .collect();
    let pred: Vec<Scene> = preds
        .iter()
        .enumerate()
        .map(|(i, g)| single_object_scene(&format!("s{i}"), vec![*g], bbox, Some(0.9)))
        .collect();

    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, scenes: &[Scene]| {
        let mut buf = Vec::new();
        write_scenes(&mut buf, scenes).unwrap();
        fs::write(dir.path().join(name), buf).unwrap();
    };
    write("gt.jsonl", &gt);
    write("pred.jsonl", &pred);
    let (code, stdout, stderr) =
        run_in(dir.path(), &["sweep", "--pred", "pred.jsonl", "--gt", "gt.jsonl"]);
    assert_eq!(code, 0, "{stderr}");

    let lines: Vec<&str> = stdout.trim().lines().collect();
    assert_eq!(lines[0], "iou_thr,angle_thr,image_acc,object_acc,n_scenes,n_objects");
    assert_eq!(lines.len(), 19, "header plus 3x6 data rows");
    let mut grid = vec![vec![(0.0f64, 0.0f64); 6]; 3];
    let want_iou = [0.25, 0.30, 0.35];
    let want_angle = [5.0, 10.0, 15.0, 20.0, 25.0, 30.0];
    for (r, line) in lines[1..].iter().enumerate() {
        let f: Vec<f64> = line.split(',').map(|t| t.parse().unwrap()).collect();
        let (ii, ai) = (r / 6, r % 6);
        assert!((f[0] - want_iou[ii]).abs() < 1e-12, "iou axis at row {r}");
        assert!((f[1] - want_angle[ai]).abs() < 1e-12, "angle axis at row {r}");
        assert_eq!(f[4] as usize, 6);
        assert_eq!(f[5] as usize, 6);
        grid[ii][ai] = (f[2], f[3]);
    }
    for ai in 0..6 {
        for ii in 1..3 {
            assert!(grid[ii][ai].0 <= grid[ii - 1][ai].0, "image acc not monotone in iou");
            assert!(grid[ii][ai].1 <= grid[ii - 1][ai].1, "object acc not monotone in iou");
        }
    }
    for ii in 0..3 {
        for ai in 1..6 {
            assert!(grid[ii][ai].0 >= grid[ii][ai - 1].0, "image acc not monotone in angle");
            assert!(grid[ii][ai].1 >= grid[ii][ai - 1].1, "object acc not monotone in angle");
        }
    }
    // the fixture actually exercises both axes
    assert!(grid[0][5].0 > grid[2][0].0);
    println!("[PASS] sweep: 3x6 grid with monotone accuracy along both axes");
}

/// Synthetic ground truth for the end-to-end pipeline: objects on
/// disjoint cells, one exactly-representable grasp each (height is the
/// codec's default ratio of width).
fn synthetic_scenes(seed: u64, n: usize) -> Vec<Scene> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cells = [(0usize, 0usize), (0, 1), (1, 0), (1, 1)];
    (0..n)
        .map(|i| {
            let n_objects = rng.random_range(1..4usize);
            let objects = (0..n_objects)
                .map(|oi| {
                    let (cr, cc) = cells[oi];
                    let (y0, x0) = (cr as f64 * 48.0 + 4.0, cc as f64 * 48.0 + 4.0);
                    let bbox = BoundingBox::new(x0, y0, x0 + 40.0, y0 + 40.0).unwrap();
                    let class_id = rng.random_range(1..6u32);
                    let cx = x0 + 20.0 + rng.random_range(-3.0..3.0);
                    let cy = y0 + 20.0 + rng.random_range(-3.0..3.0);
                    let width = rng.random_range(12.0..26.0);
                    let grasp = GraspRect::new(
                        cx,
                        cy,
                        rng.random_range(-FRAC_PI_2..FRAC_PI_2),
                        width,
                        0.5 * width,
                        1.0,
                        class_id,
                    )
                    .unwrap();
                    SceneObject {
                        class_id,
                        class_name: class_id.to_string(),
                        bbox,
                        grasps: vec![grasp],
                        instance_mask_ref: None,
                        score: None,
                    }
                })
                .collect();
            Scene {
                scene_id: format!("synth_{i}"),
                image_size: (96, 96),
                objects,
            }
        })
        .collect()
}

/// End-to-end offline pipeline: fit-fixture coefficients over a seeded
/// prototype bank, run infer, and evaluate at default thresholds; the
/// 10-scene synthetic set scores 1.0 and every decoded grasp carries its
/// detection's class and lies inside its box.
#[test]
fn criterion_end_to_end_pipeline() {
    let gt = synthetic_scenes(314, 10);
    let dir = tempfile::tempdir().unwrap();
    let mut buf = Vec::new();
    write_scenes(&mut buf, &gt).unwrap();
    fs::write(dir.path().join("gt.jsonl"), buf).unwrap();

    let (code, _, stderr) = run_in(
        dir.path(),
        &["fit-fixture", "--scenes", "gt.jsonl", "--k", "32", "--seed", "11",
          "--out-protos", "protos", "--out-detections", "dets.jsonl"],
    );
    assert_eq!(code, 0, "fit-fixture: {stderr}");
    let (code, _, stderr) = run_in(
        dir.path(),
        &["infer", "--protos", "protos", "--detections", "dets.jsonl", "--out", "pred.jsonl"],
    );
    assert_eq!(code, 0, "infer: {stderr}");
    let (code, stdout, stderr) = run_in(
        dir.path(),
        &["eval", "--pred", "pred.jsonl", "--gt", "gt.jsonl"],
    );
    assert_eq!(code, 0, "eval: {stderr}");
    let json: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(json["image_accuracy"].as_f64().unwrap(), 1.0);
    assert_eq!(json["object_accuracy"].as_f64().unwrap(), 1.0);

    // single-stage affiliation: grasps carry their detection's class and
    // stay inside its box
    let pred =
        read_scenes(std::io::BufReader::new(fs::File::open(dir.path().join("pred.jsonl")).unwrap()))
            .unwrap();
    assert_eq!(pred.len(), 10);
    let mut grasps = 0usize;
    for scene in &pred {
        for obj in &scene.objects {
            assert!(!obj.grasps.is_empty());
            for g in &obj.grasps {
                assert_eq!(g.class_id(), obj.class_id);
                assert!(obj.bbox.contains_point(g.x(), g.y()));
                grasps += 1;
            }
        }
    }
    assert!(grasps >= 10);
    println!("[PASS] end-to-end pipeline: 10 synthetic scenes at accuracy 1.0 with affiliated grasps");
}

/// NMS properties over 500 seeded random detection sets: idempotence and
/// per-class top-score preservation.
#[test]
fn criterion_nms_properties() {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    for _ in 0..500 {
        let n = rng.random_range(0..30usize);
        let dets: Vec<Detection> = (0..n)
            .map(|_| {
                let x = rng.random_range(0.0..100.0);
                let y = rng.random_range(0.0..100.0);
                Detection {
                    class_id: rng.random_range(0..4u32),
                    score: rng.random_range(0.0..1.0),
                    bbox: BoundingBox::new(
                        x,
                        y,
                        x + rng.random_range(1.0..50.0),
                        y + rng.random_range(1.0..50.0),
                    )
                    .unwrap(),
                    coeffs: CoefficientSet::zeros(1),
                }
            })
            .collect();
        let iou_thr = rng.random_range(0.2..0.8);
        let score_thr = rng.random_range(0.0..0.3);
        let once = nms(&dets, iou_thr, score_thr);
        let twice = nms(&once, iou_thr, score_thr);
        assert_eq!(once, twice, "nms not idempotent");
        assert!(once.len() <= dets.len());
        for class in 0..4u32 {
            if let Some(top) = dets
                .iter()
                .filter(|d| d.class_id == class && d.score >= score_thr)
                .max_by(|a, b| a.score.partial_cmp(&b.score).unwrap())
            {
                assert!(
                    once.iter().any(|d| d.class_id == class && d.score == top.score),
                    "top detection of class {class} was suppressed"
                );
            }
        }
    }
    println!("[PASS] nms: idempotence and top-score preservation on 500 random sets");
}

/// File round trips: GKT1 tensors are bit-exact and JSON-lines scenes are
/// value-exact over 50 random instances each.
#[test]
fn criterion_file_round_trips() {
    let mut rng = ChaCha8Rng::seed_from_u64(4242);
    for _ in 0..50 {
        let dims = if rng.random_range(0..2) == 0 {
            vec![rng.random_range(1..12usize), rng.random_range(1..12usize)]
        } else {
            vec![
                rng.random_range(1..6usize),
                rng.random_range(1..10usize),
                rng.random_range(1..10usize),
            ]
        };
        let n: usize = dims.iter().product();
        let data: Vec<f32> = (0..n).map(|_| rng.random_range(-1e6f32..1e6f32)).collect();
        let t = Tensor::new(dims, data).unwrap();
        let bytes = write_tensor(&t);
        let back = read_tensor(&bytes).unwrap();
        assert_eq!(write_tensor(&back), bytes, "tensor bytes changed");
    }

    for i in 0..50 {
        let scenes = synthetic_scenes(1000 + i, 3);
        let mut buf = Vec::new();
        write_scenes(&mut buf, &scenes).unwrap();
        let back = read_scenes(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(scenes, back, "scene values changed");
    }
    println!("[PASS] file round trips: 50 bit-exact tensors, 50 value-exact scene files");
}

/// Throughput sanity: the post-network path (assemble within the box plus
/// decode) over a 138x138x32 prototype stack and 16 detections completes
/// in under 25 ms single-threaded.
#[test]
fn criterion_throughput() {
    let mut rng = ChaCha8Rng::seed_from_u64(888);
    let protos = PrototypeStack::new(Array3::from_shape_fn((138, 138, 32), |_| {
        rng.random_range(-1.0..1.0)
    }))
    .unwrap();
    let dets: Vec<Detection> = (0..16)
        .map(|i| {
            let x = rng.random_range(0.0..80.0);
            let y = rng.random_range(0.0..80.0);
            let bbox = BoundingBox::new(
                x,
                y,
                x + rng.random_range(30.0..58.0),
                y + rng.random_range(30.0..58.0),
            )
            .unwrap();
            let mut draw = || -> Vec<f64> { (0..32).map(|_| rng.random_range(-0.5..0.5)).collect() };
            Detection {
                class_id: i as u32 % 5,
                score: 0.9 - 0.01 * i as f64,
                bbox,
                coeffs: CoefficientSet {
                    instance: draw(),
                    quality: draw(),
                    sin2t: draw(),
                    cos2t: draw(),
                    width: draw(),
                    extra: Vec::new(),
                },
            }
        })
        .collect();
    let cfg = CodecConfig::default();
    let params = InferParams {
        nms_iou: 1.0, // keep all 16 so the full assembly load is measured
        score_thr: 0.05,
        top_n: 1,
    };
    // warm-up, then best of three
    let _ = infer_scene(&protos, &dets, &cfg, &params).unwrap();
    let mut best = f64::INFINITY;
    for _ in 0..3 {
        let start = Instant::now();
        let out = infer_scene(&protos, &dets, &cfg, &params).unwrap();
        best = best.min(start.elapsed().as_secs_f64());
        assert_eq!(out.len(), 16);
    }
    assert!(best < 0.025, "assemble+decode for 16 detections took {best:.4}s");
    println!("[PASS] throughput: assemble+decode for 16 detections in {:.2} ms", best * 1e3);
}
