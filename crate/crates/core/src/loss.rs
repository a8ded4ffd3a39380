//! The composite training loss: smooth-L1 and binary cross entropy
//! primitives, the per-object grasp loss fragment, the weighted total, and
//! a finite-difference checker for the analytic gradient of
//! `grasp_loss(assemble(..))` with respect to the coefficients.
//!
//! All reductions are means over (valid) pixels, making the losses
//! resolution-independent. Detection-side terms (`l_cls`, `l_box`,
//! `l_imask`, `l_smask`) enter only as externally computed scalars.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::assembly::{assemble, Activation, CoefficientSet, MaskSet, PrototypeStack};
use crate::error::{Error, Result};
use crate::maskcodec::GraspMaps;

/// Predictions are clamped to `[BCE_EPS, 1 - BCE_EPS]` inside the cross
/// entropy.
const BCE_EPS: f64 = 1e-7;

/// Outer weights of the total loss and inner weights of the grasp
/// fragment. All default to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub a_cls: f64,
    pub a_box: f64,
    pub a_imask: f64,
    pub a_gr: f64,
    pub a_smask: f64,
    pub a_p: f64,
    pub a_q: f64,
    pub a_sin: f64,
    pub a_cos: f64,
    pub a_w: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            a_cls: 1.0,
            a_box: 1.0,
            a_imask: 1.0,
            a_gr: 1.0,
            a_smask: 1.0,
            a_p: 1.0,
            a_q: 1.0,
            a_sin: 1.0,
            a_cos: 1.0,
            a_w: 1.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.a_cls, self.a_box, self.a_imask, self.a_gr, self.a_smask, self.a_p, self.a_q,
            self.a_sin, self.a_cos, self.a_w,
        ];
        if all.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidConfig("loss weights must be finite and >= 0".into()));
        }
        Ok(())
    }
}

/// Which pixels the angle/width regressions are averaged over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegressionSupport {
    /// Restrict to the ground-truth position support (default): the
    /// network is not penalized for angle/width values on background.
    PositionMask,
    /// Penalize everywhere.
    FullImage,
}

/// Per-object grasp loss fragment. `total` is the inner-weighted sum.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct GraspLossTerms {
    pub position: f64,
    pub quality: f64,
    pub sin2t: f64,
    pub cos2t: f64,
    pub width: f64,
    pub total: f64,
}

/// The assembled loss report: detection-side scalars, grasp term means
/// over objects, the weights used, and the weighted total.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LossReport {
    pub l_cls: f64,
    pub l_box: f64,
    pub l_imask: f64,
    pub l_smask: f64,
    pub l_gr_p: f64,
    pub l_gr_q: f64,
    pub l_gr_sin: f64,
    pub l_gr_cos: f64,
    pub l_gr_w: f64,
    /// Mean inner-weighted grasp fragment over objects.
    pub l_gr: f64,
    pub weights: LossWeights,
    pub total: f64,
}

fn check_dims(a: &Array2<f64>, b: &Array2<f64>, what: &str) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(format!(
            "{what}: {:?} vs {:?}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(())
}

fn smooth_l1_value(d: f64) -> f64 {
    if d.abs() < 1.0 {
        0.5 * d * d
    } else {
        d.abs() - 0.5
    }
}

fn smooth_l1_grad(d: f64) -> f64 {
    if d.abs() < 1.0 {
        d
    } else {
        d.signum()
    }
}

/// Mean smooth-L1 over valid pixels (`None` = all pixels); 0 when no pixel
/// is valid.
pub fn smooth_l1(
    pred: &Array2<f64>,
    target: &Array2<f64>,
    valid: Option<&Array2<f64>>,
) -> Result<f64> {
    check_dims(pred, target, "smooth_l1")?;
    if let Some(v) = valid {
        check_dims(pred, v, "smooth_l1 valid mask")?;
    }
    let mut sum = 0.0;
    let mut n = 0usize;
    match valid {
        None => {
            for (p, t) in pred.iter().zip(target.iter()) {
                sum += smooth_l1_value(p - t);
            }
            n = pred.len();
        }
        Some(v) => {
            for ((p, t), m) in pred.iter().zip(target.iter()).zip(v.iter()) {
                if *m > 0.5 {
                    sum += smooth_l1_value(p - t);
                    n += 1;
                }
            }
        }
    }
    Ok(if n == 0 { 0.0 } else { sum / n as f64 })
}

/// Mean binary cross entropy over valid pixels (`None` = all pixels);
/// predictions are clamped away from 0 and 1. 0 when no pixel is valid.
pub fn bce(
    pred: &Array2<f64>,
    target: &Array2<f64>,
    valid: Option<&Array2<f64>>,
) -> Result<f64> {
    check_dims(pred, target, "bce")?;
    if let Some(v) = valid {
        check_dims(pred, v, "bce valid mask")?;
    }
    let term = |p: f64, t: f64| {
        let p = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
        -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
    };
    let mut sum = 0.0;
    let mut n = 0usize;
    match valid {
        None => {
            for (p, t) in pred.iter().zip(target.iter()) {
                sum += term(*p, *t);
            }
            n = pred.len();
        }
        Some(v) => {
            for ((p, t), m) in pred.iter().zip(target.iter()).zip(v.iter()) {
                if *m > 0.5 {
                    sum += term(*p, *t);
                    n += 1;
                }
            }
        }
    }
    Ok(if n == 0 { 0.0 } else { sum / n as f64 })
}

/// The per-object grasp loss fragment.
///
/// The position term is the cross entropy between the predicted quality
/// channel and the binary ground-truth position mask; the quality term a
/// smooth-L1 against the overlap-transfer quality map; the angle and width
/// terms are smooth-L1 restricted to `support`.
pub fn grasp_loss(
    pred: &MaskSet,
    gt: &GraspMaps,
    w: &LossWeights,
    support: RegressionSupport,
) -> Result<GraspLossTerms> {
    let sup = match support {
        RegressionSupport::PositionMask => Some(&gt.position),
        RegressionSupport::FullImage => None,
    };
    let position = bce(&pred.quality, &gt.position, None)?;
    let quality = smooth_l1(&pred.quality, &gt.quality, None)?;
    let sin2t = smooth_l1(&pred.sin2t, &gt.sin2t, sup)?;
    let cos2t = smooth_l1(&pred.cos2t, &gt.cos2t, sup)?;
    let width = smooth_l1(&pred.width, &gt.width, sup)?;
    let total =
        w.a_p * position + w.a_q * quality + w.a_sin * sin2t + w.a_cos * cos2t + w.a_w * width;
    Ok(GraspLossTerms {
        position,
        quality,
        sin2t,
        cos2t,
        width,
        total,
    })
}

/// Combines externally computed detection-side scalars with the mean grasp
/// fragment over objects into the weighted total.
pub fn total_loss(
    grasp: &[GraspLossTerms],
    l_cls: f64,
    l_box: f64,
    l_imask: f64,
    l_smask: f64,
    w: &LossWeights,
) -> LossReport {
    let n = grasp.len().max(1) as f64;
    let mean = |f: fn(&GraspLossTerms) -> f64| grasp.iter().map(f).sum::<f64>() / n;
    let l_gr_p = mean(|t| t.position);
    let l_gr_q = mean(|t| t.quality);
    let l_gr_sin = mean(|t| t.sin2t);
    let l_gr_cos = mean(|t| t.cos2t);
    let l_gr_w = mean(|t| t.width);
    let l_gr = mean(|t| t.total);
    let total = w.a_cls * l_cls
        + w.a_box * l_box
        + w.a_imask * l_imask
        + w.a_gr * l_gr
        + w.a_smask * l_smask;
    LossReport {
        l_cls,
        l_box,
        l_imask,
        l_smask,
        l_gr_p,
        l_gr_q,
        l_gr_sin,
        l_gr_cos,
        l_gr_w,
        l_gr,
        weights: *w,
        total,
    }
}

/// Analytic gradient of the grasp fragment `grasp_loss(assemble(P, C))`
/// with respect to every standard coefficient, returned in coefficient-set
/// shape. The instance channel does not enter the grasp loss, so its
/// gradient is zero; extra channels are carried through as zeros.
pub fn grasp_loss_gradient(
    protos: &PrototypeStack,
    coeffs: &CoefficientSet,
    gt: &GraspMaps,
    w: &LossWeights,
    support: RegressionSupport,
) -> Result<CoefficientSet> {
    let masks = assemble(protos, coeffs)?;
    check_dims(&masks.quality, &gt.quality, "grasp_loss_gradient")?;
    let (h, wid) = masks.quality.dim();
    let n_all = (h * wid) as f64;
    let position = gt.position.as_slice().expect("standard layout");
    let n_valid = match support {
        RegressionSupport::PositionMask => position.iter().filter(|&&v| v > 0.5).count() as f64,
        RegressionSupport::FullImage => n_all,
    };

    let q = masks.quality.as_slice().expect("standard layout");
    let s = masks.sin2t.as_slice().expect("standard layout");
    let c = masks.cos2t.as_slice().expect("standard layout");
    let wd = masks.width.as_slice().expect("standard layout");
    let gt_q = gt.quality.as_slice().expect("standard layout");
    let gt_s = gt.sin2t.as_slice().expect("standard layout");
    let gt_c = gt.cos2t.as_slice().expect("standard layout");
    let gt_w = gt.width.as_slice().expect("standard layout");

    let npix = h * wid;
    // dL/dz per pixel for each assembled channel.
    let mut dz_q = vec![0.0f64; npix];
    let mut dz_s = vec![0.0f64; npix];
    let mut dz_c = vec![0.0f64; npix];
    let mut dz_w = vec![0.0f64; npix];
    for p in 0..npix {
        let m = q[p];
        let mut dm = 0.0;
        // BCE against the position target; the clamp region is flat.
        if m > BCE_EPS && m < 1.0 - BCE_EPS {
            let t = position[p];
            dm += w.a_p * (-(t / m) + (1.0 - t) / (1.0 - m)) / n_all;
        }
        dm += w.a_q * smooth_l1_grad(m - gt_q[p]) / n_all;
        dz_q[p] = dm * Activation::Sigmoid.derivative_from_output(m);

        let on_support = match support {
            RegressionSupport::PositionMask => position[p] > 0.5,
            RegressionSupport::FullImage => true,
        };
        if on_support && n_valid > 0.0 {
            dz_s[p] = w.a_sin * smooth_l1_grad(s[p] - gt_s[p]) / n_valid
                * Activation::Tanh.derivative_from_output(s[p]);
            dz_c[p] = w.a_cos * smooth_l1_grad(c[p] - gt_c[p]) / n_valid
                * Activation::Tanh.derivative_from_output(c[p]);
            dz_w[p] = w.a_w * smooth_l1_grad(wd[p] - gt_w[p]) / n_valid
                * Activation::Sigmoid.derivative_from_output(wd[p]);
        }
    }

    let k = protos.k();
    let mut grad = CoefficientSet::zeros(k);
    for e in &coeffs.extra {
        grad.extra.push(crate::assembly::ExtraChannel {
            name: e.name.clone(),
            activation: e.activation,
            coeffs: vec![0.0; k],
        });
    }
    let src = protos.data().as_slice().expect("standard layout");
    for p in 0..npix {
        let pix = &src[p * k..(p + 1) * k];
        for j in 0..k {
            grad.quality[j] += dz_q[p] * pix[j];
            grad.sin2t[j] += dz_s[p] * pix[j];
            grad.cos2t[j] += dz_c[p] * pix[j];
            grad.width[j] += dz_w[p] * pix[j];
        }
    }
    Ok(grad)
}

/// Compares the analytic gradient of the scalar grasp loss against central
/// finite differences per coefficient and returns the maximum relative
/// error `|g_a - g_fd| / max(1e-8, |g_fd|)` over all standard channels.
pub fn grad_check(
    protos: &PrototypeStack,
    coeffs: &CoefficientSet,
    gt: &GraspMaps,
    w: &LossWeights,
    step: f64,
) -> Result<f64> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidConfig(format!("step must be > 0, got {step}")));
    }
    let support = RegressionSupport::PositionMask;
    let analytic = grasp_loss_gradient(protos, coeffs, gt, w, support)?;
    let eval = |c: &CoefficientSet| -> Result<f64> {
        Ok(grasp_loss(&assemble(protos, c)?, gt, w, support)?.total)
    };
    let mut work = coeffs.clone();
    let mut max_rel: f64 = 0.0;
    for ch in 0..5 {
        for j in 0..coeffs.k() {
            let orig = channel(coeffs, ch)[j];
            channel_mut(&mut work, ch)[j] = orig + step;
            let lp = eval(&work)?;
            channel_mut(&mut work, ch)[j] = orig - step;
            let lm = eval(&work)?;
            channel_mut(&mut work, ch)[j] = orig;
            let fd = (lp - lm) / (2.0 * step);
            let ga = channel(&analytic, ch)[j];
            let rel = (ga - fd).abs() / fd.abs().max(1e-8);
            max_rel = max_rel.max(rel);
        }
    }
    Ok(max_rel)
}

fn channel(c: &CoefficientSet, i: usize) -> &[f64] {
    match i {
        0 => &c.instance,
        1 => &c.quality,
        2 => &c.sin2t,
        3 => &c.cos2t,
        _ => &c.width,
    }
}

fn channel_mut(c: &mut CoefficientSet, i: usize) -> &mut [f64] {
    match i {
        0 => &mut c.instance,
        1 => &mut c.quality,
        2 => &mut c.sin2t,
        3 => &mut c.cos2t,
        _ => &mut c.width,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maskcodec::{encode_grasps, CodecConfig};
    use crate::geometry::GraspRect;
    use ndarray::{arr2, Array3};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn smooth_l1_examples() {
        let z = arr2(&[[0.0]]);
        assert_eq!(smooth_l1(&z, &z, None).unwrap(), 0.0);
        let one = arr2(&[[1.0]]);
        assert_eq!(smooth_l1(&one, &z, None).unwrap(), 0.5);
        let two = arr2(&[[2.0]]);
        assert_eq!(smooth_l1(&two, &z, None).unwrap(), 1.5);
    }

    #[test]
    fn smooth_l1_rejects_mismatched_dims() {
        let a = Array2::zeros((2, 2));
        let b = Array2::zeros((2, 3));
        assert!(smooth_l1(&a, &b, None).is_err());
    }

    #[test]
    fn smooth_l1_is_once_differentiable_at_the_kink() {
        let h = 1e-7;
        let left = (smooth_l1_value(1.0) - smooth_l1_value(1.0 - h)) / h;
        let right = (smooth_l1_value(1.0 + h) - smooth_l1_value(1.0)) / h;
        assert!((left - right).abs() < 1e-6);
    }

    #[test]
    fn bce_examples() {
        let t1 = arr2(&[[1.0]]);
        let near_one = arr2(&[[1.0 - 1e-7]]);
        assert!(bce(&near_one, &t1, None).unwrap() <= 2e-7);
        let half = arr2(&[[0.5]]);
        assert!((bce(&half, &t1, None).unwrap() - 2f64.ln()).abs() < 1e-12);
        let t0 = arr2(&[[0.0]]);
        assert!((bce(&half, &t0, None).unwrap() - 2f64.ln()).abs() < 1e-12);
    }

    fn mask_set(
        quality: Array2<f64>,
        sin2t: Array2<f64>,
        cos2t: Array2<f64>,
        width: Array2<f64>,
    ) -> MaskSet {
        let inst = quality.clone();
        MaskSet {
            instance: inst,
            quality,
            sin2t,
            cos2t,
            width,
            extra: Vec::new(),
        }
    }

    #[test]
    fn exact_prediction_zeroes_regression_terms() {
        let mut gt = GraspMaps::zeros(2, 2);
        gt.position = arr2(&[[1.0, 0.0], [0.0, 0.0]]);
        gt.sin2t = arr2(&[[0.5, 0.0], [0.0, 0.0]]);
        gt.cos2t = arr2(&[[0.8, 0.0], [0.0, 0.0]]);
        gt.width = arr2(&[[0.2, 0.0], [0.0, 0.0]]);
        gt.quality = gt.position.clone();
        let pred = mask_set(
            gt.position.clone(),
            gt.sin2t.clone(),
            gt.cos2t.clone(),
            gt.width.clone(),
        );
        let terms = grasp_loss(&pred, &gt, &LossWeights::default(), RegressionSupport::PositionMask)
            .unwrap();
        assert_eq!(terms.sin2t, 0.0);
        assert_eq!(terms.cos2t, 0.0);
        assert_eq!(terms.width, 0.0);
        assert!(terms.quality < 1e-12);
        assert!(terms.position < 1e-6);
    }

    #[test]
    fn background_only_gt_zeroes_regression_terms() {
        let gt = GraspMaps::zeros(3, 3);
        let pred = mask_set(
            Array2::from_elem((3, 3), 0.3),
            Array2::from_elem((3, 3), 0.9),
            Array2::from_elem((3, 3), -0.7),
            Array2::from_elem((3, 3), 0.6),
        );
        let terms = grasp_loss(&pred, &gt, &LossWeights::default(), RegressionSupport::PositionMask)
            .unwrap();
        assert_eq!(terms.sin2t, 0.0);
        assert_eq!(terms.cos2t, 0.0);
        assert_eq!(terms.width, 0.0);
    }

    #[test]
    fn hand_computed_2x2_fixture() {
        let mut gt = GraspMaps::zeros(2, 2);
        gt.position = arr2(&[[1.0, 0.0], [0.0, 0.0]]);
        gt.quality = arr2(&[[0.46, 0.0], [0.0, 0.0]]);
        gt.sin2t = arr2(&[[0.5, 0.0], [0.0, 0.0]]);
        gt.cos2t = arr2(&[[0.86, 0.0], [0.0, 0.0]]);
        gt.width = arr2(&[[0.2, 0.0], [0.0, 0.0]]);
        let pred = mask_set(
            arr2(&[[0.7, 0.1], [0.2, 0.3]]),
            arr2(&[[0.4, 0.9], [0.1, 0.2]]),
            arr2(&[[0.8, 0.5], [0.5, 0.5]]),
            arr2(&[[0.25, 0.9], [0.9, 0.9]]),
        );
        let w = LossWeights::default();
        let terms = grasp_loss(&pred, &gt, &w, RegressionSupport::PositionMask).unwrap();

        let l_p = -(0.7f64.ln() + 0.9f64.ln() + 0.8f64.ln() + 0.7f64.ln()) / 4.0;
        let l_q = (0.5 * 0.24f64.powi(2) + 0.5 * 0.01 + 0.5 * 0.04 + 0.5 * 0.09) / 4.0;
        let l_sin = 0.5 * 0.1f64.powi(2);
        let l_cos = 0.5 * 0.06f64.powi(2);
        let l_w = 0.5 * 0.05f64.powi(2);
        assert!((terms.position - l_p).abs() < 1e-9);
        assert!((terms.quality - l_q).abs() < 1e-9);
        assert!((terms.sin2t - l_sin).abs() < 1e-9);
        assert!((terms.cos2t - l_cos).abs() < 1e-9);
        assert!((terms.width - l_w).abs() < 1e-9);
        let total = l_p + l_q + l_sin + l_cos + l_w;
        assert!((terms.total - total).abs() < 1e-9);
    }

    #[test]
    fn total_loss_arithmetic() {
        let w = LossWeights::default();
        let zero = total_loss(&[], 0.0, 0.0, 0.0, 0.0, &w);
        assert_eq!(zero.total, 0.0);

        let frag = GraspLossTerms {
            total: 4.0,
            ..Default::default()
        };
        let unit = total_loss(&[frag], 1.0, 2.0, 3.0, 5.0, &w);
        assert!((unit.total - 15.0).abs() < 1e-12);

        let w2 = LossWeights {
            a_cls: 2.0,
            a_box: 0.0,
            a_imask: 0.0,
            a_gr: 1.0,
            a_smask: 0.0,
            ..LossWeights::default()
        };
        let frag9 = GraspLossTerms {
            total: 4.0,
            ..Default::default()
        };
        let r = total_loss(&[frag9], 1.0, 9.0, 9.0, 9.0, &w2);
        assert!((r.total - 6.0).abs() < 1e-12);
    }

    #[test]
    fn doubling_a_weight_doubles_its_contribution() {
        let frag = GraspLossTerms {
            total: 2.5,
            ..Default::default()
        };
        let base = LossWeights::default();
        let doubled = LossWeights {
            a_gr: 2.0,
            ..base
        };
        let r1 = total_loss(&[frag], 1.0, 1.0, 1.0, 1.0, &base);
        let r2 = total_loss(&[frag], 1.0, 1.0, 1.0, 1.0, &doubled);
        assert!(((r2.total - r1.total) - 2.5).abs() < 1e-12);
    }

    #[test]
    fn grasp_loss_is_permutation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 4usize;
        let rand_map = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| {
            Array2::from_shape_fn((n, n), |_| rng.random_range(lo..hi))
        };
        let mut gt = GraspMaps::zeros(n, n);
        gt.position = Array2::from_shape_fn((n, n), |_| if rng.random_range(0.0..1.0) > 0.5 { 1.0 } else { 0.0 });
        gt.quality = rand_map(&mut rng, 0.0, 1.0);
        gt.sin2t = rand_map(&mut rng, -1.0, 1.0);
        gt.cos2t = rand_map(&mut rng, -1.0, 1.0);
        gt.width = rand_map(&mut rng, 0.0, 1.0);
        let pred = mask_set(
            rand_map(&mut rng, 0.01, 0.99),
            rand_map(&mut rng, -0.9, 0.9),
            rand_map(&mut rng, -0.9, 0.9),
            rand_map(&mut rng, 0.01, 0.99),
        );
        let w = LossWeights::default();
        let base = grasp_loss(&pred, &gt, &w, RegressionSupport::PositionMask).unwrap();

        // reverse pixel order consistently in both pred and gt
        let perm = |a: &Array2<f64>| {
            let mut v: Vec<f64> = a.iter().copied().collect();
            v.reverse();
            Array2::from_shape_vec((n, n), v).unwrap()
        };
        let gt2 = GraspMaps {
            quality: perm(&gt.quality),
            position: perm(&gt.position),
            sin2t: perm(&gt.sin2t),
            cos2t: perm(&gt.cos2t),
            width: perm(&gt.width),
        };
        let pred2 = mask_set(
            perm(&pred.quality),
            perm(&pred.sin2t),
            perm(&pred.cos2t),
            perm(&pred.width),
        );
        let permuted = grasp_loss(&pred2, &gt2, &w, RegressionSupport::PositionMask).unwrap();
        assert!((base.total - permuted.total).abs() < 1e-12);
    }

    fn random_setup(
        seed: u64,
        h: usize,
        w: usize,
        k: usize,
        coeff_scale: f64,
    ) -> (PrototypeStack, CoefficientSet, GraspMaps) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let protos = PrototypeStack::new(Array3::from_shape_fn((h, w, k), |_| {
            rng.random_range(-1.0..1.0)
        }))
        .unwrap();
        let mut coeffs = CoefficientSet::zeros(k);
        for ch in [&mut coeffs.instance, &mut coeffs.quality, &mut coeffs.sin2t, &mut coeffs.cos2t, &mut coeffs.width]
        {
            for v in ch.iter_mut() {
                *v = rng.random_range(-coeff_scale..coeff_scale);
            }
        }
        let grasp = GraspRect::new(
            w as f64 / 2.0,
            h as f64 / 2.0,
            rng.random_range(-1.5..1.5),
            w as f64 / 2.5,
            h as f64 / 4.0,
            1.0,
            0,
        )
        .unwrap();
        let gt = encode_grasps(&[grasp], h, w, &CodecConfig::default()).unwrap();
        (protos, coeffs, gt)
    }

    #[test]
    fn grad_check_quadratic_region_is_nearly_exact() {
        // Small coefficients keep every |pred - target| < 1 and a_p = 0
        // leaves only smooth-L1 terms; a small step makes central
        // differences nearly exact.
        let (protos, coeffs, gt) = random_setup(3, 12, 12, 6, 0.1);
        let w = LossWeights {
            a_p: 0.0,
            ..LossWeights::default()
        };
        let err = grad_check(&protos, &coeffs, &gt, &w, 1e-5).unwrap();
        assert!(err < 1e-6, "max rel error {err}");
    }

    #[test]
    fn grad_check_full_loss_random_k16() {
        for seed in [100u64, 101] {
            let (protos, coeffs, gt) = random_setup(seed, 24, 24, 16, 1.0);
            let err = grad_check(&protos, &coeffs, &gt, &LossWeights::default(), 1e-3).unwrap();
            assert!(err < 1e-4, "seed {seed}: max rel error {err}");
        }
    }

    #[test]
    fn grad_check_zero_prototypes_reports_zero_error() {
        let protos = PrototypeStack::new(Array3::zeros((8, 8, 4))).unwrap();
        let coeffs = CoefficientSet::zeros(4);
        let gt = GraspMaps::zeros(8, 8);
        let err = grad_check(&protos, &coeffs, &gt, &LossWeights::default(), 1e-3).unwrap();
        assert_eq!(err, 0.0);
    }
}
