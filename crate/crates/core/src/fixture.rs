//! Offline fixture builder: stands in for a trained backbone so the full
//! inference pipeline can run end to end without one.
//!
//! For each scene a prototype bank is built whose first slices are the
//! pre-activation target maps of every object (so the targets are exactly
//! representable) padded with random slices up to `k`, and per-object
//! coefficient sets are least-squares fitted against those targets. The
//! bank is rounded to f32 before fitting so that fitting matches what the
//! GKT1 tensor files store.

use ndarray::{Array2, Array3};
use rand::Rng;

use crate::assembly::{CoefficientSet, Detection, PrototypeStack};
use crate::datasets::Scene;
use crate::error::{Error, Result};
use crate::maskcodec::{encode_grasps, CodecConfig};

/// Clamp applied before the inverse activations so exact 0/1 (or +/-1)
/// targets stay finite; sigma(logit(1e-7)) recovers 1e-7, far below any
/// decode threshold.
const INV_EPS: f64 = 1e-7;

fn logit(p: f64) -> f64 {
    let p = p.clamp(INV_EPS, 1.0 - INV_EPS);
    (p / (1.0 - p)).ln()
}

fn atanh(t: f64) -> f64 {
    let t = t.clamp(-1.0 + INV_EPS, 1.0 - INV_EPS);
    0.5 * ((1.0 + t) / (1.0 - t)).ln()
}

/// Prototype stack plus fitted detections for one scene.
pub struct SceneFixture {
    pub protos: PrototypeStack,
    pub detections: Vec<Detection>,
}

/// Builds the fixture for one (validated) scene. Needs
/// `k >= 5 * objects`; the remaining slices are filled with uniform noise
/// from `rng`. Detection scores descend with object index so the first
/// object is the best-scoring one.
pub fn build_scene_fixture(
    scene: &Scene,
    k: usize,
    cfg: &CodecConfig,
    rng: &mut impl Rng,
) -> Result<SceneFixture> {
    scene.validate()?;
    cfg.validate()?;
    let (h, w) = (scene.image_size.0 as usize, scene.image_size.1 as usize);
    let n_targets = 5 * scene.objects.len();
    if k < n_targets {
        return Err(Error::InvalidConfig(format!(
            "k = {k} cannot represent {} objects ({n_targets} target slices needed)",
            scene.objects.len()
        )));
    }

    // Pre-activation target slices, 5 per object.
    let mut slices: Vec<Array2<f64>> = Vec::with_capacity(k);
    for obj in &scene.objects {
        let maps = encode_grasps(&obj.grasps, h, w, cfg)?;
        let mut instance = Array2::zeros((h, w));
        for r in obj.bbox.pixel_rows(h) {
            for c in obj.bbox.pixel_cols(w) {
                instance[[r, c]] = 1.0;
            }
        }
        slices.push(instance.mapv(logit));
        slices.push(maps.quality.mapv(logit));
        slices.push(maps.sin2t.mapv(atanh));
        slices.push(maps.cos2t.mapv(atanh));
        slices.push(maps.width.mapv(logit));
    }
    for _ in n_targets..k {
        slices.push(Array2::from_shape_fn((h, w), |_| rng.random_range(-2.0..2.0)));
    }

    // Round to f32 up front: the fit must target the values the tensor
    // file will actually carry.
    let mut bank = Array3::zeros((h, w, k));
    for (j, s) in slices.iter().enumerate() {
        for r in 0..h {
            for c in 0..w {
                bank[[r, c, j]] = s[[r, c]] as f32 as f64;
            }
        }
    }
    let protos = PrototypeStack::new(bank)?;

    // Shared normal equations: one Gram factorization per scene, one solve
    // per target channel.
    let gram = gram_matrix(&protos);
    let chol = Cholesky::factor(gram, k)?;

    let mut detections = Vec::with_capacity(scene.objects.len());
    for (oi, obj) in scene.objects.iter().enumerate() {
        let fit = |slice_idx: usize| -> Vec<f64> {
            let target = &slices[slice_idx];
            let rhs = project_target(&protos, target);
            chol.solve(&rhs)
        };
        let base = 5 * oi;
        let coeffs = CoefficientSet {
            instance: fit(base),
            quality: fit(base + 1),
            sin2t: fit(base + 2),
            cos2t: fit(base + 3),
            width: fit(base + 4),
            extra: Vec::new(),
        };
        detections.push(Detection {
            class_id: obj.class_id,
            score: (1.0 - 0.001 * oi as f64).max(0.5),
            bbox: obj.bbox,
            coeffs,
        });
    }
    Ok(SceneFixture { protos, detections })
}

/// `A^T A` for the bank viewed as an `(h*w) x k` matrix.
fn gram_matrix(protos: &PrototypeStack) -> Vec<f64> {
    let (h, w, k) = protos.dims();
    let src = protos.data().as_slice().expect("standard layout");
    let mut g = vec![0.0f64; k * k];
    for p in 0..h * w {
        let row = &src[p * k..(p + 1) * k];
        for i in 0..k {
            let ri = row[i];
            for j in i..k {
                g[i * k + j] += ri * row[j];
            }
        }
    }
    for i in 0..k {
        for j in 0..i {
            g[i * k + j] = g[j * k + i];
        }
    }
    g
}

/// `A^T z` for a target map `z`.
fn project_target(protos: &PrototypeStack, target: &Array2<f64>) -> Vec<f64> {
    let (h, w, k) = protos.dims();
    let src = protos.data().as_slice().expect("standard layout");
    let t = target.as_slice().expect("standard layout");
    let mut b = vec![0.0f64; k];
    for p in 0..h * w {
        let row = &src[p * k..(p + 1) * k];
        let z = t[p];
        for j in 0..k {
            b[j] += row[j] * z;
        }
    }
    b
}

struct Cholesky {
    l: Vec<f64>,
    k: usize,
}

impl Cholesky {
    /// Factors a symmetric positive-definite matrix; retries once with a
    /// small ridge when the bank slices are (numerically) dependent.
    fn factor(g: Vec<f64>, k: usize) -> Result<Self> {
        match Self::try_factor(&g, k) {
            Some(l) => Ok(Self { l, k }),
            None => {
                let scale: f64 = (0..k).map(|i| g[i * k + i]).sum::<f64>() / k as f64;
                let ridge = 1e-12 * scale.max(1.0);
                let mut damped = g;
                for i in 0..k {
                    damped[i * k + i] += ridge;
                }
                let l = Self::try_factor(&damped, k).ok_or_else(|| {
                    Error::Invalid("prototype bank is rank deficient; cannot fit coefficients".into())
                })?;
                Ok(Self { l, k })
            }
        }
    }

    fn try_factor(g: &[f64], k: usize) -> Option<Vec<f64>> {
        let mut l = vec![0.0f64; k * k];
        for i in 0..k {
            for j in 0..=i {
                let mut sum = g[i * k + j];
                for m in 0..j {
                    sum -= l[i * k + m] * l[j * k + m];
                }
                if i == j {
                    if sum <= 0.0 {
                        return None;
                    }
                    l[i * k + i] = sum.sqrt();
                } else {
                    l[i * k + j] = sum / l[j * k + j];
                }
            }
        }
        Some(l)
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let k = self.k;
        let l = &self.l;
        let mut y = vec![0.0f64; k];
        for i in 0..k {
            let mut sum = b[i];
            for m in 0..i {
                sum -= l[i * k + m] * y[m];
            }
            y[i] = sum / l[i * k + i];
        }
        let mut x = vec![0.0f64; k];
        for i in (0..k).rev() {
            let mut sum = y[i];
            for m in i + 1..k {
                sum -= l[m * k + i] * x[m];
            }
            x[i] = sum / l[i * k + i];
        }
        x
    }
}
