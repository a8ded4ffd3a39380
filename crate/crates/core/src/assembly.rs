//! Prototype-mask assembly: per-detection linear combination of a shared
//! prototype stack with per-channel activations, bounding-box crop,
//! class-aware NMS and the inference pipeline that turns detections into
//! per-object grasp predictions.

use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BoundingBox, GraspRect};
use crate::maskcodec::{decode_channels, CodecConfig};

/// Pointwise activation applied to an assembled channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    /// Logistic; limits the output range to (0, 1).
    Sigmoid,
    /// Hyperbolic tangent; limits the output range to (-1, 1).
    Tanh,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the activated value.
    pub(crate) fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Tanh => 1.0 - y * y,
        }
    }
}

/// A shared bank of `k` full-image prototype masks, stored `h x w x k`
/// (row-major, prototype index fastest).
#[derive(Debug, Clone)]
pub struct PrototypeStack {
    data: Array3<f64>,
}

impl PrototypeStack {
    /// Wraps an `h x w x k` tensor; all values must be finite and `k >= 1`.
    pub fn new(data: Array3<f64>) -> Result<Self> {
        let (_, _, k) = data.dim();
        if k == 0 {
            return Err(Error::Invalid("prototype stack needs k >= 1".into()));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::Invalid("prototype stack contains non-finite values".into()));
        }
        let data = if data.is_standard_layout() {
            data
        } else {
            data.as_standard_layout().to_owned()
        };
        Ok(Self { data })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.data.dim()
    }

    pub fn k(&self) -> usize {
        self.data.dim().2
    }

    pub fn data(&self) -> &Array3<f64> {
        &self.data
    }

    /// Pre-activation linear combination `sum_j P[:, :, j] * coeffs[j]`.
    pub fn project(&self, coeffs: &[f64]) -> Result<Array2<f64>> {
        let (h, w, k) = self.data.dim();
        if coeffs.len() != k {
            return Err(Error::DimensionMismatch(format!(
                "coefficient length {} vs prototype k {k}",
                coeffs.len()
            )));
        }
        let src = self.data.as_slice().expect("standard layout");
        let mut out = vec![0.0f64; h * w];
        for (pix, o) in src.chunks_exact(k).zip(out.iter_mut()) {
            *o = dot(pix, coeffs);
        }
        Ok(Array2::from_shape_vec((h, w), out).expect("shape matches"))
    }

    /// Projects several coefficient vectors in one pass over the stack,
    /// writing only pixels inside `rows x cols` of each output.
    fn project_multi_region(
        &self,
        channels: &[&[f64]],
        rows: std::ops::Range<usize>,
        cols: std::ops::Range<usize>,
    ) -> Vec<Array2<f64>> {
        let (h, w, k) = self.data.dim();
        let src = self.data.as_slice().expect("standard layout");
        let mut outs: Vec<Array2<f64>> = channels.iter().map(|_| Array2::zeros((h, w))).collect();
        let mut slices: Vec<&mut [f64]> = outs
            .iter_mut()
            .map(|a| a.as_slice_mut().expect("standard layout"))
            .collect();
        for r in rows {
            for c in cols.clone() {
                let base = (r * w + c) * k;
                let pix = &src[base..base + k];
                let at = r * w + c;
                for (ch, coeffs) in channels.iter().enumerate() {
                    slices[ch][at] = dot(pix, coeffs);
                }
            }
        }
        outs
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Extra named coefficient channel with its declared activation. Only the
/// five standard channels take part in grasp decoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtraChannel {
    pub name: String,
    pub activation: Activation,
    pub coeffs: Vec<f64>,
}

/// Per-detection coefficient vectors, one per output channel, each of
/// length `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientSet {
    pub instance: Vec<f64>,
    pub quality: Vec<f64>,
    pub sin2t: Vec<f64>,
    pub cos2t: Vec<f64>,
    pub width: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extra: Vec<ExtraChannel>,
}

impl CoefficientSet {
    pub fn zeros(k: usize) -> Self {
        Self {
            instance: vec![0.0; k],
            quality: vec![0.0; k],
            sin2t: vec![0.0; k],
            cos2t: vec![0.0; k],
            width: vec![0.0; k],
            extra: Vec::new(),
        }
    }

    pub fn k(&self) -> usize {
        self.instance.len()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.instance.len();
        let check = |name: &str, v: &[f64]| -> Result<()> {
            if v.len() != k {
                return Err(Error::DimensionMismatch(format!(
                    "channel {name} has length {}, instance has {k}",
                    v.len()
                )));
            }
            if !v.iter().all(|x| x.is_finite()) {
                return Err(Error::Invalid(format!("channel {name} contains non-finite values")));
            }
            Ok(())
        };
        check("quality", &self.quality)?;
        check("sin2t", &self.sin2t)?;
        check("cos2t", &self.cos2t)?;
        check("width", &self.width)?;
        for e in &self.extra {
            check(&e.name, &e.coeffs)?;
        }
        Ok(())
    }
}

/// One detected object as produced by an external detector/backbone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Detection {
    pub class_id: u32,
    /// Detector confidence in [0, 1].
    pub score: f64,
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
    pub coeffs: CoefficientSet,
}

impl Detection {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.score) {
            return Err(Error::Invalid(format!("score must be in [0, 1], got {}", self.score)));
        }
        self.coeffs.validate()
    }
}

/// Assembled per-detection masks: instance plus the four grasp channels.
/// The predicted position signal is read from the quality channel, so no
/// separate position map is assembled.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskSet {
    pub instance: Array2<f64>,
    pub quality: Array2<f64>,
    pub sin2t: Array2<f64>,
    pub cos2t: Array2<f64>,
    pub width: Array2<f64>,
    pub extra: Vec<(String, Array2<f64>)>,
}

impl MaskSet {
    pub fn dims(&self) -> (usize, usize) {
        self.instance.dim()
    }

    /// All masks cropped by `bbox` (values outside set to 0).
    pub fn crop(&self, bbox: &BoundingBox) -> MaskSet {
        MaskSet {
            instance: crop_mask(&self.instance, bbox),
            quality: crop_mask(&self.quality, bbox),
            sin2t: crop_mask(&self.sin2t, bbox),
            cos2t: crop_mask(&self.cos2t, bbox),
            width: crop_mask(&self.width, bbox),
            extra: self
                .extra
                .iter()
                .map(|(n, m)| (n.clone(), crop_mask(m, bbox)))
                .collect(),
        }
    }
}

/// Linearly assembles the prototype stack with a coefficient set and
/// applies the per-channel activations: sigmoid for instance, quality and
/// width, tanh for the doubled-angle channels, and each extra channel's
/// declared activation.
pub fn assemble(protos: &PrototypeStack, coeffs: &CoefficientSet) -> Result<MaskSet> {
    let (h, w, _) = protos.dims();
    assemble_region(protos, coeffs, 0..h, 0..w)
}

/// `assemble` followed by `crop` to `bbox`, fused: pixels outside the box
/// are never assembled and stay 0. Output equals
/// `assemble(protos, coeffs)?.crop(bbox)` exactly.
pub fn assemble_cropped(
    protos: &PrototypeStack,
    coeffs: &CoefficientSet,
    bbox: &BoundingBox,
) -> Result<MaskSet> {
    let (h, w, _) = protos.dims();
    assemble_region(protos, coeffs, bbox.pixel_rows(h), bbox.pixel_cols(w))
}

fn assemble_region(
    protos: &PrototypeStack,
    coeffs: &CoefficientSet,
    rows: std::ops::Range<usize>,
    cols: std::ops::Range<usize>,
) -> Result<MaskSet> {
    coeffs.validate()?;
    if coeffs.k() != protos.k() {
        return Err(Error::DimensionMismatch(format!(
            "coefficient length {} vs prototype k {}",
            coeffs.k(),
            protos.k()
        )));
    }
    let mut channels: Vec<&[f64]> = vec![
        &coeffs.instance,
        &coeffs.quality,
        &coeffs.sin2t,
        &coeffs.cos2t,
        &coeffs.width,
    ];
    for e in &coeffs.extra {
        channels.push(&e.coeffs);
    }
    let mut maps = protos.project_multi_region(&channels, rows.clone(), cols.clone());
    let activations: Vec<Activation> = [
        Activation::Sigmoid, // instance
        Activation::Sigmoid, // quality
        Activation::Tanh,    // sin2t
        Activation::Tanh,    // cos2t
        Activation::Sigmoid, // width
    ]
    .into_iter()
    .chain(coeffs.extra.iter().map(|e| e.activation))
    .collect();
    for (map, act) in maps.iter_mut().zip(&activations) {
        let w = map.dim().1;
        let slice = map.as_slice_mut().expect("standard layout");
        for r in rows.clone() {
            for c in cols.clone() {
                let at = r * w + c;
                slice[at] = act.apply(slice[at]);
            }
        }
    }
    let mut it = maps.into_iter();
    let instance = it.next().unwrap();
    let quality = it.next().unwrap();
    let sin2t = it.next().unwrap();
    let cos2t = it.next().unwrap();
    let width = it.next().unwrap();
    let extra = coeffs
        .extra
        .iter()
        .map(|e| e.name.clone())
        .zip(it)
        .collect();
    Ok(MaskSet {
        instance,
        quality,
        sin2t,
        cos2t,
        width,
        extra,
    })
}

/// Zeroes every value outside the (half-open, clamped) box; dimensions are
/// preserved and values inside the box are copied exactly.
pub fn crop_mask(mask: &Array2<f64>, bbox: &BoundingBox) -> Array2<f64> {
    let (h, w) = mask.dim();
    let mut out = Array2::zeros((h, w));
    for r in bbox.pixel_rows(h) {
        for c in bbox.pixel_cols(w) {
            out[[r, c]] = mask[[r, c]];
        }
    }
    out
}

/// Class-aware greedy non-maximum suppression.
///
/// Detections below `score_thr` are dropped; the rest are visited in
/// descending score order (ties by input index) and a detection is
/// suppressed when its box IoU with an already kept same-class detection
/// exceeds `iou_thr`. The output preserves score ordering.
pub fn nms(dets: &[Detection], iou_thr: f64, score_thr: f64) -> Vec<Detection> {
    let mut order: Vec<usize> = (0..dets.len())
        .filter(|&i| dets[i].score >= score_thr)
        .collect();
    order.sort_by(|&a, &b| {
        dets[b]
            .score
            .partial_cmp(&dets[a].score)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut kept: Vec<usize> = Vec::new();
    for &i in &order {
        let suppressed = kept.iter().any(|&j| {
            dets[j].class_id == dets[i].class_id && dets[j].bbox.iou(&dets[i].bbox) > iou_thr
        });
        if !suppressed {
            kept.push(i);
        }
    }
    kept.into_iter().map(|i| dets[i].clone()).collect()
}

/// Inference parameters for `infer_scene`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct InferParams {
    pub nms_iou: f64,
    pub score_thr: f64,
    /// Grasp candidates kept per object; the first is the top-1 grasp.
    pub top_n: usize,
}

impl Default for InferParams {
    fn default() -> Self {
        Self {
            nms_iou: 0.5,
            score_thr: 0.05,
            top_n: 1,
        }
    }
}

/// One object of a predicted scene.
#[derive(Debug, Clone)]
pub struct PredictedObject {
    pub class_id: u32,
    pub score: f64,
    /// Detection box clamped to the prototype canvas.
    pub bbox: BoundingBox,
    /// Decoded grasps, quality-descending, each carrying the detection's
    /// class id and a center inside `bbox`.
    pub grasps: Vec<GraspRect>,
    /// Instance mask thresholded at 0.5 (values 0 or 1), zero outside the
    /// box.
    pub instance_mask: Array2<f64>,
}

/// Runs the post-network pipeline over one scene: NMS, per-survivor
/// assembly, crop by the survivor's box, and grasp decoding inside the box.
/// Decoded grasps inherit the detection's class id, which is what ties
/// grasps to objects in a single stage.
pub fn infer_scene(
    protos: &PrototypeStack,
    dets: &[Detection],
    cfg: &CodecConfig,
    params: &InferParams,
) -> Result<Vec<PredictedObject>> {
    let survivors = nms(dets, params.nms_iou, params.score_thr);
    let (h, w, _) = protos.dims();
    let mut objects = Vec::with_capacity(survivors.len());
    for det in survivors {
        let bbox = det.bbox.clamp_to(h, w);
        let masks = assemble_cropped(protos, &det.coeffs, &bbox)?;
        let grasps: Vec<GraspRect> =
            decode_channels(&masks.quality, &masks.sin2t, &masks.cos2t, &masks.width, &bbox, params.top_n, cfg)
                .into_iter()
                .map(|g| g.with_class_id(det.class_id))
                .collect();
        let instance_mask = masks.instance.mapv(|v| if v > 0.5 { 1.0 } else { 0.0 });
        objects.push(PredictedObject {
            class_id: det.class_id,
            score: det.score,
            bbox,
            grasps,
            instance_mask,
            masks,
        });
    }
    Ok(objects)
}
