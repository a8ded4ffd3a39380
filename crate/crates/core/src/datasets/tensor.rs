//! The GKT1 tensor file format.
//!
//! Layout, all little-endian:
//! ```text
//! magic   4 bytes  "GKT1"
//! ndim    u32      2 or 3
//! dims    ndim x u32
//! payload product(dims) x f32, row-major (last dimension fastest)
//! ```

use ndarray::{Array2, Array3};

use crate::error::{Error, Result};
use crate::maskcodec::GraspMaps;

pub const TENSOR_MAGIC: [u8; 4] = *b"GKT1";

/// Channel order of a grasp-map tensor (`dims = [5, h, w]`).
pub const GRASP_MAP_CHANNELS: [&str; 5] = ["quality", "position", "sin2t", "cos2t", "width"];

/// Hard cap on tensor elements (16 GiB of f32) to reject corrupt headers
/// before allocating.
const MAX_ELEMENTS: u64 = 1 << 32;

/// An owned f32 tensor with 2 or 3 dimensions, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    dims: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(dims: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        if !(dims.len() == 2 || dims.len() == 3) {
            return Err(Error::Tensor(format!("ndim must be 2 or 3, got {}", dims.len())));
        }
        let expect: usize = dims.iter().product();
        if data.len() != expect {
            return Err(Error::Tensor(format!(
                "payload has {} values, dims {:?} require {expect}",
                data.len(),
                dims
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn from_array2(a: &Array2<f64>) -> Self {
        let (h, w) = a.dim();
        Self {
            dims: vec![h, w],
            data: a.iter().map(|&v| v as f32).collect(),
        }
    }

    pub fn to_array2(&self) -> Result<Array2<f64>> {
        if self.dims.len() != 2 {
            return Err(Error::Tensor(format!("expected 2-D tensor, got {:?}", self.dims)));
        }
        Ok(Array2::from_shape_vec(
            (self.dims[0], self.dims[1]),
            self.data.iter().map(|&v| v as f64).collect(),
        )
        .expect("length checked at construction"))
    }

    pub fn from_array3(a: &Array3<f64>) -> Self {
        let (d0, d1, d2) = a.dim();
        let std = a.as_standard_layout();
        Self {
            dims: vec![d0, d1, d2],
            data: std.iter().map(|&v| v as f32).collect(),
        }
    }

    pub fn to_array3(&self) -> Result<Array3<f64>> {
        if self.dims.len() != 3 {
            return Err(Error::Tensor(format!("expected 3-D tensor, got {:?}", self.dims)));
        }
        Ok(Array3::from_shape_vec(
            (self.dims[0], self.dims[1], self.dims[2]),
            self.data.iter().map(|&v| v as f64).collect(),
        )
        .expect("length checked at construction"))
    }

    /// Packs a grasp map stack as a `[5, h, w]` tensor in
    /// [`GRASP_MAP_CHANNELS`] order.
    pub fn from_grasp_maps(maps: &GraspMaps) -> Self {
        let (h, w) = maps.dims();
        let mut data = Vec::with_capacity(5 * h * w);
        for m in [&maps.quality, &maps.position, &maps.sin2t, &maps.cos2t, &maps.width] {
            data.extend(m.iter().map(|&v| v as f32));
        }
        Self {
            dims: vec![5, h, w],
            data,
        }
    }

    pub fn to_grasp_maps(&self) -> Result<GraspMaps> {
        if self.dims.len() != 3 || self.dims[0] != 5 {
            return Err(Error::Tensor(format!(
                "grasp maps need dims [5, h, w], got {:?}",
                self.dims
            )));
        }
        let (h, w) = (self.dims[1], self.dims[2]);
        let plane = h * w;
        let take = |i: usize| {
            Array2::from_shape_vec(
                (h, w),
                self.data[i * plane..(i + 1) * plane]
                    .iter()
                    .map(|&v| v as f64)
                    .collect(),
            )
            .expect("length checked at construction")
        };
        Ok(GraspMaps {
            quality: take(0),
            position: take(1),
            sin2t: take(2),
            cos2t: take(3),
            width: take(4),
        })
    }
}

/// Serializes a tensor to GKT1 bytes.
pub fn write_tensor(t: &Tensor) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 4 * t.dims.len() + 4 * t.data.len());
    out.extend_from_slice(&TENSOR_MAGIC);
    out.extend_from_slice(&(t.dims.len() as u32).to_le_bytes());
    for &d in &t.dims {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for &v in &t.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Parses GKT1 bytes. The payload length must match the header exactly;
/// trailing bytes are an error.
pub fn read_tensor(bytes: &[u8]) -> Result<Tensor> {
    if bytes.len() < 8 {
        return Err(Error::Tensor(format!("file too short: {} bytes", bytes.len())));
    }
    if bytes[..4] != TENSOR_MAGIC {
        return Err(Error::BadMagic {
            found: bytes[..4].to_vec(),
        });
    }
    let ndim = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    if !(ndim == 2 || ndim == 3) {
        return Err(Error::Tensor(format!("ndim must be 2 or 3, got {ndim}")));
    }
    let header = 8 + 4 * ndim;
    if bytes.len() < header {
        return Err(Error::Tensor("truncated dimension header".into()));
    }
    let mut dims = Vec::with_capacity(ndim);
    let mut product: u64 = 1;
    for i in 0..ndim {
        let d = u32::from_le_bytes(bytes[8 + 4 * i..12 + 4 * i].try_into().unwrap()) as u64;
        product = product
            .checked_mul(d)
            .filter(|&p| p <= MAX_ELEMENTS)
            .ok_or_else(|| Error::Tensor("dimension overflow".into()))?;
        dims.push(d as usize);
    }
    let expect = header as u64 + product * 4;
    if (bytes.len() as u64) < expect {
        return Err(Error::Tensor(format!(
            "truncated payload: have {} bytes, need {expect}",
            bytes.len()
        )));
    }
    if bytes.len() as u64 > expect {
        return Err(Error::Tensor(format!(
            "trailing bytes: have {} bytes, expected {expect}",
            bytes.len()
        )));
    }
    let data = bytes[header..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Tensor::new(dims, data)
}
