//! Core toolkit for instance-wise grasp synthesis: rotated-rectangle
//! geometry, grasp-map codecs, prototype-mask assembly, the composite
//! training loss with gradient verification, dataset import and the
//! grasp-accuracy evaluation harness.
//!
//! Conventions used throughout the crate:
//! - Image coordinates: x = column, y = row, origin top-left, y grows
//!   downward. Angles are measured counter-clockwise in the (x, -y) frame,
//!   so the unit vector of axis angle `t` is `(cos t, -sin t)` in image
//!   coordinates.
//! - Boxes are half-open: a pixel at `(x, y)` is covered by a box when
//!   `x_min <= x < x_max` and `y_min <= y < y_max`.
//! - Grasp angles are pi-periodic (two-finger gripper symmetry) and stored
//!   normalized to `[-pi/2, pi/2)`; all angle APIs take radians.

pub mod assembly;
pub mod datasets;
pub mod error;
pub mod evaluator;
pub mod fixture;
pub mod geometry;
pub mod loss;
pub mod maskcodec;
pub mod oracle;

pub use error::{Error, Result};
