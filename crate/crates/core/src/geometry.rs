//! Rotated-rectangle geometry: corner expansion, convex clipping, areas,
//! rotated and axis-aligned IoU, and pi-periodic angle distance.
//!
//! All operations are pure functions over immutable values. The coordinate
//! and box conventions are documented on the crate root.

use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};
use std::ops::Range;

use crate::error::{Error, Result};

/// Clip outputs with less area than this are collapsed to the empty
/// polygon; keeps IoU stable near tangency.
const SLIVER_AREA: f64 = 1e-12;

/// A point in image coordinates (x = column, y = row).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// Normalizes an angle to `[-pi/2, pi/2)` modulo pi. Already-normalized
/// angles pass through bit-exactly, which makes normalization idempotent.
pub fn normalize_angle(theta: f64) -> f64 {
    if (-FRAC_PI_2..FRAC_PI_2).contains(&theta) {
        return theta;
    }
    let t = theta.rem_euclid(PI);
    if t >= FRAC_PI_2 {
        t - PI
    } else {
        t
    }
}

/// Smallest distance between two angles on the half-circle, in
/// `[0, pi/2]`. Reflects the pi-periodicity of two-finger grasps:
/// `angle_delta(t, t + pi) == 0`.
pub fn angle_delta(t1: f64, t2: f64) -> f64 {
    let d = (t1 - t2).rem_euclid(PI);
    d.min(PI - d)
}

/// A planar parallel-jaw grasp: center `(x, y)`, axis angle, gripper
/// opening and jaw extent, plus a quality score and the class of the
/// object the grasp belongs to.
///
/// `width` is the rectangle extent along the grasp axis (the gripper
/// opening); `height` is the jaw extent perpendicular to it. The angle is
/// normalized to `[-pi/2, pi/2)` at construction. Class id 0 is reserved
/// for the class-agnostic "object" label.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGraspRect")]
pub struct GraspRect {
    x: f64,
    y: f64,
    theta: f64,
    width: f64,
    height: f64,
    quality: f64,
    class_id: u32,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGraspRect {
    x: f64,
    y: f64,
    theta: f64,
    width: f64,
    height: f64,
    quality: f64,
    class_id: u32,
}

impl TryFrom<RawGraspRect> for GraspRect {
    type Error = Error;

    fn try_from(r: RawGraspRect) -> Result<Self> {
        GraspRect::new(r.x, r.y, r.theta, r.width, r.height, r.quality, r.class_id)
    }
}

impl GraspRect {
    /// Builds a grasp, normalizing `theta` modulo pi. Fails on non-finite
    /// values, non-positive extents or a quality outside `[0, 1]`.
    pub fn new(
        x: f64,
        y: f64,
        theta: f64,
        width: f64,
        height: f64,
        quality: f64,
        class_id: u32,
    ) -> Result<Self> {
        for (name, v) in [
            ("x", x),
            ("y", y),
            ("theta", theta),
            ("width", width),
            ("height", height),
            ("quality", quality),
        ] {
            if !v.is_finite() {
                return Err(Error::InvalidGrasp(format!("{name} is not finite")));
            }
        }
        if width <= 0.0 {
            return Err(Error::InvalidGrasp(format!("width must be > 0, got {width}")));
        }
        if height <= 0.0 {
            return Err(Error::InvalidGrasp(format!("height must be > 0, got {height}")));
        }
        if !(0.0..=1.0).contains(&quality) {
            return Err(Error::InvalidGrasp(format!(
                "quality must be in [0, 1], got {quality}"
            )));
        }
        Ok(Self {
            x,
            y,
            theta: normalize_angle(theta),
            width,
            height,
            quality,
            class_id,
        })
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    /// Axis angle in radians, always in `[-pi/2, pi/2)`.
    pub fn angle(&self) -> f64 {
        self.theta
    }

    /// Gripper opening: extent along the grasp axis.
    pub fn width(&self) -> f64 {
        self.width
    }

    /// Jaw extent, perpendicular to the grasp axis.
    pub fn height(&self) -> f64 {
        self.height
    }

    pub fn quality(&self) -> f64 {
        self.quality
    }

    pub fn class_id(&self) -> u32 {
        self.class_id
    }

    /// Same grasp affiliated with another object class.
    pub fn with_class_id(mut self, class_id: u32) -> Self {
        self.class_id = class_id;
        self
    }

    /// Same grasp translated by `(dx, dy)`.
    pub fn translated(mut self, dx: f64, dy: f64) -> Self {
        self.x += dx;
        self.y += dy;
        self
    }

    /// Unit vector of the grasp axis in image coordinates. The y component
    /// is negated because image y grows downward.
    pub fn axis(&self) -> (f64, f64) {
        let (s, c) = self.theta.sin_cos();
        (c, -s)
    }

    /// The grasp rectangle as a 4-vertex convex polygon, counter-clockwise.
    /// Its centroid is the grasp center; rotating it by `-theta` about the
    /// center yields an axis-aligned `width x height` box.
    pub fn to_polygon(&self) -> Polygon {
        self.scaled_polygon(1.0)
    }

    /// Rectangle polygon with the extent along the grasp axis scaled by
    /// `axis_fraction` (full jaw extent across). Used for center-region
    /// rasterization in the codec.
    pub(crate) fn scaled_polygon(&self, axis_fraction: f64) -> Polygon {
        let (s, c) = self.theta.sin_cos();
        let (ux, uy) = (c, -s);
        let (vx, vy) = (s, c);
        let hw = 0.5 * self.width * axis_fraction;
        let hh = 0.5 * self.height;
        let corner = |a: f64, b: f64| {
            Point::new(self.x + a * ux + b * vx, self.y + a * uy + b * vy)
        };
        Polygon::new(vec![
            corner(-hw, -hh),
            corner(hw, -hh),
            corner(hw, hh),
            corner(-hw, hh),
        ])
    }
}

/// A convex polygon. Vertices are stored in counter-clockwise order
/// (positive shoelace sign on raw image coordinates); zero vertices denote
/// the empty polygon.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Polygon {
    vertices: Vec<Point>,
}

impl Polygon {
    /// Builds a polygon, reversing the vertex order if it arrives clockwise.
    pub fn new(vertices: Vec<Point>) -> Self {
        let mut p = Self { vertices };
        if p.signed_area() < 0.0 {
            p.vertices.reverse();
        }
        p
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    fn signed_area(&self) -> f64 {
        let n = self.vertices.len();
        if n < 3 {
            return 0.0;
        }
        let mut acc = 0.0;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            acc += a.x * b.y - b.x * a.y;
        }
        0.5 * acc
    }

    /// Shoelace area; zero for the empty polygon.
    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    /// Area centroid; `None` for polygons without interior.
    pub fn centroid(&self) -> Option<Point> {
        let n = self.vertices.len();
        if n < 3 {
            return None;
        }
        let a = self.signed_area();
        if a.abs() < SLIVER_AREA {
            return None;
        }
        let (mut cx, mut cy) = (0.0, 0.0);
        for i in 0..n {
            let p = self.vertices[i];
            let q = self.vertices[(i + 1) % n];
            let w = p.x * q.y - q.x * p.y;
            cx += (p.x + q.x) * w;
            cy += (p.y + q.y) * w;
        }
        Some(Point::new(cx / (6.0 * a), cy / (6.0 * a)))
    }

    /// Point-in-polygon test; the boundary counts as inside.
    pub fn contains(&self, p: Point) -> bool {
        let n = self.vertices.len();
        if n < 3 {
            return false;
        }
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
            if cross < 0.0 {
                return false;
            }
        }
        true
    }

    /// Axis-aligned bounding box; `None` for the empty polygon.
    pub fn bounding_box(&self) -> Option<BoundingBox> {
        let first = self.vertices.first()?;
        let (mut x0, mut y0, mut x1, mut y1) = (first.x, first.y, first.x, first.y);
        for v in &self.vertices[1..] {
            x0 = x0.min(v.x);
            y0 = y0.min(v.y);
            x1 = x1.max(v.x);
            y1 = y1.max(v.y);
        }
        Some(BoundingBox {
            x_min: x0,
            y_min: y0,
            x_max: x1,
            y_max: y1,
        })
    }
}

/// Sutherland-Hodgman intersection of two convex polygons. Commutative in
/// the resulting area; disjoint inputs yield the empty polygon, as do
/// collinear slivers below the internal area tolerance.
pub fn convex_clip(subject: &Polygon, clip: &Polygon) -> Polygon {
    if subject.vertices.len() < 3 || clip.vertices.len() < 3 {
        return Polygon::empty();
    }
    let mut output = subject.vertices.clone();
    let nc = clip.vertices.len();
    for i in 0..nc {
        if output.is_empty() {
            break;
        }
        let a = clip.vertices[i];
        let b = clip.vertices[(i + 1) % nc];
        let input = std::mem::take(&mut output);
        // Inside = left of the directed clip edge (clip is CCW); boundary
        // points are kept.
        let side = |p: Point| (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
        let n = input.len();
        for j in 0..n {
            let cur = input[j];
            let prev = input[(j + n - 1) % n];
            let cur_in = side(cur) >= 0.0;
            let prev_in = side(prev) >= 0.0;
            if cur_in {
                if !prev_in {
                    output.push(edge_intersection(prev, cur, a, b));
                }
                output.push(cur);
            } else if prev_in {
                output.push(edge_intersection(prev, cur, a, b));
            }
        }
    }
    let result = Polygon::new(output);
    if result.area() < SLIVER_AREA {
        Polygon::empty()
    } else {
        result
    }
}

fn edge_intersection(p1: Point, p2: Point, a: Point, b: Point) -> Point {
    let dx = p2.x - p1.x;
    let dy = p2.y - p1.y;
    let ex = b.x - a.x;
    let ey = b.y - a.y;
    let denom = dx * ey - dy * ex;
    // Callers only request intersections for segments that cross the clip
    // line, so denom is nonzero there; guard anyway.
    if denom.abs() < f64::EPSILON * (dx.abs() + dy.abs() + ex.abs() + ey.abs()).max(1.0) {
        return p2;
    }
    let t = ((a.x - p1.x) * ey - (a.y - p1.y) * ex) / denom;
    Point::new(p1.x + t * dx, p1.y + t * dy)
}

/// Intersection-over-union of two grasp rectangles via exact polygon
/// clipping. Symmetric; 1 iff the rectangles coincide as point sets.
pub fn rotated_iou(a: &GraspRect, b: &GraspRect) -> f64 {
    let pa = a.to_polygon();
    let pb = b.to_polygon();
    let inter = convex_clip(&pa, &pb).area();
    let union = pa.area() + pb.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

/// An axis-aligned box. Half-open over pixels: a pixel `(x, y)` is covered
/// when `x_min <= x < x_max` and `y_min <= y < y_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBoundingBox")]
pub struct BoundingBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBoundingBox {
    x_min: f64,
    y_min: f64,
    x_max: f64,
    y_max: f64,
}

impl TryFrom<RawBoundingBox> for BoundingBox {
    type Error = Error;

    fn try_from(r: RawBoundingBox) -> Result<Self> {
        BoundingBox::new(r.x_min, r.y_min, r.x_max, r.y_max)
    }
}

impl BoundingBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self> {
        if ![x_min, y_min, x_max, y_max].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidBox("coordinates must be finite".into()));
        }
        if x_min > x_max || y_min > y_max {
            return Err(Error::InvalidBox(format!(
                "min must not exceed max: [{x_min}, {x_max}] x [{y_min}, {y_max}]"
            )));
        }
        Ok(Self {
            x_min,
            y_min,
            x_max,
            y_max,
        })
    }

    /// Box spanning a full `h x w` pixel canvas.
    pub fn full(h: usize, w: usize) -> Self {
        Self {
            x_min: 0.0,
            y_min: 0.0,
            x_max: w as f64,
            y_max: h as f64,
        }
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn contains_point(&self, x: f64, y: f64) -> bool {
        x >= self.x_min && x < self.x_max && y >= self.y_min && y < self.y_max
    }

    /// Standard axis-aligned IoU; symmetric, 0 when either box has no area.
    pub fn iou(&self, other: &BoundingBox) -> f64 {
        let ix = (self.x_max.min(other.x_max) - self.x_min.max(other.x_min)).max(0.0);
        let iy = (self.y_max.min(other.y_max) - self.y_min.max(other.y_min)).max(0.0);
        let inter = ix * iy;
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }

    /// Smallest box containing both.
    pub fn union(&self, other: &BoundingBox) -> BoundingBox {
        BoundingBox {
            x_min: self.x_min.min(other.x_min),
            y_min: self.y_min.min(other.y_min),
            x_max: self.x_max.max(other.x_max),
            y_max: self.y_max.max(other.y_max),
        }
    }

    /// Box clamped to an `h x w` canvas.
    pub fn clamp_to(&self, h: usize, w: usize) -> BoundingBox {
        BoundingBox {
            x_min: self.x_min.clamp(0.0, w as f64),
            y_min: self.y_min.clamp(0.0, h as f64),
            x_max: self.x_max.clamp(0.0, w as f64),
            y_max: self.y_max.clamp(0.0, h as f64),
        }
    }

    /// Row indices of pixels covered by the box on a canvas with `h` rows.
    pub fn pixel_rows(&self, h: usize) -> Range<usize> {
        pixel_span(self.y_min, self.y_max, h)
    }

    /// Column indices of pixels covered by the box on a canvas with `w`
    /// columns.
    pub fn pixel_cols(&self, w: usize) -> Range<usize> {
        pixel_span(self.x_min, self.x_max, w)
    }
}

/// Integer pixel coordinates p with `min <= p < max`, clamped to
/// `[0, limit)`. An inverted span yields an empty range.
fn pixel_span(min: f64, max: f64, limit: usize) -> Range<usize> {
    let start = min.ceil().clamp(0.0, limit as f64) as usize;
    let end = max.ceil().clamp(0.0, limit as f64) as usize;
    start..end
}
