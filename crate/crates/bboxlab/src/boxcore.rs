//! Axis-aligned box representation and the geometric primitives every metric
//! is built from: intersection, union, enclosing box, center distance, IoU.
//!
//! Boxes live in center form `(x_c, y_c, w, h)`. Degenerate sizes are
//! rejected at construction; downstream code never has to re-validate.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoxError {
    #[error("box width and height must be positive, got w={w}, h={h}")]
    NonPositiveSize { w: f64, h: f64 },
    #[error("corner box requires x_min < x_max and y_min < y_max, got ({x_min}, {y_min}, {x_max}, {y_max})")]
    EmptyCorners {
        x_min: f64,
        y_min: f64,
        x_max: f64,
        y_max: f64,
    },
    #[error("box coordinates must be finite")]
    NonFinite,
}

/// Axis-aligned bounding box in center form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    x_c: f64,
    y_c: f64,
    w: f64,
    h: f64,
}

impl BBox {
    pub fn new(x_c: f64, y_c: f64, w: f64, h: f64) -> Result<Self, BoxError> {
        if !(x_c.is_finite() && y_c.is_finite() && w.is_finite() && h.is_finite()) {
            return Err(BoxError::NonFinite);
        }
        if w <= 0.0 || h <= 0.0 {
            return Err(BoxError::NonPositiveSize { w, h });
        }
        Ok(BBox { x_c, y_c, w, h })
    }

    pub fn from_corners(c: CornerBox) -> Self {
        // CornerBox invariants guarantee positive sizes.
        BBox {
            x_c: 0.5 * (c.x_min + c.x_max),
            y_c: 0.5 * (c.y_min + c.y_max),
            w: c.x_max - c.x_min,
            h: c.y_max - c.y_min,
        }
    }

    pub fn x_c(&self) -> f64 {
        self.x_c
    }
    pub fn y_c(&self) -> f64 {
        self.y_c
    }
    pub fn w(&self) -> f64 {
        self.w
    }
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn to_corners(&self) -> CornerBox {
        CornerBox {
            x_min: self.x_c - 0.5 * self.w,
            y_min: self.y_c - 0.5 * self.h,
            x_max: self.x_c + 0.5 * self.w,
            y_max: self.y_c + 0.5 * self.h,
        }
    }

    /// `[x_c, y_c, w, h]` as a plain array, the layout the generic metric
    /// core and the gradient module work in.
    pub fn params(&self) -> [f64; 4] {
        [self.x_c, self.y_c, self.w, self.h]
    }

    pub fn from_params(p: [f64; 4]) -> Result<Self, BoxError> {
        BBox::new(p[0], p[1], p[2], p[3])
    }
}

impl TryFrom<[f64; 4]> for BBox {
    type Error = BoxError;
    fn try_from(p: [f64; 4]) -> Result<Self, BoxError> {
        BBox::from_params(p)
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> [f64; 4] {
        b.params()
    }
}

/// Axis-aligned box in corner form, used by annotation formats and as the
/// enclosing-box representation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CornerBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl CornerBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self, BoxError> {
        if !(x_min.is_finite() && y_min.is_finite() && x_max.is_finite() && y_max.is_finite()) {
            return Err(BoxError::NonFinite);
        }
        if x_min >= x_max || y_min >= y_max {
            return Err(BoxError::EmptyCorners {
                x_min,
                y_min,
                x_max,
                y_max,
            });
        }
        Ok(CornerBox {
            x_min,
            y_min,
            x_max,
            y_max,
        })
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
        x >= self.x_min && x <= self.x_max && y >= self.y_min && y <= self.y_max
    }

    pub fn contains_box(&self, other: &CornerBox) -> bool {
        self.x_min <= other.x_min
            && self.y_min <= other.y_min
            && self.x_max >= other.x_max
            && self.y_max >= other.y_max
    }
}

/// Smallest enclosing box of a pair, with its squared diagonal and side
/// lengths (the `c²`, `w^c`, `h^c` normalizers of the distance penalties).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnclosureInfo {
    pub enclosing: CornerBox,
    pub c_sq: f64,
    pub w_c: f64,
    pub h_c: f64,
}

pub fn intersection_area(a: &BBox, b: &BBox) -> f64 {
    geom::intersection_area(&a.params(), &b.params())
}

pub fn union_area(a: &BBox, b: &BBox) -> f64 {
    geom::union_area(&a.params(), &b.params())
}

pub fn center_distance_sq(a: &BBox, b: &BBox) -> f64 {
    geom::center_distance_sq(&a.params(), &b.params())
}

pub fn enclosure(a: &BBox, b: &BBox) -> EnclosureInfo {
    let ac = a.to_corners();
    let bc = b.to_corners();
    let enclosing = CornerBox {
        x_min: ac.x_min.min(bc.x_min),
        y_min: ac.y_min.min(bc.y_min),
        x_max: ac.x_max.max(bc.x_max),
        y_max: ac.y_max.max(bc.y_max),
    };
    let w_c = enclosing.width();
    let h_c = enclosing.height();
    EnclosureInfo {
        enclosing,
        c_sq: w_c * w_c + h_c * h_c,
        w_c,
        h_c,
    }
}

/// Intersection over union. 1 iff the boxes coincide, 0 iff their interiors
/// are disjoint (touching edges count as disjoint).
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    geom::iou(&a.params(), &b.params())
}

/// Geometry over the generic scalar, shared by the f64 API above and the
/// dual-number gradient path. Boxes are `[x_c, y_c, w, h]` arrays.
pub(crate) mod geom {
    use super::Real;

    pub fn corners<T: Real>(b: &[T; 4]) -> (T, T, T, T) {
        let half = T::lift(0.5);
        (
            b[0] - half * b[2],
            b[1] - half * b[3],
            b[0] + half * b[2],
            b[1] + half * b[3],
        )
    }

    pub fn area<T: Real>(b: &[T; 4]) -> T {
        b[2] * b[3]
    }

    pub fn intersection_area<T: Real>(a: &[T; 4], b: &[T; 4]) -> T {
        let (ax0, ay0, ax1, ay1) = corners(a);
        let (bx0, by0, bx1, by1) = corners(b);
        let iw = (ax1.min(bx1) - ax0.max(bx0)).relu();
        let ih = (ay1.min(by1) - ay0.max(by0)).relu();
        iw * ih
    }

    pub fn union_area<T: Real>(a: &[T; 4], b: &[T; 4]) -> T {
        area(a) + area(b) - intersection_area(a, b)
    }

    pub fn center_distance_sq<T: Real>(a: &[T; 4], b: &[T; 4]) -> T {
        let dx = a[0] - b[0];
        let dy = a[1] - b[1];
        dx * dx + dy * dy
    }

    /// Enclosing-box side lengths `(w_c, h_c)` and squared diagonal `c²`.
    pub fn enclosure<T: Real>(a: &[T; 4], b: &[T; 4]) -> (T, T, T) {
        let (ax0, ay0, ax1, ay1) = corners(a);
        let (bx0, by0, bx1, by1) = corners(b);
        let w_c = ax1.max(bx1) - ax0.min(bx0);
        let h_c = ay1.max(by1) - ay0.min(by0);
        (w_c, h_c, w_c * w_c + h_c * h_c)
    }

    pub fn iou<T: Real>(a: &[T; 4], b: &[T; 4]) -> T {
        let inter = intersection_area(a, b);
        inter / (area(a) + area(b) - inter)
    }
}
