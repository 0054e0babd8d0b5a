//! Axis-aligned boxes in absolute pixel coordinates.
//!
//! Boxes are `(x, y, w, h)` with continuous geometry: a box covers
//! `[x, x + w) x [y, y + h)`. Integer boxes therefore cover exactly `w * h`
//! unit cells, which is what the pixel-grid tests count.

use std::cmp::Ordering;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("box coordinates must be finite, got ({x}, {y}, {w}, {h})")]
    NonFinite { x: f64, y: f64, w: f64, h: f64 },
    #[error("box origin must be non-negative, got ({x}, {y})")]
    NegativeOrigin { x: f64, y: f64 },
    #[error("box must have positive extent, got width {w} and height {h}")]
    Degenerate { w: f64, h: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    x: f64,
    y: f64,
    w: f64,
    h: f64,
}

impl BoundingBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self, GeometryError> {
        if !(x.is_finite() && y.is_finite() && w.is_finite() && h.is_finite()) {
            return Err(GeometryError::NonFinite { x, y, w, h });
        }
        if x < 0.0 || y < 0.0 {
            return Err(GeometryError::NegativeOrigin { x, y });
        }
        if w <= 0.0 || h <= 0.0 {
            return Err(GeometryError::Degenerate { w, h });
        }
        Ok(Self { x, y, w, h })
    }

    /// Builds a box from its top-left `(x1, y1)` and bottom-right `(x2, y2)` corners.
    pub fn from_corners(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self, GeometryError> {
        Self::new(x1, y1, x2 - x1, y2 - y1)
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn w(&self) -> f64 {
        self.w
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.x, self.y, self.w, self.h]
    }

    pub fn corners(&self) -> [f64; 4] {
        [self.x, self.y, self.right(), self.bottom()]
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    /// Area measured from the edges, `(right - left) * (bottom - top)`.
    ///
    /// Differs from [`area`](Self::area) by at most rounding; IoU uses this
    /// form so that a box's intersection with itself equals its own area.
    fn edge_area(&self) -> f64 {
        (self.right() - self.x) * (self.bottom() - self.y)
    }

    fn total_cmp(&self, other: &Self) -> Ordering {
        self.x
            .total_cmp(&other.x)
            .then(self.y.total_cmp(&other.y))
            .then(self.w.total_cmp(&other.w))
            .then(self.h.total_cmp(&other.h))
    }

    pub fn intersection_area(&self, other: &Self) -> f64 {
        let iw = self.right().min(other.right()) - self.x.max(other.x);
        let ih = self.bottom().min(other.bottom()) - self.y.max(other.y);
        if iw <= 0.0 || ih <= 0.0 {
            0.0
        } else {
            iw * ih
        }
    }

    pub fn iou(&self, other: &Self) -> f64 {
        iou(self, other)
    }

    /// True when `self` lies inside the `width x height` image.
    pub fn within(&self, width: f64, height: f64) -> bool {
        self.right() <= width && self.bottom() <= height
    }
}

pub fn area(b: &BoundingBox) -> f64 {
    b.area()
}

/// Intersection over union, in `[0, 1]`.
///
/// Operands are put in a canonical order first so `iou(a, b)` and
/// `iou(b, a)` run the same floating-point operations.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let (a, b) = if a.total_cmp(b) == Ordering::Greater {
        (b, a)
    } else {
        (a, b)
    };
    let inter = a.intersection_area(b);
    if inter == 0.0 {
        return 0.0;
    }
    let union = a.edge_area() + b.edge_area() - inter;
    (inter / union).min(1.0)
}
