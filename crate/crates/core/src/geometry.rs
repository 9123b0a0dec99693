//! Axis-aligned boxes on a normalized canvas and their overlap metrics.
//!
//! Boxes are stored in center-size form `(cx, cy, w, h)`; corner form is
//! derived on demand. All coordinates are fractions of the canvas, so the
//! visible region is `[0, 1]²`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Boxes whose clipped area falls below this fraction of the canvas are dropped.
pub const MIN_BOX_AREA: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BBox<T> {
    pub cx: T,
    pub cy: T,
    pub w: T,
    pub h: T,
}

/// Corner form `(x0, y0, x1, y1)` with `x0 <= x1`, `y0 <= y1`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Corners<T> {
    pub x0: T,
    pub y0: T,
    pub x1: T,
    pub y1: T,
}

impl<T: Real> Corners<T> {
    pub fn new(x0: T, y0: T, x1: T, y1: T) -> Self {
        Self { x0, y0, x1, y1 }
    }

    pub fn area(&self) -> T {
        (self.x1 - self.x0).max(T::zero()) * (self.y1 - self.y0).max(T::zero())
    }

    pub fn to_bbox(self) -> BBox<T> {
        BBox::from_corners(self)
    }
}

impl<T: Real> BBox<T> {
    pub fn new(cx: T, cy: T, w: T, h: T) -> Self {
        Self { cx, cy, w, h }
    }

    /// Builds a box from corner coordinates; panics in debug builds if the corners are inverted.
    pub fn from_corners(c: Corners<T>) -> Self {
        debug_assert!(c.x0 <= c.x1 && c.y0 <= c.y1, "inverted corners");
        let two = T::lit(2.0);
        Self {
            cx: (c.x0 + c.x1) / two,
            cy: (c.y0 + c.y1) / two,
            w: c.x1 - c.x0,
            h: c.y1 - c.y0,
        }
    }

    /// Convenience for `from_corners(Corners::new(..))`.
    pub fn from_xyxy(x0: T, y0: T, x1: T, y1: T) -> Self {
        Self::from_corners(Corners::new(x0, y0, x1, y1))
    }

    pub fn to_corners(&self) -> Corners<T> {
        let half = T::lit(0.5);
        Corners {
            x0: self.cx - half * self.w,
            y0: self.cy - half * self.h,
            x1: self.cx + half * self.w,
            y1: self.cy + half * self.h,
        }
    }

    pub fn area(&self) -> T {
        self.w * self.h
    }

    /// Finite coordinates and non-negative extent.
    pub fn is_valid(&self) -> bool {
        [self.cx, self.cy, self.w, self.h].iter().all(|v| v.is_finite()) && self.w >= T::zero() && self.h >= T::zero()
    }

    pub fn validate(&self) -> Result<()> {
        if self.is_valid() {
            Ok(())
        } else {
            Err(Error::input(format!("invalid box {self:?}")))
        }
    }

    /// Sum of absolute coordinate differences in center-size form.
    pub fn l1(&self, other: &Self) -> T {
        (self.cx - other.cx).abs() + (self.cy - other.cy).abs() + (self.w - other.w).abs() + (self.h - other.h).abs()
    }

    pub fn as_array(&self) -> [T; 4] {
        [self.cx, self.cy, self.w, self.h]
    }

    pub fn from_array(a: [T; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    /// Scales center and size by `scale`, then offsets the center by `(dx, dy)`. No clipping.
    pub fn scale_translate(&self, scale: T, dx: T, dy: T) -> Self {
        Self {
            cx: self.cx * scale + dx,
            cy: self.cy * scale + dy,
            w: self.w * scale,
            h: self.h * scale,
        }
    }

    /// Intersection with the unit canvas, or `None` when less than [`MIN_BOX_AREA`] survives.
    pub fn clip_to_canvas(&self) -> Option<Self> {
        let c = self.to_corners();
        let (zero, one) = (T::zero(), T::one());
        let x0 = c.x0.max(zero).min(one);
        let y0 = c.y0.max(zero).min(one);
        let x1 = c.x1.max(zero).min(one);
        let y1 = c.y1.max(zero).min(one);
        let clipped = Corners::new(x0, y0, x1.max(x0), y1.max(y0));
        if clipped.area() < T::lit(MIN_BOX_AREA) {
            None
        } else {
            Some(BBox::from_corners(clipped))
        }
    }

    /// [`scale_translate`](Self::scale_translate) followed by canvas clipping.
    ///
    /// Returns `None` for boxes that end up (nearly) outside the canvas; callers
    /// drop those from annotation sets.
    pub fn transform(&self, scale: T, dx: T, dy: T) -> Result<Option<Self>> {
        if !(scale > T::zero()) {
            return Err(Error::input(format!("transform scale must be > 0, got {scale}")));
        }
        Ok(self.scale_translate(scale, dx, dy).clip_to_canvas())
    }
}

fn intersection<T: Real>(a: &Corners<T>, b: &Corners<T>) -> T {
    let iw = (a.x1.min(b.x1) - a.x0.max(b.x0)).max(T::zero());
    let ih = (a.y1.min(b.y1) - a.y0.max(b.y0)).max(T::zero());
    iw * ih
}

/// Intersection over union. Returns 0 when the union has zero area.
pub fn iou<T: Real>(a: &BBox<T>, b: &BBox<T>) -> T {
    let (ca, cb) = (a.to_corners(), b.to_corners());
    let inter = intersection(&ca, &cb);
    let union = ca.area() + cb.area() - inter;
    if union <= T::zero() {
        T::zero()
    } else {
        inter / union
    }
}

/// Generalized IoU: `iou - (enclosure - union) / enclosure`, 0 for a degenerate enclosure.
pub fn giou<T: Real>(a: &BBox<T>, b: &BBox<T>) -> T {
    let (ca, cb) = (a.to_corners(), b.to_corners());
    let inter = intersection(&ca, &cb);
    let union = ca.area() + cb.area() - inter;
    let enclosure = Corners::new(ca.x0.min(cb.x0), ca.y0.min(cb.y0), ca.x1.max(cb.x1), ca.y1.max(cb.y1)).area();
    if enclosure <= T::zero() {
        return T::zero();
    }
    let iou = if union <= T::zero() { T::zero() } else { inter / union };
    iou - (enclosure - union) / enclosure
}
