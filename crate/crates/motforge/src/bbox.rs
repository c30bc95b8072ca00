//! Axis-aligned pixel-space bounding boxes.
//!
//! Coordinates use the MOT Challenge convention: top-left origin, real-valued
//! pixels, boxes described by `(left, top, width, height)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Measurement-space view of a box: `(center_x, center_y, aspect, height)`
/// with `aspect = width / height`.
pub type Measurement = [f64; 4];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BBoxError {
    #[error("box width must be positive, got {0}")]
    NonPositiveWidth(f64),
    #[error("box height must be positive, got {0}")]
    NonPositiveHeight(f64),
    #[error("box coordinates must be finite: ({0}, {1}, {2}, {3})")]
    NonFinite(f64, f64, f64, f64),
}

/// An axis-aligned box with strictly positive extent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    left: f64,
    top: f64,
    width: f64,
    height: f64,
}

impl BBox {
    pub fn new(left: f64, top: f64, width: f64, height: f64) -> Result<Self, BBoxError> {
        if !(left.is_finite() && top.is_finite() && width.is_finite() && height.is_finite()) {
            return Err(BBoxError::NonFinite(left, top, width, height));
        }
        if width <= 0.0 {
            return Err(BBoxError::NonPositiveWidth(width));
        }
        if height <= 0.0 {
            return Err(BBoxError::NonPositiveHeight(height));
        }
        Ok(Self {
            left,
            top,
            width,
            height,
        })
    }

    pub fn left(&self) -> f64 {
        self.left
    }

    pub fn top(&self) -> f64 {
        self.top
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    pub fn right(&self) -> f64 {
        self.left + self.width
    }

    pub fn bottom(&self) -> f64 {
        self.top + self.height
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    pub fn center(&self) -> (f64, f64) {
        (self.left + self.width / 2.0, self.top + self.height / 2.0)
    }
}

/// Intersection over union of two boxes. Symmetric, in `[0, 1]`, zero for
/// disjoint boxes.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let ix = (a.right().min(b.right()) - a.left().max(b.left())).max(0.0);
    let iy = (a.bottom().min(b.bottom()) - a.top().max(b.top())).max(0.0);
    let inter = ix * iy;
    let union = a.area() + b.area() - inter;
    inter / union
}

/// Convert a box to the Kalman measurement parameterization
/// `(center_x, center_y, aspect, height)`.
pub fn bbox_to_measurement(b: &BBox) -> Measurement {
    let (cx, cy) = b.center();
    [cx, cy, b.width / b.height, b.height]
}

/// Inverse of [`bbox_to_measurement`]. Fails when the measurement describes a
/// degenerate box (non-positive aspect or height).
pub fn measurement_to_bbox(m: &Measurement) -> Result<BBox, BBoxError> {
    let [cx, cy, aspect, height] = *m;
    let width = aspect * height;
    BBox::new(cx - width / 2.0, cy - height / 2.0, width, height)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bb(l: f64, t: f64, w: f64, h: f64) -> BBox {
        BBox::new(l, t, w, h).unwrap()
    }

    #[test]
    fn iou_identical_boxes_is_one() {
        let a = bb(0.0, 0.0, 10.0, 10.0);
        assert_eq!(iou(&a, &a), 1.0);
    }

    #[test]
    fn iou_disjoint_boxes_is_zero() {
        let a = bb(0.0, 0.0, 10.0, 10.0);
        let b = bb(20.0, 20.0, 5.0, 5.0);
        assert_eq!(iou(&a, &b), 0.0);
    }

    #[test]
    fn iou_half_overlap() {
        // intersection 50, union 150
        let a = bb(0.0, 0.0, 10.0, 10.0);
        let b = bb(5.0, 0.0, 10.0, 10.0);
        assert!((iou(&a, &b) - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn measurement_of_square_box() {
        let m = bbox_to_measurement(&bb(0.0, 0.0, 10.0, 10.0));
        assert_eq!(m, [5.0, 5.0, 1.0, 10.0]);
    }

    #[test]
    fn measurement_of_tall_box() {
        let m = bbox_to_measurement(&bb(0.0, 0.0, 10.0, 20.0));
        assert_eq!(m, [5.0, 10.0, 0.5, 20.0]);
    }

    #[test]
    fn degenerate_boxes_rejected() {
        assert!(matches!(
            BBox::new(0.0, 0.0, 0.0, 10.0),
            Err(BBoxError::NonPositiveWidth(_))
        ));
        assert!(matches!(
            BBox::new(0.0, 0.0, 10.0, -1.0),
            Err(BBoxError::NonPositiveHeight(_))
        ));
        assert!(matches!(
            BBox::new(f64::NAN, 0.0, 10.0, 1.0),
            Err(BBoxError::NonFinite(..))
        ));
    }

    fn arb_bbox() -> impl Strategy<Value = BBox> {
        (
            -500.0..500.0f64,
            -500.0..500.0f64,
            0.1..300.0f64,
            0.1..300.0f64,
        )
            .prop_map(|(l, t, w, h)| bb(l, t, w, h))
    }

    proptest! {
        #[test]
        fn iou_symmetric_and_bounded(a in arb_bbox(), b in arb_bbox()) {
            let ab = iou(&a, &b);
            let ba = iou(&b, &a);
            prop_assert_eq!(ab, ba);
            prop_assert!((0.0..=1.0).contains(&ab));
            prop_assert!((iou(&a, &a) - 1.0).abs() < 1e-12);
        }

        #[test]
        fn measurement_round_trip(a in arb_bbox()) {
            let back = measurement_to_bbox(&bbox_to_measurement(&a)).unwrap();
            let rel = |x: f64, y: f64| (x - y).abs() / x.abs().max(y.abs()).max(1.0);
            prop_assert!(rel(a.left(), back.left()) < 1e-9);
            prop_assert!(rel(a.top(), back.top()) < 1e-9);
            prop_assert!(rel(a.width(), back.width()) < 1e-9);
            prop_assert!(rel(a.height(), back.height()) < 1e-9);
        }
    }
}
