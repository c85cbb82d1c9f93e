//! Overlap metrics: class-wise IoU, macro mIoU over the foreground classes,
//! and class-agnostic foreground IoU (both foreground labels collapsed).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label_map::LabelMap;

/// Intersection/union pixel counts, mergeable by addition across images.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverlapCounts {
    pub intersection: [u64; 2], // classes 1 and 2
    pub union: [u64; 2],
    pub fg_intersection: u64,
    pub fg_union: u64,
}

impl OverlapCounts {
    pub fn merge(&mut self, other: &OverlapCounts) {
        for k in 0..2 {
            self.intersection[k] += other.intersection[k];
            self.union[k] += other.union[k];
        }
        self.fg_intersection += other.fg_intersection;
        self.fg_union += other.fg_union;
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct OverlapResult {
    pub iou_class1: Option<f64>,
    pub iou_class2: Option<f64>,
    pub miou_fg: Option<f64>,
    pub fg_iou: Option<f64>,
}

pub fn accumulate_overlap(
    gt: &LabelMap,
    pred: &LabelMap,
    acc: &mut OverlapCounts,
) -> Result<()> {
    if !gt.same_dims(pred) {
        return Err(Error::DimensionMismatch {
            left: format!("{}x{}", gt.height(), gt.width()),
            right: format!("{}x{}", pred.height(), pred.width()),
        });
    }
    for (&y, &p) in gt.data().iter().zip(pred.data()) {
        for class in 1..=2u8 {
            let in_gt = y == class;
            let in_pred = p == class;
            if in_gt && in_pred {
                acc.intersection[class as usize - 1] += 1;
            }
            if in_gt || in_pred {
                acc.union[class as usize - 1] += 1;
            }
        }
        let fg_gt = y != 0;
        let fg_pred = p != 0;
        if fg_gt && fg_pred {
            acc.fg_intersection += 1;
        }
        if fg_gt || fg_pred {
            acc.fg_union += 1;
        }
    }
    Ok(())
}

/// A class with union 0 yields None and is excluded from the macro mean.
pub fn finalize_overlap(acc: &OverlapCounts) -> OverlapResult {
    let ratio = |i: u64, u: u64| (u > 0).then(|| i as f64 / u as f64);
    let iou_class1 = ratio(acc.intersection[0], acc.union[0]);
    let iou_class2 = ratio(acc.intersection[1], acc.union[1]);
    let miou_fg = match (iou_class1, iou_class2) {
        (Some(a), Some(b)) => Some((a + b) / 2.0),
        (Some(a), None) | (None, Some(a)) => Some(a),
        (None, None) => None,
    };
    OverlapResult {
        iou_class1,
        iou_class2,
        miou_fg,
        fg_iou: ratio(acc.fg_intersection, acc.fg_union),
    }
}

pub fn overlap_for_pair(gt: &LabelMap, pred: &LabelMap) -> Result<OverlapCounts> {
    let mut acc = OverlapCounts::default();
    accumulate_overlap(gt, pred, &mut acc)?;
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn map(h: usize, w: usize, data: Vec<u8>) -> LabelMap {
        LabelMap::new(h, w, data).unwrap()
    }

    #[test]
    fn identity_gives_perfect_iou() {
        let m = map(2, 2, vec![1, 2, 0, 1]);
        let acc = overlap_for_pair(&m, &m).unwrap();
        let r = finalize_overlap(&acc);
        assert_eq!(r.iou_class1, Some(1.0));
        assert_eq!(r.iou_class2, Some(1.0));
        assert_eq!(r.miou_fg, Some(1.0));
        assert_eq!(r.fg_iou, Some(1.0));
    }

    #[test]
    fn swapped_identity_counts() {
        // gt=[[1,1],[0,0]], pred=[[2,2],[0,0]]
        let gt = map(2, 2, vec![1, 1, 0, 0]);
        let pred = map(2, 2, vec![2, 2, 0, 0]);
        let acc = overlap_for_pair(&gt, &pred).unwrap();
        assert_eq!(acc.intersection, [0, 0]);
        assert_eq!(acc.union, [2, 2]);
        assert_eq!(acc.fg_intersection, 2);
        assert_eq!(acc.fg_union, 2);
    }

    #[test]
    fn all_background_is_undefined() {
        let m = map(2, 2, vec![0; 4]);
        let acc = overlap_for_pair(&m, &m).unwrap();
        let r = finalize_overlap(&acc);
        assert_eq!(r.iou_class1, None);
        assert_eq!(r.iou_class2, None);
        assert_eq!(r.miou_fg, None);
        assert_eq!(r.fg_iou, None);
    }

    #[test]
    fn finalize_arithmetic() {
        let acc = OverlapCounts {
            intersection: [3, 1],
            union: [4, 2],
            fg_intersection: 0,
            fg_union: 0,
        };
        let r = finalize_overlap(&acc);
        assert_eq!(r.iou_class1, Some(0.75));
        assert_eq!(r.iou_class2, Some(0.5));
        assert_eq!(r.miou_fg, Some(0.625));
    }

    #[test]
    fn undefined_class_excluded_from_macro_mean() {
        let acc = OverlapCounts {
            intersection: [5, 0],
            union: [5, 0],
            fg_intersection: 5,
            fg_union: 5,
        };
        let r = finalize_overlap(&acc);
        assert_eq!(r.iou_class1, Some(1.0));
        assert_eq!(r.iou_class2, None);
        assert_eq!(r.miou_fg, Some(1.0));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let a = map(1, 2, vec![0, 1]);
        let b = map(2, 1, vec![0, 1]);
        assert!(overlap_for_pair(&a, &b).is_err());
    }

    /// Synthetic pair shaped to land on the per-class IoU reporting format.
    #[test]
    fn absolute_scale_fixture() {
        // class1: I=70, U=100 -> 0.70; class2: I=37, U=50 -> 0.74
        let mut data_gt = Vec::new();
        let mut data_pred = Vec::new();
        data_gt.extend(std::iter::repeat(1u8).take(100));
        data_pred.extend(std::iter::repeat(1u8).take(70));
        data_pred.extend(std::iter::repeat(0u8).take(30));
        data_gt.extend(std::iter::repeat(2u8).take(50));
        data_pred.extend(std::iter::repeat(2u8).take(37));
        data_pred.extend(std::iter::repeat(0u8).take(13));
        let gt = map(1, 150, data_gt);
        let pred = map(1, 150, data_pred);
        let r = finalize_overlap(&overlap_for_pair(&gt, &pred).unwrap());
        assert!((r.iou_class1.unwrap() - 0.70).abs() < 1e-12);
        assert!((r.iou_class2.unwrap() - 0.74).abs() < 1e-12);
    }

    fn arb_map(h: usize, w: usize) -> impl Strategy<Value = LabelMap> {
        prop::collection::vec(0u8..3, h * w).prop_map(move |d| map(h, w, d))
    }

    proptest! {
        #[test]
        fn fg_iou_invariant_under_identity_swap(
            gt in arb_map(8, 8),
            pred in arb_map(8, 8),
        ) {
            let swapped: Vec<u8> = pred
                .data()
                .iter()
                .map(|&v| match v { 1 => 2, 2 => 1, other => other })
                .collect();
            let swapped = map(8, 8, swapped);
            let a = finalize_overlap(&overlap_for_pair(&gt, &pred).unwrap());
            let b = finalize_overlap(&overlap_for_pair(&gt, &swapped).unwrap());
            prop_assert_eq!(a.fg_iou, b.fg_iou);
        }

        #[test]
        fn accumulation_is_order_independent(
            gt1 in arb_map(4, 4),
            pred1 in arb_map(4, 4),
            gt2 in arb_map(4, 4),
            pred2 in arb_map(4, 4),
        ) {
            let mut ab = OverlapCounts::default();
            accumulate_overlap(&gt1, &pred1, &mut ab).unwrap();
            accumulate_overlap(&gt2, &pred2, &mut ab).unwrap();

            let mut ba = OverlapCounts::default();
            accumulate_overlap(&gt2, &pred2, &mut ba).unwrap();
            accumulate_overlap(&gt1, &pred1, &mut ba).unwrap();

            // concatenation of the two images as one wide image
            let cat_gt = map(4, 8, interleave_rows(&gt1, &gt2));
            let cat_pred = map(4, 8, interleave_rows(&pred1, &pred2));
            let cat = overlap_for_pair(&cat_gt, &cat_pred).unwrap();

            prop_assert_eq!(ab, ba);
            prop_assert_eq!(ab, cat);
        }
    }

    fn interleave_rows(a: &LabelMap, b: &LabelMap) -> Vec<u8> {
        let mut out = Vec::new();
        for r in 0..a.height() {
            out.extend_from_slice(&a.data()[r * a.width()..(r + 1) * a.width()]);
            out.extend_from_slice(&b.data()[r * b.width()..(r + 1) * b.width()]);
        }
        out
    }
}
