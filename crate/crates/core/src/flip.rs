//! Within-foreground flip rate and the FG-Corr/FG-Flip/FG-Miss decomposition.
//!
//! All counts are taken over ground-truth foreground pixels (y in {1,2}).
//! A flip is a foreground pixel predicted as the *other* foreground class;
//! a miss is a foreground pixel predicted as background. The three outcomes
//! partition the foreground exactly, so the rates sum to 1.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label_map::LabelMap;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlipCounts {
    /// |F|: ground-truth foreground pixels.
    pub n_gt_fg: u64,
    /// Predicted as the other foreground class.
    pub n_flip: u64,
    /// Predicted with the correct identity.
    pub n_corr: u64,
    /// Predicted as background.
    pub n_miss: u64,
}

impl FlipCounts {
    pub fn merge(&mut self, other: &FlipCounts) {
        self.n_gt_fg += other.n_gt_fg;
        self.n_flip += other.n_flip;
        self.n_corr += other.n_corr;
        self.n_miss += other.n_miss;
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FlipResult {
    pub flip: Option<f64>,
    pub fg_corr: Option<f64>,
    pub fg_flip: Option<f64>,
    pub fg_miss: Option<f64>,
}

pub fn accumulate_flip(gt: &LabelMap, pred: &LabelMap, acc: &mut FlipCounts) -> Result<()> {
    if !gt.same_dims(pred) {
        return Err(Error::DimensionMismatch {
            left: format!("{}x{}", gt.height(), gt.width()),
            right: format!("{}x{}", pred.height(), pred.width()),
        });
    }
    for (&y, &p) in gt.data().iter().zip(pred.data()) {
        if y == 0 {
            continue;
        }
        acc.n_gt_fg += 1;
        if p == 0 {
            acc.n_miss += 1;
        } else if p == y {
            acc.n_corr += 1;
        } else {
            acc.n_flip += 1;
        }
    }
    Ok(())
}

/// All fields are None when there is no ground-truth foreground.
pub fn finalize_flip(acc: &FlipCounts) -> FlipResult {
    if acc.n_gt_fg == 0 {
        return FlipResult::default();
    }
    let denom = acc.n_gt_fg as f64;
    FlipResult {
        flip: Some(acc.n_flip as f64 / denom),
        fg_corr: Some(acc.n_corr as f64 / denom),
        fg_flip: Some(acc.n_flip as f64 / denom),
        fg_miss: Some(acc.n_miss as f64 / denom),
    }
}

pub fn flip_for_pair(gt: &LabelMap, pred: &LabelMap) -> Result<FlipCounts> {
    let mut acc = FlipCounts::default();
    accumulate_flip(gt, pred, &mut acc)?;
    Ok(acc)
}
