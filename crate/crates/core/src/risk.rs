//! Label-free flip-risk: binary entropy of foreground-renormalized
//! probabilities, image-level aggregation over a pixel set, and decile
//! stratification against per-image flip rates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flip::FlipCounts;
use crate::label_map::LabelMap;
use crate::prob_map::{argmax3, ProbMap};

pub const LN_2: f64 = std::f64::consts::LN_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PixelSet {
    /// Pixels with argmax in {1,2}; deployable, needs no ground truth.
    PredFg,
    /// Ground-truth foreground pixels; analysis variant.
    GtFg,
}

impl std::fmt::Display for PixelSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PixelSet::PredFg => "pred-fg",
            PixelSet::GtFg => "gt-fg",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskScore {
    pub value: Option<f64>,
    pub pixel_set: PixelSet,
    pub n_pixels: u64,
}

/// Binary entropy of the foreground-renormalized pair, in nats.
/// None when the pixel has no foreground mass at all.
pub fn pixel_risk(p: [f32; 3]) -> Option<f64> {
    let p1 = p[1] as f64;
    let p2 = p[2] as f64;
    let fg = p1 + p2;
    if fg == 0.0 {
        return None;
    }
    let t1 = p1 / fg;
    let t2 = p2 / fg;
    let term = |t: f64| if t > 0.0 { -t * t.ln() } else { 0.0 };
    Some(term(t1) + term(t2))
}

pub fn image_risk(p: &ProbMap, pixel_set: PixelSet, gt: Option<&LabelMap>) -> Result<RiskScore> {
    let gt = match pixel_set {
        PixelSet::GtFg => Some(gt.ok_or(Error::MissingGroundTruth)?),
        PixelSet::PredFg => None,
    };
    if let Some(gt) = gt {
        if gt.height() != p.height() || gt.width() != p.width() {
            return Err(Error::DimensionMismatch {
                left: format!("{}x{}", gt.height(), gt.width()),
                right: format!("{}x{}", p.height(), p.width()),
            });
        }
    }

    let mut sum = 0.0f64;
    let mut n = 0u64;
    for (i, triple) in p.pixels().enumerate() {
        let selected = match pixel_set {
            PixelSet::PredFg => argmax3(triple) != 0,
            PixelSet::GtFg => {
                let gt = gt.expect("checked above");
                gt.data()[i] != 0
            }
        };
        if !selected {
            continue;
        }
        if let Some(r) = pixel_risk(triple) {
            sum += r;
            n += 1;
        }
    }
    Ok(RiskScore {
        value: (n > 0).then(|| sum / n as f64),
        pixel_set,
        n_pixels: n,
    })
}

/// One image's inputs to the decile analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredImage {
    pub id: String,
    pub risk: Option<f64>,
    pub flip: FlipCounts,
}

impl ScoredImage {
    fn per_image_flip(&self) -> Option<f64> {
        (self.flip.n_gt_fg > 0).then(|| self.flip.n_flip as f64 / self.flip.n_gt_fg as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecileBin {
    pub bin: usize,
    pub ids: Vec<String>,
    pub size: usize,
    pub mean_risk: f64,
    pub mean_flip: f64,
    /// This bin's share of all flip pixels; shares sum to 1 when any flips exist.
    pub flip_share: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecileReport {
    pub bins: Vec<DecileBin>,
    pub top_decile_flip_share: Option<f64>,
    pub n_scored: usize,
    pub n_excluded: usize,
}

/// Stable sort by (risk, id), then bin i covers indices
/// [floor(i*N/10), floor((i+1)*N/10)).
pub fn decile_stratify(scores: &[ScoredImage]) -> Result<DecileReport> {
    let mut scorable: Vec<&ScoredImage> = scores
        .iter()
        .filter(|s| s.risk.is_some() && s.per_image_flip().is_some())
        .collect();
    let n_excluded = scores.len() - scorable.len();
    let n = scorable.len();
    if n < 10 {
        return Err(Error::TooFewImages { n });
    }

    scorable.sort_by(|a, b| {
        a.risk
            .unwrap()
            .partial_cmp(&b.risk.unwrap())
            .expect("risk is finite")
            .then_with(|| a.id.cmp(&b.id))
    });

    let total_flips: u64 = scorable.iter().map(|s| s.flip.n_flip).sum();

    let mut bins = Vec::with_capacity(10);
    for i in 0..10 {
        let start = i * n / 10;
        let end = (i + 1) * n / 10;
        let slice = &scorable[start..end];
        let size = slice.len();
        let mean_risk = slice.iter().map(|s| s.risk.unwrap()).sum::<f64>() / size as f64;
        let mean_flip =
            slice.iter().map(|s| s.per_image_flip().unwrap()).sum::<f64>() / size as f64;
        let bin_flips: u64 = slice.iter().map(|s| s.flip.n_flip).sum();
        bins.push(DecileBin {
            bin: i + 1,
            ids: slice.iter().map(|s| s.id.clone()).collect(),
            size,
            mean_risk,
            mean_flip,
            flip_share: (total_flips > 0).then(|| bin_flips as f64 / total_flips as f64),
        });
    }

    let top_decile_flip_share = bins[9].flip_share;
    Ok(DecileReport {
        bins,
        top_decile_flip_share,
        n_scored: n,
        n_excluded,
    })
}
