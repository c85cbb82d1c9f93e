//! Manifest-driven evaluation: loads ground truth and predictions per image
//! and accumulates overlap, flip, and risk diagnostics globally and per
//! (Y, A) group.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flip::{flip_for_pair, FlipCounts};
use crate::label_map::{read_label_map, LabelMap};
use crate::manifest::{Manifest, SampleRecord};
use crate::metrics::{overlap_for_pair, OverlapCounts};
use crate::prob_map::{argmax_labels, read_prob_map};
use crate::risk::{image_risk, PixelSet, RiskScore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredSource {
    /// Read predicted label maps from `pred_label_path`.
    LabelFiles,
    /// Derive predictions by argmax over `prob_path`.
    ArgmaxOfProbs,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageEval {
    pub id: String,
    pub group: Option<usize>,
    pub overlap: OverlapCounts,
    pub flip: FlipCounts,
    /// Present when the record has a probability map.
    pub risk: Option<RiskScore>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedImage {
    pub id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOutput {
    pub images: Vec<ImageEval>,
    pub skipped: Vec<SkippedImage>,
    pub pixel_set: PixelSet,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn eval_record(
    record: &SampleRecord,
    base: &Path,
    pred_source: PredSource,
    pixel_set: PixelSet,
) -> Result<ImageEval> {
    let label_path = record
        .label_path
        .as_ref()
        .ok_or(Error::MissingFileRef {
            id: record.id.clone(),
            field: "label_path",
        })?;
    let gt = read_label_map(&resolve(base, label_path))?;

    let (pred, prob): (LabelMap, Option<_>) = match pred_source {
        PredSource::LabelFiles => {
            let path = record.pred_label_path.as_ref().ok_or(Error::MissingFileRef {
                id: record.id.clone(),
                field: "pred_label_path",
            })?;
            let pred = read_label_map(&resolve(base, path))?;
            let prob = record
                .prob_path
                .as_ref()
                .map(|p| read_prob_map(&resolve(base, p)))
                .transpose()?;
            (pred, prob)
        }
        PredSource::ArgmaxOfProbs => {
            let path = record.prob_path.as_ref().ok_or(Error::MissingFileRef {
                id: record.id.clone(),
                field: "prob_path",
            })?;
            let prob = read_prob_map(&resolve(base, path))?;
            (argmax_labels(&prob), Some(prob))
        }
    };

    let overlap = overlap_for_pair(&gt, &pred)?;
    let flip = flip_for_pair(&gt, &pred)?;
    let risk = prob
        .as_ref()
        .map(|p| image_risk(p, pixel_set, Some(&gt)))
        .transpose()?;

    Ok(ImageEval {
        id: record.id.clone(),
        group: record.group(),
        overlap,
        flip,
        risk,
    })
}

/// Evaluates every record; per-image failures become skip entries, never a
/// fatal error. Output order follows the manifest regardless of `jobs`.
pub fn evaluate_manifest(
    manifest: &Manifest,
    base: &Path,
    pred_source: PredSource,
    pixel_set: PixelSet,
    jobs: Option<usize>,
) -> Result<EvalOutput> {
    let run = || -> Vec<(usize, Result<ImageEval>)> {
        manifest
            .records
            .par_iter()
            .enumerate()
            .map(|(i, r)| (i, eval_record(r, base, pred_source, pixel_set)))
            .collect()
    };
    let mut results = match jobs {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::Invalid(e.to_string()))?;
            pool.install(run)
        }
        None => run(),
    };
    results.sort_by_key(|(i, _)| *i);

    let mut images = Vec::new();
    let mut skipped = Vec::new();
    for ((_, result), record) in results.into_iter().zip(&manifest.records) {
        match result {
            Ok(eval) => images.push(eval),
            Err(e) => skipped.push(SkippedImage {
                id: record.id.clone(),
                reason: e.to_string(),
            }),
        }
    }
    Ok(EvalOutput {
        images,
        skipped,
        pixel_set,
    })
}
