//! Summary assembly and table emission: per-group diagnostics, aligned vs
//! counterfactual gaps, CSV/JSON artifacts, and flip overlays.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::flip::{finalize_flip, FlipCounts, FlipResult};
use crate::groups::{EvalOutput, ImageEval, SkippedImage};
use crate::image_rgb::ImageRgb;
use crate::label_map::LabelMap;
use crate::manifest::NUM_GROUPS;
use crate::metrics::{finalize_overlap, OverlapCounts, OverlapResult};
use crate::risk::{decile_stratify, DecileReport, ScoredImage};

pub const SCHEMA_HEADER: &str = "# segdiag-schema v1";

/// A ratio that is either defined or carries a reason for being null.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub null_reason: Option<String>,
}

impl Metric {
    pub fn from_option(value: Option<f64>, reason: &str) -> Self {
        match value {
            Some(v) => Metric {
                value: Some(round6(v)),
                null_reason: None,
            },
            None => Metric {
                value: None,
                null_reason: Some(reason.to_string()),
            },
        }
    }

    pub fn value(&self) -> Option<f64> {
        self.value
    }
}

pub fn round6(v: f64) -> f64 {
    (v * 1e6).round() / 1e6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapMetrics {
    pub iou_class1: Metric,
    pub iou_class2: Metric,
    pub miou_fg: Metric,
    pub fg_iou: Metric,
}

impl OverlapMetrics {
    fn from_result(r: &OverlapResult, reason: &str) -> Self {
        OverlapMetrics {
            iou_class1: Metric::from_option(r.iou_class1, reason),
            iou_class2: Metric::from_option(r.iou_class2, reason),
            miou_fg: Metric::from_option(r.miou_fg, reason),
            fg_iou: Metric::from_option(r.fg_iou, reason),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlipMetrics {
    pub flip: Metric,
    pub fg_corr: Metric,
    pub fg_flip: Metric,
    pub fg_miss: Metric,
}

impl FlipMetrics {
    fn from_result(r: &FlipResult, reason: &str) -> Self {
        FlipMetrics {
            flip: Metric::from_option(r.flip, reason),
            fg_corr: Metric::from_option(r.fg_corr, reason),
            fg_flip: Metric::from_option(r.fg_flip, reason),
            fg_miss: Metric::from_option(r.fg_miss, reason),
        }
    }
}

/// Diagnostics for one scope (global or one (Y, A) group), in both
/// aggregation modes: pooled pixel counts and per-image means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScopeSummary {
    pub n_images: usize,
    pub pooled_overlap: OverlapMetrics,
    pub pooled_flip: FlipMetrics,
    pub per_image_overlap: OverlapMetrics,
    pub per_image_flip: FlipMetrics,
    /// Images excluded from per-image means because a value was undefined.
    pub per_image_skips: usize,
    pub mean_risk: Metric,
    pub risk_skips: usize,
}

/// Which aggregation mode headline numbers (gap report) are read from; both
/// modes are always emitted in the scope summaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregation {
    Pooled,
    PerImage,
}

impl std::fmt::Display for Aggregation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Aggregation::Pooled => "pooled",
            Aggregation::PerImage => "per-image",
        })
    }
}

impl ScopeSummary {
    fn overlap(&self, aggregation: Aggregation) -> &OverlapMetrics {
        match aggregation {
            Aggregation::Pooled => &self.pooled_overlap,
            Aggregation::PerImage => &self.per_image_overlap,
        }
    }

    fn flip(&self, aggregation: Aggregation) -> &FlipMetrics {
        match aggregation {
            Aggregation::Pooled => &self.pooled_flip,
            Aggregation::PerImage => &self.per_image_flip,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    /// metric(g0) - metric(g1): aligned minus counterfactual for class 1.
    pub iou_class1: Metric,
    /// metric(g3) - metric(g2): aligned minus counterfactual for class 2.
    pub iou_class2: Metric,
    pub flip_class1: Metric,
    pub flip_class2: Metric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub manifest_sha256: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub schema: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsSummary {
    pub global: ScopeSummary,
    pub groups: Vec<Option<ScopeSummary>>,
    pub group_sizes: Vec<usize>,
    pub gaps: GapReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub deciles: Option<DecileReport>,
    pub skipped: Vec<SkippedImage>,
    pub provenance: Provenance,
}

fn mean_defined(values: impl Iterator<Item = Option<f64>>) -> (Option<f64>, usize) {
    let mut sum = 0.0;
    let mut n = 0usize;
    let mut skips = 0usize;
    for v in values {
        match v {
            Some(x) => {
                sum += x;
                n += 1;
            }
            None => skips += 1,
        }
    }
    ((n > 0).then(|| sum / n as f64), skips)
}

fn summarize_scope(images: &[&ImageEval]) -> ScopeSummary {
    let mut overlap_acc = OverlapCounts::default();
    let mut flip_acc = FlipCounts::default();
    for img in images {
        overlap_acc.merge(&img.overlap);
        flip_acc.merge(&img.flip);
    }
    let pooled_overlap = finalize_overlap(&overlap_acc);
    let pooled_flip = finalize_flip(&flip_acc);

    let per_image_overlaps: Vec<OverlapResult> =
        images.iter().map(|i| finalize_overlap(&i.overlap)).collect();
    let per_image_flips: Vec<FlipResult> =
        images.iter().map(|i| finalize_flip(&i.flip)).collect();

    let (iou1, s1) = mean_defined(per_image_overlaps.iter().map(|r| r.iou_class1));
    let (iou2, _) = mean_defined(per_image_overlaps.iter().map(|r| r.iou_class2));
    let (miou, _) = mean_defined(per_image_overlaps.iter().map(|r| r.miou_fg));
    let (fg_iou, _) = mean_defined(per_image_overlaps.iter().map(|r| r.fg_iou));
    let (flip, _) = mean_defined(per_image_flips.iter().map(|r| r.flip));
    let (fg_corr, _) = mean_defined(per_image_flips.iter().map(|r| r.fg_corr));
    let (fg_flip, _) = mean_defined(per_image_flips.iter().map(|r| r.fg_flip));
    let (fg_miss, _) = mean_defined(per_image_flips.iter().map(|r| r.fg_miss));
    let (mean_risk, risk_skips) =
        mean_defined(images.iter().map(|i| i.risk.as_ref().and_then(|r| r.value)));

    let empty = "empty_union";
    let no_fg = "empty_foreground";
    ScopeSummary {
        n_images: images.len(),
        pooled_overlap: OverlapMetrics::from_result(&pooled_overlap, empty),
        pooled_flip: FlipMetrics::from_result(&pooled_flip, no_fg),
        per_image_overlap: OverlapMetrics {
            iou_class1: Metric::from_option(iou1, empty),
            iou_class2: Metric::from_option(iou2, empty),
            miou_fg: Metric::from_option(miou, empty),
            fg_iou: Metric::from_option(fg_iou, empty),
        },
        per_image_flip: FlipMetrics {
            flip: Metric::from_option(flip, no_fg),
            fg_corr: Metric::from_option(fg_corr, no_fg),
            fg_flip: Metric::from_option(fg_flip, no_fg),
            fg_miss: Metric::from_option(fg_miss, no_fg),
        },
        per_image_skips: s1,
        mean_risk: Metric::from_option(mean_risk, "no_risk_scores"),
        risk_skips,
    }
}

fn gap(a: Option<&ScopeSummary>, b: Option<&ScopeSummary>, f: impl Fn(&ScopeSummary) -> Option<f64>) -> Option<f64> {
    match (a.and_then(&f), b.and_then(&f)) {
        (Some(x), Some(y)) => Some(x - y),
        _ => None,
    }
}

pub fn summarize(
    eval: &EvalOutput,
    provenance: Provenance,
    aggregation: Aggregation,
    with_deciles: bool,
) -> Result<DiagnosticsSummary> {
    let all: Vec<&ImageEval> = eval.images.iter().collect();
    let global = summarize_scope(&all);

    let mut groups: Vec<Option<ScopeSummary>> = Vec::with_capacity(NUM_GROUPS);
    let mut group_sizes = Vec::with_capacity(NUM_GROUPS);
    for g in 0..NUM_GROUPS {
        let members: Vec<&ImageEval> = eval
            .images
            .iter()
            .filter(|i| i.group == Some(g))
            .collect();
        group_sizes.push(members.len());
        groups.push((!members.is_empty()).then(|| summarize_scope(&members)));
    }

    let empty_group = "empty_group";
    let gaps = GapReport {
        iou_class1: Metric::from_option(
            gap(groups[0].as_ref(), groups[1].as_ref(), |s| {
                s.overlap(aggregation).iou_class1.value()
            }),
            empty_group,
        ),
        iou_class2: Metric::from_option(
            gap(groups[3].as_ref(), groups[2].as_ref(), |s| {
                s.overlap(aggregation).iou_class2.value()
            }),
            empty_group,
        ),
        flip_class1: Metric::from_option(
            gap(groups[0].as_ref(), groups[1].as_ref(), |s| {
                s.flip(aggregation).flip.value()
            }),
            empty_group,
        ),
        flip_class2: Metric::from_option(
            gap(groups[3].as_ref(), groups[2].as_ref(), |s| {
                s.flip(aggregation).flip.value()
            }),
            empty_group,
        ),
    };

    let deciles = if with_deciles {
        let scores: Vec<ScoredImage> = eval
            .images
            .iter()
            .map(|i| ScoredImage {
                id: i.id.clone(),
                risk: i.risk.as_ref().and_then(|r| r.value),
                flip: i.flip,
            })
            .collect();
        Some(decile_stratify(&scores)?)
    } else {
        None
    };

    Ok(DiagnosticsSummary {
        global,
        groups,
        group_sizes,
        gaps,
        deciles,
        skipped: eval.skipped.clone(),
        provenance,
    })
}

pub fn provenance_for(manifest_path: &Path, seed: u64, config: serde_json::Value) -> Result<Provenance> {
    let bytes = std::fs::read(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(Provenance {
        manifest_sha256: format!("{:x}", hasher.finalize()),
        seed,
        config,
        schema: "segdiag-schema v1".to_string(),
    })
}

/// Flattened (name, value) view used by the delta report.
pub fn flatten_summary(summary: &DiagnosticsSummary) -> Vec<(String, Option<f64>)> {
    let mut out = Vec::new();
    let mut push_scope = |prefix: &str, scope: Option<&ScopeSummary>| {
        let fields: [(&str, Option<f64>); 9] = match scope {
            Some(s) => [
                ("iou_class1", s.pooled_overlap.iou_class1.value()),
                ("iou_class2", s.pooled_overlap.iou_class2.value()),
                ("miou_fg", s.pooled_overlap.miou_fg.value()),
                ("fg_iou", s.pooled_overlap.fg_iou.value()),
                ("flip", s.pooled_flip.flip.value()),
                ("fg_corr", s.pooled_flip.fg_corr.value()),
                ("fg_flip", s.pooled_flip.fg_flip.value()),
                ("fg_miss", s.pooled_flip.fg_miss.value()),
                ("mean_risk", s.mean_risk.value()),
            ],
            None => [
                ("iou_class1", None),
                ("iou_class2", None),
                ("miou_fg", None),
                ("fg_iou", None),
                ("flip", None),
                ("fg_corr", None),
                ("fg_flip", None),
                ("fg_miss", None),
                ("mean_risk", None),
            ],
        };
        for (name, value) in fields {
            out.push((format!("{prefix}.{name}"), value));
        }
    };
    push_scope("global", Some(&summary.global));
    for (g, scope) in summary.groups.iter().enumerate() {
        push_scope(&format!("g{g}"), scope.as_ref());
    }
    out
}

// --- CSV emission ---

fn fmt_metric(m: &Metric) -> String {
    match m.value {
        Some(v) => format!("{v:.6}"),
        None => String::new(),
    }
}

pub fn metrics_csv(summary: &DiagnosticsSummary) -> String {
    let mut out = String::new();
    out.push_str(SCHEMA_HEADER);
    out.push('\n');
    out.push_str("scope,aggregation,n_images,iou_class1,iou_class2,miou_fg,fg_iou,flip,fg_corr,fg_flip,fg_miss,mean_risk\n");
    let mut emit = |scope: &str, s: &ScopeSummary| {
        for (agg, ov, fl) in [
            ("pooled", &s.pooled_overlap, &s.pooled_flip),
            ("per-image", &s.per_image_overlap, &s.per_image_flip),
        ] {
            out.push_str(&format!(
                "{scope},{agg},{},{},{},{},{},{},{},{},{},{}\n",
                s.n_images,
                fmt_metric(&ov.iou_class1),
                fmt_metric(&ov.iou_class2),
                fmt_metric(&ov.miou_fg),
                fmt_metric(&ov.fg_iou),
                fmt_metric(&fl.flip),
                fmt_metric(&fl.fg_corr),
                fmt_metric(&fl.fg_flip),
                fmt_metric(&fl.fg_miss),
                fmt_metric(&s.mean_risk),
            ));
        }
    };
    emit("global", &summary.global);
    for (g, scope) in summary.groups.iter().enumerate() {
        if let Some(s) = scope {
            emit(&format!("g{g}"), s);
        }
    }
    out
}

pub fn gaps_csv(summary: &DiagnosticsSummary) -> String {
    let mut out = String::new();
    out.push_str(SCHEMA_HEADER);
    out.push('\n');
    out.push_str("metric,gap\n");
    for (name, m) in [
        ("iou_class1_g0_minus_g1", &summary.gaps.iou_class1),
        ("iou_class2_g3_minus_g2", &summary.gaps.iou_class2),
        ("flip_g0_minus_g1", &summary.gaps.flip_class1),
        ("flip_g3_minus_g2", &summary.gaps.flip_class2),
    ] {
        out.push_str(&format!("{name},{}\n", fmt_metric(m)));
    }
    out
}

pub fn deciles_csv(report: &DecileReport) -> String {
    let mut out = String::new();
    out.push_str(SCHEMA_HEADER);
    out.push('\n');
    out.push_str("bin,size,mean_risk,mean_flip,flip_share\n");
    for bin in &report.bins {
        let share = bin
            .flip_share
            .map(|s| format!("{:.6}", round6(s)))
            .unwrap_or_default();
        out.push_str(&format!(
            "{},{},{:.6},{:.6},{}\n",
            bin.bin,
            bin.size,
            round6(bin.mean_risk),
            round6(bin.mean_flip),
            share
        ));
    }
    out
}

pub fn probe_curve_csv(curves: &[crate::probe::ProbeCurve]) -> String {
    let mut out = String::new();
    out.push_str(SCHEMA_HEADER);
    out.push('\n');
    out.push_str("k,auc,source\n");
    for curve in curves {
        for &(k, auc) in &curve.points {
            out.push_str(&format!("{k},{:.6},{}\n", round6(auc), curve.source));
        }
    }
    out
}

pub fn delta_csv(deltas: &[(String, Option<f64>)]) -> String {
    let mut out = String::new();
    out.push_str(SCHEMA_HEADER);
    out.push('\n');
    out.push_str("metric,delta\n");
    for (name, v) in deltas {
        let cell = v.map(|x| format!("{:.6}", round6(x))).unwrap_or_default();
        out.push_str(&format!("{name},{cell}\n"));
    }
    out
}

// --- Flip overlay ---

pub const COLOR_CORR: [u8; 3] = [0, 176, 0];
pub const COLOR_FLIP: [u8; 3] = [220, 0, 0];
pub const COLOR_MISS: [u8; 3] = [0, 0, 220];
pub const COLOR_FALSE_POSITIVE: [u8; 3] = [230, 210, 0];

/// Colorizes per-pixel outcomes. Pixels that are background in both maps
/// show the source image when given, otherwise black.
pub fn flip_overlay(
    image: Option<&ImageRgb>,
    gt: &LabelMap,
    pred: &LabelMap,
) -> Result<ImageRgb> {
    if !gt.same_dims(pred) {
        return Err(Error::DimensionMismatch {
            left: format!("{}x{}", gt.height(), gt.width()),
            right: format!("{}x{}", pred.height(), pred.width()),
        });
    }
    if let Some(img) = image {
        if !img.matches_label_map(gt) {
            return Err(Error::DimensionMismatch {
                left: format!("{}x{}", img.height(), img.width()),
                right: format!("{}x{}", gt.height(), gt.width()),
            });
        }
    }
    let (h, w) = (gt.height(), gt.width());
    let mut out = ImageRgb::new(h, w, vec![0; h * w * 3])?;
    for r in 0..h {
        for c in 0..w {
            let y = gt.get(r, c);
            let p = pred.get(r, c);
            let color = if y != 0 {
                if p == 0 {
                    COLOR_MISS
                } else if p == y {
                    COLOR_CORR
                } else {
                    COLOR_FLIP
                }
            } else if p != 0 {
                COLOR_FALSE_POSITIVE
            } else if let Some(img) = image {
                img.pixel(r, c)
            } else {
                [0, 0, 0]
            };
            out.set_pixel(r, c, color);
        }
    }
    Ok(out)
}

/// Appends a legend strip below the overlay: one swatch block per outcome
/// color, in the order corr, flip, miss, false-positive.
pub fn overlay_with_legend(overlay: &ImageRgb) -> ImageRgb {
    let w = overlay.width();
    let strip_h = 8usize;
    let mut data = overlay.data().to_vec();
    let colors = [COLOR_CORR, COLOR_FLIP, COLOR_MISS, COLOR_FALSE_POSITIVE];
    for _ in 0..strip_h {
        for c in 0..w {
            let swatch = colors[(c * colors.len()) / w.max(1)];
            data.extend_from_slice(&swatch);
        }
    }
    ImageRgb::new(overlay.height() + strip_h, w, data).expect("legend dimensions consistent")
}
