//! Diagnostics for semantic-segmentation robustness under correlation shift:
//! overlap metrics, within-foreground flip rates and their decomposition,
//! a label-free entropy flip-risk score with decile stratification, split
//! construction over (Y, A) groups, oracle masking interventions, and a
//! PCA + linear-probe analysis of attribute accessibility.

pub mod error;
pub mod feature_map;
pub mod flip;
pub mod groups;
pub mod image_rgb;
pub mod intervene;
pub mod label_map;
pub mod manifest;
pub mod metrics;
pub mod prob_map;
pub mod probe;
pub mod report;
pub mod risk;
pub mod splits;
pub mod svg;
pub mod tensor;

pub use error::{Error, Result};
pub use feature_map::{read_feature_map, write_feature_map, FeatureMap};
pub use flip::{accumulate_flip, finalize_flip, flip_for_pair, FlipCounts, FlipResult};
pub use groups::{evaluate_manifest, EvalOutput, ImageEval, PredSource, SkippedImage};
pub use image_rgb::{read_image_rgb, write_image_rgb, ImageRgb};
pub use intervene::{apply_oracle_mask, delta_report, FillValue, MaskFillSpec, MaskMode};
pub use label_map::{read_label_map, write_label_map_png, write_label_map_sdtf, LabelMap};
pub use manifest::{read_manifest, write_manifest, Attribute, Manifest, SampleRecord, Split};
pub use metrics::{
    accumulate_overlap, finalize_overlap, overlap_for_pair, OverlapCounts, OverlapResult,
};
pub use prob_map::{argmax_labels, read_prob_map, write_prob_map, ProbMap};
pub use probe::{
    evaluate_auc, fit_pca, fit_probe, pool_features, probe_curve, Pca, PoolSource, PooledFeature,
    ProbeCurve,
};
pub use report::{flip_overlay, summarize, Aggregation, DiagnosticsSummary, Provenance};
pub use risk::{decile_stratify, image_risk, pixel_risk, DecileReport, PixelSet, RiskScore, ScoredImage};
pub use splits::{
    assign_context, build_balanced_eval, build_train_split, ContextClass, ContextLabel,
    CorrelationSpec, EvidenceConfig, SplitBuilder,
};
