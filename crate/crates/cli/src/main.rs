//! `segdiag`: subcommand CLI over the diagnostics library.
//!
//! Exit codes: 0 success, 1 fatal error, 2 completed with per-image skips.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use segdiag_core::error::Error;
use segdiag_core::groups::{evaluate_manifest, PredSource};
use segdiag_core::intervene::{apply_oracle_mask, delta_report, FillValue, MaskFillSpec, MaskMode};
use segdiag_core::label_map::read_label_map;
use segdiag_core::manifest::{read_manifest, write_manifest, Attribute, Manifest};
use segdiag_core::probe::{pool_features, probe_curve, PoolSource, PooledFeature};
use segdiag_core::report::{
    deciles_csv, delta_csv, flatten_summary, flip_overlay, gaps_csv, metrics_csv,
    overlay_with_legend, probe_curve_csv, provenance_for, summarize, Aggregation,
    DiagnosticsSummary,
};
use segdiag_core::risk::PixelSet;
use segdiag_core::splits::{ContextLabel, CorrelationSpec, EvidenceConfig, SplitBuilder};
use segdiag_core::svg;
use segdiag_core::{
    read_feature_map, read_image_rgb, write_image_rgb, SampleRecord, Split,
};

#[derive(Parser)]
#[command(name = "segdiag", version, about = "Segmentation robustness diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonEval {
    /// Manifest of samples to evaluate (JSON Lines).
    #[arg(long)]
    manifest: PathBuf,
    /// Output directory for reports.
    #[arg(long, default_value = "segdiag-out")]
    out_dir: PathBuf,
    /// Seed recorded in provenance; funnels all randomness.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker count for per-image evaluation.
    #[arg(long)]
    jobs: Option<usize>,
    /// Pixel set for the entropy risk score.
    #[arg(long, value_enum, default_value_t = PixelSetArg::PredFg)]
    pixel_set: PixelSetArg,
    /// Aggregation mode the gap report reads from (both are always emitted).
    #[arg(long, value_enum, default_value_t = AggregationArg::Pooled)]
    aggregation: AggregationArg,
    /// Prediction source.
    #[arg(long, value_enum, default_value_t = PredSourceArg::LabelFiles)]
    pred_source: PredSourceArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum PixelSetArg {
    PredFg,
    GtFg,
}

impl From<PixelSetArg> for PixelSet {
    fn from(v: PixelSetArg) -> Self {
        match v {
            PixelSetArg::PredFg => PixelSet::PredFg,
            PixelSetArg::GtFg => PixelSet::GtFg,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PredSourceArg {
    LabelFiles,
    ArgmaxOfProbs,
}

impl From<PredSourceArg> for PredSource {
    fn from(v: PredSourceArg) -> Self {
        match v {
            PredSourceArg::LabelFiles => PredSource::LabelFiles,
            PredSourceArg::ArgmaxOfProbs => PredSource::ArgmaxOfProbs,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum AggregationArg {
    Pooled,
    PerImage,
}

impl From<AggregationArg> for Aggregation {
    fn from(v: AggregationArg) -> Self {
        match v {
            AggregationArg::Pooled => Aggregation::Pooled,
            AggregationArg::PerImage => Aggregation::PerImage,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MaskModeArg {
    OracleFg,
    OracleBg,
}

#[derive(Clone, Copy, ValueEnum)]
enum PoolSourceArg {
    Fg,
    Bg,
}

#[derive(Subcommand)]
enum Command {
    /// Overlap and flip diagnostics, pooled and per group.
    Metrics {
        #[command(flatten)]
        common: CommonEval,
    },
    /// Per-group diagnostics with aligned-vs-counterfactual gap charts.
    Groups {
        #[command(flatten)]
        common: CommonEval,
    },
    /// Entropy flip-risk deciles with a bar chart.
    RiskDeciles {
        #[command(flatten)]
        common: CommonEval,
    },
    /// Correlation-regime split construction from a labelled pool.
    BuildSplits {
        #[arg(long)]
        pool: PathBuf,
        #[arg(long)]
        rho: f64,
        #[arg(long)]
        total: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "splits")]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 0)]
        val_per_group: usize,
        #[arg(long, default_value_t = 0)]
        test_per_group: usize,
    },
    /// Assign indoor/outdoor context from per-image evidence areas.
    ContextLabel {
        /// JSON Lines: {"id", "y", "total_pixels", "areas": {category: pixels}}
        #[arg(long)]
        evidence: PathBuf,
        /// Category-to-context mapping with thresholds.
        #[arg(long)]
        config: PathBuf,
        /// Output manifest path.
        #[arg(long)]
        out: PathBuf,
        /// Attribute value assigned to indoor scenes (outdoor gets the other).
        #[arg(long, default_value_t = 0)]
        indoor_attr: u8,
    },
    /// Write oracle-masked copies of the images plus a derived manifest.
    MaskIntervene {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_enum)]
        mode: MaskModeArg,
        /// "per-image-mean" or "r,g,b" constant.
        #[arg(long, default_value = "per-image-mean")]
        fill: String,
        #[arg(long, default_value = "masked")]
        out_dir: PathBuf,
    },
    /// Pooled-feature PCA + linear probe AUC-vs-k curves.
    Probe {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_enum, default_value_t = PoolSourceArg::Fg)]
        source: PoolSourceArg,
        /// Component counts to evaluate.
        #[arg(long, value_delimiter = ',', default_values_t = vec![1, 2, 3, 4, 8])]
        k: Vec<usize>,
        #[arg(long, default_value = "segdiag-out")]
        out_dir: PathBuf,
    },
    /// Colorized flip overlay for one ground-truth/prediction pair.
    Overlay {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        image: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Elementwise difference of two summary.json files (hi - lo).
    Delta {
        #[arg(long)]
        hi: PathBuf,
        #[arg(long)]
        lo: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn verbose() -> bool {
    std::env::var("SEGDIAG_LOG").map(|v| !v.is_empty() && v != "off").unwrap_or(false)
}

fn log(msg: impl AsRef<str>) {
    if verbose() {
        eprintln!("segdiag: {}", msg.as_ref());
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(skips) if skips > 0 => {
            eprintln!("segdiag: completed with {skips} skipped image(s)");
            ExitCode::from(2)
        }
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("segdiag: error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn write(path: &Path, contents: &str) -> Result<(), Error> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn eval_and_summarize(
    common: &CommonEval,
    with_deciles: bool,
) -> Result<(DiagnosticsSummary, usize), Error> {
    let manifest = read_manifest(&common.manifest)?;
    let base = common
        .manifest
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    log(format!("evaluating {} records", manifest.records.len()));
    let eval = evaluate_manifest(
        &manifest,
        &base,
        common.pred_source.into(),
        common.pixel_set.into(),
        common.jobs,
    )?;
    let config = serde_json::json!({
        "pixel_set": PixelSet::from(common.pixel_set).to_string(),
        "pred_source": match common.pred_source {
            PredSourceArg::LabelFiles => "label-files",
            PredSourceArg::ArgmaxOfProbs => "argmax-of-probs",
        },
        "aggregation": Aggregation::from(common.aggregation).to_string(),
    });
    let provenance = provenance_for(&common.manifest, common.seed, config)?;
    let skips = eval.skipped.len();
    let summary = summarize(&eval, provenance, common.aggregation.into(), with_deciles)?;
    Ok((summary, skips))
}

fn write_summary_tables(out_dir: &Path, summary: &DiagnosticsSummary) -> Result<(), Error> {
    let json = serde_json::to_string_pretty(summary)
        .map_err(|e| Error::Invalid(e.to_string()))?;
    write(&out_dir.join("summary.json"), &json)?;
    write(&out_dir.join("tables/metrics.csv"), &metrics_csv(summary))?;
    write(&out_dir.join("tables/gaps.csv"), &gaps_csv(summary))?;
    Ok(())
}

fn run(command: Command) -> Result<usize, Error> {
    match command {
        Command::Metrics { common } => {
            let (summary, skips) = eval_and_summarize(&common, false)?;
            write_summary_tables(&common.out_dir, &summary)?;
            Ok(skips)
        }
        Command::Groups { common } => {
            let (summary, skips) = eval_and_summarize(&common, false)?;
            write_summary_tables(&common.out_dir, &summary)?;
            let labels = vec!["iou_c1 g0-g1".to_string(), "iou_c2 g3-g2".to_string()];
            let values = vec![
                summary.gaps.iou_class1.value().unwrap_or(0.0),
                summary.gaps.iou_class2.value().unwrap_or(0.0),
            ];
            let chart = svg::bar_chart(
                "Aligned vs counterfactual IoU gaps",
                "group pair",
                "IoU gap",
                &labels,
                &values,
            );
            write(&common.out_dir.join("charts/gaps.svg"), &chart)?;
            Ok(skips)
        }
        Command::RiskDeciles { common } => {
            let (summary, skips) = eval_and_summarize(&common, true)?;
            let deciles = summary.deciles.as_ref().expect("requested deciles");
            write(&common.out_dir.join("tables/deciles.csv"), &deciles_csv(deciles))?;
            let labels: Vec<String> = deciles.bins.iter().map(|b| b.bin.to_string()).collect();
            let values: Vec<f64> = deciles.bins.iter().map(|b| b.mean_flip).collect();
            let share = deciles
                .top_decile_flip_share
                .map(|s| format!("{s:.3}"))
                .unwrap_or_else(|| "n/a".to_string());
            let title = format!(
                "Flip by {} risk decile (top-decile flip share {share})",
                summary_pixel_set(&summary)
            );
            let chart = svg::bar_chart(&title, "risk decile", "mean per-image flip", &labels, &values);
            write(&common.out_dir.join("charts/deciles.svg"), &chart)?;
            let json = serde_json::to_string_pretty(&summary)
                .map_err(|e| Error::Invalid(e.to_string()))?;
            write(&common.out_dir.join("summary.json"), &json)?;
            Ok(skips)
        }
        Command::BuildSplits {
            pool,
            rho,
            total,
            seed,
            out_dir,
            val_per_group,
            test_per_group,
        } => {
            let pool_manifest = read_manifest(&pool)?;
            let spec = CorrelationSpec {
                rho,
                total_train: total,
                seed,
            };
            let mut builder = SplitBuilder::new(pool_manifest, seed);
            let train = builder.build_train_split(&spec)?;
            std::fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
            write_manifest(&train.manifest, &out_dir.join("train.jsonl"))?;
            if val_per_group > 0 {
                let val = builder.build_balanced_eval(val_per_group, Split::Val)?;
                write_manifest(&val, &out_dir.join("val.jsonl"))?;
            }
            if test_per_group > 0 {
                let test = builder.build_balanced_eval(test_per_group, Split::Test)?;
                write_manifest(&test, &out_dir.join("test.jsonl"))?;
            }
            let report = serde_json::json!({
                "rho": rho,
                "total_train": total,
                "seed": seed,
                "requested": train.requested,
                "selected": train.selected,
                "deficits": train.deficits,
            });
            write(
                &out_dir.join("split_report.json"),
                &serde_json::to_string_pretty(&report).map_err(|e| Error::Invalid(e.to_string()))?,
            )?;
            for (g, &d) in train.deficits.iter().enumerate() {
                if d > 0 {
                    eprintln!("segdiag: group g{g} short by {d} (availability clamp)");
                }
            }
            Ok(0)
        }
        Command::ContextLabel {
            evidence,
            config,
            out,
            indoor_attr,
        } => {
            let cfg = EvidenceConfig::from_file(&config)?;
            let text = std::fs::read_to_string(&evidence).map_err(|e| Error::io(&evidence, e))?;
            let mut manifest = Manifest::new("context-labelled");
            let mut n_unknown = 0usize;
            for (lineno, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let entry: EvidenceEntry =
                    serde_json::from_str(line).map_err(|e| Error::ManifestParse {
                        line: lineno + 1,
                        reason: e.to_string(),
                    })?;
                let decision =
                    segdiag_core::assign_context(&entry.areas, entry.total_pixels, &cfg)?;
                for category in &decision.unmapped {
                    log(format!("{}: unmapped category {category:?}", entry.id));
                }
                let a = match decision.label {
                    ContextLabel::Indoor => Attribute::Known(indoor_attr),
                    ContextLabel::Outdoor => Attribute::Known(1 - indoor_attr),
                    ContextLabel::Unknown => {
                        n_unknown += 1;
                        Attribute::Unknown
                    }
                };
                manifest
                    .records
                    .push(SampleRecord::new(entry.id, entry.y, a, Split::Unassigned));
            }
            write_manifest(&manifest, &out)?;
            log(format!(
                "{} records, {n_unknown} unknown",
                manifest.records.len()
            ));
            Ok(0)
        }
        Command::MaskIntervene {
            manifest,
            mode,
            fill,
            out_dir,
        } => {
            let spec = MaskFillSpec {
                mode: match mode {
                    MaskModeArg::OracleFg => MaskMode::OracleFg,
                    MaskModeArg::OracleBg => MaskMode::OracleBg,
                },
                fill: parse_fill(&fill)?,
            };
            let m = read_manifest(&manifest)?;
            let base = manifest.parent().map(Path::to_path_buf).unwrap_or_default();
            std::fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
            let mut derived = Manifest::new(format!("{}-{}", m.dataset, spec.mode));
            derived.rho = m.rho;
            let mut skips = 0usize;
            for record in &m.records {
                match mask_one(record, &base, &out_dir, &spec) {
                    Ok(new_record) => derived.records.push(new_record),
                    Err(e) => {
                        eprintln!("segdiag: skip {}: {e}", record.id);
                        skips += 1;
                    }
                }
            }
            write_manifest(&derived, &out_dir.join("manifest.jsonl"))?;
            Ok(skips)
        }
        Command::Probe {
            manifest,
            source,
            k,
            out_dir,
        } => {
            let m = read_manifest(&manifest)?;
            let base = manifest.parent().map(Path::to_path_buf).unwrap_or_default();
            let source = match source {
                PoolSourceArg::Fg => PoolSource::Fg,
                PoolSourceArg::Bg => PoolSource::Bg,
            };
            let mut pooled: Vec<PooledFeature> = Vec::new();
            let mut empty_masks = 0usize;
            for record in &m.records {
                let (Some(feature_path), Some(label_path), Some(a)) = (
                    record.feature_path.as_ref(),
                    record.label_path.as_ref(),
                    record.a.known(),
                ) else {
                    continue;
                };
                let features = read_feature_map(&resolve(&base, feature_path))?;
                let gt = read_label_map(&resolve(&base, label_path))?;
                match pool_features(&features, &gt, source, &record.id, a) {
                    Some(p) => pooled.push(p),
                    None => empty_masks += 1,
                }
            }
            log(format!(
                "{} pooled vectors, {empty_masks} empty-mask exclusions",
                pooled.len()
            ));
            let curve = probe_curve(&pooled, &k)?;
            write(&out_dir.join("tables/probe_curve.csv"), &probe_curve_csv(std::slice::from_ref(&curve)))?;
            let series = vec![(
                format!("z_{source}"),
                curve.points.iter().map(|&(k, auc)| (k as f64, auc)).collect(),
            )];
            let chart = svg::line_chart("Attribute accessibility", "k (components)", "test AUC", &series);
            write(&out_dir.join("charts/probe_curve.svg"), &chart)?;
            Ok(0)
        }
        Command::Overlay { gt, pred, image, out } => {
            let gt_map = read_label_map(&gt)?;
            let pred_map = read_label_map(&pred)?;
            let img = image.map(|p| read_image_rgb(&p)).transpose()?;
            let overlay = flip_overlay(img.as_ref(), &gt_map, &pred_map)?;
            let with_legend = overlay_with_legend(&overlay);
            if let Some(parent) = out.parent() {
                std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
            write_image_rgb(&with_legend, &out)?;
            Ok(0)
        }
        Command::Delta { hi, lo, out } => {
            let load = |p: &Path| -> Result<DiagnosticsSummary, Error> {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                serde_json::from_str(&text).map_err(|e| Error::format(p, e.to_string()))
            };
            let hi_flat = flatten_summary(&load(&hi)?);
            let lo_flat = flatten_summary(&load(&lo)?);
            let deltas = delta_report(&hi_flat, &lo_flat)?;
            write(&out, &delta_csv(&deltas))?;
            Ok(0)
        }
    }
}

fn summary_pixel_set(summary: &DiagnosticsSummary) -> String {
    summary
        .provenance
        .config
        .get("pixel_set")
        .and_then(|v| v.as_str())
        .unwrap_or("pred-fg")
        .to_string()
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn parse_fill(s: &str) -> Result<FillValue, Error> {
    if s == "per-image-mean" {
        return Ok(FillValue::PerImageMean);
    }
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() == 3 {
        let mut rgb = [0u8; 3];
        for (slot, part) in rgb.iter_mut().zip(&parts) {
            *slot = part
                .trim()
                .parse()
                .map_err(|_| Error::Invalid(format!("bad fill component {part:?}")))?;
        }
        return Ok(FillValue::Constant(rgb));
    }
    Err(Error::Invalid(format!(
        "fill must be per-image-mean or r,g,b, got {s:?}"
    )))
}

fn mask_one(
    record: &SampleRecord,
    base: &Path,
    out_dir: &Path,
    spec: &MaskFillSpec,
) -> Result<SampleRecord, Error> {
    let image_path = record.image_path.as_ref().ok_or(Error::MissingFileRef {
        id: record.id.clone(),
        field: "image_path",
    })?;
    let label_path = record.label_path.as_ref().ok_or(Error::MissingFileRef {
        id: record.id.clone(),
        field: "label_path",
    })?;
    let img = read_image_rgb(&resolve(base, image_path))?;
    let gt = read_label_map(&resolve(base, label_path))?;
    let masked = apply_oracle_mask(&img, &gt, spec)?;
    let file_name = format!("{}.png", record.id);
    write_image_rgb(&masked, &out_dir.join(&file_name))?;
    let mut new_record = record.clone();
    new_record.image_path = Some(PathBuf::from(file_name));
    new_record.label_path = Some(resolve(base, label_path));
    if let Some(p) = &record.pred_label_path {
        new_record.pred_label_path = Some(resolve(base, p));
    }
    if let Some(p) = &record.prob_path {
        new_record.prob_path = Some(resolve(base, p));
    }
    if let Some(p) = &record.feature_path {
        new_record.feature_path = Some(resolve(base, p));
    }
    Ok(new_record)
}

#[derive(serde::Deserialize)]
struct EvidenceEntry {
    id: String,
    y: u8,
    total_pixels: u64,
    areas: std::collections::BTreeMap<String, u64>,
}
