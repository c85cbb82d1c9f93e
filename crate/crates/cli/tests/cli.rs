//! End-to-end tests for the `segdiag` binary: subcommand outputs, exit
//! codes, and path handling on small generated fixtures.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use segdiag_core::feature_map::FeatureMap;
use segdiag_core::label_map::LabelMap;
use segdiag_core::manifest::{
    read_manifest, write_manifest, Attribute, Manifest, SampleRecord, Split,
};
use segdiag_core::prob_map::{write_prob_map, ProbMap};
use segdiag_core::report::SCHEMA_HEADER;
use segdiag_core::{write_feature_map, write_label_map_png, ImageRgb};

fn segdiag(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_segdiag"))
        .args(args)
        .output()
        .expect("spawn segdiag")
}

fn checkerboard(h: usize, w: usize, classes: [u8; 2]) -> LabelMap {
    let data: Vec<u8> = (0..h * w)
        .map(|i| classes[(i / w + i % w) % 2])
        .collect();
    LabelMap::new(h, w, data).unwrap()
}

/// Manifest with gt/pred label PNGs for `n` images; pred disagrees with gt
/// on a diagonal band so every image has some flips.
fn label_fixture(dir: &Path, n: usize) -> PathBuf {
    let mut manifest = Manifest::new("labels");
    for i in 0..n {
        let gt = checkerboard(8, 8, [1, 2]);
        let mut pred_data = gt.data().to_vec();
        for d in 0..=i.min(7) {
            pred_data[d * 8 + d] = 3 - pred_data[d * 8 + d]; // 1<->2
        }
        let pred = LabelMap::new(8, 8, pred_data).unwrap();
        write_label_map_png(&gt, &dir.join(format!("gt{i}.png"))).unwrap();
        write_label_map_png(&pred, &dir.join(format!("pred{i}.png"))).unwrap();
        let mut rec = SampleRecord::new(
            format!("img{i}"),
            (i % 2) as u8,
            Attribute::Known(((i / 2) % 2) as u8),
            Split::Test,
        );
        rec.label_path = Some(format!("gt{i}.png").into());
        rec.pred_label_path = Some(format!("pred{i}.png").into());
        manifest.records.push(rec);
    }
    let path = dir.join("manifest.jsonl");
    write_manifest(&manifest, &path).unwrap();
    path
}

#[test]
fn metrics_writes_summary_and_tables() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = label_fixture(dir.path(), 4);
    let out = dir.path().join("out");
    let result = segdiag(&[
        "metrics",
        "--manifest",
        manifest.to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(result.status.code(), Some(0), "{result:?}");

    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["global"]["n_images"], 4);
    assert!(summary["provenance"]["manifest_sha256"].is_string());

    let metrics_csv = std::fs::read_to_string(out.join("tables/metrics.csv")).unwrap();
    assert!(metrics_csv.starts_with(SCHEMA_HEADER), "{metrics_csv}");
    assert!(metrics_csv.contains("global,pooled,"));
    assert!(metrics_csv.contains("g0,per-image,"));
    let gaps_csv = std::fs::read_to_string(out.join("tables/gaps.csv")).unwrap();
    assert!(gaps_csv.starts_with(SCHEMA_HEADER));

    // the aggregation flag is recorded in provenance
    let out2 = out.with_file_name("out-per-image");
    let result = segdiag(&[
        "metrics",
        "--manifest",
        manifest.to_str().unwrap(),
        "--aggregation",
        "per-image",
        "--out-dir",
        out2.to_str().unwrap(),
    ]);
    assert_eq!(result.status.code(), Some(0));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out2.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["provenance"]["config"]["aggregation"], "per-image");
}

#[test]
fn groups_writes_gap_chart() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = label_fixture(dir.path(), 4);
    let out = dir.path().join("out");
    let result = segdiag(&[
        "groups",
        "--manifest",
        manifest.to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(result.status.code(), Some(0));
    let svg = std::fs::read_to_string(out.join("charts/gaps.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
    assert!(svg.contains("IoU gap"));
}

#[test]
fn missing_referenced_file_exits_2_with_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = label_fixture(dir.path(), 4);
    std::fs::remove_file(dir.path().join("pred2.png")).unwrap();
    let out = dir.path().join("out");
    let result = segdiag(&[
        "metrics",
        "--manifest",
        manifest.to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(result.status.code(), Some(2), "{result:?}");
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["global"]["n_images"], 3);
    assert_eq!(summary["skipped"].as_array().unwrap().len(), 1);
}

#[test]
fn bad_manifest_path_exits_1() {
    let result = segdiag(&["metrics", "--manifest", "/nonexistent/manifest.jsonl"]);
    assert_eq!(result.status.code(), Some(1));
    assert!(!result.stderr.is_empty());
}

#[test]
fn build_splits_writes_three_manifests() {
    let dir = tempfile::tempdir().unwrap();
    let mut pool = Manifest::new("pool");
    for g in 0..4usize {
        for i in 0..1100 {
            pool.records.push(SampleRecord::new(
                format!("g{g}-{i:04}"),
                (g / 2) as u8,
                Attribute::Known((g % 2) as u8),
                Split::Unassigned,
            ));
        }
    }
    let pool_path = dir.path().join("pool.jsonl");
    write_manifest(&pool, &pool_path).unwrap();

    let out = dir.path().join("splits");
    let result = segdiag(&[
        "build-splits",
        "--pool",
        pool_path.to_str().unwrap(),
        "--rho",
        "0.95",
        "--total",
        "1668",
        "--seed",
        "3",
        "--val-per-group",
        "50",
        "--test-per-group",
        "125",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(result.status.code(), Some(0), "{result:?}");

    let train = read_manifest(&out.join("train.jsonl")).unwrap();
    assert_eq!(train.group_counts(), [792, 42, 42, 792]);
    let val = read_manifest(&out.join("val.jsonl")).unwrap();
    assert_eq!(val.group_counts(), [50, 50, 50, 50]);
    let test = read_manifest(&out.join("test.jsonl")).unwrap();
    assert_eq!(test.group_counts(), [125, 125, 125, 125]);

    // the three splits draw disjoint ids
    let mut ids: Vec<&str> = train
        .records
        .iter()
        .chain(&val.records)
        .chain(&test.records)
        .map(|r| r.id.as_str())
        .collect();
    let n = ids.len();
    ids.sort_unstable();
    ids.dedup();
    assert_eq!(ids.len(), n);

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("split_report.json")).unwrap())
            .unwrap();
    assert_eq!(report["deficits"], serde_json::json!([0, 0, 0, 0]));
}

#[test]
fn context_label_assigns_attributes() {
    let dir = tempfile::tempdir().unwrap();
    let evidence = dir.path().join("evidence.jsonl");
    std::fs::write(
        &evidence,
        concat!(
            r#"{"id":"a","y":0,"total_pixels":10000,"areas":{"wall":5000,"grass":100}}"#,
            "\n",
            r#"{"id":"b","y":1,"total_pixels":10000,"areas":{"grass":6000}}"#,
            "\n",
            r#"{"id":"c","y":0,"total_pixels":10000,"areas":{"wall":300,"grass":300}}"#,
            "\n",
        ),
    )
    .unwrap();
    let config = dir.path().join("evidence.json");
    std::fs::write(
        &config,
        r#"{"categories":{"wall":"indoor","grass":"outdoor"}}"#,
    )
    .unwrap();
    let out = dir.path().join("labelled.jsonl");
    let result = segdiag(&[
        "context-label",
        "--evidence",
        evidence.to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(result.status.code(), Some(0), "{result:?}");
    let manifest = read_manifest(&out).unwrap();
    let by_id: BTreeMap<&str, &Attribute> = manifest
        .records
        .iter()
        .map(|r| (r.id.as_str(), &r.a))
        .collect();
    assert_eq!(by_id["a"], &Attribute::Known(0));
    assert_eq!(by_id["b"], &Attribute::Known(1));
    assert_eq!(by_id["c"], &Attribute::Unknown);
}

#[test]
fn mask_intervene_writes_masked_images_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let mut manifest = Manifest::new("photos");
    let img = ImageRgb::new(2, 2, vec![10, 10, 10, 30, 30, 30, 50, 50, 50, 70, 70, 70]).unwrap();
    segdiag_core::write_image_rgb(&img, &dir.path().join("img0.png")).unwrap();
    let gt = LabelMap::new(2, 2, vec![1, 0, 0, 2]).unwrap();
    write_label_map_png(&gt, &dir.path().join("gt0.png")).unwrap();
    let mut rec = SampleRecord::new("img0", 0, Attribute::Known(0), Split::Test);
    rec.image_path = Some("img0.png".into());
    rec.label_path = Some("gt0.png".into());
    manifest.records.push(rec);
    let manifest_path = dir.path().join("manifest.jsonl");
    write_manifest(&manifest, &manifest_path).unwrap();

    let out = dir.path().join("masked");
    let result = segdiag(&[
        "mask-intervene",
        "--manifest",
        manifest_path.to_str().unwrap(),
        "--mode",
        "oracle-fg",
        "--fill",
        "0,0,0",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(result.status.code(), Some(0), "{result:?}");

    let derived = read_manifest(&out.join("manifest.jsonl")).unwrap();
    assert_eq!(derived.records.len(), 1);
    let rel = derived.records[0].image_path.as_ref().unwrap();
    let masked = segdiag_core::read_image_rgb(&out.join(rel)).unwrap();
    assert_eq!(masked.pixel(0, 0), [10, 10, 10]); // foreground kept
    assert_eq!(masked.pixel(0, 1), [0, 0, 0]); // background filled
    assert_eq!(masked.pixel(1, 1), [70, 70, 70]);
}

#[test]
fn probe_writes_curve_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let mut manifest = Manifest::new("features");
    for i in 0..32usize {
        let a = ((i / 2) % 2) as u8;
        // channel 1 separates the attribute groups
        let offset = if a == 1 { 3.0f32 } else { 0.0 };
        let data: Vec<f32> = (0..4 * 2 * 2)
            .map(|j| {
                let ch = j / 4;
                (i as f32 * 0.01) + if ch == 1 { offset } else { 0.1 * j as f32 }
            })
            .collect();
        let fm = FeatureMap::new(4, 2, 2, data).unwrap();
        write_feature_map(&fm, &dir.path().join(format!("feat{i}.sdtf"))).unwrap();
        let gt = checkerboard(8, 8, [1, 2]);
        write_label_map_png(&gt, &dir.path().join(format!("gt{i}.png"))).unwrap();
        let mut rec = SampleRecord::new(format!("img{i:02}"), 0, Attribute::Known(a), Split::Test);
        rec.feature_path = Some(format!("feat{i}.sdtf").into());
        rec.label_path = Some(format!("gt{i}.png").into());
        manifest.records.push(rec);
    }
    let manifest_path = dir.path().join("manifest.jsonl");
    write_manifest(&manifest, &manifest_path).unwrap();

    let out = dir.path().join("out");
    let result = segdiag(&[
        "probe",
        "--manifest",
        manifest_path.to_str().unwrap(),
        "--source",
        "fg",
        "--k",
        "1,2",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(result.status.code(), Some(0), "{result:?}");
    let csv = std::fs::read_to_string(out.join("tables/probe_curve.csv")).unwrap();
    assert!(csv.starts_with(SCHEMA_HEADER));
    assert!(csv.lines().count() >= 4); // header + column row + 2 points
    let svg = std::fs::read_to_string(out.join("charts/probe_curve.svg")).unwrap();
    assert!(svg.contains("test AUC"));
}

#[test]
fn overlay_writes_png_with_legend() {
    let dir = tempfile::tempdir().unwrap();
    let gt = checkerboard(8, 8, [1, 2]);
    let mut pred_data = gt.data().to_vec();
    pred_data[0] = 3 - pred_data[0];
    let pred = LabelMap::new(8, 8, pred_data).unwrap();
    write_label_map_png(&gt, &dir.path().join("gt.png")).unwrap();
    write_label_map_png(&pred, &dir.path().join("pred.png")).unwrap();
    let out = dir.path().join("overlay.png");
    let result = segdiag(&[
        "overlay",
        "--gt",
        dir.path().join("gt.png").to_str().unwrap(),
        "--pred",
        dir.path().join("pred.png").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(result.status.code(), Some(0), "{result:?}");
    let img = segdiag_core::read_image_rgb(&out).unwrap();
    assert_eq!(img.width(), 8);
    assert!(img.height() > 8); // legend strip appended below
    assert_eq!(img.pixel(0, 0), [220, 0, 0]); // the planted flip
}

#[test]
fn delta_subtracts_two_summaries() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = label_fixture(dir.path(), 4);
    for (out, pixel_set) in [("hi", "pred-fg"), ("lo", "gt-fg")] {
        let result = segdiag(&[
            "metrics",
            "--manifest",
            manifest.to_str().unwrap(),
            "--pixel-set",
            pixel_set,
            "--out-dir",
            dir.path().join(out).to_str().unwrap(),
        ]);
        assert_eq!(result.status.code(), Some(0));
    }
    let out = dir.path().join("delta.csv");
    let result = segdiag(&[
        "delta",
        "--hi",
        dir.path().join("hi/summary.json").to_str().unwrap(),
        "--lo",
        dir.path().join("lo/summary.json").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(result.status.code(), Some(0), "{result:?}");
    let csv = std::fs::read_to_string(&out).unwrap();
    assert!(csv.starts_with(SCHEMA_HEADER));
    // identical inputs except risk scoring: flip deltas are zero
    let flip_line = csv
        .lines()
        .find(|l| l.starts_with("global.flip,"))
        .unwrap();
    assert!(flip_line.ends_with(",0.000000"), "{flip_line}");
}

#[test]
fn risk_deciles_requires_enough_scored_images() {
    let dir = tempfile::tempdir().unwrap();
    // label-only manifest has no probability maps, so nothing is scorable
    let manifest = label_fixture(dir.path(), 4);
    let result = segdiag(&[
        "risk-deciles",
        "--manifest",
        manifest.to_str().unwrap(),
        "--out-dir",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(result.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&result.stderr).contains("10"));
}

#[test]
fn risk_deciles_pixel_set_flag_changes_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let mut manifest = Manifest::new("probs");
    for i in 0..10usize {
        let gt = checkerboard(8, 8, [1, 2]);
        write_label_map_png(&gt, &dir.path().join(format!("gt{i}.png"))).unwrap();
        let p_off = 0.04 * i as f32;
        let probs: Vec<f32> = (0..8 * 8)
            .flat_map(|px| {
                let gt_c = gt.data()[px] as usize;
                let mut t = [0.1f32; 3];
                t[gt_c] = 0.8 - p_off;
                t[3 - gt_c] += p_off;
                t
            })
            .collect();
        let pm = ProbMap::new(8, 8, probs).unwrap();
        write_prob_map(&pm, &dir.path().join(format!("prob{i}.sdtf"))).unwrap();
        let mut rec = SampleRecord::new(format!("img{i}"), 0, Attribute::Known(0), Split::Test);
        rec.label_path = Some(format!("gt{i}.png").into());
        rec.prob_path = Some(format!("prob{i}.sdtf").into());
        manifest.records.push(rec);
    }
    let manifest_path = dir.path().join("manifest.jsonl");
    write_manifest(&manifest, &manifest_path).unwrap();

    let out = dir.path().join("out");
    let result = segdiag(&[
        "risk-deciles",
        "--manifest",
        manifest_path.to_str().unwrap(),
        "--pred-source",
        "argmax-of-probs",
        "--pixel-set",
        "gt-fg",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(result.status.code(), Some(0), "{result:?}");
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["provenance"]["config"]["pixel_set"], "gt-fg");
    let csv = std::fs::read_to_string(out.join("tables/deciles.csv")).unwrap();
    assert_eq!(csv.lines().count(), 12); // schema + column row + 10 bins
}
