//! JSON-Lines manifests describing per-image records and their (Y, A) groups.

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NUM_GROUPS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
    Unassigned,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
            Split::Unassigned => "unassigned",
        };
        f.write_str(s)
    }
}

/// Context attribute A: 0, 1, or unknown (insufficient evidence).
/// Serializes as the integer 0/1 or the string "unknown".
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Attribute {
    Known(u8),
    Unknown,
}

impl Serialize for Attribute {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Attribute::Known(a) => s.serialize_u8(*a),
            Attribute::Unknown => s.serialize_str("unknown"),
        }
    }
}

impl<'de> Deserialize<'de> for Attribute {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        match serde_json::Value::deserialize(d)? {
            serde_json::Value::Number(n) => match n.as_u64() {
                Some(v @ 0..=1) => Ok(Attribute::Known(v as u8)),
                _ => Err(D::Error::custom(format!("attribute {n} outside {{0,1}}"))),
            },
            serde_json::Value::String(s) if s == "unknown" => Ok(Attribute::Unknown),
            other => Err(D::Error::custom(format!(
                "attribute must be 0, 1, or \"unknown\", got {other}"
            ))),
        }
    }
}

impl Attribute {
    pub fn known(self) -> Option<u8> {
        match self {
            Attribute::Known(a) => Some(a),
            Attribute::Unknown => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub id: String,
    pub y: u8,
    pub a: Attribute,
    pub split: Split,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label_path: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pred_label_path: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prob_path: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub image_path: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub feature_path: Option<PathBuf>,
}

impl SampleRecord {
    pub fn new(id: impl Into<String>, y: u8, a: Attribute, split: Split) -> Self {
        SampleRecord {
            id: id.into(),
            y,
            a,
            split,
            label_path: None,
            pred_label_path: None,
            prob_path: None,
            image_path: None,
            feature_path: None,
        }
    }

    /// Group index g = 2y + a; None when the attribute is unknown.
    pub fn group(&self) -> Option<usize> {
        self.a.known().map(|a| 2 * self.y as usize + a as usize)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub dataset: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    pub records: Vec<SampleRecord>,
}

impl Manifest {
    pub fn new(dataset: impl Into<String>) -> Self {
        Manifest {
            dataset: dataset.into(),
            rho: None,
            records: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for r in &self.records {
            if !seen.insert(r.id.as_str()) {
                return Err(Error::DuplicateId { id: r.id.clone() });
            }
            if r.y > 1 {
                return Err(Error::Invalid(format!(
                    "record {}: y {} outside {{0,1}}",
                    r.id, r.y
                )));
            }
            if let Attribute::Known(a) = r.a {
                if a > 1 {
                    return Err(Error::Invalid(format!(
                        "record {}: a {} outside {{0,1,unknown}}",
                        r.id, a
                    )));
                }
            }
        }
        Ok(())
    }

    /// Records with a known attribute, i.e. those eligible for group-wise ops.
    pub fn grouped_records(&self) -> impl Iterator<Item = (&SampleRecord, usize)> {
        self.records
            .iter()
            .filter_map(|r| r.group().map(|g| (r, g)))
    }

    pub fn group_counts(&self) -> [usize; NUM_GROUPS] {
        let mut counts = [0usize; NUM_GROUPS];
        for (_, g) in self.grouped_records() {
            counts[g] += 1;
        }
        counts
    }
}

/// Manifest line format: one JSON object per record. A leading header line
/// `{"dataset": ..., "rho": ...}` is optional; when absent the dataset name
/// defaults to the file stem.
pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut manifest = Manifest::new(
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "manifest".to_string()),
    );

    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if lineno == 0 {
            if let Ok(header) = serde_json::from_str::<ManifestHeader>(trimmed) {
                manifest.dataset = header.dataset;
                manifest.rho = header.rho;
                continue;
            }
        }
        let record: SampleRecord =
            serde_json::from_str(trimmed).map_err(|e| Error::ManifestParse {
                line: lineno + 1,
                reason: e.to_string(),
            })?;
        manifest.records.push(record);
    }
    manifest.validate()?;
    Ok(manifest)
}

#[derive(Serialize, Deserialize)]
struct ManifestHeader {
    dataset: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    rho: Option<f64>,
}

pub fn write_manifest(manifest: &Manifest, path: &Path) -> Result<()> {
    manifest.validate()?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let header = ManifestHeader {
        dataset: manifest.dataset.clone(),
        rho: manifest.rho,
    };
    serde_json::to_writer(&mut w, &header).map_err(|e| Error::format(path, e.to_string()))?;
    writeln!(w).map_err(|e| Error::io(path, e))?;
    for record in &manifest.records {
        serde_json::to_writer(&mut w, record).map_err(|e| Error::format(path, e.to_string()))?;
        writeln!(w).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn write_lines(lines: &[&str]) -> (tempfile::TempDir, PathBuf) {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.jsonl");
        std::fs::write(&path, lines.join("\n")).unwrap();
        (dir, path)
    }

    #[test]
    fn parses_record_and_group() {
        let (_dir, path) = write_lines(&[
            r#"{"id":"x1","y":0,"a":1,"split":"test","label_path":"x1.png"}"#,
        ]);
        let m = read_manifest(&path).unwrap();
        assert_eq!(m.records.len(), 1);
        assert_eq!(m.records[0].group(), Some(1));
        assert_eq!(m.records[0].label_path.as_deref(), Some(Path::new("x1.png")));
    }

    #[test]
    fn rejects_duplicate_id() {
        let (_dir, path) = write_lines(&[
            r#"{"id":"x1","y":0,"a":1,"split":"test"}"#,
            r#"{"id":"x1","y":1,"a":0,"split":"test"}"#,
        ]);
        let err = read_manifest(&path).unwrap_err();
        assert!(err.to_string().contains("duplicate id"));
    }

    #[test]
    fn unknown_attribute_excluded_from_groups() {
        let (_dir, path) = write_lines(&[
            r#"{"id":"x1","y":0,"a":"unknown","split":"test"}"#,
            r#"{"id":"x2","y":1,"a":1,"split":"test"}"#,
        ]);
        let m = read_manifest(&path).unwrap();
        assert_eq!(m.records[0].group(), None);
        assert_eq!(m.group_counts(), [0, 0, 0, 1]);
    }

    #[test]
    fn rejects_bad_split_and_y() {
        let (_dir, path) = write_lines(&[r#"{"id":"x1","y":0,"a":1,"split":"holdout"}"#]);
        assert!(read_manifest(&path).is_err());

        let (_dir2, path2) = write_lines(&[r#"{"id":"x1","y":2,"a":1,"split":"test"}"#]);
        assert!(read_manifest(&path2).is_err());
    }

    #[test]
    fn roundtrip_identity() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.jsonl");
        let mut m = Manifest::new("fixture");
        m.rho = Some(0.95);
        let mut r = SampleRecord::new("a1", 1, Attribute::Known(0), Split::Train);
        r.prob_path = Some(PathBuf::from("a1.sdtf"));
        m.records.push(r);
        m.records
            .push(SampleRecord::new("a2", 0, Attribute::Unknown, Split::Val));
        write_manifest(&m, &path).unwrap();
        assert_eq!(read_manifest(&path).unwrap(), m);
    }
}
