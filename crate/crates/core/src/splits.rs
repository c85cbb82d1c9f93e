//! Correlation-regime split construction over the four (Y, A) groups and
//! evidence-based indoor/outdoor context labelling.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label_map::LabelMap;
use crate::manifest::{Manifest, SampleRecord, Split, NUM_GROUPS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSpec {
    /// Association strength between Y and A; 0.5 is balanced.
    pub rho: f64,
    pub total_train: usize,
    pub seed: u64,
}

impl CorrelationSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.5..=1.0).contains(&self.rho) {
            return Err(Error::Invalid(format!("rho {} outside [0.5, 1]", self.rho)));
        }
        if self.total_train < 4 {
            return Err(Error::Invalid("total_train must be >= 4".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSplitReport {
    pub manifest: Manifest,
    /// Counts the rounding rule asked for, before availability clamping.
    pub requested: [usize; NUM_GROUPS],
    pub selected: [usize; NUM_GROUPS],
    /// Shortfall per group where availability clamped an aligned request.
    pub deficits: [usize; NUM_GROUPS],
}

fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor() as usize
}

/// Aligned attribute for label y: the co-occurring configuration (a = y).
fn aligned_group(y: usize) -> usize {
    2 * y + y
}

fn counterfactual_group(y: usize) -> usize {
    2 * y + (1 - y)
}

/// Builds disjoint splits from one pool under one seed schedule.
/// Each call consumes records, so successive splits never share an id.
pub struct SplitBuilder {
    pool: Manifest,
    used: HashSet<String>,
    seed: u64,
    draw: u64,
}

impl SplitBuilder {
    pub fn new(pool: Manifest, seed: u64) -> Self {
        SplitBuilder {
            pool,
            used: HashSet::new(),
            seed,
            draw: 0,
        }
    }

    /// Record indices per group, pool order, excluding used and unknown-a.
    fn available(&self) -> [Vec<usize>; NUM_GROUPS] {
        let mut groups: [Vec<usize>; NUM_GROUPS] = Default::default();
        for (i, r) in self.pool.records.iter().enumerate() {
            if self.used.contains(&r.id) {
                continue;
            }
            if let Some(g) = r.group() {
                groups[g].push(i);
            }
        }
        groups
    }

    fn next_rng(&mut self) -> ChaCha8Rng {
        // each draw gets its own stream so split contents are independent
        let rng = ChaCha8Rng::seed_from_u64(self.seed.wrapping_add(self.draw.wrapping_mul(0x9e3779b97f4a7c15)));
        self.draw += 1;
        rng
    }

    fn take(
        &mut self,
        group_pool: &[usize],
        count: usize,
        rng: &mut ChaCha8Rng,
        split: Split,
        out: &mut Vec<SampleRecord>,
    ) {
        let mut indices = group_pool.to_vec();
        indices.shuffle(rng);
        for &i in indices.iter().take(count) {
            let mut record = self.pool.records[i].clone();
            record.split = split;
            self.used.insert(record.id.clone());
            out.push(record);
        }
    }

    /// Per label y with n_y = total/2: the aligned group gets
    /// round-half-up(rho * n_y), the counterfactual group the remainder.
    /// Aligned requests clamp to availability (deficit reported);
    /// counterfactual shortfalls are an error.
    pub fn build_train_split(&mut self, spec: &CorrelationSpec) -> Result<TrainSplitReport> {
        spec.validate()?;
        let n_y = spec.total_train / 2;
        let mut requested = [0usize; NUM_GROUPS];
        for y in 0..2 {
            let aligned = round_half_up(spec.rho * n_y as f64);
            requested[aligned_group(y)] = aligned;
            requested[counterfactual_group(y)] = n_y - aligned;
        }

        let groups = self.available();
        let mut selected = [0usize; NUM_GROUPS];
        let mut deficits = [0usize; NUM_GROUPS];
        for y in 0..2 {
            let cf = counterfactual_group(y);
            if groups[cf].len() < requested[cf] {
                return Err(Error::InfeasibleSplit {
                    group: cf,
                    requested: requested[cf],
                    available: groups[cf].len(),
                });
            }
            let al = aligned_group(y);
            if groups[al].len() < requested[al] {
                deficits[al] = requested[al] - groups[al].len();
            }
        }

        let mut rng = self.next_rng();
        let mut records = Vec::new();
        for g in 0..NUM_GROUPS {
            let count = requested[g].min(groups[g].len());
            selected[g] = count;
            let pool = groups[g].clone();
            self.take(&pool, count, &mut rng, Split::Train, &mut records);
        }

        let mut manifest = Manifest::new(format!("{}-train", self.pool.dataset));
        manifest.rho = Some(spec.rho);
        manifest.records = records;
        Ok(TrainSplitReport {
            manifest,
            requested,
            selected,
            deficits,
        })
    }

    pub fn build_balanced_eval(&mut self, per_group: usize, split: Split) -> Result<Manifest> {
        let groups = self.available();
        for (g, pool) in groups.iter().enumerate() {
            if pool.len() < per_group {
                return Err(Error::InfeasibleSplit {
                    group: g,
                    requested: per_group,
                    available: pool.len(),
                });
            }
        }
        let mut rng = self.next_rng();
        let mut records = Vec::new();
        for pool in groups.iter() {
            let pool = pool.clone();
            self.take(&pool, per_group, &mut rng, split, &mut records);
        }
        let mut manifest = Manifest::new(format!("{}-{}", self.pool.dataset, split));
        manifest.records = records;
        Ok(manifest)
    }
}

pub fn build_train_split(pool: &Manifest, spec: &CorrelationSpec) -> Result<TrainSplitReport> {
    SplitBuilder::new(pool.clone(), spec.seed).build_train_split(spec)
}

pub fn build_balanced_eval(pool: &Manifest, per_group: usize, seed: u64) -> Result<Manifest> {
    SplitBuilder::new(pool.clone(), seed).build_balanced_eval(per_group, Split::Test)
}

// --- Context labelling ---

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContextClass {
    Indoor,
    Outdoor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContextLabel {
    Indoor,
    Outdoor,
    Unknown,
}

fn default_coverage_min() -> f64 {
    0.05
}

fn default_dominance_ratio() -> f64 {
    2.0
}

fn default_min_fg_fraction() -> f64 {
    0.01
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceConfig {
    pub categories: BTreeMap<String, ContextClass>,
    #[serde(default = "default_coverage_min")]
    pub coverage_min: f64,
    #[serde(default = "default_dominance_ratio")]
    pub dominance_ratio: f64,
    #[serde(default = "default_min_fg_fraction")]
    pub min_fg_fraction: f64,
}

impl EvidenceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.coverage_min > 0.0 && self.coverage_min < 1.0) {
            return Err(Error::Invalid(format!(
                "coverage_min {} outside (0,1)",
                self.coverage_min
            )));
        }
        if self.dominance_ratio <= 1.0 {
            return Err(Error::Invalid(format!(
                "dominance_ratio {} must exceed 1",
                self.dominance_ratio
            )));
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: EvidenceConfig =
            serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContextDecision {
    pub label: ContextLabel,
    pub indoor_evidence: u64,
    pub outdoor_evidence: u64,
    /// Categories absent from the mapping; they contribute to neither side.
    pub unmapped: Vec<String>,
}

/// Sum indoor- and outdoor-mapped pixel areas; assign a side when total
/// evidence covers at least `coverage_min` of the image and that side
/// dominates the other by `dominance_ratio`.
pub fn assign_context(
    areas: &BTreeMap<String, u64>,
    total_pixels: u64,
    cfg: &EvidenceConfig,
) -> Result<ContextDecision> {
    if total_pixels == 0 {
        return Err(Error::Invalid("total_pixels must be > 0".into()));
    }
    cfg.validate()?;
    let mut indoor = 0u64;
    let mut outdoor = 0u64;
    let mut unmapped = Vec::new();
    for (category, &area) in areas {
        match cfg.categories.get(category) {
            Some(ContextClass::Indoor) => indoor += area,
            Some(ContextClass::Outdoor) => outdoor += area,
            None => unmapped.push(category.clone()),
        }
    }

    let coverage = (indoor + outdoor) as f64 / total_pixels as f64;
    let label = if coverage < cfg.coverage_min {
        ContextLabel::Unknown
    } else if indoor as f64 >= cfg.dominance_ratio * outdoor as f64 {
        ContextLabel::Indoor
    } else if outdoor as f64 >= cfg.dominance_ratio * indoor as f64 {
        ContextLabel::Outdoor
    } else {
        ContextLabel::Unknown
    };
    Ok(ContextDecision {
        label,
        indoor_evidence: indoor,
        outdoor_evidence: outdoor,
        unmapped,
    })
}

/// The >= min_fg_fraction foreground retention filter.
pub fn passes_fg_filter(map: &LabelMap, min_fg_fraction: f64) -> bool {
    let fg = map.data().iter().filter(|&&v| v != 0).count();
    fg as f64 / map.data().len() as f64 >= min_fg_fraction
}
