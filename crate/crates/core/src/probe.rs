//! Attribute accessibility from pooled encoder features: region-pooled
//! vectors, PCA projection, a logistic probe for the context attribute,
//! and AUC as a function of retained components.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feature_map::FeatureMap;
use crate::label_map::LabelMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoolSource {
    Fg,
    Bg,
}

impl std::fmt::Display for PoolSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PoolSource::Fg => "fg",
            PoolSource::Bg => "bg",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PooledFeature {
    pub vector: Vec<f64>,
    pub source: PoolSource,
    pub image_id: String,
    pub attribute: u8,
}

/// Nearest-neighbor lookup of the label at feature-map resolution.
fn nearest_label(gt: &LabelMap, fh: usize, fw: usize, r: usize, c: usize) -> u8 {
    let src_r = ((r as f64 + 0.5) * gt.height() as f64 / fh as f64).floor() as usize;
    let src_c = ((c as f64 + 0.5) * gt.width() as f64 / fw as f64).floor() as usize;
    gt.get(src_r.min(gt.height() - 1), src_c.min(gt.width() - 1))
}

/// Channel-wise mean over the region positions; None when the region is
/// empty after downsampling the mask to feature resolution.
pub fn pool_features(
    features: &FeatureMap,
    gt: &LabelMap,
    source: PoolSource,
    image_id: &str,
    attribute: u8,
) -> Option<PooledFeature> {
    let (fh, fw) = (features.height(), features.width());
    let mut sums = vec![0.0f64; features.channels()];
    let mut count = 0usize;
    for r in 0..fh {
        for c in 0..fw {
            let label = nearest_label(gt, fh, fw, r, c);
            let in_region = match source {
                PoolSource::Fg => label != 0,
                PoolSource::Bg => label == 0,
            };
            if !in_region {
                continue;
            }
            count += 1;
            for ch in 0..features.channels() {
                sums[ch] += features.get(ch, r, c) as f64;
            }
        }
    }
    if count == 0 {
        return None;
    }
    Some(PooledFeature {
        vector: sums.into_iter().map(|s| s / count as f64).collect(),
        source,
        image_id: image_id.to_string(),
        attribute,
    })
}

// --- PCA ---

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// Orthonormal rows in non-increasing eigenvalue order.
    pub components: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
}

impl Pca {
    pub fn project(&self, vector: &[f64], k: usize) -> Vec<f64> {
        let k = k.min(self.components.len());
        self.components[..k]
            .iter()
            .map(|comp| {
                comp.iter()
                    .zip(vector)
                    .zip(&self.mean)
                    .map(|((&c, &v), &m)| c * (v - m))
                    .sum()
            })
            .collect()
    }

    pub fn reconstruct(&self, projected: &[f64]) -> Vec<f64> {
        let dim = self.mean.len();
        let mut out = self.mean.clone();
        for (coeff, comp) in projected.iter().zip(&self.components) {
            for d in 0..dim {
                out[d] += coeff * comp[d];
            }
        }
        out
    }

    pub fn explained_variance_ratio(&self) -> Vec<f64> {
        let total: f64 = self.eigenvalues.iter().sum();
        self.eigenvalues.iter().map(|&e| e / total).collect()
    }
}

/// Exact eigendecomposition of the sample covariance; the sign convention
/// makes each component's largest-magnitude entry positive.
pub fn fit_pca(vectors: &[&[f64]], k_max: usize) -> Result<Pca> {
    let n = vectors.len();
    if n < 2 {
        return Err(Error::DegeneratePca("need at least 2 vectors".into()));
    }
    let dim = vectors[0].len();
    if vectors.iter().any(|v| v.len() != dim) {
        return Err(Error::DegeneratePca("inconsistent vector lengths".into()));
    }
    if k_max > dim.min(n - 1) {
        return Err(Error::DegeneratePca(format!(
            "k_max {k_max} exceeds min(dim, n-1) = {}",
            dim.min(n - 1)
        )));
    }

    let mut mean = vec![0.0f64; dim];
    for v in vectors {
        for (m, &x) in mean.iter_mut().zip(*v) {
            *m += x;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }

    let mut cov = DMatrix::zeros(dim, dim);
    for v in vectors {
        for i in 0..dim {
            let di = v[i] - mean[i];
            for j in i..dim {
                let dj = v[j] - mean[j];
                cov[(i, j)] += di * dj;
            }
        }
    }
    for i in 0..dim {
        for j in i..dim {
            cov[(i, j)] /= (n - 1) as f64;
            cov[(j, i)] = cov[(i, j)];
        }
    }
    if cov.iter().all(|&v| v == 0.0) {
        return Err(Error::DegeneratePca("zero covariance (all vectors identical)".into()));
    }

    let eigen = SymmetricEigen::new(cov);
    let mut pairs: Vec<(f64, Vec<f64>)> = eigen
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(i, &val)| (val, eigen.eigenvectors.column(i).iter().copied().collect()))
        .collect();
    pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("finite eigenvalues"));
    pairs.truncate(k_max);

    let mut components = Vec::with_capacity(k_max);
    let mut eigenvalues = Vec::with_capacity(k_max);
    for (val, mut vec) in pairs {
        let max_idx = vec
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        if vec[max_idx] < 0.0 {
            for x in &mut vec {
                *x = -*x;
            }
        }
        eigenvalues.push(val.max(0.0));
        components.push(vec);
    }
    Ok(Pca {
        mean,
        components,
        eigenvalues,
    })
}

// --- Logistic probe ---

pub const PROBE_EPOCHS: usize = 500;
pub const PROBE_STEP: f64 = 0.1;
pub const PROBE_L2: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticProbe {
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Standardization statistics from the training split.
    pub feature_mean: Vec<f64>,
    pub feature_std: Vec<f64>,
}

impl LogisticProbe {
    pub fn score(&self, vector: &[f64]) -> f64 {
        let z: f64 = self
            .weights
            .iter()
            .zip(vector)
            .zip(self.feature_mean.iter().zip(&self.feature_std))
            .map(|((&w, &x), (&m, &s))| w * (x - m) / s)
            .sum::<f64>()
            + self.bias;
        1.0 / (1.0 + (-z).exp())
    }
}

/// Full-batch gradient descent on standardized inputs.
pub fn fit_probe(vectors: &[Vec<f64>], labels: &[u8]) -> Result<LogisticProbe> {
    let n = vectors.len();
    if n == 0 || labels.iter().all(|&l| l == 0) || labels.iter().all(|&l| l == 1) {
        return Err(Error::SingleClassSplit);
    }
    let dim = vectors[0].len();

    let mut mean = vec![0.0f64; dim];
    for v in vectors {
        for (m, &x) in mean.iter_mut().zip(v) {
            *m += x;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut std = vec![0.0f64; dim];
    for v in vectors {
        for (s, (&x, &m)) in std.iter_mut().zip(v.iter().zip(&mean)) {
            *s += (x - m) * (x - m);
        }
    }
    for s in &mut std {
        *s = (*s / n as f64).sqrt();
        if *s == 0.0 {
            *s = 1.0;
        }
    }

    let standardized: Vec<Vec<f64>> = vectors
        .iter()
        .map(|v| {
            v.iter()
                .zip(mean.iter().zip(&std))
                .map(|(&x, (&m, &s))| (x - m) / s)
                .collect()
        })
        .collect();

    let mut weights = vec![0.0f64; dim];
    let mut bias = 0.0f64;
    for _ in 0..PROBE_EPOCHS {
        let mut grad_w = vec![0.0f64; dim];
        let mut grad_b = 0.0f64;
        for (x, &y) in standardized.iter().zip(labels) {
            let z: f64 = weights.iter().zip(x).map(|(&w, &xi)| w * xi).sum::<f64>() + bias;
            let p = 1.0 / (1.0 + (-z).exp());
            let err = p - y as f64;
            for (g, &xi) in grad_w.iter_mut().zip(x) {
                *g += err * xi;
            }
            grad_b += err;
        }
        for (w, g) in weights.iter_mut().zip(&grad_w) {
            *w -= PROBE_STEP * (g / n as f64 + PROBE_L2 * *w);
        }
        bias -= PROBE_STEP * grad_b / n as f64;
    }

    Ok(LogisticProbe {
        weights,
        bias,
        feature_mean: mean,
        feature_std: std,
    })
}

/// Rank-statistic AUC (Mann-Whitney); tied scores contribute 1/2.
pub fn evaluate_auc(probe: &LogisticProbe, vectors: &[Vec<f64>], labels: &[u8]) -> Result<f64> {
    let scores: Vec<f64> = vectors.iter().map(|v| probe.score(v)).collect();
    auc_from_scores(&scores, labels)
}

pub fn auc_from_scores(scores: &[f64], labels: &[u8]) -> Result<f64> {
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClassSplit);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("finite scores"));

    // midranks over tie groups
    let mut ranks = vec![0.0f64; scores.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = midrank;
        }
        i = j + 1;
    }

    let rank_sum_pos: f64 = labels
        .iter()
        .zip(&ranks)
        .filter(|(&l, _)| l == 1)
        .map(|(_, &r)| r)
        .sum();
    let u = rank_sum_pos - n_pos as f64 * (n_pos as f64 + 1.0) / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

// --- Probe curve pipeline ---

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeCurve {
    pub source: PoolSource,
    pub points: Vec<(usize, f64)>,
    pub n_train: usize,
    pub n_test: usize,
}

/// Deterministic 50/50 probe-train/probe-test assignment by hashed id.
pub fn is_probe_train(id: &str) -> bool {
    fnv1a64(id.as_bytes()) % 2 == 0
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf29ce484222325u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Fits PCA on the probe-train half and reports test AUC for each k.
pub fn probe_curve(pooled: &[PooledFeature], ks: &[usize]) -> Result<ProbeCurve> {
    if pooled.is_empty() {
        return Err(Error::SingleClassSplit);
    }
    let source = pooled[0].source;
    let (train, test): (Vec<&PooledFeature>, Vec<&PooledFeature>) =
        pooled.iter().partition(|p| is_probe_train(&p.image_id));

    let k_max = *ks.iter().max().ok_or_else(|| Error::Invalid("empty k list".into()))?;
    let train_vecs: Vec<&[f64]> = train.iter().map(|p| p.vector.as_slice()).collect();
    let pca = fit_pca(&train_vecs, k_max.min(train.len().saturating_sub(1)))?;

    let train_labels: Vec<u8> = train.iter().map(|p| p.attribute).collect();
    let test_labels: Vec<u8> = test.iter().map(|p| p.attribute).collect();

    let mut points = Vec::new();
    for &k in ks {
        let proj_train: Vec<Vec<f64>> = train.iter().map(|p| pca.project(&p.vector, k)).collect();
        let proj_test: Vec<Vec<f64>> = test.iter().map(|p| pca.project(&p.vector, k)).collect();
        let probe = fit_probe(&proj_train, &train_labels)?;
        let auc = evaluate_auc(&probe, &proj_test, &test_labels)?;
        points.push((k, auc));
    }
    Ok(ProbeCurve {
        source,
        points,
        n_train: train.len(),
        n_test: test.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_features_pool_to_constant() {
        let f = FeatureMap::new(3, 2, 2, vec![5.0; 12]).unwrap();
        let gt = LabelMap::new(2, 2, vec![1, 0, 0, 2]).unwrap();
        let p = pool_features(&f, &gt, PoolSource::Fg, "x", 0).unwrap();
        assert_eq!(p.vector, vec![5.0, 5.0, 5.0]);
    }

    #[test]
    fn mean_over_selected_positions() {
        // C=1, features [[1,3],[5,7]], fg at (0,0) and (1,1) -> mean(1,7)=4
        let f = FeatureMap::new(1, 2, 2, vec![1.0, 3.0, 5.0, 7.0]).unwrap();
        let gt = LabelMap::new(2, 2, vec![1, 0, 0, 2]).unwrap();
        let p = pool_features(&f, &gt, PoolSource::Fg, "x", 0).unwrap();
        assert_eq!(p.vector, vec![4.0]);
        let bg = pool_features(&f, &gt, PoolSource::Bg, "x", 0).unwrap();
        assert_eq!(bg.vector, vec![4.0]);
    }

    #[test]
    fn downsampled_mask_nearest() {
        // 4x4 gt with fg in the top-left quadrant, 2x2 features
        let mut labels = vec![0u8; 16];
        for r in 0..2 {
            for c in 0..2 {
                labels[r * 4 + c] = 1;
            }
        }
        let gt = LabelMap::new(4, 4, labels).unwrap();
        let f = FeatureMap::new(1, 2, 2, vec![10.0, 20.0, 30.0, 40.0]).unwrap();
        let p = pool_features(&f, &gt, PoolSource::Fg, "x", 0).unwrap();
        assert_eq!(p.vector, vec![10.0]);
    }

    #[test]
    fn empty_region_is_none() {
        let f = FeatureMap::new(1, 2, 2, vec![1.0; 4]).unwrap();
        let gt = LabelMap::new(2, 2, vec![0; 4]).unwrap();
        assert!(pool_features(&f, &gt, PoolSource::Fg, "x", 0).is_none());
    }

    #[test]
    fn pca_on_diagonal_line() {
        let data: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, i as f64]).collect();
        let refs: Vec<&[f64]> = data.iter().map(|v| v.as_slice()).collect();
        let pca = fit_pca(&refs, 2).unwrap();
        let inv_sqrt2 = 1.0 / 2.0f64.sqrt();
        assert!((pca.components[0][0] - inv_sqrt2).abs() < 1e-9);
        assert!((pca.components[0][1] - inv_sqrt2).abs() < 1e-9);
        assert!(pca.eigenvalues[1].abs() < 1e-9);
    }

    #[test]
    fn pca_isotropic_variance_ratios() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let data: Vec<Vec<f64>> = (0..1000)
            .map(|_| {
                (0..4)
                    .map(|_| {
                        // sum of uniforms as a cheap near-gaussian
                        (0..12).map(|_| rng.gen::<f64>()).sum::<f64>() - 6.0
                    })
                    .collect()
            })
            .collect();
        let refs: Vec<&[f64]> = data.iter().map(|v| v.as_slice()).collect();
        let pca = fit_pca(&refs, 4).unwrap();
        for ratio in pca.explained_variance_ratio() {
            assert!((ratio - 0.25).abs() < 0.1, "ratio {ratio}");
        }
    }

    #[test]
    fn pca_full_rank_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let data: Vec<Vec<f64>> = (0..50)
            .map(|_| (0..3).map(|_| rng.gen::<f64>() * 10.0).collect())
            .collect();
        let refs: Vec<&[f64]> = data.iter().map(|v| v.as_slice()).collect();
        let pca = fit_pca(&refs, 3).unwrap();
        for v in &data {
            let rec = pca.reconstruct(&pca.project(v, 3));
            let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            let err: f64 = rec
                .iter()
                .zip(v)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            assert!(err / norm < 1e-5);
        }
    }

    #[test]
    fn pca_orthonormality() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let data: Vec<Vec<f64>> = (0..100)
            .map(|_| (0..5).map(|_| rng.gen::<f64>()).collect())
            .collect();
        let refs: Vec<&[f64]> = data.iter().map(|v| v.as_slice()).collect();
        let pca = fit_pca(&refs, 5).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let dot: f64 = pca.components[i]
                    .iter()
                    .zip(&pca.components[j])
                    .map(|(a, b)| a * b)
                    .sum();
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((dot - expected).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn pca_rejects_degenerate_input() {
        let data = vec![vec![1.0, 2.0]; 5];
        let refs: Vec<&[f64]> = data.iter().map(|v| v.as_slice()).collect();
        assert!(fit_pca(&refs, 2).is_err());
        assert!(fit_pca(&refs[..1], 1).is_err());
    }

    #[test]
    fn separable_projections_reach_auc_one() {
        let vectors: Vec<Vec<f64>> = (0..20)
            .map(|i| vec![if i < 10 { -1.0 - i as f64 } else { 1.0 + i as f64 }])
            .collect();
        let labels: Vec<u8> = (0..20).map(|i| (i >= 10) as u8).collect();
        let probe = fit_probe(&vectors, &labels).unwrap();
        assert_eq!(evaluate_auc(&probe, &vectors, &labels).unwrap(), 1.0);
    }

    #[test]
    fn independent_labels_give_chance_auc() {
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        let vectors: Vec<Vec<f64>> = (0..500)
            .map(|_| vec![rng.gen::<f64>(), rng.gen::<f64>()])
            .collect();
        let labels: Vec<u8> = (0..500).map(|_| rng.gen_range(0..2) as u8).collect();
        let probe = fit_probe(&vectors, &labels).unwrap();
        let auc = evaluate_auc(&probe, &vectors, &labels).unwrap();
        assert!((auc - 0.5).abs() < 0.05, "auc {auc}");
    }

    #[test]
    fn ties_contribute_half() {
        let scores = vec![0.5, 0.5, 0.5, 0.5];
        let labels = vec![0, 1, 0, 1];
        assert_eq!(auc_from_scores(&scores, &labels).unwrap(), 0.5);
    }

    #[test]
    fn auc_invariant_under_monotone_transform() {
        let scores = vec![0.1, 0.4, 0.35, 0.8, 0.65];
        let labels = vec![0, 0, 1, 1, 1];
        let base = auc_from_scores(&scores, &labels).unwrap();
        let transformed: Vec<f64> = scores.iter().map(|&s| (5.0 * s).exp()).collect();
        assert_eq!(auc_from_scores(&transformed, &labels).unwrap(), base);
    }

    #[test]
    fn single_class_rejected() {
        assert!(fit_probe(&[vec![1.0], vec![2.0]], &[1, 1]).is_err());
        assert!(auc_from_scores(&[0.1, 0.2], &[0, 0]).is_err());
    }

    /// Attribute planted as a constant channel offset becomes decodable
    /// from the first component.
    #[test]
    fn planted_attribute_is_accessible() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let pooled: Vec<PooledFeature> = (0..200)
            .map(|i| {
                let a = (i % 2) as u8;
                let offset = if a == 1 { 3.0 } else { 0.0 };
                PooledFeature {
                    vector: (0..8)
                        .map(|ch| rng.gen::<f64>() * 0.2 + if ch == 0 { offset } else { 0.0 })
                        .collect(),
                    source: PoolSource::Bg,
                    image_id: format!("img{i:04}"),
                    attribute: a,
                }
            })
            .collect();
        let curve = probe_curve(&pooled, &[1, 2, 3]).unwrap();
        for (k, auc) in &curve.points {
            assert!(*auc >= 0.99, "k={k} auc={auc}");
        }
    }

    #[test]
    fn probe_split_is_deterministic() {
        assert_eq!(is_probe_train("abc"), is_probe_train("abc"));
        let n_train = (0..1000)
            .filter(|i| is_probe_train(&format!("img{i}")))
            .count();
        assert!((300..700).contains(&n_train), "n_train {n_train}");
    }
}
