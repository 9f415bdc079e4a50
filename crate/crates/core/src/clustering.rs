//! Burst / non-burst phase labelling of blocks.
//!
//! Each block is summarised by its channel covariance matrix. Blocks are
//! compared with the Förstner metric (norm of the log generalized
//! eigenvalues), turned into a Gaussian-kernel similarity, and split in two by
//! normalized spectral clustering. The higher-variance cluster is the burst
//! phase.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::MultiChannelSeries;
use crate::spectral::{band_limit, BandDefinition, BlockSpec};

/// Relative diagonal loading applied to every block covariance.
pub const COVARIANCE_RIDGE: f64 = 1e-8;

const KMEANS_RESTARTS: usize = 20;
const KMEANS_MAX_ITER: usize = 100;
const HOLDOUT_NEIGHBOURS: usize = 5;

/// Binary phase indicator per block: 1 = burst, 0 = non-burst.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseLabels {
    labels: Vec<u8>,
}

impl PhaseLabels {
    pub fn new(labels: Vec<u8>) -> Result<Self> {
        if let Some(b) = labels.iter().position(|&d| d > 1) {
            return Err(Error::InvalidSeries(format!("label {} at block {b} is not 0 or 1", labels[b])));
        }
        Ok(Self { labels })
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn label(&self, b: usize) -> u8 {
        self.labels[b]
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Block indices carrying label `phase`.
    pub fn phase_set(&self, phase: u8) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &d)| d == phase)
            .map(|(b, _)| b)
            .collect()
    }

    pub fn burst_set(&self) -> Vec<usize> {
        self.phase_set(1)
    }

    pub fn nonburst_set(&self) -> Vec<usize> {
        self.phase_set(0)
    }

    pub fn count(&self, phase: u8) -> usize {
        self.labels.iter().filter(|&&d| d == phase).count()
    }

    pub fn burst_probability(&self) -> f64 {
        if self.labels.is_empty() {
            return 0.0;
        }
        self.count(1) as f64 / self.labels.len() as f64
    }

    /// Fraction of blocks on which two labellings agree.
    pub fn agreement(&self, other: &PhaseLabels) -> f64 {
        let same = self.labels.iter().zip(&other.labels).filter(|(a, b)| a == b).count();
        same as f64 / self.labels.len().max(1) as f64
    }
}

#[derive(Debug, Clone)]
pub struct SimilarityMatrix {
    pub entries: DMatrix<f64>,
    pub bandwidth: f64,
}

/// Sample covariance of block `b`, optionally after restricting every
/// channel to `band`, with ridge `1e-8 * trace / p` on the diagonal.
pub fn block_covariance(
    series: &MultiChannelSeries,
    spec: &BlockSpec,
    b: usize,
    band: Option<&BandDefinition>,
) -> Result<DMatrix<f64>> {
    spec.check_block(b)?;
    let p = series.n_channels();
    let len = spec.block_length;
    if len <= p {
        return Err(Error::InvalidBlockLength { length: len, samples: series.n_samples() });
    }
    let mut centred = DMatrix::<f64>::zeros(p, len);
    for j in 0..p {
        let raw = &series.channel(j)[spec.range(b)];
        let x = match band {
            Some(band) => band_limit(raw, band, series.sampling_rate())?,
            None => raw.to_vec(),
        };
        let mean = x.iter().sum::<f64>() / len as f64;
        for (t, v) in x.iter().enumerate() {
            centred[(j, t)] = v - mean;
        }
    }
    let mut cov = &centred * centred.transpose() / (len as f64 - 1.0);
    let trace = cov.trace();
    if !(trace > 0.0) {
        return Err(Error::DegenerateCovariance { block: b });
    }
    let ridge = COVARIANCE_RIDGE * trace / p as f64;
    for j in 0..p {
        cov[(j, j)] += ridge;
    }
    Ok(cov)
}

/// Covariances of every block.
pub fn block_covariances(
    series: &MultiChannelSeries,
    spec: &BlockSpec,
    band: Option<&BandDefinition>,
) -> Result<Vec<DMatrix<f64>>> {
    (0..spec.n_blocks)
        .into_par_iter()
        .map(|b| block_covariance(series, spec, b, band))
        .collect()
}

/// Inverse Cholesky factor `L^{-1}` with `C = L L^T`.
fn inverse_cholesky(c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = c
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numeric("covariance is not positive definite".into()))?;
    let l = chol.l();
    l.solve_lower_triangular(&DMatrix::identity(c.nrows(), c.ncols()))
        .ok_or_else(|| Error::Numeric("singular Cholesky factor".into()))
}

fn log_eigen_norm(reduced: DMatrix<f64>) -> Result<f64> {
    let eig = SymmetricEigen::new(reduced);
    let mut sum = 0.0;
    for &lambda in eig.eigenvalues.iter() {
        if !(lambda > 0.0) {
            return Err(Error::Numeric(format!("non-positive generalized eigenvalue {lambda}")));
        }
        sum += lambda.ln().powi(2);
    }
    Ok(sum.sqrt())
}

/// Förstner distance `|| log lambda ||_2` over the generalized eigenvalues of
/// `C_b y = lambda C_b' y`.
pub fn forstner_distance(cb: &DMatrix<f64>, cb_prime: &DMatrix<f64>) -> Result<f64> {
    if cb.shape() != cb_prime.shape() || !cb.is_square() {
        return Err(Error::Numeric("covariance shapes differ".into()));
    }
    let w = inverse_cholesky(cb_prime)?;
    let mut reduced = &w * cb * w.transpose();
    symmetrize(&mut reduced);
    log_eigen_norm(reduced)
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// All pairwise Förstner distances; zero diagonal.
pub fn distance_matrix(covariances: &[DMatrix<f64>]) -> Result<DMatrix<f64>> {
    let n = covariances.len();
    let whiteners = covariances.iter().map(inverse_cholesky).collect::<Result<Vec<_>>>()?;
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            ((i + 1)..n)
                .map(|j| {
                    let w = &whiteners[j];
                    let mut reduced = w * &covariances[i] * w.transpose();
                    symmetrize(&mut reduced);
                    log_eigen_norm(reduced)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let mut out = DMatrix::zeros(n, n);
    for (i, row) in rows.iter().enumerate() {
        for (offset, &g) in row.iter().enumerate() {
            let j = i + 1 + offset;
            out[(i, j)] = g;
            out[(j, i)] = g;
        }
    }
    Ok(out)
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Gaussian kernel `exp(-g^2 / (2 eta))` with `eta` the median pairwise distance.
pub fn similarity_matrix(distances: &DMatrix<f64>) -> Result<SimilarityMatrix> {
    let n = distances.nrows();
    if n < 2 || !distances.is_square() {
        return Err(Error::DegenerateSimilarity("need a square matrix over at least two blocks".into()));
    }
    let mut upper = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            upper.push(distances[(i, j)]);
        }
    }
    let eta = median(&mut upper);
    if !(eta > 0.0) {
        return Err(Error::DegenerateSimilarity("median block distance is zero".into()));
    }
    Ok(SimilarityMatrix { entries: kernel(distances, eta), bandwidth: eta })
}

fn kernel(distances: &DMatrix<f64>, eta: f64) -> DMatrix<f64> {
    distances.map(|g| (-g * g / (2.0 * eta)).exp())
}

/// Rows of the spectral embedding: the generalized eigenvectors of
/// `(V - S) y = lambda V y` for the two smallest eigenvalues.
pub fn spectral_embedding(similarity: &SimilarityMatrix) -> Result<Vec<[f64; 2]>> {
    let s = &similarity.entries;
    let n = s.nrows();
    let degree: Vec<f64> = s.row_iter().map(|r| r.sum()).collect();
    if degree.iter().any(|d| !(*d > 0.0)) {
        return Err(Error::Numeric("zero degree in similarity matrix".into()));
    }
    let inv_sqrt: Vec<f64> = degree.iter().map(|d| 1.0 / d.sqrt()).collect();
    // V^{-1/2} S V^{-1/2}: its largest eigenvalues are one minus the smallest
    // of the generalized Laplacian problem, with the same eigenvectors.
    let normalized = DMatrix::from_fn(n, n, |i, j| s[(i, j)] * inv_sqrt[i] * inv_sqrt[j]);
    let eig = SymmetricEigen::try_new(normalized, 1e-12, 0)
        .ok_or_else(|| Error::Numeric("symmetric eigen-solver did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let first = eig.eigenvectors.column(order[0]);
    let second = eig.eigenvectors.column(order[1]);
    Ok((0..n).map(|i| [first[i] * inv_sqrt[i], second[i] * inv_sqrt[i]]).collect())
}

/// Two-cluster spectral clustering; returns a 0/1 cluster id per block.
pub fn spectral_cluster_two_state(similarity: &SimilarityMatrix, seed: u64) -> Result<Vec<u8>> {
    if similarity.entries.nrows() < 4 {
        return Err(Error::DegenerateSimilarity("need at least 4 blocks to cluster".into()));
    }
    let embedding = spectral_embedding(similarity)?;
    kmeans_two(&embedding, seed)
}

fn sq_dist(a: &[f64; 2], b: &[f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

/// k-means with k = 2: k-means++ seeding, best of 20 restarts by
/// within-cluster sum of squares.
pub fn kmeans_two(points: &[[f64; 2]], seed: u64) -> Result<Vec<u8>> {
    let n = points.len();
    let mut best: Option<(f64, Vec<u8>)> = None;
    for restart in 0..KMEANS_RESTARTS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(restart as u64);
        let c0 = points[rng.random_range(0..n)];
        let weights: Vec<f64> = points.iter().map(|p| sq_dist(p, &c0)).collect();
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            continue;
        }
        let mut target = rng.random::<f64>() * total;
        let mut pick = n - 1;
        for (i, w) in weights.iter().enumerate() {
            if target < *w {
                pick = i;
                break;
            }
            target -= w;
        }
        let mut centres = [c0, points[pick]];
        let mut assign = vec![0u8; n];
        let mut ok = true;
        for _ in 0..KMEANS_MAX_ITER {
            let mut changed = false;
            for (a, p) in assign.iter_mut().zip(points) {
                let next = u8::from(sq_dist(p, &centres[1]) < sq_dist(p, &centres[0]));
                changed |= next != *a;
                *a = next;
            }
            let mut sums = [[0.0; 2]; 2];
            let mut counts = [0usize; 2];
            for (a, p) in assign.iter().zip(points) {
                let k = *a as usize;
                sums[k][0] += p[0];
                sums[k][1] += p[1];
                counts[k] += 1;
            }
            if counts.contains(&0) {
                ok = false;
                break;
            }
            for k in 0..2 {
                centres[k] = [sums[k][0] / counts[k] as f64, sums[k][1] / counts[k] as f64];
            }
            if !changed {
                break;
            }
        }
        if !ok {
            continue;
        }
        let inertia: f64 = assign.iter().zip(points).map(|(a, p)| sq_dist(p, &centres[*a as usize])).sum();
        if best.as_ref().is_none_or(|(b, _)| inertia < *b) {
            best = Some((inertia, assign));
        }
    }
    best.map(|(_, a)| a).ok_or(Error::EmptyCluster { restarts: KMEANS_RESTARTS })
}

/// Sum of per-channel sample variances in each block.
pub fn block_total_variance(series: &MultiChannelSeries, spec: &BlockSpec) -> Vec<f64> {
    (0..spec.n_blocks)
        .map(|b| {
            (0..series.n_channels())
                .map(|j| {
                    let x = &series.channel(j)[spec.range(b)];
                    let mean = x.iter().sum::<f64>() / x.len() as f64;
                    x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)
                })
                .sum()
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct BurstLabeling {
    pub labels: PhaseLabels,
    /// Whether the burst cluster is also the smaller one.
    pub count_rule_agrees: bool,
}

/// Maps cluster ids to phases: the cluster with the larger mean block
/// variance is the burst phase.
pub fn label_by_variance(assignment: &[u8], variances: &[f64]) -> Result<BurstLabeling> {
    let mut sums = [0.0; 2];
    let mut counts = [0usize; 2];
    for (&a, &v) in assignment.iter().zip(variances) {
        if a > 1 {
            return Err(Error::InvalidSeries(format!("cluster id {a} is not 0 or 1")));
        }
        sums[a as usize] += v;
        counts[a as usize] += 1;
    }
    if counts.contains(&0) {
        return Err(Error::EmptyCluster { restarts: 0 });
    }
    let means = [sums[0] / counts[0] as f64, sums[1] / counts[1] as f64];
    let burst_cluster = u8::from(means[1] > means[0]);
    let smaller = u8::from(counts[1] < counts[0]);
    let count_rule_agrees = counts[0] == counts[1] || smaller == burst_cluster;
    if !count_rule_agrees {
        log::warn!(
            "burst cluster (mean variance {:.4}) is the larger cluster ({} of {} blocks)",
            means[burst_cluster as usize],
            counts[burst_cluster as usize],
            assignment.len()
        );
    }
    let labels = assignment.iter().map(|&a| u8::from(a == burst_cluster)).collect();
    Ok(BurstLabeling { labels: PhaseLabels::new(labels)?, count_rule_agrees })
}

pub fn assign_burst_label(assignment: &[u8], series: &MultiChannelSeries, spec: &BlockSpec) -> Result<BurstLabeling> {
    label_by_variance(assignment, &block_total_variance(series, spec))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HoldoutAccuracy {
    pub train_fraction: f64,
    /// Test-set true positive rate (burst = positive).
    pub sensitivity: f64,
    /// Test-set true negative rate.
    pub specificity: f64,
    /// Test-set accuracy.
    pub accuracy: f64,
    /// Accuracy over training and test blocks combined.
    pub overall_accuracy: f64,
}

fn rates(predicted: &[u8], reference: &[u8]) -> (f64, f64, f64) {
    let mut tp = 0usize;
    let mut tn = 0usize;
    let mut pos = 0usize;
    let mut neg = 0usize;
    for (&p, &r) in predicted.iter().zip(reference) {
        if r == 1 {
            pos += 1;
            tp += usize::from(p == 1);
        } else {
            neg += 1;
            tn += usize::from(p == 0);
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 1.0 } else { a as f64 / b as f64 };
    (ratio(tp, pos), ratio(tn, neg), ratio(tp + tn, pos + neg))
}

/// Majority label among the `k` training blocks most similar to a test block.
pub fn majority_vote(similarities: &[f64], train_labels: &[u8], k: usize) -> u8 {
    let mut order: Vec<usize> = (0..similarities.len()).collect();
    order.sort_by(|&a, &b| similarities[b].total_cmp(&similarities[a]).then(a.cmp(&b)));
    let votes: usize = order.iter().take(k).map(|&i| train_labels[i] as usize).sum();
    u8::from(2 * votes > k.min(order.len()))
}

/// 70/30 holdout check from a precomputed distance matrix: cluster the first
/// 70% of blocks, predict the rest by 5-nearest-neighbour vote on similarity
/// and score against `reference`.
pub fn holdout_from_distances(
    distances: &DMatrix<f64>,
    variances: &[f64],
    reference: &PhaseLabels,
    seed: u64,
) -> Result<HoldoutAccuracy> {
    let n = distances.nrows();
    if n < 10 {
        return Err(Error::DegenerateSimilarity(format!("holdout needs at least 10 blocks, got {n}")));
    }
    let n_train = (7 * n) / 10;
    if n_train < HOLDOUT_NEIGHBOURS {
        return Err(Error::DegenerateSimilarity("fewer than 5 training blocks".into()));
    }
    let train = distances.view((0, 0), (n_train, n_train)).into_owned();
    let similarity = similarity_matrix(&train)?;
    let assignment = spectral_cluster_two_state(&similarity, seed)?;
    let train_labels = label_by_variance(&assignment, &variances[..n_train])?.labels;

    let predicted: Vec<u8> = (n_train..n)
        .map(|b| {
            let sims: Vec<f64> = (0..n_train)
                .map(|t| (-distances[(b, t)].powi(2) / (2.0 * similarity.bandwidth)).exp())
                .collect();
            majority_vote(&sims, train_labels.labels(), HOLDOUT_NEIGHBOURS)
        })
        .collect();
    let (sensitivity, specificity, accuracy) = rates(&predicted, &reference.labels()[n_train..]);
    let combined: Vec<u8> = train_labels.labels().iter().copied().chain(predicted).collect();
    let (_, _, overall_accuracy) = rates(&combined, reference.labels());
    Ok(HoldoutAccuracy {
        train_fraction: n_train as f64 / n as f64,
        sensitivity,
        specificity,
        accuracy,
        overall_accuracy,
    })
}

/// Result of labelling all blocks of a series.
#[derive(Debug, Clone)]
pub struct PhaseClustering {
    pub labels: PhaseLabels,
    pub bandwidth: f64,
    pub count_rule_agrees: bool,
    pub distances: DMatrix<f64>,
    pub variances: Vec<f64>,
}

impl PhaseClustering {
    /// Holdout check against the full-data labels, or against `truth`.
    pub fn holdout(&self, truth: Option<&PhaseLabels>, seed: u64) -> Result<HoldoutAccuracy> {
        holdout_from_distances(&self.distances, &self.variances, truth.unwrap_or(&self.labels), seed)
    }
}

/// Full labelling path: covariances, distances, similarity, spectral
/// clustering and burst assignment.
pub fn cluster_phases(
    series: &MultiChannelSeries,
    spec: &BlockSpec,
    band: Option<&BandDefinition>,
    seed: u64,
) -> Result<PhaseClustering> {
    if spec.n_blocks < 4 {
        return Err(Error::DegenerateSimilarity("need at least 4 blocks to cluster".into()));
    }
    let covariances = block_covariances(series, spec, band)?;
    let distances = distance_matrix(&covariances)?;
    let similarity = similarity_matrix(&distances)?;
    let assignment = spectral_cluster_two_state(&similarity, seed)?;
    let variances = block_total_variance(series, spec);
    let labelling = label_by_variance(&assignment, &variances)?;
    Ok(PhaseClustering {
        labels: labelling.labels,
        bandwidth: similarity.bandwidth,
        count_rule_agrees: labelling.count_rule_agrees,
        distances,
        variances,
    })
}

/// `holdout_accuracy` on a raw series, scored against the full-data
/// clustering (or `truth` when supplied).
pub fn holdout_accuracy(
    series: &MultiChannelSeries,
    spec: &BlockSpec,
    seed: u64,
    truth: Option<&PhaseLabels>,
) -> Result<HoldoutAccuracy> {
    cluster_phases(series, spec, None, seed)?.holdout(truth, seed)
}
