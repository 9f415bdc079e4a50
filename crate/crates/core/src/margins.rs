//! Phase-wise empirical transforms to standard Laplace margins.

use serde::{Deserialize, Serialize};

use crate::clustering::PhaseLabels;
use crate::error::{Error, Result};
use crate::spectral::PeriodogramTensor;

/// Minimum blocks per phase for an empirical marginal transform.
pub const MIN_PHASE_BLOCKS: usize = 20;
/// Minimum points on each side of the bulk/tail split.
pub const MIN_SIDE_POINTS: usize = 10;

/// Standard Laplace distribution function.
pub fn laplace_cdf(x: f64) -> f64 {
    if x < 0.0 {
        0.5 * x.exp()
    } else {
        1.0 - 0.5 * (-x).exp()
    }
}

/// Standard Laplace quantile function.
pub fn laplace_quantile(u: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::InvalidProbability(u));
    }
    Ok(if u <= 0.5 { (2.0 * u).ln() } else { -(2.0 * (1.0 - u)).ln() })
}

/// 1-based ranks with ties sharing their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Maps a sample to Laplace scale through its own empirical distribution with
/// plotting position `r / (n + 1)`.
pub fn empirical_laplace(values: &[f64]) -> Vec<f64> {
    let n = values.len() as f64;
    average_ranks(values)
        .into_iter()
        .map(|r| laplace_quantile(r / (n + 1.0)).expect("plotting position lies in (0,1)"))
        .collect()
}

/// One band's block energies on Laplace scale, `[B][p]`, with the phase
/// labels used for the transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaplaceSample {
    values: Vec<f64>,
    n_channels: usize,
    labels: PhaseLabels,
}

impl LaplaceSample {
    pub fn new(values: Vec<f64>, n_channels: usize, labels: PhaseLabels) -> Result<Self> {
        if n_channels == 0 || values.len() != n_channels * labels.len() {
            return Err(Error::InvalidSeries(format!(
                "{} values do not form {} blocks of {n_channels} channels",
                values.len(),
                labels.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite Laplace value".into()));
        }
        Ok(Self { values, n_channels, labels })
    }

    pub fn n_blocks(&self) -> usize {
        self.labels.len()
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn labels(&self) -> &PhaseLabels {
        &self.labels
    }

    pub fn get(&self, b: usize, j: usize) -> f64 {
        self.values[b * self.n_channels + j]
    }

    pub fn row(&self, b: usize) -> &[f64] {
        &self.values[b * self.n_channels..(b + 1) * self.n_channels]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_blocks()).map(|b| self.get(b, j)).collect()
    }
}

/// Transforms per-channel columns (each of length B) to Laplace scale,
/// separately within each phase.
pub fn columns_to_laplace(columns: &[Vec<f64>], labels: &PhaseLabels) -> Result<LaplaceSample> {
    let n_blocks = labels.len();
    let p = columns.len();
    if columns.iter().any(|c| c.len() != n_blocks) {
        return Err(Error::InvalidSeries("column length differs from number of labels".into()));
    }
    let phases = [labels.phase_set(0), labels.phase_set(1)];
    for (d, set) in phases.iter().enumerate() {
        if set.len() < MIN_PHASE_BLOCKS {
            return Err(Error::InsufficientPhaseData {
                phase: d as u8,
                count: set.len(),
                required: MIN_PHASE_BLOCKS,
            });
        }
    }
    let mut values = vec![0.0; n_blocks * p];
    for (j, column) in columns.iter().enumerate() {
        for set in &phases {
            let sub: Vec<f64> = set.iter().map(|&b| column[b]).collect();
            for (&b, y) in set.iter().zip(empirical_laplace(&sub)) {
                values[b * p + j] = y;
            }
        }
    }
    LaplaceSample::new(values, p, labels.clone())
}

/// Laplace-scale sample for one band of a periodogram tensor.
pub fn to_laplace_band(periodograms: &PeriodogramTensor, labels: &PhaseLabels, band: usize) -> Result<LaplaceSample> {
    if labels.len() != periodograms.n_blocks() {
        return Err(Error::InvalidSeries(format!(
            "{} labels for {} blocks",
            labels.len(),
            periodograms.n_blocks()
        )));
    }
    let columns: Vec<Vec<f64>> = (0..periodograms.n_channels()).map(|j| periodograms.column(j, band)).collect();
    columns_to_laplace(&columns, labels)
}

/// Laplace-scale samples for every band.
pub fn to_laplace(periodograms: &PeriodogramTensor, labels: &PhaseLabels) -> Result<Vec<LaplaceSample>> {
    (0..periodograms.n_bands()).map(|l| to_laplace_band(periodograms, labels, l)).collect()
}

pub(crate) fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    let denom = (sxx * syy).sqrt();
    if denom > 0.0 {
        sxy / denom
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailBulkCorrelation {
    pub rho: f64,
    /// Correlation over pairs whose conditioning score is at most the split.
    pub rho_bulk: f64,
    /// Correlation over pairs whose conditioning score exceeds the split.
    pub rho_tail: f64,
}

/// Overall, bulk and tail Pearson correlations, splitting on the rank score
/// of the first (conditioning) column.
pub fn tail_bulk_correlation(x: &[f64], y: &[f64], u_split: f64) -> Result<TailBulkCorrelation> {
    if !(u_split > 0.0 && u_split < 1.0) {
        return Err(Error::InvalidProbability(u_split));
    }
    if x.len() != y.len() {
        return Err(Error::InvalidSeries("columns differ in length".into()));
    }
    let n = x.len() as f64;
    let scores: Vec<f64> = average_ranks(x).into_iter().map(|r| r / (n + 1.0)).collect();
    let (mut bx, mut by, mut tx, mut ty) = (vec![], vec![], vec![], vec![]);
    for ((&u, &a), &b) in scores.iter().zip(x).zip(y) {
        if u <= u_split {
            bx.push(a);
            by.push(b);
        } else {
            tx.push(a);
            ty.push(b);
        }
    }
    let smallest = bx.len().min(tx.len());
    if smallest < MIN_SIDE_POINTS {
        return Err(Error::InsufficientTailData { count: smallest, required: MIN_SIDE_POINTS });
    }
    Ok(TailBulkCorrelation { rho: pearson(x, y), rho_bulk: pearson(&bx, &by), rho_tail: pearson(&tx, &ty) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn quantile_spot_values() {
        assert_eq!(laplace_quantile(0.5).unwrap(), 0.0);
        assert_relative_eq!(laplace_quantile(0.9).unwrap(), 5.0f64.ln(), epsilon = 1e-15);
        assert_relative_eq!(laplace_quantile(0.1).unwrap(), 0.2f64.ln(), epsilon = 1e-15);
        for u in [0.0, 1.0, -0.1, f64::NAN] {
            assert!(laplace_quantile(u).is_err());
        }
    }

    #[test]
    fn cdf_inverts_quantile() {
        for i in 1..100 {
            let u = i as f64 / 100.0;
            assert_relative_eq!(laplace_cdf(laplace_quantile(u).unwrap()), u, epsilon = 1e-14);
        }
    }

    #[test]
    fn ties_share_average_rank() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn smallest_of_nine() {
        let y = empirical_laplace(&[5.0, 1.0, 9.0, 7.0, 3.0, 2.0, 8.0, 4.0, 6.0]);
        assert_relative_eq!(y[1], 0.2f64.ln(), epsilon = 1e-15);
        assert_relative_eq!(y[2], -(0.2f64.ln()), epsilon = 1e-15);
    }

    #[test]
    fn phase_size_checked() {
        let labels = PhaseLabels::new((0..30).map(|b| u8::from(b < 5)).collect()).unwrap();
        let col: Vec<f64> = (0..30).map(|b| b as f64).collect();
        assert!(matches!(
            columns_to_laplace(&[col.clone(), col], &labels),
            Err(Error::InsufficientPhaseData { phase: 1, count: 5, .. })
        ));
    }

    #[test]
    fn identical_columns_correlate_fully() {
        let x: Vec<f64> = (0..200).map(|i| ((i * 37) % 200) as f64).collect();
        let c = tail_bulk_correlation(&x, &x, 0.9).unwrap();
        assert_relative_eq!(c.rho, 1.0, epsilon = 1e-12);
        assert_relative_eq!(c.rho_bulk, 1.0, epsilon = 1e-12);
        assert_relative_eq!(c.rho_tail, 1.0, epsilon = 1e-12);
        assert!(matches!(
            tail_bulk_correlation(&x[..50], &x[..50], 0.9),
            Err(Error::InsufficientTailData { .. })
        ));
    }

    proptest! {
        #[test]
        fn transform_is_rank_invariant(raw in proptest::collection::vec(0.0f64..100.0, 60)) {
            let labels = PhaseLabels::new((0..60).map(|b| u8::from(b % 3 == 0)).collect()).unwrap();
            let monotone: Vec<f64> = raw.iter().map(|v| (v + 1.0).ln() * 3.0 + v.powi(3)).collect();
            let a = columns_to_laplace(&[raw.clone(), raw.clone()], &labels).unwrap();
            let b = columns_to_laplace(&[monotone, raw], &labels).unwrap();
            prop_assert_eq!(a.column(0), b.column(0));
        }
    }
}
