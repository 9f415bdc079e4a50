//! Two-stage bootstrap, percentile intervals and false coverage-statement
//! rate adjustment.
//!
//! Stage one redraws `B` blocks: a phase with probability `|B_d| / B`, then a
//! block uniformly within it. Stage two applies a stationary bootstrap inside
//! every drawn block, with the same random segments for all channels.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::clustering::PhaseLabels;
use crate::error::{Error, Result};
use crate::series::MultiChannelSeries;
use crate::spectral::BlockSpec;

pub const MIN_REPLICATES: usize = 50;
/// Largest tolerated fraction of failed replicates.
pub const MAX_DROP_FRACTION: f64 = 0.1;

/// Mean segment length of the within-block stationary bootstrap.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum HStar {
    #[default]
    Auto,
    Fixed(f64),
}

impl Serialize for HStar {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            HStar::Auto => s.serialize_str("auto"),
            HStar::Fixed(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for HStar {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Number(v) if v > 0.0 => Ok(HStar::Fixed(v)),
            Raw::Number(v) => Err(serde::de::Error::custom(format!("h_star {v} must be positive"))),
            Raw::Text(t) if t == "auto" => Ok(HStar::Auto),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("h_star must be a number or \"auto\", got {t:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub n_replicates: usize,
    pub h_star: HStar,
    pub alpha: f64,
    pub seed: u64,
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_replicates < MIN_REPLICATES {
            return Err(Error::InvalidConfig(format!(
                "need at least {MIN_REPLICATES} bootstrap replicates, got {}",
                self.n_replicates
            )));
        }
        if !(self.alpha > 0.0 && self.alpha <= 0.5) {
            return Err(Error::InvalidConfig(format!("alpha {} outside (0, 0.5]", self.alpha)));
        }
        if let HStar::Fixed(h) = self.h_star {
            if !(h >= 1.0) {
                return Err(Error::InvalidConfig(format!("h_star {h} must be at least 1")));
            }
        }
        Ok(())
    }
}

/// One stage-one draw: a source block and the phase it was drawn for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockDraw {
    pub block: usize,
    pub phase: u8,
}

/// Stage one: `B` phase-weighted draws with replacement.
pub fn resample_blocks<R: Rng + ?Sized>(labels: &PhaseLabels, rng: &mut R) -> Result<Vec<BlockDraw>> {
    let sets = [labels.nonburst_set(), labels.burst_set()];
    for (d, set) in sets.iter().enumerate() {
        if set.is_empty() {
            return Err(Error::EmptyPhase(d as u8));
        }
    }
    let n = labels.len();
    let p1 = sets[1].len() as f64 / n as f64;
    Ok((0..n)
        .map(|_| {
            let phase = u8::from(rng.random::<f64>() < p1);
            let set = &sets[phase as usize];
            BlockDraw { block: set[rng.random_range(0..set.len())], phase }
        })
        .collect())
}

/// Segment length on `{1, 2, ...}` with mean `h_star`.
pub fn geometric_length<R: Rng + ?Sized>(h_star: f64, rng: &mut R) -> usize {
    let g = Geometric::new(1.0 / h_star.max(1.0)).expect("success probability in (0, 1]");
    g.sample(rng) as usize + 1
}

/// Stage two: concatenates circular segments with uniform starts and
/// geometric lengths until `L` samples are filled; all channels share the
/// segments.
pub fn stationary_bootstrap_within<R: Rng + ?Sized>(block: &[&[f64]], h_star: f64, rng: &mut R) -> Result<Vec<Vec<f64>>> {
    let len = block.first().map_or(0, |c| c.len());
    if len == 0 || block.iter().any(|c| c.len() != len) {
        return Err(Error::InvalidSeries("block channels must be nonempty and equally long".into()));
    }
    if !(h_star >= 1.0 && h_star <= len as f64) {
        return Err(Error::InvalidConfig(format!("h_star {h_star} outside [1, {len}]")));
    }
    let lengths = Geometric::new(1.0 / h_star).expect("h_star >= 1");
    let mut out: Vec<Vec<f64>> = block.iter().map(|_| Vec::with_capacity(len)).collect();
    let mut filled = 0;
    while filled < len {
        let start = rng.random_range(0..len);
        let seg = (lengths.sample(rng) as usize + 1).min(len - filled);
        for (dst, src) in out.iter_mut().zip(block) {
            // Segments wrap past the end of the block.
            let mut pos = start;
            let mut left = seg;
            while left > 0 {
                let take = left.min(len - pos);
                dst.extend_from_slice(&src[pos..pos + take]);
                left -= take;
                pos = 0;
            }
        }
        filled += seg;
    }
    Ok(out)
}

/// Within-block sample autocorrelation at lags `1..=max_lag`.
fn block_acf(x: &[f64], max_lag: usize) -> Vec<f64> {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let c: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let c0: f64 = c.iter().map(|v| v * v).sum();
    (1..=max_lag)
        .map(|h| {
            if c0 > 0.0 && h < n {
                c[..n - h].iter().zip(&c[h..]).map(|(a, b)| a * b).sum::<f64>() / c0
            } else {
                0.0
            }
        })
        .collect()
}

const ACF_RUN: usize = 5;

/// First lag whose |ACF| and the next four stay below `band`; `None` if no
/// such run starts within `acf`.
pub fn first_quiet_lag(acf: &[f64], band: f64) -> Option<usize> {
    (0..acf.len().saturating_sub(ACF_RUN - 1))
        .find(|&i| acf[i..i + ACF_RUN].iter().all(|r| r.abs() < band))
        .map(|i| i + 1)
}

/// Mean segment length from the decay of block-averaged autocorrelations:
/// median over channels, clamped to `[2, L/4]`.
pub fn auto_h_star(series: &MultiChannelSeries, spec: &BlockSpec) -> f64 {
    let len = spec.block_length;
    let cap = (len / 4).max(2);
    let max_lag = (cap + ACF_RUN).min(len - 1);
    let band = 1.96 / (len as f64).sqrt();
    let mut per_channel: Vec<f64> = (0..series.n_channels())
        .map(|j| {
            let mut acf = vec![0.0; max_lag];
            for b in 0..spec.n_blocks {
                for (acc, r) in acf.iter_mut().zip(block_acf(&series.channel(j)[spec.range(b)], max_lag)) {
                    *acc += r;
                }
            }
            acf.iter_mut().for_each(|r| *r /= spec.n_blocks as f64);
            first_quiet_lag(&acf, band).unwrap_or(cap) as f64
        })
        .collect();
    per_channel.sort_by(|a, b| a.total_cmp(b));
    let n = per_channel.len();
    let median = if n % 2 == 1 { per_channel[n / 2] } else { 0.5 * (per_channel[n / 2 - 1] + per_channel[n / 2]) };
    median.clamp(2.0, cap as f64)
}

/// One bootstrap dataset: resampled blocks (`[B][p][L]`) with inherited labels.
#[derive(Debug, Clone)]
pub struct Replicate {
    pub index: usize,
    pub blocks: Vec<Vec<Vec<f64>>>,
    pub labels: PhaseLabels,
    pub draws: Vec<BlockDraw>,
}

impl Replicate {
    /// Concatenates the resampled blocks into a series with the template's
    /// channel names and sampling rate.
    pub fn to_series(&self, template: &MultiChannelSeries) -> Result<MultiChannelSeries> {
        let p = template.n_channels();
        let values = (0..p)
            .map(|j| self.blocks.iter().flat_map(|block| block[j].iter().copied()).collect())
            .collect();
        MultiChannelSeries::new(values, template.sampling_rate(), template.channel_names().to_vec())
    }
}

/// Builds replicate `index` deterministically from the master seed.
pub fn build_replicate(
    series: &MultiChannelSeries,
    spec: &BlockSpec,
    labels: &PhaseLabels,
    h_star: f64,
    seed: u64,
    index: usize,
) -> Result<Replicate> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    let draws = resample_blocks(labels, &mut rng)?;
    let blocks = draws
        .iter()
        .map(|draw| {
            let channels: Vec<&[f64]> = (0..series.n_channels())
                .map(|j| &series.channel(j)[spec.range(draw.block)])
                .collect();
            stationary_bootstrap_within(&channels, h_star, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    let labels = PhaseLabels::new(draws.iter().map(|d| d.phase).collect())?;
    Ok(Replicate { index, blocks, labels, draws })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapDistribution {
    /// Estimates per successful replicate, in replicate order.
    pub estimates: Vec<Vec<f64>>,
    pub requested: usize,
    pub dropped: usize,
    pub h_star: f64,
}

impl BootstrapDistribution {
    /// All replicate values of parameter `k`.
    pub fn parameter(&self, k: usize) -> Vec<f64> {
        self.estimates.iter().map(|row| row[k]).collect()
    }
}

/// Runs `refit` on every replicate. Failed replicates are dropped; more than
/// 10% failures is an error.
pub fn bootstrap_distribution<F>(
    series: &MultiChannelSeries,
    spec: &BlockSpec,
    labels: &PhaseLabels,
    config: &BootstrapConfig,
    refit: F,
) -> Result<BootstrapDistribution>
where
    F: Fn(&Replicate) -> Result<Vec<f64>> + Sync,
{
    config.validate()?;
    let h_star = match config.h_star {
        HStar::Auto => auto_h_star(series, spec),
        HStar::Fixed(h) => h,
    };
    let outcomes: Vec<Result<Vec<f64>>> = (0..config.n_replicates)
        .into_par_iter()
        .map(|r| {
            let replicate = build_replicate(series, spec, labels, h_star, config.seed, r)?;
            refit(&replicate)
        })
        .collect();
    let mut estimates = Vec::with_capacity(outcomes.len());
    let mut dropped = 0;
    for outcome in outcomes {
        match outcome {
            Ok(v) => estimates.push(v),
            Err(e) => {
                log::debug!("bootstrap replicate dropped: {e}");
                dropped += 1;
            }
        }
    }
    if dropped as f64 > MAX_DROP_FRACTION * config.n_replicates as f64 {
        return Err(Error::BootstrapUnstable { dropped, requested: config.n_replicates });
    }
    Ok(BootstrapDistribution { estimates, requested: config.n_replicates, dropped, h_star })
}

/// Linear-interpolation sample quantile (`h = (n - 1) p`) of sorted data.
pub fn sample_quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Two-sided percentile interval at confidence `level`.
pub fn percentile_ci(samples: &[f64], level: f64) -> Result<(f64, f64)> {
    if samples.len() < MIN_REPLICATES {
        return Err(Error::InvalidConfig(format!(
            "percentile interval needs at least {MIN_REPLICATES} samples, got {}",
            samples.len()
        )));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidProbability(level));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let tail = (1.0 - level) / 2.0;
    Ok((sample_quantile(&sorted, tail), sample_quantile(&sorted, 1.0 - tail)))
}

/// Two-sided bootstrap p-value for a zero parameter, floored at `1/n`.
pub fn sign_p_value(samples: &[f64]) -> f64 {
    let n = samples.len() as f64;
    let below = samples.iter().filter(|&&s| s <= 0.0).count() as f64 / n;
    let above = samples.iter().filter(|&&s| s >= 0.0).count() as f64 / n;
    (2.0 * below.min(above)).clamp(1.0 / n, 1.0)
}

/// Number of Benjamini–Hochberg rejections at level `alpha`.
pub fn benjamini_hochberg(p_values: &[f64], alpha: f64) -> usize {
    let m = p_values.len();
    let mut sorted = p_values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    sorted
        .iter()
        .enumerate()
        .filter(|(k, &p)| p <= (k + 1) as f64 * alpha / m as f64)
        .map(|(k, _)| k + 1)
        .max()
        .unwrap_or(0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Positive,
    Negative,
    Zero,
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sign::Positive => "+",
            Sign::Negative => "-",
            Sign::Zero => "0",
        })
    }
}

impl Serialize for Sign {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Sign {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match String::deserialize(d)?.as_str() {
            "+" => Ok(Sign::Positive),
            "-" => Ok(Sign::Negative),
            "0" => Ok(Sign::Zero),
            other => Err(serde::de::Error::custom(format!("unknown sign {other:?}"))),
        }
    }
}

/// Bootstrap sample of one tested parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSamples {
    pub estimate: f64,
    pub samples: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    /// Confidence level this interval was built at.
    pub level: f64,
    pub p_value: f64,
    pub selected: bool,
    pub sign: Sign,
    /// The percentile interval does not contain the point estimate.
    pub excludes_estimate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalSet {
    pub intervals: Vec<Interval>,
    pub alpha: f64,
    /// Nominal confidence `1 - alpha`.
    pub nominal_level: f64,
    /// FCR-adjusted confidence `1 - R alpha / m` for selected parameters.
    pub adjusted_level: f64,
    pub n_selected: usize,
}

/// BH selection on sign-crossing p-values, then FCR-adjusted percentile
/// intervals for the selected parameters and nominal ones for the rest.
pub fn fcr_adjust(parameters: &[ParameterSamples], alpha: f64) -> Result<IntervalSet> {
    if parameters.is_empty() {
        return Err(Error::InvalidConfig("FCR adjustment needs at least one parameter".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidProbability(alpha));
    }
    let m = parameters.len();
    let p_values: Vec<f64> = parameters.iter().map(|p| sign_p_value(&p.samples)).collect();
    let n_selected = benjamini_hochberg(&p_values, alpha);
    let cutoff = if n_selected == 0 {
        f64::NEG_INFINITY
    } else {
        let mut sorted = p_values.clone();
        sorted.sort_by(|a, b| a.total_cmp(b));
        sorted[n_selected - 1]
    };
    let nominal_level = 1.0 - alpha;
    let adjusted_level = 1.0 - n_selected as f64 * alpha / m as f64;
    // Ties at the cutoff are all selected; BH guarantees they are all rejected.
    let intervals = parameters
        .iter()
        .zip(&p_values)
        .map(|(param, &p)| {
            let selected = p <= cutoff;
            let level = if selected { adjusted_level } else { nominal_level };
            let (lower, upper) = percentile_ci(&param.samples, level)?;
            let excludes_zero = lower > 0.0 || upper < 0.0;
            let sign = if !(selected && excludes_zero) || param.estimate == 0.0 {
                Sign::Zero
            } else if param.estimate > 0.0 {
                Sign::Positive
            } else {
                Sign::Negative
            };
            Ok(Interval {
                estimate: param.estimate,
                lower,
                upper,
                level,
                p_value: p,
                selected,
                sign,
                excludes_estimate: param.estimate < lower || param.estimate > upper,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(IntervalSet { intervals, alpha, nominal_level, adjusted_level, n_selected })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn percentile_interpolation() {
        let s: Vec<f64> = (1..=100).map(f64::from).collect();
        let (lo, hi) = percentile_ci(&s, 0.90).unwrap();
        assert_relative_eq!(lo, 5.95, epsilon = 1e-12);
        assert_relative_eq!(hi, 95.05, epsilon = 1e-12);
        let (lo99, hi99) = percentile_ci(&s, 0.99).unwrap();
        assert!(lo99 <= lo && hi99 >= hi);
        assert_eq!(percentile_ci(&[2.5; 60], 0.95).unwrap(), (2.5, 2.5));
        assert!(percentile_ci(&s[..10], 0.9).is_err());
    }

    #[test]
    fn all_burst_labels_draw_only_burst() {
        let labels = PhaseLabels::new(vec![1; 10]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(resample_blocks(&labels, &mut rng), Err(Error::EmptyPhase(0))));
    }

    #[test]
    fn draws_respect_phase_sets() {
        let labels = PhaseLabels::new((0..200).map(|b| u8::from(b % 3 == 0)).collect()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for d in resample_blocks(&labels, &mut rng).unwrap() {
            assert_eq!(labels.label(d.block), d.phase);
        }
    }

    #[test]
    fn identity_path_when_segment_covers_block() {
        let x: Vec<f64> = (0..16).map(f64::from).collect();
        // With h = L the first segment is long with high probability; find a
        // seed whose first start is 0 and check the copy is exact.
        for seed in 0..500 {
            let mut probe = ChaCha8Rng::seed_from_u64(seed);
            let start = probe.random_range(0..16usize);
            let seg = geometric_length(16.0, &mut probe);
            if start == 0 && seg >= 16 {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let out = stationary_bootstrap_within(&[&x, &x], 16.0, &mut rng).unwrap();
                assert_eq!(out[0], x);
                assert_eq!(out[1], x);
                return;
            }
        }
        panic!("no seed produced the identity path");
    }

    #[test]
    fn output_shape_and_bounds() {
        let x: Vec<f64> = (0..50).map(f64::from).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for h in [1.0, 3.5, 50.0] {
            let out = stationary_bootstrap_within(&[&x, &x, &x], h, &mut rng).unwrap();
            assert_eq!(out.len(), 3);
            assert!(out.iter().all(|c| c.len() == 50));
            assert_eq!(out[0], out[2]);
        }
        assert!(stationary_bootstrap_within(&[&x], 0.5, &mut rng).is_err());
        assert!(stationary_bootstrap_within(&[&x], 51.0, &mut rng).is_err());
    }

    #[test]
    fn quiet_lag_detection() {
        let acf = [0.9, 0.5, 0.05, 0.01, 0.02, 0.0, 0.01, 0.3];
        assert_eq!(first_quiet_lag(&acf, 0.1), Some(3));
        assert_eq!(first_quiet_lag(&[0.5; 10], 0.1), None);
    }

    #[test]
    fn fcr_formula() {
        // Two parameters with all mass away from zero, four straddling it.
        let mut params = vec![];
        for k in 0..6 {
            let samples: Vec<f64> = if k < 2 {
                (0..200).map(|i| 1.0 + i as f64 / 200.0).collect()
            } else {
                (0..200).map(|i| -1.0 + i as f64 / 100.0).collect()
            };
            params.push(ParameterSamples { estimate: samples[100], samples });
        }
        let set = fcr_adjust(&params, 0.05).unwrap();
        assert_eq!(set.n_selected, 2);
        assert_relative_eq!(set.adjusted_level, 1.0 - 2.0 * 0.05 / 6.0, epsilon = 1e-15);
        assert_relative_eq!(set.adjusted_level, 0.983333, epsilon = 1e-6);
        assert!(set.intervals[..2].iter().all(|i| i.selected && i.sign == Sign::Positive));
        assert!(set.intervals[2..].iter().all(|i| !i.selected && i.sign == Sign::Zero));
        assert_relative_eq!(set.intervals[0].p_value, 1.0 / 200.0);
    }

    #[test]
    fn nothing_selected() {
        let samples: Vec<f64> = (0..100).map(|i| i as f64 - 50.0).collect();
        let set = fcr_adjust(&[ParameterSamples { estimate: 0.0, samples }], 0.05).unwrap();
        assert_eq!(set.n_selected, 0);
        assert!(set.intervals.iter().all(|i| i.sign == Sign::Zero && !i.selected));
        assert_eq!(set.adjusted_level, 1.0);
    }

    #[test]
    fn h_star_serde() {
        assert_eq!(serde_json::from_str::<HStar>("\"auto\"").unwrap(), HStar::Auto);
        assert_eq!(serde_json::from_str::<HStar>("4.5").unwrap(), HStar::Fixed(4.5));
        assert!(serde_json::from_str::<HStar>("\"often\"").is_err());
        assert!(serde_json::from_str::<HStar>("-1").is_err());
        assert_eq!(serde_json::to_string(&HStar::Auto).unwrap(), "\"auto\"");
    }

    fn series_of(values: Vec<f64>) -> (MultiChannelSeries, BlockSpec) {
        let s = MultiChannelSeries::from_channels(vec![values.clone(), values], 256.0).unwrap();
        let spec = crate::spectral::segment_blocks(&s, 512).unwrap();
        (s, spec)
    }

    #[test]
    fn auto_h_star_white_noise_is_minimal() {
        use rand_distr::StandardNormal;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f64> = (0..512 * 40).map(|_| rng.sample(StandardNormal)).collect();
        let (s, spec) = series_of(x);
        assert_eq!(auto_h_star(&s, &spec), 2.0);
    }

    #[test]
    fn auto_h_star_tracks_ar1_memory() {
        use rand_distr::StandardNormal;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut prev = 0.0;
        let x: Vec<f64> = (0..512 * 40)
            .map(|_| {
                let e: f64 = rng.sample(StandardNormal);
                prev = 0.9 * prev + e;
                prev
            })
            .collect();
        let (s, spec) = series_of(x);
        let h = auto_h_star(&s, &spec);
        assert!((15.0..=60.0).contains(&h), "h* = {h}");
    }

    #[test]
    fn geometric_lengths_have_mean_h() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 100_000;
        let h = 6.0;
        let lengths: Vec<usize> = (0..n).map(|_| geometric_length(h, &mut rng)).collect();
        assert!(lengths.iter().all(|&l| l >= 1));
        let mean = lengths.iter().sum::<usize>() as f64 / n as f64;
        let se = (h * (h - 1.0) / n as f64).sqrt();
        assert!((mean - h).abs() < 3.0 * se, "mean {mean}");
        // h = 1 always gives single samples.
        assert!((0..100).all(|_| geometric_length(1.0, &mut rng) == 1));
    }

    #[test]
    fn sign_p_values() {
        assert_relative_eq!(sign_p_value(&[1.0; 200]), 1.0 / 200.0);
        assert_relative_eq!(sign_p_value(&[-1.0, 1.0, 2.0, 3.0]), 0.5);
        assert_eq!(sign_p_value(&[0.0, 0.0]), 1.0);
    }

    #[test]
    fn bh_counts() {
        assert_eq!(benjamini_hochberg(&[0.001, 0.008, 0.039, 0.041, 0.042, 0.06, 0.074, 0.205], 0.05), 2);
        // Step-up: the largest p-value passes its threshold, so all do.
        assert_eq!(benjamini_hochberg(&[0.04, 0.04, 0.04], 0.05), 3);
        assert_eq!(benjamini_hochberg(&[0.5, 0.6], 0.05), 0);
        assert_eq!(benjamini_hochberg(&[0.0; 4], 0.05), 4);
    }

    proptest::proptest! {
        #[test]
        fn percentile_interval_is_ordered_and_nested(
            samples in proptest::collection::vec(-10.0f64..10.0, 50..200),
            level in 0.5f64..0.99,
        ) {
            let (lo, hi) = percentile_ci(&samples, level).unwrap();
            let (wlo, whi) = percentile_ci(&samples, (level + 1.0) / 2.0).unwrap();
            proptest::prop_assert!(lo <= hi);
            proptest::prop_assert!(wlo <= lo && hi <= whi);
        }

        #[test]
        fn bh_grows_with_alpha(p in proptest::collection::vec(0.0f64..1.0, 1..30), a in 0.01f64..0.5) {
            proptest::prop_assert!(benjamini_hochberg(&p, a) <= benjamini_hochberg(&p, (a * 1.5).min(0.99)));
        }
    }
}
