//! End-to-end analysis: segment, band periodograms, phase clustering,
//! Laplace margins, conditional extremes fits, bootstrap, FCR and QQ
//! diagnostics.

use std::path::PathBuf;
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cemodel::{
    extract_exceedances, fit_spexcon, ks_critical_95, ks_distance, observed_aggregates, qq_points, simulate_conditional,
    aggregate_r, CEFit, QqPoint,
};
use crate::clustering::{cluster_phases, HoldoutAccuracy, PhaseClustering, PhaseLabels};
use crate::error::{Error, Result};
use crate::inference::{
    bootstrap_distribution, fcr_adjust, percentile_ci, BootstrapConfig, BootstrapDistribution, HStar, Interval,
    ParameterSamples, MIN_REPLICATES,
};
use crate::margins::to_laplace_band;
use crate::series::MultiChannelSeries;
use crate::spectral::{band_periodograms, band_periodograms_of_blocks, segment_blocks, BandDefinition, BlockSpec, PeriodogramTensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub input_path: Option<PathBuf>,
    pub sampling_rate: f64,
    #[serde(default = "default_block_length")]
    pub block_length: usize,
    #[serde(default = "BandDefinition::standard")]
    pub bands: Vec<BandDefinition>,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    #[serde(default = "default_half_width")]
    pub smoothing_half_width: usize,
    /// Conditioning channels by name; all channels when absent.
    #[serde(default)]
    pub conditioning_channels: Option<Vec<String>>,
    #[serde(default)]
    pub h_star: HStar,
    #[serde(default = "default_replicates")]
    pub n_replicates: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Band used for the clustering covariances; broadband when absent.
    #[serde(default)]
    pub cluster_band: Option<String>,
    /// Simulated draws per observed exceedance in the QQ diagnostic.
    #[serde(default = "default_qq_multiplier")]
    pub qq_multiplier: usize,
}

fn default_block_length() -> usize {
    512
}
fn default_kappa() -> f64 {
    0.9
}
fn default_half_width() -> usize {
    5
}
fn default_replicates() -> usize {
    200
}
fn default_alpha() -> f64 {
    0.05
}
fn default_qq_multiplier() -> usize {
    10
}

impl PipelineConfig {
    /// Defaults for everything except the sampling rate.
    pub fn new(sampling_rate: f64) -> Self {
        Self {
            input_path: None,
            sampling_rate,
            block_length: default_block_length(),
            bands: BandDefinition::standard(),
            kappa: default_kappa(),
            smoothing_half_width: default_half_width(),
            conditioning_channels: None,
            h_star: HStar::Auto,
            n_replicates: default_replicates(),
            alpha: default_alpha(),
            seed: 0,
            output_dir: None,
            cluster_band: None,
            qq_multiplier: default_qq_multiplier(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.sampling_rate > 0.0 && self.sampling_rate.is_finite()) {
            return bad(format!("sampling rate {} must be positive", self.sampling_rate));
        }
        if self.bands.is_empty() {
            return bad("at least one band is required".into());
        }
        for band in &self.bands {
            band.validate(self.sampling_rate)?;
        }
        if !(self.kappa > 0.0 && self.kappa < 1.0) {
            return bad(format!("kappa {} outside (0, 1)", self.kappa));
        }
        if 8 * (2 * self.smoothing_half_width + 1) > self.block_length {
            return Err(Error::InvalidSmoothing {
                half_width: self.smoothing_half_width,
                block_length: self.block_length,
            });
        }
        if self.qq_multiplier == 0 {
            return bad("qq_multiplier must be positive".into());
        }
        if let Some(name) = &self.cluster_band {
            if !self.bands.iter().any(|b| &b.name == name) {
                return bad(format!("cluster band {name:?} is not one of the configured bands"));
            }
        }
        self.bootstrap_config().validate()
    }

    pub fn bootstrap_config(&self) -> BootstrapConfig {
        BootstrapConfig {
            n_replicates: self.n_replicates,
            h_star: self.h_star,
            alpha: self.alpha,
            seed: derive_seeds(self.seed).bootstrap,
        }
    }

    /// Indices of the conditioning channels in `series`.
    pub fn conditioning_indices(&self, series: &MultiChannelSeries) -> Result<Vec<usize>> {
        let names = series.channel_names();
        match &self.conditioning_channels {
            None => Ok((0..names.len()).collect()),
            Some(wanted) if wanted.is_empty() => Err(Error::InvalidConfig("conditioning channel list is empty".into())),
            Some(wanted) => wanted
                .iter()
                .map(|w| {
                    names
                        .iter()
                        .position(|n| n == w)
                        .ok_or_else(|| Error::InvalidConfig(format!("unknown conditioning channel {w:?}")))
                })
                .collect(),
        }
    }

    fn cluster_band_definition(&self) -> Option<&BandDefinition> {
        self.cluster_band.as_ref().and_then(|name| self.bands.iter().find(|b| &b.name == name))
    }
}

/// Seeds of the randomized stages, derived from the master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageSeeds {
    pub master: u64,
    pub clustering: u64,
    pub holdout: u64,
    pub bootstrap: u64,
    pub simulation: u64,
}

pub fn derive_seeds(master: u64) -> StageSeeds {
    let draw = |stream: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(master);
        rng.set_stream(stream);
        rng.next_u64()
    };
    StageSeeds { master, clustering: draw(1), holdout: draw(2), bootstrap: draw(3), simulation: draw(4) }
}

/// Fits for one band: one per conditioning channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandFits {
    pub band: String,
    pub fits: Vec<CEFit>,
}

/// Fits every band and conditioning channel on fixed labels.
pub fn fit_all(
    tensor: &PeriodogramTensor,
    labels: &PhaseLabels,
    conditioning: &[usize],
    kappa: f64,
) -> Result<Vec<BandFits>> {
    (0..tensor.n_bands())
        .map(|l| {
            let band = tensor.bands[l].name.clone();
            let laplace = to_laplace_band(tensor, labels, l).map_err(|e| e.at(&format!("margins[{band}]")))?;
            let fits = conditioning
                .iter()
                .map(|&q| {
                    let ex = extract_exceedances(&laplace, q, kappa)?;
                    fit_spexcon(&ex)
                })
                .collect::<Result<Vec<_>>>()
                .map_err(|e| e.at(&format!("fit[{band}]")))?;
            Ok(BandFits { band, fits })
        })
        .collect()
}

/// Values recorded per component in every bootstrap replicate.
pub const BOOTSTRAP_FIELDS: usize = 6;
const FIELD_DELTA: usize = 1;
const FIELD_DELTA_STAR: usize = 5;

/// `(a, Delta, beta, alpha0, alpha1, Delta*)` for every component in band,
/// conditioning, channel order.
pub fn flatten_estimates(fits: &[BandFits]) -> Vec<f64> {
    let mut out = vec![];
    for band in fits {
        for fit in &band.fits {
            for c in &fit.components {
                out.extend([c.params.a, c.params.delta, c.params.beta, c.alpha(0), c.alpha(1), c.delta_star()]);
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub n_samples: usize,
    pub sd_delta: f64,
    pub sd_delta_star: f64,
    pub mean_delta_star: f64,
    /// FCR-adjusted where selected, nominal otherwise.
    pub delta: Interval,
    pub delta_star: Interval,
    /// Nominal-level intervals.
    pub delta_nominal: [f64; 2],
    pub delta_star_nominal: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub band: String,
    pub conditioning: String,
    pub channel: String,
    pub n_exceedances: usize,
    pub alpha0: f64,
    pub alpha1: f64,
    pub a: f64,
    pub delta: f64,
    pub beta: f64,
    pub delta_star: f64,
    pub mu: [f64; 2],
    pub sigma: [f64; 2],
    pub nll: f64,
    pub perfect_dependence: bool,
    pub bootstrap: Option<BootstrapSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QqDiagnostic {
    pub band: String,
    pub conditioning: String,
    pub n_observed: usize,
    pub n_simulated: usize,
    pub ks_distance: f64,
    pub ks_critical_95: f64,
    pub points: Vec<QqPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringSummary {
    pub band: Option<String>,
    pub bandwidth: f64,
    pub count_rule_agrees: bool,
    pub burst_proportion: f64,
    pub n_burst: usize,
    pub holdout: HoldoutAccuracy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FcrSummary {
    pub m: usize,
    pub n_selected: usize,
    pub alpha: f64,
    pub nominal_level: f64,
    pub adjusted_level: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub version: String,
    pub seeds: StageSeeds,
    pub channel_names: Vec<String>,
    pub conditioning_channels: Vec<String>,
    pub sampling_rate: f64,
    pub n_samples: usize,
    pub block_length: usize,
    pub n_blocks: usize,
    pub discarded_samples: usize,
    pub smoothing_half_width: usize,
    pub bands: Vec<BandDefinition>,
    pub kappa: f64,
    pub n_replicates: usize,
    pub replicates_dropped: usize,
    pub h_star: Option<f64>,
    pub qq_multiplier: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub metadata: RunMetadata,
    pub labels: Vec<u8>,
    pub clustering: ClusteringSummary,
    pub estimates: Vec<Estimate>,
    pub fcr: Option<FcrSummary>,
    pub qq: Vec<QqDiagnostic>,
}

impl Report {
    /// Estimates for one band, conditioning channel and conditioned channel.
    pub fn estimate(&self, band: &str, conditioning: &str, channel: &str) -> Option<&Estimate> {
        self.estimates
            .iter()
            .find(|e| e.band == band && e.conditioning == conditioning && e.channel == channel)
    }
}

/// Deterministic stages shared by every subcommand.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub spec: BlockSpec,
    pub tensor: PeriodogramTensor,
    pub clustering: PhaseClustering,
    pub holdout: HoldoutAccuracy,
    pub conditioning: Vec<usize>,
    pub seeds: StageSeeds,
}

pub fn periodograms(series: &MultiChannelSeries, config: &PipelineConfig) -> Result<(BlockSpec, PeriodogramTensor)> {
    let spec = segment_blocks(series, config.block_length).map_err(|e| e.at("segment"))?;
    let tensor = band_periodograms(series, &spec, &config.bands, config.smoothing_half_width)
        .map_err(|e| e.at("periodogram"))?;
    Ok((spec, tensor))
}

pub fn prepare(series: &MultiChannelSeries, config: &PipelineConfig) -> Result<Prepared> {
    config.validate()?;
    if series.sampling_rate() != config.sampling_rate {
        return Err(Error::InvalidConfig(format!(
            "series sampled at {} Hz but configuration says {} Hz",
            series.sampling_rate(),
            config.sampling_rate
        )));
    }
    let conditioning = config.conditioning_indices(series)?;
    let seeds = derive_seeds(config.seed);
    let (spec, tensor) = periodograms(series, config)?;
    let clustering = cluster_phases(series, &spec, config.cluster_band_definition(), seeds.clustering)
        .map_err(|e| e.at("cluster"))?;
    let holdout = clustering.holdout(None, seeds.holdout).map_err(|e| e.at("holdout"))?;
    Ok(Prepared { spec, tensor, clustering, holdout, conditioning, seeds })
}

/// Refits the model on every bootstrap replicate of `series`; `expected` is
/// the number of values [`flatten_estimates`] gives on the original data.
pub fn bootstrap_fits(
    series: &MultiChannelSeries,
    prepared: &Prepared,
    config: &PipelineConfig,
    expected: usize,
) -> Result<BootstrapDistribution> {
    bootstrap_distribution(series, &prepared.spec, &prepared.clustering.labels, &config.bootstrap_config(), |rep| {
        let tensor =
            band_periodograms_of_blocks(&rep.blocks, series.sampling_rate(), &config.bands, config.smoothing_half_width)?;
        let fits = fit_all(&tensor, &rep.labels, &prepared.conditioning, config.kappa)?;
        let flat = flatten_estimates(&fits);
        if flat.len() != expected {
            return Err(Error::Numeric("replicate produced a different parameter count".into()));
        }
        Ok(flat)
    })
    .map_err(|e| e.at("bootstrap"))
}

fn sd(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

fn estimates_from(fits: &[BandFits], series: &MultiChannelSeries) -> Vec<Estimate> {
    let names = series.channel_names();
    let mut out = vec![];
    for band in fits {
        for fit in &band.fits {
            let n_exceedances = fit.residual_pool[0].len() + fit.residual_pool[1].len();
            for c in &fit.components {
                out.push(Estimate {
                    band: band.band.clone(),
                    conditioning: names[fit.conditioning].clone(),
                    channel: names[c.channel].clone(),
                    n_exceedances,
                    alpha0: c.alpha(0),
                    alpha1: c.alpha(1),
                    a: c.params.a,
                    delta: c.params.delta,
                    beta: c.params.beta,
                    delta_star: c.delta_star(),
                    mu: c.params.mu,
                    sigma: c.params.sigma,
                    nll: c.nll,
                    perfect_dependence: c.perfect_dependence,
                    bootstrap: None,
                });
            }
        }
    }
    out
}

/// Attaches bootstrap summaries and FCR-adjusted intervals to `estimates`.
pub fn attach_intervals(
    estimates: &mut [Estimate],
    distribution: &BootstrapDistribution,
    alpha: f64,
) -> Result<FcrSummary> {
    let column = |k: usize, field: usize| distribution.parameter(k * BOOTSTRAP_FIELDS + field);
    let samples = |field: usize| -> Vec<ParameterSamples> {
        estimates
            .iter()
            .enumerate()
            .map(|(k, e)| ParameterSamples {
                estimate: if field == FIELD_DELTA { e.delta } else { e.delta_star },
                samples: column(k, field),
            })
            .collect()
    };
    if distribution.estimates.len() < MIN_REPLICATES {
        return Err(Error::BootstrapUnstable { dropped: distribution.dropped, requested: distribution.requested });
    }
    let delta_set = fcr_adjust(&samples(FIELD_DELTA), alpha)?;
    let star_set = fcr_adjust(&samples(FIELD_DELTA_STAR), alpha)?;
    for (k, e) in estimates.iter_mut().enumerate() {
        let d = column(k, FIELD_DELTA);
        let s = column(k, FIELD_DELTA_STAR);
        let (dl, du) = percentile_ci(&d, 1.0 - alpha)?;
        let (sl, su) = percentile_ci(&s, 1.0 - alpha)?;
        e.bootstrap = Some(BootstrapSummary {
            n_samples: d.len(),
            sd_delta: sd(&d),
            sd_delta_star: sd(&s),
            mean_delta_star: s.iter().sum::<f64>() / s.len() as f64,
            delta: delta_set.intervals[k],
            delta_star: star_set.intervals[k],
            delta_nominal: [dl, du],
            delta_star_nominal: [sl, su],
        });
    }
    Ok(FcrSummary {
        m: estimates.len(),
        n_selected: delta_set.n_selected,
        alpha,
        nominal_level: delta_set.nominal_level,
        adjusted_level: delta_set.adjusted_level,
    })
}

/// QQ diagnostic of the aggregate `R` for every band and conditioning channel.
pub fn diagnostics(
    series: &MultiChannelSeries,
    prepared: &Prepared,
    config: &PipelineConfig,
    fits: &[BandFits],
) -> Result<Vec<QqDiagnostic>> {
    let names = series.channel_names();
    let mut out = vec![];
    let mut stream = 0u64;
    for (l, band) in fits.iter().enumerate() {
        let laplace = to_laplace_band(&prepared.tensor, &prepared.clustering.labels, l)?;
        for fit in &band.fits {
            let ex = extract_exceedances(&laplace, fit.conditioning, config.kappa)?;
            let mut observed = observed_aggregates(&ex);
            observed.sort_by(|a, b| a.total_cmp(b));
            let n_sim = config.qq_multiplier * observed.len();
            let seed = prepared.seeds.simulation.wrapping_add(stream);
            stream += 1;
            let mut simulated: Vec<f64> = simulate_conditional(fit, n_sim, seed)
                .map_err(|e| e.at("diagnose"))?
                .iter()
                .map(|r| aggregate_r(&r.values))
                .collect();
            simulated.sort_by(|a, b| a.total_cmp(b));
            out.push(QqDiagnostic {
                band: band.band.clone(),
                conditioning: names[fit.conditioning].clone(),
                n_observed: observed.len(),
                n_simulated: simulated.len(),
                ks_distance: ks_distance(&observed, &simulated),
                ks_critical_95: ks_critical_95(observed.len(), simulated.len()),
                points: qq_points(&observed, &simulated)?,
            });
        }
    }
    Ok(out)
}

fn metadata(series: &MultiChannelSeries, prepared: &Prepared, config: &PipelineConfig) -> RunMetadata {
    RunMetadata {
        version: env!("CARGO_PKG_VERSION").to_string(),
        seeds: prepared.seeds,
        channel_names: series.channel_names().to_vec(),
        conditioning_channels: prepared.conditioning.iter().map(|&q| series.channel_names()[q].clone()).collect(),
        sampling_rate: series.sampling_rate(),
        n_samples: series.n_samples(),
        block_length: prepared.spec.block_length,
        n_blocks: prepared.spec.n_blocks,
        discarded_samples: prepared.spec.discarded(series.n_samples()),
        smoothing_half_width: config.smoothing_half_width,
        bands: config.bands.clone(),
        kappa: config.kappa,
        n_replicates: 0,
        replicates_dropped: 0,
        h_star: None,
        qq_multiplier: config.qq_multiplier,
    }
}

/// Which optional stages to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Stages {
    pub bootstrap: bool,
    pub diagnose: bool,
}

impl Stages {
    pub const ALL: Stages = Stages { bootstrap: true, diagnose: true };
    pub const FIT: Stages = Stages { bootstrap: false, diagnose: false };
}

pub fn clustering_summary(prepared: &Prepared, config: &PipelineConfig) -> ClusteringSummary {
    let labels = &prepared.clustering.labels;
    ClusteringSummary {
        band: config.cluster_band.clone(),
        bandwidth: prepared.clustering.bandwidth,
        count_rule_agrees: prepared.clustering.count_rule_agrees,
        burst_proportion: labels.burst_probability(),
        n_burst: labels.count(1),
        holdout: prepared.holdout,
    }
}

/// Wall-clock seconds per stage; kept out of [`Report`] so reports stay
/// byte-identical across runs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub stages: Vec<(String, f64)>,
}

impl Timings {
    fn record<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.stages.push((stage.to_string(), start.elapsed().as_secs_f64()));
        out
    }

    pub fn total(&self) -> f64 {
        self.stages.iter().map(|(_, t)| t).sum()
    }
}

/// Runs the analysis on an in-memory series.
pub fn analyze(series: &MultiChannelSeries, config: &PipelineConfig, stages: Stages) -> Result<Report> {
    analyze_timed(series, config, stages).map(|(report, _)| report)
}

pub fn analyze_timed(series: &MultiChannelSeries, config: &PipelineConfig, stages: Stages) -> Result<(Report, Timings)> {
    let mut timings = Timings::default();
    let prepared = timings.record("prepare", || prepare(series, config))?;
    let report = finish(series, config, &prepared, stages, &mut timings)?;
    Ok((report, timings))
}

/// Remaining stages after [`prepare`], for callers that inspect the
/// clustering first.
pub fn analyze_prepared(
    series: &MultiChannelSeries,
    config: &PipelineConfig,
    prepared: &Prepared,
    stages: Stages,
) -> Result<Report> {
    finish(series, config, prepared, stages, &mut Timings::default())
}

fn finish(
    series: &MultiChannelSeries,
    config: &PipelineConfig,
    prepared: &Prepared,
    stages: Stages,
    timings: &mut Timings,
) -> Result<Report> {
    let labels = &prepared.clustering.labels;
    let fits = timings.record("fit", || fit_all(&prepared.tensor, labels, &prepared.conditioning, config.kappa))?;
    let mut estimates = estimates_from(&fits, series);
    let mut meta = metadata(series, prepared, config);
    let mut fcr = None;
    if stages.bootstrap {
        let distribution =
            timings.record("bootstrap", || bootstrap_fits(series, prepared, config, flatten_estimates(&fits).len()))?;
        fcr = Some(attach_intervals(&mut estimates, &distribution, config.alpha).map_err(|e| e.at("fcr"))?);
        meta.n_replicates = distribution.requested;
        meta.replicates_dropped = distribution.dropped;
        meta.h_star = Some(distribution.h_star);
    }
    let qq = if stages.diagnose {
        timings.record("diagnose", || diagnostics(series, prepared, config, &fits))?
    } else {
        vec![]
    };
    let report = Report {
        metadata: meta,
        labels: labels.labels().to_vec(),
        clustering: clustering_summary(prepared, config),
        estimates,
        fcr,
        qq,
    };
    Ok(report)
}

/// Full pipeline on an in-memory series.
pub fn run_pipeline(series: &MultiChannelSeries, config: &PipelineConfig) -> Result<Report> {
    analyze(series, config, Stages::ALL)
}
