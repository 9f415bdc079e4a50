//! Synthetic multichannel series with known spectral tail dependence.
//!
//! `X(t) = g_d (C_b O(t) + W(t))`: five independent AR(2) oscillations `O`
//! centred on the band centres, mixed per block by nonnegative coefficients
//! `C_b` whose squares follow a Gaussian copula with unit exponential
//! margins, plus white noise `W`. The burst gain `g_d` is 1 in non-burst
//! blocks and `burst_amplitude` in burst blocks. A constant gain within a
//! phase leaves the per-phase ranks of every band energy unchanged, so the
//! dependence parameters are those of the copula alone.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::clustering::PhaseLabels;
use crate::error::{Error, Result};
use crate::series::MultiChannelSeries;

/// Samples discarded at the start of every AR(2) path.
pub const AR_BURN_IN: usize = 1000;

/// Correlation matrices of the squared coefficients for one band, per phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandCorrelation {
    pub nonburst: Vec<Vec<f64>>,
    pub burst: Vec<Vec<f64>>,
}

impl BandCorrelation {
    pub fn phase(&self, d: u8) -> &Vec<Vec<f64>> {
        if d == 1 {
            &self.burst
        } else {
            &self.nonburst
        }
    }

    /// Matrix with unit diagonal and every off-diagonal entry equal to `rho`.
    pub fn exchangeable(p: usize, nonburst: f64, burst: f64) -> Self {
        let m = |r: f64| (0..p).map(|i| (0..p).map(|j| if i == j { 1.0 } else { r }).collect()).collect();
        Self { nonburst: m(nonburst), burst: m(burst) }
    }
    /// One-factor correlation `rho[i][j] = l_i l_j` for each phase.
    pub fn one_factor(nonburst: &[f64], burst: &[f64]) -> Self {
        let m = |l: &[f64]| {
            (0..l.len()).map(|i| (0..l.len()).map(|j| if i == j { 1.0 } else { l[i] * l[j] }).collect()).collect()
        };
        Self { nonburst: m(nonburst), burst: m(burst) }
    }
}

/// Preset simulation designs. Both use four channels with a one-factor
/// correlation whose last channel carries unit loading, so conditioning on
/// that channel gives `alpha = loading^2` for the other three. The same
/// correlation is used in every band: the AR(2) spectra are broad, so every
/// band's energy carries all five oscillations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    /// Small changes in tail dependence between phases.
    LowChange,
    /// Changes just above 0.5 in `Delta`, of both signs.
    HighChange,
}

impl Scenario {
    pub const ALL: [Scenario; 2] = [Scenario::LowChange, Scenario::HighChange];

    /// Tail dependence `alpha = rho^2` of the first three channels on the
    /// fourth, non-burst then burst.
    pub fn alphas(self) -> ([f64; 3], [f64; 3]) {
        match self {
            Scenario::LowChange => ([0.36, 0.36, 0.49], [0.5625, 0.25, 0.64]),
            Scenario::HighChange => ([0.3, 0.7, 0.3], [0.7, 0.3, 0.7]),
        }
    }

    pub fn band_correlation(self) -> BandCorrelation {
        let (a0, a1) = self.alphas();
        let with_unit = |a: [f64; 3]| [a[0].sqrt(), a[1].sqrt(), a[2].sqrt(), 1.0];
        BandCorrelation::one_factor(&with_unit(a0), &with_unit(a1))
    }

    /// Desk-scale configuration for this scenario.
    pub fn config(self, seed: u64) -> SimConfig {
        SimConfig::desk_scale(vec![self.band_correlation(); default_centres().len()], seed)
    }

    /// Name of the channel with unit loading.
    pub fn conditioning_channel(self) -> &'static str {
        "ch4"
    }
}

impl std::str::FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "low-change" => Ok(Scenario::LowChange),
            "high-change" => Ok(Scenario::HighChange),
            _ => Err(Error::InvalidConfig(format!("unknown scenario {s:?} (expected low-change or high-change)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub n_channels: usize,
    pub n_blocks: usize,
    pub block_length: usize,
    pub burst_probability: f64,
    #[serde(default = "default_damping")]
    pub damping: f64,
    #[serde(default = "default_centres")]
    pub band_centers_hz: Vec<f64>,
    #[serde(default = "default_rate")]
    pub sampling_rate: f64,
    /// One entry per oscillation band.
    pub rho: Vec<BandCorrelation>,
    #[serde(default = "default_noise")]
    pub noise_variance: f64,
    #[serde(default = "default_burst_amplitude")]
    pub burst_amplitude: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_damping() -> f64 {
    1.05
}
fn default_centres() -> Vec<f64> {
    vec![2.0, 6.0, 10.0, 20.0, 40.0]
}
fn default_rate() -> f64 {
    256.0
}
fn default_noise() -> f64 {
    0.25
}
fn default_burst_amplitude() -> f64 {
    3.0
}

impl SimConfig {
    /// Four channels, 1000 blocks of 512 samples at 256 Hz, burst
    /// probability 0.35, with the given per-band correlations.
    pub fn desk_scale(rho: Vec<BandCorrelation>, seed: u64) -> Self {
        Self {
            n_channels: 4,
            n_blocks: 1000,
            block_length: 512,
            burst_probability: 0.35,
            damping: default_damping(),
            band_centers_hz: default_centres(),
            sampling_rate: default_rate(),
            rho,
            noise_variance: default_noise(),
            burst_amplitude: default_burst_amplitude(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n_channels < 2 {
            return bad(format!("need at least 2 channels, got {}", self.n_channels));
        }
        if self.n_blocks == 0 || self.block_length < 4 {
            return bad("need at least one block of at least 4 samples".into());
        }
        if !(self.burst_probability > 0.0 && self.burst_probability < 1.0) {
            return bad(format!("burst probability {} outside (0, 1)", self.burst_probability));
        }
        if !(self.damping > 0.0) {
            return bad(format!("damping {} must be positive", self.damping));
        }
        if !(self.sampling_rate > 0.0) {
            return bad("sampling rate must be positive".into());
        }
        if !(self.noise_variance > 0.0) {
            return bad("noise variance must be positive".into());
        }
        if !(self.burst_amplitude > 0.0) {
            return bad("burst amplitude must be positive".into());
        }
        if self.band_centers_hz.len() != self.rho.len() {
            return bad(format!(
                "{} band centres but {} correlation entries",
                self.band_centers_hz.len(),
                self.rho.len()
            ));
        }
        for &c in &self.band_centers_hz {
            if !(c > 0.0 && c < self.sampling_rate / 2.0) {
                return bad(format!("band centre {c} Hz outside (0, {})", self.sampling_rate / 2.0));
            }
        }
        for (l, band) in self.rho.iter().enumerate() {
            for d in 0..2u8 {
                correlation_factor(band.phase(d), self.n_channels)
                    .map_err(|e| Error::InvalidConfig(format!("band {l}, phase {d}: {e}")))?;
            }
        }
        Ok(())
    }
}

/// Square-root factor `F` with `F F^T = rho`, after validating `rho`.
fn correlation_factor(rho: &[Vec<f64>], p: usize) -> Result<DMatrix<f64>> {
    if rho.len() != p || rho.iter().any(|r| r.len() != p) {
        return Err(Error::InvalidConfig(format!("correlation matrix must be {p}x{p}")));
    }
    let m = DMatrix::from_fn(p, p, |i, j| rho[i][j]);
    for i in 0..p {
        if m[(i, i)] != 1.0 {
            return Err(Error::InvalidConfig("correlation diagonal must be 1".into()));
        }
        for j in 0..p {
            if m[(i, j)] != m[(j, i)] {
                return Err(Error::InvalidConfig("correlation matrix must be symmetric".into()));
            }
            if !(0.0..=1.0).contains(&m[(i, j)]) {
                return Err(Error::InvalidConfig(format!("correlation {} outside [0, 1]", m[(i, j)])));
            }
        }
    }
    if let Some(chol) = m.clone().cholesky() {
        return Ok(chol.l());
    }
    let eig = SymmetricEigen::new(m);
    if eig.eigenvalues.iter().any(|&l| l < -1e-10) {
        return Err(Error::InvalidConfig("correlation matrix is not positive semi-definite".into()));
    }
    let root = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0).sqrt()));
    Ok(&eig.eigenvectors * root)
}

/// `(theta1, theta2)` of the AR(2) oscillation peaking at `centre_hz`.
pub fn ar2_coefficients(centre_hz: f64, damping: f64, sampling_rate: f64) -> (f64, f64) {
    let r = (-damping).exp();
    (2.0 * r * (2.0 * std::f64::consts::PI * centre_hz / sampling_rate).cos(), -r * r)
}

/// AR(2) path with standard Gaussian innovations after a 1000-sample burn-in.
pub fn ar2_path<R: Rng + ?Sized>(centre_hz: f64, damping: f64, sampling_rate: f64, n_samples: usize, rng: &mut R) -> Vec<f64> {
    let (t1, t2) = ar2_coefficients(centre_hz, damping, sampling_rate);
    let mut prev = [0.0f64; 2];
    let mut out = Vec::with_capacity(n_samples);
    for t in 0..(AR_BURN_IN + n_samples) {
        let e: f64 = StandardNormal.sample(rng);
        let x = t1 * prev[0] + t2 * prev[1] + e;
        prev = [x, prev[0]];
        if t >= AR_BURN_IN {
            out.push(x);
        }
    }
    out
}

/// Unit exponential quantile of a standard normal score, `-ln(1 - Phi(z))`.
pub fn normal_to_exponential(z: f64) -> f64 {
    let w = z / std::f64::consts::SQRT_2;
    if z < 0.0 {
        // -ln(1 - Phi(z)) without cancellation in the lower tail.
        -(-0.5 * erfc(-w)).ln_1p()
    } else {
        -(0.5 * erfc(w)).ln()
    }
}

/// Per-block coefficient matrices `C_b` (p x n_bands): squared entries follow
/// the phase's Gaussian copula with unit exponential margins.
pub fn copula_coefficients<R: Rng + ?Sized>(config: &SimConfig, labels: &PhaseLabels, rng: &mut R) -> Result<Vec<DMatrix<f64>>> {
    let p = config.n_channels;
    let nb = config.rho.len();
    let factors = config
        .rho
        .iter()
        .map(|band| Ok([correlation_factor(&band.nonburst, p)?, correlation_factor(&band.burst, p)?]))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::with_capacity(labels.len());
    for &d in labels.labels() {
        let mut c = DMatrix::zeros(p, nb);
        for (l, f) in factors.iter().enumerate() {
            let z = nalgebra::DVector::from_fn(p, |_, _| StandardNormal.sample(rng));
            let correlated = &f[d as usize] * z;
            for j in 0..p {
                c[(j, l)] = normal_to_exponential(correlated[j]).sqrt();
            }
        }
        out.push(c);
    }
    Ok(out)
}

/// Ground-truth dependence parameters of one ordered pair in one band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthEntry {
    pub band: usize,
    pub conditioning: usize,
    pub channel: usize,
    pub alpha0: f64,
    pub alpha1: f64,
    pub a: f64,
    pub delta: f64,
    pub beta: f64,
    pub delta_star: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthTable {
    pub entries: Vec<TruthEntry>,
}

impl TruthTable {
    pub fn get(&self, band: usize, conditioning: usize, channel: usize) -> Option<&TruthEntry> {
        self.entries
            .iter()
            .find(|e| e.band == band && e.conditioning == conditioning && e.channel == channel)
    }
}

/// Dependence parameters implied by the copula correlations:
/// `alpha^{(d)} = rho_d^2`, `beta = 1/2`.
pub fn true_parameters(config: &SimConfig) -> Result<TruthTable> {
    config.validate()?;
    let p = config.n_channels;
    let mut entries = vec![];
    for (band, rho) in config.rho.iter().enumerate() {
        for q in 0..p {
            for j in (0..p).filter(|&j| j != q) {
                let alpha0 = rho.nonburst[q][j].powi(2);
                let alpha1 = rho.burst[q][j].powi(2);
                let a = alpha0.atanh();
                entries.push(TruthEntry {
                    band,
                    conditioning: q,
                    channel: j,
                    alpha0,
                    alpha1,
                    a,
                    delta: alpha1.atanh() - a,
                    beta: 0.5,
                    delta_star: alpha1 - alpha0,
                });
            }
        }
    }
    Ok(TruthTable { entries })
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub series: MultiChannelSeries,
    pub labels: PhaseLabels,
    pub truth: TruthTable,
    pub coefficients: Vec<DMatrix<f64>>,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Generates the series, its ground-truth phase labels and parameter table.
pub fn synthesize_eeg(config: &SimConfig) -> Result<SyntheticData> {
    config.validate()?;
    let p = config.n_channels;
    let len = config.block_length;
    let n = config.n_blocks * len;

    let mut label_rng = stream(config.seed, 0);
    let labels = PhaseLabels::new(
        (0..config.n_blocks)
            .map(|_| u8::from(label_rng.random::<f64>() < config.burst_probability))
            .collect(),
    )?;
    let coefficients = copula_coefficients(config, &labels, &mut stream(config.seed, 1))?;
    let oscillations: Vec<Vec<f64>> = config
        .band_centers_hz
        .iter()
        .enumerate()
        .map(|(l, &c)| ar2_path(c, config.damping, config.sampling_rate, n, &mut stream(config.seed, 2 + l as u64)))
        .collect();
    let noise = Normal::new(0.0, config.noise_variance.sqrt()).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let first_noise_stream = 2 + config.band_centers_hz.len() as u64;

    let mut values = vec![vec![0.0; n]; p];
    for (j, channel) in values.iter_mut().enumerate() {
        let mut rng = stream(config.seed, first_noise_stream + j as u64);
        for (b, c) in coefficients.iter().enumerate() {
            let gain = if labels.label(b) == 1 { config.burst_amplitude } else { 1.0 };
            for t in b * len..(b + 1) * len {
                let signal: f64 = oscillations.iter().enumerate().map(|(l, o)| c[(j, l)] * o[t]).sum();
                channel[t] = gain * (signal + noise.sample(&mut rng));
            }
        }
    }
    let names = (1..=p).map(|j| format!("ch{j}")).collect();
    let series = MultiChannelSeries::new(values, config.sampling_rate, names)?;
    Ok(SyntheticData { series, labels, truth: true_parameters(config)?, coefficients })
}
