//! Block periodograms, frequency smoothing, band aggregation and coherence.
//!
//! A series of `T` samples is cut into `B = floor(T / L)` non-overlapping
//! blocks of length `L`. Within a block the DFT is taken on the fundamental
//! grid `r / L`. Arrays indexed by frequency use FFT order: index `k` holds
//! `r = k` for `k <= L/2` and `r = k - L` above, which covers exactly
//! `r = -(L/2 - 1), ..., L/2`.

use std::ops::{AddAssign, Div, Range};
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use realfft::{RealFftPlanner, RealToComplex};
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::MultiChannelSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSpec {
    pub block_length: usize,
    pub n_blocks: usize,
}

impl BlockSpec {
    /// Sample range of zero-based block `b`.
    pub fn range(&self, b: usize) -> Range<usize> {
        b * self.block_length..(b + 1) * self.block_length
    }

    pub fn check_block(&self, b: usize) -> Result<()> {
        if b >= self.n_blocks {
            return Err(Error::BlockOutOfRange { index: b, n_blocks: self.n_blocks });
        }
        Ok(())
    }

    /// Samples beyond the last full block.
    pub fn discarded(&self, n_samples: usize) -> usize {
        n_samples - self.block_length * self.n_blocks
    }
}

/// Half-open frequency band `(lower_hz, upper_hz]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandDefinition {
    pub name: String,
    pub lower_hz: f64,
    pub upper_hz: f64,
}

impl BandDefinition {
    pub fn new(name: impl Into<String>, lower_hz: f64, upper_hz: f64) -> Self {
        Self { name: name.into(), lower_hz, upper_hz }
    }

    pub fn validate(&self, sampling_rate: f64) -> Result<()> {
        if !(self.lower_hz >= 0.0 && self.lower_hz < self.upper_hz && self.upper_hz <= sampling_rate / 2.0) {
            return Err(Error::InvalidBand(format!(
                "{} ({}, {}] must satisfy 0 <= lower < upper <= {}",
                self.name,
                self.lower_hz,
                self.upper_hz,
                sampling_rate / 2.0
            )));
        }
        Ok(())
    }

    pub fn contains(&self, hz: f64) -> bool {
        hz > self.lower_hz && hz <= self.upper_hz
    }

    /// The five conventional EEG bands.
    pub fn standard() -> Vec<BandDefinition> {
        vec![
            BandDefinition::new("Delta", 0.0, 4.0),
            BandDefinition::new("Theta", 4.0, 8.0),
            BandDefinition::new("Alpha", 8.0, 12.0),
            BandDefinition::new("Beta", 12.0, 30.0),
            BandDefinition::new("Gamma", 30.0, 50.0),
        ]
    }
}

/// Band-aggregated smoothed auto-periodograms, shape `[B][p][n_bands]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodogramTensor {
    band_energy: Vec<f64>,
    n_channels: usize,
    pub smoothing_half_width: usize,
    pub block_spec: BlockSpec,
    pub bands: Vec<BandDefinition>,
}

impl PeriodogramTensor {
    /// Wraps a flat `[B][p][n_bands]` array.
    pub fn from_raw(
        band_energy: Vec<f64>,
        n_channels: usize,
        smoothing_half_width: usize,
        block_spec: BlockSpec,
        bands: Vec<BandDefinition>,
    ) -> Result<Self> {
        let expected = block_spec.n_blocks * n_channels * bands.len();
        if band_energy.len() != expected {
            return Err(Error::InvalidSeries(format!(
                "band energy array has {} entries, expected {expected}",
                band_energy.len()
            )));
        }
        if band_energy.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::Numeric("band energies must be finite and nonnegative".into()));
        }
        Ok(Self { band_energy, n_channels, smoothing_half_width, block_spec, bands })
    }

    pub fn n_blocks(&self) -> usize {
        self.block_spec.n_blocks
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn n_bands(&self) -> usize {
        self.bands.len()
    }

    pub fn get(&self, b: usize, j: usize, band: usize) -> f64 {
        self.band_energy[(b * self.n_channels + j) * self.bands.len() + band]
    }

    /// Energy of channel `j` in band `band` across all blocks.
    pub fn column(&self, j: usize, band: usize) -> Vec<f64> {
        (0..self.n_blocks()).map(|b| self.get(b, j, band)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MeanHandling {
    /// Transform the block as is.
    Keep,
    /// Remove the per-block sample mean first.
    Subtract,
}

/// Splits a series into `floor(T / L)` blocks of length `L`.
pub fn segment_blocks(series: &MultiChannelSeries, block_length: usize) -> Result<BlockSpec> {
    let samples = series.n_samples();
    if block_length < 4 || !block_length.is_multiple_of(2) || block_length > samples {
        return Err(Error::InvalidBlockLength { length: block_length, samples });
    }
    Ok(BlockSpec { block_length, n_blocks: samples / block_length })
}

/// Fundamental frequency `r / L` (cycles per sample) at FFT index `k`.
pub fn fundamental_frequency(k: usize, block_length: usize) -> f64 {
    signed_index(k, block_length) as f64 / block_length as f64
}

fn signed_index(k: usize, block_length: usize) -> i64 {
    if k <= block_length / 2 {
        k as i64
    } else {
        k as i64 - block_length as i64
    }
}

/// FFT indices of the fundamental frequencies whose `s * r / L` lies in
/// `[-upper, -lower) U (lower, upper]`.
pub fn band_indices(band: &BandDefinition, sampling_rate: f64, block_length: usize) -> Result<Vec<usize>> {
    band.validate(sampling_rate)?;
    let idx: Vec<usize> = (0..block_length)
        .filter(|&k| {
            let hz = sampling_rate * signed_index(k, block_length) as f64 / block_length as f64;
            if hz >= 0.0 {
                band.contains(hz)
            } else {
                band.contains(-hz)
            }
        })
        .collect();
    if idx.is_empty() {
        return Err(Error::EmptyBand {
            band: band.name.clone(),
            resolution_hz: sampling_rate / block_length as f64,
        });
    }
    Ok(idx)
}

/// DFT coefficients `a_{j,b}(w_r)` of one block for every channel, scaled by
/// `1/sqrt(L)`.
#[derive(Debug, Clone)]
pub struct BlockDft {
    coefficients: Vec<Vec<Complex64>>,
}

impl BlockDft {
    pub fn block_length(&self) -> usize {
        self.coefficients[0].len()
    }

    pub fn coefficients(&self, j: usize) -> &[Complex64] {
        &self.coefficients[j]
    }

    /// Auto-periodogram `I_j(b, w_r) = |a_j|^2`.
    pub fn auto(&self, j: usize) -> Vec<f64> {
        self.coefficients[j].iter().map(|a| a.norm_sqr()).collect()
    }

    /// Cross-periodogram `I_jk(b, w_r) = a_j conj(a_k)`.
    pub fn cross(&self, j: usize, k: usize) -> Vec<Complex64> {
        self.coefficients[j]
            .iter()
            .zip(&self.coefficients[k])
            .map(|(a, c)| a * c.conj())
            .collect()
    }
}

/// DFT of block `b` (zero-based) for all channels.
pub fn block_periodogram(
    series: &MultiChannelSeries,
    spec: &BlockSpec,
    b: usize,
    mean: MeanHandling,
) -> Result<BlockDft> {
    spec.check_block(b)?;
    let fft = FftPlanner::new().plan_fft_forward(spec.block_length);
    let coefficients = (0..series.n_channels())
        .map(|j| scaled_dft(&*fft, &series.channel(j)[spec.range(b)], mean))
        .collect();
    Ok(BlockDft { coefficients })
}

fn scaled_dft(fft: &dyn Fft<f64>, x: &[f64], mean: MeanHandling) -> Vec<Complex64> {
    let centre = match mean {
        MeanHandling::Keep => 0.0,
        MeanHandling::Subtract => x.iter().sum::<f64>() / x.len() as f64,
    };
    let scale = 1.0 / (x.len() as f64).sqrt();
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new((v - centre) * scale, 0.0)).collect();
    fft.process(&mut buf);
    buf
}

fn check_smoothing(half_width: usize, block_length: usize) -> Result<()> {
    if 8 * (2 * half_width + 1) > block_length {
        return Err(Error::InvalidSmoothing { half_width, block_length });
    }
    Ok(())
}

fn circular_moving_average<T>(x: &[T], half_width: usize) -> Vec<T>
where
    T: Copy + Default + AddAssign + Div<f64, Output = T>,
{
    let n = x.len();
    let width = 2 * half_width + 1;
    (0..n)
        .map(|r| {
            let mut window = T::default();
            for k in 0..width {
                window += x[(n + r + k - half_width) % n];
            }
            window / width as f64
        })
        .collect()
}

/// Daniell smoothing: the `(2n+1)`-point circular average over neighbouring
/// fundamental frequencies.
pub fn smooth_periodogram(raw: &[f64], half_width: usize) -> Result<Vec<f64>> {
    check_smoothing(half_width, raw.len())?;
    Ok(circular_moving_average(raw, half_width))
}

/// Complex counterpart of [`smooth_periodogram`] for cross-periodograms.
pub fn smooth_cross_periodogram(raw: &[Complex64], half_width: usize) -> Result<Vec<Complex64>> {
    check_smoothing(half_width, raw.len())?;
    Ok(circular_moving_average(raw, half_width))
}

/// Mean of the smoothed periodogram over the band's frequency set `Q`.
pub fn band_aggregate(smoothed: &[f64], band: &BandDefinition, sampling_rate: f64) -> Result<f64> {
    let idx = band_indices(band, sampling_rate, smoothed.len())?;
    Ok(idx.iter().map(|&k| smoothed[k]).sum::<f64>() / idx.len() as f64)
}

/// Smoothed squared coherence between channels `j` and `k` in block `b`,
/// averaged over the band's frequencies.
pub fn band_coherence(
    series: &MultiChannelSeries,
    spec: &BlockSpec,
    b: usize,
    band: &BandDefinition,
    j: usize,
    k: usize,
    half_width: usize,
) -> Result<f64> {
    if j == k {
        return Err(Error::InvalidConfig("coherence needs two distinct channels".into()));
    }
    let idx = band_indices(band, series.sampling_rate(), spec.block_length)?;
    let dft = block_periodogram(series, spec, b, MeanHandling::Subtract)?;
    let sj = smooth_periodogram(&dft.auto(j), half_width)?;
    let sk = smooth_periodogram(&dft.auto(k), half_width)?;
    let sjk = smooth_cross_periodogram(&dft.cross(j, k), half_width)?;
    let mut total = 0.0;
    for &r in &idx {
        let denom = sj[r] * sk[r];
        if !(denom > 0.0) {
            return Err(Error::DegeneratePower { band: band.name.clone() });
        }
        total += (sjk[r].norm_sqr() / denom).min(1.0);
    }
    Ok(total / idx.len() as f64)
}

/// Reusable per-block band energy calculator: one real FFT plan, precomputed
/// band frequency sets and scratch buffers. Smoothed power is evaluated only
/// at frequencies that belong to some band.
pub struct BandEnergyEstimator {
    fft: Arc<dyn RealToComplex<f64>>,
    bands: Vec<Vec<usize>>,
    /// Sorted union of all band indices.
    needed: Vec<usize>,
    half_width: usize,
    input: Vec<f64>,
    spectrum: Vec<Complex64>,
    scratch: Vec<Complex64>,
    power: Vec<f64>,
    padded: Vec<f64>,
    smoothed: Vec<f64>,
}

impl BandEnergyEstimator {
    pub fn new(bands: &[BandDefinition], sampling_rate: f64, block_length: usize, half_width: usize) -> Result<Self> {
        check_smoothing(half_width, block_length)?;
        let bands = bands
            .iter()
            .map(|band| band_indices(band, sampling_rate, block_length))
            .collect::<Result<Vec<_>>>()?;
        let mut needed: Vec<usize> = bands.iter().flatten().copied().collect();
        needed.sort_unstable();
        needed.dedup();
        let fft = RealFftPlanner::<f64>::new().plan_fft_forward(block_length);
        Ok(Self {
            input: fft.make_input_vec(),
            spectrum: fft.make_output_vec(),
            scratch: fft.make_scratch_vec(),
            fft,
            bands,
            needed,
            half_width,
            power: vec![0.0; block_length],
            padded: Vec::with_capacity(block_length + 2 * half_width),
            smoothed: vec![0.0; block_length],
        })
    }

    pub fn n_bands(&self) -> usize {
        self.bands.len()
    }

    /// Writes the band energies of one demeaned block of one channel into `out`.
    pub fn energies(&mut self, block: &[f64], out: &mut [f64]) {
        let len = block.len();
        debug_assert_eq!(len, self.input.len());
        let mean = block.iter().sum::<f64>() / len as f64;
        let scale = 1.0 / (len as f64).sqrt();
        for (dst, &x) in self.input.iter_mut().zip(block) {
            *dst = (x - mean) * scale;
        }
        self.fft
            .process_with_scratch(&mut self.input, &mut self.spectrum, &mut self.scratch)
            .expect("buffer sizes come from the plan");
        for (k, a) in self.spectrum.iter().enumerate() {
            let p = a.norm_sqr();
            self.power[k] = p;
            if k > 0 {
                self.power[len - k] = p;
            }
        }
        // Circularly padded copy so that every window is a contiguous slice.
        let n = self.half_width;
        let width = 2 * n + 1;
        self.padded.clear();
        self.padded.extend_from_slice(&self.power[len - n..]);
        self.padded.extend_from_slice(&self.power);
        self.padded.extend_from_slice(&self.power[..n]);
        for &k in &self.needed {
            self.smoothed[k] = self.padded[k..k + width].iter().sum::<f64>() / width as f64;
        }
        for (slot, idx) in out.iter_mut().zip(&self.bands) {
            *slot = idx.iter().map(|&k| self.smoothed[k]).sum::<f64>() / idx.len() as f64;
        }
    }
}

/// Band energies `I_j^{(l)}(b)` for every block, channel and band.
pub fn band_periodograms(
    series: &MultiChannelSeries,
    spec: &BlockSpec,
    bands: &[BandDefinition],
    half_width: usize,
) -> Result<PeriodogramTensor> {
    let blocks = (0..spec.n_blocks).map(|b| {
        let range = spec.range(b);
        series.channels().iter().map(move |c| &c[range.clone()])
    });
    band_energies_of(blocks, series.n_channels(), series.sampling_rate(), spec, bands, half_width)
}

/// Band energies of blocks given as `[B][p][L]` arrays, such as bootstrap
/// replicates.
pub fn band_periodograms_of_blocks(
    blocks: &[Vec<Vec<f64>>],
    sampling_rate: f64,
    bands: &[BandDefinition],
    half_width: usize,
) -> Result<PeriodogramTensor> {
    let p = blocks.first().map_or(0, |b| b.len());
    let block_length = blocks.first().and_then(|b| b.first()).map_or(0, |c| c.len());
    if blocks.iter().any(|b| b.len() != p || b.iter().any(|c| c.len() != block_length)) {
        return Err(Error::InvalidSeries("blocks must share channel count and length".into()));
    }
    let spec = BlockSpec { block_length, n_blocks: blocks.len() };
    let iter = blocks.iter().map(|b| b.iter().map(|c| c.as_slice()));
    band_energies_of(iter, p, sampling_rate, &spec, bands, half_width)
}

fn band_energies_of<'a, B, C>(
    blocks: B,
    p: usize,
    sampling_rate: f64,
    spec: &BlockSpec,
    bands: &[BandDefinition],
    half_width: usize,
) -> Result<PeriodogramTensor>
where
    B: Iterator<Item = C>,
    C: Iterator<Item = &'a [f64]>,
{
    let mut estimator = BandEnergyEstimator::new(bands, sampling_rate, spec.block_length, half_width)?;
    let nb = bands.len();
    let mut energy = vec![0.0; spec.n_blocks * p * nb];
    for (slot, channel) in energy.chunks_mut(nb).zip(blocks.flatten()) {
        estimator.energies(channel, slot);
    }
    PeriodogramTensor::from_raw(energy, p, half_width, *spec, bands.to_vec())
}

/// Keeps only the band's Fourier components of a block (DC removed) and
/// returns the real inverse transform.
pub fn band_limit(block: &[f64], band: &BandDefinition, sampling_rate: f64) -> Result<Vec<f64>> {
    let len = block.len();
    let keep = band_indices(band, sampling_rate, len)?;
    let mut planner = FftPlanner::new();
    let forward = planner.plan_fft_forward(len);
    let inverse = planner.plan_fft_inverse(len);
    let mut buf: Vec<Complex64> = block.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    forward.process(&mut buf);
    let mut masked = vec![Complex64::default(); len];
    // Q is closed under r -> -r, so the masked spectrum stays Hermitian.
    for &k in &keep {
        masked[k] = buf[k];
    }
    inverse.process(&mut masked);
    Ok(masked.iter().map(|c| c.re / len as f64).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn series_from(channels: Vec<Vec<f64>>, rate: f64) -> MultiChannelSeries {
        MultiChannelSeries::from_channels(channels, rate).unwrap()
    }

    #[test]
    fn segment_counts() {
        let s = series_from(vec![vec![0.0; 1100], vec![0.0; 1100]], 256.0);
        let spec = segment_blocks(&s, 512).unwrap();
        assert_eq!(spec.n_blocks, 2);
        assert_eq!(spec.discarded(1100), 76);

        let s = series_from(vec![vec![0.0; 512], vec![0.0; 512]], 256.0);
        let spec = segment_blocks(&s, 512).unwrap();
        assert_eq!(spec.n_blocks, 1);
        assert_eq!(spec.range(0), 0..512);

        assert!(matches!(segment_blocks(&s, 2), Err(Error::InvalidBlockLength { .. })));
        assert!(matches!(segment_blocks(&s, 1024), Err(Error::InvalidBlockLength { .. })));
    }

    #[test]
    fn segment_desk_scale() {
        let s = series_from(vec![vec![0.0; 512_000], vec![0.0; 512_000]], 256.0);
        assert_eq!(segment_blocks(&s, 512).unwrap().n_blocks, 1000);
    }

    #[test]
    fn cosine_at_fundamental() {
        let l = 512;
        let r = 20;
        let x: Vec<f64> = (0..l)
            .map(|t| (2.0 * std::f64::consts::PI * r as f64 * (t + 1) as f64 / l as f64).cos())
            .collect();
        let s = series_from(vec![x.clone(), x], 256.0);
        let spec = segment_blocks(&s, l).unwrap();
        let auto = block_periodogram(&s, &spec, 0, MeanHandling::Keep).unwrap().auto(0);
        for (k, v) in auto.iter().enumerate() {
            if k == r || k == l - r {
                assert_relative_eq!(*v, 128.0, epsilon = 1e-9);
            } else {
                assert!(v.abs() < 1e-9, "leak at {k}: {v}");
            }
        }
    }

    #[test]
    fn constant_block() {
        let c = 3.0;
        let s = series_from(vec![vec![c; 64], vec![0.0; 64]], 64.0);
        let spec = segment_blocks(&s, 64).unwrap();
        let auto = block_periodogram(&s, &spec, 0, MeanHandling::Keep).unwrap().auto(0);
        assert_relative_eq!(auto[0], 64.0 * c * c, max_relative = 1e-12);
        assert!(auto[1..].iter().all(|v| v.abs() < 1e-12));
        let centred = block_periodogram(&s, &spec, 0, MeanHandling::Subtract).unwrap().auto(0);
        assert!(centred.iter().all(|v| v.abs() < 1e-20));
    }

    #[test]
    fn block_index_checked() {
        let s = series_from(vec![vec![0.0; 64], vec![0.0; 64]], 64.0);
        let spec = segment_blocks(&s, 32).unwrap();
        assert!(matches!(
            block_periodogram(&s, &spec, 2, MeanHandling::Keep),
            Err(Error::BlockOutOfRange { .. })
        ));
    }

    #[test]
    fn hermitian_cross() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ch = |rng: &mut ChaCha8Rng| (0..128).map(|_| rng.random::<f64>()).collect::<Vec<_>>();
        let s = series_from(vec![ch(&mut rng), ch(&mut rng)], 128.0);
        let spec = segment_blocks(&s, 128).unwrap();
        let dft = block_periodogram(&s, &spec, 0, MeanHandling::Subtract).unwrap();
        for (a, b) in dft.cross(0, 1).iter().zip(dft.cross(1, 0)) {
            assert_relative_eq!(a.re, b.re, epsilon = 1e-12);
            assert_relative_eq!(a.im, -b.im, epsilon = 1e-12);
        }
    }

    #[test]
    fn smoothing_examples() {
        let raw: Vec<f64> = (0..64).map(|k| k as f64).collect();
        assert_eq!(smooth_periodogram(&raw, 0).unwrap(), raw);
        let flat = vec![2.5; 512];
        assert!(smooth_periodogram(&flat, 5).unwrap().iter().all(|v| (v - 2.5).abs() < 1e-12));

        let mut spike = vec![0.0; 512];
        spike[100] = 128.0;
        let sm = smooth_periodogram(&spike, 5).unwrap();
        for (k, v) in sm.iter().enumerate() {
            if (95..=105).contains(&k) {
                assert_relative_eq!(*v, 128.0 / 11.0, epsilon = 1e-12);
            } else {
                assert_eq!(*v, 0.0);
            }
        }
        // Wraps around the grid edge.
        let mut edge = vec![0.0; 512];
        edge[0] = 11.0;
        let sm = smooth_periodogram(&edge, 5).unwrap();
        assert_relative_eq!(sm[511], 1.0);
        assert_relative_eq!(sm[507], 1.0);
        assert_eq!(sm[506], 0.0);

        assert!(matches!(smooth_periodogram(&flat, 32), Err(Error::InvalidSmoothing { .. })));
    }

    #[test]
    fn delta_band_has_sixteen_frequencies() {
        let delta = &BandDefinition::standard()[0];
        let idx = band_indices(delta, 256.0, 512).unwrap();
        assert_eq!(idx.len(), 16);
        let expected: Vec<usize> = (1..=8).chain(504..=511).collect();
        assert_eq!(idx, expected);
    }

    #[test]
    fn band_boundary_belongs_to_lower_band() {
        // 4 Hz lands exactly on r = 8 for s = 256, L = 512.
        let bands = BandDefinition::standard();
        assert!(band_indices(&bands[0], 256.0, 512).unwrap().contains(&8));
        assert!(!band_indices(&bands[1], 256.0, 512).unwrap().contains(&8));
        // Nyquist has no negative mirror on the grid.
        let top = BandDefinition::new("top", 100.0, 128.0);
        let idx = band_indices(&top, 256.0, 512).unwrap();
        assert!(idx.contains(&256));
        assert_eq!(idx.len(), 2 * 56 - 1);
    }

    #[test]
    fn empty_band_rejected() {
        let narrow = BandDefinition::new("narrow", 1.0, 1.2);
        assert!(matches!(band_indices(&narrow, 256.0, 512), Err(Error::EmptyBand { .. })));
        let bad = BandDefinition::new("bad", 5.0, 4.0);
        assert!(matches!(band_indices(&bad, 256.0, 512), Err(Error::InvalidBand(_))));
    }

    #[test]
    fn zero_signal_zero_bands() {
        let s = series_from(vec![vec![0.0; 1024], vec![0.0; 1024]], 256.0);
        let spec = segment_blocks(&s, 512).unwrap();
        let t = band_periodograms(&s, &spec, &BandDefinition::standard(), 5).unwrap();
        for b in 0..2 {
            for l in 0..5 {
                assert_eq!(t.get(b, 0, l), 0.0);
            }
        }
    }

    #[test]
    fn ten_hz_lands_in_alpha() {
        let x: Vec<f64> = (0..512)
            .map(|t| (2.0 * std::f64::consts::PI * 10.0 * t as f64 / 256.0).cos())
            .collect();
        let s = series_from(vec![x.clone(), x], 256.0);
        let spec = segment_blocks(&s, 512).unwrap();
        let t = band_periodograms(&s, &spec, &BandDefinition::standard(), 5).unwrap();
        let alpha = t.get(0, 0, 2);
        for l in [0, 1, 3, 4] {
            assert!(alpha > t.get(0, 0, l), "band {l}");
        }
    }

    #[test]
    fn estimator_matches_direct_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x: Vec<f64> = (0..512).map(|_| rng.random::<f64>() - 0.3).collect();
        let s = series_from(vec![x.clone(), x], 256.0);
        let spec = segment_blocks(&s, 512).unwrap();
        let dft = block_periodogram(&s, &spec, 0, MeanHandling::Subtract).unwrap();
        let smoothed = smooth_periodogram(&dft.auto(0), 5).unwrap();
        let t = band_periodograms(&s, &spec, &BandDefinition::standard(), 5).unwrap();
        for (l, band) in BandDefinition::standard().iter().enumerate() {
            let direct = band_aggregate(&smoothed, band, 256.0).unwrap();
            assert_relative_eq!(t.get(0, 0, l), direct, max_relative = 1e-12);
        }
    }

    #[test]
    fn coherence_of_scaled_copy_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x: Vec<f64> = (0..512).map(|_| rng.random::<f64>()).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let s = series_from(vec![x, y], 256.0);
        let spec = segment_blocks(&s, 512).unwrap();
        for band in BandDefinition::standard() {
            let c = band_coherence(&s, &spec, 0, &band, 0, 1, 5).unwrap();
            assert_relative_eq!(c, 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn coherence_needs_power() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x: Vec<f64> = (0..512).map(|_| rng.random::<f64>()).collect();
        let s = series_from(vec![x, vec![1.0; 512]], 256.0);
        let spec = segment_blocks(&s, 512).unwrap();
        let band = &BandDefinition::standard()[2];
        assert!(matches!(
            band_coherence(&s, &spec, 0, band, 0, 1, 5),
            Err(Error::DegeneratePower { .. })
        ));
    }

    #[test]
    fn band_limit_keeps_in_band_tone() {
        let tone = |hz: f64| -> Vec<f64> {
            (0..512).map(|t| (2.0 * std::f64::consts::PI * hz * t as f64 / 256.0).sin()).collect()
        };
        let alpha = &BandDefinition::standard()[2];
        let inside = tone(10.0);
        let kept = band_limit(&inside, alpha, 256.0).unwrap();
        for (a, b) in kept.iter().zip(&inside) {
            assert_relative_eq!(a, b, epsilon = 1e-9);
        }
        let removed = band_limit(&tone(20.0), alpha, 256.0).unwrap();
        assert!(removed.iter().all(|v| v.abs() < 1e-9));
    }

    proptest::proptest! {
        #[test]
        fn parseval_holds(x in proptest::collection::vec(-1e3f64..1e3, 64), y in proptest::collection::vec(-1.0f64..1.0, 64)) {
            let s = series_from(vec![x, y], 64.0);
            let spec = segment_blocks(&s, 64).unwrap();
            let dft = block_periodogram(&s, &spec, 0, MeanHandling::Keep).unwrap();
            for j in 0..2 {
                let time: f64 = s.channel(j).iter().map(|v| v * v).sum();
                let freq: f64 = dft.auto(j).iter().sum();
                proptest::prop_assert!((time - freq).abs() <= 1e-8 * time.max(1e-300));
            }
        }

        #[test]
        fn smoothing_keeps_total_power(raw in proptest::collection::vec(0.0f64..10.0, 64), n in 0usize..4) {
            let smoothed = smooth_periodogram(&raw, n).unwrap();
            let a: f64 = raw.iter().sum();
            let b: f64 = smoothed.iter().sum();
            proptest::prop_assert!((a - b).abs() <= 1e-10 * a.max(1.0));
            proptest::prop_assert!(smoothed.iter().all(|&v| v >= 0.0));
        }
    }
}
