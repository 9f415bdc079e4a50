use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use spexcon::margins::to_laplace;
use spexcon::simgen::{ar2_path, BandCorrelation};
use spexcon::spectral::{band_coherence, band_periodograms, segment_blocks};
use spexcon::{synthesize_eeg, Error, BandDefinition, MultiChannelSeries, Scenario, SimConfig};

#[test]
fn desk_scale_dimensions() {
    let data = synthesize_eeg(&Scenario::HighChange.config(2)).unwrap();
    assert_eq!(data.series.n_channels(), 4);
    assert_eq!(data.series.n_samples(), 512_000);
    assert_eq!(data.labels.len(), 1000);
    let share = data.labels.burst_probability();
    // Binomial(1000, 0.35): sd 0.015.
    assert!((share - 0.35).abs() < 0.06, "burst share {share}");
}

fn r_squared(x: &DMatrix<f64>, y: &DVector<f64>) -> f64 {
    let beta = (x.transpose() * x).lu().solve(&(x.transpose() * y)).unwrap();
    let fitted = x * beta;
    let mean = y.mean();
    let ss_res: f64 = (y - fitted).iter().map(|r| r * r).sum();
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    1.0 - ss_res / ss_tot
}

/// Fraction of band-energy variance explained by the block coefficients.
fn explained(noise_variance: f64) -> f64 {
    let mut config = SimConfig::desk_scale(vec![BandCorrelation::exchangeable(2, 0.5, 0.5); 5], 7);
    config.n_channels = 2;
    config.n_blocks = 300;
    config.noise_variance = noise_variance;
    let data = synthesize_eeg(&config).unwrap();
    let spec = segment_blocks(&data.series, 512).unwrap();
    let tensor = band_periodograms(&data.series, &spec, &BandDefinition::standard(), 5).unwrap();
    let n = spec.n_blocks;
    let mut worst: f64 = 1.0;
    for band in 0..5 {
        // Energy is the gain squared times a combination of all five squared
        // coefficients: the oscillation spectra overlap every band.
        let x = DMatrix::from_fn(n, 6, |b, k| {
            let g2 = if data.labels.label(b) == 1 { config.burst_amplitude.powi(2) } else { 1.0 };
            if k == 0 { g2 } else { g2 * data.coefficients[b][(0, k - 1)].powi(2) }
        });
        let y = DVector::from_fn(n, |b, _| tensor.get(b, 0, band));
        worst = worst.min(r_squared(&x, &y));
    }
    worst
}

#[test]
fn band_energy_follows_squared_coefficients() {
    let quiet = explained(1e-4);
    let noisy = explained(25.0);
    assert!(quiet > 0.8, "R^2 {quiet}");
    assert!(quiet > noisy, "R^2 {quiet} vs {noisy}");
}

#[test]
fn oscillations_are_incoherent() {
    let n = 512 * 40;
    let a = ar2_path(10.0, 1.05, 256.0, n, &mut ChaCha8Rng::seed_from_u64(1));
    let b = ar2_path(10.0, 1.05, 256.0, n, &mut ChaCha8Rng::seed_from_u64(2));
    let s = MultiChannelSeries::from_channels(vec![a.clone(), b, a], 256.0).unwrap();
    let spec = segment_blocks(&s, 512).unwrap();
    let alpha = &BandDefinition::standard()[2];
    let mean = |j: usize, k: usize| {
        (0..spec.n_blocks).map(|blk| band_coherence(&s, &spec, blk, alpha, j, k, 5).unwrap()).sum::<f64>()
            / spec.n_blocks as f64
    };
    let independent = mean(0, 1);
    assert!(independent < 0.2, "coherence {independent}");
    assert!((mean(0, 2) - 1.0).abs() < 1e-9);
}

#[test]
fn near_single_regime_fails_phase_guard() {
    let mut config = SimConfig::desk_scale(vec![BandCorrelation::exchangeable(3, 0.5, 0.5); 5], 3);
    config.n_channels = 3;
    config.n_blocks = 300;
    config.block_length = 128;
    config.burst_probability = 0.995;
    let data = synthesize_eeg(&config).unwrap();
    let spec = segment_blocks(&data.series, 128).unwrap();
    let tensor = band_periodograms(&data.series, &spec, &BandDefinition::standard(), 5).unwrap();
    let err = to_laplace(&tensor, &data.labels).unwrap_err();
    assert!(matches!(err, Error::InsufficientPhaseData { phase: 0, .. }), "{err}");
}
