//! Phase-dependent conditional extremes model.
//!
//! Conditional on the conditioning channel `q` exceeding a high Laplace
//! threshold `v`, every other channel follows
//!
//! ```text
//! Y_j = tanh(a_j + Delta_j d) Y_q + Y_q^{beta_j} Z_j^{(d)},   d in {0, 1}
//! ```
//!
//! Each component is fitted by maximising a Gaussian working likelihood for
//! `Z^{(d)}` with phase-specific mean and scale. Simulation replaces the
//! Gaussian with jointly resampled empirical residual rows.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::margins::{laplace_cdf, laplace_quantile, pearson, LaplaceSample};
use crate::optim::{nelder_mead, NelderMeadOptions};

/// Minimum exceedances required in each phase.
pub const MIN_EXCEEDANCES_PER_PHASE: usize = 10;
/// Upper limit of beta is `1 - BETA_MARGIN`.
pub const BETA_MARGIN: f64 = 1e-6;
/// Floor on the residual scale.
pub const SIGMA_FLOOR: f64 = 1e-8;

/// Blocks whose conditioning-channel value exceeds the threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExceedanceSet {
    pub conditioning: usize,
    pub kappa: f64,
    pub threshold: f64,
    /// Channel index of each conditioned column.
    pub channels: Vec<usize>,
    /// Block index of each row.
    pub blocks: Vec<usize>,
    /// Conditioning value `y_b` per row.
    pub conditioning_values: Vec<f64>,
    /// Conditioned values per row, aligned with `channels`.
    pub rows: Vec<Vec<f64>>,
    pub phases: Vec<u8>,
    /// Burst proportion over all blocks, not only exceedances.
    pub burst_probability: f64,
}

impl ExceedanceSet {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn phase_count(&self, phase: u8) -> usize {
        self.phases.iter().filter(|&&d| d == phase).count()
    }

    /// Column of conditioned channel at position `k` of `channels`.
    pub fn column(&self, k: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[k]).collect()
    }

    fn check_phases(&self) -> Result<()> {
        for phase in 0..2u8 {
            let count = self.phase_count(phase);
            if count < MIN_EXCEEDANCES_PER_PHASE {
                return Err(Error::ThresholdTooHigh { phase, count, required: MIN_EXCEEDANCES_PER_PHASE });
            }
        }
        Ok(())
    }
}

/// Rows with `Y_q > F^{-1}(kappa)`.
pub fn extract_exceedances(laplace: &LaplaceSample, conditioning: usize, kappa: f64) -> Result<ExceedanceSet> {
    let p = laplace.n_channels();
    if conditioning >= p {
        return Err(Error::InvalidConfig(format!("conditioning channel {conditioning} out of range for {p} channels")));
    }
    let threshold = laplace_quantile(kappa)?;
    let channels: Vec<usize> = (0..p).filter(|&j| j != conditioning).collect();
    let labels = laplace.labels();
    let mut set = ExceedanceSet {
        conditioning,
        kappa,
        threshold,
        channels: channels.clone(),
        blocks: vec![],
        conditioning_values: vec![],
        rows: vec![],
        phases: vec![],
        burst_probability: labels.burst_probability(),
    };
    for b in 0..laplace.n_blocks() {
        let y = laplace.get(b, conditioning);
        if y > threshold {
            set.blocks.push(b);
            set.conditioning_values.push(y);
            set.rows.push(channels.iter().map(|&j| laplace.get(b, j)).collect());
            set.phases.push(labels.label(b));
        }
    }
    set.check_phases()?;
    Ok(set)
}

/// Parameters of one conditioned component `j | q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentParams {
    pub a: f64,
    pub delta: f64,
    pub beta: f64,
    /// Residual mean per phase.
    pub mu: [f64; 2],
    /// Residual scale per phase.
    pub sigma: [f64; 2],
}

impl ComponentParams {
    pub fn alpha(&self, phase: u8) -> f64 {
        (self.a + self.delta * f64::from(phase)).tanh()
    }

    /// The same model with phases 0 and 1 swapped.
    pub fn relabelled(&self) -> Self {
        Self {
            a: self.a + self.delta,
            delta: -self.delta,
            beta: self.beta,
            mu: [self.mu[1], self.mu[0]],
            sigma: [self.sigma[1], self.sigma[0]],
        }
    }
}

/// Gaussian working negative log-likelihood of one component.
pub fn negative_log_likelihood(params: &ComponentParams, y: &[f64], yj: &[f64], phases: &[u8]) -> f64 {
    let mut total = 0.0;
    for ((&y, &x), &d) in y.iter().zip(yj).zip(phases) {
        let d = d as usize;
        let scale = y.powf(params.beta);
        let sigma = params.sigma[d];
        let centred = x - params.alpha(d as u8) * y - params.mu[d] * scale;
        total += sigma.ln() + params.beta * y.ln() + centred * centred / (2.0 * sigma * sigma * scale * scale);
    }
    total
}

/// Fitted component `j | q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentFit {
    pub channel: usize,
    pub params: ComponentParams,
    pub nll: f64,
    /// Likelihood at the documented starting point.
    pub initial_nll: f64,
    pub evaluations: usize,
    pub attempts: usize,
    /// A residual scale hit the floor: the component tracks the conditioning
    /// channel (near) exactly in some phase.
    pub perfect_dependence: bool,
}

impl ComponentFit {
    pub fn alpha(&self, phase: u8) -> f64 {
        self.params.alpha(phase)
    }

    pub fn delta_star(&self) -> f64 {
        self.alpha(1) - self.alpha(0)
    }
}

/// Fitted model for one conditioning channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CEFit {
    pub conditioning: usize,
    pub threshold: f64,
    pub kappa: f64,
    pub components: Vec<ComponentFit>,
    /// Jointly observed residual rows, per phase.
    pub residual_pool: [Vec<Vec<f64>>; 2],
    pub burst_probability: f64,
}

impl CEFit {
    pub fn component(&self, channel: usize) -> Option<&ComponentFit> {
        self.components.iter().find(|c| c.channel == channel)
    }
}

/// `tanh(a_{j|q} + Delta_{j|q} d)` for channel `j`.
pub fn alpha_of(fit: &CEFit, channel: usize, phase: u8) -> Result<f64> {
    if phase > 1 {
        return Err(Error::InvalidConfig(format!("phase {phase} is not 0 or 1")));
    }
    fit.component(channel)
        .map(|c| c.alpha(phase))
        .ok_or_else(|| Error::InvalidConfig(format!("channel {channel} is not a conditioned channel")))
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn beta_from(raw: f64) -> f64 {
    (1.0 - BETA_MARGIN) * logistic(raw)
}

fn beta_to_raw(beta: f64) -> f64 {
    let s = beta / (1.0 - BETA_MARGIN);
    (s / (1.0 - s)).ln()
}

/// Residual means and scales maximising the likelihood for fixed
/// `(a, Delta, beta)`.
struct Profile {
    mu: [f64; 2],
    sigma: [f64; 2],
    nll: f64,
}

fn profile(a: f64, delta: f64, beta: f64, log_y: &[f64], y: &[f64], yj: &[f64], phases: &[u8]) -> Profile {
    let alpha = [a.tanh(), (a + delta).tanh()];
    let mut sum = [0.0; 2];
    let mut sum_sq = [0.0; 2];
    let mut count = [0.0; 2];
    for i in 0..y.len() {
        let d = phases[i] as usize;
        let z = (yj[i] - alpha[d] * y[i]) * (-beta * log_y[i]).exp();
        sum[d] += z;
        sum_sq[d] += z * z;
        count[d] += 1.0;
    }
    let mut mu = [0.0; 2];
    let mut sigma = [SIGMA_FLOOR; 2];
    let mut nll = beta * log_y.iter().sum::<f64>();
    for d in 0..2 {
        if count[d] > 0.0 {
            mu[d] = sum[d] / count[d];
            let var = (sum_sq[d] / count[d] - mu[d] * mu[d]).max(0.0);
            sigma[d] = var.sqrt().max(SIGMA_FLOOR);
            nll += count[d] * sigma[d].ln() + count[d] * var / (2.0 * sigma[d] * sigma[d]);
        }
    }
    Profile { mu, sigma, nll }
}

fn sample_sd(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt()
}

/// Starting point: `a = atanh(clamp(corr, -0.99, 0.99))`, `Delta = 0`,
/// `beta = 0.2`, `mu = 0`, `sigma = sd(y_j)`.
pub fn initial_params(y: &[f64], yj: &[f64]) -> ComponentParams {
    let r = pearson(y, yj).clamp(-0.99, 0.99);
    let sd = sample_sd(yj).max(SIGMA_FLOOR);
    ComponentParams { a: r.atanh(), delta: 0.0, beta: 0.2, mu: [0.0; 2], sigma: [sd; 2] }
}

/// Fits one component by profile likelihood over `(a, Delta, beta)`.
pub fn fit_component(channel: usize, y: &[f64], yj: &[f64], phases: &[u8]) -> Result<ComponentFit> {
    let init = initial_params(y, yj);
    let initial_nll = negative_log_likelihood(&init, y, yj, phases);
    let log_y: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let objective = |theta: &[f64]| profile(theta[0], theta[1], beta_from(theta[2]), &log_y, y, yj, phases).nll;
    let start = [init.a, init.delta, beta_to_raw(init.beta)];
    let min = nelder_mead(objective, &start, &NelderMeadOptions::default());
    if !min.converged || !min.value.is_finite() {
        return Err(Error::FitFailure {
            channel,
            reason: format!(
                "simplex search stopped after {} evaluations in {} attempts at nll {}",
                min.evaluations, min.attempts, min.value
            ),
        });
    }
    let beta = beta_from(min.x[2]);
    let Profile { mu, sigma, .. } = profile(min.x[0], min.x[1], beta, &log_y, y, yj, phases);
    let perfect_dependence = sigma.iter().any(|&s| s <= SIGMA_FLOOR);
    if perfect_dependence {
        log::warn!("channel {channel}: residual scale at floor, near-perfect dependence");
    }
    let params = ComponentParams { a: min.x[0], delta: min.x[1], beta, mu, sigma };
    Ok(ComponentFit {
        channel,
        nll: negative_log_likelihood(&params, y, yj, phases),
        params,
        initial_nll,
        evaluations: min.evaluations,
        attempts: min.attempts,
        perfect_dependence,
    })
}

/// Fits every conditioned component independently and stores the joint
/// residual pool.
pub fn fit_spexcon(ex: &ExceedanceSet) -> Result<CEFit> {
    ex.check_phases()?;
    let y = &ex.conditioning_values;
    if y.iter().all(|v| *v == y[0]) {
        return Err(Error::Numeric("all conditioning exceedances are equal".into()));
    }
    let components = ex
        .channels
        .iter()
        .enumerate()
        .map(|(k, &channel)| fit_component(channel, y, &ex.column(k), &ex.phases))
        .collect::<Result<Vec<_>>>()?;
    let mut fit = CEFit {
        conditioning: ex.conditioning,
        threshold: ex.threshold,
        kappa: ex.kappa,
        components,
        residual_pool: [vec![], vec![]],
        burst_probability: ex.burst_probability,
    };
    fit.residual_pool = residuals(&fit, ex);
    Ok(fit)
}

/// `Z_{j,b} = (y_{j,b} - alpha^{(d)} y_b) / y_b^{beta}`, one row per
/// exceedance, split by phase.
pub fn residuals(fit: &CEFit, ex: &ExceedanceSet) -> [Vec<Vec<f64>>; 2] {
    let mut pools: [Vec<Vec<f64>>; 2] = [vec![], vec![]];
    for ((row, &y), &d) in ex.rows.iter().zip(&ex.conditioning_values).zip(&ex.phases) {
        let z = row
            .iter()
            .zip(&fit.components)
            .map(|(&x, c)| (x - c.alpha(d) * y) / y.powf(c.params.beta))
            .collect();
        pools[d as usize].push(z);
    }
    pools
}

/// One simulated conditional draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedRow {
    pub conditioning_value: f64,
    pub values: Vec<f64>,
    pub phase: u8,
}

/// Draws `(y, Y_{-q}, d)` from the fitted model with empirical residuals.
pub fn simulate_conditional(fit: &CEFit, n_sim: usize, seed: u64) -> Result<Vec<SimulatedRow>> {
    if n_sim == 0 {
        return Ok(vec![]);
    }
    for d in 0..2u8 {
        if fit.residual_pool[d as usize].is_empty() {
            return Err(Error::EmptyPool(d));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let floor = laplace_cdf(fit.threshold);
    let mut out = Vec::with_capacity(n_sim);
    for _ in 0..n_sim {
        let phase = u8::from(rng.random::<f64>() < fit.burst_probability);
        let y = if fit.threshold >= 0.0 {
            let e: f64 = Exp1.sample(&mut rng);
            fit.threshold + e
        } else {
            // Below the median the Laplace tail is not exponential.
            let u = floor + (1.0 - floor) * rng.random::<f64>();
            laplace_quantile(u.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON))?
        };
        let pool = &fit.residual_pool[phase as usize];
        let z = &pool[rng.random_range(0..pool.len())];
        let values = fit
            .components
            .iter()
            .zip(z)
            .map(|(c, &z)| c.alpha(phase) * y + y.powf(c.params.beta) * z)
            .collect();
        out.push(SimulatedRow { conditioning_value: y, values, phase });
    }
    Ok(out)
}

/// Aggregate `R = sum_{j != q} Y_j` of a row of conditioned values.
pub fn aggregate_r(values: &[f64]) -> f64 {
    values.iter().sum()
}

/// Observed aggregates `R_b` for every exceedance row.
pub fn observed_aggregates(ex: &ExceedanceSet) -> Vec<f64> {
    ex.rows.iter().map(|r| aggregate_r(r)).collect()
}

/// Quantile of a sorted sample at probability `p`, placing the k-th order
/// statistic at `k / (n + 1)` and interpolating linearly between them.
pub fn plotting_quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let h = (p * (n as f64 + 1.0) - 1.0).clamp(0.0, (n - 1) as f64);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QqPoint {
    pub empirical: f64,
    pub simulated: f64,
}

/// QQ pairs at plotting positions `i / (n_obs + 1)`; both inputs sorted.
pub fn qq_points(observed: &[f64], simulated: &[f64]) -> Result<Vec<QqPoint>> {
    if observed.is_empty() || simulated.is_empty() {
        return Err(Error::InvalidSeries("QQ plot needs two nonempty samples".into()));
    }
    let n = observed.len() as f64;
    Ok(observed
        .iter()
        .enumerate()
        .map(|(i, &x)| QqPoint { empirical: x, simulated: plotting_quantile(simulated, (i + 1) as f64 / (n + 1.0)) })
        .collect())
}

/// Two-sample Kolmogorov–Smirnov distance between sorted samples.
pub fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

/// Asymptotic two-sample KS critical value at level 0.05.
pub fn ks_critical_95(n: usize, m: usize) -> f64 {
    let (n, m) = (n as f64, m as f64);
    1.358 * ((n + m) / (n * m)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand_distr::StandardNormal;

    /// Exceedance set drawn from the model itself with Gaussian residuals.
    pub(crate) fn model_data(params: &[ComponentParams], n: usize, p_burst: f64, seed: u64) -> ExceedanceSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = 5.0f64.ln();
        let mut ex = ExceedanceSet {
            conditioning: 0,
            kappa: 0.9,
            threshold: v,
            channels: (1..=params.len()).collect(),
            blocks: (0..n).collect(),
            conditioning_values: vec![],
            rows: vec![],
            phases: vec![],
            burst_probability: p_burst,
        };
        for _ in 0..n {
            let d = u8::from(rand::Rng::random::<f64>(&mut rng) < p_burst);
            let e: f64 = Exp1.sample(&mut rng);
            let y = v + e;
            let row = params
                .iter()
                .map(|c| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    c.alpha(d) * y + y.powf(c.beta) * (c.mu[d as usize] + c.sigma[d as usize] * z)
                })
                .collect();
            ex.conditioning_values.push(y);
            ex.rows.push(row);
            ex.phases.push(d);
        }
        ex
    }

    fn truth() -> ComponentParams {
        ComponentParams { a: 0.4, delta: 0.5, beta: 0.3, mu: [0.2, -0.1], sigma: [0.8, 0.6] }
    }

    #[test]
    fn alpha_examples() {
        let p = ComponentParams { a: 0.5, delta: 0.3, beta: 0.0, mu: [0.0; 2], sigma: [1.0; 2] };
        assert_relative_eq!(p.alpha(1), 0.8f64.tanh(), epsilon = 1e-15);
        assert_relative_eq!(p.alpha(1), 0.6640, epsilon = 1e-4);
        let zero = ComponentParams { a: 0.0, delta: 0.0, ..p };
        assert_eq!(zero.alpha(0), 0.0);
        assert_eq!(zero.alpha(1), 0.0);
        let flat = ComponentParams { delta: 0.0, ..p };
        assert_eq!(flat.alpha(0), flat.alpha(1));
    }

    #[test]
    fn recovers_model_parameters() {
        let ex = model_data(&[truth()], 3000, 0.35, 7);
        let fit = fit_spexcon(&ex).unwrap();
        let c = &fit.components[0];
        assert!((c.params.a - 0.4).abs() < 0.1, "{:?}", c.params);
        assert!((c.params.delta - 0.5).abs() < 0.15, "{:?}", c.params);
        assert!((c.params.beta - 0.3).abs() < 0.1, "{:?}", c.params);
        assert!(c.nll <= c.initial_nll);
    }

    #[test]
    fn residual_means_match_profiled_mu() {
        let ex = model_data(&[truth(), truth()], 600, 0.4, 3);
        let fit = fit_spexcon(&ex).unwrap();
        for d in 0..2 {
            let pool = &fit.residual_pool[d];
            assert_eq!(pool.len(), ex.phase_count(d as u8));
            for (k, c) in fit.components.iter().enumerate() {
                let mean = pool.iter().map(|r| r[k]).sum::<f64>() / pool.len() as f64;
                assert_relative_eq!(mean, c.params.mu[d], epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn residual_round_trip() {
        let ex = model_data(&[truth(), truth()], 400, 0.4, 5);
        let fit = fit_spexcon(&ex).unwrap();
        let mut seen = [0usize; 2];
        for (i, row) in ex.rows.iter().enumerate() {
            let d = ex.phases[i];
            let y = ex.conditioning_values[i];
            let z = &fit.residual_pool[d as usize][seen[d as usize]];
            seen[d as usize] += 1;
            for (k, c) in fit.components.iter().enumerate() {
                let back = c.alpha(d) * y + y.powf(c.params.beta) * z[k];
                assert_relative_eq!(back, row[k], max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn zero_beta_residuals_are_plain_differences() {
        let ex = model_data(&[truth()], 100, 0.4, 5);
        let mut fit = fit_spexcon(&ex).unwrap();
        fit.components[0].params.beta = 0.0;
        let pools = residuals(&fit, &ex);
        let alpha0 = fit.components[0].alpha(0);
        let first0 = ex.phases.iter().position(|&d| d == 0).unwrap();
        assert_eq!(pools[0][0][0], ex.rows[first0][0] - alpha0 * ex.conditioning_values[first0]);
    }

    #[test]
    fn relabelled_likelihood_is_identical() {
        let ex = model_data(&[truth()], 300, 0.35, 9);
        let yj = ex.column(0);
        let swapped: Vec<u8> = ex.phases.iter().map(|d| 1 - d).collect();
        let p = truth();
        let a = negative_log_likelihood(&p, &ex.conditioning_values, &yj, &ex.phases);
        let b = negative_log_likelihood(&p.relabelled(), &ex.conditioning_values, &yj, &swapped);
        assert_relative_eq!(a, b, max_relative = 1e-12);
        assert_relative_eq!(p.alpha(0), p.relabelled().alpha(1), epsilon = 1e-15);
    }

    #[test]
    fn too_few_exceedances() {
        let mut ex = model_data(&[truth()], 100, 0.05, 1);
        ex.phases.iter_mut().take(95).for_each(|d| *d = 0);
        assert!(matches!(fit_spexcon(&ex), Err(Error::ThresholdTooHigh { .. })));
    }

    #[test]
    fn identical_columns_hit_dependence_boundary() {
        let mut ex = model_data(&[truth()], 300, 0.4, 2);
        for (row, &y) in ex.rows.iter_mut().zip(&ex.conditioning_values) {
            row[0] = y;
        }
        let fit = fit_spexcon(&ex).unwrap();
        let c = &fit.components[0];
        assert!(c.alpha(0) > 0.999 && c.alpha(1) > 0.999, "{:?}", c.params);
        assert!(c.params.sigma.iter().all(|s| *s < 1e-3));
    }

    #[test]
    fn simulation_basics() {
        let ex = model_data(&[truth(), truth()], 400, 0.35, 4);
        let fit = fit_spexcon(&ex).unwrap();
        assert!(simulate_conditional(&fit, 0, 1).unwrap().is_empty());
        let sims = simulate_conditional(&fit, 40_000, 1).unwrap();
        let mean_y = sims.iter().map(|r| r.conditioning_value).sum::<f64>() / sims.len() as f64;
        assert!((mean_y - (fit.threshold + 1.0)).abs() < 0.03, "{mean_y}");
        let burst = sims.iter().filter(|r| r.phase == 1).count() as f64 / sims.len() as f64;
        assert!((burst - 0.35).abs() < 0.015);
        assert_eq!(sims, simulate_conditional(&fit, 40_000, 1).unwrap());
    }

    #[test]
    fn degenerate_pool_gives_deterministic_curve() {
        let ex = model_data(&[truth()], 200, 0.35, 4);
        let mut fit = fit_spexcon(&ex).unwrap();
        fit.components[0].params.delta = 0.0;
        fit.residual_pool = [vec![vec![0.7]; 5], vec![vec![0.7]; 5]];
        let c = fit.components[0].params;
        for r in simulate_conditional(&fit, 200, 3).unwrap() {
            let y = r.conditioning_value;
            assert_relative_eq!(r.values[0], c.alpha(0) * y + y.powf(c.beta) * 0.7, max_relative = 1e-14);
        }
        fit.residual_pool[1].clear();
        assert!(matches!(simulate_conditional(&fit, 10, 3), Err(Error::EmptyPool(1))));
    }

    #[test]
    fn aggregate_sum() {
        assert_eq!(aggregate_r(&[1.0, 2.0, -0.5]), 2.5);
    }

    #[test]
    fn qq_on_identical_and_shifted() {
        let obs: Vec<f64> = (0..50).map(|i| (i as f64).sqrt()).collect();
        for q in qq_points(&obs, &obs).unwrap() {
            assert_relative_eq!(q.empirical, q.simulated, max_relative = 1e-14);
        }
        let shifted: Vec<f64> = obs.iter().map(|v| v + 1.0).collect();
        for q in qq_points(&obs, &shifted).unwrap() {
            assert_relative_eq!(q.simulated - q.empirical, 1.0, epsilon = 1e-12);
        }
        assert!(qq_points(&[], &obs).is_err());
    }

    #[test]
    fn ks_distance_basic() {
        let a = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(ks_distance(&a, &a), 0.0);
        assert_eq!(ks_distance(&a, &[10.0, 11.0]), 1.0);
        assert_relative_eq!(ks_distance(&[1.0, 2.0], &[1.5, 2.5]), 0.5);
    }

    proptest! {
        #[test]
        fn tanh_link_stays_inside(a in -50.0f64..50.0, delta in -50.0f64..50.0) {
            let p = ComponentParams { a, delta, beta: 0.5, mu: [0.0; 2], sigma: [1.0; 2] };
            for d in 0..2u8 {
                prop_assert!(p.alpha(d).abs() <= 1.0);
            }
            let q = ComponentParams { a: a / 25.0, delta: delta / 25.0, ..p };
            prop_assert!(q.alpha(0).abs() < 1.0 && q.alpha(1).abs() < 1.0);
        }
    }
}
