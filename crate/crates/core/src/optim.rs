//! Derivative-free Nelder–Mead simplex minimisation with restarts.

#[derive(Debug, Clone, Copy)]
pub struct NelderMeadOptions {
    /// Evaluation budget per attempt.
    pub max_evals: usize,
    /// Stop when every vertex is within this distance of the best one.
    pub x_tol: f64,
    /// Restarts from the best point after the first attempt.
    pub restarts: usize,
    /// Initial simplex edge length.
    pub step: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self { max_evals: 2000, x_tol: 1e-8, restarts: 3, step: 0.25 }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    /// The last attempt met the simplex-diameter tolerance.
    pub converged: bool,
    pub attempts: usize,
    /// Best value after each iteration, across attempts.
    pub trace: Vec<f64>,
}

struct Attempt {
    x: Vec<f64>,
    value: f64,
    evaluations: usize,
    converged: bool,
}

fn eval<F: FnMut(&[f64]) -> f64>(f: &mut F, x: &[f64]) -> f64 {
    let v = f(x);
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

fn diameter(simplex: &[Vec<f64>]) -> f64 {
    let best = &simplex[0];
    simplex[1..]
        .iter()
        .map(|v| v.iter().zip(best).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
        .fold(0.0, f64::max)
}

fn attempt<F: FnMut(&[f64]) -> f64>(
    f: &mut F,
    start: &[f64],
    start_value: f64,
    options: &NelderMeadOptions,
    trace: &mut Vec<f64>,
) -> Attempt {
    let n = start.len();
    let mut simplex: Vec<Vec<f64>> = vec![start.to_vec()];
    let mut values = vec![start_value];
    for i in 0..n {
        let mut v = start.to_vec();
        v[i] += options.step;
        values.push(eval(f, &v));
        simplex.push(v);
    }
    let mut evaluations = n;
    let mut order: Vec<usize> = (0..=n).collect();
    loop {
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();
        order = (0..=n).collect();
        trace.push(values[0]);
        if diameter(&simplex) < options.x_tol {
            return Attempt { x: simplex[0].clone(), value: values[0], evaluations, converged: true };
        }
        if evaluations >= options.max_evals {
            return Attempt { x: simplex[0].clone(), value: values[0], evaluations, converged: false };
        }
        let centroid: Vec<f64> = (0..n).map(|k| simplex[..n].iter().map(|v| v[k]).sum::<f64>() / n as f64).collect();
        let towards = |coef: f64, worst: &[f64]| -> Vec<f64> {
            centroid.iter().zip(worst).map(|(c, w)| c + coef * (w - c)).collect()
        };
        let reflected = towards(-1.0, &simplex[n]);
        let fr = eval(f, &reflected);
        evaluations += 1;
        if fr < values[0] {
            let expanded = towards(-2.0, &simplex[n]);
            let fe = eval(f, &expanded);
            evaluations += 1;
            if fe < fr {
                simplex[n] = expanded;
                values[n] = fe;
            } else {
                simplex[n] = reflected;
                values[n] = fr;
            }
            continue;
        }
        if fr < values[n - 1] {
            simplex[n] = reflected;
            values[n] = fr;
            continue;
        }
        let (contracted, fc) = if fr < values[n] {
            let c = towards(-0.5, &simplex[n]);
            let fc = eval(f, &c);
            (c, fc)
        } else {
            let c = towards(0.5, &simplex[n]);
            let fc = eval(f, &c);
            (c, fc)
        };
        evaluations += 1;
        if fc < values[n].min(fr) {
            simplex[n] = contracted;
            values[n] = fc;
            continue;
        }
        let best = simplex[0].clone();
        for i in 1..=n {
            simplex[i] = best.iter().zip(&simplex[i]).map(|(b, v)| b + 0.5 * (v - b)).collect();
            values[i] = eval(f, &simplex[i]);
        }
        evaluations += n;
    }
}

/// Minimises `f` from `x0`. Each restart rebuilds the simplex around the best
/// point found so far; restarting stops once an attempt converges without
/// improving on the previous best.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(mut f: F, x0: &[f64], options: &NelderMeadOptions) -> Minimum {
    let mut trace = Vec::new();
    let mut best_x = x0.to_vec();
    let mut best_value = eval(&mut f, x0);
    let mut evaluations = 1;
    let mut converged = false;
    let mut attempts = 0;
    for _ in 0..=options.restarts {
        attempts += 1;
        let run = attempt(&mut f, &best_x, best_value, options, &mut trace);
        evaluations += run.evaluations;
        let improved = run.value < best_value - 1e-12 * (1.0 + best_value.abs());
        if run.value <= best_value {
            best_x = run.x;
            best_value = run.value;
        }
        converged = run.converged;
        if converged && !improved {
            break;
        }
    }
    Minimum { x: best_x, value: best_value, evaluations, converged, attempts, trace }
}
