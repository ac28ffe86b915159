//! GARCH(1,1) benchmark: Gaussian quasi-maximum-likelihood fitting and
//! multi-step forecasts of squared returns.
//!
//! The likelihood is maximized by Nelder-Mead over the unconstrained
//! reparameterization `(log omega, logit a1, logit b1)` with a quadratic
//! penalty keeping `a1 + b1 <= 0.999`, restarted from five deterministic
//! points; small rolling windows have rough likelihood surfaces and a
//! single start is not reliable.

use crate::error::{Error, Result};
use crate::series::ReturnSeries;

/// GARCH(1,1) parameters: `sigma^2_t = omega + a1*Y^2_{t-1} + b1*sigma^2_{t-1}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GarchParams {
    pub omega: f64,
    pub a1: f64,
    pub b1: f64,
}

impl GarchParams {
    pub fn new(omega: f64, a1: f64, b1: f64) -> Result<Self> {
        let p = Self { omega, a1, b1 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "omega {} must be strictly positive",
                self.omega
            )));
        }
        if self.a1 < 0.0 || self.b1 < 0.0 {
            return Err(Error::InvalidInput("a1 and b1 must be nonnegative".into()));
        }
        if self.a1 + self.b1 >= 1.0 {
            return Err(Error::InvalidInput(format!(
                "a1 + b1 = {} violates stationarity",
                self.a1 + self.b1
            )));
        }
        Ok(())
    }

    /// Long-run variance `omega / (1 - a1 - b1)`.
    pub fn stationary_variance(&self) -> f64 {
        self.omega / (1.0 - self.a1 - self.b1)
    }
}

/// A fitted model: parameters, Gaussian log-likelihood kernel, the fitted
/// conditional-variance path, and whether the optimizer converged.
#[derive(Debug, Clone, PartialEq)]
pub struct GarchFit {
    pub params: GarchParams,
    pub loglik: f64,
    pub sigma2_path: Vec<f64>,
    pub converged: bool,
}

/// Fitting options. Returns are treated as zero-mean by default since the
/// target is the squared-return scale; demeaning is available as a toggle.
#[derive(Debug, Clone, Copy, Default)]
pub struct FitOptions {
    pub demean: bool,
}

/// Conditional-variance recursion with `sigma^2_1` pinned to the sample
/// variance of the window.
fn variance_path(ys: &[f64], omega: f64, a1: f64, b1: f64, init: f64) -> Vec<f64> {
    let mut path = Vec::with_capacity(ys.len());
    let mut prev = init;
    path.push(prev);
    for t in 1..ys.len() {
        prev = omega + a1 * ys[t - 1] * ys[t - 1] + b1 * prev;
        path.push(prev);
    }
    path
}

/// Gaussian log-likelihood kernel `sum -0.5*(ln sigma^2 + y^2/sigma^2)`.
fn loglik_kernel(ys: &[f64], sigma2: &[f64]) -> f64 {
    ys.iter()
        .zip(sigma2)
        .map(|(y, s2)| -0.5 * (s2.ln() + y * y / s2))
        .sum()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn theta_to_params(theta: &[f64; 3]) -> (f64, f64, f64) {
    let omega = theta[0].clamp(-60.0, 60.0).exp();
    let a1 = sigmoid(theta[1].clamp(-40.0, 40.0));
    let b1 = sigmoid(theta[2].clamp(-40.0, 40.0));
    (omega, a1, b1)
}

/// Negative log-likelihood with a penalty outside `a1 + b1 <= 0.999`.
fn objective(theta: &[f64; 3], ys: &[f64], init_var: f64) -> f64 {
    let (omega, a1, b1) = theta_to_params(theta);
    let persistence = a1 + b1;
    let penalty = if persistence > 0.999 {
        1e6 * (persistence - 0.999).powi(2) * ys.len() as f64
    } else {
        0.0
    };
    let sigma2 = variance_path(ys, omega, a1, b1, init_var);
    -loglik_kernel(ys, &sigma2) + penalty
}

/// Plain Nelder-Mead on a 3-simplex. Returns (best theta, best f, converged).
fn nelder_mead<F: Fn(&[f64; 3]) -> f64>(
    f: F,
    start: [f64; 3],
    max_iter: usize,
    tol: f64,
) -> ([f64; 3], f64, bool) {
    const ALPHA: f64 = 1.0;
    const GAMMA: f64 = 2.0;
    const RHO: f64 = 0.5;
    const SIGMA: f64 = 0.5;

    let mut simplex: Vec<[f64; 3]> = vec![start];
    for i in 0..3 {
        let mut v = start;
        v[i] += if v[i].abs() > 1.0 { 0.1 * v[i].abs() } else { 0.25 };
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(&f).collect();

    let mut converged = false;
    for _ in 0..max_iter {
        let mut order: Vec<usize> = (0..4).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let (best, worst) = (order[0], order[3]);
        if (values[worst] - values[best]).abs()
            <= tol * (1.0 + values[best].abs())
        {
            converged = true;
            break;
        }
        // Centroid of all but the worst.
        let mut centroid = [0.0; 3];
        for &i in &order[..3] {
            for d in 0..3 {
                centroid[d] += simplex[i][d] / 3.0;
            }
        }
        let reflect = std::array::from_fn(|d| centroid[d] + ALPHA * (centroid[d] - simplex[worst][d]));
        let f_reflect = f(&reflect);
        if f_reflect < values[best] {
            let expand =
                std::array::from_fn(|d| centroid[d] + GAMMA * (reflect[d] - centroid[d]));
            let f_expand = f(&expand);
            if f_expand < f_reflect {
                simplex[worst] = expand;
                values[worst] = f_expand;
            } else {
                simplex[worst] = reflect;
                values[worst] = f_reflect;
            }
        } else if f_reflect < values[order[2]] {
            simplex[worst] = reflect;
            values[worst] = f_reflect;
        } else {
            let contract =
                std::array::from_fn(|d| centroid[d] + RHO * (simplex[worst][d] - centroid[d]));
            let f_contract = f(&contract);
            if f_contract < values[worst] {
                simplex[worst] = contract;
                values[worst] = f_contract;
            } else {
                // Shrink toward the best vertex.
                let best_v = simplex[best];
                for i in 0..4 {
                    if i == best {
                        continue;
                    }
                    for d in 0..3 {
                        simplex[i][d] = best_v[d] + SIGMA * (simplex[i][d] - best_v[d]);
                    }
                    values[i] = f(&simplex[i]);
                }
            }
        }
    }
    let mut best_idx = 0;
    for i in 1..4 {
        if values[i] < values[best_idx] {
            best_idx = i;
        }
    }
    (simplex[best_idx], values[best_idx], converged)
}

/// Fits GARCH(1,1) by Gaussian quasi-MLE with default options.
pub fn fit_garch11(returns: &ReturnSeries) -> Result<GarchFit> {
    fit_garch11_with(returns, &FitOptions::default())
}

/// Fits GARCH(1,1) by Gaussian quasi-MLE.
///
/// Non-convergence is reported through the `converged` flag with the best
/// parameters found, never as an error; rolling harnesses must proceed.
pub fn fit_garch11_with(returns: &ReturnSeries, options: &FitOptions) -> Result<GarchFit> {
    if returns.len() < 50 {
        return Err(Error::InvalidInput(format!(
            "GARCH fit needs at least 50 points, got {}",
            returns.len()
        )));
    }
    let mut ys = returns.values().to_vec();
    if options.demean {
        let mean = ys.iter().sum::<f64>() / ys.len() as f64;
        for y in &mut ys {
            *y -= mean;
        }
    }
    let n = ys.len() as f64;
    let mean = ys.iter().sum::<f64>() / n;
    let sample_var = ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n;
    if sample_var <= 0.0 {
        return Err(Error::DegenerateData(
            "constant returns cannot identify a GARCH model".into(),
        ));
    }

    // Deterministic multi-start over plausible persistence mixes.
    let starts = [(0.05, 0.90), (0.10, 0.80), (0.10, 0.60), (0.30, 0.50), (0.02, 0.95)];
    let mut best: Option<([f64; 3], f64, bool)> = None;
    for &(a1, b1) in &starts {
        let omega = sample_var * (1.0 - a1 - b1);
        let start = [omega.ln(), logit(a1), logit(b1)];
        let result = nelder_mead(
            |theta| objective(theta, &ys, sample_var),
            start,
            600,
            1e-10,
        );
        if best.as_ref().is_none_or(|b| result.1 < b.1) {
            best = Some(result);
        }
    }
    let (theta, _, converged) = best.expect("at least one start");
    let (omega, a1, b1) = theta_to_params(&theta);
    // The penalty keeps fits inside a1 + b1 <= 0.999; clamp residual excess
    // from the final simplex so the stationarity invariant holds exactly.
    let (a1, b1) = if a1 + b1 >= 0.9995 {
        let scale = 0.9995 / (a1 + b1);
        (a1 * scale, b1 * scale)
    } else {
        (a1, b1)
    };
    let params = GarchParams { omega, a1, b1 };
    params.validate()?;
    let sigma2_path = variance_path(&ys, omega, a1, b1, sample_var);
    let loglik = loglik_kernel(&ys, &sigma2_path);
    Ok(GarchFit {
        params,
        loglik,
        sigma2_path,
        converged,
    })
}

/// Expected squared returns `E[Y^2_{n+1}], ..., E[Y^2_{n+h}]`:
/// the first step is `omega + a1*Y^2_n + b1*sigma^2_n`, later steps follow
/// `E[Y^2_{n+j}] = omega + (a1 + b1) * E[Y^2_{n+j-1}]`.
pub fn forecast_sq_returns(fit: &GarchFit, last_y2: f64, last_sigma2: f64, h: usize) -> Vec<f64> {
    let p = fit.params;
    let mut out = Vec::with_capacity(h);
    let mut current = p.omega + p.a1 * last_y2 + p.b1 * last_sigma2;
    for _ in 0..h {
        out.push(current);
        current = p.omega + (p.a1 + p.b1) * current;
    }
    out
}
