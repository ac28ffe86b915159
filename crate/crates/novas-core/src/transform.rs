//! NoVaS coefficient construction and kurtosis-target calibration.
//!
//! A NoVaS transform maps returns to
//! `W_t = Y_t / sqrt(c0*Y_t^2 + alpha*s^2_{t-1} + sum_i c_i*Y_{t-i}^2)`,
//! where the nonnegative coefficients together with `alpha` lie on the unit
//! simplex. The coefficient families differ in how `c_0..c_q` are generated:
//! equal weights, exponentially decaying weights, or the geometric weights
//! induced by expanding a GARCH(1,1) recursion into its infinite-order ARCH
//! form. Each family also has a parsimonious variant with the
//! contemporaneous `c0*Y_t^2` term removed, which frees the innovation range
//! from the `|W| < 1/sqrt(c0)` restriction.
//!
//! Calibration fixes `alpha` and grid-searches the family's free parameters
//! to minimize `|KURT(W) - 3|`, the distance of the transformed series from
//! normal kurtosis.

use crate::error::{Error, Result};
use crate::series::{sample_kurtosis, trailing_stats, ReturnSeries};
use rayon::prelude::*;

/// Smallest retained tail weight when truncating decaying coefficient tails.
const TAIL_EPS: f64 = 1e-8;
/// Bounds on the automatically chosen transform order.
const ORDER_FLOOR: usize = 10;
const ORDER_CAP: usize = 50;
/// Calibrated contemporaneous weight must not exceed this for beta-bearing
/// kinds, so the innovation range `1/sqrt(c0)` stays at least ~3.
const BETA_CAP: f64 = 0.111;
/// Maximum number of order escalations when the beta constraint fails.
const MAX_ESCALATIONS: usize = 3;
/// Minimum number of transformed points required to judge kurtosis.
const MIN_USABLE: usize = 10;
/// Tolerance on the simplex constraint.
const SIMPLEX_TOL: f64 = 1e-12;

/// The NoVaS coefficient families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MethodKind {
    /// Equal weights, `alpha = 0`.
    Simple,
    /// Exponentially decaying weights, `alpha = 0`.
    Exponential,
    /// Equal weights with free `alpha`.
    GenSimple,
    /// Exponentially decaying weights with free `alpha`.
    GenExponential,
    /// GARCH(1,1)-derived geometric weights with free `alpha`.
    Ga,
    /// Exponential weights without the contemporaneous term.
    GenExponentialNoBeta,
    /// GARCH-derived weights without the contemporaneous term.
    GaNoBeta,
}

impl MethodKind {
    pub const ALL: [MethodKind; 7] = [
        MethodKind::Simple,
        MethodKind::Exponential,
        MethodKind::GenSimple,
        MethodKind::GenExponential,
        MethodKind::Ga,
        MethodKind::GenExponentialNoBeta,
        MethodKind::GaNoBeta,
    ];

    /// Whether the family carries a contemporaneous `c0*Y_t^2` term.
    pub fn has_beta(self) -> bool {
        !matches!(
            self,
            MethodKind::GenExponentialNoBeta | MethodKind::GaNoBeta
        )
    }

    /// Whether `alpha` is a free parameter (the non-generalized kinds pin it
    /// to zero).
    pub fn has_free_alpha(self) -> bool {
        !matches!(self, MethodKind::Simple | MethodKind::Exponential)
    }

    pub fn label(self) -> &'static str {
        match self {
            MethodKind::Simple => "S-NoVaS",
            MethodKind::Exponential => "E-NoVaS",
            MethodKind::GenSimple => "GS-NoVaS",
            MethodKind::GenExponential => "GE-NoVaS",
            MethodKind::Ga => "GA-NoVaS",
            MethodKind::GenExponentialNoBeta => "GE-NoVaS-without-beta",
            MethodKind::GaNoBeta => "GA-NoVaS-without-beta",
        }
    }

    /// Parses the short command-line token for a kind.
    pub fn parse_token(token: &str) -> Option<Self> {
        match token.to_ascii_lowercase().as_str() {
            "s" | "simple" => Some(MethodKind::Simple),
            "e" | "exp" | "exponential" => Some(MethodKind::Exponential),
            "gs" => Some(MethodKind::GenSimple),
            "ge" => Some(MethodKind::GenExponential),
            "ga" => Some(MethodKind::Ga),
            "pge" | "ge-nobeta" => Some(MethodKind::GenExponentialNoBeta),
            "pga" | "ga-nobeta" => Some(MethodKind::GaNoBeta),
            _ => None,
        }
    }
}

/// A calibrated or constructed NoVaS coefficient vector.
///
/// `c[0]` weights the contemporaneous squared return, `c[1..=q]` weight lags
/// `1..=q`. Together with `alpha` the entries sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientVector {
    kind: MethodKind,
    alpha: f64,
    c: Vec<f64>,
}

impl CoefficientVector {
    /// Validates and wraps a coefficient vector: `alpha` in `[0, 1]`
    /// (1 being the pure-standardization limit), nonnegative entries,
    /// simplex sum within `1e-12`, and `c0 = 0` for the without-beta kinds.
    pub fn new(kind: MethodKind, alpha: f64, c: Vec<f64>) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidInput(format!("alpha {alpha} outside [0, 1]")));
        }
        if c.len() < 2 {
            return Err(Error::InvalidInput(
                "coefficient vector needs c0 plus at least one lag".into(),
            ));
        }
        if c.iter().any(|&x| !(x.is_finite() && x >= 0.0)) {
            return Err(Error::InvalidInput(
                "coefficients must be finite and nonnegative".into(),
            ));
        }
        let sum = alpha + c.iter().sum::<f64>();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidInput(format!(
                "alpha + sum(c) = {sum} violates the unit-simplex constraint"
            )));
        }
        if !kind.has_beta() && c[0] != 0.0 {
            return Err(Error::InvalidInput(format!(
                "{} requires c0 = 0, got {}",
                kind.label(),
                c[0]
            )));
        }
        Ok(Self { kind, alpha, c })
    }

    pub fn kind(&self) -> MethodKind {
        self.kind
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `c0..c_q`; `coefficients()[0]` is the contemporaneous weight.
    pub fn coefficients(&self) -> &[f64] {
        &self.c
    }

    pub fn c0(&self) -> f64 {
        self.c[0]
    }

    /// Number of lags `q`.
    pub fn order(&self) -> usize {
        self.c.len() - 1
    }

    /// Upper bound on |W| implied by the contemporaneous weight
    /// (infinite when `c0 = 0`).
    pub fn innovation_bound(&self) -> f64 {
        if self.c[0] > 0.0 {
            1.0 / self.c[0].sqrt()
        } else {
            f64::INFINITY
        }
    }
}

/// Free parameters of the GARCH-derived family: the contemporaneous load
/// `beta` and the GARCH pair `(a1, b1)` generating the geometric lag tail.
///
/// For the with-beta kind, calibration additionally requires
/// `beta + a1 + b1 < 1` and the contemporaneous unscaled weight to dominate
/// the lag weights; those are search-space constraints, not construction
/// constraints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaFreeParams {
    pub beta: f64,
    pub a1: f64,
    pub b1: f64,
}

impl GaFreeParams {
    pub fn new(beta: f64, a1: f64, b1: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&beta) {
            return Err(Error::InvalidInput(format!("beta {beta} outside [0, 1)")));
        }
        if !(a1 > 0.0 && a1 < 1.0) {
            return Err(Error::InvalidInput(format!("a1 {a1} outside (0, 1)")));
        }
        if !(b1 > 0.0 && b1 < 1.0) {
            return Err(Error::InvalidInput(format!(
                "b1 {b1} outside (0, 1); geometric tail diverges"
            )));
        }
        Ok(Self { beta, a1, b1 })
    }
}

/// Grids searched during calibration.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationGrids {
    /// Values of the scale-invariant weight `alpha` swept by variant
    /// selection; default `{0.1, ..., 0.8}`.
    pub alpha_grid: Vec<f64>,
    /// Step of the unit-interval grid for `beta`, `a1`, `b1`; default 0.02.
    pub unit_grid_step: f64,
    /// Grid for the exponential decay rate `c`; default 60 log-spaced points
    /// in `[0.01, 3]`.
    pub c_grid: Vec<f64>,
}

impl Default for CalibrationGrids {
    fn default() -> Self {
        Self {
            alpha_grid: (1..=8).map(|i| i as f64 / 10.0).collect(),
            unit_grid_step: 0.02,
            c_grid: log_spaced(0.01, 3.0, 60),
        }
    }
}

impl CalibrationGrids {
    /// Reduced-budget grids for quick runs: 3 alpha values and a 0.05 step.
    pub fn fast() -> Self {
        Self {
            alpha_grid: vec![0.2, 0.5, 0.8],
            unit_grid_step: 0.05,
            ..Self::default()
        }
    }

    /// The unit-interval grid `{step, 2*step, ...} < 1`.
    pub fn unit_grid(&self) -> Vec<f64> {
        let step = self.unit_grid_step;
        let mut grid = Vec::new();
        let mut k = 1usize;
        while (k as f64) * step < 1.0 - 1e-9 {
            grid.push(k as f64 * step);
            k += 1;
        }
        grid
    }

    pub fn validate(&self) -> Result<()> {
        if self.alpha_grid.is_empty() {
            return Err(Error::Config("alpha grid is empty".into()));
        }
        if self.alpha_grid.iter().any(|a| !(0.0..1.0).contains(a)) {
            return Err(Error::Config("alpha grid values must lie in [0, 1)".into()));
        }
        if !(self.unit_grid_step > 0.0 && self.unit_grid_step < 1.0) {
            return Err(Error::Config("unit grid step must lie in (0, 1)".into()));
        }
        if self.c_grid.is_empty() || self.c_grid.iter().any(|c| *c <= 0.0) {
            return Err(Error::Config("c grid must be nonempty and positive".into()));
        }
        Ok(())
    }
}

fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (ll, lh) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (ll + (lh - ll) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// A calibrated transform: the selected coefficients, the achieved
/// `|KURT(W) - 3|` objective, and the transformed series (which doubles as
/// the empirical innovation pool for bootstrap prediction).
#[derive(Debug, Clone, PartialEq)]
pub struct CalibratedTransform {
    pub coeffs: CoefficientVector,
    pub objective: f64,
    pub w_series: Vec<f64>,
}

/// Exponential-decay coefficients.
///
/// With beta: `c0 = c'`, `c_i = c' * exp(-c*i)` with
/// `c' = (1 - alpha) / sum_{j=0}^{p} exp(-c*j)`. Without beta: `c0 = 0`,
/// `c_i = (1 - alpha) * exp(-c*i) / sum_{j=1}^{p} exp(-c*j)`.
/// `c = 0` is allowed and collapses to equal weights.
pub fn build_exponential_coeffs(
    alpha: f64,
    c: f64,
    p: usize,
    with_beta: bool,
) -> Result<CoefficientVector> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::InvalidInput(format!("alpha {alpha} outside [0, 1)")));
    }
    if !(c.is_finite() && c >= 0.0) {
        return Err(Error::InvalidInput(format!("decay rate c {c} is negative")));
    }
    if p == 0 {
        return Err(Error::InvalidInput("order p must be at least 1".into()));
    }
    let kind = if with_beta {
        if alpha == 0.0 {
            MethodKind::Exponential
        } else {
            MethodKind::GenExponential
        }
    } else {
        MethodKind::GenExponentialNoBeta
    };
    let start = if with_beta { 0 } else { 1 };
    let weights: Vec<f64> = (start..=p).map(|j| (-c * j as f64).exp()).collect();
    let sum: f64 = weights.iter().sum();
    let scale = (1.0 - alpha) / sum;
    let mut coeffs = Vec::with_capacity(p + 1);
    if !with_beta {
        coeffs.push(0.0);
    }
    coeffs.extend(weights.iter().map(|w| w * scale));
    CoefficientVector::new(kind, alpha, coeffs)
}

/// Equal-weight coefficients: `c0 = c_i = (1 - alpha) / (p + 1)`.
pub fn build_simple_coeffs(alpha: f64, p: usize) -> Result<CoefficientVector> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::InvalidInput(format!("alpha {alpha} outside [0, 1)")));
    }
    if p == 0 {
        return Err(Error::InvalidInput("order p must be at least 1".into()));
    }
    let kind = if alpha == 0.0 {
        MethodKind::Simple
    } else {
        MethodKind::GenSimple
    };
    let w = (1.0 - alpha) / (p + 1) as f64;
    CoefficientVector::new(kind, alpha, vec![w; p + 1])
}

/// GARCH(1,1)-derived coefficients.
///
/// With beta the unscaled vector is
/// `(beta/(1-b1), a1, a1*b1, ..., a1*b1^(q-1))`; without beta the
/// contemporaneous entry is dropped. Either way the vector is rescaled by
/// `(1 - alpha) / sum` so the simplex constraint holds by construction.
pub fn build_ga_coeffs(
    alpha: f64,
    params: &GaFreeParams,
    q: usize,
    with_beta: bool,
) -> Result<CoefficientVector> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::InvalidInput(format!("alpha {alpha} outside [0, 1)")));
    }
    if q == 0 {
        return Err(Error::InvalidInput("order q must be at least 1".into()));
    }
    if params.b1 >= 1.0 {
        return Err(Error::InvalidInput(format!(
            "b1 {} >= 1; geometric tail diverges",
            params.b1
        )));
    }
    let kind = if with_beta {
        MethodKind::Ga
    } else {
        MethodKind::GaNoBeta
    };
    let mut unscaled = Vec::with_capacity(q + 1);
    if with_beta {
        unscaled.push(params.beta / (1.0 - params.b1));
    }
    let mut tail = params.a1;
    for _ in 0..q {
        unscaled.push(tail);
        tail *= params.b1;
    }
    let sum: f64 = unscaled.iter().sum();
    if sum <= 0.0 {
        return Err(Error::InvalidInput(
            "GARCH-derived weights sum to zero".into(),
        ));
    }
    let scale = (1.0 - alpha) / sum;
    let mut coeffs = Vec::with_capacity(q + 1);
    if !with_beta {
        coeffs.push(0.0);
    }
    coeffs.extend(unscaled.iter().map(|w| w * scale));
    CoefficientVector::new(kind, alpha, coeffs)
}

/// Population variances of every series prefix: `out[i]` is the variance of
/// `values[..i]` (with `out[0]` unused, `out[1] = 0`).
fn prefix_variances(values: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; values.len() + 1];
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for (i, &y) in values.iter().enumerate() {
        let count = (i + 1) as f64;
        let delta = y - mean;
        mean += delta / count;
        m2 += delta * (y - mean);
        out[i + 1] = m2 / count;
    }
    out
}

fn forward_with_prefix(
    values: &[f64],
    coeffs: &CoefficientVector,
    prefix_var: &[f64],
) -> Result<Vec<f64>> {
    let q = coeffs.order();
    let n = values.len();
    if n <= q {
        return Err(Error::InvalidInput(format!(
            "series length {n} must exceed the transform order {q}"
        )));
    }
    let alpha = coeffs.alpha();
    let c = coeffs.coefficients();
    let mut w = Vec::with_capacity(n - q);
    for t0 in q..n {
        let y = values[t0];
        // Volatility proxy: trailing variance plus the weighted lag history.
        let mut proxy = alpha * prefix_var[t0];
        for i in 1..=q {
            proxy += c[i] * values[t0 - i] * values[t0 - i];
        }
        if proxy == 0.0 {
            return Err(Error::DegenerateWindow { t: t0 + 1 });
        }
        w.push(y / (c[0] * y * y + proxy).sqrt());
    }
    Ok(w)
}

/// The forward NoVaS map `Y -> W` for `t = q+1..n`:
/// `W_t = Y_t / sqrt(c0*Y_t^2 + alpha*s^2_{t-1} + sum_i c_i*Y_{t-i}^2)`.
///
/// Errors with a degenerate-window condition when the volatility proxy
/// vanishes (zero trailing variance and all-zero lag history).
pub fn forward_transform(returns: &ReturnSeries, coeffs: &CoefficientVector) -> Result<Vec<f64>> {
    let prefix = prefix_variances(returns.values());
    forward_with_prefix(returns.values(), coeffs, &prefix)
}

/// Default truncation order for exponential weights: smallest `p` with
/// `exp(-c*p) < 1e-8`, clamped to `[10, 50]`.
pub fn default_order_exponential(c: f64) -> usize {
    if c <= 0.0 {
        return ORDER_CAP;
    }
    let raw = (-TAIL_EPS.ln() / c).floor() as usize + 1;
    raw.clamp(ORDER_FLOOR, ORDER_CAP)
}

/// Default truncation order for GARCH-derived weights: smallest `q` with
/// `a1*b1^(q-1) < 1e-8`, clamped to `[10, 50]`.
pub fn default_order_ga(a1: f64, b1: f64) -> usize {
    let mut q = 1usize;
    let mut term = a1;
    while term >= TAIL_EPS && q <= ORDER_CAP {
        q += 1;
        term *= b1;
    }
    q.clamp(ORDER_FLOOR, ORDER_CAP)
}

/// Order after `level` escalations: multiply by 1.5 and round up, per level.
fn escalate_order(base: usize, level: usize) -> usize {
    let mut order = base;
    for _ in 0..level {
        order = (order * 3).div_ceil(2);
    }
    order
}

#[derive(Debug, Clone)]
struct Candidate {
    key: [f64; 3],
    coeffs: CoefficientVector,
}

fn candidate_set(
    kind: MethodKind,
    alpha: f64,
    grids: &CalibrationGrids,
    escalation: usize,
) -> Vec<Candidate> {
    let mut out = Vec::new();
    match kind {
        MethodKind::Simple | MethodKind::GenSimple => {
            for p in 1..=escalate_order(ORDER_CAP, escalation) {
                if let Ok(coeffs) = build_simple_coeffs(alpha, p) {
                    out.push(Candidate {
                        key: [p as f64, 0.0, 0.0],
                        coeffs,
                    });
                }
            }
        }
        MethodKind::Exponential
        | MethodKind::GenExponential
        | MethodKind::GenExponentialNoBeta => {
            let with_beta = kind.has_beta();
            for &c in &grids.c_grid {
                let p = escalate_order(default_order_exponential(c), escalation);
                if let Ok(coeffs) = build_exponential_coeffs(alpha, c, p, with_beta) {
                    out.push(Candidate {
                        key: [c, 0.0, 0.0],
                        coeffs,
                    });
                }
            }
        }
        MethodKind::Ga => {
            let unit = grids.unit_grid();
            for &beta in &unit {
                for &a1 in &unit {
                    for &b1 in &unit {
                        if beta + a1 + b1 >= 1.0 - 1e-12 {
                            continue;
                        }
                        // Contemporaneous weight must dominate the lags;
                        // scaling preserves the ordering, so check unscaled.
                        if beta / (1.0 - b1) < a1 - 1e-15 {
                            continue;
                        }
                        let q = escalate_order(default_order_ga(a1, b1), escalation);
                        let params = GaFreeParams { beta, a1, b1 };
                        if let Ok(coeffs) = build_ga_coeffs(alpha, &params, q, true) {
                            out.push(Candidate {
                                key: [beta, a1, b1],
                                coeffs,
                            });
                        }
                    }
                }
            }
        }
        MethodKind::GaNoBeta => {
            let unit = grids.unit_grid();
            for &a1 in &unit {
                for &b1 in &unit {
                    let q = escalate_order(default_order_ga(a1, b1), escalation);
                    let params = GaFreeParams { beta: 0.0, a1, b1 };
                    if let Ok(coeffs) = build_ga_coeffs(alpha, &params, q, false) {
                        out.push(Candidate {
                            key: [a1, b1, 0.0],
                            coeffs,
                        });
                    }
                }
            }
        }
    }
    out
}

struct Scored {
    index: usize,
    objective: f64,
    key: [f64; 3],
}

fn better(a: &Scored, b: &Scored) -> bool {
    (a.objective, a.key) < (b.objective, b.key)
}

/// Grid-calibrates a transform of the given kind at a fixed `alpha`.
///
/// The selected grid point minimizes `|KURT(W) - 3|` subject to the
/// family's constraints; ties break toward the lexicographically smallest
/// parameter key, so the result is independent of evaluation order. For the
/// beta-bearing kinds, if no grid point yields `c0 <= 0.111` the truncation
/// order is escalated (x1.5, up to three times) and the search repeats.
pub fn calibrate(
    returns: &ReturnSeries,
    kind: MethodKind,
    alpha: f64,
    grids: &CalibrationGrids,
) -> Result<CalibratedTransform> {
    grids.validate()?;
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::InvalidInput(format!("alpha {alpha} outside [0, 1)")));
    }
    if !kind.has_free_alpha() && alpha != 0.0 {
        return Err(Error::InvalidInput(format!(
            "{} pins alpha to 0 (got {alpha})",
            kind.label()
        )));
    }
    let n = returns.len();
    if n < ORDER_FLOOR + MIN_USABLE {
        return Err(Error::InvalidInput(format!(
            "series of length {n} is too short to calibrate (need at least {})",
            ORDER_FLOOR + MIN_USABLE
        )));
    }
    let prefix = prefix_variances(returns.values());

    let evaluate = |coeffs: &CoefficientVector| -> Option<f64> {
        if coeffs.order() + MIN_USABLE > n {
            return None;
        }
        let w = forward_with_prefix(returns.values(), coeffs, &prefix).ok()?;
        let kurt = sample_kurtosis(&w).ok()?;
        Some((kurt - 3.0).abs())
    };

    let mut escalations_used = 0;
    let mut last_candidates: Vec<Candidate> = Vec::new();
    for escalation in 0..=MAX_ESCALATIONS {
        escalations_used = escalation;
        let candidates = candidate_set(kind, alpha, grids, escalation);
        // The contemporaneous-weight cap is known from the coefficients
        // alone, so inadmissible points are skipped before any transform
        // work is spent on them.
        let scored: Vec<Scored> = candidates
            .par_iter()
            .enumerate()
            .filter_map(|(index, cand)| {
                if kind.has_beta() && cand.coeffs.c0() > BETA_CAP + 1e-12 {
                    return None;
                }
                let objective = evaluate(&cand.coeffs)?;
                Some(Scored {
                    index,
                    objective,
                    key: cand.key,
                })
            })
            .collect();

        let mut best: Option<&Scored> = None;
        for s in &scored {
            if best.is_none_or(|b| better(s, b)) {
                best = Some(s);
            }
        }
        if let Some(winner) = best {
            let coeffs = candidates[winner.index].coeffs.clone();
            let w_series = forward_with_prefix(returns.values(), &coeffs, &prefix)?;
            return Ok(CalibratedTransform {
                coeffs,
                objective: winner.objective,
                w_series,
            });
        }
        last_candidates = candidates;
        if !kind.has_beta() {
            // Escalation only relaxes the contemporaneous-weight constraint;
            // a failed search for the parsimonious kinds is terminal.
            break;
        }
    }
    // Report the best objective the search saw, ignoring the cap, so the
    // failure is diagnosable.
    let best_any_objective = last_candidates
        .par_iter()
        .filter_map(|cand| evaluate(&cand.coeffs))
        .reduce(|| f64::INFINITY, f64::min);
    Err(Error::CalibrationFailed {
        escalations: escalations_used,
        best_objective: best_any_objective,
    })
}

/// Ljung-Box portmanteau statistic for residual autocorrelation in `xs`,
/// with the chi-squared p-value at `lags` degrees of freedom.
///
/// This is a diagnostic only: transformed series that fail it would need an
/// explicit decorrelation step, which this crate does not apply.
pub fn ljung_box(xs: &[f64], lags: usize) -> Result<(f64, f64)> {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    let n = xs.len();
    if lags == 0 || n <= lags + 1 {
        return Err(Error::InvalidInput(format!(
            "need more than {lags}+1 points for a {lags}-lag diagnostic, got {n}"
        )));
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let denom: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
    if denom == 0.0 {
        return Err(Error::DegenerateSample("zero variance".into()));
    }
    let mut stat = 0.0;
    for k in 1..=lags {
        let num: f64 = (k..n).map(|t| (xs[t] - mean) * (xs[t - k] - mean)).sum();
        let rho = num / denom;
        stat += rho * rho / (n - k) as f64;
    }
    stat *= n as f64 * (n as f64 + 2.0);
    let chi = ChiSquared::new(lags as f64)
        .map_err(|e| Error::InvalidInput(format!("chi-squared setup: {e}")))?;
    Ok((stat, 1.0 - chi.cdf(stat)))
}

/// Trailing variance of the whole series with divisor `n`, used as the
/// frozen `s^2_n` during prediction.
pub fn full_sample_variance(returns: &ReturnSeries) -> Result<f64> {
    Ok(trailing_stats(returns, returns.len() + 1)?.s_sq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{generate, SimModelSpec};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn gaussian_series(n: usize, seed: u64) -> ReturnSeries {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ReturnSeries::new((0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()).unwrap()
    }

    #[test]
    fn equal_weight_limit_of_exponential_builder() {
        // c = 0 collapses to equal weights.
        let cv = build_exponential_coeffs(0.0, 0.0, 1, true).unwrap();
        assert_eq!(cv.coefficients(), &[0.5, 0.5]);
    }

    #[test]
    fn exponential_builder_matches_hand_arithmetic() {
        let cv = build_exponential_coeffs(0.2, std::f64::consts::LN_2, 2, true).unwrap();
        let c = cv.coefficients();
        assert_relative_eq!(c[0], 0.45714285714285713, epsilon = 1e-14);
        assert_relative_eq!(c[1], 0.22857142857142856, epsilon = 1e-14);
        assert_relative_eq!(c[2], 0.11428571428571428, epsilon = 1e-14);
        assert_eq!(cv.kind(), MethodKind::GenExponential);
    }

    #[test]
    fn exponential_builder_rejects_bad_inputs() {
        assert!(build_exponential_coeffs(0.2, -0.5, 3, true).is_err());
        assert!(build_exponential_coeffs(0.2, 1.0, 0, true).is_err());
        assert!(build_exponential_coeffs(1.0, 1.0, 3, true).is_err());
    }

    #[test]
    fn ga_builder_matches_hand_arithmetic() {
        let params = GaFreeParams::new(0.1, 0.3, 0.5).unwrap();
        let cv = build_ga_coeffs(0.2, &params, 3, true).unwrap();
        let c = cv.coefficients();
        assert_relative_eq!(c[0], 0.2206896551724138, epsilon = 1e-14);
        assert_relative_eq!(c[1], 0.3310344827586207, epsilon = 1e-14);
        assert_relative_eq!(c[2], 0.16551724137931034, epsilon = 1e-14);
        assert_relative_eq!(c[3], 0.08275862068965517, epsilon = 1e-14);
    }

    #[test]
    fn ga_builder_tail_collapse() {
        // b1 -> 0 puts all lag weight on lag 1.
        let params = GaFreeParams::new(0.0, 0.3, 1e-12).unwrap();
        let cv = build_ga_coeffs(0.25, &params, 4, false).unwrap();
        assert_relative_eq!(cv.coefficients()[1], 0.75, epsilon = 1e-10);
        assert!(cv.coefficients()[2] < 1e-11);
    }

    #[test]
    fn ga_builder_rejects_divergent_tail() {
        let params = GaFreeParams {
            beta: 0.1,
            a1: 0.3,
            b1: 1.0,
        };
        assert!(build_ga_coeffs(0.2, &params, 3, true).is_err());
        assert!(GaFreeParams::new(0.1, 0.3, 1.0).is_err());
    }

    #[test]
    fn ga_matches_exponential_when_b1_is_exp_minus_c() {
        let grids = CalibrationGrids::default();
        for &c in &grids.c_grid {
            let b1 = (-c).exp();
            let params = GaFreeParams::new(0.0, 0.37, b1).unwrap();
            for q in [10usize, 30, 50] {
                let ga = build_ga_coeffs(0.3, &params, q, false).unwrap();
                let ge = build_exponential_coeffs(0.3, c, q, false).unwrap();
                for (x, y) in ga.coefficients().iter().zip(ge.coefficients()) {
                    assert!((x - y).abs() <= 1e-12, "c={c} q={q}: {x} vs {y}");
                }
            }
        }
    }

    #[test]
    fn ga_tail_is_monotone_nonincreasing() {
        let params = GaFreeParams::new(0.04, 0.5, 0.8).unwrap();
        for with_beta in [true, false] {
            let cv = build_ga_coeffs(0.1, &params, 20, with_beta).unwrap();
            let c = cv.coefficients();
            for i in 1..c.len() - 1 {
                assert!(c[i] >= c[i + 1]);
            }
        }
    }

    #[test]
    fn forward_transform_matches_hand_arithmetic() {
        let returns = ReturnSeries::new(vec![1.0, 2.0]).unwrap();
        let cv = CoefficientVector::new(MethodKind::Exponential, 0.0, vec![0.5, 0.5]).unwrap();
        let w = forward_transform(&returns, &cv).unwrap();
        assert_eq!(w.len(), 1);
        assert_relative_eq!(w[0], 1.2649110640673518, epsilon = 1e-14);
    }

    #[test]
    fn forward_transform_pure_standardization_limit() {
        // alpha = 1: W_t = Y_t / s_{t-1}.
        let returns = gaussian_series(40, 9);
        let cv = CoefficientVector::new(MethodKind::GenSimple, 1.0, vec![0.0, 0.0, 0.0]).unwrap();
        let w = forward_transform(&returns, &cv).unwrap();
        for (k, w_t) in w.iter().enumerate() {
            let t = k + 3; // q = 2, first transformed index is t = 3
            let s = trailing_stats(&returns, t).unwrap().s_sq.sqrt();
            assert_relative_eq!(*w_t, returns.values()[t - 1] / s, epsilon = 1e-12);
        }
    }

    #[test]
    fn forward_transform_respects_innovation_bound() {
        let returns = gaussian_series(300, 21);
        let mut c = vec![0.1];
        c.extend(vec![0.9 / 12.0; 12]);
        let cv = CoefficientVector::new(MethodKind::GenExponential, 0.0, c).unwrap();
        let w = forward_transform(&returns, &cv).unwrap();
        let bound = 10.0f64.sqrt();
        assert!(w.iter().all(|x| x.abs() <= bound));
    }

    #[test]
    fn forward_transform_rejects_zero_history() {
        let returns = ReturnSeries::new(vec![0.0, 0.0, 0.0, 1.0]).unwrap();
        let cv = CoefficientVector::new(MethodKind::Exponential, 0.0, vec![0.5, 0.5]).unwrap();
        assert!(matches!(
            forward_transform(&returns, &cv),
            Err(Error::DegenerateWindow { .. })
        ));
    }

    #[test]
    fn forward_transform_is_scale_invariant() {
        let returns = gaussian_series(120, 33);
        for (alpha, kind) in [(0.0, MethodKind::Exponential), (0.4, MethodKind::GenExponential)] {
            let cv = build_exponential_coeffs(alpha, 0.8, 12, true).unwrap();
            let _ = kind;
            let w = forward_transform(&returns, &cv).unwrap();
            for k in [-4.0, 0.001, 250.0] {
                let scaled =
                    ReturnSeries::new(returns.values().iter().map(|y| k * y).collect()).unwrap();
                let ws = forward_transform(&scaled, &cv).unwrap();
                let sign = k.signum();
                for (a, b) in w.iter().zip(&ws) {
                    assert_relative_eq!(sign * a, *b, epsilon = 1e-10);
                }
            }
        }
    }

    #[test]
    fn default_alpha_grid_has_eight_values() {
        let grids = CalibrationGrids::default();
        let expected: Vec<f64> = (1..=8).map(|i| i as f64 / 10.0).collect();
        assert_eq!(grids.alpha_grid, expected);
        assert_eq!(grids.unit_grid_step, 0.02);
        assert_eq!(grids.unit_grid().len(), 49);
        assert_eq!(grids.c_grid.len(), 60);
        assert_relative_eq!(grids.c_grid[0], 0.01, epsilon = 1e-12);
        assert_relative_eq!(grids.c_grid[59], 3.0, epsilon = 1e-12);
        assert_eq!(CalibrationGrids::fast().alpha_grid, vec![0.2, 0.5, 0.8]);
        assert_eq!(CalibrationGrids::fast().unit_grid().len(), 19);
    }

    #[test]
    fn default_orders_and_escalation() {
        assert_eq!(default_order_exponential(3.0), 10); // raw 7, floored
        assert_eq!(default_order_exponential(0.4), 47);
        assert_eq!(default_order_exponential(0.01), 50); // capped
        assert_eq!(default_order_ga(0.5, 0.02), 10); // floored
        assert_eq!(default_order_ga(0.5, 0.98), 50); // capped
        assert_eq!(escalate_order(10, 1), 15);
        assert_eq!(escalate_order(10, 2), 23);
        assert_eq!(escalate_order(10, 3), 35);
    }

    #[test]
    fn calibration_minimizes_kurtosis_distance_on_garch_data() {
        // Best calibrated objective across the alpha grid beats the raw
        // series' kurtosis distance in at least 95 of 100 replications.
        let grids = CalibrationGrids::default();
        let mut wins = 0;
        for rep in 0..100 {
            let spec = SimModelSpec::new(3, 500, 1000 + rep);
            let returns = generate(&spec).unwrap();
            let raw = (sample_kurtosis(returns.values()).unwrap() - 3.0).abs();
            let mut best = f64::INFINITY;
            for kind in [
                MethodKind::GaNoBeta,
                MethodKind::GenExponentialNoBeta,
                MethodKind::GenExponential,
            ] {
                for &a in &grids.alpha_grid {
                    if let Ok(t) = calibrate(&returns, kind, a, &grids) {
                        best = best.min(t.objective);
                    }
                }
            }
            if best <= raw {
                wins += 1;
            }
        }
        assert!(wins >= 95, "calibration beat raw kurtosis only {wins}/100");
    }

    #[test]
    fn calibration_is_deterministic() {
        let returns = generate(&SimModelSpec::new(3, 300, 77)).unwrap();
        let grids = CalibrationGrids::fast();
        // The beta-bearing GA constraint set is only feasible at large
        // alpha, so Ga is checked there.
        for (kind, alpha) in [
            (MethodKind::Ga, 0.8),
            (MethodKind::GaNoBeta, 0.2),
            (MethodKind::GenExponential, 0.2),
        ] {
            let a = calibrate(&returns, kind, alpha, &grids).unwrap();
            let b = calibrate(&returns, kind, alpha, &grids).unwrap();
            assert_eq!(a.coeffs, b.coeffs);
            assert_eq!(a.objective.to_bits(), b.objective.to_bits());
            assert_eq!(a.w_series, b.w_series);
        }
    }

    #[test]
    fn ga_calibration_is_infeasible_at_small_alpha() {
        // With the contemporaneous weight required to be both the largest
        // and at most 0.111, small alpha leaves no admissible grid point;
        // the failure carries the best objective seen.
        let returns = generate(&SimModelSpec::new(3, 300, 78)).unwrap();
        let grids = CalibrationGrids::fast();
        match calibrate(&returns, MethodKind::Ga, 0.2, &grids) {
            Err(Error::CalibrationFailed { best_objective, .. }) => {
                assert!(best_objective.is_finite());
            }
            other => panic!("expected calibration failure, got {other:?}"),
        }
    }

    #[test]
    fn calibrated_beta_kinds_respect_the_contemporaneous_cap() {
        let grids = CalibrationGrids::fast();
        for seed in [5u64, 6, 7] {
            let returns = generate(&SimModelSpec::new(3, 250, seed)).unwrap();
            for (kind, alpha) in [(MethodKind::GenExponential, 0.2), (MethodKind::Ga, 0.8)] {
                let t = calibrate(&returns, kind, alpha, &grids).unwrap();
                assert!(
                    t.coeffs.c0() <= BETA_CAP + 1e-12,
                    "{}: c0 = {}",
                    kind.label(),
                    t.coeffs.c0()
                );
            }
        }
    }

    #[test]
    fn calibrate_rejects_fixed_alpha_kinds_with_nonzero_alpha() {
        let returns = gaussian_series(100, 1);
        let grids = CalibrationGrids::fast();
        assert!(calibrate(&returns, MethodKind::Exponential, 0.2, &grids).is_err());
        assert!(calibrate(&returns, MethodKind::Exponential, 0.0, &grids).is_ok());
    }

    #[test]
    fn calibrate_refuses_short_windows() {
        let returns = gaussian_series(15, 2);
        let grids = CalibrationGrids::fast();
        assert!(calibrate(&returns, MethodKind::GaNoBeta, 0.2, &grids).is_err());
    }

    #[test]
    fn ga_candidates_keep_contemporaneous_weight_largest() {
        let grids = CalibrationGrids::fast();
        let returns = generate(&SimModelSpec::new(1, 250, 42)).unwrap();
        let t = calibrate(&returns, MethodKind::Ga, 0.8, &grids).unwrap();
        let c = t.coeffs.coefficients();
        assert!(c[1..].iter().all(|x| c[0] >= *x - 1e-15));
    }

    #[test]
    fn ljung_box_flags_autocorrelated_series() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut x = 0.0;
        let ar: Vec<f64> = (0..400)
            .map(|_| {
                x = 0.8 * x + rng.sample::<f64, _>(StandardNormal);
                x
            })
            .collect();
        let (stat_ar, p_ar) = ljung_box(&ar, 10).unwrap();
        let iid: Vec<f64> = (0..400).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let (stat_iid, p_iid) = ljung_box(&iid, 10).unwrap();
        assert!(stat_ar > stat_iid);
        assert!(p_ar < 0.01);
        assert!(p_iid > 0.01);
    }

    proptest! {
        #[test]
        fn exponential_coeffs_stay_on_simplex(
            alpha in 0.0..0.99f64,
            c in 0.0..3.0f64,
            p in 1..60usize,
            with_beta: bool,
        ) {
            let cv = build_exponential_coeffs(alpha, c, p, with_beta).unwrap();
            let sum = cv.alpha() + cv.coefficients().iter().sum::<f64>();
            prop_assert!((sum - 1.0).abs() <= 1e-12);
            prop_assert!(cv.coefficients().iter().all(|x| *x >= 0.0));
        }

        #[test]
        fn ga_coeffs_stay_on_simplex(
            alpha in 0.0..0.99f64,
            beta in 0.0..0.99f64,
            a1 in 0.001..0.999f64,
            b1 in 0.001..0.999f64,
            q in 1..60usize,
            with_beta: bool,
        ) {
            let params = GaFreeParams { beta, a1, b1 };
            let cv = build_ga_coeffs(alpha, &params, q, with_beta).unwrap();
            let sum = cv.alpha() + cv.coefficients().iter().sum::<f64>();
            prop_assert!((sum - 1.0).abs() <= 1e-12);
            prop_assert!(cv.coefficients().iter().all(|x| *x >= 0.0));
            // Geometric decay is exactly monotone over the lag tail.
            let c = cv.coefficients();
            for i in 1..c.len() - 1 {
                prop_assert!(c[i] >= c[i + 1]);
            }
        }
    }
}
