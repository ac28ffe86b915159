//! Transform inversion and multi-step prediction of squared returns.
//!
//! Future innovations are drawn either from a trimmed standard normal
//! (rejection against the transform's admissible range) or by resampling
//! the calibrated transformed series. Each drawn innovation sequence is
//! inverted step by step into a pseudo squared-return path; the L1/L2
//! optimal predictors are the per-step median/mean over paths.

use crate::error::{Error, Result};
use crate::rng::{derive_seed, substream};
use crate::series::ReturnSeries;
use crate::transform::{
    calibrate, full_sample_variance, CalibratedTransform, CalibrationGrids, CoefficientVector,
    MethodKind,
};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

/// Where simulated innovations come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InnovationMode {
    /// Standard normal draws rejected against `|w| < 1/sqrt(c0)`.
    TrimmedNormal,
    /// I.i.d. resampling with replacement from the calibrated `W` series.
    EmpiricalBootstrap,
}

impl InnovationMode {
    pub fn label(self) -> &'static str {
        match self {
            InnovationMode::TrimmedNormal => "trimmed-normal",
            InnovationMode::EmpiricalBootstrap => "bootstrap",
        }
    }
}

/// A concrete innovation sampler for one calibrated transform.
#[derive(Debug, Clone)]
pub struct InnovationSource<'a> {
    mode: InnovationMode,
    /// `1/sqrt(c0)` when `c0 > 0`, infinite otherwise.
    bound: f64,
    pool: Option<&'a [f64]>,
}

impl<'a> InnovationSource<'a> {
    pub fn from_transform(mode: InnovationMode, transform: &'a CalibratedTransform) -> Result<Self> {
        let bound = transform.coeffs.innovation_bound();
        let pool = match mode {
            InnovationMode::TrimmedNormal => None,
            InnovationMode::EmpiricalBootstrap => {
                if transform.w_series.is_empty() {
                    return Err(Error::InvalidInput(
                        "empirical bootstrap needs a nonempty transformed series".into(),
                    ));
                }
                Some(transform.w_series.as_slice())
            }
        };
        Ok(Self { mode, bound, pool })
    }

    pub fn mode(&self) -> InnovationMode {
        self.mode
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    /// Draws one innovation. Trimmed-normal draws are rejected until they
    /// fall strictly inside the admissible range; bootstrap draws are pool
    /// members and therefore admissible by construction.
    pub fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        match self.mode {
            InnovationMode::TrimmedNormal => loop {
                let w: f64 = rng.sample(StandardNormal);
                if w.abs() < self.bound {
                    return w;
                }
            },
            InnovationMode::EmpiricalBootstrap => {
                let pool = self.pool.expect("pool checked at construction");
                pool[rng.gen_range(0..pool.len())]
            }
        }
    }
}

/// Forecast risk criterion: median (L1) or mean (L2) over simulated paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RiskCriterion {
    L1,
    L2,
}

impl RiskCriterion {
    pub fn label(self) -> &'static str {
        match self {
            RiskCriterion::L1 => "L1",
            RiskCriterion::L2 => "L2",
        }
    }
}

/// Parameters of one forecasting run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForecastRequest {
    /// Steps ahead to predict.
    pub horizon: usize,
    /// Number of simulated innovation paths.
    pub paths: usize,
    pub criterion: RiskCriterion,
    pub mode: InnovationMode,
    pub seed: u64,
}

impl ForecastRequest {
    /// A request with the default path count (5000).
    pub fn new(horizon: usize, criterion: RiskCriterion, mode: InnovationMode, seed: u64) -> Self {
        Self {
            horizon,
            paths: 5000,
            criterion,
            mode,
            seed,
        }
    }

    pub fn with_paths(mut self, paths: usize) -> Self {
        self.paths = paths;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::InvalidInput("horizon must be at least 1".into()));
        }
        if self.paths == 0 {
            return Err(Error::InvalidInput("need at least one path".into()));
        }
        Ok(())
    }
}

/// Conditioning state for one inversion step: the most recent `q` squared
/// returns (`y_sq[0]` newest) and the frozen trailing variance.
#[derive(Debug, Clone)]
pub struct LagState {
    pub y_sq: Vec<f64>,
    pub s_sq: f64,
}

impl LagState {
    /// Builds the state from the end of a window, freezing `s^2` at the
    /// full-window trailing variance.
    pub fn from_window(window: &ReturnSeries, q: usize) -> Result<Self> {
        if window.len() < q {
            return Err(Error::InvalidInput(format!(
                "window of length {} cannot provide {q} lags",
                window.len()
            )));
        }
        let values = window.values();
        let y_sq = values[values.len() - q..]
            .iter()
            .rev()
            .map(|y| y * y)
            .collect();
        Ok(Self {
            y_sq,
            s_sq: full_sample_variance(window)?,
        })
    }

    /// Pushes a new squared return as the most recent lag.
    fn push(&mut self, y_sq: f64) {
        self.y_sq.insert(0, y_sq);
        self.y_sq.pop();
    }
}

/// Inverts one innovation into the next squared return:
/// `Y^2 = w^2 / (1 - c0*w^2) * (alpha*s^2 + sum_i c_i*Y^2_{n+1-i})`.
///
/// Requires `|w| < 1/sqrt(c0)` when the transform carries a contemporaneous
/// weight; a matching [`InnovationSource`] can never violate this.
pub fn inverse_step(w: f64, coeffs: &CoefficientVector, state: &LagState) -> Result<f64> {
    let q = coeffs.order();
    if state.y_sq.len() < q {
        return Err(Error::InvalidInput(format!(
            "lag state holds {} values, transform needs {q}",
            state.y_sq.len()
        )));
    }
    let c = coeffs.coefficients();
    let c0 = c[0];
    let w_sq = w * w;
    let denom = 1.0 - c0 * w_sq;
    if c0 > 0.0 && denom <= 0.0 {
        return Err(Error::InnovationOutOfRange {
            w,
            bound: coeffs.innovation_bound(),
        });
    }
    let mut factor = coeffs.alpha() * state.s_sq;
    for (weight, lag) in c[1..=q].iter().zip(&state.y_sq) {
        factor += weight * lag;
    }
    Ok(w_sq / denom * factor)
}

/// An ensemble of simulated innovation paths and the squared-return paths
/// they induce.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    pub horizon: usize,
    /// Drawn innovations, `w_draws[m][j]` = step `j+1` of path `m`.
    pub w_draws: Vec<Vec<f64>>,
    /// Induced squared returns, same layout.
    pub y_sq: Vec<Vec<f64>>,
}

impl PathEnsemble {
    pub fn paths(&self) -> usize {
        self.y_sq.len()
    }
}

/// Simulates `req.paths` innovation paths of length `req.horizon` and
/// inverts each into a squared-return path.
///
/// The lag buffer absorbs each pseudo squared return while `s^2` stays
/// frozen at the window's trailing variance. Path `m` draws from the
/// substream `derive_seed(req.seed, [m])`, so the ensemble is reproducible
/// regardless of scheduling.
pub fn simulate_paths(
    window: &ReturnSeries,
    transform: &CalibratedTransform,
    req: &ForecastRequest,
) -> Result<PathEnsemble> {
    req.validate()?;
    let coeffs = &transform.coeffs;
    let q = coeffs.order();
    if window.len() < q + 1 {
        return Err(Error::InvalidInput(format!(
            "window of length {} is shorter than order {q} + 1",
            window.len()
        )));
    }
    let source = InnovationSource::from_transform(req.mode, transform)?;
    let base_state = LagState::from_window(window, q)?;

    let results: Vec<Result<(Vec<f64>, Vec<f64>)>> = (0..req.paths)
        .into_par_iter()
        .map(|m| {
            let mut rng = substream(req.seed, &[m as u64]);
            let mut state = base_state.clone();
            let mut ws = Vec::with_capacity(req.horizon);
            let mut ys = Vec::with_capacity(req.horizon);
            for _ in 0..req.horizon {
                let w = source.draw(&mut rng);
                let y_sq = inverse_step(w, coeffs, &state)?;
                state.push(y_sq);
                ws.push(w);
                ys.push(y_sq);
            }
            Ok((ws, ys))
        })
        .collect();

    let mut w_draws = Vec::with_capacity(req.paths);
    let mut y_sq = Vec::with_capacity(req.paths);
    for r in results {
        let (ws, ys) = r?;
        w_draws.push(ws);
        y_sq.push(ys);
    }
    Ok(PathEnsemble {
        horizon: req.horizon,
        w_draws,
        y_sq,
    })
}

/// A point forecast of squared returns.
#[derive(Debug, Clone, PartialEq)]
pub struct PointForecast {
    /// The step-`h` prediction (last element of `per_step`).
    pub value: f64,
    /// Predicted squared returns for steps `1..=h`.
    pub per_step: Vec<f64>,
}

fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Reduces an ensemble to its optimal predictor under the criterion:
/// per-step median over paths for L1, per-step mean for L2.
pub fn optimal_predictor(ensemble: &PathEnsemble, criterion: RiskCriterion) -> Result<PointForecast> {
    let m = ensemble.paths();
    if m == 0 {
        return Err(Error::InvalidInput("empty path ensemble".into()));
    }
    let mut per_step = Vec::with_capacity(ensemble.horizon);
    for j in 0..ensemble.horizon {
        let stat = match criterion {
            RiskCriterion::L2 => ensemble.y_sq.iter().map(|p| p[j]).sum::<f64>() / m as f64,
            RiskCriterion::L1 => {
                let mut col: Vec<f64> = ensemble.y_sq.iter().map(|p| p[j]).collect();
                median(&mut col)
            }
        };
        per_step.push(stat);
    }
    Ok(PointForecast {
        value: *per_step.last().expect("horizon >= 1"),
        per_step,
    })
}

/// One fully specified forecasting variant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedVariant {
    pub alpha: f64,
    pub mode: InnovationMode,
    pub criterion: RiskCriterion,
}

/// How the final forecast is chosen from the variant sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SelectionMode<'a> {
    /// Pick the variant whose aggregated prediction is closest (squared
    /// error) to the supplied realized squared returns. This is in-sample
    /// selection: it uses future values and therefore measures each
    /// method's best-case performance.
    OracleBest(&'a [f64]),
    /// Run a single requested variant.
    FixedVariant(FixedVariant),
}

/// Per-variant per-step forecasts produced by one sweep.
#[derive(Debug, Clone)]
pub struct VariantForecasts {
    pub alpha_index: usize,
    pub alpha: f64,
    pub mode: InnovationMode,
    pub l1_per_step: Vec<f64>,
    pub l2_per_step: Vec<f64>,
    pub objective: f64,
}

/// Calibrates the kind at every grid alpha, skipping values whose
/// constraint set is infeasible (a beta-bearing search can fail all grid
/// points at small alpha), and returns `None` for those slots.
pub fn calibrate_alpha_grid(
    window: &ReturnSeries,
    kind: MethodKind,
    grids: &CalibrationGrids,
) -> Result<Vec<Option<CalibratedTransform>>> {
    let alphas: Vec<f64> = if kind.has_free_alpha() {
        grids.alpha_grid.clone()
    } else {
        vec![0.0]
    };
    alphas
        .iter()
        .map(|&a| match calibrate(window, kind, a, grids) {
            Ok(t) => Ok(Some(t)),
            Err(Error::CalibrationFailed { .. }) => Ok(None),
            Err(e) => Err(e),
        })
        .collect()
}

/// Calibrates at every grid alpha and simulates under both innovation
/// sources, reporting per-step L1 and L2 forecasts for each combination.
/// Alpha values whose calibration is infeasible are skipped; the sweep
/// fails only if every alpha fails.
///
/// The ensemble for alpha index `a` and source index `v` draws from the
/// substream chain `derive_seed(derive_seed(seed, [a, v]), [m])`; the alpha
/// index refers to the full grid, so skipped values do not shift the
/// substreams of the others. Transforms already calibrated by the caller
/// can be supplied to avoid rework.
pub fn sweep_variants(
    window: &ReturnSeries,
    kind: MethodKind,
    grids: &CalibrationGrids,
    horizon: usize,
    paths: usize,
    seed: u64,
    transforms: Option<&[Option<CalibratedTransform>]>,
) -> Result<Vec<VariantForecasts>> {
    let alphas: Vec<f64> = if kind.has_free_alpha() {
        grids.alpha_grid.clone()
    } else {
        vec![0.0]
    };
    let calibrated: Vec<Option<CalibratedTransform>> = match transforms {
        Some(t) => {
            if t.len() != alphas.len() {
                return Err(Error::Config(format!(
                    "{} supplied transforms for {} alpha values",
                    t.len(),
                    alphas.len()
                )));
            }
            t.to_vec()
        }
        None => calibrate_alpha_grid(window, kind, grids)?,
    };

    let mut out = Vec::with_capacity(alphas.len() * 2);
    for (a_idx, (&alpha, maybe_transform)) in alphas.iter().zip(&calibrated).enumerate() {
        let Some(transform) = maybe_transform else {
            continue;
        };
        for (v_idx, mode) in [InnovationMode::TrimmedNormal, InnovationMode::EmpiricalBootstrap]
            .into_iter()
            .enumerate()
        {
            let req = ForecastRequest {
                horizon,
                paths,
                criterion: RiskCriterion::L2,
                mode,
                seed: derive_seed(seed, &[a_idx as u64, v_idx as u64]),
            };
            let ensemble = simulate_paths(window, transform, &req)?;
            let l1 = optimal_predictor(&ensemble, RiskCriterion::L1)?;
            let l2 = optimal_predictor(&ensemble, RiskCriterion::L2)?;
            out.push(VariantForecasts {
                alpha_index: a_idx,
                alpha,
                mode,
                l1_per_step: l1.per_step,
                l2_per_step: l2.per_step,
                objective: transform.objective,
            });
        }
    }
    if out.is_empty() {
        return Err(Error::Config(format!(
            "no alpha value in the grid calibrated successfully for {}",
            kind.label()
        )));
    }
    Ok(out)
}

fn aggregate(per_step: &[f64]) -> f64 {
    per_step.iter().sum::<f64>() / per_step.len() as f64
}

/// Sweeps every (alpha, innovation source, criterion) variant and returns
/// one forecast according to the selection mode.
pub fn forecast_best_of(
    window: &ReturnSeries,
    kind: MethodKind,
    grids: &CalibrationGrids,
    req: &ForecastRequest,
    selection: SelectionMode<'_>,
) -> Result<(PointForecast, FixedVariant)> {
    req.validate()?;
    match selection {
        SelectionMode::FixedVariant(v) => {
            let alphas: Vec<f64> = if kind.has_free_alpha() {
                grids.alpha_grid.clone()
            } else {
                vec![0.0]
            };
            let a_idx = alphas
                .iter()
                .position(|a| *a == v.alpha)
                .ok_or_else(|| Error::Config(format!("alpha {} not in the grid", v.alpha)))?;
            let transform = calibrate(window, kind, v.alpha, grids)?;
            let v_idx = match v.mode {
                InnovationMode::TrimmedNormal => 0u64,
                InnovationMode::EmpiricalBootstrap => 1u64,
            };
            let sub_req = ForecastRequest {
                seed: derive_seed(req.seed, &[a_idx as u64, v_idx]),
                criterion: v.criterion,
                ..*req
            };
            let ensemble = simulate_paths(window, &transform, &sub_req)?;
            Ok((optimal_predictor(&ensemble, v.criterion)?, v))
        }
        SelectionMode::OracleBest(realized) => {
            if realized.len() < req.horizon {
                return Err(Error::Config(format!(
                    "oracle selection needs {} realized values, got {}",
                    req.horizon,
                    realized.len()
                )));
            }
            let realized_agg = aggregate(&realized[..req.horizon]);
            let variants = sweep_variants(
                window,
                kind,
                grids,
                req.horizon,
                req.paths,
                req.seed,
                None,
            )?;
            let mut best: Option<(f64, PointForecast, FixedVariant)> = None;
            for v in &variants {
                for (criterion, per_step) in [
                    (RiskCriterion::L1, &v.l1_per_step),
                    (RiskCriterion::L2, &v.l2_per_step),
                ] {
                    let err = (aggregate(per_step) - realized_agg).powi(2);
                    if best.as_ref().is_none_or(|(b, _, _)| err < *b) {
                        best = Some((
                            err,
                            PointForecast {
                                value: *per_step.last().unwrap(),
                                per_step: per_step.clone(),
                            },
                            FixedVariant {
                                alpha: v.alpha,
                                mode: v.mode,
                                criterion,
                            },
                        ));
                    }
                }
            }
            let (_, forecast, variant) = best.expect("variant sweep is nonempty");
            Ok((forecast, variant))
        }
    }
}
