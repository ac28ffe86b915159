//! Subcommand orchestration: input loading, option resolution against the
//! config file, and artifact writing.

use crate::config::ConfigFile;
use crate::io;
use crate::{Command, InputArgs};
use anyhow::{bail, Context, Result};
use novas_core::eval::{
    cw_test, fmt_float17, performance, relative_table, render_report_csv, render_report_text,
    run_poos, EvalMethod, PoosConfig, SelectionSpec, WindowPlan,
};
use novas_core::predict::{
    optimal_predictor, simulate_paths, FixedVariant, ForecastRequest, InnovationMode,
    RiskCriterion,
};
use novas_core::sim::{generate, OutputMode, SimModelSpec};
use novas_core::transform::{calibrate, CalibrationGrids, MethodKind};
use novas_core::{to_log_returns, ReturnSeries};
use std::path::{Path, PathBuf};

pub fn run(command: Command, config: &ConfigFile) -> Result<()> {
    match command {
        Command::Simulate {
            model,
            n,
            seed,
            through_prices,
            out,
        } => run_simulate(config, model, n, seed, through_prices, out),
        Command::Calibrate {
            kind,
            alpha,
            fast,
            input,
        } => run_calibrate(config, kind, alpha, fast, input),
        Command::Forecast {
            kind,
            alpha,
            horizons,
            criterion,
            source,
            paths,
            seed,
            fast,
            input,
        } => run_forecast(
            config, kind, alpha, horizons, criterion, source, paths, seed, fast, input,
        ),
        Command::Evaluate {
            methods,
            horizons,
            width,
            paths,
            seed,
            selection,
            alpha,
            criterion,
            source,
            recalibrate_every,
            fast,
            out,
            input,
        } => run_evaluate(
            config,
            methods,
            horizons,
            width,
            paths,
            seed,
            selection,
            alpha,
            criterion,
            source,
            recalibrate_every,
            fast,
            out,
            input,
        ),
        Command::Cwtest {
            realized,
            small,
            large,
        } => run_cwtest(config, realized, small, large),
    }
}

/// Input series plus a manifest-ready description of where it came from.
fn load_input(config: &ConfigFile, args: &InputArgs) -> Result<(ReturnSeries, String)> {
    let returns: Option<PathBuf> = config.resolve(args.returns.clone(), "returns")?;
    let prices: Option<PathBuf> = config.resolve(args.prices.clone(), "prices")?;
    let model: Option<u8> = config.resolve(args.model, "model")?;
    let chosen = [returns.is_some(), prices.is_some(), model.is_some()]
        .iter()
        .filter(|x| **x)
        .count();
    if chosen != 1 {
        bail!("choose exactly one input: --returns FILE, --prices FILE or --model K");
    }
    if let Some(path) = returns {
        let series = io::read_returns_csv(&path)?;
        return Ok((series, format!("returns={}", path.display())));
    }
    if let Some(path) = prices {
        let prices = io::ingest_csv(&path)?;
        let series = to_log_returns(&prices);
        return Ok((series, format!("prices={}", path.display())));
    }
    let model = model.expect("checked above");
    let n: usize = config.resolve(args.n, "n")?.unwrap_or(500);
    let seed: u64 = config.resolve(args.sim_seed, "sim_seed")?.unwrap_or(0);
    let through = config.resolve_flag(args.through_prices, "through_prices")?;
    let mut spec = SimModelSpec::new(model, n, seed);
    if through {
        spec = spec.with_mode(OutputMode::ThroughPrices);
    }
    let series = generate(&spec)?;
    Ok((
        series,
        format!(
            "model={model} n={n} sim_seed={seed} mode={}",
            if through { "through-prices" } else { "direct" }
        ),
    ))
}

fn parse_kind(token: &str) -> Result<MethodKind> {
    MethodKind::parse_token(token)
        .ok_or_else(|| anyhow::anyhow!("unknown method kind '{token}' (s, e, gs, ge, ga, pge, pga)"))
}

fn parse_criterion(token: &str) -> Result<RiskCriterion> {
    match token.to_ascii_lowercase().as_str() {
        "l1" => Ok(RiskCriterion::L1),
        "l2" => Ok(RiskCriterion::L2),
        other => bail!("unknown criterion '{other}' (l1 or l2)"),
    }
}

fn parse_source(token: &str) -> Result<InnovationMode> {
    match token.to_ascii_lowercase().as_str() {
        "normal" | "trimmed-normal" => Ok(InnovationMode::TrimmedNormal),
        "bootstrap" | "empirical" => Ok(InnovationMode::EmpiricalBootstrap),
        other => bail!("unknown innovation source '{other}' (normal or bootstrap)"),
    }
}

fn parse_horizons(text: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .with_context(|| format!("bad horizon '{t}'"))
        })
        .collect()
}

fn grids_for(fast: bool) -> CalibrationGrids {
    if fast {
        CalibrationGrids::fast()
    } else {
        CalibrationGrids::default()
    }
}

fn write_artifact(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents)
        .with_context(|| format!("cannot write {}", path.display()))
}

fn run_simulate(
    config: &ConfigFile,
    model: Option<u8>,
    n: Option<usize>,
    seed: Option<u64>,
    through_prices: bool,
    out: Option<PathBuf>,
) -> Result<()> {
    let model: u8 = config
        .resolve(model, "model")?
        .context("simulate needs --model")?;
    let n: usize = config.resolve(n, "n")?.unwrap_or(500);
    let seed: u64 = config.resolve(seed, "seed")?.unwrap_or(0);
    let through = config.resolve_flag(through_prices, "through_prices")?;
    let out: Option<PathBuf> = config.resolve(out, "out")?;

    let mut spec = SimModelSpec::new(model, n, seed);
    if through {
        spec = spec.with_mode(OutputMode::ThroughPrices);
    }
    let series = generate(&spec)?;
    let csv = io::returns_to_csv(&series);
    match out {
        Some(path) => write_artifact(&path, &csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn run_calibrate(
    config: &ConfigFile,
    kind: Option<String>,
    alpha: Option<f64>,
    fast: bool,
    input: InputArgs,
) -> Result<()> {
    let kind = parse_kind(
        &config
            .resolve(kind, "kind")?
            .context("calibrate needs --kind")?,
    )?;
    let alpha: f64 = config
        .resolve(alpha, "alpha")?
        .unwrap_or(if kind.has_free_alpha() { 0.2 } else { 0.0 });
    let fast = config.resolve_flag(fast, "fast")?;
    let (series, descriptor) = load_input(config, &input)?;
    let grids = grids_for(fast);
    let transform = calibrate(&series, kind, alpha, &grids)?;
    let coeffs = transform.coeffs.coefficients();
    println!("input: {descriptor}");
    println!("kind: {}", kind.label());
    println!("alpha: {}", fmt_float17(alpha));
    println!("order: {}", transform.coeffs.order());
    println!("objective: {}", fmt_float17(transform.objective));
    println!(
        "coefficients: {}",
        coeffs
            .iter()
            .map(|c| fmt_float17(*c))
            .collect::<Vec<_>>()
            .join(",")
    );
    let simplex_sum = alpha + coeffs.iter().sum::<f64>();
    println!("simplex_sum: {}", fmt_float17(simplex_sum));
    println!("w_points: {}", transform.w_series.len());
    // Correlated W would call for a decorrelation step this tool does not
    // apply; surface the diagnostic.
    let lags = 10.min(transform.w_series.len().saturating_sub(2));
    if lags > 0 {
        let (stat, p) = novas_core::transform::ljung_box(&transform.w_series, lags)?;
        println!(
            "ljung_box_{lags}: statistic={} p_value={}",
            fmt_float17(stat),
            fmt_float17(p)
        );
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run_forecast(
    config: &ConfigFile,
    kind: Option<String>,
    alpha: Option<f64>,
    horizons: Option<String>,
    criterion: Option<String>,
    source: Option<String>,
    paths: Option<usize>,
    seed: Option<u64>,
    fast: bool,
    input: InputArgs,
) -> Result<()> {
    let kind = parse_kind(
        &config
            .resolve(kind, "kind")?
            .context("forecast needs --kind")?,
    )?;
    let alpha: f64 = config
        .resolve(alpha, "alpha")?
        .unwrap_or(if kind.has_free_alpha() { 0.2 } else { 0.0 });
    let horizons = parse_horizons(
        &config
            .resolve(horizons, "horizons")?
            .unwrap_or_else(|| "1,5,30".to_string()),
    )?;
    let criterion = parse_criterion(
        &config
            .resolve(criterion, "criterion")?
            .unwrap_or_else(|| "l2".to_string()),
    )?;
    let source = parse_source(
        &config
            .resolve(source, "source")?
            .unwrap_or_else(|| "normal".to_string()),
    )?;
    let fast = config.resolve_flag(fast, "fast")?;
    let paths: usize = config
        .resolve(paths, "paths")?
        .unwrap_or(if fast { 1000 } else { 5000 });
    let seed: u64 = config.resolve(seed, "seed")?.unwrap_or(0);
    let (series, descriptor) = load_input(config, &input)?;

    let mut sorted = horizons.clone();
    sorted.sort_unstable();
    sorted.dedup();
    let max_h = *sorted.last().context("need at least one horizon")?;

    let grids = grids_for(fast);
    let transform = calibrate(&series, kind, alpha, &grids)?;
    let req = ForecastRequest {
        horizon: max_h,
        paths,
        criterion,
        mode: source,
        seed,
    };
    let ensemble = simulate_paths(&series, &transform, &req)?;
    let forecast = optimal_predictor(&ensemble, criterion)?;

    println!("input: {descriptor}");
    println!("kind: {}", kind.label());
    println!(
        "variant: alpha={} source={} criterion={}",
        alpha,
        source.label(),
        criterion.label()
    );
    println!("paths: {paths}");
    println!("seed: {seed}");
    println!("objective: {}", fmt_float17(transform.objective));
    println!(
        "per_step: {}",
        forecast
            .per_step
            .iter()
            .map(|v| fmt_float17(*v))
            .collect::<Vec<_>>()
            .join(",")
    );
    for &h in &sorted {
        let agg = forecast.per_step[..h].iter().sum::<f64>() / h as f64;
        println!("horizon {h}: {}", fmt_float17(agg));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run_evaluate(
    config: &ConfigFile,
    methods: Option<String>,
    horizons: Option<String>,
    width: Option<usize>,
    paths: Option<usize>,
    seed: Option<u64>,
    selection: Option<String>,
    alpha: Option<f64>,
    criterion: Option<String>,
    source: Option<String>,
    recalibrate_every: Option<usize>,
    fast: bool,
    out: Option<PathBuf>,
    input: InputArgs,
) -> Result<()> {
    let out: PathBuf = config
        .resolve(out, "out")?
        .context("evaluate needs --out DIR")?;
    let fast = config.resolve_flag(fast, "fast")?;
    let (series, descriptor) = load_input(config, &input)?;

    let method_text = config
        .resolve(methods, "methods")?
        .unwrap_or_else(|| "ge,ga,pga,garch".to_string());
    let mut methods: Vec<EvalMethod> = Vec::new();
    for token in method_text.split(',') {
        let token = token.trim();
        let m = EvalMethod::parse_token(token)
            .ok_or_else(|| anyhow::anyhow!("unknown method '{token}'"))?;
        if !methods.contains(&m) {
            methods.push(m);
        }
    }
    // The relative table is normalized by the benchmark, so it always runs.
    if !methods.contains(&EvalMethod::GarchDirect) {
        methods.push(EvalMethod::GarchDirect);
    }

    let horizons = parse_horizons(
        &config
            .resolve(horizons, "horizons")?
            .unwrap_or_else(|| "1,5,30".to_string()),
    )?;
    let width: usize = config
        .resolve(width, "width")?
        .unwrap_or_else(|| WindowPlan::default_for(series.len()).width);
    let plan = WindowPlan::new(width, horizons)?;

    let paths: usize = config
        .resolve(paths, "paths")?
        .unwrap_or(if fast { 1000 } else { 5000 });
    let seed: u64 = config.resolve(seed, "seed")?.unwrap_or(0);
    let recalibrate_every: usize = config
        .resolve(recalibrate_every, "recalibrate_every")?
        .unwrap_or(1);
    let selection_text = config
        .resolve(selection, "selection")?
        .unwrap_or_else(|| "oracle".to_string());
    let selection = match selection_text.to_ascii_lowercase().as_str() {
        "oracle" | "oracle-best" => SelectionSpec::OracleBest,
        "fixed" => {
            let alpha: f64 = config
                .resolve(alpha, "alpha")?
                .context("fixed selection needs --alpha")?;
            let criterion = parse_criterion(
                &config
                    .resolve(criterion, "criterion")?
                    .unwrap_or_else(|| "l2".to_string()),
            )?;
            let mode = parse_source(
                &config
                    .resolve(source, "source")?
                    .unwrap_or_else(|| "normal".to_string()),
            )?;
            SelectionSpec::Fixed(FixedVariant {
                alpha,
                mode,
                criterion,
            })
        }
        other => bail!("unknown selection '{other}' (oracle or fixed)"),
    };

    let cfg = PoosConfig {
        grids: grids_for(fast),
        paths,
        seed,
        selection,
        recalibrate_every,
    };

    let series_out = run_poos(&series, &plan, &methods, &cfg)?;
    let perf = performance(&series_out)?;
    let report = relative_table(&perf, &cfg.selection.label())?;

    std::fs::create_dir_all(&out)
        .with_context(|| format!("cannot create {}", out.display()))?;
    let text = render_report_text(&report);
    write_artifact(&out.join("report.csv"), &render_report_csv(&report))?;
    write_artifact(&out.join("report.txt"), &text)?;
    write_artifact(&out.join("series.csv"), &io::series_to_csv(&series_out))?;

    let manifest = format!(
        "tool = novas {}\ninput = {}\nseries_len = {}\nwidth = {}\nhorizons = {}\n\
         methods = {}\nselection = {}\npaths = {}\nseed = {}\nrecalibrate_every = {}\n\
         fast = {}\nalpha_grid = {}\nunit_grid_step = {}\nc_grid = {}\n",
        env!("CARGO_PKG_VERSION"),
        descriptor,
        series.len(),
        plan.width,
        plan.horizons
            .iter()
            .map(|h| h.to_string())
            .collect::<Vec<_>>()
            .join(","),
        methods
            .iter()
            .map(|m| m.label().to_string())
            .collect::<Vec<_>>()
            .join(","),
        cfg.selection.label(),
        paths,
        seed,
        recalibrate_every,
        fast,
        cfg.grids
            .alpha_grid
            .iter()
            .map(|a| fmt_float17(*a))
            .collect::<Vec<_>>()
            .join(","),
        fmt_float17(cfg.grids.unit_grid_step),
        format_args!(
            "log-spaced {} points in [{}, {}]",
            cfg.grids.c_grid.len(),
            fmt_float17(cfg.grids.c_grid[0]),
            fmt_float17(*cfg.grids.c_grid.last().expect("nonempty"))
        ),
    );
    write_artifact(&out.join("manifest.txt"), &manifest)?;

    print!("{text}");
    println!("report written to {}", out.display());
    Ok(())
}

fn run_cwtest(
    config: &ConfigFile,
    realized: Option<PathBuf>,
    small: Option<PathBuf>,
    large: Option<PathBuf>,
) -> Result<()> {
    let realized: PathBuf = config
        .resolve(realized, "realized")?
        .context("cwtest needs --realized FILE")?;
    let small: PathBuf = config
        .resolve(small, "small")?
        .context("cwtest needs --small FILE")?;
    let large: PathBuf = config
        .resolve(large, "large")?
        .context("cwtest needs --large FILE")?;
    let realized = io::read_returns_csv(&realized)?;
    let f_small = io::read_returns_csv(&small)?;
    let f_large = io::read_returns_csv(&large)?;
    if f_small.len() != realized.len() || f_large.len() != realized.len() {
        bail!(
            "length mismatch: realized {} / small {} / large {}",
            realized.len(),
            f_small.len(),
            f_large.len()
        );
    }
    let e_small: Vec<f64> = realized
        .values()
        .iter()
        .zip(f_small.values())
        .map(|(r, f)| r - f)
        .collect();
    let e_large: Vec<f64> = realized
        .values()
        .iter()
        .zip(f_large.values())
        .map(|(r, f)| r - f)
        .collect();
    let result = cw_test(&e_small, &e_large, f_small.values(), f_large.values())?;
    println!("n_obs: {}", result.n_obs);
    println!("statistic: {}", fmt_float17(result.statistic));
    println!("p_value: {}", fmt_float17(result.p_value));
    Ok(())
}
