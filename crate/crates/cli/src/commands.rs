use std::path::Path;
use std::sync::Arc;

use fractal_calculus::calculus::{default_step, tabulate, write_tabulation_csv};
use fractal_calculus::models::{
    distance_rise_fit, log_density_slope, log_spaced_grid, stretched_exponential_fit, write_profile_csv, DistanceRiseFit,
    OdeCheck, ProfilePoint, StretchedExponentialFit,
};
use fractal_calculus::{
    absorption_profile, estimate_dimension, falpha_derivative, falpha_integrate, invariance_check,
    optimize_subdivision, staircase as compute_staircase, taylor_partial_sum, verify_absorption_ode,
    AbsorptionModel, Curve, CurveFunction, CurveSpec, DerivativeResult, DimensionConfig, MassEstimate,
    OptimizerConfig, SimilarityTransform, StaircaseTable,
};
use serde::Serialize;

use crate::cache::staircase_cached;
use crate::error::CliError;
use crate::expr::{eval_constant, Env, Expr};
use crate::output::{csv_bytes, emit, write_atomic, CurveInfo, Document};
use crate::{
    AbsorbArgs, CurveArgs, DifferentiateArgs, DimensionArgs, IntegrateArgs, InvarianceArgs, MassArgs,
    StaircaseArgs, TableArgs, TaylorArgs,
};

fn load_curve(source: &str) -> Result<(Curve, CurveInfo), CliError> {
    let spec = match CurveSpec::builtin(source) {
        Some(spec) => spec,
        None => {
            let path = Path::new(source);
            if !path.is_file() {
                return Err(CliError::usage(format!(
                    "unknown curve `{source}`: not a built-in name (koch, minkowski, line, weierstrass) or a file"
                )));
            }
            let text = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
            serde_json::from_slice::<CurveSpec>(&text).map_err(|e| {
                CliError::usage(format!("{}: invalid curve spec: {e}", path.display()))
            })?
        }
    };
    let info = CurveInfo::new(&spec)?;
    Ok((Curve::new(spec)?, info))
}

fn resolve_alpha(args: &CurveArgs, spec: &CurveSpec) -> Result<f64, CliError> {
    match &args.alpha {
        Some(src) => {
            let v = eval_constant(src).map_err(|e| CliError::usage(format!("--alpha `{src}`: {e}")))?;
            if !v.is_finite() {
                return Err(CliError::usage(format!("--alpha `{src}` is not a finite number")));
            }
            Ok(v)
        }
        None => spec.natural_dimension().ok_or_else(|| {
            CliError::usage("the curve has no similarity dimension; pass --alpha")
        }),
    }
}

fn positive(flag: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(CliError::usage(format!("--{flag} must be a positive number (got {v})")))
    }
}

fn optimizer(alpha: f64, delta: f64, seed: u64, restarts: usize, iters: f64) -> Result<OptimizerConfig, CliError> {
    positive("delta", delta)?;
    positive("iters", iters)?;
    if restarts == 0 {
        return Err(CliError::usage("--restarts must be at least 1"));
    }
    Ok(OptimizerConfig::new(alpha, delta)
        .with_seed(seed)
        .with_restarts(restarts)
        .with_budget(iters))
}

fn interval(curve: &Curve, a: Option<f64>, b: Option<f64>) -> [f64; 2] {
    let (a0, b0) = curve.domain();
    [a.unwrap_or(a0), b.unwrap_or(b0)]
}

/// Parses an expression into a function of `t`, `S(t)` and the coordinates.
fn curve_function(src: &str, curve: &Arc<Curve>) -> Result<CurveFunction, CliError> {
    let e = Expr::parse(src).map_err(|err| CliError::usage(format!("--expr `{src}`: {err}")))?;
    if !e.uses_coordinates() {
        return Ok(CurveFunction::new(move |p| {
            e.eval(&Env {
                t: p.t,
                s: p.s,
                ..Env::default()
            })
        }));
    }
    if curve.embedding_dim() < 2 {
        return Err(CliError::usage("--expr uses coordinates the curve does not have"));
    }
    Ok(CurveFunction::on_curve(curve.clone(), move |p| {
        e.eval(&Env {
            t: p.t,
            s: p.s,
            x: p.w[0],
            y: p.w[1],
        })
    }))
}

/// Resolved staircase settings; also the cache key together with the curve hash.
#[derive(Debug, Clone, Serialize)]
pub struct TableConfig {
    pub alpha: f64,
    pub grid: usize,
    pub delta: f64,
    pub restarts: usize,
    pub max_normalized_iters: f64,
    pub seed: u64,
}

fn table_config(curve: &Curve, alpha: f64, seed: u64, args: &TableArgs) -> Result<TableConfig, CliError> {
    if args.grid < 2 {
        return Err(CliError::usage("--grid must be at least 2"));
    }
    let (a0, b0) = curve.domain();
    let delta = args.delta.unwrap_or((b0 - a0) / args.grid as f64 / 10.0);
    Ok(TableConfig {
        alpha,
        grid: args.grid,
        delta,
        restarts: args.restarts,
        max_normalized_iters: args.iters,
        seed,
    })
}

fn table(curve: &Curve, info: &CurveInfo, cfg: &TableConfig) -> Result<StaircaseTable, CliError> {
    let opt = optimizer(cfg.alpha, cfg.delta, cfg.seed, cfg.restarts, cfg.max_normalized_iters)?;
    staircase_cached(&info.hash, cfg, || Ok(compute_staircase(curve, cfg.alpha, cfg.grid, &opt)?))
}

#[derive(Debug, Serialize)]
struct MassConfig {
    interval: [f64; 2],
    optimizer: OptimizerConfig,
}

#[derive(Debug, Serialize)]
struct MassOutput<'a> {
    /// `Gamma(alpha + 1) * value`, the bare chord sum.
    unnormalized_value: f64,
    #[serde(flatten)]
    estimate: &'a MassEstimate,
}

pub fn mass(args: MassArgs) -> Result<(), CliError> {
    let (curve, info) = load_curve(&args.curve.curve)?;
    let alpha = resolve_alpha(&args.curve, curve.spec())?;
    let opt = optimizer(alpha, args.delta, args.curve.seed, args.restarts, args.iters)?;
    let [a, b] = interval(&curve, args.a, args.b);
    let est = optimize_subdivision(&curve, a, b, &opt)?;
    if let Some(path) = &args.trace_out {
        write_atomic(path, &csv_bytes(|buf| est.write_trace_csv(buf))?)?;
    }
    if let Some(path) = &args.subdivision_out {
        write_atomic(path, &csv_bytes(|buf| est.write_subdivision_csv(&curve, buf))?)?;
    }
    let config = MassConfig {
        interval: [a, b],
        optimizer: opt,
    };
    let result = MassOutput {
        unnormalized_value: est.unnormalized_value(),
        estimate: &est,
    };
    let doc = Document::new("mass", args.curve.seed, &info, &config, &result);
    emit(&args.output, &doc, |buf| est.write_trace_csv(buf))
}

pub fn staircase(args: StaircaseArgs) -> Result<(), CliError> {
    let (curve, info) = load_curve(&args.curve.curve)?;
    let alpha = resolve_alpha(&args.curve, curve.spec())?;
    let cfg = table_config(&curve, alpha, args.curve.seed, &args.table)?;
    let t = table(&curve, &info, &cfg)?;
    let doc = Document::new("staircase", cfg.seed, &info, &cfg, &t);
    emit(&args.output, &doc, |buf| t.write_csv(buf))
}

#[derive(Debug, Serialize)]
struct DimensionRunConfig {
    tol: f64,
    #[serde(flatten)]
    dimension: DimensionConfig,
}

pub fn dimension(args: DimensionArgs) -> Result<(), CliError> {
    let (curve, info) = load_curve(&args.curve)?;
    positive("tol", args.tol)?;
    positive("delta1", args.delta1)?;
    positive("delta2", args.delta2)?;
    if args.delta1 >= args.delta2 {
        return Err(CliError::usage("--delta1 must be smaller than --delta2"));
    }
    if args.repeats == 0 || args.max_iterations == 0 {
        return Err(CliError::usage("--repeats and --max-iterations must be at least 1"));
    }
    let opt = optimizer(1.0, args.delta2, args.seed, args.restarts, args.iters)?;
    let cfg = DimensionRunConfig {
        tol: args.tol,
        dimension: DimensionConfig {
            delta1: args.delta1,
            delta2: args.delta2,
            repeats: args.repeats,
            max_iterations: args.max_iterations,
            optimizer: opt,
        },
    };
    let est = estimate_dimension(&curve, args.tol, &cfg.dimension)?;
    let doc = Document::new("dimension", args.seed, &info, &cfg, &est);
    emit(&args.output, &doc, |buf| est.write_ratios_csv(buf))
}

#[derive(Debug, Serialize)]
struct CalculusConfig<'a, X: Serialize> {
    expr: &'a str,
    #[serde(flatten)]
    extra: X,
    staircase: TableConfig,
}

#[derive(Debug, Serialize)]
struct IntegrateExtra {
    interval: [f64; 2],
    tol: f64,
}

pub fn integrate(args: IntegrateArgs) -> Result<(), CliError> {
    let (curve, info) = load_curve(&args.curve.curve)?;
    let curve = Arc::new(curve);
    positive("tol", args.tol)?;
    let f = curve_function(&args.expr, &curve)?;
    let alpha = resolve_alpha(&args.curve, curve.spec())?;
    let tcfg = table_config(&curve, alpha, args.curve.seed, &args.table)?;
    let [a, b] = interval(&curve, args.a, args.b);
    let t = table(&curve, &info, &tcfg)?;
    let res = falpha_integrate(&f, &t, a, b, args.tol)?;
    let cfg = CalculusConfig {
        expr: &args.expr,
        extra: IntegrateExtra {
            interval: [a, b],
            tol: args.tol,
        },
        staircase: tcfg,
    };
    let doc = Document::new("integrate", args.curve.seed, &info, &cfg, &res);
    emit(&args.output, &doc, |buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(["a", "b", "value", "lower_sum", "upper_sum", "gap", "cells"])?;
        w.write_record([
            a.to_string(),
            b.to_string(),
            res.value.to_string(),
            res.lower_sum.to_string(),
            res.upper_sum.to_string(),
            res.gap.to_string(),
            res.subdivision_size.to_string(),
        ])?;
        w.flush()?;
        Ok(())
    })
}

#[derive(Debug, Serialize)]
struct DifferentiateExtra {
    t: f64,
    h: f64,
}

#[derive(Debug, Serialize)]
struct DifferentiateOutput {
    t: f64,
    s: f64,
    f: f64,
    derivative: DerivativeResult,
}

pub fn differentiate(args: DifferentiateArgs) -> Result<(), CliError> {
    let (curve, info) = load_curve(&args.curve.curve)?;
    let curve = Arc::new(curve);
    let f = curve_function(&args.expr, &curve)?;
    if let Some(h) = args.h {
        positive("h", h)?;
    }
    let alpha = resolve_alpha(&args.curve, curve.spec())?;
    let tcfg = table_config(&curve, alpha, args.curve.seed, &args.table)?;
    let t = table(&curve, &info, &tcfg)?;
    let h = args.h.unwrap_or_else(|| default_step(&t));
    let derivative = falpha_derivative(&f, &t, args.t, h)?;
    let out = DifferentiateOutput {
        t: args.t,
        s: t.eval(args.t)?,
        f: f.eval(&t, args.t)?,
        derivative,
    };
    let rows = tabulate(&f, &t, &[args.t], h)?;
    let cfg = CalculusConfig {
        expr: &args.expr,
        extra: DifferentiateExtra { t: args.t, h },
        staircase: tcfg,
    };
    let doc = Document::new("differentiate", args.curve.seed, &info, &cfg, &out);
    emit(&args.output, &doc, |buf| write_tabulation_csv(&rows, buf))
}

#[derive(Debug, Serialize)]
struct TaylorExtra {
    center: f64,
    at: f64,
    order: usize,
}

pub fn taylor(args: TaylorArgs) -> Result<(), CliError> {
    let (curve, info) = load_curve(&args.curve.curve)?;
    let curve = Arc::new(curve);
    let f = curve_function(&args.expr, &curve)?;
    let alpha = resolve_alpha(&args.curve, curve.spec())?;
    let tcfg = table_config(&curve, alpha, args.curve.seed, &args.table)?;
    let center = args.center.unwrap_or(curve.domain().0);
    let t = table(&curve, &info, &tcfg)?;
    let res = taylor_partial_sum(&f, &t, center, args.at, args.order)?;
    let cfg = CalculusConfig {
        expr: &args.expr,
        extra: TaylorExtra {
            center,
            at: args.at,
            order: args.order,
        },
        staircase: tcfg,
    };
    let doc = Document::new("taylor", args.curve.seed, &info, &cfg, &res);
    emit(&args.output, &doc, |buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(["n", "derivative"])?;
        for (n, d) in res.derivatives.iter().enumerate() {
            w.write_record([n.to_string(), d.to_string()])?;
        }
        w.flush()?;
        Ok(())
    })
}

#[derive(Debug, Serialize)]
struct AbsorbExtra {
    kappa: f64,
    rho0: f64,
    points: usize,
    tol: f64,
}

#[derive(Debug, Serialize)]
struct AbsorbOutput {
    profile: Vec<ProfilePoint>,
    ode_check: OdeCheck,
    /// Slope of `ln rho` against `S`; equals `-kappa`.
    log_density_slope: f64,
    /// Slope of `ln S` against `ln |w(t) - w(a0)|`, on a log-spaced window.
    distance_rise: DistanceRiseFit,
    /// `ln rho` against `|w(t) - w(a0)|^alpha`, on the same window.
    stretched_exponential: StretchedExponentialFit,
}

/// Profile grid for `absorb`: `points` parameters spread uniformly over the
/// domain, both ends included.
pub fn profile_grid(curve: &Curve, points: usize) -> Vec<f64> {
    let (a0, b0) = curve.domain();
    let n = points - 1;
    let mut grid: Vec<f64> = (0..points).map(|k| a0 + (b0 - a0) * k as f64 / n as f64).collect();
    grid[n] = b0;
    grid
}

pub fn absorb(args: AbsorbArgs) -> Result<(), CliError> {
    let (curve, info) = load_curve(&args.curve.curve)?;
    if args.points < 4 {
        return Err(CliError::usage("--points must be at least 4"));
    }
    positive("tol", args.tol)?;
    let model = AbsorptionModel::new(args.kappa, args.rho0, curve.spec().clone())?;
    let alpha = resolve_alpha(&args.curve, curve.spec())?;
    let tcfg = table_config(&curve, alpha, args.curve.seed, &args.table)?;
    let t = table(&curve, &info, &tcfg)?;
    let grid = profile_grid(&curve, args.points);
    let profile = absorption_profile(&model, &t, &grid)?;
    let ode_check = verify_absorption_ode(&model, &t, &grid, args.tol)?;
    // Both fits read the curve on a log-spaced window reaching down to one
    // staircase segment.
    let (a0, b0) = curve.domain();
    let span_min = 1.0 / tcfg.grid as f64;
    let window = log_spaced_grid(a0, b0, span_min, args.points)?;
    let out = AbsorbOutput {
        log_density_slope: log_density_slope(&profile)?,
        distance_rise: distance_rise_fit(&curve, &t, span_min, args.points)?,
        stretched_exponential: stretched_exponential_fit(
            &absorption_profile(&model, &t, &window)?,
            alpha,
        )?,
        profile,
        ode_check,
    };
    let cfg = AbsorbExtra {
        kappa: args.kappa,
        rho0: args.rho0,
        points: args.points,
        tol: args.tol,
    };
    #[derive(Serialize)]
    struct Config {
        #[serde(flatten)]
        model: AbsorbExtra,
        staircase: TableConfig,
    }
    let cfg = Config {
        model: cfg,
        staircase: tcfg,
    };
    let doc = Document::new("absorb", args.curve.seed, &info, &cfg, &out);
    emit(&args.output, &doc, |buf| write_profile_csv(&out.profile, buf))
}

/// `translate:DX,DY,...`, `scale:L` or `rotate:RADIANS`.
pub fn parse_transform(src: &str) -> Result<SimilarityTransform, CliError> {
    let bad = |why: &str| CliError::usage(format!("--transform `{src}`: {why}"));
    let (kind, value) = src
        .split_once(':')
        .ok_or_else(|| bad("expected KIND:VALUE"))?;
    let number = |s: &str| eval_constant(s.trim()).map_err(|e| bad(&e.to_string()));
    match kind.trim() {
        "translate" => Ok(SimilarityTransform::Translate(
            value.split(',').map(number).collect::<Result<_, _>>()?,
        )),
        "scale" => Ok(SimilarityTransform::Scale(number(value)?)),
        "rotate" => Ok(SimilarityTransform::rotate_2d(number(value)?)),
        other => Err(bad(&format!("unknown kind `{other}` (translate, scale, rotate)"))),
    }
}

pub fn invariance(args: InvarianceArgs) -> Result<(), CliError> {
    let (curve, info) = load_curve(&args.curve.curve)?;
    let alpha = resolve_alpha(&args.curve, curve.spec())?;
    let transform = parse_transform(&args.transform)?;
    let opt = optimizer(alpha, args.delta, args.curve.seed, args.restarts, args.iters)?;
    let report = invariance_check(curve.spec(), &transform, alpha, &opt)?;
    let doc = Document::new("invariance", args.curve.seed, &info, &opt, &report);
    emit(&args.output, &doc, |buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(["alpha", "before", "after", "ratio", "expected_ratio", "relative_error"])?;
        w.write_record([
            report.alpha.to_string(),
            report.before.to_string(),
            report.after.to_string(),
            report.ratio.to_string(),
            report.expected_ratio.to_string(),
            report.relative_error.to_string(),
        ])?;
        w.flush()?;
        Ok(())
    })
}
