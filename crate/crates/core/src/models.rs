//! Absorption along a fractal path.
//!
//! A density decaying at a constant rate per unit rise obeys
//! `D_F^alpha rho = -kappa rho`, whose solution is
//! `rho(w(t)) = rho0 exp(-kappa S(t))`: exponential in the rise, and so a
//! stretched exponential `exp(-c r^alpha)` in the Euclidean distance `r`
//! travelled from the origin.

use serde::{Deserialize, Serialize};

use crate::calculus::{default_step, falpha_derivative, CurveFunction};
use crate::curve::{distance, Curve, CurveSpec};
use crate::error::{Error, Result};
use crate::mass::StaircaseTable;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbsorptionModel {
    /// Absorption coefficient per unit rise.
    pub kappa: f64,
    /// Density at the curve origin.
    pub rho0: f64,
    pub curve: CurveSpec,
}

impl AbsorptionModel {
    pub fn new(kappa: f64, rho0: f64, curve: CurveSpec) -> Result<Self> {
        let model = Self { kappa, rho0, curve };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa.is_finite() && self.kappa >= 0.0) {
            return Err(Error::invalid(format!("kappa = {} must be non-negative", self.kappa)));
        }
        if !(self.rho0.is_finite() && self.rho0 >= 0.0) {
            return Err(Error::invalid(format!("rho0 = {} must be non-negative", self.rho0)));
        }
        Ok(())
    }

    /// `rho0 exp(-kappa S(t))` as a curve function.
    pub fn density(&self) -> CurveFunction {
        let (kappa, rho0) = (self.kappa, self.rho0);
        CurveFunction::of_rise(move |s| rho0 * (-kappa * s).exp())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub t: f64,
    pub s: f64,
    pub distance_from_origin: f64,
    pub rho: f64,
}

/// Density along `grid`, measured from the table origin.
pub fn absorption_profile(
    model: &AbsorptionModel,
    table: &StaircaseTable,
    grid: &[f64],
) -> Result<Vec<ProfilePoint>> {
    model.validate()?;
    let curve = Curve::new(model.curve.clone())?;
    let origin = curve.evaluate(table.origin)?;
    let rho = model.density();
    grid.iter()
        .map(|&t| {
            let w = curve.evaluate(t)?;
            Ok(ProfilePoint {
                t,
                s: table.eval(t)?,
                distance_from_origin: distance(&w, &origin),
                rho: rho.eval(table, t)?,
            })
        })
        .collect()
}

/// CSV with columns `t,S_t,distance_from_origin,rho`.
pub fn write_profile_csv<W: std::io::Write>(profile: &[ProfilePoint], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "S_t", "distance_from_origin", "rho"])?;
    for p in profile {
        w.write_record([
            p.t.to_string(),
            p.s.to_string(),
            p.distance_from_origin.to_string(),
            p.rho.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdeCheck {
    /// `|D_F^alpha rho + kappa rho|` at each grid point.
    pub residuals: Vec<(f64, f64)>,
    pub max_residual: f64,
    /// `tol kappa rho0`.
    pub bound: f64,
    pub passed: bool,
}

/// Differentiates the closed-form density numerically and checks
/// `|D_F^alpha rho + kappa rho| <= tol kappa rho0` on `grid`.
pub fn verify_absorption_ode(
    model: &AbsorptionModel,
    table: &StaircaseTable,
    grid: &[f64],
    tol: f64,
) -> Result<OdeCheck> {
    model.validate()?;
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::invalid(format!("tolerance {tol} must be positive")));
    }
    let rho = model.density();
    let h = default_step(table);
    let mut residuals = Vec::with_capacity(grid.len());
    let mut max_residual: f64 = 0.0;
    for &t in grid {
        let d = falpha_derivative(&rho, table, t, h)?.value;
        let r = (d + model.kappa * rho.eval(table, t)?).abs();
        max_residual = max_residual.max(r);
        residuals.push((t, r));
    }
    let bound = tol * model.kappa * model.rho0;
    Ok(OdeCheck {
        residuals,
        max_residual,
        bound,
        passed: max_residual <= bound,
    })
}

/// Least-squares slope and intercept of `y` against `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::invalid("linear fit needs two or more paired values"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 || !sxx.is_finite() || !sxy.is_finite() {
        return Err(Error::Numeric("degenerate abscissae in linear fit".into()));
    }
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

/// Slope of `ln rho` against `S` over a profile; `-kappa` up to rounding.
pub fn log_density_slope(profile: &[ProfilePoint]) -> Result<f64> {
    if profile.iter().any(|p| !(p.rho > 0.0)) {
        return Err(Error::invalid("log-density fit needs a positive density"));
    }
    let s: Vec<f64> = profile.iter().map(|p| p.s).collect();
    let l: Vec<f64> = profile.iter().map(|p| p.rho.ln()).collect();
    Ok(linear_fit(&s, &l)?.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceRiseFit {
    /// Slope of `ln S` against `ln |w(t) - w(origin)|`.
    pub slope: f64,
    pub intercept: f64,
    /// `(distance, S)` pairs used.
    pub points: Vec<(f64, f64)>,
}

/// `samples` parameters `a0 + (b0 - a0) span_min^(1 - k / (samples - 1))`,
/// evenly spaced in `ln(t - a0)` from `a0 + span_min (b0 - a0)` to `b0`.
pub fn log_spaced_grid(a0: f64, b0: f64, span_min: f64, samples: usize) -> Result<Vec<f64>> {
    if !(span_min > 0.0 && span_min < 1.0) || samples < 2 || !(a0 < b0) {
        return Err(Error::invalid(
            "a log-spaced grid needs a0 < b0, 0 < span_min < 1 and at least two samples",
        ));
    }
    let mut grid: Vec<f64> = (0..samples)
        .map(|k| a0 + (b0 - a0) * span_min.powf(1.0 - k as f64 / (samples - 1) as f64))
        .collect();
    grid[samples - 1] = b0;
    Ok(grid)
}

/// Regresses `ln S(t)` on `ln |w(t) - w(a0)|` for `samples` parameters
/// spaced logarithmically in `[a0 + span_min (b0 - a0), b0]`. The slope
/// approaches the curve's dimension.
pub fn distance_rise_fit(
    curve: &Curve,
    table: &StaircaseTable,
    span_min: f64,
    samples: usize,
) -> Result<DistanceRiseFit> {
    let (a0, b0) = table.domain();
    let origin = curve.evaluate(a0)?;
    let mut points = Vec::with_capacity(samples);
    for t in log_spaced_grid(a0, b0, span_min, samples)? {
        let r = distance(&curve.evaluate(t)?, &origin);
        let s = table.eval(t)? - table.eval(a0)?;
        if r > 0.0 && s > 0.0 {
            points.push((r, s));
        }
    }
    let x: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let (slope, intercept) = linear_fit(&x, &y)?;
    Ok(DistanceRiseFit {
        slope,
        intercept,
        points,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StretchedExponentialFit {
    /// Slope of `ln rho` against `r^alpha` over the whole window.
    pub slope: f64,
    pub slope_near: f64,
    pub slope_far: f64,
    /// `|slope_near - slope_far| / |slope|`.
    pub instability: f64,
}

/// Fits `ln rho` against `r^alpha` over the profile, and separately over
/// its nearer and farther halves (by distance). A stretched exponential
/// gives matching slopes.
///
/// On a self-similar curve `r^alpha` tracks the rise only up to a bounded
/// oscillation, so a profile on a uniform grid, which puts most points far
/// out, gives a noisier far half than one on [`log_spaced_grid`].
pub fn stretched_exponential_fit(
    profile: &[ProfilePoint],
    alpha: f64,
) -> Result<StretchedExponentialFit> {
    let mut pts: Vec<(f64, f64)> = profile
        .iter()
        .filter(|p| p.rho > 0.0 && p.distance_from_origin > 0.0)
        .map(|p| (p.distance_from_origin.powf(alpha), p.rho.ln()))
        .collect();
    if pts.len() < 4 {
        return Err(Error::invalid("stretched-exponential fit needs at least four points"));
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let fit = |p: &[(f64, f64)]| {
        let x: Vec<f64> = p.iter().map(|q| q.0).collect();
        let y: Vec<f64> = p.iter().map(|q| q.1).collect();
        linear_fit(&x, &y).map(|f| f.0)
    };
    let mid = pts.len() / 2;
    let slope = fit(&pts)?;
    let slope_near = fit(&pts[..mid])?;
    let slope_far = fit(&pts[mid..])?;
    Ok(StretchedExponentialFit {
        slope,
        slope_near,
        slope_far,
        instability: (slope_near - slope_far).abs() / slope.abs(),
    })
}
