//! F^alpha integral and derivative of functions on a fractal curve.
//!
//! Both operators go through the conjugacy `phi[f](S(t)) = f(w(t))`, which
//! turns calculus on the curve into ordinary calculus in the rise variable
//! `u = S(t)`. Every rise value comes from one [`StaircaseTable`], so the
//! table's Monte Carlo noise is frozen and identities such as linearity and
//! the upper/lower bracketing hold exactly relative to it.

mod fd;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::curve::{Curve, MAX_EMBEDDING_DIM};
use crate::error::{Error, Result};
use crate::mass::StaircaseTable;

/// Point at which a [`CurveFunction`] is evaluated: the parameter, the rise
/// `S(t)` and, for functions built with [`CurveFunction::on_curve`], the
/// coordinates `w(t)` (empty otherwise).
#[derive(Debug, Clone, Copy)]
pub struct Sample<'a> {
    pub t: f64,
    pub s: f64,
    pub w: &'a [f64],
}

type Rule = dyn Fn(&Sample<'_>) -> f64 + Send + Sync;

/// A real function `f(theta)` on the curve, addressed through the parameter
/// `t` with `theta = w(t)`.
#[derive(Clone)]
pub struct CurveFunction {
    rule: Arc<Rule>,
    curve: Option<Arc<Curve>>,
}

impl fmt::Debug for CurveFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CurveFunction")
            .field("reads_coordinates", &self.curve.is_some())
            .finish()
    }
}

impl CurveFunction {
    /// A function of `t` and `S(t)`.
    pub fn new(rule: impl Fn(&Sample<'_>) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            rule: Arc::new(rule),
            curve: None,
        }
    }

    /// A function that may also read the coordinates `w(t)` of `curve`.
    pub fn on_curve(
        curve: Arc<Curve>,
        rule: impl Fn(&Sample<'_>) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            rule: Arc::new(rule),
            curve: Some(curve),
        }
    }

    pub fn constant(k: f64) -> Self {
        Self::new(move |_| k)
    }

    /// `f(t) = g(t)`.
    pub fn of_param(g: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::new(move |p| g(p.t))
    }

    /// `f(t) = g(S(t))`; its conjugate is `g` itself.
    pub fn of_rise(g: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::new(move |p| g(p.s))
    }

    /// `a f + b g`.
    pub fn linear_combination(a: f64, f: &CurveFunction, b: f64, g: &CurveFunction) -> Self {
        let (rf, rg) = (f.rule.clone(), g.rule.clone());
        Self {
            rule: Arc::new(move |p| a * rf(p) + b * rg(p)),
            curve: f.curve.clone().or_else(|| g.curve.clone()),
        }
    }

    /// `h(f)`.
    pub fn map(&self, h: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        let r = self.rule.clone();
        Self {
            rule: Arc::new(move |p| h(r(p))),
            curve: self.curve.clone(),
        }
    }

    pub fn eval(&self, table: &StaircaseTable, t: f64) -> Result<f64> {
        let (a, b) = table.domain();
        Error::check_domain(t, a, b)?;
        Ok(self.eval_at(t, table.eval_clamped(t)))
    }

    /// Evaluates with a known rise value `s = S(t)`.
    pub(crate) fn eval_at(&self, t: f64, s: f64) -> f64 {
        match &self.curve {
            Some(curve) => {
                let dim = curve.embedding_dim();
                let mut buf = [0.0; MAX_EMBEDDING_DIM];
                let (a0, b0) = curve.domain();
                curve.eval_unchecked(t.clamp(a0, b0), &mut buf[..dim]);
                (self.rule)(&Sample {
                    t,
                    s,
                    w: &buf[..dim],
                })
            }
            None => (self.rule)(&Sample { t, s, w: &[] }),
        }
    }

    pub(crate) fn eval_clamped(&self, table: &StaircaseTable, t: f64) -> f64 {
        self.eval_at(t, table.eval_clamped(t))
    }

    /// Smallest and largest value on `samples` uniformly spaced parameters;
    /// fails if any value is not finite.
    pub fn probe_bounds(&self, table: &StaircaseTable, samples: usize) -> Result<(f64, f64)> {
        let (a, b) = table.domain();
        let n = samples.max(2);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let t = a + (b - a) * i as f64 / (n - 1) as f64;
            let v = self.eval_clamped(table, t);
            if !v.is_finite() {
                return Err(Error::Numeric(format!("function value {v} at t = {t}")));
            }
            lo = lo.min(v);
            hi = hi.max(v);
        }
        Ok((lo, hi))
    }
}

/// The conjugate `g = phi[f]` on `[S(a0), S(b0)]`, `g(u) = f(S^{-1}(u))`.
#[derive(Debug, Clone, Copy)]
pub struct Conjugate<'a> {
    f: &'a CurveFunction,
    table: &'a StaircaseTable,
}

impl Conjugate<'_> {
    pub fn range(&self) -> (f64, f64) {
        self.table.range()
    }

    pub fn eval(&self, u: f64) -> Result<f64> {
        let (lo, hi) = self.range();
        Error::check_domain(u, lo, hi)?;
        Ok(self.eval_clamped(u))
    }

    pub(crate) fn eval_clamped(&self, u: f64) -> f64 {
        let t = self.table.inverse_clamped(u);
        self.f.eval_at(t, self.table.eval_clamped(t))
    }
}

pub fn phi<'a>(f: &'a CurveFunction, table: &'a StaircaseTable) -> Conjugate<'a> {
    Conjugate { f, table }
}

/// The curve function whose conjugate is `g`: `f(t) = g(S(t))`.
pub fn phi_inverse(g: impl Fn(f64) -> f64 + Send + Sync + 'static) -> CurveFunction {
    CurveFunction::of_rise(g)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegrationOptions {
    pub initial_cells: usize,
    /// Refinement stops with a non-convergence error past this many cells.
    pub max_cells: usize,
    /// Interior samples per cell used to estimate its sup and inf, in
    /// addition to the two end points.
    pub samples_per_cell: usize,
}

impl Default for IntegrationOptions {
    fn default() -> Self {
        Self {
            initial_cells: 16,
            max_cells: 1 << 22,
            samples_per_cell: 16,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefinementLevel {
    pub cells: usize,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegralResult {
    /// `(upper + lower) / 2`.
    pub value: f64,
    pub lower_sum: f64,
    pub upper_sum: f64,
    pub gap: f64,
    /// Number of cells at the final level.
    pub subdivision_size: usize,
    pub levels: Vec<RefinementLevel>,
}

/// `int_{C(a, b)} f d_F^alpha theta` with default options.
pub fn falpha_integrate(
    f: &CurveFunction,
    table: &StaircaseTable,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<IntegralResult> {
    falpha_integrate_with(f, table, a, b, tol, &IntegrationOptions::default())
}

/// Upper and lower F^alpha-sums over uniform subdivisions of `[a, b]`,
/// doubled until `upper - lower <= tol`.
///
/// Each cell contributes `M * (S(t_{i+1}) - S(t_i))` to the upper sum and
/// `m * (S(t_{i+1}) - S(t_i))` to the lower one, with `M` and `m` the
/// largest and smallest sampled value of `f` on the cell.
pub fn falpha_integrate_with(
    f: &CurveFunction,
    table: &StaircaseTable,
    a: f64,
    b: f64,
    tol: f64,
    opts: &IntegrationOptions,
) -> Result<IntegralResult> {
    let (a0, b0) = table.domain();
    Error::check_domain(a, a0, b0)?;
    Error::check_domain(b, a0, b0)?;
    if a > b {
        return Err(Error::invalid(format!("integration bounds out of order: {a} > {b}")));
    }
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::invalid(format!("tolerance {tol} must be positive")));
    }
    if opts.initial_cells == 0 || opts.max_cells < opts.initial_cells {
        return Err(Error::invalid("need 1 <= initial_cells <= max_cells"));
    }
    if a == b {
        return Ok(IntegralResult {
            value: 0.0,
            lower_sum: 0.0,
            upper_sum: 0.0,
            gap: 0.0,
            subdivision_size: 0,
            levels: Vec::new(),
        });
    }

    let mut levels = Vec::new();
    let mut cells = opts.initial_cells;
    loop {
        let (lower, upper) = cell_sums(f, table, a, b, cells, opts.samples_per_cell)?;
        levels.push(RefinementLevel { cells, lower, upper });
        let gap = upper - lower;
        if gap <= tol {
            return Ok(IntegralResult {
                value: 0.5 * (upper + lower),
                lower_sum: lower,
                upper_sum: upper,
                gap,
                subdivision_size: cells,
                levels,
            });
        }
        if cells * 2 > opts.max_cells {
            return Err(Error::NonConvergence {
                lower,
                upper,
                gap,
                tol,
                cells,
            });
        }
        cells *= 2;
    }
}

fn cell_sums(
    f: &CurveFunction,
    table: &StaircaseTable,
    a: f64,
    b: f64,
    cells: usize,
    samples: usize,
) -> Result<(f64, f64)> {
    let width = (b - a) / cells as f64;
    let node = |i: usize| if i == cells { b } else { a + width * i as f64 };
    let mut lower = 0.0;
    let mut upper = 0.0;
    let mut t_left = a;
    let mut s_left = table.eval_clamped(a);
    let mut f_left = f.eval_at(a, s_left);
    for i in 0..cells {
        let t_right = node(i + 1);
        let s_right = table.eval_clamped(t_right);
        let f_right = f.eval_at(t_right, s_right);
        let mut hi = f_left.max(f_right);
        let mut lo = f_left.min(f_right);
        for j in 1..=samples {
            let t = t_left + (t_right - t_left) * j as f64 / (samples + 1) as f64;
            let v = f.eval_clamped(table, t);
            hi = hi.max(v);
            lo = lo.min(v);
        }
        if !(lo.is_finite() && hi.is_finite()) {
            return Err(Error::Numeric(format!(
                "integrand is not finite on [{t_left}, {t_right}]"
            )));
        }
        let ds = s_right - s_left;
        upper += hi * ds;
        lower += lo * ds;
        t_left = t_right;
        s_left = s_right;
        f_left = f_right;
    }
    Ok((lower, upper))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Forward,
    Backward,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivativeResult {
    /// Richardson combination of the two difference quotients.
    pub value: f64,
    /// Rise value `u` the derivative is taken at.
    pub u: f64,
    pub h: f64,
    /// Difference quotient with step `h`.
    pub coarse: f64,
    /// Difference quotient with step `h / 2`.
    pub fine: f64,
    pub error_estimate: f64,
    /// Set when `u +- h` leaves the range and a one-sided formula was used.
    pub one_sided: Option<Side>,
}

/// Numerical derivative of `g` at `u` on `[lo, hi]`: second-order central
/// differences at steps `h` and `h / 2` with Richardson extrapolation, or
/// the second-order one-sided formula when `u +- h` leaves the range.
pub fn ordinary_derivative(
    g: impl Fn(f64) -> f64,
    u: f64,
    h: f64,
    lo: f64,
    hi: f64,
) -> Result<DerivativeResult> {
    Error::check_domain(u, lo, hi)?;
    if !(h.is_finite() && h > 0.0 && 2.0 * h <= hi - lo) {
        return Err(Error::invalid(format!(
            "step {h} must be positive and at most half the range [{lo}, {hi}]"
        )));
    }
    let one_sided = if u - h >= lo && u + h <= hi {
        None
    } else if u + 2.0 * h <= hi {
        Some(Side::Forward)
    } else {
        Some(Side::Backward)
    };
    let quotient = |h: f64| match one_sided {
        None => (g(u + h) - g(u - h)) / (2.0 * h),
        Some(Side::Forward) => (-3.0 * g(u) + 4.0 * g(u + h) - g(u + 2.0 * h)) / (2.0 * h),
        Some(Side::Backward) => (3.0 * g(u) - 4.0 * g(u - h) + g(u - 2.0 * h)) / (2.0 * h),
    };
    let coarse = quotient(h);
    let fine = quotient(0.5 * h);
    let value = fine + (fine - coarse) / 3.0;
    if !value.is_finite() {
        return Err(Error::Numeric(format!("derivative at u = {u} is not finite")));
    }
    Ok(DerivativeResult {
        value,
        u,
        h,
        coarse,
        fine,
        error_estimate: (fine - coarse).abs() / 3.0,
        one_sided,
    })
}

/// Default derivative step, `1e-4 (S(b0) - S(a0))`.
pub fn default_step(table: &StaircaseTable) -> f64 {
    1e-4 * table.total()
}

/// `D_F^alpha f` at parameter `t`: the ordinary derivative of `phi[f]` at
/// `u = S(t)` with step `h` in `u`.
pub fn falpha_derivative(
    f: &CurveFunction,
    table: &StaircaseTable,
    t: f64,
    h: f64,
) -> Result<DerivativeResult> {
    let u = table.eval(t)?;
    let g = phi(f, table);
    let (lo, hi) = g.range();
    ordinary_derivative(|v| g.eval_clamped(v), u, h, lo, hi)
}

/// Integral of `f` from `a` to `t`, negated when `t < a`.
fn signed_integral(f: &CurveFunction, table: &StaircaseTable, a: f64, t: f64, tol: f64) -> Result<f64> {
    if t >= a {
        Ok(falpha_integrate(f, table, a, t, tol)?.value)
    } else {
        Ok(-falpha_integrate(f, table, t, a, tol)?.value)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundtripPoint {
    pub t: f64,
    pub f: f64,
    /// `D_F^alpha` of `t -> int_{C(a, t)} f` at `t`.
    pub derivative_of_integral: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundtripReport {
    pub points: Vec<RoundtripPoint>,
    /// `max |D(int f) - f|` over the points.
    pub derivative_of_integral_max_abs: f64,
    /// `int_{C(a, b)} D_F^alpha f`.
    pub integral_of_derivative: f64,
    /// `f(b) - f(a)`.
    pub expected_difference: f64,
    pub integral_of_derivative_abs: f64,
    /// Largest `|f|` seen, used to turn both deviations into relative ones.
    pub scale: f64,
    pub max_relative: f64,
}

/// Checks both fundamental theorems for `f` on `[a, b]`:
///
/// 1. `t -> int_{C(a, t)} f` is differentiated at interior points and
///    compared with `f`;
/// 2. `int_{C(a, b)} D f` is compared with `f(b) - f(a)`.
///
/// `tol` is the gap tolerance of the integrals involved.
pub fn fundamental_roundtrip(
    f: &CurveFunction,
    table: &StaircaseTable,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<RoundtripReport> {
    const POINTS: usize = 16;
    let (a0, b0) = table.domain();
    Error::check_domain(a, a0, b0)?;
    Error::check_domain(b, a0, b0)?;
    if !(a < b) {
        return Err(Error::invalid(format!("roundtrip interval [{a}, {b}] is empty")));
    }
    let s_range = table.eval(b)? - table.eval(a)?;
    if s_range <= 0.0 {
        return Err(Error::invalid("the staircase is flat on the roundtrip interval"));
    }

    // (1) Derivative of the running integral. A wider step than the default
    // keeps the integration error small relative to the step.
    let shared = Arc::new(table.clone());
    let inner = f.clone();
    let tab = shared.clone();
    let running = CurveFunction::new(move |p| {
        signed_integral(&inner, &tab, a, p.t, tol).unwrap_or(f64::NAN)
    });
    let h_outer = 1e-3 * s_range;
    let mut points = Vec::with_capacity(POINTS);
    let mut max_abs: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for j in 0..POINTS {
        let t = a + (b - a) * (j as f64 + 0.5) / POINTS as f64;
        let fv = f.eval(table, t)?;
        let d = falpha_derivative(&running, table, t, h_outer)?.value;
        max_abs = max_abs.max((d - fv).abs());
        scale = scale.max(fv.abs());
        points.push(RoundtripPoint {
            t,
            f: fv,
            derivative_of_integral: d,
        });
    }

    // (2) Integral of the derivative.
    let inner = f.clone();
    let tab = shared;
    let h_inner = default_step(table);
    let derivative = CurveFunction::new(move |p| {
        falpha_derivative(&inner, &tab, p.t, h_inner)
            .map(|d| d.value)
            .unwrap_or(f64::NAN)
    });
    let integral_of_derivative = falpha_integrate(&derivative, table, a, b, tol)?.value;
    let fa = f.eval(table, a)?;
    let fb = f.eval(table, b)?;
    scale = scale.max(fa.abs()).max(fb.abs());
    let expected_difference = fb - fa;
    let second = (integral_of_derivative - expected_difference).abs();
    let denom = if scale > 0.0 { scale } else { 1.0 };

    Ok(RoundtripReport {
        points,
        derivative_of_integral_max_abs: max_abs,
        integral_of_derivative,
        expected_difference,
        integral_of_derivative_abs: second,
        scale,
        max_relative: max_abs.max(second) / denom,
    })
}

/// Iterated derivatives beyond this order are refused.
pub const MAX_TAYLOR_ORDER: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaylorResult {
    pub value: f64,
    pub u_center: f64,
    pub u_eval: f64,
    /// `(D_F^alpha)^n f` at the center, `n = 0..=order`.
    pub derivatives: Vec<f64>,
    /// `f(t_eval)`.
    pub target: f64,
    /// `value - target`.
    pub residual: f64,
}

/// `sum_{n <= order} (S(t_eval) - S(t_center))^n / n! (D_F^alpha)^n f(t_center)`.
///
/// The `n`-th derivative of the conjugate is taken from an `n + 4` point
/// finite-difference stencil with step `L eps^(1 / (n + 4))`, `L` the rise
/// range, which balances truncation against rounding. The stencil is
/// centered when it fits in the range and shifted to one side otherwise.
pub fn taylor_partial_sum(
    f: &CurveFunction,
    table: &StaircaseTable,
    t_center: f64,
    t_eval: f64,
    order: usize,
) -> Result<TaylorResult> {
    if order > MAX_TAYLOR_ORDER {
        return Err(Error::invalid(format!(
            "order {order} exceeds the supported maximum {MAX_TAYLOR_ORDER}"
        )));
    }
    let u0 = table.eval(t_center)?;
    let u1 = table.eval(t_eval)?;
    let g = phi(f, table);
    let (lo, hi) = g.range();
    let range = hi - lo;
    if range <= 0.0 {
        return Err(Error::invalid("the staircase is flat"));
    }

    let mut derivatives = vec![g.eval_clamped(u0)];
    for n in 1..=order {
        let nodes_count = n + 4;
        let mut h = range * f64::EPSILON.powf(1.0 / nodes_count as f64);
        let max_h = range / (nodes_count - 1) as f64;
        h = h.min(max_h);
        let shift = loop {
            let room_left = ((u0 - lo) / h).floor() as i64;
            let room_right = ((hi - u0) / h).floor() as i64;
            let last = nodes_count as i64 - 1;
            let centred = last / 2;
            let s = centred.min(room_left).max(last - room_right);
            if s >= 0 && s <= last && s <= room_left && last - s <= room_right {
                break s;
            }
            h *= 0.5;
        };
        let nodes: Vec<f64> = (0..nodes_count as i64)
            .map(|j| u0 + (j - shift) as f64 * h)
            .collect();
        let w = fd::weights(u0, &nodes, n);
        // The weights of a derivative sum to zero; differencing against the
        // center value keeps constants exact.
        let d: f64 = w[n]
            .iter()
            .zip(&nodes)
            .map(|(c, &x)| c * (g.eval_clamped(x) - derivatives[0]))
            .sum();
        derivatives.push(d);
    }

    let du = u1 - u0;
    let mut value = 0.0;
    let mut power = 1.0;
    for (n, d) in derivatives.iter().enumerate() {
        if n > 0 {
            power *= du / n as f64;
        }
        value += power * d;
    }
    if !value.is_finite() {
        return Err(Error::Numeric("Taylor partial sum is not finite".into()));
    }
    let target = f.eval(table, t_eval)?;
    Ok(TaylorResult {
        value,
        u_center: u0,
        u_eval: u1,
        derivatives,
        target,
        residual: value - target,
    })
}

/// `N_p(f) = (int_{C(a0, b0)} |f|^p d_F^alpha theta)^(1/p)`.
pub fn np_norm(f: &CurveFunction, table: &StaircaseTable, p: f64, tol: f64) -> Result<f64> {
    if !(p.is_finite() && p >= 1.0) {
        return Err(Error::invalid(format!("norm exponent {p} must be at least 1")));
    }
    let abs_p = f.map(move |v| v.abs().powf(p));
    let (a0, b0) = table.domain();
    let integral = falpha_integrate(&abs_p, table, a0, b0, tol)?.value;
    Ok(integral.max(0.0).powf(1.0 / p))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TabulationRow {
    pub t: f64,
    pub s: f64,
    pub f: f64,
    pub derivative: f64,
}

/// `f` and `D_F^alpha f` on a parameter grid.
pub fn tabulate(
    f: &CurveFunction,
    table: &StaircaseTable,
    grid: &[f64],
    h: f64,
) -> Result<Vec<TabulationRow>> {
    grid.iter()
        .map(|&t| {
            Ok(TabulationRow {
                t,
                s: table.eval(t)?,
                f: f.eval(table, t)?,
                derivative: falpha_derivative(f, table, t, h)?.value,
            })
        })
        .collect()
}

/// CSV with columns `t,S,f,D_f`.
pub fn write_tabulation_csv<W: std::io::Write>(rows: &[TabulationRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "S", "f", "D_f"])?;
    for r in rows {
        w.write_record([
            r.t.to_string(),
            r.s.to_string(),
            r.f.to_string(),
            r.derivative.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
