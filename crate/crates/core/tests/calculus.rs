use std::sync::{Arc, OnceLock};

use fractal_calculus::calculus::{phi, CurveFunction};
use fractal_calculus::{
    falpha_derivative, falpha_integrate, fundamental_roundtrip, np_norm, staircase,
    taylor_partial_sum, Curve, CurveSpec, OptimizerConfig, StaircaseTable,
};
use proptest::prelude::*;

/// A coarse Koch staircase. Every identity checked here holds relative to
/// whatever table is used, so a cheap one suffices.
fn koch_table() -> &'static StaircaseTable {
    static TABLE: OnceLock<StaircaseTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        let alpha = 4f64.ln() / 3f64.ln();
        let curve = Curve::new(CurveSpec::koch()).unwrap();
        let cfg = OptimizerConfig::new(alpha, 1.0 / 128.0)
            .with_seed(21)
            .with_restarts(1)
            .with_budget(300.0);
        staircase(&curve, alpha, 32, &cfg).unwrap()
    })
}

/// Adaptive Simpson quadrature, written independently of the library.
fn simpson(g: &dyn Fn(f64) -> f64, a: f64, b: f64, eps: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn step(g: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, eps: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (g(lm), g(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let diff = left + right - whole;
        if depth == 0 || diff.abs() <= 15.0 * eps {
            left + right + diff / 15.0
        } else {
            step(g, a, m, fa, flm, fm, left, 0.5 * eps, depth - 1)
                + step(g, m, b, fm, frm, fb, right, 0.5 * eps, depth - 1)
        }
    }
    let (fa, fb, fm) = (g(a), g(b), g(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(g, a, b, fa, fm, fb, whole, eps, 24)
}

/// Simpson over the table's pieces, so kinks of phi[f] at table nodes do not
/// fall inside a panel.
fn oracle_integral(table: &StaircaseTable, g: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let (sa, sb) = (table.eval(a).unwrap(), table.eval(b).unwrap());
    let mut breaks = vec![sa];
    breaks.extend(table.values.iter().copied().filter(|&s| s > sa && s < sb));
    breaks.push(sb);
    breaks.windows(2).map(|w| simpson(g, w[0], w[1], 1e-12)).sum()
}

#[derive(Debug, Clone)]
struct Smooth {
    coeffs: Vec<(f64, f64, f64)>,
    poly: [f64; 3],
}

impl Smooth {
    fn at(&self, u: f64) -> f64 {
        self.poly[0]
            + self.poly[1] * u
            + self.poly[2] * u * u
            + self.coeffs.iter().map(|(c, k, p)| c * (k * u + p).sin()).sum::<f64>()
    }
}

fn smooth_strategy() -> impl Strategy<Value = Smooth> {
    (
        prop::collection::vec((-2.0f64..2.0, 0.5f64..8.0, -3.0f64..3.0), 1..4),
        [-2.0f64..2.0, -2.0f64..2.0, -2.0f64..2.0],
    )
        .prop_map(|(coeffs, poly)| Smooth { coeffs, poly })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]

    /// Integral on the curve versus ordinary quadrature of the conjugate.
    #[test]
    fn conjugacy_of_integral(h in smooth_strategy(), a in 0.0f64..0.4, b in 0.6f64..1.0) {
        let table = koch_table();
        let hh = h.clone();
        let f = CurveFunction::of_rise(move |s| hh.at(s));
        let scale = 1.0 + h.coeffs.iter().map(|c| c.0.abs()).sum::<f64>() + h.poly.iter().map(|c| c.abs()).sum::<f64>();
        let got = falpha_integrate(&f, table, a, b, 1e-5 * scale).unwrap();
        let want = oracle_integral(table, &|u| h.at(u), a, b);
        prop_assert!(got.lower_sum <= got.value && got.value <= got.upper_sum);
        prop_assert!((got.value - want).abs() <= 1e-4 * want.abs().max(1e-2 * scale), "{} vs {}", got.value, want);
    }

    /// Functions of the parameter are only piecewise smooth in the rise
    /// variable; the oracle integrates the conjugate piece by piece.
    #[test]
    fn conjugacy_for_functions_of_the_parameter(c in -3.0f64..3.0, k in 1.0f64..6.0) {
        let table = koch_table();
        let f = CurveFunction::of_param(move |t| c * (k * t).cos() + t * t);
        let got = falpha_integrate(&f, table, 0.0, 1.0, 1e-5).unwrap().value;
        let g = phi(&f, table);
        let want = oracle_integral(table, &|u| g.eval(u).unwrap(), 0.0, 1.0);
        prop_assert!((got - want).abs() <= 1e-4 * want.abs().max(1e-2), "{got} vs {want}");
    }

    #[test]
    fn linearity(h1 in smooth_strategy(), h2 in smooth_strategy(), p in -3.0f64..3.0, q in -3.0f64..3.0) {
        let table = koch_table();
        let f = CurveFunction::of_rise(move |s| h1.at(s));
        let g = CurveFunction::of_rise(move |s| h2.at(s));
        let combo = CurveFunction::linear_combination(p, &f, q, &g);
        let tol = 1e-4;
        let i_f = falpha_integrate(&f, table, 0.0, 1.0, tol).unwrap().value;
        let i_g = falpha_integrate(&g, table, 0.0, 1.0, tol).unwrap().value;
        let i_c = falpha_integrate(&combo, table, 0.0, 1.0, tol).unwrap().value;
        let bound = 2.0 * tol * (1.0 + p.abs() + q.abs());
        prop_assert!((i_c - p * i_f - q * i_g).abs() <= bound);
    }

    #[test]
    fn monotonicity(h in smooth_strategy(), bump in 0.0f64..1.0) {
        let table = koch_table();
        let hh = h.clone();
        let f = CurveFunction::of_rise(move |s| hh.at(s));
        let g = CurveFunction::of_rise(move |s| h.at(s) + bump * s * s);
        let tol = 1e-5;
        let i_f = falpha_integrate(&f, table, 0.0, 1.0, tol).unwrap().value;
        let i_g = falpha_integrate(&g, table, 0.0, 1.0, tol).unwrap().value;
        prop_assert!(i_f <= i_g + 2.0 * tol);
    }

    #[test]
    fn derivative_matches_conjugate_derivative(h in smooth_strategy(), t in 0.05f64..0.95) {
        let table = koch_table();
        let hh = h.clone();
        let f = CurveFunction::of_rise(move |s| hh.at(s));
        let step = 1e-3 * table.total();
        let d = falpha_derivative(&f, table, t, step).unwrap();
        // Analytic derivative of the conjugate.
        let u = table.eval(t).unwrap();
        let exact = h.poly[1] + 2.0 * h.poly[2] * u
            + h.coeffs.iter().map(|(c, k, p)| c * k * (k * u + p).cos()).sum::<f64>();
        prop_assert!((d.value - exact).abs() <= 1e-6 * (1.0 + exact.abs()) * 64.0, "{} vs {exact}", d.value);
    }

    #[test]
    fn norm_is_homogeneous_and_subadditive(h1 in smooth_strategy(), h2 in smooth_strategy(), p in 1.0f64..3.0) {
        let table = koch_table();
        let f = CurveFunction::of_rise(move |s| h1.at(s));
        let g = CurveFunction::of_rise(move |s| h2.at(s));
        // |f|^p can be steep; a loose gap keeps the refinement short, and
        // the slack below covers it.
        let tol = 1e-3;
        let nf = np_norm(&f, table, p, tol).unwrap();
        let ng = np_norm(&g, table, p, tol).unwrap();
        let nsum = np_norm(&CurveFunction::linear_combination(1.0, &f, 1.0, &g), table, p, tol).unwrap();
        let nscaled = np_norm(&f.map(|v| -3.0 * v), table, p, tol).unwrap();
        prop_assert!((nscaled - 3.0 * nf).abs() <= 1e-2 * (1.0 + nf));
        prop_assert!(nsum <= nf + ng + 1e-2 * (1.0 + nf + ng));
    }
}

#[test]
fn rise_function_examples() {
    let table = koch_table();
    let s1 = table.total();
    let one = falpha_integrate(&CurveFunction::constant(1.0), table, 0.0, 1.0, 1e-9).unwrap();
    assert!((one.value - s1).abs() < 1e-12);
    let j = falpha_integrate(&CurveFunction::of_rise(|s| s), table, 0.0, 1.0, 1e-6).unwrap();
    assert!((j.value - s1 * s1 / 2.0).abs() < 1e-8);
    let n2 = np_norm(&CurveFunction::of_rise(|s| s), table, 2.0, 1e-7).unwrap();
    assert!((n2 - (s1.powi(3) / 3.0).sqrt()).abs() < 1e-6);
}

#[test]
fn derivative_of_square_rise() {
    let table = koch_table();
    let f = CurveFunction::of_rise(|s| s * s);
    let h = 1e-4 * table.total();
    for &t in &[0.1, 0.35, 0.5, 0.8] {
        let d = falpha_derivative(&f, table, t, h).unwrap();
        assert!((d.value - 2.0 * table.eval(t).unwrap()).abs() < 1e-9);
    }
}

#[test]
fn fundamental_theorems_on_koch() {
    let table = koch_table();
    for f in [
        CurveFunction::constant(1.0),
        CurveFunction::of_rise(|s| s),
        CurveFunction::of_rise(f64::sin),
    ] {
        let r = fundamental_roundtrip(&f, table, 0.0, 1.0, 1e-5).unwrap();
        assert!(r.max_relative <= 1e-3, "{r:?}");
    }
}

#[test]
fn taylor_in_the_rise_variable() {
    let table = koch_table();
    let f = CurveFunction::of_rise(f64::exp);
    let t_eval = table.inverse(0.3).unwrap();
    let r = taylor_partial_sum(&f, table, 0.0, t_eval, 5).unwrap();
    assert!((r.u_eval - 0.3).abs() < 1e-12);
    let bound = 0.3f64.powi(6) / 720.0 * 0.3f64.exp();
    assert!(r.residual.abs() <= bound + 1e-7, "{r:?}");
}

#[test]
fn coordinate_functions_integrate_against_the_conjugate() {
    let table = koch_table();
    let curve = Arc::new(Curve::new(CurveSpec::koch()).unwrap());
    let f = CurveFunction::on_curve(curve, |p| p.w[0] * p.w[0] + p.w[1]);
    let got = falpha_integrate(&f, table, 0.0, 1.0, 1e-4).unwrap();
    // The integrand is rough in the rise variable, so only the sums bracket
    // a coarse oracle.
    let g = phi(&f, table);
    let (lo, hi) = g.range();
    let n = 200_000;
    let du = (hi - lo) / n as f64;
    let want: f64 = (0..n).map(|i| g.eval(lo + (i as f64 + 0.5) * du).unwrap() * du).sum();
    assert!(got.lower_sum - 1e-6 <= want && want <= got.upper_sum + 1e-6, "{got:?} vs {want}");
}
