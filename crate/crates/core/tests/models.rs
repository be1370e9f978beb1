use std::sync::OnceLock;

use fractal_calculus::models::{
    distance_rise_fit, log_density_slope, log_spaced_grid, stretched_exponential_fit,
};
use fractal_calculus::{
    absorption_profile, staircase, verify_absorption_ode, AbsorptionModel, Curve, CurveSpec,
    OptimizerConfig, StaircaseTable,
};
use proptest::prelude::*;

fn koch_alpha() -> f64 {
    4f64.ln() / 3f64.ln()
}

fn koch_table() -> &'static StaircaseTable {
    static TABLE: OnceLock<StaircaseTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        let curve = Curve::new(CurveSpec::koch()).unwrap();
        let cfg = OptimizerConfig::new(koch_alpha(), 1.0 / 320.0)
            .with_seed(17)
            .with_restarts(1)
            .with_budget(300.0);
        staircase(&curve, koch_alpha(), 32, &cfg).unwrap()
    })
}

fn grid(n: usize) -> Vec<f64> {
    (0..n).map(|k| k as f64 / (n - 1) as f64).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn density_ratios_follow_the_rise(kappa in 0.0f64..5.0, rho0 in 0.1f64..10.0, t1 in 0.0f64..1.0, t2 in 0.0f64..1.0) {
        let (t1, t2) = (t1.min(t2), t1.max(t2));
        let table = koch_table();
        let model = AbsorptionModel::new(kappa, rho0, CurveSpec::koch()).unwrap();
        let prof = absorption_profile(&model, table, &[t1, t2]).unwrap();
        let want = (-kappa * (table.eval(t2).unwrap() - table.eval(t1).unwrap())).exp();
        prop_assert!((prof[1].rho / prof[0].rho - want).abs() <= 1e-12 * want.max(1.0));
        prop_assert!(prof[1].rho <= prof[0].rho);
    }
}

#[test]
fn koch_profile_solves_the_absorption_equation() {
    let table = koch_table();
    for kappa in [0.5, 1.0, 2.0] {
        let model = AbsorptionModel::new(kappa, 1.0, CurveSpec::koch()).unwrap();
        let g = grid(64);
        let check = verify_absorption_ode(&model, table, &g, 1e-3).unwrap();
        assert!(check.passed, "kappa {kappa}: {}", check.max_residual);
        let prof = absorption_profile(&model, table, &g).unwrap();
        assert_eq!(prof[0].rho, 1.0);
        assert!(prof.windows(2).all(|w| w[1].rho < w[0].rho));
        assert!((log_density_slope(&prof).unwrap() + kappa).abs() < 1e-9);
        let end = (-kappa * table.total()).exp();
        assert!((prof[63].rho - end).abs() < 1e-15);
    }
}

#[test]
fn distance_grows_as_a_power_of_the_rise() {
    let curve = Curve::new(CurveSpec::koch()).unwrap();
    let fit = distance_rise_fit(&curve, koch_table(), 1.0 / 32.0, 32).unwrap();
    let alpha = koch_alpha();
    assert!((fit.slope / alpha - 1.0).abs() <= 0.1, "slope {}", fit.slope);
}

#[test]
fn stretched_exponential_in_distance() {
    let model = AbsorptionModel::new(1.0, 1.0, CurveSpec::koch()).unwrap();
    let window = log_spaced_grid(0.0, 1.0, 1.0 / 32.0, 64).unwrap();
    let prof = absorption_profile(&model, koch_table(), &window).unwrap();
    let fit = stretched_exponential_fit(&prof, koch_alpha()).unwrap();
    assert!(fit.slope < 0.0);
    assert!(fit.instability <= 0.1, "{fit:?}");
}
