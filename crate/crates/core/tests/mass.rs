use fractal_calculus::{
    gamma, invariance_check, mass, optimize_subdivision, sigma_alpha, staircase, Curve, CurveSpec,
    MassLimit, OptimizerConfig, SimilarityTransform, Subdivision, Trend,
};
use proptest::prelude::*;

fn koch_alpha() -> f64 {
    4f64.ln() / 3f64.ln()
}

fn koch() -> Curve {
    Curve::new(CurveSpec::koch()).unwrap()
}

/// Chord sum computed directly from the coordinates, without the library's
/// summation helpers.
fn oracle_sigma(curve: &Curve, points: &[f64], alpha: f64) -> f64 {
    let mut sum = 0.0;
    for w in points.windows(2) {
        let p = curve.evaluate(w[0]).unwrap();
        let q = curve.evaluate(w[1]).unwrap();
        let d = p.iter().zip(&q).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        sum += d.powf(alpha);
    }
    sum / gamma(alpha + 1.0)
}

fn sorted_points(mut raw: Vec<f64>) -> Vec<f64> {
    raw.push(0.0);
    raw.push(1.0);
    raw.sort_by(f64::total_cmp);
    raw.dedup();
    raw
}

#[test]
fn koch_mass_at_coarse_scale_is_in_band() {
    let alpha = koch_alpha();
    let cfg = OptimizerConfig::new(alpha, 0.05).with_seed(3);
    let est = optimize_subdivision(&koch(), 0.0, 1.0, &cfg).unwrap();
    let normalised = est.unnormalized_value();
    assert!((0.45..=0.51).contains(&normalised), "{normalised}");
    assert!(est.final_subdivision.mesh() <= 0.05);
}

#[test]
fn mass_is_additive_at_the_midpoint() {
    let alpha = koch_alpha();
    let c = koch();
    let cfg = OptimizerConfig::new(alpha, 0.02).with_seed(5);
    let whole = optimize_subdivision(&c, 0.0, 1.0, &cfg).unwrap().value;
    let left = optimize_subdivision(&c, 0.0, 0.5, &cfg).unwrap().value;
    let right = optimize_subdivision(&c, 0.5, 1.0, &cfg).unwrap().value;
    // Two optimizations carry twice the noise of one; 4% allows for it.
    assert!(((left + right) / whole - 1.0).abs() < 0.04, "{left} + {right} vs {whole}");
}

#[test]
fn reparametrisation_does_not_change_the_mass() {
    let alpha = koch_alpha();
    let cfg = OptimizerConfig::new(alpha, 0.05).with_seed(9);
    let plain = optimize_subdivision(&koch(), 0.0, 1.0, &cfg).unwrap().value;
    let squared = Curve::new(CurveSpec::koch().reparametrized(2.0)).unwrap();
    let re = optimize_subdivision(&squared, 0.0, 1.0, &cfg).unwrap().value;
    assert!((re / plain - 1.0).abs() < 0.03, "{re} vs {plain}");
}

#[test]
fn delta_refinement_cannot_lower_the_line_mass() {
    let line = Curve::new(CurveSpec::unit_line()).unwrap();
    let report = mass(
        &line,
        0.0,
        1.0,
        1.0,
        &[0.2, 0.1, 0.05],
        &OptimizerConfig::new(1.0, 0.1).with_restarts(1).with_budget(100.0),
    )
    .unwrap();
    assert!((report.limit.finite().unwrap() - 1.0).abs() < 1e-9);
    assert!(report.spread < 1e-9);
}

#[test]
fn below_the_dimension_the_schedule_diverges() {
    // At alpha = 1 the optimized sums of the Koch curve keep growing as the
    // mesh shrinks.
    let report = mass(
        &koch(),
        0.0,
        1.0,
        1.0,
        &[0.1, 0.05, 0.025, 0.0125],
        &OptimizerConfig::new(1.0, 0.1).with_seed(2).with_restarts(1).with_budget(500.0),
    )
    .unwrap();
    assert_eq!(report.trend, Trend::Diverging, "{:?}", report.values());
    assert_eq!(report.limit, MassLimit::Divergent);
    // Refining never lowers the value at alpha = 1 (a subdivision of a
    // coarser one has a larger chord sum).
    let v = report.values();
    for w in v.windows(2) {
        assert!(w[1].1 >= w[0].1);
    }
}

#[test]
fn at_the_dimension_two_scales_agree() {
    let alpha = koch_alpha();
    let c = koch();
    let coarse = optimize_subdivision(&c, 0.0, 1.0, &OptimizerConfig::new(alpha, 0.05).with_seed(1).with_restarts(1))
        .unwrap()
        .value;
    let fine = optimize_subdivision(&c, 0.0, 1.0, &OptimizerConfig::new(alpha, 0.0125).with_seed(1).with_restarts(1))
        .unwrap()
        .value;
    assert!((fine / coarse - 1.0).abs() < 0.05, "{fine} vs {coarse}");
}

#[test]
fn similarity_transforms() {
    let alpha = koch_alpha();
    let cfg = OptimizerConfig::new(alpha, 0.05).with_seed(4).with_restarts(1).with_budget(500.0);
    let spec = CurveSpec::koch();
    for t in [
        SimilarityTransform::Scale(2.0),
        SimilarityTransform::Translate(vec![5.0, -3.0]),
        SimilarityTransform::rotate_2d(std::f64::consts::PI / 7.0),
    ] {
        let r = invariance_check(&spec, &t, alpha, &cfg).unwrap();
        assert!(r.relative_error < 0.02, "{r:?}");
    }
}

#[test]
fn koch_staircase_shape() {
    let alpha = koch_alpha();
    let cfg = OptimizerConfig::new(alpha, 1.0 / 128.0).with_seed(8).with_restarts(1).with_budget(500.0);
    let table = staircase(&koch(), alpha, 32, &cfg).unwrap();
    assert_eq!(table.values[0], 0.0);
    assert!(table.is_strictly_increasing());
    let total = table.total();
    // Four generator copies carry equal mass.
    assert!((4.0 * table.eval(0.25).unwrap() / total - 1.0).abs() < 0.03);
    // Mirror symmetry about t = 1/2.
    assert!((table.inverse(total / 2.0).unwrap() - 0.5).abs() < 0.01);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn sigma_matches_direct_sum(
        raw in prop::collection::vec(0.0f64..1.0, 1..40),
        alpha in 1.0f64..2.0,
    ) {
        let pts = sorted_points(raw);
        let c = koch();
        let got = sigma_alpha(&c, &Subdivision::new(pts.clone()).unwrap(), alpha).unwrap();
        let want = oracle_sigma(&c, &pts, alpha);
        prop_assert!((got - want).abs() <= 1e-12 * want.max(1.0));
    }

    #[test]
    fn sigma_is_additive(
        left in prop::collection::vec(0.0f64..0.5, 0..20),
        right in prop::collection::vec(0.5f64..1.0, 0..20),
        alpha in 1.0f64..2.0,
    ) {
        let c = koch();
        let mut l = left.clone();
        l.extend([0.0, 0.5]);
        l.sort_by(f64::total_cmp);
        l.dedup();
        let mut r = right.clone();
        r.extend([0.5, 1.0]);
        r.sort_by(f64::total_cmp);
        r.dedup();
        let mut all = l.clone();
        all.extend_from_slice(&r[1..]);
        let sl = sigma_alpha(&c, &Subdivision::new(l).unwrap(), alpha).unwrap();
        let sr = sigma_alpha(&c, &Subdivision::new(r).unwrap(), alpha).unwrap();
        let sa = sigma_alpha(&c, &Subdivision::new(all).unwrap(), alpha).unwrap();
        prop_assert!((sa - sl - sr).abs() <= 1e-13 * sa.max(1.0));
    }

    #[test]
    fn mesh_matches_recomputed_gap(raw in prop::collection::vec(0.0f64..1.0, 1..40)) {
        let pts = sorted_points(raw);
        let s = Subdivision::new(pts.clone()).unwrap();
        let gap = pts.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
        prop_assert_eq!(s.mesh(), gap);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn optimizer_invariants(
        seed in any::<u64>(),
        delta in 0.03f64..0.2,
        alpha in 1.0f64..2.0,
        a in 0.0f64..0.3,
    ) {
        let c = koch();
        let cfg = OptimizerConfig::new(alpha, delta).with_seed(seed).with_restarts(2).with_budget(150.0);
        let b = 1.0;
        let est = optimize_subdivision(&c, a, b, &cfg).unwrap();
        // Recomputed from scratch with an independent summation.
        let direct = oracle_sigma(&c, est.final_subdivision.points(), alpha);
        prop_assert!((est.value - direct).abs() <= 1e-12 * direct.max(1.0));
        prop_assert!(est.final_subdivision.mesh() <= delta);
        prop_assert_eq!(est.final_subdivision.start(), a);
        prop_assert_eq!(est.final_subdivision.end(), b);
        for w in est.trace.windows(2) {
            prop_assert!(w[1].sigma <= w[0].sigma);
        }
        let again = optimize_subdivision(&c, a, b, &cfg).unwrap();
        prop_assert_eq!(serde_json::to_vec(&est).unwrap(), serde_json::to_vec(&again).unwrap());
    }

    #[test]
    fn line_mass_is_its_length(
        seed in any::<u64>(),
        delta in 0.01f64..0.5,
        a in 0.0f64..0.4,
        b in 0.6f64..1.0,
    ) {
        let line = Curve::new(CurveSpec::line_segment(vec![0.0, 0.0], vec![3.0, 4.0])).unwrap();
        let cfg = OptimizerConfig::new(1.0, delta).with_seed(seed).with_restarts(1).with_budget(50.0);
        let est = optimize_subdivision(&line, a, b, &cfg).unwrap();
        prop_assert!((est.value - 5.0 * (b - a)).abs() < 1e-9);
    }
}
