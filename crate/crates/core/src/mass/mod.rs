//! Chord sums, the coarse-grained mass and the staircase (rise) function.

mod invariance;
mod optimizer;
mod schedule;
mod staircase;

pub use invariance::{invariance_check, InvarianceReport, SimilarityTransform};
pub use optimizer::{
    optimize_subdivision, MassEstimate, MoveProbabilities, OptimizerConfig, TracePoint,
};
pub use schedule::{mass, MassLimit, MassScheduleReport, Trend};
pub use staircase::{staircase, StaircaseTable};

use serde::{Deserialize, Serialize};

use crate::curve::Curve;
use crate::error::{Error, Result};
use crate::special::mass_normalisation;

/// An ordered partition `a = t0 < t1 < ... < tn = b` with its mesh
/// `max (t_{i+1} - t_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SubdivisionRepr", into = "SubdivisionRepr")]
pub struct Subdivision {
    points: Vec<f64>,
    mesh: f64,
}

#[derive(Serialize, Deserialize)]
struct SubdivisionRepr {
    points: Vec<f64>,
    mesh: f64,
}

impl TryFrom<SubdivisionRepr> for Subdivision {
    type Error = Error;

    fn try_from(repr: SubdivisionRepr) -> Result<Self> {
        let sub = Subdivision::new(repr.points)?;
        if sub.mesh != repr.mesh {
            return Err(Error::invalid(format!(
                "stored mesh {} disagrees with recomputed mesh {}",
                repr.mesh, sub.mesh
            )));
        }
        Ok(sub)
    }
}

impl From<Subdivision> for SubdivisionRepr {
    fn from(s: Subdivision) -> Self {
        SubdivisionRepr {
            points: s.points,
            mesh: s.mesh,
        }
    }
}

impl Subdivision {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::invalid(format!(
                "a subdivision needs at least two points, got {}",
                points.len()
            )));
        }
        if points.iter().any(|t| !t.is_finite()) {
            return Err(Error::invalid("subdivision points must be finite"));
        }
        let mut mesh: f64 = 0.0;
        for (i, w) in points.windows(2).enumerate() {
            let gap = w[1] - w[0];
            if gap <= 0.0 {
                return Err(Error::invalid(format!(
                    "subdivision is not strictly increasing at index {i}"
                )));
            }
            mesh = mesh.max(gap);
        }
        Ok(Self { points, mesh })
    }

    /// `n` equal intervals of `[a, b]`, endpoints exact.
    pub fn uniform(a: f64, b: f64, n: usize) -> Result<Self> {
        if n == 0 || !(a < b) {
            return Err(Error::invalid(format!(
                "uniform subdivision needs a < b and n >= 1 (a = {a}, b = {b}, n = {n})"
            )));
        }
        let mut points: Vec<f64> = (0..=n)
            .map(|i| a + (b - a) * i as f64 / n as f64)
            .collect();
        points[n] = b;
        Self::new(points)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn mesh(&self) -> f64 {
        self.mesh
    }

    /// Number of intervals.
    pub fn intervals(&self) -> usize {
        self.points.len() - 1
    }

    pub fn start(&self) -> f64 {
        self.points[0]
    }

    pub fn end(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    pub fn into_points(self) -> Vec<f64> {
        self.points
    }
}

/// `|x|^alpha` for a chord with squared length `sq`.
#[inline]
pub(crate) fn chord_term(sq: f64, half_alpha: f64) -> f64 {
    if half_alpha == 0.5 {
        sq.sqrt()
    } else {
        sq.powf(half_alpha)
    }
}

#[inline]
pub(crate) fn squared_distance(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum()
}

pub(crate) fn check_alpha(curve: &Curve, alpha: f64) -> Result<()> {
    let m = curve.embedding_dim() as f64;
    if alpha.is_finite() && alpha >= 1.0 && alpha <= m.max(1.0) {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "alpha = {alpha} must lie in [1, {m}] for a curve in R^{m}"
        )))
    }
}

/// Raw chord sum `sum |w(t_{i+1}) - w(t_i)|^alpha` without the Gamma
/// normalisation.
pub(crate) fn raw_chord_sum(curve: &Curve, points: &[f64], alpha: f64) -> f64 {
    let d = curve.embedding_dim();
    let half_alpha = 0.5 * alpha;
    let mut prev = vec![0.0; d];
    let mut cur = vec![0.0; d];
    curve.eval_unchecked(points[0], &mut prev);
    let mut sum = 0.0;
    for &t in &points[1..] {
        curve.eval_unchecked(t, &mut cur);
        sum += chord_term(squared_distance(&prev, &cur), half_alpha);
        std::mem::swap(&mut prev, &mut cur);
    }
    sum
}

/// `sigma^alpha[F, P] = sum_i |w(t_{i+1}) - w(t_i)|^alpha / Gamma(alpha + 1)`.
pub fn sigma_alpha(curve: &Curve, subdivision: &Subdivision, alpha: f64) -> Result<f64> {
    check_alpha(curve, alpha)?;
    let (a0, b0) = curve.domain();
    Error::check_domain(subdivision.start(), a0, b0)?;
    Error::check_domain(subdivision.end(), a0, b0)?;
    let value = raw_chord_sum(curve, subdivision.points(), alpha) * mass_normalisation(alpha);
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Numeric(format!("chord sum is not finite ({value})")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::CurveSpec;
    use crate::special::gamma;
    use approx::assert_abs_diff_eq;

    fn koch_alpha() -> f64 {
        4f64.ln() / 3f64.ln()
    }

    #[test]
    fn subdivision_rejects_bad_input() {
        assert!(Subdivision::new(vec![]).is_err());
        assert!(Subdivision::new(vec![0.5]).is_err());
        assert!(Subdivision::new(vec![0.0, 0.5, 0.5, 1.0]).is_err());
        assert!(Subdivision::new(vec![0.0, 0.7, 0.5, 1.0]).is_err());
        assert!(Subdivision::new(vec![0.0, f64::NAN]).is_err());
    }

    #[test]
    fn mesh_is_recomputed_max_gap() {
        let s = Subdivision::new(vec![0.0, 0.1, 0.5, 0.6, 1.0]).unwrap();
        assert_abs_diff_eq!(s.mesh(), 0.4, epsilon = 1e-15);
        assert_eq!(s.intervals(), 4);
        let json = serde_json::to_string(&s).unwrap();
        let back: Subdivision = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
        let tampered = r#"{"points":[0.0,0.5,1.0],"mesh":0.25}"#;
        assert!(serde_json::from_str::<Subdivision>(tampered).is_err());
    }

    #[test]
    fn uniform_subdivision_has_exact_endpoints() {
        let s = Subdivision::uniform(0.2, 0.9, 7).unwrap();
        assert_eq!(s.start(), 0.2);
        assert_eq!(s.end(), 0.9);
        assert_abs_diff_eq!(s.mesh(), 0.1, epsilon = 1e-15);
    }

    #[test]
    fn line_sums_to_length_at_alpha_one() {
        let line = Curve::new(CurveSpec::unit_line()).unwrap();
        let p = Subdivision::new(vec![0.0, 0.013, 0.2, 0.5, 0.77, 1.0]).unwrap();
        assert_abs_diff_eq!(sigma_alpha(&line, &p, 1.0).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn koch_trivial_subdivision() {
        let koch = Curve::new(CurveSpec::koch()).unwrap();
        let a = koch_alpha();
        let p = Subdivision::new(vec![0.0, 1.0]).unwrap();
        assert_abs_diff_eq!(
            sigma_alpha(&koch, &p, a).unwrap(),
            1.0 / gamma(a + 1.0),
            epsilon = 1e-12
        );
    }

    #[test]
    fn koch_generator_chords() {
        // Parameters 1/4 and 3/4 are the base points of the bump, (1/3, 0)
        // and (2/3, 0); 1/2 is the apex. Chords from 0 to 1/4, 1/4 to 3/4
        // and 3/4 to 1 have lengths 1/3 each.
        let koch = Curve::new(CurveSpec::koch()).unwrap();
        let a = koch_alpha();
        let p = Subdivision::new(vec![0.0, 0.25, 0.75, 1.0]).unwrap();
        let want = 3.0 * (1.0f64 / 3.0).powf(a) / gamma(a + 1.0);
        assert_abs_diff_eq!(sigma_alpha(&koch, &p, a).unwrap(), want, epsilon = 1e-12);
        assert_abs_diff_eq!(want * gamma(a + 1.0), 0.75, epsilon = 1e-12);

        // The four generator pieces each contribute (1/3)^alpha = 1/4.
        let p = Subdivision::uniform(0.0, 1.0, 4).unwrap();
        assert_abs_diff_eq!(
            sigma_alpha(&koch, &p, a).unwrap() * gamma(a + 1.0),
            1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn sigma_is_additive_over_concatenation() {
        let koch = Curve::new(CurveSpec::koch()).unwrap();
        let a = 1.3;
        let left = Subdivision::new(vec![0.0, 0.1, 0.27, 0.4]).unwrap();
        let right = Subdivision::new(vec![0.4, 0.55, 0.9, 1.0]).unwrap();
        let whole = Subdivision::new(vec![0.0, 0.1, 0.27, 0.4, 0.55, 0.9, 1.0]).unwrap();
        let sum = sigma_alpha(&koch, &left, a).unwrap() + sigma_alpha(&koch, &right, a).unwrap();
        assert_abs_diff_eq!(sigma_alpha(&koch, &whole, a).unwrap(), sum, epsilon = 1e-14);
    }

    #[test]
    fn sigma_rejects_alpha_outside_range() {
        let koch = Curve::new(CurveSpec::koch()).unwrap();
        let p = Subdivision::uniform(0.0, 1.0, 4).unwrap();
        assert!(sigma_alpha(&koch, &p, 0.9).is_err());
        assert!(sigma_alpha(&koch, &p, 2.1).is_err());
    }
}
