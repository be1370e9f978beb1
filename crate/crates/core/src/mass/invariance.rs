//! Behaviour of the mass under similarity transforms of the curve.

use serde::{Deserialize, Serialize};

use super::optimizer::{optimize_subdivision, OptimizerConfig};
use crate::curve::{Curve, CurveSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum SimilarityTransform {
    Translate(Vec<f64>),
    Scale(f64),
    /// Orthogonal matrix, row-major.
    Rotate(Vec<Vec<f64>>),
}

impl SimilarityTransform {
    pub fn rotate_2d(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        SimilarityTransform::Rotate(vec![vec![c, -s], vec![s, c]])
    }

    pub fn apply(&self, spec: &CurveSpec) -> CurveSpec {
        match self {
            SimilarityTransform::Translate(v) => spec.clone().translated(v.clone()),
            SimilarityTransform::Scale(l) => spec.clone().scaled(*l),
            SimilarityTransform::Rotate(m) => spec.clone().rotated_by(m.clone()),
        }
    }

    /// `lambda^alpha` for a scaling, 1 otherwise.
    pub fn expected_ratio(&self, alpha: f64) -> f64 {
        match self {
            SimilarityTransform::Scale(l) => l.abs().powf(alpha),
            _ => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub transform: SimilarityTransform,
    pub alpha: f64,
    pub before: f64,
    pub after: f64,
    pub ratio: f64,
    pub expected_ratio: f64,
    /// `|ratio / expected_ratio - 1|`.
    pub relative_error: f64,
}

/// Mass of the whole curve before and after `transform`, computed with the
/// same seed so that both runs see the same random draws.
pub fn invariance_check(
    spec: &CurveSpec,
    transform: &SimilarityTransform,
    alpha: f64,
    cfg: &OptimizerConfig,
) -> Result<InvarianceReport> {
    let cfg = cfg.clone().with_alpha(alpha);
    let original = Curve::new(spec.clone())?;
    let moved = Curve::new(transform.apply(spec))?;
    let (a0, b0) = original.domain();
    let before = optimize_subdivision(&original, a0, b0, &cfg)?.value;
    let after = optimize_subdivision(&moved, a0, b0, &cfg)?.value;
    if before == 0.0 {
        return Err(Error::Numeric("mass of the untransformed curve is zero".into()));
    }
    let ratio = after / before;
    let expected_ratio = transform.expected_ratio(alpha);
    Ok(InvarianceReport {
        transform: transform.clone(),
        alpha,
        before,
        after,
        ratio,
        expected_ratio,
        relative_error: (ratio / expected_ratio - 1.0).abs(),
    })
}
