//! The mass function as the small-`delta` limit of the coarse-grained mass.

use serde::{Deserialize, Serialize};

use super::optimizer::{optimize_subdivision, MassEstimate, OptimizerConfig};
use crate::curve::Curve;
use crate::error::{Error, Result};
use crate::rng::derive_seed;

/// Minimum geometric-mean growth per halving of `delta` for a schedule to be
/// declared divergent.
pub const DIVERGENCE_GROWTH_PER_HALVING: f64 = 1.10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum MassLimit {
    Finite(f64),
    /// Values grow without bound as `delta` shrinks; `alpha` is below the
    /// curve's dimension.
    Divergent,
}

impl MassLimit {
    pub fn finite(&self) -> Option<f64> {
        match self {
            MassLimit::Finite(v) => Some(*v),
            MassLimit::Divergent => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trend {
    /// No systematic growth or decay across the schedule.
    Converging,
    /// Every refinement increases the value at a geometric rate.
    Diverging,
    /// Every refinement decreases the value at a geometric rate.
    Vanishing,
    /// Fewer than three scales; no trend is inferred.
    Undetermined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassScheduleReport {
    pub alpha: f64,
    pub interval: [f64; 2],
    pub limit: MassLimit,
    pub trend: Trend,
    /// Geometric-mean factor by which the value changes per halving of
    /// `delta`, first to last scale.
    pub growth_per_halving: Option<f64>,
    /// `max - min` of the per-scale values.
    pub spread: f64,
    pub estimates: Vec<MassEstimate>,
}

impl MassScheduleReport {
    pub fn values(&self) -> Vec<(f64, f64)> {
        self.estimates.iter().map(|e| (e.delta, e.value)).collect()
    }
}

/// Runs the optimizer at every `delta` of a strictly decreasing schedule and
/// reports the value at the finest scale, or [`MassLimit::Divergent`] when
/// the values grow geometrically across at least three scales.
///
/// Each scale gets its own child seed, so adding a scale does not change
/// the others.
pub fn mass(
    curve: &Curve,
    a: f64,
    b: f64,
    alpha: f64,
    delta_schedule: &[f64],
    cfg: &OptimizerConfig,
) -> Result<MassScheduleReport> {
    if delta_schedule.is_empty() {
        return Err(Error::invalid("delta schedule is empty"));
    }
    if delta_schedule.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
        return Err(Error::invalid("delta schedule entries must be positive"));
    }
    if delta_schedule.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::invalid("delta schedule must be strictly decreasing"));
    }

    let mut estimates = Vec::with_capacity(delta_schedule.len());
    for (i, &delta) in delta_schedule.iter().enumerate() {
        let run_cfg = cfg
            .clone()
            .with_alpha(alpha)
            .with_delta(delta)
            .with_seed(derive_seed(cfg.seed, i as u64));
        estimates.push(optimize_subdivision(curve, a, b, &run_cfg)?);
    }

    let values: Vec<f64> = estimates.iter().map(|e| e.value).collect();
    let (trend, growth) = classify(delta_schedule, &values);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let limit = match trend {
        Trend::Diverging => MassLimit::Divergent,
        _ => MassLimit::Finite(*values.last().expect("non-empty schedule")),
    };

    Ok(MassScheduleReport {
        alpha,
        interval: [a, b],
        limit,
        trend,
        growth_per_halving: growth,
        spread: max - min,
        estimates,
    })
}

fn classify(deltas: &[f64], values: &[f64]) -> (Trend, Option<f64>) {
    let n = values.len();
    if n < 2 {
        return (Trend::Undetermined, None);
    }
    let halvings = (deltas[0] / deltas[n - 1]).log2();
    let growth = if values[0] > 0.0 && values[n - 1] > 0.0 {
        Some((values[n - 1] / values[0]).powf(1.0 / halvings))
    } else {
        None
    };
    if n < 3 {
        return (Trend::Undetermined, growth);
    }
    let rising = values.windows(2).all(|w| w[1] > w[0]);
    let falling = values.windows(2).all(|w| w[1] < w[0]);
    let trend = match growth {
        Some(g) if rising && g >= DIVERGENCE_GROWTH_PER_HALVING => Trend::Diverging,
        Some(g) if falling && g <= 1.0 / DIVERGENCE_GROWTH_PER_HALVING => Trend::Vanishing,
        _ => Trend::Converging,
    };
    (trend, growth)
}
