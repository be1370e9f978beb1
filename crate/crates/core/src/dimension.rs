//! Gamma-dimension: the critical `alpha` where the mass jumps from infinity
//! to zero, located by a two-scale ratio test and bisection.
//!
//! For `alpha` below the dimension the optimized chord sum grows as the mesh
//! shrinks, so `R(alpha) = sigma(delta1) / sigma(delta2) > 1` with
//! `delta1 < delta2`; above it the sum shrinks and `R < 1`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::Curve;
use crate::error::{Error, Result};
use crate::mass::{check_alpha, optimize_subdivision, OptimizerConfig};
use crate::rng::derive_seed;

/// `|R - 1|` at or below this counts as `R = 1` at a bracket end.
pub const UNIT_RATIO_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionConfig {
    /// Fine scale.
    pub delta1: f64,
    /// Coarse scale.
    pub delta2: f64,
    /// Optimizer runs averaged per scale for every `R` evaluation.
    pub repeats: usize,
    pub max_iterations: usize,
    /// Settings for each optimizer run; `alpha` and `delta` are overridden.
    pub optimizer: OptimizerConfig,
}

impl Default for DimensionConfig {
    fn default() -> Self {
        Self {
            delta1: 0.0125,
            delta2: 0.05,
            repeats: 3,
            max_iterations: 12,
            optimizer: OptimizerConfig::new(1.0, 0.05).with_restarts(1),
        }
    }
}

impl DimensionConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.optimizer.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta1 > 0.0 && self.delta1 < self.delta2 && self.delta2.is_finite()) {
            return Err(Error::invalid(format!(
                "scales must satisfy 0 < delta1 < delta2 (got {}, {})",
                self.delta1, self.delta2
            )));
        }
        if self.repeats == 0 {
            return Err(Error::invalid("repeats must be at least 1"));
        }
        if self.max_iterations == 0 {
            return Err(Error::invalid("max_iterations must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioSample {
    pub alpha: f64,
    pub r: f64,
    /// Mean optimized sum at `delta1`.
    pub sigma_fine: f64,
    /// Mean optimized sum at `delta2`.
    pub sigma_coarse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionEstimate {
    pub alpha0: f64,
    /// Bracket after each step, starting with `[1, m]`.
    pub bracket_history: Vec<[f64; 2]>,
    /// Every `R` evaluation, in the order performed.
    pub ratios: Vec<RatioSample>,
    pub delta_pair: [f64; 2],
    /// Whether the final bracket is no wider than the tolerance.
    pub converged: bool,
}

impl DimensionEstimate {
    /// CSV with columns `alpha,R`.
    pub fn write_ratios_csv<W: std::io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["alpha", "R"])?;
        for s in &self.ratios {
            w.write_record([s.alpha.to_string(), s.r.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `log(m_copies) / log(n_scale)`: the dimension of a curve made of
/// `m_copies` copies of itself scaled by `1 / n_scale`.
pub fn self_similar_dimension(m_copies: u64, n_scale: u64) -> Result<f64> {
    if m_copies < 2 || n_scale < 2 {
        return Err(Error::invalid(format!(
            "copies ({m_copies}) and scale factor ({n_scale}) must both be at least 2"
        )));
    }
    Ok((m_copies as f64).ln() / (n_scale as f64).ln())
}

/// `R(alpha)` from one optimizer run per scale. The two runs use distinct
/// child seeds of `cfg.seed`.
pub fn ratio_r(
    curve: &Curve,
    alpha: f64,
    delta1: f64,
    delta2: f64,
    cfg: &OptimizerConfig,
) -> Result<f64> {
    let dcfg = DimensionConfig {
        delta1,
        delta2,
        repeats: 1,
        max_iterations: 1,
        optimizer: cfg.clone(),
    };
    Ok(ratio_sample(curve, alpha, &dcfg)?.r)
}

/// `R(alpha)` with `cfg.repeats` runs averaged per scale.
///
/// Seeds depend on the scale and repeat index but not on `alpha`, so every
/// evaluation during a bisection sees the same random streams.
pub fn ratio_sample(curve: &Curve, alpha: f64, cfg: &DimensionConfig) -> Result<RatioSample> {
    cfg.validate()?;
    check_alpha(curve, alpha)?;
    let (a0, b0) = curve.domain();
    let jobs: Vec<(usize, f64)> = (0..cfg.repeats)
        .flat_map(|r| [(r, cfg.delta1), (r, cfg.delta2)])
        .collect();
    let values: Vec<Result<f64>> = jobs
        .par_iter()
        .enumerate()
        .map(|(j, &(_, delta))| {
            let run = cfg
                .optimizer
                .clone()
                .with_alpha(alpha)
                .with_delta(delta)
                .with_seed(derive_seed(cfg.optimizer.seed, j as u64));
            optimize_subdivision(curve, a0, b0, &run).map(|e| e.value)
        })
        .collect();
    let mut fine = 0.0;
    let mut coarse = 0.0;
    for (j, v) in values.into_iter().enumerate() {
        if j % 2 == 0 {
            fine += v?;
        } else {
            coarse += v?;
        }
    }
    let k = cfg.repeats as f64;
    let (fine, coarse) = (fine / k, coarse / k);
    if coarse == 0.0 {
        return Err(Error::Numeric(format!(
            "coarse-scale sum vanished at alpha = {alpha}"
        )));
    }
    Ok(RatioSample {
        alpha,
        r: fine / coarse,
        sigma_fine: fine,
        sigma_coarse: coarse,
    })
}

/// Bisection for the root of `R(alpha) - 1` on `[1, m]`.
///
/// If `R` equals 1 (within [`UNIT_RATIO_TOLERANCE`]) at a bracket end, that
/// end is returned. Otherwise the signs at the two ends must differ, and the
/// bracket is halved until it is no wider than `tol` or the iteration budget
/// runs out.
pub fn estimate_dimension(curve: &Curve, tol: f64, cfg: &DimensionConfig) -> Result<DimensionEstimate> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::invalid(format!("tolerance {tol} must be positive")));
    }
    cfg.validate()?;
    let m = curve.embedding_dim() as f64;
    let (mut lo, mut hi) = (1.0, m.max(1.0));
    let mut ratios = Vec::new();
    let mut history = vec![[lo, hi]];
    let done = |alpha0: f64, history: Vec<[f64; 2]>, ratios: Vec<RatioSample>, converged: bool| {
        DimensionEstimate {
            alpha0,
            bracket_history: history,
            ratios,
            delta_pair: [cfg.delta1, cfg.delta2],
            converged,
        }
    };

    let r_lo = ratio_sample(curve, lo, cfg)?;
    ratios.push(r_lo);
    if (r_lo.r - 1.0).abs() <= UNIT_RATIO_TOLERANCE || hi == lo {
        return Ok(done(lo, history, ratios, true));
    }
    let r_hi = ratio_sample(curve, hi, cfg)?;
    ratios.push(r_hi);
    if (r_hi.r - 1.0).abs() <= UNIT_RATIO_TOLERANCE {
        return Ok(done(hi, history, ratios, true));
    }
    if (r_lo.r > 1.0) == (r_hi.r > 1.0) {
        return Err(Error::Bracketing {
            low: lo,
            high: hi,
            r_low: r_lo.r,
            r_high: r_hi.r,
        });
    }
    // R decreases through 1 at the root; orient the search accordingly.
    let rising = r_lo.r < 1.0;

    let mut iterations = 0;
    while hi - lo > tol && iterations < cfg.max_iterations {
        let mid = 0.5 * (lo + hi);
        let s = ratio_sample(curve, mid, cfg)?;
        ratios.push(s);
        if (s.r > 1.0) != rising {
            lo = mid;
        } else {
            hi = mid;
        }
        history.push([lo, hi]);
        iterations += 1;
    }
    let converged = hi - lo <= tol;
    Ok(done(0.5 * (lo + hi), history, ratios, converged))
}
