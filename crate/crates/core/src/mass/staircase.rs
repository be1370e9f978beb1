//! The staircase (rise) function `S(t) = gamma^alpha(F, p0, t)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::optimizer::{optimize_subdivision, OptimizerConfig};
use crate::curve::Curve;
use crate::error::{Error, Result};
use crate::rng::derive_seed;

/// Sampled staircase function, interpolated piecewise linearly.
///
/// `values[k]` is the signed mass from `origin` to `sample_params[k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaircaseTable {
    pub alpha: f64,
    pub origin: f64,
    pub sample_params: Vec<f64>,
    pub values: Vec<f64>,
    /// Mesh bound used for the segment optimizations, if computed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl StaircaseTable {
    /// Builds a table from precomputed samples. The origin is the first
    /// sample parameter; `values` are shifted so that `S(origin) = 0`.
    pub fn from_samples(alpha: f64, sample_params: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if sample_params.len() < 2 || sample_params.len() != values.len() {
            return Err(Error::invalid(format!(
                "staircase needs at least two samples and matching lengths ({} params, {} values)",
                sample_params.len(),
                values.len()
            )));
        }
        if sample_params.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(Error::invalid("staircase samples must be finite"));
        }
        if sample_params.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("staircase parameters must be strictly increasing"));
        }
        if values.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::invalid("staircase values must be non-decreasing"));
        }
        let base = values[0];
        Ok(Self {
            alpha,
            origin: sample_params[0],
            sample_params,
            values: values.into_iter().map(|v| v - base).collect(),
            delta: None,
            seed: None,
        })
    }

    /// Same function measured from another origin `p0`.
    pub fn rebased(&self, p0: f64) -> Result<Self> {
        let shift = self.eval(p0)?;
        let mut out = self.clone();
        out.origin = p0;
        out.values.iter_mut().for_each(|v| *v -= shift);
        Ok(out)
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.sample_params[0], *self.sample_params.last().expect("non-empty"))
    }

    /// `(S(a0), S(b0))`.
    pub fn range(&self) -> (f64, f64) {
        (self.values[0], *self.values.last().expect("non-empty"))
    }

    /// `S(b0) - S(a0)`, the mass of the whole curve.
    pub fn total(&self) -> f64 {
        let (lo, hi) = self.range();
        hi - lo
    }

    pub fn is_strictly_increasing(&self) -> bool {
        self.values.windows(2).all(|w| w[1] > w[0])
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        let (a, b) = self.domain();
        Error::check_domain(t, a, b)?;
        Ok(self.eval_clamped(t))
    }

    pub(crate) fn eval_clamped(&self, t: f64) -> f64 {
        let p = &self.sample_params;
        let n = p.len();
        if t <= p[0] {
            return self.values[0];
        }
        if t >= p[n - 1] {
            return self.values[n - 1];
        }
        let j = p.partition_point(|&x| x <= t).clamp(1, n - 1);
        let (t0, t1) = (p[j - 1], p[j]);
        let (s0, s1) = (self.values[j - 1], self.values[j]);
        s0 + (s1 - s0) * (t - t0) / (t1 - t0)
    }

    /// Parameter `t` with `S(t) = s`. On a flat stretch the leftmost such
    /// parameter is returned.
    pub fn inverse(&self, s: f64) -> Result<f64> {
        let (lo, hi) = self.range();
        Error::check_domain(s, lo, hi)?;
        Ok(self.inverse_clamped(s))
    }

    pub(crate) fn inverse_clamped(&self, s: f64) -> f64 {
        let v = &self.values;
        let p = &self.sample_params;
        let n = v.len();
        if s <= v[0] {
            return p[0];
        }
        if s >= v[n - 1] {
            // Leftmost parameter reaching the top value.
            let j = v.partition_point(|&x| x < v[n - 1]);
            return p[j];
        }
        let j = v.partition_point(|&x| x < s);
        if v[j] == s {
            return p[j];
        }
        let (s0, s1) = (v[j - 1], v[j]);
        let (t0, t1) = (p[j - 1], p[j]);
        t0 + (t1 - t0) * (s - s0) / (s1 - s0)
    }

    /// CSV with columns `t,S`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "S"])?;
        for (t, s) in self.sample_params.iter().zip(&self.values) {
            w.write_record([t.to_string(), s.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Computes `S(u_k)` on the uniform grid `u_k = a0 + k (b0 - a0) / grid_size`
/// with origin `a0`.
///
/// Each segment `[u_k, u_{k+1}]` is optimized separately, with seed derived
/// from `cfg.seed` and `k`, and the segment masses are summed, so the table
/// is non-decreasing by construction. `cfg.delta` must be smaller than the
/// segment width.
pub fn staircase(
    curve: &Curve,
    alpha: f64,
    grid_size: usize,
    cfg: &OptimizerConfig,
) -> Result<StaircaseTable> {
    if grid_size < 2 {
        return Err(Error::invalid(format!("grid size {grid_size} must be at least 2")));
    }
    let (a0, b0) = curve.domain();
    let width = (b0 - a0) / grid_size as f64;
    if cfg.delta >= width {
        return Err(Error::invalid(format!(
            "delta = {} must be smaller than the segment width {width}",
            cfg.delta
        )));
    }
    let mut params: Vec<f64> = (0..=grid_size)
        .map(|k| a0 + (b0 - a0) * k as f64 / grid_size as f64)
        .collect();
    params[grid_size] = b0;

    let base = cfg.clone().with_alpha(alpha);
    base.validate()?;
    let segments: Vec<Result<f64>> = (0..grid_size)
        .into_par_iter()
        .map(|k| {
            let (s, e) = (params[k], params[k + 1]);
            let seg_cfg = base.clone().with_seed(derive_seed(cfg.seed, k as u64));
            optimize_subdivision(curve, s, e, &seg_cfg)
                .map(|est| est.value)
                .map_err(|err| Error::Segment {
                    index: k,
                    start: s,
                    end: e,
                    reason: err.to_string(),
                })
        })
        .collect();

    let mut values = Vec::with_capacity(grid_size + 1);
    values.push(0.0);
    let mut acc = 0.0;
    for (k, seg) in segments.into_iter().enumerate() {
        let v = seg?;
        if !v.is_finite() || v < 0.0 {
            return Err(Error::Segment {
                index: k,
                start: params[k],
                end: params[k + 1],
                reason: format!("segment mass {v} is not a finite non-negative number"),
            });
        }
        acc += v;
        values.push(acc);
    }

    Ok(StaircaseTable {
        alpha,
        origin: a0,
        sample_params: params,
        values,
        delta: Some(cfg.delta),
        seed: Some(cfg.seed),
    })
}
