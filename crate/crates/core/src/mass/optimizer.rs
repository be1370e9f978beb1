//! Monte Carlo search for the coarse-grained mass
//! `gamma_delta^alpha(F, a, b) = inf_{|P| <= delta} sigma^alpha[F, P]`.
//!
//! The search starts from a uniform subdivision with mesh `delta / 4` and
//! repeatedly perturbs the points of `P` that fall in a random window
//! `[x, y]`. One of three moves is chosen with equal probability, each
//! touching a window point with probability `min(1, delta / (y - x))`:
//!
//! * shift an interior point by `U(-delta/2, delta/2)`;
//! * remove an interior point;
//! * insert a uniform point into a gap wider than `delta / 10`.
//!
//! Shifts and removals are checked point by point against the mesh bound and
//! skipped individually when they would break it. The proposal is kept only
//! when the chord sum strictly decreases. Only the chords next to a touched
//! point change, so proposals are priced from cached chord terms in time
//! proportional to the number of touched points.
//!
//! A run stops once `N / n` reaches the normalised budget, where `N` counts
//! iterations and `n` is the current number of intervals. Several restarts
//! are run on independent random streams and the smallest sum is kept.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_alpha, chord_term, raw_chord_sum, squared_distance, Subdivision};
use crate::curve::Curve;
use crate::error::{Error, Result};
use crate::rng::{self, StreamRng};
use crate::special::{gamma, mass_normalisation};

/// Fixed per-move probabilities. `None` keeps the adaptive
/// `min(1, delta / (y - x))`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MoveProbabilities {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub remove: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub insert: Option<f64>,
}

impl MoveProbabilities {
    fn is_valid(&self) -> bool {
        [self.shift, self.remove, self.insert]
            .iter()
            .flatten()
            .all(|p| (0.0..=1.0).contains(p))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub alpha: f64,
    /// Mesh bound.
    pub delta: f64,
    pub seed: u64,
    /// Budget in normalised iterations `N' = N / n`.
    pub max_normalized_iters: f64,
    pub restarts: usize,
    /// Gaps narrower than `insert_floor_fraction * delta` never receive a new
    /// point.
    pub insert_floor_fraction: f64,
    #[serde(default)]
    pub move_probabilities: MoveProbabilities,
}

impl OptimizerConfig {
    pub fn new(alpha: f64, delta: f64) -> Self {
        Self {
            alpha,
            delta,
            seed: 0,
            max_normalized_iters: 2000.0,
            restarts: 3,
            insert_floor_fraction: 0.1,
            move_probabilities: MoveProbabilities::default(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts;
        self
    }

    pub fn with_budget(mut self, max_normalized_iters: f64) -> Self {
        self.max_normalized_iters = max_normalized_iters;
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return Err(Error::invalid(format!("delta = {} must be positive", self.delta)));
        }
        if !(self.max_normalized_iters.is_finite() && self.max_normalized_iters > 0.0) {
            return Err(Error::invalid(format!(
                "max_normalized_iters = {} must be positive",
                self.max_normalized_iters
            )));
        }
        if self.restarts == 0 {
            return Err(Error::invalid("restarts must be at least 1"));
        }
        if !(self.insert_floor_fraction > 0.0 && self.insert_floor_fraction < 1.0) {
            return Err(Error::invalid(format!(
                "insert_floor_fraction = {} must lie in (0, 1)",
                self.insert_floor_fraction
            )));
        }
        if !self.move_probabilities.is_valid() {
            return Err(Error::invalid("move probabilities must lie in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub normalized_iteration: f64,
    pub sigma: f64,
}

/// Result of one coarse-grained mass computation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassEstimate {
    /// `gamma_delta^alpha` estimate, including the `1 / Gamma(alpha + 1)`
    /// factor.
    pub value: f64,
    pub delta: f64,
    pub alpha: f64,
    pub interval: [f64; 2],
    pub seed: u64,
    pub final_subdivision: Subdivision,
    /// Evolution of `sigma^alpha` for the winning restart, one point per
    /// accepted move.
    pub trace: Vec<TracePoint>,
    pub restart_values: Vec<f64>,
    pub best_restart: usize,
    pub iterations: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl MassEstimate {
    /// `Gamma(alpha + 1) * value`, the bare chord sum.
    pub fn unnormalized_value(&self) -> f64 {
        self.value * gamma(self.alpha + 1.0)
    }

    /// CSV with columns `N_prime,sigma`.
    pub fn write_trace_csv<W: std::io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["N_prime", "sigma"])?;
        for p in &self.trace {
            w.write_record([p.normalized_iteration.to_string(), p.sigma.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// CSV with columns `t,w_x,w_y,...`: the final subdivision and its
    /// image on the curve.
    pub fn write_subdivision_csv<W: std::io::Write>(
        &self,
        curve: &Curve,
        out: W,
    ) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let dim = curve.embedding_dim();
        let mut header = vec!["t".to_string()];
        header.extend((0..dim).map(coordinate_name));
        w.write_record(&header)?;
        let mut p = vec![0.0; dim];
        for &t in self.final_subdivision.points() {
            curve.eval_unchecked(t, &mut p);
            let mut row = vec![t.to_string()];
            row.extend(p.iter().map(f64::to_string));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn coordinate_name(i: usize) -> String {
    match i {
        0 => "w_x".into(),
        1 => "w_y".into(),
        2 => "w_z".into(),
        _ => format!("w_{i}"),
    }
}

/// Estimates `gamma_delta^alpha(F, a, b)` by Monte Carlo search over
/// subdivisions of `[a, b]` with mesh at most `cfg.delta`.
pub fn optimize_subdivision(
    curve: &Curve,
    a: f64,
    b: f64,
    cfg: &OptimizerConfig,
) -> Result<MassEstimate> {
    cfg.validate()?;
    check_alpha(curve, cfg.alpha)?;
    let (a0, b0) = curve.domain();
    Error::check_domain(a, a0, b0)?;
    Error::check_domain(b, a0, b0)?;
    if !(a < b) {
        return Err(Error::invalid(format!("interval [{a}, {b}] is empty")));
    }
    let mut warnings = Vec::new();
    if cfg.delta >= b - a {
        warnings.push(format!(
            "delta = {} is not smaller than the interval length {}; \
             single-interval subdivisions dominate",
            cfg.delta,
            b - a
        ));
    }

    let runs: Vec<RunOutcome> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| Run::new(curve, a, b, cfg).execute(rng::stream(cfg.seed, r as u64)))
        .collect();

    let norm = mass_normalisation(cfg.alpha);
    let mut restart_values = Vec::with_capacity(runs.len());
    for run in &runs {
        let value = raw_chord_sum(curve, &run.params, cfg.alpha) * norm;
        if !value.is_finite() {
            return Err(Error::Numeric(format!(
                "chord sum became non-finite ({value}) at delta = {}",
                cfg.delta
            )));
        }
        restart_values.push(value);
    }
    let best_restart = restart_values
        .iter()
        .enumerate()
        .fold(0, |best, (i, v)| if *v < restart_values[best] { i } else { best });
    let best = runs.into_iter().nth(best_restart).expect("at least one restart");

    Ok(MassEstimate {
        value: restart_values[best_restart],
        delta: cfg.delta,
        alpha: cfg.alpha,
        interval: [a, b],
        seed: cfg.seed,
        final_subdivision: Subdivision::new(best.params)?,
        trace: best.trace,
        restart_values,
        best_restart,
        iterations: best.iterations,
        warnings,
    })
}

struct RunOutcome {
    params: Vec<f64>,
    trace: Vec<TracePoint>,
    iterations: u64,
}

#[derive(Clone, Copy)]
enum Move {
    Shift,
    Remove,
    Insert,
}

/// Picks the indices of a range independently with probability `p`, by
/// jumping over geometrically distributed gaps instead of drawing once per
/// index.
#[derive(Clone, Copy)]
struct Selector {
    p: f64,
    ln_q: f64,
}

impl Selector {
    fn new(p: f64) -> Self {
        Self {
            p,
            ln_q: (-p).ln_1p(),
        }
    }

    /// First selected index `>= from`, or `usize::MAX` when none is.
    fn next(&self, from: usize, rng: &mut StreamRng) -> usize {
        if self.p >= 1.0 {
            return from;
        }
        if self.p <= 0.0 {
            return usize::MAX;
        }
        let u: f64 = rng.random();
        let skip = ((1.0 - u).ln() / self.ln_q).floor();
        if skip >= (usize::MAX - from) as f64 {
            usize::MAX
        } else {
            from + skip as usize
        }
    }
}

struct Run<'a> {
    curve: &'a Curve,
    a: f64,
    b: f64,
    dim: usize,
    half_alpha: f64,
    delta: f64,
    insert_floor: f64,
    budget: f64,
    fixed: MoveProbabilities,
    norm: f64,

    params: Vec<f64>,
    coords: Vec<f64>,
    /// `terms[i] = |w(t_{i+1}) - w(t_i)|^alpha`.
    terms: Vec<f64>,

    // Proposed move: touched point indices (shift, remove) or gap indices
    // (insert), new parameters and their images, and the new values of the
    // chords that change, in index order.
    edit_idx: Vec<usize>,
    edit_t: Vec<f64>,
    edit_coords: Vec<f64>,
    chord_updates: Vec<(usize, f64)>,
    scratch_terms: Vec<f64>,
}

impl<'a> Run<'a> {
    fn new(curve: &'a Curve, a: f64, b: f64, cfg: &OptimizerConfig) -> Self {
        let dim = curve.embedding_dim();
        let start_mesh = cfg.delta / 4.0;
        let n = ((b - a) / start_mesh).ceil().max(1.0) as usize;
        let mut params: Vec<f64> = (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect();
        params[n] = b;
        let mut coords = vec![0.0; params.len() * dim];
        for (i, &t) in params.iter().enumerate() {
            curve.eval_unchecked(t, &mut coords[i * dim..(i + 1) * dim]);
        }
        let half_alpha = 0.5 * cfg.alpha;
        let terms = (0..n)
            .map(|i| {
                chord_term(
                    squared_distance(
                        &coords[i * dim..(i + 1) * dim],
                        &coords[(i + 1) * dim..(i + 2) * dim],
                    ),
                    half_alpha,
                )
            })
            .collect();
        Self {
            curve,
            a,
            b,
            dim,
            half_alpha,
            delta: cfg.delta,
            insert_floor: cfg.insert_floor_fraction * cfg.delta,
            budget: cfg.max_normalized_iters,
            fixed: cfg.move_probabilities,
            norm: mass_normalisation(cfg.alpha),
            params,
            coords,
            terms,
            edit_idx: Vec::new(),
            edit_t: Vec::new(),
            edit_coords: Vec::new(),
            chord_updates: Vec::new(),
            scratch_terms: Vec::new(),
        }
    }

    fn execute(mut self, mut rng: StreamRng) -> RunOutcome {
        let mut raw: f64 = self.terms.iter().sum();
        let mut trace = vec![TracePoint {
            normalized_iteration: 0.0,
            sigma: raw * self.norm,
        }];
        let mut iterations: u64 = 0;
        let width = self.b - self.a;

        loop {
            let n = self.params.len() - 1;
            if iterations as f64 >= self.budget * n as f64 {
                break;
            }
            iterations += 1;

            let u = self.a + width * rng.random::<f64>();
            let v = self.a + width * rng.random::<f64>();
            let (x, y) = if u <= v { (u, v) } else { (v, u) };
            let adaptive = if y > x { (self.delta / (y - x)).min(1.0) } else { 1.0 };
            let mv = match rng.random_range(0..3u8) {
                0 => Move::Shift,
                1 => Move::Remove,
                _ => Move::Insert,
            };

            // Window points are lo..=hi; lo and hi stay fixed.
            let lo = self.params.partition_point(|&t| t < x);
            let hi = self.params.partition_point(|&t| t <= y);
            if hi == 0 || lo + 1 >= hi {
                continue;
            }
            let hi = hi - 1;

            let change = match mv {
                Move::Shift => {
                    let sel = Selector::new(self.fixed.shift.unwrap_or(adaptive));
                    self.propose_shift(lo, hi, sel, &mut rng)
                }
                Move::Remove => {
                    let sel = Selector::new(self.fixed.remove.unwrap_or(adaptive));
                    self.propose_remove(lo, hi, sel, &mut rng)
                }
                Move::Insert => {
                    let sel = Selector::new(self.fixed.insert.unwrap_or(adaptive));
                    self.propose_insert(lo, hi, sel, &mut rng)
                }
            };
            let Some((old_sum, new_sum)) = change else {
                continue;
            };
            if new_sum < old_sum {
                match mv {
                    Move::Shift => self.apply_shift(),
                    Move::Remove => self.apply_remove(),
                    Move::Insert => self.apply_insert(),
                }
                raw += new_sum - old_sum;
                trace.push(TracePoint {
                    normalized_iteration: iterations as f64 / (self.params.len() - 1) as f64,
                    sigma: raw * self.norm,
                });
            }
        }

        RunOutcome {
            params: self.params,
            trace,
            iterations,
        }
    }

    fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    fn edited(&self, k: usize) -> &[f64] {
        &self.edit_coords[k * self.dim..(k + 1) * self.dim]
    }

    fn term(&self, p: &[f64], q: &[f64]) -> f64 {
        chord_term(squared_distance(p, q), self.half_alpha)
    }

    fn clear_edits(&mut self) {
        self.edit_idx.clear();
        self.edit_t.clear();
        self.edit_coords.clear();
        self.chord_updates.clear();
    }

    fn push_edit(&mut self, idx: usize, t: f64) {
        self.edit_idx.push(idx);
        self.edit_t.push(t);
        let start = self.edit_coords.len();
        self.edit_coords.resize(start + self.dim, 0.0);
        self.curve.eval_unchecked(t, &mut self.edit_coords[start..]);
    }

    /// Returns `(old, new)` sums of the chords that change, or `None` when
    /// nothing moved.
    fn propose_shift(
        &mut self,
        lo: usize,
        hi: usize,
        sel: Selector,
        rng: &mut StreamRng,
    ) -> Option<(f64, f64)> {
        self.clear_edits();
        let mut i = sel.next(lo + 1, rng);
        while i < hi {
            let cand = self.params[i] + self.delta * (rng.random::<f64>() - 0.5);
            let prev = match self.edit_idx.last() {
                Some(&j) if j + 1 == i => *self.edit_t.last().expect("paired with index"),
                _ => self.params[i - 1],
            };
            let next = self.params[i + 1];
            if cand > prev && cand < next && cand - prev <= self.delta && next - cand <= self.delta {
                self.push_edit(i, cand);
            }
            i = sel.next(i + 1, rng);
        }
        if self.edit_idx.is_empty() {
            return None;
        }

        let (mut old, mut new) = (0.0, 0.0);
        let mut k = 0;
        while k < self.edit_idx.len() {
            let start = k;
            while k + 1 < self.edit_idx.len() && self.edit_idx[k + 1] == self.edit_idx[k] + 1 {
                k += 1;
            }
            let (first, last) = (self.edit_idx[start], self.edit_idx[k]);
            old += self.terms[first - 1..=last].iter().sum::<f64>();
            let mut chord = self.term(self.point(first - 1), self.edited(start));
            self.chord_updates.push((first - 1, chord));
            new += chord;
            for e in start..k {
                chord = self.term(self.edited(e), self.edited(e + 1));
                self.chord_updates.push((self.edit_idx[e], chord));
                new += chord;
            }
            chord = self.term(self.edited(k), self.point(last + 1));
            self.chord_updates.push((last, chord));
            new += chord;
            k += 1;
        }
        Some((old, new))
    }

    fn apply_shift(&mut self) {
        let d = self.dim;
        for (k, &i) in self.edit_idx.iter().enumerate() {
            self.params[i] = self.edit_t[k];
            self.coords[i * d..(i + 1) * d].copy_from_slice(&self.edit_coords[k * d..(k + 1) * d]);
        }
        for &(j, v) in &self.chord_updates {
            self.terms[j] = v;
        }
    }

    fn propose_remove(
        &mut self,
        lo: usize,
        hi: usize,
        sel: Selector,
        rng: &mut StreamRng,
    ) -> Option<(f64, f64)> {
        self.clear_edits();
        let mut i = sel.next(lo + 1, rng);
        while i < hi {
            // Last kept point before i: removals come in runs that always
            // start after a kept point.
            let mut prev = i - 1;
            let mut n_run = self.edit_idx.len();
            while n_run > 0 && self.edit_idx[n_run - 1] == prev {
                prev -= 1;
                n_run -= 1;
            }
            if self.params[i + 1] - self.params[prev] <= self.delta {
                self.edit_idx.push(i);
            }
            i = sel.next(i + 1, rng);
        }
        if self.edit_idx.is_empty() {
            return None;
        }

        let (mut old, mut new) = (0.0, 0.0);
        let mut k = 0;
        while k < self.edit_idx.len() {
            let start = k;
            while k + 1 < self.edit_idx.len() && self.edit_idx[k + 1] == self.edit_idx[k] + 1 {
                k += 1;
            }
            let (first, last) = (self.edit_idx[start], self.edit_idx[k]);
            old += self.terms[first - 1..=last].iter().sum::<f64>();
            let chord = self.term(self.point(first - 1), self.point(last + 1));
            self.chord_updates.push((first - 1, chord));
            new += chord;
            k += 1;
        }
        Some((old, new))
    }

    fn apply_remove(&mut self) {
        for &(j, v) in &self.chord_updates {
            self.terms[j] = v;
        }
        // Point i and chord i (from i to i + 1) go together.
        let d = self.dim;
        let first = self.edit_idx[0];
        let mut write = first;
        let mut e = 0;
        for read in first..self.params.len() {
            if e < self.edit_idx.len() && self.edit_idx[e] == read {
                e += 1;
                continue;
            }
            self.params[write] = self.params[read];
            self.coords.copy_within(read * d..(read + 1) * d, write * d);
            if read < self.terms.len() {
                self.terms[write] = self.terms[read];
            }
            write += 1;
        }
        self.params.truncate(write);
        self.coords.truncate(write * d);
        self.terms.truncate(write - 1);
    }

    fn propose_insert(
        &mut self,
        lo: usize,
        hi: usize,
        sel: Selector,
        rng: &mut StreamRng,
    ) -> Option<(f64, f64)> {
        self.clear_edits();
        let mut g = sel.next(lo, rng);
        while g < hi {
            let (left, right) = (self.params[g], self.params[g + 1]);
            let gap = right - left;
            if gap > self.insert_floor {
                let t = left + gap * rng.random::<f64>();
                if t > left && t < right {
                    self.push_edit(g, t);
                }
            }
            g = sel.next(g + 1, rng);
        }
        if self.edit_idx.is_empty() {
            return None;
        }

        let (mut old, mut new) = (0.0, 0.0);
        for k in 0..self.edit_idx.len() {
            let g = self.edit_idx[k];
            old += self.terms[g];
            let left = self.term(self.point(g), self.edited(k));
            let right = self.term(self.edited(k), self.point(g + 1));
            self.chord_updates.push((g, left));
            self.chord_updates.push((g, right));
            new += left + right;
        }
        Some((old, new))
    }

    fn apply_insert(&mut self) {
        let d = self.dim;
        let first = self.edit_idx[0];
        let n = self.terms.len();
        let mut params = Vec::with_capacity(self.params.len() - first + self.edit_idx.len());
        let mut coords = Vec::with_capacity(params.capacity() * d);
        let terms = &mut self.scratch_terms;
        terms.clear();
        let mut k = 0;
        for g in first..n {
            params.push(self.params[g]);
            coords.extend_from_slice(&self.coords[g * d..(g + 1) * d]);
            if k < self.edit_idx.len() && self.edit_idx[k] == g {
                params.push(self.edit_t[k]);
                coords.extend_from_slice(&self.edit_coords[k * d..(k + 1) * d]);
                terms.push(self.chord_updates[2 * k].1);
                terms.push(self.chord_updates[2 * k + 1].1);
                k += 1;
            } else {
                terms.push(self.terms[g]);
            }
        }
        params.push(self.params[n]);
        coords.extend_from_slice(&self.coords[n * d..(n + 1) * d]);

        self.params.truncate(first);
        self.params.extend_from_slice(&params);
        self.coords.truncate(first * d);
        self.coords.extend_from_slice(&coords);
        self.terms.truncate(first);
        self.terms.extend_from_slice(terms);
    }
}
