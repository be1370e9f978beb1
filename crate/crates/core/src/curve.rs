//! Continuous, one-to-one parametrizations `w: [a0, b0] -> R^m` of fractal
//! curves.
//!
//! A [`CurveSpec`] is the serializable description; [`Curve`] is the
//! validated, precomputed form used for evaluation. Curves are immutable and
//! evaluation is a pure function, so a `Curve` can be shared freely between
//! threads.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported embedding dimension.
pub const MAX_EMBEDDING_DIM: usize = 16;

/// Default recursion depth for self-similar curves (chord error `3^-12` for
/// the von Koch curve).
pub const DEFAULT_DEPTH: usize = 12;

/// Default number of terms kept in the Weierstrass series.
pub const DEFAULT_WEIERSTRASS_TERMS: usize = 60;

const CONSISTENCY_TOL: f64 = 1e-12;

/// One similarity `T_i = s_i R(theta_i)` of a planar self-similar curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityMap {
    pub s: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfSimilarSpec {
    pub transforms: Vec<SimilarityMap>,
    pub v0: [f64; 2],
    #[serde(default = "default_depth")]
    pub depth: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeierstrassSpec {
    pub lambda: f64,
    pub s: f64,
    #[serde(default = "default_terms")]
    pub terms: usize,
}

fn default_depth() -> usize {
    DEFAULT_DEPTH
}

fn default_terms() -> usize {
    DEFAULT_WEIERSTRASS_TERMS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CurveKind {
    SelfSimilar(SelfSimilarSpec),
    WeierstrassGraph(WeierstrassSpec),
    Polyline { vertices: Vec<Vec<f64>> },
    LineSegment { start: Vec<f64>, end: Vec<f64> },
}

/// Similarity placement `x -> scale * R x + translate` applied after the
/// base parametrization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotation: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub translate: Option<Vec<f64>>,
}

fn one() -> f64 {
    1.0
}

/// Monotone change of parameter `q(t) = a0 + L ((t - a0) / L)^power`,
/// mapping the domain onto itself.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reparam {
    pub power: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSpec {
    #[serde(flatten)]
    pub kind: CurveKind,
    pub domain: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub placement: Option<Placement>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reparam: Option<Reparam>,
}

impl CurveSpec {
    /// The von Koch curve: four maps of scale 1/3 with angles
    /// `0, pi/3, -pi/3, 0` and base vector `(1, 0)`.
    pub fn koch() -> Self {
        use std::f64::consts::FRAC_PI_3;
        let s = 1.0 / 3.0;
        Self::self_similar(
            [0.0, FRAC_PI_3, -FRAC_PI_3, 0.0]
                .iter()
                .map(|&theta| SimilarityMap { s, theta })
                .collect(),
            [1.0, 0.0],
        )
    }

    /// Quadratic Koch curve of type 2: eight maps of scale 1/4, dimension
    /// `log 8 / log 4 = 3/2`.
    pub fn minkowski() -> Self {
        use std::f64::consts::FRAC_PI_2;
        let s = 0.25;
        let angles = [
            0.0, FRAC_PI_2, 0.0, -FRAC_PI_2, -FRAC_PI_2, 0.0, FRAC_PI_2, 0.0,
        ];
        Self::self_similar(
            angles
                .iter()
                .map(|&theta| SimilarityMap { s, theta })
                .collect(),
            [1.0, 0.0],
        )
    }

    pub fn self_similar(transforms: Vec<SimilarityMap>, v0: [f64; 2]) -> Self {
        Self {
            kind: CurveKind::SelfSimilar(SelfSimilarSpec {
                transforms,
                v0,
                depth: DEFAULT_DEPTH,
            }),
            domain: [0.0, 1.0],
            placement: None,
            reparam: None,
        }
    }

    /// Unit segment from `(0, 0)` to `(1, 0)` on `[0, 1]`.
    pub fn unit_line() -> Self {
        Self::line_segment(vec![0.0, 0.0], vec![1.0, 0.0])
    }

    pub fn line_segment(start: Vec<f64>, end: Vec<f64>) -> Self {
        Self {
            kind: CurveKind::LineSegment { start, end },
            domain: [0.0, 1.0],
            placement: None,
            reparam: None,
        }
    }

    pub fn polyline(vertices: Vec<Vec<f64>>) -> Self {
        Self {
            kind: CurveKind::Polyline { vertices },
            domain: [0.0, 1.0],
            placement: None,
            reparam: None,
        }
    }

    /// Graph `t -> (t, W(t))` of the Weierstrass function
    /// `W(t) = sum_k lambda^((s-2)k) sin(lambda^k t)`.
    pub fn weierstrass(lambda: f64, s: f64) -> Self {
        Self {
            kind: CurveKind::WeierstrassGraph(WeierstrassSpec {
                lambda,
                s,
                terms: DEFAULT_WEIERSTRASS_TERMS,
            }),
            domain: [0.0, 1.0],
            placement: None,
            reparam: None,
        }
    }

    /// Built-in curves addressable by name from the command line.
    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "koch" => Some(Self::koch()),
            "minkowski" => Some(Self::minkowski()),
            "line" => Some(Self::unit_line()),
            "weierstrass" => Some(Self::weierstrass(2.0, 1.5)),
            _ => None,
        }
    }

    pub fn with_domain(mut self, a0: f64, b0: f64) -> Self {
        self.domain = [a0, b0];
        self
    }

    /// Sets the recursion depth of a self-similar curve or the number of
    /// series terms of a Weierstrass graph. No effect on other kinds.
    pub fn with_depth(mut self, depth: usize) -> Self {
        match &mut self.kind {
            CurveKind::SelfSimilar(ss) => ss.depth = depth,
            CurveKind::WeierstrassGraph(ws) => ws.terms = depth,
            _ => {}
        }
        self
    }

    pub fn translated(self, v: Vec<f64>) -> Self {
        self.placed(Placement {
            scale: 1.0,
            rotation: None,
            translate: Some(v),
        })
    }

    pub fn scaled(self, lambda: f64) -> Self {
        self.placed(Placement {
            scale: lambda,
            rotation: None,
            translate: None,
        })
    }

    /// Planar rotation by `angle` radians about the origin.
    pub fn rotated(self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        self.rotated_by(vec![vec![c, -s], vec![s, c]])
    }

    pub fn rotated_by(self, matrix: Vec<Vec<f64>>) -> Self {
        self.placed(Placement {
            scale: 1.0,
            rotation: Some(matrix),
            translate: None,
        })
    }

    pub fn reparametrized(mut self, power: f64) -> Self {
        self.reparam = Some(Reparam { power });
        self
    }

    /// Composes `outer` after any placement already present.
    pub fn placed(mut self, outer: Placement) -> Self {
        self.placement = Some(match self.placement.take() {
            None => outer,
            Some(inner) => compose(&outer, &inner),
        });
        self
    }

    /// Analytic dimension when one is known: the similarity dimension of a
    /// self-similar curve (root of `sum s_i^a = 1`), `s` for a Weierstrass
    /// graph, 1 for polylines.
    pub fn natural_dimension(&self) -> Option<f64> {
        match &self.kind {
            CurveKind::SelfSimilar(ss) => {
                let scales: Vec<f64> = ss.transforms.iter().map(|m| m.s).collect();
                similarity_dimension(&scales)
            }
            CurveKind::WeierstrassGraph(ws) => Some(ws.s),
            CurveKind::Polyline { .. } | CurveKind::LineSegment { .. } => Some(1.0),
        }
    }
}

fn compose(outer: &Placement, inner: &Placement) -> Placement {
    // outer(inner(x)) = so*Ro*(si*Ri*x + vi) + vo
    let rotation = match (&outer.rotation, &inner.rotation) {
        (None, None) => None,
        (Some(r), None) | (None, Some(r)) => Some(r.clone()),
        (Some(ro), Some(ri)) => Some(mat_mul(ro, ri)),
    };
    let translate = match (&outer.translate, &inner.translate) {
        (None, None) => None,
        (vo, vi) => {
            let dim = vo.as_ref().or(vi.as_ref()).map_or(0, Vec::len);
            let mut v = vec![0.0; dim];
            if let Some(vi) = vi {
                let rotated = match &outer.rotation {
                    Some(ro) => mat_vec(ro, vi),
                    None => vi.clone(),
                };
                for (dst, x) in v.iter_mut().zip(rotated) {
                    *dst += outer.scale * x;
                }
            }
            if let Some(vo) = vo {
                for (dst, x) in v.iter_mut().zip(vo) {
                    *dst += x;
                }
            }
            Some(v)
        }
    };
    Placement {
        scale: outer.scale * inner.scale,
        rotation,
        translate,
    }
}

fn mat_mul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| (0..n).map(|k| a[i][k] * b[k][j]).sum())
                .collect()
        })
        .collect()
}

fn mat_vec(a: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    a.iter()
        .map(|row| row.iter().zip(v).map(|(x, y)| x * y).sum())
        .collect()
}

fn similarity_dimension(scales: &[f64]) -> Option<f64> {
    if scales.len() < 2 || scales.iter().any(|&s| !(s > 0.0 && s < 1.0)) {
        return None;
    }
    // sum s_i^d is strictly decreasing in d.
    let moran = |d: f64| scales.iter().map(|s| s.powf(d)).sum::<f64>() - 1.0;
    let (mut lo, mut hi) = (0.0, 1.0);
    while moran(hi) > 0.0 {
        hi *= 2.0;
        if hi > 1e6 {
            return None;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if moran(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

#[derive(Debug, Clone)]
enum Shape {
    SelfSimilar {
        maps: Vec<Complex64>,
        /// `prefix[k] = sum_{i<k} T_i(v0)`.
        prefix: Vec<Complex64>,
        v0: Complex64,
        depth: usize,
    },
    Weierstrass {
        weights: Vec<f64>,
        freqs: Vec<f64>,
        tail_bound: f64,
    },
    Polyline {
        vertices: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Clone)]
struct Affine {
    scale: f64,
    /// Row-major `dim x dim`.
    rotation: Option<Vec<f64>>,
    translate: Option<Vec<f64>>,
}

/// A validated curve ready for evaluation.
#[derive(Debug, Clone)]
pub struct Curve {
    spec: CurveSpec,
    shape: Shape,
    dim: usize,
    a0: f64,
    b0: f64,
    affine: Option<Affine>,
    reparam_power: Option<f64>,
}

impl Curve {
    pub fn new(spec: CurveSpec) -> Result<Self> {
        let [a0, b0] = spec.domain;
        if !(a0.is_finite() && b0.is_finite() && a0 < b0) {
            return Err(Error::InvalidCurve(format!(
                "domain [{a0}, {b0}] must satisfy a0 < b0"
            )));
        }
        let (shape, dim) = build_shape(&spec)?;
        let affine = match &spec.placement {
            Some(p) => Some(build_affine(p, dim)?),
            None => None,
        };
        let reparam_power = match spec.reparam {
            Some(Reparam { power }) if power.is_finite() && power > 0.0 => Some(power),
            Some(Reparam { power }) => {
                return Err(Error::InvalidCurve(format!(
                    "reparametrization power {power} must be positive"
                )))
            }
            None => None,
        };
        Ok(Self {
            spec,
            shape,
            dim,
            a0,
            b0,
            affine,
            reparam_power,
        })
    }

    pub fn spec(&self) -> &CurveSpec {
        &self.spec
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.a0, self.b0)
    }

    pub fn embedding_dim(&self) -> usize {
        self.dim
    }

    /// Analytic tail bound of the truncated Weierstrass series, if this is a
    /// Weierstrass graph.
    pub fn weierstrass_tail_bound(&self) -> Option<f64> {
        match &self.shape {
            Shape::Weierstrass { tail_bound, .. } => Some(*tail_bound),
            _ => None,
        }
    }

    pub fn evaluate(&self, t: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim];
        self.evaluate_into(t, &mut out)?;
        Ok(out)
    }

    pub fn evaluate_into(&self, t: f64, out: &mut [f64]) -> Result<()> {
        Error::check_domain(t, self.a0, self.b0)?;
        if out.len() != self.dim {
            return Err(Error::invalid(format!(
                "output buffer has length {}, curve dimension is {}",
                out.len(),
                self.dim
            )));
        }
        self.eval_with_depth(t, None, out);
        Ok(())
    }

    /// Evaluates a self-similar curve with an explicit recursion depth.
    /// Other kinds ignore `depth`.
    pub fn evaluate_at_depth(&self, t: f64, depth: usize) -> Result<Vec<f64>> {
        Error::check_domain(t, self.a0, self.b0)?;
        let mut out = vec![0.0; self.dim];
        self.eval_with_depth(t, Some(depth), &mut out);
        Ok(out)
    }

    /// Euclidean distance `|w(t2) - w(t1)|`.
    pub fn chord_length(&self, t1: f64, t2: f64) -> Result<f64> {
        let p = self.evaluate(t1)?;
        let q = self.evaluate(t2)?;
        Ok(distance(&p, &q))
    }

    /// Hot-path evaluation; `t` must lie in the domain and `out` must have
    /// length `embedding_dim()`.
    pub(crate) fn eval_unchecked(&self, t: f64, out: &mut [f64]) {
        self.eval_with_depth(t, None, out);
    }

    fn eval_with_depth(&self, t: f64, depth: Option<usize>, out: &mut [f64]) {
        let t = match self.reparam_power {
            Some(p) => {
                let len = self.b0 - self.a0;
                let x = ((t - self.a0) / len).clamp(0.0, 1.0);
                self.a0 + len * x.powf(p)
            }
            None => t,
        };
        match &self.shape {
            Shape::SelfSimilar {
                maps,
                prefix,
                v0,
                depth: default_depth,
            } => {
                let z = eval_self_similar(maps, prefix, *v0, t, depth.unwrap_or(*default_depth));
                out[0] = z.re;
                out[1] = z.im;
            }
            Shape::Weierstrass { weights, freqs, .. } => {
                out[0] = t;
                out[1] = weights
                    .iter()
                    .zip(freqs)
                    .map(|(w, f)| w * (f * t).sin())
                    .sum();
            }
            Shape::Polyline { vertices } => {
                let segments = vertices.len() - 1;
                let x = (t - self.a0) / (self.b0 - self.a0) * segments as f64;
                let k = (x.floor().max(0.0) as usize).min(segments - 1);
                let frac = x - k as f64;
                let (p, q) = (&vertices[k], &vertices[k + 1]);
                for (i, o) in out.iter_mut().enumerate() {
                    *o = p[i] + frac * (q[i] - p[i]);
                }
            }
        }
        if let Some(affine) = &self.affine {
            affine.apply(out);
        }
    }

    /// Samples `samples` uniformly spaced parameters and looks for pairs of
    /// distant parameters whose images nearly coincide.
    ///
    /// The statistic is `(|w(t) - w(t')| / diam) / (|t - t'| / L)`, minimised
    /// over all pairs. A self-crossing curve drives it down to the order of
    /// the grid spacing; the probe fires when it drops below
    /// `threshold_factor / samples`. This is a diagnostic, not a proof of
    /// injectivity.
    pub fn injectivity_probe(&self, samples: usize, threshold_factor: f64) -> Result<InjectivityReport> {
        if samples < 3 {
            return Err(Error::invalid("injectivity probe needs at least 3 samples"));
        }
        let len = self.b0 - self.a0;
        let params: Vec<f64> = (0..samples)
            .map(|i| self.a0 + len * i as f64 / (samples - 1) as f64)
            .collect();
        let mut pts = vec![0.0; samples * self.dim];
        for (i, &t) in params.iter().enumerate() {
            self.eval_unchecked(t, &mut pts[i * self.dim..(i + 1) * self.dim]);
        }
        let d = self.dim;
        let point = |i: usize| &pts[i * d..(i + 1) * d];

        let mut diameter: f64 = 0.0;
        let mut best = (f64::INFINITY, 0usize, 0usize);
        for i in 0..samples {
            for j in (i + 1)..samples {
                let chord = distance(point(i), point(j));
                diameter = diameter.max(chord);
                let ratio = chord / ((j - i) as f64);
                if ratio < best.0 {
                    best = (ratio, i, j);
                }
            }
        }
        if diameter == 0.0 {
            return Err(Error::Numeric("curve image is a single point".into()));
        }
        // ratio above is chord / (index gap); normalise to (chord/diam) / (dt/L).
        let min_ratio = best.0 * (samples - 1) as f64 / diameter;
        let threshold = threshold_factor / samples as f64;
        Ok(InjectivityReport {
            samples,
            diameter,
            min_ratio,
            worst_pair: (params[best.1], params[best.2]),
            threshold,
            self_intersecting: min_ratio < threshold,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectivityReport {
    pub samples: usize,
    pub diameter: f64,
    pub min_ratio: f64,
    pub worst_pair: (f64, f64),
    pub threshold: f64,
    pub self_intersecting: bool,
}

impl Affine {
    fn apply(&self, x: &mut [f64]) {
        if let Some(r) = &self.rotation {
            let n = x.len();
            let mut tmp = [0.0; MAX_EMBEDDING_DIM];
            tmp[..n].copy_from_slice(x);
            for (i, xi) in x.iter_mut().enumerate() {
                *xi = (0..n).map(|j| r[i * n + j] * tmp[j]).sum();
            }
        }
        if self.scale != 1.0 {
            for xi in x.iter_mut() {
                *xi *= self.scale;
            }
        }
        if let Some(v) = &self.translate {
            for (xi, vi) in x.iter_mut().zip(v) {
                *xi += vi;
            }
        }
    }
}

fn eval_self_similar(
    maps: &[Complex64],
    prefix: &[Complex64],
    v0: Complex64,
    mut t: f64,
    depth: usize,
) -> Complex64 {
    let n = maps.len();
    let nf = n as f64;
    let mut origin = Complex64::new(0.0, 0.0);
    let mut mult = Complex64::new(1.0, 0.0);
    for _ in 0..depth {
        let scaled = t * nf;
        // floor(n t) = n at t = 1; the last map owns the right endpoint.
        let k = (scaled.floor() as usize).min(n - 1);
        origin += mult * prefix[k];
        mult *= maps[k];
        t = scaled - k as f64;
    }
    // Depth exhausted: straight chord from the sub-curve start to its end.
    origin + mult * v0 * t
}

pub(crate) fn distance(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

fn build_shape(spec: &CurveSpec) -> Result<(Shape, usize)> {
    let bad = |msg: String| Err(Error::InvalidCurve(msg));
    match &spec.kind {
        CurveKind::SelfSimilar(ss) => {
            if spec.domain != [0.0, 1.0] {
                return bad("self-similar curves are parametrized on [0, 1]".into());
            }
            if ss.transforms.len() < 2 {
                return bad("a self-similar curve needs at least two maps".into());
            }
            if ss.depth == 0 {
                return bad("recursion depth must be at least 1".into());
            }
            for (i, m) in ss.transforms.iter().enumerate() {
                if !(m.s > 0.0 && m.s < 1.0) || !m.theta.is_finite() {
                    return bad(format!("map {i}: scale {} must lie in (0, 1)", m.s));
                }
            }
            let v0 = Complex64::new(ss.v0[0], ss.v0[1]);
            if !(v0.norm() > 0.0 && v0.norm().is_finite()) {
                return bad("base vector v0 must be finite and non-zero".into());
            }
            let maps: Vec<Complex64> = ss
                .transforms
                .iter()
                .map(|m| Complex64::from_polar(m.s, m.theta))
                .collect();
            // sum T_i = I as 2x2 matrices iff the complex coefficients sum to 1.
            let total: Complex64 = maps.iter().sum();
            if (total - 1.0).norm() > CONSISTENCY_TOL {
                return bad(format!(
                    "maps violate sum T_i(v) = v: coefficient sum is {total}"
                ));
            }
            let mut prefix = Vec::with_capacity(maps.len());
            let mut acc = Complex64::new(0.0, 0.0);
            for m in &maps {
                prefix.push(acc);
                acc += m * v0;
            }
            Ok((
                Shape::SelfSimilar {
                    maps,
                    prefix,
                    v0,
                    depth: ss.depth,
                },
                2,
            ))
        }
        CurveKind::WeierstrassGraph(ws) => {
            if !(ws.lambda > 1.0 && ws.lambda.is_finite()) {
                return bad(format!("lambda {} must exceed 1", ws.lambda));
            }
            if !(ws.s > 1.0 && ws.s < 2.0) {
                return bad(format!("s {} must lie in (1, 2)", ws.s));
            }
            if ws.terms == 0 {
                return bad("at least one series term is required".into());
            }
            let ratio = ws.lambda.powf(ws.s - 2.0);
            let weights = (1..=ws.terms).map(|k| ratio.powi(k as i32)).collect();
            let freqs = (1..=ws.terms).map(|k| ws.lambda.powi(k as i32)).collect();
            let tail_bound = ratio.powi(ws.terms as i32 + 1) / (1.0 - ratio);
            Ok((
                Shape::Weierstrass {
                    weights,
                    freqs,
                    tail_bound,
                },
                2,
            ))
        }
        CurveKind::Polyline { vertices } => {
            let dim = check_vertices(vertices)?;
            Ok((
                Shape::Polyline {
                    vertices: vertices.clone(),
                },
                dim,
            ))
        }
        CurveKind::LineSegment { start, end } => {
            let vertices = vec![start.clone(), end.clone()];
            let dim = check_vertices(&vertices)?;
            Ok((Shape::Polyline { vertices }, dim))
        }
    }
}

fn check_vertices(vertices: &[Vec<f64>]) -> Result<usize> {
    if vertices.len() < 2 {
        return Err(Error::InvalidCurve("need at least two vertices".into()));
    }
    let dim = vertices[0].len();
    if dim == 0 || dim > MAX_EMBEDDING_DIM {
        return Err(Error::InvalidCurve(format!(
            "embedding dimension {dim} outside 1..={MAX_EMBEDDING_DIM}"
        )));
    }
    for (i, v) in vertices.iter().enumerate() {
        if v.len() != dim || v.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidCurve(format!(
                "vertex {i} must have {dim} finite coordinates"
            )));
        }
    }
    for (i, pair) in vertices.windows(2).enumerate() {
        if distance(&pair[0], &pair[1]) == 0.0 {
            return Err(Error::InvalidCurve(format!(
                "vertices {i} and {} coincide",
                i + 1
            )));
        }
    }
    Ok(dim)
}

fn build_affine(p: &Placement, dim: usize) -> Result<Affine> {
    if !(p.scale.is_finite() && p.scale > 0.0) {
        return Err(Error::InvalidCurve(format!(
            "placement scale {} must be positive",
            p.scale
        )));
    }
    let rotation = match &p.rotation {
        None => None,
        Some(r) => {
            if r.len() != dim || r.iter().any(|row| row.len() != dim) {
                return Err(Error::InvalidCurve(format!(
                    "rotation must be a {dim}x{dim} matrix"
                )));
            }
            // R R^T = I
            for i in 0..dim {
                for j in 0..dim {
                    let dot: f64 = (0..dim).map(|k| r[i][k] * r[j][k]).sum();
                    let want = if i == j { 1.0 } else { 0.0 };
                    if (dot - want).abs() > 1e-9 {
                        return Err(Error::InvalidCurve("rotation is not orthogonal".into()));
                    }
                }
            }
            Some(r.iter().flatten().copied().collect())
        }
    };
    let translate = match &p.translate {
        None => None,
        Some(v) if v.len() == dim && v.iter().all(|x| x.is_finite()) => Some(v.clone()),
        Some(_) => {
            return Err(Error::InvalidCurve(format!(
                "translation must have {dim} finite components"
            )))
        }
    };
    Ok(Affine {
        scale: p.scale,
        rotation,
        translate,
    })
}
