//! Numerical calculus on parametrizable fractal curves.
//!
//! A curve is a continuous one-to-one map `w: [a0, b0] -> R^m`. The crate
//! computes its coarse-grained `alpha`-mass by Monte Carlo search over
//! subdivisions, the staircase (rise) function `S(t)`, the gamma-dimension,
//! and the F^alpha integral and derivative, which reduce to ordinary calculus
//! in the rise variable `u = S(t)`.
//!
//! ```no_run
//! use fractal_calculus::{falpha_integrate, staircase, Curve, CurveFunction, CurveSpec, OptimizerConfig};
//!
//! let curve = Curve::new(CurveSpec::koch()).unwrap();
//! let alpha = 4f64.ln() / 3f64.ln();
//! let cfg = OptimizerConfig::new(alpha, 1.0 / 640.0).with_seed(7).with_restarts(1);
//! let table = staircase(&curve, alpha, 64, &cfg).unwrap();
//! let f = CurveFunction::of_rise(|s| s.sin());
//! let integral = falpha_integrate(&f, &table, 0.0, 1.0, 1e-6).unwrap();
//! println!("S(1) = {}, integral = {}", table.total(), integral.value);
//! ```

pub mod calculus;
pub mod curve;
pub mod dimension;
pub mod error;
pub mod mass;
pub mod models;
pub mod rng;
pub mod special;

pub use calculus::{
    falpha_derivative, falpha_integrate, fundamental_roundtrip, np_norm, ordinary_derivative, phi,
    phi_inverse, taylor_partial_sum, CurveFunction, DerivativeResult, IntegralResult,
};
pub use curve::{Curve, CurveKind, CurveSpec, SelfSimilarSpec, SimilarityMap, WeierstrassSpec};
pub use dimension::{
    estimate_dimension, ratio_r, ratio_sample, self_similar_dimension, DimensionConfig,
    DimensionEstimate, RatioSample,
};
pub use error::{Error, Result};
pub use mass::{
    invariance_check, mass, optimize_subdivision, sigma_alpha, staircase, InvarianceReport,
    MassEstimate, MassLimit, MassScheduleReport, OptimizerConfig, SimilarityTransform,
    StaircaseTable, Subdivision, Trend,
};
pub use models::{absorption_profile, verify_absorption_ode, AbsorptionModel};
pub use special::gamma;
