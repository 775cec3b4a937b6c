//! Space-time modelling of daily maximum temperature.
//!
//! The crate fits a hierarchical autoregressive model for warm-period daily
//! maxima at weather stations, generates posterior predictive replicate
//! series on a spatial grid, and turns those replicates into probability
//! surfaces and spatial extents for exceedance, persistence and
//! between-period increment events.
//!
//! Numerical code that does not depend on the sampler (dense linear algebra,
//! Gaussian-process covariances and kriging, ensembles and the analytics
//! that run over them) is generic over [`Scalar`], so ensembles can be held
//! in `f32` while the sampler runs in `f64`. The aliases below pin the
//! common choices.

pub mod analytics;
pub mod domain;
pub mod error;
pub mod generate;
pub mod gp;
pub mod linalg;
pub mod model;
pub mod numfmt;
pub mod rng;
pub mod scalar;

pub use error::{Error, ErrorKind, Result};
pub use scalar::Scalar;

/// Dense row-major matrix in double precision.
pub type Matrix = linalg::Matrix<f64>;
/// Exponential-covariance GP description in double precision.
pub type GpSpec = gp::GpSpec<f64>;
pub type DistanceMatrix = gp::DistanceMatrix<f64>;
/// Replicate ensemble held in double precision (used by the analytics and tests).
pub type Ensemble = generate::Ensemble<f64>;
/// Replicate ensemble held in single precision, matching the on-disk layout.
pub type Ensemble32 = generate::Ensemble<f32>;
