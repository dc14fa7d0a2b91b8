//! Popularity-bias diagnosis toolkit for user-based collaborative filtering.
//!
//! The crate covers the full pipeline:
//!
//! * [`data`] — interaction skeletons, rating datasets, popularity and
//!   profile statistics, and a seeded long-tail skeleton generator.
//! * [`synth`] — assigns synthetic ratings to a skeleton under five
//!   popularity/rating/user-influence scenarios.
//! * [`knn`] — a configurable UserKNN recommender (minimum similarity,
//!   similarity item scope, minimum neighbours, neighbourhood size).
//! * [`eval`] — cross-validated experiments: accuracy metrics,
//!   popularity-bias metrics, and Mann-Whitney significance marking.
//! * [`report`] — CSV emission and a plain-text summary table.
//!
//! All randomness flows through explicitly seeded ChaCha8 generators, so
//! every artifact is reproducible from its seeds.
//!
//! Numeric code is generic over the scalar type through the [`Real`] trait;
//! the aliases below fix `f64`, which is what the CLI and file formats use.

pub mod data;
pub mod error;
pub mod eval;
pub mod knn;
pub mod report;
pub mod scalar;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
pub use scalar::Real;

/// Double-precision instantiations used by the command-line front end.
pub type KnnConfigF64 = knn::KnnConfig<f64>;
pub type FittedModelF64 = knn::FittedModel<f64>;
pub type MetricsRowF64 = eval::MetricsRow<f64>;
pub type ExperimentReportF64 = eval::ExperimentReport<f64>;
