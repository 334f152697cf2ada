//! Cross-validation risk estimation with variance estimates, confidence intervals
//! and the limiting quantities that govern them.
//!
//! Each major capability has a runnable example:
//!
//! ```sh
//! cargo run --release --example cv_interval
//! ```
//!
//! `cv_interval`, `ridge_swap`, `ridge_limits`, `lda_limits`, `limit_laws`,
//! `run_experiment` and `analyze_csv`.

pub mod analyze;
pub mod asymptotics;
pub mod data;
pub mod error;
pub mod experiments;
pub mod folds;
pub mod generators;
pub mod limits;
pub mod models;
pub mod quadrature;
pub mod risk;
pub mod rng;
pub mod stats;
pub mod variance;

pub use data::{Dataset, Observation, Response, Responses};
pub use error::{Error, Result};
pub use folds::{make_partition, FoldPartition};
pub use generators::{sample_dataset, Density, Generator, GeneratorSpec};
pub use models::{evaluate_loss, Fitter, Hypothesis, LossKind};
pub use rng::SeedSpec;
