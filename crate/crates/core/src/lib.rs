//! Bayesian learning under a tempered posterior `p(w|Dₙ) ∝ φ(w) Πᵢ p(Xᵢ|w)^β`:
//! Metropolis sampling, the four Bayes/Gibbs errors, WAIC, learning
//! coefficient estimates, and reference values from singular learning theory.

pub mod error;
pub mod estimators;
pub mod harness;
pub mod model;
pub mod posterior;
pub mod theory;
pub mod zoo;

pub use error::{Error, Result};
pub use estimators::{evaluate, ErrorReport};
pub use harness::{run_experiment, run_trial, ExperimentAggregate, ExperimentConfig};
pub use model::{sample_dataset, Dataset, Model, ParameterVector, Sample};
pub use posterior::{metropolis_sample, McmcConfig, PosteriorEnsemble};
