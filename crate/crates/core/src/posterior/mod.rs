//! Random-walk Metropolis sampling of the tempered posterior
//! `p(w|Dₙ) ∝ φ(w) Πᵢ p(Xᵢ|w)^β` and chain diagnostics.

mod diagnostics;
mod metropolis;

pub use diagnostics::{batch_means_se, effective_sample_size, ess_of_trace, EssEstimate};
pub use metropolis::{metropolis_sample, McmcConfig, PosteriorEnsemble, SamplerWarning};
