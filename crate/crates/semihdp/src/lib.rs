//! Posterior inference for grouped univariate data under a semi-hierarchical
//! Dirichlet process prior.
//!
//! The model places a Dirichlet process on each population's mixing measure,
//! centered on a common base that is itself a mixture of a fixed measure and
//! a Dirichlet process draw. A categorical assignment vector `c` lets several
//! populations share one mixing measure, so the posterior of `c` answers the
//! distributional-homogeneity question directly (Bayes factors, partition
//! posteriors, similarity matrices), while shared atoms across populations
//! avoid the degeneracy of fully nested constructions.
//!
//! Crate layout:
//! - [`dist`]: Gaussian kernel, normal-inverse-gamma conjugate family,
//!   stick-breaking, CRP combinatorics, closed-form mixture integrals.
//! - [`state`]: the latent food-court configuration and its consistency rules.
//! - [`sampler`]: the marginal Gibbs sampler, Metropolised assignment moves,
//!   adaptive-truncation mixture draws, pseudopriors, relabeling.
//! - [`oracles`]: closed-form prior quantities (EPPFs, moments, covariance,
//!   tie probabilities) used as ground truth for validating the sampler.
//! - [`analysis`]: chain post-processing into the end-user outputs.
//! - [`scenarios`], [`data`]: synthetic benchmark generators and CSV/record IO.
//! - [`cli`]: the `semihdp` command-line entry points.

pub mod analysis;
pub mod cli;
pub mod data;
pub mod dist;
pub mod error;
pub mod oracles;
pub mod records;
pub mod sampler;
pub mod scenarios;
pub mod state;
pub mod validation;

pub use error::{Error, Result};
