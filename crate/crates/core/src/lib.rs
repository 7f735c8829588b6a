//! Bayesian model-based clustering by MCMC with CliPS identification.
//!
//! The crate fits finite and overfitting mixture models (fixed-K Gibbs with
//! data augmentation, telescoping sampler with a prior on K, sparse finite
//! mixtures) over three clustering kernels (multivariate Gaussian, latent
//! class / categorical, first-order Markov chain), and post-processes the
//! posterior draws in the point-process representation: clustering a
//! functional of the component draws, checking classification sequences for
//! permutations, relabeling, and summarizing the identified clusters.

pub mod clips;
pub mod data;
pub mod distributions;
pub mod error;
pub mod kernels;
pub mod kmeans;
pub mod rng;
pub mod sampler;
pub mod simulate;
pub mod spd;
pub mod store;

pub use error::{Error, Result};
pub use rng::RandomSource;
pub use spd::SpdMatrix;
