//! Clustering kernels: multivariate Gaussian, categorical (latent class),
//! and first-order Markov chain. Each kernel provides the component
//! log-likelihood, conditional-posterior draws, prior draws, and the shared
//! hyperparameter update (a Gaussian-only step; identity otherwise).

mod categorical;
mod gaussian;
mod markov;

pub use categorical::CategoricalHyper;
pub use gaussian::GaussianHyper;
pub use markov::{mc_count_transitions, MarkovHyper, TransitionCounts};

use nalgebra::DVector;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::RandomSource;
use crate::spd::SpdMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianComponent {
    pub mu: DVector<f64>,
    pub sigma: SpdMatrix,
}

/// Occurrence probabilities: one simplex per feature.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoricalComponent {
    pub pi: Vec<Vec<f64>>,
}

/// Row-stochastic transition matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovChainComponent {
    pub xi: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Component {
    Gaussian(GaussianComponent),
    Categorical(CategoricalComponent),
    Markov(MarkovChainComponent),
}

impl Component {
    /// Flatten the full parameter vector: Gaussian mean followed by the
    /// upper triangle of the covariance (row-wise, diagonal included);
    /// all occurrence probabilities feature by feature; transition matrix
    /// row-major.
    pub fn flatten_full(&self) -> Vec<f64> {
        match self {
            Component::Gaussian(g) => {
                let r = g.mu.len();
                let mut v: Vec<f64> = g.mu.iter().copied().collect();
                for i in 0..r {
                    for j in i..r {
                        v.push(g.sigma.matrix()[(i, j)]);
                    }
                }
                v
            }
            Component::Categorical(c) => c.pi.iter().flatten().copied().collect(),
            Component::Markov(m) => m.xi.iter().flatten().copied().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Hyper {
    Gaussian(GaussianHyper),
    Categorical(CategoricalHyper),
    Markov(MarkovHyper),
}

/// Log-likelihood of observation `i` under the component parameters.
pub fn kernel_loglik(data: &Dataset, i: usize, theta: &Component) -> Result<f64> {
    match (data, theta) {
        (Dataset::Real(y), Component::Gaussian(g)) => gaussian::loglik(y, i, g),
        (Dataset::Categorical { rows, .. }, Component::Categorical(c)) => {
            categorical::loglik(&rows[i], c)
        }
        (Dataset::Sequences { seqs, .. }, Component::Markov(m)) => markov::loglik(&seqs[i], m),
        _ => Err(Error::Data("observation shape does not match kernel".into())),
    }
}

/// Draw component parameters from the conditional conjugate posterior given
/// the assigned observations. Must not be called with an empty assignment
/// set; empty components are handled by prior draws instead.
pub fn kernel_draw_posterior(
    data: &Dataset,
    assigned: &[usize],
    theta: &Component,
    hyper: &Hyper,
    rng: &mut RandomSource,
) -> Result<Component> {
    if assigned.is_empty() {
        return Err(Error::Contract(
            "kernel_draw_posterior called with an empty assignment set".into(),
        ));
    }
    match (data, theta, hyper) {
        (Dataset::Real(y), Component::Gaussian(g), Hyper::Gaussian(h)) => {
            gaussian::draw_posterior(y, assigned, g, h, rng)
        }
        (Dataset::Categorical { rows, cats }, Component::Categorical(_), Hyper::Categorical(h)) => {
            categorical::draw_posterior(rows, cats, assigned, h, rng)
        }
        (Dataset::Sequences { seqs, states }, Component::Markov(_), Hyper::Markov(h)) => {
            markov::draw_posterior(seqs, *states, assigned, h, rng)
        }
        _ => Err(Error::Data("data, component, and hyper kinds do not match".into())),
    }
}

/// Draw component parameters from the prior.
pub fn kernel_draw_prior(hyper: &Hyper, rng: &mut RandomSource) -> Result<Component> {
    match hyper {
        Hyper::Gaussian(h) => gaussian::draw_prior(h, rng),
        Hyper::Categorical(h) => categorical::draw_prior(h, rng),
        Hyper::Markov(h) => markov::draw_prior(h, rng),
    }
}

/// Update shared hyperparameters from the filled components. Only the
/// Gaussian kernel carries a sampled hyperparameter; the other kernels
/// return the hyper unchanged.
pub fn kernel_update_shared_hyper(
    filled: &[&Component],
    hyper: &Hyper,
    rng: &mut RandomSource,
) -> Result<Hyper> {
    match hyper {
        Hyper::Gaussian(h) => {
            if filled.is_empty() {
                return Err(Error::Contract(
                    "hyper update requires at least one filled component".into(),
                ));
            }
            let sigmas: Vec<&SpdMatrix> = filled
                .iter()
                .map(|c| match c {
                    Component::Gaussian(g) => Ok(&g.sigma),
                    _ => Err(Error::Data("non-Gaussian component under Gaussian hyper".into())),
                })
                .collect::<Result<_>>()?;
            Ok(Hyper::Gaussian(gaussian::update_shared_hyper(&sigmas, h, rng)?))
        }
        Hyper::Categorical(_) | Hyper::Markov(_) => Ok(hyper.clone()),
    }
}
