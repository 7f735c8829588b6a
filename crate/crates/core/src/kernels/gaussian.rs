//! Multivariate Gaussian kernel.
//!
//! The independent N(mu) x IW(Sigma) prior is conditionally conjugate, not
//! jointly conjugate, so the posterior draw is blocked: mu | Sigma, data,
//! then Sigma | mu, data. The covariance scale C0 is itself sampled, shared
//! across components.

use nalgebra::{DMatrix, DVector};

use crate::distributions::{draw_inv_wishart, draw_mvn, draw_wishart};
use crate::error::{Error, Result};
use crate::rng::RandomSource;
use crate::spd::SpdMatrix;

use super::{Component, GaussianComponent};

/// Hyperparameters of the Gaussian kernel. `cov_scale` is the sampled
/// shared scale of the inverse Wishart covariance prior.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianHyper {
    /// Prior mean of the component means (b0).
    pub mean_loc: DVector<f64>,
    /// Prior covariance of the component means (B0).
    pub mean_cov: SpdMatrix,
    /// Shape of the inverse Wishart covariance prior (c0).
    pub cov_shape: f64,
    /// Scale of the inverse Wishart covariance prior (C0, sampled).
    pub cov_scale: SpdMatrix,
    /// Shape of the Wishart hyperprior on the scale (g0).
    pub scale_shape: f64,
    /// Rate of the Wishart hyperprior on the scale (G0).
    pub scale_rate: SpdMatrix,
}

impl GaussianHyper {
    pub fn validate(&self) -> Result<()> {
        let r = self.mean_loc.len() as f64;
        if self.mean_cov.dim() != self.mean_loc.len()
            || self.cov_scale.dim() != self.mean_loc.len()
            || self.scale_rate.dim() != self.mean_loc.len()
        {
            return Err(Error::InvalidParameter("Gaussian hyper dimensions disagree".into()));
        }
        if !(self.cov_shape > (r - 1.0) / 2.0) || !(self.scale_shape > (r - 1.0) / 2.0) {
            return Err(Error::InvalidParameter(
                "Gaussian hyper shapes must exceed (r-1)/2".into(),
            ));
        }
        Ok(())
    }
}

pub(super) fn loglik(y: &DMatrix<f64>, i: usize, g: &GaussianComponent) -> Result<f64> {
    let r = g.mu.len();
    if y.ncols() != r {
        return Err(Error::Data(format!(
            "observation dimension {} does not match component dimension {r}",
            y.ncols()
        )));
    }
    let diff = DVector::from_iterator(r, (0..r).map(|j| y[(i, j)] - g.mu[j]));
    let quad = g.sigma.inv_quadratic(&diff);
    Ok(-0.5 * (r as f64 * (2.0 * std::f64::consts::PI).ln() + g.sigma.log_det() + quad))
}

pub(super) fn draw_posterior(
    y: &DMatrix<f64>,
    assigned: &[usize],
    current: &GaussianComponent,
    h: &GaussianHyper,
    rng: &mut RandomSource,
) -> Result<Component> {
    let r = h.mean_loc.len();
    let nk = assigned.len() as f64;

    // mu | Sigma, data
    let mut ybar = DVector::zeros(r);
    for &i in assigned {
        for j in 0..r {
            ybar[j] += y[(i, j)];
        }
    }
    ybar /= nk;
    let b0_inv = h.mean_cov.inverse()?;
    let sigma_inv = current.sigma.inverse()?;
    let post_prec = b0_inv.matrix() + sigma_inv.matrix() * nk;
    let post_cov = SpdMatrix::from_nearly_symmetric(post_prec)?.inverse()?;
    let post_mean_rhs = b0_inv.matrix() * &h.mean_loc + sigma_inv.matrix() * (&ybar * nk);
    let post_mean = post_cov.matrix() * post_mean_rhs;
    let mu = draw_mvn(&post_mean, &post_cov, rng)?;

    // Sigma | mu, data
    let mut scatter: DMatrix<f64> = DMatrix::zeros(r, r);
    for &i in assigned {
        let d = DVector::from_iterator(r, (0..r).map(|j| y[(i, j)] - mu[j]));
        scatter += &d * d.transpose();
    }
    let post_scale =
        SpdMatrix::from_nearly_symmetric(h.cov_scale.matrix() + scatter * 0.5)?;
    let sigma = draw_inv_wishart(h.cov_shape + nk / 2.0, &post_scale, rng)?;

    Ok(Component::Gaussian(GaussianComponent { mu, sigma }))
}

pub(super) fn draw_prior(h: &GaussianHyper, rng: &mut RandomSource) -> Result<Component> {
    h.validate()?;
    let mu = draw_mvn(&h.mean_loc, &h.mean_cov, rng)?;
    let sigma = draw_inv_wishart(h.cov_shape, &h.cov_scale, rng)?;
    Ok(Component::Gaussian(GaussianComponent { mu, sigma }))
}

pub(super) fn update_shared_hyper(
    sigmas: &[&SpdMatrix],
    h: &GaussianHyper,
    rng: &mut RandomSource,
) -> Result<GaussianHyper> {
    let r = h.mean_loc.len();
    let mut rate = h.scale_rate.matrix().clone();
    for s in sigmas {
        if s.dim() != r {
            return Err(Error::Data("component covariance dimension mismatch".into()));
        }
        rate += s.inverse()?.matrix();
    }
    let shape = h.scale_shape + sigmas.len() as f64 * h.cov_shape;
    let cov_scale = draw_wishart(shape, &SpdMatrix::from_nearly_symmetric(rate)?, rng)?;
    Ok(GaussianHyper {
        cov_scale,
        ..h.clone()
    })
}
