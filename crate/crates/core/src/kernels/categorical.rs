//! Categorical (latent class) kernel: conditionally independent features,
//! one occurrence-probability simplex per feature.

use crate::distributions::draw_dirichlet;
use crate::error::{Error, Result};
use crate::rng::RandomSource;

use super::{CategoricalComponent, Component};

/// Per-feature Dirichlet prior pseudo-counts for the occurrence
/// probabilities; all ones by default.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoricalHyper {
    pub prior: Vec<Vec<f64>>,
}

impl CategoricalHyper {
    pub fn all_ones(cats: &[usize]) -> Self {
        Self {
            prior: cats.iter().map(|&d| vec![1.0; d]).collect(),
        }
    }
}

pub(super) fn loglik(row: &[usize], c: &CategoricalComponent) -> Result<f64> {
    if row.len() != c.pi.len() {
        return Err(Error::Data(format!(
            "observation has {} features, component has {}",
            row.len(),
            c.pi.len()
        )));
    }
    let mut ll = 0.0;
    for (j, &l) in row.iter().enumerate() {
        let p = *c.pi[j]
            .get(l)
            .ok_or_else(|| Error::Data(format!("category {} out of range in feature {j}", l + 1)))?;
        ll += p.ln();
    }
    Ok(ll)
}

pub(super) fn draw_posterior(
    rows: &[Vec<usize>],
    cats: &[usize],
    assigned: &[usize],
    h: &CategoricalHyper,
    rng: &mut RandomSource,
) -> Result<Component> {
    let mut pi = Vec::with_capacity(cats.len());
    for (j, &d) in cats.iter().enumerate() {
        let mut alpha = h.prior[j].clone();
        if alpha.len() != d {
            return Err(Error::Config(format!(
                "prior for feature {j} has {} entries, expected {d}",
                alpha.len()
            )));
        }
        for &i in assigned {
            alpha[rows[i][j]] += 1.0;
        }
        pi.push(draw_dirichlet(&alpha, rng)?);
    }
    Ok(Component::Categorical(CategoricalComponent { pi }))
}

pub(super) fn draw_prior(h: &CategoricalHyper, rng: &mut RandomSource) -> Result<Component> {
    let pi = h
        .prior
        .iter()
        .map(|alpha| draw_dirichlet(alpha, rng))
        .collect::<Result<_>>()?;
    Ok(Component::Categorical(CategoricalComponent { pi }))
}
