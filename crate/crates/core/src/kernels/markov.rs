//! First-order time-homogeneous Markov chain kernel for categorical time
//! series. The likelihood conditions on the first state of each sequence.

use crate::distributions::draw_dirichlet;
use crate::error::{Error, Result};
use crate::rng::RandomSource;

use super::{Component, MarkovChainComponent};

/// Per-row Dirichlet prior on the transition matrix. The usual choice has
/// ones off the diagonal and a zero on the diagonal, so prior draws carry no
/// persistence; observed self-transitions can still make the posterior
/// persistence positive.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovHyper {
    pub delta: Vec<Vec<f64>>,
}

impl MarkovHyper {
    pub fn zero_diagonal(states: usize) -> Self {
        let delta = (0..states)
            .map(|j| (0..states).map(|l| if l == j { 0.0 } else { 1.0 }).collect())
            .collect();
        Self { delta }
    }

    pub fn all_ones(states: usize) -> Self {
        Self {
            delta: vec![vec![1.0; states]; states],
        }
    }
}

/// Transition counts of one or more sequences over `L` states.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionCounts {
    pub counts: Vec<Vec<u64>>,
}

impl TransitionCounts {
    pub fn zeros(states: usize) -> Self {
        Self {
            counts: vec![vec![0; states]; states],
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn add(&mut self, other: &TransitionCounts) {
        for (row, orow) in self.counts.iter_mut().zip(&other.counts) {
            for (c, oc) in row.iter_mut().zip(orow) {
                *c += oc;
            }
        }
    }
}

/// Count transitions `counts[j][l] = #{t : y_{t-1} = j, y_t = l}`.
pub fn mc_count_transitions(seq: &[usize], states: usize) -> Result<TransitionCounts> {
    if seq.len() < 2 {
        return Err(Error::Data(format!(
            "sequence of length {} has no transitions",
            seq.len()
        )));
    }
    let mut tc = TransitionCounts::zeros(states);
    for w in seq.windows(2) {
        let (j, l) = (w[0], w[1]);
        if j >= states || l >= states {
            return Err(Error::Data(format!(
                "state {} out of range (L = {states})",
                j.max(l) + 1
            )));
        }
        tc.counts[j][l] += 1;
    }
    Ok(tc)
}

pub(super) fn loglik(seq: &[usize], m: &MarkovChainComponent) -> Result<f64> {
    let states = m.xi.len();
    let tc = mc_count_transitions(seq, states)?;
    let mut ll = 0.0;
    for j in 0..states {
        for l in 0..states {
            let n = tc.counts[j][l];
            if n > 0 {
                // 0 * log 0 := 0, so only counted transitions contribute.
                ll += n as f64 * m.xi[j][l].ln();
            }
        }
    }
    Ok(ll)
}

pub(super) fn draw_posterior(
    seqs: &[Vec<usize>],
    states: usize,
    assigned: &[usize],
    h: &MarkovHyper,
    rng: &mut RandomSource,
) -> Result<Component> {
    let mut total = TransitionCounts::zeros(states);
    for &i in assigned {
        total.add(&mc_count_transitions(&seqs[i], states)?);
    }
    let xi = (0..states)
        .map(|j| {
            let alpha: Vec<f64> = (0..states)
                .map(|l| h.delta[j][l] + total.counts[j][l] as f64)
                .collect();
            draw_dirichlet(&alpha, rng)
        })
        .collect::<Result<_>>()?;
    Ok(Component::Markov(MarkovChainComponent { xi }))
}

pub(super) fn draw_prior(h: &MarkovHyper, rng: &mut RandomSource) -> Result<Component> {
    let xi = h
        .delta
        .iter()
        .map(|row| draw_dirichlet(row, rng))
        .collect::<Result<_>>()?;
    Ok(Component::Markov(MarkovChainComponent { xi }))
}
