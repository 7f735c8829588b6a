//! Built-in data generators for the bundled studies: a four-component
//! six-dimensional Gaussian design, a univariate three-component mixture,
//! latent-class data from an occurrence-probability table, and mixtures of
//! Markov chains.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde_json::json;

use crate::data::Dataset;
use crate::distributions::{draw_categorical, draw_mvn};
use crate::error::{Error, Result};
use crate::rng::RandomSource;
use crate::spd::SpdMatrix;

/// Component means of the four-group Gaussian design, one column per
/// component (r = 6 features).
pub const EXAMPLE1_MEANS: [[f64; 4]; 6] = [
    [-2.0, -2.0, -2.0, 2.0],
    [-3.0, 3.0, -3.0, 3.0],
    [4.0, 4.0, 4.0, 4.0],
    [0.0, 0.0, 0.0, 0.0],
    [2.0, 2.0, 0.0, 2.0],
    [2.0, 0.0, 0.0, 2.0],
];
pub const EXAMPLE1_SIGMA: f64 = 0.6;

/// Univariate three-component benchmark: 0.3 N(-3,1) + 0.5 N(0,0.5) + 0.2 N(2,0.8)
/// (variances).
pub const FIGURE1_WEIGHTS: [f64; 3] = [0.3, 0.5, 0.2];
pub const FIGURE1_MEANS: [f64; 3] = [-3.0, 0.0, 2.0];
pub const FIGURE1_VARS: [f64; 3] = [1.0, 0.5, 0.8];

#[derive(Debug, Clone, PartialEq)]
pub enum GeneratorSpec {
    /// K=4, r=6 Gaussian design with Sigma_k = 0.6 I_6 and equal weights.
    Example1,
    /// The univariate three-component mixture above.
    Figure1,
    /// Latent-class data: `pi[k][j]` is the category simplex of feature j in
    /// component k.
    Lca {
        pi: Vec<Vec<Vec<f64>>>,
        weights: Vec<f64>,
    },
    /// Mixture of first-order Markov chains with uniform initial states;
    /// sequence lengths drawn uniformly from `lengths`.
    Markov {
        xi: Vec<Vec<Vec<f64>>>,
        weights: Vec<f64>,
        lengths: Vec<usize>,
    },
}

fn validate_weights(weights: &[f64]) -> Result<()> {
    if weights.is_empty() || weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
        return Err(Error::Config("generator weights must be nonnegative".into()));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > 1e-8 {
        return Err(Error::Config(format!("generator weights sum to {sum}, expected 1")));
    }
    Ok(())
}

fn validate_simplex_table(table: &[Vec<Vec<f64>>], what: &str) -> Result<()> {
    for (k, comp) in table.iter().enumerate() {
        for (j, row) in comp.iter().enumerate() {
            if row.len() < 2 {
                return Err(Error::Config(format!("{what}: component {k} row {j} too short")));
            }
            let sum: f64 = row.iter().sum();
            if row.iter().any(|&p| !(0.0..=1.0).contains(&p)) || (sum - 1.0).abs() > 1e-8 {
                return Err(Error::Config(format!(
                    "{what}: component {k} row {j} is not a probability vector"
                )));
            }
        }
    }
    Ok(())
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            GeneratorSpec::Example1 | GeneratorSpec::Figure1 => Ok(()),
            GeneratorSpec::Lca { pi, weights } => {
                validate_weights(weights)?;
                if pi.len() != weights.len() || pi.is_empty() {
                    return Err(Error::Config("lca: one probability table per weight required".into()));
                }
                let shape: Vec<usize> = pi[0].iter().map(|r| r.len()).collect();
                if pi.iter().any(|c| c.iter().map(|r| r.len()).collect::<Vec<_>>() != shape) {
                    return Err(Error::Config("lca: feature shapes differ across components".into()));
                }
                validate_simplex_table(pi, "lca")
            }
            GeneratorSpec::Markov { xi, weights, lengths } => {
                validate_weights(weights)?;
                if xi.len() != weights.len() || xi.is_empty() {
                    return Err(Error::Config("markov: one transition matrix per weight required".into()));
                }
                let l = xi[0].len();
                if l < 2 || xi.iter().any(|m| m.len() != l || m.iter().any(|r| r.len() != l)) {
                    return Err(Error::Config("markov: transition matrices must be square and agree".into()));
                }
                validate_simplex_table(xi, "markov")?;
                if lengths.is_empty() || lengths.iter().any(|&t| t < 2) {
                    return Err(Error::Config("markov: sequence lengths must be >= 2".into()));
                }
                Ok(())
            }
        }
    }

    fn weights(&self) -> Vec<f64> {
        match self {
            GeneratorSpec::Example1 => vec![0.25; 4],
            GeneratorSpec::Figure1 => FIGURE1_WEIGHTS.to_vec(),
            GeneratorSpec::Lca { weights, .. } | GeneratorSpec::Markov { weights, .. } => {
                weights.clone()
            }
        }
    }
}

/// Generated data together with the true zero-based allocations.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulated {
    pub data: Dataset,
    pub allocations: Vec<usize>,
}

pub fn simulate(spec: &GeneratorSpec, n: usize, rng: &mut RandomSource) -> Result<Simulated> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::Data("cannot simulate an empty dataset".into()));
    }
    let weights = spec.weights();
    let allocations: Vec<usize> = (0..n)
        .map(|_| draw_categorical(&weights, rng))
        .collect::<Result<_>>()?;
    let data = match spec {
        GeneratorSpec::Example1 => {
            let cov = SpdMatrix::scaled_identity(6, EXAMPLE1_SIGMA)?;
            let means: Vec<DVector<f64>> = (0..4)
                .map(|k| DVector::from_iterator(6, (0..6).map(|j| EXAMPLE1_MEANS[j][k])))
                .collect();
            let mut y = DMatrix::zeros(n, 6);
            for (i, &k) in allocations.iter().enumerate() {
                let x = draw_mvn(&means[k], &cov, rng)?;
                for j in 0..6 {
                    y[(i, j)] = x[j];
                }
            }
            Dataset::Real(y)
        }
        GeneratorSpec::Figure1 => {
            let mut y = DMatrix::zeros(n, 1);
            for (i, &k) in allocations.iter().enumerate() {
                let z: f64 = rng.sample(rand_distr::StandardNormal);
                y[(i, 0)] = FIGURE1_MEANS[k] + FIGURE1_VARS[k].sqrt() * z;
            }
            Dataset::Real(y)
        }
        GeneratorSpec::Lca { pi, .. } => {
            let cats: Vec<usize> = pi[0].iter().map(|r| r.len()).collect();
            let rows = allocations
                .iter()
                .map(|&k| {
                    pi[k].iter()
                        .map(|probs| draw_categorical(probs, rng))
                        .collect::<Result<Vec<usize>>>()
                })
                .collect::<Result<_>>()?;
            Dataset::Categorical { rows, cats }
        }
        GeneratorSpec::Markov { xi, lengths, .. } => {
            let states = xi[0].len();
            let uniform = vec![1.0 / states as f64; states];
            let seqs = allocations
                .iter()
                .map(|&k| {
                    let t = lengths[rng.random_range(0..lengths.len())];
                    let mut seq = Vec::with_capacity(t);
                    let mut cur = draw_categorical(&uniform, rng)?;
                    seq.push(cur);
                    for _ in 1..t {
                        cur = draw_categorical(&xi[k][cur], rng)?;
                        seq.push(cur);
                    }
                    Ok(seq)
                })
                .collect::<Result<_>>()?;
            Dataset::Sequences { seqs, states }
        }
    };
    data.validate()?;
    Ok(Simulated { data, allocations })
}

/// JSON truth file: generating weights and parameters plus one-based true
/// allocations.
pub fn truth_json(spec: &GeneratorSpec, sim: &Simulated) -> Result<String> {
    let alloc_1based: Vec<usize> = sim.allocations.iter().map(|&k| k + 1).collect();
    let params = match spec {
        GeneratorSpec::Example1 => json!({
            "kernel": "gaussian",
            "means_by_component": (0..4)
                .map(|k| (0..6).map(|j| EXAMPLE1_MEANS[j][k]).collect::<Vec<f64>>())
                .collect::<Vec<_>>(),
            "sigma_diagonal": EXAMPLE1_SIGMA,
        }),
        GeneratorSpec::Figure1 => json!({
            "kernel": "gaussian",
            "means": FIGURE1_MEANS,
            "variances": FIGURE1_VARS,
        }),
        GeneratorSpec::Lca { pi, .. } => json!({ "kernel": "categorical", "pi": pi }),
        GeneratorSpec::Markov { xi, lengths, .. } => json!({
            "kernel": "markov",
            "xi": xi,
            "lengths": lengths,
        }),
    };
    let doc = json!({
        "weights": spec.weights(),
        "params": params,
        "allocations": alloc_1based,
    });
    Ok(serde_json::to_string_pretty(&doc)?)
}

/// Read one-based allocations back from a truth file.
pub fn truth_allocations(text: &str) -> Result<Vec<usize>> {
    let doc: serde_json::Value = serde_json::from_str(text)?;
    let arr = doc
        .get("allocations")
        .and_then(|v| v.as_array())
        .ok_or_else(|| Error::Data("truth file lacks an allocations array".into()))?;
    arr.iter()
        .map(|v| {
            let u = v
                .as_u64()
                .ok_or_else(|| Error::Data("non-integer allocation in truth file".into()))?;
            if u == 0 {
                return Err(Error::Data("truth allocations are one-based".into()));
            }
            Ok(u as usize - 1)
        })
        .collect()
}
