//! Getting-it-right checks: for each kernel, compare moments of test
//! functions under two schemes that must agree if the Gibbs sweep targets
//! the model it claims to:
//!
//! - marginal-conditional: independent draws of (parameters, data) straight
//!   from the prior and the likelihood;
//! - successive-conditional: a single chain alternating one full Gibbs sweep
//!   of parameters | data with a fresh draw of data | parameters.
//!
//! Means are compared by z-score with the marginal scheme's iid standard
//! error and a batch-means standard error for the dependent chain.

use nalgebra::{DMatrix, DVector};

use clips_core::data::Dataset;
use clips_core::distributions::{draw_categorical, draw_dirichlet, draw_mvn, draw_wishart};
use clips_core::kernels::{
    kernel_draw_prior, CategoricalHyper, Component, GaussianHyper, Hyper, MarkovHyper,
};
use clips_core::rng::RandomSource;
use clips_core::sampler::{step_classify, step_components, step_weights, ChainState};
use clips_core::spd::SpdMatrix;

const N: usize = 10;
const K: usize = 2;
const GAMMA_K: f64 = 1.0;
const REPS: usize = 10_000;
const BATCHES: usize = 100;
pub const Z_LIMIT: f64 = 4.0;

/// Draw a full prior state: shared hyperparameters (where hierarchical),
/// weights, and K component parameter draws.
fn draw_prior_state(base: &Hyper, rng: &mut RandomSource) -> ChainState {
    let zeta = match base {
        Hyper::Gaussian(g) => {
            // The hierarchical level: C0 ~ W(g0, G0).
            let c0 = draw_wishart(g.scale_shape, &g.scale_rate, rng).unwrap();
            let mut g2 = g.clone();
            g2.cov_scale = c0;
            Hyper::Gaussian(g2)
        }
        other => other.clone(),
    };
    let eta = draw_dirichlet(&vec![GAMMA_K; K], rng).unwrap();
    let theta: Vec<Component> = (0..K)
        .map(|_| kernel_draw_prior(&zeta, rng).unwrap())
        .collect();
    let mut state = ChainState {
        k: K,
        eta,
        theta,
        zeta,
        s: vec![0; N],
        nk: vec![0; K],
        init_fallback: false,
    };
    draw_data(&mut state, rng);
    state
}

/// Redraw allocations and observations from the current parameters, and
/// return the dataset. Markov sequences use a uniform initial state, which
/// the transition likelihood conditions on.
fn draw_data(state: &mut ChainState, rng: &mut RandomSource) -> Dataset {
    for i in 0..N {
        state.s[i] = draw_categorical(&state.eta, rng).unwrap();
    }
    let mut nk = vec![0usize; K];
    for &si in &state.s {
        nk[si] += 1;
    }
    state.nk = nk;
    match &state.theta[0] {
        Component::Gaussian(_) => {
            let r = match &state.theta[0] {
                Component::Gaussian(g) => g.mu.len(),
                _ => unreachable!(),
            };
            let mut y = DMatrix::zeros(N, r);
            for i in 0..N {
                if let Component::Gaussian(g) = &state.theta[state.s[i]] {
                    let x = draw_mvn(&g.mu, &g.sigma, rng).unwrap();
                    for j in 0..r {
                        y[(i, j)] = x[j];
                    }
                }
            }
            Dataset::Real(y)
        }
        Component::Categorical(c0) => {
            let cats: Vec<usize> = c0.pi.iter().map(|p| p.len()).collect();
            let rows = (0..N)
                .map(|i| {
                    if let Component::Categorical(c) = &state.theta[state.s[i]] {
                        c.pi.iter()
                            .map(|p| draw_categorical(p, rng).unwrap())
                            .collect()
                    } else {
                        unreachable!()
                    }
                })
                .collect();
            Dataset::Categorical { rows, cats }
        }
        Component::Markov(m0) => {
            let l = m0.xi.len();
            let uniform = vec![1.0 / l as f64; l];
            let seqs = (0..N)
                .map(|i| {
                    if let Component::Markov(m) = &state.theta[state.s[i]] {
                        let mut seq = Vec::with_capacity(6);
                        let mut cur = draw_categorical(&uniform, rng).unwrap();
                        seq.push(cur);
                        for _ in 1..6 {
                            cur = draw_categorical(&m.xi[cur], rng).unwrap();
                            seq.push(cur);
                        }
                        seq
                    } else {
                        unreachable!()
                    }
                })
                .collect();
            Dataset::Sequences { seqs, states: l }
        }
    }
}

/// One full Gibbs sweep of the fixed-K sampler.
fn gibbs_sweep(state: &mut ChainState, data: &Dataset, rng: &mut RandomSource) {
    step_classify(state, data, rng).unwrap();
    step_weights(state, GAMMA_K, rng).unwrap();
    step_components(state, data, true, rng).unwrap();
}

/// Mean and iid standard error.
fn mean_se_iid(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Mean and batch-means standard error for a dependent sequence.
fn mean_se_batch(xs: &[f64]) -> (f64, f64) {
    let b = xs.len() / BATCHES;
    let means: Vec<f64> = (0..BATCHES)
        .map(|i| xs[i * b..(i + 1) * b].iter().sum::<f64>() / b as f64)
        .collect();
    let grand = means.iter().sum::<f64>() / BATCHES as f64;
    let var = means
        .iter()
        .map(|m| (m - grand).powi(2))
        .sum::<f64>()
        / (BATCHES as f64 - 1.0);
    (grand, (var / BATCHES as f64).sqrt())
}

pub fn run_geweke(
    base: &Hyper,
    funcs: &[(&str, fn(&ChainState) -> f64)],
    seed: u64,
) -> Vec<(String, f64)> {
    // Marginal-conditional: independent prior replications.
    let mut rng = RandomSource::new(seed);
    let mut mc: Vec<Vec<f64>> = vec![Vec::with_capacity(REPS); funcs.len()];
    for _ in 0..REPS {
        let state = draw_prior_state(base, &mut rng);
        for (j, (_, f)) in funcs.iter().enumerate() {
            mc[j].push(f(&state));
        }
    }

    // Successive-conditional: one long alternating chain.
    let mut rng = RandomSource::new(seed.wrapping_add(1));
    let mut state = draw_prior_state(base, &mut rng);
    let mut data = draw_data(&mut state, &mut rng);
    let mut sc: Vec<Vec<f64>> = vec![Vec::with_capacity(REPS); funcs.len()];
    for _ in 0..REPS {
        gibbs_sweep(&mut state, &data, &mut rng);
        data = draw_data(&mut state, &mut rng);
        for (j, (_, f)) in funcs.iter().enumerate() {
            sc[j].push(f(&state));
        }
    }

    funcs
        .iter()
        .enumerate()
        .map(|(j, (name, _))| {
            let (m1, s1) = mean_se_iid(&mc[j]);
            let (m2, s2) = mean_se_batch(&sc[j]);
            let z = (m1 - m2) / (s1 * s1 + s2 * s2).sqrt();
            println!(
                "geweke {name}: marginal {m1:.4} (se {s1:.4}) vs successive {m2:.4} (se {s2:.4}) z = {z:.2}"
            );
            (name.to_string(), z)
        })
        .collect()
}

/// Run the getting-it-right comparison for one kernel and return the
/// (test function, z-score) pairs.
pub fn geweke_case(kernel: &str) -> Vec<(String, f64)> {
    match kernel {
        "gaussian" => {
            let hyper = Hyper::Gaussian(GaussianHyper {
                mean_loc: DVector::zeros(1),
                mean_cov: SpdMatrix::scaled_identity(1, 1.0).unwrap(),
                cov_shape: 4.0,
                cov_scale: SpdMatrix::scaled_identity(1, 3.0).unwrap(),
                scale_shape: 3.0,
                scale_rate: SpdMatrix::scaled_identity(1, 3.0).unwrap(),
            });
            let funcs: Vec<(&str, fn(&ChainState) -> f64)> = vec![
                ("gaussian mu", gauss_mu),
                ("gaussian mu^2", gauss_mu_sq),
                ("gaussian sigma", gauss_sigma),
                ("gaussian log sigma", gauss_log_sigma),
                ("gaussian C0", gauss_c0),
                ("gaussian eta1", eta1),
                ("gaussian eta1^2", eta1_sq),
                ("gaussian N1/N", n1_frac),
            ];
            run_geweke(&hyper, &funcs, 90)
        }
        "categorical" => {
            let hyper = Hyper::Categorical(CategoricalHyper::all_ones(&[3, 2]));
            let funcs: Vec<(&str, fn(&ChainState) -> f64)> = vec![
                ("categorical pi", cat_pi),
                ("categorical pi^2", cat_pi_sq),
                ("categorical pi cross", cat_pi_cross),
                ("categorical eta1", eta1),
                ("categorical N1/N", n1_frac),
            ];
            run_geweke(&hyper, &funcs, 91)
        }
        "markov" => {
            let hyper = Hyper::Markov(MarkovHyper::all_ones(2));
            let funcs: Vec<(&str, fn(&ChainState) -> f64)> = vec![
                ("markov xi11", markov_xi),
                ("markov xi11^2", markov_xi_sq),
                ("markov xi21", markov_xi_off),
                ("markov eta1", eta1),
                ("markov N1/N", n1_frac),
            ];
            run_geweke(&hyper, &funcs, 92)
        }
        other => panic!("unknown kernel {other}"),
    }
}

pub fn assert_geweke(kernel: &str) {
    let zs = geweke_case(kernel);
    let failures: Vec<String> = zs
        .iter()
        .filter(|(_, z)| z.abs() >= Z_LIMIT)
        .map(|(name, z)| format!("{name}: z = {z:.2}"))
        .collect();
    assert!(failures.is_empty(), "geweke failures: {failures:?}");
}

fn gauss_mu(state: &ChainState) -> f64 {
    match &state.theta[0] {
        Component::Gaussian(g) => g.mu[0],
        _ => unreachable!(),
    }
}
fn gauss_mu_sq(state: &ChainState) -> f64 {
    gauss_mu(state).powi(2)
}
fn gauss_sigma(state: &ChainState) -> f64 {
    match &state.theta[0] {
        Component::Gaussian(g) => g.sigma.matrix()[(0, 0)],
        _ => unreachable!(),
    }
}
fn gauss_log_sigma(state: &ChainState) -> f64 {
    gauss_sigma(state).ln()
}
fn gauss_c0(state: &ChainState) -> f64 {
    match &state.zeta {
        Hyper::Gaussian(g) => g.cov_scale.matrix()[(0, 0)],
        _ => unreachable!(),
    }
}
fn eta1(state: &ChainState) -> f64 {
    state.eta[0]
}
fn eta1_sq(state: &ChainState) -> f64 {
    state.eta[0].powi(2)
}
fn n1_frac(state: &ChainState) -> f64 {
    state.nk[0] as f64 / N as f64
}
fn cat_pi(state: &ChainState) -> f64 {
    match &state.theta[0] {
        Component::Categorical(c) => c.pi[0][0],
        _ => unreachable!(),
    }
}
fn cat_pi_sq(state: &ChainState) -> f64 {
    cat_pi(state).powi(2)
}
fn cat_pi_cross(state: &ChainState) -> f64 {
    match &state.theta[0] {
        Component::Categorical(c) => c.pi[0][0] * c.pi[1][0],
        _ => unreachable!(),
    }
}
fn markov_xi(state: &ChainState) -> f64 {
    match &state.theta[0] {
        Component::Markov(m) => m.xi[0][0],
        _ => unreachable!(),
    }
}
fn markov_xi_sq(state: &ChainState) -> f64 {
    markov_xi(state).powi(2)
}
fn markov_xi_off(state: &ChainState) -> f64 {
    match &state.theta[0] {
        Component::Markov(m) => m.xi[1][0],
        _ => unreachable!(),
    }
}

