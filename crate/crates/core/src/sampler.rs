//! MCMC engines: fixed-K Gibbs with data augmentation, the telescoping
//! sampler (prior on K), and the sparse finite mixture mode (large fixed K
//! with a small Dirichlet weight parameter).
//!
//! Sweep order: classify -> weights -> components/hyper, then in telescoping
//! mode sample K, compact to the filled components, append prior-drawn
//! empties, and redraw the weights at the new K so the next classification
//! sees a consistent state. In the fixed-K modes, empty components are
//! redrawn from the prior after the shared-hyper update (a partially
//! collapsed step: the hyper conditional marginalizes the empty components,
//! which are then regenerated from the updated prior).

use nalgebra::DMatrix;
use statrs::function::gamma::ln_gamma;

use crate::data::Dataset;
use crate::distributions::{bnb_log_pmf, draw_categorical, draw_dirichlet};
use crate::error::{Error, Result};
use crate::kernels::{
    self, mc_count_transitions, CategoricalComponent, Component, GaussianComponent, Hyper,
    MarkovChainComponent,
};
use crate::kmeans::{kmeans_fit, PointSet};
use crate::rng::RandomSource;
use crate::spd::SpdMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    Gaussian,
    Categorical,
    Markov,
}

/// How the number of components is treated.
#[derive(Debug, Clone, PartialEq)]
pub enum KMode {
    /// Classic finite mixture with K fixed.
    Fixed(usize),
    /// Mixture of finite mixtures: K - 1 follows a beta-negative-binomial
    /// prior and is sampled by the telescoping scheme.
    Bnb { a: f64, b: f64, c: f64 },
    /// Overfitting sparse finite mixture: K fixed and large, weights shrunk
    /// by a small Dirichlet parameter so redundant components empty out.
    FixedSparse(usize),
}

/// Dirichlet weight parameter rule: a fixed per-component value, or the
/// dynamic rule gamma / K that shrinks as K grows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaRule {
    Static(f64),
    Dynamic(f64),
}

impl GammaRule {
    pub fn gamma_k(&self, k: usize) -> f64 {
        match *self {
            GammaRule::Static(g) => g,
            GammaRule::Dynamic(g) => g / k as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitMethod {
    KMeans,
    Random,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureConfig {
    pub kernel: KernelKind,
    pub k_mode: KMode,
    pub gamma_rule: GammaRule,
    pub hyper: Hyper,
    /// Burn-in sweeps.
    pub burnin: usize,
    /// Recorded draws.
    pub draws: usize,
    /// Thinning factor (>= 1): every `thin`-th post-burn-in sweep is kept.
    pub thin: usize,
    pub seed: u64,
    pub init: InitMethod,
    /// Initial component count; must equal K for the fixed modes.
    pub k_init: usize,
    /// Restarts for the k-means initialization.
    pub init_restarts: usize,
}

impl MixtureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.burnin < 1 || self.draws < 1 {
            return Err(Error::Config("burnin and draws must be >= 1".into()));
        }
        if self.thin < 1 {
            return Err(Error::Config("thinning factor must be >= 1".into()));
        }
        match self.gamma_rule {
            GammaRule::Static(g) | GammaRule::Dynamic(g) if !(g > 0.0) => {
                return Err(Error::Config("Dirichlet weight parameter must be > 0".into()));
            }
            _ => {}
        }
        match self.k_mode {
            KMode::Fixed(k) | KMode::FixedSparse(k) => {
                if k == 0 {
                    return Err(Error::Config("K must be >= 1".into()));
                }
                if self.k_init != k {
                    return Err(Error::Config("k_init must equal K in fixed modes".into()));
                }
            }
            KMode::Bnb { a, b, c } => {
                if !(a > 0.0 && b > 0.0 && c > 0.0) {
                    return Err(Error::Config("BNB parameters must be positive".into()));
                }
                if self.k_init == 0 {
                    return Err(Error::Config("k_init must be >= 1".into()));
                }
            }
        }
        Ok(())
    }

    fn is_telescoping(&self) -> bool {
        matches!(self.k_mode, KMode::Bnb { .. })
    }
}

/// Current state of one chain.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub k: usize,
    pub eta: Vec<f64>,
    pub theta: Vec<Component>,
    pub zeta: Hyper,
    /// Zero-based allocations, length N.
    pub s: Vec<usize>,
    pub nk: Vec<usize>,
    /// Set when k-means initialization fell back to random allocation.
    pub init_fallback: bool,
}

impl ChainState {
    pub fn k_plus(&self) -> usize {
        self.nk.iter().filter(|&&n| n > 0).count()
    }

    fn assigned(&self, k: usize) -> Vec<usize> {
        self.s
            .iter()
            .enumerate()
            .filter_map(|(i, &si)| (si == k).then_some(i))
            .collect()
    }

    fn recount(&mut self) {
        self.nk = vec![0; self.k];
        for &si in &self.s {
            self.nk[si] += 1;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DrawRecord {
    /// Global sweep index (1-based, burn-in included).
    pub m: usize,
    pub k: usize,
    pub k_plus: usize,
    pub eta: Vec<f64>,
    pub theta: Vec<Component>,
    /// Zero-based allocations (serialized 1-based).
    pub s: Vec<usize>,
}

/// Everything CliPS needs: the config snapshot plus the recorded draws.
#[derive(Debug, Clone, PartialEq)]
pub struct DrawStore {
    pub config: MixtureConfig,
    pub records: Vec<DrawRecord>,
}

/// Embed observations as points for the k-means initialization: raw vectors,
/// one-hot encodings, or per-sequence empirical transition frequencies.
pub fn embed_for_init(data: &Dataset) -> Result<PointSet> {
    match data {
        Dataset::Real(m) => PointSet::new(m.clone()),
        Dataset::Categorical { rows, cats } => {
            let d: usize = cats.iter().sum();
            let mut coords: DMatrix<f64> = DMatrix::zeros(rows.len(), d);
            for (i, row) in rows.iter().enumerate() {
                let mut offset = 0;
                for (j, &v) in row.iter().enumerate() {
                    coords[(i, offset + v)] = 1.0;
                    offset += cats[j];
                }
            }
            PointSet::new(coords)
        }
        Dataset::Sequences { seqs, states } => {
            let l = *states;
            let mut coords: DMatrix<f64> = DMatrix::zeros(seqs.len(), l * l);
            for (i, seq) in seqs.iter().enumerate() {
                let tc = mc_count_transitions(seq, l)?;
                for j in 0..l {
                    let row_total: u64 = tc.counts[j].iter().sum();
                    if row_total > 0 {
                        for m in 0..l {
                            coords[(i, j * l + m)] = tc.counts[j][m] as f64 / row_total as f64;
                        }
                    }
                }
            }
            PointSet::new(coords)
        }
    }
}

fn empirical_gaussian(y: &DMatrix<f64>, idx: &[usize]) -> Result<Component> {
    let r = y.ncols();
    let n = idx.len().max(1) as f64;
    let mut mu = nalgebra::DVector::zeros(r);
    for &i in idx {
        for j in 0..r {
            mu[j] += y[(i, j)];
        }
    }
    mu /= n;
    let mut cov: DMatrix<f64> = DMatrix::zeros(r, r);
    for &i in idx {
        let d = nalgebra::DVector::from_iterator(r, (0..r).map(|j| y[(i, j)] - mu[j]));
        cov += &d * d.transpose();
    }
    cov /= n;
    // Regularize degenerate empirical covariances with the overall data
    // variance.
    for j in 0..r {
        let col_mean = y.column(j).mean();
        let col_var = y.column(j).iter().map(|v| (v - col_mean).powi(2)).sum::<f64>()
            / y.nrows() as f64;
        cov[(j, j)] += 1e-6 * col_var.max(1e-12);
    }
    Ok(Component::Gaussian(GaussianComponent {
        mu,
        sigma: SpdMatrix::from_nearly_symmetric(cov)?,
    }))
}

fn empirical_categorical(rows: &[Vec<usize>], cats: &[usize], idx: &[usize]) -> Component {
    let pi = cats
        .iter()
        .enumerate()
        .map(|(j, &d)| {
            let mut counts = vec![1.0; d]; // add-one smoothing
            for &i in idx {
                counts[rows[i][j]] += 1.0;
            }
            let total: f64 = counts.iter().sum();
            counts.into_iter().map(|c| c / total).collect()
        })
        .collect();
    Component::Categorical(CategoricalComponent { pi })
}

fn empirical_markov(seqs: &[Vec<usize>], states: usize, idx: &[usize]) -> Result<Component> {
    let mut total = kernels::TransitionCounts::zeros(states);
    for &i in idx {
        total.add(&mc_count_transitions(&seqs[i], states)?);
    }
    let xi = (0..states)
        .map(|j| {
            let row: Vec<f64> = (0..states).map(|l| total.counts[j][l] as f64 + 1.0).collect();
            let sum: f64 = row.iter().sum();
            row.into_iter().map(|c| c / sum).collect()
        })
        .collect();
    Ok(Component::Markov(MarkovChainComponent { xi }))
}

fn empirical_component(data: &Dataset, idx: &[usize]) -> Result<Component> {
    match data {
        Dataset::Real(y) => empirical_gaussian(y, idx),
        Dataset::Categorical { rows, cats } => Ok(empirical_categorical(rows, cats, idx)),
        Dataset::Sequences { seqs, states } => empirical_markov(seqs, *states, idx),
    }
}

/// Initialize the chain: k-means allocations (or random), group-specific
/// empirical component parameters, equal weights.
pub fn init_chain(data: &Dataset, config: &MixtureConfig, rng: &mut RandomSource) -> Result<ChainState> {
    config.validate()?;
    data.validate()?;
    let n = data.n();
    let k = config.k_init;
    let mut init_fallback = false;

    let s: Vec<usize> = if config.init == InitMethod::KMeans && n >= k {
        let points = embed_for_init(data)?;
        let fit = kmeans_fit(&points, k, config.init_restarts.max(1), 100, rng)?;
        fit.labels
    } else {
        if config.init == InitMethod::KMeans {
            init_fallback = true;
        }
        (0..n).map(|i| i % k).collect()
    };

    let mut state = ChainState {
        k,
        eta: vec![1.0 / k as f64; k],
        theta: Vec::with_capacity(k),
        zeta: config.hyper.clone(),
        s,
        nk: vec![0; k],
        init_fallback,
    };
    state.recount();
    for comp in 0..k {
        let idx = state.assigned(comp);
        let theta = if idx.is_empty() {
            kernels::kernel_draw_prior(&state.zeta, rng)?
        } else {
            empirical_component(data, &idx)?
        };
        state.theta.push(theta);
    }
    Ok(state)
}

/// Draw each allocation from the posterior classification weights,
/// log-space with max subtraction.
pub fn step_classify(state: &mut ChainState, data: &Dataset, rng: &mut RandomSource) -> Result<()> {
    let k = state.k;
    let mut logw = vec![0.0f64; k];
    for i in 0..data.n() {
        let mut max = f64::NEG_INFINITY;
        for c in 0..k {
            logw[c] = if state.eta[c] > 0.0 {
                state.eta[c].ln() + kernels::kernel_loglik(data, i, &state.theta[c])?
            } else {
                f64::NEG_INFINITY
            };
            if logw[c] > max {
                max = logw[c];
            }
        }
        if !max.is_finite() {
            return Err(Error::Numerical(format!(
                "all classification weights vanished for observation {i}"
            )));
        }
        let w: Vec<f64> = logw.iter().map(|&lw| (lw - max).exp()).collect();
        state.s[i] = draw_categorical(&w, rng)?;
    }
    state.recount();
    Ok(())
}

/// Resample the weights from their Dirichlet conditional, empty components
/// included.
pub fn step_weights(state: &mut ChainState, gamma_k: f64, rng: &mut RandomSource) -> Result<()> {
    let alpha: Vec<f64> = state.nk.iter().map(|&n| gamma_k + n as f64).collect();
    state.eta = draw_dirichlet(&alpha, rng)?;
    Ok(())
}

/// Update filled components from their conditional posteriors, then the
/// shared hyperparameters from the filled components. In the fixed-K modes,
/// empty components are then redrawn from the (updated) prior; in
/// telescoping mode they are left for `step_add_empty`.
pub fn step_components(
    state: &mut ChainState,
    data: &Dataset,
    redraw_empties: bool,
    rng: &mut RandomSource,
) -> Result<()> {
    for c in 0..state.k {
        if state.nk[c] > 0 {
            let idx = state.assigned(c);
            state.theta[c] =
                kernels::kernel_draw_posterior(data, &idx, &state.theta[c], &state.zeta, rng)?;
        }
    }
    let filled: Vec<&Component> = (0..state.k)
        .filter(|&c| state.nk[c] > 0)
        .map(|c| &state.theta[c])
        .collect();
    state.zeta = kernels::kernel_update_shared_hyper(&filled, &state.zeta, rng)?;
    if redraw_empties {
        for c in 0..state.k {
            if state.nk[c] == 0 {
                state.theta[c] = kernels::kernel_draw_prior(&state.zeta, rng)?;
            }
        }
    }
    Ok(())
}

/// Prior on K used by the telescoping K step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PriorOnK {
    /// K - 1 ~ BNB(a, b, c).
    Bnb { a: f64, b: f64, c: f64 },
    /// Point mass (useful for testing the conditional).
    PointMass(usize),
}

impl PriorOnK {
    fn log_pmf(&self, k: usize) -> Result<f64> {
        match *self {
            PriorOnK::Bnb { a, b, c } => bnb_log_pmf((k - 1) as u64, a, b, c),
            PriorOnK::PointMass(k0) => Ok(if k == k0 { 0.0 } else { f64::NEG_INFINITY }),
        }
    }
}

const K_TRUNCATION_LIMIT: usize = 1_000_000;

/// Unnormalized log conditional of K given the filled cluster sizes:
/// `K!/(K-K+)! * Gamma(K g_K)/Gamma(K g_K + N) * prod_k Gamma(N_k + g_K)/Gamma(g_K) * p(K)`.
///
/// The product term is the Dirichlet-multinomial partition probability
/// (EPPF) factor. Written with `Gamma(1 + g_K)` in the denominator it would
/// differ by `g_K^{K+}`, which is constant under a static weight parameter
/// but makes the conditional non-normalizable under the dynamic rule
/// `g_K = g / K` once K+ is large enough; the `Gamma(g_K)` form is proper
/// in both regimes and identical in the static one.
fn log_k_conditional(k: usize, filled_nk: &[usize], gamma_rule: GammaRule, prior: PriorOnK) -> Result<f64> {
    let k_plus = filled_nk.len();
    let n: usize = filled_nk.iter().sum();
    let g = gamma_rule.gamma_k(k);
    let kf = k as f64;
    let mut lp = ln_gamma(kf + 1.0) - ln_gamma(kf - k_plus as f64 + 1.0);
    lp += ln_gamma(kf * g) - ln_gamma(kf * g + n as f64);
    for &nk in filled_nk {
        lp += ln_gamma(nk as f64 + g) - ln_gamma(g);
    }
    Ok(lp + prior.log_pmf(k)?)
}

/// Sample K from its conditional over {K+, K+ + 1, ...}, truncated
/// adaptively once an upper bound on the remaining tail mass falls below
/// 1e-10 of the accumulated mass.
pub fn step_sample_k(
    filled_nk: &[usize],
    prior: PriorOnK,
    gamma_rule: GammaRule,
    rng: &mut RandomSource,
) -> Result<usize> {
    let k_plus = filled_nk.len();
    if k_plus == 0 {
        return Err(Error::Contract("step_sample_k requires K+ >= 1".into()));
    }
    let mut logs: Vec<f64> = Vec::new();
    let mut max = f64::NEG_INFINITY;
    // Running total of exp(lp - max), rescaled whenever max moves.
    let mut total = 0.0f64;
    let mut prev_lp = f64::NEG_INFINITY;
    let mut neg_inf_run = 0usize;
    let mut k = k_plus;
    loop {
        let lp = log_k_conditional(k, filled_nk, gamma_rule, prior)?;
        logs.push(lp);
        if lp > max {
            total *= (max - lp).exp();
            max = lp;
        }
        let w = (lp - max).exp();
        total += w;
        if lp == f64::NEG_INFINITY {
            // Degenerate priors zero out the tail outright.
            neg_inf_run += 1;
            if neg_inf_run >= 20 && total > 0.0 {
                break;
            }
        } else {
            neg_inf_run = 0;
            if lp < prev_lp {
                // Past the mode: bound the remaining tail. Geometric decay
                // is bounded by the series at the current ratio; the BNB
                // prior's polynomial tail (ratio -> 1) is bounded instead by
                // the integral w * k / (p - 1) at the local decay exponent
                // p = -d log w / d log k. A safety factor 2 covers the decay
                // slowing down toward its limit exponent.
                let r = (lp - prev_lp).exp();
                let geom = if r < 0.999 {
                    2.0 * w * r / (1.0 - r)
                } else {
                    f64::INFINITY
                };
                let p = (prev_lp - lp) / ((k as f64) / (k as f64 - 1.0)).ln();
                let poly = if p > 1.2 {
                    2.0 * w * k as f64 / (p - 1.0)
                } else {
                    f64::INFINITY
                };
                if geom.min(poly) < 1e-10 * total {
                    break;
                }
            }
        }
        prev_lp = lp;
        k += 1;
        if k - k_plus > K_TRUNCATION_LIMIT {
            return Err(Error::Numerical("K conditional did not truncate within 1e6 terms".into()));
        }
    }
    let weights: Vec<f64> = logs.iter().map(|&lp| (lp - max).exp()).collect();
    Ok(k_plus + draw_categorical(&weights, rng)?)
}

/// Compact the filled components to 1..K+ (stable order), append prior-drawn
/// empties up to `new_k`, and redraw the weights at the new K so the state
/// stays consistent for the next classification.
pub fn step_add_empty(
    state: &mut ChainState,
    new_k: usize,
    gamma_k: f64,
    rng: &mut RandomSource,
) -> Result<()> {
    let filled: Vec<usize> = (0..state.k).filter(|&c| state.nk[c] > 0).collect();
    if new_k < filled.len() {
        return Err(Error::Contract(format!(
            "new K = {new_k} below K+ = {}",
            filled.len()
        )));
    }
    let mut remap = vec![usize::MAX; state.k];
    let mut theta = Vec::with_capacity(new_k);
    for (new_idx, &old_idx) in filled.iter().enumerate() {
        remap[old_idx] = new_idx;
        theta.push(state.theta[old_idx].clone());
    }
    for _ in filled.len()..new_k {
        theta.push(kernels::kernel_draw_prior(&state.zeta, rng)?);
    }
    for si in state.s.iter_mut() {
        *si = remap[*si];
    }
    state.k = new_k;
    state.theta = theta;
    state.recount();
    step_weights(state, gamma_k, rng)?;
    Ok(())
}

fn record(state: &ChainState, m: usize) -> DrawRecord {
    DrawRecord {
        m,
        k: state.k,
        k_plus: state.k_plus(),
        eta: state.eta.clone(),
        theta: state.theta.clone(),
        s: state.s.clone(),
    }
}

/// Run one chain: `burnin + thin * draws` sweeps, recording every
/// `thin`-th post-burn-in state. Deterministic given the seed.
pub fn run_chain(data: &Dataset, config: &MixtureConfig) -> Result<DrawStore> {
    config.validate()?;
    let mut rng = RandomSource::new(config.seed);
    let mut state = init_chain(data, config, &mut rng)?;
    let telescoping = config.is_telescoping();
    let total = config.burnin + config.thin * config.draws;
    let mut records = Vec::with_capacity(config.draws);
    for m in 1..=total {
        step_classify(&mut state, data, &mut rng)?;
        let gamma_k = config.gamma_rule.gamma_k(state.k);
        step_weights(&mut state, gamma_k, &mut rng)?;
        step_components(&mut state, data, !telescoping, &mut rng)?;
        if telescoping {
            let filled_nk: Vec<usize> = state.nk.iter().copied().filter(|&n| n > 0).collect();
            let prior = match config.k_mode {
                KMode::Bnb { a, b, c } => PriorOnK::Bnb { a, b, c },
                _ => unreachable!(),
            };
            let new_k = step_sample_k(&filled_nk, prior, config.gamma_rule, &mut rng)?;
            step_add_empty(&mut state, new_k, config.gamma_rule.gamma_k(new_k), &mut rng)?;
        }
        if m > config.burnin && (m - config.burnin) % config.thin == 0 {
            records.push(record(&state, m));
        }
    }
    Ok(DrawStore {
        config: config.clone(),
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::GaussianHyper;
    use crate::simulate::{simulate, GeneratorSpec};
    use nalgebra::DVector;

    fn rng(seed: u64) -> RandomSource {
        RandomSource::new(seed)
    }

    fn gaussian_hyper(r: usize) -> Hyper {
        Hyper::Gaussian(GaussianHyper {
            mean_loc: DVector::zeros(r),
            mean_cov: SpdMatrix::scaled_identity(r, 100.0).unwrap(),
            cov_shape: 2.5 + (r as f64 - 1.0) / 2.0,
            cov_scale: SpdMatrix::identity(r),
            scale_shape: 0.5 + (r as f64 - 1.0) / 2.0,
            scale_rate: SpdMatrix::identity(r),
        })
    }

    fn fixed_config(k: usize, r: usize) -> MixtureConfig {
        MixtureConfig {
            kernel: KernelKind::Gaussian,
            k_mode: KMode::Fixed(k),
            gamma_rule: GammaRule::Static(4.0),
            hyper: gaussian_hyper(r),
            burnin: 10,
            draws: 10,
            thin: 1,
            seed: 7,
            init: InitMethod::KMeans,
            k_init: k,
            init_restarts: 5,
        }
    }

    fn same_partition(a: &[usize], b: &[usize]) -> bool {
        a.len() == b.len()
            && (0..a.len()).all(|i| (0..i).all(|j| (a[i] == a[j]) == (b[i] == b[j])))
    }

    #[test]
    fn init_single_component_trivial() {
        let data = Dataset::Real(DMatrix::from_column_slice(5, 1, &[1.0, 2.0, 3.0, 4.0, 5.0]));
        let state = init_chain(&data, &fixed_config(1, 1), &mut rng(1)).unwrap();
        assert!(state.s.iter().all(|&si| si == 0));
        assert_eq!(state.eta, vec![1.0]);
        if let Component::Gaussian(g) = &state.theta[0] {
            assert!((g.mu[0] - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn init_fills_all_components_on_separated_data() {
        let sim = simulate(&GeneratorSpec::Example1, 200, &mut rng(2)).unwrap();
        let state = init_chain(&sim.data, &fixed_config(4, 6), &mut rng(3)).unwrap();
        assert_eq!(state.k_plus(), 4);
        assert!(!state.init_fallback);
    }

    #[test]
    fn init_deterministic() {
        let sim = simulate(&GeneratorSpec::Example1, 100, &mut rng(4)).unwrap();
        let a = init_chain(&sim.data, &fixed_config(4, 6), &mut rng(5)).unwrap();
        let b = init_chain(&sim.data, &fixed_config(4, 6), &mut rng(5)).unwrap();
        assert_eq!(a.s, b.s);
        assert_eq!(a.theta, b.theta);
    }

    #[test]
    fn classify_separates_distant_components() {
        let mut vals = vec![-10.0; 50];
        vals.extend(vec![10.0; 50]);
        let data = Dataset::Real(DMatrix::from_column_slice(100, 1, &vals));
        let mut state = init_chain(&data, &fixed_config(2, 1), &mut rng(6)).unwrap();
        state.theta = vec![
            Component::Gaussian(GaussianComponent {
                mu: DVector::from_vec(vec![-10.0]),
                sigma: SpdMatrix::identity(1),
            }),
            Component::Gaussian(GaussianComponent {
                mu: DVector::from_vec(vec![10.0]),
                sigma: SpdMatrix::identity(1),
            }),
        ];
        state.eta = vec![0.5, 0.5];
        step_classify(&mut state, &data, &mut rng(7)).unwrap();
        assert!(state.s[..50].iter().all(|&s| s == 0));
        assert!(state.s[50..].iter().all(|&s| s == 1));
    }

    #[test]
    fn classify_respects_zero_weight() {
        let data = Dataset::Real(DMatrix::from_element(20, 1, 0.0));
        let mut state = init_chain(&data, &fixed_config(2, 1), &mut rng(8)).unwrap();
        let theta = Component::Gaussian(GaussianComponent {
            mu: DVector::from_vec(vec![0.0]),
            sigma: SpdMatrix::identity(1),
        });
        state.theta = vec![theta.clone(), theta];
        state.eta = vec![1.0, 0.0];
        step_classify(&mut state, &data, &mut rng(9)).unwrap();
        assert!(state.s.iter().all(|&s| s == 0));
    }

    #[test]
    fn weights_prior_reduction_and_sparse_shrinkage() {
        let data = Dataset::Real(DMatrix::from_element(2, 1, 0.0));
        let mut state = init_chain(&data, &fixed_config(2, 1), &mut rng(10)).unwrap();
        let mut r = rng(11);
        // All-empty counts reduce to the Dirichlet prior D(1,1).
        state.nk = vec![0, 0];
        let n = 100_000;
        let mut mean = 0.0;
        for _ in 0..n {
            step_weights(&mut state, 1.0, &mut r).unwrap();
            let sum: f64 = state.eta.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
            mean += state.eta[0];
        }
        assert!((mean / n as f64 - 0.5).abs() < 0.01);
        // Sparse shrinkage: E[eta_2] = 0.01 / 100.02.
        state.nk = vec![100, 0];
        let mut mean2 = 0.0;
        for _ in 0..n {
            step_weights(&mut state, 0.01, &mut r).unwrap();
            mean2 += state.eta[1];
        }
        assert!((mean2 / n as f64 - 0.01 / 100.02).abs() < 2e-5);
    }

    #[test]
    fn sample_k_point_mass_prior() {
        let mut r = rng(12);
        for _ in 0..50 {
            let k = step_sample_k(&[5, 5], PriorOnK::PointMass(2), GammaRule::Static(0.5), &mut r)
                .unwrap();
            assert_eq!(k, 2);
        }
    }

    #[test]
    fn sample_k_matches_brute_force_normalization() {
        // N=10, K+=2, N_k=(5,5), dynamic gamma = 0.5, BNB(1,4,3) prior on K-1.
        let prior = PriorOnK::Bnb { a: 1.0, b: 4.0, c: 3.0 };
        let rule = GammaRule::Dynamic(0.5);
        let filled = [5usize, 5];
        let mut probs = Vec::new();
        let mut max = f64::NEG_INFINITY;
        for k in 2..2002usize {
            let lp = log_k_conditional(k, &filled, rule, prior).unwrap();
            probs.push(lp);
            if lp > max {
                max = lp;
            }
        }
        let mut w: Vec<f64> = probs.iter().map(|&lp| (lp - max).exp()).collect();
        let total: f64 = w.iter().sum();
        for x in w.iter_mut() {
            *x /= total;
        }
        let n = 100_000;
        let mut counts = vec![0usize; w.len()];
        let mut r = rng(13);
        for _ in 0..n {
            let k = step_sample_k(&filled, prior, rule, &mut r).unwrap();
            counts[k - 2] += 1;
        }
        let tv: f64 = w
            .iter()
            .zip(&counts)
            .map(|(&p, &c)| (p - c as f64 / n as f64).abs())
            .sum::<f64>()
            / 2.0;
        assert!(tv < 0.01, "total variation {tv}");
    }

    #[test]
    fn sample_k_mean_monotone_in_gamma() {
        // Smaller static gamma_K widens the gap between K and K+ (more
        // empty components), so E[K] decreases monotonically in gamma_K.
        let prior = PriorOnK::Bnb { a: 1.0, b: 4.0, c: 3.0 };
        let filled = [5usize, 5];
        let mut r = rng(14);
        let mut means = Vec::new();
        for g in [0.01, 0.1, 1.0] {
            let n = 20_000;
            let mut sum = 0usize;
            for _ in 0..n {
                sum += step_sample_k(&filled, prior, GammaRule::Static(g), &mut r).unwrap();
            }
            means.push(sum as f64 / n as f64);
        }
        assert!(means[0] > means[1] && means[1] > means[2], "{means:?}");
    }

    #[test]
    fn add_empty_preserves_partition() {
        let sim = simulate(&GeneratorSpec::Example1, 100, &mut rng(15)).unwrap();
        let config = fixed_config(4, 6);
        let mut state = init_chain(&sim.data, &config, &mut rng(16)).unwrap();
        let before = state.s.clone();
        let k_plus = state.k_plus();
        step_add_empty(&mut state, 7, 0.5, &mut rng(17)).unwrap();
        assert_eq!(state.k, 7);
        assert_eq!(state.theta.len(), 7);
        assert_eq!(state.eta.len(), 7);
        assert!(same_partition(&before, &state.s));
        for c in k_plus..7 {
            assert_eq!(state.nk[c], 0);
        }
        // Boundary: new_K = K+ appends nothing.
        let nk_before = state.nk.clone();
        let kp = state.k_plus();
        step_add_empty(&mut state, kp, 0.5, &mut rng(18)).unwrap();
        assert_eq!(state.k, kp);
        assert_eq!(
            state.nk,
            nk_before.into_iter().filter(|&n| n > 0).collect::<Vec<_>>()
        );
        assert!(step_add_empty(&mut state, 1, 0.5, &mut rng(19)).is_err());
    }

    #[test]
    fn run_chain_thinning_and_determinism() {
        let sim = simulate(&GeneratorSpec::Example1, 60, &mut rng(20)).unwrap();
        let mut config = fixed_config(4, 6);
        config.burnin = 5;
        config.draws = 10;
        config.thin = 2;
        let store = run_chain(&sim.data, &config).unwrap();
        assert_eq!(store.records.len(), 10);
        let ms: Vec<usize> = store.records.iter().map(|r| r.m).collect();
        assert_eq!(ms, (1..=10).map(|i| 5 + 2 * i).collect::<Vec<_>>());
        let store2 = run_chain(&sim.data, &config).unwrap();
        assert_eq!(store, store2);
    }

    #[test]
    fn sweep_invariants_hold() {
        let sim = simulate(&GeneratorSpec::Example1, 80, &mut rng(21)).unwrap();
        let mut config = fixed_config(4, 6);
        config.k_mode = KMode::Bnb { a: 1.0, b: 4.0, c: 3.0 };
        config.gamma_rule = GammaRule::Dynamic(0.5);
        config.burnin = 20;
        config.draws = 30;
        let store = run_chain(&sim.data, &config).unwrap();
        for rec in &store.records {
            let sum: f64 = rec.eta.iter().sum();
            assert!((sum - 1.0).abs() < 1e-10);
            assert!(rec.k_plus <= rec.k);
            let mut nk = vec![0usize; rec.k];
            for &si in &rec.s {
                nk[si] += 1;
            }
            assert_eq!(nk.iter().sum::<usize>(), 80);
            assert_eq!(nk.iter().filter(|&&n| n > 0).count(), rec.k_plus);
        }
    }
}
