//! CliPS post-processing: estimate the number of filled components, keep the
//! draws that have exactly that many, cluster the component draws in the
//! point-process representation, check which iterations yield a label
//! permutation, relabel, and summarize the identified model.
//!
//! Relabeling convention: with classification sequence rho (component j of an
//! iteration fell into PPR group rho(j)), the identified draw is
//! eta'_j = eta_{rho^{-1}(j)}, theta'_j = theta_{rho^{-1}(j)}, and
//! S'_i = rho(S_i). Applying rho forward to the allocations is forced by the
//! co-assignment invariant: observation i keeps pointing at the same
//! component parameters before and after relabeling.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::Component;
use crate::kmeans::{kmeans_fit, PointSet};
use crate::rng::RandomSource;
use crate::sampler::{DrawRecord, DrawStore};

/// Which functional of the component parameters to cluster in the PPR.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FunctionalSpec {
    /// The full flattened parameter vector.
    FullParameter,
    /// Gaussian component means.
    GaussianMeans,
    /// Diagonal (persistence probabilities) of the transition matrix.
    MarkovPersistence,
    /// Explicit indices into the flattened full parameter vector.
    Custom(Vec<usize>),
}

impl FunctionalSpec {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "full_parameter" => Ok(FunctionalSpec::FullParameter),
            "gaussian_means" => Ok(FunctionalSpec::GaussianMeans),
            "markov_persistence" => Ok(FunctionalSpec::MarkovPersistence),
            other => {
                if let Some(list) = other.strip_prefix("custom:") {
                    let idx = list
                        .split(',')
                        .map(|t| {
                            t.trim().parse::<usize>().map_err(|_| {
                                Error::Config(format!("bad functional index '{t}'"))
                            })
                        })
                        .collect::<Result<Vec<usize>>>()?;
                    if idx.is_empty() {
                        return Err(Error::Config("custom functional needs indices".into()));
                    }
                    return Ok(FunctionalSpec::Custom(idx));
                }
                Err(Error::Config(format!("unknown functional '{other}'")))
            }
        }
    }

    /// phi(theta) for one component.
    pub fn apply(&self, theta: &Component) -> Result<Vec<f64>> {
        match self {
            FunctionalSpec::FullParameter => Ok(theta.flatten_full()),
            FunctionalSpec::GaussianMeans => match theta {
                Component::Gaussian(g) => Ok(g.mu.iter().copied().collect()),
                _ => Err(Error::Config(
                    "gaussian_means functional requires a Gaussian kernel".into(),
                )),
            },
            FunctionalSpec::MarkovPersistence => match theta {
                Component::Markov(m) => {
                    Ok((0..m.xi.len()).map(|j| m.xi[j][j]).collect())
                }
                _ => Err(Error::Config(
                    "markov_persistence functional requires a Markov kernel".into(),
                )),
            },
            FunctionalSpec::Custom(idx) => {
                let full = theta.flatten_full();
                idx.iter()
                    .map(|&i| {
                        full.get(i).copied().ok_or_else(|| {
                            Error::Config(format!(
                                "functional index {i} out of range for a {}-dimensional parameter",
                                full.len()
                            ))
                        })
                    })
                    .collect()
            }
        }
    }
}

/// Per-iteration PPR group labels of the component draws (zero-based).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassificationSequence {
    pub rho: Vec<usize>,
    pub is_permutation: bool,
}

/// Posterior mean/sd of the weight and of the flattened parameter vector for
/// one identified cluster.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterSummary {
    pub eta_mean: f64,
    pub eta_sd: f64,
    pub param_mean: Vec<f64>,
    pub param_sd: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ClipsResult {
    pub k_hat_plus: usize,
    pub kplus_posterior: BTreeMap<usize, f64>,
    /// Non-permutation rate M_nu / M_strat.
    pub nu: f64,
    pub m_strat: usize,
    pub m_nu: usize,
    pub identified_store: DrawStore,
    pub summaries: Vec<ClusterSummary>,
    /// Zero-based modal cluster per observation.
    pub modal_partition: Vec<usize>,
    /// PPR rows (iteration-major, component-minor) with their group labels,
    /// kept for the scatter export.
    pub ppr_points: PointSet,
    pub ppr_labels: Vec<usize>,
    /// Iteration index of each stratified record (aligned with PPR rows in
    /// blocks of K_hat_plus).
    pub strat_iters: Vec<usize>,
    pub sequences: Vec<ClassificationSequence>,
}

/// Options for the full pipeline.
#[derive(Debug, Clone)]
pub struct ClipsOptions {
    pub functional: FunctionalSpec,
    pub min_fill_fraction: f64,
    pub kmeans_restarts: usize,
    /// Override the estimated number of clusters.
    pub kplus_override: Option<usize>,
}

impl Default for ClipsOptions {
    fn default() -> Self {
        ClipsOptions {
            functional: FunctionalSpec::FullParameter,
            min_fill_fraction: 0.0,
            kmeans_restarts: 10,
            kplus_override: None,
        }
    }
}

/// Relative frequency of each K+ over the recorded iterations.
pub fn kplus_posterior(store: &DrawStore) -> Result<BTreeMap<usize, f64>> {
    if store.records.is_empty() {
        return Err(Error::Data("draw store has no records".into()));
    }
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for rec in &store.records {
        *counts.entry(rec.k_plus).or_insert(0) += 1;
    }
    let m = store.records.len() as f64;
    Ok(counts.into_iter().map(|(k, c)| (k, c as f64 / m)).collect())
}

fn occupancy(rec: &DrawRecord) -> Vec<usize> {
    let mut nk = vec![0usize; rec.k];
    for &si in &rec.s {
        nk[si] += 1;
    }
    nk
}

/// Posterior mode of K+ (ties to the smaller k). With a positive
/// `min_fill_fraction` f, each draw's K+ is first recomputed counting only
/// components holding at least f*N observations.
pub fn estimate_kplus(store: &DrawStore, min_fill_fraction: f64) -> Result<usize> {
    if store.records.is_empty() {
        return Err(Error::Data("draw store has no records".into()));
    }
    if !(0.0..1.0).contains(&min_fill_fraction) {
        return Err(Error::Config("min_fill_fraction must be in [0, 1)".into()));
    }
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for rec in &store.records {
        let n = rec.s.len() as f64;
        let kp = occupancy(rec)
            .iter()
            .filter(|&&nk| nk > 0 && nk as f64 >= min_fill_fraction * n)
            .count();
        *counts.entry(kp).or_insert(0) += 1;
    }
    // BTreeMap iterates ascending, so `>` keeps the smaller k on ties.
    Ok(counts
        .iter()
        .fold((0usize, 0usize), |best, (&k, &c)| if c > best.1 { (k, c) } else { best })
        .0)
}

/// Retain records with K+ = k_hat; within each, drop empty components
/// (weights are kept as drawn, not renormalized) and remap allocations to
/// 0..k_hat.
pub fn stratify(store: &DrawStore, k_hat: usize) -> Result<DrawStore> {
    if k_hat == 0 {
        return Err(Error::Config("K_hat_plus must be >= 1".into()));
    }
    let mut records = Vec::new();
    for rec in &store.records {
        if rec.k_plus != k_hat {
            continue;
        }
        let nk = occupancy(rec);
        let filled: Vec<usize> = (0..rec.k).filter(|&c| nk[c] > 0).collect();
        debug_assert_eq!(filled.len(), k_hat);
        let mut remap = vec![usize::MAX; rec.k];
        for (new, &old) in filled.iter().enumerate() {
            remap[old] = new;
        }
        records.push(DrawRecord {
            m: rec.m,
            k: k_hat,
            k_plus: k_hat,
            eta: filled.iter().map(|&c| rec.eta[c]).collect(),
            theta: filled.iter().map(|&c| rec.theta[c].clone()).collect(),
            s: rec.s.iter().map(|&si| remap[si]).collect(),
        });
    }
    if records.is_empty() {
        return Err(Error::EmptyStratum(format!(
            "no recorded draws have K+ = {k_hat}"
        )));
    }
    Ok(DrawStore {
        config: store.config.clone(),
        records,
    })
}

/// Stack phi(theta_k^(m)) into a (K_hat * M_strat) x d matrix,
/// iteration-major, component-minor.
pub fn extract_functional(stratified: &DrawStore, spec: &FunctionalSpec) -> Result<PointSet> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for rec in &stratified.records {
        for theta in &rec.theta {
            rows.push(spec.apply(theta)?);
        }
    }
    PointSet::from_rows(&rows)
}

/// k-means group labels for the PPR rows. Deliberately does not constrain
/// same-iteration draws to distinct groups.
pub fn cluster_ppr(
    points: &PointSet,
    k_hat: usize,
    restarts: usize,
    rng: &mut RandomSource,
) -> Result<Vec<usize>> {
    Ok(kmeans_fit(points, k_hat, restarts, 200, rng)?.labels)
}

/// Assemble per-iteration classification sequences and the non-permutation
/// rate nu.
pub fn check_permutations(
    labels: &[usize],
    k_hat: usize,
    m_strat: usize,
) -> Result<(Vec<ClassificationSequence>, f64)> {
    if labels.len() != k_hat * m_strat {
        return Err(Error::Contract(format!(
            "expected {} labels, got {}",
            k_hat * m_strat,
            labels.len()
        )));
    }
    let mut sequences = Vec::with_capacity(m_strat);
    let mut non_perm = 0usize;
    for m in 0..m_strat {
        let rho: Vec<usize> = labels[m * k_hat..(m + 1) * k_hat].to_vec();
        let mut sorted = rho.clone();
        sorted.sort_unstable();
        let is_permutation = sorted.iter().enumerate().all(|(i, &v)| v == i);
        if !is_permutation {
            non_perm += 1;
        }
        sequences.push(ClassificationSequence { rho, is_permutation });
    }
    Ok((sequences, non_perm as f64 / m_strat as f64))
}

/// Drop non-permutation iterations and relabel the rest (see module doc for
/// the convention).
pub fn relabel(
    stratified: &DrawStore,
    sequences: &[ClassificationSequence],
) -> Result<DrawStore> {
    if sequences.len() != stratified.records.len() {
        return Err(Error::Internal(
            "classification sequences misaligned with stratified store".into(),
        ));
    }
    let mut records = Vec::new();
    for (rec, seq) in stratified.records.iter().zip(sequences) {
        if !seq.is_permutation {
            continue;
        }
        let k = rec.k;
        let mut inv = vec![0usize; k];
        for (j, &g) in seq.rho.iter().enumerate() {
            inv[g] = j;
        }
        records.push(DrawRecord {
            m: rec.m,
            k,
            k_plus: rec.k_plus,
            eta: (0..k).map(|j| rec.eta[inv[j]]).collect(),
            theta: (0..k).map(|j| rec.theta[inv[j]].clone()).collect(),
            s: rec.s.iter().map(|&si| seq.rho[si]).collect(),
        });
    }
    Ok(DrawStore {
        config: stratified.config.clone(),
        records,
    })
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// Per-cluster posterior mean/sd of eta and the flattened parameters, plus
/// the modal partition (most frequent relabeled allocation; ties to the
/// smaller label).
pub fn summarize(identified: &DrawStore) -> Result<(Vec<ClusterSummary>, Vec<usize>)> {
    let first = identified
        .records
        .first()
        .ok_or_else(|| Error::Data("no identified records to summarize".into()))?;
    let k = first.k;
    let n = first.s.len();
    let mut summaries = Vec::with_capacity(k);
    for j in 0..k {
        let etas: Vec<f64> = identified.records.iter().map(|r| r.eta[j]).collect();
        let (eta_mean, eta_sd) = mean_sd(&etas);
        let params: Vec<Vec<f64>> = identified
            .records
            .iter()
            .map(|r| r.theta[j].flatten_full())
            .collect();
        let d = params[0].len();
        let mut param_mean = Vec::with_capacity(d);
        let mut param_sd = Vec::with_capacity(d);
        for col in 0..d {
            let vals: Vec<f64> = params.iter().map(|p| p[col]).collect();
            let (m, s) = mean_sd(&vals);
            param_mean.push(m);
            param_sd.push(s);
        }
        summaries.push(ClusterSummary {
            eta_mean,
            eta_sd,
            param_mean,
            param_sd,
        });
    }
    let mut tally = vec![vec![0usize; k]; n];
    for rec in &identified.records {
        for (i, &si) in rec.s.iter().enumerate() {
            tally[i][si] += 1;
        }
    }
    let modal = tally
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .fold((0usize, 0usize), |best, (j, &c)| if c > best.1 { (j, c) } else { best })
                .0
        })
        .collect();
    Ok((summaries, modal))
}

fn confusion(a: &[usize], b: &[usize], ka: usize, kb: usize) -> DMatrix<usize> {
    let mut m = DMatrix::zeros(ka, kb);
    for (&x, &y) in a.iter().zip(b) {
        m[(x, y)] += 1;
    }
    m
}

fn best_match_trace(conf: &DMatrix<usize>) -> usize {
    let (ka, kb) = conf.shape();
    let k = ka.max(kb);
    if k <= 8 {
        // Exhaustive over permutations of the larger side.
        let mut perm: Vec<usize> = (0..k).collect();
        let mut best = 0;
        permute(&mut perm, 0, &mut |p| {
            let score: usize = (0..ka)
                .map(|i| if p[i] < kb { conf[(i, p[i])] } else { 0 })
                .sum();
            if score > best {
                best = score;
            }
        });
        best
    } else {
        let weights = pathfinding::matrix::Matrix::from_fn(k, k, |(i, j)| {
            if i < ka && j < kb {
                conf[(i, j)] as i64
            } else {
                0
            }
        });
        let (score, _) = pathfinding::kuhn_munkres::kuhn_munkres(&weights);
        score as usize
    }
}

fn permute(p: &mut Vec<usize>, at: usize, f: &mut impl FnMut(&[usize])) {
    if at == p.len() {
        f(p);
        return;
    }
    for i in at..p.len() {
        p.swap(at, i);
        permute(p, at + 1, f);
        p.swap(at, i);
    }
}

/// Accuracy after best label matching, and the Hubert-Arabie adjusted Rand
/// index. Both inputs zero-based.
pub fn compare_partition(partition: &[usize], reference: &[usize]) -> Result<(f64, f64)> {
    if partition.len() != reference.len() || partition.is_empty() {
        return Err(Error::Data("partitions must be nonempty and equal length".into()));
    }
    let n = partition.len();
    let ka = partition.iter().max().unwrap() + 1;
    let kb = reference.iter().max().unwrap() + 1;
    let conf = confusion(partition, reference, ka, kb);
    let accuracy = best_match_trace(&conf) as f64 / n as f64;

    let choose2 = |x: usize| (x * x.saturating_sub(1)) as f64 / 2.0;
    let sum_cells: f64 = conf.iter().map(|&c| choose2(c)).sum();
    let sum_rows: f64 = (0..ka).map(|i| choose2(conf.row(i).sum())).sum();
    let sum_cols: f64 = (0..kb).map(|j| choose2(conf.column(j).sum())).sum();
    let total = choose2(n);
    let expected = sum_rows * sum_cols / total;
    let max_index = 0.5 * (sum_rows + sum_cols);
    let ari = if (max_index - expected).abs() < 1e-12 {
        // Degenerate (e.g. both partitions trivial): agreement is perfect.
        1.0
    } else {
        (sum_cells - expected) / (max_index - expected)
    };
    Ok((accuracy, ari))
}

/// The full pipeline: K+ posterior and estimate, stratification, functional
/// extraction, PPR clustering, permutation check, relabeling, summaries.
pub fn run_clips(store: &DrawStore, options: &ClipsOptions, rng: &mut RandomSource) -> Result<ClipsResult> {
    let posterior = kplus_posterior(store)?;
    let k_hat = match options.kplus_override {
        Some(k) => k,
        None => estimate_kplus(store, options.min_fill_fraction)?,
    };
    let stratified = stratify(store, k_hat)?;
    let m_strat = stratified.records.len();
    let strat_iters: Vec<usize> = stratified.records.iter().map(|r| r.m).collect();
    let points = extract_functional(&stratified, &options.functional)?;
    let labels = if k_hat == 1 {
        vec![0; points.n()]
    } else {
        cluster_ppr(&points, k_hat, options.kmeans_restarts, rng)?
    };
    let (sequences, nu) = check_permutations(&labels, k_hat, m_strat)?;
    let m_nu = sequences.iter().filter(|s| !s.is_permutation).count();
    let identified_store = relabel(&stratified, &sequences)?;
    if identified_store.records.is_empty() {
        return Err(Error::EmptyStratum(
            "every stratified iteration failed the permutation check".into(),
        ));
    }
    let (summaries, modal_partition) = summarize(&identified_store)?;
    Ok(ClipsResult {
        k_hat_plus: k_hat,
        kplus_posterior: posterior,
        nu,
        m_strat,
        m_nu,
        identified_store,
        summaries,
        modal_partition,
        ppr_points: points,
        ppr_labels: labels,
        strat_iters,
        sequences,
    })
}

/// PPR scatter CSV: iteration, component, group_label, phi_1..phi_d.
/// Components and group labels are written one-based.
pub fn ppr_csv(result: &ClipsResult) -> String {
    let d = result.ppr_points.dim();
    let k = result.k_hat_plus;
    let mut out = String::from("iteration,component,group_label");
    for j in 1..=d {
        out.push_str(&format!(",phi{j}"));
    }
    out.push('\n');
    for (row, &label) in result.ppr_labels.iter().enumerate() {
        let iter_idx = result.strat_iters[row / k];
        let comp = row % k + 1;
        out.push_str(&format!("{iter_idx},{comp},{}", label + 1));
        for j in 0..d {
            out.push_str(&format!(",{:.16e}", result.ppr_points.coords()[(row, j)]));
        }
        out.push('\n');
    }
    out
}

/// Modal partition CSV (one-based cluster labels).
pub fn modal_partition_csv(result: &ClipsResult) -> String {
    let mut out = String::from("observation,cluster\n");
    for (i, &c) in result.modal_partition.iter().enumerate() {
        out.push_str(&format!("{},{}\n", i + 1, c + 1));
    }
    out
}

/// JSON summary of the result (K+ posterior, nu, retention, summaries).
pub fn result_json(result: &ClipsResult) -> Result<String> {
    #[derive(Serialize)]
    struct ResultJson<'a> {
        k_hat_plus: usize,
        kplus_posterior: BTreeMap<String, f64>,
        nu: f64,
        m_strat: usize,
        m_nu: usize,
        identified_count: usize,
        summaries: &'a [ClusterSummary],
        /// One-based modal cluster per observation.
        modal_partition: Vec<usize>,
    }
    let json = ResultJson {
        k_hat_plus: result.k_hat_plus,
        kplus_posterior: result
            .kplus_posterior
            .iter()
            .map(|(&k, &v)| (k.to_string(), v))
            .collect(),
        nu: result.nu,
        m_strat: result.m_strat,
        m_nu: result.m_nu,
        identified_count: result.identified_store.records.len(),
        summaries: &result.summaries,
        modal_partition: result.modal_partition.iter().map(|&c| c + 1).collect(),
    };
    Ok(serde_json::to_string_pretty(&json)?)
}
