//! Config-driven workflow around `clips-core`: simulate data, fit mixture
//! chains, run the CliPS post-processing, and produce a report. The binary
//! in `main.rs` is a thin argument-parsing wrapper over the `cmd_*`
//! functions here so integration tests can call them directly.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;
use sha2::{Digest, Sha256};

use clips_core::clips::{run_clips, ClipsOptions, FunctionalSpec};
use clips_core::data::{parse_categorical_csv, parse_real_csv, parse_sequences_csv, to_csv, Dataset};
use clips_core::kernels::{CategoricalHyper, GaussianHyper, Hyper, MarkovHyper};
use clips_core::sampler::{
    run_chain, DrawStore, GammaRule, InitMethod, KMode, KernelKind, MixtureConfig,
};
use clips_core::simulate::{simulate, truth_allocations, truth_json, GeneratorSpec};
use clips_core::store::{read_store_from_path, write_store_to_path};
use clips_core::{Error, RandomSource, Result, SpdMatrix};

// ---------------------------------------------------------------------------
// Run configuration (TOML)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub clips: ClipsSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    /// CSV file with observations (exclusive with `generator`).
    pub path: Option<String>,
    /// "real" | "categorical" | "sequences"; required with `path`.
    pub kind: Option<String>,
    /// Optional per-feature category counts for categorical CSVs.
    pub categories: Option<Vec<usize>>,
    /// Optional state-space size for sequence CSVs.
    pub states: Option<usize>,
    /// Built-in generator: "example1" | "figure1" | "lca" | "markov".
    pub generator: Option<String>,
    /// Sample size for the generator.
    pub n: Option<usize>,
    /// Generator mixture weights (lca/markov).
    pub weights: Option<Vec<f64>>,
    /// lca: pi[k][feature][category].
    pub pi: Option<Vec<Vec<Vec<f64>>>>,
    /// markov: xi[k][from][to].
    pub xi: Option<Vec<Vec<Vec<f64>>>>,
    /// markov: pool of sequence lengths.
    pub lengths: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    /// "gaussian" | "categorical" | "markov"; inferred from the data when
    /// omitted.
    pub kernel: Option<String>,
    /// "fixed" | "bnb" | "fixed_sparse".
    pub k_mode: String,
    /// Number of components (fixed and fixed_sparse modes).
    pub k: Option<usize>,
    pub bnb_a: f64,
    pub bnb_b: f64,
    pub bnb_c: f64,
    /// "static" | "dynamic"; defaults to dynamic for bnb, static otherwise.
    pub gamma_kind: Option<String>,
    /// gamma_K (static) or gamma with gamma_K = gamma / K (dynamic).
    pub gamma: Option<f64>,
    pub burnin: usize,
    pub draws: usize,
    pub thin: usize,
    pub seed: u64,
    /// "kmeans" | "random".
    pub init: String,
    pub k_init: Option<usize>,
    pub init_restarts: usize,
    /// Gaussian B0 scale: "range_squared" (default) or "range".
    pub b0_scale: String,
    /// Markov transition prior: "all_ones" (default) or "zero_diagonal".
    pub markov_prior: String,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            kernel: None,
            k_mode: "fixed".into(),
            k: None,
            bnb_a: 1.0,
            bnb_b: 4.0,
            bnb_c: 3.0,
            gamma_kind: None,
            gamma: None,
            burnin: 1000,
            draws: 1000,
            thin: 1,
            seed: 1,
            init: "kmeans".into(),
            k_init: None,
            init_restarts: 10,
            b0_scale: "range_squared".into(),
            markov_prior: "all_ones".into(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClipsSection {
    pub functional: String,
    pub min_fill: f64,
    pub restarts: usize,
    pub kplus: Option<usize>,
    pub seed: Option<u64>,
}

impl Default for ClipsSection {
    fn default() -> Self {
        ClipsSection {
            functional: "full_parameter".into(),
            min_fill: 0.0,
            restarts: 10,
            kplus: None,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: "out".into() }
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

// ---------------------------------------------------------------------------
// Data loading and generation
// ---------------------------------------------------------------------------

fn generator_spec(data: &DataSection) -> Result<(GeneratorSpec, usize)> {
    let name = data
        .generator
        .as_deref()
        .ok_or_else(|| Error::Config("data section needs `path` or `generator`".into()))?;
    let n = data
        .n
        .ok_or_else(|| Error::Config("generator needs a sample size `n`".into()))?;
    let spec = match name {
        "example1" => GeneratorSpec::Example1,
        "figure1" => GeneratorSpec::Figure1,
        "lca" => GeneratorSpec::Lca {
            pi: data
                .pi
                .clone()
                .ok_or_else(|| Error::Config("lca generator needs `pi`".into()))?,
            weights: data
                .weights
                .clone()
                .ok_or_else(|| Error::Config("lca generator needs `weights`".into()))?,
        },
        "markov" => GeneratorSpec::Markov {
            xi: data
                .xi
                .clone()
                .ok_or_else(|| Error::Config("markov generator needs `xi`".into()))?,
            weights: data
                .weights
                .clone()
                .ok_or_else(|| Error::Config("markov generator needs `weights`".into()))?,
            lengths: data
                .lengths
                .clone()
                .ok_or_else(|| Error::Config("markov generator needs `lengths`".into()))?,
        },
        other => return Err(Error::Config(format!("unknown generator '{other}'"))),
    };
    spec.validate()?;
    Ok((spec, n))
}

/// Load the dataset referenced by the config: parse the CSV at `path`, or
/// draw from the generator (seeded independently of the sampler).
pub fn load_dataset(data: &DataSection, base_dir: &Path, seed: u64) -> Result<Dataset> {
    if let Some(path) = &data.path {
        let full = base_dir.join(path);
        let text = fs::read_to_string(&full)
            .map_err(|e| Error::Data(format!("cannot read data {}: {e}", full.display())))?;
        let kind = data
            .kind
            .as_deref()
            .ok_or_else(|| Error::Config("data `path` needs `kind`".into()))?;
        return match kind {
            "real" => parse_real_csv(&text),
            "categorical" => parse_categorical_csv(&text, data.categories.clone()),
            "sequences" => parse_sequences_csv(&text, data.states),
            other => Err(Error::Config(format!("unknown data kind '{other}'"))),
        };
    }
    let (spec, n) = generator_spec(data)?;
    let mut rng = RandomSource::new(seed);
    Ok(simulate(&spec, n, &mut rng)?.data)
}

// ---------------------------------------------------------------------------
// Hyperparameters from the data
// ---------------------------------------------------------------------------

fn column_median(col: &[f64]) -> f64 {
    let mut v = col.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Gaussian hyperparameter recipe from the data: b0 the columnwise median,
/// B0 = diag(R_j^2) (or diag(R_j) with `b0_scale = "range"`),
/// c0 = 2.5 + (r-1)/2, g0 = 0.5 + (r-1)/2, G0 = 100 g0/c0 R^{-1} with
/// R = diag(R_j^2); the scale matrix C0 starts at its prior mean g0 G0^{-1}.
pub fn gaussian_hyper_from_data(y: &DMatrix<f64>, b0_scale: &str) -> Result<GaussianHyper> {
    let r = y.ncols();
    let mut medians = Vec::with_capacity(r);
    let mut ranges = Vec::with_capacity(r);
    for j in 0..r {
        let col: Vec<f64> = y.column(j).iter().copied().collect();
        medians.push(column_median(&col));
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &v in &col {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        let range = hi - lo;
        if !(range > 0.0) || !range.is_finite() {
            return Err(Error::Data(format!("feature {j} has zero or invalid range")));
        }
        ranges.push(range);
    }
    let c0 = 2.5 + (r as f64 - 1.0) / 2.0;
    let g0 = 0.5 + (r as f64 - 1.0) / 2.0;
    let b0_diag: Vec<f64> = match b0_scale {
        "range_squared" => ranges.iter().map(|&x| x * x).collect(),
        "range" => ranges.clone(),
        other => return Err(Error::Config(format!("unknown b0_scale '{other}'"))),
    };
    // G0 = 100 g0/c0 R^{-1}; C0 initialized at E[C0] = g0 G0^{-1}.
    let g0_diag: Vec<f64> = ranges.iter().map(|&x| 100.0 * g0 / c0 / (x * x)).collect();
    let c0_diag: Vec<f64> = g0_diag.iter().map(|&g| g0 / g).collect();
    Ok(GaussianHyper {
        mean_loc: DVector::from_vec(medians),
        mean_cov: SpdMatrix::new(DMatrix::from_diagonal(&DVector::from_vec(b0_diag)))?,
        cov_shape: c0,
        cov_scale: SpdMatrix::new(DMatrix::from_diagonal(&DVector::from_vec(c0_diag)))?,
        scale_shape: g0,
        scale_rate: SpdMatrix::new(DMatrix::from_diagonal(&DVector::from_vec(g0_diag)))?,
    })
}

fn hyper_from_data(data: &Dataset, model: &ModelSection) -> Result<(KernelKind, Hyper)> {
    let inferred = match data {
        Dataset::Real(_) => "gaussian",
        Dataset::Categorical { .. } => "categorical",
        Dataset::Sequences { .. } => "markov",
    };
    let kernel = model.kernel.as_deref().unwrap_or(inferred);
    if kernel != inferred {
        return Err(Error::Config(format!(
            "kernel '{kernel}' does not match the data (expected '{inferred}')"
        )));
    }
    match (kernel, data) {
        ("gaussian", Dataset::Real(y)) => Ok((
            KernelKind::Gaussian,
            Hyper::Gaussian(gaussian_hyper_from_data(y, &model.b0_scale)?),
        )),
        ("categorical", Dataset::Categorical { cats, .. }) => Ok((
            KernelKind::Categorical,
            Hyper::Categorical(CategoricalHyper::all_ones(cats)),
        )),
        ("markov", Dataset::Sequences { states, .. }) => {
            let hyper = match model.markov_prior.as_str() {
                "all_ones" => MarkovHyper::all_ones(*states),
                "zero_diagonal" => MarkovHyper::zero_diagonal(*states),
                other => return Err(Error::Config(format!("unknown markov_prior '{other}'"))),
            };
            Ok((KernelKind::Markov, Hyper::Markov(hyper)))
        }
        _ => unreachable!(),
    }
}

/// Assemble the sampler configuration from the config file and the data.
pub fn build_mixture_config(cfg: &RunConfig, data: &Dataset, seed: u64) -> Result<MixtureConfig> {
    let model = &cfg.model;
    let (kernel, hyper) = hyper_from_data(data, model)?;
    let k_mode = match model.k_mode.as_str() {
        "fixed" => KMode::Fixed(
            model
                .k
                .ok_or_else(|| Error::Config("fixed k_mode needs `k`".into()))?,
        ),
        "bnb" => KMode::Bnb {
            a: model.bnb_a,
            b: model.bnb_b,
            c: model.bnb_c,
        },
        "fixed_sparse" => KMode::FixedSparse(model.k.unwrap_or(20)),
        other => return Err(Error::Config(format!("unknown k_mode '{other}'"))),
    };
    let gamma_kind = model.gamma_kind.as_deref().unwrap_or(match k_mode {
        KMode::Bnb { .. } => "dynamic",
        _ => "static",
    });
    let gamma = model.gamma.unwrap_or(match k_mode {
        KMode::Bnb { .. } => 0.5,
        KMode::FixedSparse(_) => 0.01,
        KMode::Fixed(_) => 4.0,
    });
    let gamma_rule = match gamma_kind {
        "static" => GammaRule::Static(gamma),
        "dynamic" => GammaRule::Dynamic(gamma),
        other => return Err(Error::Config(format!("unknown gamma_kind '{other}'"))),
    };
    let k_init = model.k_init.unwrap_or(match k_mode {
        KMode::Fixed(k) | KMode::FixedSparse(k) => k,
        KMode::Bnb { .. } => 10,
    });
    Ok(MixtureConfig {
        kernel,
        k_mode,
        gamma_rule,
        hyper,
        burnin: model.burnin,
        draws: model.draws,
        thin: model.thin,
        seed,
        init: match model.init.as_str() {
            "kmeans" => InitMethod::KMeans,
            "random" => InitMethod::Random,
            other => return Err(Error::Config(format!("unknown init '{other}'"))),
        },
        k_init,
        init_restarts: model.init_restarts,
    })
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)
        .map_err(|e| Error::Config(format!("cannot create {}: {e}", dir.display())))
}

fn out_dir(cfg: &RunConfig, base_dir: &Path, out_override: Option<&Path>) -> PathBuf {
    match out_override {
        Some(p) => p.to_path_buf(),
        None => base_dir.join(&cfg.output.dir),
    }
}

/// `simulate`: draw from the configured generator; writes `data.csv` and
/// `truth.json` into the output directory.
pub fn cmd_simulate(
    cfg: &RunConfig,
    base_dir: &Path,
    seed_override: Option<u64>,
    out_override: Option<&Path>,
) -> Result<(PathBuf, PathBuf)> {
    let (spec, n) = generator_spec(&cfg.data)?;
    let seed = seed_override.unwrap_or(cfg.model.seed);
    let mut rng = RandomSource::new(seed);
    let sim = simulate(&spec, n, &mut rng)?;
    let dir = out_dir(cfg, base_dir, out_override);
    ensure_dir(&dir)?;
    let data_path = dir.join("data.csv");
    let truth_path = dir.join("truth.json");
    fs::write(&data_path, to_csv(&sim.data))?;
    fs::write(&truth_path, truth_json(&spec, &sim)?)?;
    println!(
        "simulated {n} observations ({}) -> {}",
        cfg.data.generator.as_deref().unwrap_or("?"),
        data_path.display()
    );
    Ok((data_path, truth_path))
}

/// `fit`: run one or more independent chains and write JSON-Lines stores
/// plus a `manifest.json` run record.
pub fn cmd_fit(
    cfg: &RunConfig,
    config_path: &Path,
    seed_override: Option<u64>,
    out_override: Option<&Path>,
    chains: usize,
) -> Result<Vec<PathBuf>> {
    if chains == 0 {
        return Err(Error::Config("--chains must be at least 1".into()));
    }
    let base_dir = config_path.parent().unwrap_or(Path::new("."));
    let seed = seed_override.unwrap_or(cfg.model.seed);
    let data = load_dataset(&cfg.data, base_dir, seed)?;
    let dir = out_dir(cfg, base_dir, out_override);
    ensure_dir(&dir)?;

    let configs: Vec<MixtureConfig> = (0..chains)
        .map(|i| build_mixture_config(cfg, &data, seed.wrapping_add(i as u64)))
        .collect::<Result<_>>()?;
    let started = Instant::now();
    let results: Vec<(Result<DrawStore>, u128)> = std::thread::scope(|scope| {
        let handles: Vec<_> = configs
            .iter()
            .map(|c| {
                let data = &data;
                scope.spawn(move || {
                    let t = Instant::now();
                    (run_chain(data, c), t.elapsed().as_millis())
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });

    let mut paths = Vec::new();
    let mut timings = Vec::new();
    for (i, (res, ms)) in results.into_iter().enumerate() {
        let store = res?;
        let path = if chains == 1 {
            dir.join("store.jsonl")
        } else {
            dir.join(format!("store_{}.jsonl", i + 1))
        };
        write_store_to_path(&store, &path)?;
        println!(
            "chain {}: seed {} -> {} ({} records, {} ms)",
            i + 1,
            store.config.seed,
            path.display(),
            store.records.len(),
            ms
        );
        paths.push(path);
        timings.push(ms);
    }

    let config_bytes = fs::read(config_path)?;
    let manifest = serde_json::json!({
        "seed": seed,
        "chains": chains,
        "config_path": config_path.display().to_string(),
        "config_sha256": format!("{:x}", Sha256::digest(&config_bytes)),
        "stores": paths.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
        "chain_ms": timings,
        "total_ms": started.elapsed().as_millis() as u64,
    });
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(paths)
}

#[derive(Debug, Clone, Default)]
pub struct ClipsOverrides {
    pub functional: Option<String>,
    pub min_fill: Option<f64>,
    pub restarts: Option<usize>,
    pub kplus: Option<usize>,
    pub seed: Option<u64>,
}

/// `clips`: post-process a draw store; writes `result.json`, `ppr.csv`, and
/// `modal_partition.csv` next to it (or into `--out`).
pub fn cmd_clips(
    store_path: &Path,
    section: &ClipsSection,
    over: &ClipsOverrides,
    out_override: Option<&Path>,
) -> Result<PathBuf> {
    let store = read_store_from_path(store_path)?;
    let functional_name = over
        .functional
        .clone()
        .unwrap_or_else(|| section.functional.clone());
    let options = ClipsOptions {
        functional: FunctionalSpec::parse(&functional_name)?,
        min_fill_fraction: over.min_fill.unwrap_or(section.min_fill),
        kmeans_restarts: over.restarts.unwrap_or(section.restarts),
        kplus_override: over.kplus.or(section.kplus),
    };
    let seed = over
        .seed
        .or(section.seed)
        .unwrap_or(store.config.seed.wrapping_add(0x5eed));
    let mut rng = RandomSource::new(seed);
    let result = match run_clips(&store, &options, &mut rng) {
        Ok(r) => r,
        Err(Error::EmptyStratum(msg)) => {
            // Make the failure actionable: show how many iterations each
            // alternative K-hat would retain.
            let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
            for rec in &store.records {
                *counts.entry(rec.k_plus).or_insert(0) += 1;
            }
            let listing: Vec<String> = counts
                .iter()
                .map(|(k, c)| format!("K+={k}: {c} draws"))
                .collect();
            return Err(Error::EmptyStratum(format!(
                "{msg}; draws available per K+ ({}) — retry with --kplus or --min-fill",
                listing.join(", ")
            )));
        }
        Err(e) => return Err(e),
    };
    let dir = match out_override {
        Some(p) => p.to_path_buf(),
        None => store_path.parent().unwrap_or(Path::new(".")).to_path_buf(),
    };
    ensure_dir(&dir)?;
    let result_path = dir.join("result.json");
    fs::write(&result_path, clips_core::clips::result_json(&result)?)?;
    fs::write(dir.join("ppr.csv"), clips_core::clips::ppr_csv(&result))?;
    fs::write(
        dir.join("modal_partition.csv"),
        clips_core::clips::modal_partition_csv(&result),
    )?;
    println!(
        "K_hat_plus = {}, nu = {:.4} ({} non-permutations of {} stratified draws, {} identified)",
        result.k_hat_plus,
        result.nu,
        result.m_nu,
        result.m_strat,
        result.identified_store.records.len()
    );
    Ok(result_path)
}

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
struct ResultFile {
    k_hat_plus: usize,
    kplus_posterior: BTreeMap<String, f64>,
    nu: f64,
    m_strat: usize,
    m_nu: usize,
    identified_count: usize,
    summaries: Vec<SummaryFile>,
    /// One-based.
    modal_partition: Vec<usize>,
}

#[derive(Debug, Deserialize)]
struct SummaryFile {
    eta_mean: f64,
    eta_sd: f64,
    param_mean: Vec<f64>,
    param_sd: Vec<f64>,
}

/// `report`: print a human-readable summary of a CliPS result; with a truth
/// file, also a confusion matrix, accuracy, and adjusted Rand index.
pub fn cmd_report(result_path: &Path, truth_path: Option<&Path>) -> Result<String> {
    let text = fs::read_to_string(result_path)
        .map_err(|e| Error::Data(format!("cannot read {}: {e}", result_path.display())))?;
    let result: ResultFile =
        serde_json::from_str(&text).map_err(|e| Error::Data(format!("bad result file: {e}")))?;

    let mut out = String::new();
    out.push_str(&format!("Estimated number of clusters: {}\n", result.k_hat_plus));
    out.push_str("Posterior of K+:\n");
    for (k, p) in &result.kplus_posterior {
        out.push_str(&format!("  K+ = {k}: {p:.4}\n"));
    }
    out.push_str(&format!(
        "Non-permutation rate nu = {:.4} ({} of {} stratified draws; {} identified)\n",
        result.nu, result.m_nu, result.m_strat, result.identified_count
    ));
    out.push_str("\nCluster summaries (posterior mean [sd]):\n");
    for (j, s) in result.summaries.iter().enumerate() {
        out.push_str(&format!("  cluster {}: eta = {:.4} [{:.4}]\n", j + 1, s.eta_mean, s.eta_sd));
        let params: Vec<String> = s
            .param_mean
            .iter()
            .zip(&s.param_sd)
            .map(|(m, sd)| format!("{m:.4} [{sd:.4}]"))
            .collect();
        out.push_str(&format!("    params: {}\n", params.join(", ")));
    }
    let mut sizes: BTreeMap<usize, usize> = BTreeMap::new();
    for &c in &result.modal_partition {
        *sizes.entry(c).or_insert(0) += 1;
    }
    out.push_str("\nModal partition sizes:\n");
    for (c, n) in &sizes {
        out.push_str(&format!("  cluster {c}: {n}\n"));
    }

    if let Some(tp) = truth_path {
        let truth_text = fs::read_to_string(tp)
            .map_err(|e| Error::Data(format!("cannot read {}: {e}", tp.display())))?;
        let truth = truth_allocations(&truth_text)?;
        let partition: Vec<usize> = result.modal_partition.iter().map(|&c| c - 1).collect();
        if truth.len() != partition.len() {
            return Err(Error::Data(format!(
                "truth has {} allocations but the partition has {}",
                truth.len(),
                partition.len()
            )));
        }
        let (accuracy, ari) = clips_core::clips::compare_partition(&partition, &truth)?;
        let ka = partition.iter().max().unwrap() + 1;
        let kb = truth.iter().max().unwrap() + 1;
        let mut conf = vec![vec![0usize; kb]; ka];
        for (&p, &t) in partition.iter().zip(&truth) {
            conf[p][t] += 1;
        }
        out.push_str("\nConfusion matrix (rows: modal clusters, cols: true classes):\n");
        for (i, row) in conf.iter().enumerate() {
            let cells: Vec<String> = row.iter().map(|c| format!("{c:6}")).collect();
            out.push_str(&format!("  cluster {}: {}\n", i + 1, cells.join(" ")));
        }
        out.push_str(&format!("Accuracy (best label matching): {accuracy:.4}\n"));
        out.push_str(&format!("Adjusted Rand index: {ari:.4}\n"));
    }
    print!("{out}");
    Ok(out)
}
