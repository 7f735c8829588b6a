//! JSON Lines persistence for a [`DrawStore`]: line 1 is a header record
//! (schema version plus a config snapshot), then one record per iteration.
//! Matrices are row-major nested arrays; every real number is written with
//! 17 significant digits so a write/read round trip reproduces the exact
//! bit pattern.

use std::io::{self, Write as _};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{
    CategoricalComponent, CategoricalHyper, Component, GaussianComponent, GaussianHyper, Hyper,
    MarkovChainComponent, MarkovHyper,
};
use crate::sampler::{
    DrawRecord, DrawStore, GammaRule, InitMethod, KMode, KernelKind, MixtureConfig,
};
use crate::spd::SpdMatrix;

pub const SCHEMA_VERSION: u32 = 1;

/// serde_json formatter that writes every float with 17 significant digits
/// (`{:.16e}`), enough to reproduce any f64 exactly on read-back.
struct SigDigitFormatter;

impl serde_json::ser::Formatter for SigDigitFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        if !value.is_finite() {
            return Err(io::Error::new(
                io::ErrorKind::InvalidData,
                "non-finite float in draw store",
            ));
        }
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W>(&mut self, writer: &mut W, value: f32) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        self.write_f64(writer, value as f64)
    }
}

fn to_json_line<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SigDigitFormatter);
    value.serialize(&mut ser)?;
    String::from_utf8(buf).map_err(|e| Error::Internal(format!("non-UTF8 JSON: {e}")))
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn rows_to_spd(rows: &[Vec<f64>]) -> Result<SpdMatrix> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::Data("matrix rows are not square".into()));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    SpdMatrix::new(DMatrix::from_row_slice(n, n, &flat))
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum KModeJson {
    Fixed { k: usize },
    Bnb { a: f64, b: f64, c: f64 },
    FixedSparse { k: usize },
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum GammaRuleJson {
    Static { gamma_k: f64 },
    Dynamic { gamma: f64 },
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kernel", rename_all = "snake_case")]
enum HyperJson {
    Gaussian {
        mean_loc: Vec<f64>,
        mean_cov: Vec<Vec<f64>>,
        cov_shape: f64,
        cov_scale: Vec<Vec<f64>>,
        scale_shape: f64,
        scale_rate: Vec<Vec<f64>>,
    },
    Categorical {
        prior: Vec<Vec<f64>>,
    },
    Markov {
        delta: Vec<Vec<f64>>,
    },
}

impl HyperJson {
    fn from_core(h: &Hyper) -> Self {
        match h {
            Hyper::Gaussian(g) => HyperJson::Gaussian {
                mean_loc: g.mean_loc.iter().copied().collect(),
                mean_cov: matrix_rows(g.mean_cov.matrix()),
                cov_shape: g.cov_shape,
                cov_scale: matrix_rows(g.cov_scale.matrix()),
                scale_shape: g.scale_shape,
                scale_rate: matrix_rows(g.scale_rate.matrix()),
            },
            Hyper::Categorical(c) => HyperJson::Categorical {
                prior: c.prior.clone(),
            },
            Hyper::Markov(m) => HyperJson::Markov {
                delta: m.delta.clone(),
            },
        }
    }

    fn into_core(self) -> Result<Hyper> {
        Ok(match self {
            HyperJson::Gaussian {
                mean_loc,
                mean_cov,
                cov_shape,
                cov_scale,
                scale_shape,
                scale_rate,
            } => Hyper::Gaussian(GaussianHyper {
                mean_loc: DVector::from_vec(mean_loc),
                mean_cov: rows_to_spd(&mean_cov)?,
                cov_shape,
                cov_scale: rows_to_spd(&cov_scale)?,
                scale_shape,
                scale_rate: rows_to_spd(&scale_rate)?,
            }),
            HyperJson::Categorical { prior } => Hyper::Categorical(CategoricalHyper { prior }),
            HyperJson::Markov { delta } => Hyper::Markov(MarkovHyper { delta }),
        })
    }
}

#[derive(Serialize, Deserialize)]
struct ConfigJson {
    kernel: String,
    k_mode: KModeJson,
    gamma_rule: GammaRuleJson,
    hyper: HyperJson,
    burnin: usize,
    draws: usize,
    thin: usize,
    seed: u64,
    init: String,
    k_init: usize,
    init_restarts: usize,
}

impl ConfigJson {
    fn from_core(c: &MixtureConfig) -> Self {
        ConfigJson {
            kernel: match c.kernel {
                KernelKind::Gaussian => "gaussian",
                KernelKind::Categorical => "categorical",
                KernelKind::Markov => "markov",
            }
            .into(),
            k_mode: match c.k_mode {
                KMode::Fixed(k) => KModeJson::Fixed { k },
                KMode::Bnb { a, b, c } => KModeJson::Bnb { a, b, c },
                KMode::FixedSparse(k) => KModeJson::FixedSparse { k },
            },
            gamma_rule: match c.gamma_rule {
                GammaRule::Static(g) => GammaRuleJson::Static { gamma_k: g },
                GammaRule::Dynamic(g) => GammaRuleJson::Dynamic { gamma: g },
            },
            hyper: HyperJson::from_core(&c.hyper),
            burnin: c.burnin,
            draws: c.draws,
            thin: c.thin,
            seed: c.seed,
            init: match c.init {
                InitMethod::KMeans => "kmeans",
                InitMethod::Random => "random",
            }
            .into(),
            k_init: c.k_init,
            init_restarts: c.init_restarts,
        }
    }

    fn into_core(self) -> Result<MixtureConfig> {
        Ok(MixtureConfig {
            kernel: match self.kernel.as_str() {
                "gaussian" => KernelKind::Gaussian,
                "categorical" => KernelKind::Categorical,
                "markov" => KernelKind::Markov,
                other => return Err(Error::Config(format!("unknown kernel '{other}'"))),
            },
            k_mode: match self.k_mode {
                KModeJson::Fixed { k } => KMode::Fixed(k),
                KModeJson::Bnb { a, b, c } => KMode::Bnb { a, b, c },
                KModeJson::FixedSparse { k } => KMode::FixedSparse(k),
            },
            gamma_rule: match self.gamma_rule {
                GammaRuleJson::Static { gamma_k } => GammaRule::Static(gamma_k),
                GammaRuleJson::Dynamic { gamma } => GammaRule::Dynamic(gamma),
            },
            hyper: self.hyper.into_core()?,
            burnin: self.burnin,
            draws: self.draws,
            thin: self.thin,
            seed: self.seed,
            init: match self.init.as_str() {
                "kmeans" => InitMethod::KMeans,
                "random" => InitMethod::Random,
                other => return Err(Error::Config(format!("unknown init '{other}'"))),
            },
            k_init: self.k_init,
            init_restarts: self.init_restarts,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct HeaderJson {
    schema_version: u32,
    config: ConfigJson,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kernel", rename_all = "snake_case")]
enum ThetaJson {
    Gaussian { mu: Vec<f64>, sigma: Vec<Vec<f64>> },
    Categorical { pi: Vec<Vec<f64>> },
    Markov { xi: Vec<Vec<f64>> },
}

impl ThetaJson {
    fn from_core(c: &Component) -> Self {
        match c {
            Component::Gaussian(g) => ThetaJson::Gaussian {
                mu: g.mu.iter().copied().collect(),
                sigma: matrix_rows(g.sigma.matrix()),
            },
            Component::Categorical(c) => ThetaJson::Categorical { pi: c.pi.clone() },
            Component::Markov(m) => ThetaJson::Markov { xi: m.xi.clone() },
        }
    }

    fn into_core(self) -> Result<Component> {
        Ok(match self {
            ThetaJson::Gaussian { mu, sigma } => Component::Gaussian(GaussianComponent {
                mu: DVector::from_vec(mu),
                sigma: rows_to_spd(&sigma)?,
            }),
            ThetaJson::Categorical { pi } => Component::Categorical(CategoricalComponent { pi }),
            ThetaJson::Markov { xi } => Component::Markov(MarkovChainComponent { xi }),
        })
    }
}

#[derive(Serialize, Deserialize)]
struct RecordJson {
    m: usize,
    #[serde(rename = "K")]
    k: usize,
    #[serde(rename = "K_plus")]
    k_plus: usize,
    eta: Vec<f64>,
    theta: Vec<ThetaJson>,
    /// One-based allocation labels.
    #[serde(rename = "S")]
    s: Vec<usize>,
}

/// Serialize the store to JSON Lines text.
pub fn write_store(store: &DrawStore) -> Result<String> {
    let mut out = to_json_line(&HeaderJson {
        schema_version: SCHEMA_VERSION,
        config: ConfigJson::from_core(&store.config),
    })?;
    out.push('\n');
    for rec in &store.records {
        let json = RecordJson {
            m: rec.m,
            k: rec.k,
            k_plus: rec.k_plus,
            eta: rec.eta.clone(),
            theta: rec.theta.iter().map(ThetaJson::from_core).collect(),
            s: rec.s.iter().map(|&si| si + 1).collect(),
        };
        out.push_str(&to_json_line(&json)?);
        out.push('\n');
    }
    Ok(out)
}

/// Parse JSON Lines text back into a [`DrawStore`].
pub fn read_store(text: &str) -> Result<DrawStore> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header_line = lines
        .next()
        .ok_or_else(|| Error::Data("empty draw store".into()))?;
    let header: HeaderJson = serde_json::from_str(header_line)?;
    if header.schema_version != SCHEMA_VERSION {
        return Err(Error::Data(format!(
            "unsupported schema version {}",
            header.schema_version
        )));
    }
    let config = header.config.into_core()?;
    let mut records = Vec::new();
    let mut last_m = 0;
    for (i, line) in lines.enumerate() {
        let rec: RecordJson = serde_json::from_str(line)?;
        if rec.m <= last_m {
            return Err(Error::Data(format!(
                "record {}: iteration indices must increase",
                i + 1
            )));
        }
        last_m = rec.m;
        if rec.s.iter().any(|&si| si == 0 || si > rec.k) {
            return Err(Error::Data(format!("record {}: label out of 1..K", i + 1)));
        }
        records.push(DrawRecord {
            m: rec.m,
            k: rec.k,
            k_plus: rec.k_plus,
            eta: rec.eta,
            theta: rec
                .theta
                .into_iter()
                .map(ThetaJson::into_core)
                .collect::<Result<_>>()?,
            s: rec.s.into_iter().map(|si| si - 1).collect(),
        });
    }
    Ok(DrawStore { config, records })
}

pub fn write_store_to_path(store: &DrawStore, path: &std::path::Path) -> Result<()> {
    let text = write_store(store)?;
    let mut f = std::fs::File::create(path)?;
    f.write_all(text.as_bytes())?;
    Ok(())
}

pub fn read_store_from_path(path: &std::path::Path) -> Result<DrawStore> {
    read_store(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::run_chain;
    use crate::simulate::{simulate, GeneratorSpec};
    use crate::{kernels, rng::RandomSource};

    pub(super) fn example_store() -> DrawStore {
        let mut rng = RandomSource::new(5);
        let sim = simulate(&GeneratorSpec::Example1, 40, &mut rng).unwrap();
        let r = 6;
        let config = MixtureConfig {
            kernel: KernelKind::Gaussian,
            k_mode: KMode::Bnb { a: 1.0, b: 4.0, c: 3.0 },
            gamma_rule: GammaRule::Dynamic(0.5),
            hyper: Hyper::Gaussian(kernels::GaussianHyper {
                mean_loc: DVector::zeros(r),
                mean_cov: crate::SpdMatrix::scaled_identity(r, 100.0).unwrap(),
                cov_shape: 2.5 + (r as f64 - 1.0) / 2.0,
                cov_scale: crate::SpdMatrix::identity(r),
                scale_shape: 0.5 + (r as f64 - 1.0) / 2.0,
                scale_rate: crate::SpdMatrix::identity(r),
            }),
            burnin: 3,
            draws: 5,
            thin: 2,
            seed: 11,
            init: InitMethod::KMeans,
            k_init: 4,
            init_restarts: 3,
        };
        run_chain(&sim.data, &config).unwrap()
    }

    #[test]
    fn roundtrip_is_identity() {
        let store = example_store();
        let text = write_store(&store).unwrap();
        let back = read_store(&text).unwrap();
        assert_eq!(back, store);
        // And stable under a second pass.
        assert_eq!(write_store(&back).unwrap(), text);
    }

    #[test]
    fn wire_format_has_header_and_one_based_labels() {
        let store = example_store();
        let text = write_store(&store).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 1 + store.records.len());
        let header: serde_json::Value = serde_json::from_str(lines[0]).unwrap();
        assert_eq!(header["schema_version"], 1);
        assert_eq!(header["config"]["kernel"], "gaussian");
        let rec: serde_json::Value = serde_json::from_str(lines[1]).unwrap();
        assert!(rec["S"].as_array().unwrap().iter().all(|v| v.as_u64().unwrap() >= 1));
        assert_eq!(rec["m"].as_u64().unwrap() as usize, store.records[0].m);
        // Floats carry 17 significant digits in scientific notation.
        assert!(lines[1].contains("e-") || lines[1].contains("e0") || lines[1].contains("e1"));
    }

    #[test]
    fn malformed_input_rejected() {
        assert!(read_store("").is_err());
        let store = example_store();
        let text = write_store(&store).unwrap();
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        // Duplicate iteration index violates monotonicity.
        lines.push(lines[1].clone());
        assert!(read_store(&lines.join("\n")).is_err());
    }
}

