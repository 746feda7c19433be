//! Experiment configuration files.
//!
//! ```json
//! {
//!   "id": "nhanes-eval",
//!   "experiment": "eval",
//!   "data": {"path": "train.csv", "schema": "schema.json", "missing_token": "NA"},
//!   "models": ["gaussdist", "indepcop", "gausscop",
//!              {"name": "ParVine", "external": "vine_sample.csv"}],
//!   "m": 10000,
//!   "subsampling": {"s": 1000, "alpha": 0.05},
//!   "seed": 7
//! }
//! ```
//!
//! `data` may instead hold `{"synthetic": {...}}` (see
//! [`SyntheticSpec`](crate::synth::SyntheticSpec)). Relative paths resolve
//! against the directory of the configuration file. The subsampling `seed`
//! field is ignored here: every stream derives from the top-level `seed`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{infer_schema, load_csv, Dataset, Schema};
use crate::error::{Error, Result};
use crate::models::ModelKind;
use crate::synth::{matrix, SyntheticSpec};
use crate::uq::SubsamplingConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Eval,
    Missing,
    Latent,
    Scale,
    Benchmark,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Eval => "eval",
            ExperimentKind::Missing => "missing",
            ExperimentKind::Latent => "latent",
            ExperimentKind::Scale => "scale",
            ExperimentKind::Benchmark => "benchmark",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSource {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    /// Schema file; inferred from the CSV when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<String>,
    #[serde(default)]
    pub missing_token: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticSpec>,
}

/// A model entry: a built-in model name or an externally generated sample.
/// For missing-data runs an external path may contain `{p}`, replaced by
/// each missing fraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelEntry {
    Builtin(String),
    External { name: String, external: String },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Builtin(ModelKind),
    External { name: String, path: String },
}

impl Model {
    pub fn name(&self) -> &str {
        match self {
            Model::Builtin(k) => k.name(),
            Model::External { name, .. } => name,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianSpec {
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkCase {
    pub name: String,
    pub p: GaussianSpec,
    pub q: GaussianSpec,
    pub n: usize,
    pub m: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    /// Bias-corrected estimator.
    Bc,
    /// Fixed-k estimator.
    Nn,
}

impl EstimatorKind {
    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Bc => "bc",
            EstimatorKind::Nn => "nn",
        }
    }
}

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

fn default_estimators() -> Vec<EstimatorKind> {
    vec![EstimatorKind::Bc]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkSpec {
    pub cases: Vec<BenchmarkCase>,
    #[serde(default = "one")]
    pub replicates: usize,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<EstimatorKind>,
    /// Neighbour order for the fixed-k estimator.
    #[serde(default = "one")]
    pub k: usize,
}

fn default_m() -> usize {
    10_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub experiment: ExperimentKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<DataSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub models: Option<Vec<ModelEntry>>,
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default)]
    pub subsampling: SubsamplingConfig,
    /// Compute subsampling confidence intervals.
    #[serde(default = "yes")]
    pub ci: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub missing_fractions: Vec<f64>,
    /// Columns receiving MCAR cells; all columns when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub missing_columns: Option<Vec<String>>,
    /// Observed columns of a latent-variable run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observed: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub benchmark: Option<BenchmarkSpec>,
    /// Permit available-case GaussDist fits on incomplete data.
    #[serde(default)]
    pub available_case_gauss: bool,
    /// Results CSV; the manifest goes next to it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    /// Record wall-clock timings in the manifest (makes it non-reproducible).
    #[serde(default)]
    pub timings: bool,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// Stand-alone benchmark file accepted by the `benchmark` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkFile {
    #[serde(default)]
    pub id: Option<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub subsampling: SubsamplingConfig,
    #[serde(default = "yes")]
    pub ci: bool,
    #[serde(default)]
    pub output: Option<String>,
    #[serde(default)]
    pub timings: bool,
    pub cases: Vec<BenchmarkCase>,
    #[serde(default = "one")]
    pub replicates: usize,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<EstimatorKind>,
    #[serde(default = "one")]
    pub k: usize,
}

impl From<BenchmarkFile> for ExperimentConfig {
    fn from(b: BenchmarkFile) -> Self {
        ExperimentConfig {
            id: b.id,
            experiment: ExperimentKind::Benchmark,
            data: None,
            models: None,
            m: default_m(),
            subsampling: b.subsampling,
            ci: b.ci,
            seed: b.seed,
            missing_fractions: Vec::new(),
            missing_columns: None,
            observed: None,
            benchmark: Some(BenchmarkSpec {
                cases: b.cases,
                replicates: b.replicates,
                estimators: b.estimators,
                k: b.k,
            }),
            available_case_gauss: false,
            output: b.output,
            timings: b.timings,
            base_dir: PathBuf::new(),
        }
    }
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn parent_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

impl ExperimentConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Json(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut cfg = ExperimentConfig::from_json_str(&read_text(path)?)?;
        cfg.base_dir = parent_dir(path);
        Ok(cfg)
    }

    /// Reads a stand-alone benchmark file.
    pub fn from_benchmark_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file: BenchmarkFile =
            serde_json::from_str(&read_text(path)?).map_err(|e| Error::Json(e.to_string()))?;
        let mut cfg = ExperimentConfig::from(file);
        cfg.validate()?;
        cfg.base_dir = parent_dir(path);
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn id(&self) -> String {
        self.id.clone().unwrap_or_else(|| self.experiment.name().to_string())
    }

    pub fn resolve(&self, path: &str) -> PathBuf {
        let p = Path::new(path);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Models in configuration order, with defaults per experiment.
    pub fn model_list(&self) -> Result<Vec<Model>> {
        let entries = match &self.models {
            Some(m) => m.clone(),
            None if self.experiment == ExperimentKind::Missing => vec![ModelEntry::Builtin("gausscop".into())],
            None => ModelKind::ALL
                .iter()
                .map(|k| ModelEntry::Builtin(k.name().to_ascii_lowercase()))
                .collect(),
        };
        let models: Vec<Model> = entries
            .into_iter()
            .map(|e| match e {
                ModelEntry::Builtin(s) => s.parse().map(Model::Builtin),
                ModelEntry::External { name, external } => Ok(Model::External { name, path: external }),
            })
            .collect::<Result<_>>()?;
        for (i, a) in models.iter().enumerate() {
            if models[..i].iter().any(|b| b.name() == a.name()) {
                return Err(Error::InvalidArgument(format!("model {:?} listed twice", a.name())));
            }
        }
        Ok(models)
    }

    pub fn validate(&self) -> Result<()> {
        self.subsampling.validate()?;
        if self.m < 2 {
            return Err(Error::InvalidArgument("m must be at least 2".into()));
        }
        let models = self.model_list()?;
        if models.is_empty() && self.experiment != ExperimentKind::Benchmark {
            return Err(Error::InvalidArgument("no models configured".into()));
        }
        if self.experiment == ExperimentKind::Benchmark {
            let b = self
                .benchmark
                .as_ref()
                .ok_or_else(|| Error::InvalidArgument("benchmark experiment needs a benchmark section".into()))?;
            if b.cases.is_empty() || b.replicates == 0 || b.estimators.is_empty() || b.k == 0 {
                return Err(Error::InvalidArgument(
                    "benchmark needs cases, replicates >= 1, estimators and k >= 1".into(),
                ));
            }
            for c in &b.cases {
                let d = c.p.mean.len();
                if d == 0 || c.q.mean.len() != d || c.n < 2 || c.m < 1 {
                    return Err(Error::InvalidArgument(format!("benchmark case {:?} is malformed", c.name)));
                }
                for g in [&c.p, &c.q] {
                    let cov = matrix(&g.cov)?;
                    if cov.nrows() != d || crate::linalg::cholesky_lower(&cov).is_err() {
                        return Err(Error::InvalidArgument(format!(
                            "benchmark case {:?}: covariance is not {}x{} positive definite",
                            c.name, d, d
                        )));
                    }
                }
            }
            return Ok(());
        }
        let data = self
            .data
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("data section missing".into()))?;
        if data.path.is_some() == data.synthetic.is_some() {
            return Err(Error::InvalidArgument("data needs exactly one of path and synthetic".into()));
        }
        match self.experiment {
            ExperimentKind::Missing => {
                if self.missing_fractions.is_empty() {
                    return Err(Error::InvalidArgument("missing_fractions is empty".into()));
                }
                if self.missing_fractions.iter().any(|p| !(0.0..1.0).contains(p)) {
                    return Err(Error::InvalidArgument("missing fractions must lie in [0, 1)".into()));
                }
                for m in &models {
                    if let Model::Builtin(k) = m {
                        if *k != ModelKind::GaussCop {
                            return Err(Error::InvalidArgument(format!(
                                "{} is excluded from missing-data runs",
                                k
                            )));
                        }
                    }
                }
            }
            ExperimentKind::Latent => {
                let obs = self
                    .observed
                    .as_ref()
                    .ok_or_else(|| Error::InvalidArgument("latent run needs observed columns".into()))?;
                if obs.is_empty() {
                    return Err(Error::InvalidArgument("observed column list is empty".into()));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Loads (or generates) the dataset named by the `data` section.
    pub fn load_data(&self) -> Result<Dataset> {
        let data = self
            .data
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("data section missing".into()))?;
        if let Some(spec) = &data.synthetic {
            return spec.generate(crate::seed::derive(self.seed, "data", &[]));
        }
        let path = self.resolve(data.path.as_deref().expect("validated"));
        let schema = match &data.schema {
            Some(s) => Schema::from_json_file(self.resolve(s))?,
            None => infer_schema(&path, &data.missing_token)?,
        };
        let ds = load_csv(&path, &schema, &data.missing_token)?;
        if let Some(obs) = &self.observed {
            for name in obs {
                if ds.schema().index_of(name).is_none() {
                    return Err(Error::UnknownColumn(name.clone()));
                }
            }
        }
        if let Some(cols) = &self.missing_columns {
            for name in cols {
                if ds.schema().index_of(name).is_none() {
                    return Err(Error::UnknownColumn(name.clone()));
                }
            }
        }
        Ok(ds)
    }
}
