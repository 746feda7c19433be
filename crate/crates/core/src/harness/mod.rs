//! Experiment designs run end to end from a configuration: model
//! evaluation on a train/test split, robustness to missing data and latent
//! columns, the effect of the evaluation scale, and estimator benchmarks on
//! Gaussian pairs with known divergence.
//!
//! Every random stream is derived from the configuration seed with a label
//! naming its purpose, so identical configurations give identical tables.
//! Runs with the same seed share streams where they overlap: the `p = 0`
//! row of a missing-data run equals the test row of an evaluation run.

mod config;
mod report;

use std::path::{Path, PathBuf};
use std::time::Instant;

pub use config::{
    BenchmarkCase, BenchmarkFile, BenchmarkSpec, DataSource, EstimatorKind, ExperimentConfig, ExperimentKind,
    GaussianSpec, Model, ModelEntry,
};
pub use report::{manifest_path, median, summarize, write_outputs, write_rows, OutputPaths, ResultRow, SummaryRow, COLUMNS};

use crate::data::{dedup_rows, inject_mcar, load_csv, split_half, Dataset};
use crate::error::{Error, Result};
use crate::kld::{kld_est_bc, kld_est_nn, kld_gaussian_analytic};
use crate::mixed::kld_est_mixed;
use crate::models::{fit_margins, fit_model, marginalize_columns, sample_model, FitOptions, MarginModel, ModelKind};
use crate::seed::derive;
use crate::synth::{gaussian, matrix};
use crate::uq::subsample_ci_with_distribution;

/// Removes repeated rows before nearest-neighbour estimation. Purely
/// discrete data keeps its multiplicities, which carry the frequencies.
pub fn dedup_for_estimation(ds: &Dataset) -> Dataset {
    if ds.d_continuous() == 0 {
        ds.clone()
    } else {
        dedup_rows(ds)
    }
}

struct Estimate {
    value: f64,
    ci: Option<(f64, f64)>,
    failures: usize,
}

fn estimate<F>(cfg: &ExperimentConfig, x: &Dataset, y: &Dataset, ci_label: &str, estimator: F) -> Result<Estimate>
where
    F: Fn(&Dataset, &Dataset) -> Result<f64> + Sync,
{
    if !cfg.ci {
        return Ok(Estimate {
            value: estimator(x, y)?,
            ci: None,
            failures: 0,
        });
    }
    let sub = cfg.subsampling.with_seed(derive(cfg.seed, ci_label, &[]));
    let (e, dist) = subsample_ci_with_distribution(x, y, estimator, &sub)?;
    Ok(Estimate {
        value: e.value,
        ci: e.ci,
        failures: dist.failures,
    })
}

fn mixed_value(x: &Dataset, y: &Dataset) -> Result<f64> {
    kld_est_mixed(x, y).map(|e| e.value)
}

struct Cell<'a> {
    cfg: &'a ExperimentConfig,
    model: &'a str,
    scenario: &'a str,
    param: Option<f64>,
    n_train: usize,
}

impl Cell<'_> {
    fn row(&self, n_test: usize, m: usize, result: Result<Estimate>) -> ResultRow {
        let mut row = ResultRow {
            experiment: self.cfg.id(),
            model: self.model.to_string(),
            estimator: "mixed".into(),
            scenario: self.scenario.to_string(),
            param: self.param,
            kl_estimate: None,
            ci_lower: None,
            ci_upper: None,
            n_train: self.n_train,
            n_test,
            m_effective: m,
            failures: 0,
            truth: None,
            seed: self.cfg.seed,
            status: "ok".into(),
        };
        match result {
            Ok(e) => {
                row.kl_estimate = Some(e.value);
                row.ci_lower = e.ci.map(|c| c.0);
                row.ci_upper = e.ci.map(|c| c.1);
                row.failures = e.failures;
            }
            Err(e) => row.status = format!("error: {}", e),
        }
        row
    }

    fn failed(&self, n_test: usize, err: Error) -> ResultRow {
        self.row(n_test, 0, Err(err))
    }

    fn skipped(&self, n_test: usize, reason: &str) -> ResultRow {
        let mut r = self.row(n_test, 0, Err(Error::InvalidArgument(String::new())));
        r.status = format!("skipped: {}", reason);
        r
    }

    /// Mixed-data estimate of `x` against a (deduplicated) model sample.
    fn evaluate(&self, x: &Dataset, sample: &Dataset, ci_label: &str) -> ResultRow {
        let y = dedup_for_estimation(sample);
        let m = y.n_rows();
        self.row(x.n_rows(), m, estimate(self.cfg, x, &y, ci_label, mixed_value))
    }
}

fn ci_label(model: &str, scenario: &str) -> String {
    format!("ci/{}/{}", model, scenario)
}

/// Fits `model` on `train` and draws `cfg.m` rows; external models load
/// their sample CSV against the training schema.
fn model_sample(cfg: &ExperimentConfig, model: &Model, train: &Dataset, p: Option<f64>) -> Result<Dataset> {
    match model {
        Model::Builtin(kind) => {
            let opts = FitOptions {
                allow_available_case_gauss: cfg.available_case_gauss,
            };
            let fitted = fit_model(*kind, train, opts)?;
            sample_model(&fitted, cfg.m, derive(cfg.seed, &format!("sample/{}", kind.name()), &[]))
        }
        Model::External { path, .. } => {
            let path = match p {
                Some(p) => path.replace("{p}", &p.to_string()),
                None => path.clone(),
            };
            let token = cfg.data.as_ref().map(|d| d.missing_token.as_str()).unwrap_or("");
            let sample = load_csv(cfg.resolve(&path), train.schema(), token)?;
            if sample.has_missing() {
                return Err(Error::MissingValues(format!("external sample {} has missing cells", path)));
            }
            Ok(sample)
        }
    }
}

/// The deduplicated dataset split in half.
fn train_test(cfg: &ExperimentConfig) -> Result<(Dataset, Dataset)> {
    let data = dedup_for_estimation(&cfg.load_data()?);
    split_half(&data, derive(cfg.seed, "split", &[]))
}

/// Fits every model on the training half and estimates the divergence of
/// both halves from the model sample.
pub fn run_eval(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let (train, test) = train_test(cfg)?;
    let mut rows = Vec::new();
    for model in cfg.model_list()? {
        let name = model.name();
        let cell = |scenario| Cell {
            cfg,
            model: name,
            scenario,
            param: None,
            n_train: train.n_rows(),
        };
        match model_sample(cfg, &model, &train, None) {
            Ok(sample) => {
                for (scenario, x) in [("train", &train), ("test", &test)] {
                    rows.push(cell(scenario).evaluate(x, &sample, &ci_label(name, scenario)));
                }
            }
            Err(e) => {
                rows.push(cell("train").failed(train.n_rows(), clone_err(&e)));
                rows.push(cell("test").failed(test.n_rows(), e));
            }
        }
    }
    Ok(rows)
}

fn clone_err(e: &Error) -> Error {
    Error::Fit(e.to_string())
}

/// Injects MCAR cells into the training half at each fraction, refits, and
/// estimates against the complete test half.
pub fn run_missing(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let (train, test) = train_test(cfg)?;
    let columns: Vec<String> = match &cfg.missing_columns {
        Some(c) => c.clone(),
        None => train.schema().columns().iter().map(|c| c.name.clone()).collect(),
    };
    let mut rows = Vec::new();
    for model in cfg.model_list()? {
        let name = model.name();
        for &p in &cfg.missing_fractions {
            let cell = Cell {
                cfg,
                model: name,
                scenario: "test",
                param: Some(p),
                n_train: train.n_rows(),
            };
            let sample = inject_mcar(&train, p, &columns, derive(cfg.seed, "mcar", &[]))
                .and_then(|masked| model_sample(cfg, &model, &masked, Some(p)));
            rows.push(match sample {
                Ok(s) => cell.evaluate(&test, &s, &ci_label(name, "test")),
                Err(e) => cell.failed(test.n_rows(), e),
            });
        }
    }
    Ok(rows)
}

/// Compares models fitted on the observed columns alone (`direct`) with
/// models fitted on all columns whose samples are then restricted to the
/// observed ones (`marginalized`).
pub fn run_latent(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let (train, test) = train_test(cfg)?;
    let observed = cfg.observed.clone().expect("validated");
    let test_o = dedup_for_estimation(&marginalize_columns(&test, &observed)?);
    let train_o = marginalize_columns(&train, &observed)?;
    let latent_discrete = train
        .schema()
        .columns()
        .iter()
        .any(|c| !observed.contains(&c.name) && c.kind == crate::data::ColumnKind::Discrete);
    let label = |name: &str| ci_label(name, "latent");
    let mut rows = Vec::new();
    for model in cfg.model_list()? {
        let name = model.name();
        let cell = |scenario| Cell {
            cfg,
            model: name,
            scenario,
            param: None,
            n_train: train.n_rows(),
        };
        if let Model::Builtin(_) = model {
            let direct = model_sample(cfg, &model, &train_o, None);
            rows.push(match direct {
                Ok(s) => cell("direct").evaluate(&test_o, &s, &label(name)),
                Err(e) => cell("direct").failed(test_o.n_rows(), e),
            });
        }
        if model == Model::Builtin(ModelKind::GaussDist) && latent_discrete {
            rows.push(cell("marginalized").skipped(test_o.n_rows(), "GaussDist cannot model discrete latent columns"));
            continue;
        }
        let marginal = model_sample(cfg, &model, &train, None).and_then(|s| marginalize_columns(&s, &observed));
        rows.push(match marginal {
            Ok(s) => cell("marginalized").evaluate(&test_o, &s, &label(name)),
            Err(e) => cell("marginalized").failed(test_o.n_rows(), e),
        });
    }
    Ok(rows)
}

/// Maps continuous cells through the training margins without clamping.
fn uniform_scale(ds: &Dataset, margins: &[MarginModel]) -> Result<Dataset> {
    let dc = ds.d_continuous();
    let values = ds
        .continuous_values()
        .iter()
        .enumerate()
        .map(|(k, &v)| if v.is_nan() { v } else { margins[k % dc].cdf(v) })
        .collect();
    ds.with_continuous(values)
}

/// Estimates each model's divergence on the original scale and on the
/// uniform scale defined by margins fitted to the training half.
pub fn run_scale(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let (train, test) = train_test(cfg)?;
    if train.d_continuous() == 0 {
        return Err(Error::InvalidArgument("scale experiment needs continuous columns".into()));
    }
    let margins = fit_margins(&train)?;
    let test_u = dedup_for_estimation(&uniform_scale(&test, &margins)?);
    let mut rows = Vec::new();
    for model in cfg.model_list()? {
        let name = model.name();
        let cell = |scenario| Cell {
            cfg,
            model: name,
            scenario,
            param: None,
            n_train: train.n_rows(),
        };
        match model_sample(cfg, &model, &train, None) {
            Ok(sample) => {
                rows.push(cell("original").evaluate(&test, &sample, &ci_label(name, "test")));
                rows.push(match uniform_scale(&sample, &margins) {
                    Ok(s) => cell("uniform").evaluate(&test_u, &s, &ci_label(name, "test")),
                    Err(e) => cell("uniform").failed(test_u.n_rows(), e),
                });
            }
            Err(e) => {
                rows.push(cell("original").failed(test.n_rows(), clone_err(&e)));
                rows.push(cell("uniform").failed(test_u.n_rows(), e));
            }
        }
    }
    Ok(rows)
}

/// Draws `x ~ p` and `y ~ q` for each Gaussian case and replicate and
/// reports the estimate, its interval and the closed-form divergence.
pub fn run_benchmark(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let spec = cfg
        .benchmark
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("benchmark section missing".into()))?;
    let mut rows = Vec::new();
    for (c, case) in spec.cases.iter().enumerate() {
        let (pc, qc) = (matrix(&case.p.cov)?, matrix(&case.q.cov)?);
        let truth = kld_gaussian_analytic(&case.p.mean, &pc, &case.q.mean, &qc)?;
        for r in 0..spec.replicates {
            let coords = [c as u64, r as u64];
            let drawn = gaussian(&case.p.mean, &pc, case.n, derive(cfg.seed, "bench/x", &coords)).and_then(|x| {
                Ok((x, gaussian(&case.q.mean, &qc, case.m, derive(cfg.seed, "bench/y", &coords))?))
            });
            for (e, est) in spec.estimators.iter().enumerate() {
                let k = spec.k;
                let estimator = move |x: &Dataset, y: &Dataset| -> Result<f64> {
                    let (xp, yp) = (x.continuous_points()?, y.continuous_points()?);
                    match est {
                        EstimatorKind::Bc => kld_est_bc(&xp, &yp),
                        EstimatorKind::Nn => kld_est_nn(&xp, &yp, k),
                    }
                    .map(|v| v.value)
                };
                let cell = Cell {
                    cfg,
                    model: &case.name,
                    scenario: "replicate",
                    param: Some(r as f64),
                    n_train: 0,
                };
                let mut row = match &drawn {
                    Ok((x, y)) => {
                        let label = format!("bench/ci/{}/{}/{}", c, r, e);
                        cell.row(x.n_rows(), y.n_rows(), estimate(cfg, x, y, &label, estimator))
                    }
                    Err(err) => cell.failed(case.n, clone_err(err)),
                };
                row.estimator = est.name().to_string();
                row.truth = Some(truth);
                rows.push(row);
            }
        }
    }
    Ok(rows)
}

/// Rows of a finished run, plus per-experiment extras.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub rows: Vec<ResultRow>,
    pub summary: Vec<SummaryRow>,
    /// Wall-clock seconds, when requested.
    pub timings: Vec<(String, f64)>,
}

/// Runs the experiment named in `cfg`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let start = Instant::now();
    let rows = match cfg.experiment {
        ExperimentKind::Eval => run_eval(cfg)?,
        ExperimentKind::Missing => run_missing(cfg)?,
        ExperimentKind::Latent => run_latent(cfg)?,
        ExperimentKind::Scale => run_scale(cfg)?,
        ExperimentKind::Benchmark => run_benchmark(cfg)?,
    };
    let summary = if cfg.experiment == ExperimentKind::Benchmark {
        summarize(&rows)
    } else {
        Vec::new()
    };
    let timings = if cfg.timings {
        vec![("total_seconds".to_string(), start.elapsed().as_secs_f64())]
    } else {
        Vec::new()
    };
    Ok(RunOutput { rows, summary, timings })
}

/// Default results path: `<config stem>_results.csv` next to the config.
pub fn default_output(cfg: &ExperimentConfig, config_path: &Path) -> PathBuf {
    match &cfg.output {
        Some(o) => cfg.resolve(o),
        None => {
            let stem = config_path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "run".into());
            cfg.base_dir.join(format!("{}_results.csv", stem))
        }
    }
}

/// Runs `cfg` and writes the results CSV and manifest to `results`.
pub fn run_and_write(cfg: &ExperimentConfig, results: &Path) -> Result<(RunOutput, OutputPaths)> {
    let out = run_experiment(cfg)?;
    let config = serde_json::to_value(cfg).map_err(|e| Error::Json(e.to_string()))?;
    let timings = cfg.timings.then_some(out.timings.as_slice());
    let paths = write_outputs(results, &cfg.id(), config, &out.rows, out.summary.clone(), timings)?;
    Ok((out, paths))
}
