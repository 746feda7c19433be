//! Covariate distribution models.
//!
//! * `GaussDist`: multivariate normal on the original scale.
//! * `IndepCop`: nonparametric margins joined by the independence copula.
//! * `GaussCop`: the same margins joined by a Gaussian copula whose
//!   correlation is estimated from normal scores `Φ⁻¹(F̂_j(x_ij))`.
//!
//! Discrete columns are handled by a joint relative-frequency table over
//! category tuples. The continuous part is fitted per stratum when every
//! stratum has at least `max(20, 5·d_c)` rows, and shared otherwise.
//! Missing cells are handled by available-case margins and
//! pairwise-complete correlations.

mod io;
pub mod margin;

use std::collections::HashMap;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Column, Dataset, Schema};
use crate::error::{Error, Result};
use crate::linalg::{cholesky_lower, floor_eigenvalues, norm_cdf, norm_quantile, repair_correlation};
use crate::seed;

pub use margin::{fit_margin, silverman_bandwidth, MarginModel};

/// Rows drawn per RNG stream when sampling.
const DRAW_CHUNK: usize = 512;
const CORR_EIGEN_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "gaussdist")]
    GaussDist,
    #[serde(rename = "indepcop")]
    IndepCop,
    #[serde(rename = "gausscop")]
    GaussCop,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::GaussDist => "GaussDist",
            ModelKind::IndepCop => "IndepCop",
            ModelKind::GaussCop => "GaussCop",
        }
    }

    pub const ALL: [ModelKind; 3] = [ModelKind::GaussDist, ModelKind::IndepCop, ModelKind::GaussCop];
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussdist" | "gauss_dist" => Ok(ModelKind::GaussDist),
            "indepcop" | "indep_cop" => Ok(ModelKind::IndepCop),
            "gausscop" | "gauss_cop" => Ok(ModelKind::GaussCop),
            _ => Err(Error::InvalidArgument(format!("unknown model {:?}", s))),
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FitOptions {
    /// Allow GaussDist on data with missing cells (available-case means,
    /// pairwise-complete covariances).
    pub allow_available_case_gauss: bool,
}

/// Parameters of the continuous block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ContinuousModel {
    /// No continuous columns.
    Empty,
    GaussDist {
        #[serde(serialize_with = "io::ser_vec")]
        mean: Vec<f64>,
        #[serde(serialize_with = "io::ser_mat", deserialize_with = "io::de_mat")]
        cov: DMatrix<f64>,
    },
    IndepCop {
        margins: Vec<MarginModel>,
    },
    GaussCop {
        margins: Vec<MarginModel>,
        #[serde(serialize_with = "io::ser_mat", deserialize_with = "io::de_mat")]
        corr: DMatrix<f64>,
    },
}

impl ContinuousModel {
    pub fn margins(&self) -> Option<&[MarginModel]> {
        match self {
            ContinuousModel::IndepCop { margins } | ContinuousModel::GaussCop { margins, .. } => {
                Some(margins)
            }
            _ => None,
        }
    }

    fn dim(&self) -> usize {
        match self {
            ContinuousModel::Empty => 0,
            ContinuousModel::GaussDist { mean, .. } => mean.len(),
            ContinuousModel::IndepCop { margins } | ContinuousModel::GaussCop { margins, .. } => {
                margins.len()
            }
        }
    }
}

/// Joint relative frequencies of discrete-code tuples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteBlock {
    pub keys: Vec<Vec<u32>>,
    #[serde(serialize_with = "io::ser_vec")]
    pub pmf: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContinuousBlock {
    Shared(ContinuousModel),
    /// One model per entry of [`DiscreteBlock::keys`].
    PerStratum(Vec<ContinuousModel>),
}

/// A fitted model, ready for sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    pub kind: ModelKind,
    schema: Schema,
    labels: Vec<Vec<String>>,
    pub discrete: Option<DiscreteBlock>,
    pub continuous: ContinuousBlock,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    kind: ModelKind,
    schema: Vec<Column>,
    labels: Vec<Vec<String>>,
    discrete: Option<DiscreteBlock>,
    continuous: ContinuousBlock,
}

const FORMAT_TAG: &str = "kldcov-model";

impl FittedModel {
    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn labels(&self) -> &[Vec<String>] {
        &self.labels
    }

    pub fn is_stratified(&self) -> bool {
        matches!(self.continuous, ContinuousBlock::PerStratum(_))
    }

    pub fn to_json(&self) -> String {
        let file = ModelFile {
            format: FORMAT_TAG.into(),
            version: 1,
            kind: self.kind,
            schema: self.schema.columns().to_vec(),
            labels: self.labels.clone(),
            discrete: self.discrete.clone(),
            continuous: self.continuous.clone(),
        };
        serde_json::to_string_pretty(&file).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| Error::Json(e.to_string()))?;
        if file.format != FORMAT_TAG {
            return Err(Error::Json(format!("not a model file (format {:?})", file.format)));
        }
        let schema = Schema::new(file.schema)?;
        let model = FittedModel {
            kind: file.kind,
            schema,
            labels: file.labels,
            discrete: file.discrete,
            continuous: file.continuous,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json() + "\n").map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        FittedModel::from_json(&text)
    }

    fn validate(&self) -> Result<()> {
        let dc = self.schema.n_continuous();
        let models: Vec<&ContinuousModel> = match &self.continuous {
            ContinuousBlock::Shared(m) => vec![m],
            ContinuousBlock::PerStratum(ms) => ms.iter().collect(),
        };
        for m in &models {
            if m.dim() != dc {
                return Err(Error::Dimension(format!(
                    "continuous model has {} columns, schema has {}",
                    m.dim(),
                    dc
                )));
            }
            match m {
                ContinuousModel::GaussDist { cov, .. } => {
                    cholesky_lower(cov)?;
                }
                ContinuousModel::GaussCop { corr, .. } => {
                    cholesky_lower(corr)?;
                }
                _ => {}
            }
        }
        if let Some(block) = &self.discrete {
            let total: f64 = block.pmf.iter().sum();
            if block.keys.len() != block.pmf.len() || (total - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidArgument("discrete pmf must sum to 1".into()));
            }
            if let ContinuousBlock::PerStratum(ms) = &self.continuous {
                if ms.len() != block.keys.len() {
                    return Err(Error::Dimension("one continuous model per stratum expected".into()));
                }
            }
        } else if self.schema.n_discrete() > 0 {
            return Err(Error::InvalidArgument("discrete columns need a discrete block".into()));
        }
        Ok(())
    }
}

/// One margin per continuous column, from the observed cells.
pub fn fit_margins(ds: &Dataset) -> Result<Vec<MarginModel>> {
    (0..ds.d_continuous())
        .map(|s| {
            let (vals, mask) = ds.continuous_column(s);
            fit_margin(&vals, &mask).map_err(|e| {
                let name = &ds.schema().columns()[ds.schema().continuous_indices()[s]].name;
                Error::Fit(format!("column {:?}: {}", name, e))
            })
        })
        .collect()
}

/// Maps each observed continuous cell through its margin, clamped to
/// `[1/(2n), 1 - 1/(2n)]`. Missing cells stay missing.
pub fn to_uniform(ds: &Dataset, margins: &[MarginModel]) -> Result<Dataset> {
    let dc = ds.d_continuous();
    if margins.len() != dc {
        return Err(Error::Dimension(format!(
            "{} margins for {} continuous columns",
            margins.len(),
            dc
        )));
    }
    let values: Vec<f64> = ds
        .continuous_values()
        .par_iter()
        .enumerate()
        .map(|(k, &v)| {
            if v.is_nan() {
                v
            } else {
                let m = &margins[k % dc];
                m.clamp(m.cdf(v))
            }
        })
        .collect();
    ds.with_continuous(values)
}

/// Drops every column not named in `keep`. Kept columns retain schema order.
pub fn marginalize_columns<S: AsRef<str>>(ds: &Dataset, keep: &[S]) -> Result<Dataset> {
    if keep.is_empty() {
        return Err(Error::InvalidArgument("keep at least one column".into()));
    }
    for k in keep {
        if ds.schema().index_of(k.as_ref()).is_none() {
            return Err(Error::UnknownColumn(k.as_ref().to_string()));
        }
    }
    let names: Vec<&str> = ds
        .schema()
        .columns()
        .iter()
        .map(|c| c.name.as_str())
        .filter(|n| keep.iter().any(|k| k.as_ref() == *n))
        .collect();
    ds.select_columns(&names)
}

fn observed_columns(ds: &Dataset) -> Vec<(Vec<f64>, Vec<bool>)> {
    (0..ds.d_continuous()).map(|s| ds.continuous_column(s)).collect()
}

/// Pairwise-complete covariance (or correlation when `standardize`).
fn pairwise_moments(cols: &[(Vec<f64>, Vec<bool>)], min_pairs: usize, standardize: bool) -> Result<DMatrix<f64>> {
    let d = cols.len();
    let mut out = DMatrix::zeros(d, d);
    for j in 0..d {
        for k in j..d {
            let pairs: Vec<(f64, f64)> = (0..cols[j].0.len())
                .filter(|&i| !cols[j].1[i] && !cols[k].1[i])
                .map(|i| (cols[j].0[i], cols[k].0[i]))
                .collect();
            if pairs.len() < min_pairs {
                return Err(Error::Fit(format!(
                    "columns {} and {} share only {} observed rows",
                    j,
                    k,
                    pairs.len()
                )));
            }
            let n = pairs.len() as f64;
            let ma = pairs.iter().map(|p| p.0).sum::<f64>() / n;
            let mb = pairs.iter().map(|p| p.1).sum::<f64>() / n;
            let sab: f64 = pairs.iter().map(|p| (p.0 - ma) * (p.1 - mb)).sum();
            let v = if standardize {
                if j == k {
                    1.0
                } else {
                    let saa: f64 = pairs.iter().map(|p| (p.0 - ma) * (p.0 - ma)).sum();
                    let sbb: f64 = pairs.iter().map(|p| (p.1 - mb) * (p.1 - mb)).sum();
                    if !(saa > 0.0 && sbb > 0.0) {
                        return Err(Error::Fit(format!("columns {} and {} have zero variance", j, k)));
                    }
                    (sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0)
                }
            } else {
                sab / (n - 1.0)
            };
            out[(j, k)] = v;
            out[(k, j)] = v;
        }
    }
    Ok(out)
}

fn gauss_dist_params(ds: &Dataset, opts: FitOptions) -> Result<ContinuousModel> {
    let dc = ds.d_continuous();
    if dc == 0 {
        return Err(Error::Fit("GaussDist needs continuous columns".into()));
    }
    if ds.has_missing() && !opts.allow_available_case_gauss {
        return Err(Error::MissingValues(
            "GaussDist requires complete data (enable available-case fitting to override)".into(),
        ));
    }
    if ds.n_rows() <= dc {
        return Err(Error::Fit(format!(
            "GaussDist needs more rows than columns ({} <= {})",
            ds.n_rows(),
            dc
        )));
    }
    let cols = observed_columns(ds);
    let mean: Vec<f64> = cols
        .iter()
        .map(|(v, m)| {
            let obs: Vec<f64> = v.iter().zip(m).filter(|(_, &mi)| !mi).map(|(&x, _)| x).collect();
            obs.iter().sum::<f64>() / obs.len().max(1) as f64
        })
        .collect();
    let cov = pairwise_moments(&cols, 2, false)?;
    let floor = 1e-10 * cov.trace() / dc as f64;
    let cov = floor_eigenvalues(&cov, floor);
    cholesky_lower(&cov)?;
    Ok(ContinuousModel::GaussDist { mean, cov })
}

fn gauss_cop_params(ds: &Dataset, margins: Vec<MarginModel>) -> Result<ContinuousModel> {
    let dc = ds.d_continuous();
    if margins.len() != dc {
        return Err(Error::Dimension(format!("{} margins for {} continuous columns", margins.len(), dc)));
    }
    let cols: Vec<(Vec<f64>, Vec<bool>)> = observed_columns(ds)
        .into_iter()
        .zip(&margins)
        .map(|((v, m), margin)| {
            let z = v
                .iter()
                .zip(&m)
                .map(|(&x, &miss)| if miss { f64::NAN } else { norm_quantile(margin.clamp(margin.cdf(x))) })
                .collect();
            (z, m)
        })
        .collect();
    let corr = pairwise_moments(&cols, 3, true)?;
    let corr = repair_correlation(&corr, CORR_EIGEN_FLOOR);
    Ok(ContinuousModel::GaussCop { margins, corr })
}

fn continuous_params(kind: ModelKind, ds: &Dataset, opts: FitOptions) -> Result<ContinuousModel> {
    if ds.d_continuous() == 0 {
        return Ok(ContinuousModel::Empty);
    }
    match kind {
        ModelKind::GaussDist => gauss_dist_params(ds, opts),
        ModelKind::IndepCop => Ok(ContinuousModel::IndepCop {
            margins: fit_margins(ds)?,
        }),
        ModelKind::GaussCop => gauss_cop_params(ds, fit_margins(ds)?),
    }
}

/// Relative frequencies of discrete tuples over rows whose discrete part is
/// fully observed, with the row indices of each tuple.
fn discrete_block(ds: &Dataset) -> Result<(DiscreteBlock, Vec<Vec<usize>>)> {
    let didx = ds.schema().discrete_indices();
    let mut keys: Vec<Vec<u32>> = Vec::new();
    let mut rows: Vec<Vec<usize>> = Vec::new();
    let mut lookup: HashMap<Vec<u32>, usize> = HashMap::new();
    for i in 0..ds.n_rows() {
        if didx.iter().any(|&j| ds.is_missing(i, j)) {
            continue;
        }
        let key = ds.discrete_row(i).to_vec();
        let slot = *lookup.entry(key.clone()).or_insert_with(|| {
            keys.push(key);
            rows.push(Vec::new());
            keys.len() - 1
        });
        rows[slot].push(i);
    }
    let total: usize = rows.iter().map(Vec::len).sum();
    if total == 0 {
        return Err(Error::Fit("no row has a fully observed discrete part".into()));
    }
    let pmf = rows.iter().map(|r| r.len() as f64 / total as f64).collect();
    Ok((DiscreteBlock { keys, pmf }, rows))
}

fn assemble(
    kind: ModelKind,
    ds: &Dataset,
    opts: FitOptions,
    shared: impl FnOnce() -> Result<ContinuousModel>,
    allow_strata: bool,
) -> Result<FittedModel> {
    let (discrete, continuous) = if ds.d_discrete() == 0 {
        (None, ContinuousBlock::Shared(shared()?))
    } else {
        let (block, rows) = discrete_block(ds)?;
        let dc = ds.d_continuous();
        let min_rows = 20.max(5 * dc);
        let stratify = allow_strata && dc > 0 && rows.iter().all(|r| r.len() >= min_rows);
        let continuous = if stratify {
            ContinuousBlock::PerStratum(
                rows.iter()
                    .map(|r| continuous_params(kind, &ds.select_rows(r), opts))
                    .collect::<Result<_>>()?,
            )
        } else {
            ContinuousBlock::Shared(shared()?)
        };
        (Some(block), continuous)
    };
    Ok(FittedModel {
        kind,
        schema: ds.schema().clone(),
        labels: ds.labels().to_vec(),
        discrete,
        continuous,
    })
}

/// Multivariate normal fit on the original scale: sample mean, sample
/// covariance (denominator n-1) with eigenvalues floored at `1e-10·trace/d`.
/// Rejects discrete columns and, unless opted in, missing cells.
pub fn fit_gauss_dist(ds: &Dataset) -> Result<FittedModel> {
    fit_gauss_dist_with(ds, FitOptions::default())
}

pub fn fit_gauss_dist_with(ds: &Dataset, opts: FitOptions) -> Result<FittedModel> {
    if ds.d_discrete() > 0 {
        return Err(Error::Fit("GaussDist only applies to continuous columns".into()));
    }
    let model = gauss_dist_params(ds, opts)?;
    assemble(ModelKind::GaussDist, ds, opts, || Ok(model), false)
}

/// Independence copula over the given margins.
pub fn fit_indep_cop(ds: &Dataset, margins: Vec<MarginModel>) -> Result<FittedModel> {
    if margins.len() != ds.d_continuous() {
        return Err(Error::Dimension("one margin per continuous column expected".into()));
    }
    let model = if margins.is_empty() {
        ContinuousModel::Empty
    } else {
        ContinuousModel::IndepCop { margins }
    };
    assemble(ModelKind::IndepCop, ds, FitOptions::default(), || Ok(model), false)
}

/// Gaussian copula over the given margins: pairwise-complete correlation of
/// normal scores, repaired to positive definite.
pub fn fit_gauss_cop(ds: &Dataset, margins: Vec<MarginModel>) -> Result<FittedModel> {
    let model = if margins.is_empty() && ds.d_continuous() == 0 {
        ContinuousModel::Empty
    } else {
        gauss_cop_params(ds, margins)?
    };
    assemble(ModelKind::GaussCop, ds, FitOptions::default(), || Ok(model), false)
}

/// Fits `kind` end to end, including margins and the stratification rule
/// for discrete columns.
pub fn fit_model(kind: ModelKind, ds: &Dataset, opts: FitOptions) -> Result<FittedModel> {
    if kind == ModelKind::GaussDist && ds.d_discrete() > 0 {
        return Err(Error::Fit("GaussDist only applies to continuous columns".into()));
    }
    let shared_ds = ds.clone();
    assemble(kind, ds, opts, move || continuous_params(kind, &shared_ds, opts), true)
}

enum Draw<'a> {
    Empty,
    Gauss { mean: &'a [f64], chol: DMatrix<f64> },
    Indep { margins: &'a [MarginModel] },
    Copula { margins: &'a [MarginModel], chol: DMatrix<f64> },
}

impl<'a> Draw<'a> {
    fn new(m: &'a ContinuousModel) -> Result<Self> {
        Ok(match m {
            ContinuousModel::Empty => Draw::Empty,
            ContinuousModel::GaussDist { mean, cov } => Draw::Gauss {
                mean,
                chol: cholesky_lower(cov)?,
            },
            ContinuousModel::IndepCop { margins } => Draw::Indep { margins },
            ContinuousModel::GaussCop { margins, corr } => Draw::Copula {
                margins,
                chol: cholesky_lower(corr)?,
            },
        })
    }

    fn row<R: Rng>(&self, rng: &mut R, out: &mut Vec<f64>) -> Result<()> {
        match self {
            Draw::Empty => {}
            Draw::Gauss { mean, chol } => {
                let z = DVector::from_iterator(mean.len(), (0..mean.len()).map(|_| rng.sample::<f64, _>(StandardNormal)));
                let x = chol * z;
                out.extend(mean.iter().zip(x.iter()).map(|(m, v)| m + v));
            }
            Draw::Indep { margins } => {
                for m in margins.iter() {
                    let u: f64 = rng.random();
                    out.push(m.quantile(m.clamp(u))?);
                }
            }
            Draw::Copula { margins, chol } => {
                let d = margins.len();
                let z = chol * DVector::from_iterator(d, (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)));
                for (m, zj) in margins.iter().zip(z.iter()) {
                    out.push(m.quantile(m.clamp(norm_cdf(*zj)))?);
                }
            }
        }
        Ok(())
    }
}

/// Draws `n_sim` complete rows. Rows are generated in fixed-size chunks,
/// each with its own derived stream, so output is independent of threading.
pub fn sample_model(model: &FittedModel, n_sim: usize, seed: u64) -> Result<Dataset> {
    let draws: Vec<Draw> = match &model.continuous {
        ContinuousBlock::Shared(m) => vec![Draw::new(m)?],
        ContinuousBlock::PerStratum(ms) => ms.iter().map(Draw::new).collect::<Result<_>>()?,
    };
    let cumulative: Vec<f64> = model
        .discrete
        .as_ref()
        .map(|b| {
            b.pmf
                .iter()
                .scan(0.0, |acc, p| {
                    *acc += p;
                    Some(*acc)
                })
                .collect()
        })
        .unwrap_or_default();
    let chunks = n_sim.div_ceil(DRAW_CHUNK);
    let parts: Vec<(Vec<f64>, Vec<u32>)> = (0..chunks)
        .into_par_iter()
        .map(|c| -> Result<(Vec<f64>, Vec<u32>)> {
            let mut rng = seed::rng(seed, "draw", &[c as u64]);
            let rows = DRAW_CHUNK.min(n_sim - c * DRAW_CHUNK);
            let mut cont = Vec::with_capacity(rows * model.schema.n_continuous());
            let mut disc = Vec::with_capacity(rows * model.schema.n_discrete());
            for _ in 0..rows {
                let mut which = 0;
                if let Some(block) = &model.discrete {
                    let u: f64 = rng.random::<f64>() * cumulative[cumulative.len() - 1];
                    which = cumulative.partition_point(|&c| c <= u).min(block.keys.len() - 1);
                    disc.extend_from_slice(&block.keys[which]);
                }
                let draw = if draws.len() == 1 { &draws[0] } else { &draws[which] };
                draw.row(&mut rng, &mut cont)?;
            }
            Ok((cont, disc))
        })
        .collect::<Result<_>>()?;
    let mut continuous = Vec::with_capacity(n_sim * model.schema.n_continuous());
    let mut discrete = Vec::with_capacity(n_sim * model.schema.n_discrete());
    for (c, d) in parts {
        continuous.extend(c);
        discrete.extend(d);
    }
    Dataset::from_parts(
        model.schema.clone(),
        n_sim,
        continuous,
        discrete,
        vec![false; n_sim * model.schema.len()],
        model.labels.clone(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::read_csv;

    fn grid_data(n: usize) -> Dataset {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let t = i as f64 / n as f64;
                vec![t * 3.0 + (i % 7) as f64 * 0.01, (t * 6.0).sin() + (i % 5) as f64 * 0.1]
            })
            .collect();
        Dataset::from_rows(&rows).unwrap()
    }

    #[test]
    fn gauss_dist_rejects_degenerate_and_discrete() {
        let ds = Dataset::from_rows(&[vec![1.0, 2.0], vec![3.0, 5.0]]).unwrap();
        assert!(fit_gauss_dist(&ds).is_err());
        let schema = Schema::new(vec![Column::continuous("a"), Column::discrete("g")]).unwrap();
        let mixed = read_csv("a,g\n1,x\n2,y\n3,x\n".as_bytes(), &schema, "").unwrap();
        assert!(fit_gauss_dist(&mixed).is_err());
        assert!(fit_model(ModelKind::GaussDist, &mixed, FitOptions::default()).is_err());
    }

    #[test]
    fn gauss_dist_missing_needs_opt_in() {
        let ds = crate::data::inject_mcar(&grid_data(200), 0.2, &["x1"], 4).unwrap();
        assert!(matches!(fit_gauss_dist(&ds), Err(Error::MissingValues(_))));
        let opts = FitOptions { allow_available_case_gauss: true };
        assert!(fit_gauss_dist_with(&ds, opts).is_ok());
    }

    #[test]
    fn gauss_cop_complete_pairwise_equals_full_sample() {
        let ds = grid_data(300);
        let margins = fit_margins(&ds).unwrap();
        let model = fit_gauss_cop(&ds, margins.clone()).unwrap();
        let ContinuousBlock::Shared(ContinuousModel::GaussCop { corr, .. }) = &model.continuous else {
            panic!("unexpected model")
        };
        let z: Vec<Vec<f64>> = (0..2)
            .map(|s| {
                ds.continuous_column(s)
                    .0
                    .iter()
                    .map(|&x| norm_quantile(margins[s].clamp(margins[s].cdf(x))))
                    .collect()
            })
            .collect();
        let n = z[0].len() as f64;
        let m0 = z[0].iter().sum::<f64>() / n;
        let m1 = z[1].iter().sum::<f64>() / n;
        let s01: f64 = z[0].iter().zip(&z[1]).map(|(a, b)| (a - m0) * (b - m1)).sum();
        let s00: f64 = z[0].iter().map(|a| (a - m0) * (a - m0)).sum();
        let s11: f64 = z[1].iter().map(|b| (b - m1) * (b - m1)).sum();
        assert_eq!(corr[(0, 1)], s01 / (s00 * s11).sqrt());
        assert_eq!(corr[(0, 0)], 1.0);
    }

    #[test]
    fn gauss_cop_needs_three_pairs() {
        let schema = Schema::continuous(&["a", "b"]).unwrap();
        let n = 10;
        let mut missing = vec![false; n * 2];
        // a observed on rows 0..5, b on rows 3..10: two complete pairs
        for i in 5..n {
            missing[i * 2] = true;
        }
        for i in 0..3 {
            missing[i * 2 + 1] = true;
        }
        let vals: Vec<f64> = (0..n * 2).map(|k| k as f64 * 0.37 % 5.0).collect();
        let ds = Dataset::from_parts(schema, n, vals, vec![], missing, vec![]).unwrap();
        let margins = fit_margins(&ds).unwrap();
        assert!(fit_gauss_cop(&ds, margins).is_err());
    }

    #[test]
    fn sampling_is_deterministic_and_complete() {
        let ds = grid_data(200);
        for kind in ModelKind::ALL {
            let model = fit_model(kind, &ds, FitOptions::default()).unwrap();
            let a = sample_model(&model, 1100, 9).unwrap();
            let b = sample_model(&model, 1100, 9).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.n_rows(), 1100);
            assert!(!a.has_missing());
            assert_ne!(a, sample_model(&model, 1100, 10).unwrap());
        }
    }

    #[test]
    fn model_json_roundtrip_is_exact() {
        let ds = grid_data(120);
        for kind in ModelKind::ALL {
            let model = fit_model(kind, &ds, FitOptions::default()).unwrap();
            let text = model.to_json();
            let back = FittedModel::from_json(&text).unwrap();
            assert_eq!(back, model);
            assert_eq!(back.to_json(), text);
        }
        assert!(FittedModel::from_json("{}").is_err());
    }

    #[test]
    fn to_uniform_checks_and_clamps() {
        let ds = grid_data(100);
        let margins = fit_margins(&ds).unwrap();
        assert!(to_uniform(&ds, &margins[..1]).is_err());
        let far = Dataset::from_rows(&[vec![1e6, -1e6]]).unwrap();
        let u = to_uniform(&far, &margins).unwrap();
        assert_eq!(u.continuous_values(), &[1.0 - 0.005, 0.005]);
    }

    #[test]
    fn marginalize_projects() {
        let ds = Dataset::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        assert_eq!(marginalize_columns(&ds, &["x1", "x2", "x3"]).unwrap(), ds);
        let one = marginalize_columns(&ds, &["x2"]).unwrap();
        assert_eq!(one.n_rows(), 2);
        assert_eq!(one.continuous_values(), &[2.0, 5.0]);
        assert!(marginalize_columns(&ds, &["zz"]).is_err());
        assert!(marginalize_columns::<&str>(&ds, &[]).is_err());
    }
}
