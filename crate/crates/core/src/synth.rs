//! Synthetic data with known structure: multivariate normals and Gaussian
//! copulas with parametric margins. Columns are named `x1, x2, ...`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{cholesky_lower, equicorrelation, norm_cdf};
use crate::seed;

const CHUNK: usize = 512;

/// Parametric margin applied to a standard normal score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Margin {
    Normal { mean: f64, sd: f64 },
    /// `exp(mu + sigma·Z)`.
    Lognormal { mu: f64, sigma: f64 },
    Uniform { lo: f64, hi: f64 },
}

impl Margin {
    fn apply(&self, z: f64) -> f64 {
        match *self {
            Margin::Normal { mean, sd } => mean + sd * z,
            Margin::Lognormal { mu, sigma } => (mu + sigma * z).exp(),
            Margin::Uniform { lo, hi } => lo + (hi - lo) * norm_cdf(z),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Margin::Normal { mean, sd } => mean.is_finite() && sd > 0.0 && sd.is_finite(),
            Margin::Lognormal { mu, sigma } => mu.is_finite() && sigma > 0.0 && sigma.is_finite(),
            Margin::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo < hi,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid margin {:?}", self)))
        }
    }
}

fn names(d: usize) -> Vec<String> {
    (1..=d).map(|j| format!("x{}", j)).collect()
}

// n rows of L·z, one RNG stream per chunk of rows
fn correlated_normals(chol: &DMatrix<f64>, n: usize, seed: u64, label: &str) -> Vec<f64> {
    let d = chol.nrows();
    let mut out = Vec::with_capacity(n * d);
    for c in 0..n.div_ceil(CHUNK) {
        let mut rng = seed::rng(seed, label, &[c as u64]);
        for _ in 0..CHUNK.min(n - c * CHUNK) {
            let z = DVector::from_iterator(d, (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)));
            out.extend((chol * z).iter());
        }
    }
    out
}

/// `n` draws from `N(mean, cov)`.
pub fn gaussian(mean: &[f64], cov: &DMatrix<f64>, n: usize, seed: u64) -> Result<Dataset> {
    let d = mean.len();
    if d == 0 || cov.nrows() != d || cov.ncols() != d {
        return Err(Error::Dimension("mean and covariance sizes differ".into()));
    }
    let chol = cholesky_lower(cov)?;
    let mut values = correlated_normals(&chol, n, seed, "gaussian");
    for (k, v) in values.iter_mut().enumerate() {
        *v += mean[k % d];
    }
    Dataset::from_continuous(&names(d), values)
}

/// `n` draws from a Gaussian copula with correlation `corr` and the given
/// margins.
pub fn gaussian_copula(corr: &DMatrix<f64>, margins: &[Margin], n: usize, seed: u64) -> Result<Dataset> {
    let d = margins.len();
    if d == 0 || corr.nrows() != d || corr.ncols() != d {
        return Err(Error::Dimension("correlation and margin counts differ".into()));
    }
    if (0..d).any(|i| (corr[(i, i)] - 1.0).abs() > 1e-12) {
        return Err(Error::InvalidArgument("correlation matrix needs a unit diagonal".into()));
    }
    for m in margins {
        m.validate()?;
    }
    let chol = cholesky_lower(corr)?;
    let mut values = correlated_normals(&chol, n, seed, "copula");
    for (k, v) in values.iter_mut().enumerate() {
        *v = margins[k % d].apply(*v);
    }
    Dataset::from_continuous(&names(d), values)
}

/// Serializable description of a synthetic source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SyntheticSpec {
    Gaussian {
        mean: Vec<f64>,
        cov: Vec<Vec<f64>>,
        n: usize,
    },
    /// Either a full `corr` matrix or an equicorrelation `rho`.
    GaussianCopula {
        margins: Vec<Margin>,
        #[serde(default)]
        rho: Option<f64>,
        #[serde(default)]
        corr: Option<Vec<Vec<f64>>>,
        n: usize,
    },
}

pub(crate) fn matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let d = rows.len();
    if rows.iter().any(|r| r.len() != d) {
        return Err(Error::Dimension("matrix must be square".into()));
    }
    Ok(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
}

impl SyntheticSpec {
    pub fn n(&self) -> usize {
        match self {
            SyntheticSpec::Gaussian { n, .. } | SyntheticSpec::GaussianCopula { n, .. } => *n,
        }
    }

    pub fn generate(&self, seed: u64) -> Result<Dataset> {
        match self {
            SyntheticSpec::Gaussian { mean, cov, n } => gaussian(mean, &matrix(cov)?, *n, seed),
            SyntheticSpec::GaussianCopula { margins, rho, corr, n } => {
                let corr = match (rho, corr) {
                    (Some(r), None) => equicorrelation(margins.len(), *r),
                    (None, Some(c)) => matrix(c)?,
                    _ => {
                        return Err(Error::InvalidArgument(
                            "gaussian_copula needs exactly one of rho and corr".into(),
                        ))
                    }
                };
                gaussian_copula(&corr, margins, *n, seed)
            }
        }
    }
}
