//! Subsampling confidence intervals and empirical convergence-rate checks.
//!
//! Nearest-neighbour estimators break on duplicated points, so resampling
//! with replacement is not an option. Instead `s` subsamples are drawn
//! *without* replacement from both samples (`b_x = ⌈n^β⌉`, `b_y = ⌈m^β⌉`),
//! the estimator is re-run on each, and the rescaled deviations
//! `τ_b (θ*_b - θ̂)` approximate the sampling distribution of
//! `τ_n (θ̂ - θ)`. With `q_a` its empirical quantiles, the interval is
//! `[θ̂ - q_{1-α/2}/τ_n, θ̂ - q_{α/2}/τ_n]`, where `τ_k = k^γ` (γ = ½ by default).

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kld::KlEstimate;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SubsamplingConfig {
    /// Number of subsamples.
    pub s: usize,
    /// Subsample size exponent: `b = ⌈n^b_exponent⌉`.
    pub b_exponent: f64,
    /// Rate exponent: `τ_k = k^rate_exponent`.
    pub rate_exponent: f64,
    pub alpha: f64,
    pub seed: u64,
    /// Largest tolerated fraction of failed replicates.
    pub max_failure_fraction: f64,
}

impl Default for SubsamplingConfig {
    fn default() -> Self {
        SubsamplingConfig {
            s: 1000,
            b_exponent: 2.0 / 3.0,
            rate_exponent: 0.5,
            alpha: 0.05,
            seed: 0,
            max_failure_fraction: 0.1,
        }
    }
}

impl SubsamplingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.s < 2 {
            return Err(Error::InvalidArgument(format!("s = {} must be >= 2", self.s)));
        }
        if !(self.b_exponent > 0.0 && self.b_exponent < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "b exponent {} must lie in (0, 1)",
                self.b_exponent
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidArgument(format!("alpha {} must lie in (0, 1)", self.alpha)));
        }
        if !(self.rate_exponent > 0.0) {
            return Err(Error::InvalidArgument("rate exponent must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.max_failure_fraction) {
            return Err(Error::InvalidArgument("failure fraction must lie in [0, 1]".into()));
        }
        Ok(())
    }

    pub fn with_seed(self, seed: u64) -> Self {
        SubsamplingConfig { seed, ..self }
    }
}

/// Rescaled subsample deviations `τ_b (θ*_b - θ̂)`, sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsampleDistribution {
    pub values: Vec<f64>,
    pub b_x: usize,
    pub b_y: usize,
    pub failures: usize,
}

/// `⌈n^e⌉`, ignoring rounding noise just above an integer.
pub fn subsample_size(n: usize, exponent: f64) -> usize {
    let v = (n as f64).powf(exponent);
    ((v - 1e-9).ceil().max(1.0) as usize).min(n)
}

/// Empirical quantile of ascending `sorted` data, linear interpolation
/// between order statistics (`h = (N-1)·prob`).
pub fn quantile_sorted(sorted: &[f64], prob: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let h = (sorted.len() - 1) as f64 * prob.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn draw(rng: &mut impl rand::Rng, n: usize, b: usize) -> Vec<usize> {
    let mut idx = index::sample(rng, n, b).into_vec();
    idx.sort_unstable();
    idx
}

/// Runs `estimator` on `s` paired subsamples. Failed replicates are
/// counted; more than `limit` of them is an error.
#[allow(clippy::too_many_arguments)]
fn replicate<F>(
    x: &Dataset,
    y: &Dataset,
    estimator: &F,
    b_x: usize,
    b_y: usize,
    s: usize,
    seed: u64,
    label: &str,
    max_failure_fraction: f64,
) -> Result<(Vec<f64>, usize)>
where
    F: Fn(&Dataset, &Dataset) -> Result<f64> + Sync,
{
    let results: Vec<Option<f64>> = (0..s)
        .into_par_iter()
        .map(|r| {
            let mut rng = seed::rng(seed, label, &[b_x as u64, r as u64]);
            let ix = draw(&mut rng, x.n_rows(), b_x);
            let iy = draw(&mut rng, y.n_rows(), b_y);
            estimator(&x.select_rows(&ix), &y.select_rows(&iy))
                .ok()
                .filter(|v| v.is_finite())
        })
        .collect();
    let values: Vec<f64> = results.iter().flatten().copied().collect();
    let failures = s - values.len();
    let limit = (max_failure_fraction * s as f64).floor() as usize;
    if failures > limit || values.is_empty() {
        return Err(Error::TooManyFailures {
            failures,
            total: s,
            limit,
        });
    }
    Ok((values, failures))
}

/// Point estimate plus subsampling confidence interval.
pub fn subsample_ci<F>(x: &Dataset, y: &Dataset, estimator: F, cfg: &SubsamplingConfig) -> Result<KlEstimate>
where
    F: Fn(&Dataset, &Dataset) -> Result<f64> + Sync,
{
    subsample_ci_with_distribution(x, y, estimator, cfg).map(|(e, _)| e)
}

/// As [`subsample_ci`], also returning the subsample distribution.
pub fn subsample_ci_with_distribution<F>(
    x: &Dataset,
    y: &Dataset,
    estimator: F,
    cfg: &SubsamplingConfig,
) -> Result<(KlEstimate, SubsampleDistribution)>
where
    F: Fn(&Dataset, &Dataset) -> Result<f64> + Sync,
{
    cfg.validate()?;
    let (n, m) = (x.n_rows(), y.n_rows());
    let theta = estimator(x, y)?;
    let b_x = subsample_size(n, cfg.b_exponent);
    let b_y = subsample_size(m, cfg.b_exponent);
    if b_x < 2 || b_x >= n {
        return Err(Error::InvalidArgument(format!(
            "subsample size b_x = {} must satisfy 2 <= b_x < n = {}",
            b_x, n
        )));
    }
    let (raw, failures) = replicate(
        x,
        y,
        &estimator,
        b_x,
        b_y,
        cfg.s,
        cfg.seed,
        "subsample",
        cfg.max_failure_fraction,
    )?;
    let tau_b = (b_x as f64).powf(cfg.rate_exponent);
    let mut values: Vec<f64> = raw.iter().map(|t| tau_b * (t - theta)).collect();
    values.sort_by(f64::total_cmp);
    let tau_n = (n as f64).powf(cfg.rate_exponent);
    let q_lo = quantile_sorted(&values, cfg.alpha / 2.0);
    let q_hi = quantile_sorted(&values, 1.0 - cfg.alpha / 2.0);
    let estimate = KlEstimate {
        value: theta,
        n,
        m,
        d: x.schema().len(),
        ci: Some((theta - q_hi / tau_n, theta - q_lo / tau_n)),
        level: Some(1.0 - cfg.alpha),
    };
    Ok((
        estimate,
        SubsampleDistribution {
            values,
            b_x,
            b_y,
            failures,
        },
    ))
}

/// Spread of the subsample distribution at each grid size and the fitted
/// convergence exponent.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRate {
    pub beta: f64,
    /// `(b, interquartile range of θ*_b - θ̂)` per grid point.
    pub spreads: Vec<(usize, f64)>,
}

/// Estimates the exponent β in `τ_n = n^β` from how the spread of
/// `θ*_b - θ̂` shrinks with `b`: β̂ is minus the least-squares slope of
/// `log IQR` on `log b`. The y subsample size follows `b·m/n`.
pub fn estimate_convergence_rate<F>(
    x: &Dataset,
    y: &Dataset,
    estimator: F,
    b_grid: &[usize],
    s: usize,
    seed: u64,
) -> Result<ConvergenceRate>
where
    F: Fn(&Dataset, &Dataset) -> Result<f64> + Sync,
{
    if b_grid.len() < 3 {
        return Err(Error::InvalidArgument("need at least 3 subsample sizes".into()));
    }
    if b_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("subsample sizes must be strictly increasing".into()));
    }
    let (n, m) = (x.n_rows(), y.n_rows());
    if *b_grid.last().expect("non-empty") > n || b_grid[0] == 0 {
        return Err(Error::InvalidArgument(format!("subsample sizes must lie in 1..={}", n)));
    }
    if s < 2 {
        return Err(Error::InvalidArgument("s must be >= 2".into()));
    }
    let theta = estimator(x, y)?;
    let mut spreads = Vec::with_capacity(b_grid.len());
    for &b in b_grid {
        let b_y = ((b as f64 * m as f64 / n as f64).ceil() as usize).clamp(1, m.max(1));
        let (raw, _) = replicate(x, y, &estimator, b, b_y, s, seed, "rate", 0.1)?;
        let mut dev: Vec<f64> = raw.iter().map(|t| t - theta).collect();
        dev.sort_by(f64::total_cmp);
        let iqr = quantile_sorted(&dev, 0.75) - quantile_sorted(&dev, 0.25);
        if !(iqr > 0.0) {
            return Err(Error::DegenerateSpread(format!("zero interquartile range at b = {}", b)));
        }
        spreads.push((b, iqr));
    }
    let pts: Vec<(f64, f64)> = spreads.iter().map(|&(b, q)| ((b as f64).ln(), q.ln())).collect();
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    Ok(ConvergenceRate {
        beta: -sxy / sxx,
        spreads,
    })
}
