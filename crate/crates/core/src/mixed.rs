//! KL divergence for mixed continuous/discrete data via the chain rule:
//! a frequency-weighted sum of per-stratum continuous divergences plus the
//! divergence between the discrete relative-frequency tables.

use std::collections::HashMap;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kld::{kld_est_bc, KlEstimate};

#[derive(Debug, Clone, PartialEq)]
pub struct Stratum {
    /// Discrete codes, one per discrete column (codes refer to x's labels).
    pub key: Vec<u32>,
    pub x_rows: Vec<usize>,
    pub y_rows: Vec<usize>,
    pub p_hat: f64,
    pub q_hat: f64,
}

/// Strata keyed by the discrete-code tuples seen in `x`, in order of first
/// appearance there.
#[derive(Debug, Clone, PartialEq)]
pub struct Stratification {
    pub strata: Vec<Stratum>,
    /// `y` re-coded against `x`'s label lists.
    pub y_aligned: Dataset,
}

impl Stratification {
    pub fn p_hat(&self) -> Vec<f64> {
        self.strata.iter().map(|s| s.p_hat).collect()
    }

    pub fn q_hat(&self) -> Vec<f64> {
        self.strata.iter().map(|s| s.q_hat).collect()
    }
}

fn key_name(x: &Dataset, key: &[u32]) -> String {
    key.iter()
        .enumerate()
        .map(|(s, &c)| x.labels()[s][c as usize].as_str())
        .collect::<Vec<_>>()
        .join("|")
}

pub fn stratify(x: &Dataset, y: &Dataset) -> Result<Stratification> {
    let y = x.align_labels(y)?;
    if x.has_missing_discrete() || y.has_missing_discrete() {
        return Err(Error::MissingValues("discrete cells must be observed to stratify".into()));
    }
    let mut order: Vec<Vec<u32>> = Vec::new();
    let mut x_groups: HashMap<Vec<u32>, Vec<usize>> = HashMap::new();
    for i in 0..x.n_rows() {
        let key = x.discrete_row(i).to_vec();
        x_groups
            .entry(key.clone())
            .or_insert_with(|| {
                order.push(key);
                Vec::new()
            })
            .push(i);
    }
    let mut y_groups: HashMap<Vec<u32>, Vec<usize>> = HashMap::new();
    for j in 0..y.n_rows() {
        y_groups.entry(y.discrete_row(j).to_vec()).or_default().push(j);
    }
    let (n, m) = (x.n_rows() as f64, y.n_rows() as f64);
    let strata = order
        .into_iter()
        .map(|key| {
            let x_rows = x_groups.remove(&key).unwrap_or_default();
            let y_rows = y_groups.remove(&key).unwrap_or_default();
            Stratum {
                p_hat: x_rows.len() as f64 / n,
                q_hat: if m > 0.0 { y_rows.len() as f64 / m } else { 0.0 },
                key,
                x_rows,
                y_rows,
            }
        })
        .collect();
    Ok(Stratification {
        strata,
        y_aligned: y,
    })
}

/// Plug-in `Σ p log(p/q)` with `0 log(0/q) = 0`.
pub fn kld_est_discrete(p_hat: &[f64], q_hat: &[f64]) -> Result<f64> {
    if p_hat.len() != q_hat.len() {
        return Err(Error::Dimension(format!(
            "pmfs have {} and {} entries",
            p_hat.len(),
            q_hat.len()
        )));
    }
    let mut total = 0.0;
    for (k, (&p, &q)) in p_hat.iter().zip(q_hat).enumerate() {
        if p <= 0.0 {
            continue;
        }
        if q <= 0.0 {
            return Err(Error::InfiniteDivergence(format!(
                "entry {} has p = {} but q = 0",
                k, p
            )));
        }
        total += p * (p / q).ln();
    }
    Ok(total)
}

/// Mixed-data estimate. Reduces to [`kld_est_bc`] without discrete
/// columns and to [`kld_est_discrete`] without continuous ones.
pub fn kld_est_mixed(x: &Dataset, y: &Dataset) -> Result<KlEstimate> {
    if x.schema() != y.schema() {
        return Err(Error::Schema("x and y have different schemas".into()));
    }
    if x.has_missing() || y.has_missing() {
        return Err(Error::MissingValues("mixed estimator needs complete data".into()));
    }
    let (n, m, d) = (x.n_rows(), y.n_rows(), x.schema().len());
    if x.d_discrete() == 0 {
        let e = kld_est_bc(&x.continuous_points()?, &y.continuous_points()?)?;
        return Ok(KlEstimate { d, ..e });
    }
    let st = stratify(x, y)?;
    let discrete = kld_est_discrete(&st.p_hat(), &st.q_hat())?;
    if x.d_continuous() == 0 {
        return Ok(KlEstimate::point(discrete, n, m, d));
    }
    let xp = x.continuous_points()?;
    let yp = st.y_aligned.continuous_points()?;
    let mut continuous = 0.0;
    for s in &st.strata {
        if s.y_rows.is_empty() {
            return Err(Error::InfiniteDivergence(format!(
                "stratum {} has no y rows",
                key_name(x, &s.key)
            )));
        }
        if s.x_rows.len() < 2 {
            return Err(Error::StratumTooSmall {
                stratum: key_name(x, &s.key),
                n: s.x_rows.len(),
                m: s.y_rows.len(),
            });
        }
        let e = kld_est_bc(&xp.select(&s.x_rows), &yp.select(&s.y_rows))?;
        continuous += s.p_hat * e.value;
    }
    Ok(KlEstimate::point(continuous + discrete, n, m, d))
}
