//! Two-sample nearest-neighbour KL divergence estimators for continuous data.
//!
//! Given `x` drawn from `p` and `y` drawn from `q`, both estimators return
//! `D(p || q)` in nats. Let `ρ_k(i)` be the distance from `x_i` to its k-th
//! nearest neighbour among the other x points and `ν_k(i)` the same among
//! the y points.
//!
//! * [`kld_est_nn`] uses a fixed `k`:
//!   `(d/n) Σ log(ν_k(i)/ρ_k(i)) + log(m/(n-1))`.
//! * [`kld_est_bc`] is the bias-corrected variant with adaptive neighbour
//!   counts. With `ε_i = max(ρ_1(i), ν_1(i))`, `k_i` and `l_i` are the
//!   numbers of x and y points inside the closed ball of radius `ε_i`, and
//!   `(d/n) Σ log(ν_{l_i}(i)/ρ_{k_i}(i)) + log(m/(n-1)) + (1/n) Σ (ψ(k_i) - ψ(l_i))`
//!   is returned. Since `E log ρ_k^d` and `E log ν_l^d` carry `ψ(k)` and
//!   `ψ(l)` respectively, the digamma term removes the `log(l_i/k_i)`
//!   offset from using unequal neighbour orders.
//!
//! Estimates can be negative. They are returned unchanged.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::nn::{find_coincident, has_duplicate_points, NeighborIndex, Points};

/// A divergence estimate with the sizes it was computed from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KlEstimate {
    /// Nats; may be negative.
    pub value: f64,
    pub n: usize,
    pub m: usize,
    pub d: usize,
    pub ci: Option<(f64, f64)>,
    /// Confidence level `1 - alpha` of `ci`.
    pub level: Option<f64>,
}

impl KlEstimate {
    pub fn point(value: f64, n: usize, m: usize, d: usize) -> Self {
        KlEstimate {
            value,
            n,
            m,
            d,
            ci: None,
            level: None,
        }
    }
}

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Digamma function ψ(x) = d/dx log Γ(x) for `x > 0`.
///
/// Shifts the argument above 10 with ψ(x) = ψ(x+1) - 1/x, then evaluates
/// the asymptotic series through the x⁻¹² term.
pub fn digamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::InvalidArgument(format!("digamma needs x > 0, got {}", x)));
    }
    Ok(digamma_positive(x))
}

fn digamma_positive(mut x: f64) -> f64 {
    if x == 1.0 {
        return -EULER_GAMMA;
    }
    let mut shift = 0.0;
    while x < 10.0 {
        shift -= 1.0 / x;
        x += 1.0;
    }
    let inv2 = 1.0 / (x * x);
    let tail = inv2
        * (1.0 / 12.0
            - inv2
                * (1.0 / 120.0
                    - inv2
                        * (1.0 / 252.0
                            - inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0 - inv2 * (691.0 / 32760.0))))));
    shift + x.ln() - 0.5 / x - tail
}

/// Neighbour quantities for one x point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborStat {
    pub rho_first: f64,
    pub nu_first: f64,
    pub eps: f64,
    pub k: usize,
    pub l: usize,
    pub rho_k: f64,
    pub nu_l: f64,
}

fn check_pair(x: &Points, y: &Points) -> Result<()> {
    if x.dim() != y.dim() {
        return Err(Error::Dimension(format!(
            "x has {} coordinates, y has {}",
            x.dim(),
            y.dim()
        )));
    }
    Ok(())
}

fn check_no_duplicates(points: &Points, sample: &'static str) -> Result<()> {
    match has_duplicate_points(points) {
        Some((first, second)) => Err(Error::Duplicate {
            sample,
            first,
            second,
        }),
        None => Ok(()),
    }
}

fn check_disjoint(x: &Points, y: &Points) -> Result<()> {
    match find_coincident(x, y) {
        Some((x_row, y_row)) => Err(Error::Coincident { x_row, y_row }),
        None => Ok(()),
    }
}

/// Per-point statistics feeding [`kld_est_bc`]. Validates the inputs the
/// same way the estimator does.
pub fn neighbor_stats(x: &Points, y: &Points) -> Result<Vec<NeighborStat>> {
    check_pair(x, y)?;
    if x.len() < 2 {
        return Err(Error::InvalidArgument(format!("need n >= 2 x points, got {}", x.len())));
    }
    if y.is_empty() {
        return Err(Error::InvalidArgument("need m >= 1 y points".into()));
    }
    check_no_duplicates(x, "x")?;
    check_no_duplicates(y, "y")?;
    check_disjoint(x, y)?;
    let xi = NeighborIndex::build(x.clone())?;
    let yi = NeighborIndex::build(y.clone())?;
    (0..x.len())
        .into_par_iter()
        .map(|i| stat_for(&xi, &yi, x.row(i), i))
        .collect()
}

fn stat_for(xi: &NeighborIndex, yi: &NeighborIndex, q: &[f64], i: usize) -> Result<NeighborStat> {
    let rho_first = xi.knn_distance(q, 1, true)?;
    let nu_first = yi.knn_distance(q, 1, false)?;
    if rho_first == 0.0 || nu_first == 0.0 {
        return Err(Error::ZeroDistance(i));
    }
    let eps = rho_first.max(nu_first);
    let xh = xi.radius_query(q, eps, true)?;
    let yh = yi.radius_query(q, eps, false)?;
    let (k, l) = (xh.count, yh.count);
    if k.min(l) != 1 {
        return Err(Error::TiedDistances { row: i, k, l });
    }
    Ok(NeighborStat {
        rho_first,
        nu_first,
        eps,
        k,
        l,
        rho_k: xh.max_distance.expect("k >= 1"),
        nu_l: yh.max_distance.expect("l >= 1"),
    })
}

/// Bias-corrected estimator with adaptive neighbour counts.
///
/// Requires no duplicates within `x`, within `y` or across them, `n >= 2`
/// and `m >= 1`.
pub fn kld_est_bc(x: &Points, y: &Points) -> Result<KlEstimate> {
    let stats = neighbor_stats(x, y)?;
    Ok(KlEstimate::point(bc_value(&stats, x.dim(), y.len()), x.len(), y.len(), x.dim()))
}

/// Combines neighbour statistics into the bias-corrected estimate.
pub fn bc_value(stats: &[NeighborStat], d: usize, m: usize) -> f64 {
    let n = stats.len() as f64;
    let mut log_sum = 0.0;
    let mut psi_sum = 0.0;
    for s in stats {
        log_sum += (s.nu_l / s.rho_k).ln();
        psi_sum += digamma_positive(s.k as f64) - digamma_positive(s.l as f64);
    }
    d as f64 / n * log_sum + (m as f64 / (n - 1.0)).ln() + psi_sum / n
}

/// Fixed-`k` nearest-neighbour estimator without bias correction.
///
/// Requires no duplicates within `x`, no x point equal to a y point,
/// `n > k` and `m >= k`.
pub fn kld_est_nn(x: &Points, y: &Points, k: usize) -> Result<KlEstimate> {
    check_pair(x, y)?;
    let (n, m) = (x.len(), y.len());
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if n <= k {
        return Err(Error::NotEnoughPoints { k, available: n.saturating_sub(1) });
    }
    if m < k {
        return Err(Error::NotEnoughPoints { k, available: m });
    }
    check_no_duplicates(x, "x")?;
    check_disjoint(x, y)?;
    let xi = NeighborIndex::build(x.clone())?;
    let yi = NeighborIndex::build(y.clone())?;
    let terms: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| -> Result<f64> {
            let rho = xi.knn_distance(x.row(i), k, true)?;
            let nu = yi.knn_distance(x.row(i), k, false)?;
            if rho == 0.0 || nu == 0.0 {
                return Err(Error::ZeroDistance(i));
            }
            Ok((nu / rho).ln())
        })
        .collect::<Result<_>>()?;
    let log_sum: f64 = terms.iter().sum();
    let d = x.dim();
    let value = d as f64 / n as f64 * log_sum + (m as f64 / (n as f64 - 1.0)).ln();
    Ok(KlEstimate::point(value, n, m, d))
}

/// Closed-form `D(N(mu1, s1) || N(mu2, s2))` in nats.
pub fn kld_gaussian_analytic(mu1: &[f64], s1: &DMatrix<f64>, mu2: &[f64], s2: &DMatrix<f64>) -> Result<f64> {
    let d = mu1.len();
    if mu2.len() != d || s1.shape() != (d, d) || s2.shape() != (d, d) {
        return Err(Error::Dimension("mean/covariance sizes disagree".into()));
    }
    let c1 = spd_cholesky(s1, "first covariance")?;
    let c2 = spd_cholesky(s2, "second covariance")?;
    let trace = c2.solve(s1).trace();
    let diff = DVector::from_iterator(d, mu2.iter().zip(mu1).map(|(a, b)| a - b));
    let maha = diff.dot(&c2.solve(&diff));
    let logdet = |l: &DMatrix<f64>| 2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let ld1 = logdet(&c1.l());
    let ld2 = logdet(&c2.l());
    Ok(0.5 * (trace + maha - d as f64 + ld2 - ld1))
}

fn spd_cholesky(s: &DMatrix<f64>, what: &str) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    let scale = s.amax().max(1.0);
    if (s - s.transpose()).amax() > 1e-12 * scale {
        return Err(Error::NotPositiveDefinite(format!("{} is not symmetric", what)));
    }
    s.clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite(what.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(v: &[f64]) -> Points {
        Points::from_values(v)
    }

    #[test]
    fn digamma_reference_values() {
        assert!((digamma(1.0).unwrap() + 0.577_215_664_901_532_9).abs() < 1e-15);
        assert!((digamma(2.0).unwrap() - 0.422_784_335_098_467_1).abs() < 1e-14);
        assert!((digamma(0.5).unwrap() + 1.963_510_026_021_423_5).abs() < 1e-13);
        for x in [0.5, 1.0, 3.7] {
            let gap = digamma(x + 1.0).unwrap() - digamma(x).unwrap();
            assert!((gap - 1.0 / x).abs() < 1e-12, "x = {}", x);
        }
        assert!(digamma(0.0).is_err());
        assert!(digamma(-1.5).is_err());
    }

    #[test]
    fn nn_hand_examples() {
        // ρ = (2, 2), ν = (1, 1): ½(log ½ + log ½) + log 2 = 0
        let e = kld_est_nn(&pts(&[0.0, 2.0]), &pts(&[1.0, 5.0]), 1).unwrap();
        assert!(e.value.abs() < 1e-15);
        let e = kld_est_nn(&pts(&[0.0, 2.0]), &pts(&[-1.0, 3.0]), 1).unwrap();
        assert!(e.value.abs() < 1e-15);
    }

    #[test]
    fn bc_hand_examples() {
        let e = kld_est_bc(&pts(&[0.0, 2.0]), &pts(&[1.0, 5.0])).unwrap();
        assert_eq!(e.value, 0.0);

        let e = kld_est_bc(&pts(&[0.0, 1.0]), &pts(&[0.05, 10.0])).unwrap();
        let expected = 0.5 * (0.05f64.ln() + 0.95f64.ln()) + 2f64.ln();
        assert!((e.value - expected).abs() < 1e-12);
        assert!((e.value + 0.8304).abs() < 1e-4);

        let stats = neighbor_stats(&pts(&[0.0, 1.0, 1.5]), &pts(&[3.0, 4.0])).unwrap();
        assert_eq!((stats[0].k, stats[0].l), (2, 1));
        assert_eq!(stats[0].eps, 3.0);
        assert_eq!(stats[0].rho_k, 1.5);
        // every point has k = 2, l = 1; log-ratios log 2, log 2, 0
        let e = kld_est_bc(&pts(&[0.0, 1.0, 1.5]), &pts(&[3.0, 4.0])).unwrap();
        assert!((e.value - (2.0 / 3.0 * 2f64.ln() + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn bc_rejects_bad_inputs() {
        assert!(matches!(
            kld_est_bc(&pts(&[0.0, 0.0, 1.0]), &pts(&[3.0])),
            Err(Error::Duplicate { sample: "x", first: 0, second: 1 })
        ));
        assert!(matches!(
            kld_est_bc(&pts(&[0.0, 1.0]), &pts(&[3.0, 3.0])),
            Err(Error::Duplicate { sample: "y", .. })
        ));
        assert!(matches!(
            kld_est_bc(&pts(&[0.0, 1.0]), &pts(&[1.0])),
            Err(Error::Coincident { x_row: 1, y_row: 0 })
        ));
        assert!(kld_est_bc(&pts(&[0.0]), &pts(&[1.0])).is_err());
        assert!(kld_est_bc(&pts(&[0.0, 1.0]), &pts(&[])).is_err());
    }

    #[test]
    fn nn_rejects_bad_k() {
        assert!(kld_est_nn(&pts(&[0.0, 1.0]), &pts(&[3.0, 4.0]), 2).is_err());
        assert!(kld_est_nn(&pts(&[0.0, 1.0, 2.0]), &pts(&[3.0]), 2).is_err());
        assert!(kld_est_nn(&pts(&[0.0, 1.0]), &pts(&[3.0]), 0).is_err());
    }

    #[test]
    fn bc_equals_nn_when_counts_are_one() {
        let x = pts(&[0.0, 2.0]);
        let y = pts(&[1.0, 5.0]);
        let stats = neighbor_stats(&x, &y).unwrap();
        assert!(stats.iter().all(|s| s.k == 1 && s.l == 1));
        assert_eq!(kld_est_bc(&x, &y).unwrap().value, kld_est_nn(&x, &y, 1).unwrap().value);
    }

    #[test]
    fn gaussian_closed_form() {
        let one = DMatrix::from_element(1, 1, 1.0);
        let four = DMatrix::from_element(1, 1, 4.0);
        assert_eq!(kld_gaussian_analytic(&[0.0], &one, &[0.0], &one).unwrap(), 0.0);
        assert!((kld_gaussian_analytic(&[0.0], &one, &[1.0], &one).unwrap() - 0.5).abs() < 1e-15);
        let v = kld_gaussian_analytic(&[0.0], &one, &[0.0], &four).unwrap();
        assert!((v - 0.5 * (0.25 - 1.0 + 4f64.ln())).abs() < 1e-15);
        assert!((v - 0.31815).abs() < 1e-5);
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let id = DMatrix::identity(2, 2);
        assert!(kld_gaussian_analytic(&[0.0, 0.0], &bad, &[0.0, 0.0], &id).is_err());
    }
}
