//! Small dense linear-algebra and normal-distribution helpers.

use nalgebra::DMatrix;
use statrs::function::erf::erfc_inv;

use crate::error::{Error, Result};

/// Standard normal CDF.
#[inline]
pub fn norm_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Standard normal density.
#[inline]
pub fn norm_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal quantile, `0 < p < 1`. One Newton step against
/// [`norm_cdf`] polishes the initial inverse.
pub fn norm_quantile(p: f64) -> f64 {
    let z = -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p);
    let dens = norm_pdf(z);
    if !z.is_finite() || dens <= 0.0 {
        return z;
    }
    let step = (norm_cdf(z) - p) / dens;
    if step.abs() < 1e-3 * (1.0 + z.abs()) {
        z - step
    } else {
        z
    }
}

/// Lower Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky_lower(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    a.clone()
        .cholesky()
        .map(|c| c.l())
        .ok_or_else(|| Error::NotPositiveDefinite("Cholesky factorisation failed".into()))
}

fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// Raises eigenvalues below `floor` to `floor`. Returns the input untouched
/// when no eigenvalue is below the floor.
pub fn floor_eigenvalues(a: &DMatrix<f64>, floor: f64) -> DMatrix<f64> {
    let eig = symmetrize(a).symmetric_eigen();
    if eig.eigenvalues.iter().all(|&v| v >= floor) {
        return a.clone();
    }
    let clipped = eig.eigenvalues.map(|v| v.max(floor));
    let v = &eig.eigenvectors;
    symmetrize(&(v * DMatrix::from_diagonal(&clipped) * v.transpose()))
}

/// Nearest-PD repair for correlation matrices: eigenvalue clipping at
/// `floor` followed by rescaling to a unit diagonal. A no-op when every
/// eigenvalue already reaches the floor.
pub fn repair_correlation(a: &DMatrix<f64>, floor: f64) -> DMatrix<f64> {
    let clipped = floor_eigenvalues(a, floor);
    if clipped == *a {
        return clipped;
    }
    let d = clipped.nrows();
    let scale: Vec<f64> = (0..d).map(|i| 1.0 / clipped[(i, i)].sqrt()).collect();
    let mut out = DMatrix::from_fn(d, d, |i, j| clipped[(i, j)] * scale[i] * scale[j]);
    for i in 0..d {
        out[(i, i)] = 1.0;
    }
    out
}

/// Equicorrelation matrix with off-diagonal `rho`.
pub fn equicorrelation(d: usize, rho: f64) -> DMatrix<f64> {
    DMatrix::from_fn(d, d, |i, j| if i == j { 1.0 } else { rho })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_functions() {
        assert_eq!(norm_cdf(0.0), 0.5);
        assert!((norm_cdf(1.96) - 0.975_002_104_851_779_5).abs() < 1e-15);
        assert!((norm_quantile(0.975) - 1.959_963_984_540_054).abs() < 1e-14);
        for p in [1e-10, 0.01, 0.3, 0.5, 0.9, 1.0 - 1e-9] {
            assert!((norm_cdf(norm_quantile(p)) - p).abs() < 1e-14 * p.max(1e-2) + 1e-16);
        }
    }

    #[test]
    fn repair_is_noop_on_pd_input() {
        let a = equicorrelation(3, 0.5);
        assert_eq!(repair_correlation(&a, 1e-6), a);
    }

    #[test]
    fn repair_fixes_indefinite_input() {
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 0.9, -0.9, 0.9, 1.0, 0.9, -0.9, 0.9, 1.0]);
        let r = repair_correlation(&a, 1e-6);
        assert!(cholesky_lower(&r).is_ok());
        for i in 0..3 {
            assert_eq!(r[(i, i)], 1.0);
        }
        assert!((r.clone() - r.transpose()).amax() < 1e-15);
        let min = r.clone().symmetric_eigen().eigenvalues.min();
        assert!(min > 0.0);
    }
}
