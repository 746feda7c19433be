//! Univariate margins: a Gaussian-kernel CDF mixture
//! `F(t) = (1/n) Σ Φ((t - x_i)/h)` with Silverman's bandwidth.

use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{norm_cdf, norm_pdf};
use crate::uq::quantile_sorted;

// kernel terms further than this many bandwidths away are 0 or 1 in f64
const WINDOW: f64 = 9.0;
// the table covers every point within this many bandwidths of a data value
const TABLE_REACH: f64 = 7.0;
const NODES_PER_BANDWIDTH: f64 = 16.0;

/// Piecewise cubic Hermite table of `F` over the data-dense region. Node
/// values and derivatives are exact; slopes are limited (Fritsch-Carlson)
/// so the interpolant is monotone. Between clusters of data further than
/// `2·TABLE_REACH` bandwidths apart the CDF is evaluated directly.
#[derive(Debug, Clone, Default, PartialEq)]
struct Table {
    t: Vec<f64>,
    f: Vec<f64>,
    // slopes at the left and right end of interval g
    m0: Vec<f64>,
    m1: Vec<f64>,
    // interval g joins nodes g and g+1 of the same segment
    joined: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarginModel {
    #[serde(serialize_with = "crate::models::io::ser_vec")]
    values: Vec<f64>,
    #[serde(serialize_with = "crate::models::io::ser_f64")]
    bandwidth: f64,
    #[serde(skip)]
    table: Table,
}

impl<'de> Deserialize<'de> for MarginModel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            values: Vec<f64>,
            bandwidth: f64,
        }
        let raw = Raw::deserialize(d)?;
        MarginModel::new(raw.values, raw.bandwidth).map_err(serde::de::Error::custom)
    }
}

/// Silverman's rule `0.9 · min(sd, IQR/1.34) · n^(-1/5)`. Falls back to the
/// standard deviation when the IQR is zero, and never goes below
/// `1e-8 · range`.
pub fn silverman_bandwidth(sorted: &[f64]) -> f64 {
    let n = sorted.len() as f64;
    let mean = sorted.iter().sum::<f64>() / n;
    let sd = (sorted.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt();
    let iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    let range = sorted[sorted.len() - 1] - sorted[0];
    (0.9 * spread * n.powf(-0.2)).max(1e-8 * range)
}

fn hermite(t0: f64, dt: f64, f0: f64, f1: f64, m0: f64, m1: f64, t: f64) -> (f64, f64) {
    let s = (t - t0) / dt;
    let s2 = s * s;
    let s3 = s2 * s;
    let v = (2.0 * s3 - 3.0 * s2 + 1.0) * f0
        + (s3 - 2.0 * s2 + s) * dt * m0
        + (-2.0 * s3 + 3.0 * s2) * f1
        + (s3 - s2) * dt * m1;
    let d = (6.0 * s2 - 6.0 * s) * (f0 - f1) / dt + (3.0 * s2 - 4.0 * s + 1.0) * m0 + (3.0 * s2 - 2.0 * s) * m1;
    (v, d)
}

impl MarginModel {
    pub fn new(mut values: Vec<f64>, bandwidth: f64) -> Result<Self> {
        if values.len() < 5 {
            return Err(Error::Fit(format!(
                "margin needs at least 5 observed values, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) || !(bandwidth > 0.0) || !bandwidth.is_finite() {
            return Err(Error::Fit("margin values and bandwidth must be finite".into()));
        }
        values.sort_by(f64::total_cmp);
        if values[0] == values[values.len() - 1] {
            return Err(Error::Fit("margin values have zero spread".into()));
        }
        let mut m = MarginModel {
            values,
            bandwidth,
            table: Table::default(),
        };
        m.table = m.build_table();
        Ok(m)
    }

    fn build_table(&self) -> Table {
        let h = self.bandwidth;
        let reach = TABLE_REACH * h;
        let dt = h / NODES_PER_BANDWIDTH;
        // merge [x - reach, x + reach] into disjoint segments
        let mut segments: Vec<(f64, f64)> = Vec::new();
        for &x in &self.values {
            match segments.last_mut() {
                Some(last) if x - reach <= last.1 => last.1 = x + reach,
                _ => segments.push((x - reach, x + reach)),
            }
        }
        let mut tab = Table::default();
        for (a, b) in segments {
            let nodes = ((b - a) / dt).ceil() as usize + 1;
            let first = tab.t.len();
            for g in 0..nodes {
                let t = a + g as f64 * dt;
                tab.t.push(t);
                tab.f.push(self.cdf_exact(t));
            }
            for g in first..tab.t.len() - 1 {
                tab.joined.push(true);
                let delta = (tab.f[g + 1] - tab.f[g]) / dt;
                let (mut m0, mut m1) = (self.density(tab.t[g]), self.density(tab.t[g + 1]));
                if delta <= 0.0 {
                    m0 = 0.0;
                    m1 = 0.0;
                } else {
                    let (al, be) = (m0 / delta, m1 / delta);
                    let r = al * al + be * be;
                    if r > 9.0 {
                        let tau = 3.0 / r.sqrt();
                        m0 = tau * al * delta;
                        m1 = tau * be * delta;
                    }
                }
                tab.m0.push(m0);
                tab.m1.push(m1);
            }
            // interval from this segment's last node to the next segment
            tab.joined.push(false);
            tab.m0.push(0.0);
            tab.m1.push(0.0);
        }
        tab
    }

    /// Sorted training values.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn range(&self) -> f64 {
        self.values[self.values.len() - 1] - self.values[0]
    }

    /// Clamp bounds `(1/(2n), 1 - 1/(2n))` applied before copula use.
    pub fn clamp_bounds(&self) -> (f64, f64) {
        let half = 0.5 / self.n() as f64;
        (half, 1.0 - half)
    }

    pub fn clamp(&self, u: f64) -> f64 {
        let (lo, hi) = self.clamp_bounds();
        u.clamp(lo, hi)
    }

    fn window(&self, t: f64) -> (usize, usize) {
        let reach = WINDOW * self.bandwidth;
        let lo = self.values.partition_point(|&v| v < t - reach);
        let hi = self.values.partition_point(|&v| v <= t + reach);
        (lo, hi)
    }

    /// Direct evaluation of the kernel mixture.
    pub fn cdf_exact(&self, t: f64) -> f64 {
        let h = self.bandwidth;
        let (lo, hi) = self.window(t);
        let n = self.values.len() as f64;
        if hi == 0 {
            // far below the data: keep every tail term so F stays strictly increasing
            return self.values.iter().map(|&v| norm_cdf((t - v) / h)).sum::<f64>() / n;
        }
        let inside: f64 = self.values[lo..hi].iter().map(|&v| norm_cdf((t - v) / h)).sum();
        (lo as f64 + inside) / n
    }

    // index of the tabulated interval holding t
    fn interval(&self, t: f64) -> Option<usize> {
        let tab = &self.table;
        let g = tab.t.partition_point(|&x| x <= t);
        if g == 0 || g == tab.t.len() || !tab.joined[g - 1] {
            None
        } else {
            Some(g - 1)
        }
    }

    fn eval_interval(&self, g: usize, t: f64) -> (f64, f64) {
        let tab = &self.table;
        hermite(
            tab.t[g],
            tab.t[g + 1] - tab.t[g],
            tab.f[g],
            tab.f[g + 1],
            tab.m0[g],
            tab.m1[g],
            t,
        )
    }

    /// Unclamped CDF (tabulated where the data are dense).
    pub fn cdf(&self, t: f64) -> f64 {
        match self.interval(t) {
            Some(g) => self.eval_interval(g, t).0,
            None => self.cdf_exact(t),
        }
    }

    pub fn density(&self, t: f64) -> f64 {
        let h = self.bandwidth;
        let (lo, hi) = self.window(t);
        let s: f64 = self.values[lo..hi].iter().map(|&v| norm_pdf((t - v) / h)).sum();
        s / (self.values.len() as f64 * h)
    }

    /// Inverse of [`cdf`](Self::cdf) for `0 < u < 1`: bracketed Newton
    /// iteration with bisection fallback.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::InvalidArgument(format!("quantile level {} not in (0,1)", u)));
        }
        let tab = &self.table;
        let last = tab.t.len() - 1;
        let g = tab.f.partition_point(|&f| f < u);
        let step = self.range() + self.bandwidth;
        let (lo, hi) = if g == 0 {
            let mut lo = tab.t[0] - step;
            let mut k = 1.0;
            while self.cdf(lo) >= u {
                k *= 2.0;
                lo = tab.t[0] - k * step;
            }
            (lo, tab.t[0])
        } else if g > last {
            let mut hi = tab.t[last] + step;
            let mut k = 1.0;
            while self.cdf(hi) < u {
                k *= 2.0;
                hi = tab.t[last] + k * step;
                if !hi.is_finite() {
                    return Err(Error::InvalidArgument(format!("quantile level {} too close to 1", u)));
                }
            }
            (tab.t[last], hi)
        } else {
            (tab.t[g - 1], tab.t[g])
        };
        if g >= 1 && g <= last && tab.joined[g - 1] {
            return Ok(self.invert(u, lo, hi, |t| self.eval_interval(g - 1, t)));
        }
        Ok(self.invert(u, lo, hi, |t| (self.cdf(t), self.density(t))))
    }

    fn invert(&self, u: f64, mut lo: f64, mut hi: f64, eval: impl Fn(f64) -> (f64, f64)) -> f64 {
        let tol = 1e-14 * (lo.abs() + hi.abs()) + f64::MIN_POSITIVE;
        let (flo, fhi) = (eval(lo).0, eval(hi).0);
        let mut t = if fhi > flo {
            lo + (hi - lo) * ((u - flo) / (fhi - flo)).clamp(0.0, 1.0)
        } else {
            0.5 * (lo + hi)
        };
        for _ in 0..200 {
            let (f, dens) = eval(t);
            let r = f - u;
            if r == 0.0 {
                return t;
            }
            if r < 0.0 {
                lo = t;
            } else {
                hi = t;
            }
            if hi - lo <= tol {
                return t;
            }
            let newton = t - r / dens;
            let next = if dens > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if next == t {
                return t;
            }
            t = next;
        }
        t
    }
}

/// Fits a margin to the observed entries of `values` (entries with
/// `missing[i] == true` are ignored).
pub fn fit_margin(values: &[f64], missing: &[bool]) -> Result<MarginModel> {
    if values.len() != missing.len() {
        return Err(Error::Dimension("values and mask lengths differ".into()));
    }
    let mut observed: Vec<f64> = values
        .iter()
        .zip(missing)
        .filter(|(_, &m)| !m)
        .map(|(&v, _)| v)
        .collect();
    if observed.len() < 5 {
        return Err(Error::Fit(format!(
            "margin needs at least 5 observed values, got {}",
            observed.len()
        )));
    }
    observed.sort_by(f64::total_cmp);
    if observed[0] == observed[observed.len() - 1] {
        return Err(Error::Fit("margin values have zero spread".into()));
    }
    let h = silverman_bandwidth(&observed);
    MarginModel::new(observed, h)
}
