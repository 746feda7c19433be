//! JSON model files. Every real number is written with 17 significant
//! digits, so a reloaded model is bit-identical to the saved one.
//!
//! Layout:
//!
//! ```text
//! {
//!   "format": "kldcov-model", "version": 1, "kind": "gausscop",
//!   "schema": [{"name": "age", "kind": "continuous"}, ...],
//!   "labels": [["F", "M"], ...],                  // per discrete column
//!   "discrete": {"keys": [[0], [1]], "pmf": [0.48, 0.52]} | null,
//!   "continuous": {"shared": MODEL} | {"per_stratum": [MODEL, ...]}
//! }
//! MODEL = {"type": "empty"}
//!       | {"type": "gauss_dist", "mean": [...], "cov": [[...], ...]}
//!       | {"type": "indep_cop", "margins": [{"values": [...], "bandwidth": h}, ...]}
//!       | {"type": "gauss_cop", "margins": [...], "corr": [[...], ...]}
//! ```

use nalgebra::DMatrix;
use serde::ser::SerializeSeq;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::value::RawValue;

use crate::format::g17;

fn raw(v: f64) -> Box<RawValue> {
    RawValue::from_string(g17(v)).expect("finite numbers are valid JSON")
}

pub(crate) fn ser_f64<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    raw(*v).serialize(s)
}

pub(crate) fn ser_vec<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for &x in v {
        seq.serialize_element(&raw(x))?;
    }
    seq.end()
}

pub(crate) fn ser_mat<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
    let rows: Vec<Vec<Box<RawValue>>> = (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| raw(m[(i, j)])).collect())
        .collect();
    rows.serialize(s)
}

pub(crate) fn de_mat<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
    let rows: Vec<Vec<f64>> = Vec::deserialize(d)?;
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(serde::de::Error::custom("matrix must be square"));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}
