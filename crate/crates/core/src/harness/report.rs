//! Result tables and run manifests.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::format::g17;

/// One estimate in an experiment table.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub experiment: String,
    pub model: String,
    /// `mixed` for data experiments, `bc` or `nn` in benchmarks.
    pub estimator: String,
    /// `train`/`test`, `direct`/`marginalized`, `original`/`uniform`, ...
    pub scenario: String,
    /// Missing fraction or benchmark replicate.
    pub param: Option<f64>,
    pub kl_estimate: Option<f64>,
    pub ci_lower: Option<f64>,
    pub ci_upper: Option<f64>,
    pub n_train: usize,
    pub n_test: usize,
    pub m_effective: usize,
    pub failures: usize,
    pub truth: Option<f64>,
    pub seed: u64,
    /// `ok`, `skipped: ...` or `error: ...`.
    pub status: String,
}

pub const COLUMNS: [&str; 17] = [
    "experiment",
    "model",
    "estimator",
    "scenario",
    "param",
    "kl_estimate",
    "ci_lower",
    "ci_upper",
    "kl_clamped",
    "n_train",
    "n_test",
    "m_effective",
    "failures",
    "truth",
    "covered",
    "seed",
    "status",
];

fn opt(v: Option<f64>) -> String {
    v.map(g17).unwrap_or_default()
}

impl ResultRow {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }

    /// Negative estimates read as zero divergence.
    pub fn kl_clamped(&self) -> Option<f64> {
        self.kl_estimate.map(|v| v.max(0.0))
    }

    pub fn ci_width(&self) -> Option<f64> {
        Some(self.ci_upper? - self.ci_lower?)
    }

    /// Whether the interval contains the analytic truth.
    pub fn covered(&self) -> Option<bool> {
        let t = self.truth?;
        Some(self.ci_lower? <= t && t <= self.ci_upper?)
    }

    fn record(&self) -> Vec<String> {
        vec![
            self.experiment.clone(),
            self.model.clone(),
            self.estimator.clone(),
            self.scenario.clone(),
            opt(self.param),
            opt(self.kl_estimate),
            opt(self.ci_lower),
            opt(self.ci_upper),
            opt(self.kl_clamped()),
            self.n_train.to_string(),
            self.n_test.to_string(),
            self.m_effective.to_string(),
            self.failures.to_string(),
            opt(self.truth),
            self.covered().map(|c| (c as u8).to_string()).unwrap_or_default(),
            self.seed.to_string(),
            self.status.clone(),
        ]
    }
}

pub fn write_rows<W: Write>(writer: W, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(COLUMNS).map_err(|e| Error::Csv(e.to_string()))?;
    for r in rows {
        w.write_record(r.record()).map_err(|e| Error::Csv(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::Csv(e.to_string()))
}

/// Median estimate and CI coverage per benchmark case and estimator.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub case: String,
    pub estimator: String,
    pub replicates: usize,
    pub errors: usize,
    #[serde(serialize_with = "ser_opt")]
    pub median_estimate: Option<f64>,
    #[serde(serialize_with = "ser_opt")]
    pub truth: Option<f64>,
    #[serde(serialize_with = "ser_opt")]
    pub coverage: Option<f64>,
}

fn ser_opt<S: serde::Serializer>(v: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(x) => serde_json::value::RawValue::from_string(g17(*x))
            .map_err(serde::ser::Error::custom)?
            .serialize(s),
        None => s.serialize_none(),
    }
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let k = values.len();
    Some(if k % 2 == 1 {
        values[k / 2]
    } else {
        0.5 * (values[k / 2 - 1] + values[k / 2])
    })
}

pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut keys: Vec<(String, String)> = Vec::new();
    for r in rows {
        let key = (r.model.clone(), r.estimator.clone());
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(case, estimator)| {
            let group: Vec<&ResultRow> = rows
                .iter()
                .filter(|r| r.model == case && r.estimator == estimator)
                .collect();
            let mut est: Vec<f64> = group.iter().filter_map(|r| r.kl_estimate).collect();
            let cov: Vec<bool> = group.iter().filter_map(|r| r.covered()).collect();
            SummaryRow {
                replicates: group.len(),
                errors: group.iter().filter(|r| !r.is_ok()).count(),
                median_estimate: median(&mut est),
                truth: group.iter().find_map(|r| r.truth),
                coverage: (!cov.is_empty())
                    .then(|| cov.iter().filter(|&&c| c).count() as f64 / cov.len() as f64),
                case,
                estimator,
            }
        })
        .collect()
}

/// Paths written by [`write_outputs`].
#[derive(Debug, Clone, PartialEq)]
pub struct OutputPaths {
    pub results: PathBuf,
    pub manifest: PathBuf,
}

pub fn manifest_path(results: &Path) -> PathBuf {
    results.with_extension("manifest.json")
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    experiment: String,
    results: String,
    rows: usize,
    errors: usize,
    config: serde_json::Value,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    summary: Vec<SummaryRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    timings: Option<&'a [(String, f64)]>,
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.display().to_string(),
            source,
        })?;
    }
    std::fs::write(path, bytes).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Writes the results CSV and its JSON manifest.
pub fn write_outputs(
    results: &Path,
    experiment: &str,
    config: serde_json::Value,
    rows: &[ResultRow],
    summary: Vec<SummaryRow>,
    timings: Option<&[(String, f64)]>,
) -> Result<OutputPaths> {
    let mut buf = Vec::new();
    write_rows(&mut buf, rows)?;
    write_file(results, &buf)?;
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        experiment: experiment.to_string(),
        results: results
            .file_name()
            .map(|f| f.to_string_lossy().into_owned())
            .unwrap_or_default(),
        rows: rows.len(),
        errors: rows.iter().filter(|r| r.status.starts_with("error")).count(),
        config,
        summary,
        timings,
    };
    let path = manifest_path(results);
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Json(e.to_string()))? + "\n";
    write_file(&path, text.as_bytes())?;
    Ok(OutputPaths {
        results: results.to_path_buf(),
        manifest: path,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(est: Option<f64>, lo: f64, hi: f64, truth: Option<f64>) -> ResultRow {
        ResultRow {
            experiment: "e".into(),
            model: "m".into(),
            estimator: "bc".into(),
            scenario: "test".into(),
            param: None,
            kl_estimate: est,
            ci_lower: Some(lo),
            ci_upper: Some(hi),
            n_train: 1,
            n_test: 2,
            m_effective: 3,
            failures: 0,
            truth,
            seed: 9,
            status: "ok".into(),
        }
    }

    #[test]
    fn clamping_and_coverage() {
        let r = row(Some(-0.25), -0.5, 0.1, Some(0.0));
        assert_eq!(r.kl_clamped(), Some(0.0));
        assert_eq!(r.covered(), Some(true));
        assert_eq!(row(Some(0.3), 0.2, 0.4, Some(0.5)).covered(), Some(false));
        assert_eq!(row(None, 0.0, 0.0, None).kl_clamped(), None);
    }

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        write_rows(&mut buf, &[row(Some(0.1), 0.0, 0.2, None)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), COLUMNS.join(","));
        assert_eq!(
            lines.next().unwrap(),
            "e,m,bc,test,,0.10000000000000001,0,0.20000000000000001,0.10000000000000001,1,2,3,0,,,9,ok"
        );
    }

    #[test]
    fn summary_medians() {
        let rows = vec![
            row(Some(1.0), 0.0, 2.0, Some(1.5)),
            row(Some(3.0), 2.0, 4.0, Some(1.5)),
            row(Some(2.0), 1.0, 3.0, Some(1.5)),
        ];
        let s = summarize(&rows);
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].median_estimate, Some(2.0));
        assert_eq!(s[0].coverage, Some(2.0 / 3.0));
        assert_eq!(median(&mut [4.0, 1.0]), Some(2.5));
    }
}
