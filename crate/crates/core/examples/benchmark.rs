//! Estimator benchmark on Gaussian pairs with known divergence, written to
//! a results CSV and manifest like the `benchmark` subcommand.
//!
//! cargo run --release --example benchmark [out_dir]

use kldcov::harness::{run_and_write, ExperimentConfig};

const SPEC: &str = r#"{
  "experiment": "benchmark",
  "seed": 1,
  "subsampling": {"s": 200},
  "benchmark": {
    "replicates": 10,
    "estimators": ["bc", "nn"],
    "cases": [
      {"name": "shift-1d", "p": {"mean": [0], "cov": [[1]]}, "q": {"mean": [1], "cov": [[1]]}, "n": 1000, "m": 1000},
      {"name": "corr-2d", "p": {"mean": [0, 0], "cov": [[1, 0.8], [0.8, 1]]},
       "q": {"mean": [0, 0], "cov": [[1, 0], [0, 1]]}, "n": 1000, "m": 1000}
    ]
  }
}"#;

fn main() -> kldcov::Result<()> {
    let dir = std::env::args().nth(1).unwrap_or_else(|| std::env::temp_dir().display().to_string());
    let cfg = ExperimentConfig::from_json_str(SPEC)?;
    let (run, paths) = run_and_write(&cfg, &std::path::Path::new(&dir).join("benchmark_results.csv"))?;
    for s in &run.summary {
        println!(
            "{:<9} {:<3} median {:.4} truth {:.4} coverage {:.2}",
            s.case,
            s.estimator,
            s.median_estimate.unwrap_or(f64::NAN),
            s.truth.unwrap_or(f64::NAN),
            s.coverage.unwrap_or(f64::NAN)
        );
    }
    println!("wrote {} and {}", paths.results.display(), paths.manifest.display());
    Ok(())
}
