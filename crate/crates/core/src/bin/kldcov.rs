use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use kldcov::data::{infer_schema, load_csv, Schema};
use kldcov::format::g17;
use kldcov::harness::{default_output, run_and_write, ExperimentConfig};
use kldcov::mixed::kld_est_mixed;
use kldcov::models::{fit_model, sample_model, FitOptions, ModelKind};
use kldcov::uq::{subsample_ci_with_distribution, SubsamplingConfig};
use kldcov::{Error, Result};

#[derive(Parser)]
#[command(name = "kldcov", version, about = "KL divergence evaluation of covariate distribution models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate KL(p || q) from a sample x ~ p and a sample y ~ q.
    Estimate {
        x: PathBuf,
        y: PathBuf,
        /// Schema JSON; inferred from x when omitted.
        #[arg(long)]
        schema: Option<PathBuf>,
        /// Add a subsampling confidence interval.
        #[arg(long)]
        ci: bool,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Number of subsamples.
        #[arg(long, default_value_t = 1000)]
        s: usize,
        /// Subsample size exponent.
        #[arg(long = "b-exp", default_value_t = 2.0 / 3.0)]
        b_exp: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "")]
        missing_token: String,
        /// Also write the result table here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit a covariate model and write a sample from it.
    FitSample {
        data: PathBuf,
        #[arg(long, default_value = "gausscop")]
        model: String,
        #[arg(long, default_value_t = 10_000)]
        m: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        schema: Option<PathBuf>,
        #[arg(long, default_value = "")]
        missing_token: String,
        /// Save the fitted model as JSON.
        #[arg(long)]
        model_out: Option<PathBuf>,
        /// Allow GaussDist on incomplete data.
        #[arg(long)]
        available_case: bool,
    },
    /// Run an experiment configuration.
    Experiment {
        config: PathBuf,
        /// Results CSV (default: from the config, or next to it).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an estimator benchmark on Gaussian pairs.
    Benchmark {
        spec: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn schema_for(schema: Option<&Path>, data: &Path, token: &str) -> Result<Schema> {
    match schema {
        Some(s) => Schema::from_json_file(s),
        None => infer_schema(data, token),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Estimate {
            x,
            y,
            schema,
            ci,
            alpha,
            s,
            b_exp,
            seed,
            missing_token,
            out,
        } => {
            let schema = schema_for(schema.as_deref(), &x, &missing_token)?;
            let xs = load_csv(&x, &schema, &missing_token)?;
            let ys = load_csv(&y, &schema, &missing_token)?;
            let mut text = String::from("kl_estimate,ci_lower,ci_upper,alpha,n,m,d,b_x,b_y,failures\n");
            if ci {
                let cfg = SubsamplingConfig {
                    s,
                    alpha,
                    b_exponent: b_exp,
                    seed,
                    ..SubsamplingConfig::default()
                };
                cfg.validate()?;
                let (e, dist) =
                    subsample_ci_with_distribution(&xs, &ys, |a, b| kld_est_mixed(a, b).map(|e| e.value), &cfg)?;
                let (lo, hi) = e.ci.expect("interval requested");
                text += &format!(
                    "{},{},{},{},{},{},{},{},{},{}\n",
                    g17(e.value),
                    g17(lo),
                    g17(hi),
                    g17(alpha),
                    e.n,
                    e.m,
                    schema.len(),
                    dist.b_x,
                    dist.b_y,
                    dist.failures
                );
            } else {
                let e = kld_est_mixed(&xs, &ys)?;
                text += &format!("{},,,,{},{},{},,,\n", g17(e.value), e.n, e.m, e.d);
            }
            print!("{}", text);
            if let Some(out) = out {
                write_text(&out, &text)?;
            }
        }
        Command::FitSample {
            data,
            model,
            m,
            seed,
            out,
            schema,
            missing_token,
            model_out,
            available_case,
        } => {
            let kind: ModelKind = model.parse()?;
            let schema = schema_for(schema.as_deref(), &data, &missing_token)?;
            let ds = load_csv(&data, &schema, &missing_token)?;
            let opts = FitOptions {
                allow_available_case_gauss: available_case,
            };
            let fitted = fit_model(kind, &ds, opts)?;
            if let Some(path) = model_out {
                fitted.save(path)?;
            }
            sample_model(&fitted, m, seed)?.save_csv(&out, &missing_token)?;
        }
        Command::Experiment { config, out } => {
            let cfg = ExperimentConfig::from_json_file(&config)?;
            let results = out.unwrap_or_else(|| default_output(&cfg, &config));
            let (run, paths) = run_and_write(&cfg, &results)?;
            report(&run.rows, &paths);
        }
        Command::Benchmark { spec, out } => {
            let cfg = ExperimentConfig::from_benchmark_file(&spec)?;
            let results = out.unwrap_or_else(|| default_output(&cfg, &spec));
            let (run, paths) = run_and_write(&cfg, &results)?;
            report(&run.rows, &paths);
        }
    }
    Ok(())
}

fn report(rows: &[kldcov::harness::ResultRow], paths: &kldcov::harness::OutputPaths) {
    let failed = rows.iter().filter(|r| r.status.starts_with("error")).count();
    eprintln!(
        "{} rows ({} failed) -> {} , {}",
        rows.len(),
        failed,
        paths.results.display(),
        paths.manifest.display()
    );
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e);
            ExitCode::from(if e.is_config() { 1 } else { 2 })
        }
    }
}
