//! Subsampling confidence interval for a KL estimate.
//!
//! cargo run --release --example confidence_interval

use kldcov::kld::kld_gaussian_analytic;
use kldcov::mixed::kld_est_mixed;
use kldcov::synth::gaussian;
use kldcov::uq::{subsample_ci_with_distribution, SubsamplingConfig};
use nalgebra::DMatrix;

fn main() -> kldcov::Result<()> {
    let one = DMatrix::from_element(1, 1, 1.0);
    let x = gaussian(&[0.0], &one, 2000, 1)?;
    let y = gaussian(&[1.0], &one, 2000, 2)?;
    let cfg = SubsamplingConfig {
        seed: 7,
        ..SubsamplingConfig::default()
    };
    let (est, dist) = subsample_ci_with_distribution(&x, &y, |a, b| kld_est_mixed(a, b).map(|e| e.value), &cfg)?;
    let (lo, hi) = est.ci.expect("interval requested");
    println!("estimate {:.4}, 95% CI [{:.4}, {:.4}]", est.value, lo, hi);
    println!("subsample sizes b_x = {}, b_y = {}, failures = {}", dist.b_x, dist.b_y, dist.failures);
    println!("truth    {:.4}", kld_gaussian_analytic(&[0.0], &one, &[1.0], &one)?);
    Ok(())
}
