//! Empirical check of the sqrt(n) convergence rate used for the intervals.
//!
//! cargo run --release --example convergence_rate

use kldcov::data::Dataset;
use kldcov::kld::kld_est_bc;
use kldcov::synth::gaussian;
use kldcov::uq::estimate_convergence_rate;
use nalgebra::DMatrix;

fn main() -> kldcov::Result<()> {
    let one = DMatrix::from_element(1, 1, 1.0);
    let x = gaussian(&[0.0], &one, 4000, 1)?;
    let y = gaussian(&[1.0], &one, 4000, 2)?;
    let est = |a: &Dataset, b: &Dataset| Ok(kld_est_bc(&a.continuous_points()?, &b.continuous_points()?)?.value);
    let rate = estimate_convergence_rate(&x, &y, est, &[50, 100, 200, 400, 800], 500, 3)?;
    for (b, spread) in &rate.spreads {
        println!("b = {:>4}: IQR {:.4}", b, spread);
    }
    println!("beta = {:.3} (0.5 means sqrt(n))", rate.beta);
    Ok(())
}
