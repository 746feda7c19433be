//! Estimate KL(p || q) for two Gaussian samples and compare with the closed form.
//!
//! cargo run --release --example estimate_gaussian

use kldcov::kld::{kld_est_bc, kld_est_nn, kld_gaussian_analytic};
use kldcov::synth::gaussian;
use nalgebra::DMatrix;

fn main() -> kldcov::Result<()> {
    let p_cov = DMatrix::from_row_slice(2, 2, &[1.0, 0.8, 0.8, 1.0]);
    let q_cov = DMatrix::identity(2, 2);
    let truth = kld_gaussian_analytic(&[0.0, 0.0], &p_cov, &[0.0, 0.0], &q_cov)?;
    println!("analytic KL = {:.4}", truth);
    for n in [250, 1000, 4000, 16000] {
        let x = gaussian(&[0.0, 0.0], &p_cov, n, 1)?.continuous_points()?;
        let y = gaussian(&[0.0, 0.0], &q_cov, n, 2)?.continuous_points()?;
        let bc = kld_est_bc(&x, &y)?.value;
        let nn = kld_est_nn(&x, &y, 1)?.value;
        println!("n = {:>5}: bias-corrected {:.4}, 1-NN {:.4}", n, bc, nn);
    }
    Ok(())
}
