//! Fit the three covariate models on a training half, sample from each and
//! score the samples against the held-out half.
//!
//! cargo run --release --example copula_models

use kldcov::data::split_half;
use kldcov::harness::dedup_for_estimation;
use kldcov::mixed::kld_est_mixed;
use kldcov::models::{fit_model, sample_model, FittedModel, FitOptions, ModelKind};
use kldcov::synth::{gaussian_copula, Margin};
use nalgebra::DMatrix;

fn main() -> kldcov::Result<()> {
    let corr = DMatrix::from_row_slice(3, 3, &[1.0, 0.8, 0.8, 0.8, 1.0, 0.8, 0.8, 0.8, 1.0]);
    let skewed = Margin::Lognormal { mu: 0.0, sigma: 0.5 };
    let data = gaussian_copula(&corr, &[skewed.clone(), skewed.clone(), skewed], 6000, 1)?;
    let (train, test) = split_half(&data, 2)?;
    let test = dedup_for_estimation(&test);
    for kind in ModelKind::ALL {
        let model = fit_model(kind, &train, FitOptions::default())?;
        // models serialize to JSON and reload bit for bit
        let model = FittedModel::from_json(&model.to_json())?;
        let sample = sample_model(&model, 10_000, 3)?;
        let kl = kld_est_mixed(&test, &dedup_for_estimation(&sample))?.value;
        println!("{:<9} KL(test || model) = {:.4}", kind.name(), kl);
    }
    Ok(())
}
