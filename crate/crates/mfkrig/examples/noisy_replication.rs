//! Fitting noisy simulator output: exact-duplicate inputs are aggregated
//! into one design point whose replication spread becomes a per-point
//! nugget, so the surrogate regresses instead of chasing the noise.
//!
//! Run with `cargo run --example noisy_replication`.

use mfkrig::data::Dataset;
use mfkrig::gp::fit;
use mfkrig::kernel::{CorrelationFamily, CorrelationSpec, CorrelationStructure};
use mfkrig::optimize::{Method, OptimizerSpec};
use mfkrig::trend::TrendSpec;
use mfkrig::Estimation;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn truth(x: f64) -> f64 {
    (2.0 * std::f64::consts::PI * x).sin()
}

fn main() -> mfkrig::Result<()> {
    // 4 replicates at each of 9 design points, noise sd 0.2
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut rows = Vec::new();
    let mut outs = Vec::new();
    for k in 0..9 {
        let x = k as f64 / 8.0;
        for _ in 0..4 {
            let eps: f64 = rng.gen::<f64>() + rng.gen::<f64>() + rng.gen::<f64>() - 1.5; // ~N(0,0.5)
            rows.push(vec![x]);
            outs.push(truth(x) + 0.4 * eps);
        }
    }
    let data = Dataset::from_rows(rows, outs, None, vec!["x1".into()], "y".into())?;
    println!(
        "36 raw rows aggregated into {} design points, replication counts {:?}",
        data.n(),
        data.replication_counts.as_ref().unwrap()
    );
    println!(
        "per-point nugget (variance of the replicate mean): {:?}",
        data.noise_var
            .iter()
            .map(|v| format!("{v:.4}"))
            .collect::<Vec<_>>()
    );

    let spec = CorrelationSpec::new(
        CorrelationFamily::Matern52,
        CorrelationStructure::Separable,
        true,
    );
    let model = fit(
        &data,
        spec,
        TrendSpec::Ordinary,
        Estimation::Mle,
        &OptimizerSpec::new(Method::HybridDe, 3),
    )?;

    println!();
    println!("{:>6} {:>10} {:>10} {:>10}", "x", "truth", "mean", "sd");
    for k in 0..=8 {
        let x = k as f64 / 8.0;
        let p = model.predict(&[x])?;
        println!(
            "{x:>6.3} {:>10.4} {:>10.4} {:>10.4}",
            truth(x),
            p.mean,
            p.variance.sqrt()
        );
    }
    Ok(())
}
