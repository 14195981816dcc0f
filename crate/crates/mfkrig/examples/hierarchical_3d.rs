//! Multi-fidelity modelling in 3-D with noisy, replicated low-fidelity data
//! and high-fidelity data confined to three slices of the first input axis —
//! the situation where a surrogate must borrow shape from the cheap model to
//! fill the gaps in the expensive one.
//!
//! Run with `cargo run --example hierarchical_3d`.

use mfkrig::data::{synthetic_3d_pair, synthetic_hf_3d, synthetic_hf_sliced};
use mfkrig::gp::fit;
use mfkrig::hierarchical::fit_hierarchical;
use mfkrig::kernel::{CorrelationFamily, CorrelationSpec, CorrelationStructure};
use mfkrig::optimize::{Method, OptimizerSpec};
use mfkrig::trend::TrendSpec;
use mfkrig::Estimation;

fn main() -> mfkrig::Result<()> {
    let noise = 0.05;
    let pair = synthetic_3d_pair(100, 4, noise, 1)?;
    let hf = synthetic_hf_sliced(&[0.2, 0.5, 0.8], 2, noise, 2)?;
    println!(
        "lf: {} design points ({} replicates each), hf: {} points on 3 slices",
        pair.lf.n(),
        pair.lf.replication_counts.as_ref().map_or(1, |c| c[0]),
        hf.n()
    );

    let spec = CorrelationSpec::new(
        CorrelationFamily::Gaussian,
        CorrelationStructure::Separable,
        false,
    );
    let optimizer = OptimizerSpec::new(Method::HybridDe, 3);
    let lf = fit(&pair.lf, spec, TrendSpec::Ordinary, Estimation::Mle, &optimizer)?;
    let hk = fit_hierarchical(&lf, &hf, spec, Estimation::Mle, &optimizer)?;
    let conv = fit(&hf, spec, TrendSpec::Ordinary, Estimation::Mle, &optimizer)?;

    // score on a clean 5x5x5 lattice the models never saw
    let mut sse_hk = 0.0;
    let mut sse_conv = 0.0;
    let mut n = 0;
    for i in 0..5 {
        for j in 0..5 {
            for k in 0..5 {
                let p = [i as f64 / 4.0, j as f64 / 4.0, k as f64 / 4.0];
                let truth = synthetic_hf_3d(&p);
                sse_hk += (hk.predict(&p)?.mean - truth).powi(2);
                sse_conv += (conv.predict(&p)?.mean - truth).powi(2);
                n += 1;
            }
        }
    }
    println!("hierarchical beta  = {:.3}", hk.beta_hat[0]);
    println!("hierarchical RMSE  = {:.4}", (sse_hk / n as f64).sqrt());
    println!("conventional RMSE  = {:.4}", (sse_conv / n as f64).sqrt());
    Ok(())
}
