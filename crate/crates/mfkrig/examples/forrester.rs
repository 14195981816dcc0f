//! The classic 1-D multi-fidelity demo: an expensive function sampled at 4
//! points, a cheap approximation sampled at 11, and Hierarchical Kriging
//! closing the gap between them.
//!
//! Run with `cargo run --example forrester`.

use mfkrig::data::{forrester_doe, forrester_hf};
use mfkrig::gp::fit;
use mfkrig::hierarchical::{fit_hierarchical, HierarchicalModel};
use mfkrig::kernel::{CorrelationFamily, CorrelationSpec, CorrelationStructure};
use mfkrig::optimize::{Method, OptimizerSpec};
use mfkrig::trend::TrendSpec;
use mfkrig::Estimation;

fn main() -> mfkrig::Result<()> {
    let pair = forrester_doe();
    let spec = CorrelationSpec::new(
        CorrelationFamily::Gaussian,
        CorrelationStructure::Separable,
        false,
    );
    let optimizer = OptimizerSpec::new(Method::HybridDe, 0);

    // low-fidelity model on 11 points, then the hierarchical model on 4
    let lf = fit(&pair.lf, spec, TrendSpec::Ordinary, Estimation::Mle, &optimizer)?;
    let hk_model = fit_hierarchical(&lf, &pair.hf, spec, Estimation::Mle, &optimizer)?;
    let hk = HierarchicalModel::new(hk_model);

    // conventional Kriging sees only the same 4 high-fidelity points
    let conv = fit(&pair.hf, spec, TrendSpec::Ordinary, Estimation::Mle, &optimizer)?;

    println!("scaling factor beta = {:.3}", hk.beta_scale().unwrap());
    println!();
    println!("{:>6} {:>10} {:>10} {:>10}", "x", "truth", "hk", "conv");
    let mut sse_hk = 0.0;
    let mut sse_conv = 0.0;
    for k in 0..=100 {
        let x = k as f64 / 100.0;
        let truth = forrester_hf(x);
        let m_hk = hk.predict(&[x])?.mean;
        let m_conv = conv.predict(&[x])?.mean;
        sse_hk += (m_hk - truth).powi(2);
        sse_conv += (m_conv - truth).powi(2);
        if k % 10 == 0 {
            println!("{x:>6.2} {truth:>10.4} {m_hk:>10.4} {m_conv:>10.4}");
        }
    }
    println!();
    println!("hierarchical RMSE = {:.4}", (sse_hk / 101.0).sqrt());
    println!("conventional RMSE = {:.4}", (sse_conv / 101.0).sqrt());
    Ok(())
}
