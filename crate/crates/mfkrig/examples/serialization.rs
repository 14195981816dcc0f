//! Saving a fitted model to JSON and loading it back: documents are
//! self-contained (a hierarchical model embeds its low-fidelity level) and
//! reload to bit-identical predictions.
//!
//! Run with `cargo run --example serialization`.

use mfkrig::data::forrester_doe;
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
        true,
    );
    let optimizer = OptimizerSpec::new(Method::HybridGa, 12);
    let lf = fit(&pair.lf, spec, TrendSpec::Ordinary, Estimation::Mle, &optimizer)?;
    let hk = fit_hierarchical(&lf, &pair.hf, spec, Estimation::Mle, &optimizer)?;
    let model = HierarchicalModel::new(hk);

    let text = model.to_json()?;
    println!("document: {} bytes, {} fidelity levels", text.len(), model.num_levels());

    let reloaded = HierarchicalModel::from_json(&text)?;
    let mut max_diff: f64 = 0.0;
    for k in 0..=50 {
        let x = [k as f64 / 50.0];
        let a = model.predict(&x)?;
        let b = reloaded.predict(&x)?;
        max_diff = max_diff.max((a.mean - b.mean).abs());
    }
    println!("max |mean difference| after reload: {max_diff:e}");
    Ok(())
}
