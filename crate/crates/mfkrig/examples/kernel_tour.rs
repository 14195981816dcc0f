//! A tour of the five correlation families and the two multi-dimensional
//! structures (separable product vs. ellipsoidal radial).
//!
//! Run with `cargo run --example kernel_tour`.

use mfkrig::kernel::{corr, corr1d, CorrelationFamily, CorrelationSpec, CorrelationStructure, HyperParams};

fn main() -> mfkrig::Result<()> {
    let theta = 0.5;
    println!("1-D correlation at range theta = {theta}");
    println!(
        "{:>6} {:>10} {:>12} {:>10} {:>10} {:>8}",
        "h", "gaussian", "exponential", "matern32", "matern52", "linear"
    );
    for k in 0..=8 {
        let h = k as f64 * 0.125;
        let row: Vec<f64> = CorrelationFamily::ALL
            .iter()
            .map(|f| corr1d(*f, h, theta).unwrap())
            .collect();
        println!(
            "{h:>6.3} {:>10.4} {:>12.4} {:>10.4} {:>10.4} {:>8.4}",
            row[0], row[1], row[2], row[3], row[4]
        );
    }

    // in d > 1 the same family can combine per-dimension correlations as a
    // product (separable) or act on a scaled radial distance (ellipsoidal)
    let a = [0.0, 0.0];
    let b = [0.3, 0.4];
    let theta2 = HyperParams::new(vec![0.5, 1.0])?;
    println!();
    println!("2-D Matern-5/2, point ({:?}) vs ({:?}):", a, b);
    for structure in [CorrelationStructure::Separable, CorrelationStructure::Ellipsoidal] {
        let spec = CorrelationSpec::new(CorrelationFamily::Matern52, structure, false);
        println!("  {:?}: {:.6}", structure, corr(&spec, &a, &b, &theta2)?);
    }

    // for the Gaussian family the two structures coincide exactly
    let spec_s = CorrelationSpec::new(CorrelationFamily::Gaussian, CorrelationStructure::Separable, false);
    let spec_e = CorrelationSpec::new(CorrelationFamily::Gaussian, CorrelationStructure::Ellipsoidal, false);
    println!();
    println!(
        "gaussian separable == ellipsoidal: {} == {}",
        corr(&spec_s, &a, &b, &theta2)?,
        corr(&spec_e, &a, &b, &theta2)?
    );
    Ok(())
}
