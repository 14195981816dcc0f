//! The three hyper-parameter search backends on a deceptive multimodal
//! objective: plain projected BFGS vs. the two hybrid global methods.
//!
//! Run with `cargo run --example optimizers`.

use mfkrig::optimize::{minimize, Method, OptimizerSpec};

// many local minima; global minimum 0 at the origin
fn rastrigin_ish(x: &[f64]) -> f64 {
    let (a, b) = (x[0], x[1]);
    a * a + b * b - 0.2 * ((3.0 * std::f64::consts::PI * a).cos() + (3.0 * std::f64::consts::PI * b).cos()) + 0.4
}

fn main() -> mfkrig::Result<()> {
    let bounds = [(-1.0, 1.0), (-1.0, 1.0)];
    println!(
        "{:>10} {:>22} {:>14} {:>8} {:>10}",
        "method", "x_best", "f_best", "evals", "converged"
    );
    for method in Method::ALL {
        let result = minimize(rastrigin_ish, &bounds, &OptimizerSpec::new(method, 7))?;
        println!(
            "{:>10} [{:>9.5}, {:>9.5}] {:>14.3e} {:>8} {:>10}",
            method.name(),
            result.x_best[0],
            result.x_best[1],
            result.f_best,
            result.evaluations,
            result.converged
        );
    }

    // identical seeds give bit-identical runs
    let a = minimize(rastrigin_ish, &bounds, &OptimizerSpec::new(Method::HybridDe, 99))?;
    let b = minimize(rastrigin_ish, &bounds, &OptimizerSpec::new(Method::HybridDe, 99))?;
    println!();
    println!("deterministic: {}", a.x_best == b.x_best && a.f_best == b.f_best);
    Ok(())
}
