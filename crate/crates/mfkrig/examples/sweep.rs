//! Sweep a restricted grid of kernel/trend/estimator/optimizer combinations
//! over the Forrester datasets and pick the best surrogate by validation
//! error.
//!
//! Run with `cargo run --example sweep`. The unrestricted grid has 600
//! combinations; this example trims the optimizer axis to keep the output
//! readable.

use mfkrig::data::{forrester_doe, forrester_hf, Dataset};
use mfkrig::optimize::Method;
use mfkrig::selection::{run_sweep, select_best, FitStatus, SelectionCriterion};
use mfkrig::{CombinationGrid, SweepMode};

fn main() -> mfkrig::Result<()> {
    let pair = forrester_doe();
    let validate = Dataset::from_rows(
        (0..21).map(|k| vec![k as f64 / 20.0]).collect(),
        (0..21).map(|k| forrester_hf(k as f64 / 20.0)).collect(),
        None,
        vec!["x1".into()],
        "y".into(),
    )?;

    let grid = CombinationGrid {
        optimizers: vec![Method::HybridDe],
        ..CombinationGrid::default()
    };
    println!("sweeping {} combinations...", grid.cardinality());
    let rows = run_sweep(
        &grid,
        Some(&pair.lf),
        &pair.hf,
        &validate,
        SweepMode::Hierarchical,
        0,    // base seed
        0,    // workers: all cores
        false,
    )?;

    let ok = rows.iter().filter(|r| r.status == FitStatus::Ok).count();
    println!("{ok}/{} combinations fitted", rows.len());

    for criterion in [SelectionCriterion::Q2, SelectionCriterion::Mae] {
        let best = select_best(&rows, criterion)?;
        let c = &best.combination;
        println!(
            "best by {criterion:?}: #{:03} {}/{}/{}/{}/{}  q2={:.6} mae={:.6}",
            c.index,
            c.structure.name(),
            c.family.name(),
            if c.isotropic { "iso" } else { "aniso" },
            c.trend.name(),
            c.estimation.name(),
            best.q2.unwrap(),
            best.mae.unwrap(),
        );
    }
    Ok(())
}
