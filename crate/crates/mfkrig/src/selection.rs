//! Parametric sweep over all kernel/trend/estimator/optimizer combinations,
//! validation scoring with Q2 and normalized maximum absolute error, and
//! best-model selection.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::gp::{fit, Estimation, KrigingModel};
use crate::hierarchical::fit_hierarchical;
use crate::kernel::{CorrelationFamily, CorrelationSpec, CorrelationStructure};
use crate::optimize::{Method, OptimizerSpec};
use crate::trend::TrendSpec;

/// Trend axis of the combination grid (the external-predictor trend is
/// implied by hierarchical mode, not enumerated).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TrendChoice {
    Ordinary,
    Polynomial(u8),
}

impl TrendChoice {
    pub const ALL: [TrendChoice; 5] = [
        TrendChoice::Ordinary,
        TrendChoice::Polynomial(1),
        TrendChoice::Polynomial(2),
        TrendChoice::Polynomial(3),
        TrendChoice::Polynomial(4),
    ];

    pub fn to_trend_spec(self) -> TrendSpec {
        match self {
            TrendChoice::Ordinary => TrendSpec::Ordinary,
            TrendChoice::Polynomial(k) => TrendSpec::Polynomial(k),
        }
    }

    pub fn name(&self) -> String {
        match self {
            TrendChoice::Ordinary => "Ordinary".into(),
            TrendChoice::Polynomial(k) => format!("Polynomial{k}"),
        }
    }
}

/// Axes of the parametric grid. The default grid is the full product:
/// 2 structures x 5 families x 2 isotropy x 5 trends x 2 estimators x
/// 3 optimizers = 600 combinations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CombinationGrid {
    pub structures: Vec<CorrelationStructure>,
    pub families: Vec<CorrelationFamily>,
    pub isotropy: Vec<bool>,
    pub trends: Vec<TrendChoice>,
    pub estimations: Vec<Estimation>,
    pub optimizers: Vec<Method>,
}

impl Default for CombinationGrid {
    fn default() -> Self {
        CombinationGrid {
            structures: CorrelationStructure::ALL.to_vec(),
            families: CorrelationFamily::ALL.to_vec(),
            isotropy: vec![true, false],
            trends: TrendChoice::ALL.to_vec(),
            estimations: Estimation::ALL.to_vec(),
            optimizers: Method::ALL.to_vec(),
        }
    }
}

impl CombinationGrid {
    pub fn cardinality(&self) -> usize {
        self.structures.len()
            * self.families.len()
            * self.isotropy.len()
            * self.trends.len()
            * self.estimations.len()
            * self.optimizers.len()
    }
}

/// One point of the grid, with its 1-based enumeration index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Combination {
    pub index: usize,
    pub structure: CorrelationStructure,
    pub family: CorrelationFamily,
    pub isotropic: bool,
    pub trend: TrendChoice,
    pub estimation: Estimation,
    pub optimizer: Method,
}

impl Combination {
    pub fn correlation_spec(&self) -> CorrelationSpec {
        CorrelationSpec::new(self.family, self.structure, self.isotropic)
    }
}

/// Deterministic nested-loop enumeration: structure outermost, then
/// family, isotropy, trend, estimation, optimizer innermost.
pub fn enumerate_combinations(grid: &CombinationGrid) -> Vec<Combination> {
    let mut out = Vec::with_capacity(grid.cardinality());
    let mut index = 0usize;
    for &structure in &grid.structures {
        for &family in &grid.families {
            for &isotropic in &grid.isotropy {
                for &trend in &grid.trends {
                    for &estimation in &grid.estimations {
                        for &optimizer in &grid.optimizers {
                            index += 1;
                            out.push(Combination {
                                index,
                                structure,
                                family,
                                isotropic,
                                trend,
                                estimation,
                                optimizer,
                            });
                        }
                    }
                }
            }
        }
    }
    out
}

/// Predictive coefficient: 1 - SSE / SS_tot around the validation mean.
pub fn q2(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    if y_true.len() != y_pred.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} true values vs {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    if y_true.len() < 2 {
        return Err(Error::DegenerateValidation(
            "need at least 2 validation points".into(),
        ));
    }
    let n = y_true.len() as f64;
    let mean = y_true.iter().sum::<f64>() / n;
    let ss_tot: f64 = y_true.iter().map(|v| (v - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::DegenerateValidation(
            "validation responses are constant".into(),
        ));
    }
    let sse: f64 = y_true
        .iter()
        .zip(y_pred)
        .map(|(t, p)| (t - p).powi(2))
        .sum();
    Ok(1.0 - sse / ss_tot)
}

/// Maximum absolute error normalized by the validation output range.
pub fn mae(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    if y_true.len() != y_pred.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} true values vs {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    if y_true.len() < 2 {
        return Err(Error::DegenerateValidation(
            "need at least 2 validation points".into(),
        ));
    }
    let max = y_true.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = y_true.iter().cloned().fold(f64::INFINITY, f64::min);
    let range = max - min;
    if range <= 0.0 {
        return Err(Error::DegenerateValidation(
            "validation output range is zero".into(),
        ));
    }
    let worst = y_true
        .iter()
        .zip(y_pred)
        .map(|(t, p)| (t - p).abs())
        .fold(0.0f64, f64::max);
    Ok(worst / range)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FitStatus {
    Ok,
    Failed(String),
}

/// One row of the sweep report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepResult {
    pub combination: Combination,
    pub q2: Option<f64>,
    pub mae: Option<f64>,
    pub status: FitStatus,
    pub fit_seconds: f64,
    pub score_seconds: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepMode {
    Hierarchical,
    Conventional,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SelectionCriterion {
    Q2,
    Mae,
}

/// Fit one combination and return the fitted model.
///
/// Hierarchical mode fits a low-fidelity model with the combination's
/// kernel and trend options, then the high-fidelity level with the
/// low-fidelity mean as its trend. `shared_lf`, when set, bypasses the
/// per-combination low-fidelity refit.
pub fn fit_combination(
    combo: &Combination,
    train_lf: Option<&Dataset>,
    train_hf: &Dataset,
    mode: SweepMode,
    seed: u64,
    shared_lf: Option<&KrigingModel>,
) -> Result<KrigingModel> {
    let spec = combo.correlation_spec();
    let optimizer = OptimizerSpec::new(combo.optimizer, seed);
    match mode {
        SweepMode::Conventional => fit(
            train_hf,
            spec,
            combo.trend.to_trend_spec(),
            combo.estimation,
            &optimizer,
        ),
        SweepMode::Hierarchical => {
            let lf_model = match shared_lf {
                Some(m) => m.clone(),
                None => {
                    let lf_data = train_lf.ok_or_else(|| {
                        Error::InvalidInput("hierarchical mode requires low-fidelity data".into())
                    })?;
                    fit(
                        lf_data,
                        spec,
                        combo.trend.to_trend_spec(),
                        combo.estimation,
                        &optimizer,
                    )?
                }
            };
            fit_hierarchical(&lf_model, train_hf, spec, combo.estimation, &optimizer)
        }
    }
}

fn run_one(
    combo: &Combination,
    train_lf: Option<&Dataset>,
    train_hf: &Dataset,
    validate: &Dataset,
    mode: SweepMode,
    base_seed: u64,
    shared_lf: Option<&KrigingModel>,
) -> SweepResult {
    let seed = base_seed ^ combo.index as u64;
    let t0 = Instant::now();
    let fitted = fit_combination(combo, train_lf, train_hf, mode, seed, shared_lf);
    let fit_seconds = t0.elapsed().as_secs_f64();
    match fitted {
        Ok(model) => {
            let t1 = Instant::now();
            let scored = (|| -> Result<(f64, f64)> {
                let preds = model.predict_batch(&validate.x)?;
                let y_pred: Vec<f64> = preds.iter().map(|p| p.mean).collect();
                let y_true: Vec<f64> = validate.y.iter().copied().collect();
                Ok((q2(&y_true, &y_pred)?, mae(&y_true, &y_pred)?))
            })();
            let score_seconds = t1.elapsed().as_secs_f64();
            match scored {
                Ok((q, m)) => SweepResult {
                    combination: *combo,
                    q2: Some(q),
                    mae: Some(m),
                    status: FitStatus::Ok,
                    fit_seconds,
                    score_seconds,
                    seed,
                },
                Err(e) => SweepResult {
                    combination: *combo,
                    q2: None,
                    mae: None,
                    status: FitStatus::Failed(e.to_string()),
                    fit_seconds,
                    score_seconds,
                    seed,
                },
            }
        }
        Err(e) => SweepResult {
            combination: *combo,
            q2: None,
            mae: None,
            status: FitStatus::Failed(e.to_string()),
            fit_seconds,
            score_seconds: 0.0,
            seed,
        },
    }
}

/// Fit and score every combination of the grid. Rows come back in
/// enumeration order regardless of how many workers executed them; each
/// combination derives its own seed from `base_seed` and its index, so
/// concurrency never changes results.
///
/// `workers = 0` uses the rayon default. `shared_lf = true` fits one
/// low-fidelity model up front (Gaussian separable anisotropic, ordinary
/// trend, MLE, self-adaptive DE) instead of refitting per combination.
#[allow(clippy::too_many_arguments)]
pub fn run_sweep(
    grid: &CombinationGrid,
    train_lf: Option<&Dataset>,
    train_hf: &Dataset,
    validate: &Dataset,
    mode: SweepMode,
    base_seed: u64,
    workers: usize,
    shared_lf: bool,
) -> Result<Vec<SweepResult>> {
    if mode == SweepMode::Hierarchical && train_lf.is_none() {
        return Err(Error::InvalidInput(
            "hierarchical mode requires low-fidelity training data".into(),
        ));
    }
    let shared_model = if shared_lf && mode == SweepMode::Hierarchical {
        let lf_data = train_lf.unwrap();
        Some(fit(
            lf_data,
            CorrelationSpec::new(
                CorrelationFamily::Gaussian,
                CorrelationStructure::Separable,
                false,
            ),
            TrendSpec::Ordinary,
            Estimation::Mle,
            &OptimizerSpec::new(Method::HybridDe, base_seed),
        )?)
    } else {
        None
    };

    let combos = enumerate_combinations(grid);
    let work = |combo: &Combination| {
        run_one(
            combo,
            train_lf,
            train_hf,
            validate,
            mode,
            base_seed,
            shared_model.as_ref(),
        )
    };
    let results: Vec<SweepResult> = if workers == 1 {
        combos.iter().map(work).collect()
    } else if workers == 0 {
        combos.par_iter().map(work).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::FitFailure(format!("thread pool: {e}")))?;
        pool.install(|| combos.par_iter().map(work).collect())
    };
    Ok(results)
}

/// Pick the best successful row: maximal Q2 or minimal MAE, ties broken
/// by the other metric, then by the lowest combination index.
pub fn select_best(
    results: &[SweepResult],
    criterion: SelectionCriterion,
) -> Result<&SweepResult> {
    let ok_rows: Vec<&SweepResult> = results
        .iter()
        .filter(|r| r.status == FitStatus::Ok)
        .collect();
    if ok_rows.is_empty() {
        return Err(Error::NoModel);
    }
    let best = ok_rows
        .into_iter()
        .min_by(|a, b| {
            let (aq, am) = (a.q2.unwrap(), a.mae.unwrap());
            let (bq, bm) = (b.q2.unwrap(), b.mae.unwrap());
            let primary = match criterion {
                SelectionCriterion::Q2 => bq.total_cmp(&aq),
                SelectionCriterion::Mae => am.total_cmp(&bm),
            };
            primary
                .then_with(|| match criterion {
                    SelectionCriterion::Q2 => am.total_cmp(&bm),
                    SelectionCriterion::Mae => bq.total_cmp(&aq),
                })
                .then_with(|| a.combination.index.cmp(&b.combination.index))
        })
        .unwrap();
    Ok(best)
}
