//! Hierarchical Kriging: the mean predictor of a lower-fidelity model is
//! the single trend basis of the next fidelity level.
//!
//! Each level is an ordinary [`KrigingModel`] whose trend is
//! `ExternalPredictor(level below)`, so hierarchical prediction shares the
//! universal-Kriging code path bit for bit.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::gp::{fit, Estimation, KrigingModel, Prediction};
use crate::kernel::CorrelationSpec;
use crate::optimize::OptimizerSpec;
use crate::trend::TrendSpec;

/// Fit the next fidelity level on top of an already fitted model.
///
/// The lower-fidelity model is embedded in the returned model's trend;
/// it is cloned, never mutated.
pub fn fit_hierarchical(
    lf_model: &KrigingModel,
    hf_data: &Dataset,
    spec: CorrelationSpec,
    estimation: Estimation,
    optimizer: &OptimizerSpec,
) -> Result<KrigingModel> {
    if lf_model.dim() != hf_data.dim() {
        return Err(Error::ShapeMismatch(format!(
            "lower-fidelity model dimension {} vs high-fidelity data dimension {}",
            lf_model.dim(),
            hf_data.dim()
        )));
    }
    fit(
        hf_data,
        spec,
        TrendSpec::ExternalPredictor(Box::new(lf_model.clone())),
        estimation,
        optimizer,
    )
}

/// A chain of fitted fidelity levels, lowest first.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HierarchicalModel {
    top: KrigingModel,
}

impl HierarchicalModel {
    /// Wrap the top-level model of a hierarchy. Level count 1 degenerates
    /// to conventional Kriging.
    pub fn new(top: KrigingModel) -> Self {
        HierarchicalModel { top }
    }

    pub fn top(&self) -> &KrigingModel {
        &self.top
    }

    /// Models from the lowest fidelity up to the top level.
    pub fn levels(&self) -> Vec<&KrigingModel> {
        let mut chain = Vec::new();
        let mut cur = &self.top;
        loop {
            chain.push(cur);
            match &cur.trend {
                TrendSpec::ExternalPredictor(inner) => cur = inner,
                _ => break,
            }
        }
        chain.reverse();
        chain
    }

    pub fn num_levels(&self) -> usize {
        self.levels().len()
    }

    /// Scaling factor beta of the top level, if it has a lower level.
    pub fn beta_scale(&self) -> Option<f64> {
        match &self.top.trend {
            TrendSpec::ExternalPredictor(_) => Some(self.top.beta_hat[0]),
            _ => None,
        }
    }

    /// Identical to `self.top().predict(x_star)`: hierarchical prediction
    /// is universal Kriging with the lower-fidelity mean as its basis.
    pub fn predict(&self, x_star: &[f64]) -> Result<Prediction> {
        self.top.predict(x_star)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut model: HierarchicalModel = serde_json::from_str(text)?;
        model.top.rebuild()?;
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{forrester_doe, Dataset};
    use crate::gp::fit_with_theta;
    use crate::kernel::{CorrelationFamily, CorrelationStructure, HyperParams};
    use crate::optimize::Method;
    use approx::assert_relative_eq;

    fn gauss() -> CorrelationSpec {
        CorrelationSpec::new(
            CorrelationFamily::Gaussian,
            CorrelationStructure::Separable,
            true,
        )
    }

    fn hp(v: &[f64]) -> HyperParams {
        HyperParams::new(v.to_vec()).unwrap()
    }

    #[test]
    fn constant_lf_reduces_to_ordinary_kriging() {
        // LF model fitted to the constant 1 predicts 1 everywhere
        let lf_data = Dataset::from_rows(
            vec![vec![0.0], vec![0.5], vec![1.0]],
            vec![1.0, 1.0, 1.0],
            None,
            vec!["x1".into()],
            "y".into(),
        )
        .unwrap();
        let lf = fit_with_theta(&lf_data, gauss(), TrendSpec::Ordinary, hp(&[1.0])).unwrap();
        assert_relative_eq!(lf.predict(&[0.321]).unwrap().mean, 1.0, epsilon = 1e-9);

        let hf_data = forrester_doe().hf;
        let theta = hp(&[0.7]);
        let hk = fit_with_theta(
            &hf_data,
            gauss(),
            TrendSpec::ExternalPredictor(Box::new(lf)),
            theta.clone(),
        )
        .unwrap();
        let ok = fit_with_theta(&hf_data, gauss(), TrendSpec::Ordinary, theta).unwrap();
        for k in 0..=50 {
            let x = [k as f64 / 50.0];
            let a = hk.predict(&x).unwrap();
            let b = ok.predict(&x).unwrap();
            assert_relative_eq!(a.mean, b.mean, max_relative = 1e-8, epsilon = 1e-8);
            assert_relative_eq!(a.variance, b.variance, max_relative = 1e-8, epsilon = 1e-8);
        }
    }

    #[test]
    fn exact_scaling_recovers_beta() {
        let pair = forrester_doe();
        let lf = fit(
            &pair.lf,
            gauss(),
            TrendSpec::Ordinary,
            Estimation::Mle,
            &OptimizerSpec::new(Method::LocalGradient, 1),
        )
        .unwrap();
        // HF responses exactly twice the LF model's predictions
        let d2 = [0.0, 0.4, 0.6, 1.0];
        let hf_data = Dataset::from_rows(
            d2.iter().map(|&x| vec![x]).collect(),
            d2.iter()
                .map(|&x| 2.0 * lf.predict(&[x]).unwrap().mean)
                .collect(),
            None,
            vec!["x1".into()],
            "y".into(),
        )
        .unwrap();
        let hk = fit_hierarchical(
            &lf,
            &hf_data,
            gauss(),
            Estimation::Mle,
            &OptimizerSpec::new(Method::LocalGradient, 2),
        )
        .unwrap();
        let model = HierarchicalModel::new(hk);
        assert_relative_eq!(model.beta_scale().unwrap(), 2.0, max_relative = 1e-6);
        assert!(model.top().sigma2_hat < 1e-10);
    }

    #[test]
    fn forrester_beta_near_two() {
        let pair = forrester_doe();
        let lf = fit(
            &pair.lf,
            gauss(),
            TrendSpec::Ordinary,
            Estimation::Mle,
            &OptimizerSpec::new(Method::HybridDe, 5),
        )
        .unwrap();
        let hk = fit_hierarchical(
            &lf,
            &pair.hf,
            gauss(),
            Estimation::Mle,
            &OptimizerSpec::new(Method::HybridDe, 6),
        )
        .unwrap();
        let beta = HierarchicalModel::new(hk).beta_scale().unwrap();
        assert!((1.8..=2.2).contains(&beta), "beta = {beta}");
    }

    #[test]
    fn interpolates_hf_points_and_tracks_truth() {
        let pair = forrester_doe();
        let lf = fit(
            &pair.lf,
            gauss(),
            TrendSpec::Ordinary,
            Estimation::Mle,
            &OptimizerSpec::new(Method::HybridDe, 3),
        )
        .unwrap();
        let hk = fit_hierarchical(
            &lf,
            &pair.hf,
            gauss(),
            Estimation::Mle,
            &OptimizerSpec::new(Method::HybridDe, 4),
        )
        .unwrap();
        let range = pair.hf.y.max() - pair.hf.y.min();
        for i in 0..pair.hf.n() {
            let p = hk.predict(&pair.hf.row(i)).unwrap();
            assert!((p.mean - pair.hf.y[i]).abs() <= 1e-6 * range);
        }
    }

    #[test]
    fn refitting_hf_never_mutates_lf() {
        let pair = forrester_doe();
        let lf = fit(
            &pair.lf,
            gauss(),
            TrendSpec::Ordinary,
            Estimation::Mle,
            &OptimizerSpec::new(Method::LocalGradient, 9),
        )
        .unwrap();
        let before = lf.to_json().unwrap();
        let _hk = fit_hierarchical(
            &lf,
            &pair.hf,
            gauss(),
            Estimation::Mle,
            &OptimizerSpec::new(Method::HybridGa, 10),
        )
        .unwrap();
        assert_eq!(lf.to_json().unwrap(), before);
    }

    #[test]
    fn dimension_mismatch_between_levels() {
        let pair = forrester_doe();
        let lf = fit_with_theta(&pair.lf, gauss(), TrendSpec::Ordinary, hp(&[1.0])).unwrap();
        let hf2 = Dataset::from_rows(
            vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]],
            vec![1.0, 2.0, 3.0, 4.0],
            None,
            vec!["x1".into(), "x2".into()],
            "y".into(),
        )
        .unwrap();
        assert!(matches!(
            fit_hierarchical(
                &lf,
                &hf2,
                gauss(),
                Estimation::Mle,
                &OptimizerSpec::new(Method::LocalGradient, 1)
            ),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn three_level_chain() {
        let pair = forrester_doe();
        let l1 = fit_with_theta(&pair.lf, gauss(), TrendSpec::Ordinary, hp(&[1.0])).unwrap();
        let l2 = fit_hierarchical(
            &l1,
            &pair.hf,
            gauss(),
            Estimation::Mle,
            &OptimizerSpec::new(Method::LocalGradient, 1),
        )
        .unwrap();
        let top_data = Dataset::from_rows(
            vec![vec![0.0], vec![0.3], vec![0.7], vec![1.0]],
            vec![1.0, 2.0, 0.5, 3.0],
            None,
            vec!["x1".into()],
            "y".into(),
        )
        .unwrap();
        let l3 = fit_hierarchical(
            &l2,
            &top_data,
            gauss(),
            Estimation::Mle,
            &OptimizerSpec::new(Method::LocalGradient, 1),
        )
        .unwrap();
        let model = HierarchicalModel::new(l3);
        assert_eq!(model.num_levels(), 3);
        assert!(model.beta_scale().is_some());
    }

    #[test]
    fn serialization_embeds_lower_level() {
        let pair = forrester_doe();
        let lf = fit_with_theta(&pair.lf, gauss(), TrendSpec::Ordinary, hp(&[1.0])).unwrap();
        let hk = fit_hierarchical(
            &lf,
            &pair.hf,
            gauss(),
            Estimation::Mle,
            &OptimizerSpec::new(Method::LocalGradient, 1),
        )
        .unwrap();
        let model = HierarchicalModel::new(hk);
        let text = model.to_json().unwrap();
        let reloaded = HierarchicalModel::from_json(&text).unwrap();
        assert_eq!(reloaded.num_levels(), 2);
        for k in 0..=20 {
            let x = [k as f64 / 20.0];
            let a = model.predict(&x).unwrap();
            let b = reloaded.predict(&x).unwrap();
            assert_eq!(a.mean, b.mean);
            assert_eq!(a.variance, b.variance);
        }
    }
}
