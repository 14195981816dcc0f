//! Kriging parameter estimation and prediction.
//!
//! Fitting standardizes the data, profiles the trend coefficients and
//! process variance out of the selected objective (maximum likelihood or
//! leave-one-out cross-validation), and searches log10(theta) inside a
//! fixed box with the configured optimizer. All linear solves go through
//! the stored Cholesky factor; explicit inverses never appear on the
//! estimation or prediction path.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, InputTransform, OutputTransform};
use crate::error::{Error, Result};
use crate::kernel::{corr_matrix, cross_corr_vector, CorrelationMatrix, CorrelationSpec, HyperParams};
use crate::optimize::{minimize, OptimResult, OptimizerSpec};
use crate::trend::{build_information_matrix, eval_basis_raw, TrendSpec};

/// Hyperparameter estimation objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Estimation {
    Mle,
    Cv,
}

impl Estimation {
    pub const ALL: [Estimation; 2] = [Estimation::Mle, Estimation::Cv];

    pub fn name(&self) -> &'static str {
        match self {
            Estimation::Mle => "MLE",
            Estimation::Cv => "CV",
        }
    }
}

/// Search box for log10(theta), per dimension, in standardized input space.
pub const LOG10_THETA_BOUNDS: (f64, f64) = (-3.0, 2.0);

const SIGMA2_FLOOR: f64 = 1e-300;

/// Posterior mean and variance at one point, in original output units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub mean: f64,
    pub variance: f64,
    /// Magnitude clipped away when the raw variance came out negative.
    pub clamp: f64,
}

/// Optimizer diagnostics kept with a fitted model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitDiagnostics {
    /// Final objective value from the hyper-parameter search, absent when
    /// theta was supplied directly.
    pub objective_value: Option<f64>,
    pub evaluations: u64,
    pub converged: bool,
}

#[derive(Clone)]
struct Cache {
    x_std: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    /// K^-1 (y_std - F beta)
    alpha: DVector<f64>,
    /// K^-1 F
    kinv_f: DMatrix<f64>,
    /// Cholesky of F^T K^-1 F
    m_chol: Cholesky<f64, Dyn>,
}

/// A fitted Kriging surrogate.
#[derive(Clone, Serialize, Deserialize)]
pub struct KrigingModel {
    pub x_orig: DMatrix<f64>,
    pub y_orig: DVector<f64>,
    pub spec: CorrelationSpec,
    pub trend: TrendSpec,
    pub theta_hat: HyperParams,
    pub beta_hat: DVector<f64>,
    pub sigma2_hat: f64,
    /// Per-point noise variance in standardized output units.
    pub noise_std: DVector<f64>,
    pub input_transform: InputTransform,
    pub output_transform: OutputTransform,
    pub jitter_used: f64,
    pub estimation: Estimation,
    pub diagnostics: FitDiagnostics,
    #[serde(skip)]
    cache: Option<Cache>,
}

impl std::fmt::Debug for KrigingModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KrigingModel")
            .field("n", &self.x_orig.nrows())
            .field("dim", &self.x_orig.ncols())
            .field("spec", &self.spec)
            .field("trend", &self.trend.name())
            .field("theta_hat", &self.theta_hat)
            .field("beta_hat", &self.beta_hat.as_slice())
            .field("sigma2_hat", &self.sigma2_hat)
            .finish()
    }
}

/// Generalized least-squares estimates of the trend coefficients and
/// process variance at fixed theta, via triangular solves.
pub fn gls_estimates(
    cm: &CorrelationMatrix,
    f: &DMatrix<f64>,
    y: &DVector<f64>,
) -> Result<(DVector<f64>, f64)> {
    let n = y.len();
    let kinv_y = cm.chol.solve(y);
    let kinv_f = cm.chol.solve(f);
    let m = f.transpose() * &kinv_f;
    let m_chol = Cholesky::new(m).ok_or_else(|| {
        Error::UnderDeterminedTrend("F^T R^-1 F is not positive definite".into())
    })?;
    let beta = m_chol.solve(&(f.transpose() * kinv_y));
    let resid = y - f * &beta;
    let sigma2 = (resid.dot(&cm.chol.solve(&resid)) / n as f64).max(0.0);
    Ok((beta, sigma2))
}

fn log_det(cm: &CorrelationMatrix) -> f64 {
    2.0 * cm.chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>()
}

/// Profiled negative log-likelihood objective.
///
/// Returns the full value 0.5 log det R + (n/2) log(2 pi sigma^2) + n/2
/// with the generalized least-squares estimates substituted. Factorization
/// or estimation failures return `f64::INFINITY` so optimizers can route
/// around infeasible theta.
pub fn neg_log_likelihood(
    spec: &CorrelationSpec,
    theta: &HyperParams,
    x_std: &DMatrix<f64>,
    y_std: &DVector<f64>,
    f: &DMatrix<f64>,
    noise_std: &[f64],
) -> f64 {
    let cm = match corr_matrix(spec, x_std, theta, noise_std) {
        Ok(cm) => cm,
        Err(_) => return f64::INFINITY,
    };
    let (_, sigma2) = match gls_estimates(&cm, f, y_std) {
        Ok(v) => v,
        Err(_) => return f64::INFINITY,
    };
    let n = y_std.len() as f64;
    let s2 = sigma2.max(SIGMA2_FLOOR);
    0.5 * log_det(&cm) + 0.5 * n * (2.0 * std::f64::consts::PI * s2).ln() + 0.5 * n
}

/// Leave-one-out cross-validation objective via the closed-form identity
/// e_i = (C y)_i / C_ii with C = K^-1 - K^-1 F (F^T K^-1 F)^-1 F^T K^-1.
///
/// Infeasible theta yields `Ok(f64::INFINITY)`; fewer than two samples is
/// an error.
pub fn loo_cv_objective(
    spec: &CorrelationSpec,
    theta: &HyperParams,
    x_std: &DMatrix<f64>,
    y_std: &DVector<f64>,
    f: &DMatrix<f64>,
    noise_std: &[f64],
) -> Result<f64> {
    let n = y_std.len();
    if n < 2 {
        return Err(Error::InsufficientData(
            "leave-one-out cross-validation needs at least 2 samples".into(),
        ));
    }
    let cm = match corr_matrix(spec, x_std, theta, noise_std) {
        Ok(cm) => cm,
        Err(_) => return Ok(f64::INFINITY),
    };
    // the inverse here is confined to the LOO identity (test-oracle checked);
    // prediction and estimation paths stay on triangular solves
    let kinv = cm.chol.inverse();
    let a = &kinv * f;
    let m = f.transpose() * &a;
    let m_chol = match Cholesky::new(m) {
        Some(c) => c,
        None => return Ok(f64::INFINITY),
    };
    let t = m_chol.solve(&a.transpose());
    let c = kinv - &a * t;
    let cy = &c * y_std;
    let mut obj = 0.0;
    for i in 0..n {
        let cii = c[(i, i)];
        if cii <= 1e-300 {
            return Ok(f64::INFINITY);
        }
        let e = cy[i] / cii;
        obj += e * e;
    }
    Ok(obj)
}

fn build_trend_matrix(
    trend: &TrendSpec,
    x_std: &DMatrix<f64>,
    x_orig: &DMatrix<f64>,
    out_tf: &OutputTransform,
) -> Result<DMatrix<f64>> {
    let im = build_information_matrix(trend, x_std, x_orig)?;
    let mut f = im.f;
    if matches!(trend, TrendSpec::ExternalPredictor(_)) {
        // external basis arrives in original output units
        f /= out_tf.scale;
    }
    Ok(f)
}

/// Fit a Kriging model by minimizing the selected objective over
/// log10(theta). Deterministic given the optimizer seed.
pub fn fit(
    data: &Dataset,
    spec: CorrelationSpec,
    trend: TrendSpec,
    estimation: Estimation,
    optimizer: &OptimizerSpec,
) -> Result<KrigingModel> {
    let n = data.n();
    if n == 0 {
        return Err(Error::EmptyDataset("cannot fit an empty dataset".into()));
    }
    if estimation == Estimation::Cv && n < 2 {
        return Err(Error::InsufficientData(
            "CV estimation needs at least 2 samples".into(),
        ));
    }
    trend.validate()?;
    if let TrendSpec::ExternalPredictor(lf) = &trend {
        if lf.dim() != data.dim() {
            return Err(Error::ShapeMismatch(format!(
                "lower-fidelity model dimension {} vs data dimension {}",
                lf.dim(),
                data.dim()
            )));
        }
    }

    let input_transform = InputTransform::fit(&data.x)?;
    let center = !matches!(trend, TrendSpec::ExternalPredictor(_));
    let output_transform = OutputTransform::fit(&data.y, center);
    let x_std = input_transform.apply(&data.x);
    let y_std = data.y.map(|v| output_transform.apply(v));
    let s2 = output_transform.scale * output_transform.scale;
    let noise_std = data.noise_var.map(|v| v / s2);
    let noise_slice: Vec<f64> = noise_std.iter().copied().collect();

    let f_mat = build_trend_matrix(&trend, &x_std, &data.x, &output_transform)?;

    let tdim = spec.theta_len(data.dim());
    let bounds = vec![LOG10_THETA_BOUNDS; tdim];
    let objective = |z: &[f64]| -> f64 {
        let theta = match HyperParams::new(z.iter().map(|v| 10f64.powf(*v)).collect()) {
            Ok(t) => t,
            Err(_) => return f64::INFINITY,
        };
        match estimation {
            Estimation::Mle => {
                neg_log_likelihood(&spec, &theta, &x_std, &y_std, &f_mat, &noise_slice)
            }
            Estimation::Cv => {
                loo_cv_objective(&spec, &theta, &x_std, &y_std, &f_mat, &noise_slice)
                    .unwrap_or(f64::INFINITY)
            }
        }
    };
    let result: OptimResult = minimize(objective, &bounds, optimizer).map_err(|e| match e {
        Error::AllInfeasible => Error::FitFailure(format!(
            "every candidate theta failed factorization for spec {:?}",
            spec
        )),
        other => other,
    })?;

    let theta_hat = HyperParams::new(result.x_best.iter().map(|v| 10f64.powf(*v)).collect())?;
    let cm = corr_matrix(&spec, &x_std, &theta_hat, &noise_slice)?;
    let (beta_hat, sigma2_hat) = gls_estimates(&cm, &f_mat, &y_std)?;
    let resid = &y_std - &f_mat * &beta_hat;
    let alpha = cm.chol.solve(&resid);
    let kinv_f = cm.chol.solve(&f_mat);
    let m = f_mat.transpose() * &kinv_f;
    let m_chol = Cholesky::new(m).ok_or_else(|| {
        Error::UnderDeterminedTrend("F^T R^-1 F is not positive definite".into())
    })?;

    Ok(KrigingModel {
        x_orig: data.x.clone(),
        y_orig: data.y.clone(),
        spec,
        trend,
        theta_hat,
        beta_hat,
        sigma2_hat,
        noise_std,
        input_transform,
        output_transform,
        jitter_used: cm.jitter_used,
        estimation,
        diagnostics: FitDiagnostics {
            objective_value: Some(result.f_best),
            evaluations: result.evaluations,
            converged: result.converged,
        },
        cache: Some(Cache {
            x_std,
            chol: cm.chol,
            alpha,
            kinv_f,
            m_chol,
        }),
    })
}

/// Fit at a fixed theta: GLS estimates only, no hyperparameter search.
pub fn fit_with_theta(
    data: &Dataset,
    spec: CorrelationSpec,
    trend: TrendSpec,
    theta: HyperParams,
) -> Result<KrigingModel> {
    if data.n() == 0 {
        return Err(Error::EmptyDataset("cannot fit an empty dataset".into()));
    }
    trend.validate()?;
    let input_transform = InputTransform::fit(&data.x)?;
    let center = !matches!(trend, TrendSpec::ExternalPredictor(_));
    let output_transform = OutputTransform::fit(&data.y, center);
    let x_std = input_transform.apply(&data.x);
    let y_std = data.y.map(|v| output_transform.apply(v));
    let s2 = output_transform.scale * output_transform.scale;
    let noise_std = data.noise_var.map(|v| v / s2);
    let noise_slice: Vec<f64> = noise_std.iter().copied().collect();
    let f_mat = build_trend_matrix(&trend, &x_std, &data.x, &output_transform)?;
    let cm = corr_matrix(&spec, &x_std, &theta, &noise_slice)?;
    let (beta_hat, sigma2_hat) = gls_estimates(&cm, &f_mat, &y_std)?;
    let resid = &y_std - &f_mat * &beta_hat;
    let alpha = cm.chol.solve(&resid);
    let kinv_f = cm.chol.solve(&f_mat);
    let m = f_mat.transpose() * &kinv_f;
    let m_chol = Cholesky::new(m).ok_or_else(|| {
        Error::UnderDeterminedTrend("F^T R^-1 F is not positive definite".into())
    })?;
    Ok(KrigingModel {
        x_orig: data.x.clone(),
        y_orig: data.y.clone(),
        spec,
        trend,
        theta_hat: theta,
        beta_hat,
        sigma2_hat,
        noise_std,
        input_transform,
        output_transform,
        jitter_used: cm.jitter_used,
        estimation: Estimation::Mle,
        diagnostics: FitDiagnostics {
            objective_value: None,
            evaluations: 0,
            converged: true,
        },
        cache: Some(Cache {
            x_std,
            chol: cm.chol,
            alpha,
            kinv_f,
            m_chol,
        }),
    })
}

impl KrigingModel {
    pub fn n(&self) -> usize {
        self.x_orig.nrows()
    }

    pub fn dim(&self) -> usize {
        self.x_orig.ncols()
    }

    fn cache(&self) -> Result<&Cache> {
        self.cache.as_ref().ok_or_else(|| {
            Error::FitFailure("model cache missing; call rebuild() after deserialization".into())
        })
    }

    /// Recompute the factorization caches from the stored parameters.
    /// Required once after deserialization; bit-deterministic.
    pub fn rebuild(&mut self) -> Result<()> {
        if let TrendSpec::ExternalPredictor(inner) = &mut self.trend {
            inner.rebuild()?;
        }
        let x_std = self.input_transform.apply(&self.x_orig);
        let y_std = self.y_orig.map(|v| self.output_transform.apply(v));
        let noise_slice: Vec<f64> = self.noise_std.iter().copied().collect();
        let f_mat = build_trend_matrix(&self.trend, &x_std, &self.x_orig, &self.output_transform)?;
        let cm = corr_matrix(&self.spec, &x_std, &self.theta_hat, &noise_slice)?;
        let resid = &y_std - &f_mat * &self.beta_hat;
        let alpha = cm.chol.solve(&resid);
        let kinv_f = cm.chol.solve(&f_mat);
        let m = f_mat.transpose() * &kinv_f;
        let m_chol = Cholesky::new(m).ok_or_else(|| {
            Error::UnderDeterminedTrend("F^T R^-1 F is not positive definite".into())
        })?;
        self.jitter_used = cm.jitter_used;
        self.cache = Some(Cache {
            x_std,
            chol: cm.chol,
            alpha,
            kinv_f,
            m_chol,
        });
        Ok(())
    }

    /// Posterior mean and variance at a point in original units.
    pub fn predict(&self, x_star: &[f64]) -> Result<Prediction> {
        if x_star.len() != self.dim() {
            return Err(Error::ShapeMismatch(format!(
                "query dimension {} vs model dimension {}",
                x_star.len(),
                self.dim()
            )));
        }
        let cache = self.cache()?;
        let xs = self.input_transform.apply_point(x_star);
        let mut f = eval_basis_raw(&self.trend, &xs, x_star)?;
        if matches!(self.trend, TrendSpec::ExternalPredictor(_)) {
            for v in &mut f {
                *v /= self.output_transform.scale;
            }
        }
        let f = DVector::from_vec(f);
        let r = DVector::from_vec(cross_corr_vector(
            &self.spec,
            &cache.x_std,
            &xs,
            &self.theta_hat,
        )?);

        let mean_std = f.dot(&self.beta_hat) + r.dot(&cache.alpha);
        let kinv_r = cache.chol.solve(&r);
        let rkr = r.dot(&kinv_r);
        let u = cache.kinv_f.transpose() * &r - &f;
        let t = cache.m_chol.solve(&u);
        let var_std = self.sigma2_hat * (1.0 - rkr + u.dot(&t));
        let clamp = (-var_std).max(0.0);
        Ok(Prediction {
            mean: self.output_transform.invert_mean(mean_std),
            variance: self.output_transform.invert_var(var_std.max(0.0)),
            clamp: self.output_transform.invert_var(clamp),
        })
    }

    /// Point-wise prediction over many rows.
    pub fn predict_batch(&self, xs: &DMatrix<f64>) -> Result<Vec<Prediction>> {
        if xs.ncols() != self.dim() {
            return Err(Error::ShapeMismatch(format!(
                "query dimension {} vs model dimension {}",
                xs.ncols(),
                self.dim()
            )));
        }
        (0..xs.nrows())
            .map(|i| {
                let row: Vec<f64> = xs.row(i).iter().copied().collect();
                self.predict(&row)
            })
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut model: KrigingModel = serde_json::from_str(text)?;
        model.rebuild()?;
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{CorrelationFamily, CorrelationStructure};
    use crate::optimize::Method;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn gauss_spec() -> CorrelationSpec {
        CorrelationSpec::new(
            CorrelationFamily::Gaussian,
            CorrelationStructure::Separable,
            true,
        )
    }

    fn hp(v: &[f64]) -> HyperParams {
        HyperParams::new(v.to_vec()).unwrap()
    }

    /// Identity correlation matrix via the linear kernel on well-separated points.
    fn identity_cm(n: usize) -> (CorrelationMatrix, DMatrix<f64>) {
        let spec = CorrelationSpec::new(
            CorrelationFamily::Linear,
            CorrelationStructure::Separable,
            true,
        );
        let x = DMatrix::from_fn(n, 1, |i, _| 10.0 * i as f64);
        let cm = corr_matrix(&spec, &x, &hp(&[1.0]), &vec![0.0; n]).unwrap();
        (cm, x)
    }

    #[test]
    fn gls_reduces_to_ols_for_identity_correlation() {
        let n = 6;
        let (cm, _) = identity_cm(n);
        let f = DMatrix::from_element(n, 1, 1.0);
        let y = DVector::from_vec(vec![0.5, -1.0, 2.0, 3.5, 0.0, 1.0]);
        let (beta, sigma2) = gls_estimates(&cm, &f, &y).unwrap();
        let mean = y.sum() / n as f64;
        assert_relative_eq!(beta[0], mean, max_relative = 1e-12);
        let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        assert_relative_eq!(sigma2, var, max_relative = 1e-12);
    }

    #[test]
    fn gls_two_point_hand_computation() {
        let (cm, _) = identity_cm(2);
        let f = DMatrix::from_element(2, 1, 1.0);
        let y = DVector::from_vec(vec![0.0, 2.0]);
        let (beta, sigma2) = gls_estimates(&cm, &f, &y).unwrap();
        assert_relative_eq!(beta[0], 1.0, max_relative = 1e-13);
        assert_relative_eq!(sigma2, 1.0, max_relative = 1e-13);
    }

    #[test]
    fn gls_exact_linear_data_gives_zero_variance() {
        let spec = gauss_spec();
        let x = DMatrix::from_row_slice(4, 1, &[0.0, 0.3, 0.7, 1.0]);
        let cm = corr_matrix(&spec, &x, &hp(&[0.5]), &[0.0; 4]).unwrap();
        let mut f = DMatrix::zeros(4, 2);
        for i in 0..4 {
            f[(i, 0)] = 1.0;
            f[(i, 1)] = x[(i, 0)];
        }
        let c = DVector::from_vec(vec![2.0, -3.0]);
        let y = &f * &c;
        let (beta, sigma2) = gls_estimates(&cm, &f, &y).unwrap();
        assert_relative_eq!(beta[0], 2.0, epsilon = 1e-8);
        assert_relative_eq!(beta[1], -3.0, epsilon = 1e-8);
        assert!(sigma2.abs() < 1e-12);
    }

    /// Dense multivariate-normal negative log-density oracle.
    fn mvn_neg_log_density(y: &DVector<f64>, mean: &DVector<f64>, cov: &DMatrix<f64>) -> f64 {
        let n = y.len() as f64;
        let inv = cov.clone().try_inverse().unwrap();
        let det = cov.determinant();
        let d = y - mean;
        0.5 * det.ln() + 0.5 * (d.transpose() * inv * &d)[(0, 0)]
            + 0.5 * n * (2.0 * std::f64::consts::PI).ln()
    }

    #[test]
    fn likelihood_matches_dense_mvn_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let n = rng.gen_range(3..=10);
            let x = DMatrix::from_fn(n, 1, |_, _| rng.gen_range(0.0..1.0));
            let y = DVector::from_fn(n, |_, _| rng.gen_range(-2.0..2.0));
            let f = DMatrix::from_element(n, 1, 1.0);
            let theta = hp(&[rng.gen_range(0.2..2.0)]);
            let noise: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..0.1)).collect();
            let spec = gauss_spec();
            let val = neg_log_likelihood(&spec, &theta, &x, &y, &f, &noise);
            assert!(val.is_finite());

            let cm = corr_matrix(&spec, &x, &theta, &noise).unwrap();
            let (beta, sigma2) = gls_estimates(&cm, &f, &y).unwrap();
            let l = cm.chol.l();
            let mut k = &l * l.transpose();
            k *= sigma2;
            let mean = &f * beta;
            let oracle = mvn_neg_log_density(&y, &mean, &k);
            assert_relative_eq!(val, oracle, max_relative = 1e-8);
        }
    }

    #[test]
    fn likelihood_handles_single_constant_point() {
        let x = DMatrix::from_element(1, 1, 0.5);
        let y = DVector::from_element(1, 0.0);
        let f = DMatrix::from_element(1, 1, 1.0);
        let v = neg_log_likelihood(&gauss_spec(), &hp(&[1.0]), &x, &y, &f, &[0.0]);
        assert!(v.is_finite());
    }

    #[test]
    fn likelihood_shift_under_output_scaling() {
        // doubling y multiplies sigma2 by 4: objective moves by (n/2) log 4
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 6;
        let x = DMatrix::from_fn(n, 1, |i, _| i as f64 / (n - 1) as f64);
        let y = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        let y2 = y.map(|v| 2.0 * v);
        let f = DMatrix::from_element(n, 1, 1.0);
        let spec = gauss_spec();
        let noise = vec![0.0; n];
        let mut argmin1 = (f64::INFINITY, 0.0);
        let mut argmin2 = (f64::INFINITY, 0.0);
        for k in 0..50 {
            let t = 10f64.powf(-2.0 + 3.0 * k as f64 / 49.0);
            let v1 = neg_log_likelihood(&spec, &hp(&[t]), &x, &y, &f, &noise);
            let v2 = neg_log_likelihood(&spec, &hp(&[t]), &x, &y2, &f, &noise);
            assert_relative_eq!(v2 - v1, 0.5 * n as f64 * 4.0_f64.ln(), max_relative = 1e-6);
            if v1 < argmin1.0 {
                argmin1 = (v1, t);
            }
            if v2 < argmin2.0 {
                argmin2 = (v2, t);
            }
        }
        assert_eq!(argmin1.1, argmin2.1);
    }

    /// Literal n-refit LOO oracle: drop each point, refit GLS at the same
    /// theta, predict the held-out response.
    fn literal_loo(
        spec: &CorrelationSpec,
        theta: &HyperParams,
        x: &DMatrix<f64>,
        y: &DVector<f64>,
        f: &DMatrix<f64>,
        noise: &[f64],
    ) -> f64 {
        let n = y.len();
        let d = x.ncols();
        let p = f.ncols();
        let mut total = 0.0;
        for i in 0..n {
            let keep: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            let xi = DMatrix::from_fn(n - 1, d, |r, c| x[(keep[r], c)]);
            let yi = DVector::from_fn(n - 1, |r, _| y[keep[r]]);
            let fi = DMatrix::from_fn(n - 1, p, |r, c| f[(keep[r], c)]);
            let ni: Vec<f64> = keep.iter().map(|&j| noise[j]).collect();
            let cm = corr_matrix(spec, &xi, theta, &ni).unwrap();
            let (beta, _) = gls_estimates(&cm, &fi, &yi).unwrap();
            let star: Vec<f64> = x.row(i).iter().copied().collect();
            let r = DVector::from_vec(cross_corr_vector(spec, &xi, &star, theta).unwrap());
            let resid = &yi - &fi * &beta;
            let mean = f.row(i).transpose().dot(&beta) + r.dot(&cm.chol.solve(&resid));
            total += (y[i] - mean).powi(2);
        }
        total
    }

    #[test]
    fn loo_matches_literal_refits() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for trial in 0..10 {
            let n = rng.gen_range(4..=8);
            let x = DMatrix::from_fn(n, 1, |i, _| i as f64 / (n - 1) as f64 + rng.gen_range(0.0..0.05));
            let y = DVector::from_fn(n, |_, _| rng.gen_range(-2.0..2.0));
            let f = DMatrix::from_element(n, 1, 1.0);
            let theta = hp(&[rng.gen_range(0.3..1.5)]);
            let noise: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..0.1)).collect();
            let spec = gauss_spec();
            let fast = loo_cv_objective(&spec, &theta, &x, &y, &f, &noise).unwrap();
            let slow = literal_loo(&spec, &theta, &x, &y, &f, &noise);
            assert_relative_eq!(fast, slow, max_relative = 1e-6);
            let _ = trial;
        }
    }

    #[test]
    fn loo_constant_data_is_zero() {
        let x = DMatrix::from_row_slice(2, 1, &[0.2, 0.8]);
        let y = DVector::from_element(2, 3.7);
        let f = DMatrix::from_element(2, 1, 1.0);
        let v = loo_cv_objective(&gauss_spec(), &hp(&[1.0]), &x, &y, &f, &[0.0, 0.0]).unwrap();
        assert!(v.abs() < 1e-18, "v = {v}");
    }

    #[test]
    fn loo_duplicate_point_with_nugget_is_finite() {
        let x = DMatrix::from_row_slice(3, 1, &[0.5, 0.5, 1.0]);
        let y = DVector::from_vec(vec![1.0, 1.0, 2.0]);
        let f = DMatrix::from_element(3, 1, 1.0);
        let fast =
            loo_cv_objective(&gauss_spec(), &hp(&[1.0]), &x, &y, &f, &[0.05, 0.05, 0.05]).unwrap();
        assert!(fast.is_finite());
        let slow = literal_loo(&gauss_spec(), &hp(&[1.0]), &x, &y, &f, &[0.05, 0.05, 0.05]);
        assert_relative_eq!(fast, slow, max_relative = 1e-6);
    }

    #[test]
    fn loo_rejects_single_sample() {
        let x = DMatrix::from_element(1, 1, 0.0);
        let y = DVector::from_element(1, 0.0);
        let f = DMatrix::from_element(1, 1, 1.0);
        assert!(matches!(
            loo_cv_objective(&gauss_spec(), &hp(&[1.0]), &x, &y, &f, &[0.0]),
            Err(Error::InsufficientData(_))
        ));
    }

    fn forrester_hf_dataset() -> Dataset {
        crate::data::forrester_doe().hf
    }

    #[test]
    fn fit_interpolates_forrester_hf() {
        let data = forrester_hf_dataset();
        let model = fit(
            &data,
            gauss_spec(),
            TrendSpec::Ordinary,
            Estimation::Mle,
            &OptimizerSpec::new(Method::LocalGradient, 1),
        )
        .unwrap();
        let range = data.y.max() - data.y.min();
        for i in 0..data.n() {
            let p = model.predict(&data.row(i)).unwrap();
            assert!(
                (p.mean - data.y[i]).abs() <= 1e-6 * range,
                "point {i}: {} vs {}",
                p.mean,
                data.y[i]
            );
            assert!(p.variance <= 1e-8 * model.sigma2_hat * model.output_transform.scale.powi(2));
        }
    }

    #[test]
    fn fit_constant_data() {
        let data = Dataset::from_rows(
            vec![vec![0.0], vec![0.5], vec![1.0]],
            vec![4.0, 4.0, 4.0],
            None,
            vec!["x1".into()],
            "y".into(),
        )
        .unwrap();
        let model = fit(
            &data,
            gauss_spec(),
            TrendSpec::Ordinary,
            Estimation::Mle,
            &OptimizerSpec::new(Method::LocalGradient, 1),
        )
        .unwrap();
        let p = model.predict(&[0.33]).unwrap();
        assert_relative_eq!(p.mean, 4.0, epsilon = 1e-9);
        assert!(model.sigma2_hat < 1e-12);
    }

    #[test]
    fn mle_and_cv_both_fit() {
        let data = forrester_hf_dataset();
        for estimation in Estimation::ALL {
            let model = fit(
                &data,
                gauss_spec(),
                TrendSpec::Ordinary,
                estimation,
                &OptimizerSpec::new(Method::HybridDe, 7),
            )
            .unwrap();
            assert!(model.sigma2_hat >= 0.0);
        }
    }

    #[test]
    fn linear_kernel_far_query_returns_trend() {
        let spec = CorrelationSpec::new(
            CorrelationFamily::Linear,
            CorrelationStructure::Separable,
            true,
        );
        let data = Dataset::from_rows(
            vec![vec![0.0], vec![0.5], vec![1.0]],
            vec![1.0, 3.0, 2.0],
            None,
            vec!["x1".into()],
            "y".into(),
        )
        .unwrap();
        let model = fit_with_theta(&data, spec, TrendSpec::Ordinary, hp(&[0.3])).unwrap();
        let p = model.predict(&[50.0]).unwrap();
        // r = 0: mean reduces to the (de-standardized) trend coefficient
        let expected = model.output_transform.invert_mean(model.beta_hat[0]);
        assert_relative_eq!(p.mean, expected, max_relative = 1e-12);
        // variance = sigma2 [1 + (F' R^-1 F)^-1] >= sigma2, in original units
        let s2 = model.output_transform.invert_var(model.sigma2_hat);
        assert!(p.variance >= s2 * (1.0 - 1e-12));
    }

    #[test]
    fn translation_and_scale_equivariance_at_fixed_theta() {
        let data = Dataset::from_rows(
            vec![vec![0.0], vec![0.3], vec![0.6], vec![1.0]],
            vec![1.0, -0.5, 2.0, 0.7],
            None,
            vec!["x1".into()],
            "y".into(),
        )
        .unwrap();
        let theta = hp(&[0.8]);
        let base = fit_with_theta(&data, gauss_spec(), TrendSpec::Ordinary, theta.clone()).unwrap();

        let shifted = Dataset {
            y: data.y.map(|v| v + 13.25),
            ..data.clone()
        };
        let m_shift = fit_with_theta(&shifted, gauss_spec(), TrendSpec::Ordinary, theta.clone()).unwrap();
        let scaled = Dataset {
            y: data.y.map(|v| v * -2.5),
            ..data.clone()
        };
        let m_scale = fit_with_theta(&scaled, gauss_spec(), TrendSpec::Ordinary, theta).unwrap();

        for k in 0..=20 {
            let x = [k as f64 / 20.0];
            let p0 = base.predict(&x).unwrap();
            let ps = m_shift.predict(&x).unwrap();
            let pk = m_scale.predict(&x).unwrap();
            assert_relative_eq!(ps.mean, p0.mean + 13.25, max_relative = 1e-10, epsilon = 1e-10);
            assert_relative_eq!(ps.variance, p0.variance, max_relative = 1e-10, epsilon = 1e-12);
            assert_relative_eq!(pk.mean, -2.5 * p0.mean, max_relative = 1e-10, epsilon = 1e-10);
            assert_relative_eq!(pk.variance, 6.25 * p0.variance, max_relative = 1e-10, epsilon = 1e-12);
        }
    }

    #[test]
    fn batch_prediction_matches_pointwise() {
        let data = forrester_hf_dataset();
        let model = fit(
            &data,
            gauss_spec(),
            TrendSpec::Ordinary,
            Estimation::Mle,
            &OptimizerSpec::new(Method::LocalGradient, 2),
        )
        .unwrap();
        let grid = DMatrix::from_fn(25, 1, |i, _| i as f64 / 24.0);
        let batch = model.predict_batch(&grid).unwrap();
        for (i, b) in batch.iter().enumerate() {
            let p = model.predict(&[grid[(i, 0)]]).unwrap();
            assert_relative_eq!(b.mean, p.mean, max_relative = 1e-12);
            assert_relative_eq!(b.variance, p.variance, max_relative = 1e-12, epsilon = 1e-300);
        }
    }

    #[test]
    fn serialization_roundtrip_predicts_identically() {
        let data = forrester_hf_dataset();
        let model = fit(
            &data,
            gauss_spec(),
            TrendSpec::Ordinary,
            Estimation::Mle,
            &OptimizerSpec::new(Method::HybridGa, 11),
        )
        .unwrap();
        let text = model.to_json().unwrap();
        let reloaded = KrigingModel::from_json(&text).unwrap();
        for k in 0..=50 {
            let x = [k as f64 / 50.0];
            let a = model.predict(&x).unwrap();
            let b = reloaded.predict(&x).unwrap();
            assert_eq!(a.mean, b.mean);
            assert_eq!(a.variance, b.variance);
        }
    }

    #[test]
    fn predict_rejects_wrong_dimension() {
        let data = forrester_hf_dataset();
        let model = fit_with_theta(&data, gauss_spec(), TrendSpec::Ordinary, hp(&[1.0])).unwrap();
        assert!(model.predict(&[0.1, 0.2]).is_err());
    }
}
