//! Stationary correlation functions and correlation-matrix assembly.
//!
//! Five one-dimensional correlation families (Gaussian, exponential,
//! Matern-3/2, Matern-5/2, linear) are combined into multivariate kernels
//! either as a per-coordinate product (separable) or through a scaled
//! radial distance (ellipsoidal). Correlation lengths are expressed in
//! standardized input units.

use nalgebra::{Cholesky, DMatrix, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One-dimensional correlation family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CorrelationFamily {
    Gaussian,
    Exponential,
    Matern32,
    Matern52,
    Linear,
}

impl CorrelationFamily {
    pub const ALL: [CorrelationFamily; 5] = [
        CorrelationFamily::Gaussian,
        CorrelationFamily::Exponential,
        CorrelationFamily::Matern32,
        CorrelationFamily::Matern52,
        CorrelationFamily::Linear,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            CorrelationFamily::Gaussian => "Gaussian",
            CorrelationFamily::Exponential => "Exponential",
            CorrelationFamily::Matern32 => "Matern32",
            CorrelationFamily::Matern52 => "Matern52",
            CorrelationFamily::Linear => "Linear",
        }
    }
}

/// How one-dimensional correlations combine across input dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CorrelationStructure {
    /// Product of per-coordinate correlations.
    Separable,
    /// Radial correlation at the anisotropically scaled Euclidean distance.
    Ellipsoidal,
}

impl CorrelationStructure {
    pub const ALL: [CorrelationStructure; 2] =
        [CorrelationStructure::Separable, CorrelationStructure::Ellipsoidal];

    pub fn name(&self) -> &'static str {
        match self {
            CorrelationStructure::Separable => "Separable",
            CorrelationStructure::Ellipsoidal => "Ellipsoidal",
        }
    }
}

/// Full identification of a correlation kernel R(.,.|theta).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CorrelationSpec {
    pub family: CorrelationFamily,
    pub structure: CorrelationStructure,
    pub isotropic: bool,
}

impl CorrelationSpec {
    pub fn new(
        family: CorrelationFamily,
        structure: CorrelationStructure,
        isotropic: bool,
    ) -> Self {
        CorrelationSpec {
            family,
            structure,
            isotropic,
        }
    }

    /// Number of correlation lengths expected for an input dimension `d`.
    pub fn theta_len(&self, d: usize) -> usize {
        if self.isotropic {
            1
        } else {
            d
        }
    }
}

/// Positive correlation lengths, length 1 (isotropic) or d (anisotropic).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    theta: Vec<f64>,
}

impl HyperParams {
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        if theta.is_empty() {
            return Err(Error::InvalidHyperParameter(
                "theta must have at least one component".into(),
            ));
        }
        for (q, &t) in theta.iter().enumerate() {
            if !t.is_finite() || t <= 0.0 {
                return Err(Error::InvalidHyperParameter(format!(
                    "theta[{q}] = {t} must be finite and strictly positive"
                )));
            }
        }
        Ok(HyperParams { theta })
    }

    pub fn values(&self) -> &[f64] {
        &self.theta
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    /// Correlation length for coordinate `q`, honoring isotropy.
    pub fn component(&self, q: usize) -> f64 {
        if self.theta.len() == 1 {
            self.theta[0]
        } else {
            self.theta[q]
        }
    }
}

fn corr1d_unchecked(family: CorrelationFamily, h: f64, theta_q: f64) -> f64 {
    let a = h.abs() / theta_q;
    match family {
        CorrelationFamily::Gaussian => (-a * a).exp(),
        CorrelationFamily::Exponential => (-a).exp(),
        CorrelationFamily::Matern32 => {
            let s = 3.0_f64.sqrt() * a;
            (1.0 + s) * (-s).exp()
        }
        CorrelationFamily::Matern52 => {
            let s = 5.0_f64.sqrt() * a;
            (1.0 + s + 5.0 * a * a / 3.0) * (-s).exp()
        }
        CorrelationFamily::Linear => (1.0 - a).max(0.0),
    }
}

/// One-dimensional correlation at distance `h` with correlation length `theta_q`.
pub fn corr1d(family: CorrelationFamily, h: f64, theta_q: f64) -> Result<f64> {
    if !theta_q.is_finite() || theta_q <= 0.0 {
        return Err(Error::InvalidHyperParameter(format!(
            "theta_q = {theta_q} must be finite and strictly positive"
        )));
    }
    if !h.is_finite() {
        return Err(Error::InvalidInput(format!("distance h = {h} is not finite")));
    }
    Ok(corr1d_unchecked(family, h, theta_q))
}

fn check_theta(spec: &CorrelationSpec, d: usize, theta: &HyperParams) -> Result<()> {
    let expect = spec.theta_len(d);
    if theta.len() != expect {
        return Err(Error::InvalidHyperParameter(format!(
            "theta has {} components, spec requires {} for dimension {}",
            theta.len(),
            expect,
            d
        )));
    }
    Ok(())
}

fn corr_unchecked(spec: &CorrelationSpec, x: &[f64], x_prime: &[f64], theta: &HyperParams) -> f64 {
    match spec.structure {
        CorrelationStructure::Separable => {
            let mut prod = 1.0;
            for q in 0..x.len() {
                prod *= corr1d_unchecked(spec.family, x[q] - x_prime[q], theta.component(q));
            }
            prod
        }
        CorrelationStructure::Ellipsoidal => {
            let mut s = 0.0;
            for q in 0..x.len() {
                let z = (x[q] - x_prime[q]) / theta.component(q);
                s += z * z;
            }
            // scaling already lives inside h, so the radial profile uses unit length
            corr1d_unchecked(spec.family, s.sqrt(), 1.0)
        }
    }
}

/// Multivariate correlation between two points.
pub fn corr(spec: &CorrelationSpec, x: &[f64], x_prime: &[f64], theta: &HyperParams) -> Result<f64> {
    if x.len() != x_prime.len() {
        return Err(Error::ShapeMismatch(format!(
            "points have dimensions {} and {}",
            x.len(),
            x_prime.len()
        )));
    }
    check_theta(spec, x.len(), theta)?;
    Ok(corr_unchecked(spec, x, x_prime, theta))
}

/// Correlation matrix with noise diagonal, factorized once.
pub struct CorrelationMatrix {
    /// Pure correlation matrix, unit diagonal, before noise.
    pub r: DMatrix<f64>,
    /// Cholesky factor of r + diag(noise) + jitter * I.
    pub chol: Cholesky<f64, Dyn>,
    /// Jitter actually added to the diagonal (absolute value).
    pub jitter_used: f64,
}

/// Build and factorize R + diag(noise_diag), escalating jitter on failure.
///
/// The jitter ladder starts at 1e-10 * mean(diagonal) and grows by factors
/// of 10 up to 1e-6 * mean(diagonal) before giving up.
pub fn corr_matrix(
    spec: &CorrelationSpec,
    x: &DMatrix<f64>,
    theta: &HyperParams,
    noise_diag: &[f64],
) -> Result<CorrelationMatrix> {
    let n = x.nrows();
    let d = x.ncols();
    if n == 0 {
        return Err(Error::EmptyDataset("design matrix has no rows".into()));
    }
    if noise_diag.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "noise_diag has length {}, expected {}",
            noise_diag.len(),
            n
        )));
    }
    check_theta(spec, d, theta)?;

    let rows: Vec<Vec<f64>> = (0..n).map(|i| x.row(i).iter().copied().collect()).collect();
    let mut r = DMatrix::zeros(n, n);
    for i in 0..n {
        r[(i, i)] = 1.0;
        for j in 0..i {
            let v = corr_unchecked(spec, &rows[i], &rows[j], theta);
            r[(i, j)] = v;
            r[(j, i)] = v;
        }
    }

    let mut a = r.clone();
    for i in 0..n {
        a[(i, i)] += noise_diag[i];
    }
    let mean_diag = a.diagonal().sum() / n as f64;

    let mut jitter_rel = 0.0_f64;
    loop {
        let jitter = jitter_rel * mean_diag;
        let mut m = a.clone();
        for i in 0..n {
            m[(i, i)] += jitter;
        }
        if let Some(chol) = Cholesky::new(m) {
            return Ok(CorrelationMatrix {
                r,
                chol,
                jitter_used: jitter,
            });
        }
        jitter_rel = if jitter_rel == 0.0 { 1e-10 } else { jitter_rel * 10.0 };
        if jitter_rel > 1e-6 {
            return Err(Error::NotPositiveDefinite {
                theta: theta.values().to_vec(),
                max_jitter: 1e-6 * mean_diag,
            });
        }
    }
}

/// Cross-correlation vector between a prediction point and the design.
pub fn cross_corr_vector(
    spec: &CorrelationSpec,
    x: &DMatrix<f64>,
    x_star: &[f64],
    theta: &HyperParams,
) -> Result<Vec<f64>> {
    let d = x.ncols();
    if x_star.len() != d {
        return Err(Error::ShapeMismatch(format!(
            "prediction point has dimension {}, design has {}",
            x_star.len(),
            d
        )));
    }
    check_theta(spec, d, theta)?;
    let mut r = Vec::with_capacity(x.nrows());
    let mut row = vec![0.0; d];
    for i in 0..x.nrows() {
        for q in 0..d {
            row[q] = x[(i, q)];
        }
        r.push(corr_unchecked(spec, x_star, &row, theta));
    }
    Ok(r)
}
