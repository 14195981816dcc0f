//! Trend basis functions and the information matrix F.
//!
//! Ordinary Kriging uses the single constant basis; universal Kriging uses
//! all monomials of total degree up to kappa in graded-lexicographic order;
//! Hierarchical Kriging uses the mean predictor of a lower-fidelity model
//! as its single basis function.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::KrigingModel;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum TrendSpec {
    Ordinary,
    /// Total-degree polynomial basis, degree 1..=4.
    Polynomial(u8),
    /// Mean predictor of a fitted lower-fidelity model, evaluated in
    /// original input/output units. Basis count is 1.
    ExternalPredictor(Box<KrigingModel>),
}

impl TrendSpec {
    pub fn validate(&self) -> Result<()> {
        if let TrendSpec::Polynomial(k) = self {
            if !(1..=4).contains(k) {
                return Err(Error::InvalidInput(format!(
                    "polynomial trend degree {k} out of range 1..=4"
                )));
            }
        }
        Ok(())
    }

    /// Number of basis functions for input dimension `d`.
    pub fn basis_count(&self, d: usize) -> usize {
        match self {
            TrendSpec::Ordinary => 1,
            TrendSpec::Polynomial(k) => binomial(d + *k as usize, *k as usize),
            TrendSpec::ExternalPredictor(_) => 1,
        }
    }

    pub fn name(&self) -> String {
        match self {
            TrendSpec::Ordinary => "Ordinary".into(),
            TrendSpec::Polynomial(k) => format!("Polynomial{k}"),
            TrendSpec::ExternalPredictor(_) => "ExternalPredictor".into(),
        }
    }
}

fn binomial(n: usize, k: usize) -> usize {
    let k = k.min(n - k);
    let mut r = 1usize;
    for i in 0..k {
        r = r * (n - i) / (i + 1);
    }
    r
}

/// Exponent vectors of all monomials with total degree <= kappa, in graded
/// order (degree ascending) and, within a degree, lexicographic order with
/// the first dimension most significant and descending exponents.
///
/// d = 2, kappa = 2 enumerates: (0,0), (1,0), (0,1), (2,0), (1,1), (0,2).
pub fn monomial_exponents(d: usize, kappa: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for degree in 0..=kappa {
        let mut stack = vec![(Vec::new(), degree)];
        while let Some((prefix, remaining)) = stack.pop() {
            if prefix.len() == d - 1 {
                let mut e = prefix;
                e.push(remaining);
                out.push(e);
                continue;
            }
            // descending exponent for the current dimension, via reversed push
            for e0 in 0..=remaining {
                let mut p = prefix.clone();
                p.push(e0);
                stack.push((p, remaining - e0));
            }
        }
    }
    out
}

/// Evaluate the raw basis vector at a point.
///
/// Polynomial bases are evaluated on the standardized coordinates `x_std`;
/// the external predictor is evaluated on the original-unit coordinates
/// `x_orig` and returns the lower-fidelity mean in original output units.
pub fn eval_basis_raw(spec: &TrendSpec, x_std: &[f64], x_orig: &[f64]) -> Result<Vec<f64>> {
    spec.validate()?;
    match spec {
        TrendSpec::Ordinary => Ok(vec![1.0]),
        TrendSpec::Polynomial(k) => {
            let d = x_std.len();
            let mut out = Vec::with_capacity(spec.basis_count(d));
            for exps in monomial_exponents(d, *k as usize) {
                let mut v = 1.0;
                for (q, &e) in exps.iter().enumerate() {
                    v *= x_std[q].powi(e as i32);
                }
                out.push(v);
            }
            Ok(out)
        }
        TrendSpec::ExternalPredictor(model) => {
            if x_orig.len() != model.dim() {
                return Err(Error::ShapeMismatch(format!(
                    "point dimension {} vs lower-fidelity model dimension {}",
                    x_orig.len(),
                    model.dim()
                )));
            }
            Ok(vec![model.predict(x_orig)?.mean])
        }
    }
}

/// Basis evaluations at every design point, with a full-column-rank check.
pub struct InformationMatrix {
    pub f: DMatrix<f64>,
    pub p: usize,
}

/// Build F row-by-row and verify it has full column rank.
///
/// `x_std` and `x_orig` hold the same points in standardized and original
/// coordinates respectively.
pub fn build_information_matrix(
    spec: &TrendSpec,
    x_std: &DMatrix<f64>,
    x_orig: &DMatrix<f64>,
) -> Result<InformationMatrix> {
    spec.validate()?;
    let n = x_std.nrows();
    let d = x_std.ncols();
    let p = spec.basis_count(d);
    if n < p {
        return Err(Error::UnderDeterminedTrend(format!(
            "{n} design points cannot support {p} basis functions"
        )));
    }
    let mut f = DMatrix::zeros(n, p);
    for i in 0..n {
        let xs: Vec<f64> = x_std.row(i).iter().copied().collect();
        let xo: Vec<f64> = x_orig.row(i).iter().copied().collect();
        let row = eval_basis_raw(spec, &xs, &xo)?;
        for j in 0..p {
            f[(i, j)] = row[j];
        }
    }
    let qr = f.clone().col_piv_qr();
    let diag = qr.r().diagonal();
    let dmax = diag.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let rank = diag.iter().filter(|v| v.abs() > 1e-10 * dmax.max(1e-300)).count();
    if rank < p {
        return Err(Error::UnderDeterminedTrend(format!(
            "information matrix is rank deficient ({rank} < {p})"
        )));
    }
    Ok(InformationMatrix { f, p })
}
