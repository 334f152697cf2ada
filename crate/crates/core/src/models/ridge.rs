use nalgebra::{DMatrix, DVector};

use super::{Fitter, Hypothesis, LossKind};
use crate::data::{Dataset, Responses};
use crate::error::{Error, Result};

/// Ridge regression `argmin (1/m) sum (y - x'theta)^2 + lambda |theta|^2`.
#[derive(Debug, Clone, Copy)]
pub struct RidgeFitter {
    pub lambda: f64,
}

impl RidgeFitter {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::invalid(format!("ridge penalty must be finite and >= 0, got {lambda}")));
        }
        Ok(Self { lambda })
    }
}

/// Design matrix and response for a subset of rows.
pub(crate) fn design(data: &Dataset, rows: &[usize]) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let y = match data.responses() {
        Responses::Real(y) => y,
        _ => return Err(Error::invalid("ridge needs real responses")),
    };
    let d = data.dim();
    let z = DMatrix::from_fn(rows.len(), d, |r, c| data.feature_row(rows[r])[c]);
    let yv = DVector::from_iterator(rows.len(), rows.iter().map(|&i| y[i]));
    Ok((z, yv))
}

/// Closed-form ridge solution through a Cholesky solve.
pub fn fit_ridge(z: &DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> Result<Hypothesis> {
    let m = z.nrows();
    if m == 0 || y.len() != m {
        return Err(Error::invalid(format!("design has {m} rows but response has {}", y.len())));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!("ridge penalty must be finite and >= 0, got {lambda}")));
    }
    let mf = m as f64;
    let mut a = z.tr_mul(z) / mf;
    for j in 0..a.nrows() {
        a[(j, j)] += lambda;
    }
    let b = z.tr_mul(y) / mf;
    let chol = a
        .cholesky()
        .ok_or_else(|| Error::NumericalFailure("ridge normal equations are not positive definite".into()))?;
    // Round-off can let a singular Gram matrix through; reject ill-conditioned factors.
    let diag = chol.l_dirty().diagonal();
    let (lo, hi) = diag.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !(lo > 0.0) || (lo / hi).powi(2) < 1e-14 {
        return Err(Error::NumericalFailure("ridge normal equations are numerically singular".into()));
    }
    let theta = chol.solve(&b);
    if theta.iter().any(|t| !t.is_finite()) {
        return Err(Error::NumericalFailure("ridge solve produced non-finite coefficients".into()));
    }
    Ok(Hypothesis::Linear(theta))
}

/// Max-abs residual of `((1/m)Z'Z + lambda I) theta - (1/m)Z'y`.
pub fn ridge_normal_equations_residual(z: &DMatrix<f64>, y: &DVector<f64>, lambda: f64, theta: &DVector<f64>) -> f64 {
    let mf = z.nrows() as f64;
    let r = (z.tr_mul(z) / mf) * theta + theta * lambda - z.tr_mul(y) / mf;
    r.amax()
}

impl Fitter for RidgeFitter {
    fn fit(&self, data: &Dataset, rows: &[usize]) -> Result<Hypothesis> {
        let (z, y) = design(data, rows)?;
        fit_ridge(&z, &y, self.lambda)
    }

    fn evaluation_loss(&self) -> LossKind {
        LossKind::Square
    }

    fn training_loss(&self) -> &'static str {
        "ridge"
    }
}
