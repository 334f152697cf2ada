//! Fitters, hypotheses and evaluation losses.

mod lda;
mod mean;
mod newton;
mod nn;
mod ridge;

pub use lda::{fit_lda, LdaFitter, MeanScaling};
pub use mean::MeanFitter;
pub use newton::{fit_m_estimator, minimize_empirical, MEstimatorFitter, NewtonReport, SmoothLoss, SolverConfig};
pub use nn::{NnFitter, NnReference};
pub use ridge::{fit_ridge, ridge_normal_equations_residual, RidgeFitter};

use nalgebra::DVector;

use crate::data::{Dataset, Observation};
use crate::error::{Error, Result};

/// Fitted model.
#[derive(Debug, Clone, PartialEq)]
pub enum Hypothesis {
    /// Linear predictor `x'theta` (regression) or linear score (classification).
    Linear(DVector<f64>),
    /// Scalar location estimate.
    Mean(f64),
    /// Two-class nearest-mean rule.
    MeanPair { class1: f64, class0: f64 },
    NearestNeighbor(NnReference),
}

impl Hypothesis {
    /// Class prediction for classifier hypotheses.
    pub fn predict_label(&self, features: &[f64]) -> Result<u8> {
        match self {
            Hypothesis::MeanPair { class1, class0 } => {
                let z = features[0];
                // Exact midpoint ties go to class 0.
                Ok(u8::from((z - class1).powi(2) - (z - class0).powi(2) < 0.0))
            }
            Hypothesis::NearestNeighbor(r) => Ok(r.predict(features)),
            Hypothesis::Linear(theta) => {
                let s: f64 = features.iter().zip(theta.iter()).map(|(x, t)| x * t).sum();
                Ok(u8::from(s > 0.0))
            }
            Hypothesis::Mean(_) => Err(Error::invalid("a mean hypothesis does not classify")),
        }
    }
}

/// Evaluation loss. Rescaled variants multiply by `sqrt(n)` for the full sample size `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossKind {
    Square,
    ZeroOne,
    RescaledSquare { n: usize },
    RescaledZeroOne { n: usize },
}

impl LossKind {
    pub fn name(&self) -> &'static str {
        match self {
            LossKind::Square => "square",
            LossKind::ZeroOne => "zero-one",
            LossKind::RescaledSquare { .. } => "rescaled-square",
            LossKind::RescaledZeroOne { .. } => "rescaled-zero-one",
        }
    }
}

pub fn evaluate_loss(kind: LossKind, h: &Hypothesis, obs: Observation<'_>) -> Result<f64> {
    match kind {
        LossKind::Square => square_loss(h, obs),
        LossKind::RescaledSquare { n } => Ok((n as f64).sqrt() * square_loss(h, obs)?),
        LossKind::ZeroOne => zero_one_loss(h, obs),
        LossKind::RescaledZeroOne { n } => Ok((n as f64).sqrt() * zero_one_loss(h, obs)?),
    }
}

fn square_loss(h: &Hypothesis, obs: Observation<'_>) -> Result<f64> {
    match h {
        Hypothesis::Linear(theta) => {
            let y = obs
                .real_response()
                .ok_or_else(|| Error::invalid("square loss on a linear model needs a real response"))?;
            let fit: f64 = obs.features.iter().zip(theta.iter()).map(|(x, t)| x * t).sum();
            Ok((y - fit).powi(2))
        }
        Hypothesis::Mean(theta) => Ok((obs.target() - theta).powi(2)),
        _ => Err(Error::invalid("square loss needs a linear or mean hypothesis")),
    }
}

fn zero_one_loss(h: &Hypothesis, obs: Observation<'_>) -> Result<f64> {
    let label = obs
        .label()
        .ok_or_else(|| Error::invalid("0-1 loss needs a class label"))?;
    if matches!(h, Hypothesis::Mean(_)) {
        return Err(Error::invalid("0-1 loss needs a classifier hypothesis"));
    }
    Ok(if h.predict_label(obs.features)? != label { 1.0 } else { 0.0 })
}

/// A learning procedure paired with the loss it is evaluated under.
pub trait Fitter: Sync {
    /// Fit on `data` restricted to `rows`.
    fn fit(&self, data: &Dataset, rows: &[usize]) -> Result<Hypothesis>;

    fn evaluation_loss(&self) -> LossKind;

    fn training_loss(&self) -> &'static str;

    fn loss(&self, h: &Hypothesis, obs: Observation<'_>) -> Result<f64> {
        evaluate_loss(self.evaluation_loss(), h, obs)
    }
}

impl<F: Fitter + ?Sized> Fitter for &F {
    fn fit(&self, data: &Dataset, rows: &[usize]) -> Result<Hypothesis> {
        (**self).fit(data, rows)
    }
    fn evaluation_loss(&self) -> LossKind {
        (**self).evaluation_loss()
    }
    fn training_loss(&self) -> &'static str {
        (**self).training_loss()
    }
    fn loss(&self, h: &Hypothesis, obs: Observation<'_>) -> Result<f64> {
        (**self).loss(h, obs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Response;

    #[test]
    fn square_loss_linear() {
        let h = Hypothesis::Linear(DVector::from_vec(vec![1.0, 0.0]));
        let obs = Observation::new(&[2.0, 5.0], Response::Real(3.0));
        assert_eq!(evaluate_loss(LossKind::Square, &h, obs).unwrap(), 1.0);
    }

    #[test]
    fn zero_one_correct_label() {
        let h = Hypothesis::MeanPair { class1: 1.0, class0: 5.0 };
        let obs = Observation::new(&[2.9], Response::Label(1));
        assert_eq!(evaluate_loss(LossKind::ZeroOne, &h, obs).unwrap(), 0.0);
        let obs = Observation::new(&[2.9], Response::Label(0));
        assert_eq!(evaluate_loss(LossKind::ZeroOne, &h, obs).unwrap(), 1.0);
    }

    #[test]
    fn rescaled_square() {
        let obs = Observation::new(&[1.0], Response::None);
        let v = evaluate_loss(LossKind::RescaledSquare { n: 4 }, &Hypothesis::Mean(0.0), obs).unwrap();
        assert_eq!(v, 2.0);
    }

    #[test]
    fn kind_mismatch_is_invalid() {
        let obs = Observation::new(&[1.0], Response::None);
        let pair = Hypothesis::MeanPair { class1: 0.0, class0: 1.0 };
        assert!(matches!(
            evaluate_loss(LossKind::Square, &pair, obs),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            evaluate_loss(LossKind::ZeroOne, &Hypothesis::Mean(0.0), obs),
            Err(Error::InvalidArgument(_))
        ));
        let lin = Hypothesis::Linear(DVector::from_vec(vec![1.0]));
        assert!(evaluate_loss(LossKind::Square, &lin, obs).is_err());
    }

    #[test]
    fn midpoint_tie_goes_to_class_zero() {
        let h = Hypothesis::MeanPair { class1: 1.0, class0: 5.0 };
        assert_eq!(h.predict_label(&[3.0]).unwrap(), 0);
        assert_eq!(h.predict_label(&[2.9]).unwrap(), 1);
    }
}
