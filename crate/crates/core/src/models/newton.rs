use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{Fitter, Hypothesis, LossKind};
use crate::data::{Dataset, Observation};
use crate::error::{Error, Result};

/// Newton solver settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub armijo: f64,
    pub backtrack_factor: f64,
    pub max_backtracks: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            gradient_tolerance: 1e-10,
            armijo: 1e-4,
            backtrack_factor: 0.5,
            max_backtracks: 60,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations < 1 {
            return Err(Error::invalid("max_iterations must be at least 1"));
        }
        if !(self.gradient_tolerance > 0.0) {
            return Err(Error::invalid("gradient_tolerance must be positive"));
        }
        if !(self.armijo > 0.0 && self.armijo < 1.0) || !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return Err(Error::invalid("line-search constants must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Smooth, strictly convex per-observation training losses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SmoothLoss {
    /// `(t - theta)^2` on the scalar target `t`.
    SquaredDeviation,
    /// `(y - x'theta)^2`.
    LeastSquares,
    /// `(y - x'theta)^2 + lambda |theta|^2`.
    Ridge { lambda: f64 },
    /// `log(1 + exp(x'theta)) - y x'theta` for labels in {0, 1}.
    Logistic,
}

impl SmoothLoss {
    pub fn dim(&self, data: &Dataset) -> usize {
        match self {
            SmoothLoss::SquaredDeviation => 1,
            _ => data.dim(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SmoothLoss::SquaredDeviation => "squared-deviation",
            SmoothLoss::LeastSquares => "least-squares",
            SmoothLoss::Ridge { .. } => "ridge",
            SmoothLoss::Logistic => "logistic",
        }
    }

    fn response(&self, obs: &Observation<'_>) -> Result<f64> {
        match self {
            SmoothLoss::SquaredDeviation => Ok(obs.target()),
            SmoothLoss::LeastSquares | SmoothLoss::Ridge { .. } => obs
                .real_response()
                .ok_or_else(|| Error::invalid("least-squares losses need a real response")),
            SmoothLoss::Logistic => obs
                .label()
                .map(f64::from)
                .ok_or_else(|| Error::invalid("logistic loss needs class labels")),
        }
    }

    fn score(&self, obs: &Observation<'_>, theta: &DVector<f64>) -> f64 {
        match self {
            SmoothLoss::SquaredDeviation => theta[0],
            _ => obs.features.iter().zip(theta.iter()).map(|(x, t)| x * t).sum(),
        }
    }

    fn features<'a>(&self, obs: &Observation<'a>) -> &'a [f64] {
        match self {
            SmoothLoss::SquaredDeviation => &[1.0],
            _ => obs.features,
        }
    }

    fn penalty(&self) -> f64 {
        match self {
            SmoothLoss::Ridge { lambda } => *lambda,
            _ => 0.0,
        }
    }

    /// Loss value with first and second derivatives in the score.
    fn score_derivatives(&self, y: f64, s: f64) -> (f64, f64, f64) {
        match self {
            SmoothLoss::Logistic => {
                // log(1+e^s) computed without overflow
                let softplus = if s > 0.0 { s + (-s).exp().ln_1p() } else { s.exp().ln_1p() };
                let p = 1.0 / (1.0 + (-s).exp());
                (softplus - y * s, p - y, p * (1.0 - p))
            }
            _ => {
                let r = y - s;
                (r * r, -2.0 * r, 2.0)
            }
        }
    }

    /// Per-observation loss.
    pub fn value(&self, obs: Observation<'_>, theta: &DVector<f64>) -> Result<f64> {
        let y = self.response(&obs)?;
        let (v, _, _) = self.score_derivatives(y, self.score(&obs, theta));
        Ok(v + self.penalty() * theta.norm_squared())
    }
}

impl SmoothLoss {
    /// Gradient in `theta` of the per-observation loss.
    pub fn gradient(&self, obs: Observation<'_>, theta: &DVector<f64>) -> Result<DVector<f64>> {
        let y = self.response(&obs)?;
        let (_, g, _) = self.score_derivatives(y, self.score(&obs, theta));
        let x = self.features(&obs);
        Ok(DVector::from_iterator(theta.len(), x.iter().map(|xa| g * xa)) + theta * (2.0 * self.penalty()))
    }

    /// Hessian in `theta` of the per-observation loss.
    pub fn hessian(&self, obs: Observation<'_>, theta: &DVector<f64>) -> Result<DMatrix<f64>> {
        let y = self.response(&obs)?;
        let (_, _, h) = self.score_derivatives(y, self.score(&obs, theta));
        let x = DVector::from_column_slice(self.features(&obs));
        let d = theta.len();
        Ok(&x * x.transpose() * h + DMatrix::identity(d, d) * (2.0 * self.penalty()))
    }
}

/// Outcome of a Newton run.
#[derive(Debug, Clone)]
pub struct NewtonReport {
    pub theta: DVector<f64>,
    pub iterations: usize,
    pub gradient_norm: f64,
    /// Empirical objective at the start and after each accepted step.
    pub objective_trace: Vec<f64>,
}

struct Local {
    value: f64,
    gradient: DVector<f64>,
    hessian: DMatrix<f64>,
}

fn evaluate(psi: &SmoothLoss, data: &Dataset, rows: &[usize], theta: &DVector<f64>, second: bool) -> Result<Local> {
    let d = theta.len();
    let m = rows.len() as f64;
    let mut value = 0.0;
    let mut gradient = DVector::zeros(d);
    let mut hessian = DMatrix::zeros(if second { d } else { 0 }, if second { d } else { 0 });
    for &i in rows {
        let obs = data.row(i);
        let y = psi.response(&obs)?;
        let x = psi.features(&obs);
        let (v, g, h) = psi.score_derivatives(y, psi.score(&obs, theta));
        value += v;
        for a in 0..d {
            gradient[a] += g * x[a];
        }
        if second {
            for a in 0..d {
                for b in 0..d {
                    hessian[(a, b)] += h * x[a] * x[b];
                }
            }
        }
    }
    let lam = psi.penalty();
    value = value / m + lam * theta.norm_squared();
    gradient = gradient / m + theta * (2.0 * lam);
    if second {
        hessian /= m;
        for a in 0..d {
            hessian[(a, a)] += 2.0 * lam;
        }
    }
    if !value.is_finite() {
        return Err(Error::NumericalFailure("empirical objective is not finite".into()));
    }
    Ok(Local { value, gradient, hessian })
}

/// Damped Newton minimisation of `(1/m) sum psi(X_i, theta)` over `rows`.
pub fn minimize_empirical(psi: &SmoothLoss, data: &Dataset, rows: &[usize], cfg: &SolverConfig) -> Result<NewtonReport> {
    cfg.validate()?;
    if rows.is_empty() {
        return Err(Error::invalid("empty training set"));
    }
    let d = psi.dim(data);
    let mut theta = DVector::zeros(d);
    let mut cur = evaluate(psi, data, rows, &theta, true)?;
    let mut trace = vec![cur.value];
    for it in 0..cfg.max_iterations {
        let gnorm = cur.gradient.norm();
        if gnorm <= cfg.gradient_tolerance {
            return Ok(NewtonReport { theta, iterations: it, gradient_norm: gnorm, objective_trace: trace });
        }
        let step = match cur.hessian.clone().cholesky() {
            Some(ch) => -ch.solve(&cur.gradient),
            None => -&cur.gradient,
        };
        let slope = cur.gradient.dot(&step);
        // Predicted decrease below the objective's resolution: nothing left to gain.
        if slope < 0.0 && -0.5 * slope <= f64::EPSILON * cur.value.abs().max(1.0) {
            return Ok(NewtonReport { theta, iterations: it, gradient_norm: gnorm, objective_trace: trace });
        }
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..=cfg.max_backtracks {
            let cand = &theta + &step * t;
            let trial = evaluate(psi, data, rows, &cand, false);
            if let Ok(trial) = trial {
                if trial.value <= cur.value + cfg.armijo * t * slope {
                    accepted = Some(cand);
                    break;
                }
            }
            t *= cfg.backtrack_factor;
        }
        let Some(next) = accepted else {
            // No step length gave sufficient decrease.
            return Err(Error::SolverFailure {
                iterations: it,
                residual: gnorm,
                last_iterate: theta.iter().copied().collect(),
            });
        };
        theta = next;
        cur = evaluate(psi, data, rows, &theta, true)?;
        trace.push(cur.value);
    }
    let gnorm = cur.gradient.norm();
    if gnorm <= cfg.gradient_tolerance {
        return Ok(NewtonReport { theta, iterations: cfg.max_iterations, gradient_norm: gnorm, objective_trace: trace });
    }
    Err(Error::SolverFailure {
        iterations: cfg.max_iterations,
        residual: gnorm,
        last_iterate: theta.iter().copied().collect(),
    })
}

/// M-estimator fitted by Newton's method.
pub fn fit_m_estimator(psi: &SmoothLoss, data: &Dataset, rows: &[usize], cfg: &SolverConfig) -> Result<Hypothesis> {
    let rep = minimize_empirical(psi, data, rows, cfg)?;
    Ok(match psi {
        SmoothLoss::SquaredDeviation => Hypothesis::Mean(rep.theta[0]),
        _ => Hypothesis::Linear(rep.theta),
    })
}

#[derive(Debug, Clone, Copy)]
pub struct MEstimatorFitter {
    pub psi: SmoothLoss,
    pub loss: LossKind,
    pub solver: SolverConfig,
}

impl MEstimatorFitter {
    pub fn new(psi: SmoothLoss, loss: LossKind) -> Self {
        Self { psi, loss, solver: SolverConfig::default() }
    }
}

impl Fitter for MEstimatorFitter {
    fn fit(&self, data: &Dataset, rows: &[usize]) -> Result<Hypothesis> {
        fit_m_estimator(&self.psi, data, rows, &self.solver)
    }

    fn evaluation_loss(&self) -> LossKind {
        self.loss
    }

    fn training_loss(&self) -> &'static str {
        self.psi.name()
    }
}
