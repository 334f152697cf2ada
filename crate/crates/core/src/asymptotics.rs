//! Limiting variances of split and cross-validated risk for ridge regression,
//! univariate two-class LDA, and generic smooth M-estimators.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::data::{Dataset, Observation};
use crate::error::{Error, Result};
use crate::generators::{Density, Generator};
use crate::models::{minimize_empirical, LossKind, MeanScaling, SmoothLoss, SolverConfig};
use crate::quadrature::adaptive_simpson;
use crate::rng::SeedSpec;
use crate::stats::pairwise_sum;

/// `sigma1^2`, `sigma2^2`, `rho` and the two limiting variances built from them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsymptoticQuantities {
    pub sigma1_sq: f64,
    pub sigma2_sq: f64,
    pub rho: f64,
    /// `sigma1^2 + sigma2^2 + 2 rho`: limit of `n Var(cv risk)`.
    pub sigma_cv_sq: f64,
    /// `sigma1^2 + sigma2^2`: limit of `(n/K) Var(split risk)`.
    pub sigma_split_sq: f64,
}

impl AsymptoticQuantities {
    pub fn new(sigma1_sq: f64, sigma2_sq: f64, rho: f64) -> Self {
        let split = sigma1_sq + sigma2_sq;
        Self {
            sigma1_sq,
            sigma2_sq,
            rho,
            sigma_cv_sq: split + 2.0 * rho,
            sigma_split_sq: split,
        }
    }

    /// Limit of `n Var(split risk)` with `k` folds.
    pub fn split_variance(&self, k: usize) -> f64 {
        k as f64 * self.sigma_split_sq
    }

    pub fn speedup(&self, k: usize) -> Result<Speedup> {
        speedup_factor(k, self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Speedup {
    /// `K sigma_split^2 / sigma_cv^2`: ratio of the two limiting variances.
    pub variance_ratio: f64,
    /// Square root of the variance ratio: gain in convergence rate.
    pub rate_factor: f64,
}

pub fn speedup_factor(k: usize, q: &AsymptoticQuantities) -> Result<Speedup> {
    if k < 2 {
        return Err(Error::invalid("speed-up needs at least two folds"));
    }
    if !(q.sigma_split_sq > 0.0) {
        return Err(Error::invalid("sigma1^2 + sigma2^2 must be positive"));
    }
    if !(q.sigma_cv_sq > 0.0) {
        return Err(Error::DegenerateLimit(format!(
            "cross-validated risk has limiting variance {}; use the noiseless limit law",
            q.sigma_cv_sq
        )));
    }
    let ratio = q.split_variance(k) / q.sigma_cv_sq;
    Ok(Speedup {
        variance_ratio: ratio,
        rate_factor: ratio.sqrt(),
    })
}

/// Distribution of the regressors for the ridge limits.
#[derive(Debug, Clone)]
pub enum RidgeDesign<'a> {
    /// Centred Gaussian with the given covariance: everything in closed form.
    Gaussian,
    /// Draws of the regressor (one per row) used for the fourth-moment terms; the
    /// covariance argument is still taken as exact.
    Samples(&'a DMatrix<f64>),
}

/// Ridge limits together with the population objects they are built from.
#[derive(Debug, Clone)]
pub struct RidgeAsymptotics {
    pub quantities: AsymptoticQuantities,
    pub theta_star: DVector<f64>,
    pub delta: DVector<f64>,
    /// Gradient of the population risk at `theta_star`.
    pub g_r: DVector<f64>,
    /// Hessian of the population training objective.
    pub hessian: DMatrix<f64>,
    /// Covariance of the training-loss gradient at `theta_star`.
    pub sigma: DMatrix<f64>,
}

/// Limits for ridge regression with Gaussian noise `N(0, sigma_sq)`.
pub fn ridge_asymptotics(
    s_x: &DMatrix<f64>,
    sigma_sq: f64,
    theta_opt: &DVector<f64>,
    lambda: f64,
    design: RidgeDesign<'_>,
) -> Result<RidgeAsymptotics> {
    let d = theta_opt.len();
    if s_x.nrows() != d || s_x.ncols() != d {
        return Err(Error::invalid(format!("covariance must be {d}x{d}")));
    }
    if (s_x - s_x.transpose()).amax() > 1e-12 * s_x.amax().max(1.0) || s_x.clone().cholesky().is_none() {
        return Err(Error::invalid("covariance is not symmetric positive definite"));
    }
    if !(lambda >= 0.0) || !(sigma_sq >= 0.0) {
        return Err(Error::invalid("penalty and noise variance must be non-negative"));
    }
    let a_mat = s_x + DMatrix::identity(d, d) * lambda;
    let a_chol = a_mat.clone().cholesky().expect("SPD plus non-negative shift");
    let theta_star = a_chol.solve(&(s_x * theta_opt));
    let delta = &theta_star - theta_opt;
    let s_delta = s_x * &delta;
    let c = delta.dot(&s_delta);
    let a = c + sigma_sq;
    // v = H^{-1} G_R with G_R = 2 S delta and H = 2 (S + lambda I)
    let v = a_chol.solve(&s_delta);
    let (sigma1_sq, sigma, rho) = match design {
        RidgeDesign::Gaussian => {
            let sigma = (s_x * a + &s_delta * s_delta.transpose()) * 4.0;
            (2.0 * a * a, sigma, -4.0 * a * v.dot(&s_delta))
        }
        RidgeDesign::Samples(x) => {
            if x.ncols() != d || x.nrows() < 2 {
                return Err(Error::invalid("design samples must have d columns and at least two rows"));
            }
            let m = x.nrows() as f64;
            let w = x * &delta;
            let w4 = w.iter().map(|t| t.powi(4)).sum::<f64>() / m;
            // E[X X' w^2], then the covariance of the vector X X' delta.
            let mut m4 = DMatrix::zeros(d, d);
            for (r, wr) in w.iter().enumerate() {
                let xr = x.row(r).transpose();
                m4.ger(wr * wr, &xr, &xr, 1.0);
            }
            m4 /= m;
            let s_xxd = &m4 - &s_delta * s_delta.transpose();
            let sigma1_sq = 3.0 * sigma_sq * sigma_sq + 6.0 * sigma_sq * c + w4 - a * a;
            let sigma = (s_x * sigma_sq + &s_xxd) * 4.0;
            let rho = -2.0 * v.dot(&((&s_xxd + s_x * (2.0 * sigma_sq)) * &delta));
            (sigma1_sq, sigma, rho)
        }
    };
    let sigma2_sq = v.dot(&(&sigma * &v));
    Ok(RidgeAsymptotics {
        quantities: AsymptoticQuantities::new(sigma1_sq, sigma2_sq, rho),
        theta_star,
        g_r: s_delta * 2.0,
        hessian: a_mat * 2.0,
        delta,
        sigma,
    })
}

/// Population quantities of the univariate two-class LDA limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LdaAsymptotics {
    /// Midpoint of the two class means.
    pub mu: f64,
    /// Difference of the class densities at `mu` (larger-mean class first).
    pub delta: f64,
    /// Misclassification rate of the population rule.
    pub q: f64,
    pub sigma_sq: f64,
    pub rho: f64,
    pub sigma_cv_sq: f64,
}

impl LdaAsymptotics {
    /// Two-fold pair `(n Var split, n Var cv) = (2 sigma^2, sigma^2 + 2 rho)`.
    pub fn variance_pair(&self) -> (f64, f64) {
        (2.0 * self.sigma_sq, self.sigma_cv_sq)
    }

    pub fn speedup(&self) -> Result<f64> {
        if !(self.sigma_cv_sq > 0.0) {
            return Err(Error::DegenerateLimit(format!("limiting CV variance {}", self.sigma_cv_sq)));
        }
        let (s, c) = self.variance_pair();
        Ok(s / c)
    }
}

/// Quadrature controls for the truncated class moments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadratureConfig {
    pub tolerance: f64,
    /// Probability mass left outside the integration range on each side.
    pub tail: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self { tolerance: 1e-8, tail: 1e-12 }
    }
}

/// `int f(x) pdf(x) dx` over the part of the effective support below (or above) `cut`.
fn truncated_moment(density: &Density, f: impl Fn(f64) -> f64, cut: f64, below: bool, cfg: &QuadratureConfig) -> Result<f64> {
    let (lo, hi) = density.effective_support(cfg.tail);
    let (a, b) = if below { (lo, cut.min(hi)) } else { (cut.max(lo), hi) };
    if a >= b {
        return Ok(0.0);
    }
    adaptive_simpson(|x| f(x) * density.pdf(x), a, b, cfg.tolerance)
}

/// Limits for two-fold CV of the nearest-mean classifier under an equal mixture of
/// `f1` and `f2`. Classes are reordered so the first has the larger mean.
pub fn lda_asymptotics(f1: &Density, f2: &Density, scaling: MeanScaling, cfg: &QuadratureConfig) -> Result<LdaAsymptotics> {
    f1.validate()?;
    f2.validate()?;
    let (g1, g2) = if f1.mean() >= f2.mean() { (f1, f2) } else { (f2, f1) };
    let (m1, m2) = (g1.mean(), g2.mean());
    let mu = 0.5 * (m1 + m2);
    let delta = g1.pdf(mu) - g2.pdf(mu);
    let q = 0.5 * (g1.cdf(mu) - g2.cdf(mu) + 1.0);
    let base = delta * delta / 8.0 * (g1.variance() + g2.variance());
    let (sigma_sq, rho) = match scaling {
        MeanScaling::HalfSample => {
            let upper2 = truncated_moment(g2, |x| x, mu, false, cfg)?;
            let lower1 = truncated_moment(g1, |x| x, mu, true, cfg)?;
            (
                base + delta * delta / 16.0 * (m1 - m2).powi(2) + q * (1.0 - q),
                delta / 4.0 * (upper2 + lower1 - 2.0 * q * mu),
            )
        }
        MeanScaling::WithinClass => {
            let lower1 = truncated_moment(g1, |x| x - m1, mu, true, cfg)?;
            let upper2 = truncated_moment(g2, |x| x - m2, mu, false, cfg)?;
            (base + q * (1.0 - q), delta / 4.0 * (lower1 + upper2))
        }
    };
    Ok(LdaAsymptotics {
        mu,
        delta,
        q,
        sigma_sq,
        rho,
        sigma_cv_sq: sigma_sq + 2.0 * rho,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RhoMethod {
    ClosedForm,
    /// `draws` fresh observations for the covariance; population moments that have no
    /// closed form are estimated from a further `draws` observations on a separate stream.
    MonteCarlo { draws: usize, seed: SeedSpec },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RhoEstimate {
    pub rho: f64,
    pub std_error: Option<f64>,
}

/// Smooth surrogate whose gradient matches the evaluation loss, when there is one.
fn differentiable_eval(loss: LossKind, psi: &SmoothLoss) -> Result<SmoothLoss> {
    match (loss, psi) {
        (LossKind::Square, SmoothLoss::SquaredDeviation) => Ok(SmoothLoss::SquaredDeviation),
        (LossKind::Square, SmoothLoss::LeastSquares | SmoothLoss::Ridge { .. }) => Ok(SmoothLoss::LeastSquares),
        _ => Err(Error::Unsupported(format!(
            "evaluation loss {} is not differentiable for training loss {}",
            loss.name(),
            psi.name()
        ))),
    }
}

/// Exact `theta*` when the generator makes it available.
fn exact_theta_star(psi: &SmoothLoss, gen: &Generator) -> Option<DVector<f64>> {
    match (psi, gen) {
        (SmoothLoss::LeastSquares, Generator::GaussianLinear(g)) => Some(g.theta.clone()),
        (SmoothLoss::Ridge { lambda }, Generator::GaussianLinear(g)) => {
            let d = g.dim();
            let a = &g.covariance + DMatrix::identity(d, d) * *lambda;
            a.cholesky().map(|c| c.solve(&(&g.covariance * &g.theta)))
        }
        (SmoothLoss::SquaredDeviation, Generator::Univariate(dens)) => Some(DVector::from_element(1, dens.mean())),
        (SmoothLoss::SquaredDeviation, Generator::SymmetricBernoulli) => Some(DVector::zeros(1)),
        _ => None,
    }
}

/// `rho = -Cov(G_R' H^{-1} dPsi(X, theta*), L(X, theta*))`.
pub fn rho_parametric(psi: &SmoothLoss, loss: LossKind, gen: &Generator, method: RhoMethod) -> Result<RhoEstimate> {
    let eval = differentiable_eval(loss, psi)?;
    match method {
        // Training and evaluation losses coincide: G_R vanishes at the minimiser.
        RhoMethod::ClosedForm if *psi == eval => Ok(RhoEstimate { rho: 0.0, std_error: None }),
        RhoMethod::ClosedForm => match (psi, gen) {
            (SmoothLoss::Ridge { lambda }, Generator::GaussianLinear(g)) => {
                let r = ridge_asymptotics(&g.covariance, g.noise_variance, &g.theta, *lambda, RidgeDesign::Gaussian)?;
                Ok(RhoEstimate { rho: r.quantities.rho, std_error: None })
            }
            _ => Err(Error::Unsupported(format!(
                "no closed-form rho for training loss {} on this generator",
                psi.name()
            ))),
        },
        RhoMethod::MonteCarlo { draws, seed } => rho_monte_carlo(psi, &eval, gen, draws, seed),
    }
}

fn mean_over<T, F>(data: &Dataset, f: F, zero: T) -> Result<T>
where
    T: Send + Sync + std::ops::Add<Output = T> + std::ops::Div<f64, Output = T> + Clone,
    F: Fn(Observation<'_>) -> Result<T> + Sync,
{
    let n = data.n();
    let total = (0..n)
        .into_par_iter()
        .map(|i| f(data.row(i)))
        .try_reduce(|| zero.clone(), |a, b| Ok(a + b))?;
    Ok(total / n as f64)
}

fn rho_monte_carlo(psi: &SmoothLoss, eval: &SmoothLoss, gen: &Generator, draws: usize, seed: SeedSpec) -> Result<RhoEstimate> {
    if draws < 2 {
        return Err(Error::invalid("Monte Carlo rho needs at least two draws"));
    }
    let aux = gen.sample(draws, &mut seed.derive(1).rng())?;
    let all: Vec<usize> = (0..draws).collect();
    let theta = match exact_theta_star(psi, gen) {
        Some(t) => t,
        None => minimize_empirical(psi, &aux, &all, &SolverConfig::default())?.theta,
    };
    let d = theta.len();
    let hess = mean_over(&aux, |o| psi.hessian(o, &theta), DMatrix::zeros(d, d))?;
    let g_r = mean_over(&aux, |o| eval.gradient(o, &theta), DVector::zeros(d))?;
    let a = hess
        .cholesky()
        .ok_or_else(|| Error::NumericalFailure("population Hessian is not positive definite".into()))?
        .solve(&g_r);
    let main = gen.sample(draws, &mut seed.derive(2).rng())?;
    let pairs = (0..draws)
        .into_par_iter()
        .map(|i| {
            let o = main.row(i);
            Ok((a.dot(&psi.gradient(o, &theta)?), eval.value(o, &theta)?))
        })
        .collect::<Result<Vec<(f64, f64)>>>()?;
    let (u, l): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let m = draws as f64;
    let (ub, lb) = (pairwise_sum(&u) / m, pairwise_sum(&l) / m);
    let prods: Vec<f64> = u.iter().zip(&l).map(|(x, y)| (x - ub) * (y - lb)).collect();
    let cov = pairwise_sum(&prods) / (m - 1.0);
    let dev: Vec<f64> = prods.iter().map(|p| (p - cov).powi(2)).collect();
    let se = (pairwise_sum(&dev) / (m - 1.0) / m).sqrt();
    Ok(RhoEstimate { rho: -cov, std_error: Some(se) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::GeneratorSpec;

    fn toeplitz() -> (DMatrix<f64>, DVector<f64>) {
        let s = DMatrix::from_row_slice(3, 3, &[1.0, 0.5, 0.25, 0.5, 1.0, 0.5, 0.25, 0.5, 1.0]);
        (s, DVector::from_element(3, 1.0 / 3f64.sqrt()))
    }

    #[test]
    fn unpenalised_ridge_has_full_speedup() {
        let (s, th) = toeplitz();
        let r = ridge_asymptotics(&s, 1.5, &th, 0.0, RidgeDesign::Gaussian).unwrap();
        let q = r.quantities;
        assert!(q.rho.abs() < 1e-15 && q.sigma2_sq.abs() < 1e-15);
        assert!((q.sigma1_sq - 2.0 * 1.5f64.powi(2)).abs() < 1e-12);
        let sp = q.speedup(5).unwrap();
        assert!((sp.variance_ratio - 5.0).abs() < 1e-12);
        assert!((sp.rate_factor - 5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn zero_target_has_no_bias() {
        let (s, _) = toeplitz();
        let r = ridge_asymptotics(&s, 1.0, &DVector::zeros(3), 3.0, RidgeDesign::Gaussian).unwrap();
        assert_eq!(r.quantities.rho, 0.0);
        assert_eq!(r.quantities.sigma1_sq, 2.0);
    }

    #[test]
    fn gaussian_samples_reproduce_closed_form() {
        let (s, th) = toeplitz();
        let gen = GeneratorSpec::toeplitz_ridge_design().build().unwrap();
        let data = gen.sample(400_000, &mut SeedSpec::new(9, 0).rng()).unwrap();
        let x = DMatrix::from_row_slice(data.n(), 3, data.features());
        let exact = ridge_asymptotics(&s, 1.0, &th, 1.0, RidgeDesign::Gaussian).unwrap().quantities;
        let emp = ridge_asymptotics(&s, 1.0, &th, 1.0, RidgeDesign::Samples(&x)).unwrap().quantities;
        assert!((exact.rho - emp.rho).abs() < 0.02 * exact.rho.abs(), "{exact:?} {emp:?}");
        assert!((exact.sigma1_sq - emp.sigma1_sq).abs() < 0.02 * exact.sigma1_sq);
        assert!((exact.sigma2_sq - emp.sigma2_sq).abs() < 0.05 * exact.sigma2_sq);
    }

    #[test]
    fn ridge_rho_is_negative() {
        let (s, th) = toeplitz();
        for lam in [0.01, 0.3, 1.0, 10.0] {
            let q = ridge_asymptotics(&s, 1.0, &th, lam, RidgeDesign::Gaussian).unwrap().quantities;
            assert!(q.rho < 0.0);
            assert_eq!(q.sigma_cv_sq, q.sigma1_sq + q.sigma2_sq + 2.0 * q.rho);
        }
    }

    #[test]
    fn not_spd_rejected() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let err = ridge_asymptotics(&s, 1.0, &DVector::zeros(2), 1.0, RidgeDesign::Gaussian).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }

    #[test]
    fn speedup_edge_cases() {
        let q = AsymptoticQuantities::new(1.0, 1.0, 0.0);
        assert_eq!(q.speedup(3).unwrap().variance_ratio, 3.0);
        let q = AsymptoticQuantities::new(1.5, 0.5, 1.0);
        assert_eq!(q.speedup(4).unwrap().variance_ratio, 2.0);
        let q = AsymptoticQuantities::new(1.0, 1.0, -1.0);
        assert!(matches!(q.speedup(2), Err(Error::DegenerateLimit(_))));
    }

    #[test]
    fn gaussian_location_classes_have_no_rho() {
        let a = Density::gaussian(1.0, 1.0).unwrap();
        let b = Density::gaussian(-1.0, 1.0).unwrap();
        for s in [MeanScaling::HalfSample, MeanScaling::WithinClass] {
            let l = lda_asymptotics(&a, &b, s, &QuadratureConfig::default()).unwrap();
            assert!(l.delta.abs() < 1e-15);
            assert!(l.rho.abs() < 1e-15);
        }
    }

    #[test]
    fn lda_is_symmetric_in_class_order() {
        let a = Density::gamma(10.0, 0.15).unwrap();
        let b = Density::gamma(1.0, 1.0).unwrap();
        let cfg = QuadratureConfig::default();
        let x = lda_asymptotics(&a, &b, MeanScaling::HalfSample, &cfg).unwrap();
        let y = lda_asymptotics(&b, &a, MeanScaling::HalfSample, &cfg).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn quadrature_is_stable_under_tightening() {
        let a = Density::gamma(1.0, 10.0).unwrap();
        let b = Density::gamma(1.0, 1.0).unwrap();
        let loose = lda_asymptotics(&a, &b, MeanScaling::HalfSample, &QuadratureConfig::default()).unwrap();
        let tight = QuadratureConfig { tolerance: 1e-9, ..Default::default() };
        let tight = lda_asymptotics(&a, &b, MeanScaling::HalfSample, &tight).unwrap();
        assert!((loose.rho - tight.rho).abs() < 1e-6);
        assert!((loose.sigma_sq - tight.sigma_sq).abs() < 1e-6);
    }

    #[test]
    fn same_loss_gives_zero_rho() {
        let gen = GeneratorSpec::toeplitz_ridge_design().build().unwrap();
        let r = rho_parametric(&SmoothLoss::LeastSquares, LossKind::Square, &gen, RhoMethod::ClosedForm).unwrap();
        assert_eq!(r.rho, 0.0);
    }
}
