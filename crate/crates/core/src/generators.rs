//! Synthetic data-generating laws used by the experiments.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF};

use crate::data::{Dataset, Responses};
use crate::error::{Error, Result};
use crate::rng::SeedSpec;

/// A univariate continuous law with closed-form pdf, cdf and moments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Density {
    /// Shape/scale parameterisation: mean `shape * scale`.
    Gamma { shape: f64, scale: f64 },
    Gaussian { mean: f64, sd: f64 },
}

impl Density {
    pub fn gamma(shape: f64, scale: f64) -> Result<Self> {
        let d = Density::Gamma { shape, scale };
        d.validate()?;
        Ok(d)
    }

    pub fn gaussian(mean: f64, sd: f64) -> Result<Self> {
        let d = Density::Gaussian { mean, sd };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Density::Gamma { shape, scale } => {
                if !(shape > 0.0 && shape.is_finite() && scale > 0.0 && scale.is_finite()) {
                    return Err(Error::invalid(format!(
                        "Gamma(shape={shape}, scale={scale}) needs positive finite parameters"
                    )));
                }
            }
            Density::Gaussian { mean, sd } => {
                if !(mean.is_finite() && sd > 0.0 && sd.is_finite()) {
                    return Err(Error::invalid(format!(
                        "Gaussian(mean={mean}, sd={sd}) needs finite mean and positive sd"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Density::Gamma { shape, scale } => shape * scale,
            Density::Gaussian { mean, .. } => mean,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            Density::Gamma { shape, scale } => shape * scale * scale,
            Density::Gaussian { sd, .. } => sd * sd,
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match *self {
            Density::Gamma { shape, scale } => {
                if x < 0.0 {
                    0.0
                } else {
                    statrs_gamma(shape, scale).pdf(x)
                }
            }
            Density::Gaussian { mean, sd } => statrs_normal(mean, sd).pdf(x),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            Density::Gamma { shape, scale } => {
                if x <= 0.0 {
                    0.0
                } else {
                    statrs_gamma(shape, scale).cdf(x)
                }
            }
            Density::Gaussian { mean, sd } => crate::stats::normal_cdf((x - mean) / sd),
        }
    }

    pub fn quantile(&self, p: f64) -> f64 {
        match *self {
            Density::Gamma { shape, scale } => statrs_gamma(shape, scale).inverse_cdf(p),
            Density::Gaussian { mean, sd } => mean + sd * crate::stats::normal_quantile(p),
        }
    }

    /// Interval holding all but `tail` probability mass on each side.
    pub fn effective_support(&self, tail: f64) -> (f64, f64) {
        match self {
            Density::Gamma { .. } => (0.0, self.quantile(1.0 - tail)),
            Density::Gaussian { .. } => (self.quantile(tail), self.quantile(1.0 - tail)),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Density::Gamma { shape, scale } => rand_distr::Gamma::new(shape, scale)
                .expect("validated gamma parameters")
                .sample(rng),
            Density::Gaussian { mean, sd } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + sd * z
            }
        }
    }
}

fn statrs_gamma(shape: f64, scale: f64) -> statrs::distribution::Gamma {
    statrs::distribution::Gamma::new(shape, 1.0 / scale).expect("validated gamma parameters")
}

fn statrs_normal(mean: f64, sd: f64) -> statrs::distribution::Normal {
    statrs::distribution::Normal::new(mean, sd).expect("validated normal parameters")
}

/// Serializable description of a data-generating law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GeneratorSpec {
    /// `z ~ N(0, covariance)`, `y = z'theta + N(0, noise_variance)`.
    GaussianLinear {
        covariance: Vec<Vec<f64>>,
        theta: Vec<f64>,
        noise_variance: f64,
    },
    /// `y ~ Bernoulli(1/2)`, `z | y=1 ~ class1`, `z | y=0 ~ class0`.
    TwoClassMixture { class1: Density, class0: Density },
    /// `z ~ U[0,1]`, label `1{z <= threshold}`.
    UniformThreshold {
        #[serde(default = "half")]
        threshold: f64,
    },
    /// Values uniform on `{-1, +1}`.
    SymmetricBernoulli,
    /// I.i.d. draws from one density, no response.
    Univariate { density: Density },
}

fn half() -> f64 {
    0.5
}

impl GeneratorSpec {
    /// The data law of the simulation study: `p = 3`, Toeplitz covariance with first row
    /// `(1, 0.5, 0.25)`, `theta = (1,1,1)/sqrt(3)`, unit noise variance.
    pub fn toeplitz_ridge_design() -> Self {
        let r = [1.0, 0.5, 0.25];
        let covariance = (0..3)
            .map(|i: usize| (0..3usize).map(|j| r[i.abs_diff(j)]).collect())
            .collect();
        GeneratorSpec::GaussianLinear {
            covariance,
            theta: vec![1.0 / 3f64.sqrt(); 3],
            noise_variance: 1.0,
        }
    }

    pub fn build(&self) -> Result<Generator> {
        Generator::new(self.clone())
    }
}

#[derive(Debug, Clone)]
pub struct GaussianLinear {
    pub covariance: DMatrix<f64>,
    pub theta: DVector<f64>,
    pub noise_variance: f64,
    chol: DMatrix<f64>,
}

impl GaussianLinear {
    pub fn new(covariance: DMatrix<f64>, theta: DVector<f64>, noise_variance: f64) -> Result<Self> {
        let d = theta.len();
        if d == 0 || covariance.nrows() != d || covariance.ncols() != d {
            return Err(Error::invalid(format!(
                "covariance must be {d}x{d} to match theta"
            )));
        }
        if (&covariance - covariance.transpose()).amax() > 1e-12 * covariance.amax().max(1.0) {
            return Err(Error::invalid("covariance is not symmetric"));
        }
        if !(noise_variance >= 0.0 && noise_variance.is_finite()) {
            return Err(Error::invalid(format!(
                "noise variance {noise_variance} must be non-negative"
            )));
        }
        let chol = covariance
            .clone()
            .cholesky()
            .ok_or_else(|| Error::invalid("covariance is not positive definite"))?
            .l();
        Ok(Self {
            covariance,
            theta,
            noise_variance,
            chol,
        })
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    /// Expected square loss of a linear predictor.
    pub fn risk(&self, theta: &DVector<f64>) -> f64 {
        let delta = theta - &self.theta;
        (delta.transpose() * &self.covariance * &delta)[(0, 0)] + self.noise_variance
    }
}

/// A validated, ready-to-sample generator.
#[derive(Debug, Clone)]
pub enum Generator {
    GaussianLinear(GaussianLinear),
    TwoClassMixture { class1: Density, class0: Density },
    UniformThreshold { threshold: f64 },
    SymmetricBernoulli,
    Univariate(Density),
}

impl Generator {
    pub fn new(spec: GeneratorSpec) -> Result<Self> {
        Ok(match spec {
            GeneratorSpec::GaussianLinear {
                covariance,
                theta,
                noise_variance,
            } => {
                let d = theta.len();
                if covariance.len() != d || covariance.iter().any(|r| r.len() != d) {
                    return Err(Error::invalid(format!(
                        "covariance must be {d}x{d} to match theta"
                    )));
                }
                let cov = DMatrix::from_fn(d, d, |i, j| covariance[i][j]);
                Generator::GaussianLinear(GaussianLinear::new(
                    cov,
                    DVector::from_vec(theta),
                    noise_variance,
                )?)
            }
            GeneratorSpec::TwoClassMixture { class1, class0 } => {
                class1.validate()?;
                class0.validate()?;
                Generator::TwoClassMixture { class1, class0 }
            }
            GeneratorSpec::UniformThreshold { threshold } => {
                if !(0.0..=1.0).contains(&threshold) {
                    return Err(Error::invalid(format!("threshold {threshold} outside [0,1]")));
                }
                Generator::UniformThreshold { threshold }
            }
            GeneratorSpec::SymmetricBernoulli => Generator::SymmetricBernoulli,
            GeneratorSpec::Univariate { density } => {
                density.validate()?;
                Generator::Univariate(density)
            }
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            Generator::GaussianLinear(g) => g.dim(),
            _ => 1,
        }
    }

    /// Draw `n` i.i.d. rows from this law using `rng`.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Dataset> {
        match self {
            Generator::GaussianLinear(g) => {
                let d = g.dim();
                let mut features = Vec::with_capacity(n * d);
                let mut ys = Vec::with_capacity(n);
                let noise_sd = g.noise_variance.sqrt();
                let mut z = DVector::<f64>::zeros(d);
                for _ in 0..n {
                    for zi in z.iter_mut() {
                        *zi = StandardNormal.sample(rng);
                    }
                    let x = &g.chol * &z;
                    let eps: f64 = StandardNormal.sample(rng);
                    ys.push(x.dot(&g.theta) + noise_sd * eps);
                    features.extend(x.iter());
                }
                Dataset::regression(d, features, ys)
            }
            Generator::TwoClassMixture { class1, class0 } => {
                let mut features = Vec::with_capacity(n);
                let mut labels = Vec::with_capacity(n);
                for _ in 0..n {
                    let y = rng.random_bool(0.5);
                    features.push(if y { class1.sample(rng) } else { class0.sample(rng) });
                    labels.push(u8::from(y));
                }
                Dataset::classification(1, features, labels)
            }
            Generator::UniformThreshold { threshold } => {
                let features: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
                let labels = features.iter().map(|&z| u8::from(z <= *threshold)).collect();
                Dataset::classification(1, features, labels)
            }
            Generator::SymmetricBernoulli => {
                let values = (0..n)
                    .map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 })
                    .collect();
                Dataset::new(1, values, Responses::None)
            }
            Generator::Univariate(density) => {
                let values = (0..n).map(|_| density.sample(rng)).collect();
                Dataset::new(1, values, Responses::None)
            }
        }
    }
}

/// `n` rows from `gen`, bit-reproducible for a given seed.
pub fn sample_dataset(gen: &Generator, n: usize, seed: SeedSpec) -> Result<Dataset> {
    gen.sample(n, &mut seed.rng())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_gaussian_linear_is_exact() {
        let gen = Generator::GaussianLinear(
            GaussianLinear::new(
                DMatrix::identity(2, 2),
                DVector::from_vec(vec![0.5, -2.0]),
                0.0,
            )
            .unwrap(),
        );
        let d = sample_dataset(&gen, 5, SeedSpec::new(1, 0)).unwrap();
        for obs in d.rows() {
            let fit = 0.5 * obs.features[0] - 2.0 * obs.features[1];
            assert!((obs.target() - fit).abs() < 1e-14);
        }
    }

    #[test]
    fn bernoulli_mean_near_zero() {
        let n = 10_000;
        let d = sample_dataset(&Generator::SymmetricBernoulli, n, SeedSpec::new(2, 0)).unwrap();
        assert!(d.features().iter().all(|&v| v == 1.0 || v == -1.0));
        let mean = d.features().iter().sum::<f64>() / n as f64;
        assert!(mean.abs() < 4.0 / (n as f64).sqrt(), "{mean}");
    }

    #[test]
    fn gamma_mean() {
        let gen = Generator::Univariate(Density::gamma(1.0, 1.0).unwrap());
        let d = sample_dataset(&gen, 100_000, SeedSpec::new(3, 0)).unwrap();
        let mean = d.features().iter().sum::<f64>() / 1e5;
        assert!((mean - 1.0).abs() < 0.02, "{mean}");
    }

    #[test]
    fn rejects_invalid_parameters() {
        assert!(Density::gamma(0.0, 1.0).is_err());
        assert!(Density::gamma(1.0, -1.0).is_err());
        let spec = GeneratorSpec::GaussianLinear {
            covariance: vec![vec![1.0, 2.0], vec![2.0, 1.0]],
            theta: vec![0.0, 0.0],
            noise_variance: 1.0,
        };
        assert!(matches!(spec.build(), Err(Error::InvalidArgument(_))));
        let spec = GeneratorSpec::TwoClassMixture {
            class1: Density::Gamma { shape: -1.0, scale: 1.0 },
            class0: Density::Gamma { shape: 1.0, scale: 1.0 },
        };
        assert!(spec.build().is_err());
    }

    #[test]
    fn reproducible_across_calls() {
        let gen = GeneratorSpec::toeplitz_ridge_design().build().unwrap();
        let a = sample_dataset(&gen, 50, SeedSpec::new(9, 4)).unwrap();
        let b = sample_dataset(&gen, 50, SeedSpec::new(9, 4)).unwrap();
        assert_eq!(a, b);
        let c = sample_dataset(&gen, 50, SeedSpec::new(9, 5)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn uniform_threshold_labels() {
        let gen = Generator::UniformThreshold { threshold: 0.5 };
        let d = sample_dataset(&gen, 200, SeedSpec::new(4, 0)).unwrap();
        for obs in d.rows() {
            assert_eq!(obs.label(), Some(u8::from(obs.features[0] <= 0.5)));
        }
    }

    #[test]
    fn density_moments_match_cdf() {
        let g = Density::gamma(10.0, 0.15).unwrap();
        assert!((g.mean() - 1.5).abs() < 1e-12);
        assert!((g.cdf(g.quantile(0.3)) - 0.3).abs() < 1e-9);
        let n = Density::gaussian(1.0, 2.0).unwrap();
        assert!((n.cdf(1.0) - 0.5).abs() < 1e-15);
        assert!((n.quantile(0.975) - (1.0 + 2.0 * 1.959963984540054)).abs() < 1e-9);
    }
}
