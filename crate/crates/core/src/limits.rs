//! Non-Gaussian limit laws, their finite-sample simulators, and empirical distances.

use rand::Rng;
use rand_distr::{Distribution, Exp, Poisson};
use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::folds::make_partition;
use crate::generators::{sample_dataset, Generator};
use crate::models::{LossKind, MeanFitter, NnFitter};
use crate::risk::cv_risk;
use crate::rng::SeedSpec;
use crate::stats::{normal_cdf, normal_quantile};

/// Sorted, finite sample.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDistribution {
    samples: Vec<f64>,
}

impl EmpiricalDistribution {
    pub fn new(mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("empirical distribution needs at least one sample"));
        }
        if samples.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("empirical distribution samples must be finite"));
        }
        samples.sort_by(f64::total_cmp);
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn mean(&self) -> f64 {
        crate::stats::mean(&self.samples)
    }
}

/// Walk the merged support of two samples, yielding `(x, F_a(x), F_b(x))` at each
/// distinct point (CDFs taken right-continuous).
fn merged_cdfs(a: &[f64], b: &[f64], mut visit: impl FnMut(f64, f64, f64)) {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let x = match (a.get(i), b.get(j)) {
            (Some(&u), Some(&v)) => u.min(v),
            (Some(&u), None) => u,
            (None, Some(&v)) => v,
            (None, None) => unreachable!(),
        };
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        visit(x, i as f64 / na, j as f64 / nb);
    }
}

/// Sup-distance between two empirical CDFs.
pub fn ks_distance(a: &EmpiricalDistribution, b: &EmpiricalDistribution) -> f64 {
    let mut sup = 0.0f64;
    merged_cdfs(&a.samples, &b.samples, |_, fa, fb| sup = sup.max((fa - fb).abs()));
    sup
}

/// Exact Wasserstein-1 distance `int |F_a - F_b|` between two empirical laws.
/// Equal counts reduce to the mean absolute difference of sorted samples.
pub fn wasserstein1(a: &EmpiricalDistribution, b: &EmpiricalDistribution) -> f64 {
    if a.len() == b.len() {
        let s: f64 = a.samples.iter().zip(&b.samples).map(|(x, y)| (x - y).abs()).sum();
        return s / a.len() as f64;
    }
    let mut total = 0.0;
    let mut prev: Option<(f64, f64)> = None;
    merged_cdfs(&a.samples, &b.samples, |x, fa, fb| {
        if let Some((px, gap)) = prev {
            total += gap * (x - px);
        }
        prev = Some((x, (fa - fb).abs()));
    });
    total
}

/// `int_{u0}^{u1} Phi^{-1}(u) du`.
fn normal_quantile_integral(u0: f64, u1: f64) -> f64 {
    let phi = |u: f64| {
        if u <= 0.0 || u >= 1.0 {
            0.0
        } else {
            let z = normal_quantile(u);
            (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
        }
    };
    phi(u0) - phi(u1)
}

/// Sup-distance between an empirical CDF and a continuous CDF `cdf`.
pub fn ks_distance_to_cdf(a: &EmpiricalDistribution, cdf: impl Fn(f64) -> f64) -> f64 {
    let n = a.len() as f64;
    let s = &a.samples;
    let mut sup = 0.0f64;
    let mut i = 0;
    while i < s.len() {
        let x = s[i];
        let below = i as f64 / n;
        while i < s.len() && s[i] == x {
            i += 1;
        }
        let f = cdf(x);
        sup = sup.max((f - below).abs()).max((i as f64 / n - f).abs());
    }
    sup
}

/// CDF of `chi2_1 / 2`, i.e. `P(Y^2 / 2 <= x) = erf(sqrt(x))`.
pub fn half_chi2_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        libm::erf(x.sqrt())
    }
}

/// Wasserstein-1 distance from an empirical law to `N(mean, sd^2)`, via the quantile
/// representation integrated exactly on each step of the empirical quantile function.
pub fn wasserstein1_to_normal(a: &EmpiricalDistribution, mean: f64, sd: f64) -> Result<f64> {
    if !(sd > 0.0) {
        return Err(Error::invalid("normal reference needs a positive standard deviation"));
    }
    let m = a.len() as f64;
    let mut total = 0.0;
    for (k, &x) in a.samples.iter().enumerate() {
        let c = (x - mean) / sd;
        let (u0, u1) = (k as f64 / m, (k + 1) as f64 / m);
        let uc = normal_cdf(c).clamp(u0, u1);
        // |c - Q| = c - Q below uc, Q - c above.
        total += c * (uc - u0) - normal_quantile_integral(u0, uc) + normal_quantile_integral(uc, u1) - c * (u1 - uc);
    }
    Ok(total * sd)
}

fn poisson<R: Rng + ?Sized>(rate: f64, rng: &mut R) -> f64 {
    if rate > 0.0 {
        Poisson::new(rate).expect("positive finite rate").sample(rng)
    } else {
        0.0
    }
}

/// `1{r >= 0} (1 + Poisson(r))`.
fn boundary_term<R: Rng + ?Sized>(r: f64, rng: &mut R) -> f64 {
    if r >= 0.0 {
        1.0 + poisson(r, rng)
    } else {
        0.0
    }
}

fn sign<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    if rng.random_bool(0.5) {
        1.0
    } else {
        -1.0
    }
}

/// One draw from the limit law of `sqrt(n)` times the two-fold 1-NN CV risk with the
/// rescaled 0-1 loss, for uniform features and a threshold at 1/2.
///
/// `N1, N2` are the (rescaled) offsets of the two fold boundaries from 1/2 and
/// `U_A, U_B` the gaps to the nearest point on the far side; all are exponential with
/// mean 1/2. A fold's boundary cell is hit by the other fold when the offsets point the
/// same way and overlap, or when they point apart.
pub fn sample_nn_limit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let e = Exp::new(2.0).expect("rate 2");
    let (n1, n2, ua, ub): (f64, f64, f64, f64) = (e.sample(rng), e.sample(rng), e.sample(rng), e.sample(rng));
    let same = sign(rng) == sign(rng);
    let both = if same { 2.0 } else { 0.0 };
    let r1 = n1 - ub - both * n2;
    let r2 = n2 - ua - both * n1;
    boundary_term(r1, rng) + boundary_term(r2, rng)
}

/// The same limit written with rates `s1 N1 + s2 U2`, `s2 N2 + s1 U1` (and their
/// shifted versions on the equal-sign branch), `N ~ Exp(mean 1/2)`, `U ~ Exp(mean 1)`.
/// Kept for comparison; [`sample_nn_limit`] is the law the simulation converges to.
pub fn sample_nn_limit_as_displayed<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let en = Exp::new(2.0).expect("rate 2");
    let eu = Exp::new(1.0).expect("rate 1");
    let (n1, n2): (f64, f64) = (en.sample(rng), en.sample(rng));
    let (u1, u2): (f64, f64) = (eu.sample(rng), eu.sample(rng));
    let (s1, s2) = (sign(rng), sign(rng));
    let rd1 = s1 * n1 + s2 * u2;
    let rd2 = s2 * n2 + s1 * u1;
    if s1 * s2 < 0.0 {
        boundary_term(rd1, rng) + boundary_term(rd2, rng)
    } else {
        boundary_term(rd1 - 2.0 * s2 * n2, rng) + boundary_term(rd2 - 2.0 * s1 * n1, rng)
    }
}

/// Limit of the first-fold error count: `Poisson(N1)`, `N1 ~ Exp(mean 1/2)`.
pub fn sample_nn_split_count_limit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let n1: f64 = Exp::new(2.0).expect("rate 2").sample(rng);
    poisson(n1, rng)
}

/// Finite-sample two-fold 1-NN statistics on `n` uniform points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NnCvDraw {
    /// `sqrt(n)` times the CV risk: the total number of held-out errors.
    pub sqrt_n_cv: f64,
    /// `sqrt(n)` times the split risk: twice the first-fold error count.
    pub sqrt_n_split: f64,
    /// Errors on the first fold.
    pub split_errors: f64,
}

pub fn simulate_nn_cv(n: usize, seed: SeedSpec) -> Result<NnCvDraw> {
    if n < 4 || n % 2 != 0 {
        return Err(Error::invalid(format!("1-NN simulation needs even n >= 4, got {n}")));
    }
    let gen = Generator::UniformThreshold { threshold: 0.5 };
    let data = sample_dataset(&gen, n, seed)?;
    nn_cv_statistics(&data)
}

/// Two-fold rescaled-loss 1-NN statistics for a labelled one-dimensional dataset.
pub fn nn_cv_statistics(data: &Dataset) -> Result<NnCvDraw> {
    let n = data.n();
    let p = make_partition(n, 2)?;
    let rep = cv_risk(data, &p, &NnFitter::new(LossKind::RescaledZeroOne { n }))?;
    let rt = (n as f64).sqrt();
    // Each loss is sqrt(n) * indicator, so both statistics are integers up to rounding.
    let cv = (rt * rep.cv_risk).round();
    let split = (rt * rep.split_risk).round();
    let first: f64 = rep.per_fold_losses[0].iter().filter(|&&l| l > 0.0).count() as f64;
    Ok(NnCvDraw { sqrt_n_cv: cv, sqrt_n_split: split, split_errors: first })
}

/// `(1/4K) sum_i (Y_i - mean_{j != i} Y_j)^2` for standard normal `Y`.
pub fn sample_noiseless_limit<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Result<f64> {
    let y = normals(k, rng)?;
    let total: f64 = y.iter().sum();
    let kf = k as f64;
    let s: f64 = y.iter().map(|&yi| (yi - (total - yi) / (kf - 1.0)).powi(2)).sum();
    Ok(s / (4.0 * kf))
}

/// `sum_i (Ybar_{-i}^2 - 2 Y_i Ybar_{-i})` for standard normal `Y`: the exact limit of
/// `n (R_cv - 1)` for the mean of symmetric +-1 data, obtained by expanding the fold
/// losses around the fold sums.
pub fn sample_noiseless_limit_expanded<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Result<f64> {
    let y = normals(k, rng)?;
    let total: f64 = y.iter().sum();
    let kf = k as f64;
    Ok(y
        .iter()
        .map(|&yi| {
            let rest = (total - yi) / (kf - 1.0);
            rest * rest - 2.0 * yi * rest
        })
        .sum())
}

fn normals<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Result<Vec<f64>> {
    if k < 2 {
        return Err(Error::invalid("noiseless limit needs at least two folds"));
    }
    Ok((0..k).map(|_| rng.sample(rand_distr::StandardNormal)).collect())
}

/// `n (R_cv - 1)` for the sample mean under square loss on symmetric +-1 data.
pub fn simulate_noiseless_cv(n: usize, k: usize, seed: SeedSpec) -> Result<f64> {
    if k < 2 || n < 2 * k {
        return Err(Error::invalid(format!("noiseless simulation needs K >= 2 and n >= 2K, got n={n}, K={k}")));
    }
    let data = sample_dataset(&Generator::SymmetricBernoulli, n, seed)?;
    noiseless_statistic(&data, k)
}

pub fn noiseless_statistic(data: &Dataset, k: usize) -> Result<f64> {
    let n = data.n();
    let rep = cv_risk(data, &make_partition(n, k)?, &MeanFitter::new(LossKind::Square))?;
    Ok(n as f64 * (rep.cv_risk - 1.0))
}

/// Independent draws of a sampler, one child stream per draw, in parallel.
pub fn draw_many<F>(count: usize, seed: SeedSpec, f: F) -> Result<Vec<f64>>
where
    F: Fn(SeedSpec) -> Result<f64> + Sync,
{
    (0..count).into_par_iter().map(|i| f(seed.derive(i as u64))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ed(v: &[f64]) -> EmpiricalDistribution {
        EmpiricalDistribution::new(v.to_vec()).unwrap()
    }

    #[test]
    fn ks_examples() {
        assert_eq!(ks_distance(&ed(&[1.0, 2.0]), &ed(&[2.0, 1.0])), 0.0);
        assert_eq!(ks_distance(&ed(&[0.0, 1.0]), &ed(&[5.0, 6.0, 7.0])), 1.0);
        assert_eq!(ks_distance(&ed(&[0.0, 1.0]), &ed(&[0.5])), 0.5);
    }

    #[test]
    fn ks_to_cdf_examples() {
        let uniform = |x: f64| x.clamp(0.0, 1.0);
        assert!((ks_distance_to_cdf(&ed(&[0.5]), uniform) - 0.5).abs() < 1e-15);
        assert!((ks_distance_to_cdf(&ed(&[0.25, 0.75]), uniform) - 0.25).abs() < 1e-15);
        assert!((ks_distance_to_cdf(&ed(&[2.0, 2.0]), uniform) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn half_chi2_cdf_matches_normal() {
        for &x in &[0.01, 0.3, 1.0, 2.5] {
            let via_normal = 2.0 * normal_cdf((2.0f64 * x).sqrt()) - 1.0;
            assert!((half_chi2_cdf(x) - via_normal).abs() < 1e-14);
        }
        assert_eq!(half_chi2_cdf(-1.0), 0.0);
    }

    #[test]
    fn w1_examples() {
        assert_eq!(wasserstein1(&ed(&[0.0, 2.0]), &ed(&[1.0, 1.0])), 1.0);
        assert!((wasserstein1(&ed(&[0.0, 1.0, 3.0]), &ed(&[2.5, 3.5, 5.5])) - 2.5).abs() < 1e-15);
        assert_eq!(wasserstein1(&ed(&[0.0, 1.0]), &ed(&[0.5])), 0.5);
        // {0, 1} against the doubled sample {0, 0, 1, 1} is the same law.
        assert_eq!(wasserstein1(&ed(&[0.0, 1.0]), &ed(&[0.0, 0.0, 1.0, 1.0, 0.0, 1.0])), 0.0);
    }

    #[test]
    fn empty_rejected() {
        assert!(EmpiricalDistribution::new(vec![]).is_err());
        assert!(EmpiricalDistribution::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn w1_to_normal_of_normal_quantiles_is_small() {
        let m = 2000;
        let v: Vec<f64> = (0..m).map(|k| normal_quantile((k as f64 + 0.5) / m as f64)).collect();
        let d = wasserstein1_to_normal(&ed(&v), 0.0, 1.0).unwrap();
        assert!(d < 2e-3, "{d}");
        let shifted: Vec<f64> = v.iter().map(|x| x + 0.3).collect();
        let d = wasserstein1_to_normal(&ed(&shifted), 0.0, 1.0).unwrap();
        assert!((d - 0.3).abs() < 2e-3);
    }

    #[test]
    fn nn_limit_is_a_count() {
        let mut rng = SeedSpec::new(1, 0).rng();
        for _ in 0..2000 {
            for x in [sample_nn_limit(&mut rng), sample_nn_limit_as_displayed(&mut rng)] {
                assert!(x >= 0.0 && x.fract() == 0.0);
            }
        }
    }

    #[test]
    fn negative_rates_give_zero() {
        let mut rng = SeedSpec::new(2, 0).rng();
        assert_eq!(boundary_term(-0.1, &mut rng) + boundary_term(-3.0, &mut rng), 0.0);
        assert_eq!(boundary_term(0.0, &mut rng), 1.0);
    }

    #[test]
    fn noiseless_all_ones() {
        let d = Dataset::scalar(vec![1.0; 8]).unwrap();
        assert_eq!(noiseless_statistic(&d, 2).unwrap(), -8.0);
    }

    #[test]
    fn noiseless_alternating_hand_value() {
        // Folds {+1,-1} and {+1,-1}: both fold means are 0, every loss is 1.
        let d = Dataset::scalar(vec![1.0, -1.0, 1.0, -1.0]).unwrap();
        assert_eq!(noiseless_statistic(&d, 2).unwrap(), 0.0);
        // Folds {+1,+1} and {-1,-1}: means -1 and +1, losses 4 each.
        let d = Dataset::scalar(vec![1.0, 1.0, -1.0, -1.0]).unwrap();
        assert_eq!(noiseless_statistic(&d, 2).unwrap(), 12.0);
    }

    #[test]
    fn displayed_noiseless_law_is_half_chi_square_for_two_folds() {
        let mut a = SeedSpec::new(3, 0).rng();
        let mut b = SeedSpec::new(3, 0).rng();
        for _ in 0..100 {
            let v = sample_noiseless_limit(2, &mut a).unwrap();
            let y1: f64 = b.sample(rand_distr::StandardNormal);
            let y2: f64 = b.sample(rand_distr::StandardNormal);
            assert!((v - (y1 - y2).powi(2) / 4.0).abs() < 1e-14);
        }
    }

    #[test]
    fn nn_statistics_on_a_hand_instance() {
        // fold A = {0.1, 0.45, 0.55, 0.9}, fold B = {0.2, 0.52, 0.7, 0.3}
        // B's boundary pair is 0.3 | 0.52, cut 0.41: A's 0.45 is labelled 1 but predicted 0.
        // A's boundary pair is 0.45 | 0.55, cut 0.5: no B point falls between 0.5 and 0.5.
        let z = vec![0.1, 0.45, 0.55, 0.9, 0.2, 0.52, 0.7, 0.3];
        let labels = z.iter().map(|&v| u8::from(v <= 0.5)).collect();
        let d = Dataset::classification(1, z, labels).unwrap();
        let s = nn_cv_statistics(&d).unwrap();
        assert_eq!(s.sqrt_n_cv, 1.0);
        assert_eq!(s.split_errors, 1.0);
        assert_eq!(s.sqrt_n_split, 2.0);
    }

    proptest! {
        #[test]
        fn w1_triangle_inequality(
            a in prop::collection::vec(-10.0f64..10.0, 12),
            b in prop::collection::vec(-10.0f64..10.0, 12),
            c in prop::collection::vec(-10.0f64..10.0, 12),
        ) {
            let (a, b, c) = (ed(&a), ed(&b), ed(&c));
            prop_assert!(wasserstein1(&a, &c) <= wasserstein1(&a, &b) + wasserstein1(&b, &c) + 1e-12);
        }

        #[test]
        fn ks_in_unit_interval(
            a in prop::collection::vec(-5.0f64..5.0, 1..30),
            b in prop::collection::vec(-5.0f64..5.0, 1..30),
        ) {
            let d = ks_distance(&ed(&a), &ed(&b));
            prop_assert!((0.0..=1.0).contains(&d));
        }

        #[test]
        fn unequal_w1_matches_replicated_equal_w1(
            a in prop::collection::vec(-5.0f64..5.0, 1..8),
            b in prop::collection::vec(-5.0f64..5.0, 1..8),
        ) {
            // Replicating each sample to a common size leaves the law, hence W1, unchanged.
            let (na, nb) = (a.len(), b.len());
            let ra: Vec<f64> = a.iter().flat_map(|&x| std::iter::repeat_n(x, nb)).collect();
            let rb: Vec<f64> = b.iter().flat_map(|&x| std::iter::repeat_n(x, na)).collect();
            let exact = wasserstein1(&ed(&a), &ed(&b));
            let viaeq = wasserstein1(&ed(&ra), &ed(&rb));
            prop_assert!((exact - viaeq).abs() < 1e-9);
        }
    }
}
