//! Variance estimates for the CV risk and the resulting normal confidence interval.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::data::{Dataset, Observation, Responses};
use crate::error::{Error, Result};
use crate::folds::{make_partition, FoldPartition};
use crate::models::{Fitter, Hypothesis, RidgeFitter};
use crate::risk::RiskReport;
use crate::stats::{normal_quantile, pairwise_sum, sample_variance};

/// Average over folds of the unbiased variance of held-out losses.
pub fn sigma1_cross(report: &RiskReport) -> Result<f64> {
    let mut vars = Vec::with_capacity(report.per_fold_losses.len());
    for (j, losses) in report.per_fold_losses.iter().enumerate() {
        if losses.len() < 2 {
            return Err(Error::invalid(format!("fold {j} has a single point; its variance is undefined")));
        }
        vars.push(sample_variance(losses));
    }
    Ok(pairwise_sum(&vars) / vars.len() as f64)
}

/// Half-sample geometry shared by both swap estimators: rows `0..h` form the sample,
/// row `i + h` replaces row `i` in swap `i`. An odd final row is dropped.
struct HalfSample {
    h: usize,
    partition: FoldPartition,
}

impl HalfSample {
    fn new(n: usize, k_half: usize) -> Result<Self> {
        let h = n / 2;
        if h < 2 {
            return Err(Error::invalid(format!("need at least 4 rows for the swap estimator, got {n}")));
        }
        Ok(Self { h, partition: make_partition(h, k_half)? })
    }

    /// Training rows of fold `j` with row `i` replaced by its partner.
    fn swapped_complement(&self, j: usize, i: usize) -> Vec<usize> {
        self.partition
            .complement(j)
            .into_iter()
            .map(|r| if r == i { i + self.h } else { r })
            .collect()
    }

    /// `(h/2) sum_i d_i^2` where `d_i` is the change in half-sample CV risk under swap `i`.
    ///
    /// Each swap replaces a row by an independent copy, so for a statistic that is
    /// asymptotically linear `E d_i^2 ~ 2 sigma_cv^2 / h^2`; the half makes the sum
    /// consistent for `sigma_cv^2` rather than twice it.
    fn finish(&self, diffs: &[f64]) -> f64 {
        let sq: Vec<f64> = diffs.iter().map(|d| d * d).collect();
        0.5 * self.h as f64 * pairwise_sum(&sq)
    }
}

/// Baseline half-sample pass: per-fold losses and their sums.
fn baseline<F: Fitter + ?Sized>(data: &Dataset, half: &HalfSample, fitter: &F) -> Result<(Vec<Hypothesis>, Vec<Vec<f64>>)> {
    (0..half.partition.k())
        .into_par_iter()
        .map(|j| {
            let hyp = fitter.fit(data, &half.partition.complement(j)).map_err(|e| e.in_fold(j))?;
            let losses = half
                .partition
                .block(j)
                .iter()
                .map(|&r| fitter.loss(&hyp, data.row(r)))
                .collect::<Result<Vec<f64>>>()
                .map_err(|e| e.in_fold(j))?;
            Ok((hyp, losses))
        })
        .collect::<Result<Vec<_>>>()
        .map(|v| v.into_iter().unzip())
}

/// Swap-based estimate of the asymptotic CV variance, refitting every affected fold.
pub fn s2_cv_generic<F: Fitter + ?Sized>(data: &Dataset, k_half: usize, fitter: &F) -> Result<f64> {
    let half = HalfSample::new(data.n(), k_half)?;
    let (hyps, base) = baseline(data, &half, fitter)?;
    let base_sums: Vec<f64> = base.iter().map(|l| pairwise_sum(l)).collect();
    let p = &half.partition;
    let diffs = (0..half.h)
        .into_par_iter()
        .map(|i| -> Result<f64> {
            let b = p.block_of(i)?;
            let pos = p.block(b).iter().position(|&r| r == i).expect("row in its block");
            let partner = data.row(i + half.h);
            let mut delta = vec![base[b][pos] - fitter.loss(&hyps[b], partner)?];
            for j in (0..p.k()).filter(|&j| j != b) {
                let hyp = fitter.fit(data, &half.swapped_complement(j, i))?;
                let losses = p
                    .block(j)
                    .iter()
                    .map(|&r| fitter.loss(&hyp, data.row(r)))
                    .collect::<Result<Vec<f64>>>()?;
                delta.push(base_sums[j] - pairwise_sum(&losses));
            }
            Ok(pairwise_sum(&delta) / half.h as f64)
        })
        .enumerate()
        .map(|(i, r)| r.map_err(|e| e.in_swap(i)))
        .collect::<Result<Vec<f64>>>()?;
    Ok(half.finish(&diffs))
}

/// Inverse Gram matrix and ridge coefficients of one training set, ready for
/// rank-two swap updates.
///
/// Works with the unnormalised system `S = sum x x' + m lambda I`, which yields the
/// same coefficients as the normalised ridge objective.
#[derive(Debug, Clone)]
pub struct RidgeSwapState {
    pub s_inv: DMatrix<f64>,
    pub theta: DVector<f64>,
}

fn real_response(obs: &Observation<'_>) -> Result<f64> {
    obs.real_response().ok_or_else(|| Error::invalid("ridge needs real responses"))
}

impl RidgeSwapState {
    pub fn new(data: &Dataset, rows: &[usize], lambda: f64) -> Result<Self> {
        if !matches!(data.responses(), Responses::Real(_)) {
            return Err(Error::invalid("ridge needs real responses"));
        }
        let d = data.dim();
        let mut s = DMatrix::identity(d, d) * (rows.len() as f64 * lambda);
        let mut b = DVector::zeros(d);
        for &r in rows {
            let obs = data.row(r);
            let x = DVector::from_column_slice(obs.features);
            s.ger(1.0, &x, &x, 1.0);
            b.axpy(real_response(&obs)?, &x, 1.0);
        }
        let s_inv = s
            .cholesky()
            .ok_or_else(|| Error::NumericalFailure("ridge Gram matrix is not positive definite".into()))?
            .inverse();
        let theta = &s_inv * b;
        Ok(Self { s_inv, theta })
    }

    /// Coefficients after replacing the training point `(x, y)` by `(x2, y2)`.
    pub fn swap_one_raw(&self, x: &[f64], y: f64, x2: &[f64], y2: f64) -> Result<DVector<f64>> {
        let xi = DVector::from_column_slice(x);
        let xp = DVector::from_column_slice(x2);
        let u = &self.s_inv * &xi;
        let v = &self.s_inv * &xp;
        let h = xi.dot(&u);
        let h1 = xi.dot(&v);
        let h2 = xp.dot(&v);
        let den = (1.0 - h) * (1.0 + h2) + h1 * h1;
        if !(den.abs() > 1e-12) {
            return Err(Error::NumericalFailure(format!("swap update denominator {den:e} vanishes")));
        }
        let ti = xi.dot(&self.theta);
        let tp = xp.dot(&self.theta);
        // Rank-two Sherman-Morrison-Woodbury update, expanded so only u and v are needed.
        let cu = -y + ((1.0 + h2) * ti - h1 * tp - y * (h + h2 * h - h1 * h1) + y2 * h1) / den;
        let cv = y2 + (-h1 * ti + (h - 1.0) * tp + y * h1 + y2 * (h * h2 - h2 - h1 * h1)) / den;
        Ok(&self.theta + u * cu + v * cv)
    }

    /// Ridge fit after replacing training row `i` with `replacement`.
    pub fn swap_one(&self, data: &Dataset, i: usize, replacement: Observation<'_>) -> Result<Hypothesis> {
        let old = data.row(i);
        let theta = self.swap_one_raw(old.features, real_response(&old)?, replacement.features, real_response(&replacement)?)?;
        Ok(Hypothesis::Linear(theta))
    }
}

pub fn ridge_swap_one_theta(state: &RidgeSwapState, data: &Dataset, i: usize, replacement: Observation<'_>) -> Result<Hypothesis> {
    state.swap_one(data, i, replacement)
}

fn sq_loss(theta: &DVector<f64>, obs: Observation<'_>) -> Result<f64> {
    let y = real_response(&obs)?;
    let fit: f64 = obs.features.iter().zip(theta.iter()).map(|(a, b)| a * b).sum();
    Ok((y - fit).powi(2))
}

/// Same estimate as [`s2_cv_generic`] with a ridge fitter, using swap updates instead of refits.
pub fn s2_cv_ridge_fast(data: &Dataset, k_half: usize, lambda: f64) -> Result<f64> {
    let ridge = RidgeFitter::new(lambda)?;
    let half = HalfSample::new(data.n(), k_half)?;
    let p = &half.partition;
    let states = (0..p.k())
        .map(|j| RidgeSwapState::new(data, &p.complement(j), lambda).map_err(|e| e.in_fold(j)))
        .collect::<Result<Vec<_>>>()?;
    let base: Vec<Vec<f64>> = (0..p.k())
        .map(|j| p.block(j).iter().map(|&r| sq_loss(&states[j].theta, data.row(r))).collect())
        .collect::<Result<_>>()?;
    let base_sums: Vec<f64> = base.iter().map(|l| pairwise_sum(l)).collect();
    let diffs = (0..half.h)
        .into_par_iter()
        .map(|i| -> Result<f64> {
            let b = p.block_of(i)?;
            let pos = p.block(b).iter().position(|&r| r == i).expect("row in its block");
            let partner = data.row(i + half.h);
            let mut delta = vec![base[b][pos] - sq_loss(&states[b].theta, partner)?];
            for j in (0..p.k()).filter(|&j| j != b) {
                let theta = match states[j].swap_one(data, i, partner) {
                    Ok(Hypothesis::Linear(t)) => t,
                    Ok(_) => unreachable!("ridge swap yields a linear hypothesis"),
                    Err(e) if e.is_numerical() => match ridge.fit(data, &half.swapped_complement(j, i))? {
                        Hypothesis::Linear(t) => t,
                        _ => unreachable!("ridge fit yields a linear hypothesis"),
                    },
                    Err(e) => return Err(e),
                };
                let losses = p
                    .block(j)
                    .iter()
                    .map(|&r| sq_loss(&theta, data.row(r)))
                    .collect::<Result<Vec<f64>>>()?;
                delta.push(base_sums[j] - pairwise_sum(&losses));
            }
            Ok(pairwise_sum(&delta) / half.h as f64)
        })
        .enumerate()
        .map(|(i, r)| r.map_err(|e| e.in_swap(i)))
        .collect::<Result<Vec<f64>>>()?;
    Ok(half.finish(&diffs))
}

/// Symmetric normal interval `point -/+ sqrt(s2/n) z_{1-alpha/2}`.
pub fn confidence_interval(point: f64, s2: f64, n: usize, alpha: f64) -> Result<(f64, f64)> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha must lie in (0,1), got {alpha}")));
    }
    if !(s2 >= 0.0) || n == 0 {
        return Err(Error::invalid("variance must be non-negative and n positive"));
    }
    let half_width = (s2 / n as f64).sqrt() * normal_quantile(1.0 - alpha / 2.0);
    Ok((point - half_width, point + half_width))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum VarianceMethod {
    GenericRefit,
    RidgeWoodbury,
}

#[derive(Debug, Clone, Serialize)]
pub struct VarianceReport {
    pub point: f64,
    pub sigma1_hat: f64,
    pub s2_cv_hat: f64,
    pub method: VarianceMethod,
    pub alpha: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
}

impl VarianceReport {
    /// Assemble from a CV pass and an already computed swap estimate.
    pub fn new(report: &RiskReport, s2_cv_hat: f64, method: VarianceMethod, alpha: f64) -> Result<Self> {
        let (lo, hi) = confidence_interval(report.cv_risk, s2_cv_hat, report.n(), alpha)?;
        Ok(Self {
            point: report.cv_risk,
            sigma1_hat: sigma1_cross(report)?,
            s2_cv_hat,
            method,
            alpha,
            ci_lower: lo,
            ci_upper: hi,
        })
    }

    pub fn covers(&self, target: f64) -> bool {
        self.ci_lower <= target && target <= self.ci_upper
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::folds::make_partition;
    use crate::generators::{sample_dataset, GeneratorSpec};
    use crate::models::LossKind;
    use crate::risk::cv_risk;
    use crate::rng::SeedSpec;

    fn ridge_data(n: usize, seed: u64) -> Dataset {
        let gen = GeneratorSpec::toeplitz_ridge_design().build().unwrap();
        sample_dataset(&gen, n, SeedSpec::new(seed, 0)).unwrap()
    }

    #[test]
    fn sigma1_hand_computed() {
        let p = make_partition(4, 2).unwrap();
        let report = RiskReport {
            cv_risk: 1.0,
            split_risk: 1.0,
            per_fold_losses: vec![vec![0.0, 2.0], vec![1.0, 1.0]],
            hypotheses: vec![Hypothesis::Mean(0.0); 2],
            partition: p,
        };
        assert_eq!(sigma1_cross(&report).unwrap(), 1.0);
    }

    #[test]
    fn sigma1_rejects_singleton_fold() {
        let d = Dataset::scalar(vec![0.0, 1.0, 2.0]).unwrap();
        let r = cv_risk(&d, &make_partition(3, 3).unwrap(), &crate::models::MeanFitter::new(LossKind::Square)).unwrap();
        assert!(matches!(sigma1_cross(&r), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn identity_swap_leaves_theta() {
        let d = ridge_data(30, 1);
        let rows: Vec<usize> = (0..20).collect();
        let st = RidgeSwapState::new(&d, &rows, 0.5).unwrap();
        let Hypothesis::Linear(t) = st.swap_one(&d, 4, d.row(4)).unwrap() else { panic!() };
        assert!((t - &st.theta).amax() < 1e-13);
    }

    #[test]
    fn swap_matches_naive_refit() {
        for seed in 0..100 {
            let d = ridge_data(30, seed);
            let rows: Vec<usize> = (0..15).collect();
            let st = RidgeSwapState::new(&d, &rows, 0.5).unwrap();
            let i = (seed as usize) % 15;
            let Hypothesis::Linear(fast) = st.swap_one(&d, i, d.row(15 + i)).unwrap() else { panic!() };
            let swapped: Vec<usize> = rows.iter().map(|&r| if r == i { 15 + i } else { r }).collect();
            let Hypothesis::Linear(slow) = RidgeFitter::new(0.5).unwrap().fit(&d, &swapped).unwrap() else { panic!() };
            assert!((&fast - &slow).amax() <= 1e-8 * slow.amax(), "seed {seed}");
        }
    }

    #[test]
    fn fast_path_equals_generic() {
        for seed in 0..20 {
            let d = ridge_data(40, 100 + seed);
            let fast = s2_cv_ridge_fast(&d, 2, 0.1).unwrap();
            let slow = s2_cv_generic(&d, 2, &RidgeFitter::new(0.1).unwrap()).unwrap();
            assert!((fast - slow).abs() <= 1e-8 * slow.abs(), "{fast} vs {slow}");
        }
        let d = ridge_data(41, 7);
        let fast = s2_cv_ridge_fast(&d, 3, 0.2).unwrap();
        let slow = s2_cv_generic(&d, 3, &RidgeFitter::new(0.2).unwrap()).unwrap();
        assert!((fast - slow).abs() <= 1e-8 * slow.abs());
    }

    #[test]
    fn zero_response_hand_value() {
        // y = 0 so theta = 0 and every loss is 0: swaps cannot move the risk.
        let d = Dataset::regression(1, vec![1.0, 2.0, 3.0, 4.0], vec![0.0; 4]).unwrap();
        assert_eq!(s2_cv_ridge_fast(&d, 2, 0.3).unwrap(), 0.0);
        assert_eq!(s2_cv_generic(&d, 2, &RidgeFitter::new(0.3).unwrap()).unwrap(), 0.0);
    }

    #[test]
    fn hand_value_with_huge_penalty() {
        // theta ~ 0, losses ~ y^2: rows (1,1),(2,2) then partners (3,3),(4,4).
        // Swap 0 moves fold-0 loss 1 -> 9, swap 1 moves fold-1 loss 4 -> 16 (up to O(1/lambda)).
        // With h = 2 the estimate is (h/2) sum d_i^2 = sum d_i^2.
        let d = Dataset::regression(1, vec![1.0, 2.0, 3.0, 4.0], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let expected = (8.0f64 / 2.0).powi(2) + (12.0f64 / 2.0).powi(2);
        let fast = s2_cv_ridge_fast(&d, 2, 1e9).unwrap();
        let slow = s2_cv_generic(&d, 2, &RidgeFitter::new(1e9).unwrap()).unwrap();
        assert!((fast - expected).abs() < 1e-5 * expected);
        assert!((fast - slow).abs() <= 1e-8 * slow);
    }

    #[test]
    fn interval_values() {
        let (lo, hi) = confidence_interval(0.0, 1.0, 100, 0.05).unwrap();
        assert!((hi - 0.195_996_4).abs() < 1e-7 && (lo + hi).abs() < 1e-15);
        assert_eq!(confidence_interval(3.0, 0.0, 10, 0.1).unwrap(), (3.0, 3.0));
        assert!(confidence_interval(0.0, 1.0, 10, 1.0).is_err());
        let w = |n| {
            let (a, b) = confidence_interval(1.0, 2.0, n, 0.1).unwrap();
            b - a
        };
        assert!((w(25) / w(100) - 2.0).abs() < 1e-14);
    }
}
