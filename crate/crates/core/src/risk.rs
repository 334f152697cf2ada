//! Cross-validated and split risk estimates, and the population risks they target.

use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::folds::FoldPartition;
use crate::generators::{Density, Generator};
use crate::models::{evaluate_loss, Fitter, Hypothesis, LossKind};
use crate::rng::SeedSpec;
use crate::stats::{pairwise_sum, sample_variance};

/// Held-out losses and fold hypotheses of one K-fold pass.
#[derive(Debug, Clone)]
pub struct RiskReport {
    pub cv_risk: f64,
    pub split_risk: f64,
    /// `per_fold_losses[j][t]` is the loss of the fold-`j` hypothesis at `partition.block(j)[t]`.
    pub per_fold_losses: Vec<Vec<f64>>,
    pub hypotheses: Vec<Hypothesis>,
    pub partition: FoldPartition,
}

impl RiskReport {
    pub fn n(&self) -> usize {
        self.partition.n()
    }

    pub fn k(&self) -> usize {
        self.partition.k()
    }

    /// Held-out losses in row order.
    pub fn losses_by_row(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n()];
        for (j, block) in self.partition.blocks().iter().enumerate() {
            for (t, &i) in block.iter().enumerate() {
                out[i] = self.per_fold_losses[j][t];
            }
        }
        out
    }
}

/// Whether folds are fitted on the rayon pool or in a plain loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    #[default]
    Parallel,
    Sequential,
}

fn check_partition(data: &Dataset, p: &FoldPartition) -> Result<()> {
    if p.n() != data.n() {
        return Err(Error::invalid(format!(
            "partition covers {} rows but the dataset has {}",
            p.n(),
            data.n()
        )));
    }
    Ok(())
}

/// Fit on the complement of fold `j` and evaluate on fold `j`.
pub(crate) fn fold_pass<F: Fitter + ?Sized>(
    data: &Dataset,
    p: &FoldPartition,
    fitter: &F,
    j: usize,
) -> Result<(Hypothesis, Vec<f64>)> {
    let train = p.complement(j);
    let h = fitter.fit(data, &train).map_err(|e| e.in_fold(j))?;
    let losses = p
        .block(j)
        .iter()
        .map(|&i| fitter.loss(&h, data.row(i)))
        .collect::<Result<Vec<f64>>>()
        .map_err(|e| e.in_fold(j))?;
    Ok((h, losses))
}

pub fn cv_risk<F: Fitter + ?Sized>(data: &Dataset, p: &FoldPartition, fitter: &F) -> Result<RiskReport> {
    cv_risk_with(data, p, fitter, Execution::Parallel)
}

/// K-fold cross-validation risk; the result does not depend on `exec`.
pub fn cv_risk_with<F: Fitter + ?Sized>(
    data: &Dataset,
    p: &FoldPartition,
    fitter: &F,
    exec: Execution,
) -> Result<RiskReport> {
    check_partition(data, p)?;
    let folds: Vec<(Hypothesis, Vec<f64>)> = match exec {
        Execution::Parallel => (0..p.k())
            .into_par_iter()
            .map(|j| fold_pass(data, p, fitter, j))
            .collect::<Result<_>>()?,
        Execution::Sequential => (0..p.k()).map(|j| fold_pass(data, p, fitter, j)).collect::<Result<_>>()?,
    };
    let (hypotheses, per_fold_losses): (Vec<_>, Vec<_>) = folds.into_iter().unzip();
    let all: Vec<f64> = per_fold_losses.iter().flatten().copied().collect();
    let cv = pairwise_sum(&all) / all.len() as f64;
    let split = pairwise_sum(&per_fold_losses[0]) / per_fold_losses[0].len() as f64;
    Ok(RiskReport {
        cv_risk: cv,
        split_risk: split,
        per_fold_losses,
        hypotheses,
        partition: p.clone(),
    })
}

/// Mean loss over the first fold of the hypothesis fitted on its complement.
pub fn split_risk<F: Fitter + ?Sized>(data: &Dataset, p: &FoldPartition, fitter: &F) -> Result<f64> {
    check_partition(data, p)?;
    let (_, losses) = fold_pass(data, p, fitter, 0)?;
    Ok(pairwise_sum(&losses) / losses.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetKind {
    /// Expected loss of a fixed hypothesis on a fresh draw.
    HypothesisRisk,
    /// Mean of the hypothesis risks of the K fold fits.
    EnsembleAverage,
    /// Expectation over training samples of the hypothesis risk.
    ExpectedRisk,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetRisk {
    pub value: f64,
    pub kind: TargetKind,
    /// Monte Carlo standard error; `None` when computed exactly or from one draw.
    pub std_error: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RiskMethod {
    ClosedForm,
    MonteCarlo { draws: usize, seed: SeedSpec },
}

/// Population risk `E L(X, h)` of a fixed hypothesis.
pub fn true_risk(h: &Hypothesis, loss: LossKind, gen: &Generator, method: RiskMethod) -> Result<TargetRisk> {
    let value_se = match method {
        RiskMethod::ClosedForm => (closed_form_risk(h, loss, gen)?, None),
        RiskMethod::MonteCarlo { draws, seed } => monte_carlo_risk(h, loss, gen, draws, seed)?,
    };
    if !value_se.0.is_finite() {
        return Err(Error::NumericalFailure("population risk is not finite".into()));
    }
    Ok(TargetRisk {
        value: value_se.0,
        kind: TargetKind::HypothesisRisk,
        std_error: value_se.1,
    })
}

fn closed_form_risk(h: &Hypothesis, loss: LossKind, gen: &Generator) -> Result<f64> {
    let (base, scale) = match loss {
        LossKind::Square => (LossKind::Square, 1.0),
        LossKind::ZeroOne => (LossKind::ZeroOne, 1.0),
        LossKind::RescaledSquare { n } => (LossKind::Square, (n as f64).sqrt()),
        LossKind::RescaledZeroOne { n } => (LossKind::ZeroOne, (n as f64).sqrt()),
    };
    let unsupported = || {
        Error::Unsupported(format!(
            "no closed-form {} risk for this hypothesis and generator",
            base.name()
        ))
    };
    let r = match (base, h, gen) {
        (LossKind::Square, Hypothesis::Linear(theta), Generator::GaussianLinear(g)) => {
            if theta.len() != g.dim() {
                return Err(Error::invalid("hypothesis dimension does not match the generator"));
            }
            g.risk(theta)
        }
        (LossKind::Square, Hypothesis::Mean(t), Generator::Univariate(d)) => d.variance() + (d.mean() - t).powi(2),
        (LossKind::Square, Hypothesis::Mean(t), Generator::SymmetricBernoulli) => 1.0 + t * t,
        (LossKind::ZeroOne, Hypothesis::MeanPair { class1, class0 }, Generator::TwoClassMixture { class1: f1, class0: f0 }) => {
            mean_pair_error(*class1, *class0, f1, f0)
        }
        _ => return Err(unsupported()),
    };
    Ok(scale * r)
}

/// Misclassification rate of the nearest-mean rule under an equal-weight mixture.
fn mean_pair_error(m1: f64, m0: f64, f1: &Density, f0: &Density) -> f64 {
    let mid = 0.5 * (m1 + m0);
    if m1 < m0 {
        // label 1 on z < mid
        0.5 * (1.0 - f1.cdf(mid)) + 0.5 * f0.cdf(mid)
    } else if m1 > m0 {
        // label 1 on z > mid
        0.5 * f1.cdf(mid) + 0.5 * (1.0 - f0.cdf(mid))
    } else {
        0.5
    }
}

fn monte_carlo_risk(h: &Hypothesis, loss: LossKind, gen: &Generator, draws: usize, seed: SeedSpec) -> Result<(f64, Option<f64>)> {
    if draws == 0 {
        return Err(Error::invalid("Monte Carlo risk needs at least one draw"));
    }
    const CHUNK: usize = 1 << 14;
    let chunks = draws.div_ceil(CHUNK);
    let losses: Vec<Vec<f64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let m = CHUNK.min(draws - c * CHUNK);
            // Datasets hold at least two rows; draws are sequential so the prefix is unaffected.
            let fresh = gen.sample(m.max(2), &mut seed.derive(c as u64).rng())?;
            fresh.rows().take(m).map(|obs| evaluate_loss(loss, h, obs)).collect()
        })
        .collect::<Result<_>>()?;
    let all: Vec<f64> = losses.into_iter().flatten().collect();
    let mean = pairwise_sum(&all) / all.len() as f64;
    let se = (all.len() > 1).then(|| (sample_variance(&all) / all.len() as f64).sqrt());
    Ok((mean, se))
}

/// Mean population risk of the K fold hypotheses.
pub fn ensemble_average_risk(report: &RiskReport, loss: LossKind, gen: &Generator, method: RiskMethod) -> Result<TargetRisk> {
    let mut vals = Vec::with_capacity(report.hypotheses.len());
    let mut var_sum = 0.0;
    let mut have_se = false;
    for (j, h) in report.hypotheses.iter().enumerate() {
        let m = match method {
            RiskMethod::MonteCarlo { draws, seed } => RiskMethod::MonteCarlo { draws, seed: seed.derive(j as u64) },
            other => other,
        };
        let r = true_risk(h, loss, gen, m).map_err(|e| e.in_fold(j))?;
        if let Some(se) = r.std_error {
            have_se = true;
            var_sum += se * se;
        }
        vals.push(r.value);
    }
    let k = vals.len() as f64;
    Ok(TargetRisk {
        value: pairwise_sum(&vals) / k,
        kind: TargetKind::EnsembleAverage,
        std_error: have_se.then(|| var_sum.sqrt() / k),
    })
}
