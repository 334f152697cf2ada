use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{mean_with_se, metadata, ExperimentConfig, ResultRow, ResultTable, RunSettings};
use crate::error::{Error, Result};
use crate::limits::{
    draw_many, half_chi2_cdf, ks_distance, ks_distance_to_cdf, sample_nn_limit, sample_nn_limit_as_displayed,
    sample_nn_split_count_limit, sample_noiseless_limit, sample_noiseless_limit_expanded, simulate_nn_cv,
    simulate_noiseless_cv, wasserstein1, EmpiricalDistribution,
};
use crate::rng::SeedSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LimitLaw {
    /// Two-fold 1-NN on uniform features with a threshold label.
    #[default]
    Nn,
    /// Sample mean under square loss on symmetric +-1 data.
    Noiseless,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LimitLawConfig {
    pub law: LimitLaw,
    pub seed: u64,
    /// Finite-sample replicates.
    pub replicates: usize,
    /// Sample size; 10000 for `nn` and 2000 for `noiseless` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// Folds of the noiseless experiment (the 1-NN one always uses two).
    pub k: usize,
    /// Draws from the limiting law.
    pub limit_draws: usize,
    pub run: RunSettings,
}

impl Default for LimitLawConfig {
    fn default() -> Self {
        Self {
            law: LimitLaw::Nn,
            seed: 20_240_104,
            replicates: 10_000,
            n: None,
            k: 2,
            limit_draws: 100_000,
            run: RunSettings::default(),
        }
    }
}

impl LimitLawConfig {
    pub fn noiseless() -> Self {
        Self { law: LimitLaw::Noiseless, ..Self::default() }
    }

    pub fn sample_size(&self) -> usize {
        self.n.unwrap_or(match self.law {
            LimitLaw::Nn => 10_000,
            LimitLaw::Noiseless => 2000,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.sample_size();
        if self.limit_draws < 2 {
            return Err(Error::Config("limit_draws must be at least 2".into()));
        }
        match self.law {
            LimitLaw::Nn if n < 4 || n % 2 != 0 => Err(Error::Config(format!("1-NN needs even n >= 4, got {n}"))),
            LimitLaw::Noiseless if self.k < 2 || n < 2 * self.k => {
                Err(Error::Config(format!("noiseless needs k >= 2 and n >= 2k, got n={n}, k={}", self.k)))
            }
            _ => Ok(()),
        }
    }
}

fn empirical(xs: Vec<f64>) -> Result<EmpiricalDistribution> {
    EmpiricalDistribution::new(xs)
}

/// Compare the finite-sample statistic with its limiting law.
///
/// Every distance is reported next to the self-distance of two independent sampler runs
/// with the same sizes, and the acceptance threshold is three times that baseline.
pub fn run_limit_law(cfg: &LimitLawConfig) -> Result<ResultTable> {
    cfg.validate()?;
    let start = Instant::now();
    let n = cfg.sample_size();
    let root = SeedSpec::new(cfg.seed, 0);
    let (sim_seed, limit_seed, base_seed, alt_seed) = (root.derive(1), root.derive(2), root.derive(3), root.derive(4));
    let at = Some(n);
    let mut rows = Vec::new();
    match cfg.law {
        LimitLaw::Nn => {
            let draws = crate::experiments::run_replicates(cfg.replicates, |r| simulate_nn_cv(n, sim_seed.derive(r as u64)))
                .into_iter()
                .collect::<Result<Vec<_>>>()?;
            let cv: Vec<f64> = draws.iter().map(|d| d.sqrt_n_cv).collect();
            let split: Vec<f64> = draws.iter().map(|d| d.split_errors).collect();
            let limit = empirical(draw_many(cfg.limit_draws, limit_seed, |s| Ok(sample_nn_limit(&mut s.rng())))?)?;
            let base = empirical(draw_many(cfg.replicates, base_seed, |s| Ok(sample_nn_limit(&mut s.rng())))?)?;
            let displayed = empirical(draw_many(cfg.limit_draws, alt_seed, |s| Ok(sample_nn_limit_as_displayed(&mut s.rng())))?)?;
            let count = empirical(draw_many(cfg.limit_draws, alt_seed.derive(1), |s| {
                Ok(sample_nn_split_count_limit(&mut s.rng()))
            })?)?;
            let (m, m_se) = mean_with_se(&cv);
            let (ms, ms_se) = mean_with_se(&split);
            let cv_ed = empirical(cv)?;
            let split_ed = empirical(split)?;
            let w = wasserstein1(&cv_ed, &limit);
            let baseline = wasserstein1(&base, &limit);
            rows.push(ResultRow::new(at, "w1_cv_vs_limit", w, None));
            rows.push(ResultRow::new(at, "w1_baseline", baseline, None));
            rows.push(ResultRow::new(at, "w1_threshold", 3.0 * baseline, None));
            rows.push(ResultRow::new(at, "w1_within_threshold", f64::from(u8::from(w < 3.0 * baseline)), None));
            rows.push(ResultRow::new(at, "w1_cv_vs_displayed_law", wasserstein1(&cv_ed, &displayed), None));
            rows.push(ResultRow::new(at, "w1_split_errors_vs_poisson", wasserstein1(&split_ed, &count), None));
            rows.push(ResultRow::new(at, "mean_sqrt_n_cv", m, Some(m_se)));
            rows.push(ResultRow::new(at, "mean_split_errors", ms, Some(ms_se)));
            rows.push(ResultRow::new(None, "mean_limit", limit.mean(), None));
            rows.push(ResultRow::new(None, "mean_displayed_law", displayed.mean(), None));
        }
        LimitLaw::Noiseless => {
            let k = cfg.k;
            let stats = crate::experiments::run_replicates(cfg.replicates, |r| simulate_noiseless_cv(n, k, sim_seed.derive(r as u64)))
                .into_iter()
                .collect::<Result<Vec<f64>>>()?;
            let limit = empirical(draw_many(cfg.limit_draws, limit_seed, |s| sample_noiseless_limit(k, &mut s.rng()))?)?;
            let base = empirical(draw_many(cfg.replicates, base_seed, |s| sample_noiseless_limit(k, &mut s.rng()))?)?;
            let expanded = empirical(draw_many(cfg.limit_draws, alt_seed, |s| sample_noiseless_limit_expanded(k, &mut s.rng()))?)?;
            let (m, m_se) = mean_with_se(&stats);
            let ed = empirical(stats)?;
            let kf = k as f64;
            if k == 2 {
                rows.push(ResultRow::new(at, "ks_vs_half_chi2", ks_distance_to_cdf(&ed, half_chi2_cdf), None));
            }
            rows.push(ResultRow::new(at, "ks_vs_limit", ks_distance(&ed, &limit), None));
            rows.push(ResultRow::new(at, "ks_baseline", ks_distance(&base, &limit), None));
            rows.push(ResultRow::new(at, "ks_vs_expanded_law", ks_distance(&ed, &expanded), None));
            rows.push(ResultRow::new(at, "mean_statistic", m, Some(m_se)));
            rows.push(ResultRow::new(None, "mean_limit", kf / (4.0 * (kf - 1.0)), None));
            rows.push(ResultRow::new(None, "mean_expanded_law", kf / (kf - 1.0), None));
        }
    }
    let wrapped = ExperimentConfig::LimitLaw(cfg.clone());
    Ok(ResultTable {
        metadata: metadata(wrapped.name(), wrapped.hash(), cfg.seed, cfg.replicates, 0, start),
        rows,
    })
}
