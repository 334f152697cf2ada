use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{collect_successes, mean_with_se, metadata, replicate_seed, run_replicates, speedup_statistics, ExperimentConfig, ResultRow, ResultTable, RunSettings};
use crate::asymptotics::{ridge_asymptotics, RidgeDesign};
use crate::error::{Error, Result};
use crate::folds::make_partition;
use crate::generators::{GaussianLinear, Generator, GeneratorSpec};
use crate::models::{Fitter, Hypothesis, RidgeFitter};
use crate::risk::cv_risk;
use crate::variance::{confidence_interval, s2_cv_ridge_fast};

/// Which population risk the intervals are checked against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum CoverageTarget {
    /// Expected risk of a fit on `n - |B_1|` rows, the size of one training fold.
    #[default]
    TrainingFoldSize,
    /// Expected risk of a fit on all `n` rows.
    FullSample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RidgeCoverageConfig {
    pub seed: u64,
    pub replicates: usize,
    pub n_grid: Vec<usize>,
    pub k: usize,
    pub lambda: f64,
    pub levels: Vec<f64>,
    pub generator: GeneratorSpec,
    pub target: CoverageTarget,
    /// Replicates of the auxiliary pass estimating the target risk.
    pub target_replicates: usize,
    pub run: RunSettings,
}

impl Default for RidgeCoverageConfig {
    fn default() -> Self {
        Self {
            seed: 20_240_101,
            replicates: 5000,
            n_grid: vec![20, 40, 100, 200, 400, 800],
            k: 2,
            lambda: 1.0,
            levels: vec![0.8, 0.9, 0.95],
            generator: GeneratorSpec::toeplitz_ridge_design(),
            target: CoverageTarget::default(),
            target_replicates: 100_000,
            run: RunSettings::default(),
        }
    }
}

fn gaussian_linear(spec: &GeneratorSpec) -> Result<GaussianLinear> {
    match spec.build().map_err(|e| Error::Config(e.to_string()))? {
        Generator::GaussianLinear(g) => Ok(g),
        _ => Err(Error::Config("ridge experiments need a gaussian-linear generator".into())),
    }
}

fn check_grid(grid: &[usize], k: usize) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Config("n_grid is empty".into()));
    }
    if k < 2 {
        return Err(Error::Config(format!("k must be at least 2, got {k}")));
    }
    if let Some(&n) = grid.iter().find(|&&n| n < 2 * k) {
        return Err(Error::Config(format!("n={n} is too small for {k} folds")));
    }
    Ok(())
}

impl RidgeCoverageConfig {
    pub fn validate(&self) -> Result<()> {
        check_grid(&self.n_grid, self.k)?;
        gaussian_linear(&self.generator)?;
        if !(self.lambda > 0.0) {
            return Err(Error::Config("lambda must be positive".into()));
        }
        if self.levels.iter().any(|l| !(*l > 0.0 && *l < 1.0)) {
            return Err(Error::Config("levels must lie in (0,1)".into()));
        }
        if self.target_replicates < 2 {
            return Err(Error::Config("target_replicates must be at least 2".into()));
        }
        Ok(())
    }
}

fn coverage_label(level: f64) -> String {
    format!("coverage_{}", (level * 100.0).round() as u64)
}

/// Mean closed-form risk of ridge fits on `m` fresh rows, with its standard error.
pub fn ridge_target_risk(g: &GaussianLinear, lambda: f64, m: usize, replicates: usize, master_seed: u64, tag: u64) -> Result<(f64, f64)> {
    let gen = Generator::GaussianLinear(g.clone());
    let fitter = RidgeFitter::new(lambda)?;
    let rows: Vec<usize> = (0..m).collect();
    let risks = run_replicates(replicates, |r| {
        let data = gen.sample(m, &mut replicate_seed(master_seed, tag, r).rng())?;
        match fitter.fit(&data, &rows)? {
            Hypothesis::Linear(theta) => Ok(g.risk(&theta)),
            _ => unreachable!("ridge yields a linear hypothesis"),
        }
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;
    Ok(mean_with_se(&risks))
}

/// Coverage of normal intervals built from the CV risk and the swap variance estimate.
pub fn run_ridge_coverage(cfg: &RidgeCoverageConfig) -> Result<ResultTable> {
    cfg.validate()?;
    let start = Instant::now();
    let g = gaussian_linear(&cfg.generator)?;
    let gen = Generator::GaussianLinear(g.clone());
    let fitter = RidgeFitter::new(cfg.lambda)?;
    let mut rows = Vec::new();
    let mut failures = 0;
    for (gi, &n) in cfg.n_grid.iter().enumerate() {
        let p = make_partition(n, cfg.k)?;
        let m = match cfg.target {
            CoverageTarget::TrainingFoldSize => n - p.block(0).len(),
            CoverageTarget::FullSample => n,
        };
        let (target, target_se) = ridge_target_risk(&g, cfg.lambda, m, cfg.target_replicates, cfg.seed, 2 * gi as u64 + 1)?;
        let results = run_replicates(cfg.replicates, |r| {
            let data = gen.sample(n, &mut replicate_seed(cfg.seed, 2 * gi as u64, r).rng())?;
            let rep = cv_risk(&data, &p, &fitter)?;
            let s2 = s2_cv_ridge_fast(&data, cfg.k, cfg.lambda)?;
            let covered = cfg
                .levels
                .iter()
                .map(|&level| {
                    let (lo, hi) = confidence_interval(rep.cv_risk, s2, n, 1.0 - level)?;
                    Ok(lo <= target && target <= hi)
                })
                .collect::<Result<Vec<bool>>>()?;
            Ok((rep.cv_risk, s2, covered))
        });
        let (ok, failed) = collect_successes(results, 0.01, "coverage")?;
        failures += failed;
        let count = ok.len() as f64;
        rows.push(ResultRow::new(Some(n), "target_risk", target, Some(target_se)));
        for (li, &level) in cfg.levels.iter().enumerate() {
            let hits = ok.iter().filter(|o| o.2[li]).count() as f64;
            let cov = hits / count;
            rows.push(ResultRow::new(Some(n), coverage_label(level), cov, Some((cov * (1.0 - cov) / count).sqrt())));
        }
        let cvs: Vec<f64> = ok.iter().map(|o| o.0).collect();
        let s2s: Vec<f64> = ok.iter().map(|o| o.1).collect();
        let (mc, mc_se) = mean_with_se(&cvs);
        let (ms, ms_se) = mean_with_se(&s2s);
        rows.push(ResultRow::new(Some(n), "mean_cv_risk", mc, Some(mc_se)));
        rows.push(ResultRow::new(Some(n), "mean_s2_cv", ms, Some(ms_se)));
    }
    let wrapped = ExperimentConfig::RidgeCoverage(cfg.clone());
    Ok(ResultTable {
        metadata: metadata(wrapped.name(), wrapped.hash(), cfg.seed, cfg.replicates, failures, start),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RidgeSpeedupConfig {
    pub seed: u64,
    pub replicates: usize,
    pub n_grid: Vec<usize>,
    pub k: usize,
    pub lambda: f64,
    pub generator: GeneratorSpec,
    pub run: RunSettings,
}

impl Default for RidgeSpeedupConfig {
    fn default() -> Self {
        Self {
            seed: 20_240_102,
            replicates: 10_000,
            n_grid: vec![50, 100, 200, 500, 1000],
            k: 2,
            lambda: 1.0,
            generator: GeneratorSpec::toeplitz_ridge_design(),
            run: RunSettings::default(),
        }
    }
}

impl RidgeSpeedupConfig {
    pub fn validate(&self) -> Result<()> {
        check_grid(&self.n_grid, self.k)?;
        gaussian_linear(&self.generator)?;
        if !(self.lambda >= 0.0) {
            return Err(Error::Config("lambda must be non-negative".into()));
        }
        Ok(())
    }
}

/// Replicated split and CV variances per sample size, plus the limiting row.
pub fn run_ridge_speedup(cfg: &RidgeSpeedupConfig) -> Result<ResultTable> {
    cfg.validate()?;
    let start = Instant::now();
    let g = gaussian_linear(&cfg.generator)?;
    let gen = Generator::GaussianLinear(g.clone());
    let fitter = RidgeFitter::new(cfg.lambda)?;
    let mut rows = Vec::new();
    for (gi, &n) in cfg.n_grid.iter().enumerate() {
        let stats = speedup_statistics(&gen, &fitter, n, cfg.k, cfg.replicates, cfg.seed, gi as u64)?;
        rows.extend(stats.rows());
    }
    let lim = ridge_asymptotics(&g.covariance, g.noise_variance, &g.theta, cfg.lambda, RidgeDesign::Gaussian)?.quantities;
    rows.push(ResultRow::new(None, "n_var_split", lim.split_variance(cfg.k), None));
    rows.push(ResultRow::new(None, "n_var_cv", lim.sigma_cv_sq, None));
    rows.push(ResultRow::new(None, "speedup", lim.speedup(cfg.k)?.variance_ratio, None));
    let wrapped = ExperimentConfig::RidgeSpeedup(cfg.clone());
    Ok(ResultTable {
        metadata: metadata(wrapped.name(), wrapped.hash(), cfg.seed, cfg.replicates, 0, start),
        rows,
    })
}
