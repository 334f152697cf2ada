//! Monte Carlo experiments: configuration, deterministic replicate execution, tables.

mod lda;
mod limit;
mod ridge;
mod speedup;
mod table;

pub use lda::{run_lda_speedup, LdaSpeedupConfig};
pub use limit::{run_limit_law, LimitLaw, LimitLawConfig};
pub use ridge::{ridge_target_risk, run_ridge_coverage, run_ridge_speedup, CoverageTarget, RidgeCoverageConfig, RidgeSpeedupConfig};
pub use speedup::{speedup_statistics, SpeedupStatistics};
pub use table::{OutputFormat, ResultRow, ResultTable, TableMetadata};

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::rng::SeedSpec;

/// Any experiment, tagged by `"experiment"` in JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "kebab-case")]
pub enum ExperimentConfig {
    RidgeCoverage(RidgeCoverageConfig),
    RidgeSpeedup(RidgeSpeedupConfig),
    LdaSpeedup(LdaSpeedupConfig),
    LimitLaw(LimitLawConfig),
}

/// Settings that affect how a run executes but not what it computes.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSettings {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
}

macro_rules! each_config {
    ($self:expr, $c:ident => $body:expr) => {
        match $self {
            ExperimentConfig::RidgeCoverage($c) => $body,
            ExperimentConfig::RidgeSpeedup($c) => $body,
            ExperimentConfig::LdaSpeedup($c) => $body,
            ExperimentConfig::LimitLaw($c) => $body,
        }
    };
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configs serialise")
    }

    pub fn name(&self) -> &'static str {
        match self {
            ExperimentConfig::RidgeCoverage(_) => "ridge-coverage",
            ExperimentConfig::RidgeSpeedup(_) => "ridge-speedup",
            ExperimentConfig::LdaSpeedup(_) => "lda-speedup",
            ExperimentConfig::LimitLaw(_) => "limit-law",
        }
    }

    pub fn seed(&self) -> u64 {
        each_config!(self, c => c.seed)
    }

    pub fn set_seed(&mut self, seed: u64) {
        each_config!(self, c => c.seed = seed)
    }

    pub fn replicates(&self) -> usize {
        each_config!(self, c => c.replicates)
    }

    pub fn set_replicates(&mut self, replicates: usize) {
        each_config!(self, c => c.replicates = replicates)
    }

    pub fn run_settings(&self) -> &RunSettings {
        each_config!(self, c => &c.run)
    }

    pub fn run_settings_mut(&mut self) -> &mut RunSettings {
        each_config!(self, c => &mut c.run)
    }

    /// SHA-256 of the canonical JSON with execution-only settings removed.
    pub fn hash(&self) -> String {
        let mut canon = self.clone();
        *canon.run_settings_mut() = RunSettings::default();
        let bytes = serde_json::to_vec(&canon).expect("configs serialise");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates() < 2 {
            return Err(Error::Config(format!("replicates must be at least 2, got {}", self.replicates())));
        }
        if self.run_settings().threads == Some(0) {
            return Err(Error::Config("threads must be positive".into()));
        }
        each_config!(self, c => c.validate())
    }

    /// Run on a pool with the configured thread count.
    pub fn run(&self) -> Result<ResultTable> {
        self.validate()?;
        let threads = self.run_settings().threads;
        with_threads(threads, || match self {
            ExperimentConfig::RidgeCoverage(c) => run_ridge_coverage(c),
            ExperimentConfig::RidgeSpeedup(c) => run_ridge_speedup(c),
            ExperimentConfig::LdaSpeedup(c) => run_lda_speedup(c),
            ExperimentConfig::LimitLaw(c) => run_limit_law(c),
        })?
    }
}

/// Check that a table was produced by `cfg`.
pub fn verify(table: &ResultTable, cfg: &ExperimentConfig) -> Result<()> {
    let expected = cfg.hash();
    if table.metadata.config_hash != expected || table.metadata.experiment != cfg.name() {
        return Err(Error::Config(format!(
            "table was produced by {} with config {}, not {} with {}",
            table.metadata.experiment,
            table.metadata.config_hash,
            cfg.name(),
            expected
        )));
    }
    Ok(())
}

/// Run `f` on a dedicated rayon pool when a thread count is given.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Stream for replicate `r` of the sub-experiment `tag` (e.g. one grid point).
pub fn replicate_seed(master: u64, tag: u64, r: usize) -> SeedSpec {
    SeedSpec::new(SeedSpec::new(master, 0).derive(tag).master_seed, r as u64)
}

/// Evaluate `f` for every replicate in parallel; results come back in replicate order.
pub fn run_replicates<T, F>(count: usize, f: F) -> Vec<Result<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync,
{
    use rayon::prelude::*;
    (0..count).into_par_iter().map(|r| f(r)).collect()
}

/// Split replicate results into successes, counting failures and rejecting the run if
/// more than `max_fraction` failed. Non-numerical errors abort immediately.
pub(crate) fn collect_successes<T>(results: Vec<Result<T>>, max_fraction: f64, what: &str) -> Result<(Vec<T>, usize)> {
    let total = results.len();
    let mut ok = Vec::with_capacity(total);
    let mut failures = 0;
    for r in results {
        match r {
            Ok(v) => ok.push(v),
            Err(e) if e.is_numerical() => failures += 1,
            Err(e) => return Err(e),
        }
    }
    if failures as f64 > max_fraction * total as f64 || ok.len() < 2 {
        return Err(Error::NumericalFailure(format!(
            "{failures} of {total} {what} replicates failed (limit {:.1}%)",
            100.0 * max_fraction
        )));
    }
    Ok((ok, failures))
}

pub(crate) fn metadata(cfg_name: &str, hash: String, seed: u64, replicates: usize, failures: usize, start: std::time::Instant) -> TableMetadata {
    TableMetadata {
        experiment: cfg_name.to_string(),
        config_hash: hash,
        seed,
        replicates,
        failures,
        runtime_secs: start.elapsed().as_secs_f64(),
    }
}

pub(crate) fn mean_with_se(xs: &[f64]) -> (f64, f64) {
    let m = crate::stats::mean(xs);
    (m, (crate::stats::sample_variance(xs) / xs.len() as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_ignores_run_settings() {
        let mut a = ExperimentConfig::RidgeSpeedup(RidgeSpeedupConfig::default());
        let h = a.hash();
        a.run_settings_mut().threads = Some(3);
        a.run_settings_mut().out = Some("x.csv".into());
        assert_eq!(a.hash(), h);
        a.set_seed(a.seed() + 1);
        assert_ne!(a.hash(), h);
    }

    #[test]
    fn json_round_trip() {
        for cfg in [
            ExperimentConfig::RidgeCoverage(RidgeCoverageConfig::default()),
            ExperimentConfig::RidgeSpeedup(RidgeSpeedupConfig::default()),
            ExperimentConfig::LdaSpeedup(LdaSpeedupConfig::default()),
            ExperimentConfig::LimitLaw(LimitLawConfig::default()),
        ] {
            let back = ExperimentConfig::from_json(&cfg.to_json()).unwrap();
            assert_eq!(back, cfg);
        }
    }

    #[test]
    fn unknown_fields_rejected() {
        let err = ExperimentConfig::from_json(r#"{"experiment":"ridge-speedup","lambada":1.0}"#).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        let err = ExperimentConfig::from_json(r#"{"experiment":"nope"}"#).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn too_few_replicates() {
        let mut cfg = ExperimentConfig::LimitLaw(LimitLawConfig::default());
        cfg.set_replicates(1);
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    fn small(mut cfg: ExperimentConfig) -> ExperimentConfig {
        cfg.set_replicates(40);
        match &mut cfg {
            ExperimentConfig::RidgeCoverage(c) => {
                c.n_grid = vec![20, 40];
                c.target_replicates = 50;
            }
            ExperimentConfig::RidgeSpeedup(c) => c.n_grid = vec![20],
            ExperimentConfig::LdaSpeedup(c) => c.n_grid = vec![40],
            ExperimentConfig::LimitLaw(c) => {
                c.n = Some(40);
                c.limit_draws = 200;
            }
        }
        cfg
    }

    fn all_small() -> Vec<ExperimentConfig> {
        vec![
            small(ExperimentConfig::RidgeCoverage(RidgeCoverageConfig::default())),
            small(ExperimentConfig::RidgeSpeedup(RidgeSpeedupConfig::default())),
            small(ExperimentConfig::LdaSpeedup(LdaSpeedupConfig::default())),
            small(ExperimentConfig::LimitLaw(LimitLawConfig::default())),
            small(ExperimentConfig::LimitLaw(LimitLawConfig::noiseless())),
        ]
    }

    #[test]
    fn every_experiment_runs_and_replays_across_thread_counts() {
        for cfg in all_small() {
            let mut one = cfg.clone();
            one.run_settings_mut().threads = Some(1);
            let mut three = cfg.clone();
            three.run_settings_mut().threads = Some(3);
            let a = one.run().unwrap();
            let b = three.run().unwrap();
            assert_eq!(a.rows, b.rows, "{}", cfg.name());
            assert!(!a.rows.is_empty());
            assert!(a.rows.iter().all(|r| r.estimate.is_finite()));
            assert!(a.rows.iter().filter_map(|r| r.std_error).all(f64::is_finite));
            verify(&a, &cfg).unwrap();
        }
    }

    #[test]
    fn two_replicates_smoke() {
        let mut cfg = small(ExperimentConfig::RidgeCoverage(RidgeCoverageConfig::default()));
        cfg.set_replicates(2);
        let t = cfg.run().unwrap();
        assert!(t.rows.iter().filter_map(|r| r.std_error).all(f64::is_finite));
    }

    #[test]
    fn csv_round_trip_and_hash_check() {
        let cfg = small(ExperimentConfig::RidgeSpeedup(RidgeSpeedupConfig::default()));
        let t = cfg.run().unwrap();
        let back = ResultTable::from_csv(&t.to_csv()).unwrap();
        assert_eq!(back.rows, t.rows);
        verify(&back, &cfg).unwrap();
        let mut other = cfg.clone();
        other.set_seed(cfg.seed() + 1);
        assert!(verify(&back, &other).is_err());
    }

    #[test]
    fn speedup_includes_limit_row() {
        let cfg = small(ExperimentConfig::RidgeSpeedup(RidgeSpeedupConfig::default()));
        let t = cfg.run().unwrap();
        assert!((t.value(None, "n_var_split").unwrap() - 7.140024927).abs() < 1e-6);
        assert!((t.value(None, "speedup").unwrap() - 3.3617296).abs() < 1e-6);
    }
}
