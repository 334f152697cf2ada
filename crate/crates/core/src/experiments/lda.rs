use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{metadata, speedup_statistics, ExperimentConfig, ResultRow, ResultTable, RunSettings};
use crate::asymptotics::{lda_asymptotics, QuadratureConfig};
use crate::error::{Error, Result};
use crate::generators::{Density, Generator};
use crate::models::{LdaFitter, MeanScaling};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LdaSpeedupConfig {
    pub seed: u64,
    pub replicates: usize,
    pub n_grid: Vec<usize>,
    pub k: usize,
    /// Law of `z` given label 1.
    pub class1: Density,
    /// Law of `z` given label 0.
    pub class0: Density,
    pub scaling: MeanScaling,
    pub run: RunSettings,
}

impl Default for LdaSpeedupConfig {
    /// The fast regime, `Gamma(1, 10)` against `Gamma(1, 1)`.
    fn default() -> Self {
        Self {
            seed: 20_240_103,
            replicates: 10_000,
            n_grid: vec![40, 80, 160, 320, 640, 1280, 2560, 5120],
            k: 2,
            class1: Density::Gamma { shape: 1.0, scale: 10.0 },
            class0: Density::Gamma { shape: 1.0, scale: 1.0 },
            scaling: MeanScaling::HalfSample,
            run: RunSettings::default(),
        }
    }
}

impl LdaSpeedupConfig {
    /// The slow regime, `Gamma(10, 0.15)` against `Gamma(1, 1)`.
    pub fn slow() -> Self {
        Self {
            class1: Density::Gamma { shape: 10.0, scale: 0.15 },
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k != 2 {
            return Err(Error::Config(format!("the LDA experiment uses two folds, got k={}", self.k)));
        }
        if self.n_grid.is_empty() || self.n_grid.iter().any(|&n| n < 8) {
            return Err(Error::Config("n_grid must be non-empty with every n >= 8".into()));
        }
        self.class1.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.class0.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }
}

/// Fraction of replicates that may be redrawn for a missing class.
const MAX_REDRAW_FRACTION: f64 = 0.001;

/// Split and CV variances of the 0-1 risk of two-class LDA, plus the limiting row.
pub fn run_lda_speedup(cfg: &LdaSpeedupConfig) -> Result<ResultTable> {
    cfg.validate()?;
    let start = Instant::now();
    let gen = Generator::TwoClassMixture { class1: cfg.class1, class0: cfg.class0 };
    let fitter = LdaFitter::new(cfg.scaling);
    let mut rows = Vec::new();
    let mut redraws = 0;
    for (gi, &n) in cfg.n_grid.iter().enumerate() {
        let stats = speedup_statistics(&gen, &fitter, n, cfg.k, cfg.replicates, cfg.seed, gi as u64)?;
        redraws += stats.redraws;
        rows.extend(stats.rows());
    }
    let total = cfg.replicates * cfg.n_grid.len();
    if redraws as f64 > MAX_REDRAW_FRACTION * total as f64 {
        return Err(Error::NumericalFailure(format!(
            "{redraws} single-class redraws over {total} replicates exceeds {:.1}%",
            100.0 * MAX_REDRAW_FRACTION
        )));
    }
    let lim = lda_asymptotics(&cfg.class1, &cfg.class0, cfg.scaling, &QuadratureConfig::default())?;
    let (s, c) = lim.variance_pair();
    rows.push(ResultRow::new(None, "n_var_split", s, None));
    rows.push(ResultRow::new(None, "n_var_cv", c, None));
    rows.push(ResultRow::new(None, "speedup", lim.speedup()?, None));
    let wrapped = ExperimentConfig::LdaSpeedup(cfg.clone());
    Ok(ResultTable {
        metadata: metadata(wrapped.name(), wrapped.hash(), cfg.seed, cfg.replicates, redraws, start),
        rows,
    })
}
