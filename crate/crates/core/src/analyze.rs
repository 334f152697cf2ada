//! Cross-validated risk and a normal confidence interval for a user-supplied CSV.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::folds::make_partition;
use crate::models::{LdaFitter, LossKind, MeanFitter, MeanScaling, RidgeFitter};
use crate::risk::{cv_risk, RiskReport};
use crate::variance::{s2_cv_generic, s2_cv_ridge_fast, VarianceMethod, VarianceReport};

/// Model fitted on each training fold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum ModelSpec {
    /// Ridge regression with square loss.
    Ridge { lambda: f64 },
    /// Sample mean of the response (or of `x1` without one) under square loss.
    Mean,
    /// Two-class LDA with 0-1 loss; the response must be 0/1.
    Lda { scaling: MeanScaling },
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::Ridge { .. } => "ridge",
            ModelSpec::Mean => "mean",
            ModelSpec::Lda { .. } => "lda",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalyzeReport {
    pub model: ModelSpec,
    pub n: usize,
    pub k: usize,
    pub cv_risk: f64,
    pub split_risk: f64,
    /// Average within-fold variance of the held-out losses.
    pub sigma_cross_sq: f64,
    pub variance: VarianceReport,
    #[serde(skip)]
    pub risk: RiskReport,
}

impl AnalyzeReport {
    fn entries(&self) -> Vec<(&'static str, String)> {
        let v = &self.variance;
        vec![
            ("model", self.model.name().to_string()),
            ("n", self.n.to_string()),
            ("k", self.k.to_string()),
            ("cv_risk", format!("{:?}", self.cv_risk)),
            ("split_risk", format!("{:?}", self.split_risk)),
            ("sigma_cross_sq", format!("{:?}", self.sigma_cross_sq)),
            ("s2_cv", format!("{:?}", v.s2_cv_hat)),
            ("variance_method", match v.method {
                VarianceMethod::GenericRefit => "generic-refit".into(),
                VarianceMethod::RidgeWoodbury => "ridge-woodbury".into(),
            }),
            ("level", format!("{:?}", 1.0 - v.alpha)),
            ("ci_lower", format!("{:?}", v.ci_lower)),
            ("ci_upper", format!("{:?}", v.ci_upper)),
        ]
    }

    /// Two-column `statistic,value` CSV.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("statistic,value\n");
        for (k, v) in self.entries() {
            let _ = writeln!(out, "{k},{v}");
        }
        out
    }

    /// Aligned plain-text table.
    pub fn to_text(&self) -> String {
        let entries = self.entries();
        let width = entries.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        let mut out = String::new();
        for (k, v) in entries {
            let _ = writeln!(out, "{k:<width$}  {v}");
        }
        out
    }
}

/// Analyse an already loaded dataset.
pub fn analyze_dataset(data: Dataset, k: usize, model: ModelSpec, alpha: f64) -> Result<AnalyzeReport> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha must lie in (0,1), got {alpha}")));
    }
    let n = data.n();
    let p = make_partition(n, k)?;
    let (risk, s2, method) = match model {
        ModelSpec::Ridge { lambda } => {
            let f = RidgeFitter::new(lambda)?;
            (cv_risk(&data, &p, &f)?, s2_cv_ridge_fast(&data, k, lambda)?, VarianceMethod::RidgeWoodbury)
        }
        ModelSpec::Mean => {
            let f = MeanFitter::new(LossKind::Square);
            (cv_risk(&data, &p, &f)?, s2_cv_generic(&data, k, &f)?, VarianceMethod::GenericRefit)
        }
        ModelSpec::Lda { scaling } => {
            let data = data.into_labeled()?;
            let f = LdaFitter::new(scaling);
            (cv_risk(&data, &p, &f)?, s2_cv_generic(&data, k, &f)?, VarianceMethod::GenericRefit)
        }
    };
    let variance = VarianceReport::new(&risk, s2, method, alpha)?;
    Ok(AnalyzeReport {
        model,
        n,
        k,
        cv_risk: risk.cv_risk,
        split_risk: risk.split_risk,
        sigma_cross_sq: variance.sigma1_hat,
        variance,
        risk,
    })
}

/// Read `path` (header `x1..xd` and optional `y`) and analyse it.
pub fn analyze_csv(path: impl AsRef<Path>, k: usize, model: ModelSpec, alpha: f64) -> Result<AnalyzeReport> {
    analyze_dataset(Dataset::from_csv_path(path)?, k, model, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{sample_dataset, GeneratorSpec};
    use crate::rng::SeedSpec;
    use crate::variance::confidence_interval;

    #[test]
    fn constant_response_gives_zero_interval() {
        let csv = "x1,y\n".to_string() + &(0..10).map(|i| format!("{i},3\n")).collect::<String>();
        let data = Dataset::from_csv_reader(csv.as_bytes()).unwrap();
        let r = analyze_dataset(data, 2, ModelSpec::Mean, 0.05).unwrap();
        assert_eq!(r.cv_risk, 0.0);
        assert_eq!((r.variance.ci_lower, r.variance.ci_upper), (0.0, 0.0));
    }

    #[test]
    fn ridge_matches_library_calls() {
        let gen = GeneratorSpec::toeplitz_ridge_design().build().unwrap();
        let data = sample_dataset(&gen, 40, SeedSpec::new(5, 0)).unwrap();
        let r = analyze_dataset(data.clone(), 2, ModelSpec::Ridge { lambda: 0.3 }, 0.1).unwrap();
        let rep = cv_risk(&data, &make_partition(40, 2).unwrap(), &RidgeFitter::new(0.3).unwrap()).unwrap();
        let s2 = s2_cv_ridge_fast(&data, 2, 0.3).unwrap();
        assert_eq!(r.cv_risk, rep.cv_risk);
        assert_eq!(r.variance.s2_cv_hat, s2);
        assert_eq!((r.variance.ci_lower, r.variance.ci_upper), confidence_interval(rep.cv_risk, s2, 40, 0.1).unwrap());
        assert!(r.to_csv().lines().any(|l| l.starts_with("variance_method,ridge-woodbury")));
    }

    #[test]
    fn lda_reports_missing_class_fold() {
        let csv = "x1,y\n1,1\n2,1\n3,1\n4,1\n5,0\n6,0\n7,0\n8,0\n";
        let data = Dataset::from_csv_reader(csv.as_bytes()).unwrap();
        let err = analyze_dataset(data, 2, ModelSpec::Lda { scaling: MeanScaling::HalfSample }, 0.05).unwrap_err();
        assert!(matches!(err, Error::Fold { .. }), "{err}");
        assert!(err.to_string().starts_with("fold "));
    }

    #[test]
    fn text_table_is_aligned() {
        let csv = "x1\n1\n2\n3\n5\n8\n13\n";
        let data = Dataset::from_csv_reader(csv.as_bytes()).unwrap();
        let text = analyze_dataset(data, 3, ModelSpec::Mean, 0.05).unwrap().to_text();
        let cols: Vec<usize> = text.lines().map(|l| l.find("  ").unwrap()).collect();
        let starts: Vec<usize> = text.lines().map(|l| l.len() - l.trim_start_matches(|c: char| c != ' ').trim_start().len()).collect();
        assert!(cols.iter().all(|&c| c <= starts[0]));
        assert!(starts.windows(2).all(|w| w[0] == w[1]));
    }
}
