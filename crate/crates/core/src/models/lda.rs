use serde::{Deserialize, Serialize};

use super::{Fitter, Hypothesis, LossKind};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::stats::pairwise_sum;

/// How the per-class means are normalised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum MeanScaling {
    /// `(2/m) sum z 1{y = c}`: the class sum over half the training size.
    #[default]
    HalfSample,
    /// Ordinary within-class sample means.
    WithinClass,
}

/// Univariate two-class nearest-mean classifier.
#[derive(Debug, Clone, Copy, Default)]
pub struct LdaFitter {
    pub scaling: MeanScaling,
    pub loss: Option<LossKind>,
}

impl LdaFitter {
    pub fn new(scaling: MeanScaling) -> Self {
        Self { scaling, loss: None }
    }
}

pub fn fit_lda(data: &Dataset, rows: &[usize], scaling: MeanScaling) -> Result<Hypothesis> {
    let mut z1 = Vec::new();
    let mut z0 = Vec::new();
    for &i in rows {
        let obs = data.row(i);
        match obs.label() {
            Some(1) => z1.push(obs.features[0]),
            Some(_) => z0.push(obs.features[0]),
            None => return Err(Error::invalid("LDA needs class labels")),
        }
    }
    if z1.is_empty() || z0.is_empty() {
        return Err(Error::DegenerateFit(format!(
            "training set has {} class-1 and {} class-0 points",
            z1.len(),
            z0.len()
        )));
    }
    let (d1, d0) = match scaling {
        MeanScaling::HalfSample => {
            let half = rows.len() as f64 / 2.0;
            (half, half)
        }
        MeanScaling::WithinClass => (z1.len() as f64, z0.len() as f64),
    };
    Ok(Hypothesis::MeanPair {
        class1: pairwise_sum(&z1) / d1,
        class0: pairwise_sum(&z0) / d0,
    })
}

impl Fitter for LdaFitter {
    fn fit(&self, data: &Dataset, rows: &[usize]) -> Result<Hypothesis> {
        fit_lda(data, rows, self.scaling)
    }

    fn evaluation_loss(&self) -> LossKind {
        self.loss.unwrap_or(LossKind::ZeroOne)
    }

    fn training_loss(&self) -> &'static str {
        match self.scaling {
            MeanScaling::HalfSample => "class-sum-half-sample",
            MeanScaling::WithinClass => "class-mean",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Dataset {
        Dataset::classification(1, vec![0.0, 2.0, 4.0, 6.0], vec![1, 1, 0, 0]).unwrap()
    }

    #[test]
    fn balanced_means_agree_across_scalings() {
        for s in [MeanScaling::HalfSample, MeanScaling::WithinClass] {
            let h = fit_lda(&toy(), &[0, 1, 2, 3], s).unwrap();
            assert_eq!(h, Hypothesis::MeanPair { class1: 1.0, class0: 5.0 });
        }
    }

    #[test]
    fn unbalanced_scalings_differ() {
        let h = fit_lda(&toy(), &[0, 2, 3], MeanScaling::HalfSample).unwrap();
        // 2/3 * 0 and 2/3 * 10
        assert_eq!(h, Hypothesis::MeanPair { class1: 0.0, class0: 20.0 / 3.0 });
        let h = fit_lda(&toy(), &[0, 2, 3], MeanScaling::WithinClass).unwrap();
        assert_eq!(h, Hypothesis::MeanPair { class1: 0.0, class0: 5.0 });
    }

    #[test]
    fn missing_class_is_degenerate() {
        let err = fit_lda(&toy(), &[0, 1], MeanScaling::WithinClass).unwrap_err();
        assert!(matches!(err, Error::DegenerateFit(_)));
    }
}
