use super::{Fitter, Hypothesis, LossKind};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::stats::pairwise_sum;

/// Sample mean of the scalar target.
#[derive(Debug, Clone, Copy)]
pub struct MeanFitter {
    pub loss: LossKind,
}

impl MeanFitter {
    pub fn new(loss: LossKind) -> Self {
        Self { loss }
    }
}

impl Fitter for MeanFitter {
    fn fit(&self, data: &Dataset, rows: &[usize]) -> Result<Hypothesis> {
        if rows.is_empty() {
            return Err(Error::invalid("mean of an empty training set"));
        }
        let vals: Vec<f64> = rows.iter().map(|&i| data.row(i).target()).collect();
        Ok(Hypothesis::Mean(pairwise_sum(&vals) / vals.len() as f64))
    }

    fn evaluation_loss(&self) -> LossKind {
        self.loss
    }

    fn training_loss(&self) -> &'static str {
        "squared-deviation"
    }
}
