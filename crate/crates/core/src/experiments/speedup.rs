use super::{replicate_seed, run_replicates, ResultRow};
use crate::error::{Error, Result};
use crate::folds::make_partition;
use crate::generators::Generator;
use crate::models::Fitter;
use crate::risk::cv_risk;
use crate::stats::{variance_ratio_with_se, variance_with_se};

/// Paired split and CV risks over replicates at one sample size.
#[derive(Debug, Clone)]
pub struct SpeedupStatistics {
    pub n: usize,
    pub split: Vec<f64>,
    pub cv: Vec<f64>,
    /// Datasets redrawn because a training fold was degenerate.
    pub redraws: usize,
}

impl SpeedupStatistics {
    /// `(n Var split, se)`.
    pub fn n_var_split(&self) -> (f64, f64) {
        let (v, se) = variance_with_se(&self.split);
        (self.n as f64 * v, self.n as f64 * se)
    }

    pub fn n_var_cv(&self) -> (f64, f64) {
        let (v, se) = variance_with_se(&self.cv);
        (self.n as f64 * v, self.n as f64 * se)
    }

    /// `Var split / Var cv` with a delta-method SE.
    pub fn speedup(&self) -> (f64, f64) {
        variance_ratio_with_se(&self.split, &self.cv)
    }

    pub fn rows(&self) -> Vec<ResultRow> {
        let n = Some(self.n);
        let (s, s_se) = self.n_var_split();
        let (c, c_se) = self.n_var_cv();
        let (r, r_se) = self.speedup();
        vec![
            ResultRow::new(n, "n_var_split", s, Some(s_se)),
            ResultRow::new(n, "n_var_cv", c, Some(c_se)),
            ResultRow::new(n, "speedup", r, Some(r_se)),
        ]
    }
}

const MAX_REDRAWS: usize = 50;

/// Replicate `(split risk, CV risk)` on fresh datasets of size `n` with `k` contiguous folds.
/// A dataset whose folds cannot be fitted (e.g. a class missing) is redrawn.
pub fn speedup_statistics<F: Fitter + ?Sized>(
    gen: &Generator,
    fitter: &F,
    n: usize,
    k: usize,
    replicates: usize,
    master_seed: u64,
    tag: u64,
) -> Result<SpeedupStatistics> {
    let p = make_partition(n, k)?;
    let results = run_replicates(replicates, |r| {
        let seed = replicate_seed(master_seed, tag, r);
        for attempt in 0..MAX_REDRAWS {
            let s = if attempt == 0 { seed } else { seed.derive(attempt as u64) };
            let data = gen.sample(n, &mut s.rng())?;
            match cv_risk(&data, &p, fitter) {
                Ok(rep) => return Ok((rep.split_risk, rep.cv_risk, attempt)),
                Err(e) if matches!(e.root(), Error::DegenerateFit(_)) => continue,
                Err(e) => return Err(e),
            }
        }
        Err(Error::DegenerateFit(format!("replicate {r}: {MAX_REDRAWS} degenerate draws in a row")))
    });
    let mut split = Vec::with_capacity(replicates);
    let mut cv = Vec::with_capacity(replicates);
    let mut redraws = 0;
    for res in results {
        let (s, c, a) = res?;
        split.push(s);
        cv.push(c);
        redraws += a;
    }
    Ok(SpeedupStatistics { n, split, cv, redraws })
}
