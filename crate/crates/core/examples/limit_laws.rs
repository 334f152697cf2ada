//! Two settings where the CV risk is not asymptotically normal. For 1-NN on a
//! noiseless threshold problem `sqrt(n)` times the CV risk counts errors and has
//! a discrete limit. For the sample mean with zero-variance loss, `n (cv - 1)`
//! converges to a scaled chi-square mixture.

use cvrisk::limits::{
    draw_many, ks_distance, sample_noiseless_limit, simulate_noiseless_cv, sample_nn_limit, simulate_nn_cv,
    wasserstein1, EmpiricalDistribution,
};
use cvrisk::SeedSpec;

fn main() -> cvrisk::Result<()> {
    let draws = 2000;
    let root = SeedSpec::new(5, 0);

    let cv = draw_many(draws, root.derive(1), |s| Ok(simulate_nn_cv(2000, s)?.sqrt_n_cv))?;
    let lim = draw_many(draws, root.derive(2), |s| Ok(sample_nn_limit(&mut s.rng())))?;
    let (cv, lim) = (EmpiricalDistribution::new(cv)?, EmpiricalDistribution::new(lim)?);
    println!("1-NN: mean {:.3} vs limit {:.3}, W1 {:.4}", cv.mean(), lim.mean(), wasserstein1(&cv, &lim));

    for k in [2, 5] {
        let stat = draw_many(draws, root.derive(10 + k as u64), |s| simulate_noiseless_cv(500, k, s))?;
        let lim = draw_many(draws, root.derive(20 + k as u64), |s| sample_noiseless_limit(k, &mut s.rng()))?;
        let (stat, lim) = (EmpiricalDistribution::new(stat)?, EmpiricalDistribution::new(lim)?);
        println!(
            "mean, K={k}: mean {:.3} vs limit {:.3}, KS {:.3}",
            stat.mean(),
            lim.mean(),
            ks_distance(&stat, &lim)
        );
    }
    Ok(())
}
