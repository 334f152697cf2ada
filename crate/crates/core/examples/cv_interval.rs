//! Two-fold CV risk of ridge regression on simulated data, with the swap-based
//! variance estimate and a 95% interval for the risk of a training-fold-sized fit.

use cvrisk::models::RidgeFitter;
use cvrisk::risk::cv_risk;
use cvrisk::variance::{s2_cv_ridge_fast, VarianceMethod, VarianceReport};
use cvrisk::{make_partition, sample_dataset, GeneratorSpec, SeedSpec};

fn main() -> cvrisk::Result<()> {
    let (n, k, lambda) = (400, 2, 1.0);
    let gen = GeneratorSpec::toeplitz_ridge_design().build()?;
    let data = sample_dataset(&gen, n, SeedSpec::new(7, 0))?;

    let risk = cv_risk(&data, &make_partition(n, k)?, &RidgeFitter::new(lambda)?)?;
    let s2 = s2_cv_ridge_fast(&data, k, lambda)?;
    let v = VarianceReport::new(&risk, s2, VarianceMethod::RidgeWoodbury, 0.05)?;

    println!("cv risk          {:.4}", risk.cv_risk);
    println!("split risk       {:.4}", risk.split_risk);
    println!("sigma_cross^2    {:.4}", v.sigma1_hat);
    println!("swap estimate    {:.4}", v.s2_cv_hat);
    println!("95% interval     [{:.4}, {:.4}]", v.ci_lower, v.ci_upper);
    Ok(())
}
