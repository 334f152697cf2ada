//! Limiting variances of split and CV risk for ridge regression, and how the
//! advantage of CV grows with the number of folds.

use cvrisk::asymptotics::{ridge_asymptotics, RidgeDesign};
use cvrisk::{Generator, GeneratorSpec};

fn main() -> cvrisk::Result<()> {
    let Generator::GaussianLinear(g) = GeneratorSpec::toeplitz_ridge_design().build()? else {
        unreachable!()
    };
    for lambda in [0.1, 1.0] {
        let a = ridge_asymptotics(&g.covariance, g.noise_variance, &g.theta, lambda, RidgeDesign::Gaussian)?;
        let q = a.quantities;
        println!(
            "lambda {lambda}: sigma1^2 {:.4}  sigma2^2 {:.4}  rho {:.4}  sigma_cv^2 {:.4}",
            q.sigma1_sq, q.sigma2_sq, q.rho, q.sigma_cv_sq
        );
        for k in [2, 5, 10] {
            let s = q.speedup(k)?;
            println!("  K={k:<2}  n Var(split) {:.3}  variance ratio {:.3}", q.split_variance(k), s.variance_ratio);
        }
    }
    Ok(())
}
