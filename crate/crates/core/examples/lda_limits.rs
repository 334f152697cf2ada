//! Limits for two-fold CV of a nearest-mean classifier on two gamma classes:
//! one well separated pair and one heavily overlapping pair.

use cvrisk::asymptotics::{lda_asymptotics, QuadratureConfig};
use cvrisk::models::MeanScaling;
use cvrisk::Density;

fn main() -> cvrisk::Result<()> {
    let base = Density::gamma(1.0, 1.0)?;
    let cases = [("overlapping", Density::gamma(10.0, 0.15)?), ("separated", Density::gamma(1.0, 10.0)?)];
    for (name, other) in cases {
        let a = lda_asymptotics(&other, &base, MeanScaling::HalfSample, &QuadratureConfig::default())?;
        let (split, cv) = a.variance_pair();
        println!(
            "{name:<12} error {:.4}  n Var(split) {split:.4}  n Var(cv) {cv:.4}  ratio {:.4}",
            a.q,
            a.speedup()?
        );
    }
    Ok(())
}
