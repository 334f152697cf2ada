//! Replace one training point and update the ridge fit by a rank-two correction
//! instead of refitting from scratch.

use cvrisk::models::{fit_ridge, Hypothesis};
use cvrisk::variance::RidgeSwapState;
use cvrisk::{sample_dataset, GeneratorSpec, SeedSpec};
use nalgebra::{DMatrix, DVector};

fn main() -> cvrisk::Result<()> {
    let gen = GeneratorSpec::toeplitz_ridge_design().build()?;
    let train = sample_dataset(&gen, 200, SeedSpec::new(11, 0))?;
    let fresh = sample_dataset(&gen, 2, SeedSpec::new(11, 1))?;
    let lambda = 0.5;
    let rows: Vec<usize> = (0..train.n()).collect();

    let state = RidgeSwapState::new(&train, &rows, lambda)?;
    let swapped = state.swap_one(&train, 17, fresh.row(0))?;

    // Direct refit on the modified sample.
    let d = train.dim();
    let mut z = DMatrix::from_row_slice(train.n(), d, train.features());
    let mut y = DVector::from_iterator(train.n(), train.rows().map(|o| o.target()));
    z.row_mut(17).copy_from_slice(fresh.feature_row(0));
    y[17] = fresh.row(0).target();
    let refit = fit_ridge(&z, &y, lambda)?;

    if let (Hypothesis::Linear(a), Hypothesis::Linear(b)) = (&swapped, &refit) {
        println!("updated  {:.6?}", a.as_slice());
        println!("refit    {:.6?}", b.as_slice());
        println!("max diff {:.2e}", (a - b).amax());
    }
    Ok(())
}
