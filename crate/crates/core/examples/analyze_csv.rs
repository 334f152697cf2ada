//! Analyse a CSV file with header `x1..xd,y`. Pass a path, or run without
//! arguments to analyse a small generated file.
//!
//! ```sh
//! cargo run --example analyze_csv -- data.csv
//! ```

use std::fmt::Write as _;

use cvrisk::analyze::{analyze_csv, ModelSpec};
use cvrisk::{sample_dataset, GeneratorSpec, SeedSpec};

fn main() -> cvrisk::Result<()> {
    let path = match std::env::args().nth(1) {
        Some(p) => p.into(),
        None => {
            let gen = GeneratorSpec::toeplitz_ridge_design().build()?;
            let data = sample_dataset(&gen, 120, SeedSpec::new(3, 0))?;
            let mut text = String::from("x1,x2,x3,y\n");
            for obs in data.rows() {
                let f = obs.features;
                let _ = writeln!(text, "{},{},{},{}", f[0], f[1], f[2], obs.target());
            }
            let path = std::env::temp_dir().join("cvrisk_example.csv");
            std::fs::write(&path, text)?;
            path
        }
    };
    for model in [ModelSpec::Ridge { lambda: 1.0 }, ModelSpec::Mean] {
        let report = analyze_csv(&path, 5, model, 0.1)?;
        println!("{}", report.to_text());
    }
    Ok(())
}
