//! Load a shipped experiment config, shrink it, run it and check that the table
//! is tied to the exact settings that produced it.

use std::path::Path;

use cvrisk::experiments::{verify, ExperimentConfig, OutputFormat};

fn main() -> cvrisk::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/ridge_speedup.json");
    let mut cfg = ExperimentConfig::from_path(&path)?;
    cfg.set_replicates(300);
    cfg.run_settings_mut().threads = Some(2);

    let table = cfg.run()?;
    print!("{}", table.render(OutputFormat::Markdown));
    verify(&table, &cfg)?;
    println!("\nconfig hash {} ({:.1}s)", cfg.hash(), table.metadata.runtime_secs);
    Ok(())
}
