//! Runs the fixture ablation grid into a temporary directory and prints the
//! resulting table.

use std::path::Path;

use gazekex::pipeline::{ablate, RunConfig};

fn main() -> gazekex::Result<()> {
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/run.toml");
    let mut cfg = RunConfig::load(&config)?;
    cfg.seeds.truncate(1);
    let out = std::env::temp_dir().join("gazekex-ablation-example");
    let table = ablate(&cfg, &out)?;
    print!("{}", table.to_tsv());
    println!("written to {}", out.join("ablation").display());
    Ok(())
}
