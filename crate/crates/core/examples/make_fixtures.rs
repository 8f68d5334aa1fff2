//! Regenerates the committed files under `fixtures/` from the synthetic
//! generators. The output is deterministic; a unit test fails when the
//! committed copies drift.

use std::fs;
use std::path::Path;

fn main() -> std::io::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    fs::create_dir_all(&dir)?;
    for (name, text) in gazekex::synthetic::fixture_files() {
        fs::write(dir.join(name), &text)?;
        println!("{name}: {} lines", text.lines().count());
    }
    Ok(())
}
