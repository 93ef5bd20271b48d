//! Regenerates the frozen oracle fixtures in `tests/fixtures`.
//!
//! cargo run --release -p dtn-probe-core --example generate_fixtures

use std::path::PathBuf;

use dtn_probe::oracles::fixtures::{standard_fixtures, Fixture};

fn main() -> dtn_probe::Result<()> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    std::fs::create_dir_all(&dir)?;
    for (name, spec, tol) in standard_fixtures() {
        let t = std::time::Instant::now();
        let fixture = Fixture::generate(&name, spec, tol)?;
        fixture.write(&dir.join(format!("{name}.json")))?;
        let err = fixture.observed_error()?;
        println!("{name}: {} values, fast-path error {err:.2e} (tolerance {tol:e}), {:.1} s", fixture.reference.len(), t.elapsed().as_secs_f64());
    }
    Ok(())
}
