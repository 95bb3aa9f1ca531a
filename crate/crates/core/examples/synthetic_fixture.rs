//! Write the three-scan synthetic fixture (MetaImage volumes plus an
//! annotations CSV) to a directory.
//!
//! cargo run --example synthetic_fixture -- /tmp/lungdet-fixture

use std::path::PathBuf;

use lungdet::synthetic::{fixture_specs, write_fixture};

fn main() -> lungdet::Result<()> {
    let root: PathBuf = std::env::args().nth(1).unwrap_or_else(|| "lungdet-fixture".into()).into();
    let specs = fixture_specs();
    let paths = write_fixture(&root, &specs, 0)?;
    for s in &specs {
        println!("{}  {:?} voxels, {} nodules", s.series_uid, s.dims, s.nodules.len());
    }
    println!("scans:       {}", paths.scans_dir.display());
    println!("annotations: {}", paths.annotations.display());
    Ok(())
}
