//! Write a phantom manifest, run the batch pipeline on it and print the
//! validation tables.
//!
//!     cargo run --example batch_manifest -- /tmp/batch

use std::path::PathBuf;

use hipmetrics::pipeline::{run_batch, summary_line, write_phantom_set, RunConfig};
use hipmetrics::pluginio::manifest::{load_manifest, Modality};
use hipmetrics::validation::render_tables;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "batch".into()));
    write_phantom_set(Modality::Xray, 8, 11, &root.join("phantoms"))?;
    let manifest = load_manifest(&root.join("phantoms/manifest.json"))?;
    let cfg = RunConfig { workers: 4, ..RunConfig::default() };
    let outcome = run_batch(&manifest, &cfg, &root.join("out"))?;
    for r in &outcome.reports {
        println!("{}", summary_line(r));
    }
    print!("{}", render_tables(&outcome.validation));
    println!("reports and validation.json in {}", root.join("out").display());
    Ok(())
}
