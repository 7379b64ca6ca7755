//! Drive an external segmentation backend over the stdin/stdout protocol.
//! The backend here is a shell one-liner that echoes the manifest mask; a
//! second run shows a hung backend being killed at the timeout.
//!
//!     cargo run --example backend_protocol

use std::time::Duration;

use hipmetrics::pipeline::write_phantom_set;
use hipmetrics::pluginio::backend::{run_backend, BackendCommand, BackendRequest};
use hipmetrics::pluginio::manifest::{load_manifest, Modality};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    write_phantom_set(Modality::Ultrasound, 1, 3, dir.path())?;
    let manifest = load_manifest(&dir.path().join("manifest.json"))?;
    let case = &manifest.cases[0];

    let out = dir.path().join("backend");
    std::fs::create_dir_all(&out)?;
    let req = BackendRequest::for_case(case, &out);
    println!("request:\n{}", serde_json::to_string_pretty(&req)?);

    let echo = r#"mask=$(sed -n 's/.*"mask_path": *"\([^"]*\)".*/\1/p' | head -n 1)
printf '{"mask_path": "%s", "confidence": {"ilium_acetabulum": 0.97, "femoral_head": 0.99}, "backend_version": "echo-1"}' "$mask""#;
    let ok = run_backend(&BackendCommand::new("sh", vec!["-c".into(), echo.into()]), &req, Duration::from_secs(10));
    println!("echo backend: {ok:?}");

    let hang = BackendCommand::new("sh", vec!["-c".into(), "sleep 30".into()]);
    let t = std::time::Instant::now();
    let failed = run_backend(&hang, &req, Duration::from_millis(500));
    println!("hung backend after {:.1} s: {failed:?}", t.elapsed().as_secs_f64());
    Ok(())
}
