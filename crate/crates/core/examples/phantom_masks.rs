//! Generate one ultrasound and one X-ray phantom mask with known ground truth.
//!
//!     cargo run --example phantom_masks -- /tmp/phantoms

use std::path::PathBuf;

use hipmetrics::phantom::{gen_us_phantom, gen_xray_phantom, UsPhantomSpec, XrayPhantomSpec, XraySideSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "phantoms".into()));
    std::fs::create_dir_all(&dir)?;

    let mut us = UsPhantomSpec::new(58.0, 0.52);
    us.rotation_deg = 8.0;
    let (mask, truth) = gen_us_phantom(&us)?;
    mask.save_png(&dir.join("us.png"))?;
    println!(
        "us.png   alpha {:.1} deg, coverage {:.3}, rim at ({:.1}, {:.1})",
        truth.alpha_deg, truth.coverage, truth.landmarks.rim.x, truth.landmarks.rim.y
    );

    let xr = XrayPhantomSpec::new(XraySideSpec::new(32.0, -5.0, 2), XraySideSpec::new(21.0, 28.0, 1));
    let (mask, truth) = gen_xray_phantom(&xr)?;
    mask.save_png(&dir.join("xray.png"))?;
    for (name, t) in [("left", &truth.left), ("right", &truth.right)] {
        println!("xray.png {name:5} AI {:.1} deg, Wiberg {:.1} deg, IHDI {}", t.acetabular_index_deg, t.wiberg_deg, t.ihdi_grade);
    }
    Ok(())
}
