//! Acetabular index, Wiberg angle and IHDI grade for both hips of an AP
//! pelvis mask, with the Hilgenreiner/Perkin construction.
//!
//!     cargo run --example xray_ihdi

use hipmetrics::phantom::{gen_xray_phantom, XrayPhantomSpec, XraySideSpec};
use hipmetrics::xray::{analyze_xray, Side, XrayConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = XrayPhantomSpec::new(XraySideSpec::new(34.0, -12.0, 3), XraySideSpec::new(23.0, 26.0, 1));
    let (mask, truth) = gen_xray_phantom(&spec)?;
    let a = analyze_xray(&mask, truth.labels, &XrayConfig::default());

    let pc = a.construction.as_ref().ok_or("pelvis construction failed")?;
    let d = pc.hilgenreiner.direction;
    println!("Hilgenreiner line tilt {:.2} deg", (d.y / d.x).atan().to_degrees());
    for side in Side::BOTH {
        let m = a.measurements.side(side);
        let t = truth.side(side);
        println!(
            "{:5}  AI {:5.1} (truth {:5.1})  Wiberg {:5.1} (truth {:5.1})  IHDI {:?} (truth {})",
            side.name(),
            m.acetabular_index_deg.unwrap_or(f64::NAN),
            t.acetabular_index_deg,
            m.wiberg_deg.unwrap_or(f64::NAN),
            t.wiberg_deg,
            m.ihdi_grade,
            t.ihdi_grade
        );
    }
    Ok(())
}
