//! Measure alpha angle, coverage and Graf class on a coronal ultrasound mask.
//!
//!     cargo run --example ultrasound_alpha            # built-in phantom sweep
//!     cargo run --example ultrasound_alpha -- m.png   # labels 1 = ilium, 2 = head

use hipmetrics::phantom::{gen_us_phantom, UsPhantomSpec};
use hipmetrics::raster::LabelMask;
use hipmetrics::ultrasound::{analyze_us, CoverageMode, UsConfig, UsLabels};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = UsConfig { graf_class: true, ..UsConfig::default() };
    if let Some(path) = std::env::args().nth(1) {
        let mask = LabelMask::load_png(path.as_ref())?;
        let a = analyze_us(&mask, UsLabels::default(), &cfg)?;
        println!("{:?}", a.measurements);
        if let Some(m) = a.message {
            println!("{m}");
        }
        return Ok(());
    }

    println!("truth  measured  coverage  area-coverage  class");
    let area = UsConfig { coverage_mode: CoverageMode::Area, ..cfg };
    for alpha in [42.0, 48.0, 55.0, 62.0, 70.0] {
        let (mask, truth) = gen_us_phantom(&UsPhantomSpec::new(alpha, 0.6))?;
        let m = analyze_us(&mask, truth.labels, &cfg)?.measurements;
        let a = analyze_us(&mask, truth.labels, &area)?.measurements;
        println!(
            "{alpha:5.1}  {:8.2}  {:8.3}  {:13.3}  {}",
            m.alpha_deg.unwrap(),
            m.coverage.unwrap(),
            a.coverage.unwrap(),
            m.graf_class.unwrap().label()
        );
    }
    Ok(())
}
