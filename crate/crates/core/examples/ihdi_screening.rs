//! Per-side IHDI confusion matrix with macro scores, and the pooled
//! normal/abnormal screening view where failed hips count as abnormal.
//!
//!     cargo run --example ihdi_screening

use hipmetrics::stats::{confusion, precision_recall_f1, screening_binarize, Averaging, Screen};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let expert: [u8; 10] = [1, 1, 1, 2, 2, 3, 1, 4, 1, 2];
    // Pipeline grades with status; status 0 carries no grade.
    let pipeline: [(Option<u8>, u8); 10] = [
        (Some(1), 1),
        (Some(1), 1),
        (Some(2), 1),
        (Some(2), 1),
        (Some(3), 1),
        (Some(3), 1),
        (None, 0),
        (Some(4), 1),
        (Some(1), 1),
        (Some(1), 1),
    ];

    let classes = [0u8, 1, 2, 3, 4];
    let graded: Vec<u8> = pipeline.iter().map(|(g, _)| g.unwrap_or(0)).collect();
    let m = confusion(&graded, &expert, &classes)?;
    println!("rows expert, columns pipeline, classes {classes:?}");
    for row in &m.counts {
        println!("  {row:?}");
    }
    let s = precision_recall_f1(&m, Averaging::Macro)?;
    println!("macro precision {:.3} recall {:.3} f1 {:.3}", s.precision, s.recall, s.f1);

    let truth = screening_binarize(&expert.map(|g| (Some(g), 1)));
    let pred = screening_binarize(&pipeline);
    let sm = confusion(&pred, &truth, &[Screen::Normal, Screen::Abnormal])?;
    let b = precision_recall_f1(&sm, Averaging::BinaryPositive(1))?;
    println!("screening {:?}: precision {:.3} recall {:.3} f1 {:.3}", sm.counts, b.precision, b.recall, b.f1);
    Ok(())
}
