//! Single-rater two-way ICC (absolute agreement and consistency) with
//! confidence intervals, for a pipeline against one expert.
//!
//!     cargo run --example icc_agreement

use hipmetrics::stats::{f_quantile, icc_single, IccKind, RatingTable};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let expert = [61.0, 55.5, 48.0, 66.2, 58.4, 43.9, 70.1, 52.3];
    // A pipeline reading consistently 1.5 deg high.
    let pipeline: Vec<f64> = expert.iter().zip([0.3, -0.4, 0.2, 0.0, -0.3, 0.5, -0.1, 0.1]).map(|(e, n)| e + 1.5 + n).collect();
    let table = RatingTable::from_pairs(&pipeline, &expert)?;

    for kind in [IccKind::AbsoluteAgreement, IccKind::Consistency] {
        let r = icc_single(&table, kind, 0.05)?;
        println!("{kind:?}: ICC {:.4}, 95% CI [{:.4}, {:.4}]", r.icc, r.ci_low, r.ci_high);
    }
    println!("the offset lowers absolute agreement but not consistency");
    println!("F(0.975; {}, {}) = {:.4}", table.n() - 1, table.n() - 1, f_quantile(0.975, (table.n() - 1) as f64, (table.n() - 1) as f64)?);
    Ok(())
}
