use serde::{Deserialize, Serialize};

use super::{f_quantile, StatsError};

/// n cases (rows) by k raters (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct RatingTable {
    rows: Vec<Vec<f64>>,
}

impl RatingTable {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self, StatsError> {
        let n = rows.len();
        let k = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != k || r.iter().any(|v| !v.is_finite())) {
            return Err(StatsError::RaggedTable);
        }
        if n < 3 || k < 2 {
            return Err(StatsError::TableShape { n, k });
        }
        Ok(Self { rows })
    }

    /// Two raters given as parallel columns.
    pub fn from_pairs(a: &[f64], b: &[f64]) -> Result<Self, StatsError> {
        if a.len() != b.len() {
            return Err(StatsError::RaggedTable);
        }
        Self::new(a.iter().zip(b).map(|(x, y)| vec![*x, *y]).collect())
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn k(&self) -> usize {
        self.rows[0].len()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IccKind {
    AbsoluteAgreement,
    Consistency,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IccResult {
    pub icc: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub kind: IccKind,
    pub alpha_level: f64,
}

struct MeanSquares {
    msr: f64,
    msc: f64,
    mse: f64,
}

fn mean_squares(t: &RatingTable) -> MeanSquares {
    let (n, k) = (t.n() as f64, t.k() as f64);
    let grand = t.rows.iter().flatten().sum::<f64>() / (n * k);
    let sst: f64 = t.rows.iter().flatten().map(|v| (v - grand).powi(2)).sum();
    let ssr: f64 = t.rows.iter().map(|r| (r.iter().sum::<f64>() / k - grand).powi(2)).sum::<f64>() * k;
    let ssc: f64 = (0..t.k()).map(|j| (t.rows.iter().map(|r| r[j]).sum::<f64>() / n - grand).powi(2)).sum::<f64>() * n;
    // Clamp rounding noise; SSE is a sum of squares.
    let sse = (sst - ssr - ssc).max(0.0);
    MeanSquares { msr: ssr / (n - 1.0), msc: ssc / (k - 1.0), mse: sse / ((n - 1.0) * (k - 1.0)) }
}

/// Two-way single-measure ICC: consistency is ICC(C,1), absolute agreement
/// ICC(A,1), with F-based confidence intervals at level `1 - alpha_level`.
pub fn icc_single(t: &RatingTable, kind: IccKind, alpha_level: f64) -> Result<IccResult, StatsError> {
    if !(alpha_level > 0.0 && alpha_level < 1.0) {
        return Err(StatsError::DomainError(format!("alpha_level {alpha_level} outside (0, 1)")));
    }
    let first = t.rows[0][0];
    if t.rows.iter().flatten().all(|v| *v == first) {
        return Ok(IccResult { icc: 1.0, ci_low: 1.0, ci_high: 1.0, kind, alpha_level });
    }
    let (n, k) = (t.n() as f64, t.k() as f64);
    let MeanSquares { msr, msc, mse } = mean_squares(t);
    let denom = match kind {
        IccKind::Consistency => msr + (k - 1.0) * mse,
        IccKind::AbsoluteAgreement => msr + (k - 1.0) * mse + k / n * (msc - mse),
    };
    if denom == 0.0 {
        return Err(StatsError::DegenerateVariance);
    }
    let icc = (msr - mse) / denom;
    let q = 1.0 - alpha_level / 2.0;
    let (df_r, df_e) = (n - 1.0, (n - 1.0) * (k - 1.0));
    let (lo, hi) = match kind {
        IccKind::Consistency => {
            if mse == 0.0 {
                (1.0, 1.0)
            } else {
                let f = msr / mse;
                let fl = f / f_quantile(q, df_r, df_e)?;
                let fu = f * f_quantile(q, df_e, df_r)?;
                ((fl - 1.0) / (fl + k - 1.0), (fu - 1.0) / (fu + k - 1.0))
            }
        }
        IccKind::AbsoluteAgreement => {
            // Satterthwaite degrees of freedom for the denominator mean square.
            let a = k * icc;
            let b = n * (1.0 + (k - 1.0) * icc) - k * icc;
            let v = if mse == 0.0 {
                k - 1.0
            } else {
                let fc = msc / mse;
                let num = (k - 1.0) * (n - 1.0) * (a * fc + b).powi(2);
                let den = (n - 1.0) * (a * fc).powi(2) + b * b;
                let v = num / den;
                if v.is_finite() && v > 0.0 {
                    v
                } else {
                    df_e
                }
            };
            let fu = f_quantile(q, df_r, v)?;
            let fl = f_quantile(q, v, df_r)?;
            let spread = k * msc + (k * n - k - n) * mse;
            let low = n * (msr - fu * mse) / (fu * spread + n * msr);
            let high = n * (fl * msr - mse) / (spread + n * fl * msr);
            (low, high)
        }
    };
    // The F-based bounds are approximate; when the Satterthwaite df collapses
    // they can miss the estimate or come out NaN. Widen to contain it.
    let lo = if lo.is_nan() { -1.0 } else { lo.clamp(-1.0, 1.0).min(icc) };
    let hi = if hi.is_nan() { 1.0 } else { hi.clamp(-1.0, 1.0).max(icc) };
    Ok(IccResult { icc, ci_low: lo, ci_high: hi, kind, alpha_level })
}
