use std::fmt::Debug;

use serde::{Deserialize, Serialize};

use super::StatsError;

/// Rows are truth, columns are predictions, both in `classes` order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix<T> {
    pub classes: Vec<T>,
    pub counts: Vec<Vec<u64>>,
}

impl<T> ConfusionMatrix<T> {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_sum(&self, i: usize) -> u64 {
        self.counts[i].iter().sum()
    }

    pub fn col_sum(&self, j: usize) -> u64 {
        self.counts.iter().map(|r| r[j]).sum()
    }
}

pub fn confusion<T: PartialEq + Clone + Debug>(pred: &[T], truth: &[T], classes: &[T]) -> Result<ConfusionMatrix<T>, StatsError> {
    if pred.len() != truth.len() {
        return Err(StatsError::ShapeMismatch(format!("{} predictions vs {} truths", pred.len(), truth.len())));
    }
    let index = |v: &T| classes.iter().position(|c| c == v).ok_or_else(|| StatsError::UnknownLabel(format!("{v:?}")));
    let mut counts = vec![vec![0u64; classes.len()]; classes.len()];
    for (p, t) in pred.iter().zip(truth) {
        counts[index(t)?][index(p)?] += 1;
    }
    Ok(ConfusionMatrix { classes: classes.to_vec(), counts })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Averaging {
    /// 2x2 matrix; scores for the class at this index.
    BinaryPositive(usize),
    /// Unweighted mean over classes that occur in truth or predictions.
    Macro,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Some precision or recall had a zero denominator and was set to 0.
    pub zero_division: bool,
}

fn ratio(num: u64, den: u64, flag: &mut bool) -> f64 {
    if den == 0 {
        *flag = true;
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn class_scores<T>(m: &ConfusionMatrix<T>, c: usize) -> Scores {
    let mut zero_division = false;
    let tp = m.counts[c][c];
    let precision = ratio(tp, m.col_sum(c), &mut zero_division);
    let recall = ratio(tp, m.row_sum(c), &mut zero_division);
    let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
    Scores { precision, recall, f1, zero_division }
}

pub fn precision_recall_f1<T>(m: &ConfusionMatrix<T>, averaging: Averaging) -> Result<Scores, StatsError> {
    let k = m.classes.len();
    if m.counts.len() != k || m.counts.iter().any(|r| r.len() != k) {
        return Err(StatsError::ShapeMismatch("counts are not square over the classes".into()));
    }
    match averaging {
        Averaging::BinaryPositive(pos) => {
            if k != 2 || pos > 1 {
                return Err(StatsError::ShapeMismatch(format!("binary scoring needs a 2x2 matrix (got {k}x{k}, positive {pos})")));
            }
            Ok(class_scores(m, pos))
        }
        Averaging::Macro => {
            let present: Vec<usize> = (0..k).filter(|&c| m.row_sum(c) + m.col_sum(c) > 0).collect();
            if present.is_empty() {
                return Ok(Scores { precision: 0.0, recall: 0.0, f1: 0.0, zero_division: true });
            }
            let per: Vec<Scores> = present.iter().map(|&c| class_scores(m, c)).collect();
            let mean = |f: fn(&Scores) -> f64| per.iter().map(f).sum::<f64>() / per.len() as f64;
            Ok(Scores {
                precision: mean(|s| s.precision),
                recall: mean(|s| s.recall),
                f1: mean(|s| s.f1),
                zero_division: per.iter().any(|s| s.zero_division),
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Screen {
    Normal,
    Abnormal,
}

/// Grade 1 vs grades 2-4. A processing failure (status 0) cannot be called
/// normal, so it counts as abnormal.
pub fn screening_binarize(items: &[(Option<u8>, u8)]) -> Vec<Screen> {
    items
        .iter()
        .map(|(grade, status)| match (status, grade) {
            (1, Some(1)) => Screen::Normal,
            _ => Screen::Abnormal,
        })
        .collect()
}
