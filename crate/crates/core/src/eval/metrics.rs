use crate::error::{OsrError, Result};
use crate::evt::Verdict;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ClassScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Test samples whose true outcome is this class.
    pub support: usize,
    /// Samples predicted as this class.
    pub predicted: usize,
}

/// Scores over `K + 1` outcome classes; index `K` is unknown.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct F1Report {
    pub num_known: usize,
    /// `confusion[truth][predicted]`.
    pub confusion: Vec<Vec<usize>>,
    pub per_class: Vec<ClassScore>,
    /// Mean F over outcome classes that occur in the truth or the predictions.
    pub macro_f1: f64,
    /// Mean F over the known classes present.
    pub macro_f1_known: f64,
    pub averaged_classes: Vec<usize>,
}

pub fn outcome_index(verdict: Verdict, num_known: usize) -> usize {
    verdict.class().unwrap_or(num_known)
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Precision, recall and F per outcome class, with zero denominators scored 0.
pub fn macro_f1(predictions: &[Verdict], truth: &[Option<usize>], num_known: usize) -> Result<F1Report> {
    if predictions.len() != truth.len() {
        return Err(OsrError::LengthMismatch {
            what: "predictions vs truth",
            left: predictions.len(),
            right: truth.len(),
        });
    }
    let n = num_known + 1;
    let mut confusion = vec![vec![0usize; n]; n];
    for (&p, &t) in predictions.iter().zip(truth) {
        let p = outcome_index(p, num_known);
        let t = t.unwrap_or(num_known);
        if p >= n || t >= n {
            return Err(OsrError::LabelOutOfRange {
                label: p.max(t),
                classes: num_known,
            });
        }
        confusion[t][p] += 1;
    }
    let per_class: Vec<ClassScore> = (0..n)
        .map(|c| {
            let tp = confusion[c][c];
            let support: usize = confusion[c].iter().sum();
            let predicted: usize = confusion.iter().map(|row| row[c]).sum();
            let precision = ratio(tp, predicted);
            let recall = ratio(tp, support);
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            ClassScore {
                precision,
                recall,
                f1,
                support,
                predicted,
            }
        })
        .collect();
    let averaged_classes: Vec<usize> = (0..n)
        .filter(|&c| per_class[c].support + per_class[c].predicted > 0)
        .collect();
    let mean = |classes: &mut dyn Iterator<Item = usize>| {
        let (sum, count) = classes.fold((0.0, 0usize), |(s, k), c| (s + per_class[c].f1, k + 1));
        if count == 0 {
            0.0
        } else {
            sum / count as f64
        }
    };
    let macro_f1 = mean(&mut averaged_classes.iter().copied());
    let macro_f1_known = mean(&mut averaged_classes.iter().copied().filter(|&c| c < num_known));
    Ok(F1Report {
        num_known,
        confusion,
        per_class,
        macro_f1,
        macro_f1_known,
        averaged_classes,
    })
}

/// Sample mean and standard deviation (`n - 1` denominator; 0 for one value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
