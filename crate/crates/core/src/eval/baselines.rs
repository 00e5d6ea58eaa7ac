use crate::error::{OsrError, Result};
use crate::evt::Verdict;
use crate::features::FeatureVector;
use crate::forest::{RandomForest, VoteRecord};

/// Thresholded vote confidence: unknown when `max votes / trees < threshold`.
pub fn rf_conf_verdict(votes: &VoteRecord, trees: usize, threshold: f64) -> Verdict {
    let max = votes.max() as f64;
    // max / trees < threshold, without the division's rounding.
    if threshold.mul_add(trees as f64, -max) > 0.0 {
        Verdict::Unknown
    } else {
        Verdict::Known(votes.argmax())
    }
}

pub fn baseline_rf_conf_naive(forest: &RandomForest, q: &FeatureVector, threshold: f64) -> Result<Verdict> {
    Ok(rf_conf_verdict(&forest.vote(q)?, forest.num_trees(), threshold))
}

/// Unknown when the largest probability is below `threshold`; ties go to the lowest class.
pub fn softmax_verdict(row: &[f64], threshold: f64) -> Verdict {
    let mut best = 0;
    for (i, &p) in row.iter().enumerate() {
        if p > row[best] {
            best = i;
        }
    }
    match row.get(best) {
        Some(&p) if p >= threshold => Verdict::Known(best),
        _ => Verdict::Unknown,
    }
}

pub fn baseline_softmax_naive(rows: &[Vec<f64>], threshold: f64) -> Vec<Verdict> {
    rows.iter().map(|r| softmax_verdict(r, threshold)).collect()
}

/// Per-sample class probabilities, one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxScores {
    pub rows: Vec<Vec<f64>>,
}

impl SoftmaxScores {
    pub fn num_classes(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }
}

/// Parses a comma-separated probability table. A first record that is not
/// numeric is taken as a header. Every row must have the same width,
/// non-negative entries and sum to 1 within `1e-6`.
pub fn parse_softmax_csv(text: &str) -> Result<SoftmaxScores> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (n, record) in reader.records().enumerate() {
        let record = record.map_err(|e| OsrError::Csv {
            line: e.position().map_or(n + 1, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(n + 1, |p| p.line() as usize);
        let err = |message: String| OsrError::Csv { line, message };
        let parsed: std::result::Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        let row = match parsed {
            Ok(row) => row,
            Err(_) if n == 0 => continue,
            Err(e) => return Err(err(e.to_string())),
        };
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(err(format!("expected {} columns, found {}", first.len(), row.len())));
            }
        }
        if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(err("probabilities must be finite and non-negative".into()));
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(err(format!("row sums to {sum}")));
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(OsrError::EmptyData);
    }
    Ok(SoftmaxScores { rows })
}
