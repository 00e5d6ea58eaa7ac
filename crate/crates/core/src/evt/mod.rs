//! Vote-based extreme-value model.
//!
//! For each known class `k`, the calibration samples the forest classifies
//! correctly as `k` contribute their class-`k` vote count to the vote set
//! `S_k`. Counts below the tail boundary `lambda * B` are the extreme values;
//! a Weibull distribution fitted to them gives, through its CDF, the
//! probability that a given vote count still belongs to class `k`.

mod io;
mod weibull;

pub use io::{decode_evt_model, encode_evt_model, read_evt_file, write_evt_file};
pub use weibull::{fit_weibull, log_likelihood, weibull_cdf, weibull_pdf, WeibullFit};

use crate::error::{OsrError, Result};
use crate::features::FeatureVector;
use crate::forest::{RandomForest, VoteRecord};

/// Shape used for a tail whose values are all equal: the likelihood grows
/// without bound as the shape increases, so the model is a near-step at
/// that value.
pub const DEGENERATE_SHAPE: f64 = 1000.0;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoteSet {
    pub class: usize,
    pub votes: Vec<u32>,
}

/// Outcome of open-set classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Verdict {
    Known(usize),
    Unknown,
}

impl Verdict {
    pub fn class(self) -> Option<usize> {
        match self {
            Verdict::Known(c) => Some(c),
            Verdict::Unknown => None,
        }
    }

    pub fn is_unknown(self) -> bool {
        self == Verdict::Unknown
    }
}

impl From<Option<usize>> for Verdict {
    fn from(c: Option<usize>) -> Self {
        c.map_or(Verdict::Unknown, Verdict::Known)
    }
}

/// Gathers, per class, the vote counts of correctly classified calibration samples.
pub fn collect_vote_sets(forest: &RandomForest, features: &[FeatureVector], labels: &[usize]) -> Result<Vec<VoteSet>> {
    if features.len() != labels.len() {
        return Err(OsrError::LengthMismatch {
            what: "calibration features vs labels",
            left: features.len(),
            right: labels.len(),
        });
    }
    let k = forest.num_classes();
    if let Some(&l) = labels.iter().find(|&&l| l >= k) {
        return Err(OsrError::LabelOutOfRange { label: l, classes: k });
    }
    let votes = forest.vote_all(features)?;
    let mut sets: Vec<VoteSet> = (0..k).map(|class| VoteSet { class, votes: Vec::new() }).collect();
    for (record, &label) in votes.iter().zip(labels) {
        if record.argmax() == label {
            sets[label].votes.push(record.counts()[label]);
        }
    }
    if let Some(empty) = sets.iter().find(|s| s.votes.is_empty()) {
        return Err(OsrError::EmptyVoteSet(empty.class));
    }
    Ok(sets)
}

/// `s < lambda * trees`, evaluated exactly (one rounding in the fused multiply-add
/// cannot flip the sign of `lambda * trees - s`).
pub fn below_tail_boundary(s: u32, lambda: f64, trees: usize) -> bool {
    lambda.mul_add(trees as f64, -(s as f64)) > 0.0
}

/// Tail of a vote set, ascending.
///
/// Returns the counts below `lambda * trees`. When fewer than `min_tail`
/// remain, returns instead the `min(max(min_tail, ceil(0.05 M)), M)` smallest
/// counts of the `M` in the set.
pub fn select_tail(set: &VoteSet, lambda: f64, trees: usize, min_tail: usize) -> Vec<u32> {
    let mut sorted = set.votes.clone();
    sorted.sort_unstable();
    let below = sorted
        .iter()
        .take_while(|&&s| below_tail_boundary(s, lambda, trees))
        .count();
    if below >= min_tail {
        sorted.truncate(below);
    } else {
        let m = sorted.len();
        let fallback = min_tail.max((0.05 * m as f64).ceil() as usize).min(m);
        sorted.truncate(fallback);
    }
    sorted
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvtParams {
    pub lambda: f64,
    pub delta: f64,
    pub min_tail: usize,
}

impl Default for EvtParams {
    fn default() -> Self {
        Self {
            lambda: 0.9,
            delta: 0.5,
            min_tail: 10,
        }
    }
}

impl EvtParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err(OsrError::InvalidParameter(format!(
                "lambda {} outside (0, 1]",
                self.lambda
            )));
        }
        validate_delta(self.delta)?;
        if self.min_tail < 2 {
            return Err(OsrError::InvalidParameter("min_tail must be at least 2".into()));
        }
        Ok(())
    }
}

pub fn validate_delta(delta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(OsrError::InvalidParameter(format!("delta {delta} outside [0, 1]")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct WeibullModel {
    pub class: usize,
    pub alpha: f64,
    pub gamma: f64,
    pub tail_size: usize,
}

impl WeibullModel {
    /// Fits a class model to tail counts. An all-equal tail (or a single
    /// count) yields the step-like limit with `gamma = DEGENERATE_SHAPE`.
    pub fn fit(class: usize, tail: &[u32]) -> Result<Self> {
        let values: Vec<f64> = tail.iter().filter(|&&s| s > 0).map(|&s| s as f64).collect();
        let first = *values.first().ok_or(OsrError::EmptyVoteSet(class))?;
        if values.iter().all(|&v| v == first) {
            return Ok(Self {
                class,
                alpha: first,
                gamma: DEGENERATE_SHAPE,
                tail_size: values.len(),
            });
        }
        let fit = fit_weibull(&values)?;
        Ok(Self {
            class,
            alpha: fit.alpha,
            gamma: fit.gamma,
            tail_size: values.len(),
        })
    }

    pub fn cdf(&self, votes: u32) -> f64 {
        weibull_cdf(votes as f64, self.alpha, self.gamma)
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EvtModel {
    pub weibulls: Vec<WeibullModel>,
    pub lambda: f64,
    pub delta: f64,
    pub trees: usize,
}

/// Open-set decision for one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct OpenSetPrediction {
    pub verdict: Verdict,
    /// Per-class Weibull CDF of the sample's vote counts.
    pub cdf: Vec<f64>,
    pub votes: VoteRecord,
}

/// Collects vote sets, selects their tails and fits one Weibull per class.
pub fn build_evt_model(
    forest: &RandomForest,
    features: &[FeatureVector],
    labels: &[usize],
    params: &EvtParams,
) -> Result<EvtModel> {
    params.validate()?;
    let sets = collect_vote_sets(forest, features, labels)?;
    let weibulls = sets
        .iter()
        .map(|set| {
            let tail = select_tail(set, params.lambda, forest.num_trees(), params.min_tail);
            WeibullModel::fit(set.class, &tail)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvtModel {
        weibulls,
        lambda: params.lambda,
        delta: params.delta,
        trees: forest.num_trees(),
    })
}

impl EvtModel {
    pub fn num_classes(&self) -> usize {
        self.weibulls.len()
    }

    /// Applies the rejection rule to a vote record with threshold `delta`.
    ///
    /// Classes whose CDF falls below `delta` are rejected; if all are, the
    /// sample is unknown. Otherwise the surviving class with the most votes
    /// wins, ties to the lowest index.
    pub fn decide(&self, votes: VoteRecord, delta: f64) -> OpenSetPrediction {
        let cdf: Vec<f64> = self
            .weibulls
            .iter()
            .zip(votes.counts())
            .map(|(w, &s)| w.cdf(s))
            .collect();
        let mut best: Option<usize> = None;
        for (i, &p) in cdf.iter().enumerate() {
            if p >= delta && best.is_none_or(|b| votes.counts()[i] > votes.counts()[b]) {
                best = Some(i);
            }
        }
        OpenSetPrediction {
            verdict: best.into(),
            cdf,
            votes,
        }
    }

    fn check(&self, forest: &RandomForest) -> Result<()> {
        if forest.num_classes() != self.num_classes() {
            return Err(OsrError::DimensionMismatch {
                expected: self.num_classes(),
                actual: forest.num_classes(),
            });
        }
        Ok(())
    }

    pub fn predict_with_delta(&self, forest: &RandomForest, q: &FeatureVector, delta: f64) -> Result<OpenSetPrediction> {
        self.check(forest)?;
        Ok(self.decide(forest.vote(q)?, delta))
    }
}

/// Open-set prediction with the model's stored `delta`.
pub fn predict_open(forest: &RandomForest, evt: &EvtModel, q: &FeatureVector) -> Result<OpenSetPrediction> {
    evt.predict_with_delta(forest, q, evt.delta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn model(params: &[(f64, f64)], delta: f64) -> EvtModel {
        EvtModel {
            weibulls: params
                .iter()
                .enumerate()
                .map(|(class, &(alpha, gamma))| WeibullModel {
                    class,
                    alpha,
                    gamma,
                    tail_size: 10,
                })
                .collect(),
            lambda: 0.9,
            delta,
            trees: 200,
        }
    }

    #[test]
    fn tail_below_boundary() {
        let set = VoteSet { class: 0, votes: vec![185, 50, 199, 120] };
        assert_eq!(select_tail(&set, 0.9, 200, 2), vec![50, 120]);
        // The boundary itself is excluded.
        let set = VoteSet { class: 0, votes: vec![100, 99, 10] };
        assert_eq!(select_tail(&set, 0.5, 200, 2), vec![10, 99]);
        // 0.9 as a double lies just above nine tenths, so 180 < 0.9 * 200.
        let set = VoteSet { class: 0, votes: vec![181, 180, 10] };
        assert_eq!(select_tail(&set, 0.9, 200, 2), vec![10, 180]);
    }

    #[test]
    fn tail_fallback_and_degenerate_lambda() {
        let set = VoteSet { class: 0, votes: (0..100).map(|i| 181 + (i % 20)).collect() };
        let tail = select_tail(&set, 0.9, 200, 10);
        assert_eq!(tail.len(), 10);
        assert!(tail.iter().all(|&s| s <= 181 + 1));
        let big = VoteSet { class: 0, votes: (0..400).map(|i| 190 + (i % 10)).collect() };
        assert_eq!(select_tail(&big, 0.9, 200, 10).len(), 20);
        let small = VoteSet { class: 0, votes: vec![199, 200, 198] };
        assert_eq!(select_tail(&small, 0.9, 200, 10), vec![198, 199, 200]);
        let all = VoteSet { class: 0, votes: vec![30, 199, 200, 120] };
        assert_eq!(select_tail(&all, 1.0, 200, 2), vec![30, 120, 199]);
    }

    #[test]
    fn cdf_based_rejection() {
        let m = model(&[(150.0, 10.0), (150.0, 10.0)], 0.5);
        let p = m.decide(VoteRecord::new(vec![200, 0]), 0.5);
        assert_eq!(p.verdict, Verdict::Known(0));
        assert!(p.cdf[0] > 0.99);
        assert_eq!(p.cdf[1], 0.0);
        let p = m.decide(VoteRecord::new(vec![100, 100]), 0.5);
        assert!((p.cdf[0] - 0.0172).abs() < 1e-4);
        assert_eq!(p.verdict, Verdict::Unknown);
    }

    #[test]
    fn unanimous_vote_is_known() {
        let m = model(&[(180.0, 20.0), (170.0, 15.0), (190.0, 30.0)], 0.5);
        let p = m.decide(VoteRecord::new(vec![0, 0, 200]), 0.5);
        assert_eq!(p.verdict, Verdict::Known(2));
    }

    #[test]
    fn among_survivors_most_votes_wins() {
        let m = model(&[(10.0, 2.0), (150.0, 10.0), (20.0, 2.0)], 0.5);
        let p = m.decide(VoteRecord::new(vec![60, 80, 60]), 0.5);
        // Class 1 has the most raw votes but is rejected.
        assert_eq!(p.verdict, Verdict::Known(0));
    }

    #[test]
    fn zero_delta_is_closed_set() {
        let m = model(&[(190.0, 50.0), (190.0, 50.0)], 0.0);
        let p = m.decide(VoteRecord::new(vec![3, 197]), 0.0);
        assert_eq!(p.verdict, Verdict::Known(1));
    }

    #[test]
    fn degenerate_tail_uses_step_limit() {
        let w = WeibullModel::fit(3, &[200; 10]).unwrap();
        assert_eq!((w.alpha, w.gamma, w.tail_size), (200.0, DEGENERATE_SHAPE, 10));
        assert!(w.cdf(200) > 0.5);
        assert!(w.cdf(195) < 0.01);
    }

    /// Exact oracle: `s < lambda * trees` with `lambda` decomposed into an
    /// integer mantissa and a power of two.
    fn exact_below(s: u32, lambda: f64, trees: usize) -> bool {
        let bits = lambda.to_bits();
        let exp = ((bits >> 52) & 0x7ff) as i32;
        let mantissa = (bits & ((1u64 << 52) - 1)) | (1u64 << 52);
        let shift = 1075 - exp; // lambda = mantissa / 2^shift
        assert!((0..=120).contains(&shift));
        (s as u128) << shift < mantissa as u128 * trees as u128
    }

    proptest! {
        #[test]
        fn tail_boundary_matches_confidence_filter(s in 0u32..=600, trees in 1usize..=600, lambda in 0.001f64..1.0) {
            let by_votes = below_tail_boundary(s, lambda, trees);
            prop_assert_eq!(by_votes, exact_below(s, lambda, trees));
        }

        #[test]
        fn boundary_cases_on_percent_grid(s in 0u32..=500, trees in 1usize..=500, pct in 1u32..100) {
            let lambda = pct as f64 / 100.0;
            prop_assert_eq!(below_tail_boundary(s, lambda, trees), exact_below(s, lambda, trees));
        }

        #[test]
        fn rejection_is_monotone_in_delta(
            counts in proptest::collection::vec(0u32..=200, 3),
            d1 in 0.0f64..=1.0, d2 in 0.0f64..=1.0,
        ) {
            let m = model(&[(120.0, 4.0), (150.0, 9.0), (60.0, 2.0)], 0.5);
            let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
            let at_hi = m.decide(VoteRecord::new(counts.clone()), hi).verdict;
            let at_lo = m.decide(VoteRecord::new(counts), lo).verdict;
            if let Verdict::Known(_) = at_hi {
                prop_assert!(matches!(at_lo, Verdict::Known(_)));
            }
            if at_lo == Verdict::Unknown {
                prop_assert_eq!(at_hi, Verdict::Unknown);
            }
        }

        #[test]
        fn known_verdict_passes_threshold(counts in proptest::collection::vec(0u32..=200, 3), delta in 0.0f64..=1.0) {
            let m = model(&[(120.0, 4.0), (150.0, 9.0), (60.0, 2.0)], delta);
            let p = m.decide(VoteRecord::new(counts), delta);
            if let Verdict::Known(i) = p.verdict {
                prop_assert!(p.cdf[i] >= delta);
            } else {
                prop_assert!(p.cdf.iter().all(|&c| c < delta));
            }
        }
    }
}
