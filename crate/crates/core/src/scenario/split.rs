use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use super::{LabeledScenario, ManeuverClass};
use crate::error::{OsrError, Result};
use crate::seed;

/// Fractions of each known class assigned to train, calibration and test.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitRatios {
    pub train: f64,
    pub calibration: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.7,
            calibration: 0.1,
            test: 0.2,
        }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.calibration, self.test];
        if parts.iter().any(|r| !r.is_finite() || *r <= 0.0) {
            return Err(OsrError::InvalidParameter(
                "split ratios must be positive".into(),
            ));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(OsrError::InvalidParameter(format!(
                "split ratios sum to {sum}, not 1"
            )));
        }
        Ok(())
    }
}

/// Sample indices of a stratified split, each list ascending.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub calibration: Vec<usize>,
    pub test: Vec<usize>,
}

/// Splits sample indices per class. `None` keys are unknown-class samples and
/// go to the test split only.
pub fn split_indices<K: Ord + Copy + std::fmt::Debug>(
    keys: &[Option<K>],
    ratios: SplitRatios,
    seed: u64,
) -> Result<SplitIndices> {
    ratios.validate()?;
    if keys.is_empty() {
        return Err(OsrError::EmptyData);
    }
    let mut by_class: BTreeMap<K, Vec<usize>> = BTreeMap::new();
    let mut out = SplitIndices::default();
    for (i, k) in keys.iter().enumerate() {
        match k {
            Some(k) => by_class.entry(*k).or_default().push(i),
            None => out.test.push(i),
        }
    }
    for (stream, (class, mut members)) in by_class.into_iter().enumerate() {
        let n = members.len();
        if n < 3 {
            return Err(OsrError::ClassTooSmall {
                class: format!("{class:?}"),
                count: n,
            });
        }
        let mut rng = seed::stream_rng(seed, stream as u64);
        members.shuffle(&mut rng);
        let n_cal = ((n as f64 * ratios.calibration).round() as usize).max(1);
        let n_test = ((n as f64 * ratios.test).round() as usize).max(1);
        let n_train = n.saturating_sub(n_cal + n_test).max(1);
        let n_test = n - n_train - n_cal;
        out.train.extend_from_slice(&members[..n_train]);
        out.calibration
            .extend_from_slice(&members[n_train..n_train + n_cal]);
        out.test.extend_from_slice(&members[n_train + n_cal..][..n_test]);
    }
    out.train.sort_unstable();
    out.calibration.sort_unstable();
    out.test.sort_unstable();
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DatasetSplits {
    pub train: Vec<LabeledScenario>,
    pub calibration: Vec<LabeledScenario>,
    pub test: Vec<LabeledScenario>,
}

/// Stratified split of labeled scenarios; outliers are routed to test.
pub fn split_dataset(
    data: Vec<LabeledScenario>,
    ratios: SplitRatios,
    seed: u64,
) -> Result<DatasetSplits> {
    let keys: Vec<Option<ManeuverClass>> = data
        .iter()
        .map(|s| (!s.label.is_outlier()).then_some(s.label))
        .collect();
    let idx = split_indices(&keys, ratios, seed)?;
    let mut slots: Vec<Option<LabeledScenario>> = data.into_iter().map(Some).collect();
    let mut take = |ids: &[usize]| -> Vec<LabeledScenario> {
        ids.iter()
            .map(|&i| slots[i].take().expect("split indices are disjoint"))
            .collect()
    };
    Ok(DatasetSplits {
        train: take(&idx.train),
        calibration: take(&idx.calibration),
        test: take(&idx.test),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hundred_samples_split_70_10_20() {
        let keys = vec![Some(0u8); 100];
        let s = split_indices(&keys, SplitRatios::default(), 1).unwrap();
        assert_eq!((s.train.len(), s.calibration.len(), s.test.len()), (70, 10, 20));
    }

    #[test]
    fn unknowns_only_in_test() {
        let mut keys = vec![Some(0u8); 30];
        keys.extend(vec![None; 12]);
        keys.extend(vec![Some(1u8); 30]);
        let s = split_indices(&keys, SplitRatios::default(), 5).unwrap();
        for i in s.train.iter().chain(&s.calibration) {
            assert!(keys[*i].is_some());
        }
        assert_eq!(s.test.iter().filter(|&&i| keys[i].is_none()).count(), 12);
    }

    #[test]
    fn tiny_class_is_rejected() {
        let keys = vec![Some(0u8), Some(0), Some(0), Some(1), Some(1)];
        let err = split_indices(&keys, SplitRatios::default(), 0).unwrap_err();
        assert!(err.to_string().contains("class too small to stratify"));
        let three = vec![Some(0u8); 3];
        let s = split_indices(&three, SplitRatios::default(), 0).unwrap();
        assert_eq!((s.train.len(), s.calibration.len(), s.test.len()), (1, 1, 1));
    }

    #[test]
    fn ratios_must_sum_to_one() {
        let r = SplitRatios {
            train: 0.7,
            calibration: 0.2,
            test: 0.2,
        };
        assert!(split_indices(&[Some(0u8); 10], r, 0).is_err());
        assert!(matches!(
            split_indices::<u8>(&[], SplitRatios::default(), 0),
            Err(OsrError::EmptyData)
        ));
    }

    proptest! {
        #[test]
        fn split_is_a_deterministic_partition(
            labels in proptest::collection::vec(proptest::option::weighted(0.85, 0u8..4), 40..200),
            seed in any::<u64>(),
        ) {
            let mut keys = labels;
            // Ensure every present class has at least 3 members.
            for c in 0..4u8 {
                let n = keys.iter().filter(|k| **k == Some(c)).count();
                if n > 0 && n < 3 {
                    keys.extend(std::iter::repeat_n(Some(c), 3 - n));
                }
            }
            let a = split_indices(&keys, SplitRatios::default(), seed).unwrap();
            let b = split_indices(&keys, SplitRatios::default(), seed).unwrap();
            prop_assert_eq!(&a, &b);
            let mut all: Vec<usize> = a.train.iter().chain(&a.calibration).chain(&a.test).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..keys.len()).collect::<Vec<_>>());
        }
    }
}
