//! Random forest of fully grown Gini trees.
//!
//! Each tree sees a bootstrap resample of the training set and considers a
//! random subset of `features_per_split` features at every node. Trees are
//! grown until their leaves are pure or no feature separates the remaining
//! samples. Tree `b` draws all of its randomness from the ChaCha stream
//! `(seed, b)`, so training in parallel yields exactly the serial forest.

mod io;
mod tree;

use rand::Rng;
use rayon::prelude::*;

pub use io::{decode_forest, encode_forest, read_forest_file, write_forest_file};
pub use tree::{DecisionTree, TreeNode};

use crate::error::{OsrError, Result};
use crate::features::FeatureVector;
use crate::seed;
use tree::{Columns, TreeBuilder};

/// How `sqrt(L)` is turned into a feature count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SqrtRounding {
    #[default]
    Nearest,
    Floor,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ForestParams {
    pub trees: usize,
    pub seed: u64,
    /// Overrides the `sqrt(L)` default.
    pub features_per_split: Option<usize>,
    pub rounding: SqrtRounding,
    /// Train trees on the rayon pool. Has no effect on the result.
    pub parallel: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            trees: 200,
            seed: 0,
            features_per_split: None,
            rounding: SqrtRounding::Nearest,
            parallel: true,
        }
    }
}

impl ForestParams {
    pub fn new(trees: usize, seed: u64) -> Self {
        Self {
            trees,
            seed,
            ..Self::default()
        }
    }

    fn features_per_split(&self, dim: usize) -> usize {
        let root = (dim as f64).sqrt();
        let m = self.features_per_split.unwrap_or(match self.rounding {
            SqrtRounding::Nearest => root.round() as usize,
            SqrtRounding::Floor => root.floor() as usize,
        });
        m.clamp(1, dim)
    }
}

/// Per-class tree vote counts for one sample.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct VoteRecord {
    counts: Vec<u32>,
}

impl VoteRecord {
    pub fn new(counts: Vec<u32>) -> Self {
        Self { counts }
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn total(&self) -> u32 {
        self.counts.iter().sum()
    }

    /// Class with the most votes; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (k, &c) in self.counts.iter().enumerate() {
            if c > self.counts[best] {
                best = k;
            }
        }
        best
    }

    pub fn max(&self) -> u32 {
        self.counts.iter().copied().max().unwrap_or(0)
    }
}

/// Vote fractions `counts[i] / trees`.
pub fn confidence(record: &VoteRecord, trees: usize) -> Vec<f64> {
    record
        .counts
        .iter()
        .map(|&c| c as f64 / trees as f64)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomForest {
    trees: Vec<DecisionTree>,
    classes: usize,
    dim: usize,
    features_per_split: usize,
    seed: u64,
    training_samples: usize,
}

fn bootstrap(rng: &mut impl Rng, n: usize) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

/// Trains a forest on `labels` in `0..K`, where `K` is one more than the largest label.
pub fn train_forest(features: &[FeatureVector], labels: &[usize], params: &ForestParams) -> Result<RandomForest> {
    if features.is_empty() {
        return Err(OsrError::EmptyData);
    }
    if features.len() != labels.len() {
        return Err(OsrError::LengthMismatch {
            what: "features vs labels",
            left: features.len(),
            right: labels.len(),
        });
    }
    if params.trees == 0 {
        return Err(OsrError::InvalidParameter("forest needs at least one tree".into()));
    }
    let dim = features[0].len();
    if dim == 0 {
        return Err(OsrError::InvalidParameter("zero-dimensional features".into()));
    }
    if let Some(f) = features.iter().find(|f| f.len() != dim) {
        return Err(OsrError::DimensionMismatch {
            expected: dim,
            actual: f.len(),
        });
    }
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut seen = vec![false; classes];
    labels.iter().for_each(|&l| seen[l] = true);
    let present = seen.iter().filter(|&&s| s).count();
    if present < 2 {
        return Err(OsrError::NeedTwoClasses(present));
    }
    if let Some(k) = seen.iter().position(|&s| !s) {
        return Err(OsrError::InvalidParameter(format!(
            "class {k} has no training samples"
        )));
    }

    let columns = (0..dim)
        .map(|j| features.iter().map(|f| f[j]).collect())
        .collect();
    let data = Columns {
        columns,
        labels,
        classes,
    };
    let per_split = params.features_per_split(dim);
    let n = features.len();
    let grow = |b: usize| {
        let mut rng = seed::stream_rng(params.seed, b as u64);
        let samples = bootstrap(&mut rng, n);
        TreeBuilder::new(&data, per_split, &mut rng).build(samples)
    };
    let trees = if params.parallel {
        (0..params.trees).into_par_iter().map(grow).collect()
    } else {
        (0..params.trees).map(grow).collect()
    };
    Ok(RandomForest {
        trees,
        classes,
        dim,
        features_per_split: per_split,
        seed: params.seed,
        training_samples: n,
    })
}

impl RandomForest {
    pub(crate) fn from_parts(
        trees: Vec<DecisionTree>,
        classes: usize,
        dim: usize,
        features_per_split: usize,
        seed: u64,
        training_samples: usize,
    ) -> Self {
        Self {
            trees,
            classes,
            dim,
            features_per_split,
            seed,
            training_samples,
        }
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    pub fn num_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn num_classes(&self) -> usize {
        self.classes
    }

    pub fn feature_dim(&self) -> usize {
        self.dim
    }

    pub fn features_per_split(&self) -> usize {
        self.features_per_split
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn training_samples(&self) -> usize {
        self.training_samples
    }

    fn check_dim(&self, q: &FeatureVector) -> Result<()> {
        if q.len() != self.dim {
            return Err(OsrError::DimensionMismatch {
                expected: self.dim,
                actual: q.len(),
            });
        }
        Ok(())
    }

    pub fn vote(&self, q: &FeatureVector) -> Result<VoteRecord> {
        self.check_dim(q)?;
        let mut counts = vec![0u32; self.classes];
        for t in &self.trees {
            counts[t.predict(q.values()) as usize] += 1;
        }
        Ok(VoteRecord { counts })
    }

    pub fn vote_all(&self, qs: &[FeatureVector]) -> Result<Vec<VoteRecord>> {
        qs.par_iter().map(|q| self.vote(q)).collect()
    }

    /// Majority vote, ties to the lowest class index.
    pub fn classify_closed(&self, q: &FeatureVector) -> Result<usize> {
        Ok(self.vote(q)?.argmax())
    }

    /// Out-of-bag accuracy on the training set the forest was fit on.
    ///
    /// Bootstraps are regenerated from the per-tree streams, so `features`
    /// and `labels` must be exactly the training data.
    pub fn oob_accuracy(&self, features: &[FeatureVector], labels: &[usize]) -> Result<f64> {
        if features.len() != self.training_samples || labels.len() != self.training_samples {
            return Err(OsrError::LengthMismatch {
                what: "oob data vs training set",
                left: features.len(),
                right: self.training_samples,
            });
        }
        let n = self.training_samples;
        let mut votes = vec![vec![0u32; self.classes]; n];
        for (b, tree) in self.trees.iter().enumerate() {
            let mut rng = seed::stream_rng(self.seed, b as u64);
            let mut in_bag = vec![false; n];
            bootstrap(&mut rng, n).into_iter().for_each(|i| in_bag[i] = true);
            for i in (0..n).filter(|&i| !in_bag[i]) {
                self.check_dim(&features[i])?;
                votes[i][tree.predict(features[i].values()) as usize] += 1;
            }
        }
        let (mut correct, mut counted) = (0usize, 0usize);
        for (v, &y) in votes.into_iter().zip(labels) {
            let record = VoteRecord { counts: v };
            if record.total() > 0 {
                counted += 1;
                correct += usize::from(record.argmax() == y);
            }
        }
        if counted == 0 {
            return Err(OsrError::InvalidParameter("no out-of-bag samples".into()));
        }
        Ok(correct as f64 / counted as f64)
    }
}
