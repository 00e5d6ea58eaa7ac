//! Scenario feature extraction.
//!
//! The forest consumes fixed-length real vectors. Three extractors compute
//! them from tensors directly: the identity flattening, a seeded Gaussian
//! random projection and PCA. Features computed elsewhere enter via the
//! `OSRF` feature file.

mod io;
mod pca;

use rand_distr::{Distribution, StandardNormal};

pub use io::{decode_feature_file, encode_feature_file, read_feature_file, write_feature_file, FeatureSet, UNLABELED};
pub use pca::Pca;

use crate::error::{OsrError, Result};
use crate::scenario::{Occupancy, ScenarioTensor};
use crate::seed;

/// A finite feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(Vec<f32>);

impl FeatureVector {
    pub fn new(values: Vec<f32>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(OsrError::NonFinite("feature vector"));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f32> {
        self.0
    }
}

impl std::ops::Index<usize> for FeatureVector {
    type Output = f32;
    fn index(&self, i: usize) -> &f32 {
        &self.0[i]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExtractorKind {
    Flatten,
    RandomProjection,
    Pca,
    /// Features produced outside this crate and read from a feature file.
    External,
}

impl std::str::FromStr for ExtractorKind {
    type Err = OsrError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "flatten" => Ok(Self::Flatten),
            "random-projection" => Ok(Self::RandomProjection),
            "pca" => Ok(Self::Pca),
            "external" => Ok(Self::External),
            _ => Err(OsrError::InvalidParameter(format!("unknown extractor {s:?}"))),
        }
    }
}

impl std::fmt::Display for ExtractorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Flatten => "flatten",
            Self::RandomProjection => "random-projection",
            Self::Pca => "pca",
            Self::External => "external",
        })
    }
}

/// Parameters of an extractor that computes features from tensors.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ExtractorParams {
    Flatten,
    RandomProjection { dim: usize, seed: u64 },
    Pca { components: usize },
}

impl ExtractorParams {
    pub fn kind(&self) -> ExtractorKind {
        match self {
            Self::Flatten => ExtractorKind::Flatten,
            Self::RandomProjection { .. } => ExtractorKind::RandomProjection,
            Self::Pca { .. } => ExtractorKind::Pca,
        }
    }

    /// True when fitting ignores the training tensors, so features can be
    /// computed once and shared across splits.
    pub fn is_data_independent(&self) -> bool {
        !matches!(self, Self::Pca { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FeatureExtractor {
    Flatten {
        shape: (usize, usize, usize),
    },
    RandomProjection {
        shape: (usize, usize, usize),
        dim: usize,
        seed: u64,
        /// `cells x dim`, row-major: the row of a cell is its contribution per unit value.
        matrix: Vec<f32>,
    },
    Pca(Pca),
}

/// Fits an extractor on training tensors.
pub fn fit_extractor(params: &ExtractorParams, train: &[ScenarioTensor]) -> Result<FeatureExtractor> {
    let shape = train.first().ok_or(OsrError::EmptyData)?.shape();
    if let Some(t) = train.iter().find(|t| t.shape() != shape) {
        return Err(OsrError::ShapeMismatch {
            expected: shape,
            actual: t.shape(),
        });
    }
    match *params {
        ExtractorParams::Flatten => Ok(FeatureExtractor::Flatten { shape }),
        ExtractorParams::RandomProjection { dim, seed } => random_projection(shape, dim, seed),
        ExtractorParams::Pca { components } => Ok(FeatureExtractor::Pca(Pca::fit(train, components)?)),
    }
}

/// Builds a random projection for tensors of `shape` without any data.
pub fn random_projection(shape: (usize, usize, usize), dim: usize, seed: u64) -> Result<FeatureExtractor> {
    if dim == 0 {
        return Err(OsrError::InvalidParameter("projection dim must be positive".into()));
    }
    let cells = shape.0 * shape.1 * shape.2;
    let scale = 1.0 / (dim as f64).sqrt();
    let mut rng = seed::stream_rng(seed, 0);
    let matrix = (0..cells * dim)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            (z * scale) as f32
        })
        .collect();
    Ok(FeatureExtractor::RandomProjection {
        shape,
        dim,
        seed,
        matrix,
    })
}

impl FeatureExtractor {
    pub fn kind(&self) -> ExtractorKind {
        match self {
            Self::Flatten { .. } => ExtractorKind::Flatten,
            Self::RandomProjection { .. } => ExtractorKind::RandomProjection,
            Self::Pca(_) => ExtractorKind::Pca,
        }
    }

    /// Output dimension `L`.
    pub fn dim(&self) -> usize {
        match self {
            Self::Flatten { shape } => shape.0 * shape.1 * shape.2,
            Self::RandomProjection { dim, .. } => *dim,
            Self::Pca(p) => p.components(),
        }
    }

    pub fn input_shape(&self) -> (usize, usize, usize) {
        match self {
            Self::Flatten { shape } | Self::RandomProjection { shape, .. } => *shape,
            Self::Pca(p) => p.shape(),
        }
    }

    pub fn transform(&self, tensor: &ScenarioTensor) -> Result<FeatureVector> {
        if tensor.shape() != self.input_shape() {
            return Err(OsrError::ShapeMismatch {
                expected: self.input_shape(),
                actual: tensor.shape(),
            });
        }
        let values = match self {
            Self::Flatten { .. } => tensor.flat_values(),
            Self::RandomProjection { dim, matrix, .. } => {
                let mut acc = vec![0.0f32; *dim];
                for (cell, value) in tensor.cells().enumerate() {
                    let w = match value {
                        Occupancy::Free => continue,
                        v => v.value(),
                    };
                    let row = &matrix[cell * dim..(cell + 1) * dim];
                    for (a, m) in acc.iter_mut().zip(row) {
                        *a += w * m;
                    }
                }
                acc
            }
            Self::Pca(p) => p.project(&tensor.flat_values())?,
        };
        FeatureVector::new(values)
    }

    pub fn transform_all(&self, tensors: &[&ScenarioTensor]) -> Result<Vec<FeatureVector>> {
        use rayon::prelude::*;
        tensors.par_iter().map(|t| self.transform(t)).collect()
    }
}
