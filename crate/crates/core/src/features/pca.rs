use rand_distr::{Distribution, StandardNormal};

use crate::error::{OsrError, Result};
use crate::scenario::ScenarioTensor;
use crate::seed;

const TOLERANCE: f64 = 1e-9;
const MAX_ITERATIONS: usize = 1000;

/// Principal components of flattened tensors, found by power iteration with
/// deflation on the (population) covariance operator. The covariance matrix
/// is never formed; each iteration applies it as `Xᵀ(X v) / N`.
#[derive(Debug, Clone, PartialEq)]
pub struct Pca {
    shape: (usize, usize, usize),
    mean: Vec<f64>,
    components: Vec<Vec<f64>>,
    eigenvalues: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>]) {
    for u in basis {
        let p = dot(v, u);
        v.iter_mut().zip(u).for_each(|(x, b)| *x -= p * b);
    }
}

impl Pca {
    pub fn fit(train: &[ScenarioTensor], components: usize) -> Result<Self> {
        let shape = train.first().ok_or(OsrError::EmptyData)?.shape();
        if components == 0 {
            return Err(OsrError::InvalidParameter("pca needs at least one component".into()));
        }
        if components > train.len() {
            return Err(OsrError::RankDeficient {
                components,
                samples: train.len(),
            });
        }
        let rows: Vec<Vec<f64>> = train
            .iter()
            .map(|t| t.cells().map(|c| c.value() as f64).collect())
            .collect();
        Self::fit_rows(shape, rows, components)
    }

    fn fit_rows(shape: (usize, usize, usize), mut rows: Vec<Vec<f64>>, components: usize) -> Result<Self> {
        let n = rows.len() as f64;
        let d = rows[0].len();
        let mut mean = vec![0.0; d];
        for r in &rows {
            mean.iter_mut().zip(r).for_each(|(m, x)| *m += x);
        }
        mean.iter_mut().for_each(|m| *m /= n);
        for r in &mut rows {
            r.iter_mut().zip(&mean).for_each(|(x, m)| *x -= m);
        }

        let cov_apply = |v: &[f64]| -> Vec<f64> {
            let mut out = vec![0.0; d];
            for r in &rows {
                let p = dot(r, v) / n;
                out.iter_mut().zip(r).for_each(|(o, x)| *o += p * x);
            }
            out
        };

        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(components);
        let mut eigenvalues = Vec::with_capacity(components);
        for k in 0..components {
            let mut rng = seed::stream_rng(0x0050_4341, k as u64);
            let mut v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
            orthogonalize(&mut v, &basis);
            normalize(&mut v);
            for _ in 0..MAX_ITERATIONS {
                let mut w = cov_apply(&v);
                // Deflation: remove the already-found eigenpairs from the operator.
                for (u, lambda) in basis.iter().zip(&eigenvalues) {
                    let p = lambda * dot(u, &v);
                    w.iter_mut().zip(u).for_each(|(x, b)| *x -= p * b);
                }
                orthogonalize(&mut w, &basis);
                if normalize(&mut w) == 0.0 {
                    break;
                }
                let diff = w
                    .iter()
                    .zip(&v)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                v = w;
                if diff < TOLERANCE {
                    break;
                }
            }
            eigenvalues.push(dot(&v, &cov_apply(&v)));
            basis.push(v);
        }
        Ok(Self {
            shape,
            mean,
            components: basis,
            eigenvalues,
        })
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        self.shape
    }

    pub fn components(&self) -> usize {
        self.components.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn component(&self, k: usize) -> &[f64] {
        &self.components[k]
    }

    /// Coefficients of `x - mean` on each component.
    pub fn project(&self, x: &[f32]) -> Result<Vec<f32>> {
        if x.len() != self.mean.len() {
            return Err(OsrError::DimensionMismatch {
                expected: self.mean.len(),
                actual: x.len(),
            });
        }
        let centered: Vec<f64> = x.iter().zip(&self.mean).map(|(&v, m)| v as f64 - m).collect();
        Ok(self
            .components
            .iter()
            .map(|u| dot(u, &centered) as f32)
            .collect())
    }

    /// Maps coefficients back to the tensor space.
    pub fn reconstruct(&self, coefficients: &[f64]) -> Vec<f64> {
        let mut out = self.mean.clone();
        for (u, c) in self.components.iter().zip(coefficients) {
            out.iter_mut().zip(u).for_each(|(o, b)| *o += c * b);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{GridConfig, Occupancy, ScenarioTensor};

    #[test]
    fn rank_deficient_request_is_rejected() {
        let t = ScenarioTensor::filled(GridConfig::with_cells(2, 4, 1.0, 1.0), Occupancy::Free);
        let err = Pca::fit(&[t.clone(), t], 3).unwrap_err();
        assert!(err.to_string().contains("rank deficient"));
    }

    #[test]
    fn mean_tensor_projects_to_zero() {
        let config = GridConfig::with_cells(4, 6, 1.0, 1.0);
        // Each tensor is paired with its complement, so the mean is 0.5 everywhere.
        let mut train = Vec::new();
        for k in 0..4 {
            let mut a = ScenarioTensor::filled(config, Occupancy::Free);
            let mut b = ScenarioTensor::filled(config, Occupancy::Occupied);
            for (t, g) in a.grids_mut().iter_mut().enumerate() {
                g.set(k, (t + k) % 6, Occupancy::Occupied);
            }
            for (t, g) in b.grids_mut().iter_mut().enumerate() {
                g.set(k, (t + k) % 6, Occupancy::Free);
            }
            train.push(a);
            train.push(b);
        }
        let pca = Pca::fit(&train, 3).unwrap();
        assert!(pca.mean().iter().all(|&m| (m - 0.5).abs() < 1e-15));
        let mean_tensor = ScenarioTensor::filled(config, Occupancy::Unknown);
        let q = pca.project(&mean_tensor.flat_values()).unwrap();
        assert!(q.iter().all(|c| c.abs() < 1e-9));
    }

    #[test]
    fn components_are_orthonormal_and_sorted() {
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|i| {
                let t = i as f64;
                vec![3.0 * t.sin(), 2.0 * (1.7 * t).cos(), 0.5 * (0.3 * t).sin(), 0.1 * t.cos()]
            })
            .collect();
        let pca = Pca::fit_rows((1, 4, 1), rows, 3).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                let d = dot(pca.component(a), pca.component(b));
                assert!((d - if a == b { 1.0 } else { 0.0 }).abs() < 1e-8);
            }
        }
        let ev = pca.eigenvalues();
        assert!(ev[0] >= ev[1] && ev[1] >= ev[2]);
    }
}
