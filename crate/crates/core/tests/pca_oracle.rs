use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use vote_osr::features::Pca;
use vote_osr::scenario::{generate_synthetic_dataset, GridConfig, ManeuverClass, ScenarioTensor, SynthParams};

fn small_tensors() -> Vec<ScenarioTensor> {
    let grid = GridConfig::with_cells(6, 10, 2.5, 12.0);
    let counts: BTreeMap<ManeuverClass, usize> = ManeuverClass::ALL.iter().map(|&c| (c, 13)).collect();
    let data = generate_synthetic_dataset(&counts, &grid, &SynthParams::default(), 31).unwrap();
    data.into_iter().take(100).map(|s| s.tensor).collect()
}

fn rows(tensors: &[ScenarioTensor]) -> Vec<Vec<f64>> {
    tensors
        .iter()
        .map(|t| t.flat_values().into_iter().map(f64::from).collect())
        .collect()
}

/// Squared reconstruction error summed over samples, for orthonormal `basis`.
fn reconstruction_error(xs: &[Vec<f64>], mean: &[f64], basis: &[Vec<f64>]) -> f64 {
    xs.iter()
        .map(|x| {
            let centered: Vec<f64> = x.iter().zip(mean).map(|(a, m)| a - m).collect();
            let mut residual = centered.clone();
            for u in basis {
                let c: f64 = centered.iter().zip(u).map(|(a, b)| a * b).sum();
                residual.iter_mut().zip(u).for_each(|(r, b)| *r -= c * b);
            }
            residual.iter().map(|r| r * r).sum::<f64>()
        })
        .sum()
}

#[test]
fn power_iteration_matches_dense_eigendecomposition() {
    let tensors = small_tensors();
    assert_eq!(tensors.len(), 100);
    let xs = rows(&tensors);
    let (n, d) = (xs.len(), xs[0].len());

    let mean: Vec<f64> = (0..d).map(|j| xs.iter().map(|x| x[j]).sum::<f64>() / n as f64).collect();
    let centered = DMatrix::from_fn(n, d, |i, j| xs[i][j] - mean[j]);
    let cov = centered.transpose() * &centered / n as f64;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let oracle_basis = |k: usize| -> Vec<Vec<f64>> {
        order[..k]
            .iter()
            .map(|&c| eig.eigenvectors.column(c).iter().copied().collect())
            .collect()
    };

    let pca8 = Pca::fit(&tensors, 8).unwrap();
    let pca4 = Pca::fit(&tensors, 4).unwrap();
    for k in 0..8 {
        let want = eig.eigenvalues[order[k]];
        let got = pca8.eigenvalues()[k];
        assert!((got - want).abs() <= 1e-6 * want, "eigenvalue {k}: {got} vs {want}");
    }
    for (pca, k) in [(&pca4, 4), (&pca8, 8)] {
        let basis: Vec<Vec<f64>> = (0..k).map(|c| pca.component(c).to_vec()).collect();
        let got = reconstruction_error(&xs, pca.mean(), &basis);
        let want = reconstruction_error(&xs, &mean, &oracle_basis(k));
        assert!((got - want).abs() <= 1e-6 * want, "{k} components: {got} vs {want}");
    }
    let e4 = reconstruction_error(&xs, pca4.mean(), &(0..4).map(|c| pca4.component(c).to_vec()).collect::<Vec<_>>());
    let e8 = reconstruction_error(&xs, pca8.mean(), &(0..8).map(|c| pca8.component(c).to_vec()).collect::<Vec<_>>());
    assert!(e8 <= e4);
}
