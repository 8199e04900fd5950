use nalgebra::{DMatrix, SymmetricEigen};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReduceError {
    #[error("target dimension {target} must be in 1..{dim}")]
    TargetDim { target: usize, dim: usize },
    #[error("need at least {needed} vectors, got {got}")]
    TooFewVectors { needed: usize, got: usize },
    #[error("vectors have inconsistent dimensions")]
    Ragged,
    #[error("all vectors are identical")]
    Degenerate,
}

/// Projects vectors into a lower-dimensional space before clustering.
pub trait Reducer: Send + Sync {
    fn id(&self) -> String;
    fn reduce(&self, vectors: &[Vec<f64>], target_dim: usize) -> Result<Vec<Vec<f64>>, ReduceError>;
}

/// Principal-component projection. Components are ordered by decreasing
/// variance and each is signed so its largest-magnitude loading is positive.
#[derive(Debug, Clone, Copy, Default)]
pub struct PcaReducer;

impl PcaReducer {
    /// Mean and the leading `target_dim` unit components (as rows).
    pub fn fit(vectors: &[Vec<f64>], target_dim: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>), ReduceError> {
        let n = vectors.len();
        let dim = vectors.first().map_or(0, Vec::len);
        if target_dim == 0 || target_dim >= dim {
            return Err(ReduceError::TargetDim { target: target_dim, dim });
        }
        if n < target_dim + 1 {
            return Err(ReduceError::TooFewVectors {
                needed: target_dim + 1,
                got: n,
            });
        }
        if vectors.iter().any(|v| v.len() != dim) {
            return Err(ReduceError::Ragged);
        }
        let mut mean = vec![0.0; dim];
        for v in vectors {
            for (m, x) in mean.iter_mut().zip(v) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let centered = DMatrix::from_fn(n, dim, |i, j| vectors[i][j] - mean[j]);
        if centered.iter().all(|&x| x == 0.0) {
            return Err(ReduceError::Degenerate);
        }
        let cov = (centered.transpose() * &centered) / (n as f64 - 1.0).max(1.0);
        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
        let components = order[..target_dim]
            .iter()
            .map(|&c| {
                let mut comp: Vec<f64> = eig.eigenvectors.column(c).iter().copied().collect();
                let pivot = comp
                    .iter()
                    .enumerate()
                    .fold((0, 0.0f64), |best, (i, &x)| if x.abs() > best.1 { (i, x.abs()) } else { best })
                    .0;
                if comp[pivot] < 0.0 {
                    comp.iter_mut().for_each(|x| *x = -*x);
                }
                comp
            })
            .collect();
        Ok((mean, components))
    }
}

impl Reducer for PcaReducer {
    fn id(&self) -> String {
        "pca".into()
    }

    fn reduce(&self, vectors: &[Vec<f64>], target_dim: usize) -> Result<Vec<Vec<f64>>, ReduceError> {
        let (mean, components) = Self::fit(vectors, target_dim)?;
        Ok(vectors
            .iter()
            .map(|v| {
                components
                    .iter()
                    .map(|c| c.iter().zip(v).zip(&mean).map(|((w, x), m)| w * (x - m)).sum())
                    .collect()
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
    }

    #[test]
    fn subspace_distances_are_preserved() {
        // Points on a 2-d plane embedded in 4-d, offset from the origin.
        let u = [0.5, 0.5, 0.5, 0.5];
        let w = [0.5, -0.5, 0.5, -0.5];
        let coords = [(0.0, 0.0), (1.0, 2.0), (-3.0, 0.5), (2.0, -1.0), (0.3, 0.7)];
        let pts: Vec<Vec<f64>> = coords
            .iter()
            .map(|&(a, b)| (0..4).map(|i| 1.0 + a * u[i] + b * w[i]).collect())
            .collect();
        let red = PcaReducer.reduce(&pts, 2).unwrap();
        for i in 0..pts.len() {
            for j in 0..pts.len() {
                assert!((dist(&pts[i], &pts[j]) - dist(&red[i], &red[j])).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn errors() {
        let pts = vec![vec![1.0, 2.0]; 4];
        assert_eq!(PcaReducer.reduce(&pts, 2), Err(ReduceError::TargetDim { target: 2, dim: 2 }));
        assert_eq!(PcaReducer.reduce(&pts, 1), Err(ReduceError::Degenerate));
        assert_eq!(
            PcaReducer.reduce(&pts[..1], 1),
            Err(ReduceError::TooFewVectors { needed: 2, got: 1 })
        );
    }

    #[test]
    fn sign_convention() {
        let pts = vec![vec![0.0, 0.0, 0.0], vec![1.0, -3.0, 0.1], vec![2.0, -6.0, 0.0]];
        let (_, comps) = PcaReducer::fit(&pts, 1).unwrap();
        let c = &comps[0];
        let max = c.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
        assert!(max > 0.0);
    }
}
