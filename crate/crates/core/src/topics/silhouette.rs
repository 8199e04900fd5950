use std::collections::BTreeMap;

use rayon::prelude::*;
use thiserror::Error;

use super::hdbscan::NOISE;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SilhouetteError {
    #[error("silhouette needs at least 2 clusters, found {0}")]
    TooFewClusters(usize),
    #[error("{vectors} vectors but {labels} labels")]
    LengthMismatch { vectors: usize, labels: usize },
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Mean silhouette over non-noise points under Euclidean distance. Points
/// in singleton clusters, and points with `a = b = 0`, score 0.
pub fn silhouette(vectors: &[Vec<f64>], labels: &[i64]) -> Result<f64, SilhouetteError> {
    if vectors.len() != labels.len() {
        return Err(SilhouetteError::LengthMismatch {
            vectors: vectors.len(),
            labels: labels.len(),
        });
    }
    let mut members: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        if l != NOISE {
            members.entry(l).or_default().push(i);
        }
    }
    if members.len() < 2 {
        return Err(SilhouetteError::TooFewClusters(members.len()));
    }
    let points: Vec<usize> = members.values().flatten().copied().collect();
    let total: f64 = points
        .par_iter()
        .map(|&i| {
            let own = labels[i];
            let mut a = 0.0;
            let mut b = f64::INFINITY;
            for (&label, idx) in &members {
                let sum: f64 = idx.iter().map(|&j| euclidean(&vectors[i], &vectors[j])).sum();
                if label == own {
                    if idx.len() == 1 {
                        return 0.0;
                    }
                    a = sum / (idx.len() - 1) as f64;
                } else {
                    b = b.min(sum / idx.len() as f64);
                }
            }
            let m = a.max(b);
            if m == 0.0 {
                0.0
            } else {
                (b - a) / m
            }
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum();
    Ok(total / points.len() as f64)
}
