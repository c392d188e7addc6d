use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::linalg::sq_dist;
use super::{row, DatasetMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KnnParams {
    pub k: usize,
}

impl Default for KnnParams {
    fn default() -> Self {
        KnnParams { k: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnState {
    pub k: usize,
    pub x: Array2<f64>,
    pub y: Vec<bool>,
}

pub fn fit(p: &KnnParams, data: &DatasetMatrix) -> Result<KnnState> {
    if p.k == 0 {
        return Err(Error::Config("knn k must be at least 1".into()));
    }
    Ok(KnnState {
        k: p.k,
        x: data.x.clone(),
        y: data.y.clone(),
    })
}

impl KnnState {
    /// Indices of the `k` nearest training rows (Euclidean), ties by index.
    pub fn neighbors(&self, q: &[f64]) -> Vec<usize> {
        let mut d: Vec<(f64, usize)> = (0..self.x.nrows()).map(|i| (sq_dist(row(&self.x, i), q), i)).collect();
        d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        d.into_iter().take(self.k).map(|(_, i)| i).collect()
    }

    /// Fraction of positive labels among the neighbours.
    pub fn score(&self, q: &[f64]) -> f64 {
        let nb = self.neighbors(q);
        nb.iter().filter(|&&i| self.y[i]).count() as f64 / nb.len() as f64
    }
}
