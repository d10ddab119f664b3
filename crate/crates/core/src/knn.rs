//! Exact k-nearest-neighbour classification, Euclidean metric, uniform votes.
//!
//! Neighbours are ranked by (distance, feature vector in lexicographic order,
//! label), so the prediction never depends on the order of the training rows.
//! A tied vote goes to the tied class whose member is nearest.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::features::NormalizedRow;
use crate::labels::PhaseLabel;
use crate::par;

pub const DEFAULT_K: usize = 30;

#[derive(Debug, Clone, PartialEq)]
pub struct KnnModel {
    vectors: Vec<Vec<f64>>,
    labels: Vec<PhaseLabel>,
    k: usize,
    dim: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label: PhaseLabel,
    pub votes: BTreeMap<PhaseLabel, usize>,
    /// Training indices of the k nearest rows, nearest first.
    pub neighbor_indices: Vec<usize>,
    pub neighbor_distances: Vec<f64>,
}

fn lex(a: &[f64], b: &[f64]) -> Ordering {
    a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(Ordering::Equal)
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Training rows must be spatial-sign normalized and labeled.
pub fn fit(rows: &[NormalizedRow], k: usize) -> Result<KnnModel> {
    let mut labels = Vec::with_capacity(rows.len());
    for (i, r) in rows.iter().enumerate() {
        labels.push(r.label().ok_or(Error::UnlabeledTrainingRow(i))?);
    }
    KnnModel::from_vectors(rows.iter().map(|r| r.features().to_vec()).collect(), labels, k)
}

impl KnnModel {
    /// Fits on raw vectors; no normalization is implied.
    pub fn from_vectors(vectors: Vec<Vec<f64>>, labels: Vec<PhaseLabel>, k: usize) -> Result<Self> {
        if vectors.is_empty() {
            return Err(Error::EmptyTraining);
        }
        if vectors.len() != labels.len() {
            return Err(Error::DimensionMismatch { expected: vectors.len(), actual: labels.len() });
        }
        if k == 0 || k > vectors.len() {
            return Err(Error::InvalidK { k, rows: vectors.len() });
        }
        let dim = vectors[0].len();
        if let Some(v) = vectors.iter().find(|v| v.len() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, actual: v.len() });
        }
        Ok(Self { vectors, labels, k, dim })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn labels(&self) -> &[PhaseLabel] {
        &self.labels
    }

    fn rank(&self, d2: &[f64], a: usize, b: usize) -> Ordering {
        d2[a]
            .total_cmp(&d2[b])
            .then_with(|| lex(&self.vectors[a], &self.vectors[b]))
            .then_with(|| self.labels[a].as_str().cmp(self.labels[b].as_str()))
            .then(a.cmp(&b))
    }

    pub fn predict(&self, query: &[f64]) -> Result<Prediction> {
        if query.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, actual: query.len() });
        }
        let d2: Vec<f64> = self.vectors.iter().map(|v| squared_distance(v, query)).collect();
        let mut idx: Vec<usize> = (0..d2.len()).collect();
        let k = self.k;
        if k < idx.len() {
            idx.select_nth_unstable_by(k - 1, |&a, &b| self.rank(&d2, a, b));
            idx.truncate(k);
        }
        idx.sort_unstable_by(|&a, &b| self.rank(&d2, a, b));

        let mut votes = BTreeMap::new();
        for &i in &idx {
            *votes.entry(self.labels[i]).or_insert(0usize) += 1;
        }
        let top = votes.values().copied().max().unwrap_or(0);
        let label = idx
            .iter()
            .map(|&i| self.labels[i])
            .find(|l| votes[l] == top)
            .expect("k >= 1");
        let neighbor_distances = idx.iter().map(|&i| d2[i].sqrt()).collect();
        Ok(Prediction { label, votes, neighbor_indices: idx, neighbor_distances })
    }

    /// Normalized query; the type guarantees train and test share the transform.
    pub fn predict_row(&self, row: &NormalizedRow) -> Result<Prediction> {
        self.predict(row.features())
    }

    /// Elementwise [`predict`](Self::predict), in input order.
    pub fn predict_batch(&self, queries: &[Vec<f64>]) -> Result<Vec<Prediction>> {
        par::map(queries, |q| self.predict(q)).into_iter().collect()
    }

    pub fn predict_rows(&self, rows: &[NormalizedRow]) -> Result<Vec<Prediction>> {
        par::map(rows, |r| self.predict_row(r)).into_iter().collect()
    }
}
