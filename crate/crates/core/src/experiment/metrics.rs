use std::collections::BTreeMap;

use serde::Serialize;

use super::TransferReport;
use crate::labels::PhaseLabel;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseMetrics {
    pub label: PhaseLabel,
    /// Test rows with this true label.
    pub support: usize,
    /// Test rows predicted as this label.
    pub predicted: usize,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

/// Accuracy over a subset of the retained test rows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Subset {
    pub count: usize,
    pub correct: usize,
    pub accuracy: Option<f64>,
}

impl Subset {
    fn from_iter<'a>(preds: impl Iterator<Item = &'a super::PointPrediction>) -> Self {
        let (mut count, mut correct) = (0, 0);
        for p in preds {
            count += 1;
            correct += usize::from(p.truth == p.predicted);
        }
        Self { count, correct, accuracy: (count > 0).then(|| correct as f64 / count as f64) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub correct: usize,
    pub total: usize,
    pub per_phase: Vec<PhaseMetrics>,
    /// Accuracy of always predicting the most common retained true label.
    pub majority_baseline: f64,
    pub majority_label: Option<PhaseLabel>,
    pub degenerate: Subset,
    pub boundary_band: Subset,
    pub interior: Subset,
}

pub fn evaluate(report: &TransferReport) -> Metrics {
    let c = &report.confusion;
    let n = c.labels.len();
    let per_phase = (0..n)
        .map(|i| {
            let support: usize = c.counts[i].iter().sum();
            let predicted: usize = (0..n).map(|r| c.counts[r][i]).sum();
            let hit = c.counts[i][i] as f64;
            PhaseMetrics {
                label: c.labels[i],
                support,
                predicted,
                precision: (predicted > 0).then(|| hit / predicted as f64),
                recall: (support > 0).then(|| hit / support as f64),
            }
        })
        .collect::<Vec<_>>();
    let mut truth_counts: BTreeMap<PhaseLabel, usize> = BTreeMap::new();
    for p in &report.predictions {
        *truth_counts.entry(p.truth).or_insert(0) += 1;
    }
    let majority = truth_counts.iter().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)));
    let total = c.total();
    let preds = &report.predictions;
    Metrics {
        accuracy: c.accuracy(),
        correct: c.trace(),
        total,
        per_phase,
        majority_baseline: majority.map_or(0.0, |(_, m)| *m as f64 / total.max(1) as f64),
        majority_label: majority.map(|(l, _)| *l),
        degenerate: Subset::from_iter(preds.iter().filter(|p| p.degenerate)),
        boundary_band: Subset::from_iter(preds.iter().filter(|p| p.near_boundary)),
        interior: Subset::from_iter(preds.iter().filter(|p| !p.near_boundary)),
    }
}
