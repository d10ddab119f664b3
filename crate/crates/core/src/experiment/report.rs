//! Report files: `report.toml` and `phase_map.csv`.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{boundary_flags_from_predictions, evaluate, Confusion, Metrics, PointPrediction, TransferReport};
use crate::error::{Error, Result};
use crate::hamiltonians::Model;
use crate::labels::{format_params, parse_params, PhaseLabel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionFile {
    /// Axis labels; rows are true labels, columns predicted labels.
    pub labels: Vec<PhaseLabel>,
    pub matrix: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub target: Model,
    pub training_models: Vec<Model>,
    pub k: usize,
    pub training_rows: usize,
    pub test_rows: usize,
    pub removed_rows: usize,
    pub removed_phases: Vec<PhaseLabel>,
    pub accuracy: f64,
    pub majority_baseline: f64,
    pub degenerate_rows: usize,
    pub degenerate_correct: usize,
    pub boundary_rows: usize,
    pub boundary_correct: usize,
    pub interior_rows: usize,
    pub interior_correct: usize,
    pub confusion: ConfusionFile,
    pub phase: Vec<PhaseLine>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseLine {
    pub label: PhaseLabel,
    pub support: usize,
    pub predicted: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precision: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recall: Option<f64>,
}

impl ReportFile {
    pub fn new(report: &TransferReport, m: &Metrics) -> Self {
        Self {
            target: report.target,
            training_models: report.training_models.clone(),
            k: report.k,
            training_rows: report.training_rows,
            test_rows: m.total,
            removed_rows: report.removed_rows,
            removed_phases: report.removed_phases.clone(),
            accuracy: m.accuracy,
            majority_baseline: m.majority_baseline,
            degenerate_rows: m.degenerate.count,
            degenerate_correct: m.degenerate.correct,
            boundary_rows: m.boundary_band.count,
            boundary_correct: m.boundary_band.correct,
            interior_rows: m.interior.count,
            interior_correct: m.interior.correct,
            confusion: ConfusionFile { labels: report.confusion.labels.clone(), matrix: report.confusion.counts.clone() },
            phase: m
                .per_phase
                .iter()
                .map(|p| PhaseLine { label: p.label, support: p.support, predicted: p.predicted, precision: p.precision, recall: p.recall })
                .collect(),
        }
    }

    /// Rebuilds a report from this file and its phase map. Degeneracy flags
    /// are not stored in the phase map and come back as `false`.
    pub fn to_report(&self, predictions: Vec<PointPrediction>) -> Result<TransferReport> {
        let mut confusion = Confusion::new(self.confusion.labels.clone());
        for p in &predictions {
            if confusion.index(p.truth).is_none() || confusion.index(p.predicted).is_none() {
                return Err(Error::Format { what: "phase map", detail: format!("label outside {:?}", confusion.labels) });
            }
            confusion.add(p.truth, p.predicted);
        }
        Ok(TransferReport {
            target: self.target,
            training_models: self.training_models.clone(),
            k: self.k,
            training_rows: self.training_rows,
            training_labels: self.confusion.labels.clone(),
            removed_phases: self.removed_phases.clone(),
            removed_rows: self.removed_rows,
            accuracy: confusion.accuracy(),
            confusion,
            predictions,
        })
    }
}

const PHASE_MAP_HEADER: [&str; 4] = ["p1", "p2", "true_label", "predicted_label"];

pub fn write_phase_map<W: Write>(out: W, predictions: &[PointPrediction]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(PHASE_MAP_HEADER)?;
    for p in predictions {
        let [a, b] = format_params(&p.params);
        w.write_record([a.as_str(), b.as_str(), p.truth.as_str(), p.predicted.as_str()])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a phase map of `model`. Boundary flags are recomputed from the
/// true labels of the listed points.
pub fn read_phase_map<R: Read>(input: R, model: Model) -> Result<Vec<PointPrediction>> {
    let mut r = csv::Reader::from_reader(input);
    if r.headers()?.iter().collect::<Vec<_>>() != PHASE_MAP_HEADER {
        return Err(Error::Format { what: "phase map", detail: format!("expected header {}", PHASE_MAP_HEADER.join(",")) });
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != 4 {
            return Err(Error::Format { what: "phase map", detail: format!("{} columns", rec.len()) });
        }
        out.push(PointPrediction {
            params: parse_params(model.name(), &rec[0], &rec[1], "phase map")?,
            truth: rec[2].parse()?,
            predicted: rec[3].parse()?,
            degenerate: false,
            near_boundary: false,
        });
    }
    let flags = boundary_flags_from_predictions(&out);
    for (p, f) in out.iter_mut().zip(flags) {
        p.near_boundary = f;
    }
    Ok(out)
}

/// Writes `report.toml` and `phase_map.csv` into `dir`.
pub fn write_report(dir: &Path, report: &TransferReport) -> Result<Metrics> {
    std::fs::create_dir_all(dir)?;
    let metrics = evaluate(report);
    let file = ReportFile::new(report, &metrics);
    let text = toml::to_string(&file).map_err(|e| Error::Format { what: "report", detail: e.to_string() })?;
    std::fs::write(dir.join("report.toml"), text)?;
    write_phase_map(std::io::BufWriter::new(std::fs::File::create(dir.join("phase_map.csv"))?), &report.predictions)?;
    Ok(metrics)
}

pub fn read_report(dir: &Path) -> Result<TransferReport> {
    let text = std::fs::read_to_string(dir.join("report.toml"))?;
    let file: ReportFile = toml::from_str(&text).map_err(|e| Error::Format { what: "report", detail: e.to_string() })?;
    let preds = read_phase_map(std::fs::File::open(dir.join("phase_map.csv"))?, file.target)?;
    file.to_report(preds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonians::Params;
    use PhaseLabel::*;

    #[test]
    fn phase_map_and_report_round_trip() {
        let preds: Vec<PointPrediction> = (0..6)
            .map(|i| PointPrediction {
                params: Params::H2 { anisotropy: (i / 3) as f64 * 0.5, alternation: (i % 3) as f64 * 0.25 },
                truth: if i < 3 { Haldane } else { Neel },
                predicted: if i == 4 { Haldane } else if i < 3 { Haldane } else { Neel },
                degenerate: false,
                near_boundary: true,
            })
            .collect();
        let mut confusion = Confusion::new(vec![Haldane, Neel]);
        preds.iter().for_each(|p| confusion.add(p.truth, p.predicted));
        let report = TransferReport {
            target: Model::H2,
            training_models: vec![Model::H1, Model::H3],
            k: 1,
            training_rows: 4,
            training_labels: vec![Haldane, Neel],
            removed_phases: vec![Dimer],
            removed_rows: 3,
            accuracy: confusion.accuracy(),
            confusion,
            predictions: preds,
        };
        let dir = tempfile::tempdir().unwrap();
        let m = write_report(dir.path(), &report).unwrap();
        assert!((m.accuracy - 5.0 / 6.0).abs() < 1e-15);
        let back = read_report(dir.path()).unwrap();
        assert_eq!(back, report);
        let csv = std::fs::read(dir.path().join("phase_map.csv")).unwrap();
        let mut again = Vec::new();
        write_phase_map(&mut again, &back.predictions).unwrap();
        assert_eq!(csv, again);
    }
}
