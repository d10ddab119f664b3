//! Parameter grids, dataset generation and the train-on-two, predict-the-third
//! transfer protocol.

mod metrics;
mod protocol;
mod report;

pub use metrics::{evaluate, Metrics, PhaseMetrics, Subset};
pub use protocol::{run_protocol, ProtocolOutcome, RunManifest, TransferRun};
pub use report::{read_phase_map, read_report, write_phase_map, write_report, ReportFile};

use std::collections::{BTreeSet, HashMap};
use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::{header, load_dataset};
use crate::eigensolver::{solve, SolverConfig};
use crate::error::{Error, Result};
use crate::features::{extract_features, spatial_sign, FeatureRow, NormalizedRow};
use crate::hamiltonians::{Model, ModelSpec, Params};
use crate::knn::fit;
use crate::labels::{format_float, label_point, LabelMap, PhaseLabel};
use crate::par;

/// Environment variable naming the dataset cache directory.
pub const CACHE_ENV: &str = "QPHASE_CACHE_DIR";

/// Largest tolerated share of failed grid points.
pub const FAILURE_BUDGET: f64 = 0.01;

/// Evenly spaced values; `inclusive` decides whether `end` is a grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisRange {
    pub start: f64,
    pub end: f64,
    pub count: usize,
    #[serde(default = "inclusive_default")]
    pub inclusive: bool,
}

fn inclusive_default() -> bool {
    true
}

impl AxisRange {
    pub fn inclusive(start: f64, end: f64, count: usize) -> Self {
        Self { start, end, count, inclusive: true }
    }

    pub fn right_open(start: f64, end: f64, count: usize) -> Self {
        Self { start, end, count, inclusive: false }
    }

    fn divisions(&self) -> f64 {
        if self.inclusive {
            (self.count - 1) as f64
        } else {
            self.count as f64
        }
    }

    pub fn step(&self) -> f64 {
        (self.end - self.start) / self.divisions()
    }

    pub fn values(&self) -> Vec<f64> {
        let div = self.divisions();
        (0..self.count)
            .map(|i| if self.inclusive && i + 1 == self.count { self.end } else { self.start + (self.end - self.start) * i as f64 / div })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub model: Model,
    #[serde(default)]
    pub site_count: usize,
    pub p1: AxisRange,
    #[serde(default)]
    pub p2: Option<AxisRange>,
}

impl GridSpec {
    /// 80x80 for H1 and H2, 4600 angles for H3.
    pub fn canonical(model: Model, site_count: usize) -> Self {
        Self::with_counts(model, site_count, 80, 4600)
    }

    /// 30x30 for H1 and H2, 600 angles for H3.
    pub fn desk(model: Model, site_count: usize) -> Self {
        Self::with_counts(model, site_count, 30, 600)
    }

    /// `side x side` points for H1 and H2 and `angles` points for H3.
    pub fn with_counts(model: Model, site_count: usize, side: usize, angles: usize) -> Self {
        let (p1, p2) = match model {
            Model::H1 => (AxisRange::inclusive(-4.0, 4.0, side), Some(AxisRange::inclusive(-4.0, 4.0, side))),
            Model::H2 => (AxisRange::inclusive(-1.5, 2.5, side), Some(AxisRange::inclusive(0.0, 1.0, side))),
            Model::H3 => (AxisRange::right_open(0.0, TAU, angles), None),
        };
        Self { model, site_count, p1, p2 }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        if self.p2.is_some() != (self.model.param_count() == 2) {
            return bad(format!("{} grid needs {} axes", self.model, self.model.param_count()));
        }
        for a in std::iter::once(&self.p1).chain(&self.p2) {
            if a.count < 2 || !a.start.is_finite() || !a.end.is_finite() {
                return bad(format!("axis {a:?} needs at least 2 finite points"));
            }
        }
        ModelSpec::new(Params::from_columns(self.model, self.p1.start, self.p2.map(|a| a.start))?, self.site_count)?;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.p1.count * self.p2.map_or(1, |a| a.count)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Points with `p1` as the outer index.
    pub fn points(&self) -> Vec<Params> {
        let xs = self.p1.values();
        match self.p2 {
            None => xs.iter().map(|&x| Params::from_columns(self.model, x, None).unwrap()).collect(),
            Some(a) => {
                let ys = a.values();
                xs.iter().flat_map(|&x| ys.iter().map(move |&y| (x, y))).map(|(x, y)| Params::from_columns(self.model, x, Some(y)).unwrap()).collect()
            }
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct GenerateOptions {
    pub cache_dir: Option<PathBuf>,
}

impl GenerateOptions {
    /// Cache directory from [`CACHE_ENV`], if set.
    pub fn from_env() -> Self {
        Self { cache_dir: std::env::var_os(CACHE_ENV).map(PathBuf::from) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointFailure {
    pub params: Params,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct Generated {
    /// One row per successful grid point, in grid order.
    pub rows: Vec<FeatureRow>,
    pub failures: Vec<PointFailure>,
    /// Rows taken from the cache instead of being recomputed.
    pub cached: usize,
}

/// Ground state, degeneracy flag and features of one point.
pub fn compute_row(spec: &ModelSpec, cfg: &SolverConfig) -> Result<FeatureRow> {
    let sol = solve(spec, cfg)?;
    let mut row = extract_features(&sol.ground, spec)?;
    row.degenerate = sol.is_degenerate();
    Ok(row)
}

pub fn cache_file(dir: &Path, model: Model, site_count: usize, cfg: &SolverConfig) -> PathBuf {
    dir.join(format!("{}_n{site_count}_tol{:e}_seed{:x}.csv", model.name().to_lowercase(), cfg.tol, cfg.seed))
}

type Key = (u64, u64);

fn key(p: &Params) -> Key {
    (p.p1().to_bits(), p.p2().map_or(0, f64::to_bits))
}

fn append_rows(path: &Path, rows: &[FeatureRow]) -> Result<()> {
    use std::io::Write;
    let Some(first) = rows.first() else { return Ok(()) };
    let fresh = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let mut buf = Vec::new();
    crate::dataset::write_dataset(&mut buf, rows)?;
    let body = if fresh {
        &buf[..]
    } else {
        let header_len = header(first.site_count).join(",").len() + 1;
        &buf[header_len..]
    };
    let mut f = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
    f.write_all(body)?;
    Ok(())
}

/// Solves every grid point and extracts its features.
///
/// With a cache directory, rows already on disk are reused and new rows are
/// appended after each chunk, so an interrupted run resumes where it stopped.
/// More than [`FAILURE_BUDGET`] failed points abort with
/// [`Error::FailureBudget`].
pub fn generate_dataset(grid: &GridSpec, cfg: &SolverConfig, opts: &GenerateOptions) -> Result<Generated> {
    grid.validate()?;
    cfg.validate()?;
    let points = grid.points();
    let total = points.len();
    let budget = (total as f64 * FAILURE_BUDGET).floor() as usize;

    let cache = opts.cache_dir.as_ref().map(|d| cache_file(d, grid.model, grid.site_count, cfg));
    let mut known: HashMap<Key, FeatureRow> = HashMap::new();
    if let Some(path) = &cache {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        if path.exists() {
            for row in load_dataset(path)? {
                if row.site_count == grid.site_count {
                    known.insert(key(&row.params), row);
                }
            }
        }
    }
    let cached = points.iter().filter(|p| known.contains_key(&key(p))).count();
    let todo: Vec<Params> = points.iter().filter(|p| !known.contains_key(&key(p))).copied().collect();

    let mut failures = Vec::new();
    let chunk = (8 * par::current_workers()).max(64);
    for batch in todo.chunks(chunk) {
        let results = par::map(batch, |p| ModelSpec::new(*p, grid.site_count).and_then(|s| compute_row(&s, cfg)));
        let mut fresh = Vec::new();
        for (p, r) in batch.iter().zip(results) {
            match r {
                Ok(row) => fresh.push(row),
                Err(e) => failures.push(PointFailure { params: *p, message: e.to_string() }),
            }
        }
        if let Some(path) = &cache {
            append_rows(path, &fresh)?;
        }
        known.extend(fresh.into_iter().map(|r| (key(&r.params), r)));
        if failures.len() > budget {
            return Err(Error::FailureBudget { failed: failures.len(), total });
        }
    }
    let rows = points.iter().filter_map(|p| known.remove(&key(p))).collect();
    Ok(Generated { rows, failures, cached })
}

/// Attaches labels from `map`; any unmapped row is an error.
pub fn label_rows(rows: &[FeatureRow], map: &LabelMap) -> Result<Vec<FeatureRow>> {
    rows.iter()
        .map(|r| Ok(FeatureRow { label: Some(label_point(map, &r.params)?), ..r.clone() }))
        .collect()
}

/// Rows per true label, true labels by row, predicted labels by column.
#[derive(Debug, Clone, PartialEq)]
pub struct Confusion {
    pub labels: Vec<PhaseLabel>,
    pub counts: Vec<Vec<usize>>,
}

impl Confusion {
    pub fn new(labels: Vec<PhaseLabel>) -> Self {
        let n = labels.len();
        Self { labels, counts: vec![vec![0; n]; n] }
    }

    pub fn index(&self, label: PhaseLabel) -> Option<usize> {
        self.labels.iter().position(|l| *l == label)
    }

    pub fn add(&mut self, truth: PhaseLabel, predicted: PhaseLabel) {
        let (i, j) = (self.index(truth).expect("known truth"), self.index(predicted).expect("known prediction"));
        self.counts[i][j] += 1;
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> usize {
        (0..self.labels.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            t => self.trace() as f64 / t as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointPrediction {
    pub params: Params,
    pub truth: PhaseLabel,
    pub predicted: PhaseLabel,
    pub degenerate: bool,
    /// Within one grid step of a change of the true label.
    pub near_boundary: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransferReport {
    pub target: Model,
    pub training_models: Vec<Model>,
    pub k: usize,
    pub training_rows: usize,
    /// Phases of the training set, also the axes of `confusion`.
    pub training_labels: Vec<PhaseLabel>,
    pub removed_phases: Vec<PhaseLabel>,
    pub removed_rows: usize,
    pub accuracy: f64,
    pub confusion: Confusion,
    pub predictions: Vec<PointPrediction>,
}

fn sorted_unique(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Marks rows whose grid neighbours (one step along any axis) carry a
/// different label. One-parameter grids wrap around.
pub fn boundary_flags(rows: &[FeatureRow]) -> Vec<bool> {
    flags_for(&rows.iter().map(|r| (r.params, r.label)).collect::<Vec<_>>())
}

/// [`boundary_flags`] computed from the true labels of predictions.
pub fn boundary_flags_from_predictions(preds: &[PointPrediction]) -> Vec<bool> {
    flags_for(&preds.iter().map(|p| (p.params, Some(p.truth))).collect::<Vec<_>>())
}

fn flags_for(points: &[(Params, Option<PhaseLabel>)]) -> Vec<bool> {
    let labels: HashMap<Key, Option<PhaseLabel>> = points.iter().map(|(p, l)| (key(p), *l)).collect();
    let xs = sorted_unique(points.iter().map(|(p, _)| p.p1()).collect());
    let two_d = points.first().is_some_and(|(p, _)| p.p2().is_some());
    let ys = sorted_unique(points.iter().filter_map(|(p, _)| p.p2()).collect());
    let pos = |v: &[f64], x: f64| v.binary_search_by(|a| a.total_cmp(&x)).ok();
    points
        .iter()
        .map(|(p, label)| {
            let i = pos(&xs, p.p1()).unwrap();
            let mut neighbours: Vec<Key> = Vec::new();
            if two_d {
                let j = pos(&ys, p.p2().unwrap()).unwrap();
                for (di, dj) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
                    let (a, b) = (i as i64 + di, j as i64 + dj);
                    if (0..xs.len() as i64).contains(&a) && (0..ys.len() as i64).contains(&b) {
                        neighbours.push((xs[a as usize].to_bits(), ys[b as usize].to_bits()));
                    }
                }
            } else if xs.len() >= 3 {
                let n = xs.len();
                neighbours.push((xs[(i + n - 1) % n].to_bits(), 0));
                neighbours.push((xs[(i + 1) % n].to_bits(), 0));
            }
            neighbours.iter().filter_map(|k| labels.get(k)).any(|l| l != label)
        })
        .collect()
}

fn normalize(rows: &[FeatureRow]) -> Result<Vec<NormalizedRow>> {
    rows.iter().map(spatial_sign).collect()
}

fn single_model(rows: &[FeatureRow], what: &str) -> Result<Model> {
    let models: BTreeSet<Model> = rows.iter().map(FeatureRow::model).collect();
    match models.len() {
        1 => Ok(*models.first().unwrap()),
        0 => Err(Error::InvalidSpec(format!("{what} dataset is empty"))),
        _ => Err(Error::InvalidSpec(format!("{what} dataset mixes models {models:?}"))),
    }
}

/// Trains on `train_a ∪ train_b` and predicts `test`, after dropping test
/// rows whose phase never occurs in training.
pub fn transfer_run(train_a: &[FeatureRow], train_b: &[FeatureRow], test: &[FeatureRow], k: usize) -> Result<TransferReport> {
    let target = single_model(test, "test")?;
    let mut training_models = vec![single_model(train_a, "training")?, single_model(train_b, "training")?];
    if training_models.contains(&target) {
        return Err(Error::InvalidSpec(format!("test model {target} also appears in training")));
    }
    training_models.dedup();
    let train: Vec<FeatureRow> = train_a.iter().chain(train_b).cloned().collect();
    for (i, r) in train.iter().enumerate() {
        if r.label.is_none() {
            return Err(Error::UnlabeledTrainingRow(i));
        }
    }
    if let Some(r) = test.iter().find(|r| r.label.is_none()) {
        return Err(Error::Unlabeled(format!("test row {}", r.params)));
    }

    let training_labels: Vec<PhaseLabel> = train.iter().filter_map(|r| r.label).collect::<BTreeSet<_>>().into_iter().collect();
    let flags = boundary_flags(test);
    let (kept, removed): (Vec<_>, Vec<_>) =
        test.iter().zip(flags).partition(|(r, _)| training_labels.contains(&r.label.unwrap()));
    let removed_phases: Vec<PhaseLabel> = removed.iter().filter_map(|(r, _)| r.label).collect::<BTreeSet<_>>().into_iter().collect();
    if kept.is_empty() {
        return Err(Error::EmptyTestSet);
    }

    let model = fit(&normalize(&train)?, k)?;
    let kept_rows: Vec<FeatureRow> = kept.iter().map(|(r, _)| (*r).clone()).collect();
    let predictions = model.predict_rows(&normalize(&kept_rows)?)?;

    let mut confusion = Confusion::new(training_labels.clone());
    let predictions: Vec<PointPrediction> = kept
        .iter()
        .zip(predictions)
        .map(|((r, near), p)| {
            let truth = r.label.unwrap();
            confusion.add(truth, p.label);
            PointPrediction { params: r.params, truth, predicted: p.label, degenerate: r.degenerate, near_boundary: *near }
        })
        .collect();
    Ok(TransferReport {
        target,
        training_models,
        k,
        training_rows: train.len(),
        training_labels,
        removed_phases,
        removed_rows: removed.len(),
        accuracy: confusion.accuracy(),
        confusion,
        predictions,
    })
}

/// Scatter export: two named features and the label of every row.
pub fn scatter(rows: &[FeatureRow], fx: &str, fy: &str, normalized: bool) -> Result<Vec<(f64, f64, Option<PhaseLabel>)>> {
    let Some(first) = rows.first() else { return Ok(Vec::new()) };
    let n = first.site_count;
    let idx = |name: &str| {
        crate::features::feature_index(name, n).ok_or_else(|| Error::InvalidSpec(format!("unknown feature {name:?} for N = {n}")))
    };
    let (ix, iy) = (idx(fx)?, idx(fy)?);
    rows.iter()
        .map(|r| {
            let f = if normalized { spatial_sign(r)?.features().to_vec() } else { r.features.clone() };
            Ok((f[ix], f[iy], r.label))
        })
        .collect()
}

pub fn write_scatter<W: std::io::Write>(out: W, points: &[(f64, f64, Option<PhaseLabel>)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["fx", "fy", "label"])?;
    for (x, y, l) in points {
        w.write_record([format_float(*x), format_float(*y), l.map(|l| l.to_string()).unwrap_or_default()])?;
    }
    w.flush()?;
    Ok(())
}
