//! The full protocol driven by a run manifest: generate, label, transfer.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::{generate_dataset, label_rows, transfer_run, write_report, GenerateOptions, GridSpec, Metrics, PointFailure, TransferReport};
use crate::dataset::save_dataset;
use crate::eigensolver::SolverConfig;
use crate::error::{Error, Result};
use crate::features::FeatureRow;
use crate::hamiltonians::Model;
use crate::labels::{builtin_label_map, load_label_map, LabelMap};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub site_count: usize,
    pub k: usize,
    #[serde(default)]
    pub solver: SolverConfig,
    /// One grid per model. Their `site_count` is overridden by the manifest's.
    pub grid: Vec<GridSpec>,
    /// Label-map CSV per model name (`H1`, ...); missing models use the
    /// shipped diagrams.
    #[serde(default)]
    pub label_maps: BTreeMap<String, PathBuf>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
}

impl RunManifest {
    /// N = 8, 30x30 / 30x30 / 600 points, k = 9.
    pub fn desk() -> Self {
        Self::with(8, 9, |m| GridSpec::desk(m, 8))
    }

    /// N = 12, 80x80 / 80x80 / 4600 points, k = 30.
    pub fn canonical() -> Self {
        Self::with(12, 30, |m| GridSpec::canonical(m, 12))
    }

    fn with(site_count: usize, k: usize, grid: impl Fn(Model) -> GridSpec) -> Self {
        Self {
            site_count,
            k,
            solver: SolverConfig::default(),
            grid: Model::ALL.iter().map(|m| grid(*m)).collect(),
            label_maps: BTreeMap::new(),
            out_dir: None,
            cache_dir: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let m: Self = toml::from_str(text).map_err(|e| Error::Format { what: "manifest", detail: e.to_string() })?;
        m.validate()?;
        Ok(m)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidK { k: 0, rows: 0 });
        }
        self.solver.validate()?;
        for model in Model::ALL {
            let n = self.grid.iter().filter(|g| g.model == model).count();
            if n != 1 {
                return Err(Error::InvalidConfig(format!("manifest needs exactly one {model} grid, found {n}")));
            }
            self.grid_for(model).validate()?;
        }
        for name in self.label_maps.keys() {
            name.parse::<Model>()?;
        }
        Ok(())
    }

    pub fn grid_for(&self, model: Model) -> GridSpec {
        let g = self.grid.iter().find(|g| g.model == model).expect("validated manifest");
        GridSpec { site_count: self.site_count, ..*g }
    }

    fn label_map(&self, model: Model) -> Result<LabelMap> {
        let key = self.label_maps.iter().find(|(k, _)| k.parse::<Model>().ok() == Some(model));
        match key {
            Some((_, path)) => load_label_map(path),
            None => builtin_label_map(model, &self.grid_for(model).points()),
        }
    }
}

/// Writes the resolved manifest with a leading timestamp comment.
pub fn write_manifest_echo(dir: &Path, manifest: &RunManifest) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let t = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    std::fs::write(dir.join("manifest.echo.toml"), format!("# generated at unix time {t}\n{}", manifest.to_toml()))?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct TransferRun {
    pub report: TransferReport,
    pub metrics: Metrics,
}

#[derive(Debug, Clone)]
pub struct ProtocolOutcome {
    /// Labeled datasets.
    pub datasets: BTreeMap<Model, Vec<FeatureRow>>,
    pub failures: Vec<PointFailure>,
    /// One run per target, in the order H1, H2, H3.
    pub runs: Vec<TransferRun>,
}

/// Generates and labels all three datasets, then predicts each model from
/// the other two. Writes datasets, reports and a manifest echo when
/// `out_dir` is set.
pub fn run_protocol(manifest: &RunManifest) -> Result<ProtocolOutcome> {
    manifest.validate()?;
    let opts = GenerateOptions { cache_dir: manifest.cache_dir.clone().or_else(|| GenerateOptions::from_env().cache_dir) };
    let mut datasets = BTreeMap::new();
    let mut failures = Vec::new();
    for model in Model::ALL {
        let generated = generate_dataset(&manifest.grid_for(model), &manifest.solver, &opts)?;
        failures.extend(generated.failures);
        datasets.insert(model, label_rows(&generated.rows, &manifest.label_map(model)?)?);
    }
    if let Some(dir) = &manifest.out_dir {
        write_manifest_echo(dir, manifest)?;
        for (model, rows) in &datasets {
            save_dataset(&dir.join(format!("{}.csv", model.name().to_lowercase())), rows)?;
        }
    }
    let mut runs = Vec::new();
    for target in Model::ALL {
        let train: Vec<&Vec<FeatureRow>> = Model::ALL.iter().filter(|m| **m != target).map(|m| &datasets[m]).collect();
        let report = transfer_run(train[0], train[1], &datasets[&target], manifest.k)?;
        let metrics = match &manifest.out_dir {
            Some(dir) => write_report(&dir.join(format!("target_{}", target.name().to_lowercase())), &report)?,
            None => super::evaluate(&report),
        };
        runs.push(TransferRun { report, metrics });
    }
    Ok(ProtocolOutcome { datasets, failures, runs })
}
