use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use qphase_core::dataset::{load_dataset, save_dataset};
use qphase_core::eigensolver::SolverConfig;
use qphase_core::experiment::{
    evaluate, generate_dataset, label_rows, read_report, run_protocol, scatter, transfer_run, write_report, write_scatter,
    GenerateOptions, GridSpec, Metrics, RunManifest, TransferReport,
};
use qphase_core::labels::{builtin_label_map, load_label_map, save_label_map, table1, validate_counts, LabelMap};
use qphase_core::{Error, Model, Params};

#[derive(Parser)]
#[command(name = "qphase", version, about = "Spin-1 chain phase classification across models")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve every grid point and write its features.
    Gen(GenArgs),
    /// Attach phase labels to a dataset.
    Label(LabelArgs),
    /// Train on two datasets and predict a third.
    Transfer(TransferArgs),
    /// Recompute metrics from a report directory.
    Evaluate(EvaluateArgs),
    /// Export two features and the label of every row.
    Scatter(ScatterArgs),
    /// Compare a label map's phase counts with the reference counts.
    ValidateLabels(ValidateArgs),
    /// Write a label-map CSV from the shipped phase diagrams.
    Labelmap(LabelmapArgs),
    /// Run generation, labeling and all three transfers from a manifest.
    Pipeline(PipelineArgs),
}

#[derive(Args, Serialize)]
struct SolverArgs {
    /// Residual tolerance of each ground state.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 2000)]
    max_iterations: usize,
    /// Seed of the Lanczos start vectors.
    #[arg(long, default_value_t = SolverConfig::default().seed)]
    seed: u64,
}

impl SolverArgs {
    fn config(&self) -> SolverConfig {
        SolverConfig { tol: self.tol, max_iterations: self.max_iterations, seed: self.seed, ..SolverConfig::default() }
    }
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    model: Model,
    #[arg(long, default_value_t = 8)]
    n: usize,
    /// `AxB` for H1/H2, a point count for H3, or `canonical` / `desk`.
    #[arg(long, default_value = "desk")]
    grid: String,
    #[arg(long)]
    out: PathBuf,
    /// Cache directory (overrides QPHASE_CACHE_DIR).
    #[arg(long)]
    cache: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct LabelArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Label-map CSV, or `builtin` for the shipped diagrams.
    #[arg(long)]
    map: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TransferArgs {
    /// Two labeled datasets, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    train: Vec<PathBuf>,
    #[arg(long)]
    test: PathBuf,
    #[arg(long, default_value_t = 30)]
    k: usize,
    /// Output directory for report.toml and phase_map.csv.
    #[arg(long)]
    report: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    report: PathBuf,
}

#[derive(Args)]
struct ScatterArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    fx: String,
    #[arg(long)]
    fy: String,
    /// Apply the spatial-sign transform first.
    #[arg(long)]
    normalized: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ValidateArgs {
    /// `h1`, `h2`, `h3` (shipped labeler on the canonical grid) or a CSV path.
    #[arg(long)]
    map: String,
    /// Reference counts; only `table1` is known.
    #[arg(long, default_value = "table1")]
    counts: String,
}

#[derive(Args)]
struct LabelmapArgs {
    #[arg(long)]
    model: Model,
    /// Same forms as `gen --grid`.
    #[arg(long, default_value = "canonical")]
    grid: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PipelineArgs {
    /// Manifest TOML; without it the desk-scale defaults are used.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Output directory (overrides the manifest's out_dir).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_grid(model: Model, n: usize, text: &str) -> anyhow::Result<GridSpec> {
    let grid = match text {
        "canonical" => GridSpec::canonical(model, n),
        "desk" => GridSpec::desk(model, n),
        _ => {
            let parts: Vec<usize> = text
                .split('x')
                .map(str::parse)
                .collect::<Result<_, _>>()
                .with_context(|| format!("grid {text:?}: expected AxB, a count, canonical or desk"))?;
            match (model, parts.as_slice()) {
                (Model::H3, [c]) => GridSpec::with_counts(model, n, 2, *c),
                (Model::H1 | Model::H2, [a, b]) => {
                    let mut g = GridSpec::with_counts(model, n, *a, 2);
                    g.p2.as_mut().unwrap().count = *b;
                    g
                }
                _ => bail!("grid {text:?} does not fit {model} ({} axes)", model.param_count()),
            }
        }
    };
    grid.validate()?;
    Ok(grid)
}

fn load(path: &Path) -> anyhow::Result<Vec<qphase_core::features::FeatureRow>> {
    load_dataset(path).with_context(|| format!("reading dataset {}", path.display()))
}

fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn timestamp() -> u64 {
    std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// Resolved configuration of a run, written next to its outputs.
fn write_echo(path: &Path, value: &impl Serialize) -> anyhow::Result<()> {
    let body = toml::to_string(value)?;
    std::fs::write(path, format!("# generated at unix time {}\n{body}", timestamp()))
        .with_context(|| format!("writing {}", path.display()))
}

#[derive(Serialize)]
struct GenEcho<'a> {
    command: &'static str,
    out: &'a Path,
    workers: usize,
    grid: GridSpec,
    solver: SolverConfig,
    cache_dir: Option<&'a Path>,
}

fn gen(a: &GenArgs, workers: usize) -> anyhow::Result<()> {
    let grid = parse_grid(a.model, a.n, &a.grid)?;
    let cfg = a.solver.config();
    let mut opts = GenerateOptions::from_env();
    if a.cache.is_some() {
        opts.cache_dir = a.cache.clone();
    }
    let generated = generate_dataset(&grid, &cfg, &opts)?;
    for f in &generated.failures {
        eprintln!("warning: {} failed: {}", f.params, f.message);
    }
    save_dataset(&a.out, &generated.rows).with_context(|| format!("writing {}", a.out.display()))?;
    write_echo(
        &sidecar(&a.out, ".manifest.toml"),
        &GenEcho { command: "gen", out: &a.out, workers, grid, solver: cfg, cache_dir: opts.cache_dir.as_deref() },
    )?;
    let degenerate = generated.rows.iter().filter(|r| r.degenerate).count();
    println!(
        "{}: {} rows ({} cached, {} degenerate, {} failed)",
        a.out.display(),
        generated.rows.len(),
        generated.cached,
        degenerate,
        generated.failures.len()
    );
    Ok(())
}

fn map_for(spec: &str, model: Model, points: &[Params]) -> anyhow::Result<LabelMap> {
    if spec == "builtin" {
        return Ok(builtin_label_map(model, points)?);
    }
    let map = load_label_map(Path::new(spec)).with_context(|| format!("reading label map {spec}"))?;
    if map.model() != model {
        bail!("label map {spec} is for {}, dataset is {model}", map.model());
    }
    Ok(map)
}

fn label(a: &LabelArgs) -> anyhow::Result<()> {
    let rows = load(&a.input)?;
    let Some(first) = rows.first() else { bail!("dataset {} is empty", a.input.display()) };
    let points: Vec<Params> = rows.iter().map(|r| r.params).collect();
    let map = map_for(&a.map, first.model(), &points)?;
    let labeled = label_rows(&rows, &map)?;
    save_dataset(&a.out, &labeled).with_context(|| format!("writing {}", a.out.display()))?;
    println!("{}: {} rows labeled", a.out.display(), labeled.len());
    Ok(())
}

fn print_metrics(report: &TransferReport, m: &Metrics) {
    println!("target {}  trained on {:?}  k = {}", report.target, report.training_models, report.k);
    println!(
        "accuracy {:.4}  ({}/{})  majority baseline {:.4}",
        m.accuracy, m.correct, m.total, m.majority_baseline
    );
    if !report.removed_phases.is_empty() {
        println!("removed phases {:?} ({} rows)", report.removed_phases, report.removed_rows);
    }
    let fmt = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.3}"));
    println!("{:<14} {:>7} {:>9} {:>9}", "phase", "support", "precision", "recall");
    for p in &m.per_phase {
        println!("{:<14} {:>7} {:>9} {:>9}", p.label.as_str(), p.support, fmt(p.precision), fmt(p.recall));
    }
    println!("confusion (rows true, columns predicted): {:?}", report.confusion.labels);
    for (l, row) in report.confusion.labels.iter().zip(&report.confusion.counts) {
        println!("{:<14} {:?}", l.as_str(), row);
    }
    println!(
        "boundary band {}/{}  interior {}/{}  degenerate {}/{}",
        m.boundary_band.correct, m.boundary_band.count, m.interior.correct, m.interior.count, m.degenerate.correct, m.degenerate.count
    );
}

#[derive(Serialize)]
struct TransferEcho<'a> {
    command: &'static str,
    train: &'a [PathBuf],
    test: &'a Path,
    k: usize,
    report: &'a Path,
    workers: usize,
}

fn transfer(a: &TransferArgs, workers: usize) -> anyhow::Result<()> {
    if a.train.len() != 2 {
        bail!("--train takes exactly two datasets, got {}", a.train.len());
    }
    let (ta, tb, test) = (load(&a.train[0])?, load(&a.train[1])?, load(&a.test)?);
    let report = transfer_run(&ta, &tb, &test, a.k)?;
    let m = write_report(&a.report, &report)?;
    write_echo(
        &a.report.join("manifest.echo.toml"),
        &TransferEcho { command: "transfer", train: &a.train, test: &a.test, k: a.k, report: &a.report, workers },
    )?;
    print_metrics(&report, &m);
    Ok(())
}

fn evaluate_cmd(a: &EvaluateArgs) -> anyhow::Result<()> {
    let report = read_report(&a.report).with_context(|| format!("reading report in {}", a.report.display()))?;
    print_metrics(&report, &evaluate(&report));
    Ok(())
}

fn scatter_cmd(a: &ScatterArgs) -> anyhow::Result<()> {
    let rows = load(&a.input)?;
    let pts = scatter(&rows, &a.fx, &a.fy, a.normalized)?;
    let f = std::fs::File::create(&a.out).with_context(|| format!("writing {}", a.out.display()))?;
    write_scatter(std::io::BufWriter::new(f), &pts)?;
    println!("{}: {} points", a.out.display(), pts.len());
    Ok(())
}

/// Exit code 1 when the counts differ.
fn validate(a: &ValidateArgs) -> anyhow::Result<bool> {
    if a.counts != "table1" {
        bail!("unknown reference counts {:?} (expected table1)", a.counts);
    }
    let map = match a.map.parse::<Model>() {
        Ok(model) => builtin_label_map(model, &GridSpec::canonical(model, 12).points())?,
        Err(_) => load_label_map(Path::new(&a.map)).with_context(|| format!("reading label map {}", a.map))?,
    };
    let report = validate_counts(&map, &table1(map.model()));
    println!("{} label map\n{report}", map.model());
    if report.is_exact() {
        println!("all deltas zero");
    }
    Ok(report.is_exact())
}

fn labelmap(a: &LabelmapArgs) -> anyhow::Result<()> {
    let grid = parse_grid(a.model, 12, &a.grid)?;
    let map = builtin_label_map(a.model, &grid.points())?;
    if let Some(dir) = a.out.parent() {
        std::fs::create_dir_all(dir)?;
    }
    save_label_map(&a.out, &map).with_context(|| format!("writing {}", a.out.display()))?;
    println!("{}: {} points", a.out.display(), map.len());
    for (l, c) in map.counts() {
        println!("  {:<14} {c}", l.as_str());
    }
    Ok(())
}

fn pipeline(a: &PipelineArgs) -> anyhow::Result<()> {
    let mut manifest = match &a.manifest {
        Some(p) => RunManifest::from_toml(&std::fs::read_to_string(p).with_context(|| format!("reading manifest {}", p.display()))?)?,
        None => RunManifest::desk(),
    };
    if a.out.is_some() {
        manifest.out_dir = a.out.clone();
    }
    let out = run_protocol(&manifest)?;
    for f in &out.failures {
        eprintln!("warning: {} failed: {}", f.params, f.message);
    }
    for run in &out.runs {
        print_metrics(&run.report, &run.metrics);
        println!();
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let workers = cli.workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let body = || -> anyhow::Result<ExitCode> {
        match &cli.command {
            Command::Gen(a) => gen(a, workers)?,
            Command::Label(a) => label(a)?,
            Command::Transfer(a) => transfer(a, workers)?,
            Command::Evaluate(a) => evaluate_cmd(a)?,
            Command::Scatter(a) => scatter_cmd(a)?,
            Command::ValidateLabels(a) => {
                if !validate(a)? {
                    return Ok(ExitCode::from(1));
                }
            }
            Command::Labelmap(a) => labelmap(a)?,
            Command::Pipeline(a) => pipeline(a)?,
        }
        Ok(ExitCode::SUCCESS)
    };
    #[cfg(feature = "parallel")]
    {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build()?;
        pool.install(body)
    }
    #[cfg(not(feature = "parallel"))]
    {
        body()
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            let budget = e.chain().any(|c| matches!(c.downcast_ref::<Error>(), Some(Error::FailureBudget { .. })));
            ExitCode::from(if budget { 2 } else { 1 })
        }
    }
}
