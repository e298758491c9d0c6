//! Repeated split/train/evaluate experiments, sweeps, statistics and export.
//!
//! Seed layout: for master seed `m`, repetition `r` splits with stream
//! `(m, 2r)` and initializes (and shuffles mini-batches) with stream
//! `(m, 2r + 1)`. Synthetic datasets are drawn once from stream
//! `(m, DATA_STREAM)`. Streams do not depend on depth, order or
//! architecture, so every run of a sweep, and MLP and KAN runs sharing a
//! master seed, see the same 25 splits.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use kanbench_core::bspline::{GridConfig, SplineGrid};
use kanbench_core::data::{gen_printer_surrogate, gen_two_cluster, standardize_fit_apply, stratified_split, Dataset};
use kanbench_core::network::{Arch, ArchSpec, HeadKind, Network, NetworkSpec};
use kanbench_core::numerics::RngStream;
use kanbench_core::training::{evaluate_accuracy, fit, TrainConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::csv_io::{load_csv, Schema};
use crate::error::{BenchError, Result};

pub const DATA_STREAM: u64 = u64::MAX;
pub const SYNTHETIC_A_SIZE: usize = 1000;
pub const SYNTHETIC_B_SIZE: usize = 100;
pub const DEFAULT_REPS: usize = 25;
pub const DEFAULT_TEST_FRAC: f64 = 0.3;
pub const DEFAULT_WIDTH: usize = 2;
pub const SWEEP_ORDERS: [usize; 5] = [1, 2, 3, 4, 5];

pub const RESULTS_SCHEMA: &str = "kanbench-results";
pub const RESULTS_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DatasetRef {
    SyntheticA,
    SyntheticB,
    PrinterSurrogate,
    Csv { path: PathBuf, schema: Schema },
}

impl DatasetRef {
    pub fn label(&self) -> String {
        match self {
            DatasetRef::SyntheticA => "synthetic-a".into(),
            DatasetRef::SyntheticB => "synthetic-b".into(),
            DatasetRef::PrinterSurrogate => "printer-surrogate".into(),
            DatasetRef::Csv { path, .. } => path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| path.display().to_string()),
        }
    }

    /// Parses `synthetic-a`, `synthetic-b`, `printer-surrogate`, or treats the
    /// text as a CSV path read with `schema`.
    pub fn parse(text: &str, schema: Schema) -> Self {
        match text {
            "synthetic-a" => DatasetRef::SyntheticA,
            "synthetic-b" => DatasetRef::SyntheticB,
            "printer-surrogate" => DatasetRef::PrinterSurrogate,
            path => DatasetRef::Csv {
                path: path.into(),
                schema,
            },
        }
    }

    /// Materializes the dataset; the second value holds loader warnings.
    pub fn load(&self, master_seed: u64) -> Result<(Dataset, Vec<String>)> {
        let mut rng = RngStream::derive(master_seed, DATA_STREAM);
        let data = match self {
            DatasetRef::SyntheticA => gen_two_cluster(SYNTHETIC_A_SIZE, &mut rng)?,
            DatasetRef::SyntheticB => gen_two_cluster(SYNTHETIC_B_SIZE, &mut rng)?,
            DatasetRef::PrinterSurrogate => gen_printer_surrogate(&mut rng)?,
            DatasetRef::Csv { path, schema } => {
                let loaded = load_csv(path, *schema)?;
                return Ok((loaded.dataset, loaded.warnings));
            }
        };
        Ok((data, Vec::new()))
    }
}

impl fmt::Display for DatasetRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DatasetRef::Csv { path, schema } => write!(f, "{} ({})", path.display(), schema.as_str()),
            other => f.write_str(&other.label()),
        }
    }
}

/// Declarative description of one repeated experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub dataset: DatasetRef,
    pub arch: Arch,
    pub depth: usize,
    pub width: usize,
    /// Spline grid for KAN edges; ignored for MLPs.
    pub grid: GridConfig,
    pub reps: usize,
    pub test_frac: f64,
    pub train: TrainConfig,
    pub master_seed: u64,
    pub standardize: bool,
}

impl ExperimentSpec {
    /// Protocol defaults: width 2, G = 3, k = 3, 25 reps, 30 % test.
    pub fn new(dataset: DatasetRef, arch: Arch, depth: usize) -> Self {
        ExperimentSpec {
            dataset,
            arch,
            depth,
            width: DEFAULT_WIDTH,
            grid: GridConfig::default(),
            reps: DEFAULT_REPS,
            test_frac: DEFAULT_TEST_FRAC,
            train: TrainConfig::default(),
            master_seed: 0,
            standardize: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(BenchError::Config(m));
        if self.reps == 0 {
            return fail("reps must be at least 1".into());
        }
        if self.depth == 0 {
            return fail("depth must be at least 1".into());
        }
        if self.width == 0 {
            return fail("width must be at least 1".into());
        }
        if !(self.test_frac > 0.0 && self.test_frac < 1.0) {
            return fail(format!("test fraction must be in (0, 1), got {}", self.test_frac));
        }
        self.train.validate()?;
        if self.arch == Arch::Kan {
            SplineGrid::from_config(self.grid)?;
        }
        Ok(())
    }

    pub fn arch_spec(&self) -> ArchSpec {
        match self.arch {
            Arch::Mlp => ArchSpec::Mlp,
            Arch::Kan => ArchSpec::Kan { grid: self.grid },
        }
    }

    pub fn network_spec(&self, input_dim: usize, classes: usize) -> NetworkSpec {
        NetworkSpec::uniform(
            self.arch_spec(),
            input_dim,
            self.width,
            self.depth,
            HeadKind::for_classes(classes),
        )
    }

    /// Stream ids `(split, init)` of repetition `rep`.
    pub fn streams(rep: usize) -> (u64, u64) {
        let r = rep as u64;
        (2 * r, 2 * r + 1)
    }
}

/// Outcome of one repetition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionResult {
    pub rep_index: usize,
    /// Stream id under the spec's master seed.
    pub split_stream: u64,
    pub init_stream: u64,
    pub test_accuracy: f64,
    pub param_count: usize,
    /// Mean loss of the last completed epoch; absent when the first epoch diverged.
    pub final_train_loss: Option<f64>,
    /// Epoch at which the loss first became non-finite.
    pub diverged_epoch: Option<usize>,
    pub wall_time_ms: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub median: f64,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator); 0 when all values are equal.
    pub std: f64,
    pub reps: usize,
}

/// Order statistics of a non-empty sample. An even count takes the midpoint
/// of the two central values as the median.
pub fn summarize_values(values: &[f64]) -> Result<Summary> {
    if values.is_empty() {
        return Err(kanbench_core::Error::Usage("cannot summarize zero repetitions".into()).into());
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    };
    let mean = sorted.iter().sum::<f64>() / n as f64;
    let std = if n > 1 && sorted[0] != sorted[n - 1] {
        (sorted.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    Ok(Summary {
        median,
        min: sorted[0],
        max: sorted[n - 1],
        mean,
        std,
        reps: n,
    })
}

pub fn summarize(results: &[RepetitionResult]) -> Result<Summary> {
    let accs: Vec<f64> = results.iter().map(|r| r.test_accuracy).collect();
    summarize_values(&accs)
}

/// One experiment's spec, its per-repetition results (ordered by index) and summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub spec: ExperimentSpec,
    pub results: Vec<RepetitionResult>,
    pub summary: Summary,
}

impl RunRecord {
    pub fn param_count(&self) -> usize {
        self.results.first().map_or(0, |r| r.param_count)
    }

    /// Clears wall-clock fields, leaving only deterministic content.
    pub fn strip_timing(&mut self) {
        for r in &mut self.results {
            r.wall_time_ms = None;
        }
    }
}

fn run_repetition(spec: &ExperimentSpec, data: &Dataset, rep: usize) -> Result<RepetitionResult> {
    let start = Instant::now();
    let (split_stream, init_stream) = ExperimentSpec::streams(rep);
    let pair = stratified_split(
        data,
        spec.test_frac,
        &mut RngStream::derive(spec.master_seed, split_stream),
    )?;
    let pair = if spec.standardize {
        standardize_fit_apply(&pair).0
    } else {
        pair
    };
    let net_spec = spec.network_spec(data.dim(), data.class_count());
    let mut rng = RngStream::derive(spec.master_seed, init_stream);
    let net = Network::init(&net_spec, &mut rng)?;
    let outcome = fit(&net, &pair.train, &spec.train, &mut rng)?;
    let test_accuracy = evaluate_accuracy(&outcome.net, &pair.test)?;
    Ok(RepetitionResult {
        rep_index: rep,
        split_stream,
        init_stream,
        test_accuracy,
        param_count: net_spec.param_count(),
        final_train_loss: outcome.history.final_loss(),
        diverged_epoch: outcome.diverged.map(|(epoch, _)| epoch),
        wall_time_ms: Some(start.elapsed().as_secs_f64() * 1e3),
    })
}

/// Runs every repetition of `spec` on an already loaded dataset. With
/// `jobs > 1` repetitions run on a pool of that many threads; the results
/// are identical to a sequential run.
pub fn run_experiment_on(spec: &ExperimentSpec, data: &Dataset, jobs: usize) -> Result<RunRecord> {
    spec.validate()?;
    let results: Vec<RepetitionResult> = if jobs <= 1 {
        (0..spec.reps)
            .map(|r| run_repetition(spec, data, r))
            .collect::<Result<_>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| BenchError::Config(format!("cannot start {jobs} worker threads: {e}")))?;
        pool.install(|| {
            (0..spec.reps)
                .into_par_iter()
                .map(|r| run_repetition(spec, data, r))
                .collect::<Result<_>>()
        })?
    };
    let summary = summarize(&results)?;
    Ok(RunRecord {
        spec: spec.clone(),
        results,
        summary,
    })
}

pub fn run_experiment(spec: &ExperimentSpec, jobs: usize) -> Result<RunRecord> {
    spec.validate()?;
    let (data, _) = spec.dataset.load(spec.master_seed)?;
    run_experiment_on(spec, &data, jobs)
}

fn check_depths(depths: &[usize]) -> Result<()> {
    if depths.is_empty() {
        return Err(BenchError::Config("depth list is empty".into()));
    }
    if depths.contains(&0) {
        return Err(BenchError::Config("depths must be at least 1".into()));
    }
    Ok(())
}

/// One run per depth, in the given order, on a loaded dataset.
pub fn depth_sweep_on(base: &ExperimentSpec, depths: &[usize], data: &Dataset, jobs: usize) -> Result<Vec<RunRecord>> {
    check_depths(depths)?;
    depths
        .iter()
        .map(|&depth| run_experiment_on(&ExperimentSpec { depth, ..base.clone() }, data, jobs))
        .collect()
}

pub fn depth_sweep(base: &ExperimentSpec, depths: &[usize], jobs: usize) -> Result<Vec<RunRecord>> {
    check_depths(depths)?;
    base.validate()?;
    let (data, _) = base.dataset.load(base.master_seed)?;
    depth_sweep_on(base, depths, &data, jobs)
}

/// Checks the order-sweep preconditions: KAN, depth 2, width 2, orders in 1..=5.
pub fn check_order_sweep(base: &ExperimentSpec, orders: &[usize]) -> Result<()> {
    if base.arch != Arch::Kan {
        return Err(BenchError::Config("the order sweep applies to KANs only".into()));
    }
    if base.depth != 2 || base.width != 2 {
        return Err(BenchError::Config(format!(
            "the order sweep uses depth 2 and width 2, got depth {} and width {}",
            base.depth, base.width
        )));
    }
    if orders.is_empty() {
        return Err(BenchError::Config("order list is empty".into()));
    }
    if let Some(k) = orders.iter().find(|k| !SWEEP_ORDERS.contains(k)) {
        return Err(BenchError::Config(format!("spline order {k} is outside 1..=5")));
    }
    Ok(())
}

pub fn order_sweep_on(base: &ExperimentSpec, orders: &[usize], data: &Dataset, jobs: usize) -> Result<Vec<RunRecord>> {
    check_order_sweep(base, orders)?;
    orders
        .iter()
        .map(|&order| {
            let spec = ExperimentSpec {
                grid: GridConfig { order, ..base.grid },
                ..base.clone()
            };
            run_experiment_on(&spec, data, jobs)
        })
        .collect()
}

pub fn order_sweep(base: &ExperimentSpec, orders: &[usize], jobs: usize) -> Result<Vec<RunRecord>> {
    check_order_sweep(base, orders)?;
    base.validate()?;
    let (data, _) = base.dataset.load(base.master_seed)?;
    order_sweep_on(base, orders, &data, jobs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Json,
    Csv,
}

impl ExportFormat {
    /// `.csv` selects CSV; anything else is JSON.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => ExportFormat::Csv,
            _ => ExportFormat::Json,
        }
    }
}

impl FromStr for ExportFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "json" => Ok(ExportFormat::Json),
            "csv" => Ok(ExportFormat::Csv),
            other => Err(format!("unknown format `{other}` (expected json or csv)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ResultsFile {
    schema: String,
    schema_version: u32,
    runs: Vec<RunRecord>,
}

pub fn results_to_json(runs: &[RunRecord]) -> String {
    let doc = ResultsFile {
        schema: RESULTS_SCHEMA.into(),
        schema_version: RESULTS_SCHEMA_VERSION,
        runs: runs.to_vec(),
    };
    let mut text = serde_json::to_string_pretty(&doc).expect("results contain only finite numbers and strings");
    text.push('\n');
    text
}

pub const CSV_HEADER: [&str; 9] = [
    "experiment",
    "arch",
    "depth",
    "width",
    "grid",
    "order",
    "rep",
    "accuracy",
    "param_count",
];

/// One row per repetition; `grid` and `order` are empty for MLP runs.
pub fn results_to_csv(runs: &[RunRecord]) -> String {
    let mut out = CSV_HEADER.join(",");
    out.push('\n');
    for run in runs {
        let s = &run.spec;
        let (grid, order) = match s.arch {
            Arch::Mlp => (String::new(), String::new()),
            Arch::Kan => (s.grid.intervals.to_string(), s.grid.order.to_string()),
        };
        for r in &run.results {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                csv_field(&s.dataset.label()),
                s.arch,
                s.depth,
                s.width,
                grid,
                order,
                r.rep_index,
                r.test_accuracy,
                r.param_count
            ));
        }
    }
    out
}

fn csv_field(text: &str) -> String {
    if text.contains([',', '"', '\n']) {
        format!("\"{}\"", text.replace('"', "\"\""))
    } else {
        text.to_owned()
    }
}

pub fn export_results(runs: &[RunRecord], path: impl AsRef<Path>, format: ExportFormat) -> Result<()> {
    let path = path.as_ref();
    let text = match format {
        ExportFormat::Json => results_to_json(runs),
        ExportFormat::Csv => results_to_csv(runs),
    };
    fs::write(path, text).map_err(|e| BenchError::io(path, e))
}

pub fn import_results(path: impl AsRef<Path>) -> Result<Vec<RunRecord>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
    let doc: ResultsFile = serde_json::from_str(&text).map_err(|source| BenchError::Json {
        path: path.into(),
        source,
    })?;
    if doc.schema != RESULTS_SCHEMA || doc.schema_version != RESULTS_SCHEMA_VERSION {
        return Err(BenchError::data(
            path,
            format!(
                "expected {RESULTS_SCHEMA} v{RESULTS_SCHEMA_VERSION}, found {} v{}",
                doc.schema, doc.schema_version
            ),
        ));
    }
    Ok(doc.runs)
}
