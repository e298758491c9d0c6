//! Command-line interface. Exit codes: 0 success, 1 runtime failure,
//! 2 invalid flags, 3 dataset errors.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use kanbench_core::bspline::{GridConfig, SplineGrid};
use kanbench_core::data::{gen_printer_surrogate, gen_two_cluster, Dataset};
use kanbench_core::network::{Arch, ArchSpec, HeadKind, NetworkSpec};
use kanbench_core::numerics::RngStream;
use kanbench_core::training::{TrainConfig, DEFAULT_BATCH_SIZE, DEFAULT_EPOCHS, DEFAULT_LEARNING_RATE};

use crate::bench::{
    depth_sweep_on, export_results, order_sweep_on, DatasetRef, ExperimentSpec, ExportFormat, RunRecord, DATA_STREAM,
};
use crate::csv_io::{write_generic_csv, write_printer_csv, Schema};
use crate::error::BenchError;

pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "kanbench", version, about = "MLP vs KAN low-data classification benchmark")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic dataset as CSV.
    GenData(GenDataArgs),
    /// Repeated split/train/evaluate runs over a list of depths.
    Bench(BenchArgs),
    /// KAN spline-order sweep at depth 2, width 2.
    OrderSweep(OrderSweepArgs),
    /// Print MLP and KAN parameter counts side by side (no training).
    CountParams(CountParamsArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DataKind {
    /// Four Gaussian clusters, XOR layout, 2 classes (generic schema).
    TwoCluster,
    /// 104-sample, 7-feature, 3-class stand-in for the printer data (printer schema).
    PrinterSurrogate,
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    /// Sample count (two-cluster: multiple of 4, at least 8; 1000 = dataset A, 100 = dataset B).
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "two-cluster")]
    pub kind: DataKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Model {
    Mlp,
    Kan,
}

impl From<Model> for Arch {
    fn from(m: Model) -> Arch {
        match m {
            Model::Mlp => Arch::Mlp,
            Model::Kan => Arch::Kan,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Toggle {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemaArg {
    Cancer,
    Printer,
    Generic,
}

impl From<SchemaArg> for Schema {
    fn from(s: SchemaArg) -> Schema {
        match s {
            SchemaArg::Cancer => Schema::Cancer,
            SchemaArg::Printer => Schema::Printer,
            SchemaArg::Generic => Schema::Generic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Json,
    Csv,
}

/// Flags shared by `bench` and `order-sweep`.
#[derive(Debug, Args)]
pub struct ProtocolArgs {
    /// synthetic-a (n=1000), synthetic-b (n=100), printer-surrogate, or a CSV path.
    #[arg(long)]
    pub data: String,
    /// Column layout when --data is a CSV path.
    #[arg(long, value_enum, default_value = "generic")]
    pub schema: SchemaArg,
    #[arg(long, default_value_t = 2)]
    pub width: usize,
    #[arg(long, default_value_t = 25)]
    pub reps: usize,
    #[arg(long, default_value_t = 0.3)]
    pub test_frac: f64,
    #[arg(long, default_value_t = DEFAULT_EPOCHS)]
    pub epochs: usize,
    #[arg(long, default_value_t = DEFAULT_LEARNING_RATE)]
    pub lr: f64,
    /// Mini-batch size, or `full` for full-batch steps.
    #[arg(long, default_value_t = DEFAULT_BATCH_SIZE.to_string())]
    pub batch_size: String,
    /// Master seed; repetition r uses streams 2r (split) and 2r+1 (init).
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Standardize features with training-split statistics.
    #[arg(long, value_enum, default_value = "on")]
    pub standardize: Toggle,
    /// Results file (JSON unless --format csv or a .csv extension).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    /// Worker threads for repetitions; results do not depend on it.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Omit wall-clock timings from the results file.
    #[arg(long)]
    pub no_timing: bool,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_enum)]
    pub model: Model,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    pub depths: Vec<usize>,
    /// KAN grid size G [default for kan: 3].
    #[arg(long)]
    pub grid: Option<usize>,
    /// KAN spline order k [default for kan: 3].
    #[arg(long)]
    pub order: Option<usize>,
    #[command(flatten)]
    pub protocol: ProtocolArgs,
}

#[derive(Debug, Args)]
pub struct OrderSweepArgs {
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
    pub orders: Vec<usize>,
    /// Must be 2.
    #[arg(long, default_value_t = 2)]
    pub depth: usize,
    #[arg(long, default_value_t = 3)]
    pub grid: usize,
    #[command(flatten)]
    pub protocol: ProtocolArgs,
}

#[derive(Debug, Args)]
pub struct CountParamsArgs {
    /// Input dimension D.
    #[arg(long)]
    pub input_dim: usize,
    #[arg(long, default_value_t = 2)]
    pub classes: usize,
    #[arg(long, default_value_t = 2)]
    pub width: usize,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    pub depths: Vec<usize>,
    #[arg(long, default_value_t = 3)]
    pub grid: usize,
    #[arg(long, default_value_t = 3)]
    pub order: usize,
}

/// A failed command: message for stderr plus the process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn data(err: BenchError) -> Self {
        CliError {
            code: EXIT_DATA,
            message: err.to_string(),
        }
    }
}

impl From<BenchError> for CliError {
    fn from(err: BenchError) -> Self {
        use kanbench_core::Error as Core;
        let code = match &err {
            BenchError::Config(_) | BenchError::Core(Core::Config(_) | Core::Usage(_)) => EXIT_USAGE,
            BenchError::Data { .. } | BenchError::Json { .. } | BenchError::Core(Core::Data(_)) => EXIT_DATA,
            _ => EXIT_RUNTIME,
        };
        CliError {
            code,
            message: err.to_string(),
        }
    }
}

pub type CliResult<T = ()> = std::result::Result<T, CliError>;

/// Executes a parsed command, writing reports to `out` and warnings to `err`.
pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> CliResult {
    match cli.command {
        Command::GenData(a) => gen_data(a, out),
        Command::Bench(a) => bench(a, out, err),
        Command::OrderSweep(a) => order_sweep(a, out, err),
        Command::CountParams(a) => count_params(a, out),
    }
}

fn io_fail(e: std::io::Error) -> CliError {
    CliError {
        code: EXIT_RUNTIME,
        message: format!("cannot write output: {e}"),
    }
}

fn gen_data(a: GenDataArgs, out: &mut dyn Write) -> CliResult {
    let mut rng = RngStream::derive(a.seed, DATA_STREAM);
    let data: Dataset = match a.kind {
        DataKind::TwoCluster => {
            let n =
                a.n.ok_or_else(|| CliError::usage("--n is required for two-cluster data"))?;
            if n < 8 || n % 4 != 0 {
                return Err(CliError::usage(format!(
                    "--n must be a multiple of 4 and at least 8 (one equal share per cluster), got {n}"
                )));
            }
            gen_two_cluster(n, &mut rng).map_err(BenchError::from)?
        }
        DataKind::PrinterSurrogate => {
            if let Some(n) = a.n.filter(|&n| n != 104) {
                return Err(CliError::usage(format!(
                    "the printer surrogate has exactly 104 samples, got --n {n}"
                )));
            }
            gen_printer_surrogate(&mut rng).map_err(BenchError::from)?
        }
    };
    match a.kind {
        DataKind::TwoCluster => write_generic_csv(&data, &a.out)?,
        DataKind::PrinterSurrogate => write_printer_csv(&data, &a.out)?,
    }
    writeln!(
        out,
        "wrote {} samples ({} features, {} classes) to {}",
        data.len(),
        data.dim(),
        data.class_count(),
        a.out.display()
    )
    .map_err(io_fail)
}

fn train_config(p: &ProtocolArgs) -> CliResult<TrainConfig> {
    let batch_size = match p.batch_size.as_str() {
        "full" => None,
        s => match s.parse::<usize>() {
            Ok(b) if b > 0 => Some(b),
            _ => {
                return Err(CliError::usage(format!(
                    "--batch-size must be a positive integer or `full`, got `{s}`"
                )))
            }
        },
    };
    let cfg = TrainConfig {
        epochs: p.epochs,
        learning_rate: p.lr,
        batch_size,
        ..TrainConfig::default()
    };
    cfg.validate().map_err(BenchError::from)?;
    Ok(cfg)
}

fn base_spec(p: &ProtocolArgs, arch: Arch, depth: usize, grid: GridConfig) -> CliResult<ExperimentSpec> {
    if p.jobs == 0 {
        return Err(CliError::usage("--jobs must be at least 1"));
    }
    let spec = ExperimentSpec {
        width: p.width,
        grid,
        reps: p.reps,
        test_frac: p.test_frac,
        train: train_config(p)?,
        master_seed: p.seed,
        standardize: p.standardize == Toggle::On,
        ..ExperimentSpec::new(DatasetRef::parse(&p.data, p.schema.into()), arch, depth)
    };
    spec.validate()?;
    Ok(spec)
}

fn load(spec: &ExperimentSpec, err: &mut dyn Write) -> CliResult<Dataset> {
    let (data, warnings) = spec.dataset.load(spec.master_seed).map_err(CliError::data)?;
    for w in warnings {
        writeln!(err, "warning: {w}").map_err(io_fail)?;
    }
    Ok(data)
}

fn finish(p: &ProtocolArgs, mut runs: Vec<RunRecord>, out: &mut dyn Write) -> CliResult {
    writeln!(
        out,
        "{:<5} {:>5} {:>5} {:>7} {:>7} {:>7} {:>7} {:>8}",
        "arch", "depth", "order", "params", "median", "min", "max", "diverged"
    )
    .map_err(io_fail)?;
    for run in &runs {
        let s = &run.spec;
        let order = match s.arch {
            Arch::Mlp => "-".to_string(),
            Arch::Kan => s.grid.order.to_string(),
        };
        let diverged = run.results.iter().filter(|r| r.diverged_epoch.is_some()).count();
        writeln!(
            out,
            "{:<5} {:>5} {:>5} {:>7} {:>7.4} {:>7.4} {:>7.4} {:>8}",
            s.arch.as_str(),
            s.depth,
            order,
            run.param_count(),
            run.summary.median,
            run.summary.min,
            run.summary.max,
            diverged
        )
        .map_err(io_fail)?;
    }
    if let Some(path) = &p.out {
        if p.no_timing {
            runs.iter_mut().for_each(RunRecord::strip_timing);
        }
        let format = match p.format {
            Some(FormatArg::Json) => ExportFormat::Json,
            Some(FormatArg::Csv) => ExportFormat::Csv,
            None => ExportFormat::from_path(path),
        };
        export_results(&runs, path, format)?;
        writeln!(out, "results written to {}", path.display()).map_err(io_fail)?;
    }
    Ok(())
}

fn bench(a: BenchArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult {
    let arch: Arch = a.model.into();
    if arch == Arch::Mlp && (a.grid.is_some() || a.order.is_some()) {
        return Err(CliError::usage("--grid and --order apply to --model kan only"));
    }
    if a.depths.is_empty() || a.depths.contains(&0) {
        return Err(CliError::usage("--depths must list depths of at least 1"));
    }
    let defaults = GridConfig::default();
    let grid = GridConfig::new(a.grid.unwrap_or(defaults.intervals), a.order.unwrap_or(defaults.order));
    let base = base_spec(&a.protocol, arch, a.depths[0], grid)?;
    let data = load(&base, err)?;
    let runs = depth_sweep_on(&base, &a.depths, &data, a.protocol.jobs)?;
    finish(&a.protocol, runs, out)
}

fn order_sweep(a: OrderSweepArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult {
    if let Some(k) = a.orders.iter().find(|k| !(1..=5).contains(*k)) {
        return Err(CliError::usage(format!("--orders values must lie in 1..=5, got {k}")));
    }
    if a.depth != 2 || a.protocol.width != 2 {
        return Err(CliError::usage("the order sweep runs at --depth 2 and --width 2"));
    }
    let base = base_spec(
        &a.protocol,
        Arch::Kan,
        a.depth,
        GridConfig::new(a.grid, a.orders.first().copied().unwrap_or(3)),
    )?;
    let data = load(&base, err)?;
    let runs = order_sweep_on(&base, &a.orders, &data, a.protocol.jobs)?;
    finish(&a.protocol, runs, out)
}

fn count_params(a: CountParamsArgs, out: &mut dyn Write) -> CliResult {
    if a.input_dim == 0 || a.width == 0 || a.classes < 2 {
        return Err(CliError::usage(
            "--input-dim and --width must be positive and --classes at least 2",
        ));
    }
    if a.depths.is_empty() || a.depths.contains(&0) {
        return Err(CliError::usage("--depths must list depths of at least 1"));
    }
    let grid = GridConfig::new(a.grid, a.order);
    SplineGrid::from_config(grid).map_err(BenchError::from)?;
    let head = HeadKind::for_classes(a.classes);
    writeln!(
        out,
        "D={} width={} classes={} G={} k={}",
        a.input_dim, a.width, a.classes, a.grid, a.order
    )
    .map_err(io_fail)?;
    writeln!(out, "{:>5} {:>7} {:>7} {:>7}", "depth", "mlp", "kan", "ratio").map_err(io_fail)?;
    for &depth in &a.depths {
        let mlp = NetworkSpec::uniform(ArchSpec::Mlp, a.input_dim, a.width, depth, head).param_count();
        let kan = NetworkSpec::uniform(ArchSpec::Kan { grid }, a.input_dim, a.width, depth, head).param_count();
        writeln!(out, "{depth:>5} {mlp:>7} {kan:>7} {:>7.2}", kan as f64 / mlp as f64).map_err(io_fail)?;
    }
    Ok(())
}
