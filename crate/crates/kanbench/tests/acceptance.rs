//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.
//!
//! Optional inputs:
//! * `KANBENCH_CANCER_CSV`: breast-cancer CSV in the `cancer` schema. Without it
//!   the suite exports scikit-learn's bundled copy through `python3`, and skips
//!   the criterion if that is unavailable.
//! * `KANBENCH_PRINTER_CSV`: printer CSV in the `printer` schema. Without it the
//!   built-in 104-sample surrogate is used.

use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::Instant;

use kanbench::bench::{
    depth_sweep_on, import_results, order_sweep_on, results_to_csv, run_experiment_on, DatasetRef, ExperimentSpec,
    RunRecord,
};
use kanbench::csv_io::Schema;
use kanbench_core::activations::KanEdge;
use kanbench_core::bspline::{GridConfig, SplineGrid};
use kanbench_core::data::Dataset;
use kanbench_core::network::{Arch, ArchSpec, HeadKind, Network, NetworkSpec};
use kanbench_core::numerics::{Matrix, RngStream};
use kanbench_core::training::head_loss;

const MASTER_SEED: u64 = 0;
const REPS: usize = 25;

const GRAD_STEP: f64 = 1e-5;
const GRAD_MAX_REL: f64 = 1e-4;
const GRAD_INSTANCES: u64 = 10;
const UNITY_TOL: f64 = 1e-12;
const SPLINE_FD_STEP: f64 = 1e-6;
const SPLINE_DERIV_REL: f64 = 1e-5;
const FEATURE_FORM_TOL: f64 = 1e-12;
const FEATURE_FORM_EDGES: usize = 1000;
const DISPARITY_FACTOR: usize = 4;

const BAND_A_MLP: f64 = 0.97;
const BAND_A_KAN: f64 = 0.95;
const BAND_B_MLP: f64 = 0.93;
const BAND_CANCER: (f64, f64) = (0.93, 1.0);

enum Verdict {
    Pass(String),
    Fail(String),
    Skip(String),
}

struct Report {
    failures: usize,
}

impl Report {
    fn check(&mut self, name: &str, f: impl FnOnce() -> Verdict) {
        let start = Instant::now();
        let verdict = f();
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match verdict {
            Verdict::Pass(d) => ("PASS", d),
            Verdict::Fail(d) => {
                self.failures += 1;
                ("FAIL", d)
            }
            Verdict::Skip(d) => ("SKIP", d),
        };
        println!("[{tag}] {name}: {detail} ({secs:.1}s)");
    }
}

fn verdict(ok: bool, detail: String) -> Verdict {
    if ok {
        Verdict::Pass(detail)
    } else {
        Verdict::Fail(detail)
    }
}

fn param_goldens() -> Verdict {
    let printer: Vec<usize> = (1..=3)
        .map(|d| NetworkSpec::uniform(ArchSpec::Mlp, 7, 2, d, HeadKind::Softmax { classes: 3 }).param_count())
        .collect();
    let synthetic = NetworkSpec::uniform(ArchSpec::Mlp, 2, 2, 3, HeadKind::Sigmoid).param_count();
    verdict(
        printer == [27, 35, 43] && synthetic == 27,
        format!(
            "MLP D=7 3-class depths 1-3 = {printer:?} (want [27, 35, 43]); D=2 binary depth 3 = {synthetic} (want 27)"
        ),
    )
}

fn param_disparity() -> Verdict {
    let grid = GridConfig::new(3, 3);
    let mut worst = f64::INFINITY;
    let mut worst_at = String::new();
    for d in [2, 7, 30] {
        for head in [HeadKind::Sigmoid, HeadKind::Softmax { classes: 3 }] {
            for depth in 1..=3 {
                let mlp = NetworkSpec::uniform(ArchSpec::Mlp, d, 2, depth, head).param_count();
                let kan = NetworkSpec::uniform(ArchSpec::Kan { grid }, d, 2, depth, head).param_count();
                let ratio = kan as f64 / mlp as f64;
                if kan < DISPARITY_FACTOR * mlp || ratio < worst {
                    worst = worst.min(ratio);
                    worst_at = format!("D={d} {head:?} depth {depth}: kan {kan} / mlp {mlp}");
                }
            }
        }
    }
    verdict(
        worst >= DISPARITY_FACTOR as f64,
        format!("smallest KAN/MLP ratio {worst:.2} at {worst_at}"),
    )
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

fn gradient_error(spec: &NetworkSpec, seed: u64) -> f64 {
    let mut rng = RngStream::derive(seed, 101);
    let mut net = Network::init(spec, &mut rng).unwrap();
    let params: Vec<f64> = net.flatten_params().iter().map(|p| p + 0.3 * rng.normal()).collect();
    net.set_params(&params).unwrap();
    let n = 4;
    let d = spec.input_dim;
    let x = Matrix::from_vec(n, d, (0..n * d).map(|_| rng.uniform_range(-1.2, 1.2)).collect()).unwrap();
    let y: Vec<usize> = (0..n).map(|_| rng.below(spec.head.classes())).collect();
    let (probs, cache) = net.forward(&x).unwrap();
    let grads = net
        .backward(&cache, &head_loss(spec.head, &probs, &y).unwrap().1)
        .unwrap();
    let loss = |p: &[f64]| {
        let probe = net.unflatten_params(p).unwrap();
        head_loss(spec.head, &probe.predict_proba(&x).unwrap(), &y).unwrap().0
    };
    let mut worst = 0.0f64;
    for i in 0..params.len() {
        let mut plus = params.clone();
        let mut minus = params.clone();
        plus[i] += GRAD_STEP;
        minus[i] -= GRAD_STEP;
        let fd = (loss(&plus) - loss(&minus)) / (2.0 * GRAD_STEP);
        worst = worst.max(rel_err(grads.params[i], fd));
    }
    worst
}

fn gradient_suite() -> Verdict {
    let mut worst = 0.0f64;
    let mut configs = 0;
    for arch in [
        ArchSpec::Mlp,
        ArchSpec::Kan {
            grid: GridConfig::new(3, 3),
        },
    ] {
        for (d, head) in [
            (2, HeadKind::Sigmoid),
            (7, HeadKind::Softmax { classes: 3 }),
            (30, HeadKind::Sigmoid),
        ] {
            for depth in 1..=3 {
                let spec = NetworkSpec::uniform(arch, d, 2, depth, head);
                for seed in 0..GRAD_INSTANCES {
                    worst = worst.max(gradient_error(&spec, seed));
                }
                configs += 1;
            }
        }
    }
    verdict(
        worst < GRAD_MAX_REL,
        format!("{configs} configs x {GRAD_INSTANCES} instances, max rel err {worst:.2e} (< {GRAD_MAX_REL:e})"),
    )
}

fn bspline_properties() -> Verdict {
    let mut worst_unity = 0.0f64;
    let mut worst_deriv = 0.0f64;
    let mut violations = Vec::new();
    for g in 1..=5 {
        for k in 1..=5 {
            let grid = SplineGrid::new(-1.0, 1.0, g, k).unwrap();
            let knots = grid.knots();
            for s in 0..=400 {
                let x = -1.0 + 2.0 * s as f64 / 400.0 + 1e-4 * ((s % 7) as f64 - 3.0);
                let x = x.clamp(-1.0, 1.0);
                let b = grid.basis(x);
                worst_unity = worst_unity.max((b.sum() - 1.0).abs());
                for (i, &v) in b.iter().enumerate() {
                    if v < 0.0 {
                        violations.push(format!("G={g} k={k} B_{i}({x}) = {v} < 0"));
                    }
                    if v != 0.0 && !(knots[i] <= x && x <= knots[i + k + 1]) {
                        violations.push(format!("G={g} k={k} B_{i}({x}) nonzero outside its support"));
                    }
                }
                let off_knot = knots.iter().all(|&t| (t - x).abs() > 10.0 * SPLINE_FD_STEP);
                let inside = x - SPLINE_FD_STEP > -1.0 && x + SPLINE_FD_STEP < 1.0;
                if off_knot && inside {
                    let d = grid.basis_derivative(x);
                    let (p, m) = (grid.basis(x + SPLINE_FD_STEP), grid.basis(x - SPLINE_FD_STEP));
                    for i in 0..d.len() {
                        let fd = (p[i] - m[i]) / (2.0 * SPLINE_FD_STEP);
                        worst_deriv = worst_deriv.max((d[i] - fd).abs() / d[i].abs().max(1.0));
                    }
                }
            }
        }
    }
    let detail = format!(
        "G,k in 1..5: max |sum - 1| {worst_unity:.1e}, max derivative rel err {worst_deriv:.1e}, {} support/sign violations",
        violations.len()
    );
    verdict(
        worst_unity < UNITY_TOL && worst_deriv < SPLINE_DERIV_REL && violations.is_empty(),
        detail,
    )
}

fn feature_form_oracle() -> Verdict {
    let mut rng = RngStream::derive(MASTER_SEED, 606);
    let mut worst = 0.0f64;
    for _ in 0..FEATURE_FORM_EDGES {
        let grid = SplineGrid::new(-1.0, 1.0, 1 + rng.below(5), 1 + rng.below(5)).unwrap();
        let coeffs = (0..grid.basis_count()).map(|_| rng.normal()).collect();
        let edge = KanEdge::new(rng.uniform_range(-2.0, 2.0), rng.uniform_range(-2.0, 2.0), coeffs);
        let x = rng.uniform_range(-1.5, 1.5);
        let (w, f) = edge.feature_form(&grid, x).unwrap();
        let dot: f64 = w.iter().zip(&f).map(|(a, b)| a * b).sum();
        // Independent direct evaluation of w_b * x * sigmoid(x) + w_s * sum c_i B_i(x).
        let basis = grid.basis(grid.clamp(x));
        let spline: f64 = edge.coeffs.iter().zip(basis.iter()).map(|(c, b)| c * b).sum();
        let direct = edge.base_weight * x / (1.0 + (-x).exp()) + edge.spline_weight * spline;
        worst = worst
            .max((dot - direct).abs())
            .max((dot - edge.eval(&grid, x).unwrap()).abs());
    }
    verdict(
        worst < FEATURE_FORM_TOL,
        format!("{FEATURE_FORM_EDGES} random edges, max |feature form - direct| {worst:.1e}"),
    )
}

fn spec(dataset: DatasetRef, arch: Arch, depth: usize) -> ExperimentSpec {
    ExperimentSpec {
        reps: REPS,
        master_seed: MASTER_SEED,
        ..ExperimentSpec::new(dataset, arch, depth)
    }
}

fn load(dataset: &DatasetRef) -> Dataset {
    dataset.load(MASTER_SEED).unwrap().0
}

fn medians(runs: &[RunRecord]) -> Vec<f64> {
    runs.iter().map(|r| r.summary.median).collect()
}

fn fmt_medians(m: &[f64]) -> String {
    m.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>().join("/")
}

fn band_a_mlp() -> Verdict {
    let data = load(&DatasetRef::SyntheticA);
    let runs = depth_sweep_on(&spec(DatasetRef::SyntheticA, Arch::Mlp, 1), &[1, 2, 3], &data, 1).unwrap();
    let m = medians(&runs);
    verdict(
        m.iter().all(|&v| v >= BAND_A_MLP),
        format!(
            "dataset A (n=1000) MLP depths 1-3 medians {} (>= {BAND_A_MLP})",
            fmt_medians(&m)
        ),
    )
}

fn band_a_kan() -> Verdict {
    let data = load(&DatasetRef::SyntheticA);
    let run = run_experiment_on(&spec(DatasetRef::SyntheticA, Arch::Kan, 3), &data, 1).unwrap();
    verdict(
        run.summary.median >= BAND_A_KAN,
        format!(
            "dataset A KAN depth 3 G=3 k=3 median {:.4} (>= {BAND_A_KAN})",
            run.summary.median
        ),
    )
}

fn band_b_mlp() -> Verdict {
    let data = load(&DatasetRef::SyntheticB);
    let runs = depth_sweep_on(&spec(DatasetRef::SyntheticB, Arch::Mlp, 1), &[1, 2, 3], &data, 1).unwrap();
    let m = medians(&runs);
    verdict(
        m.iter().all(|&v| v >= BAND_B_MLP),
        format!(
            "dataset B (n=100) MLP depths 1-3 medians {} (>= {BAND_B_MLP})",
            fmt_medians(&m)
        ),
    )
}

fn cancer_csv(dir: &Path) -> Option<PathBuf> {
    if let Some(p) = std::env::var_os("KANBENCH_CANCER_CSV") {
        return Some(PathBuf::from(p));
    }
    let out = dir.join("breast_cancer.csv");
    let script = r#"
import csv, sys
from sklearn.datasets import load_breast_cancer
d = load_breast_cancer()
with open(sys.argv[1], "w", newline="") as f:
    w = csv.writer(f)
    w.writerow([n.replace(" ", "_") for n in d.feature_names] + ["diagnosis"])
    for x, t in zip(d.data, d.target):
        w.writerow([repr(float(v)) for v in x] + ["M" if t == 0 else "B"])
"#;
    let status = Command::new("python3").arg("-c").arg(script).arg(&out).output().ok()?;
    status.status.success().then_some(out)
}

fn band_cancer() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let Some(path) = cancer_csv(dir.path()) else {
        return Verdict::Skip("no cancer CSV (set KANBENCH_CANCER_CSV or install scikit-learn)".into());
    };
    let dataset = DatasetRef::Csv {
        path,
        schema: Schema::Cancer,
    };
    let (data, warnings) = match dataset.load(MASTER_SEED) {
        Ok(v) => v,
        Err(e) => return Verdict::Fail(format!("cannot load cancer CSV: {e}")),
    };
    let run = run_experiment_on(&spec(dataset, Arch::Mlp, 2), &data, 1).unwrap();
    let m = run.summary.median;
    verdict(
        (BAND_CANCER.0..=BAND_CANCER.1).contains(&m) && warnings.is_empty(),
        format!(
            "cancer ({} x {}) MLP depth 2 median {m:.4} (in [{}, {}]){}",
            data.len(),
            data.dim(),
            BAND_CANCER.0,
            BAND_CANCER.1,
            if warnings.is_empty() {
                String::new()
            } else {
                format!("; warnings: {warnings:?}")
            }
        ),
    )
}

fn printer_ref() -> (DatasetRef, &'static str) {
    match std::env::var_os("KANBENCH_PRINTER_CSV") {
        Some(p) => (
            DatasetRef::Csv {
                path: p.into(),
                schema: Schema::Printer,
            },
            "printer CSV",
        ),
        None => (DatasetRef::PrinterSurrogate, "printer surrogate"),
    }
}

fn printer_direction() -> Verdict {
    let (dataset, label) = printer_ref();
    let data = match dataset.load(MASTER_SEED) {
        Ok((d, _)) => d,
        Err(e) => return Verdict::Fail(format!("cannot load {label}: {e}")),
    };
    let mlp = medians(&depth_sweep_on(&spec(dataset.clone(), Arch::Mlp, 1), &[1, 2, 3], &data, 1).unwrap());
    let kan = medians(&depth_sweep_on(&spec(dataset, Arch::Kan, 1), &[1, 2, 3], &data, 1).unwrap());
    let losing: Vec<usize> = (0..3).filter(|&i| mlp[i] < kan[i]).map(|i| i + 1).collect();
    verdict(
        losing.is_empty(),
        format!(
            "{label} medians MLP {} vs KAN {} (MLP >= KAN at every depth; violated at depths {losing:?})",
            fmt_medians(&mlp),
            fmt_medians(&kan)
        ),
    )
}

fn kanbench(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_kanbench"))
        .args(args)
        .output()
        .unwrap()
}

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for (i, jobs) in ["1", "1", "4"].iter().enumerate() {
        let out = dir.path().join(format!("run{i}.json"));
        let o = kanbench(&[
            "bench",
            "--model",
            "kan",
            "--data",
            "printer-surrogate",
            "--depths",
            "1,2,3",
            "--no-timing",
            "--jobs",
            jobs,
            "--out",
            out.to_str().unwrap(),
        ]);
        if !o.status.success() {
            return Verdict::Fail(format!(
                "bench exited with {:?}: {}",
                o.status.code(),
                String::from_utf8_lossy(&o.stderr)
            ));
        }
        files.push(std::fs::read(&out).unwrap());
    }
    verdict(
        files[0] == files[1] && files[0] == files[2],
        format!(
            "bench twice (--jobs 1) and once (--jobs 4), {REPS} reps x 3 depths: JSON byte-identical = {}/{}",
            files[0] == files[1],
            files[0] == files[2]
        ),
    )
}

fn order_sweep_mechanics() -> Verdict {
    let (dataset, label) = printer_ref();
    let data = load(&dataset);
    let runs = order_sweep_on(&spec(dataset, Arch::Kan, 2), &[1, 2, 3, 4, 5], &data, 1).unwrap();
    let counts: Vec<usize> = runs.iter().map(RunRecord::param_count).collect();
    let increasing = counts.windows(2).all(|w| w[0] < w[1]);
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("orders.json");
    kanbench::bench::export_results(&runs, &json, kanbench::bench::ExportFormat::Json).unwrap();
    let back = import_results(&json).unwrap();
    let all_reps = back.len() == 5 && back.iter().all(|r| r.results.len() == REPS);
    let csv_rows = results_to_csv(&runs).lines().count() - 1;
    let below = runs[0].results.iter().filter(|r| r.test_accuracy < 0.8).count();
    verdict(
        increasing && all_reps && csv_rows == 5 * REPS,
        format!(
            "{label} orders 1-5: params {counts:?}, medians {}, {csv_rows} exported reps, order-1 reps below 0.8: {below}",
            fmt_medians(&medians(&runs))
        ),
    )
}

fn main() -> ExitCode {
    let mut report = Report { failures: 0 };
    report.check("parameter goldens", param_goldens);
    report.check("parameter disparity", param_disparity);
    report.check("gradient suite", gradient_suite);
    report.check("b-spline properties", bspline_properties);
    report.check("feature-form equivalence", feature_form_oracle);
    report.check("accuracy band A / MLP", band_a_mlp);
    report.check("accuracy band A / KAN", band_a_kan);
    report.check("accuracy band B / MLP", band_b_mlp);
    report.check("accuracy band cancer / MLP", band_cancer);
    report.check("printer direction MLP >= KAN", printer_direction);
    report.check("determinism", determinism);
    report.check("order-sweep mechanics", order_sweep_mechanics);
    if report.failures == 0 {
        println!("acceptance: all criteria met");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {} criterion(s) failed", report.failures);
        ExitCode::FAILURE
    }
}
