//! `edcnn`: generate sinc data, train eDCNNs, print capacity bounds, run
//! self-checks and experiment specs.
//!
//! Exit codes: 0 on success, 1 on runtime or I/O failure, 2 on bad usage.
//! Seeds come from `--seed`, then `EDCNN_SEED`, then 42.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use edcnn::datagen::{gen_sinc_test, gen_sinc_train, load_csv, write_csv, CsvSchema};
use edcnn::experiments::{run_experiment, ExperimentSpec};
use edcnn::io::save_model;
use edcnn::verify::{check_conv, check_grad, check_schedule_power};
use edcnn::{
    capacity_report, evaluate_misclassification, evaluate_rmse, train_erm, AutoOr, CapacityInputs,
    EdcnnError, FilterRange, LossKind, TrainConfig,
};
use serde_json::json;

const DEFAULT_SEED: u64 = 42;

#[derive(Parser)]
#[command(
    name = "edcnn",
    version,
    about = "Expansive deep convolutional neural networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a sinc regression dataset as CSV.
    Simulate(SimulateArgs),
    /// Train an eDCNN on a CSV dataset.
    Train(TrainArgs),
    /// Print parameter counts and capacity bounds.
    Capacity(CapacityArgs),
    /// Run verification suites.
    Check(CheckArgs),
    /// Run an experiment spec (consistency curve or depth sweep).
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    dim: usize,
    #[arg(long)]
    m: usize,
    /// Noise variance of the targets.
    #[arg(long, default_value_t = 0.01)]
    noise_var: f64,
    #[arg(long, env = "EDCNN_SEED", default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Noise-free test set instead of a noisy training set.
    #[arg(long)]
    test: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Task {
    Regression,
    Classify,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum)]
    task: Task,
    /// Filter length.
    #[arg(long)]
    s: Option<usize>,
    /// Depth L, or "auto" for ceil(m^(1/4)).
    #[arg(long)]
    depth: Option<AutoOr<usize>>,
    /// Truncation level M, or "auto" for max(1, ln m).
    #[arg(long)]
    truncation: Option<AutoOr<f64>>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Early-stopping patience; 0 trains on every row for all epochs.
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    val_fraction: Option<f64>,
    /// Seed; falls back to EDCNN_SEED, then the config file, then 42.
    #[arg(long, env = "EDCNN_SEED")]
    seed: Option<u64>,
    /// JSON trainer config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Skip the first CSV row.
    #[arg(long)]
    header: bool,
    /// Allow any s >= 1 instead of 2 <= s <= d.
    #[arg(long)]
    relax_filter_range: bool,
    /// Held-out CSV to evaluate after training.
    #[arg(long)]
    test: Option<PathBuf>,
    #[arg(long, default_value = "model.edcnn")]
    model_out: PathBuf,
    #[arg(long, default_value = "report.json")]
    report_out: PathBuf,
    #[arg(long, default_value = "epochs.csv")]
    epochs_out: PathBuf,
}

#[derive(Args)]
struct CapacityArgs {
    #[arg(long = "L")]
    depth: usize,
    #[arg(long)]
    s: usize,
    #[arg(long)]
    dim: usize,
    #[arg(long)]
    m: u64,
    #[arg(long)]
    theta: f64,
    /// Truncation level; defaults to max(1, ln m).
    #[arg(long = "M")]
    truncation: Option<f64>,
    #[arg(long = "C0", default_value_t = 1.0)]
    c0: f64,
    #[arg(long, default_value_t = 1.0)]
    cstar: f64,
    /// Covering radius; defaults to 1 / (20 M m^theta).
    #[arg(long)]
    eps: Option<f64>,
    /// Also print the report as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
#[command(group(ArgGroup::new("suite").required(true).multiple(true).args(["conv", "grad", "schedule"])))]
struct CheckArgs {
    /// Convolution vs Toeplitz matrix on 200 random pairs.
    #[arg(long)]
    conv: bool,
    /// Backprop vs central differences on 20 random networks.
    #[arg(long)]
    grad: bool,
    /// Consistency ratio scan with M = ln m, L = ceil(m^alpha).
    #[arg(long)]
    schedule: bool,
    #[arg(long, env = "EDCNN_SEED", default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value_t = 0.05)]
    theta: f64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 30)]
    dim: usize,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long, default_value = "results")]
    out_dir: PathBuf,
    /// Cap on worker threads.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    jobs: Option<u64>,
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<EdcnnError> for Failure {
    fn from(e: EdcnnError) -> Self {
        match e {
            EdcnnError::InvalidArgument(_) | EdcnnError::Json(_) => Failure::Usage(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn print_config(command: &str, config: serde_json::Value) {
    println!(
        "config {}",
        json!({ "command": command, "settings": config })
    );
}

fn simulate(a: SimulateArgs) -> CmdResult {
    print_config(
        "simulate",
        json!({ "dim": a.dim, "m": a.m, "noise_var": a.noise_var, "seed": a.seed,
                "out": a.out, "test": a.test }),
    );
    if !(a.noise_var >= 0.0) || !a.noise_var.is_finite() {
        return Err(Failure::Usage(format!(
            "--noise-var must be non-negative, got {}",
            a.noise_var
        )));
    }
    let data = if a.test {
        gen_sinc_test(a.dim, a.m, a.seed)?
    } else {
        gen_sinc_train(a.dim, a.m, a.noise_var, a.seed)?
    };
    write_csv(&data, &a.out)?;
    println!(
        "wrote {} rows (d = {}) to {}",
        data.len(),
        a.dim,
        a.out.display()
    );
    Ok(())
}

fn train_config(a: &TrainArgs) -> Result<TrainConfig, Failure> {
    let mut cfg = match &a.config {
        Some(path) => TrainConfig::from_json_file(path)?,
        None => TrainConfig::default(),
    };
    cfg.loss_kind = match a.task {
        Task::Regression => LossKind::Squared,
        Task::Classify => LossKind::CrossEntropy,
    };
    if let Some(s) = a.s {
        cfg.filter_len = s;
    }
    if let Some(depth) = a.depth {
        cfg.depth_l = depth;
    }
    if let Some(m) = a.truncation {
        cfg.truncation_m = m;
    }
    if let Some(lr) = a.lr {
        cfg.learning_rate = lr;
    }
    if let Some(b) = a.batch_size {
        cfg.batch_size = b;
    }
    if let Some(e) = a.epochs {
        cfg.max_epochs = e;
    }
    if let Some(p) = a.patience {
        cfg.early_stop_patience = p;
    }
    if let Some(v) = a.val_fraction {
        cfg.validation_fraction = v;
    }
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    if a.relax_filter_range {
        cfg.filter_range = FilterRange::Relaxed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn train(a: TrainArgs) -> CmdResult {
    let cfg = train_config(&a)?;
    let schema = match a.task {
        Task::Regression => CsvSchema::FeaturesThenTarget,
        Task::Classify => CsvSchema::FeaturesThenLabel,
    };
    print_config(
        "train",
        json!({ "data": a.data, "test": a.test, "header": a.header, "trainer": cfg,
                "model_out": a.model_out, "report_out": a.report_out, "epochs_out": a.epochs_out }),
    );
    let data = load_csv(&a.data, schema, a.header)?;
    let test = a
        .test
        .as_ref()
        .map(|p| load_csv(p, schema, a.header))
        .transpose()?;
    let report = train_erm(&data, &cfg)?;
    save_model(&report.params, &a.model_out)?;
    report.write_json(&a.report_out)?;
    report.write_epochs_csv(&a.epochs_out)?;
    println!(
        "trained L = {}, M = {} on {} rows ({} validation) for {} epochs, best epoch {}",
        report.depth,
        report.truncation_m,
        report.train_size,
        report.validation_size,
        report.epochs_run,
        report.best_epoch
    );
    println!("final_train_loss: {:e}", report.final_train_loss());
    if let Some(test) = test {
        match a.task {
            Task::Regression => {
                println!(
                    "test_rmse: {:e}",
                    evaluate_rmse(&report.params, report.truncation_m, &test)?
                )
            }
            Task::Classify => {
                println!(
                    "test_error: {}",
                    evaluate_misclassification(&report.params, &test)?
                )
            }
        }
    }
    Ok(())
}

fn capacity(a: CapacityArgs) -> CmdResult {
    print_config(
        "capacity",
        json!({ "L": a.depth, "s": a.s, "dim": a.dim, "m": a.m, "theta": a.theta,
                "M": a.truncation, "C0": a.c0, "cstar": a.cstar, "eps": a.eps }),
    );
    if !(a.theta > 0.0 && a.theta < 0.5) {
        return Err(Failure::Usage(format!(
            "theta must be in (0, 1/2), got {}",
            a.theta
        )));
    }
    let report = capacity_report(&CapacityInputs {
        depth: a.depth,
        s: a.s,
        d: a.dim,
        m: a.m,
        theta: a.theta,
        truncation: a.truncation,
        eps: a.eps,
        c0: a.c0,
        cstar: a.cstar,
    })?;
    print!("{report}");
    if a.json {
        println!(
            "{}",
            serde_json::to_string(&report).map_err(EdcnnError::from)?
        );
    }
    Ok(())
}

fn check(a: CheckArgs) -> CmdResult {
    print_config(
        "check",
        json!({ "conv": a.conv, "grad": a.grad, "schedule": a.schedule, "seed": a.seed,
                "theta": a.theta, "alpha": a.alpha, "dim": a.dim }),
    );
    let mut all_passed = true;
    let verdict = |ok: bool| if ok { "pass" } else { "FAIL" };
    if a.conv {
        let r = check_conv(a.seed, 200)?;
        println!(
            "conv: {} ({} pairs, max abs diff {:e})",
            verdict(r.passed),
            r.pairs,
            r.max_abs_diff
        );
        all_passed &= r.passed;
    }
    if a.grad {
        let r = check_grad(a.seed, 20, 1e-5)?;
        println!(
            "grad: {} ({} networks, max rel error {:e}, {} checked, {} near kinks)",
            verdict(r.passed),
            r.networks,
            r.max_rel_error,
            r.checked,
            r.excluded_near_kink
        );
        all_passed &= r.passed;
    }
    if a.schedule {
        let r = check_schedule_power(a.theta, a.alpha, a.dim)?;
        for ((m, l), ratio) in r.m_grid.iter().zip(&r.depth).zip(&r.ratios) {
            println!("  m = {m:>10}  L = {l:>3}  ratio = {ratio:e}");
        }
        if let Some(slope) = r.decay_exponent {
            println!("  decay exponent: {slope:.4}");
        }
        println!(
            "schedule: {} (decreasing: {})",
            verdict(r.tail_decreasing),
            r.tail_decreasing
        );
        all_passed &= r.tail_decreasing;
    }
    if all_passed {
        Ok(())
    } else {
        Err(Failure::Runtime("some checks failed".into()))
    }
}

fn experiment(a: ExperimentArgs) -> CmdResult {
    let text = std::fs::read_to_string(&a.spec).map_err(|e| EdcnnError::io(&a.spec, e))?;
    let spec = ExperimentSpec::from_json_str(&text)?;
    let jobs = a.jobs.map(|j| j as usize);
    print_config(
        "experiment",
        json!({ "spec_path": a.spec, "out_dir": a.out_dir, "jobs": jobs, "spec": spec }),
    );
    let out = run_experiment(&spec, &a.out_dir, jobs)?;
    let table = std::fs::read_to_string(&out.table).map_err(|e| EdcnnError::io(&out.table, e))?;
    print!("{table}");
    println!("wrote {}", out.table.display());
    if let Some(detail) = &out.detail {
        println!("wrote {}", detail.display());
    }
    println!("wrote {}", out.manifest.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Train(a) => train(a),
        Command::Capacity(a) => capacity(a),
        Command::Check(a) => check(a),
        Command::Experiment(a) => experiment(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
