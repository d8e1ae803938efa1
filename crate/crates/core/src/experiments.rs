//! Experiment protocols: consistency curves over growing sample sizes and
//! classification error across depths, with CSV and manifest output.
//!
//! Each `(d, m, trial)` job draws its own seeds from the run's base seed
//! keyed by `[d, m, trial, stream]` (stream 0 = training data, 1 = test
//! data, 2 = trainer), see [`crate::seed::derive_seed`]. Jobs may run in
//! parallel; results are collected in job order and per-point statistics
//! are computed from sorted values, so output does not depend on
//! scheduling.

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::{
    gen_sinc_test, gen_sinc_train, gen_two_class_signals, load_csv, split, CsvSchema,
    LabeledDataset, SplitSpec,
};
use crate::error::{invalid, EdcnnError, Result};
use crate::grad::LossKind;
use crate::io::write_atomic;
use crate::network::FilterRange;
use crate::seed::derive_seed;
use crate::trainer::{evaluate_misclassification, evaluate_rmse, train_erm, AutoOr, TrainConfig};

/// Settings for [`run_consistency`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConsistencyRunSpec {
    pub dims: Vec<usize>,
    pub m_grid: Vec<usize>,
    pub trials: usize,
    pub filter_len: usize,
    pub test_size: usize,
    pub noise_var: f64,
    pub base_seed: u64,
    /// Trainer settings; `filter_len` and `seed` are overridden per job.
    pub trainer: TrainConfig,
}

impl Default for ConsistencyRunSpec {
    /// Desk-scale grid: `d in {1, 30}`, `m in {100, 500, 2000, 8000}`,
    /// five trials, `s = 2`, 2000 test points. `d = 1` lies below the
    /// theorem's `s <= d` range, so the filter range is relaxed.
    fn default() -> Self {
        ConsistencyRunSpec {
            dims: vec![1, 30],
            m_grid: vec![100, 500, 2000, 8000],
            trials: 5,
            filter_len: 2,
            test_size: 2000,
            noise_var: 0.01,
            base_seed: 42,
            trainer: TrainConfig {
                filter_range: FilterRange::Relaxed,
                ..consistency_trainer()
            },
        }
    }
}

/// Trainer defaults used for the regression curves.
pub fn consistency_trainer() -> TrainConfig {
    TrainConfig {
        loss_kind: LossKind::Squared,
        depth_l: AutoOr::Auto,
        truncation_m: AutoOr::Auto,
        ..TrainConfig::default()
    }
}

impl ConsistencyRunSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dims.is_empty() || self.dims.contains(&0) {
            return invalid("dims: need at least one positive dimension");
        }
        if self.m_grid.is_empty() || self.m_grid.contains(&0) {
            return invalid("m_grid: need at least one positive sample size");
        }
        if self.m_grid.windows(2).any(|w| w[1] <= w[0]) {
            return invalid("m_grid: must be strictly increasing");
        }
        if self.trials < 1 {
            return invalid("trials: must be at least 1");
        }
        if self.test_size < 1 {
            return invalid("test_size: must be at least 1");
        }
        if !(self.noise_var >= 0.0) {
            return invalid("noise_var: must be nonnegative");
        }
        if self.trainer.loss_kind != LossKind::Squared {
            return invalid("trainer.loss_kind: consistency runs use squared loss");
        }
        self.trainer.validate().map_err(|e| match e {
            EdcnnError::InvalidArgument(msg) => {
                EdcnnError::InvalidArgument(format!("trainer: {msg}"))
            }
            other => other,
        })
    }
}

/// Aggregated RMSE at one `(d, m)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub d: usize,
    pub m: usize,
    pub mean_rmse: f64,
    pub std_rmse: f64,
    /// Trials that finished; diverged trials are excluded.
    pub trials: usize,
}

/// One `(d, m, trial)` job.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub d: usize,
    pub m: usize,
    pub trial: usize,
    pub data_seed: u64,
    pub test_seed: u64,
    pub train_seed: u64,
    pub depth: usize,
    pub truncation_m: f64,
    /// `None` when training diverged.
    pub rmse: Option<f64>,
    pub diverged_epoch: Option<usize>,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyResult {
    pub points: Vec<CurvePoint>,
    pub trials: Vec<TrialRecord>,
}

pub fn trial_seeds(base: u64, d: usize, m: usize, trial: usize) -> [u64; 3] {
    let key = |stream: u64| derive_seed(base, &[d as u64, m as u64, trial as u64, stream]);
    [key(0), key(1), key(2)]
}

fn run_trial(spec: &ConsistencyRunSpec, d: usize, m: usize, trial: usize) -> Result<TrialRecord> {
    let start = Instant::now();
    let [data_seed, test_seed, train_seed] = trial_seeds(spec.base_seed, d, m, trial);
    let train = gen_sinc_train(d, m, spec.noise_var, data_seed)?;
    let test = gen_sinc_test(d, spec.test_size, test_seed)?;
    let cfg = TrainConfig {
        filter_len: spec.filter_len,
        seed: train_seed,
        ..spec.trainer.clone()
    };
    let mut record = TrialRecord {
        d,
        m,
        trial,
        data_seed,
        test_seed,
        train_seed,
        depth: 0,
        truncation_m: 0.0,
        rmse: None,
        diverged_epoch: None,
        wall_seconds: 0.0,
    };
    match train_erm(&train, &cfg) {
        Ok(report) => {
            record.depth = report.depth;
            record.truncation_m = report.truncation_m;
            record.rmse = Some(evaluate_rmse(&report.params, report.truncation_m, &test)?);
        }
        Err(EdcnnError::TrainingDiverged { epoch }) => {
            log::warn!(
                "d={d} m={m} trial={trial}: training diverged at epoch {epoch}; trial excluded"
            );
            record.diverged_epoch = Some(epoch);
        }
        Err(e) => return Err(e),
    }
    record.wall_seconds = start.elapsed().as_secs_f64();
    Ok(record)
}

fn with_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match jobs {
        None => Ok(f()),
        Some(0) => invalid("jobs must be at least 1"),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| EdcnnError::InvalidArgument(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Mean and sample standard deviation, reduced in ascending order.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mean = sorted.iter().sum::<f64>() / n;
    if sorted.len() < 2 {
        return (mean, 0.0);
    }
    let var = sorted.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Trains and evaluates every `(d, m, trial)` and aggregates per `(d, m)`.
pub fn run_consistency(
    spec: &ConsistencyRunSpec,
    jobs: Option<usize>,
) -> Result<ConsistencyResult> {
    spec.validate()?;
    let keys: Vec<(usize, usize, usize)> = spec
        .dims
        .iter()
        .flat_map(|&d| {
            spec.m_grid
                .iter()
                .flat_map(move |&m| (0..spec.trials).map(move |t| (d, m, t)))
        })
        .collect();
    let trials = with_pool(jobs, || {
        keys.par_iter()
            .map(|&(d, m, t)| run_trial(spec, d, m, t))
            .collect::<Result<Vec<_>>>()
    })??;
    let points = trials
        .chunks(spec.trials)
        .map(|group| {
            let rmses: Vec<f64> = group.iter().filter_map(|r| r.rmse).collect();
            let (mean_rmse, std_rmse) = if rmses.is_empty() {
                (f64::NAN, f64::NAN)
            } else {
                mean_std(&rmses)
            };
            CurvePoint {
                d: group[0].d,
                m: group[0].m,
                mean_rmse,
                std_rmse,
                trials: rmses.len(),
            }
        })
        .collect();
    Ok(ConsistencyResult { points, trials })
}

/// Misclassification rate at one depth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    #[serde(rename = "L")]
    pub depth: usize,
    pub error: f64,
}

/// Trains one classifier per depth and reports its test error.
pub fn run_depth_sweep(
    train: &LabeledDataset,
    test: &LabeledDataset,
    depths: &[usize],
    filter_len: usize,
    cfg: &TrainConfig,
    jobs: Option<usize>,
) -> Result<Vec<SweepPoint>> {
    if depths.is_empty() {
        return invalid("depths: need at least one depth");
    }
    if !train.is_classification() || !test.is_classification() {
        return invalid("depth sweep needs classification data");
    }
    with_pool(jobs, || {
        depths
            .par_iter()
            .map(|&depth| {
                let cfg = TrainConfig {
                    depth_l: AutoOr::Fixed(depth),
                    filter_len,
                    loss_kind: LossKind::CrossEntropy,
                    ..cfg.clone()
                };
                let report = train_erm(train, &cfg)?;
                Ok(SweepPoint {
                    depth,
                    error: evaluate_misclassification(&report.params, test)?,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?
}

/// 17 significant digits, enough to re-read the exact `f64`.
pub fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn curve_csv(points: &[CurvePoint]) -> String {
    let mut out = String::from("d,m,mean_rmse,std_rmse,trials\n");
    for p in points {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            p.d,
            p.m,
            fmt_real(p.mean_rmse),
            fmt_real(p.std_rmse),
            p.trials
        ));
    }
    out
}

pub fn sweep_csv(points: &[SweepPoint]) -> String {
    let mut out = String::from("L,error\n");
    for p in points {
        out.push_str(&format!("{},{}\n", p.depth, fmt_real(p.error)));
    }
    out
}

/// Per-trial values behind the curve, one row per job.
pub fn trials_csv(trials: &[TrialRecord]) -> String {
    let mut out = String::from("d,m,trial,data_seed,test_seed,train_seed,L,M,rmse,status\n");
    for t in trials {
        let (rmse, status) = match (t.rmse, t.diverged_epoch) {
            (Some(r), _) => (fmt_real(r), "ok".to_string()),
            (None, Some(e)) => (String::new(), format!("diverged@{e}")),
            (None, None) => (String::new(), "missing".to_string()),
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{rmse},{status}\n",
            t.d,
            t.m,
            t.trial,
            t.data_seed,
            t.test_seed,
            t.train_seed,
            t.depth,
            fmt_real(t.truncation_m)
        ));
    }
    out
}

pub fn emit_curve_csv(points: &[CurvePoint], path: impl AsRef<Path>) -> Result<()> {
    if points.is_empty() {
        return invalid("cannot write an empty curve table");
    }
    write_atomic(path, curve_csv(points).as_bytes())
}

pub fn emit_sweep_csv(points: &[SweepPoint], path: impl AsRef<Path>) -> Result<()> {
    if points.is_empty() {
        return invalid("cannot write an empty sweep table");
    }
    write_atomic(path, sweep_csv(points).as_bytes())
}

/// Reads a curve CSV written by [`emit_curve_csv`].
pub fn read_curve_csv(path: impl AsRef<Path>) -> Result<Vec<CurvePoint>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| EdcnnError::io(path, e))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "d,m,mean_rmse,std_rmse,trials")) => {}
        _ => {
            return Err(EdcnnError::Parse {
                row: 1,
                message: "missing curve header".into(),
            })
        }
    }
    lines
        .map(|(i, line)| {
            let bad = |what: &str| EdcnnError::Parse {
                row: i + 1,
                message: format!("bad {what}"),
            };
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != 5 {
                return Err(bad("column count"));
            }
            Ok(CurvePoint {
                d: cells[0].parse().map_err(|_| bad("d"))?,
                m: cells[1].parse().map_err(|_| bad("m"))?,
                mean_rmse: cells[2].parse().map_err(|_| bad("mean_rmse"))?,
                std_rmse: cells[3].parse().map_err(|_| bad("std_rmse"))?,
                trials: cells[4].parse().map_err(|_| bad("trials"))?,
            })
        })
        .collect()
}

/// Where a depth sweep gets its data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum SweepData {
    /// Synthetic two-class signals, split 80/20 (stratified).
    TwoClass {
        d: usize,
        m: usize,
        margin: f64,
        seed: u64,
    },
    /// Separate train and test CSVs, features then label.
    CsvPair {
        train: String,
        test: String,
        #[serde(default)]
        skip_header: bool,
    },
    /// One CSV split at random with the given train fraction.
    CsvSplit {
        path: String,
        fraction: f64,
        seed: u64,
        #[serde(default)]
        skip_header: bool,
    },
}

impl SweepData {
    pub fn load(&self) -> Result<(LabeledDataset, LabeledDataset)> {
        match self {
            SweepData::TwoClass { d, m, margin, seed } => {
                let data = gen_two_class_signals(*d, *m, *margin, *seed)?;
                split(
                    &data,
                    &SplitSpec::RandomFraction {
                        fraction: 0.8,
                        seed: derive_seed(*seed, &[1]),
                    },
                )
            }
            SweepData::CsvPair {
                train,
                test,
                skip_header,
            } => Ok((
                load_csv(train, CsvSchema::FeaturesThenLabel, *skip_header)?,
                load_csv(test, CsvSchema::FeaturesThenLabel, *skip_header)?,
            )),
            SweepData::CsvSplit {
                path,
                fraction,
                seed,
                skip_header,
            } => {
                let data = load_csv(path, CsvSchema::FeaturesThenLabel, *skip_header)?;
                split(
                    &data,
                    &SplitSpec::RandomFraction {
                        fraction: *fraction,
                        seed: *seed,
                    },
                )
            }
        }
    }
}

/// Settings for a depth sweep experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DepthSweepSpec {
    pub data: SweepData,
    pub depths: Vec<usize>,
    pub filter_len: usize,
    #[serde(default = "sweep_trainer")]
    pub trainer: TrainConfig,
}

/// Trainer defaults for classification sweeps.
pub fn sweep_trainer() -> TrainConfig {
    TrainConfig {
        loss_kind: LossKind::CrossEntropy,
        ..TrainConfig::default()
    }
}

impl DepthSweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.depths.is_empty() || self.depths.contains(&0) {
            return invalid("depths: need at least one positive depth");
        }
        if self.filter_len < 1 {
            return invalid("filter_len: must be at least 1");
        }
        self.trainer.validate()
    }
}

/// Experiment file: `{"kind": "consistency", ..}` or `{"kind": "depth_sweep", ..}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExperimentSpec {
    Consistency(ConsistencyRunSpec),
    DepthSweep(DepthSweepSpec),
}

impl ExperimentSpec {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let spec: ExperimentSpec = serde_json::from_str(text)?;
        match &spec {
            ExperimentSpec::Consistency(s) => s.validate()?,
            ExperimentSpec::DepthSweep(s) => s.validate()?,
        }
        Ok(spec)
    }
}

#[derive(Serialize)]
struct Manifest<'a, P: Serialize> {
    tool: &'static str,
    version: &'static str,
    spec: &'a ExperimentSpec,
    jobs: Option<usize>,
    total_wall_seconds: f64,
    points: P,
}

#[derive(Serialize)]
struct ManifestPoint {
    d: usize,
    m: usize,
    wall_seconds: f64,
    trials: Vec<ManifestTrial>,
}

#[derive(Serialize)]
struct ManifestTrial {
    trial: usize,
    data_seed: u64,
    test_seed: u64,
    train_seed: u64,
    depth: usize,
    wall_seconds: f64,
}

/// Paths written by [`run_experiment`].
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutputs {
    pub table: std::path::PathBuf,
    pub detail: Option<std::path::PathBuf>,
    pub manifest: std::path::PathBuf,
}

/// Runs an experiment spec and writes `curve.csv` + `trials.csv` (or
/// `sweep.csv`) and `manifest.json` into `out_dir`.
pub fn run_experiment(
    spec: &ExperimentSpec,
    out_dir: &Path,
    jobs: Option<usize>,
) -> Result<ExperimentOutputs> {
    std::fs::create_dir_all(out_dir).map_err(|e| EdcnnError::io(out_dir, e))?;
    let start = Instant::now();
    let manifest_path = out_dir.join("manifest.json");
    match spec {
        ExperimentSpec::Consistency(run) => {
            let result = run_consistency(run, jobs)?;
            let table = out_dir.join("curve.csv");
            let detail = out_dir.join("trials.csv");
            emit_curve_csv(&result.points, &table)?;
            write_atomic(&detail, trials_csv(&result.trials).as_bytes())?;
            let points: Vec<ManifestPoint> = result
                .trials
                .chunks(run.trials)
                .map(|g| ManifestPoint {
                    d: g[0].d,
                    m: g[0].m,
                    wall_seconds: g.iter().map(|t| t.wall_seconds).sum(),
                    trials: g
                        .iter()
                        .map(|t| ManifestTrial {
                            trial: t.trial,
                            data_seed: t.data_seed,
                            test_seed: t.test_seed,
                            train_seed: t.train_seed,
                            depth: t.depth,
                            wall_seconds: t.wall_seconds,
                        })
                        .collect(),
                })
                .collect();
            write_manifest(&manifest_path, spec, jobs, start, points)?;
            Ok(ExperimentOutputs {
                table,
                detail: Some(detail),
                manifest: manifest_path,
            })
        }
        ExperimentSpec::DepthSweep(sweep) => {
            let (train, test) = sweep.data.load()?;
            let points = run_depth_sweep(
                &train,
                &test,
                &sweep.depths,
                sweep.filter_len,
                &sweep.trainer,
                jobs,
            )?;
            let table = out_dir.join("sweep.csv");
            emit_sweep_csv(&points, &table)?;
            write_manifest(&manifest_path, spec, jobs, start, &points)?;
            Ok(ExperimentOutputs {
                table,
                detail: None,
                manifest: manifest_path,
            })
        }
    }
}

fn write_manifest<P: Serialize>(
    path: &Path,
    spec: &ExperimentSpec,
    jobs: Option<usize>,
    start: Instant,
    points: P,
) -> Result<()> {
    let manifest = Manifest {
        tool: "edcnn",
        version: env!("CARGO_PKG_VERSION"),
        spec,
        jobs,
        total_wall_seconds: start.elapsed().as_secs_f64(),
        points,
    };
    write_atomic(
        path,
        (serde_json::to_string_pretty(&manifest)? + "\n").as_bytes(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick_spec() -> ConsistencyRunSpec {
        ConsistencyRunSpec {
            dims: vec![1],
            m_grid: vec![100],
            trials: 1,
            test_size: 200,
            trainer: TrainConfig {
                max_epochs: 5,
                filter_range: FilterRange::Relaxed,
                ..consistency_trainer()
            },
            ..ConsistencyRunSpec::default()
        }
    }

    #[test]
    fn single_point_run() {
        let result = run_consistency(&quick_spec(), None).unwrap();
        assert_eq!(result.points.len(), 1);
        assert_eq!(result.points[0].trials, 1);
        assert_eq!(result.trials[0].depth, 4);
        assert_eq!(result.points[0].std_rmse, 0.0);
    }

    #[test]
    fn validation_names_fields() {
        let mut spec = quick_spec();
        spec.m_grid = vec![500, 100];
        let err = spec.validate().unwrap_err().to_string();
        assert!(err.contains("m_grid"), "{err}");
        spec.m_grid = vec![100];
        spec.trials = 0;
        assert!(spec.validate().unwrap_err().to_string().contains("trials"));
        spec.trials = 1;
        spec.trainer.batch_size = 0;
        assert!(spec.validate().unwrap_err().to_string().contains("trainer"));
    }

    #[test]
    fn parallel_matches_serial_and_permutation() {
        let spec = ConsistencyRunSpec {
            dims: vec![3],
            m_grid: vec![40, 80],
            trials: 3,
            ..quick_spec()
        };
        let serial = run_consistency(&spec, Some(1)).unwrap();
        let parallel = run_consistency(&spec, Some(4)).unwrap();
        assert_eq!(curve_csv(&serial.points), curve_csv(&parallel.points));
        // trials depend only on their own key
        let single = run_trial(&spec, 3, 80, 2).unwrap();
        assert_eq!(single.rmse, serial.trials[5].rmse);
        let (mean, std) = mean_std(
            &serial.trials[3..6]
                .iter()
                .map(|t| t.rmse.unwrap())
                .collect::<Vec<_>>(),
        );
        assert!((mean - serial.points[1].mean_rmse).abs() <= 1e-12);
        assert!((std - serial.points[1].std_rmse).abs() <= 1e-12);
    }

    #[test]
    fn mean_std_order_independent() {
        let a = [0.3, 0.1, 0.7, 0.2];
        let b = [0.7, 0.2, 0.3, 0.1];
        assert_eq!(mean_std(&a), mean_std(&b));
        let (m, s) = mean_std(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn csv_emission() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        let pts = vec![CurvePoint {
            d: 30,
            m: 100,
            mean_rmse: 0.1 + 0.2,
            std_rmse: 1.0 / 3.0,
            trials: 5,
        }];
        emit_curve_csv(&pts, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert_eq!(read_curve_csv(&path).unwrap(), pts);
        assert!(emit_curve_csv(&[], &path).is_err());
        assert!(emit_sweep_csv(&[], dir.path().join("s.csv")).is_err());
        assert!(emit_curve_csv(&pts, dir.path().join("missing/dir/c.csv")).is_err());
        emit_sweep_csv(
            &[SweepPoint {
                depth: 2,
                error: 0.05,
            }],
            dir.path().join("s.csv"),
        )
        .unwrap();
        assert_eq!(
            std::fs::read_to_string(dir.path().join("s.csv")).unwrap(),
            "L,error\n2,5.0000000000000003e-2\n"
        );
    }

    #[test]
    fn depth_sweep_single_row() {
        let data = gen_two_class_signals(12, 60, 5.0, 1).unwrap();
        let (train, test) = split(
            &data,
            &SplitSpec::RandomFraction {
                fraction: 0.8,
                seed: 0,
            },
        )
        .unwrap();
        let cfg = TrainConfig {
            max_epochs: 3,
            ..sweep_trainer()
        };
        let pts = run_depth_sweep(&train, &test, &[2], 3, &cfg, None).unwrap();
        assert_eq!(pts.len(), 1);
        assert_eq!(pts[0].depth, 2);
        assert!(run_depth_sweep(&train, &test, &[], 3, &cfg, None).is_err());
    }

    #[test]
    fn experiment_spec_parsing() {
        let spec = ExperimentSpec::from_json_str(
            r#"{"kind": "consistency", "dims": [30], "m_grid": [100, 500], "trials": 2}"#,
        )
        .unwrap();
        let ExperimentSpec::Consistency(run) = spec else {
            panic!()
        };
        assert_eq!(run.filter_len, 2);
        assert_eq!(run.test_size, 2000);
        let err = ExperimentSpec::from_json_str(r#"{"kind": "consistency", "m_grid": [500, 100]}"#)
            .unwrap_err();
        assert!(err.to_string().contains("m_grid"));
        let sweep = ExperimentSpec::from_json_str(
            r#"{"kind": "depth_sweep", "data": {"source": "two_class", "d": 40, "m": 400, "margin": 10, "seed": 1},
                "depths": [2, 3], "filter_len": 9}"#,
        )
        .unwrap();
        let ExperimentSpec::DepthSweep(s) = sweep else {
            panic!()
        };
        assert_eq!(s.trainer.loss_kind, LossKind::CrossEntropy);
    }
}
