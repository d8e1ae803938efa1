//! Empirical risk minimization over eDCNNs with mini-batch Adam, early
//! stopping, and truncated evaluation.
//!
//! Training minimizes the untruncated empirical risk; the truncation
//! level only enters at evaluation through [`predict_truncated`].

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::datagen::{split_indices, LabeledDataset, SplitSpec, Targets};
use crate::error::{invalid, EdcnnError, Result};
use crate::grad::{backprop_accumulate, loss_and_output_grad, GradientSet, LossKind};
use crate::io::write_atomic;
use crate::network::{
    truncate, truncate_unchecked, Architecture, EdcnnParams, FilterRange, InitScheme,
};
use crate::seed::derive_seed;

/// Depth `ceil(m^(1/4))`.
pub fn depth_schedule(m: usize) -> Result<usize> {
    if m < 1 {
        return invalid("depth schedule needs m >= 1");
    }
    // integer fourth root, avoiding float error at perfect powers
    let mut root = (m as f64).powf(0.25).floor() as usize;
    while (root + 1).pow(4) <= m {
        root += 1;
    }
    while root.pow(4) > m {
        root -= 1;
    }
    Ok(if root.pow(4) == m { root } else { root + 1 })
}

/// Truncation level `max(1, ln m)`.
pub fn truncation_schedule(m: usize) -> Result<f64> {
    if m < 2 {
        return invalid("truncation schedule needs m >= 2");
    }
    Ok((m as f64).ln().max(1.0))
}

/// A setting that is either resolved from the sample size or fixed.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum AutoOr<T> {
    #[default]
    Auto,
    Fixed(T),
}

impl<T: Copy> AutoOr<T> {
    pub fn resolve(self, auto: impl FnOnce() -> Result<T>) -> Result<T> {
        match self {
            AutoOr::Auto => auto(),
            AutoOr::Fixed(v) => Ok(v),
        }
    }
}

impl<T: fmt::Display> fmt::Display for AutoOr<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AutoOr::Auto => f.write_str("auto"),
            AutoOr::Fixed(v) => v.fmt(f),
        }
    }
}

impl<T: FromStr> FromStr for AutoOr<T> {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(AutoOr::Auto);
        }
        s.parse()
            .map(AutoOr::Fixed)
            .map_err(|_| format!("expected \"auto\" or a number, got '{s}'"))
    }
}

impl<T: Serialize> Serialize for AutoOr<T> {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            AutoOr::Auto => ser.serialize_str("auto"),
            AutoOr::Fixed(v) => v.serialize(ser),
        }
    }
}

impl<'de, T: Deserialize<'de>> Deserialize<'de> for AutoOr<T> {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw<T> {
            Fixed(T),
            Tag(String),
        }
        match Raw::deserialize(de)? {
            Raw::Fixed(v) => Ok(AutoOr::Fixed(v)),
            Raw::Tag(t) if t == "auto" => Ok(AutoOr::Auto),
            Raw::Tag(t) => Err(serde::de::Error::custom(format!(
                "expected \"auto\" or a number, got \"{t}\""
            ))),
        }
    }
}

/// Optimizer and schedule settings for [`train_erm`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub loss_kind: LossKind,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping; 0 disables
    /// early stopping and the validation hold-out.
    pub early_stop_patience: usize,
    pub validation_fraction: f64,
    pub seed: u64,
    pub truncation_m: AutoOr<f64>,
    pub depth_l: AutoOr<usize>,
    pub filter_len: usize,
    pub filter_range: FilterRange,
    pub init: InitScheme,
    /// Train only the outer weights.
    pub freeze_conv: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            loss_kind: LossKind::Squared,
            learning_rate: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            batch_size: 32,
            max_epochs: 100,
            early_stop_patience: 10,
            validation_fraction: 0.1,
            seed: 42,
            truncation_m: AutoOr::Auto,
            depth_l: AutoOr::Auto,
            filter_len: 2,
            filter_range: FilterRange::Theorem,
            init: InitScheme::UniformScaled,
            freeze_conv: false,
        }
    }
}

impl TrainConfig {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| EdcnnError::io(path, e))?;
        let cfg: TrainConfig = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 1 {
            return invalid("batch_size must be at least 1");
        }
        if self.max_epochs < 1 {
            return invalid("max_epochs must be at least 1");
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return invalid("learning_rate must be positive");
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return invalid("adam_beta1 and adam_beta2 must lie in [0, 1)");
        }
        if !(self.adam_eps > 0.0) {
            return invalid("adam_eps must be positive");
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return invalid("validation_fraction must lie in [0, 1)");
        }
        if let AutoOr::Fixed(m) = self.truncation_m {
            if !(m > 0.0) || !m.is_finite() {
                return invalid("truncation_m must be positive");
            }
        }
        if let AutoOr::Fixed(l) = self.depth_l {
            if l < 1 {
                return invalid("depth_l must be at least 1");
            }
        }
        Ok(())
    }
}

/// Adam with bias-corrected moment estimates.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: i32,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(params: &EdcnnParams, lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        let zeros: Vec<Vec<f64>> = params.blocks().iter().map(|b| vec![0.0; b.len()]).collect();
        Adam {
            lr,
            beta1,
            beta2,
            eps,
            step: 0,
            first: zeros.clone(),
            second: zeros,
        }
    }

    /// One update; blocks with `frozen[i] == true` are left untouched.
    pub fn step(&mut self, params: &mut EdcnnParams, grad: &GradientSet, frozen: &[bool]) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        let blocks = params.blocks_mut().into_iter().zip(grad.blocks());
        for (b, (pb, gb)) in blocks.enumerate() {
            if frozen.get(b).copied().unwrap_or(false) {
                continue;
            }
            let (m, v) = (&mut self.first[b], &mut self.second[b]);
            for i in 0..pb.len() {
                let g = gb[i];
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g * g;
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                pb[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }
}

/// Outcome of a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean training loss after each epoch.
    pub train_loss: Vec<f64>,
    /// Mean validation loss after each epoch, `None` without a hold-out.
    pub val_loss: Vec<Option<f64>>,
    pub params: EdcnnParams,
    pub epochs_run: usize,
    pub stopped_early: bool,
    /// Epoch whose parameters were returned.
    pub best_epoch: usize,
    pub depth: usize,
    pub truncation_m: f64,
    pub train_size: usize,
    pub validation_size: usize,
    /// Initializations drawn before a live network was found.
    pub init_attempts: u64,
}

#[derive(Serialize)]
struct ReportJson<'a> {
    architecture: &'a Architecture,
    depth: usize,
    truncation_m: f64,
    epochs_run: usize,
    stopped_early: bool,
    best_epoch: usize,
    train_size: usize,
    validation_size: usize,
    init_attempts: u64,
    final_train_loss: f64,
    train_loss: &'a [f64],
    val_loss: &'a [Option<f64>],
}

impl TrainReport {
    pub fn final_train_loss(&self) -> f64 {
        self.train_loss[self.best_epoch - 1]
    }

    pub fn to_json(&self) -> String {
        let view = ReportJson {
            architecture: self.params.arch(),
            depth: self.depth,
            truncation_m: self.truncation_m,
            epochs_run: self.epochs_run,
            stopped_early: self.stopped_early,
            best_epoch: self.best_epoch,
            train_size: self.train_size,
            validation_size: self.validation_size,
            init_attempts: self.init_attempts,
            final_train_loss: self.final_train_loss(),
            train_loss: &self.train_loss,
            val_loss: &self.val_loss,
        };
        serde_json::to_string_pretty(&view).expect("report serializes") + "\n"
    }

    /// `epoch,train_loss,val_loss` with an empty validation cell when no
    /// hold-out was used.
    pub fn epochs_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_loss\n");
        for (i, (t, v)) in self.train_loss.iter().zip(&self.val_loss).enumerate() {
            let v = v.map(|v| format!("{v:.16e}")).unwrap_or_default();
            out.push_str(&format!("{},{t:.16e},{v}\n", i + 1));
        }
        out
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path, self.to_json().as_bytes())
    }

    pub fn write_epochs_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path, self.epochs_csv().as_bytes())
    }
}

fn mean_loss(p: &EdcnnParams, data: &LabeledDataset, idx: &[usize], kind: LossKind) -> Result<f64> {
    let mut total = 0.0;
    for &i in idx {
        let out = p.forward(data.row(i))?;
        total += loss_and_output_grad(&out, data.target(i), kind)?.0;
    }
    Ok(total / idx.len() as f64)
}

/// Redraws for a dead network: at least half of (up to) the first 256
/// training rows must reach some active unit in the last layer.
/// Attempt `a` uses seed `derive_seed(cfg.seed, [2, a])`.
pub const INIT_ATTEMPTS: u64 = 16;

fn init_live(
    arch: Architecture,
    cfg: &TrainConfig,
    data: &LabeledDataset,
    idx: &[usize],
) -> (EdcnnParams, u64) {
    let probe = &idx[..idx.len().min(256)];
    let mut first = None;
    for attempt in 0..INIT_ATTEMPTS {
        let p = EdcnnParams::init(arch, cfg.init, derive_seed(cfg.seed, &[2, attempt]));
        if matches!(cfg.init, InitScheme::Constant(_)) {
            return (p, 1);
        }
        let live = probe
            .iter()
            .filter(|&&i| {
                p.forward_traced(data.row(i))
                    .map(|(_, t)| t.last_hidden().iter().any(|v| *v > 0.0))
                    .unwrap_or(false)
            })
            .count();
        if 2 * live >= probe.len() {
            return (p, attempt + 1);
        }
        first.get_or_insert(p);
    }
    (first.expect("at least one attempt"), INIT_ATTEMPTS)
}

/// Minimizes the empirical risk of an eDCNN on `data`.
///
/// `depth_l = Auto` resolves to `ceil(m^(1/4))` and `truncation_m = Auto`
/// to `max(1, ln m)` where `m` is the full dataset size (`m = 1` uses the
/// `m = 2` level). With early stopping a seeded hold-out (stratified for
/// classification) is removed first and the best-validation parameters
/// are returned.
pub fn train_erm(data: &LabeledDataset, cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.validate()?;
    if data.is_empty() {
        return invalid("training set is empty");
    }
    let m = data.len();
    let out_rows = match (cfg.loss_kind, data.targets()) {
        (LossKind::Squared, Targets::Regression(_)) => 1,
        (LossKind::CrossEntropy, Targets::Classification { classes, .. }) if *classes >= 2 => {
            *classes
        }
        (LossKind::CrossEntropy, Targets::Classification { .. }) => {
            return invalid("classification needs at least two classes")
        }
        (LossKind::Squared, _) => return invalid("squared loss needs regression targets"),
        (LossKind::CrossEntropy, _) => return invalid("cross entropy needs class labels"),
    };
    let depth = cfg.depth_l.resolve(|| depth_schedule(m))?;
    let truncation_m = cfg.truncation_m.resolve(|| truncation_schedule(m.max(2)))?;
    let arch = Architecture::new(
        data.dim(),
        cfg.filter_len,
        depth,
        out_rows,
        cfg.filter_range,
    )?;

    let n_val = (cfg.validation_fraction * m as f64).round() as usize;
    let (train_idx, val_idx) = if cfg.early_stop_patience > 0 && n_val >= 1 && n_val < m {
        let spec = SplitSpec::RandomFraction {
            fraction: 1.0 - cfg.validation_fraction,
            seed: derive_seed(cfg.seed, &[1]),
        };
        let (tr, va) = split_indices(data, &spec)?;
        if tr.is_empty() || va.is_empty() {
            ((0..m).collect(), Vec::new())
        } else {
            (tr, va)
        }
    } else {
        ((0..m).collect::<Vec<_>>(), Vec::new())
    };

    let (mut params, init_attempts) = init_live(arch, cfg, data, &train_idx);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[3]));
    let mut adam = Adam::new(
        &params,
        cfg.learning_rate,
        cfg.adam_beta1,
        cfg.adam_beta2,
        cfg.adam_eps,
    );
    let n_blocks = params.blocks().len();
    let frozen: Vec<bool> = (0..n_blocks)
        .map(|b| cfg.freeze_conv && b + 1 < n_blocks)
        .collect();
    let mut grad = GradientSet::zeros_like(&params);

    let mut order = train_idx.clone();
    let mut train_loss = Vec::new();
    let mut val_loss = Vec::new();
    let mut best: Option<(f64, usize, EdcnnParams)> = None;
    let mut since_best = 0;
    let mut stopped_early = false;

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut shuffle_rng);
        for batch in order.chunks(cfg.batch_size) {
            grad.fill(0.0);
            for &i in batch {
                backprop_accumulate(
                    &params,
                    data.row(i),
                    data.target(i),
                    cfg.loss_kind,
                    &mut grad,
                )?;
            }
            grad.scale(1.0 / batch.len() as f64);
            if !grad.all_finite() {
                return Err(EdcnnError::TrainingDiverged { epoch });
            }
            adam.step(&mut params, &grad, &frozen);
        }
        if !params.all_finite() {
            return Err(EdcnnError::TrainingDiverged { epoch });
        }
        let tl = mean_loss(&params, data, &train_idx, cfg.loss_kind)?;
        if !tl.is_finite() {
            return Err(EdcnnError::TrainingDiverged { epoch });
        }
        train_loss.push(tl);
        if val_idx.is_empty() {
            val_loss.push(None);
            continue;
        }
        let vl = mean_loss(&params, data, &val_idx, cfg.loss_kind)?;
        if !vl.is_finite() {
            return Err(EdcnnError::TrainingDiverged { epoch });
        }
        val_loss.push(Some(vl));
        match &best {
            Some((b, _, _)) if vl >= *b => {
                since_best += 1;
                if since_best >= cfg.early_stop_patience {
                    stopped_early = true;
                    break;
                }
            }
            _ => {
                best = Some((vl, epoch, params.clone()));
                since_best = 0;
            }
        }
    }

    let epochs_run = train_loss.len();
    let (best_epoch, params) = match best {
        Some((_, e, p)) => (e, p),
        None => (epochs_run, params),
    };
    Ok(TrainReport {
        train_loss,
        val_loss,
        params,
        epochs_run,
        stopped_early,
        best_epoch,
        depth,
        truncation_m,
        train_size: train_idx.len(),
        validation_size: val_idx.len(),
        init_attempts,
    })
}

/// `truncate(M, f(x))` for a single-output network.
pub fn predict_truncated(p: &EdcnnParams, m: f64, x: &[f64]) -> Result<f64> {
    let raw = p.forward_scalar(x)?;
    truncate(m, raw)
}

/// Root mean squared error of truncated predictions.
pub fn evaluate_rmse(p: &EdcnnParams, m: f64, test: &LabeledDataset) -> Result<f64> {
    if test.is_empty() {
        return invalid("test set is empty");
    }
    let Targets::Regression(y) = test.targets() else {
        return invalid("RMSE needs regression targets");
    };
    truncate(m, 0.0)?;
    let mut sse = 0.0;
    for (x, y) in test.rows().zip(y) {
        let pred = truncate_unchecked(m, p.forward_scalar(x)?);
        sse += (pred - y) * (pred - y);
    }
    Ok((sse / test.len() as f64).sqrt())
}

/// Index of the largest logit; ties go to the smallest index.
pub fn argmax(logits: &[f64]) -> usize {
    let mut best = 0;
    for (k, v) in logits.iter().enumerate() {
        if *v > logits[best] {
            best = k;
        }
    }
    best
}

/// Fraction of samples whose arg-max logit differs from the label.
pub fn evaluate_misclassification(p: &EdcnnParams, test: &LabeledDataset) -> Result<f64> {
    if test.is_empty() {
        return invalid("test set is empty");
    }
    let Some(labels) = test.labels() else {
        return invalid("misclassification needs class labels");
    };
    if p.arch().out_rows < 2 {
        return invalid("misclassification needs a classification head with K >= 2 rows");
    }
    let mut wrong = 0usize;
    for (x, label) in test.rows().zip(labels) {
        if argmax(&p.forward(x)?) != *label {
            wrong += 1;
        }
    }
    Ok(wrong as f64 / test.len() as f64)
}
