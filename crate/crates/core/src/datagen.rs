//! Datasets: the sinc regression model, a two-class signal stand-in,
//! CSV ingestion, windowing of tri-axial streams, and train/test splits.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, EdcnnError, Result};
use crate::grad::Target;
use crate::io::write_atomic;

/// Regression targets or class labels, one per row.
#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    Regression(Vec<f64>),
    Classification { labels: Vec<usize>, classes: usize },
}

/// Feature rows of fixed dimension with their targets.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    dim: usize,
    features: Vec<f64>,
    targets: Targets,
}

impl LabeledDataset {
    pub fn regression(dim: usize, features: Vec<f64>, targets: Vec<f64>) -> Result<Self> {
        Self::build(dim, features, Targets::Regression(targets))
    }

    pub fn classification(
        dim: usize,
        features: Vec<f64>,
        labels: Vec<usize>,
        classes: usize,
    ) -> Result<Self> {
        if classes < 1 {
            return invalid("a classification dataset needs at least one class");
        }
        if let Some((i, l)) = labels.iter().enumerate().find(|(_, l)| **l >= classes) {
            return invalid(format!(
                "row {i}: label {l} not below class count {classes}"
            ));
        }
        Self::build(dim, features, Targets::Classification { labels, classes })
    }

    fn build(dim: usize, features: Vec<f64>, targets: Targets) -> Result<Self> {
        if dim < 1 {
            return invalid("feature dimension must be at least 1");
        }
        let rows = match &targets {
            Targets::Regression(t) => t.len(),
            Targets::Classification { labels, .. } => labels.len(),
        };
        if features.len() != rows * dim {
            return invalid(format!(
                "feature matrix has {} values, expected {rows} rows x {dim}",
                features.len()
            ));
        }
        Ok(LabeledDataset {
            dim,
            features,
            targets,
        })
    }

    pub fn len(&self) -> usize {
        self.features.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.features.chunks_exact(self.dim)
    }

    pub fn targets(&self) -> &Targets {
        &self.targets
    }

    pub fn target(&self, i: usize) -> Target {
        match &self.targets {
            Targets::Regression(t) => Target::Value(t[i]),
            Targets::Classification { labels, .. } => Target::Class(labels[i]),
        }
    }

    pub fn is_classification(&self) -> bool {
        matches!(self.targets, Targets::Classification { .. })
    }

    /// Class count, or `None` for regression data.
    pub fn classes(&self) -> Option<usize> {
        match self.targets {
            Targets::Classification { classes, .. } => Some(classes),
            Targets::Regression(_) => None,
        }
    }

    pub fn labels(&self) -> Option<&[usize]> {
        match &self.targets {
            Targets::Classification { labels, .. } => Some(labels),
            Targets::Regression(_) => None,
        }
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> LabeledDataset {
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            features.extend_from_slice(self.row(i));
        }
        let targets = match &self.targets {
            Targets::Regression(t) => Targets::Regression(indices.iter().map(|&i| t[i]).collect()),
            Targets::Classification { labels, classes } => Targets::Classification {
                labels: indices.iter().map(|&i| labels[i]).collect(),
                classes: *classes,
            },
        };
        LabeledDataset {
            dim: self.dim,
            features,
            targets,
        }
    }
}

/// `sin(r) / r`, with the continuous value 1 at the origin.
pub fn sinc(r: f64) -> f64 {
    if r == 0.0 {
        1.0
    } else {
        r.sin() / r
    }
}

/// Noise-free regression function `sin(|x|) / |x|`.
pub fn sinc_of_norm(x: &[f64]) -> f64 {
    sinc(x.iter().map(|v| v * v).sum::<f64>().sqrt())
}

/// Training sample from `y = sin(|x|)/|x| + eps`, `x` uniform on
/// `[-10, 10]^d`, `eps ~ N(0, noise_var)`.
pub fn gen_sinc_train(d: usize, m: usize, noise_var: f64, seed: u64) -> Result<LabeledDataset> {
    if d < 1 || m < 1 {
        return invalid(format!("need d >= 1 and m >= 1 (d = {d}, m = {m})"));
    }
    if !(noise_var >= 0.0) || !noise_var.is_finite() {
        return invalid(format!(
            "noise variance must be nonnegative, got {noise_var}"
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, noise_var.sqrt()).expect("finite standard deviation");
    let mut features = Vec::with_capacity(d * m);
    let mut targets = Vec::with_capacity(m);
    for _ in 0..m {
        let start = features.len();
        features.extend((0..d).map(|_| rng.random_range(-10.0..=10.0)));
        let clean = sinc_of_norm(&features[start..]);
        let eps = if noise_var > 0.0 {
            noise.sample(&mut rng)
        } else {
            0.0
        };
        targets.push(clean + eps);
    }
    LabeledDataset::regression(d, features, targets)
}

/// Noise-free test sample of the sinc model.
pub fn gen_sinc_test(d: usize, m: usize, seed: u64) -> Result<LabeledDataset> {
    gen_sinc_train(d, m, 0.0, seed)
}

/// Two balanced classes of noisy sinusoids. Class 0 completes one cycle
/// over the window with unit amplitude; class 1 completes three cycles
/// with amplitude `1 + margin`. Each signal gets a small random phase
/// and unit Gaussian noise. Labels alternate `0, 1, 0, 1, ..`.
pub fn gen_two_class_signals(d: usize, m: usize, margin: f64, seed: u64) -> Result<LabeledDataset> {
    if d < 4 {
        return invalid(format!("two-class signals need d >= 4, got {d}"));
    }
    if m < 1 {
        return invalid("need at least one sample");
    }
    if !(margin > 0.0) || !margin.is_finite() {
        return invalid(format!("margin must be positive, got {margin}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let mut features = Vec::with_capacity(d * m);
    let mut labels = Vec::with_capacity(m);
    for i in 0..m {
        let label = i % 2;
        let (cycles, amplitude) = if label == 0 {
            (1.0, 1.0)
        } else {
            (3.0, 1.0 + margin)
        };
        let phase = rng.random_range(-0.25..0.25);
        for t in 0..d {
            let angle = 2.0 * std::f64::consts::PI * cycles * t as f64 / d as f64 + phase;
            features.push(amplitude * angle.sin() + noise.sample(&mut rng));
        }
        labels.push(label);
    }
    LabeledDataset::classification(d, features, labels, 2)
}

/// How the last CSV column is interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CsvSchema {
    FeaturesThenTarget,
    FeaturesThenLabel,
}

/// Reads a headerless (or single-header) comma-separated numeric table.
/// Labels must be nonnegative integers; the class count is one more than
/// the largest label seen.
pub fn load_csv(
    path: impl AsRef<Path>,
    schema: CsvSchema,
    skip_header: bool,
) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| EdcnnError::io(path, e))?;
    parse_csv(file, schema, skip_header)
}

pub fn parse_csv(
    reader: impl Read,
    schema: CsvSchema,
    skip_header: bool,
) -> Result<LabeledDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(skip_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut width = None;
    let mut features = Vec::new();
    let mut last = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1 + usize::from(skip_header);
        let record = record.map_err(|e| EdcnnError::Parse {
            row,
            message: e.to_string(),
        })?;
        if record.len() == 1 && record.get(0) == Some("") {
            continue;
        }
        match width {
            None if record.len() < 2 => {
                return Err(EdcnnError::Parse {
                    row,
                    message: "need at least one feature column and one target column".into(),
                })
            }
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(EdcnnError::Parse {
                    row,
                    message: format!("expected {w} columns, found {}", record.len()),
                })
            }
            _ => {}
        }
        for (c, cell) in record.iter().enumerate() {
            let value: f64 = cell.parse().map_err(|_| EdcnnError::Parse {
                row,
                message: format!("column {}: '{cell}' is not a number", c + 1),
            })?;
            if !value.is_finite() {
                return Err(EdcnnError::Parse {
                    row,
                    message: format!("column {}: value is not finite", c + 1),
                });
            }
            if c + 1 == record.len() {
                last.push((row, value));
            } else {
                features.push(value);
            }
        }
    }
    let Some(width) = width else {
        return Err(EdcnnError::Parse {
            row: 0,
            message: "file contains no data rows".into(),
        });
    };
    let dim = width - 1;
    match schema {
        CsvSchema::FeaturesThenTarget => {
            LabeledDataset::regression(dim, features, last.into_iter().map(|(_, v)| v).collect())
        }
        CsvSchema::FeaturesThenLabel => {
            let mut labels = Vec::with_capacity(last.len());
            for (row, v) in last {
                if v < 0.0 || v.fract() != 0.0 {
                    return Err(EdcnnError::Parse {
                        row,
                        message: format!("label {v} is not a nonnegative integer"),
                    });
                }
                labels.push(v as usize);
            }
            let classes = labels.iter().max().map_or(1, |m| m + 1);
            LabeledDataset::classification(dim, features, labels, classes)
        }
    }
}

/// Writes features then target/label per row, values in shortest
/// round-trip decimal form.
pub fn write_csv(data: &LabeledDataset, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::new();
    for i in 0..data.len() {
        for v in data.row(i) {
            out.push_str(&format!("{v},"));
        }
        match data.target(i) {
            Target::Value(y) => out.push_str(&format!("{y}\n")),
            Target::Class(c) => out.push_str(&format!("{c}\n")),
        }
    }
    write_atomic(path, out.as_bytes())
}

/// Cuts a `T x 3` stream into non-overlapping windows of `window` steps,
/// flattened time-major (`x1 y1 z1 x2 y2 z2 ..`). A trailing partial
/// window is dropped.
pub fn window_series(stream: &[[f64; 3]], window: usize) -> Result<Vec<Vec<f64>>> {
    if window < 1 {
        return invalid("window must be at least 1");
    }
    if stream.len() < window {
        return invalid(format!(
            "stream has {} steps, shorter than the window of {window}",
            stream.len()
        ));
    }
    Ok(stream
        .chunks_exact(window)
        .map(|chunk| chunk.iter().flatten().copied().collect())
        .collect())
}

/// One accelerometer reading: `user,activity,timestamp,x,y,z`.
#[derive(Debug, Clone, PartialEq)]
pub struct AccelReading {
    pub user: i64,
    pub activity: String,
    pub xyz: [f64; 3],
}

/// Parses accelerometer rows of the form `user,activity,timestamp,x,y,z`
/// (a trailing `;` on the last field is tolerated). Rows with a missing
/// or empty axis are rejected with their row number.
pub fn parse_accelerometer_csv(reader: impl Read) -> Result<Vec<AccelReading>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| EdcnnError::Parse {
            row,
            message: e.to_string(),
        })?;
        if record.iter().all(|c| c.is_empty()) {
            continue;
        }
        if record.len() < 6 {
            return Err(EdcnnError::Parse {
                row,
                message: format!("expected 6 columns, found {}", record.len()),
            });
        }
        let num = |c: usize| -> Result<f64> {
            let cell = record[c].trim_end_matches(';');
            cell.parse().map_err(|_| EdcnnError::Parse {
                row,
                message: format!("column {}: '{cell}' is not a number", c + 1),
            })
        };
        let user = record[0].parse().map_err(|_| EdcnnError::Parse {
            row,
            message: format!("user id '{}' is not an integer", &record[0]),
        })?;
        out.push(AccelReading {
            user,
            activity: record[1].to_string(),
            xyz: [num(3)?, num(4)?, num(5)?],
        });
    }
    Ok(out)
}

/// Windowed accelerometer records with per-window group (user) ids.
#[derive(Debug, Clone)]
pub struct WindowedRecords {
    pub data: LabeledDataset,
    pub groups: Vec<i64>,
    /// Activity names in label order.
    pub class_names: Vec<String>,
}

/// Windows each contiguous run of readings sharing user and activity.
/// Labels index the sorted set of activity names.
pub fn window_accelerometer(readings: &[AccelReading], window: usize) -> Result<WindowedRecords> {
    if window < 1 {
        return invalid("window must be at least 1");
    }
    let class_names: Vec<String> = readings
        .iter()
        .map(|r| r.activity.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let index: BTreeMap<&str, usize> = class_names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), i))
        .collect();
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut groups = Vec::new();
    let mut start = 0;
    while start < readings.len() {
        let key = (&readings[start].user, &readings[start].activity);
        let mut end = start + 1;
        while end < readings.len() && (&readings[end].user, &readings[end].activity) == key {
            end += 1;
        }
        let run: Vec<[f64; 3]> = readings[start..end].iter().map(|r| r.xyz).collect();
        if run.len() >= window {
            for w in window_series(&run, window)? {
                features.extend(w);
                labels.push(index[key.1.as_str()]);
                groups.push(*key.0);
            }
        }
        start = end;
    }
    if labels.is_empty() {
        return invalid("no complete window in the stream");
    }
    let classes = class_names.len();
    Ok(WindowedRecords {
        data: LabeledDataset::classification(3 * window, features, labels, classes)?,
        groups,
        class_names,
    })
}

/// How to divide a dataset into train and test parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SplitSpec {
    /// Seeded random split; classification data is stratified by label.
    RandomFraction { fraction: f64, seed: u64 },
    /// Rows whose group id is in `train_groups` go to train, the rest to test.
    ByGroup {
        group_ids: Option<Vec<i64>>,
        train_groups: Vec<i64>,
    },
}

/// Splits into `(train, test)`. Both sides keep ascending row order.
pub fn split(data: &LabeledDataset, spec: &SplitSpec) -> Result<(LabeledDataset, LabeledDataset)> {
    let (train, test) = split_indices(data, spec)?;
    Ok((data.subset(&train), data.subset(&test)))
}

pub fn split_indices(data: &LabeledDataset, spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    let m = data.len();
    match spec {
        SplitSpec::RandomFraction { fraction, seed } => {
            if !(*fraction > 0.0 && *fraction < 1.0) {
                return invalid(format!("split fraction must lie in (0, 1), got {fraction}"));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let strata: Vec<Vec<usize>> = match data.labels() {
                Some(labels) => {
                    let classes = data.classes().unwrap_or(1);
                    let mut by_class = vec![Vec::new(); classes];
                    for (i, l) in labels.iter().enumerate() {
                        by_class[*l].push(i);
                    }
                    by_class
                }
                None => vec![(0..m).collect()],
            };
            let mut train = Vec::new();
            let mut test = Vec::new();
            for mut stratum in strata {
                stratum.shuffle(&mut rng);
                let n_train = (fraction * stratum.len() as f64).round() as usize;
                train.extend_from_slice(&stratum[..n_train]);
                test.extend_from_slice(&stratum[n_train..]);
            }
            train.sort_unstable();
            test.sort_unstable();
            Ok((train, test))
        }
        SplitSpec::ByGroup {
            group_ids,
            train_groups,
        } => {
            let Some(ids) = group_ids else {
                return invalid("group split needs group ids");
            };
            if ids.len() != m {
                return invalid(format!("got {} group ids for {m} rows", ids.len()));
            }
            let keep: BTreeSet<i64> = train_groups.iter().copied().collect();
            Ok((0..m).partition(|i| keep.contains(&ids[*i])))
        }
    }
}
