//! Losses and exact gradients for eDCNN parameters.
//!
//! [`backprop`] runs the traced forward pass and then walks the layers in
//! reverse. For a layer `z = w * h + b` the filter gradient at tap `i` is
//! `sum_l dz[l + i] h[l]` (every output position shares the same filter
//! entry along a Toeplitz diagonal) and the input gradient is the
//! transposed convolution `dh[l] = sum_i w[i] dz[l + i]`. The ReLU
//! derivative at exactly zero is taken to be zero.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::network::{dot, EdcnnParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Squared,
    CrossEntropy,
}

/// Supervision for a single sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Target {
    Value(f64),
    Class(usize),
}

pub fn loss_squared(pred: f64, y: f64) -> f64 {
    (pred - y) * (pred - y)
}

pub fn loss_squared_grad(pred: f64, y: f64) -> f64 {
    2.0 * (pred - y)
}

fn check_label(logits: &[f64], label: usize) -> Result<()> {
    if logits.len() < 2 {
        return invalid("cross entropy needs at least two classes");
    }
    if label >= logits.len() {
        return invalid(format!(
            "label {label} out of range for {} classes",
            logits.len()
        ));
    }
    Ok(())
}

/// `-log softmax(logits)[label]`, evaluated with the maximum subtracted.
pub fn loss_cross_entropy(logits: &[f64], label: usize) -> Result<f64> {
    check_label(logits, label)?;
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_sum: f64 = logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    Ok(max + log_sum - logits[label])
}

/// Gradient of [`loss_cross_entropy`] with respect to the logits:
/// softmax minus the one-hot label.
pub fn cross_entropy_grad(logits: &[f64], label: usize) -> Result<Vec<f64>> {
    check_label(logits, label)?;
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(exps
        .iter()
        .enumerate()
        .map(|(k, e)| e / total - if k == label { 1.0 } else { 0.0 })
        .collect())
}

/// Per-sample loss and its gradient with respect to the network outputs.
pub fn loss_and_output_grad(
    outputs: &[f64],
    target: Target,
    kind: LossKind,
) -> Result<(f64, Vec<f64>)> {
    match (kind, target) {
        (LossKind::Squared, Target::Value(y)) => {
            if outputs.len() != 1 {
                return invalid("squared loss needs a single-output network");
            }
            Ok((
                loss_squared(outputs[0], y),
                vec![loss_squared_grad(outputs[0], y)],
            ))
        }
        (LossKind::CrossEntropy, Target::Class(label)) => Ok((
            loss_cross_entropy(outputs, label)?,
            cross_entropy_grad(outputs, label)?,
        )),
        (LossKind::Squared, Target::Class(_)) => invalid("squared loss needs a real-valued target"),
        (LossKind::CrossEntropy, Target::Value(_)) => {
            invalid("cross entropy needs a class label target")
        }
    }
}

pub fn sample_loss(p: &EdcnnParams, x: &[f64], target: Target, kind: LossKind) -> Result<f64> {
    let out = p.forward(x)?;
    Ok(loss_and_output_grad(&out, target, kind)?.0)
}

/// Gradients mirroring the shape of [`EdcnnParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    pub filters: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub out_weights: Vec<f64>,
}

impl GradientSet {
    pub fn zeros_like(p: &EdcnnParams) -> Self {
        GradientSet {
            filters: p
                .layers()
                .iter()
                .map(|l| vec![0.0; l.filter.coeffs().len()])
                .collect(),
            biases: p.layers().iter().map(|l| vec![0.0; l.bias.len()]).collect(),
            out_weights: vec![0.0; p.out_weights().len()],
        }
    }

    /// Blocks in the same order as [`EdcnnParams::blocks`].
    pub fn blocks(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::with_capacity(2 * self.filters.len() + 1);
        for (f, b) in self.filters.iter().zip(&self.biases) {
            out.push(f);
            out.push(b);
        }
        out.push(&self.out_weights);
        out
    }

    pub fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::with_capacity(2 * self.filters.len() + 1);
        for (f, b) in self.filters.iter_mut().zip(self.biases.iter_mut()) {
            out.push(f);
            out.push(b);
        }
        out.push(&mut self.out_weights);
        out
    }

    pub fn fill(&mut self, value: f64) {
        for b in self.blocks_mut() {
            b.fill(value);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for b in self.blocks_mut() {
            b.iter_mut().for_each(|v| *v *= factor);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.blocks()
            .iter()
            .all(|b| b.iter().all(|v| v.is_finite()))
    }

    pub fn len(&self) -> usize {
        self.blocks().iter().map(|b| b.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Loss of one sample and the exact gradient of that loss.
pub fn backprop(
    p: &EdcnnParams,
    x: &[f64],
    target: Target,
    kind: LossKind,
) -> Result<(f64, GradientSet)> {
    let mut g = GradientSet::zeros_like(p);
    let loss = backprop_accumulate(p, x, target, kind, &mut g)?;
    Ok((loss, g))
}

/// Adds the gradient of one sample's loss into `acc` and returns the loss.
pub fn backprop_accumulate(
    p: &EdcnnParams,
    x: &[f64],
    target: Target,
    kind: LossKind,
    acc: &mut GradientSet,
) -> Result<f64> {
    let (outputs, trace) = p.forward_traced(x)?;
    let (loss, d_out) = loss_and_output_grad(&outputs, target, kind)?;
    let arch = *p.arch();
    let width = arch.output_width();
    let h_last = trace.last_hidden();

    let mut dh = vec![0.0; width];
    for (r, dr) in d_out.iter().enumerate() {
        let row = p.out_row(r);
        let g_row = &mut acc.out_weights[r * width..(r + 1) * width];
        for j in 0..width {
            g_row[j] += dr * h_last[j];
            dh[j] += dr * row[j];
        }
    }

    for k in (0..arch.depth).rev() {
        let z = &trace.pre[k];
        let h_in = &trace.post[k];
        let dz: Vec<f64> = dh
            .iter()
            .zip(z)
            .map(|(g, zj)| if *zj > 0.0 { *g } else { 0.0 })
            .collect();
        for (gb, d) in acc.biases[k].iter_mut().zip(&dz) {
            *gb += d;
        }
        let w = p.layers()[k].filter.coeffs();
        let s = w.len() - 1;
        let gw = &mut acc.filters[k];
        let mut dh_in = vec![0.0; h_in.len()];
        for (j, dzj) in dz.iter().enumerate() {
            if *dzj == 0.0 {
                continue;
            }
            for l in j.saturating_sub(s)..=j.min(h_in.len() - 1) {
                gw[j - l] += dzj * h_in[l];
                dh_in[l] += w[j - l] * dzj;
            }
        }
        dh = dh_in;
    }
    Ok(loss)
}

/// Largest relative deviation `|a - b| / max(1e-8, |a| + |b|)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / f64::max(1e-8, a.abs() + b.abs())
}

/// Central-difference estimate of every partial derivative.
pub fn finite_diff_gradient(
    p: &EdcnnParams,
    x: &[f64],
    target: Target,
    kind: LossKind,
    step: f64,
) -> Result<GradientSet> {
    Ok(central_differences(p, x, target, kind, step)?.0)
}

/// Outcome of comparing [`backprop`] with central differences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub checked: usize,
    pub excluded_near_kink: usize,
}

/// Pre-activations within this distance of zero count as sitting on a kink.
pub const KINK_TOLERANCE: f64 = 1e-6;

/// Compares backprop with central differences, skipping coordinates whose
/// perturbation moves some pre-activation across or onto a ReLU kink.
pub fn gradient_check(
    p: &EdcnnParams,
    x: &[f64],
    target: Target,
    kind: LossKind,
    step: f64,
) -> Result<GradCheckReport> {
    let (_, exact) = backprop(p, x, target, kind)?;
    let (numeric, near_kink) = central_differences(p, x, target, kind, step)?;
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        checked: 0,
        excluded_near_kink: 0,
    };
    let pairs = exact
        .blocks()
        .into_iter()
        .zip(numeric.blocks())
        .flat_map(|(a, b)| a.iter().zip(b.iter()));
    for ((a, b), kink) in pairs.zip(near_kink) {
        if kink {
            report.excluded_near_kink += 1;
            continue;
        }
        report.checked += 1;
        report.max_rel_error = report.max_rel_error.max(relative_error(*a, *b));
    }
    Ok(report)
}

fn activation_pattern(p: &EdcnnParams, x: &[f64]) -> Result<(Vec<bool>, bool)> {
    let (_, trace) = p.forward_traced(x)?;
    let mut near = false;
    let pattern = trace
        .pre
        .iter()
        .flatten()
        .map(|z| {
            near |= z.abs() < KINK_TOLERANCE;
            *z > 0.0
        })
        .collect();
    Ok((pattern, near))
}

fn central_differences(
    p: &EdcnnParams,
    x: &[f64],
    target: Target,
    kind: LossKind,
    step: f64,
) -> Result<(GradientSet, Vec<bool>)> {
    if !(step > 0.0) || !step.is_finite() {
        return invalid(format!(
            "finite-difference step must be positive, got {step}"
        ));
    }
    let (base_pattern, base_near) = activation_pattern(p, x)?;
    let mut grad = GradientSet::zeros_like(p);
    let mut near_kink = Vec::with_capacity(grad.len());
    let mut probe = p.clone();
    let n_blocks = p.blocks().len();
    for b in 0..n_blocks {
        let n = p.blocks()[b].len();
        for i in 0..n {
            let original = p.blocks()[b][i];
            probe.blocks_mut()[b][i] = original + step;
            let plus = sample_loss(&probe, x, target, kind)?;
            let (plus_pattern, plus_near) = activation_pattern(&probe, x)?;
            probe.blocks_mut()[b][i] = original - step;
            let minus = sample_loss(&probe, x, target, kind)?;
            let (minus_pattern, minus_near) = activation_pattern(&probe, x)?;
            probe.blocks_mut()[b][i] = original;
            grad.blocks_mut()[b][i] = (plus - minus) / (2.0 * step);
            near_kink.push(
                base_near
                    || plus_near
                    || minus_near
                    || plus_pattern != base_pattern
                    || minus_pattern != base_pattern,
            );
        }
    }
    Ok((grad, near_kink))
}

/// Inner product of two gradient sets, used by directional checks.
pub fn gradient_dot(a: &GradientSet, b: &GradientSet) -> f64 {
    a.blocks()
        .iter()
        .zip(b.blocks())
        .map(|(x, y)| dot(x, y))
        .sum()
}
