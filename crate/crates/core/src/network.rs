//! Expansive deep convolutional networks.
//!
//! With `h_0 = x` (length `d`), layer `k` computes
//! `h_k = relu(w_k * h_{k-1} + b_k)` where `*` is the zero-padded
//! convolution, so `h_k` has width `d + k s`. The network output is the
//! product of the outer weights with `h_L`. A single outer row gives the
//! scalar hypothesis used for regression; `K` rows give `K` logits for
//! classification. There are no fully connected layers.

use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::conv::{contracting_convolve, expansive_convolve_into, Filter};
use crate::error::{invalid, Result};

pub fn relu(t: f64) -> f64 {
    if t > 0.0 {
        t
    } else {
        0.0
    }
}

pub fn relu_vec(v: &[f64]) -> Vec<f64> {
    v.iter().copied().map(relu).collect()
}

/// Truncation `min(M, |t|) * sgn(t)`, clipping `t` to `[-M, M]`.
pub fn truncate(m: f64, t: f64) -> Result<f64> {
    if !(m > 0.0) {
        return invalid(format!("truncation level must be positive, got {m}"));
    }
    Ok(truncate_unchecked(m, t))
}

#[inline]
pub(crate) fn truncate_unchecked(m: f64, t: f64) -> f64 {
    if t > m {
        m
    } else if t < -m {
        -m
    } else {
        t
    }
}

/// Which filter lengths a network accepts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterRange {
    /// `2 <= s <= d`, the range under which the consistency theorem holds.
    #[default]
    Theorem,
    /// Any `s >= 1`. Needed for scalar inputs, where `d = 1`.
    Relaxed,
}

/// Shape of a network: input dimension, filter length, depth, output rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub input_dim: usize,
    pub filter_len: usize,
    pub depth: usize,
    pub out_rows: usize,
}

impl Architecture {
    pub fn new(
        input_dim: usize,
        filter_len: usize,
        depth: usize,
        out_rows: usize,
        range: FilterRange,
    ) -> Result<Self> {
        if input_dim < 1 {
            return invalid("input dimension d must be at least 1");
        }
        if depth < 1 {
            return invalid("depth L must be at least 1");
        }
        if out_rows < 1 {
            return invalid("network needs at least one output row");
        }
        match range {
            FilterRange::Theorem if filter_len < 2 || filter_len > input_dim => {
                return invalid(format!(
                    "filter length must satisfy 2 <= s <= d (s = {filter_len}, d = {input_dim})"
                ))
            }
            FilterRange::Relaxed if filter_len < 1 => {
                return invalid("filter length s must be at least 1")
            }
            _ => {}
        }
        Ok(Architecture {
            input_dim,
            filter_len,
            depth,
            out_rows,
        })
    }

    /// Width `d + k s` of `h_k`.
    pub fn width(&self, k: usize) -> usize {
        self.input_dim + k * self.filter_len
    }

    pub fn output_width(&self) -> usize {
        self.width(self.depth)
    }

    /// Total number of scalar parameters, including every outer row.
    pub fn num_params(&self) -> usize {
        (1..=self.depth)
            .map(|k| self.filter_len + 1 + self.width(k))
            .sum::<usize>()
            + self.out_rows * self.output_width()
    }
}

/// Filter and bias of one convolutional layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub filter: Filter,
    pub bias: Vec<f64>,
}

/// Complete trainable state of an eDCNN.
#[derive(Debug, Clone, PartialEq)]
pub struct EdcnnParams {
    arch: Architecture,
    layers: Vec<LayerParams>,
    /// `out_rows x (d + L s)`, row-major.
    out_weights: Vec<f64>,
}

/// Pre- and post-activation vectors recorded by [`EdcnnParams::forward_traced`].
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationTrace {
    /// `pre[k-1] = w_k * h_{k-1} + b_k` for `k = 1..=L`.
    pub pre: Vec<Vec<f64>>,
    /// `post[k] = h_k` for `k = 0..=L`; `post[0]` is the input.
    pub post: Vec<Vec<f64>>,
}

impl ActivationTrace {
    pub fn last_hidden(&self) -> &[f64] {
        self.post.last().expect("trace always holds h_0")
    }
}

/// Weight initialization scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitScheme {
    /// Filters uniform on `±sqrt(6 / (s+1))`, outer weights uniform on
    /// `±1 / sqrt(d + L s)`, biases zero.
    UniformScaled,
    /// Every parameter set to the given value.
    Constant(f64),
}

impl EdcnnParams {
    pub fn new(
        arch: Architecture,
        layers: Vec<LayerParams>,
        out_weights: Vec<f64>,
    ) -> Result<Self> {
        if layers.len() != arch.depth {
            return invalid(format!(
                "expected {} layers, got {}",
                arch.depth,
                layers.len()
            ));
        }
        for (i, layer) in layers.iter().enumerate() {
            let k = i + 1;
            if layer.filter.len_s() != arch.filter_len {
                return invalid(format!(
                    "layer {k}: filter has length {}, architecture says {}",
                    layer.filter.len_s(),
                    arch.filter_len
                ));
            }
            if layer.bias.len() != arch.width(k) {
                return invalid(format!(
                    "layer {k}: bias has length {}, expected d + ks = {}",
                    layer.bias.len(),
                    arch.width(k)
                ));
            }
        }
        if out_weights.len() != arch.out_rows * arch.output_width() {
            return invalid(format!(
                "outer weights have {} entries, expected {} x {}",
                out_weights.len(),
                arch.out_rows,
                arch.output_width()
            ));
        }
        let all_finite = layers
            .iter()
            .flat_map(|l| l.bias.iter())
            .chain(out_weights.iter())
            .all(|x| x.is_finite());
        if !all_finite {
            return invalid("network parameters must be finite");
        }
        Ok(EdcnnParams {
            arch,
            layers,
            out_weights,
        })
    }

    /// Deterministic initialization from `seed`.
    pub fn init(arch: Architecture, scheme: InitScheme, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = arch.filter_len;
        let filter_bound = (6.0 / (s + 1) as f64).sqrt();
        let out_bound = 1.0 / (arch.output_width() as f64).sqrt();
        let mut draw = |bound: f64, n: usize| -> Vec<f64> {
            match scheme {
                InitScheme::UniformScaled => {
                    (0..n).map(|_| rng.random_range(-bound..bound)).collect()
                }
                InitScheme::Constant(c) => vec![c; n],
            }
        };
        let layers = (1..=arch.depth)
            .map(|k| {
                let filter = Filter::new(draw(filter_bound, s + 1)).expect("finite draw");
                let bias = match scheme {
                    InitScheme::UniformScaled => vec![0.0; arch.width(k)],
                    InitScheme::Constant(c) => vec![c; arch.width(k)],
                };
                LayerParams { filter, bias }
            })
            .collect();
        let out_weights = draw(out_bound, arch.out_rows * arch.output_width());
        EdcnnParams {
            arch,
            layers,
            out_weights,
        }
    }

    pub fn arch(&self) -> &Architecture {
        &self.arch
    }

    pub fn layers(&self) -> &[LayerParams] {
        &self.layers
    }

    pub fn out_weights(&self) -> &[f64] {
        &self.out_weights
    }

    pub fn out_row(&self, r: usize) -> &[f64] {
        let w = self.arch.output_width();
        &self.out_weights[r * w..(r + 1) * w]
    }

    /// Every parameter block in a fixed order: per layer filter then
    /// bias, then the outer weights.
    pub fn blocks(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::with_capacity(2 * self.layers.len() + 1);
        for l in &self.layers {
            out.push(l.filter.coeffs());
            out.push(&l.bias);
        }
        out.push(&self.out_weights);
        out
    }

    pub fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::with_capacity(2 * self.layers.len() + 1);
        for l in &mut self.layers {
            out.push(l.filter.coeffs_mut());
            out.push(&mut l.bias);
        }
        out.push(&mut self.out_weights);
        out
    }

    pub fn num_params(&self) -> usize {
        self.arch.num_params()
    }

    pub fn all_finite(&self) -> bool {
        self.blocks()
            .iter()
            .all(|b| b.iter().all(|x| x.is_finite()))
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.arch.input_dim {
            return invalid(format!(
                "input has length {}, network expects d = {}",
                x.len(),
                self.arch.input_dim
            ));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return invalid("input contains non-finite values");
        }
        Ok(())
    }

    fn hidden(&self, x: &[f64]) -> Vec<f64> {
        let mut h = x.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut next = vec![0.0; self.arch.width(i + 1)];
            expansive_convolve_into(layer.filter.coeffs(), &h, &mut next);
            for (z, b) in next.iter_mut().zip(&layer.bias) {
                *z = relu(*z + b);
            }
            h = next;
        }
        h
    }

    /// Outer weights applied to `h_L`, one value per output row.
    pub fn readout(&self, h_last: &[f64]) -> Vec<f64> {
        (0..self.arch.out_rows)
            .map(|r| dot(self.out_row(r), h_last))
            .collect()
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        Ok(self.readout(&self.hidden(x)))
    }

    /// Single-output evaluation; errors when the network has several rows.
    pub fn forward_scalar(&self, x: &[f64]) -> Result<f64> {
        if self.arch.out_rows != 1 {
            return invalid("scalar evaluation needs a single-row output layer");
        }
        Ok(self.forward(x)?[0])
    }

    pub fn forward_traced(&self, x: &[f64]) -> Result<(Vec<f64>, ActivationTrace)> {
        self.check_input(x)?;
        let mut post = Vec::with_capacity(self.arch.depth + 1);
        let mut pre = Vec::with_capacity(self.arch.depth);
        post.push(x.to_vec());
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = vec![0.0; self.arch.width(i + 1)];
            expansive_convolve_into(layer.filter.coeffs(), &post[i], &mut z);
            for (zj, b) in z.iter_mut().zip(&layer.bias) {
                *zj += b;
            }
            post.push(relu_vec(&z));
            pre.push(z);
        }
        let trace = ActivationTrace { pre, post };
        Ok((self.readout(trace.last_hidden()), trace))
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |acc, (x, y)| acc + x * y)
}

/// One contracting layer `relu(w ⋆ h + b)`; `b` must have length `D - s`.
pub fn contracting_layer(filter: &Filter, bias: &[f64], h: &[f64]) -> Result<Vec<f64>> {
    let z = contracting_convolve(filter, h)?;
    if bias.len() != z.len() {
        return invalid(format!(
            "bias has length {}, contracting layer output has {}",
            bias.len(),
            z.len()
        ));
    }
    Ok(z.iter().zip(bias).map(|(a, b)| relu(a + b)).collect())
}

fn check_counts(depth: usize, s: usize, d: usize) -> Result<()> {
    if depth < 1 || s < 1 || d < 1 {
        return invalid(format!(
            "L, s and d must all be positive (L = {depth}, s = {s}, d = {d})"
        ));
    }
    Ok(())
}

/// Number of free parameters `(s+1)L + d + Ls + sum_k (d + ks)`.
pub fn count_params(depth: usize, s: usize, d: usize) -> Result<u64> {
    check_counts(depth, s, d)?;
    let (l, s, d) = (depth as u64, s as u64, d as u64);
    let widths: u64 = (1..=l).map(|k| d + k * s).sum();
    Ok((s + 1) * l + d + l * s + widths)
}

/// Number of neurons `1 + d + sum_k (d + ks)`.
pub fn count_neurons(depth: usize, s: usize, d: usize) -> Result<u64> {
    check_counts(depth, s, d)?;
    let (l, s, d) = (depth as u64, s as u64, d as u64);
    let widths: u64 = (1..=l).map(|k| d + k * s).sum();
    Ok(1 + d + widths)
}
