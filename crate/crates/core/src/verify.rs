//! Self-checks behind `edcnn check`: convolution against its Toeplitz
//! form, backprop against central differences, and the schedule scan.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::capacity::{check_schedule, log_grid, ScheduleReport};
use crate::conv::{
    contracting_convolve, expansive_convolve, toeplitz_contracting, toeplitz_expansive, Filter,
};
use crate::error::{invalid, Result};
use crate::grad::{gradient_check, LossKind, Target};
use crate::network::{Architecture, EdcnnParams, FilterRange, LayerParams};

pub const CONV_TOLERANCE: f64 = 1e-12;
pub const GRAD_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvCheck {
    pub pairs: usize,
    pub max_abs_diff: f64,
    pub passed: bool,
}

/// Compares both convolutions with their matrix forms on `pairs` random
/// `(w, v)` draws, `s` cycling through `{1, 2, 3, 9, 19}` and `D` in
/// `s+1..=64`.
pub fn check_conv(seed: u64, pairs: usize) -> Result<ConvCheck> {
    const LENS: [usize; 5] = [1, 2, 3, 9, 19];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for i in 0..pairs {
        let s = LENS[i % LENS.len()];
        let dim = rng.random_range(s + 1..=64);
        let filter = Filter::new((0..=s).map(|_| rng.random_range(-1.0..1.0)).collect())?;
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let results = [
            (
                expansive_convolve(&filter, &v)?,
                toeplitz_expansive(&filter, dim)?.mul_vec(&v),
            ),
            (
                contracting_convolve(&filter, &v)?,
                toeplitz_contracting(&filter, dim)?.mul_vec(&v),
            ),
        ];
        for (direct, matrix) in &results {
            if direct.len() != matrix.len() {
                return invalid("convolution and matrix form disagree in length");
            }
            for (a, b) in direct.iter().zip(matrix) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    Ok(ConvCheck {
        pairs,
        max_abs_diff: worst,
        passed: worst <= CONV_TOLERANCE,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GradCheck {
    pub networks: usize,
    pub step: f64,
    pub max_rel_error: f64,
    pub checked: usize,
    pub excluded_near_kink: usize,
    pub passed: bool,
}

fn random_params(rng: &mut ChaCha8Rng, arch: Architecture) -> Result<EdcnnParams> {
    let s = arch.filter_len;
    let layers = (1..=arch.depth)
        .map(|k| {
            Ok(LayerParams {
                filter: Filter::new((0..=s).map(|_| rng.random_range(-1.0..1.0)).collect())?,
                bias: (0..arch.width(k))
                    .map(|_| rng.random_range(-0.5..0.5))
                    .collect(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let out = (0..arch.out_rows * arch.output_width())
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    EdcnnParams::new(arch, layers, out)
}

/// Gradient check on `networks` random architectures (`s` in `{2, 3}`,
/// `s <= d <= 10`, `L <= 4`), each under squared loss and 3-class cross
/// entropy.
pub fn check_grad(seed: u64, networks: usize, step: f64) -> Result<GradCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = GradCheck {
        networks,
        step,
        max_rel_error: 0.0,
        checked: 0,
        excluded_near_kink: 0,
        passed: false,
    };
    for _ in 0..networks {
        let s = rng.random_range(2..=3);
        let d = rng.random_range(s..=10);
        let depth = rng.random_range(1..=4);
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        for kind in [LossKind::Squared, LossKind::CrossEntropy] {
            let (rows, target) = match kind {
                LossKind::Squared => (1, Target::Value(rng.random_range(-1.0..1.0))),
                LossKind::CrossEntropy => (3, Target::Class(rng.random_range(0..3))),
            };
            let arch = Architecture::new(d, s, depth, rows, FilterRange::Theorem)?;
            let p = random_params(&mut rng, arch)?;
            let r = gradient_check(&p, &x, target, kind, step)?;
            out.max_rel_error = out.max_rel_error.max(r.max_rel_error);
            out.checked += r.checked;
            out.excluded_near_kink += r.excluded_near_kink;
        }
    }
    out.passed = out.checked > 0 && out.max_rel_error <= GRAD_TOLERANCE;
    Ok(out)
}

/// Scans `M = max(1, ln m)`, `L = ceil(m^alpha)` over `10^3..10^9`, one
/// point per decade.
pub fn check_schedule_power(theta: f64, alpha: f64, d: usize) -> Result<ScheduleReport> {
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return invalid(format!("alpha must be non-negative, got {alpha}"));
    }
    let grid = log_grid(3.0, 9.0, 7);
    check_schedule(
        theta,
        d,
        &grid,
        |m| (m as f64).ln().max(1.0),
        |m| ((m as f64).powf(alpha).ceil() as usize).max(1),
    )
}
