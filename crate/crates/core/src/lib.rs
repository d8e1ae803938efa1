//! Expansive deep convolutional neural networks (eDCNNs).
//!
//! An eDCNN stacks zero-padded 1-D convolutions with ReLU activations;
//! each layer widens its input by the filter length and a linear readout
//! of the last layer gives the output. There are no fully connected
//! layers. This crate provides
//!
//! - [`conv`]: expansive/contracting convolution and their Toeplitz forms,
//! - [`network`]: parameters, forward evaluation, truncation, counts,
//! - [`grad`]: losses, exact gradients, finite-difference checks,
//! - [`trainer`]: empirical risk minimization with Adam and the
//!   sample-size schedules for depth and truncation,
//! - [`capacity`]: pseudo-dimension, packing, covering and consistency
//!   formulas,
//! - [`datagen`]: sinc regression data, synthetic signals, CSV loaders,
//! - [`experiments`]: consistency curves and depth sweeps.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod capacity;
pub mod conv;
pub mod datagen;
pub mod error;
pub mod experiments;
pub mod grad;
pub mod io;
pub mod network;
pub mod seed;
pub mod trainer;
pub mod verify;

pub use capacity::{
    capacity_report, check_schedule, consistency_ratio, covering_log2_bound, packing_bound,
    pseudo_dim_bound, CapacityInputs, CapacityReport, ScheduleReport,
};
pub use conv::{
    contracting_convolve, expansive_convolve, toeplitz_contracting, toeplitz_expansive, Filter,
    ToeplitzMatrix,
};
pub use datagen::{LabeledDataset, SplitSpec, Targets};
pub use error::{EdcnnError, Result};
pub use grad::{backprop, GradientSet, LossKind, Target};
pub use network::{
    count_neurons, count_params, relu, relu_vec, truncate, ActivationTrace, Architecture,
    EdcnnParams, FilterRange, InitScheme, LayerParams,
};
pub use trainer::{
    depth_schedule, evaluate_misclassification, evaluate_rmse, predict_truncated, train_erm,
    truncation_schedule, AutoOr, TrainConfig, TrainReport,
};
