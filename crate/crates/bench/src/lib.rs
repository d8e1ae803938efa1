//! Criterion benchmarks for the edcnn kernels; see `benches/`.
