//! Criterion benchmarks for the heliosolve kernels; see `benches/kernels.rs`.
