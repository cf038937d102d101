//! Criterion benchmarks for the model; see `benches/cxl0.rs`.
