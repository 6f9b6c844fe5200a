//! Criterion benchmarks for the simulator; see `benches/quadrature.rs`.
