//! Criterion benchmarks for the lieflow crate; see `benches/`.
