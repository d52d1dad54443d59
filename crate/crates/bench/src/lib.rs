//! Criterion benchmarks for the covering counts and the boundary functionals; see `benches/`.
