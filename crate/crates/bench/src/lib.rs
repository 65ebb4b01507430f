//! Criterion benchmarks for spraylab; see `benches/`.
