//! Criterion benchmarks for the equilens core live in `benches/`.
