//! Criterion benchmarks for `nsopt-core`; see `benches/`.
