//! Benchmarks for the scoring hot paths; see `benches/scoring.rs`.
