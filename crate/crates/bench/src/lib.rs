//! Benchmarks for the core crate; see `benches/pipeline.rs`.
