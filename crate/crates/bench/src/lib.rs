//! Benchmark-only crate; see `benches/gibbs.rs`.
