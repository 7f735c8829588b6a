//! Benchmark-only crate; see `benches/sampler.rs` for the criterion targets.
