//! Benchmark-only crate: see `benches/suites.rs` for the criterion suites.
