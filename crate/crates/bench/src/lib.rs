// benchmark-only crate; see benches/diagnostics.rs
