//! Acceptance checks live in `tests/acceptance.rs`; this crate exports nothing.
