//! Test-only crate. The acceptance suite lives in `tests/acceptance.rs` and
//! prints one PASS/FAIL line per criterion; run it with
//! `cargo test -p isrs-validation --test acceptance`.
