//! Shared inputs for the benchmarks.

use std::path::PathBuf;

use tiltstab_core::{Problem, ProblemFile};

pub fn problems_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../problems")
}

/// Loads `problems/<name>`; panics on a missing or malformed fixture.
pub fn fixture(name: &str) -> Problem {
    let path = problems_dir().join(name);
    let text = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    ProblemFile::parse(&text)
        .and_then(|f| f.to_problem())
        .unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}
