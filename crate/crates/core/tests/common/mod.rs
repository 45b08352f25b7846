use std::path::PathBuf;

use tiltstab_core::{Problem, ProblemFile};

pub fn problems_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../problems")
}

pub fn load(name: &str) -> (ProblemFile, Problem) {
    let path = problems_dir().join(name);
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let file = ProblemFile::parse(&text).unwrap();
    let problem = file.to_problem().unwrap();
    (file, problem)
}

/// Every `.nlp` file in the problems directory, sorted by name.
#[allow(dead_code)]
pub fn all_fixtures() -> Vec<(String, Problem)> {
    let mut names: Vec<String> = std::fs::read_dir(problems_dir())
        .unwrap()
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".nlp"))
        .collect();
    names.sort();
    names.into_iter().map(|n| { let p = load(&n).1; (n, p) }).collect()
}
