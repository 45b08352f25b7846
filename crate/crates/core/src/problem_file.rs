//! Line-oriented problem files:
//!
//! ```text
//! # comment
//! vars x1 x2
//! minimize x1^2 + x2^2
//! st x1 - x2 <= 0
//! st x2 <= x1
//! point 0 0
//! ```
//!
//! Each `st lhs <= rhs` is normalized to `lhs - rhs ≤ 0` (to `lhs ≤ 0` when
//! `rhs` is the literal `0`).

use std::fmt::Write as _;

use thiserror::Error;

use crate::expr::{parse_expr, Expr, ExprError};
use crate::nlp::{NlpError, Problem};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: {source}")]
    Expr {
        line: usize,
        #[source]
        source: ExprError,
    },
    #[error("missing `{0}` directive")]
    Missing(&'static str),
    #[error(transparent)]
    Problem(#[from] NlpError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemFile {
    pub vars: Vec<String>,
    pub objective: Expr,
    /// Normalized constraints `q_i(x) ≤ 0`.
    pub constraints: Vec<Expr>,
    pub point: Vec<f64>,
}

impl ProblemFile {
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let mut vars: Option<Vec<String>> = None;
        let mut objective: Option<(usize, String)> = None;
        let mut constraints: Vec<(usize, String, String)> = Vec::new();
        let mut point: Option<Vec<f64>> = None;
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (word, rest) = body
                .split_once(char::is_whitespace)
                .map_or((body, ""), |(w, r)| (w, r.trim()));
            let syntax = |message: String| ParseError::Syntax { line, message };
            match word {
                "vars" => {
                    if vars.is_some() {
                        return Err(syntax("duplicate `vars`".into()));
                    }
                    let names: Vec<String> = rest.split_whitespace().map(str::to_string).collect();
                    if names.is_empty() {
                        return Err(syntax("`vars` needs at least one name".into()));
                    }
                    for (i, name) in names.iter().enumerate() {
                        if !is_identifier(name) {
                            return Err(syntax(format!("`{name}` is not an identifier")));
                        }
                        if names[..i].contains(name) {
                            return Err(syntax(format!("variable `{name}` declared twice")));
                        }
                    }
                    vars = Some(names);
                }
                "minimize" => {
                    if objective.is_some() {
                        return Err(syntax("duplicate `minimize`".into()));
                    }
                    if rest.is_empty() {
                        return Err(syntax("`minimize` needs an expression".into()));
                    }
                    objective = Some((line, rest.to_string()));
                }
                "st" => {
                    let parts: Vec<&str> = rest.split("<=").collect();
                    if parts.len() != 2 {
                        return Err(syntax("expected `st <expr> <= <expr>`".into()));
                    }
                    constraints.push((line, parts[0].to_string(), parts[1].to_string()));
                }
                "point" => {
                    if point.is_some() {
                        return Err(syntax("duplicate `point`".into()));
                    }
                    let vals = rest
                        .split_whitespace()
                        .map(|t| {
                            t.parse::<f64>()
                                .ok()
                                .filter(|v| v.is_finite())
                                .ok_or_else(|| syntax(format!("`{t}` is not a finite number")))
                        })
                        .collect::<Result<Vec<f64>, _>>()?;
                    point = Some(vals);
                }
                other => return Err(syntax(format!("unknown directive `{other}`"))),
            }
        }
        let vars = vars.ok_or(ParseError::Missing("vars"))?;
        let (oline, otext) = objective.ok_or(ParseError::Missing("minimize"))?;
        let point = point.ok_or(ParseError::Missing("point"))?;
        if point.len() != vars.len() {
            return Err(ParseError::Syntax {
                line: 0,
                message: format!(
                    "point has {} coordinates but {} variables are declared",
                    point.len(),
                    vars.len()
                ),
            });
        }
        let expr = |line: usize, t: &str| {
            parse_expr(t, &vars).map_err(|source| ParseError::Expr { line, source })
        };
        let objective = expr(oline, &otext)?;
        let constraints = constraints
            .iter()
            .map(|(line, l, r)| {
                let lhs = expr(*line, l)?;
                let rhs = expr(*line, r)?;
                Ok(if rhs.is_zero() { lhs } else { Expr::sub(lhs, rhs) })
            })
            .collect::<Result<Vec<_>, ParseError>>()?;
        Ok(ProblemFile {
            vars,
            objective,
            constraints,
            point,
        })
    }

    /// Normalized text that parses back to the same trees.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "vars {}", self.vars.join(" "));
        let _ = writeln!(s, "minimize {}", self.objective.display(&self.vars));
        for c in &self.constraints {
            let _ = writeln!(s, "st {} <= 0", c.display(&self.vars));
        }
        let pts: Vec<String> = self.point.iter().map(|v| format!("{v:?}")).collect();
        let _ = writeln!(s, "point {}", pts.join(" "));
        s
    }

    pub fn constraint_texts(&self) -> Vec<String> {
        self.constraints
            .iter()
            .map(|c| c.display(&self.vars).to_string())
            .collect()
    }

    pub fn to_problem(&self) -> Result<Problem, ParseError> {
        Ok(Problem::new(
            self.vars.clone(),
            self.objective.clone(),
            self.constraints.clone(),
            self.point.clone(),
        )?)
    }
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    chars
        .next()
        .is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWIN: &str = "# twin constraints\nvars x1 x2\nminimize x1^2 + x2^2\nst x1 - x2 <= 0\nst x2 <= x1   # reversed\npoint 0 0\n";

    #[test]
    fn parses_and_normalizes() {
        let f = ProblemFile::parse(TWIN).unwrap();
        assert_eq!(f.vars, vec!["x1", "x2"]);
        assert_eq!(f.constraints.len(), 2);
        assert_eq!(f.constraints[1].eval(&[1.0, 3.0]).unwrap(), 2.0);
        assert_eq!(f.point, vec![0.0, 0.0]);
        assert_eq!(f.to_problem().unwrap().m(), 2);
    }

    #[test]
    fn round_trip_is_identity() {
        let f = ProblemFile::parse(TWIN).unwrap();
        let g = ProblemFile::parse(&f.to_text()).unwrap();
        assert_eq!(f, g);
        assert_eq!(f.to_text(), g.to_text());
    }

    #[test]
    fn reports_errors_with_lines() {
        let e = ProblemFile::parse("vars x\nminimize x\nst x < 0\npoint 0\n").unwrap_err();
        assert!(matches!(e, ParseError::Syntax { line: 3, .. }), "{e}");
        let e = ProblemFile::parse("vars x\nminimize y\npoint 0\n").unwrap_err();
        assert!(matches!(e, ParseError::Expr { line: 2, .. }), "{e}");
        let e = ProblemFile::parse("vars x\nminimize x\n").unwrap_err();
        assert_eq!(e, ParseError::Missing("point"));
        let e = ProblemFile::parse("vars x y\nminimize x\npoint 0\n").unwrap_err();
        assert!(matches!(e, ParseError::Syntax { .. }));
        let e = ProblemFile::parse("vars x x\nminimize x\npoint 0 0\n").unwrap_err();
        assert!(matches!(e, ParseError::Syntax { line: 1, .. }));
    }
}
