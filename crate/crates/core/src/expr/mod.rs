//! Scalar expressions over a fixed list of real variables.
//!
//! Expressions are polynomial-rational trees built from `+ - * /`, unary
//! minus and nonnegative integer powers, so every expression is twice
//! continuously differentiable wherever its denominators do not vanish.
//! Gradients and Hessians are produced symbolically (see [`grad`] and
//! [`hessian`]) and evaluated with [`Expr::eval`].

mod diff;
mod parse;

use std::fmt;

pub use diff::{derivative, grad, hessian};
pub use parse::parse_expr;

use thiserror::Error;

/// Denominators with magnitude below this are rejected during evaluation.
pub const DIV_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("syntax error at byte {offset}: expected {expected}")]
    SyntaxError { offset: usize, expected: String },
    #[error("exponent at byte {offset} is not a nonnegative integer")]
    NonIntegerExponent { offset: usize },
    #[error("division by a value within {DIV_GUARD:e} of zero ({denominator:e})")]
    DivisionNearZero { denominator: f64 },
    #[error("point has dimension {got}, expression needs at least {needed}")]
    DimensionTooSmall { got: usize, needed: usize },
}

/// Expression tree. Variables are 0-based indices into the point vector.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Constant(f64),
    Variable(usize),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, u32),
    Neg(Box<Expr>),
}

impl Expr {
    pub fn constant(c: f64) -> Self {
        Expr::Constant(c)
    }

    pub fn var(i: usize) -> Self {
        Expr::Variable(i)
    }

    // The smart constructors below fold literal subtrees and nothing else.

    pub fn add(l: Expr, r: Expr) -> Self {
        match (&l, &r) {
            (Expr::Constant(a), Expr::Constant(b)) => Expr::Constant(a + b),
            _ => Expr::Add(Box::new(l), Box::new(r)),
        }
    }

    pub fn sub(l: Expr, r: Expr) -> Self {
        match (&l, &r) {
            (Expr::Constant(a), Expr::Constant(b)) => Expr::Constant(a - b),
            _ => Expr::Sub(Box::new(l), Box::new(r)),
        }
    }

    pub fn mul(l: Expr, r: Expr) -> Self {
        match (&l, &r) {
            (Expr::Constant(a), Expr::Constant(b)) => Expr::Constant(a * b),
            _ => Expr::Mul(Box::new(l), Box::new(r)),
        }
    }

    pub fn div(l: Expr, r: Expr) -> Self {
        match (&l, &r) {
            (Expr::Constant(a), Expr::Constant(b)) if b.abs() >= DIV_GUARD => {
                Expr::Constant(a / b)
            }
            _ => Expr::Div(Box::new(l), Box::new(r)),
        }
    }

    pub fn pow(base: Expr, exp: u32) -> Self {
        match &base {
            Expr::Constant(a) => Expr::Constant(a.powi(exp as i32)),
            _ => Expr::Pow(Box::new(base), exp),
        }
    }

    pub fn neg(e: Expr) -> Self {
        match &e {
            Expr::Constant(a) => Expr::Constant(-a),
            _ => Expr::Neg(Box::new(e)),
        }
    }

    /// One more than the largest variable index referenced, or 0.
    pub fn arity(&self) -> usize {
        match self {
            Expr::Constant(_) => 0,
            Expr::Variable(i) => i + 1,
            Expr::Add(l, r) | Expr::Sub(l, r) | Expr::Mul(l, r) | Expr::Div(l, r) => {
                l.arity().max(r.arity())
            }
            Expr::Pow(b, _) => b.arity(),
            Expr::Neg(c) => c.arity(),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Constant(c) if *c == 0.0)
    }

    /// Evaluates at `x`. Fails if `x` is too short or a denominator is
    /// within [`DIV_GUARD`] of zero.
    pub fn eval(&self, x: &[f64]) -> Result<f64, ExprError> {
        let needed = self.arity();
        if x.len() < needed {
            return Err(ExprError::DimensionTooSmall {
                got: x.len(),
                needed,
            });
        }
        self.eval_unchecked(x)
    }

    fn eval_unchecked(&self, x: &[f64]) -> Result<f64, ExprError> {
        Ok(match self {
            Expr::Constant(c) => *c,
            Expr::Variable(i) => x[*i],
            Expr::Add(l, r) => l.eval_unchecked(x)? + r.eval_unchecked(x)?,
            Expr::Sub(l, r) => l.eval_unchecked(x)? - r.eval_unchecked(x)?,
            Expr::Mul(l, r) => l.eval_unchecked(x)? * r.eval_unchecked(x)?,
            Expr::Div(l, r) => {
                let num = l.eval_unchecked(x)?;
                let den = r.eval_unchecked(x)?;
                if den.abs() < DIV_GUARD {
                    return Err(ExprError::DivisionNearZero { denominator: den });
                }
                num / den
            }
            Expr::Pow(b, k) => b.eval_unchecked(x)?.powi(*k as i32),
            Expr::Neg(c) => -c.eval_unchecked(x)?,
        })
    }

    /// Renders the expression with the given variable names in a form that
    /// [`parse_expr`] maps back to an identical tree.
    pub fn display<'a>(&'a self, names: &'a [String]) -> ExprDisplay<'a> {
        ExprDisplay { expr: self, names }
    }
}

pub struct ExprDisplay<'a> {
    expr: &'a Expr,
    names: &'a [String],
}

impl fmt::Display for ExprDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(self.expr, self.names, f)
    }
}

fn write_expr(e: &Expr, names: &[String], f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let bin = |f: &mut fmt::Formatter<'_>, l: &Expr, op: &str, r: &Expr| {
        write!(f, "(")?;
        write_expr(l, names, f)?;
        write!(f, " {op} ")?;
        write_expr(r, names, f)?;
        write!(f, ")")
    };
    match e {
        Expr::Constant(c) => {
            if *c < 0.0 {
                write!(f, "({c:?})")
            } else {
                write!(f, "{c:?}")
            }
        }
        Expr::Variable(i) => match names.get(*i) {
            Some(name) => write!(f, "{name}"),
            None => write!(f, "x{}", i + 1),
        },
        Expr::Add(l, r) => bin(f, l, "+", r),
        Expr::Sub(l, r) => bin(f, l, "-", r),
        Expr::Mul(l, r) => bin(f, l, "*", r),
        Expr::Div(l, r) => bin(f, l, "/", r),
        Expr::Pow(b, k) => {
            write!(f, "(")?;
            write_expr(b, names, f)?;
            write!(f, ")^{k}")
        }
        Expr::Neg(c) => {
            write!(f, "(-")?;
            write_expr(c, names, f)?;
            write!(f, ")")
        }
    }
}

/// Evaluates every entry of a gradient vector.
pub fn eval_vec(exprs: &[Expr], x: &[f64]) -> Result<Vec<f64>, ExprError> {
    exprs.iter().map(|e| e.eval(x)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn eval_examples() {
        let vars = names(&["x1", "x2"]);
        let e = parse_expr("x1^2 + x2^2", &vars).unwrap();
        assert_eq!(e.eval(&[1.0, 2.0]).unwrap(), 5.0);
        let e = parse_expr("x1*x2^2", &vars).unwrap();
        assert_eq!(e.eval(&[0.0, 0.5]).unwrap(), 0.0);
        let e = parse_expr("x2^2+x1*x2-x1", &vars).unwrap();
        assert_eq!(e.eval(&[0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn division_guard() {
        let vars = names(&["x"]);
        let e = parse_expr("1/x", &vars).unwrap();
        assert_eq!(e.eval(&[4.0]).unwrap(), 0.25);
        assert!(matches!(
            e.eval(&[1e-13]),
            Err(ExprError::DivisionNearZero { .. })
        ));
    }

    #[test]
    fn short_point_is_rejected() {
        let e = Expr::var(2);
        assert!(matches!(
            e.eval(&[1.0]),
            Err(ExprError::DimensionTooSmall { got: 1, needed: 3 })
        ));
    }

    #[test]
    fn constant_folding_only_touches_literals() {
        assert_eq!(
            Expr::add(Expr::constant(1.0), Expr::constant(2.0)),
            Expr::constant(3.0)
        );
        // 0 * x is not a literal subtree and stays as written.
        let e = Expr::mul(Expr::constant(0.0), Expr::var(0));
        assert!(matches!(e, Expr::Mul(_, _)));
    }

    #[test]
    fn display_reparses_to_same_tree() {
        let vars = names(&["a", "b"]);
        for src in [
            "a^2 + b^2",
            "-a^2 - 3*b/(a+2)",
            "(a - b)^3 * -2.5e-3",
            "a - (b - a)",
            "-(a*b)",
        ] {
            let e = parse_expr(src, &vars).unwrap();
            let text = e.display(&vars).to_string();
            assert_eq!(parse_expr(&text, &vars).unwrap(), e, "{src} -> {text}");
        }
    }
}
