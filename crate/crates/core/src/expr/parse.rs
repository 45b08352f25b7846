use super::{Expr, ExprError};

/// Parses `text` against the declared variable names.
///
/// ```text
/// expr   := term (('+' | '-') term)*
/// term   := factor (('*' | '/') factor)*
/// factor := atom ('^' uint)?
/// atom   := number | ident | '(' expr ')' | '-' factor
/// ```
///
/// Unary minus applies to a whole factor, so `-x^2` is `-(x^2)`.
pub fn parse_expr(text: &str, vars: &[String]) -> Result<Expr, ExprError> {
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
        vars,
    };
    p.skip_ws();
    if p.peek().is_none() {
        return Err(p.expected("expression"));
    }
    let e = p.expr()?;
    p.skip_ws();
    if p.peek().is_some() {
        return Err(p.expected("operator or end of input"));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    vars: &'a [String],
}

impl Parser<'_> {
    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_ascii_whitespace()) {
            self.pos += 1;
        }
    }

    fn expected(&self, what: &str) -> ExprError {
        ExprError::SyntaxError {
            offset: self.pos,
            expected: what.to_string(),
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            self.skip_ws();
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = Expr::add(lhs, rhs);
                }
                Some(b'-') => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = Expr::sub(lhs, rhs);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.factor()?;
        loop {
            self.skip_ws();
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    let rhs = self.factor()?;
                    lhs = Expr::mul(lhs, rhs);
                }
                Some(b'/') => {
                    self.pos += 1;
                    let rhs = self.factor()?;
                    lhs = Expr::div(lhs, rhs);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr, ExprError> {
        let base = self.atom()?;
        self.skip_ws();
        if self.peek() != Some(b'^') {
            return Ok(base);
        }
        self.pos += 1;
        self.skip_ws();
        let start = self.pos;
        match self.peek() {
            Some(c) if c.is_ascii_digit() || c == b'.' => {
                let (lexeme, integral) = self.number_lexeme();
                if !integral {
                    return Err(ExprError::NonIntegerExponent { offset: start });
                }
                let k: u32 = lexeme
                    .parse()
                    .map_err(|_| ExprError::NonIntegerExponent { offset: start })?;
                Ok(Expr::pow(base, k))
            }
            Some(b'-') => Err(ExprError::NonIntegerExponent { offset: start }),
            _ => Err(self.expected("nonnegative integer exponent")),
        }
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        self.skip_ws();
        let start = self.pos;
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                let inner = self.factor()?;
                Ok(Expr::neg(inner))
            }
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                self.skip_ws();
                if self.peek() != Some(b')') {
                    return Err(self.expected("`)`"));
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => {
                let (lexeme, _) = self.number_lexeme();
                lexeme.parse::<f64>().map(Expr::constant).map_err(|_| {
                    ExprError::SyntaxError {
                        offset: start,
                        expected: "number".to_string(),
                    }
                })
            }
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == b'_') {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or_default();
                match self.vars.iter().position(|v| v == name) {
                    Some(i) => Ok(Expr::var(i)),
                    None => Err(ExprError::UnknownIdentifier {
                        name: name.to_string(),
                        offset: start,
                    }),
                }
            }
            _ => Err(self.expected("number, identifier, `(` or `-`")),
        }
    }

    /// Consumes `digits [. digits] [e [+-] digits]`; reports whether the
    /// lexeme was a plain digit string.
    fn number_lexeme(&mut self) -> (&str, bool) {
        let start = self.pos;
        let mut integral = true;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.peek() == Some(b'.') {
            integral = false;
            self.pos += 1;
            while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                self.pos += 1;
            }
        }
        if matches!(self.peek(), Some(b'e') | Some(b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.peek(), Some(b'+') | Some(b'-')) {
                self.pos += 1;
            }
            if matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                integral = false;
                while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                    self.pos += 1;
                }
            } else {
                self.pos = save;
            }
        }
        let lexeme = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or_default();
        (lexeme, integral)
    }
}
