use thiserror::Error;

use super::{Expr, Func, Var};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { offset: usize, name: String },
    #[error("{name} out of range at byte {offset} (declared dimension {dim})")]
    OutOfRange { offset: usize, name: String, dim: usize },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. }
            | ParseError::UnknownIdentifier { offset, .. }
            | ParseError::OutOfRange { offset, .. } => *offset,
        }
    }
}

/// Parses `text` with type dimension `m` and good dimension `n`.
pub fn parse(text: &str, m: usize, n: usize) -> Result<Expr, ParseError> {
    let mut p = Parser { src: text.as_bytes(), pos: 0, m, n };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.syntax("unexpected trailing input"));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    m: usize,
    n: usize,
}

impl Parser<'_> {
    fn syntax(&self, message: &str) -> ParseError {
        ParseError::Syntax { offset: self.pos, message: message.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat(b'-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat(b'*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat(b'/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat(b'-') {
            return Ok(match self.unary()? {
                Expr::Const(c) => Expr::Const(-c),
                e => Expr::Neg(Box::new(e)),
            });
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if !self.eat(b'^') {
            return Ok(base);
        }
        let at = self.pos;
        let exponent = self.unary()?;
        let value = match exponent.eval(None, None) {
            Ok(v) => v,
            Err(_) => {
                return Err(ParseError::Syntax {
                    offset: at,
                    message: "exponent must be a finite constant".into(),
                })
            }
        };
        Ok(Expr::Pow(Box::new(base), value))
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            None => Err(self.syntax("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.syntax("expected `)`"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.identifier(),
            Some(_) => Err(self.syntax("unexpected character")),
        }
    }

    fn number(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        let src = self.src;
        let digits = |p: &mut usize| {
            while *p < src.len() && src[*p].is_ascii_digit() {
                *p += 1;
            }
        };
        digits(&mut self.pos);
        if self.pos < src.len() && src[self.pos] == b'.' {
            self.pos += 1;
            digits(&mut self.pos);
        }
        if self.pos < src.len() && (src[self.pos] == b'e' || src[self.pos] == b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < src.len() && (src[self.pos] == b'+' || src[self.pos] == b'-') {
                self.pos += 1;
            }
            let exp_start = self.pos;
            digits(&mut self.pos);
            if self.pos == exp_start {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&src[start..self.pos]).expect("ascii");
        text.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .map(Expr::Const)
            .ok_or(ParseError::Syntax { offset: start, message: format!("invalid number `{text}`") })
    }

    fn identifier(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        if let Some(func) = Func::from_name(name) {
            if !self.eat(b'(') {
                return Err(self.syntax("expected `(` after function name"));
            }
            let arg = self.expr()?;
            if !self.eat(b')') {
                return Err(self.syntax("expected `)`"));
            }
            return Ok(Expr::Call(func, Box::new(arg)));
        }
        let (kind, rest) = name.split_at(1);
        let index = (!rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()))
            .then(|| rest.parse::<usize>().ok())
            .flatten();
        let (Some(index), "x" | "y") = (index, kind) else {
            return Err(ParseError::UnknownIdentifier { offset: start, name: name.to_string() });
        };
        let dim = if kind == "x" { self.m } else { self.n };
        if index == 0 || index > dim {
            return Err(ParseError::OutOfRange { offset: start, name: name.to_string(), dim });
        }
        Ok(Expr::Var(if kind == "x" { Var::X(index - 1) } else { Var::Y(index - 1) }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_bilinear_preference() {
        let e = parse("x1*y1 + y1", 1, 1).unwrap();
        let expected = Expr::Add(
            Box::new(Expr::Mul(Box::new(Expr::Var(Var::X(0))), Box::new(Expr::Var(Var::Y(0))))),
            Box::new(Expr::Var(Var::Y(0))),
        );
        assert_eq!(e, expected);
    }

    #[test]
    fn constant_zero_any_dims() {
        assert_eq!(parse("0", 3, 2).unwrap(), Expr::Const(0.0));
        assert_eq!(parse(" 0 ", 0, 0).unwrap(), Expr::Const(0.0));
    }

    #[test]
    fn arity_is_checked() {
        assert!(parse("x1*(y1+y2)", 1, 2).is_ok());
        let err = parse("x2*y1", 1, 1).unwrap_err();
        assert_eq!(err, ParseError::OutOfRange { offset: 0, name: "x2".into(), dim: 1 });
        assert!(err.to_string().contains("x2 out of range"));
        assert!(matches!(parse("y1 + x0", 1, 1), Err(ParseError::OutOfRange { offset: 5, .. })));
    }

    #[test]
    fn reports_offsets() {
        assert_eq!(parse("x1 + * y1", 1, 1).unwrap_err().offset(), 5);
        assert!(matches!(
            parse("z1 + 1", 1, 1),
            Err(ParseError::UnknownIdentifier { offset: 0, .. })
        ));
        assert!(matches!(parse("abs(x1)", 1, 1), Err(ParseError::UnknownIdentifier { .. })));
        assert!(matches!(parse("(x1", 1, 1), Err(ParseError::Syntax { offset: 3, .. })));
        assert!(matches!(parse("x1^y1", 1, 1), Err(ParseError::Syntax { offset: 3, .. })));
        assert!(matches!(parse("x1 y1", 1, 1), Err(ParseError::Syntax { offset: 3, .. })));
    }

    #[test]
    fn precedence_and_associativity() {
        let e = parse("-x1^2", 1, 0).unwrap();
        assert_eq!(e.eval(Some(&[3.0]), None).unwrap(), -9.0);
        let e = parse("x1^-2", 1, 0).unwrap();
        assert_eq!(e.eval(Some(&[2.0]), None).unwrap(), 0.25);
        let e = parse("2^3^2", 0, 0).unwrap();
        assert_eq!(e.eval(None, None).unwrap(), 512.0);
        let e = parse("8 - 3 - 2", 0, 0).unwrap();
        assert_eq!(e.eval(None, None).unwrap(), 3.0);
        let e = parse("8 / 4 / 2", 0, 0).unwrap();
        assert_eq!(e.eval(None, None).unwrap(), 1.0);
        let e = parse("1.5e1 + .5", 0, 0).unwrap();
        assert_eq!(e.eval(None, None).unwrap(), 15.5);
    }
}
