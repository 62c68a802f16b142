//! Scalar expressions over type variables `x1..xm` and good variables `y1..yn`.
//!
//! Expressions are parsed once and then treated as immutable values. Symbolic
//! differentiation produces new expressions in the same grammar, followed by
//! constant folding so that repeated derivatives (up to fourth order) stay
//! small.

mod diff;
mod parse;

use std::fmt;

use thiserror::Error;

pub use parse::{parse, ParseError};

/// A variable reference. Indices are zero-based; `X(0)` prints as `x1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    X(usize),
    Y(usize),
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::X(i) => write!(f, "x{}", i + 1),
            Var::Y(i) => write!(f, "y{}", i + 1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Exp,
    Log,
    Sqrt,
    Sin,
    Cos,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Sin => "sin",
            Func::Cos => "cos",
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            _ => return None,
        })
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            Func::Exp => v.exp(),
            Func::Log => v.ln(),
            Func::Sqrt => v.sqrt(),
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(Var),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    /// Power with a constant exponent.
    Pow(Box<Expr>, f64),
    Call(Func, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("variable {0} has no binding")]
    Unbound(Var),
    #[error("expression is not finite at this point (value {0})")]
    Domain(f64),
}

impl Expr {
    pub fn constant(v: f64) -> Self {
        Expr::Const(v)
    }

    pub fn var(v: Var) -> Self {
        Expr::Var(v)
    }

    /// Evaluates with the given type and good coordinates.
    pub fn eval(&self, x: Option<&[f64]>, y: Option<&[f64]>) -> Result<f64, EvalError> {
        let v = self.eval_raw(x, y)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::Domain(v))
        }
    }

    fn eval_raw(&self, x: Option<&[f64]>, y: Option<&[f64]>) -> Result<f64, EvalError> {
        Ok(match self {
            Expr::Const(c) => *c,
            Expr::Var(v) => {
                let slot = match v {
                    Var::X(i) => x.and_then(|p| p.get(*i)),
                    Var::Y(i) => y.and_then(|p| p.get(*i)),
                };
                *slot.ok_or(EvalError::Unbound(*v))?
            }
            Expr::Neg(a) => -a.eval_raw(x, y)?,
            Expr::Add(a, b) => a.eval_raw(x, y)? + b.eval_raw(x, y)?,
            Expr::Sub(a, b) => a.eval_raw(x, y)? - b.eval_raw(x, y)?,
            Expr::Mul(a, b) => a.eval_raw(x, y)? * b.eval_raw(x, y)?,
            Expr::Div(a, b) => a.eval_raw(x, y)? / b.eval_raw(x, y)?,
            Expr::Pow(a, p) => pow(a.eval_raw(x, y)?, *p),
            Expr::Call(f, a) => f.apply(a.eval_raw(x, y)?),
        })
    }

    pub fn is_const(&self) -> bool {
        matches!(self, Expr::Const(_))
    }

    pub fn as_const(&self) -> Option<f64> {
        match self {
            Expr::Const(c) => Some(*c),
            _ => None,
        }
    }

    /// Calls `f` on every variable occurring in the expression.
    pub fn visit_vars(&self, f: &mut impl FnMut(Var)) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(v) => f(*v),
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => a.visit_vars(f),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.visit_vars(f);
                b.visit_vars(f);
            }
        }
    }

    /// True when no type variable occurs.
    pub fn depends_only_on_goods(&self) -> bool {
        let mut ok = true;
        self.visit_vars(&mut |v| ok &= matches!(v, Var::Y(_)));
        ok
    }

    /// True when no good variable occurs.
    pub fn depends_only_on_types(&self) -> bool {
        let mut ok = true;
        self.visit_vars(&mut |v| ok &= matches!(v, Var::X(_)));
        ok
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(_) => 3,
            Expr::Pow(..) => 4,
            Expr::Const(_) | Expr::Var(_) | Expr::Call(..) => 5,
        }
    }
}

fn pow(base: f64, exp: f64) -> f64 {
    if exp.fract() == 0.0 && exp.abs() <= i32::MAX as f64 {
        base.powi(exp as i32)
    } else {
        base.powf(exp)
    }
}

fn write_number(f: &mut fmt::Formatter<'_>, v: f64) -> fmt::Result {
    if v < 0.0 || (v == 0.0 && v.is_sign_negative()) {
        write!(f, "(-{})", -v)
    } else {
        write!(f, "{v}")
    }
}

fn write_child(f: &mut fmt::Formatter<'_>, child: &Expr, parens: bool) -> fmt::Result {
    if parens {
        write!(f, "({child})")
    } else {
        write!(f, "{child}")
    }
}

// Printing keeps enough parentheses that re-parsing yields the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write_number(f, *c),
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Neg(a) => {
                write!(f, "-")?;
                write_child(f, a, a.precedence() < 3)
            }
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                let (op, prec) = match self {
                    Expr::Add(..) => ("+", 1),
                    Expr::Sub(..) => ("-", 1),
                    Expr::Mul(..) => ("*", 2),
                    _ => ("/", 2),
                };
                write_child(f, a, a.precedence() < prec)?;
                write!(f, " {op} ")?;
                write_child(f, b, b.precedence() <= prec)
            }
            Expr::Pow(a, p) => {
                write_child(f, a, a.precedence() <= 4)?;
                write!(f, "^")?;
                write_number(f, *p)
            }
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}
