//! Smooth preference functions `b(x, y)` and their first and mixed second
//! derivatives.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::expr::{parse, EvalError, Expr, ParseError, Var};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PrefError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("no section point maps to effective coordinate {0:?}")]
    Section(Vec<f64>),
    #[error("payoff is tabulated; derivatives are unavailable")]
    Tabulated,
}

pub trait Preference: fmt::Debug + Send + Sync {
    fn type_dim(&self) -> usize;
    fn good_dim(&self) -> usize;
    fn value(&self, x: &[f64], y: &[f64]) -> Result<f64, PrefError>;
    /// `D_x b`, length `m`.
    fn grad_x(&self, x: &[f64], y: &[f64]) -> Result<DVector<f64>, PrefError>;
    /// `D_y b`, length `n`.
    fn grad_y(&self, x: &[f64], y: &[f64]) -> Result<DVector<f64>, PrefError>;
    /// `D^2_xy b` as an `m x n` matrix, entry `(a, j) = d^2 b / dx_a dy_j`.
    fn cross(&self, x: &[f64], y: &[f64]) -> Result<DMatrix<f64>, PrefError>;
    /// The defining expression, when there is one.
    fn expression(&self) -> Option<&Expr> {
        None
    }
}

/// A preference given by an expression, with derivatives precomputed
/// symbolically.
#[derive(Debug, Clone)]
pub struct SymbolicPreference {
    expr: Expr,
    m: usize,
    n: usize,
    gx: Vec<Expr>,
    gy: Vec<Expr>,
    cross: Vec<Expr>,
}

impl SymbolicPreference {
    pub fn new(expr: Expr, m: usize, n: usize) -> Self {
        let gx: Vec<Expr> = (0..m).map(|a| expr.differentiate(Var::X(a))).collect();
        let gy = (0..n).map(|j| expr.differentiate(Var::Y(j))).collect();
        let cross = gx
            .iter()
            .flat_map(|g| (0..n).map(move |j| g.differentiate(Var::Y(j))))
            .collect();
        SymbolicPreference { expr, m, n, gx, gy, cross }
    }

    pub fn parse(text: &str, m: usize, n: usize) -> Result<Self, ParseError> {
        Ok(Self::new(parse(text, m, n)?, m, n))
    }
}

fn eval_all(es: &[Expr], x: &[f64], y: &[f64]) -> Result<Vec<f64>, PrefError> {
    es.iter().map(|e| e.eval(Some(x), Some(y)).map_err(PrefError::from)).collect()
}

impl Preference for SymbolicPreference {
    fn type_dim(&self) -> usize {
        self.m
    }

    fn good_dim(&self) -> usize {
        self.n
    }

    fn value(&self, x: &[f64], y: &[f64]) -> Result<f64, PrefError> {
        Ok(self.expr.eval(Some(x), Some(y))?)
    }

    fn grad_x(&self, x: &[f64], y: &[f64]) -> Result<DVector<f64>, PrefError> {
        Ok(DVector::from_vec(eval_all(&self.gx, x, y)?))
    }

    fn grad_y(&self, x: &[f64], y: &[f64]) -> Result<DVector<f64>, PrefError> {
        Ok(DVector::from_vec(eval_all(&self.gy, x, y)?))
    }

    fn cross(&self, x: &[f64], y: &[f64]) -> Result<DMatrix<f64>, PrefError> {
        Ok(DMatrix::from_row_slice(self.m, self.n, &eval_all(&self.cross, x, y)?))
    }

    fn expression(&self) -> Option<&Expr> {
        Some(&self.expr)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivatives_of_a_coupled_preference() {
        let p = SymbolicPreference::parse("x1*y1 + x2*y1^2", 2, 1).unwrap();
        let (x, y) = ([0.5, 2.0], [3.0]);
        assert_eq!(p.value(&x, &y).unwrap(), 1.5 + 18.0);
        assert_eq!(p.grad_x(&x, &y).unwrap().as_slice(), &[3.0, 9.0]);
        assert_eq!(p.grad_y(&x, &y).unwrap().as_slice(), &[0.5 + 12.0]);
        let c = p.cross(&x, &y).unwrap();
        assert_eq!((c.nrows(), c.ncols()), (2, 1));
        assert_eq!(c[(0, 0)], 1.0);
        assert_eq!(c[(1, 0)], 6.0);
    }
}
