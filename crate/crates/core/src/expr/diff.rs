use super::{pow, Expr, Func, Var};

impl Expr {
    /// Exact partial derivative with respect to `var`, constant-folded.
    pub fn differentiate(&self, var: Var) -> Expr {
        match self {
            Expr::Const(_) => Expr::Const(0.0),
            Expr::Var(v) => Expr::Const(if *v == var { 1.0 } else { 0.0 }),
            Expr::Neg(a) => neg(a.differentiate(var)),
            Expr::Add(a, b) => add(a.differentiate(var), b.differentiate(var)),
            Expr::Sub(a, b) => sub(a.differentiate(var), b.differentiate(var)),
            Expr::Mul(a, b) => add(
                mul(a.differentiate(var), (**b).clone()),
                mul((**a).clone(), b.differentiate(var)),
            ),
            Expr::Div(a, b) => {
                let da = a.differentiate(var);
                let db = b.differentiate(var);
                sub(
                    div(da, (**b).clone()),
                    div(mul((**a).clone(), db), power((**b).clone(), 2.0)),
                )
            }
            Expr::Pow(a, p) => mul(
                mul(Expr::Const(*p), power((**a).clone(), p - 1.0)),
                a.differentiate(var),
            ),
            Expr::Call(f, a) => {
                let da = a.differentiate(var);
                let inner = (**a).clone();
                let outer = match f {
                    Func::Exp => call(Func::Exp, inner),
                    Func::Log => return div(da, inner),
                    Func::Sqrt => {
                        return div(da, mul(Expr::Const(2.0), call(Func::Sqrt, inner)))
                    }
                    Func::Sin => call(Func::Cos, inner),
                    Func::Cos => neg(call(Func::Sin, inner)),
                };
                mul(outer, da)
            }
        }
    }

    /// Mixed partial derivative along the given sequence of variables.
    pub fn partial(&self, vars: &[Var]) -> Expr {
        vars.iter().fold(self.clone(), |e, v| e.differentiate(*v))
    }

    /// Rebuilds the tree applying constant folding and identity rules.
    pub fn simplify(&self) -> Expr {
        match self {
            Expr::Const(_) | Expr::Var(_) => self.clone(),
            Expr::Neg(a) => neg(a.simplify()),
            Expr::Add(a, b) => add(a.simplify(), b.simplify()),
            Expr::Sub(a, b) => sub(a.simplify(), b.simplify()),
            Expr::Mul(a, b) => mul(a.simplify(), b.simplify()),
            Expr::Div(a, b) => div(a.simplify(), b.simplify()),
            Expr::Pow(a, p) => power(a.simplify(), *p),
            Expr::Call(f, a) => call(*f, a.simplify()),
        }
    }
}

fn finite(v: f64) -> Option<Expr> {
    v.is_finite().then_some(Expr::Const(v))
}

fn neg(a: Expr) -> Expr {
    match a {
        Expr::Const(c) => Expr::Const(-c),
        Expr::Neg(inner) => *inner,
        a => Expr::Neg(Box::new(a)),
    }
}

fn add(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => Expr::Const(x + y),
        (Some(x), _) if x == 0.0 => b,
        (_, Some(y)) if y == 0.0 => a,
        _ => Expr::Add(Box::new(a), Box::new(b)),
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => Expr::Const(x - y),
        (_, Some(y)) if y == 0.0 => a,
        (Some(x), _) if x == 0.0 => neg(b),
        _ => Expr::Sub(Box::new(a), Box::new(b)),
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => Expr::Const(x * y),
        (Some(x), _) | (_, Some(x)) if x == 0.0 => Expr::Const(0.0),
        (Some(x), _) if x == 1.0 => b,
        (_, Some(y)) if y == 1.0 => a,
        (Some(x), _) if x == -1.0 => neg(b),
        (_, Some(y)) if y == -1.0 => neg(a),
        _ => Expr::Mul(Box::new(a), Box::new(b)),
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) if y != 0.0 => finite(x / y).unwrap_or_else(|| Expr::Div(Box::new(a), Box::new(b))),
        (Some(x), _) if x == 0.0 => Expr::Const(0.0),
        (_, Some(y)) if y == 1.0 => a,
        _ => Expr::Div(Box::new(a), Box::new(b)),
    }
}

fn power(a: Expr, p: f64) -> Expr {
    if p == 0.0 {
        return Expr::Const(1.0);
    }
    if p == 1.0 {
        return a;
    }
    if let Some(folded) = a.as_const().and_then(|c| finite(pow(c, p))) {
        return folded;
    }
    match a {
        Expr::Pow(inner, q) if (p * q).fract() == 0.0 && q.fract() == 0.0 && p.fract() == 0.0 => {
            power(*inner, p * q)
        }
        a => Expr::Pow(Box::new(a), p),
    }
}

fn call(f: Func, a: Expr) -> Expr {
    if let Some(folded) = a.as_const().and_then(|c| finite(f.apply(c))) {
        return folded;
    }
    Expr::Call(f, Box::new(a))
}

#[cfg(test)]
mod tests {
    use super::super::parse;
    use super::*;

    const X1: Var = Var::X(0);
    const Y1: Var = Var::Y(0);

    #[test]
    fn polynomial_rules() {
        let b = parse("x1*y1 + y1", 1, 1).unwrap();
        assert_eq!(b.differentiate(X1), Expr::Var(Y1));
        assert_eq!(b.partial(&[X1, Y1]), Expr::Const(1.0));
        let c = parse("y1^2", 1, 1).unwrap();
        let dc = c.differentiate(Y1);
        assert_eq!(dc, parse("2*y1", 1, 1).unwrap());
        assert_eq!(dc.to_string(), "2 * y1");
    }

    #[test]
    fn fourth_derivatives_of_polynomials_vanish_symbolically() {
        let b = parse("x1*y1 + 0.1*x1^2*y1^2", 1, 1).unwrap();
        assert_eq!(b.partial(&[X1, X1, Y1, Y1]), Expr::Const(0.4));
        assert_eq!(b.partial(&[X1, X1, X1, Y1]), Expr::Const(0.0));
    }

    #[test]
    fn transcendental_rules() {
        let e = parse("exp(x1*y1)", 1, 1).unwrap();
        let d = e.differentiate(X1);
        let v = d.eval(Some(&[0.3]), Some(&[2.0])).unwrap();
        assert!((v - 2.0 * (0.6f64).exp()).abs() < 1e-14);

        let e = parse("sqrt(x1*y1)", 1, 1).unwrap();
        let d = e.differentiate(X1);
        assert!(d.eval(Some(&[0.0]), Some(&[1.0])).is_err());

        let e = parse("log(x1) + sin(y1) - cos(x1*y1)", 1, 1).unwrap();
        let d = e.differentiate(Y1);
        let (x, y) = (0.7f64, 0.2f64);
        let expected = y.cos() + x * (x * y).sin();
        assert!((d.eval(Some(&[x]), Some(&[y])).unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn quotient_rule() {
        let e = parse("x1 / (1 + y1^2)", 1, 1).unwrap();
        let d = e.differentiate(Y1);
        let (x, y) = (1.5f64, 0.5f64);
        let expected = -x * 2.0 * y / (1.0 + y * y).powi(2);
        assert!((d.eval(Some(&[x]), Some(&[y])).unwrap() - expected).abs() < 1e-14);
    }
}
