use std::collections::HashSet;

use super::{Check, Witness};
use crate::domain::{DiscreteProblem, ScreeningProblem};
use crate::expr::{Expr, Var};
use crate::par;

/// Every partial derivative of order up to four, labelled, skipping
/// duplicates and finite constants.
fn derivative_table(b: &Expr, m: usize, n: usize) -> (Vec<(String, Expr)>, Option<(String, f64)>) {
    let vars: Vec<Var> = (0..m).map(Var::X).chain((0..n).map(Var::Y)).collect();
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    let mut bad_const = None;
    // Multisets are enumerated with non-decreasing variable positions.
    let mut frontier: Vec<(Vec<usize>, Expr)> = vec![(Vec::new(), b.clone())];
    for order in 0..=4 {
        let mut next = Vec::new();
        for (idx, e) in &frontier {
            let label = if idx.is_empty() {
                "b".to_string()
            } else {
                let names: Vec<String> = idx.iter().map(|&k| vars[k].to_string()).collect();
                format!("d^{}b/d{}", idx.len(), names.join(" d"))
            };
            match e.as_const() {
                Some(c) if !c.is_finite() => bad_const = bad_const.or(Some((label, c))),
                Some(_) => {}
                None => {
                    if seen.insert(e.to_string()) {
                        out.push((label, e.clone()));
                    }
                }
            }
            if order < 4 {
                let start = idx.last().copied().unwrap_or(0);
                for k in start..vars.len() {
                    let mut i2 = idx.clone();
                    i2.push(k);
                    next.push((i2, e.differentiate(vars[k])));
                }
            }
        }
        frontier = next;
    }
    (out, bad_const)
}

/// (B0): all partial derivatives of `b` through order four are finite at
/// every grid pair.
pub fn check_b0(problem: &ScreeningProblem, d: &DiscreteProblem) -> Check {
    let Some(b) = problem.payoff.preference().and_then(|p| p.expression()) else {
        return Check::not_applicable("no symbolic preference to differentiate");
    };
    let (table, bad_const) = derivative_table(b, problem.m, problem.n);
    if let Some((label, c)) = bad_const {
        let w = Witness::Derivative { x: vec![], y: vec![], partial: label, detail: format!("constant {c}") };
        return Check::from_witnesses(vec![w]);
    }
    let ny = d.n_goods();
    let per_type = par::map_indexed(d.n_types(), |i| {
        let x = d.types.point(i);
        let mut hits = Vec::new();
        for j in 0..ny {
            let y = d.goods.point(j);
            for (label, e) in &table {
                if let Err(err) = e.eval(Some(x), Some(y)) {
                    hits.push(Witness::Derivative {
                        x: x.to_vec(),
                        y: y.to_vec(),
                        partial: label.clone(),
                        detail: err.to_string(),
                    });
                    break;
                }
            }
            if hits.len() >= super::MAX_WITNESSES {
                break;
            }
        }
        hits
    });
    Check::from_witnesses(per_type.into_iter().flatten().collect())
        .with_note(format!("{} distinct non-constant partials checked", table.len()))
}
