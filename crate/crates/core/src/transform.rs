//! b-transforms between price schedules and buyer utilities, tie-breaking,
//! and the monopolist's profit.

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::domain::DiscreteProblem;
use crate::par;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransformError {
    #[error("schedule has {got} prices for {expected} goods")]
    Length { expected: usize, got: usize },
    #[error("null good must be offered at its cost {expected}, found {got:?}")]
    Pin { expected: f64, got: Price },
    #[error("price of good {0} is not finite")]
    NonFinite(usize),
}

/// Price of one good. Serialized as a number, or `null` when not offered.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub enum Price {
    Offered(f64),
    NotOffered,
}

impl Price {
    pub fn value(self) -> Option<f64> {
        match self {
            Price::Offered(v) => Some(v),
            Price::NotOffered => None,
        }
    }

    pub fn is_offered(self) -> bool {
        matches!(self, Price::Offered(_))
    }
}

impl Serialize for Price {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.value().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Price {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.map_or(Price::NotOffered, Price::Offered))
    }
}

/// Prices over the good list, pinned at cost on the null good.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct PriceSchedule(Vec<Price>);

impl PriceSchedule {
    pub fn new(d: &DiscreteProblem, prices: Vec<Price>) -> Result<Self, TransformError> {
        if prices.len() != d.n_goods() {
            return Err(TransformError::Length { expected: d.n_goods(), got: prices.len() });
        }
        if let Some(j) = prices.iter().position(|p| matches!(p, Price::Offered(v) if !v.is_finite())) {
            return Err(TransformError::NonFinite(j));
        }
        let pin = d.costs[d.phi];
        if prices[d.phi] != Price::Offered(pin) {
            return Err(TransformError::Pin { expected: pin, got: prices[d.phi] });
        }
        Ok(PriceSchedule(prices))
    }

    /// Every good offered at the given values; the null entry is overwritten
    /// with its cost.
    pub fn pinned(d: &DiscreteProblem, mut values: Vec<f64>) -> Result<Self, TransformError> {
        if let Some(v) = values.get_mut(d.phi) {
            *v = d.costs[d.phi];
        }
        Self::new(d, values.into_iter().map(Price::Offered).collect())
    }

    pub fn at_cost(d: &DiscreteProblem) -> Self {
        PriceSchedule(d.costs.iter().map(|&c| Price::Offered(c)).collect())
    }

    pub fn only_null(d: &DiscreteProblem) -> Self {
        let mut v = vec![Price::NotOffered; d.n_goods()];
        v[d.phi] = Price::Offered(d.costs[d.phi]);
        PriceSchedule(v)
    }

    pub fn prices(&self) -> &[Price] {
        &self.0
    }

    pub fn get(&self, j: usize) -> Price {
        self.0[j]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Copy with good `j` repriced. Callers must not touch the null good.
    #[cfg(test)]
    pub(crate) fn with(&self, j: usize, p: Price) -> Self {
        let mut v = self.0.clone();
        v[j] = p;
        PriceSchedule(v)
    }

    pub(crate) fn set(&mut self, j: usize, p: Price) {
        self.0[j] = p;
    }

    pub fn offered(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.0.iter().enumerate().filter_map(|(j, p)| p.value().map(|v| (j, v)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UtilityProfile {
    pub utilities: Vec<f64>,
    pub argmax_sets: Vec<Vec<usize>>,
    pub allocation: Vec<usize>,
    pub profit: f64,
}

/// Max utility for one type and the goods within `tol` of it.
fn best_for_type(row: &[f64], v: &PriceSchedule) -> f64 {
    v.offered().map(|(j, p)| row[j] - p).fold(f64::NEG_INFINITY, f64::max)
}

/// Chosen good among those within `tol` of `u`: largest margin, then lowest index.
fn choose(row: &[f64], v: &PriceSchedule, costs: &[f64], u: f64, tol: f64) -> usize {
    let mut best: Option<(usize, f64)> = None;
    for (j, p) in v.offered() {
        if row[j] - p >= u - tol {
            let margin = p - costs[j];
            if best.is_none_or(|(_, m)| margin > m) {
                best = Some((j, margin));
            }
        }
    }
    best.expect("argmax set is never empty").0
}

/// `u_i = max_j B[i][j] - v_j` together with argmax sets, allocation and profit.
pub fn price_to_utility(d: &DiscreteProblem, v: &PriceSchedule) -> UtilityProfile {
    let tol = d.tolerances.convex_tol;
    let per_type = par::map_indexed(d.n_types(), |i| {
        let row = d.row(i);
        let u = best_for_type(row, v);
        let set: Vec<usize> = v.offered().filter(|&(j, p)| row[j] - p >= u - tol).map(|(j, _)| j).collect();
        let a = tie_break(d, &set, v);
        (u, set, a)
    });
    let profit = per_type
        .iter()
        .enumerate()
        .map(|(i, (u, _, a))| d.weights[i] * (d.b(i, *a) - u - d.costs[*a]))
        .sum();
    let mut utilities = Vec::with_capacity(per_type.len());
    let mut argmax_sets = Vec::with_capacity(per_type.len());
    let mut allocation = Vec::with_capacity(per_type.len());
    for (u, s, a) in per_type {
        utilities.push(u);
        argmax_sets.push(s);
        allocation.push(a);
    }
    UtilityProfile { utilities, argmax_sets, allocation, profit }
}

/// The reverse transform `w_j = max_i B[i][j] - u_i` over every good.
pub fn utility_to_price(d: &DiscreteProblem, u: &[f64]) -> Vec<f64> {
    assert_eq!(u.len(), d.n_types(), "utility vector length");
    par::map_indexed(d.n_goods(), |j| {
        (0..d.n_types()).map(|i| d.b(i, j) - u[i]).fold(f64::NEG_INFINITY, f64::max)
    })
}

/// Outcome of a double-transform fixed-point test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Convexity {
    pub convex: bool,
    /// Index with the largest gap.
    pub worst: usize,
    pub gap: f64,
}

/// Tests whether `u` is a b-transform by comparing it with its double
/// transform (all goods offered, null pin ignored).
pub fn is_b_convex(d: &DiscreteProblem, u: &[f64]) -> Convexity {
    let w = utility_to_price(d, u);
    let back = par::map_indexed(d.n_types(), |i| {
        d.row(i).iter().zip(&w).map(|(b, w)| b - w).fold(f64::NEG_INFINITY, f64::max)
    });
    let (worst, gap) = back
        .iter()
        .zip(u)
        .map(|(b, u)| (b - u).abs())
        .enumerate()
        .fold((0, 0.0), |acc, (i, g)| if g > acc.1 { (i, g) } else { acc });
    Convexity { convex: gap <= d.tolerances.convex_tol, worst, gap }
}

/// Principal-favourable choice from an argmax set: the largest margin
/// `v_j - c_j`, lowest index on equal margins.
pub fn tie_break(d: &DiscreteProblem, set: &[usize], v: &PriceSchedule) -> usize {
    let mut best: Option<(usize, f64)> = None;
    for &j in set {
        let Some(p) = v.get(j).value() else { continue };
        let margin = p - d.costs[j];
        let better = match best {
            None => true,
            Some((k, m)) => margin > m || (margin == m && j < k),
        };
        if better {
            best = Some((j, margin));
        }
    }
    best.expect("tie_break needs an offered good in the set").0
}

/// Total profit `sum_i mu_i (v_a(i) - c_a(i))`.
pub fn compute_profit(d: &DiscreteProblem, v: &PriceSchedule) -> f64 {
    let margins = type_margins(d, v);
    margins.iter().zip(&d.weights).map(|(m, w)| w * m).sum()
}

/// Realized margin `v_a(i) - c_a(i)` per type.
pub fn type_margins(d: &DiscreteProblem, v: &PriceSchedule) -> Vec<f64> {
    let tol = d.tolerances.convex_tol;
    par::map_indexed(d.n_types(), |i| {
        let row = d.row(i);
        let u = best_for_type(row, v);
        let a = choose(row, v, &d.costs, u, tol);
        v.get(a).value().expect("allocated goods are offered") - d.costs[a]
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{PointSet, ToleranceSet, Topology};

    /// Example 3.3 on a coarse grid: b = xy + y, Y = {0, 1}, c = y^2.
    fn toy(nx: usize) -> DiscreteProblem {
        let xs: Vec<f64> = (0..nx).map(|k| k as f64 / (nx - 1) as f64).collect();
        let types = PointSet::new(1, xs.clone(), Topology::Lattice { shape: vec![nx] });
        let goods = PointSet::new(1, vec![0.0, 1.0], Topology::Discrete);
        let payoff = xs.iter().flat_map(|x| [0.0, x + 1.0]).collect();
        DiscreteProblem::new(types, vec![1.0; nx], goods, vec![0.0, 1.0], 0, payoff, ToleranceSet::default()).unwrap()
    }

    #[test]
    fn utility_of_a_single_price() {
        let d = toy(5);
        let v = PriceSchedule::pinned(&d, vec![0.0, 1.5]).unwrap();
        let u = price_to_utility(&d, &v);
        assert_eq!(u.utilities[3], 0.25);
        assert_eq!(u.utilities[1], 0.0);
        // x = 0.5 is indifferent and is allocated the profitable good.
        assert_eq!(u.argmax_sets[2], vec![0, 1]);
        assert_eq!(u.allocation[2], 1);
    }

    #[test]
    fn reverse_transform_recovers_price() {
        let d = toy(101);
        let v = PriceSchedule::pinned(&d, vec![0.0, 1.5]).unwrap();
        let u = price_to_utility(&d, &v).utilities;
        let w = utility_to_price(&d, &u);
        assert_eq!(w[0], 0.0);
        assert!((w[1] - 1.5).abs() < 1e-15);
        assert!(is_b_convex(&d, &u).convex);
    }

    #[test]
    fn cost_prices_earn_nothing() {
        let d = toy(11);
        let v = PriceSchedule::at_cost(&d);
        assert_eq!(compute_profit(&d, &v), 0.0);
        assert_eq!(price_to_utility(&d, &v).profit, 0.0);
        let only = PriceSchedule::only_null(&d);
        let u = price_to_utility(&d, &only);
        assert!(u.utilities.iter().all(|&u| u == 0.0));
        assert_eq!(u.profit, 0.0);
    }

    #[test]
    fn midpoint_of_two_utilities_is_not_convex() {
        let d = toy(101);
        let u0 = price_to_utility(&d, &PriceSchedule::pinned(&d, vec![0.0, 1.2]).unwrap()).utilities;
        let u1 = price_to_utility(&d, &PriceSchedule::pinned(&d, vec![0.0, 1.8]).unwrap()).utilities;
        let mid: Vec<f64> = u0.iter().zip(&u1).map(|(a, b)| (a + b) / 2.0).collect();
        let c = is_b_convex(&d, &mid);
        assert!(!c.convex);
        assert_eq!(c.worst, 50);
        assert!((c.gap - 0.15).abs() < 1e-12);
    }

    #[test]
    fn tie_breaks() {
        let d = toy(3);
        let v = PriceSchedule::pinned(&d, vec![0.0, 1.5]).unwrap();
        assert_eq!(tie_break(&d, &[0, 1], &v), 1);
        assert_eq!(tie_break(&d, &[0], &v), 0);
        let flat = PriceSchedule::pinned(&d, vec![0.0, 1.0]).unwrap();
        assert_eq!(tie_break(&d, &[0, 1], &flat), 0);
    }

    #[test]
    fn schedules_are_validated() {
        let d = toy(3);
        assert!(matches!(
            PriceSchedule::new(&d, vec![Price::Offered(0.1), Price::Offered(1.0)]),
            Err(TransformError::Pin { .. })
        ));
        assert!(matches!(PriceSchedule::new(&d, vec![Price::Offered(0.0)]), Err(TransformError::Length { .. })));
        let json = serde_json::to_string(&PriceSchedule::only_null(&d)).unwrap();
        assert_eq!(json, "[0.0,null]");
    }
}
