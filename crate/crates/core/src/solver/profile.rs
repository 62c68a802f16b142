//! Profit as a function of one price with the others held fixed.
//!
//! Per type we keep the best utility among the other offered goods together
//! with every good within `convex_tol` of it, which is exactly what the
//! argmax set and tie-break need. Evaluating one price then costs one pass
//! over the types and reproduces [`crate::transform::compute_profit`] bit for
//! bit.

use crate::domain::DiscreteProblem;
use crate::transform::{Price, PriceSchedule};

#[derive(Debug, Clone, Copy, PartialEq)]
struct Near {
    u: f64,
    margin: f64,
    index: usize,
}

#[derive(Debug, Clone)]
pub struct LineProfile<'a> {
    d: &'a DiscreteProblem,
    good: usize,
    other_max: Vec<f64>,
    /// `near[start[i]..start[i + 1]]` belong to type `i`, in index order.
    start: Vec<usize>,
    near: Vec<Near>,
}

fn scan_row(d: &DiscreteProblem, i: usize, prices: &[Price], skip: usize, tol: f64, out: &mut Vec<Near>) -> f64 {
    let row = d.row(i);
    let mut best = f64::NEG_INFINITY;
    for (k, p) in prices.iter().enumerate() {
        if let (Price::Offered(p), true) = (p, k != skip) {
            best = best.max(row[k] - p);
        }
    }
    for (k, p) in prices.iter().enumerate() {
        if let (Price::Offered(p), true) = (p, k != skip) {
            let u = row[k] - p;
            if u >= best - tol {
                out.push(Near { u, margin: p - d.costs[k], index: k });
            }
        }
    }
    best
}

impl<'a> LineProfile<'a> {
    /// Full scan over the schedule; `O(types x goods)`.
    pub fn new(d: &'a DiscreteProblem, v: &PriceSchedule, good: usize) -> Self {
        let tol = d.tolerances.convex_tol;
        let n = d.n_types();
        let mut other_max = Vec::with_capacity(n);
        let mut start = Vec::with_capacity(n + 1);
        let mut near = Vec::with_capacity(n);
        for i in 0..n {
            start.push(near.len());
            other_max.push(scan_row(d, i, v.prices(), good, tol, &mut near));
        }
        start.push(near.len());
        LineProfile { d, good, other_max, start, near }
    }

    pub fn good(&self) -> usize {
        self.good
    }

    /// Price at which type `i` becomes indifferent between `good` and its best alternative.
    pub fn breakpoint(&self, i: usize) -> f64 {
        self.d.b(i, self.good) - self.other_max[i]
    }

    fn margin(&self, i: usize, price: Option<f64>) -> f64 {
        let tol = self.d.tolerances.convex_tol;
        let j = self.good;
        let uj = price.map(|p| self.d.b(i, j) - p);
        let top = uj.map_or(self.other_max[i], |u| u.max(self.other_max[i]));
        let mut best: Option<(usize, f64)> = None;
        let mut consider = |index: usize, margin: f64| {
            let better = match best {
                None => true,
                Some((k, m)) => margin > m || (margin == m && index < k),
            };
            if better {
                best = Some((index, margin));
            }
        };
        if let (Some(u), Some(p)) = (uj, price) {
            if u >= top - tol {
                consider(j, p - self.d.costs[j]);
            }
        }
        for e in &self.near[self.start[i]..self.start[i + 1]] {
            if e.u >= top - tol {
                consider(e.index, e.margin);
            }
        }
        best.map_or(0.0, |b| b.1)
    }

    /// Profit with `good` priced at `price` (`None`: not offered).
    pub fn profit_at(&self, price: Option<f64>) -> f64 {
        (0..self.d.n_types()).map(|i| self.d.weights[i] * self.margin(i, price)).sum()
    }

    pub fn profit(&self, price: f64) -> f64 {
        self.profit_at(Some(price))
    }

    /// Profile for prices `>= lo` only. Types that cannot choose `good` at
    /// any such price keep their margin, which is summed once.
    pub fn window(&self, lo: f64) -> Window<'_, 'a> {
        let tol = self.d.tolerances.convex_tol;
        let (active, idle): (Vec<usize>, Vec<usize>) = (0..self.d.n_types()).partition(|&i| self.breakpoint(i) + tol >= lo);
        let base = idle.iter().map(|&i| self.d.weights[i] * self.margin(i, None)).sum();
        Window { profile: self, lo, base, active }
    }
}

#[derive(Debug, Clone)]
pub struct Window<'p, 'a> {
    profile: &'p LineProfile<'a>,
    lo: f64,
    base: f64,
    active: Vec<usize>,
}

impl Window<'_, '_> {
    /// Profit at `price`, which must not lie below the window.
    pub fn profit(&self, price: f64) -> f64 {
        debug_assert!(price >= self.lo);
        let w = &self.profile.d.weights;
        self.base + self.active.iter().map(|&i| w[i] * self.profile.margin(i, Some(price))).sum::<f64>()
    }
}

/// A schedule with a per-type cache of its three best goods, so that line
/// profiles can be built without rescanning every row.
#[derive(Debug, Clone)]
pub struct Incumbent<'a> {
    d: &'a DiscreteProblem,
    schedule: PriceSchedule,
    top: Vec<[(f64, usize); 3]>,
}

const EMPTY: (f64, usize) = (f64::NEG_INFINITY, usize::MAX);

fn top3(d: &DiscreteProblem, i: usize, v: &PriceSchedule) -> [(f64, usize); 3] {
    let row = d.row(i);
    let mut t = [EMPTY; 3];
    for (k, p) in v.offered() {
        let u = row[k] - p;
        // Goods arrive in index order, so `>` keeps lower indices first on ties.
        if u > t[2].0 {
            t[2] = (u, k);
            if t[2].0 > t[1].0 {
                t.swap(1, 2);
                if t[1].0 > t[0].0 {
                    t.swap(0, 1);
                }
            }
        }
    }
    t
}

/// Descending utility, lower index first on ties.
fn sort_top(t: &mut [(f64, usize); 3]) {
    t.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
}

impl<'a> Incumbent<'a> {
    pub fn new(d: &'a DiscreteProblem, schedule: PriceSchedule) -> Self {
        let top = (0..d.n_types()).map(|i| top3(d, i, &schedule)).collect();
        Incumbent { d, schedule, top }
    }

    pub fn schedule(&self) -> &PriceSchedule {
        &self.schedule
    }

    pub fn into_schedule(self) -> PriceSchedule {
        self.schedule
    }

    /// Reprices `good` and refreshes the cache where it may have changed.
    pub fn set(&mut self, good: usize, price: Price) {
        self.schedule.set(good, price);
        for i in 0..self.d.n_types() {
            let u = price.value().map(|p| self.d.b(i, good) - p);
            let t = &mut self.top[i];
            match (t.iter().position(|e| e.1 == good), u) {
                // A cached good that got better stays in the top three.
                (Some(k), Some(u)) if u >= t[k].0 => {
                    t[k].0 = u;
                    sort_top(t);
                }
                (Some(_), _) => *t = top3(self.d, i, &self.schedule),
                (None, Some(u)) if u > t[2].0 || (u == t[2].0 && good < t[2].1) => {
                    t[2] = (u, good);
                    sort_top(t);
                }
                (None, _) => {}
            }
        }
    }

    pub fn profile(&self, good: usize) -> LineProfile<'a> {
        let d = self.d;
        let tol = d.tolerances.convex_tol;
        let n = d.n_types();
        let mut other_max = Vec::with_capacity(n);
        let mut start = Vec::with_capacity(n + 1);
        let mut near = Vec::with_capacity(n);
        for i in 0..n {
            start.push(near.len());
            let mut rest = self.top[i].iter().filter(|e| e.1 != good);
            let e0 = *rest.next().unwrap_or(&EMPTY);
            let e1 = *rest.next().unwrap_or(&EMPTY);
            if e1.1 != usize::MAX && e1.0 >= e0.0 - tol {
                // A near tie the cache cannot resolve.
                other_max.push(scan_row(d, i, self.schedule.prices(), good, tol, &mut near));
            } else {
                other_max.push(e0.0);
                if e0.1 != usize::MAX {
                    let p = self.schedule.get(e0.1).value().expect("cached goods are offered");
                    near.push(Near { u: e0.0, margin: p - d.costs[e0.1], index: e0.1 });
                }
            }
        }
        start.push(near.len());
        LineProfile { d, good, other_max, start, near }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{PointSet, ToleranceSet, Topology};
    use crate::transform::compute_profit;

    fn problem() -> DiscreteProblem {
        let nx = 7;
        let types = PointSet::new(1, (0..nx).map(|k| k as f64 / 6.0).collect(), Topology::Lattice { shape: vec![nx] });
        let goods = PointSet::new(1, vec![0.0, 0.5, 1.0, 0.5], Topology::Discrete);
        let payoff = (0..nx)
            .flat_map(|i| {
                let x = i as f64 / 6.0;
                [0.0, 0.5 * x, x, 0.5 * x]
            })
            .collect();
        let w = (0..nx).map(|i| 1.0 + i as f64).collect();
        DiscreteProblem::new(types, w, goods, vec![0.0, 0.1, 0.3, 0.1], 0, payoff, ToleranceSet::default()).unwrap()
    }

    #[test]
    fn profile_matches_direct_profit() {
        let d = problem();
        let v = PriceSchedule::pinned(&d, vec![0.0, 0.2, 0.5, 0.2]).unwrap();
        for j in 1..4 {
            let prof = LineProfile::new(&d, &v, j);
            for k in 0..50 {
                let p = 0.05 * k as f64;
                assert_eq!(prof.profit(p), compute_profit(&d, &v.with(j, Price::Offered(p))), "good {j} price {p}");
            }
            assert_eq!(prof.profit_at(None), compute_profit(&d, &v.with(j, Price::NotOffered)));
        }
    }

    #[test]
    fn cached_profiles_agree_with_scans() {
        let d = problem();
        let v = PriceSchedule::pinned(&d, vec![0.0, 0.2, 0.5, 0.2]).unwrap();
        let mut inc = Incumbent::new(&d, v);
        for (j, p) in [(2, 0.4), (1, 0.15), (3, 0.15), (2, 0.9), (1, 0.3)] {
            inc.set(j, Price::Offered(p));
            for g in 1..4 {
                let a = inc.profile(g);
                let b = LineProfile::new(&d, inc.schedule(), g);
                for k in 0..20 {
                    let q = 0.07 * k as f64;
                    assert_eq!(a.profit(q), b.profit(q));
                }
            }
        }
    }
}
