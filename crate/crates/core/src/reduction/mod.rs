//! Reduction of problems with unequal dimensions to equal-dimensional
//! effective problems: quotienting types when `m > n`, goods when `n > m`.

mod goods;
mod section;
mod types;

use thiserror::Error;

use crate::cluster::Clustering;
use crate::domain::{distance, DiscreteProblem, DomainError, PointSet};
use crate::preference::PrefError;
use crate::transform::{is_b_convex, price_to_utility, Convexity, PriceSchedule};

pub use goods::{build_tilde_price, reduce_goods, GoodsMapping, GoodsReduction, NullPolicy};
pub use section::{GoodsSection, TypeSection};
pub use types::{reduce_types, TypeMapping, TypeReduction};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReductionError {
    #[error("type reduction needs m > n (m = {m}, n = {n})")]
    TypeDims { m: usize, n: usize },
    #[error("goods reduction needs n > m (m = {m}, n = {n})")]
    GoodsDims { m: usize, n: usize },
    #[error("payoff is tabulated; the quotient map needs gradients")]
    Tabulated,
    #[error("level sets depend on the {0} they are measured against")]
    LevelDependence(&'static str),
    #[error("quotient is not well defined: members {a} and {b} differ by {gap:e}")]
    Gap { gap: f64, a: usize, b: usize },
    #[error("null good is not a cost minimizer on its fiber (excess {excess:e})")]
    NullGood { excess: f64 },
    #[error("base index {index} out of range (size {len})")]
    Base { index: usize, len: usize },
    #[error(transparent)]
    Pref(#[from] PrefError),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

/// Largest distance between the images of grid neighbours; zero for
/// isolated points.
fn link_radius(images: &[Vec<f64>], source: &PointSet) -> f64 {
    (0..images.len())
        .flat_map(|i| source.neighbours(i).into_iter().map(move |k| (i, k)))
        .map(|(i, k)| distance(&images[i], &images[k]))
        .fold(0.0, f64::max)
}

/// Worst `|f(a) - f(rep)|` over every cluster member `a` and column, where
/// `f` returns a row of adjusted payoffs. Returns `(gap, a, rep)`.
fn quotient_gap(c: &Clustering, reps: &[usize], row: impl Fn(usize) -> Vec<f64> + Sync) -> (f64, usize, usize) {
    let per = crate::par::map_indexed(c.len(), |k| {
        let r = reps[k];
        let base = row(r);
        let mut worst = (0.0, r, r);
        for &a in &c.clusters[k] {
            if a == r {
                continue;
            }
            let g = row(a).iter().zip(&base).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
            if g > worst.0 {
                worst = (g, a, r);
            }
        }
        worst
    });
    per.into_iter().fold((0.0, 0, 0), |acc, w| if w.0 > acc.0 { w } else { acc })
}

/// h-convexity of the costs of `d`: the costs against their double transform
/// through the types. `worst` indexes goods.
pub fn cost_convexity(d: &DiscreteProblem) -> Convexity {
    let all = PriceSchedule::pinned(d, d.costs.clone()).expect("costs form a valid schedule");
    let u = price_to_utility(d, &all).utilities;
    let back = crate::transform::utility_to_price(d, &u);
    let (worst, gap) = back
        .iter()
        .zip(&d.costs)
        .map(|(b, c)| (c - b).abs())
        .enumerate()
        .fold((0, 0.0), |acc, (j, g)| if g > acc.1 { (j, g) } else { acc });
    Convexity { convex: gap <= d.tolerances.convex_tol, worst, gap }
}

/// Either reduction, for checks that work on both.
#[derive(Debug, Clone, Copy)]
pub enum Reduction<'a> {
    Types(&'a TypeReduction),
    Goods(&'a GoodsReduction),
}

impl Reduction<'_> {
    pub fn effective(&self) -> &DiscreteProblem {
        match self {
            Reduction::Types(t) => &t.problem,
            Reduction::Goods(g) => &g.problem,
        }
    }
}

/// Whether the effective cost is h-convex (the double-transform fixed point).
pub fn check_effective_cost_convexity(r: Reduction<'_>) -> Convexity {
    cost_convexity(r.effective())
}

/// Whether utilities `u` of the effective problem are h-convex.
pub fn effective_utility_convexity(r: Reduction<'_>, u: &[f64]) -> Convexity {
    is_b_convex(r.effective(), u)
}
