use serde::Serialize;

use super::section::GoodsSection;
use super::{link_radius, quotient_gap, ReductionError};
use crate::cluster::{cluster, nearest_foreign_pair};
use crate::conditions::{check_level_independence, Side, Verdict};
use crate::domain::{DiscreteProblem, DomainSpec, Field, Payoff, PointSet, ScreeningProblem, Topology};
use crate::par;
use crate::transform::{price_to_utility, utility_to_price, Price, PriceSchedule};

/// What to do when the null good does not minimize `c - b(x0, .)` on its fiber.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NullPolicy {
    /// Use the null good as its fiber's representative regardless.
    #[default]
    Override,
    /// Reject the problem.
    Strict,
}

/// Quotient of the good space by the fibers of `Q(y) = D_x b(x0, y)`.
#[derive(Debug, Clone)]
pub struct GoodsReduction {
    /// Type index of `x0`.
    pub base_type: usize,
    pub policy: NullPolicy,
    pub labels: Vec<usize>,
    pub fibers: Vec<Vec<usize>>,
    /// `w_k = Q(rep_k)`.
    pub effective_goods: Vec<Vec<f64>>,
    /// `g_k = min over the fiber of c - b(x0, .)`.
    pub costs: Vec<f64>,
    /// Goods within `convex_tol` of that minimum.
    pub argmin_sets: Vec<Vec<usize>>,
    pub representatives: Vec<usize>,
    pub phi_fiber: usize,
    /// The null good was forced in as representative.
    pub null_overridden: bool,
    pub gap: f64,
    pub warning: Option<String>,
    /// Effective problem `h[i][k] = b(x_i, rep_k) - b(x0, rep_k)` with costs `g`.
    pub problem: DiscreteProblem,
    pub section: Option<GoodsSection>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GoodsMapping {
    pub base_type: usize,
    pub base_point: Vec<f64>,
    pub policy: NullPolicy,
    pub labels: Vec<usize>,
    pub representatives: Vec<usize>,
    pub argmin_sets: Vec<Vec<usize>>,
    pub effective_goods: Vec<Vec<f64>>,
    pub costs: Vec<f64>,
    pub phi_fiber: usize,
    pub null_overridden: bool,
    pub gap: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

impl GoodsReduction {
    pub fn mapping(&self, d: &DiscreteProblem) -> GoodsMapping {
        GoodsMapping {
            base_type: self.base_type,
            base_point: d.types.point(self.base_type).to_vec(),
            policy: self.policy,
            labels: self.labels.clone(),
            representatives: self.representatives.clone(),
            argmin_sets: self.argmin_sets.clone(),
            effective_goods: self.effective_goods.clone(),
            costs: self.costs.clone(),
            phi_fiber: self.phi_fiber,
            null_overridden: self.null_overridden,
            gap: self.gap,
            warning: self.warning.clone(),
        }
    }

    /// Full-problem schedule offering each representative at
    /// `p_k + b(x0, rep_k)` and nothing else.
    pub fn lift(&self, d: &DiscreteProblem, p: &PriceSchedule) -> PriceSchedule {
        let mut v = vec![Price::NotOffered; d.n_goods()];
        for (k, &r) in self.representatives.iter().enumerate() {
            if let Some(pk) = p.get(k).value() {
                v[r] = Price::Offered(pk + d.b(self.base_type, r));
            }
        }
        v[d.phi] = Price::Offered(d.costs[d.phi]);
        PriceSchedule::new(d, v).expect("lifted schedule is pinned")
    }

    /// Effective schedule pricing fiber `k` at `v(rep_k) - b(x0, rep_k)`.
    pub fn restrict(&self, d: &DiscreteProblem, v: &PriceSchedule) -> PriceSchedule {
        let mut p: Vec<Price> = self
            .representatives
            .iter()
            .map(|&r| match v.get(r) {
                Price::Offered(x) => Price::Offered(x - d.b(self.base_type, r)),
                Price::NotOffered => Price::NotOffered,
            })
            .collect();
        p[self.phi_fiber] = Price::Offered(self.costs[self.phi_fiber]);
        PriceSchedule::new(&self.problem, p).expect("restricted schedule is pinned")
    }

    /// Goods in some argmin set.
    pub fn support(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self.argmin_sets.iter().flatten().copied().collect();
        s.sort_unstable();
        s
    }

    pub fn screening_problem(&self, original: &ScreeningProblem) -> Option<ScreeningProblem> {
        let section = self.section.clone()?;
        let link = match self.problem.goods.topology() {
            Topology::Scattered { link_radius } => Some(*link_radius),
            _ => None,
        };
        Some(ScreeningProblem {
            m: original.m,
            n: original.m,
            domain_x: original.domain_x.clone(),
            domain_y: DomainSpec::Points { points: self.effective_goods.clone(), link_radius: link },
            payoff: Payoff::Function(std::sync::Arc::new(section)),
            cost: Field::Table(self.costs.clone()),
            density: original.density.clone(),
            null_good: self.effective_goods[self.phi_fiber].clone(),
            tolerances: original.tolerances,
        })
    }
}

/// Builds the goods reduction at base type `x0` (default: the type nearest
/// the centroid).
pub fn reduce_goods(
    problem: &ScreeningProblem,
    d: &DiscreteProblem,
    x0: Option<usize>,
    policy: NullPolicy,
) -> Result<GoodsReduction, ReductionError> {
    let (m, n) = (problem.m, problem.n);
    if n <= m {
        return Err(ReductionError::GoodsDims { m, n });
    }
    let Payoff::Function(pref) = &problem.payoff else {
        return Err(ReductionError::Tabulated);
    };
    let i0 = x0.unwrap_or_else(|| d.types.centroid_index());
    if i0 >= d.n_types() {
        return Err(ReductionError::Base { index: i0, len: d.n_types() });
    }
    if check_level_independence(problem, d, Side::Goods).verdict == Verdict::Fail {
        return Err(ReductionError::LevelDependence("types"));
    }
    let tol = d.tolerances;
    let xb = d.types.point(i0);
    let images = par::try_map_indexed(d.n_goods(), |j| pref.grad_x(xb, d.goods.point(j)).map(|g| g.as_slice().to_vec()))?;
    let c = cluster(&images, tol.cluster_tol);
    let adjusted: Vec<f64> = (0..d.n_goods()).map(|j| d.costs[j] - d.b(i0, j)).collect();

    let mut costs = Vec::with_capacity(c.len());
    let mut argmin_sets = Vec::with_capacity(c.len());
    let mut reps = Vec::with_capacity(c.len());
    for fiber in &c.clusters {
        let g = fiber.iter().map(|&j| adjusted[j]).fold(f64::INFINITY, f64::min);
        let set: Vec<usize> = fiber.iter().copied().filter(|&j| adjusted[j] <= g + tol.convex_tol).collect();
        reps.push(set[0]);
        costs.push(g);
        argmin_sets.push(set);
    }
    let phi_fiber = c.labels[d.phi];
    let mut null_overridden = false;
    if !argmin_sets[phi_fiber].contains(&d.phi) {
        match policy {
            NullPolicy::Strict => {
                return Err(ReductionError::NullGood { excess: adjusted[d.phi] - costs[phi_fiber] });
            }
            NullPolicy::Override => null_overridden = true,
        }
    }
    // The pinned good represents its fiber, so effective and full pins agree.
    reps[phi_fiber] = d.phi;
    costs[phi_fiber] = adjusted[d.phi];

    let (gap, a, b) = quotient_gap(&c, &reps, |j| (0..d.n_types()).map(|i| d.b(i, j) - d.b(i0, j)).collect());
    if gap > tol.convex_tol {
        return Err(ReductionError::Gap { gap, a, b });
    }
    let warning = nearest_foreign_pair(&images, &c, tol.cluster_tol, 3.0 * tol.cluster_tol)
        .map(|(p, q, dist)| format!("goods {p} and {q} fall in different fibers only {dist:e} apart; refine or shrink cluster_tol"));

    let effective_goods: Vec<Vec<f64>> = reps.iter().map(|&r| images[r].clone()).collect();
    let nk = reps.len();
    let payoff: Vec<f64> = (0..d.n_types())
        .flat_map(|i| reps.iter().map(move |&r| d.b(i, r) - d.b(i0, r)))
        .collect();
    debug_assert_eq!(payoff.len(), d.n_types() * nk);
    let radius = link_radius(&images, &d.goods);
    let topology = if radius > 0.0 { Topology::Scattered { link_radius: radius } } else { Topology::Discrete };
    let goods = PointSet::from_points(m, &effective_goods, topology)?;
    let eff = DiscreteProblem::new(d.types.clone(), d.weights.clone(), goods, costs.clone(), phi_fiber, payoff, tol)?;

    let base = d.goods.point(d.goods.centroid_index()).to_vec();
    let section = GoodsSection::new(pref.clone(), xb.to_vec(), base, tol).ok();

    Ok(GoodsReduction {
        base_type: i0,
        policy,
        labels: c.labels,
        fibers: c.clusters,
        effective_goods,
        costs,
        argmin_sets,
        representatives: reps,
        phi_fiber,
        null_overridden,
        gap,
        warning,
        problem: eff,
        section,
    })
}

/// `v~ = (v^b)^b` on the argmin sets, not offered elsewhere, with the null
/// good re-pinned at cost.
pub fn build_tilde_price(d: &DiscreteProblem, gr: &GoodsReduction, v: &PriceSchedule) -> PriceSchedule {
    let u = price_to_utility(d, v).utilities;
    let w = utility_to_price(d, &u);
    let mut out = vec![Price::NotOffered; d.n_goods()];
    for j in gr.support() {
        out[j] = Price::Offered(w[j]);
    }
    out[d.phi] = Price::Offered(d.costs[d.phi]);
    PriceSchedule::new(d, out).expect("tilde price is pinned")
}
