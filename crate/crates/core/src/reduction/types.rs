use serde::Serialize;

use super::section::TypeSection;
use super::{link_radius, quotient_gap, ReductionError};
use crate::cluster::{cluster, nearest_foreign_pair};
use crate::conditions::{check_level_independence, Side, Verdict};
use crate::domain::{DiscreteProblem, DomainSpec, Field, Payoff, PointSet, ScreeningProblem, Topology};
use crate::par;
use crate::transform::PriceSchedule;

/// Quotient of the type space by the level sets of `Q(x) = D_y b(x, y0)`.
#[derive(Debug, Clone)]
pub struct TypeReduction {
    /// Good index of `y0`.
    pub base_good: usize,
    /// Cluster of every original type.
    pub labels: Vec<usize>,
    pub clusters: Vec<Vec<usize>>,
    /// `z_k = Q(x_rep)`.
    pub effective_types: Vec<Vec<f64>>,
    /// Pushforward weights `nu_k`.
    pub weights: Vec<f64>,
    /// Lowest original index in each cluster.
    pub representatives: Vec<usize>,
    /// Largest disagreement of `b(., y) - b(., y0)` inside a cluster.
    pub gap: f64,
    pub warning: Option<String>,
    /// Effective problem `h[k][j] = b(x_rep, y_j) - b(x_rep, y0)` on the same goods.
    pub problem: DiscreteProblem,
    pub section: Option<TypeSection>,
}

/// Serializable summary of a [`TypeReduction`].
#[derive(Debug, Clone, Serialize)]
pub struct TypeMapping {
    pub base_good: usize,
    pub base_point: Vec<f64>,
    pub labels: Vec<usize>,
    pub representatives: Vec<usize>,
    pub effective_types: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub gap: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

impl TypeReduction {
    pub fn mapping(&self) -> TypeMapping {
        TypeMapping {
            base_good: self.base_good,
            base_point: self.problem.goods.point(self.base_good).to_vec(),
            labels: self.labels.clone(),
            representatives: self.representatives.clone(),
            effective_types: self.effective_types.clone(),
            weights: self.weights.clone(),
            gap: self.gap,
            warning: self.warning.clone(),
        }
    }

    /// The same prices viewed on the effective problem; goods are unchanged.
    pub fn effective_schedule(&self, v: &PriceSchedule) -> PriceSchedule {
        PriceSchedule::new(&self.problem, v.prices().to_vec()).expect("goods are shared with the full problem")
    }

    /// The effective problem at the continuous level, with `h` evaluated
    /// through the section. `None` when no section could be built.
    pub fn screening_problem(&self, original: &ScreeningProblem) -> Option<ScreeningProblem> {
        let section = self.section.clone()?;
        let link = match self.problem.types.topology() {
            Topology::Scattered { link_radius } => Some(*link_radius),
            _ => None,
        };
        Some(ScreeningProblem {
            m: original.n,
            n: original.n,
            domain_x: DomainSpec::Points { points: self.effective_types.clone(), link_radius: link },
            domain_y: original.domain_y.clone(),
            payoff: Payoff::Function(std::sync::Arc::new(section)),
            cost: original.cost.clone(),
            density: Field::Table(self.weights.clone()),
            null_good: original.null_good.clone(),
            tolerances: original.tolerances,
        })
    }
}

/// Builds the type reduction at base good `y0` (default: the null good).
pub fn reduce_types(problem: &ScreeningProblem, d: &DiscreteProblem, y0: Option<usize>) -> Result<TypeReduction, ReductionError> {
    let (m, n) = (problem.m, problem.n);
    if m <= n {
        return Err(ReductionError::TypeDims { m, n });
    }
    let Payoff::Function(pref) = &problem.payoff else {
        return Err(ReductionError::Tabulated);
    };
    let j0 = y0.unwrap_or(d.phi);
    if j0 >= d.n_goods() {
        return Err(ReductionError::Base { index: j0, len: d.n_goods() });
    }
    if check_level_independence(problem, d, Side::Types).verdict == Verdict::Fail {
        return Err(ReductionError::LevelDependence("goods"));
    }
    let tol = d.tolerances;
    let yb = d.goods.point(j0);
    let images = par::try_map_indexed(d.n_types(), |i| pref.grad_y(d.types.point(i), yb).map(|g| g.as_slice().to_vec()))?;
    let c = cluster(&images, tol.cluster_tol);
    let reps: Vec<usize> = c.clusters.iter().map(|m| m[0]).collect();

    let (gap, a, b) = quotient_gap(&c, &reps, |i| (0..d.n_goods()).map(|j| d.b(i, j) - d.b(i, j0)).collect());
    if gap > tol.convex_tol {
        return Err(ReductionError::Gap { gap, a, b });
    }
    let warning = nearest_foreign_pair(&images, &c, tol.cluster_tol, 3.0 * tol.cluster_tol)
        .map(|(p, q, dist)| format!("types {p} and {q} fall in different clusters only {dist:e} apart; refine or shrink cluster_tol"));

    let weights: Vec<f64> = c.clusters.iter().map(|m| par::neumaier_sum(m.iter().map(|&i| d.weights[i]))).collect();
    let effective_types: Vec<Vec<f64>> = reps.iter().map(|&r| images[r].clone()).collect();
    let payoff: Vec<f64> = reps.iter().flat_map(|&r| (0..d.n_goods()).map(move |j| d.b(r, j) - d.b(r, j0))).collect();
    let radius = link_radius(&images, &d.types);
    let topology = if radius > 0.0 { Topology::Scattered { link_radius: radius } } else { Topology::Discrete };
    let types = PointSet::from_points(n, &effective_types, topology)?;
    let eff = DiscreteProblem::new(types, weights.clone(), d.goods.clone(), d.costs.clone(), d.phi, payoff, tol)?;

    let base = d.types.point(d.types.centroid_index()).to_vec();
    let section = TypeSection::new(pref.clone(), yb.to_vec(), base, tol).ok();

    Ok(TypeReduction {
        base_good: j0,
        labels: c.labels,
        clusters: c.clusters,
        effective_types,
        weights,
        representatives: reps,
        gap,
        warning,
        problem: eff,
        section,
    })
}
