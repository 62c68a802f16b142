//! Sampled type and good spaces, and the discrete problem built from them.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::Expr;
use crate::par;
use crate::preference::Preference;

/// Largest lattice `build_grid` will produce.
pub const MAX_GRID_POINTS: u128 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("axis {axis}: lower bound must be below upper bound")]
    Bounds { axis: usize },
    #[error("axis {axis}: resolution must be at least 2")]
    Resolution { axis: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("grid of {0} points exceeds the 10^7 point limit")]
    TooLarge(u128),
    #[error("domain has no points")]
    Empty,
    #[error("{what} is not finite at sample {index}: {detail}")]
    NonFinite { what: &'static str, index: usize, detail: String },
    #[error("density is negative at type {index} (value {value})")]
    NegativeDensity { index: usize, value: f64 },
    #[error("null good {0:?} is not one of the listed goods")]
    NullGoodMissing(Vec<f64>),
    #[error("{what} has {got} entries, expected {expected}")]
    TableShape { what: &'static str, expected: usize, got: usize },
    #[error("weights must be finite and nonnegative (index {0})")]
    BadWeight(usize),
    #[error("invalid tolerance set: {0}")]
    Tolerance(String),
}

/// Axis-aligned box with a lattice resolution per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
    resolution: Vec<usize>,
}

impl GridBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, resolution: Vec<usize>) -> Result<Self, DomainError> {
        if lower.len() != upper.len() || lower.len() != resolution.len() {
            return Err(DomainError::Dimension { expected: lower.len(), got: upper.len().max(resolution.len()) });
        }
        if lower.is_empty() {
            return Err(DomainError::Empty);
        }
        for axis in 0..lower.len() {
            if !(lower[axis] < upper[axis]) || !lower[axis].is_finite() || !upper[axis].is_finite() {
                return Err(DomainError::Bounds { axis });
            }
            if resolution[axis] < 2 {
                return Err(DomainError::Resolution { axis });
            }
        }
        Ok(GridBox { lower, upper, resolution })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn resolution(&self) -> &[usize] {
        &self.resolution
    }
}

/// Neighbour structure of a point set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Topology {
    /// Tensor lattice, last axis varying fastest. Neighbours are king moves.
    Lattice { shape: Vec<usize> },
    /// Points closer than `link_radius` are neighbours.
    Scattered { link_radius: f64 },
    /// Isolated points.
    Discrete,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    dim: usize,
    coords: Vec<f64>,
    topology: Topology,
}

impl PointSet {
    pub fn new(dim: usize, coords: Vec<f64>, topology: Topology) -> Self {
        assert!(dim > 0 && coords.len() % dim == 0, "coordinate buffer does not match dimension");
        PointSet { dim, coords, topology }
    }

    pub fn from_points(dim: usize, points: &[Vec<f64>], topology: Topology) -> Result<Self, DomainError> {
        if points.is_empty() {
            return Err(DomainError::Empty);
        }
        let mut coords = Vec::with_capacity(points.len() * dim);
        for p in points {
            if p.len() != dim {
                return Err(DomainError::Dimension { expected: dim, got: p.len() });
            }
            coords.extend_from_slice(p);
        }
        Ok(PointSet { dim, coords, topology })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn to_vecs(&self) -> Vec<Vec<f64>> {
        self.iter().map(<[f64]>::to_vec).collect()
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn neighbours(&self, i: usize) -> Vec<usize> {
        match &self.topology {
            Topology::Lattice { shape } => lattice_neighbours(shape, i),
            Topology::Scattered { link_radius } => {
                let p = self.point(i);
                (0..self.len())
                    .filter(|&k| k != i && distance(p, self.point(k)) <= *link_radius)
                    .collect()
            }
            Topology::Discrete => Vec::new(),
        }
    }

    pub fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![f64::INFINITY; self.dim];
        let mut hi = vec![f64::NEG_INFINITY; self.dim];
        for p in self.iter() {
            for a in 0..self.dim {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        (lo, hi)
    }

    /// Length of the bounding-box diagonal.
    pub fn diameter(&self) -> f64 {
        let (lo, hi) = self.bounds();
        distance(&lo, &hi)
    }

    /// Index of the point nearest to `p`; the lowest index wins ties.
    pub fn nearest(&self, p: &[f64]) -> usize {
        let mut best = (0, f64::INFINITY);
        for (i, q) in self.iter().enumerate() {
            let d = distance(p, q);
            if d < best.1 {
                best = (i, d);
            }
        }
        best.0
    }

    /// Index of the point nearest to the arithmetic mean of all points.
    pub fn centroid_index(&self) -> usize {
        let n = self.len() as f64;
        let mut c = vec![0.0; self.dim];
        for p in self.iter() {
            for a in 0..self.dim {
                c[a] += p[a] / n;
            }
        }
        self.nearest(&c)
    }
}

pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn lattice_neighbours(shape: &[usize], i: usize) -> Vec<usize> {
    let d = shape.len();
    let mut idx = vec![0usize; d];
    let mut rest = i;
    for a in (0..d).rev() {
        idx[a] = rest % shape[a];
        rest /= shape[a];
    }
    let mut out = Vec::new();
    for code in 0..3usize.pow(d as u32) {
        let mut c = code;
        let mut flat = 0usize;
        let mut ok = true;
        let mut centre = true;
        for a in 0..d {
            let off = (c % 3) as isize - 1;
            c /= 3;
            centre &= off == 0;
            let k = idx[a] as isize + off;
            if k < 0 || k >= shape[a] as isize {
                ok = false;
                break;
            }
            flat = flat * shape[a] + k as usize;
        }
        // `flat` was accumulated with the offsets in axis order, matching the layout.
        if ok && !centre {
            out.push(flat);
        }
    }
    out.sort_unstable();
    out
}

/// Lattice points plus trapezoid cell volumes.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSample {
    pub points: PointSet,
    pub volumes: Vec<f64>,
}

/// Regular lattice over `b` including both endpoints on each axis.
pub fn build_grid(b: &GridBox) -> Result<GridSample, DomainError> {
    let total: u128 = b.resolution.iter().map(|&r| r as u128).product();
    if total > MAX_GRID_POINTS {
        return Err(DomainError::TooLarge(total));
    }
    let total = total as usize;
    let d = b.dim();
    let axes: Vec<(Vec<f64>, Vec<f64>)> = (0..d)
        .map(|a| {
            let r = b.resolution[a];
            let h = (b.upper[a] - b.lower[a]) / (r - 1) as f64;
            let pts = (0..r)
                .map(|k| if k == r - 1 { b.upper[a] } else { b.lower[a] + k as f64 * h })
                .collect();
            let vols = (0..r).map(|k| if k == 0 || k == r - 1 { h / 2.0 } else { h }).collect();
            (pts, vols)
        })
        .collect();
    let mut coords = Vec::with_capacity(total * d);
    let mut volumes = Vec::with_capacity(total);
    let mut idx = vec![0usize; d];
    for _ in 0..total {
        let mut vol = 1.0;
        for a in 0..d {
            coords.push(axes[a].0[idx[a]]);
            vol *= axes[a].1[idx[a]];
        }
        volumes.push(vol);
        for a in (0..d).rev() {
            idx[a] += 1;
            if idx[a] < b.resolution[a] {
                break;
            }
            idx[a] = 0;
        }
    }
    Ok(GridSample {
        points: PointSet::new(d, coords, Topology::Lattice { shape: b.resolution.clone() }),
        volumes,
    })
}

/// Numerical knobs shared by every checker and solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToleranceSet {
    /// Finite-difference step for fourth-order stencils, relative to the
    /// domain diameter.
    pub fd_step: f64,
    pub cluster_tol: f64,
    pub convex_tol: f64,
    pub rank_tol: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub strict_margin: f64,
}

impl Default for ToleranceSet {
    fn default() -> Self {
        ToleranceSet {
            fd_step: 1e-2,
            cluster_tol: 1e-6,
            convex_tol: 1e-9,
            rank_tol: 1e-8,
            newton_tol: 1e-12,
            newton_max_iter: 50,
            strict_margin: 1e-8,
        }
    }
}

impl ToleranceSet {
    pub fn validate(&self) -> Result<(), DomainError> {
        let named = [
            ("fd_step", self.fd_step),
            ("cluster_tol", self.cluster_tol),
            ("convex_tol", self.convex_tol),
            ("rank_tol", self.rank_tol),
            ("newton_tol", self.newton_tol),
            ("strict_margin", self.strict_margin),
        ];
        for (name, v) in named {
            if !(v > 0.0 && v.is_finite()) {
                return Err(DomainError::Tolerance(format!("{name} must be positive")));
            }
        }
        if self.newton_max_iter == 0 {
            return Err(DomainError::Tolerance("newton_max_iter must be positive".into()));
        }
        if self.cluster_tol <= self.newton_tol {
            return Err(DomainError::Tolerance("cluster_tol must exceed newton_tol".into()));
        }
        Ok(())
    }
}

/// How a type or good space is sampled.
#[derive(Debug, Clone, PartialEq)]
pub enum DomainSpec {
    Grid(GridBox),
    Points { points: Vec<Vec<f64>>, link_radius: Option<f64> },
}

impl DomainSpec {
    pub fn dim(&self) -> usize {
        match self {
            DomainSpec::Grid(b) => b.dim(),
            DomainSpec::Points { points, .. } => points.first().map_or(0, Vec::len),
        }
    }

    /// Sampled points, with cell volumes for lattices.
    pub fn sample(&self) -> Result<(PointSet, Option<Vec<f64>>), DomainError> {
        match self {
            DomainSpec::Grid(b) => {
                let g = build_grid(b)?;
                Ok((g.points, Some(g.volumes)))
            }
            DomainSpec::Points { points, link_radius } => {
                let topology = match link_radius {
                    Some(r) => Topology::Scattered { link_radius: *r },
                    None => Topology::Discrete,
                };
                Ok((PointSet::from_points(self.dim(), points, topology)?, None))
            }
        }
    }
}

/// A scalar quantity given either as an expression or tabulated per sample.
#[derive(Debug, Clone, PartialEq)]
pub enum Field {
    Expr(Expr),
    Table(Vec<f64>),
}

#[derive(Debug, Clone)]
pub enum Payoff {
    Function(Arc<dyn Preference>),
    /// Row-major `types × goods` values.
    Table(Vec<f64>),
}

impl Payoff {
    pub fn preference(&self) -> Option<&dyn Preference> {
        match self {
            Payoff::Function(p) => Some(p.as_ref()),
            Payoff::Table(_) => None,
        }
    }
}

/// Continuous-level statement of a screening problem.
#[derive(Debug, Clone)]
pub struct ScreeningProblem {
    pub m: usize,
    pub n: usize,
    pub domain_x: DomainSpec,
    pub domain_y: DomainSpec,
    pub payoff: Payoff,
    /// Cost of goods; a table is indexed like the sampled goods.
    pub cost: Field,
    /// Type density; a table holds the weights directly.
    pub density: Field,
    pub null_good: Vec<f64>,
    pub tolerances: ToleranceSet,
}

/// Sampled problem data. `payoff[i * n_goods + j] = b(x_i, y_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteProblem {
    pub types: PointSet,
    pub weights: Vec<f64>,
    pub goods: PointSet,
    pub costs: Vec<f64>,
    pub phi: usize,
    payoff: Vec<f64>,
    pub tolerances: ToleranceSet,
}

impl DiscreteProblem {
    pub fn new(
        types: PointSet,
        weights: Vec<f64>,
        goods: PointSet,
        costs: Vec<f64>,
        phi: usize,
        payoff: Vec<f64>,
        tolerances: ToleranceSet,
    ) -> Result<Self, DomainError> {
        let (nx, ny) = (types.len(), goods.len());
        if nx == 0 || ny == 0 {
            return Err(DomainError::Empty);
        }
        if weights.len() != nx {
            return Err(DomainError::TableShape { what: "weights", expected: nx, got: weights.len() });
        }
        if costs.len() != ny {
            return Err(DomainError::TableShape { what: "costs", expected: ny, got: costs.len() });
        }
        if payoff.len() != nx * ny {
            return Err(DomainError::TableShape { what: "payoff", expected: nx * ny, got: payoff.len() });
        }
        if phi >= ny {
            return Err(DomainError::NullGoodMissing(vec![phi as f64]));
        }
        if let Some(i) = weights.iter().position(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(DomainError::BadWeight(i));
        }
        if let Some(j) = costs.iter().position(|c| !c.is_finite()) {
            return Err(DomainError::NonFinite { what: "cost", index: j, detail: "table entry".into() });
        }
        if let Some(k) = payoff.iter().position(|b| !b.is_finite()) {
            return Err(DomainError::NonFinite { what: "payoff", index: k, detail: "table entry".into() });
        }
        tolerances.validate()?;
        Ok(DiscreteProblem { types, weights, goods, costs, phi, payoff, tolerances })
    }

    pub fn n_types(&self) -> usize {
        self.types.len()
    }

    pub fn n_goods(&self) -> usize {
        self.goods.len()
    }

    #[inline]
    pub fn b(&self, i: usize, j: usize) -> f64 {
        self.payoff[i * self.n_goods() + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.n_goods();
        &self.payoff[i * n..(i + 1) * n]
    }

    pub fn payoff(&self) -> &[f64] {
        &self.payoff
    }

    pub fn total_mass(&self) -> f64 {
        par::neumaier_sum(self.weights.iter().copied())
    }

    /// `(min, max)` over the payoff matrix.
    pub fn payoff_range(&self) -> (f64, f64) {
        self.payoff
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &b| (lo.min(b), hi.max(b)))
    }

    /// Participation floor `u_phi(x_i) = B[i][phi] - c_phi`.
    pub fn null_utility(&self, i: usize) -> f64 {
        self.b(i, self.phi) - self.costs[self.phi]
    }

    /// Total mass times payoff range; the natural unit for profit tolerances.
    pub fn profit_scale(&self) -> f64 {
        let (lo, hi) = self.payoff_range();
        let s = self.total_mass() * (hi - lo);
        if s > 0.0 {
            s
        } else {
            1.0
        }
    }
}

fn eval_field(field: &Field, what: &'static str, pts: &PointSet, on_types: bool) -> Result<Vec<f64>, DomainError> {
    match field {
        Field::Table(t) => {
            if t.len() != pts.len() {
                return Err(DomainError::TableShape { what, expected: pts.len(), got: t.len() });
            }
            Ok(t.clone())
        }
        Field::Expr(e) => par::try_map_indexed(pts.len(), |k| {
            let p = pts.point(k);
            let v = if on_types { e.eval(Some(p), None) } else { e.eval(None, Some(p)) };
            v.map_err(|err| DomainError::NonFinite { what, index: k, detail: err.to_string() })
        }),
    }
}

/// Samples `problem` onto its grids and tabulates weights, costs and payoffs.
pub fn assemble(problem: &ScreeningProblem) -> Result<DiscreteProblem, DomainError> {
    problem.tolerances.validate()?;
    let (types, volumes) = problem.domain_x.sample()?;
    let (goods, _) = problem.domain_y.sample()?;
    if types.dim() != problem.m {
        return Err(DomainError::Dimension { expected: problem.m, got: types.dim() });
    }
    if goods.dim() != problem.n {
        return Err(DomainError::Dimension { expected: problem.n, got: goods.dim() });
    }
    if problem.null_good.len() != problem.n {
        return Err(DomainError::Dimension { expected: problem.n, got: problem.null_good.len() });
    }

    let weights = match &problem.density {
        Field::Table(_) => eval_field(&problem.density, "weight", &types, true)?,
        Field::Expr(_) => {
            let dens = eval_field(&problem.density, "density", &types, true)?;
            if let Some((index, &value)) = dens.iter().enumerate().find(|(_, d)| **d < 0.0) {
                return Err(DomainError::NegativeDensity { index, value });
            }
            match volumes {
                Some(v) => dens.iter().zip(&v).map(|(d, v)| d * v).collect(),
                None => dens,
            }
        }
    };
    if let Some(i) = weights.iter().position(|w| !(*w >= 0.0)) {
        return Err(DomainError::BadWeight(i));
    }
    let costs = eval_field(&problem.cost, "cost", &goods, false)?;

    let phi = match &problem.domain_y {
        DomainSpec::Grid(_) => goods.nearest(&problem.null_good),
        DomainSpec::Points { .. } => goods
            .iter()
            .position(|p| p == problem.null_good.as_slice())
            .ok_or_else(|| DomainError::NullGoodMissing(problem.null_good.clone()))?,
    };

    let (nx, ny) = (types.len(), goods.len());
    let payoff = match &problem.payoff {
        Payoff::Table(t) => {
            if t.len() != nx * ny {
                return Err(DomainError::TableShape { what: "payoff", expected: nx * ny, got: t.len() });
            }
            t.clone()
        }
        Payoff::Function(pref) => {
            let rows = par::try_map_indexed(nx, |i| {
                let x = types.point(i);
                (0..ny)
                    .map(|j| {
                        pref.value(x, goods.point(j)).map_err(|e| DomainError::NonFinite {
                            what: "b",
                            index: i * ny + j,
                            detail: e.to_string(),
                        })
                    })
                    .collect::<Result<Vec<f64>, _>>()
            })?;
            rows.concat()
        }
    };
    DiscreteProblem::new(types, weights, goods, costs, phi, payoff, problem.tolerances)
}
