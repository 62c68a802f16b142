//! Grid verification of the regularity conditions (B0) to (B3u).
//!
//! Every check returns a [`Check`] with a verdict and, on failure, witnesses
//! that can be re-evaluated on their own. Checks that sample randomly take
//! an explicit seed.

mod b0;
mod b1;
mod b2;
mod b3;
mod linearity;
mod segment;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::domain::{DiscreteProblem, PointSet, ScreeningProblem};
use crate::preference::{PrefError, Preference};

pub use b0::check_b0;
pub use b1::check_b1;
pub use b2::check_b2_side;
pub use b3::{check_b3, fourth_derivative_stencil, stencil_sample, B3Report, B3Sample, StencilValue};
pub use linearity::{check_b_linearity, check_b_linearity_all, check_level_independence, level_set, LevelSet};
pub use segment::{solve_b_segment, BSegment, SegmentError, SegmentKind, STENCIL_OFFSETS};

/// Witness lists are truncated to this many entries.
pub const MAX_WITNESSES: usize = 8;
/// Base points sampled by the image-based checks.
pub const MAX_BASES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    NotApplicable,
    Inconclusive,
}

impl Verdict {
    pub fn is_fail(self) -> bool {
        self == Verdict::Fail
    }
}

/// Which space a check looks at.
///
/// For (B2), `Goods` asks whether `Y` is b-convex (images `D_x b(x0, Y)`),
/// `Types` whether `X` is (images `D_y b(X, y0)`). For b-linearity and level
/// sets, `Types` is the `m > n` situation where types are reduced and
/// `Goods` the `n > m` one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Types,
    Goods,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    Derivative { x: Vec<f64>, y: Vec<f64>, partial: String, detail: String },
    Rank { x: Vec<f64>, y: Vec<f64>, singular_value: f64 },
    Collision { base: Vec<f64>, a: Vec<f64>, b: Vec<f64>, image_distance: f64 },
    Disconnected { base: Vec<f64>, members: usize, components: usize },
    Midpoint { base: Vec<f64>, midpoint: Vec<f64>, distance: f64, allowance: f64 },
    Linearity { base: Vec<f64>, rank: usize, singular_values: Vec<f64> },
    LevelSets { base: Vec<f64>, a: Vec<f64>, b: Vec<f64>, only_in_a: usize, only_in_b: usize },
    Evaluation { x: Vec<f64>, y: Vec<f64>, detail: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub witnesses: Vec<Witness>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Check {
    pub fn pass() -> Self {
        Check { verdict: Verdict::Pass, witnesses: Vec::new(), note: None }
    }

    pub fn not_applicable(note: impl Into<String>) -> Self {
        Check { verdict: Verdict::NotApplicable, witnesses: Vec::new(), note: Some(note.into()) }
    }

    /// Pass when `witnesses` is empty, otherwise fail.
    pub fn from_witnesses(mut witnesses: Vec<Witness>) -> Self {
        witnesses.truncate(MAX_WITNESSES);
        let verdict = if witnesses.is_empty() { Verdict::Pass } else { Verdict::Fail };
        Check { verdict, witnesses, note: None }
    }

    fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    fn evaluation_failure(x: &[f64], y: &[f64], err: &PrefError) -> Self {
        Check {
            verdict: Verdict::Inconclusive,
            witnesses: vec![Witness::Evaluation { x: x.to_vec(), y: y.to_vec(), detail: err.to_string() }],
            note: Some("derivatives could not be evaluated; see (B0)".into()),
        }
    }
}

/// Options for [`check_all`].
#[derive(Debug, Clone, Copy)]
pub struct CheckOptions {
    pub seed: u64,
    pub b3_samples: usize,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions { seed: 0, b3_samples: 64 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub b0: Check,
    pub b1: Check,
    pub b2_goods: Check,
    pub b2_types: Check,
    pub b_linearity: Check,
    pub level_independence: Check,
    pub b3: B3Report,
    pub seed: u64,
    pub grid: GridInfo,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridInfo {
    pub types: usize,
    pub goods: usize,
}

impl ConditionReport {
    /// Verdicts that count as failures. (B3u) only counts when `strict`.
    pub fn failures(&self, strict: bool) -> Vec<&'static str> {
        let mut out = Vec::new();
        let named = [
            ("b0", self.b0.verdict),
            ("b1", self.b1.verdict),
            ("b2_goods", self.b2_goods.verdict),
            ("b2_types", self.b2_types.verdict),
            ("b_linearity", self.b_linearity.verdict),
            ("level_independence", self.level_independence.verdict),
            ("b3", self.b3.verdict),
        ];
        for (name, v) in named {
            if v.is_fail() {
                out.push(name);
            }
        }
        if strict && self.b3.strict_verdict.is_fail() {
            out.push("b3u");
        }
        out
    }
}

/// Runs every applicable check.
pub fn check_all(problem: &ScreeningProblem, d: &DiscreteProblem, opts: CheckOptions) -> ConditionReport {
    let b0 = check_b0(problem, d);
    let b1 = check_b1(problem, d);
    let b2_goods = check_b2_side(problem, d, Side::Goods, opts.seed);
    let b2_types = check_b2_side(problem, d, Side::Types, opts.seed);
    let (b_linearity, level_independence) = if problem.m > problem.n {
        (check_b_linearity_all(problem, d, Side::Types), check_level_independence(problem, d, Side::Types))
    } else if problem.n > problem.m {
        (check_b_linearity_all(problem, d, Side::Goods), check_level_independence(problem, d, Side::Goods))
    } else {
        let na = || Check::not_applicable("dimensions are equal");
        (na(), na())
    };
    let b3 = if b1.verdict == Verdict::Pass {
        check_b3(problem, d, opts.b3_samples, opts.seed)
    } else {
        B3Report::not_applicable("(B1) did not pass", opts.seed)
    };
    ConditionReport {
        b0,
        b1,
        b2_goods,
        b2_types,
        b_linearity,
        level_independence,
        b3,
        seed: opts.seed,
        grid: GridInfo { types: d.n_types(), goods: d.n_goods() },
    }
}

/// Up to `cap` indices spread evenly over `0..n`, always including both ends.
pub(crate) fn strided(n: usize, cap: usize) -> Vec<usize> {
    if n <= cap {
        return (0..n).collect();
    }
    let mut v: Vec<usize> = (0..cap).map(|k| k * (n - 1) / (cap - 1)).collect();
    v.dedup();
    v
}

/// `D_x b(x, y_j)` for every good.
pub(crate) fn images_x(pref: &dyn Preference, x: &[f64], goods: &PointSet) -> Result<Vec<Vec<f64>>, (usize, PrefError)> {
    goods
        .iter()
        .enumerate()
        .map(|(j, y)| pref.grad_x(x, y).map(|g| g.as_slice().to_vec()).map_err(|e| (j, e)))
        .collect()
}

/// `D_y b(x_i, y)` for every type.
pub(crate) fn images_y(pref: &dyn Preference, y: &[f64], types: &PointSet) -> Result<Vec<Vec<f64>>, (usize, PrefError)> {
    types
        .iter()
        .enumerate()
        .map(|(i, x)| pref.grad_y(x, y).map(|g| g.as_slice().to_vec()).map_err(|e| (i, e)))
        .collect()
}

/// Bounding-box diagonal of a point cloud.
pub(crate) fn cloud_diameter(points: &[Vec<f64>]) -> f64 {
    let dim = points.first().map_or(0, Vec::len);
    (0..dim)
        .map(|a| {
            let (lo, hi) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p[a]), hi.max(p[a])));
            (hi - lo) * (hi - lo)
        })
        .sum::<f64>()
        .sqrt()
}

/// Singular values of the centered point cloud, largest first.
pub(crate) fn spread_singular_values(points: &[Vec<f64>]) -> Vec<f64> {
    let n = points.len();
    let dim = points.first().map_or(0, Vec::len);
    if n == 0 || dim == 0 {
        return Vec::new();
    }
    let mut mean = vec![0.0; dim];
    for p in points {
        for a in 0..dim {
            mean[a] += p[a] / n as f64;
        }
    }
    let m = DMatrix::from_fn(n, dim, |r, c| points[r][c] - mean[c]);
    let mut sv: Vec<f64> = m.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Number of singular values above `rel_tol` times the largest.
pub(crate) fn numerical_rank(sv: &[f64], rel_tol: f64) -> usize {
    let top = sv.first().copied().unwrap_or(0.0);
    if top <= f64::MIN_POSITIVE {
        return 0;
    }
    sv.iter().filter(|s| **s > rel_tol * top).count()
}

/// Principal-axis coordinates of `points` in their top `k` directions.
pub(crate) fn project_principal(points: &[Vec<f64>], k: usize) -> Vec<Vec<f64>> {
    let n = points.len();
    let dim = points.first().map_or(0, Vec::len);
    if dim <= k || n == 0 {
        return points.to_vec();
    }
    let mut mean = vec![0.0; dim];
    for p in points {
        for a in 0..dim {
            mean[a] += p[a] / n as f64;
        }
    }
    let m = DMatrix::from_fn(n, dim, |r, c| points[r][c] - mean[c]);
    let svd = m.clone().svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    (0..n)
        .map(|r| {
            order[..k]
                .iter()
                .map(|&s| (0..dim).map(|c| m[(r, c)] * vt[(s, c)]).sum())
                .collect()
        })
        .collect()
}
