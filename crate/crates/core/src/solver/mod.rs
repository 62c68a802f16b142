//! Profit maximization over price schedules pinned at the null good.

mod brute;
mod local;
mod profile;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::cluster;
use crate::domain::DiscreteProblem;
use crate::transform::{compute_profit, price_to_utility, Price, PriceSchedule, UtilityProfile};

pub use brute::{solve_bruteforce, MAX_FREE_GOODS, MAX_SCHEDULES};
pub use local::solve_localsearch;
pub use profile::{Incumbent, LineProfile, Window};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("brute force supports at most {max} free goods, got {got}")]
    TooManyGoods { got: usize, max: usize },
    #[error("brute force would enumerate {count:e} schedules (limit {limit:e})")]
    Budget { count: f64, limit: f64 },
    #[error("price step must be positive and finite")]
    Step,
    #[error("the null good is pinned at cost and cannot be swept")]
    NullGood,
    #[error("good index {index} out of range ({len} goods)")]
    Index { index: usize, len: usize },
    #[error("invalid price range [{lo}, {hi}] with {samples} samples")]
    Range { lo: f64, hi: f64, samples: usize },
    #[error("start schedule is for {got} goods, problem has {expected}")]
    Start { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Brute,
    Local,
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Price grid step for brute force.
    pub step: f64,
    /// Upper price bound for every good; default `c_j + (max B - min B)`.
    pub v_max: Option<f64>,
    /// Near-optimum slack; default `1e-6` times the profit scale.
    pub opt_tol: Option<f64>,
    pub starts: usize,
    pub seed: u64,
    pub max_sweeps: usize,
    /// Additional local-search starting points, tried after the random ones.
    pub extra_starts: Vec<PriceSchedule>,
    /// Polish brute-force optima between type breakpoints.
    pub refine: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            step: 1e-2,
            v_max: None,
            opt_tol: None,
            starts: 16,
            seed: 0,
            max_sweeps: 200,
            extra_starts: Vec::new(),
            refine: true,
        }
    }
}

impl SolveOptions {
    pub fn opt_tol(&self, d: &DiscreteProblem) -> f64 {
        self.opt_tol.unwrap_or(1e-6 * d.profit_scale())
    }

    /// Price box `[c_j, v_max_j]` per good.
    pub fn bounds(&self, d: &DiscreteProblem) -> Vec<(f64, f64)> {
        let (lo, hi) = d.payoff_range();
        d.costs
            .iter()
            .map(|&c| {
                let top = self.v_max.unwrap_or(c + (hi - lo));
                (c, top.max(c))
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Uniqueness {
    Unique,
    Multiple,
}

/// One cluster of near-optimal schedules.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Optimum {
    pub schedule: PriceSchedule,
    pub profit: f64,
    /// Best unrefined member and its profit.
    pub grid_schedule: PriceSchedule,
    pub grid_profit: f64,
    pub members: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveResult {
    pub method: Method,
    pub best_schedule: PriceSchedule,
    pub best_profit: f64,
    pub best_utility: UtilityProfile,
    pub all_optima: Vec<Optimum>,
    pub uniqueness: Uniqueness,
    /// Best profit per start (local search) or per outer slice (brute force).
    pub trace: Vec<f64>,
    pub seed: u64,
    pub iterations: u64,
    pub opt_tol: f64,
    /// Near-optimal candidates were dropped to bound memory.
    pub truncated: bool,
}

impl SolveResult {
    fn assemble(
        d: &DiscreteProblem,
        method: Method,
        best: PriceSchedule,
        all_optima: Vec<Optimum>,
        trace: Vec<f64>,
        opts: &SolveOptions,
        iterations: u64,
        truncated: bool,
    ) -> Self {
        let best_utility = price_to_utility(d, &best);
        let uniqueness = if all_optima.len() > 1 { Uniqueness::Multiple } else { Uniqueness::Unique };
        SolveResult {
            method,
            best_profit: compute_profit(d, &best),
            best_schedule: best,
            best_utility,
            all_optima,
            uniqueness,
            trace,
            seed: opts.seed,
            iterations,
            opt_tol: opts.opt_tol(d),
            truncated,
        }
    }
}

/// Goods other than the null good.
pub(crate) fn free_goods(d: &DiscreteProblem) -> Vec<usize> {
    (0..d.n_goods()).filter(|&j| j != d.phi).collect()
}

/// Lexicographic order on offered prices, `NotOffered` last.
pub(crate) fn lex_cmp(a: &PriceSchedule, b: &PriceSchedule) -> std::cmp::Ordering {
    let key = |p: &Price| p.value().unwrap_or(f64::INFINITY);
    a.prices().iter().map(key).zip(b.prices().iter().map(key)).map(|(x, y)| x.total_cmp(&y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
}

/// Groups schedules whose free prices lie within `link` of each other
/// (single linkage). Each group is reported through its best member.
pub(crate) fn group_optima(
    candidates: Vec<(PriceSchedule, f64)>,
    free: &[usize],
    link: f64,
) -> Vec<(PriceSchedule, f64, usize)> {
    let points: Vec<Vec<f64>> = candidates
        .iter()
        .map(|(s, _)| free.iter().map(|&j| s.get(j).value().unwrap_or(f64::MAX / 4.0)).collect())
        .collect();
    let c = cluster(&points, link.max(f64::MIN_POSITIVE));
    let mut out: Vec<(PriceSchedule, f64, usize)> = c
        .clusters
        .iter()
        .map(|members| {
            let mut best = members[0];
            for &k in &members[1..] {
                let (pk, pb) = (candidates[k].1, candidates[best].1);
                if pk > pb || (pk == pb && lex_cmp(&candidates[k].0, &candidates[best].0).is_lt()) {
                    best = k;
                }
            }
            (candidates[best].0.clone(), candidates[best].1, members.len())
        })
        .collect();
    out.sort_by(|a, b| lex_cmp(&a.0, &b.0));
    out
}

/// Profit against one price, the others held at `v`.
pub fn profit_curve(
    d: &DiscreteProblem,
    v: &PriceSchedule,
    good: usize,
    range: (f64, f64),
    samples: usize,
) -> Result<Vec<(f64, f64)>, SolverError> {
    if good >= d.n_goods() {
        return Err(SolverError::Index { index: good, len: d.n_goods() });
    }
    if good == d.phi {
        return Err(SolverError::NullGood);
    }
    let (lo, hi) = range;
    if samples < 2 || !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(SolverError::Range { lo, hi, samples });
    }
    let prof = LineProfile::new(d, v, good);
    Ok(crate::par::map_indexed(samples, |k| {
        let p = lo + (hi - lo) * k as f64 / (samples - 1) as f64;
        (p, prof.profit(p))
    }))
}

/// CSV text for a curve, header `price,profit`.
pub fn curve_csv(curve: &[(f64, f64)]) -> String {
    let mut s = String::from("price,profit\n");
    for (p, v) in curve {
        s.push_str(&format!("{p:?},{v:?}\n"));
    }
    s
}
