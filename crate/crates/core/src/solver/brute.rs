use super::{free_goods, group_optima, LineProfile, Method, Optimum, SolveOptions, SolveResult, SolverError};
use crate::domain::DiscreteProblem;
use crate::par;
use crate::transform::{compute_profit, Price, PriceSchedule};

pub const MAX_FREE_GOODS: usize = 3;
pub const MAX_SCHEDULES: f64 = 1e8;
/// Cap on near-optimal grid schedules kept for clustering.
const MAX_NEAR: usize = 1_000_000;
/// Line values evaluated per task when there is a single free good.
const CHUNK: usize = 512;
/// Optima closer than this fraction of the price range are merged.
const LINK_FRACTION: f64 = 0.01;
/// Half-width of the refinement window as a fraction of the price range.
const REFINE_FRACTION: f64 = 0.02;

struct Grid {
    free: Vec<usize>,
    lo: Vec<f64>,
    size: Vec<usize>,
    step: f64,
}

impl Grid {
    fn price(&self, a: usize, k: usize) -> f64 {
        self.lo[a] + k as f64 * self.step
    }

    /// Mixed-radix digits of `flat`, last free good fastest.
    fn digits(&self, mut flat: u64) -> Vec<usize> {
        let mut out = vec![0; self.free.len()];
        for a in (0..self.free.len()).rev() {
            out[a] = (flat % self.size[a] as u64) as usize;
            flat /= self.size[a] as u64;
        }
        out
    }

    fn schedule(&self, d: &DiscreteProblem, digits: &[usize]) -> PriceSchedule {
        let mut v = d.costs.iter().map(|&c| Price::Offered(c)).collect::<Vec<_>>();
        for (a, &j) in self.free.iter().enumerate() {
            v[j] = Price::Offered(self.price(a, digits[a]));
        }
        PriceSchedule::new(d, v).expect("grid schedules are pinned")
    }
}

/// Best and near-best `(flat index, profit)` seen by one task.
#[derive(Default)]
struct Slice {
    best: Option<(u64, f64)>,
    near: Vec<(u64, f64)>,
    truncated: bool,
}

impl Slice {
    fn push(&mut self, flat: u64, profit: f64, tol: f64) {
        if self.best.is_none_or(|(_, b)| profit > b) {
            self.best = Some((flat, profit));
            self.near.retain(|e| e.1 >= profit - tol);
        }
        if profit >= self.best.map_or(profit, |b| b.1) - tol {
            if self.near.len() < MAX_NEAR {
                self.near.push((flat, profit));
            } else {
                self.truncated = true;
            }
        }
    }
}

/// Exhaustive search over prices `c_j + k * step` up to the upper bound for
/// every free good.
pub fn solve_bruteforce(d: &DiscreteProblem, opts: &SolveOptions) -> Result<SolveResult, SolverError> {
    if !(opts.step > 0.0 && opts.step.is_finite()) {
        return Err(SolverError::Step);
    }
    let free = free_goods(d);
    if free.len() > MAX_FREE_GOODS {
        return Err(SolverError::TooManyGoods { got: free.len(), max: MAX_FREE_GOODS });
    }
    let bounds = opts.bounds(d);
    let tol = opts.opt_tol(d);
    if free.is_empty() {
        let v = PriceSchedule::at_cost(d);
        let p = compute_profit(d, &v);
        let opt = Optimum { schedule: v.clone(), profit: p, grid_schedule: v.clone(), grid_profit: p, members: 1 };
        return Ok(SolveResult::assemble(d, Method::Brute, v, vec![opt], vec![p], opts, 1, false));
    }
    let size: Vec<usize> = free
        .iter()
        .map(|&j| ((bounds[j].1 - bounds[j].0) / opts.step + 1e-9).floor() as usize + 1)
        .collect();
    let count: f64 = size.iter().map(|&s| s as f64).product();
    if count > MAX_SCHEDULES {
        return Err(SolverError::Budget { count, limit: MAX_SCHEDULES });
    }
    let grid = Grid { lo: free.iter().map(|&j| bounds[j].0).collect(), free: free.clone(), size, step: opts.step };

    let r = free.len();
    let line = grid.size[r - 1];
    let outer: usize = grid.size[..r - 1].iter().product();
    let slices: Vec<Slice> = if outer > 1 {
        par::map_indexed(outer, |o| {
            let mut digits = grid.digits((o * line) as u64);
            let v = grid.schedule(d, &digits);
            let prof = LineProfile::new(d, &v, free[r - 1]);
            let mut s = Slice::default();
            for k in 0..line {
                digits[r - 1] = k;
                s.push((o * line + k) as u64, prof.profit(grid.price(r - 1, k)), tol);
            }
            s
        })
    } else {
        let v = grid.schedule(d, &vec![0; r]);
        let prof = LineProfile::new(d, &v, free[0]);
        par::map_indexed(line.div_ceil(CHUNK), |c| {
            let mut s = Slice::default();
            for k in c * CHUNK..((c + 1) * CHUNK).min(line) {
                s.push(k as u64, prof.profit(grid.price(0, k)), tol);
            }
            s
        })
    };

    let trace: Vec<f64> = slices.iter().filter_map(|s| s.best.map(|b| b.1)).collect();
    let (best_flat, best_profit) = slices
        .iter()
        .filter_map(|s| s.best)
        .fold(None, |acc: Option<(u64, f64)>, b| match acc {
            Some(a) if a.1 >= b.1 => Some(a),
            _ => Some(b),
        })
        .expect("at least one schedule");
    let truncated = slices.iter().any(|s| s.truncated);
    let near: Vec<(PriceSchedule, f64)> = slices
        .into_iter()
        .flat_map(|s| s.near)
        .filter(|e| e.1 >= best_profit - tol)
        .map(|(flat, p)| (grid.schedule(d, &grid.digits(flat)), p))
        .collect();

    let range = free.iter().map(|&j| bounds[j].1 - bounds[j].0).fold(0.0, f64::max);
    let groups = group_optima(near, &free, LINK_FRACTION * range);
    let mut optima: Vec<Optimum> = groups
        .into_iter()
        .map(|(s, p, members)| {
            let (schedule, profit) = if opts.refine { refine(d, &s, &free, &bounds, range) } else { (s.clone(), p) };
            Optimum { schedule, profit, grid_schedule: s, grid_profit: p, members }
        })
        .collect();
    optima.sort_by(|a, b| super::lex_cmp(&a.grid_schedule, &b.grid_schedule));

    let mut best = grid.schedule(d, &grid.digits(best_flat));
    if let Some(o) = optima.iter().filter(|o| o.profit > best_profit).max_by(|a, b| a.profit.total_cmp(&b.profit)) {
        best = o.schedule.clone();
    }
    Ok(SolveResult::assemble(d, Method::Brute, best, optima, trace, opts, count as u64, truncated))
}

/// Vertex of the parabola through three points, if it opens downward.
fn parabola_vertex(x: [f64; 3], y: [f64; 3]) -> Option<f64> {
    let denom = (x[0] - x[1]) * (x[0] - x[2]) * (x[1] - x[2]);
    if denom == 0.0 {
        return None;
    }
    let a = (x[2] * (y[1] - y[0]) + x[1] * (y[0] - y[2]) + x[0] * (y[2] - y[1])) / denom;
    let b = (x[2] * x[2] * (y[0] - y[1]) + x[1] * x[1] * (y[2] - y[0]) + x[0] * x[0] * (y[1] - y[2])) / denom;
    (a < 0.0).then(|| -b / (2.0 * a))
}

/// One pass over the free goods. With the other prices fixed, profit in one
/// price is piecewise linear between the type breakpoints; sampling it at the
/// midpoints between breakpoints and fitting a parabola to the best three
/// recovers the maximizer of the underlying smooth curve instead of a
/// breakpoint of the sampled one.
fn refine(d: &DiscreteProblem, v: &PriceSchedule, free: &[usize], bounds: &[(f64, f64)], range: f64) -> (PriceSchedule, f64) {
    let mut v = v.clone();
    let window = REFINE_FRACTION * range;
    for &j in free {
        let p = v.get(j).value().expect("free goods are offered");
        let (lo, hi) = bounds[j];
        let (a, b) = ((p - window).max(lo), (p + window).min(hi));
        let prof = LineProfile::new(d, &v, j);
        let mut bp: Vec<f64> = (0..d.n_types())
            .filter(|&i| d.weights[i] > 0.0)
            .map(|i| prof.breakpoint(i))
            .filter(|t| t.is_finite() && *t >= a && *t <= b)
            .collect();
        bp.sort_by(f64::total_cmp);
        bp.dedup_by(|x, y| (*x - *y).abs() <= 1e-12);
        if bp.len() < 4 {
            continue;
        }
        let mids: Vec<f64> = bp.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let vals: Vec<f64> = mids.iter().map(|&m| prof.profit(m)).collect();
        let top = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let k = vals.iter().position(|&x| x == top).expect("nonempty");
        let q = if k > 0 && k + 1 < mids.len() {
            parabola_vertex([mids[k - 1], mids[k], mids[k + 1]], [vals[k - 1], vals[k], vals[k + 1]])
                .filter(|x| *x >= mids[k - 1] && *x <= mids[k + 1])
                .unwrap_or(mids[k])
        } else {
            mids[k]
        };
        v.set(j, Price::Offered(q));
    }
    let p = compute_profit(d, &v);
    (v, p)
}
