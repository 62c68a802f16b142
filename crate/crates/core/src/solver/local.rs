use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{free_goods, group_optima, lex_cmp, Incumbent, Method, Optimum, SolveOptions, SolveResult, SolverError};
use crate::domain::DiscreteProblem;
use crate::par;
use crate::transform::{Price, PriceSchedule};

const SCAN: usize = 64;
/// Samples per coordinate in a full-range sweep.
const WIDE_SCAN: usize = 256;
const GOLDEN_ITERS: usize = 40;
const LINK_FRACTION: f64 = 0.01;

/// Index of the first sample within `slack` of the maximum.
fn argmax_tolerant(vals: &[f64], slack: f64) -> usize {
    let top = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    vals.iter().position(|&v| v >= top - slack).expect("nonempty")
}

/// Golden-section search for a maximum of `f` on `[a, b]`; returns the best
/// point seen.
fn golden(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut e = a + r * (b - a);
    let (mut fc, mut fe) = (f(c), f(e));
    for _ in 0..GOLDEN_ITERS {
        if fc >= fe {
            b = e;
            e = c;
            fe = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = e;
            fc = fe;
            e = a + r * (b - a);
            fe = f(e);
        }
    }
    if fc >= fe {
        (c, fc)
    } else {
        (e, fe)
    }
}

/// Cyclic coordinate ascent from `start`. Returns the final schedule, its
/// profit and the number of sweeps.
fn ascend(
    d: &DiscreteProblem,
    start: PriceSchedule,
    free: &[usize],
    bounds: &[(f64, f64)],
    opts: &SolveOptions,
    tol: f64,
) -> (PriceSchedule, f64, u64) {
    let slack = 1e-12 * d.profit_scale();
    let mut inc = Incumbent::new(d, start);
    let mut profit = crate::transform::compute_profit(d, inc.schedule());
    let mut sweeps = 0;
    // A stalled windowed sweep is followed by one over the whole range.
    let mut wide = false;
    while sweeps < opts.max_sweeps as u64 {
        sweeps += 1;
        let before = profit;
        let scan = if wide { WIDE_SCAN } else { SCAN };
        for &j in free {
            let (lo, hi) = bounds[j];
            let prof = inc.profile(j);
            let p = inc.schedule().get(j).value().unwrap_or(hi);
            let half = if wide { hi - lo } else { (hi - lo) / 8.0 };
            let (a, b) = ((p - half).max(lo), (p + half).min(hi));
            if b <= a {
                continue;
            }
            let xs: Vec<f64> = (0..scan).map(|k| a + (b - a) * k as f64 / (scan - 1) as f64).collect();
            let win = prof.window(a);
            let vals: Vec<f64> = xs.iter().map(|&x| win.profit(x)).collect();
            let k = argmax_tolerant(&vals, slack);
            let (ga, gb) = (xs[k.saturating_sub(1)], xs[(k + 1).min(scan - 1)]);
            let (gx, gv) = golden(|x| win.profit(x.max(a)), ga, gb);
            let (cx, cv) = if gv > vals[k] + slack { (gx, gv) } else { (xs[k], vals[k]) };
            if cv > profit + slack {
                inc.set(j, Price::Offered(cx));
                profit = cv;
            }
        }
        if profit - before >= tol {
            wide = false;
        } else if wide {
            break;
        } else {
            wide = true;
        }
    }
    (inc.into_schedule(), profit, sweeps)
}

/// Latin-hypercube starts inside the price box, every good offered.
fn random_starts(d: &DiscreteProblem, free: &[usize], bounds: &[(f64, f64)], count: usize, seed: u64) -> Vec<PriceSchedule> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(free.len());
    for &j in free {
        let (lo, hi) = bounds[j];
        let mut strata: Vec<usize> = (0..count).collect();
        strata.shuffle(&mut rng);
        cols.push(strata.iter().map(|&s| lo + (hi - lo) * (s as f64 + rng.random::<f64>()) / count as f64).collect());
    }
    (0..count)
        .map(|s| {
            let mut v = d.costs.clone();
            for (a, &j) in free.iter().enumerate() {
                v[j] = cols[a][s];
            }
            PriceSchedule::pinned(d, v).expect("starts are pinned")
        })
        .collect()
}

/// Multi-start cyclic coordinate ascent. Each coordinate step scans 64
/// prices within an eighth of the price range around the current price and
/// refines the best by golden section. `starts = 0` with extra starts runs
/// only the extra ones.
pub fn solve_localsearch(d: &DiscreteProblem, opts: &SolveOptions) -> Result<SolveResult, SolverError> {
    let free = free_goods(d);
    let bounds = opts.bounds(d);
    let tol = opts.opt_tol(d);
    for s in &opts.extra_starts {
        if s.len() != d.n_goods() {
            return Err(SolverError::Start { expected: d.n_goods(), got: s.len() });
        }
    }
    let random = if opts.starts == 0 && !opts.extra_starts.is_empty() { 0 } else { opts.starts.max(1) };
    let mut starts = if free.is_empty() { vec![PriceSchedule::at_cost(d)] } else { random_starts(d, &free, &bounds, random, opts.seed) };
    starts.extend(opts.extra_starts.iter().cloned());

    let runs = par::map_indexed(starts.len(), |s| ascend(d, starts[s].clone(), &free, &bounds, opts, tol));
    let trace: Vec<f64> = runs.iter().map(|r| r.1).collect();
    let iterations = runs.iter().map(|r| r.2).sum();

    let slack = 1e-12 * d.profit_scale();
    let top = trace.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let best = runs
        .iter()
        .filter(|r| r.1 >= top - slack)
        .min_by(|a, b| lex_cmp(&a.0, &b.0))
        .map(|r| r.0.clone())
        .expect("at least one start");

    let range = free.iter().map(|&j| bounds[j].1 - bounds[j].0).fold(0.0, f64::max);
    let near: Vec<(PriceSchedule, f64)> = runs.into_iter().filter(|r| r.1 >= top - tol).map(|r| (r.0, r.1)).collect();
    let optima = group_optima(near, &free, LINK_FRACTION * range)
        .into_iter()
        .map(|(s, p, members)| Optimum { schedule: s.clone(), profit: p, grid_schedule: s, grid_profit: p, members })
        .collect();
    Ok(SolveResult::assemble(d, Method::Local, best, optima, trace, opts, iterations, false))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_finds_a_parabola_peak() {
        let (x, v) = golden(|x| -(x - 0.3) * (x - 0.3), 0.0, 1.0);
        assert!((x - 0.3).abs() < 1e-6);
        assert!(v <= 0.0);
    }

    #[test]
    fn tolerant_argmax_prefers_earlier_near_ties() {
        assert_eq!(argmax_tolerant(&[0.0, 1.0 - 1e-14, 1.0], 1e-12), 1);
        assert_eq!(argmax_tolerant(&[0.0, 0.5, 1.0], 1e-12), 2);
    }
}
