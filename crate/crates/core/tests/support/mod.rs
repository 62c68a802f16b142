//! Shared helpers for the integration tests: instance builders and the
//! randomized property checks.
#![allow(dead_code)]

use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use screenlab::config::ProblemConfig;
use screenlab::domain::{assemble, PointSet, Topology};
use screenlab::transform::{compute_profit, is_b_convex, price_to_utility, type_margins, utility_to_price};
use screenlab::{par, DiscreteProblem, Price, PriceSchedule, ScreeningProblem, ToleranceSet};

pub fn load(json: &str) -> (ScreeningProblem, DiscreteProblem) {
    let cfg = ProblemConfig::from_json(json).expect("config parses");
    let p = cfg.to_problem().expect("problem builds");
    let d = assemble(&p).expect("problem assembles");
    (p, d)
}

pub fn builtin(name: &str) -> (ScreeningProblem, DiscreteProblem) {
    load(screenlab::config::builtin(name).expect("known builtin"))
}

/// Problem on unit boxes with `res` points per axis.
pub fn on_boxes(m: usize, n: usize, res: usize, b: &str, cost: &str) -> (ScreeningProblem, DiscreteProblem) {
    let boxed = |k: usize| {
        format!(r#"{{ "lower": {:?}, "upper": {:?}, "resolution": {:?} }}"#, vec![0.0; k], vec![1.0; k], vec![res; k])
    };
    let json = format!(
        r#"{{ "dims": {{ "m": {m}, "n": {n} }}, "domain_x": {}, "domain_y": {}, "b": "{b}", "cost": "{cost}", "null_good": {:?} }}"#,
        boxed(m),
        boxed(n),
        vec![0.0; n]
    );
    load(&json)
}

/// A small tabulated problem with a pinned schedule over it.
#[derive(Debug, Clone)]
pub struct Instance {
    pub d: DiscreteProblem,
    pub prices: Vec<f64>,
}

impl Instance {
    pub fn schedule(&self) -> PriceSchedule {
        PriceSchedule::pinned(&self.d, self.prices.clone()).expect("pinned")
    }
}

fn build(nx: usize, ny: usize, payoff: Vec<f64>, weights: Vec<f64>, costs: Vec<f64>, prices: Vec<f64>, phi: usize) -> Instance {
    let types = PointSet::new(1, (0..nx).map(|i| i as f64).collect(), Topology::Discrete);
    let goods = PointSet::new(1, (0..ny).map(|j| j as f64).collect(), Topology::Discrete);
    let d = DiscreteProblem::new(types, weights, goods, costs, phi, payoff, ToleranceSet::default()).expect("valid instance");
    Instance { d, prices }
}

/// Random continuous-valued instance.
pub fn instance() -> impl Strategy<Value = Instance> {
    (2usize..10, 2usize..7)
        .prop_flat_map(|(nx, ny)| {
            (
                prop::collection::vec(-2.0f64..2.0, nx * ny),
                prop::collection::vec(0.0f64..1.0, nx),
                prop::collection::vec(0.0f64..1.0, ny),
                prop::collection::vec(0.0f64..2.0, ny),
                0..ny,
                Just((nx, ny)),
            )
        })
        .prop_map(|(payoff, weights, costs, markup, phi, (nx, ny))| {
            let prices = costs.iter().zip(&markup).map(|(c, m)| c + m).collect();
            build(nx, ny, payoff, weights, costs, prices, phi)
        })
}

/// Integer-valued instance, so that buyers are often indifferent.
pub fn tied_instance() -> impl Strategy<Value = Instance> {
    (2usize..10, 2usize..7)
        .prop_flat_map(|(nx, ny)| {
            (
                prop::collection::vec(0i32..4, nx * ny),
                prop::collection::vec(0i32..3, ny),
                prop::collection::vec(0i32..3, ny),
                0..ny,
                Just((nx, ny)),
            )
        })
        .prop_map(|(payoff, costs, markup, phi, (nx, ny))| {
            let f = |v: Vec<i32>| v.into_iter().map(f64::from).collect::<Vec<_>>();
            let costs = f(costs);
            let prices = costs.iter().zip(f(markup)).map(|(c, m)| c + m).collect();
            build(nx, ny, f(payoff), vec![1.0; nx], costs, prices, phi)
        })
}

/// `u = v^b` is a fixed point of the double transform, and `v^bb <= v`.
pub fn triple_transform(inst: &Instance) -> Result<(), TestCaseError> {
    let d = &inst.d;
    let u = price_to_utility(d, &inst.schedule()).utilities;
    let c = is_b_convex(d, &u);
    prop_assert!(c.gap <= 1e-12, "u^bb differs from u by {}", c.gap);
    let w = utility_to_price(d, &u);
    for (j, (w, v)) in w.iter().zip(&inst.prices).enumerate() {
        prop_assert!(*w <= v + 1e-12, "good {j}: v^bb = {w} > v = {v}");
    }
    Ok(())
}

/// Raising any non-null price never raises a utility.
pub fn monotone_utilities(inst: &Instance, bump: &[f64]) -> Result<(), TestCaseError> {
    let d = &inst.d;
    let raised: Vec<f64> = inst.prices.iter().enumerate().map(|(j, p)| p + bump[j % bump.len()]).collect();
    let high = PriceSchedule::pinned(d, raised).expect("pinned");
    let u = price_to_utility(d, &inst.schedule()).utilities;
    let uh = price_to_utility(d, &high).utilities;
    for (i, (a, b)) in u.iter().zip(&uh).enumerate() {
        prop_assert!(b <= a, "type {i}: utility rose from {a} to {b}");
    }
    Ok(())
}

/// Every type gets at least what the null good at cost gives.
pub fn participation_floor(inst: &Instance) -> Result<(), TestCaseError> {
    let d = &inst.d;
    let u = price_to_utility(d, &inst.schedule()).utilities;
    for (i, u) in u.iter().enumerate() {
        prop_assert!(*u >= d.null_utility(i), "type {i}: {u} below floor {}", d.null_utility(i));
    }
    Ok(())
}

/// The realized margin is the largest over the argmax set, so the profit
/// beats any other selection from the same sets.
pub fn tie_break_dominance(inst: &Instance) -> Result<(), TestCaseError> {
    let d = &inst.d;
    let v = inst.schedule();
    let prof = price_to_utility(d, &v);
    let margins = type_margins(d, &v);
    let margin = |j: usize| v.get(j).value().expect("offered") - d.costs[j];
    let mut lowest_index = 0.0;
    for (i, set) in prof.argmax_sets.iter().enumerate() {
        prop_assert!(!set.is_empty());
        for &j in set {
            prop_assert!(margins[i] >= margin(j), "type {i}: realized {} < {} for good {j}", margins[i], margin(j));
        }
        prop_assert!(set.contains(&prof.allocation[i]));
        lowest_index += d.weights[i] * margin(set[0]);
    }
    prop_assert!(compute_profit(d, &v) >= lowest_index - 1e-12);
    Ok(())
}

/// Transforms and profits are bit-identical on one and on several workers.
pub fn thread_determinism(inst: &Instance) -> Result<(), TestCaseError> {
    let d = &inst.d;
    let v = inst.schedule();
    let run = || {
        let p = price_to_utility(d, &v);
        let w = utility_to_price(d, &p.utilities);
        let c = is_b_convex(d, &p.utilities);
        (p, w, compute_profit(d, &v), c)
    };
    let one = par::with_threads(1, run);
    for t in [2, 3, 8] {
        let many = par::with_threads(t, run);
        prop_assert_eq!(&one.0, &many.0);
        prop_assert_eq!(one.1.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), many.1.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
        prop_assert_eq!(one.2.to_bits(), many.2.to_bits());
        prop_assert_eq!(one.3, many.3);
    }
    Ok(())
}

pub const CASES: u32 = 128;

/// Runs one property over `CASES` generated instances with a fixed seed.
pub fn run_property<S: Strategy>(
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<u32, String> {
    let config = Config { cases: CASES, failure_persistence: None, ..Config::default() };
    let mut runner = TestRunner::new_with_rng(config, proptest::test_runner::TestRng::deterministic_rng(proptest::test_runner::RngAlgorithm::ChaCha));
    runner.run(&strategy, test).map(|_| CASES).map_err(|e| e.to_string())
}

/// Every named property with its case count or failure.
pub fn all_properties() -> Vec<(&'static str, Result<u32, String>)> {
    vec![
        ("triple-transform idempotence", run_property(instance(), |i| triple_transform(&i))),
        (
            "utility monotonicity in prices",
            run_property((instance(), prop::collection::vec(0.0f64..1.0, 1..6)), |(i, b)| monotone_utilities(&i, &b)),
        ),
        ("participation floor", run_property(instance(), |i| participation_floor(&i))),
        ("tie-break dominance", run_property(tied_instance(), |i| tie_break_dominance(&i))),
        ("thread-count determinism", run_property(instance(), |i| thread_determinism(&i))),
    ]
}

pub fn offered(v: &PriceSchedule) -> Vec<Option<f64>> {
    v.prices().iter().map(|p: &Price| p.value()).collect()
}
