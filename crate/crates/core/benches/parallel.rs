use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use screenlab::config::ProblemConfig;
use screenlab::domain::assemble;
use screenlab::solver::{solve_localsearch, SolveOptions};
use screenlab::transform::{compute_profit, is_b_convex, price_to_utility, PriceSchedule};
use screenlab::{par, DiscreteProblem};

fn problem(name: &str) -> DiscreteProblem {
    let cfg = ProblemConfig::from_json(screenlab::config::builtin(name).unwrap()).unwrap();
    assemble(&cfg.to_problem().unwrap()).unwrap()
}

fn transforms(c: &mut Criterion) {
    let d = problem("reduce-types-demo");
    let v = PriceSchedule::at_cost(&d);
    let u = price_to_utility(&d, &v).utilities;
    let mut g = c.benchmark_group("transforms");
    for threads in [1, par::current_threads().max(2)] {
        g.bench_with_input(BenchmarkId::new("price_to_utility", threads), &threads, |b, &t| {
            b.iter(|| par::with_threads(t, || price_to_utility(black_box(&d), black_box(&v))))
        });
        g.bench_with_input(BenchmarkId::new("is_b_convex", threads), &threads, |b, &t| {
            b.iter(|| par::with_threads(t, || is_b_convex(black_box(&d), black_box(&u))))
        });
        g.bench_with_input(BenchmarkId::new("compute_profit", threads), &threads, |b, &t| {
            b.iter(|| par::with_threads(t, || compute_profit(black_box(&d), black_box(&v))))
        });
    }
    g.finish();
}

fn local_search(c: &mut Criterion) {
    let d = problem("bilinear-demo");
    let opts = SolveOptions { starts: 2, seed: 1, ..SolveOptions::default() };
    let mut g = c.benchmark_group("local_search");
    g.sample_size(10);
    for threads in [1, par::current_threads().max(2)] {
        g.bench_with_input(BenchmarkId::from_parameter(threads), &threads, |b, &t| {
            b.iter(|| par::with_threads(t, || solve_localsearch(black_box(&d), &opts).unwrap()))
        });
    }
    g.finish();
}

criterion_group!(benches, transforms, local_search);
criterion_main!(benches);
