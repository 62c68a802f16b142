//! Acceptance run: one PASS/FAIL line per criterion. Exits non-zero if any
//! criterion fails.

mod support;

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use screenlab::conditions::{
    check_b0, check_b1, check_b2_side, check_b3, check_b_linearity_all, check_level_independence, stencil_sample, Side, Verdict,
};
use screenlab::reduction::{reduce_goods, reduce_types, NullPolicy};
use screenlab::solver::{profit_curve, solve_bruteforce, solve_localsearch, SolveOptions};
use screenlab::verify::{verify_cor52, verify_prop31, verify_prop51, verify_thm44};
use screenlab::PriceSchedule;
use support::{builtin, on_boxes};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

/// Closed-form profit of the one-good example at price `v`.
fn example_profit(v: f64) -> f64 {
    let t = v - 1.5;
    t * t - 20.0 * t.powi(4) + 1.0
}

fn criterion_1() -> Outcome {
    let (_, d) = builtin("example-3-3");
    let cfg = screenlab::config::ProblemConfig::builtin("example-3-3").unwrap();
    let start = Instant::now();
    let r = solve_bruteforce(&d, &cfg.solve_options()).expect("brute force runs");
    let elapsed = start.elapsed();
    let half_gap = 0.5 / 10f64.sqrt();
    let expected = [1.5 - half_gap, 1.5 + half_gap];
    let profit = example_profit(expected[0]);
    let found: Vec<(f64, f64)> =
        r.all_optima.iter().map(|o| (o.schedule.get(1).value().unwrap_or(f64::NAN), o.profit)).collect();
    let pass = found.len() == 2
        && found.iter().zip(expected).all(|((v, p), e)| (v - e).abs() <= 2e-4 && (p - profit).abs() <= 1e-3)
        && within(elapsed, 10.0);
    outcome(pass, format!("optima {found:?}, expected prices {expected:?} profit {profit}, {:.2}s", elapsed.as_secs_f64()))
}

fn criterion_2() -> Outcome {
    let (_, d) = builtin("example-3-3");
    let v = PriceSchedule::pinned(&d, vec![0.0, 1.5]).unwrap();
    let curve = profit_curve(&d, &v, 1, (1.0, 2.0), 101).expect("curve");
    let (worst_v, err) = curve
        .iter()
        .map(|&(p, q)| (p, (q - example_profit(p)).abs()))
        .fold((0.0, 0.0), |a, b| if b.1 > a.1 { b } else { a });
    outcome(err <= 1e-3, format!("max abs error {err:.3e} at v = {worst_v}, limit 1e-3"))
}

fn criterion_3() -> Outcome {
    let (p, d) = builtin("example-3-3");
    let start = Instant::now();
    let t = verify_prop31(&p, &d, "example-3-3");
    let elapsed = start.elapsed();
    let gap = t.evidence["gap"].as_f64().unwrap_or(0.0);
    let worst = t.evidence["worst_type"][0].as_f64().unwrap_or(f64::NAN);
    let pass = t.verdict == Verdict::Pass && gap >= 0.14 && within(elapsed, 1.0);
    outcome(pass, format!("gap {gap:.4} at x = {worst}, {:.3}s", elapsed.as_secs_f64()))
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let mut notes = Vec::new();
    let mut pass = true;
    for (m, res) in [(1, 21), (2, 11)] {
        let b = (1..=m).map(|k| format!("x{k}*y{k}")).collect::<Vec<_>>().join(" + ");
        let (p, d) = on_boxes(m, m, res, &b, "0");
        let verdicts = [
            check_b0(&p, &d).verdict,
            check_b1(&p, &d).verdict,
            check_b2_side(&p, &d, Side::Goods, 0).verdict,
            check_b2_side(&p, &d, Side::Types, 0).verdict,
        ];
        let b3 = check_b3(&p, &d, 200, 0);
        let max_abs = b3.samples.iter().map(|s| s.value.abs().max(s.value_half.abs())).fold(0.0, f64::max);
        let ok = verdicts.iter().all(|v| *v == Verdict::Pass)
            && b3.verdict == Verdict::Pass
            && b3.strict_verdict == Verdict::Fail
            && b3.samples.len() == 200
            && max_abs <= 1e-6;
        pass &= ok;
        notes.push(format!("m=n={m}: B0-B2 {verdicts:?}, B3 {:?}, B3u {:?}, max |stencil| {max_abs:.1e}", b3.verdict, b3.strict_verdict));
    }
    let elapsed = start.elapsed();
    pass &= within(elapsed, 30.0);
    outcome(pass, format!("{}; {:.2}s", notes.join("; "), elapsed.as_secs_f64()))
}

/// Mixed fourth derivative of `b = xy + 0.1 x^2 y^2` along the b-segments
/// through `(x0, y0)`, from the implicit segment equations
/// `X + 0.2 y0 X^2 = const + s p` and `Y + 0.2 x0 Y^2 = const + t q`.
fn b3_oracle(x0: f64, y0: f64, p: f64, q: f64) -> f64 {
    let x1 = p / (1.0 + 0.4 * y0 * x0);
    let x2 = -0.4 * y0 * x1 * x1 / (1.0 + 0.4 * y0 * x0);
    let y1 = q / (1.0 + 0.4 * x0 * y0);
    let y2 = -0.4 * x0 * y1 * y1 / (1.0 + 0.4 * x0 * y0);
    x2 * y2 + 0.1 * (2.0 * x1 * x1 + 2.0 * x0 * x2) * (2.0 * y1 * y1 + 2.0 * y0 * y2)
}

fn criterion_5() -> Outcome {
    let (p, d) = on_boxes(1, 1, 11, "x1*y1 + 0.1*x1^2*y1^2", "0");
    let pref = p.payoff.preference().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let step = d.tolerances.fd_step * d.types.diameter();
    let mut worst = 0.0f64;
    let mut failures = 0;
    for _ in 0..10 {
        let x0 = rng.random_range(0.1..0.9);
        let y0 = rng.random_range(0.1..0.9);
        let pd = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let qd = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let bounds = ([0.0], [1.0]);
        match stencil_sample(pref, &[x0], &[y0], &[pd], &[qd], (step, step), &d.tolerances, (&bounds.0, &bounds.1), (&bounds.0, &bounds.1)) {
            Ok(s) => {
                let exact = b3_oracle(x0, y0, pd, qd);
                worst = worst.max((s.value - exact).abs() / exact.abs());
            }
            Err(_) => failures += 1,
        }
    }
    outcome(failures == 0 && worst <= 1e-4, format!("max relative error {worst:.2e} over 10 anchors, {failures} unevaluable"))
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let (p, d) = builtin("reduce-types-demo");
    let tr = reduce_types(&p, &d, None).expect("type reduction");
    let t = verify_thm44(&d, &tr, 50, 44, "reduce-types-demo");
    let opts = SolveOptions { starts: 4, seed: 7, ..SolveOptions::default() };
    let full = solve_localsearch(&d, &opts).expect("full solve");
    let reduced = solve_localsearch(&tr.problem, &opts).expect("reduced solve");
    let elapsed = start.elapsed();
    let diff = (full.best_profit - reduced.best_profit).abs();
    let pass = t.verdict == Verdict::Pass && diff <= 1e-6 && within(elapsed, 60.0);
    outcome(
        pass,
        format!(
            "max gap {}, mass gap {}, full {} vs reduced {} ({} effective types), {:.2}s",
            t.evidence["max_relative_gap"],
            t.evidence["mass_relative_gap"],
            full.best_profit,
            reduced.best_profit,
            tr.problem.n_types(),
            elapsed.as_secs_f64()
        ),
    )
}

/// Minimum of `y1^2 + 2 y2^2` on `y1 + y2 = w` inside the unit square.
fn g_oracle(w: f64) -> f64 {
    let y1 = (2.0 * w / 3.0).clamp((w - 1.0).max(0.0), w.min(1.0));
    y1 * y1 + 2.0 * (w - y1) * (w - y1)
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let (p, d) = builtin("reduce-goods-demo");
    let x0 = d.types.nearest(&[0.0]);
    let gr = reduce_goods(&p, &d, Some(x0), NullPolicy::Override).expect("goods reduction");
    let g_err = gr.effective_goods.iter().zip(&gr.costs).map(|(w, g)| (g - g_oracle(w[0])).abs()).fold(0.0, f64::max);
    let t51 = verify_prop51(&d, &gr, 20, 51, "reduce-goods-demo");
    let opts = SolveOptions { starts: 1, seed: 7, ..SolveOptions::default() };
    let t52 = verify_cor52(&d, &gr, &opts, 1e-6, "reduce-goods-demo");
    let elapsed = start.elapsed();
    let pass = g_err <= 2e-3 && t51.verdict == Verdict::Pass && t52.verdict == Verdict::Pass && within(elapsed, 60.0);
    outcome(
        pass,
        format!(
            "{} fibers, g error {g_err:.2e}; utilities {} margins {} profit {}; restricted {} vs unrestricted {}; {:.2}s",
            gr.fibers.len(),
            t51.evidence["max_utility_change"],
            t51.evidence["min_margin_change"],
            t51.evidence["min_profit_change"],
            t52.evidence["restricted"],
            t52.evidence["unrestricted"],
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_8() -> Outcome {
    let run = |b: &str| {
        let (p, d) = on_boxes(2, 1, 11, b, "y1^2");
        (check_b_linearity_all(&p, &d, Side::Types).verdict, check_level_independence(&p, &d, Side::Types).verdict)
    };
    let bad = run("x1*y1 + x2*y1^2");
    let good = run("(x1 + x2)*y1");
    let mut agree = true;
    for name in screenlab::config::BUILTINS {
        let (p, d) = builtin(name);
        if p.m > p.n {
            agree &= check_b_linearity_all(&p, &d, Side::Types).verdict == check_level_independence(&p, &d, Side::Types).verdict;
        }
    }
    let pass = bad == (Verdict::Fail, Verdict::Fail) && good == (Verdict::Pass, Verdict::Pass) && agree;
    outcome(pass, format!("x1*y + x2*y^2 -> {bad:?}, (x1+x2)*y -> {good:?}, shipped instances agree: {agree}"))
}

fn criterion_9() -> Outcome {
    let results = support::all_properties();
    let pass = results.iter().all(|r| r.1.is_ok());
    let detail = results
        .iter()
        .map(|(name, r)| match r {
            Ok(n) => format!("{name}: {n} cases"),
            Err(e) => format!("{name}: {e}"),
        })
        .collect::<Vec<_>>()
        .join("; ");
    outcome(pass, detail)
}

fn main() {
    let criteria: [(u32, fn() -> Outcome); 9] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
    ];
    let mut failed = 0;
    for (n, run) in criterion_filter(&criteria) {
        let o = run();
        if !o.pass {
            failed += 1;
        }
        println!("criterion {n}: {} ({})", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}

/// Criteria named on the command line, or all of them. Flags the test
/// harness would accept are ignored.
fn criterion_filter(all: &[(u32, fn() -> Outcome)]) -> Vec<(u32, fn() -> Outcome)> {
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    all.iter().filter(|(n, _)| wanted.is_empty() || wanted.contains(n)).copied().collect()
}
