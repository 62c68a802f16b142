//! Statements about screening problems checked numerically on concrete
//! instances. Each check is reproducible from its instance and seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::conditions::{check_b1, check_b2_side, check_b3, Side, Verdict};
use crate::domain::{assemble, distance, DiscreteProblem, ScreeningProblem};
use crate::reduction::{
    build_tilde_price, check_effective_cost_convexity, cost_convexity, reduce_goods, reduce_types, GoodsReduction, NullPolicy,
    Reduction, TypeReduction,
};
use crate::solver::{solve_localsearch, SolveOptions};
use crate::transform::{compute_profit, is_b_convex, price_to_utility, type_margins, Price, PriceSchedule};
use crate::{conditions, par};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TheoremId {
    #[serde(rename = "prop-3-1")]
    Prop31,
    #[serde(rename = "lemma-4-3")]
    Lemma43,
    #[serde(rename = "thm-4-4")]
    Thm44,
    #[serde(rename = "thm-transfer")]
    Transfer,
    #[serde(rename = "prop-5-1")]
    Prop51,
    #[serde(rename = "cor-5-2")]
    Cor52,
    #[serde(rename = "prop-5-3")]
    Prop53,
}

impl TheoremId {
    pub const ALL: [TheoremId; 7] = [
        TheoremId::Prop31,
        TheoremId::Lemma43,
        TheoremId::Thm44,
        TheoremId::Transfer,
        TheoremId::Prop51,
        TheoremId::Cor52,
        TheoremId::Prop53,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TheoremId::Prop31 => "prop-3-1",
            TheoremId::Lemma43 => "lemma-4-3",
            TheoremId::Thm44 => "thm-4-4",
            TheoremId::Transfer => "thm-transfer",
            TheoremId::Prop51 => "prop-5-1",
            TheoremId::Cor52 => "cor-5-2",
            TheoremId::Prop53 => "prop-5-3",
        }
    }

    /// Accepts the report id or the short CLI name (`transfer`).
    pub fn parse(s: &str) -> Option<Self> {
        if s == "transfer" {
            return Some(TheoremId::Transfer);
        }
        Self::ALL.into_iter().find(|t| t.as_str() == s)
    }

    /// Stream seed for this check: the master seed mixed with an FNV-1a
    /// hash of the id.
    pub fn seed(self, master: u64) -> u64 {
        let h = self.as_str().bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3));
        master ^ h
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoremCheck {
    pub id: TheoremId,
    pub instance: String,
    pub verdict: Verdict,
    pub evidence: Value,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl TheoremCheck {
    fn new(id: TheoremId, instance: &str, pass: bool, evidence: Value, seed: u64) -> Self {
        let verdict = if pass { Verdict::Pass } else { Verdict::Fail };
        TheoremCheck { id, instance: instance.into(), verdict, evidence, seed, note: None }
    }

    pub fn not_applicable(id: TheoremId, instance: &str, note: impl Into<String>, seed: u64) -> Self {
        TheoremCheck { id, instance: instance.into(), verdict: Verdict::NotApplicable, evidence: Value::Null, seed, note: Some(note.into()) }
    }

    fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

/// Every good offered at a price uniform in `[c_j, c_j + (max B - min B)]`.
pub fn random_schedule(d: &DiscreteProblem, rng: &mut impl Rng) -> PriceSchedule {
    let (lo, hi) = d.payoff_range();
    let span = hi - lo;
    let v = d.costs.iter().map(|&c| c + span * rng.random::<f64>()).collect();
    PriceSchedule::pinned(d, v).expect("random schedules are pinned")
}

fn schedules(d: &DiscreteProblem, count: usize, seed: u64) -> Vec<PriceSchedule> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_schedule(d, &mut rng)).collect()
}

/// Non-convexity of the feasible utilities when the goods are not
/// b-convex.
///
/// At a witness type, takes the pair of goods whose gradient images have
/// the midpoint farthest from the image set. Two schedules offering only the
/// null good and that pair make the type prefer one or the other by a margin
/// `kappa`; the average of their utilities is then not a b-transform.
pub fn verify_prop31(problem: &ScreeningProblem, d: &DiscreteProblem, instance: &str) -> TheoremCheck {
    let id = TheoremId::Prop31;
    let Some(pref) = problem.payoff.preference() else {
        return TheoremCheck::not_applicable(id, instance, "payoff is tabulated", 0);
    };
    if check_b2_side(problem, d, Side::Goods, 0).verdict != Verdict::Fail {
        return TheoremCheck::not_applicable(id, instance, "goods are b-convex on this grid; no gap to exploit", 0);
    }
    let w = d.types.centroid_index();
    let xw = d.types.point(w);
    let images: Vec<Vec<f64>> = match d.goods.iter().map(|y| pref.grad_x(xw, y).map(|g| g.as_slice().to_vec())).collect() {
        Ok(v) => v,
        Err(e) => return TheoremCheck::not_applicable(id, instance, format!("gradient failed: {e}"), 0),
    };
    let mut pair = (0, 0, -1.0);
    for a in 0..images.len() {
        for b in a + 1..images.len() {
            let mid: Vec<f64> = images[a].iter().zip(&images[b]).map(|(p, q)| 0.5 * (p + q)).collect();
            let gap = images.iter().map(|i| distance(i, &mid)).fold(f64::INFINITY, f64::min);
            if gap > pair.2 {
                pair = (a, b, gap);
            }
        }
    }
    let (a, b, image_gap) = pair;
    let (lo, hi) = d.payoff_range();
    let kappa = 0.15 * (hi - lo);
    let base = d.null_utility(w);
    let build = |favored: usize, other: usize| -> PriceSchedule {
        let (uf, uo) = if favored == d.phi {
            (base, base - kappa)
        } else if other == d.phi {
            (base + kappa, base)
        } else {
            (base + 2.0 * kappa, base + kappa)
        };
        let mut v = vec![Price::NotOffered; d.n_goods()];
        v[favored] = Price::Offered(d.b(w, favored) - uf);
        v[other] = Price::Offered(d.b(w, other) - uo);
        v[d.phi] = Price::Offered(d.costs[d.phi]);
        PriceSchedule::new(d, v).expect("pinned")
    };
    let (v0, v1) = (build(a, b), build(b, a));
    let u0 = price_to_utility(d, &v0).utilities;
    let u1 = price_to_utility(d, &v1).utilities;
    let mid: Vec<f64> = u0.iter().zip(&u1).map(|(p, q)| 0.5 * (p + q)).collect();
    let c = is_b_convex(d, &mid);
    let price = |v: &PriceSchedule, j: usize| v.get(j).value();
    let evidence = json!({
        "witness_type": xw,
        "pair": [a, b],
        "image_gap": image_gap,
        "kappa": kappa,
        "prices": [[price(&v0, a), price(&v0, b)], [price(&v1, a), price(&v1, b)]],
        "gap": c.gap,
        "worst_type": d.types.point(c.worst),
    });
    TheoremCheck::new(id, instance, !c.convex, evidence, 0)
}

/// Types in one cluster of the type reduction have identical argmax sets.
pub fn verify_lemma43(d: &DiscreteProblem, tr: &TypeReduction, count: usize, seed: u64, instance: &str) -> TheoremCheck {
    let vs = schedules(d, count, seed);
    let mismatches: Vec<(usize, usize)> = par::map_indexed(vs.len(), |s| {
        let prof = price_to_utility(d, &vs[s]);
        let bad = tr
            .clusters
            .iter()
            .filter(|m| m.iter().any(|&i| prof.argmax_sets[i] != prof.argmax_sets[m[0]]))
            .count();
        (s, bad)
    });
    let bad: usize = mismatches.iter().map(|m| m.1).sum();
    let shared = tr.clusters.iter().filter(|m| m.len() > 1).count();
    let evidence = json!({
        "schedules": count,
        "clusters": tr.clusters.len(),
        "multi_member_clusters": shared,
        "mismatched_clusters": bad,
    });
    TheoremCheck::new(TheoremId::Lemma43, instance, bad == 0, evidence, seed)
}

/// Full and effective profits agree schedule by schedule, and the
/// pushforward keeps the total mass.
pub fn verify_thm44(d: &DiscreteProblem, tr: &TypeReduction, count: usize, seed: u64, instance: &str) -> TheoremCheck {
    let id = TheoremId::Thm44;
    if tr.gap > 1e-10 {
        return TheoremCheck::not_applicable(id, instance, format!("quotient gap {:e} exceeds 1e-10", tr.gap), seed);
    }
    let mut vs = schedules(d, count, seed);
    vs.push(PriceSchedule::only_null(d));
    let gaps = par::map_indexed(vs.len(), |s| {
        let p = compute_profit(d, &vs[s]);
        let pe = compute_profit(&tr.problem, &tr.effective_schedule(&vs[s]));
        ((p - pe).abs() / (1.0 + p.abs()), p, pe)
    });
    let worst = gaps.iter().map(|g| g.0).fold(0.0, f64::max);
    let null_only = gaps.last().expect("nonempty");
    let mu = d.total_mass();
    let nu = par::neumaier_sum(tr.weights.iter().copied());
    let mass_gap = (mu - nu).abs() / mu.abs().max(f64::MIN_POSITIVE);
    let pass = worst <= 1e-9 && mass_gap <= 1e-12 && null_only.1 == 0.0 && null_only.2 == 0.0;
    let evidence = json!({
        "schedules": count,
        "max_relative_gap": worst,
        "mass_full": mu,
        "mass_effective": nu,
        "mass_relative_gap": mass_gap,
        "null_only_profits": [null_only.1, null_only.2],
    });
    TheoremCheck::new(id, instance, pass, evidence, seed)
}

/// The restricted schedule `v~` keeps every utility, never lowers a
/// buyer's margin, and so weakly raises profit.
pub fn verify_prop51(d: &DiscreteProblem, gr: &GoodsReduction, count: usize, seed: u64, instance: &str) -> TheoremCheck {
    let vs = schedules(d, count, seed);
    let rows = par::map_indexed(vs.len(), |s| {
        let v = &vs[s];
        let vt = build_tilde_price(d, gr, v);
        let u = price_to_utility(d, v).utilities;
        let ut = price_to_utility(d, &vt).utilities;
        let du = u.iter().zip(&ut).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let m = type_margins(d, v);
        let mt = type_margins(d, &vt);
        let dm = m.iter().zip(&mt).map(|(a, b)| b - a).fold(f64::INFINITY, f64::min);
        let dp = compute_profit(d, &vt) - compute_profit(d, v);
        (du, dm, dp)
    });
    let du = rows.iter().map(|r| r.0).fold(0.0, f64::max);
    let dm = rows.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    let dp = rows.iter().map(|r| r.2).fold(f64::INFINITY, f64::min);
    let pass = du <= 1e-9 && dm >= -1e-9 && dp >= -1e-9;
    let evidence = json!({
        "schedules": count,
        "max_utility_change": du,
        "min_margin_change": dm,
        "min_profit_change": dp,
        "support": gr.support().len(),
        "null_overridden": gr.null_overridden,
    });
    TheoremCheck::new(TheoremId::Prop51, instance, pass, evidence, seed)
}

/// Rounds of the alternating search in [`verify_cor52`].
const COR52_ROUNDS: usize = 4;

/// Maximizing over schedules supported on the representatives reaches the
/// unrestricted maximum.
///
/// Both maxima come from local search, so the two searches feed each other:
/// the unrestricted search restarts from the lifted restricted optimum, and
/// the restricted search from the restriction of `v~` built from the
/// unrestricted optimum. This repeats until neither side improves by more
/// than `tol`; the check passes when the final values agree within `tol`.
pub fn verify_cor52(d: &DiscreteProblem, gr: &GoodsReduction, opts: &SolveOptions, tol: f64, instance: &str) -> TheoremCheck {
    let seed = opts.seed;
    let run = |d: &DiscreteProblem, starts: usize, extra: Vec<PriceSchedule>| {
        let o = SolveOptions { starts, extra_starts: extra, ..opts.clone() };
        solve_localsearch(d, &o)
    };
    let result = (|| {
        let mut r = run(&gr.problem, opts.starts, Vec::new())?;
        let mut u = run(d, opts.starts, vec![gr.lift(d, &r.best_schedule)])?;
        let mut history = vec![(r.best_profit, u.best_profit)];
        for _ in 1..COR52_ROUNDS {
            let vt = build_tilde_price(d, gr, &u.best_schedule);
            let r_next = run(&gr.problem, 0, vec![r.best_schedule.clone(), gr.restrict(d, &vt)])?;
            let u_next = run(d, 0, vec![u.best_schedule.clone(), gr.lift(d, &r_next.best_schedule)])?;
            let improved = r_next.best_profit > r.best_profit + tol || u_next.best_profit > u.best_profit + tol;
            r = r_next;
            u = u_next;
            history.push((r.best_profit, u.best_profit));
            if !improved {
                break;
            }
        }
        Ok::<_, crate::solver::SolverError>(history)
    })();
    match result {
        Err(e) => TheoremCheck::not_applicable(TheoremId::Cor52, instance, e.to_string(), seed),
        Ok(history) => {
            let &(restricted, unrestricted) = history.last().expect("at least one round");
            let evidence = json!({
                "restricted": restricted,
                "unrestricted": unrestricted,
                "difference": restricted - unrestricted,
                "rounds": history,
                "tolerance": tol,
            });
            TheoremCheck::new(TheoremId::Cor52, instance, (restricted - unrestricted).abs() <= tol, evidence, seed)
                .with_note("both maxima come from local search; agreement is consistent with, not proof of, equality")
        }
    }
}

/// Conditions (B1), (B2) of the full problem carry over to the effective
/// one, and (B3) can be checked there.
pub fn verify_transfer(
    problem: &ScreeningProblem,
    d: &DiscreteProblem,
    effective: Option<ScreeningProblem>,
    samples: usize,
    seed: u64,
    instance: &str,
) -> TheoremCheck {
    let id = TheoremId::Transfer;
    let full_b1 = check_b1(problem, d);
    let full_b2 = [check_b2_side(problem, d, Side::Goods, seed), check_b2_side(problem, d, Side::Types, seed)];
    if full_b1.verdict != Verdict::Pass || full_b2.iter().any(|c| c.verdict != Verdict::Pass) {
        return TheoremCheck::not_applicable(id, instance, "full problem does not pass (B1) and both halves of (B2)", seed);
    }
    let Some(eff) = effective else {
        return TheoremCheck::not_applicable(id, instance, "no effective preference available", seed);
    };
    let ed = match assemble(&eff) {
        Ok(ed) => ed,
        Err(e) => return TheoremCheck::not_applicable(id, instance, format!("effective problem: {e}"), seed),
    };
    let b1 = check_b1(&eff, &ed);
    let b2g = check_b2_side(&eff, &ed, Side::Goods, seed);
    let b2t = check_b2_side(&eff, &ed, Side::Types, seed);
    let b3 = check_b3(&eff, &ed, samples, seed);
    let pass = b1.verdict == Verdict::Pass
        && b2g.verdict == Verdict::Pass
        && b2t.verdict == Verdict::Pass
        && !matches!(b3.verdict, Verdict::NotApplicable | Verdict::Fail);
    let evidence = json!({
        "b1": b1,
        "b2_goods": b2g,
        "b2_types": b2t,
        "b3": { "verdict": b3.verdict, "strict_verdict": b3.strict_verdict, "samples": b3.samples.len(), "excluded": b3.excluded },
    });
    TheoremCheck::new(id, instance, pass, evidence, seed)
}

/// A b-convex cost has an h-convex effective cost.
pub fn verify_prop53(d: &DiscreteProblem, gr: &GoodsReduction, instance: &str) -> TheoremCheck {
    let id = TheoremId::Prop53;
    let c = cost_convexity(d);
    let g = check_effective_cost_convexity(Reduction::Goods(gr));
    let evidence = json!({
        "cost_b_convex": c.convex,
        "cost_gap": c.gap,
        "effective_cost_h_convex": g.convex,
        "effective_cost_gap": g.gap,
        "worst_effective_good": gr.effective_goods[g.worst],
    });
    if !c.convex {
        let mut t = TheoremCheck::not_applicable(id, instance, "cost is not b-convex; hypothesis unmet", 0);
        t.evidence = evidence;
        return t;
    }
    TheoremCheck::new(id, instance, g.convex, evidence, 0)
}

/// Settings for [`verify_all`].
#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub seed: u64,
    pub schedules: usize,
    pub b3_samples: usize,
    pub solve: SolveOptions,
    pub cor52_tol: f64,
    pub policy: NullPolicy,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            seed: 0,
            schedules: 20,
            b3_samples: 32,
            solve: SolveOptions { starts: 1, ..SolveOptions::default() },
            cor52_tol: 1e-6,
            policy: NullPolicy::Override,
        }
    }
}

/// Runs the requested checks; reductions are built once and shared.
pub fn verify_all(
    problem: &ScreeningProblem,
    d: &DiscreteProblem,
    which: &[TheoremId],
    opts: &VerifyOptions,
    instance: &str,
) -> Vec<TheoremCheck> {
    let wants_types = which.iter().any(|t| matches!(t, TheoremId::Lemma43 | TheoremId::Thm44 | TheoremId::Transfer));
    let wants_goods =
        which.iter().any(|t| matches!(t, TheoremId::Prop51 | TheoremId::Cor52 | TheoremId::Prop53 | TheoremId::Transfer));
    let tr = (wants_types && problem.m > problem.n).then(|| reduce_types(problem, d, None));
    let gr = (wants_goods && problem.n > problem.m).then(|| reduce_goods(problem, d, None, opts.policy));
    let na = |id: TheoremId, why: String| TheoremCheck::not_applicable(id, instance, why, id.seed(opts.seed));
    let types_or = |id: TheoremId, f: &dyn Fn(&TypeReduction) -> TheoremCheck| match &tr {
        Some(Ok(t)) => f(t),
        Some(Err(e)) => na(id, format!("type reduction failed: {e}")),
        None => na(id, "needs m > n".into()),
    };
    let goods_or = |id: TheoremId, f: &dyn Fn(&GoodsReduction) -> TheoremCheck| match &gr {
        Some(Ok(g)) => f(g),
        Some(Err(e)) => na(id, format!("goods reduction failed: {e}")),
        None => na(id, "needs n > m".into()),
    };
    which
        .iter()
        .map(|&id| {
            let seed = id.seed(opts.seed);
            match id {
                TheoremId::Prop31 => verify_prop31(problem, d, instance),
                TheoremId::Lemma43 => types_or(id, &|t| verify_lemma43(d, t, opts.schedules, seed, instance)),
                TheoremId::Thm44 => types_or(id, &|t| verify_thm44(d, t, opts.schedules.max(50), seed, instance)),
                TheoremId::Prop51 => goods_or(id, &|g| verify_prop51(d, g, opts.schedules, seed, instance)),
                TheoremId::Cor52 => goods_or(id, &|g| {
                    let solve = SolveOptions { seed, ..opts.solve.clone() };
                    verify_cor52(d, g, &solve, opts.cor52_tol, instance)
                }),
                TheoremId::Prop53 => goods_or(id, &|g| verify_prop53(d, g, instance)),
                TheoremId::Transfer => {
                    if problem.m > problem.n {
                        types_or(id, &|t| verify_transfer(problem, d, t.screening_problem(problem), opts.b3_samples, seed, instance))
                    } else if problem.n > problem.m {
                        goods_or(id, &|g| verify_transfer(problem, d, g.screening_problem(problem), opts.b3_samples, seed, instance))
                    } else {
                        na(id, "dimensions are already equal".into())
                    }
                }
            }
        })
        .collect()
}

/// Conditions checked on an equal-dimensional problem, re-exported for
/// callers that only need the verdict list.
pub fn condition_failures(problem: &ScreeningProblem, d: &DiscreteProblem, seed: u64, strict: bool) -> Vec<&'static str> {
    conditions::check_all(problem, d, conditions::CheckOptions { seed, ..Default::default() })
        .failures(strict)
        .into_iter()
        .collect()
}
