mod support;

use screenlab::reduction::{build_tilde_price, reduce_goods, reduce_types, NullPolicy, ReductionError};
use screenlab::transform::{compute_profit, price_to_utility};
use screenlab::verify::random_schedule;
use screenlab::PriceSchedule;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use support::*;

#[test]
fn types_collapse_onto_the_sum() {
    let (p, d) = on_boxes(2, 1, 9, "(x1 + x2)*y1", "y1^2");
    let tr = reduce_types(&p, &d, None).unwrap();
    // x1 + x2 takes 17 distinct values on a 9x9 grid.
    assert_eq!(tr.clusters.len(), 17);
    assert!(tr.gap <= 1e-12);
    let mass: f64 = tr.weights.iter().sum();
    assert!((mass - d.total_mass()).abs() <= 1e-12 * d.total_mass());
    for (k, c) in tr.clusters.iter().enumerate() {
        assert_eq!(tr.representatives[k], c[0]);
    }
}

#[test]
fn type_reduction_preserves_profit() {
    let (p, d) = on_boxes(2, 1, 9, "(x1 + x2)*y1", "y1^2");
    let tr = reduce_types(&p, &d, None).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..10 {
        let v = random_schedule(&d, &mut rng);
        let full = compute_profit(&d, &v);
        let eff = compute_profit(&tr.problem, &tr.effective_schedule(&v));
        assert!((full - eff).abs() <= 1e-9 * full.abs().max(1.0), "{full} vs {eff}");
    }
}

#[test]
fn non_linear_types_are_rejected() {
    let (p, d) = on_boxes(2, 1, 5, "x1*y1 + x2*y1^2", "y1^2");
    assert!(reduce_types(&p, &d, None).is_err());
}

#[test]
fn goods_fibers_follow_the_sum() {
    let (p, d) = on_boxes(1, 2, 11, "x1*(y1 + y2)", "y1^2 + 2*y2^2");
    let gr = reduce_goods(&p, &d, None, NullPolicy::Override).unwrap();
    assert_eq!(gr.fibers.len(), 21);
    for (k, f) in gr.fibers.iter().enumerate() {
        assert!(gr.argmin_sets[k].iter().all(|j| f.contains(j)));
    }
}

#[test]
fn tilde_price_keeps_utilities_and_profit() {
    let (p, d) = on_boxes(1, 2, 11, "x1*(y1 + y2)", "y1^2 + 2*y2^2");
    let gr = reduce_goods(&p, &d, None, NullPolicy::Override).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..10 {
        let v = random_schedule(&d, &mut rng);
        let vt = build_tilde_price(&d, &gr, &v);
        let (u, ut) = (price_to_utility(&d, &v).utilities, price_to_utility(&d, &vt).utilities);
        for (a, b) in u.iter().zip(&ut) {
            assert!((a - b).abs() <= 1e-9);
        }
        assert!(compute_profit(&d, &vt) >= compute_profit(&d, &v) - 1e-9);
    }
}

#[test]
fn lift_then_restrict_round_trips() {
    let (p, d) = on_boxes(1, 2, 7, "x1*(y1 + y2)", "y1^2 + y2^2");
    let gr = reduce_goods(&p, &d, None, NullPolicy::Override).unwrap();
    let v = PriceSchedule::at_cost(&gr.problem);
    let back = gr.restrict(&d, &gr.lift(&d, &v));
    assert_eq!(back, v);
}

#[test]
fn strict_null_policy_refuses_a_cheaper_fiber_mate() {
    // On w = 0 the good (-0.5, 0.5) costs less than the null good.
    let (p, d) = load(
        r#"{ "dims": { "m": 1, "n": 2 },
  "domain_x": { "lower": [0.0], "upper": [1.0], "resolution": [5] },
  "domain_y": { "lower": [-1.0, -1.0], "upper": [1.0, 1.0], "resolution": [5, 5] },
  "b": "x1*(y1 + y2)", "cost": "y1^2 + y2^2 + 2*y1", "null_good": [0.0, 0.0] }"#,
    );
    let strict = reduce_goods(&p, &d, None, NullPolicy::Strict);
    assert!(matches!(strict, Err(ReductionError::NullGood { excess }) if (excess - 0.5).abs() < 1e-12), "{strict:?}");
    let lenient = reduce_goods(&p, &d, None, NullPolicy::Override).unwrap();
    assert!(lenient.null_overridden);
}
