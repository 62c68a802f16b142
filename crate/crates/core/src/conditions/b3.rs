use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::segment::{solve_b_segment, SegmentError, SegmentKind};
use super::Verdict;
use crate::domain::{DiscreteProblem, ScreeningProblem, ToleranceSet};
use crate::par;
use crate::preference::{PrefError, Preference};

/// Fourth-order accurate second-difference weights; divide by `12 delta^2`.
const WEIGHTS: [f64; 5] = [-1.0, 16.0, -30.0, 16.0, -1.0];
/// Sum of `|w_a w_b|` over the tensor stencil.
const ABS_WEIGHT_SUM: f64 = 64.0 * 64.0;

/// A mixed fourth difference and the rounding noise it carries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StencilValue {
    pub value: f64,
    pub noise: f64,
}

/// `d^2/ds^2 d^2/dt^2 b(x(s), y(t))` at `s = t = 0` from five points on each curve.
pub fn fourth_derivative_stencil(
    pref: &dyn Preference,
    xs: &[Vec<f64>],
    ys: &[Vec<f64>],
    ds: f64,
    dt: f64,
) -> Result<StencilValue, PrefError> {
    let mut f = [[0.0; 5]; 5];
    let mut max_abs: f64 = 0.0;
    for (a, x) in xs.iter().enumerate() {
        for (b, y) in ys.iter().enumerate() {
            f[a][b] = pref.value(x, y)?;
            max_abs = max_abs.max(f[a][b].abs());
        }
    }
    // The weights sum to zero, so shifting by the centre value changes
    // nothing but the size of the rounding errors.
    let centre = f[2][2];
    let rows = f.map(|row| par::neumaier_sum(row.iter().zip(WEIGHTS).map(|(v, w)| w * (v - centre))));
    let sum = par::neumaier_sum(rows.iter().zip(WEIGHTS).map(|(r, w)| w * r));
    let denom = 144.0 * ds * ds * dt * dt;
    Ok(StencilValue { value: sum / denom, noise: 16.0 * f64::EPSILON * ABS_WEIGHT_SUM * max_abs / denom })
}

/// Stencil value along the b-segments through `(x0, y0)` with image
/// directions `p_dot` (for `x`) and `q_dot` (for `y`).
#[allow(clippy::too_many_arguments)]
pub fn stencil_sample(
    pref: &dyn Preference,
    x0: &[f64],
    y0: &[f64],
    p_dot: &[f64],
    q_dot: &[f64],
    steps: (f64, f64),
    tol: &ToleranceSet,
    x_bounds: (&[f64], &[f64]),
    y_bounds: (&[f64], &[f64]),
) -> Result<StencilValue, SegmentError> {
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if norm(p_dot) == 0.0 || norm(q_dot) == 0.0 {
        return Err(SegmentError::Degenerate);
    }
    let (ds, dt) = steps;
    let sx = solve_b_segment(pref, x0, y0, p_dot, SegmentKind::X, ds, tol, x_bounds)?;
    let sy = solve_b_segment(pref, x0, y0, q_dot, SegmentKind::Y, dt, tol, y_bounds)?;
    Ok(fourth_derivative_stencil(pref, &sx.points, &sy.points, ds, dt)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct B3Sample {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub p_dot: Vec<f64>,
    pub q_dot: Vec<f64>,
    pub value: f64,
    pub value_half: f64,
    pub noise: f64,
    pub verdict: Verdict,
    pub strict_verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct B3Report {
    pub verdict: Verdict,
    /// Verdict for the strict form (B3u).
    pub strict_verdict: Verdict,
    pub samples: Vec<B3Sample>,
    /// Anchors whose segments could not be traced.
    pub excluded: usize,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub exclusion_reasons: Vec<String>,
    pub seed: u64,
    pub delta_s: f64,
    pub delta_t: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl B3Report {
    pub fn not_applicable(note: impl Into<String>, seed: u64) -> Self {
        B3Report {
            verdict: Verdict::NotApplicable,
            strict_verdict: Verdict::NotApplicable,
            samples: Vec::new(),
            excluded: 0,
            exclusion_reasons: Vec::new(),
            seed,
            delta_s: 0.0,
            delta_t: 0.0,
            note: Some(note.into()),
        }
    }

    /// Smallest stencil value over the classified samples.
    pub fn min_value(&self) -> Option<f64> {
        self.samples.iter().map(|s| s.value).min_by(f64::total_cmp)
    }

    /// Largest `|value|` over the classified samples.
    pub fn max_abs_value(&self) -> Option<f64> {
        self.samples.iter().map(|s| s.value.abs()).max_by(f64::total_cmp)
    }
}

fn classify(v: StencilValue, tol: &ToleranceSet) -> (bool, bool) {
    let scale = 1.0;
    (v.value >= -(tol.convex_tol * scale + v.noise), v.value > tol.strict_margin * scale + v.noise)
}

fn combine(full: bool, half: bool) -> Verdict {
    match (full, half) {
        (true, true) => Verdict::Pass,
        (false, false) => Verdict::Fail,
        _ => Verdict::Inconclusive,
    }
}

fn unit_normal(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if n > 1e-12 {
            return v.into_iter().map(|a| a / n).collect();
        }
    }
}

fn aggregate(vs: impl Iterator<Item = Verdict>) -> Verdict {
    let mut out = Verdict::Pass;
    for v in vs {
        match v {
            Verdict::Fail => return Verdict::Fail,
            Verdict::Inconclusive => out = Verdict::Inconclusive,
            _ => {}
        }
    }
    out
}

/// (B3) and (B3u) on `samples` random anchors and directions.
///
/// Anchors are uniform in the domain boxes shrunk by 10% on each side. Each
/// sample is evaluated at steps `delta` and `delta / 2`; disagreement between
/// the two makes it inconclusive.
pub fn check_b3(problem: &ScreeningProblem, d: &DiscreteProblem, samples: usize, seed: u64) -> B3Report {
    let Some(pref) = problem.payoff.preference() else {
        return B3Report::not_applicable("payoff is tabulated; derivatives unavailable", seed);
    };
    if problem.m != problem.n {
        return B3Report::not_applicable("(B3) needs equal dimensions; reduce first", seed);
    }
    let tol = d.tolerances;
    let (xl, xu) = d.types.bounds();
    let (yl, yu) = d.goods.bounds();
    let ds = tol.fd_step * d.types.diameter();
    let dt = tol.fd_step * d.goods.diameter();
    if !(ds > 0.0 && dt > 0.0) {
        return B3Report::not_applicable("a domain has zero diameter", seed);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5851_f42d_4c95_7f2d);
    let inner = |rng: &mut ChaCha8Rng, lo: &[f64], hi: &[f64]| -> Vec<f64> {
        lo.iter().zip(hi).map(|(l, h)| l + (0.1 + 0.8 * rng.random::<f64>()) * (h - l)).collect()
    };
    let params: Vec<_> = (0..samples)
        .map(|_| {
            let x = inner(&mut rng, &xl, &xu);
            let y = inner(&mut rng, &yl, &yu);
            let p = unit_normal(&mut rng, problem.n);
            let q = unit_normal(&mut rng, problem.m);
            (x, y, p, q)
        })
        .collect();

    let results = par::map_indexed(params.len(), |k| {
        let (x, y, p, q) = &params[k];
        let eval = |scale: f64| {
            stencil_sample(pref, x, y, p, q, (ds * scale, dt * scale), &tol, (&xl, &xu), (&yl, &yu))
        };
        let full = eval(1.0)?;
        let half = eval(0.5)?;
        let (w_full, s_full) = classify(full, &tol);
        let (w_half, s_half) = classify(half, &tol);
        Ok::<_, SegmentError>(B3Sample {
            x: x.clone(),
            y: y.clone(),
            p_dot: p.clone(),
            q_dot: q.clone(),
            value: full.value,
            value_half: half.value,
            noise: half.noise,
            verdict: combine(w_full, w_half),
            strict_verdict: combine(s_full, s_half),
        })
    });

    let mut kept = Vec::new();
    let mut reasons = Vec::new();
    let mut excluded = 0;
    for r in results {
        match r {
            Ok(s) => kept.push(s),
            Err(e) => {
                excluded += 1;
                if reasons.len() < super::MAX_WITNESSES {
                    reasons.push(e.to_string());
                }
            }
        }
    }
    let (verdict, strict_verdict, note) = if kept.is_empty() {
        (Verdict::Inconclusive, Verdict::Inconclusive, Some("no sample could be evaluated".to_string()))
    } else {
        (aggregate(kept.iter().map(|s| s.verdict)), aggregate(kept.iter().map(|s| s.strict_verdict)), None)
    };
    B3Report {
        verdict,
        strict_verdict,
        samples: kept,
        excluded,
        exclusion_reasons: reasons,
        seed,
        delta_s: ds,
        delta_t: dt,
        note,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preference::SymbolicPreference;

    #[test]
    fn stencil_of_a_product_of_squares() {
        // b = x^2 y^2 on straight segments: d2/ds2 d2/dt2 = 4.
        let p = SymbolicPreference::parse("x1^2*y1^2", 1, 1).unwrap();
        let xs: Vec<Vec<f64>> = (-2..=2).map(|k| vec![0.5 + 0.01 * k as f64]).collect();
        let ys: Vec<Vec<f64>> = (-2..=2).map(|k| vec![0.3 + 0.02 * k as f64]).collect();
        let v = fourth_derivative_stencil(&p, &xs, &ys, 0.01, 0.02).unwrap();
        assert!((v.value - 4.0).abs() < 1e-6, "{}", v.value);
        assert!(v.noise < 1e-3);
    }

    #[test]
    fn zero_direction_is_excluded() {
        let p = SymbolicPreference::parse("x1*y1", 1, 1).unwrap();
        let r = stencil_sample(
            &p,
            &[0.5],
            &[0.5],
            &[0.0],
            &[1.0],
            (0.01, 0.01),
            &ToleranceSet::default(),
            (&[0.0], &[1.0]),
            (&[0.0], &[1.0]),
        );
        assert_eq!(r, Err(SegmentError::Degenerate));
    }
}
