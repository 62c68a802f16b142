use serde::Serialize;

use super::{images_x, images_y, numerical_rank, spread_singular_values, strided, Check, Side, Witness, MAX_BASES};
use crate::domain::{distance, DiscreteProblem, ScreeningProblem};
use crate::preference::PrefError;

/// Cap on the goods (or types) a level set is compared across.
const MAX_AGAINST: usize = 64;

/// Points sharing a gradient with a base point.
///
/// Side `Types`: types `k` with `D_y b(x_k, y_j) = D_y b(x_i, y_j)`.
/// Side `Goods`: goods `k` with `D_x b(x_i, y_k) = D_x b(x_i, y_j)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelSet {
    pub side: Side,
    pub type_index: usize,
    pub good_index: usize,
    pub members: Vec<usize>,
}

fn members_near(images: &[Vec<f64>], base: usize, eps: f64) -> Vec<usize> {
    (0..images.len()).filter(|&k| distance(&images[k], &images[base]) <= eps).collect()
}

pub fn level_set(problem: &ScreeningProblem, d: &DiscreteProblem, i: usize, j: usize, side: Side) -> Result<LevelSet, PrefError> {
    let pref = problem.payoff.preference().ok_or(PrefError::Tabulated)?;
    let eps = d.tolerances.cluster_tol;
    let (images, base) = match side {
        Side::Types => (images_y(pref, d.goods.point(j), &d.types).map_err(|e| e.1)?, i),
        Side::Goods => (images_x(pref, d.types.point(i), &d.goods).map_err(|e| e.1)?, j),
    };
    Ok(LevelSet { side, type_index: i, good_index: j, members: members_near(&images, base, eps) })
}

/// b-linearity seen from one base point: the centered gradient image has
/// rank at most the smaller dimension.
///
/// Side `Types` (`m > n`): `base` is a type and the image is `D_x b(x0, Y)`.
/// Side `Goods` (`n > m`): `base` is a good and the image is `D_y b(X, y0)`.
pub fn check_b_linearity(problem: &ScreeningProblem, d: &DiscreteProblem, base: usize, side: Side) -> Check {
    let Some(pref) = problem.payoff.preference() else {
        return Check::not_applicable("payoff is tabulated; derivatives unavailable");
    };
    let (low, high) = match side {
        Side::Types => (problem.n, problem.m),
        Side::Goods => (problem.m, problem.n),
    };
    if high <= low {
        return Check::not_applicable("b-linearity applies only when the reduced side has larger dimension");
    }
    let (point, images) = match side {
        Side::Types => (d.types.point(base), images_x(pref, d.types.point(base), &d.goods)),
        Side::Goods => (d.goods.point(base), images_y(pref, d.goods.point(base), &d.types)),
    };
    let images = match images {
        Ok(v) => v,
        Err((_, e)) => return Check::evaluation_failure(point, point, &e),
    };
    let sv = spread_singular_values(&images);
    let rank = numerical_rank(&sv, d.tolerances.rank_tol);
    if rank <= low {
        Check::pass()
    } else {
        Check::from_witnesses(vec![Witness::Linearity { base: point.to_vec(), rank, singular_values: sv }])
    }
}

/// [`check_b_linearity`] over evenly spread base points.
pub fn check_b_linearity_all(problem: &ScreeningProblem, d: &DiscreteProblem, side: Side) -> Check {
    let count = match side {
        Side::Types => d.n_types(),
        Side::Goods => d.n_goods(),
    };
    let mut witnesses = Vec::new();
    for base in strided(count, MAX_BASES) {
        let c = check_b_linearity(problem, d, base, side);
        match c.verdict {
            super::Verdict::Pass => {}
            super::Verdict::Fail => witnesses.extend(c.witnesses),
            _ => return c,
        }
    }
    Check::from_witnesses(witnesses)
}

/// Level sets do not depend on the point they are measured against.
pub fn check_level_independence(problem: &ScreeningProblem, d: &DiscreteProblem, side: Side) -> Check {
    let Some(pref) = problem.payoff.preference() else {
        return Check::not_applicable("payoff is tabulated; derivatives unavailable");
    };
    let applicable = match side {
        Side::Types => problem.m > problem.n,
        Side::Goods => problem.n > problem.m,
    };
    if !applicable {
        return Check::not_applicable("level-set independence applies only when the reduced side has larger dimension");
    }
    let eps = d.tolerances.cluster_tol;
    let (source, against) = match side {
        Side::Types => (&d.types, &d.goods),
        Side::Goods => (&d.goods, &d.types),
    };
    let bases = strided(source.len(), MAX_BASES);
    let mut reference: Option<(usize, Vec<Vec<usize>>)> = None;
    let mut witnesses = Vec::new();
    for k in strided(against.len(), MAX_AGAINST) {
        let at = against.point(k);
        let images = match side {
            Side::Types => images_y(pref, at, source),
            Side::Goods => images_x(pref, at, source),
        };
        let images = match images {
            Ok(v) => v,
            Err((i, e)) => return Check::evaluation_failure(source.point(i), at, &e),
        };
        let sets: Vec<Vec<usize>> = bases.iter().map(|&b| members_near(&images, b, eps)).collect();
        match &reference {
            None => reference = Some((k, sets)),
            Some((k0, ref_sets)) => {
                for (slot, &b) in bases.iter().enumerate() {
                    let (a, c) = (&ref_sets[slot], &sets[slot]);
                    if a != c {
                        let only_in_a = a.iter().filter(|x| c.binary_search(x).is_err()).count();
                        let only_in_b = c.iter().filter(|x| a.binary_search(x).is_err()).count();
                        witnesses.push(Witness::LevelSets {
                            base: source.point(b).to_vec(),
                            a: against.point(*k0).to_vec(),
                            b: at.to_vec(),
                            only_in_a,
                            only_in_b,
                        });
                    }
                }
            }
        }
        if witnesses.len() >= super::MAX_WITNESSES {
            break;
        }
    }
    Check::from_witnesses(witnesses)
}
