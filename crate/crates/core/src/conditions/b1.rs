use std::collections::VecDeque;

use nalgebra::DMatrix;

use super::{images_x, images_y, strided, Check, Witness, MAX_WITNESSES};
use crate::cluster;
use crate::domain::{distance, DiscreteProblem, PointSet, ScreeningProblem, Topology};
use crate::par;
use crate::preference::Preference;

/// Goods sampled for the level-set connectivity part.
const CONNECTIVITY_BASES: usize = 4;

fn smallest_singular_value(c: &DMatrix<f64>) -> f64 {
    if c.nrows() == 1 || c.ncols() == 1 {
        return c.norm();
    }
    c.singular_values().iter().copied().fold(f64::INFINITY, f64::min)
}

/// Connected components of `members` in the neighbour graph of `pts`.
fn components(pts: &PointSet, members: &[usize]) -> usize {
    let inside: std::collections::HashSet<usize> = members.iter().copied().collect();
    let mut seen = std::collections::HashSet::new();
    let mut count = 0;
    for &start in members {
        if !seen.insert(start) {
            continue;
        }
        count += 1;
        let mut queue = VecDeque::from([start]);
        while let Some(k) = queue.pop_front() {
            for nb in pts.neighbours(k) {
                if inside.contains(&nb) && seen.insert(nb) {
                    queue.push_back(nb);
                }
            }
        }
    }
    count
}

fn rank_part(pref: &dyn Preference, d: &DiscreteProblem) -> Result<Vec<Witness>, Check> {
    let tol = d.tolerances.rank_tol;
    let per_type = par::map_indexed(d.n_types(), |i| {
        let x = d.types.point(i);
        let mut hits = Vec::new();
        for (j, y) in d.goods.iter().enumerate() {
            match pref.cross(x, y) {
                Ok(c) => {
                    let s = smallest_singular_value(&c);
                    if !(s > tol) {
                        hits.push(Witness::Rank { x: x.to_vec(), y: y.to_vec(), singular_value: s });
                    }
                }
                Err(e) => return Err((i, j, e)),
            }
            if hits.len() >= MAX_WITNESSES {
                break;
            }
        }
        Ok(hits)
    });
    let mut out = Vec::new();
    for r in per_type {
        match r {
            Ok(h) => out.extend(h),
            Err((i, j, e)) => return Err(Check::evaluation_failure(d.types.point(i), d.goods.point(j), &e)),
        }
    }
    Ok(out)
}

/// Image collisions of distinct source points under one gradient map.
fn collision_part(images: &[Vec<f64>], source: &PointSet, base: &[f64], eps: f64) -> Vec<Witness> {
    cluster::collisions(images, eps, MAX_WITNESSES, |a, b| distance(source.point(a), source.point(b)) > eps)
        .into_iter()
        .map(|(a, b, dist)| Witness::Collision {
            base: base.to_vec(),
            a: source.point(a).to_vec(),
            b: source.point(b).to_vec(),
            image_distance: dist,
        })
        .collect()
}

/// (B1): full rank of `D^2_xy b`, injectivity of the gradient map on the
/// lower-dimensional side, and connected level sets on the other.
pub fn check_b1(problem: &ScreeningProblem, d: &DiscreteProblem) -> Check {
    let Some(pref) = problem.payoff.preference() else {
        return Check::not_applicable("payoff is tabulated; derivatives unavailable");
    };
    let (m, n) = (problem.m, problem.n);
    let eps = d.tolerances.cluster_tol;
    let mut witnesses = match rank_part(pref, d) {
        Ok(w) => w,
        Err(c) => return c,
    };

    if m >= n {
        for i in strided(d.n_types(), super::MAX_BASES) {
            let x = d.types.point(i);
            match images_x(pref, x, &d.goods) {
                Ok(img) => witnesses.extend(collision_part(&img, &d.goods, x, eps)),
                Err((j, e)) => return Check::evaluation_failure(x, d.goods.point(j), &e),
            }
        }
    }
    if n >= m {
        for j in strided(d.n_goods(), super::MAX_BASES) {
            let y = d.goods.point(j);
            match images_y(pref, y, &d.types) {
                Ok(img) => witnesses.extend(collision_part(&img, &d.types, y, eps)),
                Err((i, e)) => return Check::evaluation_failure(d.types.point(i), y, &e),
            }
        }
    }

    let mut note = None;
    if m != n {
        // Level sets live on the higher-dimensional side.
        let (source, bases) = if m > n { (&d.types, &d.goods) } else { (&d.goods, &d.types) };
        if matches!(source.topology(), Topology::Discrete) {
            note = Some("level-set connectivity skipped: points have no neighbour structure".to_string());
        } else {
            for k in strided(bases.len(), CONNECTIVITY_BASES) {
                let base = bases.point(k);
                let img = if m > n { images_y(pref, base, source) } else { images_x(pref, base, source) };
                let img = match img {
                    Ok(v) => v,
                    Err((_, e)) => return Check::evaluation_failure(base, base, &e),
                };
                let c = cluster::cluster(&img, eps);
                for members in c.clusters.iter().filter(|c| c.len() > 1) {
                    let parts = components(source, members);
                    if parts > 1 {
                        witnesses.push(Witness::Disconnected {
                            base: base.to_vec(),
                            members: members.len(),
                            components: parts,
                        });
                    }
                }
            }
        }
    }
    let check = Check::from_witnesses(witnesses);
    match note {
        Some(n) => check.with_note(n),
        None => check.with_note(format!("rank threshold {:e}", d.tolerances.rank_tol)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn components_on_a_line() {
        let pts = PointSet::new(1, (0..6).map(|k| k as f64).collect(), Topology::Lattice { shape: vec![6] });
        assert_eq!(components(&pts, &[0, 1, 2]), 1);
        assert_eq!(components(&pts, &[0, 2, 3, 5]), 3);
    }

    #[test]
    fn singular_values() {
        let c = DMatrix::from_row_slice(2, 1, &[1.0, 1.0]);
        assert!((smallest_singular_value(&c) - 2f64.sqrt()).abs() < 1e-15);
        let c = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(smallest_singular_value(&c) < 1e-12);
    }
}
