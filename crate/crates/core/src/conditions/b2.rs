use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    cloud_diameter, images_x, images_y, numerical_rank, project_principal, spread_singular_values, strided, Check, Side, Witness,
    MAX_BASES,
};
use crate::domain::{distance, DiscreteProblem, PointSet, ScreeningProblem};

/// Midpoint pairs tested per base point.
const MAX_PAIRS: usize = 256;

/// Worst failing midpoint of `images`, if any.
///
/// Each image point `I_j` covers a ball whose radius is its largest distance
/// to the images of its grid neighbours, so a midpoint that falls between
/// adjacent samples of a convex image is accepted.
fn midpoint_failure(images: &[Vec<f64>], source: &PointSet, slack: f64, rng: &mut ChaCha8Rng) -> Option<(Vec<f64>, f64, f64)> {
    let n = images.len();
    if n < 2 {
        return None;
    }
    let radius: Vec<f64> = (0..n)
        .map(|j| source.neighbours(j).into_iter().map(|k| distance(&images[j], &images[k])).fold(0.0, f64::max))
        .collect();
    let total = n * (n - 1) / 2;
    let pairs: Vec<(usize, usize)> = if total <= MAX_PAIRS {
        (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect()
    } else {
        (0..MAX_PAIRS)
            .map(|_| {
                let a = rng.random_range(0..n);
                let mut b = rng.random_range(0..n - 1);
                if b >= a {
                    b += 1;
                }
                (a.min(b), a.max(b))
            })
            .collect()
    };
    let mut worst: Option<(Vec<f64>, f64, f64)> = None;
    for (a, b) in pairs {
        let mid: Vec<f64> = images[a].iter().zip(&images[b]).map(|(p, q)| (p + q) / 2.0).collect();
        let mut covered = false;
        let mut nearest = (f64::INFINITY, 0.0);
        for (j, img) in images.iter().enumerate() {
            let dist = distance(&mid, img);
            if dist <= radius[j] + slack {
                covered = true;
                break;
            }
            if dist - radius[j] < nearest.0 - nearest.1 {
                nearest = (dist, radius[j]);
            }
        }
        if !covered && worst.as_ref().is_none_or(|w| nearest.0 - nearest.1 > w.1 - w.2) {
            worst = Some((mid, nearest.0, nearest.1));
        }
    }
    worst
}

/// (B2) for one side: the gradient images `D_x b(x0, Y)` (side `Goods`) or
/// `D_y b(X, y0)` (side `Types`) are convex for sampled base points.
///
/// When the image lives in a space of higher dimension than its source, it
/// must first be b-linear; midpoints are then tested in the principal
/// coordinates of its affine hull.
pub fn check_b2_side(problem: &ScreeningProblem, d: &DiscreteProblem, side: Side, seed: u64) -> Check {
    let Some(pref) = problem.payoff.preference() else {
        return Check::not_applicable("payoff is tabulated; derivatives unavailable");
    };
    let tol = d.tolerances;
    let (bases, source, image_dim, source_dim) = match side {
        Side::Goods => (&d.types, &d.goods, problem.m, problem.n),
        Side::Types => (&d.goods, &d.types, problem.n, problem.m),
    };
    let salt = match side {
        Side::Goods => 0x9e37_79b9_7f4a_7c15,
        Side::Types => 0xc2b2_ae3d_27d4_eb4f,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ salt);
    let mut witnesses = Vec::new();
    for k in strided(bases.len(), MAX_BASES) {
        let base = bases.point(k);
        let images = match side {
            Side::Goods => images_x(pref, base, source),
            Side::Types => images_y(pref, base, source),
        };
        let images = match images {
            Ok(v) => v,
            Err((i, e)) => return Check::evaluation_failure(base, source.point(i), &e),
        };
        let images = if image_dim > source_dim {
            let sv = spread_singular_values(&images);
            let rank = numerical_rank(&sv, tol.rank_tol);
            if rank > source_dim {
                witnesses.push(Witness::Linearity { base: base.to_vec(), rank, singular_values: sv });
                continue;
            }
            project_principal(&images, source_dim)
        } else {
            images
        };
        let diam = cloud_diameter(&images);
        if let Some((midpoint, distance, allowance)) = midpoint_failure(&images, source, tol.convex_tol * diam, &mut rng) {
            witnesses.push(Witness::Midpoint { base: base.to_vec(), midpoint, distance, allowance });
        }
    }
    Check::from_witnesses(witnesses)
}
