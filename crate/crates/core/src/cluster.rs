//! Single-linkage clustering of points at a fixed radius.

use std::collections::HashMap;

use petgraph::unionfind::UnionFind;

use crate::domain::distance;

/// Clusters numbered by their smallest member; members listed ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub labels: Vec<usize>,
    pub clusters: Vec<Vec<usize>>,
}

impl Clustering {
    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    fn from_roots(roots: Vec<usize>) -> Self {
        let mut id_of_root = HashMap::new();
        let mut labels = Vec::with_capacity(roots.len());
        let mut clusters: Vec<Vec<usize>> = Vec::new();
        for (i, r) in roots.into_iter().enumerate() {
            let id = *id_of_root.entry(r).or_insert_with(|| {
                clusters.push(Vec::new());
                clusters.len() - 1
            });
            clusters[id].push(i);
            labels.push(id);
        }
        Clustering { labels, clusters }
    }
}

struct Grid {
    cell: f64,
    cells: HashMap<Vec<i64>, Vec<usize>>,
}

impl Grid {
    fn new(points: &[Vec<f64>], cell: f64) -> Self {
        let mut cells: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            cells.entry(key(p, cell)).or_default().push(i);
        }
        Grid { cell, cells }
    }

    /// Indices of points in cells within `reach` cells of `p`'s cell.
    fn around(&self, p: &[f64], reach: i64, mut f: impl FnMut(usize)) {
        let base = key(p, self.cell);
        let d = base.len();
        let span = (2 * reach + 1) as usize;
        if (span as f64).powi(d as i32) > self.cells.len() as f64 {
            // High dimension: scanning occupied cells is cheaper than
            // enumerating the neighbourhood. Sorted for a stable visit order.
            let mut hits: Vec<usize> = self
                .cells
                .iter()
                .filter(|(k, _)| k.iter().zip(&base).all(|(a, b)| (a - b).abs() <= reach))
                .flat_map(|(_, v)| v.iter().copied())
                .collect();
            hits.sort_unstable();
            hits.into_iter().for_each(f);
            return;
        }
        let mut k = base.clone();
        for code in 0..span.pow(d as u32) {
            let mut c = code;
            for a in 0..d {
                k[a] = base[a] + (c % span) as i64 - reach;
                c /= span;
            }
            if let Some(v) = self.cells.get(&k) {
                v.iter().for_each(|&i| f(i));
            }
        }
    }
}

fn key(p: &[f64], cell: f64) -> Vec<i64> {
    p.iter().map(|v| (v / cell).floor() as i64).collect()
}

/// Links every pair of points at distance `<= eps` and returns the
/// connected components. Independent of input order up to relabelling.
pub fn cluster(points: &[Vec<f64>], eps: f64) -> Clustering {
    let n = points.len();
    let mut uf = UnionFind::<usize>::new(n);
    let grid = Grid::new(points, eps);
    for (i, p) in points.iter().enumerate() {
        grid.around(p, 1, |k| {
            if k > i && distance(p, &points[k]) <= eps {
                uf.union(i, k);
            }
        });
    }
    Clustering::from_roots((0..n).map(|i| uf.find(i)).collect())
}

/// Closest pair of points from different clusters, if any lies within
/// `radius`. Used to warn about clusters that nearly chain together.
pub fn nearest_foreign_pair(points: &[Vec<f64>], c: &Clustering, eps: f64, radius: f64) -> Option<(usize, usize, f64)> {
    let grid = Grid::new(points, eps);
    let reach = (radius / eps).ceil() as i64;
    let mut best: Option<(usize, usize, f64)> = None;
    for (i, p) in points.iter().enumerate() {
        grid.around(p, reach, |k| {
            if k > i && c.labels[k] != c.labels[i] {
                let d = distance(p, &points[k]);
                if d <= radius && best.is_none_or(|b| d < b.2) {
                    best = Some((i, k, d));
                }
            }
        });
    }
    best
}

/// Pairs `(i, k)` with `i < k`, distinct under `separated`, whose points lie
/// within `eps`. Stops after `limit` hits.
pub fn collisions(
    points: &[Vec<f64>],
    eps: f64,
    limit: usize,
    separated: impl Fn(usize, usize) -> bool,
) -> Vec<(usize, usize, f64)> {
    let grid = Grid::new(points, eps);
    let mut out = Vec::new();
    for (i, p) in points.iter().enumerate() {
        let mut hits = Vec::new();
        grid.around(p, 1, |k| {
            if k > i && separated(i, k) {
                let d = distance(p, &points[k]);
                if d <= eps {
                    hits.push((i, k, d));
                }
            }
        });
        hits.sort_by_key(|h| h.1);
        out.extend(hits);
        if out.len() >= limit {
            out.truncate(limit);
            break;
        }
    }
    out
}
