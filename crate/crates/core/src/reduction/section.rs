//! Effective preferences evaluated through a local section of the quotient
//! map. A section picks, for an effective coordinate, one point of the
//! original space that maps to it, by moving only a fixed set of chart
//! coordinates away from a base point.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::domain::ToleranceSet;
use crate::preference::{PrefError, Preference};

/// Rows of `mat` (`big x k`) whose `k x k` minor has the largest `|det|`;
/// lexicographically first on ties.
pub(crate) fn best_chart(mat: &DMatrix<f64>) -> Vec<usize> {
    let (big, k) = mat.shape();
    let mut best = ((0..k).collect::<Vec<_>>(), -1.0);
    let mut combo: Vec<usize> = (0..k).collect();
    loop {
        let minor = DMatrix::from_fn(k, k, |r, c| mat[(combo[r], c)]);
        let det = minor.determinant().abs();
        if det > best.1 {
            best = (combo.clone(), det);
        }
        // Next k-combination of 0..big.
        let mut i = k;
        loop {
            if i == 0 {
                return best.0;
            }
            i -= 1;
            if combo[i] < big - k + i {
                break;
            }
        }
        combo[i] += 1;
        for r in i + 1..k {
            combo[r] = combo[r - 1] + 1;
        }
    }
}

/// Solves `grad(p) = target` for the chart coordinates of `p`, starting at
/// `base`. `jac(p)` is the `k x k` derivative of `grad` in those coordinates.
fn newton_chart(
    base: &[f64],
    chart: &[usize],
    target: &[f64],
    tol: &ToleranceSet,
    grad: impl Fn(&[f64]) -> Result<DVector<f64>, PrefError>,
    jac: impl Fn(&[f64]) -> Result<DMatrix<f64>, PrefError>,
) -> Result<Vec<f64>, PrefError> {
    let t = DVector::from_column_slice(target);
    let scale = 1.0 + t.norm();
    let mut p = base.to_vec();
    for _ in 0..tol.newton_max_iter {
        let r = grad(&p)? - &t;
        if r.norm() <= tol.newton_tol * scale {
            return Ok(p);
        }
        let step = jac(&p)?.lu().solve(&(-r)).ok_or_else(|| PrefError::Section(target.to_vec()))?;
        for (s, &a) in chart.iter().enumerate() {
            p[a] += step[s];
        }
        if p.iter().any(|v| !v.is_finite()) {
            break;
        }
    }
    // Accept a last iterate that is good to a looser tolerance; roundoff can
    // stall the residual just above `newton_tol`.
    let r = grad(&p)? - &t;
    if r.norm() <= 1e3 * tol.newton_tol * scale {
        Ok(p)
    } else {
        Err(PrefError::Section(target.to_vec()))
    }
}

/// `h(z, y) = b(x(z), y) - b(x(z), y0)` where `D_y b(x(z), y0) = z`.
#[derive(Debug, Clone)]
pub struct TypeSection {
    pref: Arc<dyn Preference>,
    y0: Vec<f64>,
    base: Vec<f64>,
    chart: Vec<usize>,
    tol: ToleranceSet,
}

impl TypeSection {
    pub fn new(pref: Arc<dyn Preference>, y0: Vec<f64>, base: Vec<f64>, tol: ToleranceSet) -> Result<Self, PrefError> {
        let chart = best_chart(&pref.cross(&base, &y0)?);
        Ok(TypeSection { pref, y0, base, chart, tol })
    }

    /// Type coordinates varied by the section.
    pub fn chart(&self) -> &[usize] {
        &self.chart
    }

    /// `J[c][s] = d^2 b(x, y0) / dy_c dx_{S_s}`.
    fn jac(&self, x: &[f64]) -> Result<DMatrix<f64>, PrefError> {
        let cr = self.pref.cross(x, &self.y0)?;
        let k = self.chart.len();
        Ok(DMatrix::from_fn(k, k, |c, s| cr[(self.chart[s], c)]))
    }

    pub fn lift(&self, z: &[f64]) -> Result<Vec<f64>, PrefError> {
        newton_chart(&self.base, &self.chart, z, &self.tol, |x| self.pref.grad_y(x, &self.y0), |x| self.jac(x))
    }
}

impl Preference for TypeSection {
    fn type_dim(&self) -> usize {
        self.pref.good_dim()
    }

    fn good_dim(&self) -> usize {
        self.pref.good_dim()
    }

    fn value(&self, z: &[f64], y: &[f64]) -> Result<f64, PrefError> {
        let x = self.lift(z)?;
        Ok(self.pref.value(&x, y)? - self.pref.value(&x, &self.y0)?)
    }

    fn grad_x(&self, z: &[f64], y: &[f64]) -> Result<DVector<f64>, PrefError> {
        let x = self.lift(z)?;
        let g1 = self.pref.grad_x(&x, y)?;
        let g0 = self.pref.grad_x(&x, &self.y0)?;
        let d = DVector::from_iterator(self.chart.len(), self.chart.iter().map(|&a| g1[a] - g0[a]));
        self.jac(&x)?.transpose().lu().solve(&d).ok_or_else(|| PrefError::Section(z.to_vec()))
    }

    fn grad_y(&self, z: &[f64], y: &[f64]) -> Result<DVector<f64>, PrefError> {
        self.pref.grad_y(&self.lift(z)?, y)
    }

    fn cross(&self, z: &[f64], y: &[f64]) -> Result<DMatrix<f64>, PrefError> {
        let x = self.lift(z)?;
        let cr = self.pref.cross(&x, y)?;
        let n = cr.ncols();
        let rows = DMatrix::from_fn(self.chart.len(), n, |s, j| cr[(self.chart[s], j)]);
        self.jac(&x)?.transpose().lu().solve(&rows).ok_or_else(|| PrefError::Section(z.to_vec()))
    }
}

/// `h(x, w) = b(x, y(w)) - b(x0, y(w))` where `D_x b(x0, y(w)) = w`.
#[derive(Debug, Clone)]
pub struct GoodsSection {
    pref: Arc<dyn Preference>,
    x0: Vec<f64>,
    base: Vec<f64>,
    chart: Vec<usize>,
    tol: ToleranceSet,
}

impl GoodsSection {
    pub fn new(pref: Arc<dyn Preference>, x0: Vec<f64>, base: Vec<f64>, tol: ToleranceSet) -> Result<Self, PrefError> {
        let chart = best_chart(&pref.cross(&x0, &base)?.transpose());
        Ok(GoodsSection { pref, x0, base, chart, tol })
    }

    /// Good coordinates varied by the section.
    pub fn chart(&self) -> &[usize] {
        &self.chart
    }

    /// `K[a][s] = d^2 b(x0, y) / dx_a dy_{S_s}`.
    fn jac(&self, y: &[f64]) -> Result<DMatrix<f64>, PrefError> {
        let cr = self.pref.cross(&self.x0, y)?;
        let k = self.chart.len();
        Ok(DMatrix::from_fn(k, k, |a, s| cr[(a, self.chart[s])]))
    }

    pub fn lift(&self, w: &[f64]) -> Result<Vec<f64>, PrefError> {
        newton_chart(&self.base, &self.chart, w, &self.tol, |y| self.pref.grad_x(&self.x0, y), |y| self.jac(y))
    }
}

impl Preference for GoodsSection {
    fn type_dim(&self) -> usize {
        self.pref.type_dim()
    }

    fn good_dim(&self) -> usize {
        self.pref.type_dim()
    }

    fn value(&self, x: &[f64], w: &[f64]) -> Result<f64, PrefError> {
        let y = self.lift(w)?;
        Ok(self.pref.value(x, &y)? - self.pref.value(&self.x0, &y)?)
    }

    fn grad_x(&self, x: &[f64], w: &[f64]) -> Result<DVector<f64>, PrefError> {
        self.pref.grad_x(x, &self.lift(w)?)
    }

    fn grad_y(&self, x: &[f64], w: &[f64]) -> Result<DVector<f64>, PrefError> {
        let y = self.lift(w)?;
        let g1 = self.pref.grad_y(x, &y)?;
        let g0 = self.pref.grad_y(&self.x0, &y)?;
        let d = DVector::from_iterator(self.chart.len(), self.chart.iter().map(|&s| g1[s] - g0[s]));
        self.jac(&y)?.transpose().lu().solve(&d).ok_or_else(|| PrefError::Section(w.to_vec()))
    }

    fn cross(&self, x: &[f64], w: &[f64]) -> Result<DMatrix<f64>, PrefError> {
        let y = self.lift(w)?;
        let cr = self.pref.cross(x, &y)?;
        let m = cr.nrows();
        let cols = DMatrix::from_fn(m, self.chart.len(), |a, s| cr[(a, self.chart[s])]);
        let kinv = self.jac(&y)?.try_inverse().ok_or_else(|| PrefError::Section(w.to_vec()))?;
        Ok(cols * kinv)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preference::SymbolicPreference;

    #[test]
    fn chart_prefers_the_strongest_minor() {
        let m = DMatrix::from_row_slice(3, 1, &[0.5, 2.0, -2.0]);
        assert_eq!(best_chart(&m), vec![1]);
        let m = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 0.0, 3.0]);
        assert_eq!(best_chart(&m), vec![0, 2]);
    }

    #[test]
    fn type_section_of_a_sum() {
        let b: Arc<dyn Preference> = Arc::new(SymbolicPreference::parse("(x1+x2)*y1^2 + x1", 2, 1).unwrap());
        let s = TypeSection::new(b, vec![1.0], vec![0.3, 0.4], ToleranceSet::default()).unwrap();
        // D_y b(x, 1) = 2 (x1 + x2), so z = 1.2 means x1 + x2 = 0.6 and h = 0.6 (y^2 - 1).
        let (z, y) = ([1.2], [0.5]);
        assert!((s.value(&z, &y).unwrap() - 0.6 * (0.25 - 1.0)).abs() < 1e-12);
        // dh/dz = (y^2 - 1) / 2.
        assert!((s.grad_x(&z, &y).unwrap()[0] - (0.25 - 1.0) / 2.0).abs() < 1e-12);
        // d2h/dz dy = y.
        assert!((s.cross(&z, &y).unwrap()[(0, 0)] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn goods_section_of_a_sum() {
        let b: Arc<dyn Preference> = Arc::new(SymbolicPreference::parse("x1*(y1+y2) + y1^2", 1, 2).unwrap());
        let s = GoodsSection::new(b, vec![0.0], vec![0.2, 0.2], ToleranceSet::default()).unwrap();
        let (x, w) = ([0.7], [0.9]);
        assert!((s.value(&x, &w).unwrap() - 0.7 * 0.9).abs() < 1e-12);
        assert!((s.grad_y(&x, &w).unwrap()[0] - 0.7).abs() < 1e-12);
        assert!((s.grad_x(&x, &w).unwrap()[0] - 0.9).abs() < 1e-12);
        assert!((s.cross(&x, &w).unwrap()[(0, 0)] - 1.0).abs() < 1e-12);
    }
}
