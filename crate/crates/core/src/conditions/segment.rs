use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::domain::ToleranceSet;
use crate::preference::{PrefError, Preference};

/// Stencil offsets in units of the step.
pub const STENCIL_OFFSETS: [f64; 5] = [-2.0, -1.0, 0.0, 1.0, 2.0];

/// `Y`: the curve `y(t)` with `D_x b(x0, y(t)) = D_x b(x0, y0) + t q`.
/// `X`: the curve `x(s)` with `D_y b(x(s), y0) = D_y b(x0, y0) + s p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    X,
    Y,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SegmentError {
    #[error("direction has zero length")]
    Degenerate,
    #[error("direction has length {got}, expected {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("cross derivative is singular at {0:?}")]
    Singular(Vec<f64>),
    #[error("Newton did not converge at offset {offset} (residual {residual:e})")]
    Diverged { offset: f64, residual: f64 },
    #[error("segment leaves the domain at offset {offset}: {point:?}")]
    OutOfDomain { offset: f64, point: Vec<f64> },
    #[error(transparent)]
    Eval(#[from] PrefError),
}

/// A b-segment sampled at the five stencil offsets.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BSegment {
    pub kind: SegmentKind,
    pub anchor_x: Vec<f64>,
    pub anchor_y: Vec<f64>,
    pub direction: Vec<f64>,
    pub delta: f64,
    /// Curve points at `STENCIL_OFFSETS[k] * delta`.
    pub points: Vec<Vec<f64>>,
    pub max_residual: f64,
}

struct Map<'a> {
    pref: &'a dyn Preference,
    kind: SegmentKind,
    x0: &'a [f64],
    y0: &'a [f64],
}

impl Map<'_> {
    fn value(&self, z: &[f64]) -> Result<DVector<f64>, PrefError> {
        match self.kind {
            SegmentKind::Y => self.pref.grad_x(self.x0, z),
            SegmentKind::X => self.pref.grad_y(z, self.y0),
        }
    }

    fn jacobian(&self, z: &[f64]) -> Result<DMatrix<f64>, PrefError> {
        match self.kind {
            SegmentKind::Y => self.pref.cross(self.x0, z),
            SegmentKind::X => Ok(self.pref.cross(z, self.y0)?.transpose()),
        }
    }

    fn newton(&self, start: &[f64], target: &DVector<f64>, tol: &ToleranceSet, offset: f64) -> Result<(Vec<f64>, f64), SegmentError> {
        let scale = 1.0 + target.norm();
        let mut z = DVector::from_column_slice(start);
        let mut res = self.value(z.as_slice())? - target;
        for _ in 0..tol.newton_max_iter {
            if res.norm() <= tol.newton_tol * scale {
                // One polishing step, kept only if it does not hurt.
                if let Ok(step) = self.step(&z, &res) {
                    let z2 = &z + step;
                    if let Ok(v) = self.value(z2.as_slice()) {
                        let r2 = v - target;
                        if r2.norm() < res.norm() {
                            return Ok((z2.as_slice().to_vec(), r2.norm()));
                        }
                    }
                }
                return Ok((z.as_slice().to_vec(), res.norm()));
            }
            z += self.step(&z, &res)?;
            if z.iter().any(|v| !v.is_finite()) {
                break;
            }
            res = self.value(z.as_slice())? - target;
        }
        Err(SegmentError::Diverged { offset, residual: res.norm() })
    }

    fn step(&self, z: &DVector<f64>, res: &DVector<f64>) -> Result<DVector<f64>, SegmentError> {
        let j = self.jacobian(z.as_slice())?;
        j.lu().solve(&(-res)).ok_or_else(|| SegmentError::Singular(z.as_slice().to_vec()))
    }
}

/// Traces a b-segment through `(x0, y0)` in image direction `direction`.
///
/// Requires equal dimensions and an invertible cross derivative along the
/// curve. Every stencil point must stay inside the box `[lower, upper]` of the
/// variable being traced.
#[allow(clippy::too_many_arguments)]
pub fn solve_b_segment(
    pref: &dyn Preference,
    x0: &[f64],
    y0: &[f64],
    direction: &[f64],
    kind: SegmentKind,
    delta: f64,
    tol: &ToleranceSet,
    bounds: (&[f64], &[f64]),
) -> Result<BSegment, SegmentError> {
    let map = Map { pref, kind, x0, y0 };
    let anchor = match kind {
        SegmentKind::Y => y0,
        SegmentKind::X => x0,
    };
    let base = map.value(anchor)?;
    if direction.len() != base.len() {
        return Err(SegmentError::Dimension { expected: base.len(), got: direction.len() });
    }
    let dir = DVector::from_column_slice(direction);
    let (lower, upper) = bounds;
    let slack = 1e-9 * (1.0 + lower.iter().zip(upper).map(|(l, u)| (u - l).abs()).fold(0.0, f64::max));

    let mut points = vec![Vec::new(); 5];
    points[2] = anchor.to_vec();
    let mut max_residual: f64 = 0.0;
    // Walk outward from the anchor, warm-starting each offset from its inner neighbour.
    for (from, to) in [(2, 3), (3, 4), (2, 1), (1, 0)] {
        let offset = STENCIL_OFFSETS[to];
        let target = &base + &dir * (offset * delta);
        let (z, r) = map.newton(&points[from].clone(), &target, tol, offset)?;
        if z.iter().zip(lower.iter().zip(upper)).any(|(v, (l, u))| *v < l - slack || *v > u + slack) {
            return Err(SegmentError::OutOfDomain { offset, point: z });
        }
        max_residual = max_residual.max(r);
        points[to] = z;
    }
    Ok(BSegment {
        kind,
        anchor_x: x0.to_vec(),
        anchor_y: y0.to_vec(),
        direction: direction.to_vec(),
        delta,
        points,
        max_residual,
    })
}
