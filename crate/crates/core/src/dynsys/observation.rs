//! Observation maps `omega: M -> R^d` and observed input ranges.

use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{check_dim, fd_jacobian, plain_diff, spectral_norm, FD_STEP};

pub type ObservationFn = dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync;

#[derive(Clone)]
pub enum ObservationKind {
    CoordinateProjection(Vec<usize>),
    Linear(DMatrix<f64>),
    /// `omega(m) = sum_i sin(2 pi m_i)`, smooth on the unit torus.
    SineSum,
    Custom {
        name: String,
        obs_dim: usize,
        f: Arc<ObservationFn>,
    },
}

impl fmt::Debug for ObservationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::CoordinateProjection(idx) => write!(f, "CoordinateProjection({idx:?})"),
            Self::Linear(m) => write!(f, "Linear({}x{})", m.nrows(), m.ncols()),
            Self::SineSum => write!(f, "SineSum"),
            Self::Custom { name, .. } => write!(f, "Custom({name})"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ObservationMap {
    phase_dim: usize,
    kind: ObservationKind,
}

impl ObservationMap {
    pub fn projection(phase_dim: usize, indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidParameter("projection needs at least one index".into()));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= phase_dim) {
            return Err(Error::InvalidParameter(format!(
                "projection index {bad} out of range for dimension {phase_dim}"
            )));
        }
        Ok(Self {
            phase_dim,
            kind: ObservationKind::CoordinateProjection(indices),
        })
    }

    /// Observe coordinate `index`.
    pub fn coordinate(phase_dim: usize, index: usize) -> Result<Self> {
        Self::projection(phase_dim, vec![index])
    }

    pub fn linear(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() == 0 || matrix.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("observation matrix must be non-empty and finite".into()));
        }
        Ok(Self {
            phase_dim: matrix.ncols(),
            kind: ObservationKind::Linear(matrix),
        })
    }

    pub fn sine_sum(phase_dim: usize) -> Self {
        Self {
            phase_dim,
            kind: ObservationKind::SineSum,
        }
    }

    pub fn custom(name: &str, phase_dim: usize, obs_dim: usize, f: Arc<ObservationFn>) -> Self {
        Self {
            phase_dim,
            kind: ObservationKind::Custom {
                name: name.to_string(),
                obs_dim,
                f,
            },
        }
    }

    pub fn kind(&self) -> &ObservationKind {
        &self.kind
    }

    pub fn phase_dim(&self) -> usize {
        self.phase_dim
    }

    pub fn obs_dim(&self) -> usize {
        match &self.kind {
            ObservationKind::CoordinateProjection(idx) => idx.len(),
            ObservationKind::Linear(m) => m.nrows(),
            ObservationKind::SineSum => 1,
            ObservationKind::Custom { obs_dim, .. } => *obs_dim,
        }
    }

    pub fn has_analytic_derivative(&self) -> bool {
        !matches!(self.kind, ObservationKind::Custom { .. })
    }

    pub fn observe(&self, m: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("observed phase point", self.phase_dim, m.len())?;
        let z = match &self.kind {
            ObservationKind::CoordinateProjection(idx) => {
                DVector::from_iterator(idx.len(), idx.iter().map(|&i| m[i]))
            }
            ObservationKind::Linear(a) => a * m,
            ObservationKind::SineSum => {
                DVector::from_element(1, m.iter().map(|x| (TAU * x).sin()).sum())
            }
            ObservationKind::Custom { f, obs_dim, .. } => {
                let z = f(m);
                check_dim("custom observation output", *obs_dim, z.len())?;
                z
            }
        };
        if z.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                context: "observation".into(),
                substep: 0,
            });
        }
        Ok(z)
    }

    pub fn jacobian(&self, m: &DVector<f64>) -> Result<DMatrix<f64>> {
        check_dim("observed phase point", self.phase_dim, m.len())?;
        Ok(match &self.kind {
            ObservationKind::CoordinateProjection(idx) => {
                DMatrix::from_fn(idx.len(), self.phase_dim, |r, c| if idx[r] == c { 1.0 } else { 0.0 })
            }
            ObservationKind::Linear(a) => a.clone(),
            ObservationKind::SineSum => {
                DMatrix::from_fn(1, self.phase_dim, |_, c| TAU * (TAU * m[c]).cos())
            }
            ObservationKind::Custom { .. } => fd_jacobian(|x| self.observe(x), plain_diff, m, FD_STEP)?,
        })
    }

    /// `sup |D omega|` over `samples`; position-independent for linear kinds.
    pub fn derivative_norm_sup(&self, samples: &[DVector<f64>]) -> Result<f64> {
        match &self.kind {
            ObservationKind::CoordinateProjection(idx) => {
                let mut sorted = idx.clone();
                sorted.sort_unstable();
                sorted.dedup();
                if sorted.len() == idx.len() {
                    // Distinct coordinates: a partial isometry.
                    return Ok(1.0);
                }
                Ok(spectral_norm(&self.jacobian(&DVector::zeros(self.phase_dim))?))
            }
            ObservationKind::Linear(_) => {
                let origin = DVector::zeros(self.phase_dim);
                Ok(spectral_norm(&self.jacobian(&origin)?))
            }
            _ => samples.iter().try_fold(0.0f64, |acc, m| {
                Ok(acc.max(spectral_norm(&self.jacobian(m)?)))
            }),
        }
    }

    /// Componentwise range of `omega` over `samples`.
    pub fn observed_range(&self, samples: &[DVector<f64>]) -> Result<InputRange> {
        let d = self.obs_dim();
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for m in samples {
            let z = self.observe(m)?;
            for k in 0..d {
                lo[k] = lo[k].min(z[k]);
                hi[k] = hi[k].max(z[k]);
            }
        }
        InputRange::new(lo, hi)
    }
}

/// Axis-aligned box of admissible inputs (the observed `omega(M)`).
#[derive(Debug, Clone, PartialEq)]
pub struct InputRange {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl InputRange {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(Error::InvalidParameter("input range bounds must be non-empty and equal length".into()));
        }
        if lo.iter().zip(&hi).any(|(l, h)| !(l.is_finite() && h.is_finite() && l <= h)) {
            return Err(Error::InvalidParameter(format!("invalid input range {lo:?}..{hi:?}")));
        }
        Ok(Self { lo, hi })
    }

    pub fn scalar(lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo], vec![hi])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, z: &DVector<f64>) -> bool {
        z.len() == self.dim() && z.iter().zip(self.lo.iter().zip(&self.hi)).all(|(x, (l, h))| l <= x && x <= h)
    }

    /// Deterministic grid of roughly `count` inputs, endpoints included.
    pub fn samples(&self, count: usize) -> Vec<DVector<f64>> {
        let d = self.dim();
        let per_axis = ((count.max(1) as f64).powf(1.0 / d as f64).ceil() as usize).max(2);
        grid_points(&self.lo, &self.hi, per_axis)
    }
}

/// Tensor grid with `per_axis` evenly spaced points per axis (1 point on
/// degenerate axes).
pub(crate) fn grid_points(lo: &[f64], hi: &[f64], per_axis: usize) -> Vec<DVector<f64>> {
    let axes: Vec<Vec<f64>> = lo
        .iter()
        .zip(hi)
        .map(|(&l, &h)| {
            if h == l || per_axis < 2 {
                vec![0.5 * (l + h)]
            } else {
                (0..per_axis)
                    .map(|i| {
                        if i + 1 == per_axis {
                            h
                        } else {
                            l + (h - l) * i as f64 / (per_axis - 1) as f64
                        }
                    })
                    .collect()
            }
        })
        .collect();
    let total: usize = axes.iter().map(Vec::len).product();
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0usize; axes.len()];
    for _ in 0..total {
        out.push(DVector::from_iterator(axes.len(), idx.iter().zip(&axes).map(|(&i, a)| a[i])));
        for (k, a) in axes.iter().enumerate() {
            idx[k] += 1;
            if idx[k] < a.len() {
                break;
            }
            idx[k] = 0;
        }
    }
    out
}
