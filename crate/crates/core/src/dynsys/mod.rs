//! Invertible discrete-time dynamical systems, their trajectories, delay
//! windows of observations and tangent-map norms.
//!
//! A system is anything implementing [`DiscreteSystem`]: a map `phi` on a
//! phase space embedded in `R^n` together with its inverse. Built-ins are
//! time-h flow maps of ODEs ([`OdeFlow`], e.g. Lorenz), rigid torus rotations
//! and the cat map. Points are plain `DVector<f64>` in embedded coordinates
//! and all norms are Euclidean.

mod flow;
mod observation;
mod torus;

pub use flow::{Lorenz, LorenzSign, OdeFlow, VectorField};
pub use observation::{InputRange, ObservationFn, ObservationKind, ObservationMap};
pub use torus::{CatMap, TorusRotation};

pub(crate) use observation::grid_points;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{check_dim, fd_jacobian, spectral_norm, FD_STEP};

pub type PhasePoint = DVector<f64>;

/// Where the phase space lives in its embedding.
#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Torus { periods: Vec<f64> },
    UnboundedWithAttractor,
}

impl Domain {
    /// `a - b`, taking the shortest representative on periodic axes.
    pub fn displacement(&self, a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
        match self {
            Domain::Torus { periods } => DVector::from_iterator(
                a.len(),
                a.iter().zip(b.iter()).zip(periods).map(|((x, y), p)| {
                    let d = (x - y).rem_euclid(*p);
                    if d >= 0.5 * p {
                        d - p
                    } else {
                        d
                    }
                }),
            ),
            _ => a - b,
        }
    }

    pub fn contains(&self, m: &DVector<f64>) -> bool {
        match self {
            Domain::Box { lo, hi } => m
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(x, (l, h))| l <= x && x <= h),
            Domain::Torus { periods } => m.iter().zip(periods).all(|(x, p)| (0.0..*p).contains(x)),
            Domain::UnboundedWithAttractor => m.iter().all(|x| x.is_finite()),
        }
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self, Domain::Torus { .. })
    }
}

pub trait DiscreteSystem: Send + Sync + std::fmt::Debug {
    fn phase_dim(&self) -> usize;

    fn domain(&self) -> Domain;

    fn step(&self, m: &DVector<f64>) -> Result<DVector<f64>>;

    fn inverse_step(&self, m: &DVector<f64>) -> Result<DVector<f64>>;

    /// Tangent map `T_m phi`. Defaults to central differences.
    fn jacobian(&self, m: &DVector<f64>) -> Result<DMatrix<f64>> {
        let domain = self.domain();
        fd_jacobian(|x| self.step(x), |a, b| domain.displacement(a, b), m, FD_STEP)
    }

    /// Tangent map of the inverse, `T_m phi^{-1}`.
    fn inverse_jacobian(&self, m: &DVector<f64>) -> Result<DMatrix<f64>> {
        let domain = self.domain();
        fd_jacobian(
            |x| self.inverse_step(x),
            |a, b| domain.displacement(a, b),
            m,
            FD_STEP,
        )
    }

    fn has_analytic_tangent(&self) -> bool {
        false
    }

    fn label(&self) -> String;
}

/// Consecutive iterates `m_{t0}, m_{t0+1}, ...` of a system.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub points: Vec<PhasePoint>,
    pub t0: i64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn observations(&self, obs: &ObservationMap) -> Result<Vec<DVector<f64>>> {
        self.points.iter().map(|m| obs.observe(m)).collect()
    }
}

fn check_point(sys: &dyn DiscreteSystem, m: &DVector<f64>) -> Result<()> {
    check_dim("phase point", sys.phase_dim(), m.len())?;
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite {
            context: "input phase point".into(),
            substep: 0,
        });
    }
    Ok(())
}

/// `n_steps` forward iterates from `m0` (so `n_steps + 1` points).
pub fn trajectory(sys: &dyn DiscreteSystem, m0: &PhasePoint, n_steps: usize) -> Result<Trajectory> {
    if n_steps == 0 {
        return Err(Error::InvalidParameter("trajectory needs at least one step".into()));
    }
    check_point(sys, m0)?;
    let mut points = Vec::with_capacity(n_steps + 1);
    points.push(m0.clone());
    for index in 0..n_steps {
        let next = sys.step(&points[index]).map_err(|e| Error::TrajectoryStep {
            index: index + 1,
            source: Box::new(e),
        })?;
        points.push(next);
    }
    Ok(Trajectory { points, t0: 0 })
}

/// `n` backward iterates: `[m, phi^{-1}(m), ..., phi^{-n}(m)]`.
pub fn backward_orbit(sys: &dyn DiscreteSystem, m: &PhasePoint, n: usize) -> Result<Vec<PhasePoint>> {
    check_point(sys, m)?;
    let mut out = Vec::with_capacity(n + 1);
    out.push(m.clone());
    for index in 0..n {
        let prev = sys.inverse_step(&out[index]).map_err(|e| Error::TrajectoryStep {
            index: index + 1,
            source: Box::new(e),
        })?;
        out.push(prev);
    }
    Ok(out)
}

/// Rows `omega(phi^{-k}(m))` for `k = 0..length`.
pub fn delay_window(
    sys: &dyn DiscreteSystem,
    obs: &ObservationMap,
    m: &PhasePoint,
    length: usize,
) -> Result<DMatrix<f64>> {
    if length == 0 {
        return Err(Error::InvalidParameter("delay window length must be at least 1".into()));
    }
    let orbit = backward_orbit(sys, m, length - 1)?;
    let d = obs.obs_dim();
    let mut out = DMatrix::zeros(length, d);
    for (k, p) in orbit.iter().enumerate() {
        out.row_mut(k).copy_from(&obs.observe(p)?.transpose());
    }
    Ok(out)
}

fn iterate(sys: &dyn DiscreteSystem, m: &PhasePoint, t: i64) -> Result<PhasePoint> {
    let mut x = m.clone();
    for _ in 0..t.unsigned_abs() {
        x = if t > 0 { sys.step(&x)? } else { sys.inverse_step(&x)? };
    }
    Ok(x)
}

/// Max entrywise discrepancy between the delay window of `phi^t(m)` and the
/// window of `m` shifted by `t`, over `window` lags.
pub fn check_equivariance(
    sys: &dyn DiscreteSystem,
    obs: &ObservationMap,
    m: &PhasePoint,
    t: i64,
    window: usize,
) -> Result<f64> {
    if window == 0 {
        return Err(Error::InvalidParameter("equivariance window must be at least 1".into()));
    }
    if t == 0 {
        return Ok(0.0);
    }
    check_point(sys, m)?;
    let shifted = iterate(sys, m, t)?;
    let lhs = delay_window(sys, obs, &shifted, window)?;

    // Orbit of m over indices lo..=hi, where row k of the shifted window is
    // index t - k.
    let lo = (t - window as i64 + 1).min(0);
    let hi = t.max(0);
    let back = backward_orbit(sys, m, lo.unsigned_abs() as usize)?;
    let mut fwd = vec![m.clone()];
    for _ in 0..hi {
        let next = sys.step(fwd.last().expect("non-empty"))?;
        fwd.push(next);
    }
    let at = |j: i64| -> &PhasePoint {
        if j >= 0 {
            &fwd[j as usize]
        } else {
            &back[j.unsigned_abs() as usize]
        }
    };

    let periodic = sys.domain().is_periodic()
        && matches!(obs.kind(), ObservationKind::CoordinateProjection(_));
    let mut worst = 0.0f64;
    for k in 0..window {
        let z = obs.observe(at(t - k as i64))?;
        for c in 0..z.len() {
            let diff = if periodic {
                torus::wrapped_delta(lhs[(k, c)], z[c]).abs()
            } else {
                (lhs[(k, c)] - z[c]).abs()
            };
            worst = worst.max(diff);
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TangentNorms {
    /// `sup |T phi|` over the samples.
    pub forward: f64,
    /// `sup |T phi^{-1}|` over the samples.
    pub inverse: f64,
    pub analytic: bool,
}

pub fn tangent_norm_bounds(sys: &dyn DiscreteSystem, samples: &[PhasePoint]) -> Result<TangentNorms> {
    if samples.is_empty() {
        return Err(Error::InvalidParameter("tangent norm estimation needs samples".into()));
    }
    let norms: Vec<(f64, f64)> = samples
        .par_iter()
        .map(|m| {
            let f = spectral_norm(&sys.jacobian(m)?);
            let b = spectral_norm(&sys.inverse_jacobian(m)?);
            if f.is_finite() && b.is_finite() {
                Ok((f, b))
            } else {
                Err(Error::NonFinite {
                    context: "tangent map norm".into(),
                    substep: 0,
                })
            }
        })
        .collect::<Result<_>>()?;
    let (forward, inverse) = norms
        .iter()
        .fold((0.0f64, 0.0f64), |(a, b), &(f, i)| (a.max(f), b.max(i)));
    Ok(TangentNorms {
        forward,
        inverse,
        analytic: sys.has_analytic_tangent(),
    })
}

/// Largest relative round-trip error `|phi^{-1}(phi(m)) - m| / max(|m|, 1)`.
pub fn round_trip_error(sys: &dyn DiscreteSystem, samples: &[PhasePoint]) -> Result<f64> {
    let domain = sys.domain();
    let errs: Vec<f64> = samples
        .par_iter()
        .map(|m| {
            let back = sys.inverse_step(&sys.step(m)?)?;
            Ok(domain.displacement(&back, m).norm() / m.norm().max(1.0))
        })
        .collect::<Result<_>>()?;
    Ok(errs.into_iter().fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn one_step_trajectory() {
        let rot = TorusRotation::new(vec![0.1]).unwrap();
        let traj = trajectory(&rot, &v(&[0.5]), 1).unwrap();
        assert_eq!(traj.len(), 2);
        assert!((traj.points[1][0] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn zero_steps_rejected() {
        assert!(trajectory(&CatMap, &v(&[0.0, 0.0]), 0).is_err());
    }

    #[test]
    fn delay_window_length_one_is_observation() {
        let obs = ObservationMap::coordinate(2, 1).unwrap();
        let w = delay_window(&CatMap, &obs, &v(&[0.2, 0.4]), 1).unwrap();
        assert_eq!(w.shape(), (1, 1));
        assert_eq!(w[(0, 0)], 0.4);
    }

    #[test]
    fn delay_window_on_rotation_closed_form() {
        let theta = 0.3;
        let rot = TorusRotation::new(vec![theta, 0.1]).unwrap();
        let obs = ObservationMap::coordinate(2, 0).unwrap();
        let m = v(&[0.45, 0.2]);
        let w = delay_window(&rot, &obs, &m, 3).unwrap();
        let expected = [0.45, (0.45f64 - theta).rem_euclid(1.0), (0.45f64 - 2.0 * theta).rem_euclid(1.0)];
        for (k, e) in expected.iter().enumerate() {
            assert!((w[(k, 0)] - e).abs() < 1e-12, "row {k}");
        }
    }

    #[test]
    fn equivariance_zero_shift_is_exact() {
        let obs = ObservationMap::coordinate(2, 0).unwrap();
        assert_eq!(check_equivariance(&CatMap, &obs, &v(&[0.3, 0.6]), 0, 10).unwrap(), 0.0);
    }

    #[test]
    fn rotation_is_isometry() {
        let rot = TorusRotation::new(vec![0.2, 0.7]).unwrap();
        let n = tangent_norm_bounds(&rot, &[v(&[0.1, 0.2])]).unwrap();
        assert_eq!((n.forward, n.inverse), (1.0, 1.0));
    }

    #[test]
    fn cat_tangent_norms_are_golden_square() {
        let n = tangent_norm_bounds(&CatMap, &[v(&[0.1, 0.2]), v(&[0.9, 0.3])]).unwrap();
        let expected = (3.0 + 5f64.sqrt()) / 2.0;
        assert!((n.forward - expected).abs() < 1e-12);
        assert!((n.inverse - expected).abs() < 1e-12);
    }

    #[test]
    fn torus_displacement_wraps() {
        let d = Domain::Torus { periods: vec![1.0] };
        let x = d.displacement(&v(&[0.02]), &v(&[0.98]));
        assert!((x[0] - 0.04).abs() < 1e-15);
    }
}
