//! Generalized synchronizations `f: M -> W` with `x_t = f(phi^t(m))`,
//! sampled along a trajectory of the driving system.
//!
//! Two constructions are provided and must agree on a contractive region:
//!
//! * [`drive_gs`] iterates `x_t = F(x_{t-1}, omega(m_t))` and discards a
//!   washout prefix.
//! * [`psi_iterate_gs`] iterates `f <- F(f o phi^{-1}, omega)` on the
//!   trajectory points, using `phi^{-1}(m_t) = m_{t-1}`.
//!
//! [`recursion_residual`] checks the identity `f(m_t) = F(f(m_{t-1}), omega(m_t))`
//! on stored data, and [`multistability_sweep`] builds one synchronization
//! per invariant region.

mod psi;
mod sweep;

pub use psi::{psi_iterate_gs, PsiOptions, PsiReport};
pub use sweep::{multistability_sweep, Separation, SweepEntry, SweepOptions, SweepResult};

use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::DVector;

use crate::contraction::InvariantRegion;
use crate::dynsys::{trajectory, DiscreteSystem, ObservationMap, PhasePoint, Trajectory};
use crate::error::{Error, Result};
use crate::linalg::check_dim;
use crate::statemaps::StateMap;

/// Slack allowed when testing that recorded states stay in their region.
pub const REGION_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum GsMethod {
    Drive { washout: usize, x0: Vec<f64> },
    PsiIterate { iterations: usize, f0: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ResidualStats {
    pub max: f64,
    pub mean: f64,
}

/// Values `f(m_t)` for trajectory indices `offset .. offset + values.len()`.
#[derive(Debug, Clone)]
pub struct SampledGS {
    pub trajectory: Arc<Trajectory>,
    pub offset: usize,
    pub values: Vec<DVector<f64>>,
    pub method: GsMethod,
    pub region_label: Option<String>,
    pub residual: ResidualStats,
    pub psi: Option<PsiReport>,
}

impl SampledGS {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Trajectory indices covered by `values`.
    pub fn indices(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.values.len()
    }

    pub fn base_point(&self, k: usize) -> &PhasePoint {
        &self.trajectory.points[self.offset + k]
    }

    /// Value at trajectory index `t`, if recorded.
    pub fn at(&self, t: usize) -> Option<&DVector<f64>> {
        t.checked_sub(self.offset).and_then(|k| self.values.get(k))
    }

    /// CSV with `#` metadata lines and columns `t, m_*, f_*, residual`.
    ///
    /// `dt` converts trajectory indices to time. The first row has no
    /// stored predecessor, so its residual is left empty.
    pub fn to_csv(
        &self,
        f: &StateMap,
        obs: &ObservationMap,
        dt: f64,
        metadata: &[(String, String)],
    ) -> Result<String> {
        let mut out = String::new();
        for (k, v) in metadata {
            let _ = writeln!(out, "# {k}: {v}");
        }
        let _ = writeln!(out, "# method: {:?}", self.method);
        if let Some(label) = &self.region_label {
            let _ = writeln!(out, "# region: {label}");
        }
        let _ = writeln!(out, "# residual_max: {}", self.residual.max);
        let _ = writeln!(out, "# residual_mean: {}", self.residual.mean);
        if let Some(psi) = &self.psi {
            let _ = writeln!(out, "# psi_iterations: {}", psi.iterations);
            let _ = writeln!(out, "# psi_final_change: {}", psi.final_change);
            if let Some(b) = psi.a_priori_bound {
                let _ = writeln!(out, "# psi_a_priori_bound: {b}");
            }
        }
        let m_dim = self.trajectory.points.first().map_or(0, |p| p.len());
        let f_dim = self.values.first().map_or(0, |v| v.len());
        let mut header = vec!["t".to_string()];
        header.extend((1..=m_dim).map(|i| format!("m{i}")));
        header.extend((1..=f_dim).map(|i| format!("f{i}")));
        header.push("residual".into());
        let _ = writeln!(out, "{}", header.join(","));
        for (k, v) in self.values.iter().enumerate() {
            let t = self.offset + k;
            let m = self.base_point(k);
            let mut row = vec![format!("{}", t as f64 * dt)];
            row.extend(m.iter().map(|x| format!("{x}")));
            row.extend(v.iter().map(|x| format!("{x}")));
            if k == 0 {
                row.push(String::new());
            } else {
                let r = (v - f.eval(&self.values[k - 1], &obs.observe(m)?)?).norm();
                row.push(format!("{r}"));
            }
            let _ = writeln!(out, "{}", row.join(","));
        }
        Ok(out)
    }
}

/// `|f(m_t) - F(f(m_{t-1}), omega(m_t))|` over consecutive stored values.
pub fn recursion_residual(gs: &SampledGS, f: &StateMap, obs: &ObservationMap) -> Result<ResidualStats> {
    if gs.len() < 2 {
        return Err(Error::InvalidParameter(
            "recursion residual needs at least two stored values".into(),
        ));
    }
    let mut max = 0.0f64;
    let mut sum = 0.0;
    for k in 1..gs.len() {
        let z = obs.observe(gs.base_point(k))?;
        let r = (&gs.values[k] - f.eval(&gs.values[k - 1], &z)?).norm();
        max = max.max(r);
        sum += r;
    }
    Ok(ResidualStats {
        max,
        mean: sum / (gs.len() - 1) as f64,
    })
}

fn residual_or_zero(gs: &SampledGS, f: &StateMap, obs: &ObservationMap) -> Result<ResidualStats> {
    if gs.len() < 2 {
        Ok(ResidualStats::default())
    } else {
        recursion_residual(gs, f, obs)
    }
}

pub(crate) fn check_region(
    region: Option<&InvariantRegion>,
    values: &[DVector<f64>],
    offset: usize,
) -> Result<()> {
    if let Some(r) = region {
        if let Some(k) = values.iter().position(|x| !r.contains_within(x, REGION_TOLERANCE)) {
            return Err(Error::RegionEscape {
                region: r.label.clone(),
                index: offset + k,
            });
        }
    }
    Ok(())
}

/// Drive `F` along an existing trajectory from `x0`, keeping indices after
/// `washout`.
pub fn drive_on_trajectory(
    f: &StateMap,
    obs: &ObservationMap,
    traj: Arc<Trajectory>,
    x0: &DVector<f64>,
    washout: usize,
    region: Option<&InvariantRegion>,
) -> Result<SampledGS> {
    check_dim("initial state", f.state_dim(), x0.len())?;
    check_dim("observation dimension", f.input_dim(), obs.obs_dim())?;
    if washout + 1 >= traj.len() {
        return Err(Error::InvalidParameter(format!(
            "washout {washout} leaves nothing to record on a trajectory of {} points",
            traj.len()
        )));
    }
    if let Some(r) = region {
        if !r.contains(x0) {
            return Err(Error::InvalidParameter(format!(
                "initial state lies outside region '{}'",
                r.label
            )));
        }
    }
    let mut x = x0.clone();
    let mut values = Vec::with_capacity(traj.len() - washout - 1);
    for t in 1..traj.len() {
        x = f.eval(&x, &obs.observe(&traj.points[t])?)?;
        if t > washout {
            values.push(x.clone());
        }
    }
    let offset = washout + 1;
    check_region(region, &values, offset)?;
    let mut gs = SampledGS {
        trajectory: traj,
        offset,
        values,
        method: GsMethod::Drive {
            washout,
            x0: x0.iter().copied().collect(),
        },
        region_label: region.map(|r| r.label.clone()),
        residual: ResidualStats::default(),
        psi: None,
    };
    gs.residual = residual_or_zero(&gs, f, obs)?;
    Ok(gs)
}

/// Simulate `washout + record` steps from `m0` and drive `F` along them.
#[allow(clippy::too_many_arguments)]
pub fn drive_gs(
    f: &StateMap,
    sys: &dyn DiscreteSystem,
    obs: &ObservationMap,
    m0: &PhasePoint,
    x0: &DVector<f64>,
    washout: usize,
    record: usize,
    region: Option<&InvariantRegion>,
) -> Result<SampledGS> {
    if record == 0 {
        return Err(Error::InvalidParameter("nothing to record".into()));
    }
    let traj = Arc::new(trajectory(sys, m0, washout + record)?);
    drive_on_trajectory(f, obs, traj, x0, washout, region)
}

fn same_base(a: &SampledGS, b: &SampledGS) -> bool {
    Arc::ptr_eq(&a.trajectory, &b.trajectory) || a.trajectory == b.trajectory
}

fn shared(a: &SampledGS, b: &SampledGS) -> Result<std::ops::Range<usize>> {
    if !same_base(a, b) {
        return Err(Error::DisjointRanges);
    }
    let lo = a.offset.max(b.offset);
    let hi = a.indices().end.min(b.indices().end);
    if lo >= hi {
        return Err(Error::DisjointRanges);
    }
    Ok(lo..hi)
}

/// `sup_t |a(m_t) - b(m_t)|` over shared indices.
pub fn compare_gs(a: &SampledGS, b: &SampledGS) -> Result<f64> {
    let range = shared(a, b)?;
    Ok(range
        .map(|t| (a.at(t).expect("shared") - b.at(t).expect("shared")).norm())
        .fold(0.0, f64::max))
}

/// `inf_t |a(m_t) - b(m_t)|` over shared indices.
pub fn min_separation(a: &SampledGS, b: &SampledGS) -> Result<f64> {
    let range = shared(a, b)?;
    Ok(range
        .map(|t| (a.at(t).expect("shared") - b.at(t).expect("shared")).norm())
        .fold(f64::INFINITY, f64::min))
}
