use std::sync::Arc;

use nalgebra::DVector;
use rayon::prelude::*;

use super::{check_region, residual_or_zero, GsMethod, ResidualStats, SampledGS};
use crate::contraction::InvariantRegion;
use crate::dynsys::{DiscreteSystem, ObservationMap, PhasePoint, Trajectory};
use crate::error::{Error, Result};
use crate::linalg::check_dim;
use crate::statemaps::StateMap;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiOptions {
    /// Stop once `sup_t |f_{n+1}(m_t) - f_n(m_t)|` is at most this.
    pub tol: f64,
    pub max_iterations: usize,
    /// Known contraction constant, used for the a-priori error bound.
    pub contraction: Option<f64>,
}

impl Default for PsiOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iterations: 2000,
            contraction: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsiReport {
    pub iterations: usize,
    /// Sup-change of every sweep.
    pub changes: Vec<f64>,
    pub final_change: f64,
    /// `c^n / (1 - c) |f_1 - f_0|`.
    pub a_priori_bound: Option<f64>,
    /// Sweeps after which the a-priori bound drops below the tolerance.
    pub predicted_iterations: Option<usize>,
    /// `phi^{-1}(m_0)`, whose value stays at `f_0`.
    pub boundary_point: PhasePoint,
}

fn a_priori(c: f64, first: f64, n: usize, tol: f64) -> (Option<f64>, Option<usize>) {
    if !(0.0..1.0).contains(&c) {
        return (None, None);
    }
    let bound = c.powi(n as i32) / (1.0 - c) * first;
    let predicted = if first == 0.0 || c == 0.0 {
        1
    } else {
        let k = (tol * (1.0 - c) / first).ln() / c.ln();
        k.ceil().max(1.0) as usize
    };
    (Some(bound), Some(predicted))
}

/// Iterate `f <- F(f o phi^{-1}, omega)` on the points of `traj`.
///
/// Each sweep updates every point from the previous iterate at its
/// predecessor, so `n` sweeps reproduce `n` driven steps from the constant
/// initial guess `f0`. The predecessor of the first point is never revisited
/// and keeps the value `f0`; values are reported from index `record_from`
/// onward, which must leave enough sweeps for that edge effect to fade.
#[allow(clippy::too_many_arguments)]
pub fn psi_iterate_gs(
    f: &StateMap,
    sys: &dyn DiscreteSystem,
    obs: &ObservationMap,
    traj: Arc<Trajectory>,
    f0: &DVector<f64>,
    record_from: usize,
    opts: PsiOptions,
    region: Option<&InvariantRegion>,
) -> Result<SampledGS> {
    check_dim("initial guess", f.state_dim(), f0.len())?;
    check_dim("observation dimension", f.input_dim(), obs.obs_dim())?;
    if traj.len() < 2 || record_from >= traj.len() {
        return Err(Error::InvalidParameter(format!(
            "record_from {record_from} leaves nothing to report on a trajectory of {} points",
            traj.len()
        )));
    }
    if !(opts.tol > 0.0) || opts.max_iterations == 0 {
        return Err(Error::InvalidParameter("need tol > 0 and at least one sweep".into()));
    }
    let boundary_point = sys.inverse_step(&traj.points[0])?;
    let inputs = traj.observations(obs)?;

    let mut current = vec![f0.clone(); traj.len()];
    let mut changes = Vec::new();
    let mut converged = false;
    for _ in 0..opts.max_iterations {
        let next: Vec<DVector<f64>> = (0..traj.len())
            .into_par_iter()
            .with_min_len(256)
            .map(|t| {
                let prev = if t == 0 { f0 } else { &current[t - 1] };
                f.eval(prev, &inputs[t])
            })
            .collect::<Result<_>>()?;
        let change = next[record_from..]
            .iter()
            .zip(&current[record_from..])
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        current = next;
        changes.push(change);
        if change <= opts.tol {
            converged = true;
            break;
        }
    }

    let iterations = changes.len();
    let final_change = *changes.last().expect("at least one sweep");
    let (a_priori_bound, predicted_iterations) = match opts.contraction {
        Some(c) => a_priori(c, changes[0], iterations, opts.tol),
        None => (None, None),
    };
    let values = current.split_off(record_from);
    let mut gs = SampledGS {
        trajectory: traj,
        offset: record_from,
        values,
        method: GsMethod::PsiIterate {
            iterations,
            f0: f0.iter().copied().collect(),
        },
        region_label: region.map(|r| r.label.clone()),
        residual: ResidualStats::default(),
        psi: Some(PsiReport {
            iterations,
            changes,
            final_change,
            a_priori_bound,
            predicted_iterations,
            boundary_point,
        }),
    };
    gs.residual = residual_or_zero(&gs, f, obs)?;
    if !converged {
        return Err(Error::NoConvergence {
            iterations,
            last_change: final_change,
            tol: opts.tol,
            partial: Box::new(gs),
        });
    }
    check_region(region, &gs.values, gs.offset)?;
    Ok(gs)
}
