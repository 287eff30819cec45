use std::sync::Arc;

use rayon::prelude::*;

use super::{compare_gs, drive_on_trajectory, min_separation, SampledGS};
use crate::contraction::{check_invariance, InvarianceCheck, InvariantRegion};
use crate::dynsys::{trajectory, DiscreteSystem, ObservationMap, PhasePoint, Trajectory};
use crate::error::{Error, Result};
use crate::statemaps::StateMap;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    pub washout: usize,
    pub record: usize,
    pub invariance_resolution: usize,
    /// Two synchronizations closer than this in sup distance count as one.
    pub distinct_tol: f64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            washout: 1000,
            record: 3000,
            invariance_resolution: 20,
            distinct_tol: 1e-8,
        }
    }
}

#[derive(Debug)]
pub struct SweepEntry {
    pub label: String,
    pub invariance: Option<InvarianceCheck>,
    pub gs: Result<SampledGS>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Separation {
    pub a: String,
    pub b: String,
    /// `inf_t |f_a(m_t) - f_b(m_t)|`.
    pub min_distance: f64,
    pub sup_distance: f64,
}

#[derive(Debug)]
pub struct SweepResult {
    pub trajectory: Arc<Trajectory>,
    pub entries: Vec<SweepEntry>,
    pub separations: Vec<Separation>,
    /// Number of classes of successful runs that differ by more than
    /// `distinct_tol`; a lower bound on the number of synchronizations.
    pub distinct: usize,
}

impl SweepResult {
    pub fn successes(&self) -> impl Iterator<Item = (&str, &SampledGS)> {
        self.entries
            .iter()
            .filter_map(|e| e.gs.as_ref().ok().map(|g| (e.label.as_str(), g)))
    }
}

fn run_region(
    f: &StateMap,
    obs: &ObservationMap,
    traj: &Arc<Trajectory>,
    region: &InvariantRegion,
    inputs: &crate::dynsys::InputRange,
    opts: SweepOptions,
) -> SweepEntry {
    let invariance = match check_invariance(f, region, inputs, opts.invariance_resolution) {
        Ok(c) => c,
        Err(e) => {
            return SweepEntry {
                label: region.label.clone(),
                invariance: None,
                gs: Err(e),
            }
        }
    };
    let gs = if invariance.ok {
        drive_on_trajectory(f, obs, traj.clone(), &region.center(), opts.washout, Some(region))
    } else {
        Err(Error::NotInvariant {
            region: region.label.clone(),
            margin: invariance.margin,
        })
    };
    SweepEntry {
        label: region.label.clone(),
        invariance: Some(invariance),
        gs,
    }
}

/// Drive `F` from the center of each region along one shared trajectory.
///
/// Regions that fail the invariance check or whose run errors are kept in
/// the result with their error; the rest of the sweep continues.
pub fn multistability_sweep(
    f: &StateMap,
    regions: &[InvariantRegion],
    sys: &dyn DiscreteSystem,
    obs: &ObservationMap,
    m0: &PhasePoint,
    opts: SweepOptions,
) -> Result<SweepResult> {
    if opts.record == 0 {
        return Err(Error::InvalidParameter("nothing to record".into()));
    }
    let traj = Arc::new(trajectory(sys, m0, opts.washout + opts.record)?);
    let inputs = obs.observed_range(&traj.points)?;
    let entries: Vec<SweepEntry> = regions
        .par_iter()
        .map(|r| run_region(f, obs, &traj, r, &inputs, opts))
        .collect();

    let ok: Vec<(&str, &SampledGS)> = entries
        .iter()
        .filter_map(|e| e.gs.as_ref().ok().map(|g| (e.label.as_str(), g)))
        .collect();
    let mut separations = Vec::new();
    // class representative per successful run
    let mut class: Vec<usize> = (0..ok.len()).collect();
    for i in 0..ok.len() {
        for j in i + 1..ok.len() {
            let sup = compare_gs(ok[i].1, ok[j].1)?;
            separations.push(Separation {
                a: ok[i].0.to_string(),
                b: ok[j].0.to_string(),
                min_distance: min_separation(ok[i].1, ok[j].1)?,
                sup_distance: sup,
            });
            if sup <= opts.distinct_tol && class[j] == j {
                class[j] = class[i];
            }
        }
    }
    let distinct = class.iter().enumerate().filter(|(i, c)| *i == **c).count();
    Ok(SweepResult {
        trajectory: traj,
        entries,
        separations,
        distinct,
    })
}
