//! Suprema of the partial-derivative norms of `F` over `V x omega(M)`.
//!
//! Two estimates are produced. The grid estimate evaluates the derivative
//! norms on a tensor grid of the region and a sample of the input range, so
//! it is a lower bound of the true supremum. Built-ins additionally get a
//! closed-form value: exact for the linear delay, the affine ESN and the
//! power-sine map on a box, and a chain-rule upper bound for saturating
//! ESNs. The effective constants are the componentwise maximum.

use nalgebra::DVector;
use rayon::prelude::*;

use super::trig::sin_squared_sup;
use super::{Squashing, StateMap};
use crate::contraction::InvariantRegion;
use crate::dynsys::InputRange;
use crate::error::{Error, Result};
use crate::linalg::{check_dim, spectral_norm};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LipschitzConstants {
    pub l_fx: f64,
    pub l_fz: f64,
    pub l_fxx: f64,
    pub l_fxz: f64,
}

impl LipschitzConstants {
    fn max(self, o: Self) -> Self {
        Self {
            l_fx: self.l_fx.max(o.l_fx),
            l_fz: self.l_fz.max(o.l_fz),
            l_fxx: self.l_fxx.max(o.l_fxx),
            l_fxz: self.l_fxz.max(o.l_fxz),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundMethod {
    /// Closed form; `exact` is false when the value is only an upper bound.
    Analytic { exact: bool },
    GridSup { resolution: usize, input_samples: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzOptions {
    pub resolution: usize,
    pub input_samples: usize,
}

impl Default for LipschitzOptions {
    fn default() -> Self {
        Self {
            resolution: 20,
            input_samples: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzBounds {
    /// Effective constants: max of the analytic and grid values.
    pub l_fx: f64,
    pub l_fz: f64,
    pub l_fxx: f64,
    pub l_fxz: f64,
    pub method: BoundMethod,
    pub grid: LipschitzConstants,
    pub analytic: Option<LipschitzConstants>,
    pub region_label: String,
    pub input_range: InputRange,
    pub options: LipschitzOptions,
}

impl LipschitzBounds {
    pub fn constants(&self) -> LipschitzConstants {
        LipschitzConstants {
            l_fx: self.l_fx,
            l_fz: self.l_fz,
            l_fxx: self.l_fxx,
            l_fxz: self.l_fxz,
        }
    }

    /// True when the effective constants are exact suprema rather than
    /// sampled values.
    pub fn is_exact(&self) -> bool {
        matches!(self.method, BoundMethod::Analytic { exact: true })
    }

    /// True when the effective constants are guaranteed not to underestimate.
    pub fn is_rigorous(&self) -> bool {
        matches!(self.method, BoundMethod::Analytic { .. })
    }
}

/// Smallest `|x_i|` on `[lo, hi]`, zero if the interval straddles the origin.
fn min_abs(lo: f64, hi: f64) -> f64 {
    if lo <= 0.0 && hi >= 0.0 {
        0.0
    } else {
        lo.abs().min(hi.abs())
    }
}

fn analytic(f: &StateMap, region: &InvariantRegion, inputs: &InputRange) -> Option<(LipschitzConstants, bool)> {
    match f {
        StateMap::LinearDelay { q } => {
            // sigma_max of the shift is 1 as soon as N >= 2; N = 1 gives the zero map.
            let l_fx = if *q == 0 { 0.0 } else { 1.0 };
            Some((
                LipschitzConstants {
                    l_fx,
                    l_fz: 1.0,
                    l_fxx: 0.0,
                    l_fxz: 0.0,
                },
                true,
            ))
        }
        StateMap::Esn(e) => {
            let s = e.squashing();
            let na = spectral_norm(e.a());
            let nc = spectral_norm(e.c());
            Some((
                LipschitzConstants {
                    l_fx: s.lipschitz() * na,
                    l_fz: s.lipschitz() * nc,
                    l_fxx: s.second_sup() * na * na,
                    l_fxz: s.second_sup() * na * nc,
                },
                s == Squashing::Identity,
            ))
        }
        StateMap::PowerSine(p) => {
            let (lo, hi) = region.bounding_box();
            let closest = lo
                .iter()
                .zip(&hi)
                .map(|(l, h)| min_abs(*l, *h))
                .fold(f64::INFINITY, f64::min);
            let (l_fx, l_fxx) = if closest == 0.0 {
                (f64::INFINITY, f64::INFINITY)
            } else {
                (
                    p.alpha * closest.powf(p.alpha - 1.0),
                    p.alpha * (1.0 - p.alpha) * closest.powf(p.alpha - 2.0),
                )
            };
            // |D_z F|^2 = (lambda k)^2 (1 + sin^2(2kz))
            let (zl, zh) = (p.k * inputs.lo[0], p.k * inputs.hi[0]);
            let peak = sin_squared_sup(2.0 * zl, 2.0 * zh);
            let l_fz = p.lambda * p.k * (1.0 + peak).sqrt();
            Some((
                LipschitzConstants {
                    l_fx,
                    l_fz,
                    l_fxx,
                    l_fxz: 0.0,
                },
                region.is_axis_box(),
            ))
        }
        StateMap::Custom(_) => None,
    }
}

#[derive(Clone, Copy)]
enum Sweep {
    State,
    Input,
    Both,
}

fn point_norms(f: &StateMap, x: &DVector<f64>, z: &DVector<f64>, sweep: Sweep) -> Result<LipschitzConstants> {
    let sp = f.second_partials(x, z)?;
    let mut c = LipschitzConstants::default();
    if !matches!(sweep, Sweep::Input) {
        c.l_fx = spectral_norm(&f.jac_state(x, z)?);
        c.l_fxx = sp.xx;
    }
    if !matches!(sweep, Sweep::State) {
        c.l_fz = spectral_norm(&f.jac_input(x, z)?);
        c.l_fxz = sp.xz;
    }
    Ok(c)
}

fn grid_sup(
    f: &StateMap,
    region: &InvariantRegion,
    inputs: &InputRange,
    opts: LipschitzOptions,
) -> Result<LipschitzConstants> {
    let points = region.grid(opts.resolution);
    let zs = inputs.samples(opts.input_samples);
    let reduce = |acc: Result<LipschitzConstants>, c: Result<LipschitzConstants>| Ok(acc?.max(c?));

    if f.is_input_additive() {
        // D_x F is independent of z and D_z F of x: two separate sweeps.
        let z0 = &zs[0];
        let x0 = region.center();
        let over_x = points
            .par_iter()
            .map(|x| point_norms(f, x, z0, Sweep::State))
            .reduce(|| Ok(LipschitzConstants::default()), reduce)?;
        let over_z = zs
            .par_iter()
            .map(|z| point_norms(f, &x0, z, Sweep::Input))
            .reduce(|| Ok(LipschitzConstants::default()), reduce)?;
        return Ok(over_x.max(over_z));
    }
    points
        .par_iter()
        .map(|x| {
            zs.iter()
                .map(|z| point_norms(f, x, z, Sweep::Both))
                .try_fold(LipschitzConstants::default(), |acc, c| Ok(acc.max(c?)))
        })
        .reduce(|| Ok(LipschitzConstants::default()), reduce)
}

pub fn lipschitz_bounds(
    f: &StateMap,
    region: &InvariantRegion,
    inputs: &InputRange,
    opts: LipschitzOptions,
) -> Result<LipschitzBounds> {
    check_dim("region dimension", f.state_dim(), region.dim())?;
    check_dim("input range dimension", f.input_dim(), inputs.dim())?;
    if opts.resolution < 2 || opts.input_samples == 0 {
        return Err(Error::InvalidParameter(
            "grid needs at least 2 points per axis and one input sample".into(),
        ));
    }
    let grid = grid_sup(f, region, inputs, opts)?;
    let exact_or_bound = analytic(f, region, inputs);
    let (effective, method, analytic) = match exact_or_bound {
        Some((a, exact)) => (a.max(grid), BoundMethod::Analytic { exact }, Some(a)),
        None => (
            grid,
            BoundMethod::GridSup {
                resolution: opts.resolution,
                input_samples: opts.input_samples,
            },
            None,
        ),
    };
    Ok(LipschitzBounds {
        l_fx: effective.l_fx,
        l_fz: effective.l_fz,
        l_fxx: effective.l_fxx,
        l_fxz: effective.l_fxz,
        method,
        grid,
        analytic,
        region_label: region.label.clone(),
        input_range: inputs.clone(),
        options: opts,
    })
}
