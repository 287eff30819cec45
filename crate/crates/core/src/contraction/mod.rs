//! Invariant regions, absorbing sets and contraction certificates.
//!
//! A [`ContractionCertificate`] collects everything needed to decide whether
//! a state map restricted to a region has the echo state property
//! (`L_Fx < 1`) and whether the resulting synchronization is C^1
//! (`L_Fx < min(1, 1/|T phi^-1|)`), together with the witnesses `R`,
//! `delta_0` and `c_0` that make the derivative-space iteration a
//! contraction.

mod certificate;
mod region;

pub use certificate::{certify, CertifyOptions, ContractionCertificate, Requirement};
pub use region::{InvariantRegion, RegionShape, GRID_BUDGET};

use nalgebra::DVector;
use rayon::prelude::*;

use crate::dynsys::InputRange;
use crate::error::{Error, Result};
use crate::linalg::{check_dim, spectral_norm};
use crate::statemaps::{
    cos_range, lipschitz_bounds, sin_range, sin_squared_range, LipschitzOptions, StateMap,
};

/// Outcome of checking `F(V x omega(M)) ⊂ V`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvarianceCheck {
    pub ok: bool,
    /// Smallest distance from an image to the boundary; negative if some
    /// image left the region.
    pub margin: f64,
    /// Whether `ok`/`margin` come from an exact interval image.
    pub exact: bool,
    /// Margin over the sampled grid, always computed.
    pub sampled_margin: f64,
}

/// Exact interval image of an axis box under the built-ins, as per-axis
/// `(lo, hi)`.
fn interval_image(f: &StateMap, lo: &[f64], hi: &[f64], inputs: &InputRange) -> Option<Vec<(f64, f64)>> {
    match f {
        StateMap::PowerSine(p) => {
            let (kl, kh) = (p.k * inputs.lo[0], p.k * inputs.hi[0]);
            let forcing = [sin_range(kl, kh), cos_range(kl, kh), sin_squared_range(kl, kh)];
            Some(
                (0..3)
                    .map(|i| {
                        // x -> sign(x)|x|^alpha is increasing
                        let (fl, fh) = forcing[i];
                        (p.power(lo[i]) + p.lambda * fl, p.power(hi[i]) + p.lambda * fh)
                    })
                    .collect(),
            )
        }
        StateMap::LinearDelay { .. } => {
            let mut out = vec![(inputs.lo[0], inputs.hi[0])];
            out.extend(lo.iter().zip(hi).take(lo.len() - 1).map(|(l, h)| (*l, *h)));
            Some(out)
        }
        StateMap::Esn(e) => {
            // Range of each affine preactivation over the box, pushed through
            // the increasing squashing.
            let xc: Vec<f64> = lo.iter().zip(hi).map(|(l, h)| 0.5 * (l + h)).collect();
            let xr: Vec<f64> = lo.iter().zip(hi).map(|(l, h)| 0.5 * (h - l)).collect();
            let zc: Vec<f64> = inputs.lo.iter().zip(&inputs.hi).map(|(l, h)| 0.5 * (l + h)).collect();
            let zr: Vec<f64> = inputs.lo.iter().zip(&inputs.hi).map(|(l, h)| 0.5 * (h - l)).collect();
            let (a, c) = (e.a(), e.c());
            Some(
                (0..a.nrows())
                    .map(|i| {
                        let mut center = e.zeta()[i];
                        let mut radius = 0.0;
                        for j in 0..a.ncols() {
                            center += a[(i, j)] * xc[j];
                            radius += a[(i, j)].abs() * xr[j];
                        }
                        for j in 0..c.ncols() {
                            center += c[(i, j)] * zc[j];
                            radius += c[(i, j)].abs() * zr[j];
                        }
                        let s = e.squashing();
                        (s.apply(center - radius), s.apply(center + radius))
                    })
                    .collect(),
            )
        }
        StateMap::Custom(_) => None,
    }
}

pub fn check_invariance(
    f: &StateMap,
    region: &InvariantRegion,
    inputs: &InputRange,
    resolution: usize,
) -> Result<InvarianceCheck> {
    check_dim("region dimension", f.state_dim(), region.dim())?;
    check_dim("input range dimension", f.input_dim(), inputs.dim())?;
    if resolution < 2 {
        return Err(Error::InvalidParameter("invariance grid needs resolution >= 2".into()));
    }
    let points = region.grid(resolution);
    let zs = inputs.samples(resolution.max(50));
    let sampled_margin = points
        .par_iter()
        .map(|x| {
            zs.iter().try_fold(f64::INFINITY, |acc, z| {
                Ok(acc.min(region.signed_distance(&f.eval(x, z)?)))
            })
        })
        .reduce(|| Ok(f64::INFINITY), |a: Result<f64>, b| Ok(a?.min(b?)))?;

    if let RegionShape::AxisBox { lo, hi } = &region.shape {
        if let Some(image) = interval_image(f, lo, hi, inputs) {
            let margin = image
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|((il, ih), (l, h))| (il - l).min(h - ih))
                .fold(f64::INFINITY, f64::min);
            return Ok(InvarianceCheck {
                ok: margin >= 0.0,
                margin,
                exact: true,
                sampled_margin,
            });
        }
    }
    Ok(InvarianceCheck {
        ok: sampled_margin >= 0.0,
        margin: sampled_margin,
        exact: false,
        sampled_margin,
    })
}

/// Radius used when the center is itself invariant (`r = 0`).
pub const DEGENERATE_RADIUS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct AbsorbingSet {
    pub region: InvariantRegion,
    /// Contraction constant `c = L_Fx` on the enclosing region.
    pub contraction: f64,
    /// `r = sup_z |F(v, z) - v|` over the input samples.
    pub displacement: f64,
    pub radius: f64,
}

/// `W = D_N ∩ B(v, safety * r / (1 - c))`, which `F` maps into itself.
pub fn absorbing_set(
    f: &StateMap,
    enclosing: &InvariantRegion,
    inputs: &InputRange,
    v: &DVector<f64>,
    safety: f64,
    opts: LipschitzOptions,
) -> Result<AbsorbingSet> {
    if !(safety > 1.0 && safety.is_finite()) {
        return Err(Error::InvalidParameter(format!("safety factor must exceed 1, got {safety}")));
    }
    check_dim("absorbing-set center", f.state_dim(), v.len())?;
    if !enclosing.contains(v) {
        return Err(Error::InvalidParameter(format!(
            "center must lie in region '{}'",
            enclosing.label
        )));
    }
    let c = lipschitz_bounds(f, enclosing, inputs, opts)?.l_fx;
    if !(c < 1.0) {
        return Err(Error::NotAContraction { l_fx: c });
    }
    let r = inputs
        .samples(opts.input_samples)
        .iter()
        .try_fold(0.0f64, |acc, z| Ok::<_, Error>(acc.max((f.eval(v, z)? - v).norm())))?;
    let radius = if r > 0.0 {
        safety * r / (1.0 - c)
    } else {
        DEGENERATE_RADIUS
    };
    let label = format!("W[{}]", enclosing.label);
    let center: Vec<f64> = v.iter().copied().collect();
    let region = match &enclosing.shape {
        RegionShape::AxisBox { lo, hi } => {
            InvariantRegion::ball_in_box(label, lo.clone(), hi.clone(), center, radius)?
        }
        RegionShape::BallInBox { lo, hi, center: bc, radius: br } => {
            let offset = (v - DVector::from_column_slice(bc)).norm();
            if offset + radius > *br {
                return Err(Error::InvalidParameter(
                    "absorbing ball does not fit in the enclosing ball".into(),
                ));
            }
            InvariantRegion::ball_in_box(label, lo.clone(), hi.clone(), center, radius)?
        }
        RegionShape::Ball { center: bc, radius: br } => {
            let offset = (v - DVector::from_column_slice(bc)).norm();
            if offset + radius > *br {
                return Err(Error::InvalidParameter(
                    "absorbing ball does not fit in the enclosing ball".into(),
                ));
            }
            InvariantRegion::ball(label, center, radius)?
        }
    };
    Ok(AbsorbingSet {
        region,
        contraction: c,
        displacement: r,
        radius,
    })
}

/// Largest singular value of `D_x F` over a set of states, for one input.
pub fn observed_state_contraction(f: &StateMap, states: &[DVector<f64>], z: &DVector<f64>) -> Result<f64> {
    states
        .iter()
        .try_fold(0.0f64, |acc, x| Ok(acc.max(spectral_norm(&f.jac_state(x, z)?))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statemaps::{Esn, PowerSine};

    fn lorenz_box_map() -> StateMap {
        StateMap::PowerSine(PowerSine::new(0.9, 0.009, 0.1).unwrap())
    }

    #[test]
    fn power_sine_box_is_invariant_with_margin() {
        let v1 = InvariantRegion::cube("V1", &[1.0, 1.0, 1.0], 0.1).unwrap();
        let inputs = InputRange::scalar(-20.0, 20.0).unwrap();
        let chk = check_invariance(&lorenz_box_map(), &v1, &inputs, 10).unwrap();
        assert!(chk.ok && chk.exact);
        // looser oracle: [0.9^0.9 - lambda, 1.1^0.9 + lambda]
        let oracle = (0.9f64.powf(0.9) - 0.009 - 0.9).min(1.1 - 1.1f64.powf(0.9) - 0.009);
        assert!(chk.margin >= oracle);
        assert!(chk.sampled_margin >= chk.margin - 1e-15);
    }

    #[test]
    fn linear_delay_escapes_unit_ball() {
        let ball = InvariantRegion::ball("B", vec![0.0; 3], 1.0).unwrap();
        let inputs = InputRange::scalar(-2.0, 2.0).unwrap();
        let chk = check_invariance(&StateMap::linear_delay(1), &ball, &inputs, 5).unwrap();
        assert!(!chk.ok && chk.margin < 0.0 && !chk.exact);
    }

    #[test]
    fn affine_absorbing_radius() {
        let f = StateMap::Esn(Esn::scaled_identity(1, 0.5).unwrap());
        let dn = InvariantRegion::axis_box("D", vec![-10.0], vec![10.0]).unwrap();
        let inputs = InputRange::scalar(-1.0, 1.0).unwrap();
        let w = absorbing_set(&f, &dn, &inputs, &DVector::zeros(1), 1.05, LipschitzOptions::default()).unwrap();
        assert!((w.displacement - 1.0).abs() < 1e-15);
        assert!((w.radius - 2.0 * 1.05).abs() < 1e-12);
        assert!(check_invariance(&f, &w.region, &inputs, 21).unwrap().ok);
    }

    #[test]
    fn constant_map_gets_degenerate_ball() {
        let w0 = DVector::from_vec(vec![0.3, -0.2]);
        let f = StateMap::Esn(Esn::constant(w0.clone(), 1).unwrap());
        let dn = InvariantRegion::cube("D", &[0.0, 0.0], 1.0).unwrap();
        let inputs = InputRange::scalar(0.0, 1.0).unwrap();
        let w = absorbing_set(&f, &dn, &inputs, &w0, 2.0, LipschitzOptions::default()).unwrap();
        assert_eq!(w.radius, DEGENERATE_RADIUS);
        assert!(check_invariance(&f, &w.region, &inputs, 3).unwrap().ok);
    }

    #[test]
    fn non_contraction_rejected() {
        let f = StateMap::linear_delay(1);
        let dn = InvariantRegion::cube("D", &[0.0; 3], 1.0).unwrap();
        let inputs = InputRange::scalar(0.0, 1.0).unwrap();
        let err = absorbing_set(&f, &dn, &inputs, &DVector::zeros(3), 1.1, LipschitzOptions::default());
        assert!(matches!(err, Err(Error::NotAContraction { .. })));
    }

    #[test]
    fn lorenz_box_absorbing_set_inside_box() {
        let v1 = InvariantRegion::cube("V1", &[1.0, 1.0, 1.0], 0.1).unwrap();
        let inputs = InputRange::scalar(-20.0, 20.0).unwrap();
        let center = DVector::from_element(3, 1.0);
        let w = absorbing_set(&lorenz_box_map(), &v1, &inputs, &center, 1.05, LipschitzOptions::default()).unwrap();
        // r = lambda sup sqrt(1 + sin^4 kz) over kz in [-2, 2], which contains pi/2
        let expected_r = 0.009 * 2f64.sqrt();
        assert!((w.displacement - expected_r).abs() < 1e-5);
        let (lo, hi) = w.region.bounding_box();
        assert!(lo.iter().all(|&l| l >= 0.9) && hi.iter().all(|&h| h <= 1.1));
        assert!(check_invariance(&lorenz_box_map(), &w.region, &inputs, 15).unwrap().ok);
    }

    #[test]
    fn esn_interval_image_is_exact() {
        let a = nalgebra::DMatrix::from_row_slice(2, 2, &[0.2, -0.1, 0.05, 0.1]);
        let e = Esn::new(a, nalgebra::DMatrix::from_element(2, 1, 0.3), DVector::zeros(2), crate::statemaps::Squashing::Tanh).unwrap();
        let f = StateMap::Esn(e);
        let region = InvariantRegion::cube("B", &[0.0, 0.0], 1.0).unwrap();
        let inputs = InputRange::scalar(0.0, 1.0).unwrap();
        let chk = check_invariance(&f, &region, &inputs, 11).unwrap();
        assert!(chk.exact && chk.ok);
        // corners of the box and input range attain the interval image
        assert!((chk.margin - chk.sampled_margin).abs() < 1e-12);
    }
}
