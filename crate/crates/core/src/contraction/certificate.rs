use std::fmt::Write as _;

use nalgebra::DVector;

use super::{check_invariance, InvarianceCheck, InvariantRegion};
use crate::dynsys::{tangent_norm_bounds, DiscreteSystem, InputRange, ObservationMap};
use crate::error::{Error, Result};
use crate::statemaps::{lipschitz_bounds, LipschitzBounds, LipschitzOptions, StateMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Requirement {
    /// Invariance plus `L_Fx < 1`.
    Esp,
    /// Invariance plus `L_Fx < min(1, 1/|T phi^-1|)`.
    Diff,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertifyOptions {
    pub lipschitz: LipschitzOptions,
    pub invariance_resolution: usize,
    /// `R` is this multiple of its lower bound.
    pub r_factor: f64,
    /// `delta_0` is this fraction of its upper bound.
    pub delta_fraction: f64,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self {
            lipschitz: LipschitzOptions::default(),
            invariance_resolution: 20,
            r_factor: 1.05,
            delta_fraction: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContractionCertificate {
    pub region: InvariantRegion,
    pub state_map: String,
    pub system: String,
    pub bounds: LipschitzBounds,
    pub input_range: InputRange,
    /// Sampled `sup |T phi|`.
    pub tangent_norm: f64,
    /// Sampled `sup |T phi^-1|`.
    pub tangent_inv_norm: f64,
    pub d_omega_norm: f64,
    pub invariance: InvarianceCheck,
    pub esp_ok: bool,
    pub diff_ok: bool,
    /// `L_Fz |D omega| / (1 - L_Fx |T phi^-1|)`.
    pub r_lower_bound: Option<f64>,
    pub r: Option<f64>,
    /// `(1 - L_Fx) / (L_Fxx |T phi^-1| R + L_Fxz |D omega|)`.
    pub delta0_upper_bound: Option<f64>,
    pub delta0: Option<f64>,
    pub c0: Option<f64>,
    /// Some constant is a sampled supremum and may underestimate.
    pub sampled: bool,
    pub n_samples: usize,
}

impl ContractionCertificate {
    pub fn holds(&self, req: Requirement) -> bool {
        self.invariance.ok
            && match req {
                Requirement::Esp => self.esp_ok,
                Requirement::Diff => self.diff_ok,
            }
    }

    /// `key: value` lines.
    pub fn to_report(&self) -> String {
        let opt = |x: Option<f64>| x.map_or_else(|| "n/a".to_string(), |v| format!("{v}"));
        let mut s = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(s, "{k}: {v}");
        };
        line("region", self.region.label.clone());
        line("state_map", self.state_map.clone());
        line("system", self.system.clone());
        line("input_range", format!("{:?}..{:?}", self.input_range.lo, self.input_range.hi));
        line("L_Fx", format!("{}", self.bounds.l_fx));
        line("L_Fz", format!("{}", self.bounds.l_fz));
        line("L_Fxx", format!("{}", self.bounds.l_fxx));
        line("L_Fxz", format!("{}", self.bounds.l_fxz));
        line("L_Fx_grid", format!("{}", self.bounds.grid.l_fx));
        line("bound_method", format!("{:?}", self.bounds.method));
        line("tangent_norm", format!("{}", self.tangent_norm));
        line("tangent_inv_norm", format!("{}", self.tangent_inv_norm));
        line("d_omega_norm", format!("{}", self.d_omega_norm));
        line("invariance_ok", format!("{}", self.invariance.ok));
        line("invariance_margin", format!("{}", self.invariance.margin));
        line("invariance_exact", format!("{}", self.invariance.exact));
        line("esp_ok", format!("{}", self.esp_ok));
        line("diff_ok", format!("{}", self.diff_ok));
        line("R_lower_bound", opt(self.r_lower_bound));
        line("R", opt(self.r));
        line("delta0_upper_bound", opt(self.delta0_upper_bound));
        line("delta0", opt(self.delta0));
        line("c0", opt(self.c0));
        line("sampled", format!("{}", self.sampled));
        line("n_samples", format!("{}", self.n_samples));
        s
    }

    pub const CSV_HEADER: &'static str = "region,L_Fx,L_Fz,L_Fxx,L_Fxz,tangent_inv_norm,d_omega_norm,invariance_ok,invariance_margin,esp_ok,diff_ok,R,delta0,c0,sampled";

    pub fn csv_row(&self) -> String {
        let opt = |x: Option<f64>| x.map_or_else(String::new, |v| format!("{v}"));
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.region.label,
            self.bounds.l_fx,
            self.bounds.l_fz,
            self.bounds.l_fxx,
            self.bounds.l_fxz,
            self.tangent_inv_norm,
            self.d_omega_norm,
            self.invariance.ok,
            self.invariance.margin,
            self.esp_ok,
            self.diff_ok,
            opt(self.r),
            opt(self.delta0),
            opt(self.c0),
            self.sampled
        )
    }
}

/// Evaluate every hypothesis of the existence and differentiability results
/// for `F` on `region`, driven by `omega`-observations of `sys` sampled at
/// `attractor_samples`. Failed conditions are reported as flags.
pub fn certify(
    f: &StateMap,
    region: &InvariantRegion,
    sys: &dyn DiscreteSystem,
    obs: &ObservationMap,
    attractor_samples: &[DVector<f64>],
    opts: CertifyOptions,
) -> Result<ContractionCertificate> {
    if attractor_samples.is_empty() {
        return Err(Error::InvalidParameter("certification needs attractor samples".into()));
    }
    let input_range = obs.observed_range(attractor_samples)?;
    let bounds = lipschitz_bounds(f, region, &input_range, opts.lipschitz)?;
    let tangent = tangent_norm_bounds(sys, attractor_samples)?;
    let d_omega = obs.derivative_norm_sup(attractor_samples)?;
    let invariance = check_invariance(f, region, &input_range, opts.invariance_resolution)?;

    let l_fx = bounds.l_fx;
    let tau = tangent.inverse;
    let esp_ok = l_fx < 1.0;
    let diff_ok = region.is_convex() && l_fx < 1.0f64.min(1.0 / tau);

    let (mut r_lower_bound, mut r, mut delta0_upper_bound, mut delta0, mut c0) = (None, None, None, None, None);
    if diff_ok {
        let r_lb = bounds.l_fz * d_omega / (1.0 - l_fx * tau);
        // R only has to be positive when the lower bound vanishes.
        let r_val = if r_lb > 0.0 { opts.r_factor * r_lb } else { 1.0 };
        let curvature = bounds.l_fxx * tau * r_val + bounds.l_fxz * d_omega;
        let (d_ub, d_val) = if curvature > 0.0 {
            let ub = (1.0 - l_fx) / curvature;
            (ub, opts.delta_fraction * ub)
        } else {
            (f64::INFINITY, 1.0)
        };
        // |Psi f1 - Psi f2|_{C1(delta)} <= max(L_Fx + delta K, L_Fx tau) |f1 - f2|_{C1(delta)}
        let c = (l_fx * tau).max(l_fx + d_val * curvature);
        r_lower_bound = Some(r_lb);
        r = Some(r_val);
        delta0_upper_bound = Some(d_ub);
        delta0 = Some(d_val);
        c0 = Some(c);
    }

    Ok(ContractionCertificate {
        region: region.clone(),
        state_map: f.label(),
        system: sys.label(),
        sampled: !(bounds.is_rigorous() && tangent.analytic && invariance.exact),
        bounds,
        input_range,
        tangent_norm: tangent.forward,
        tangent_inv_norm: tau,
        d_omega_norm: d_omega,
        invariance,
        esp_ok,
        diff_ok,
        r_lower_bound,
        r,
        delta0_upper_bound,
        delta0,
        c0,
        n_samples: attractor_samples.len(),
    })
}
