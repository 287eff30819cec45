//! Time-h flow maps of autonomous ODEs, integrated with fixed-step RK4.

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;

use super::{DiscreteSystem, Domain};
use crate::error::{Error, Result};
use crate::linalg::{all_finite, check_dim};

pub trait VectorField: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn eval(&self, x: &DVector<f64>) -> DVector<f64>;
    fn label(&self) -> String;
}

/// Which sign convention to use for the first Lorenz equation.
///
/// `Standard` is `du/dt = sigma (v - u)`, the classical system with the
/// butterfly attractor. `AsPrinted` is `du/dt = sigma (u - v)`, kept only
/// so the two can be compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LorenzSign {
    #[default]
    Standard,
    AsPrinted,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lorenz {
    pub sigma: f64,
    pub rho: f64,
    pub beta: f64,
    pub sign: LorenzSign,
}

impl Default for Lorenz {
    fn default() -> Self {
        Self {
            sigma: 10.0,
            rho: 28.0,
            beta: 8.0 / 3.0,
            sign: LorenzSign::Standard,
        }
    }
}

impl VectorField for Lorenz {
    fn dim(&self) -> usize {
        3
    }

    fn eval(&self, x: &DVector<f64>) -> DVector<f64> {
        let (u, v, w) = (x[0], x[1], x[2]);
        let du = match self.sign {
            LorenzSign::Standard => self.sigma * (v - u),
            LorenzSign::AsPrinted => self.sigma * (u - v),
        };
        DVector::from_vec(vec![du, u * (self.rho - w) - v, u * v - self.beta * w])
    }

    fn label(&self) -> String {
        let sign = match self.sign {
            LorenzSign::Standard => "standard",
            LorenzSign::AsPrinted => "as-printed",
        };
        format!(
            "lorenz(sigma={}, rho={}, beta={}, sign={sign})",
            self.sigma, self.rho, self.beta
        )
    }
}

/// `phi(m) = m + int_0^h X(x(t)) dt` evaluated with `substeps` RK4 steps.
///
/// The inverse integrates backward with the same scheme and then corrects
/// the result so that it is the inverse of the discrete map itself, not of
/// the exact flow.
#[derive(Debug, Clone)]
pub struct OdeFlow {
    field: Arc<dyn VectorField>,
    h: f64,
    substeps: usize,
    round_trip_tol: f64,
}

/// Maximum number of correction sweeps applied after backward integration.
const MAX_INVERSE_CORRECTIONS: usize = 12;

impl OdeFlow {
    pub fn new(field: Arc<dyn VectorField>, h: f64, substeps: usize) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::InvalidParameter(format!("time step must be positive, got {h}")));
        }
        if substeps == 0 {
            return Err(Error::InvalidParameter("substeps must be at least 1".into()));
        }
        Ok(Self {
            field,
            h,
            substeps,
            round_trip_tol: 1e-9,
        })
    }

    pub fn lorenz(h: f64) -> Self {
        Self::new(Arc::new(Lorenz::default()), h, 1).expect("valid default flow")
    }

    pub fn with_round_trip_tol(mut self, tol: f64) -> Self {
        self.round_trip_tol = tol;
        self
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn substeps(&self) -> usize {
        self.substeps
    }

    pub fn field(&self) -> &Arc<dyn VectorField> {
        &self.field
    }

    fn rk4(&self, x: &DVector<f64>, dt: f64) -> DVector<f64> {
        let f = &self.field;
        let k1 = f.eval(x);
        let k2 = f.eval(&(x + &k1 * (dt / 2.0)));
        let k3 = f.eval(&(x + &k2 * (dt / 2.0)));
        let k4 = f.eval(&(x + &k3 * dt));
        x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
    }

    fn integrate(&self, m: &DVector<f64>, direction: f64, context: &str) -> Result<DVector<f64>> {
        check_dim("phase point", self.field.dim(), m.len())?;
        let dt = direction * self.h / self.substeps as f64;
        let mut x = m.clone();
        for substep in 0..self.substeps {
            x = self.rk4(&x, dt);
            if !all_finite(&x) {
                return Err(Error::NonFinite {
                    context: context.to_string(),
                    substep,
                });
            }
        }
        Ok(x)
    }

    /// Backward RK4 without the correction sweeps.
    pub fn backward_step(&self, m: &DVector<f64>) -> Result<DVector<f64>> {
        self.integrate(m, -1.0, "backward integration")
    }
}

impl DiscreteSystem for OdeFlow {
    fn phase_dim(&self) -> usize {
        self.field.dim()
    }

    fn domain(&self) -> Domain {
        Domain::UnboundedWithAttractor
    }

    fn step(&self, m: &DVector<f64>) -> Result<DVector<f64>> {
        self.integrate(m, 1.0, "forward integration")
    }

    fn inverse_step(&self, m: &DVector<f64>) -> Result<DVector<f64>> {
        // phi = id + O(h), so y <- y - (phi(y) - m) is a contraction near the
        // backward-integrated guess.
        let scale = m.norm().max(1.0);
        let mut y = self.backward_step(m)?;
        let mut r = self.step(&y)? - m;
        let mut residual = r.norm();
        for _ in 0..MAX_INVERSE_CORRECTIONS {
            if residual <= 1e-15 * scale {
                break;
            }
            let candidate = &y - &r;
            let rc = self.step(&candidate)? - m;
            let next = rc.norm();
            if !(next < residual) {
                break;
            }
            y = candidate;
            r = rc;
            residual = next;
        }
        let rel = residual / scale;
        if !rel.is_finite() || rel > self.round_trip_tol {
            return Err(Error::RoundTripFailure {
                error: rel,
                tolerance: self.round_trip_tol,
            });
        }
        Ok(y)
    }

    fn label(&self) -> String {
        format!("flow[{}; h={}, substeps={}]", self.field.label(), self.h, self.substeps)
    }
}
