//! State maps `F: R^N x R^d -> R^N` driving the reservoir recursion
//! `x_t = F(x_{t-1}, z_t)`, with first and second partial derivatives.
//!
//! Three families have closed-form derivatives:
//!
//! * [`Esn`]: `sigma(A x + C z + zeta)` with a componentwise squashing.
//! * [`StateMap::LinearDelay`]: the lower shift plus `e_1 z` in dimension
//!   `2q + 1`, whose unique solution is the delay vector of the input.
//! * [`PowerSine`]: `x^alpha + lambda (sin kz, cos kz, sin^2 kz)`.
//!
//! Anything else goes through [`CustomStateMap`] and finite differences.

mod bounds;
mod trig;

pub use bounds::{lipschitz_bounds, BoundMethod, LipschitzBounds, LipschitzConstants, LipschitzOptions};
pub(crate) use trig::{cos_range, sin_range, sin_squared_range};

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{check_dim, fd_jacobian, plain_diff, spectral_norm, FD_STEP};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Squashing {
    Tanh,
    Logistic,
    Identity,
}

impl Squashing {
    pub fn apply(self, p: f64) -> f64 {
        match self {
            Self::Tanh => p.tanh(),
            Self::Logistic => 1.0 / (1.0 + (-p).exp()),
            Self::Identity => p,
        }
    }

    pub fn first(self, p: f64) -> f64 {
        match self {
            Self::Tanh => 1.0 - p.tanh().powi(2),
            Self::Logistic => {
                let s = self.apply(p);
                s * (1.0 - s)
            }
            Self::Identity => 1.0,
        }
    }

    pub fn second(self, p: f64) -> f64 {
        match self {
            Self::Tanh => {
                let t = p.tanh();
                -2.0 * t * (1.0 - t * t)
            }
            Self::Logistic => {
                let s = self.apply(p);
                s * (1.0 - s) * (1.0 - 2.0 * s)
            }
            Self::Identity => 0.0,
        }
    }

    /// `L_sigma = sup |sigma'|`.
    pub fn lipschitz(self) -> f64 {
        match self {
            Self::Tanh | Self::Identity => 1.0,
            Self::Logistic => 0.25,
        }
    }

    /// `sup |sigma''|`: 4/(3 sqrt 3) for tanh, sqrt(3)/18 for the logistic.
    pub fn second_sup(self) -> f64 {
        match self {
            Self::Tanh => 4.0 / (3.0 * 3f64.sqrt()),
            Self::Logistic => 3f64.sqrt() / 18.0,
            Self::Identity => 0.0,
        }
    }
}

/// `F(x, z) = sigma(A x + C z + zeta)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Esn {
    a: DMatrix<f64>,
    c: DMatrix<f64>,
    zeta: DVector<f64>,
    squashing: Squashing,
}

impl Esn {
    pub fn new(a: DMatrix<f64>, c: DMatrix<f64>, zeta: DVector<f64>, squashing: Squashing) -> Result<Self> {
        let n = a.nrows();
        if n == 0 || !a.is_square() {
            return Err(Error::InvalidParameter(format!(
                "reservoir matrix must be square and non-empty, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        check_dim("input matrix rows", n, c.nrows())?;
        check_dim("bias length", n, zeta.len())?;
        if c.ncols() == 0 {
            return Err(Error::InvalidParameter("input matrix needs at least one column".into()));
        }
        if a.iter().chain(c.iter()).chain(zeta.iter()).any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("ESN weights must be finite".into()));
        }
        Ok(Self { a, c, zeta, squashing })
    }

    /// `F(x, z) = w` for every input.
    pub fn constant(w: DVector<f64>, input_dim: usize) -> Result<Self> {
        let n = w.len();
        Self::new(DMatrix::zeros(n, n), DMatrix::zeros(n, input_dim), w, Squashing::Identity)
    }

    /// `F(x, z) = a x + z` on `R^n` with `d = n`.
    pub fn scaled_identity(n: usize, a: f64) -> Result<Self> {
        Self::new(
            DMatrix::identity(n, n) * a,
            DMatrix::identity(n, n),
            DVector::zeros(n),
            Squashing::Identity,
        )
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn zeta(&self) -> &DVector<f64> {
        &self.zeta
    }

    pub fn squashing(&self) -> Squashing {
        self.squashing
    }

    fn preactivation(&self, x: &DVector<f64>, z: &DVector<f64>) -> DVector<f64> {
        &self.a * x + &self.c * z + &self.zeta
    }
}

/// Which branch of `x^alpha` to use off the positive orthant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PowerBranch {
    /// `sign(x) |x|^alpha`, defined everywhere and odd.
    #[default]
    Odd,
    /// Only strictly positive coordinates are admissible.
    Positive,
}

/// `F(x, z) = (x_1^a, x_2^a, x_3^a) + lambda (sin kz, cos kz, sin^2 kz)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerSine {
    pub alpha: f64,
    pub lambda: f64,
    pub k: f64,
    pub branch: PowerBranch,
}

impl PowerSine {
    pub fn new(alpha: f64, lambda: f64, k: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidParameter(format!("alpha must lie in (0,1), got {alpha}")));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) || !(k >= 0.0 && k.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "lambda and k must be finite and non-negative, got {lambda}, {k}"
            )));
        }
        Ok(Self {
            alpha,
            lambda,
            k,
            branch: PowerBranch::Odd,
        })
    }

    pub fn with_branch(mut self, branch: PowerBranch) -> Self {
        self.branch = branch;
        self
    }

    /// `sign(x) |x|^alpha`.
    pub fn power(&self, x: f64) -> f64 {
        x.signum() * x.abs().powf(self.alpha)
    }

    fn check_domain(&self, x: &DVector<f64>, need_derivative: bool) -> Result<()> {
        for (i, &xi) in x.iter().enumerate() {
            let bad = match self.branch {
                PowerBranch::Positive => xi <= 0.0,
                PowerBranch::Odd => need_derivative && xi == 0.0,
            };
            if bad || !xi.is_finite() {
                return Err(Error::DomainViolation(format!(
                    "power-sine map needs {} coordinates, x[{i}] = {xi}",
                    if need_derivative { "non-zero" } else { "positive" }
                )));
            }
        }
        Ok(())
    }

    /// `(sin kz, cos kz, sin^2 kz)`.
    pub fn forcing(&self, z: f64) -> [f64; 3] {
        let s = (self.k * z).sin();
        [s, (self.k * z).cos(), s * s]
    }
}

pub trait CustomStateMap: Send + Sync + fmt::Debug {
    fn state_dim(&self) -> usize;
    fn input_dim(&self) -> usize;
    fn eval(&self, x: &DVector<f64>, z: &DVector<f64>) -> DVector<f64>;
    fn name(&self) -> String;
}

#[derive(Debug, Clone)]
pub enum StateMap {
    Esn(Esn),
    /// Lower shift plus `e_1 z` in dimension `2q + 1`, scalar input.
    LinearDelay { q: usize },
    PowerSine(PowerSine),
    Custom(Arc<dyn CustomStateMap>),
}

/// Norms of the second partial derivatives at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecondPartials {
    pub xx: f64,
    pub xz: f64,
}

impl StateMap {
    pub fn linear_delay(q: usize) -> Self {
        Self::LinearDelay { q }
    }

    pub fn state_dim(&self) -> usize {
        match self {
            Self::Esn(e) => e.a.nrows(),
            Self::LinearDelay { q } => 2 * q + 1,
            Self::PowerSine(_) => 3,
            Self::Custom(c) => c.state_dim(),
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Self::Esn(e) => e.c.ncols(),
            Self::LinearDelay { .. } | Self::PowerSine(_) => 1,
            Self::Custom(c) => c.input_dim(),
        }
    }

    /// Highest derivative order available in closed form.
    pub fn derivative_order(&self) -> u8 {
        match self {
            Self::Custom(_) => 0,
            _ => 2,
        }
    }

    /// `D_x F` does not depend on `z` and `D_z F` does not depend on `x`.
    pub fn is_input_additive(&self) -> bool {
        match self {
            Self::Esn(e) => e.squashing == Squashing::Identity,
            Self::LinearDelay { .. } | Self::PowerSine(_) => true,
            Self::Custom(_) => false,
        }
    }

    pub fn label(&self) -> String {
        match self {
            Self::Esn(e) => format!("esn(N={}, d={}, {:?})", e.a.nrows(), e.c.ncols(), e.squashing),
            Self::LinearDelay { q } => format!("linear-delay(q={q})"),
            Self::PowerSine(p) => format!("power-sine(alpha={}, lambda={}, k={})", p.alpha, p.lambda, p.k),
            Self::Custom(c) => c.name(),
        }
    }

    /// Shift matrix of the linear delay map (ones on the subdiagonal).
    pub fn shift_matrix(n: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, n, |i, j| if i == j + 1 { 1.0 } else { 0.0 })
    }

    fn check_args(&self, x: &DVector<f64>, z: &DVector<f64>) -> Result<()> {
        check_dim("state", self.state_dim(), x.len())?;
        check_dim("input", self.input_dim(), z.len())
    }

    pub fn eval(&self, x: &DVector<f64>, z: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_args(x, z)?;
        let out = match self {
            Self::Esn(e) => e.preactivation(x, z).map(|p| e.squashing.apply(p)),
            Self::LinearDelay { .. } => {
                let n = x.len();
                DVector::from_fn(n, |i, _| if i == 0 { z[0] } else { x[i - 1] })
            }
            Self::PowerSine(p) => {
                p.check_domain(x, false)?;
                let f = p.forcing(z[0]);
                DVector::from_fn(3, |i, _| p.power(x[i]) + p.lambda * f[i])
            }
            Self::Custom(c) => {
                let y = c.eval(x, z);
                check_dim("custom state map output", c.state_dim(), y.len())?;
                y
            }
        };
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("evaluating {}", self.label()),
                substep: 0,
            });
        }
        Ok(out)
    }

    /// `D_x F(x, z)`.
    pub fn jac_state(&self, x: &DVector<f64>, z: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_args(x, z)?;
        match self {
            Self::Esn(e) => {
                let s = e.preactivation(x, z).map(|p| e.squashing.first(p));
                Ok(DMatrix::from_fn(e.a.nrows(), e.a.ncols(), |i, j| s[i] * e.a[(i, j)]))
            }
            Self::LinearDelay { .. } => Ok(Self::shift_matrix(x.len())),
            Self::PowerSine(p) => {
                p.check_domain(x, true)?;
                Ok(DMatrix::from_fn(3, 3, |i, j| {
                    if i == j {
                        p.alpha * x[i].abs().powf(p.alpha - 1.0)
                    } else {
                        0.0
                    }
                }))
            }
            Self::Custom(_) => fd_jacobian(|y| self.eval(y, z), plain_diff, x, FD_STEP),
        }
    }

    /// `D_z F(x, z)`.
    pub fn jac_input(&self, x: &DVector<f64>, z: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_args(x, z)?;
        match self {
            Self::Esn(e) => {
                let s = e.preactivation(x, z).map(|p| e.squashing.first(p));
                Ok(DMatrix::from_fn(e.c.nrows(), e.c.ncols(), |i, j| s[i] * e.c[(i, j)]))
            }
            Self::LinearDelay { .. } => Ok(DMatrix::from_fn(x.len(), 1, |i, _| if i == 0 { 1.0 } else { 0.0 })),
            Self::PowerSine(p) => {
                p.check_domain(x, false)?;
                let kz = p.k * z[0];
                let lk = p.lambda * p.k;
                Ok(DMatrix::from_column_slice(
                    3,
                    1,
                    &[lk * kz.cos(), -lk * kz.sin(), lk * (2.0 * kz).sin()],
                ))
            }
            Self::Custom(_) => fd_jacobian(|w| self.eval(x, w), plain_diff, z, FD_STEP),
        }
    }

    /// Norms of `D_xx F` and `D_xz F` as bilinear maps.
    ///
    /// Exact for the linear delay, power-sine and affine ESN. For saturating
    /// ESNs and custom maps the returned values are upper bounds: the
    /// Frobenius norm of the tensor, or for the ESN
    /// `max_i |sigma''_i| |A| |B|`.
    pub fn second_partials(&self, x: &DVector<f64>, z: &DVector<f64>) -> Result<SecondPartials> {
        self.check_args(x, z)?;
        match self {
            Self::LinearDelay { .. } => Ok(SecondPartials { xx: 0.0, xz: 0.0 }),
            Self::Esn(e) if e.squashing == Squashing::Identity => Ok(SecondPartials { xx: 0.0, xz: 0.0 }),
            Self::Esn(e) => {
                let s = e.preactivation(x, z).map(|p| e.squashing.second(p));
                let smax = s.amax();
                let na = spectral_norm(&e.a);
                let nc = spectral_norm(&e.c);
                let row_bound = |m: &DMatrix<f64>, other: &DMatrix<f64>| -> f64 {
                    (0..m.nrows())
                        .map(|i| (s[i] * m.row(i).norm() * other.row(i).norm()).powi(2))
                        .sum::<f64>()
                        .sqrt()
                };
                Ok(SecondPartials {
                    xx: (smax * na * na).min(row_bound(&e.a, &e.a)),
                    xz: (smax * na * nc).min(row_bound(&e.a, &e.c)),
                })
            }
            Self::PowerSine(p) => {
                p.check_domain(x, true)?;
                let xx = x
                    .iter()
                    .map(|xi| p.alpha * (1.0 - p.alpha) * xi.abs().powf(p.alpha - 2.0))
                    .fold(0.0, f64::max);
                Ok(SecondPartials { xx, xz: 0.0 })
            }
            Self::Custom(_) => {
                let n = self.state_dim();
                let mut xx = 0.0;
                let mut xz = 0.0;
                for i in 0..n {
                    let row_x = |y: &DVector<f64>, w: &DVector<f64>| -> Result<DVector<f64>> {
                        Ok(self.jac_state(y, w)?.row(i).transpose())
                    };
                    let hxx = fd_jacobian(|y| row_x(y, z), plain_diff, x, 1e-4)?;
                    let hxz = fd_jacobian(|w| row_x(x, w), plain_diff, z, 1e-4)?;
                    xx += hxx.norm_squared();
                    xz += hxz.norm_squared();
                }
                Ok(SecondPartials {
                    xx: xx.sqrt(),
                    xz: xz.sqrt(),
                })
            }
        }
    }
}
