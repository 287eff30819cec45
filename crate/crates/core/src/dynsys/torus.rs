//! Maps on the unit torus `[0,1)^n`.

use nalgebra::{DMatrix, DVector};

use super::{DiscreteSystem, Domain};
use crate::error::{Error, Result};
use crate::linalg::check_dim;

/// Reduce a coordinate to `[0, 1)`. `rem_euclid` can round tiny negatives up
/// to exactly 1.0, which is folded back to 0.
pub(crate) fn wrap_unit(x: f64) -> f64 {
    let r = x.rem_euclid(1.0);
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Signed difference `a - b` mapped into `[-1/2, 1/2)`.
pub(crate) fn wrapped_delta(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    if d >= 0.5 {
        d - 1.0
    } else {
        d
    }
}

/// Rigid rotation `m -> m + theta mod 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TorusRotation {
    angles: Vec<f64>,
}

impl TorusRotation {
    pub fn new(angles: Vec<f64>) -> Result<Self> {
        if angles.is_empty() || angles.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidParameter(
                "rotation needs at least one finite angle".into(),
            ));
        }
        Ok(Self { angles })
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    fn shift(&self, m: &DVector<f64>, sign: f64) -> Result<DVector<f64>> {
        check_dim("phase point", self.angles.len(), m.len())?;
        Ok(DVector::from_iterator(
            m.len(),
            m.iter()
                .zip(&self.angles)
                .map(|(x, a)| wrap_unit(x + sign * a)),
        ))
    }
}

impl DiscreteSystem for TorusRotation {
    fn phase_dim(&self) -> usize {
        self.angles.len()
    }

    fn domain(&self) -> Domain {
        Domain::Torus {
            periods: vec![1.0; self.angles.len()],
        }
    }

    fn step(&self, m: &DVector<f64>) -> Result<DVector<f64>> {
        self.shift(m, 1.0)
    }

    fn inverse_step(&self, m: &DVector<f64>) -> Result<DVector<f64>> {
        self.shift(m, -1.0)
    }

    fn jacobian(&self, _m: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(DMatrix::identity(self.angles.len(), self.angles.len()))
    }

    fn inverse_jacobian(&self, _m: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(DMatrix::identity(self.angles.len(), self.angles.len()))
    }

    fn has_analytic_tangent(&self) -> bool {
        true
    }

    fn label(&self) -> String {
        format!("torus-rotation{:?}", self.angles)
    }
}

/// Arnold's cat map `m -> [[2,1],[1,1]] m mod 1`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CatMap;

impl CatMap {
    pub fn matrix() -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 1.0])
    }

    pub fn inverse_matrix() -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 2.0])
    }

    fn apply(a: &DMatrix<f64>, m: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("phase point", 2, m.len())?;
        Ok((a * m).map(wrap_unit))
    }
}

impl DiscreteSystem for CatMap {
    fn phase_dim(&self) -> usize {
        2
    }

    fn domain(&self) -> Domain {
        Domain::Torus {
            periods: vec![1.0, 1.0],
        }
    }

    fn step(&self, m: &DVector<f64>) -> Result<DVector<f64>> {
        Self::apply(&Self::matrix(), m)
    }

    fn inverse_step(&self, m: &DVector<f64>) -> Result<DVector<f64>> {
        Self::apply(&Self::inverse_matrix(), m)
    }

    fn jacobian(&self, _m: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(Self::matrix())
    }

    fn inverse_jacobian(&self, _m: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(Self::inverse_matrix())
    }

    fn has_analytic_tangent(&self) -> bool {
        true
    }

    fn label(&self) -> String {
        "cat-map".into()
    }
}
