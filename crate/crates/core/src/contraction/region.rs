use nalgebra::DVector;
use rand::Rng;

use crate::dynsys::grid_points;

/// Upper bound on the nodes of a region grid (2 per axis is always allowed).
pub const GRID_BUDGET: usize = 100_000;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum RegionShape {
    AxisBox { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    /// Intersection of a ball with a box, as returned by the absorbing-set
    /// construction.
    BallInBox {
        lo: Vec<f64>,
        hi: Vec<f64>,
        center: Vec<f64>,
        radius: f64,
    },
}

/// Closed convex subset of the state space.
#[derive(Debug, Clone, PartialEq)]
pub struct InvariantRegion {
    pub label: String,
    pub shape: RegionShape,
}

fn check_box(lo: &[f64], hi: &[f64]) -> Result<()> {
    if lo.is_empty() || lo.len() != hi.len() {
        return Err(Error::InvalidParameter("box bounds must be non-empty and of equal length".into()));
    }
    if lo.iter().zip(hi).any(|(l, h)| !(l.is_finite() && h.is_finite() && l < h)) {
        return Err(Error::InvalidParameter(format!("box needs lo < hi componentwise, got {lo:?}..{hi:?}")));
    }
    Ok(())
}

fn check_ball(center: &[f64], radius: f64) -> Result<()> {
    if center.is_empty() || center.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidParameter("ball center must be non-empty and finite".into()));
    }
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::InvalidParameter(format!("ball radius must be positive, got {radius}")));
    }
    Ok(())
}

fn box_signed_distance(lo: &[f64], hi: &[f64], x: &DVector<f64>) -> f64 {
    let inside = x.iter().zip(lo.iter().zip(hi)).all(|(v, (l, h))| l <= v && v <= h);
    if inside {
        x.iter()
            .zip(lo.iter().zip(hi))
            .map(|(v, (l, h))| (v - l).min(h - v))
            .fold(f64::INFINITY, f64::min)
    } else {
        let outside: f64 = x
            .iter()
            .zip(lo.iter().zip(hi))
            .map(|(v, (l, h))| {
                let d = (l - v).max(v - h).max(0.0);
                d * d
            })
            .sum();
        -outside.sqrt()
    }
}

fn ball_signed_distance(center: &[f64], radius: f64, x: &DVector<f64>) -> f64 {
    let d: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
    radius - d.sqrt()
}

impl InvariantRegion {
    pub fn axis_box(label: impl Into<String>, lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        check_box(&lo, &hi)?;
        Ok(Self {
            label: label.into(),
            shape: RegionShape::AxisBox { lo, hi },
        })
    }

    /// Box `center +- half_width` on every axis.
    pub fn cube(label: impl Into<String>, center: &[f64], half_width: f64) -> Result<Self> {
        Self::axis_box(
            label,
            center.iter().map(|c| c - half_width).collect(),
            center.iter().map(|c| c + half_width).collect(),
        )
    }

    pub fn ball(label: impl Into<String>, center: Vec<f64>, radius: f64) -> Result<Self> {
        check_ball(&center, radius)?;
        Ok(Self {
            label: label.into(),
            shape: RegionShape::Ball { center, radius },
        })
    }

    pub fn ball_in_box(
        label: impl Into<String>,
        lo: Vec<f64>,
        hi: Vec<f64>,
        center: Vec<f64>,
        radius: f64,
    ) -> Result<Self> {
        check_box(&lo, &hi)?;
        check_ball(&center, radius)?;
        if center.len() != lo.len() {
            return Err(Error::DimensionMismatch {
                what: "ball center",
                expected: lo.len(),
                got: center.len(),
            });
        }
        Ok(Self {
            label: label.into(),
            shape: RegionShape::BallInBox { lo, hi, center, radius },
        })
    }

    pub fn dim(&self) -> usize {
        match &self.shape {
            RegionShape::AxisBox { lo, .. } | RegionShape::BallInBox { lo, .. } => lo.len(),
            RegionShape::Ball { center, .. } => center.len(),
        }
    }

    /// Every built-in shape is convex.
    pub fn is_convex(&self) -> bool {
        true
    }

    pub fn is_axis_box(&self) -> bool {
        matches!(self.shape, RegionShape::AxisBox { .. })
    }

    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match &self.shape {
            RegionShape::AxisBox { lo, hi } => (lo.clone(), hi.clone()),
            RegionShape::Ball { center, radius } => (
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            ),
            RegionShape::BallInBox { lo, hi, center, radius } => (
                lo.iter().zip(center).map(|(l, c)| l.max(c - radius)).collect(),
                hi.iter().zip(center).map(|(h, c)| h.min(c + radius)).collect(),
            ),
        }
    }

    pub fn center(&self) -> DVector<f64> {
        match &self.shape {
            RegionShape::AxisBox { lo, hi } => {
                DVector::from_iterator(lo.len(), lo.iter().zip(hi).map(|(l, h)| 0.5 * (l + h)))
            }
            RegionShape::Ball { center, .. } | RegionShape::BallInBox { center, .. } => {
                DVector::from_column_slice(center)
            }
        }
    }

    pub fn diameter(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        let box_diam = lo
            .iter()
            .zip(&hi)
            .map(|(l, h)| (h - l) * (h - l))
            .sum::<f64>()
            .sqrt();
        match &self.shape {
            RegionShape::AxisBox { .. } => box_diam,
            RegionShape::Ball { radius, .. } => 2.0 * radius,
            RegionShape::BallInBox { radius, .. } => box_diam.min(2.0 * radius),
        }
    }

    /// Positive inside (distance to the boundary), negative outside.
    pub fn signed_distance(&self, x: &DVector<f64>) -> f64 {
        match &self.shape {
            RegionShape::AxisBox { lo, hi } => box_signed_distance(lo, hi, x),
            RegionShape::Ball { center, radius } => ball_signed_distance(center, *radius, x),
            RegionShape::BallInBox { lo, hi, center, radius } => {
                box_signed_distance(lo, hi, x).min(ball_signed_distance(center, *radius, x))
            }
        }
    }

    pub fn contains(&self, x: &DVector<f64>) -> bool {
        x.len() == self.dim() && self.signed_distance(x) >= 0.0
    }

    /// Contains up to an absolute slack `tol`.
    pub fn contains_within(&self, x: &DVector<f64>, tol: f64) -> bool {
        x.len() == self.dim() && self.signed_distance(x) >= -tol
    }

    /// Points of a `resolution`-per-axis grid over the bounding box that lie
    /// in the region, plus the center. In high dimension the per-axis
    /// resolution is lowered until the grid holds at most `GRID_BUDGET` nodes.
    pub fn grid(&self, resolution: usize) -> Vec<DVector<f64>> {
        let (lo, hi) = self.bounding_box();
        let mut per_axis = resolution.max(2);
        while per_axis > 2 && (per_axis as f64).powi(lo.len() as i32) > GRID_BUDGET as f64 {
            per_axis -= 1;
        }
        let mut pts: Vec<_> = grid_points(&lo, &hi, per_axis)
            .into_iter()
            .filter(|p| self.contains(p))
            .collect();
        let c = self.center();
        if self.contains(&c) {
            pts.push(c);
        }
        pts
    }

    /// Uniform sample by rejection from the bounding box.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let (lo, hi) = self.bounding_box();
        loop {
            let x = DVector::from_iterator(lo.len(), lo.iter().zip(&hi).map(|(l, h)| rng.gen_range(*l..=*h)));
            if self.contains(&x) {
                return x;
            }
        }
    }
}
