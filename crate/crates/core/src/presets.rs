//! The Lorenz-driven power-sine configuration with eight invariant boxes.

use nalgebra::DVector;

use crate::contraction::InvariantRegion;
use crate::dynsys::{ObservationMap, OdeFlow, PhasePoint};
use crate::statemaps::{PowerSine, StateMap};

pub const H: f64 = 0.01;
pub const ALPHA: f64 = 0.9;
pub const LAMBDA: f64 = 0.009;
pub const K: f64 = 0.1;
pub const WASHOUT: usize = 2000;
/// Total trajectory length is `WASHOUT + RECORD = 4000` steps.
pub const RECORD: usize = 2000;
pub const BOX_HALF_WIDTH: f64 = 0.1;

pub fn initial_point() -> PhasePoint {
    DVector::from_vec(vec![0.0, 1.0, 1.05])
}

pub fn system() -> OdeFlow {
    OdeFlow::lorenz(H)
}

/// `omega(u, v, w) = u`.
pub fn observation() -> ObservationMap {
    ObservationMap::coordinate(3, 0).expect("valid projection")
}

pub fn state_map() -> StateMap {
    StateMap::PowerSine(PowerSine::new(ALPHA, LAMBDA, K).expect("valid parameters"))
}

/// Centers `(±1, ±1, ±1)`: `V1 = (1,1,1)`, `V2 = (-1,1,1)`, then the sign of
/// `x1` alternates fastest, `x2` next and `x3` slowest.
pub fn box_centers() -> Vec<[f64; 3]> {
    let mut out = Vec::with_capacity(8);
    for s3 in [1.0, -1.0] {
        for s2 in [1.0, -1.0] {
            for s1 in [1.0, -1.0] {
                out.push([s1, s2, s3]);
            }
        }
    }
    out
}

pub fn regions() -> Vec<InvariantRegion> {
    box_centers()
        .iter()
        .enumerate()
        .map(|(i, c)| InvariantRegion::cube(format!("V{}", i + 1), c, BOX_HALF_WIDTH).expect("valid box"))
        .collect()
}

/// Fixed points of `x -> sign(x)|x|^alpha` restricted to the plane `x3 = 1`.
pub fn planar_fixed_points() -> Vec<[f64; 2]> {
    vec![[1.0, 1.0], [-1.0, 1.0], [1.0, -1.0], [-1.0, -1.0]]
}
