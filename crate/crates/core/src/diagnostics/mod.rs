//! Empirical checks of the echo state property, input forgetting and the
//! regularity of sampled synchronizations.

mod regularity;

pub use regularity::{
    derivative_profile, holder_exponent, near_pairs, HolderFit, HolderOptions, Pair, PairOptions,
    ProfileBin, DerivativeProfile,
};

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::contraction::{check_invariance, InvariantRegion};
use crate::dynsys::InputRange;
use crate::error::{Error, Result};
use crate::linalg::check_dim;
use crate::statemaps::{lipschitz_bounds, LipschitzOptions, StateMap};

/// Distances `|x^a_t - x^b_t|` for `t = 0..=inputs.len()` when both states
/// are driven by the same inputs.
pub fn esp_convergence(
    f: &StateMap,
    inputs: &[DVector<f64>],
    x0a: &DVector<f64>,
    x0b: &DVector<f64>,
) -> Result<Vec<f64>> {
    check_dim("initial state", f.state_dim(), x0a.len())?;
    check_dim("initial state", f.state_dim(), x0b.len())?;
    let (mut a, mut b) = (x0a.clone(), x0b.clone());
    let mut out = Vec::with_capacity(inputs.len() + 1);
    out.push((&a - &b).norm());
    for z in inputs {
        a = f.eval(&a, z)?;
        b = f.eval(&b, z)?;
        out.push((&a - &b).norm());
    }
    Ok(out)
}

/// Largest `d_{t+1} / d_t` over steps with `d_t > floor`.
pub fn max_step_ratio(distances: &[f64], floor: f64) -> Option<f64> {
    distances
        .windows(2)
        .filter(|w| w[0] > floor)
        .map(|w| w[1] / w[0])
        .reduce(f64::max)
}

/// Strictly decreasing weights with `w_0 = 1` and limit zero.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightingSequence {
    Geometric(f64),
    /// Leading weights; every later weight is taken as zero.
    Custom(Vec<f64>),
}

impl WeightingSequence {
    pub fn geometric(rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::InvalidParameter(format!("geometric ratio {rho} not in (0, 1)")));
        }
        Ok(Self::Geometric(rho))
    }

    pub fn custom(weights: Vec<f64>) -> Result<Self> {
        if weights.first() != Some(&1.0) {
            return Err(Error::InvalidParameter("custom weights must start with 1".into()));
        }
        if weights.windows(2).any(|w| !(w[1] < w[0])) || weights.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::InvalidParameter(
                "custom weights must be positive and strictly decreasing".into(),
            ));
        }
        Ok(Self::Custom(weights))
    }

    pub fn weight(&self, lag: usize) -> f64 {
        match self {
            Self::Geometric(rho) => rho.powi(lag as i32),
            Self::Custom(w) => w.get(lag).copied().unwrap_or(0.0),
        }
    }
}

/// `sup_k |a_k - b_k| w_k` with index 0 the most recent entry.
pub fn weighted_distance(a: &[DVector<f64>], b: &[DVector<f64>], w: &WeightingSequence) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    let mut sup = 0.0f64;
    for (k, (x, y)) in a.iter().zip(b).enumerate() {
        check_dim("window entry", x.len(), y.len())?;
        sup = sup.max((x - y).norm() * w.weight(k));
    }
    Ok(sup)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForgettingOptions {
    /// Length of the shared input suffix.
    pub common_suffix: usize,
    pub trials: usize,
    /// Length of the independent random prefixes.
    pub prefix: usize,
    pub seed: u64,
}

impl Default for ForgettingOptions {
    fn default() -> Self {
        Self {
            common_suffix: 200,
            trials: 100,
            prefix: 50,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForgettingReport {
    pub max_distance: f64,
    /// `L_Fx^k diam(V) + 1e-12`.
    pub bound: f64,
    pub l_fx: f64,
    pub diameter: f64,
    pub distances: Vec<f64>,
}

impl ForgettingReport {
    pub fn holds(&self) -> bool {
        self.max_distance <= self.bound
    }
}

fn random_input<R: Rng>(rng: &mut R, range: &InputRange) -> DVector<f64> {
    DVector::from_iterator(
        range.dim(),
        range.lo.iter().zip(&range.hi).map(|(l, h)| if l < h { rng.gen_range(*l..*h) } else { *l }),
    )
}

/// Drive two copies of `F` from random states in `region` with independent
/// random input prefixes and then a common random suffix of length `k`, and
/// record the final distance. Trial `i` uses stream `i` of a ChaCha
/// generator seeded with `opts.seed`, so results do not depend on the
/// thread schedule.
pub fn input_forgetting(
    f: &StateMap,
    region: &InvariantRegion,
    inputs: &InputRange,
    opts: ForgettingOptions,
) -> Result<ForgettingReport> {
    check_dim("region dimension", f.state_dim(), region.dim())?;
    if opts.trials == 0 {
        return Err(Error::InvalidParameter("input forgetting needs at least one trial".into()));
    }
    let inv = check_invariance(f, region, inputs, 20)?;
    if !inv.ok {
        return Err(Error::NotInvariant {
            region: region.label.clone(),
            margin: inv.margin,
        });
    }
    let l_fx = lipschitz_bounds(f, region, inputs, LipschitzOptions::default())?.l_fx;
    let diameter = region.diameter();
    let distances = (0..opts.trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(trial as u64);
            let mut a = region.sample(&mut rng);
            let mut b = region.sample(&mut rng);
            for _ in 0..opts.prefix {
                a = f.eval(&a, &random_input(&mut rng, inputs))?;
                b = f.eval(&b, &random_input(&mut rng, inputs))?;
            }
            for _ in 0..opts.common_suffix {
                let z = random_input(&mut rng, inputs);
                a = f.eval(&a, &z)?;
                b = f.eval(&b, &z)?;
            }
            Ok((a - b).norm())
        })
        .collect::<Result<Vec<f64>>>()?;
    let max_distance = distances.iter().copied().fold(0.0, f64::max);
    Ok(ForgettingReport {
        max_distance,
        bound: l_fx.powi(opts.common_suffix as i32) * diameter + 1e-12,
        l_fx,
        diameter,
        distances,
    })
}
