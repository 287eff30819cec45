//! Secant slopes and Hölder exponents of a sampled synchronization,
//! measured on pairs of trajectory points that are close in phase space but
//! far apart in time.

use std::fmt::Write as _;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::dynsys::Domain;
use crate::error::{Error, Result};
use crate::gs::SampledGS;

#[derive(Debug, Clone, PartialEq)]
pub struct PairOptions {
    /// Nearest neighbors kept per point.
    pub neighbors: usize,
    /// Pairs closer than this many steps in time are skipped.
    pub min_separation: usize,
    pub bins: usize,
    pub pair_budget: usize,
    pub min_finest: usize,
    /// Measures phase-space distances through periodic axes if set.
    pub domain: Option<Domain>,
}

impl Default for PairOptions {
    fn default() -> Self {
        Self {
            neighbors: 8,
            min_separation: 10,
            bins: 5,
            pair_budget: 50_000,
            min_finest: 50,
            domain: None,
        }
    }
}

/// Trajectory indices `i < j` with their distances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pair {
    pub i: usize,
    pub j: usize,
    pub dm: f64,
    pub df: f64,
    pub slope: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub mean_slope: f64,
    pub median_slope: f64,
    pub max_slope: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeProfile {
    /// Sorted by `dm`.
    pub pairs: Vec<Pair>,
    /// Finest bin first.
    pub bins: Vec<ProfileBin>,
}

impl DerivativeProfile {
    pub fn finest(&self) -> &ProfileBin {
        &self.bins[0]
    }

    pub fn bins_csv(&self) -> String {
        let mut s = String::from("dm_lo,dm_hi,count,mean_slope,median_slope,max_slope\n");
        for b in &self.bins {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                b.lo, b.hi, b.count, b.mean_slope, b.median_slope, b.max_slope
            );
        }
        s
    }

    pub fn pairs_csv(&self) -> String {
        let mut s = String::from("i,j,dm,df,slope\n");
        for p in &self.pairs {
            let _ = writeln!(s, "{},{},{},{},{}", p.i, p.j, p.dm, p.df, p.slope);
        }
        s
    }
}

fn distance(domain: Option<&Domain>, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    match domain {
        Some(d) => d.displacement(a, b).norm(),
        None => (a - b).norm(),
    }
}

/// For each point its `k` nearest neighbors at least `min_sep` steps away,
/// as deduplicated local index pairs `(i, j, distance)` with `i < j`.
pub fn near_pairs(
    points: &[DVector<f64>],
    k: usize,
    min_sep: usize,
    domain: Option<&Domain>,
) -> Vec<(usize, usize, f64)> {
    let mut pairs: Vec<(usize, usize, f64)> = (0..points.len())
        .into_par_iter()
        .flat_map_iter(|i| {
            let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
            for (j, q) in points.iter().enumerate() {
                if i.abs_diff(j) < min_sep {
                    continue;
                }
                let d = distance(domain, &points[i], q);
                if best.len() < k || d < best[best.len() - 1].0 {
                    let pos = best.partition_point(|(e, _)| *e <= d);
                    best.insert(pos, (d, j));
                    best.truncate(k);
                }
            }
            best.into_iter().map(move |(d, j)| (i.min(j), i.max(j), d))
        })
        .collect();
    pairs.sort_by_key(|p| (p.0, p.1));
    pairs.dedup_by(|a, b| a.0 == b.0 && a.1 == b.1);
    pairs
}

fn thin<T: Copy>(items: Vec<T>, budget: usize) -> Vec<T> {
    if items.len() <= budget || budget == 0 {
        return items;
    }
    let stride = items.len().div_ceil(budget);
    items.into_iter().step_by(stride).collect()
}

fn to_pair(gs: &SampledGS, (i, j, dm): (usize, usize, f64)) -> Pair {
    let df = (&gs.values[j] - &gs.values[i]).norm();
    Pair {
        i: gs.offset + i,
        j: gs.offset + j,
        dm,
        df,
        slope: if dm > 0.0 { df / dm } else { f64::INFINITY },
    }
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Secant slopes `|f(m') - f(m)| / |m' - m|` over nearest-neighbor pairs,
/// grouped into equal-count bins of `|m' - m|`.
pub fn derivative_profile(gs: &SampledGS, opts: &PairOptions) -> Result<DerivativeProfile> {
    if opts.bins == 0 || opts.neighbors == 0 {
        return Err(Error::InvalidParameter("need at least one bin and one neighbor".into()));
    }
    let points: Vec<DVector<f64>> = (0..gs.len()).map(|k| gs.base_point(k).clone()).collect();
    let raw = near_pairs(&points, opts.neighbors, opts.min_separation, opts.domain.as_ref());
    let mut pairs: Vec<Pair> = thin(raw, opts.pair_budget)
        .into_iter()
        .filter(|p| p.2 > 0.0)
        .map(|p| to_pair(gs, p))
        .collect();
    pairs.sort_by(|a, b| a.dm.total_cmp(&b.dm));
    let per_bin = pairs.len() / opts.bins;
    if per_bin < opts.min_finest {
        return Err(Error::InsufficientPairs {
            found: per_bin,
            needed: opts.min_finest,
        });
    }
    let bins = (0..opts.bins)
        .map(|b| {
            let end = if b + 1 == opts.bins { pairs.len() } else { (b + 1) * per_bin };
            let chunk = &pairs[b * per_bin..end];
            let mut slopes: Vec<f64> = chunk.iter().map(|p| p.slope).collect();
            slopes.sort_by(f64::total_cmp);
            ProfileBin {
                lo: chunk[0].dm,
                hi: chunk[chunk.len() - 1].dm,
                count: chunk.len(),
                mean_slope: slopes.iter().sum::<f64>() / slopes.len() as f64,
                median_slope: median(&slopes),
                max_slope: slopes[slopes.len() - 1],
            }
        })
        .collect();
    Ok(DerivativeProfile { pairs, bins })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HolderOptions {
    pub min_separation: usize,
    /// `|m' - m|` range of the fit; defaults to the decade centered
    /// geometrically on the median nearest-neighbor distance.
    pub window: Option<(f64, f64)>,
    pub pair_budget: usize,
    pub min_pairs: usize,
    pub domain: Option<Domain>,
}

impl Default for HolderOptions {
    fn default() -> Self {
        Self {
            min_separation: 10,
            window: None,
            pair_budget: 200_000,
            min_pairs: 50,
            domain: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HolderFit {
    /// Slope of `log |f(m') - f(m)|` against `log |m' - m|`; infinite when
    /// every `Δf` vanishes.
    pub gamma: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_pairs: usize,
    pub window: (f64, f64),
    pub degenerate: bool,
}

/// Least-squares Hölder exponent over all pairs with `|m' - m|` in the
/// window and at least `min_separation` steps apart.
pub fn holder_exponent(gs: &SampledGS, opts: &HolderOptions) -> Result<HolderFit> {
    let points: Vec<DVector<f64>> = (0..gs.len()).map(|k| gs.base_point(k).clone()).collect();
    let domain = opts.domain.as_ref();
    let window = match opts.window {
        Some(w) => w,
        None => {
            let mut nn: Vec<f64> = near_pairs(&points, 1, opts.min_separation, domain)
                .into_iter()
                .map(|p| p.2)
                .collect();
            if nn.is_empty() {
                return Err(Error::InsufficientPairs { found: 0, needed: opts.min_pairs });
            }
            nn.sort_by(f64::total_cmp);
            // Orbits of rotations have only a few distinct pair distances
            // below the typical neighbor spacing, so the window straddles it.
            let m = median(&nn);
            (m / 10f64.sqrt(), m * 10f64.sqrt())
        }
    };
    let (lo, hi) = window;
    if !(lo > 0.0 && lo < hi) {
        return Err(Error::InvalidParameter(format!("invalid Hölder window ({lo}, {hi})")));
    }
    let sep = opts.min_separation;
    let raw: Vec<(usize, usize, f64)> = (0..points.len())
        .into_par_iter()
        .flat_map_iter(|i| {
            let points = &points;
            (i + sep.max(1)..points.len()).filter_map(move |j| {
                let d = distance(domain, &points[i], &points[j]);
                (lo <= d && d <= hi).then_some((i, j, d))
            })
        })
        .collect();
    let pairs: Vec<Pair> = thin(raw, opts.pair_budget).into_iter().map(|p| to_pair(gs, p)).collect();
    if pairs.len() < opts.min_pairs {
        return Err(Error::InsufficientPairs {
            found: pairs.len(),
            needed: opts.min_pairs,
        });
    }
    let usable: Vec<(f64, f64)> = pairs
        .iter()
        .filter(|p| p.df > 0.0)
        .map(|p| (p.dm.ln(), p.df.ln()))
        .collect();
    if usable.is_empty() {
        return Ok(HolderFit {
            gamma: f64::INFINITY,
            intercept: f64::NAN,
            r_squared: f64::NAN,
            n_pairs: pairs.len(),
            window,
            degenerate: true,
        });
    }
    let n = usable.len() as f64;
    let mx = usable.iter().map(|p| p.0).sum::<f64>() / n;
    let my = usable.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = usable.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = usable.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = usable.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("all pair distances are equal; widen the window".into()));
    }
    let gamma = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(HolderFit {
        gamma,
        intercept: my - gamma * mx,
        r_squared,
        n_pairs: usable.len(),
        window,
        degenerate: false,
    })
}
