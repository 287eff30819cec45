//! Acceptance criteria. Each test prints one `criterion N: PASS|FAIL` line
//! and fails if the criterion does not hold.

use std::f64::consts::TAU;
use std::io::Write as _;
use std::sync::Arc;
use std::time::{Duration, Instant};

use gsync::contraction::{certify, check_invariance, CertifyOptions, InvariantRegion};
use gsync::diagnostics::{
    derivative_profile, esp_convergence, holder_exponent, input_forgetting, max_step_ratio,
    ForgettingOptions, HolderOptions, PairOptions,
};
use gsync::dynsys::{trajectory, CatMap, InputRange, ObservationMap, TorusRotation, Trajectory};
use gsync::gs::{compare_gs, drive_gs, drive_on_trajectory, multistability_sweep, psi_iterate_gs, PsiOptions, SweepOptions};
use gsync::presets;
use gsync::statemaps::{lipschitz_bounds, Esn, LipschitzOptions, Squashing, StateMap};
use gsync::Error;
use nalgebra::{DMatrix, DVector};

fn verdict(n: u32, name: &str, ok: bool, elapsed: Duration, limit: Duration, detail: String) {
    let in_time = elapsed <= limit;
    let pass = ok && in_time;
    // Written to the raw handle so the line shows up even when output is captured.
    let _ = writeln!(
        std::io::stderr(),
        "criterion {n}: {} {name} [{:.2?} / limit {:.0?}] {detail}",
        if pass { "PASS" } else { "FAIL" },
        elapsed,
        limit
    );
    assert!(ok, "criterion {n} ({name}) failed: {detail}");
    assert!(in_time, "criterion {n} ({name}) exceeded {limit:?}: took {elapsed:?}");
}

fn lorenz_trajectory() -> Trajectory {
    trajectory(&presets::system(), &presets::initial_point(), presets::WASHOUT + presets::RECORD).unwrap()
}

fn u_range(traj: &Trajectory) -> InputRange {
    presets::observation().observed_range(&traj.points).unwrap()
}

fn v(x: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(x)
}

/// Dense-sampled range of `g` on `[lo, hi]`.
fn sampled_range(g: impl Fn(f64) -> f64, lo: f64, hi: f64) -> (f64, f64) {
    let n = 400_000;
    (0..=n)
        .map(|i| g(lo + (hi - lo) * i as f64 / n as f64))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), y| (a.min(y), b.max(y)))
}

#[test]
fn criterion_01_box_invariance() {
    let traj = lorenz_trajectory();
    let inputs = u_range(&traj);
    let f = presets::state_map();
    let start = Instant::now();
    let checks: Vec<_> = presets::regions()
        .iter()
        .map(|r| check_invariance(&f, r, &inputs, 10).unwrap())
        .collect();
    let elapsed = start.elapsed();

    let (zl, zh) = (presets::K * inputs.lo[0], presets::K * inputs.hi[0]);
    let forcing = [
        sampled_range(f64::sin, zl, zh),
        sampled_range(f64::cos, zl, zh),
        sampled_range(|u| u.sin().powi(2), zl, zh),
    ];
    let pow = |x: f64| x.signum() * x.abs().powf(presets::ALPHA);
    let lam = presets::LAMBDA;
    let worst_case = (pow(0.9) - lam - 0.9).min(1.1 - pow(1.1) - lam);
    let mut ok = true;
    let mut min_margin = f64::INFINITY;
    for (c, check) in presets::box_centers().iter().zip(&checks) {
        let mut oracle = f64::INFINITY;
        for i in 0..3 {
            let (lo, hi) = (c[i] - 0.1, c[i] + 0.1);
            let (fl, fh) = forcing[i];
            oracle = oracle.min((pow(lo) + lam * fl - lo).min(hi - pow(hi) - lam * fh));
        }
        ok &= check.ok && check.exact && (check.margin - oracle).abs() < 1e-9;
        ok &= check.margin >= worst_case - 1e-12 && check.margin >= 4e-4;
        min_margin = min_margin.min(check.margin);
    }
    verdict(
        1,
        "box invariance",
        ok,
        elapsed,
        Duration::from_secs(1),
        format!("min margin {min_margin:.6e}, worst-case oracle {worst_case:.6e}"),
    );
}

#[test]
fn criterion_02_contraction_constant() {
    let traj = lorenz_trajectory();
    let inputs = u_range(&traj);
    let f = presets::state_map();
    let expected = 0.9 * 0.9f64.powf(-0.1);
    let coarse = LipschitzOptions {
        resolution: 2,
        input_samples: 200,
    };
    let fine = LipschitzOptions {
        resolution: 50,
        input_samples: 200,
    };
    let start = Instant::now();
    let regions = presets::regions();
    let analytic: Vec<_> = regions
        .iter()
        .map(|r| lipschitz_bounds(&f, r, &inputs, coarse).unwrap().l_fx)
        .collect();
    let grid = lipschitz_bounds(&f, &regions[0], &inputs, fine).unwrap().grid.l_fx;
    let elapsed = start.elapsed();
    let worst_analytic = analytic.iter().map(|l| (l - expected).abs()).fold(0.0, f64::max);
    let worst_grid = (grid - expected).abs();
    verdict(
        2,
        "contraction constant",
        worst_analytic <= 1e-6 && worst_grid <= 1e-3,
        elapsed,
        Duration::from_secs(1),
        format!("L_Fx {expected:.9}, analytic err over 8 boxes {worst_analytic:.2e}, 50/axis grid err on V1 {worst_grid:.2e}"),
    );
}

#[test]
fn criterion_03_washout() {
    let start = Instant::now();
    let sys = presets::system();
    let obs = presets::observation();
    let f = presets::state_map();
    let v1 = &presets::regions()[0];
    let (xa, xb) = (v(&[1.0, 1.0, 1.0]), v(&[1.1, 0.9, 1.05]));
    let m0 = presets::initial_point();
    let a = drive_gs(&f, &sys, &obs, &m0, &xa, presets::WASHOUT, presets::RECORD, Some(v1)).unwrap();
    let b = drive_gs(&f, &sys, &obs, &m0, &xb, presets::WASHOUT, presets::RECORD, Some(v1)).unwrap();
    let b_on_a = drive_on_trajectory(&f, &obs, a.trajectory.clone(), &xb, presets::WASHOUT, Some(v1)).unwrap();
    let elapsed = start.elapsed();

    let sup = compare_gs(&a, &b_on_a).unwrap();
    let same_trajectory = a.trajectory == b.trajectory;
    let inputs: Vec<_> = a.trajectory.observations(&obs).unwrap()[1..].to_vec();
    let dist = esp_convergence(&f, &inputs, &xa, &xb).unwrap();
    // Below ~1e-12 the distance is a few thousand ulps and rounding dominates
    // the ratio.
    let ratio = max_step_ratio(&dist, 1e-12).unwrap();
    verdict(
        3,
        "ESP after washout",
        same_trajectory && sup <= 1e-12 && ratio <= 0.9096,
        elapsed,
        Duration::from_secs(5),
        format!("sup distance {sup:.2e}, max step ratio {ratio:.6}"),
    );
}

#[test]
fn criterion_04_two_methods() {
    let start = Instant::now();
    let sys = presets::system();
    let obs = presets::observation();
    let f = presets::state_map();
    let v1 = &presets::regions()[0];
    let x0 = v(&[1.0, 1.0, 1.0]);
    let traj = Arc::new(lorenz_trajectory());
    let inputs = u_range(&traj);
    let c = lipschitz_bounds(&f, v1, &inputs, LipschitzOptions::default()).unwrap().l_fx;
    let drive = drive_on_trajectory(&f, &obs, traj.clone(), &x0, presets::WASHOUT, Some(v1)).unwrap();
    let opts = PsiOptions {
        tol: 1e-12,
        max_iterations: 5000,
        contraction: Some(c),
    };
    let psi = psi_iterate_gs(&f, &sys, &obs, traj, &x0, presets::WASHOUT + 1, opts, Some(v1)).unwrap();
    let elapsed = start.elapsed();

    let sup = compare_gs(&drive, &psi).unwrap();
    let report = psi.psi.as_ref().unwrap();
    let predicted = report.predicted_iterations.unwrap() as f64;
    let actual = report.iterations as f64;
    let ratio = predicted / actual;
    verdict(
        4,
        "drive vs Psi",
        sup <= 1e-10 && (0.5..=2.0).contains(&ratio),
        elapsed,
        Duration::from_secs(30),
        format!("sup distance {sup:.2e}, sweeps {actual}, Banach prediction {predicted}"),
    );
}

#[test]
fn criterion_05_multistability() {
    let start = Instant::now();
    let result = multistability_sweep(
        &presets::state_map(),
        &presets::regions(),
        &presets::system(),
        &presets::observation(),
        &presets::initial_point(),
        SweepOptions {
            washout: presets::WASHOUT,
            record: presets::RECORD,
            ..Default::default()
        },
    )
    .unwrap();
    let elapsed = start.elapsed();

    let escapes = result
        .entries
        .iter()
        .filter(|e| matches!(e.gs, Err(Error::RegionEscape { .. })))
        .count();
    let successes = result.successes().count();
    let min_sep = result.separations.iter().map(|s| s.min_distance).fold(f64::INFINITY, f64::min);
    let regions = presets::regions();
    let confined = result
        .successes()
        .zip(&regions)
        .all(|((label, gs), r)| label == r.label && gs.values.iter().all(|x| r.contains(x)));
    verdict(
        5,
        "multistability",
        successes == 8 && escapes == 0 && result.distinct == 8 && min_sep >= 1.6 && confined,
        elapsed,
        Duration::from_secs(60),
        format!("{successes} GSs, {} distinct, min separation {min_sep:.4}, {escapes} escapes", result.distinct),
    );
}

#[test]
fn criterion_06_takens_oracle() {
    let start = Instant::now();
    let angles = [2f64.sqrt() - 1.0, (5f64.sqrt() - 1.0) / 2.0];
    let sys = TorusRotation::new(angles.to_vec()).unwrap();
    let obs = ObservationMap::sine_sum(2);
    let f = StateMap::linear_delay(3);
    let traj = Arc::new(trajectory(&sys, &v(&[0.1, 0.7]), 300).unwrap());
    let f0 = DVector::zeros(7);
    let record_from = 6;
    let opts = |max_iterations| PsiOptions {
        tol: 1e-14,
        max_iterations,
        contraction: None,
    };
    let converged = psi_iterate_gs(&f, &sys, &obs, traj.clone(), &f0, record_from, opts(100), None).unwrap();
    let partial = |n| match psi_iterate_gs(&f, &sys, &obs, traj.clone(), &f0, record_from, opts(n), None) {
        Err(Error::NoConvergence { partial, .. }) => *partial,
        other => panic!("expected the iteration to be cut off, got {other:?}"),
    };
    let after7 = partial(7);
    let after6 = partial(6);
    let elapsed = start.elapsed();

    // omega(phi^{-i}(m)) with phi^{-i}(m) = m - i * angles (mod 1)
    let delay_vector = |m: &DVector<f64>| {
        DVector::from_iterator(
            7,
            (0..7).map(|i| (0..2).map(|j| (TAU * (m[j] - i as f64 * angles[j])).sin()).sum::<f64>()),
        )
    };
    let err = |gs: &gsync::gs::SampledGS| {
        (0..gs.len())
            .map(|k| (&gs.values[k] - delay_vector(gs.base_point(k))).amax())
            .fold(0.0, f64::max)
    };
    let (e_conv, e7, e6) = (err(&converged), err(&after7), err(&after6));
    let changes = &converged.psi.as_ref().unwrap().changes;
    let last_nonzero = changes.iter().rposition(|c| *c > 1e-14).map(|i| i + 1);
    verdict(
        6,
        "Takens oracle",
        e_conv <= 1e-12 && e7 <= 1e-12 && e6 > 1e-3 && last_nonzero == Some(7),
        elapsed,
        Duration::from_secs(1),
        format!("error {e_conv:.2e}, after 7 sweeps {e7:.2e}, after 6 sweeps {e6:.2e}, last changing sweep {last_nonzero:?}"),
    );
}

fn cat_esn(sigma: f64) -> StateMap {
    let (s, c) = (0.7f64.sin(), 0.7f64.cos());
    let a = DMatrix::from_row_slice(2, 2, &[sigma * c, -sigma * s, sigma * s, sigma * c]);
    let cm = DMatrix::from_row_slice(2, 1, &[0.5, -0.25]);
    StateMap::Esn(Esn::new(a, cm, v(&[0.1, 0.0]), Squashing::Tanh).unwrap())
}

#[test]
fn criterion_07_cat_map_certificate() {
    let start = Instant::now();
    let sys = CatMap;
    let obs = ObservationMap::sine_sum(2);
    let samples = trajectory(&sys, &v(&[0.1234, 0.5678]), 500).unwrap().points;
    let region = InvariantRegion::cube("B", &[0.0, 0.0], 1.0).unwrap();
    // The chain-rule bound decides the verdict; a coarse grid is only a cross-check.
    let opts = CertifyOptions {
        lipschitz: LipschitzOptions {
            resolution: 10,
            input_samples: 50,
        },
        invariance_resolution: 10,
        ..Default::default()
    };
    let c03 = certify(&cat_esn(0.3), &region, &sys, &obs, &samples, opts).unwrap();
    let c05 = certify(&cat_esn(0.5), &region, &sys, &obs, &samples, opts).unwrap();
    let elapsed = start.elapsed();
    let tau = (3.0 + 5f64.sqrt()) / 2.0;
    let tau_err = (c03.tangent_inv_norm - tau).abs().max((c05.tangent_inv_norm - tau).abs());
    let ok = c03.invariance.ok
        && c03.esp_ok
        && c03.diff_ok
        && c05.invariance.ok
        && c05.esp_ok
        && !c05.diff_ok
        && tau_err <= 1e-9;
    verdict(
        7,
        "cat map certificate",
        ok,
        elapsed,
        Duration::from_secs(1),
        format!(
            "0.3: esp {} diff {}; 0.5: esp {} diff {}; |T phi^-1| error {tau_err:.1e}",
            c03.esp_ok, c03.diff_ok, c05.esp_ok, c05.diff_ok
        ),
    );
}

#[test]
fn criterion_08_input_forgetting() {
    let traj = lorenz_trajectory();
    let inputs = u_range(&traj);
    let v1 = &presets::regions()[0];
    let start = Instant::now();
    let report = input_forgetting(
        &presets::state_map(),
        v1,
        &inputs,
        ForgettingOptions {
            common_suffix: 200,
            trials: 100,
            prefix: 50,
            seed: 2024,
        },
    )
    .unwrap();
    let elapsed = start.elapsed();
    let oracle = 0.90953f64.powi(200) * 0.2 * 3f64.sqrt() + 1e-12;
    verdict(
        8,
        "input forgetting",
        report.max_distance <= oracle && report.holds(),
        elapsed,
        Duration::from_secs(5),
        format!("max distance {:.3e}, bound {:.3e}", report.max_distance, oracle),
    );
}

#[test]
fn criterion_09_regularity() {
    let start = Instant::now();
    // Smooth oracle: the delay-vector synchronization of a circle rotation.
    let sys = TorusRotation::new(vec![(5f64.sqrt() - 1.0) / 2.0]).unwrap();
    let obs = ObservationMap::sine_sum(1);
    let f = StateMap::linear_delay(3);
    let gs = drive_gs(&f, &sys, &obs, &v(&[0.1]), &DVector::zeros(7), 10, 3000, None).unwrap();
    let holder = holder_exponent(
        &gs,
        &HolderOptions {
            domain: Some(gsync::dynsys::DiscreteSystem::domain(&sys)),
            ..Default::default()
        },
    )
    .unwrap();

    // Lorenz-driven power-sine synchronization in V1.
    let lorenz = drive_gs(
        &presets::state_map(),
        &presets::system(),
        &presets::observation(),
        &presets::initial_point(),
        &v(&[1.0, 1.0, 1.0]),
        presets::WASHOUT,
        presets::RECORD,
        Some(&presets::regions()[0]),
    )
    .unwrap();
    let profile = derivative_profile(&lorenz, &PairOptions::default()).unwrap();
    let elapsed = start.elapsed();

    let medians: Vec<f64> = profile.bins.iter().map(|b| b.median_slope).collect();
    let coarsest = *medians.last().unwrap();
    let growth = medians[0] / coarsest;
    let finite = profile.bins.iter().all(|b| b.max_slope.is_finite());
    let ok = holder.gamma >= 0.9 && holder.r_squared >= 0.8 && finite && growth <= 2.0;
    verdict(
        9,
        "regularity",
        ok,
        elapsed,
        Duration::from_secs(60),
        format!(
            "torus gamma {:.4} (R^2 {:.3}, {} pairs); Lorenz median slopes by bin {:?} (finest/coarsest {growth:.3}, tolerance 2)",
            holder.gamma,
            holder.r_squared,
            holder.n_pairs,
            medians.iter().map(|m| format!("{m:.4}")).collect::<Vec<_>>()
        ),
    );
}

fn csv_rows(path: &std::path::Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

#[test]
fn criterion_10_reproduction() {
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let status = std::process::Command::new(env!("CARGO_BIN_EXE_gsync"))
        .args(["reproduce", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    let elapsed = start.elapsed();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));

    let all_exist = ["fig1", "fig2", "fig3", "fig4"]
        .iter()
        .all(|f| dir.path().join(format!("{f}.csv")).is_file());
    let (h2, fig2) = csv_rows(&dir.path().join("fig2.csv"));
    let times: Vec<f64> = fig2.iter().map(|r| r[0]).collect();
    let evenly_spaced = times.windows(2).all(|w| ((w[1] - w[0]) - 0.01).abs() < 1e-9);
    let fig2_ok = h2 == ["t", "obs"]
        && fig2.len() == 2000
        && times[0] > 20.0
        && (times[0] - 20.01).abs() < 1e-9
        && (times[1999] - 40.0).abs() < 1e-9
        && evenly_spaced;

    let (h4, fig4) = csv_rows(&dir.path().join("fig4.csv"));
    let regions = presets::regions();
    let in_box = |r: &InvariantRegion, x: &[f64]| r.contains(&v(x));
    let fig4_ok = h4.len() == 7
        && h4[1].starts_with("V1_")
        && h4[4].starts_with("V2_")
        && fig4.len() == 2000
        && fig4.iter().all(|r| in_box(&regions[0], &r[1..4]) && in_box(&regions[1], &r[4..7]));
    verdict(
        10,
        "figure reproduction",
        all_exist && fig2_ok && fig4_ok,
        elapsed,
        Duration::from_secs(60),
        format!(
            "fig2 rows {} over ({}, {}], fig4 rows {} with V1/V2 branches confined: {fig4_ok}",
            fig2.len(),
            times[0] - 0.01,
            times[times.len() - 1],
            fig4.len()
        ),
    );
}
