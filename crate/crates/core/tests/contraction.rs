use gsync::contraction::{absorbing_set, certify, check_invariance, CertifyOptions, InvariantRegion, Requirement, GRID_BUDGET};
use gsync::dynsys::{trajectory, CatMap, InputRange, ObservationMap};
use gsync::presets;
use gsync::statemaps::{Esn, LipschitzOptions, PowerSine, Squashing, StateMap};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn v(x: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(x)
}

fn esn(a: [f64; 4], zeta: [f64; 2]) -> StateMap {
    StateMap::Esn(
        Esn::new(
            DMatrix::from_row_slice(2, 2, &a),
            DMatrix::from_column_slice(2, 1, &[0.5, -0.25]),
            v(&zeta),
            Squashing::Tanh,
        )
        .unwrap(),
    )
}

#[test]
fn tanh_network_keeps_the_unit_box() {
    let f = esn([0.3, 0.1, -0.2, 0.3], [0.1, 0.0]);
    let region = InvariantRegion::cube("c", &[0.0, 0.0], 1.0).unwrap();
    let chk = check_invariance(&f, &region, &InputRange::scalar(-2.0, 2.0).unwrap(), 10).unwrap();
    assert!(chk.ok && chk.exact);
    // worst preactivation: 0.3 + 0.1 + 0.5*2 + 0.1 = 1.5 in the first row
    let expected = 1.0 - 1.5f64.tanh();
    assert!((chk.margin - expected).abs() < 1e-12, "{} vs {expected}", chk.margin);
}

#[test]
fn shifted_box_is_not_invariant() {
    let f = StateMap::PowerSine(PowerSine::new(0.9, 0.009, 0.1).unwrap());
    let region = InvariantRegion::cube("off", &[2.0, 2.0, 2.0], 0.1).unwrap();
    let chk = check_invariance(&f, &region, &InputRange::scalar(-20.0, 20.0).unwrap(), 5).unwrap();
    assert!(!chk.ok && chk.margin < 0.0 && chk.sampled_margin < 0.0);
}

#[test]
fn lorenz_box_certificate() {
    let sys = presets::system();
    let obs = presets::observation();
    let traj = trajectory(&sys, &presets::initial_point(), presets::WASHOUT + presets::RECORD).unwrap();
    let samples = &traj.points[presets::WASHOUT..];
    let opts = CertifyOptions {
        lipschitz: LipschitzOptions { resolution: 4, input_samples: 50 },
        invariance_resolution: 4,
        ..Default::default()
    };
    let cert = certify(&presets::state_map(), &presets::regions()[0], &sys, &obs, samples, opts).unwrap();
    assert!(cert.holds(Requirement::Esp));
    assert!((cert.bounds.l_fx - 0.9 * 0.9f64.powf(-0.1)).abs() < 1e-14);
    // one step of the flow expands some direction by more than 1/L_Fx
    assert!(cert.tangent_inv_norm * cert.bounds.l_fx > 1.0);
    assert!(!cert.diff_ok && !cert.holds(Requirement::Diff));
    assert!(cert.c0.is_none());
    assert_eq!(cert.d_omega_norm, 1.0);
}

#[test]
fn cat_map_certificate_constants() {
    let sys = CatMap;
    let obs = ObservationMap::sine_sum(2);
    let traj = trajectory(&sys, &v(&[0.1234, 0.5678]), 500).unwrap();
    let f = StateMap::Esn(
        Esn::new(
            DMatrix::from_diagonal_element(2, 2, 0.3),
            DMatrix::from_column_slice(2, 1, &[0.5, -0.25]),
            v(&[0.1, 0.0]),
            Squashing::Tanh,
        )
        .unwrap(),
    );
    let region = InvariantRegion::cube("c", &[0.0, 0.0], 1.0).unwrap();
    let opts = CertifyOptions {
        lipschitz: LipschitzOptions { resolution: 6, input_samples: 20 },
        invariance_resolution: 6,
        ..Default::default()
    };
    let cert = certify(&f, &region, &sys, &obs, &traj.points, opts).unwrap();
    assert!(cert.holds(Requirement::Diff));
    // the inverse cat map [[2,-1],[-1,1]] has norm phi^2
    let golden = (1.0 + 5f64.sqrt()) / 2.0;
    assert!((cert.tangent_inv_norm - golden * golden).abs() < 1e-12);
    let r_lb = cert.r_lower_bound.unwrap();
    assert!((cert.r.unwrap() - 1.05 * r_lb).abs() <= 1e-12 * r_lb);
    let expected_r_lb = cert.bounds.l_fz * cert.d_omega_norm / (1.0 - cert.bounds.l_fx * cert.tangent_inv_norm);
    assert!((r_lb - expected_r_lb).abs() <= 1e-12 * r_lb);
    let d_ub = cert.delta0_upper_bound.unwrap();
    assert!((cert.delta0.unwrap() - 0.5 * d_ub).abs() <= 1e-12 * d_ub);
    assert!(cert.c0.unwrap() < 1.0);
}

#[test]
fn grids_stay_within_budget() {
    let region = InvariantRegion::cube("c", &[0.0; 9], 1.0).unwrap();
    assert!(region.grid(20).len() <= GRID_BUDGET + 1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn absorbing_set_is_forward_invariant(
        a in proptest::array::uniform4(-0.35f64..0.35),
        zeta in proptest::array::uniform2(-0.3f64..0.3),
        center in proptest::array::uniform2(-0.5f64..0.5),
        seed in any::<u64>(),
    ) {
        let f = esn(a, zeta);
        let enclosing = InvariantRegion::cube("D", &[0.0, 0.0], 3.0).unwrap();
        let inputs = InputRange::scalar(-1.0, 1.0).unwrap();
        let w = absorbing_set(&f, &enclosing, &inputs, &v(&center), 1.1, LipschitzOptions { resolution: 4, input_samples: 200 }).unwrap();
        prop_assert!(w.contraction < 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..50 {
            let x = w.region.sample(&mut rng);
            let z = v(&[rng.gen_range(-1.0..=1.0)]);
            let y = f.eval(&x, &z).unwrap();
            prop_assert!(w.region.contains_within(&y, 1e-12), "{y} escapes radius {}", w.radius);
        }
    }

    #[test]
    fn interval_verdict_is_sound(
        c in proptest::array::uniform3(0.5f64..1.5),
        half in 0.01f64..0.3,
    ) {
        let f = StateMap::PowerSine(PowerSine::new(0.9, 0.009, 0.1).unwrap());
        let region = InvariantRegion::cube("b", &c, half).unwrap();
        let chk = check_invariance(&f, &region, &InputRange::scalar(-20.0, 20.0).unwrap(), 4).unwrap();
        prop_assert!(chk.exact);
        // the interval image encloses every sampled image
        prop_assert!(chk.sampled_margin >= 0.0 || !chk.ok);
        if chk.ok {
            prop_assert!(chk.margin <= chk.sampled_margin + 1e-15);
        }
    }
}
