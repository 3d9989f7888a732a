use proptest::prelude::*;

use super::*;
use crate::linalg::{dagger, vectorize};
use crate::model::{build_operators, QuditSpec};
use crate::presets::{mhz, single_tls_model, two_tls_model, u1_target};

fn qudit_only(n_levels: usize, anharmonicity: f64, t1: f64) -> ModelSpec {
    ModelSpec {
        qudit: QuditSpec {
            n_levels,
            anharmonicity,
            t1,
            ..QuditSpec::default()
        },
        ..ModelSpec::default()
    }
}

fn basis(n: usize, k: usize, l: usize) -> CMatrix {
    let mut m = CMatrix::zeros(n, n);
    m[(k, l)] = C64::new(1.0, 0.0);
    m
}

fn wiggly(total: f64, n: usize, scale: f64) -> PiecewiseControl {
    let values = (0..n)
        .map(|j| scale * (1.3 * j as f64).sin() - 0.4 * scale)
        .collect();
    PiecewiseControl::new(total, values).unwrap()
}

/// Joint-space channel applied to `|k⟩⟨l| ⊗ |g…g⟩⟨g…g|` and reduced.
fn brute_force_channel(ops: &OperatorSet, g: &Superoperator) -> Channel {
    let n = ops.n_levels;
    let env = ops.env_dim();
    let mut data = CMatrix::zeros(n * n, n * n);
    for k in 0..n {
        for l in 0..n {
            let out = g.apply(&basis(ops.dim(), k * env, l * env));
            let red = partial_trace(&out, n, env).unwrap();
            data.column_mut(k + n * l).copy_from(&vectorize(&red));
        }
    }
    Channel {
        system_dim: n,
        data,
    }
}

#[test]
fn amplitude_damping_matches_closed_form() {
    let t1 = 1000.0;
    let ops = build_operators(&qudit_only(2, 0.0, t1)).unwrap();
    let control = PiecewiseControl::constant(3.0 * t1, 30, 0.0).unwrap();
    let times: Vec<f64> = (0..=30).map(|j| j as f64 * 100.0).collect();
    let chans = channel_trace(&ops, &control, &times).unwrap();
    for (t, ch) in times.iter().zip(&chans) {
        let rho = ch.apply(&basis(2, 1, 1));
        assert!((rho[(1, 1)].re - (-t / t1).exp()).abs() < 1e-10);
        assert!((ch.determinant().norm() - (-2.0 * t / t1).exp()).abs() < 1e-10);
    }
}

#[test]
fn coherence_decays_at_half_rate() {
    let t1 = 50.0;
    let ops = build_operators(&qudit_only(2, 0.0, t1)).unwrap();
    let control = PiecewiseControl::constant(30.0, 3, 0.0).unwrap();
    let ch = reduced_channel(&ops, &control, 30.0).unwrap();
    let out = ch.apply(&basis(2, 0, 1));
    assert!((out[(0, 1)].norm() - (-30.0 / (2.0 * t1)).exp()).abs() < 1e-12);
}

#[test]
fn population_reaches_one_over_e_at_t1() {
    let ops = build_operators(&qudit_only(3, mhz(40.0), 20.0)).unwrap();
    let control = PiecewiseControl::constant(20.0, 4, 0.3).unwrap();
    let g = propagator(&ops, &control).unwrap();
    let rho = g.apply(&basis(3, 1, 1));
    assert!((rho[(1, 1)].re - (-1.0f64).exp()).abs() < 1e-10);
    assert!((rho[(0, 0)].re - (1.0 - (-1.0f64).exp())).abs() < 1e-10);
}

#[test]
fn liouvillian_preserves_trace() {
    let ops = build_operators(&two_tls_model(50.0, 40.0, 40.0)).unwrap();
    let l = liouvillian(&ops.hamiltonian(-1.7), &ops.collapse_ops).unwrap();
    assert!(l.trace_defect(true) < 1e-12);
    let g = propagate_slice(&l, 0.5).unwrap();
    assert!(g.trace_defect(false) < 1e-12);
}

#[test]
fn closed_system_propagator_has_unit_determinant() {
    let mut m = single_tls_model();
    m.qudit.t1 = f64::INFINITY;
    m.tls[0].t1 = f64::INFINITY;
    let ops = build_operators(&m).unwrap();
    let g = propagator(&ops, &wiggly(5.0, 10, 2.0)).unwrap();
    assert!((g.data.clone().determinant().norm() - 1.0).abs() < 1e-9);
}

#[test]
fn liouvillian_rejects_mismatched_operators() {
    let h = identity(3);
    assert!(liouvillian(&h, &[identity(2)]).is_err());
    assert!(liouvillian(&CMatrix::zeros(2, 3), &[]).is_err());
}

#[test]
fn channel_at_time_zero_is_identity() {
    let ops = build_operators(&single_tls_model()).unwrap();
    let control = wiggly(40.0, 160, 1.0);
    let ch = reduced_channel(&ops, &control, 0.0).unwrap();
    assert!(fro_norm(&(ch.data - identity(16))) < 1e-15);
}

#[test]
fn closed_qudit_gives_unitary_channel() {
    let ops = build_operators(&qudit_only(4, mhz(40.0), f64::INFINITY)).unwrap();
    let control = wiggly(10.0, 20, 3.0);
    let ch = reduced_channel(&ops, &control, 10.0).unwrap();
    let mut v = identity(4);
    for (dt, delta) in control.segments_until(10.0).unwrap() {
        v = expm(&(ops.hamiltonian(delta) * C64::new(0.0, -dt))).unwrap() * v;
    }
    assert!(fro_norm(&(ch.data - Channel::unitary(&v).data)) < 1e-10);
}

#[test]
fn decoupled_tls_leaves_qudit_channel_unchanged() {
    let mut coupled = single_tls_model();
    coupled.tls[0].coupling = 0.0;
    let mut alone = single_tls_model();
    alone.tls.clear();
    let control = wiggly(40.0, 40, 2.0);
    let a = reduced_channel(&build_operators(&coupled).unwrap(), &control, 40.0).unwrap();
    let b = reduced_channel(&build_operators(&alone).unwrap(), &control, 40.0).unwrap();
    assert!(fro_norm(&(a.data - b.data)) < 1e-12);
}

#[test]
fn sector_channel_matches_full_liouvillian() {
    let ops = build_operators(&two_tls_model(50.0, 40.0, 40.0)).unwrap();
    let control = wiggly(6.0, 12, 2.5);
    let fast = reduced_channel(&ops, &control, 6.0).unwrap();
    let slow = brute_force_channel(&ops, &propagator(&ops, &control).unwrap());
    assert!(fro_norm(&(fast.data - slow.data)) < 1e-8);
}

#[test]
fn partial_slices_match_dense_propagation() {
    let ops = build_operators(&single_tls_model()).unwrap();
    let control = wiggly(4.0, 8, 2.0);
    for &t in &[0.0, 0.3, 1.75, 2.5, 4.0] {
        let fast = reduced_channel(&ops, &control, t).unwrap();
        let slow = brute_force_channel(&ops, &propagator_until(&ops, &control, t).unwrap());
        assert!(fro_norm(&(fast.data - slow.data)) < 1e-10, "t = {t}");
    }
    let times = [0.0, 0.3, 1.75, 2.5, 4.0];
    let traced = channel_trace(&ops, &control, &times).unwrap();
    for (t, ch) in times.iter().zip(&traced) {
        let direct = reduced_channel(&ops, &control, *t).unwrap();
        assert!(fro_norm(&(&ch.data - direct.data)) < 1e-12);
    }
}

#[test]
fn rotating_frame_agrees_with_lab_frame() {
    // In the lab frame every excitation carries the qudit frequency ω; since
    // the Hamiltonian conserves excitations, the reduced channels differ only
    // by the free qudit rotation exp(−iω n t).
    let omega = mhz(5000.0);
    let ops = build_operators(&single_tls_model()).unwrap();
    let mut lab = ops.clone();
    lab.drift = &ops.drift + &ops.excitation_number * C64::new(omega, 0.0);
    let t = 2.0;
    let control = wiggly(t, 8, 2.0);
    let rot = reduced_channel(&ops, &control, t).unwrap();
    let lab_ch = brute_force_channel(&lab, &propagator(&lab, &control).unwrap());
    let v = CMatrix::from_fn(4, 4, |r, c| {
        if r == c {
            C64::from_polar(1.0, -omega * r as f64 * t)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    let want = Channel::unitary(&v).compose(&rot);
    assert!(fro_norm(&(lab_ch.data - want.data)) < 1e-8);
}

#[test]
fn splitting_a_constant_slice_changes_nothing() {
    let ops = build_operators(&single_tls_model()).unwrap();
    let one = PiecewiseControl::constant(3.0, 1, -2.2).unwrap();
    let many = PiecewiseControl::constant(3.0, 12, -2.2).unwrap();
    let a = reduced_channel(&ops, &one, 3.0).unwrap();
    let b = reduced_channel(&ops, &many, 3.0).unwrap();
    assert!(fro_norm(&(a.data - b.data)) < 1e-11);
}

#[test]
fn refining_a_smooth_pulse_converges() {
    let ops = build_operators(&single_tls_model()).unwrap();
    let pulse = |n: usize| {
        let dt = 10.0 / n as f64;
        let values = (0..n)
            .map(|j| -3.0 + 1.5 * (0.6 * (j as f64 + 0.5) * dt).sin())
            .collect();
        PiecewiseControl::new(10.0, values).unwrap()
    };
    let reference = reduced_channel(&ops, &pulse(3200), 10.0).unwrap();
    let mut last = f64::INFINITY;
    for n in [50, 200, 800] {
        let ch = reduced_channel(&ops, &pulse(n), 10.0).unwrap();
        let err = fro_norm(&(ch.data - &reference.data));
        assert!(err < last, "n = {n}: {err} vs {last}");
        last = err;
    }
    assert!(last < 1e-3);
}

#[test]
fn time_outside_pulse_is_rejected() {
    let ops = build_operators(&single_tls_model()).unwrap();
    let control = PiecewiseControl::constant(4.0, 4, 0.0).unwrap();
    assert!(matches!(
        reduced_channel(&ops, &control, 4.5),
        Err(Error::TimeOutOfRange { .. })
    ));
    assert!(reduced_channel(&ops, &control, -0.1).is_err());
    assert!(channel_trace(&ops, &control, &[2.0, 1.0]).is_err());
}

#[test]
fn control_validation() {
    assert!(PiecewiseControl::new(1.0, vec![]).is_err());
    assert!(PiecewiseControl::new(0.0, vec![1.0]).is_err());
    assert!(matches!(
        PiecewiseControl::new(1.0, vec![f64::NAN]),
        Err(Error::NonFinite(_))
    ));
    let c = PiecewiseControl::constant(2.0, 4, 1.0).unwrap();
    assert_eq!(c.times(), vec![0.0, 0.5, 1.0, 1.5]);
    assert_eq!(c.segments_until(1.25).unwrap(), vec![(0.5, 1.0), (0.5, 1.0), (0.25, 1.0)]);
}

#[test]
fn fidelity_reference_values() {
    let u1 = u1_target(4);
    let id = Channel::identity(4);
    assert!((average_fidelity(&id, &identity(4)).unwrap() - 1.0).abs() < 1e-15);
    assert!((average_fidelity(&Channel::unitary(&u1), &u1).unwrap() - 1.0).abs() < 1e-15);
    // |tr U1|² / N² = 1/4
    assert!((average_fidelity(&id, &u1).unwrap() - 0.4).abs() < 1e-15);
    let dep = Channel::completely_depolarizing(4);
    assert!((average_fidelity(&dep, &u1).unwrap() - 0.25).abs() < 1e-15);
}

#[test]
fn fidelity_rejects_bad_targets() {
    let id = Channel::identity(4);
    let mut bad = identity(4);
    bad[(0, 0)] = C64::new(1.01, 0.0);
    assert!(matches!(average_fidelity(&id, &bad), Err(Error::NonUnitaryTarget(_))));
    assert!(matches!(
        average_fidelity(&id, &identity(3)),
        Err(Error::DimensionMismatch(_))
    ));
}

#[test]
fn partial_trace_of_entangled_state() {
    let m = single_tls_model();
    let mut psi = vec![C64::new(0.0, 0.0); 8];
    // (|0,g⟩ + |1,e⟩)/√2
    psi[0] = C64::new(1.0, 0.0);
    psi[3] = C64::new(1.0, 0.0);
    let rho = DensityMatrix::pure(&psi);
    assert!((rho.purity() - 1.0).abs() < 1e-14);
    let red = partial_trace_env(&rho, &m).unwrap();
    let want = CMatrix::from_diagonal(&DVector::from_vec(vec![
        C64::new(0.5, 0.0),
        C64::new(0.5, 0.0),
        C64::new(0.0, 0.0),
        C64::new(0.0, 0.0),
    ]));
    assert!(fro_norm(&(red.data.clone() - want)) < 1e-15);
    assert!((red.purity() - 0.5).abs() < 1e-14);
    assert!(partial_trace(&identity(6), 4, 2).is_err());
}

#[test]
fn choi_and_composition() {
    let u = u1_target(3);
    let ch = Channel::unitary(&u);
    assert!(ch.choi_min_eigenvalue() > -1e-14);
    assert!(fro_norm(&(ch.compose(&ch).data - identity(9))) < 1e-14);
    assert!(Channel::completely_depolarizing(3).trace_defect() < 1e-15);
    let rho = DensityMatrix::pure(&[C64::new(1.0, 0.0), C64::new(0.0, 1.0), C64::new(0.0, 0.0)]);
    let out = ch.apply(&rho.data);
    assert!(fro_norm(&(out - &u * &rho.data * dagger(&u))) < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn reduced_channel_is_physical(
        values in proptest::collection::vec(-6.0f64..6.0, 1..12),
        total in 0.5f64..8.0,
        frac in 0.0f64..=1.0,
    ) {
        let ops = build_operators(&single_tls_model()).unwrap();
        let control = PiecewiseControl::new(total, values).unwrap();
        let ch = reduced_channel(&ops, &control, frac * total).unwrap();
        prop_assert!(ch.trace_defect() < 1e-10);
        prop_assert!(ch.choi_min_eigenvalue() > -1e-9);
        let f = average_fidelity(&ch, &u1_target(4)).unwrap();
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&f));
        let rho = ch.apply(&basis(4, 2, 2));
        let state = DensityMatrix::new(rho).unwrap();
        prop_assert!(state.hermiticity_defect() < 1e-10);
        prop_assert!(state.min_eigenvalue() > -1e-9);
        prop_assert!((state.trace().re - 1.0).abs() < 1e-10);
    }

    #[test]
    fn determinant_never_grows_without_coupling(
        values in proptest::collection::vec(-6.0f64..6.0, 1..8),
    ) {
        let mut m = single_tls_model();
        m.tls[0].coupling = 0.0;
        let ops = build_operators(&m).unwrap();
        let control = PiecewiseControl::new(8.0, values).unwrap();
        let times: Vec<f64> = (0..=16).map(|j| j as f64 * 0.5).collect();
        let dets: Vec<f64> = channel_trace(&ops, &control, &times)
            .unwrap()
            .iter()
            .map(|c| c.determinant().norm())
            .collect();
        for w in dets.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
    }
}
