mod common;

use common::*;
use faer::{c64, Mat};
use fp_core::{assemble_liouvillian, propagate, steady_state, DensityMatrix, Error, Molecule, SystemParams};
use proptest::prelude::*;

#[test]
fn matches_dense_reference_generator() {
    for (nu, n_max) in [(1e-3, 5), (2.8e-3, 6), (4.9e-3, 4)] {
        let p = SystemParams { nu, n_max, ..defaults() };
        let (l, _, _) = assemble_liouvillian(&p).unwrap();
        let reference = dense_generator(&p, 1e-11);
        let dense = l.to_dense();
        let err = max_diff(dense.as_ref(), reference.as_ref());
        assert!(err < 1e-12 * max_abs(reference.as_ref()).max(1.0), "nu {nu}: {err:e}");
    }
}

#[test]
fn apply_agrees_with_dense_matrix() {
    let p = SystemParams { nu: 2.8e-3, n_max: 5, delta_secular: 1e-2, ..defaults() };
    let (l, _, _) = assemble_liouvillian(&p).unwrap();
    let rho = random_rho(5, 7);
    let direct = vec_col(l.apply(rho.matrix()).as_ref());
    let x = vec_col(rho.matrix());
    let dense = l.to_dense();
    let d2 = x.len();
    for i in 0..d2 {
        let y: c64 = (0..d2).map(|j| dense[(i, j)] * x[j]).sum();
        assert!((y - direct[i]).norm() < 1e-14);
    }
}

#[test]
fn closed_system_oscillates_at_bohr_frequencies() {
    let p = SystemParams { nu: 2.8e-3, n_max: 4, gamma_a: 0.0, gamma_d: 0.0, gamma_ph: 0.0, ..defaults() };
    let (l, _, eig) = assemble_liouvillian(&p).unwrap();
    let d = eig.dim();
    for (j, k) in [(0, 0), (0, 3), (5, 2), (d - 1, 1)] {
        let mut e = Mat::<c64>::zeros(d, d);
        e[(j, k)] = c64::new(1.0, 0.0);
        let x = eig.to_product(e.as_ref());
        let lx = l.apply(x.as_ref());
        let want = c64::new(0.0, -(eig.energies[j] - eig.energies[k]));
        let expect = Mat::from_fn(d, d, |a, b| want * x[(a, b)]);
        assert!(max_diff(lx.as_ref(), expect.as_ref()) < 1e-14);
    }
    match steady_state(&l) {
        Err(Error::DegenerateSteadyState { .. }) => {}
        other => panic!("expected degenerate steady state, got {other:?}"),
    }
}

#[test]
fn propagation_relaxes_to_steady_state() {
    let p = SystemParams { nu: 2.8e-3, n_max: 6, ..defaults() };
    let (l, _, _) = assemble_liouvillian(&p).unwrap();
    let ss = steady_state(&l).unwrap();
    let rho0 = DensityMatrix::ground(l.space());
    let rho_t = propagate(&l, &rho0, 50.0 / p.gamma_a).unwrap();
    let dist = rho_t.trace_distance(&ss.rho).unwrap();
    assert!(dist < 1e-6, "{dist:e}");
}

#[test]
fn short_time_step_is_first_order_and_linear() {
    let p = SystemParams { nu: 4.9e-3, n_max: 5, ..defaults() };
    let (l, _, _) = assemble_liouvillian(&p).unwrap();
    let r1 = random_rho(5, 1);
    let r2 = DensityMatrix::fock(l.space(), 2, Molecule::Excited).unwrap();
    let t = 1e-3;
    let p1 = propagate(&l, &r1, t).unwrap();
    let euler = r1.matrix() + Mat::from_fn(12, 12, |i, j| c64::new(t, 0.0) * l.apply(r1.matrix())[(i, j)]);
    assert!(max_diff(p1.matrix(), euler.as_ref()) < 1e-5 * t);

    let alpha = 0.3;
    let mix = Mat::from_fn(12, 12, |i, j| r1.matrix()[(i, j)] * alpha + r2.matrix()[(i, j)] * (1.0 - alpha));
    let mix = DensityMatrix::new(l.space(), mix).unwrap();
    let t = 40.0;
    let pm = propagate(&l, &mix, t).unwrap();
    let (a, b) = (propagate(&l, &r1, t).unwrap(), propagate(&l, &r2, t).unwrap());
    let lin = Mat::from_fn(12, 12, |i, j| a.matrix()[(i, j)] * alpha + b.matrix()[(i, j)] * (1.0 - alpha));
    assert!(max_diff(pm.matrix(), lin.as_ref()) < 1e-8);
}

#[test]
fn steady_state_is_well_separated_kernel() {
    let (l, _, _) = assemble_liouvillian(&at(2.8e-3)).unwrap();
    let s = l.smallest_singular_values(2).unwrap();
    assert!(s[1] / s[0].max(f64::MIN_POSITIVE) >= 1e6, "{s:?}");
    let ss = steady_state(&l).unwrap();
    assert!(ss.residual < 1e-12);
    assert!(ss.min_eigenvalue > -1e-10);
    assert!((ss.rho.trace().re - 1.0).abs() < 1e-12);
}

#[test]
fn undriven_steady_state_is_the_dark_ground_state() {
    let (l, _, _) = assemble_liouvillian(&defaults()).unwrap();
    let ss = steady_state(&l).unwrap();
    let g = DensityMatrix::ground(l.space());
    assert!(ss.rho.trace_distance(&g).unwrap() < 1e-12);
}

#[test]
fn partial_secular_solution_is_physical() {
    let p = SystemParams { nu: 2.8e-3, delta_secular: 1e-2, n_max: 10, ..defaults() };
    let (l, _, _) = assemble_liouvillian(&p).unwrap();
    let ss = steady_state(&l).unwrap();
    assert!(ss.min_eigenvalue > -1e-8);
    assert!(ss.residual <= 1e-10 * l.norm());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn random_parameters_keep_lindblad_structure(
        nu in 0.0f64..0.012,
        omega in 1.0f64..1.03,
        omega_r in 0.002f64..0.02,
        gamma_ph in 0.0f64..0.01,
        temperature in 0.0f64..0.05,
        delta in prop_oneof![Just(0.0), 0.0f64..0.02],
        seed in 0u64..1000,
    ) {
        let p = SystemParams { nu, omega, omega_r, gamma_ph, temperature, delta_secular: delta, n_max: 4, ..defaults() };
        let (l, _, _) = assemble_liouvillian(&p).unwrap();
        let rho = random_rho(4, seed);
        let lr = l.apply(rho.matrix());
        let scale = entry_l1(lr.as_ref()).max(1e-300);
        prop_assert!(trace(lr.as_ref()).norm() <= 1e-12 * scale.max(l.norm()));
        prop_assert!(max_diff(lr.as_ref(), dag(lr.as_ref()).as_ref()) <= 1e-12 * max_abs(lr.as_ref()).max(1e-300) + 1e-16);
        if delta == 0.0 {
            let reference = dense_generator(&p, 1e-11);
            prop_assert!(max_diff(l.to_dense().as_ref(), reference.as_ref()) < 1e-12 * max_abs(reference.as_ref()));
        }
    }
}
