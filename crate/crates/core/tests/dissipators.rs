mod common;

use common::*;
use fp_core::dissipators::{bose_occupation, ChannelKind};
use fp_core::{assemble_liouvillian, SystemParams};

#[test]
fn components_rebuild_each_operator() {
    for delta in [0.0, 1e-3, 1e-2] {
        let p = SystemParams { nu: 2.8e-3, n_max: 8, delta_secular: delta, ..defaults() };
        let (_, ch, _) = assemble_liouvillian(&p).unwrap();
        let ops = fp_core::build_operators(fp_core::build_space(8).unwrap());
        for (kind, op) in [
            (ChannelKind::Cavity, &ops.a),
            (ChannelKind::Molecule, &ops.sigma),
            (ChannelKind::Dephasing, &ops.n_mol),
        ] {
            let back = ch.reconstruct(kind);
            let err = max_diff(back.matrix(), op.matrix());
            assert!(err < 1e-12, "{kind} at delta {delta}: {err:e}");
        }
    }
}

#[test]
fn frobenius_weight_independent_of_delta() {
    let total = |delta: f64, kind: ChannelKind| {
        let p = SystemParams { nu: 4.9e-3, n_max: 8, delta_secular: delta, ..defaults() };
        let (_, ch, _) = assemble_liouvillian(&p).unwrap();
        let n = ch.of_kind(kind).count();
        (ch.of_kind(kind).map(|c| c.frobenius_norm().powi(2)).sum::<f64>(), n)
    };
    for kind in [ChannelKind::Cavity, ChannelKind::Molecule, ChannelKind::Dephasing] {
        let (w0, n0) = total(0.0, kind);
        let (w1, n1) = total(1e-3, kind);
        let (w2, n2) = total(1e-2, kind);
        assert!((w0 - w1).abs() < 1e-12 * w0 && (w0 - w2).abs() < 1e-12 * w0, "{kind}");
        assert!(n0 >= n1 && n1 >= n2, "{kind}: {n0} {n1} {n2}");
    }
    // ‖a‖² = Σ n over both molecular states; ‖σ†σ‖² = number of excited states.
    let (wa, _) = total(0.0, ChannelKind::Cavity);
    assert!((wa - 2.0 * (1..=8).sum::<usize>() as f64).abs() < 1e-10);
    let (wd, _) = total(0.0, ChannelKind::Dephasing);
    assert!((wd - 9.0).abs() < 1e-10);
}

#[test]
fn dephasing_rates_obey_detailed_balance() {
    let p = SystemParams { nu: 2.8e-3, n_max: 6, ..defaults() };
    let (_, ch, _) = assemble_liouvillian(&p).unwrap();
    let deph: Vec<_> = ch.of_kind(ChannelKind::Dephasing).collect();
    let mut checked = 0;
    for up in deph.iter().filter(|c| !c.elastic && c.bohr_freq > 0.0) {
        let w = up.bohr_freq;
        let nbar = 1.0 / ((w / p.temperature).exp() - 1.0);
        assert!((up.rate - p.gamma_ph * (nbar + 1.0)).abs() < 1e-12 * up.rate);
        if let Some(down) = deph.iter().find(|c| (c.bohr_freq + w).abs() < 1e-11) {
            let ratio = up.rate / down.rate;
            assert!((ratio / (w / p.temperature).exp() - 1.0).abs() < 1e-9, "w = {w}");
            checked += 1;
        }
    }
    assert!(checked > 10);
    let elastic: Vec<_> = deph.iter().filter(|c| c.elastic).collect();
    assert_eq!(elastic.len(), 1);
    assert_eq!(elastic[0].rate, p.gamma_ph);
    assert_eq!(elastic[0].bohr_freq, 0.0);
}

#[test]
fn absorption_to_emission_ratio_at_bohr_equal_temperature() {
    let t = 0.02;
    let nbar = bose_occupation(t, t);
    assert!((nbar / (nbar + 1.0) - (-1.0f64).exp()).abs() < 1e-15);
    assert_eq!(bose_occupation(0.3, 0.0), 0.0);
}

#[test]
fn cavity_and_molecule_rates_are_flat() {
    let (_, ch, _) = assemble_liouvillian(&SystemParams { nu: 4.9e-3, n_max: 6, ..defaults() }).unwrap();
    assert!(ch.of_kind(ChannelKind::Cavity).all(|c| c.rate == 1e-3));
    assert!(ch.of_kind(ChannelKind::Molecule).all(|c| c.rate == 1e-5));
    for c in ch.of_kind(ChannelKind::Cavity) {
        assert!((c.lab_freq - (c.bohr_freq + 1.0101)).abs() < 1e-15);
    }
}

#[test]
fn dephasing_couples_polariton_pairs_at_rabi_splitting() {
    let p = SystemParams { n_max: 10, ..defaults() };
    let (_, ch, _) = assemble_liouvillian(&p).unwrap();
    for n in 1..=10 {
        let w = 2.0 * (n as f64).sqrt() * p.omega_r;
        for sign in [1.0, -1.0] {
            let c = ch
                .of_kind(ChannelKind::Dephasing)
                .find(|c| (c.bohr_freq - sign * w).abs() < 1e-12)
                .unwrap_or_else(|| panic!("no component at {}", sign * w));
            assert_eq!(c.components.len(), 1);
            assert!((c.components[0].amp.norm() - 0.5).abs() < 1e-12);
        }
    }
}

#[test]
fn uncoupled_undriven_limit_is_the_local_master_equation() {
    let p = SystemParams { omega_r: 0.0, nu: 0.0, n_max: 4, ..defaults() };
    let (l, ch, _) = assemble_liouvillian(&p).unwrap();
    let cav: Vec<_> = ch.of_kind(ChannelKind::Cavity).collect();
    assert_eq!(cav.len(), 1);
    assert!((cav[0].bohr_freq - (1.0 - p.omega)).abs() < 1e-14);
    let ops = fp_core::build_operators(l.space());
    assert!(max_diff(ch.operator(cav[0]).matrix(), ops.a.matrix()) < 1e-14);
    let deph: Vec<_> = ch.of_kind(ChannelKind::Dephasing).collect();
    assert!(deph.len() == 1 && deph[0].elastic);

    // γ_a D[a] + γ_D D[σ] + γ_ph D[σ†σ] with no thermal factor on the local operators.
    let reference = dense_generator(&p, 1e-11);
    let err = max_diff(l.to_dense().as_ref(), reference.as_ref());
    assert!(err < 1e-13, "{err:e}");
}

#[test]
fn zero_temperature_silences_absorption() {
    let p = SystemParams { nu: 2.8e-3, n_max: 5, temperature: 0.0, ..defaults() };
    let (_, ch, _) = assemble_liouvillian(&p).unwrap();
    for c in ch.of_kind(ChannelKind::Dephasing).filter(|c| !c.elastic) {
        if c.bohr_freq < 0.0 {
            assert_eq!(c.rate, 0.0);
        } else {
            assert_eq!(c.rate, p.gamma_ph);
        }
    }
}

#[test]
fn negative_delta_secular_rejected() {
    let p = SystemParams { delta_secular: -1e-3, ..defaults() };
    assert!(assemble_liouvillian(&p).unwrap_err().is_validation());
}

#[test]
fn channel_csv_header() {
    let (_, ch, _) = assemble_liouvillian(&SystemParams { n_max: 3, ..defaults() }).unwrap();
    let mut buf = Vec::new();
    ch.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "kind,bohr_freq,lab_freq,rate,frobenius_norm");
    assert_eq!(lines.count(), ch.channels.len());
}
