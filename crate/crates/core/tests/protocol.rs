use num_complex::Complex64;
use qshare_core::analysis::{check_stages, combinations, participant_view_deviation, secrecy_scan};
use qshare_core::protocol::{
    inject_malicious, run_protocol, run_scheme1, Behavior, EventKind, FinalSecret, ParticipantSpec, ProtocolConfig,
    ProtocolError, Scheme, SecretMode, Stage,
};
use qshare_core::SchemeParams;

fn config(k: usize, n: usize, scheme: Scheme, mode: SecretMode, seed: u64) -> ProtocolConfig {
    ProtocolConfig::new(SchemeParams::smallest(k, n).unwrap(), scheme, mode, seed)
}

fn basis(q: u64, digits: &[u64]) -> Vec<ParticipantSpec> {
    digits.iter().enumerate().map(|(i, &d)| ParticipantSpec::basis(i, q, d)).collect()
}

fn triples() -> impl Iterator<Item = [u64; 3]> {
    (0..27u64).map(|c| [c % 3, (c / 3) % 3, c / 9])
}

fn basis_final(cfg: &ProtocolConfig, specs: &[ParticipantSpec], subset: &[usize]) -> u64 {
    match run_protocol(cfg, specs, subset).unwrap().0.final_secret {
        FinalSecret::Basis { digit } => digit,
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn oracle_conformance_for_all_triples() {
    let cfg = config(2, 3, Scheme::Aggregated, SecretMode::Basis, 0);
    for s in triples() {
        let specs = basis(3, &s);
        let checks = check_stages(&cfg, &specs, &[0, 1], &Stage::ALL, 1e-9).unwrap();
        assert!(checks.iter().all(|c| c.passed), "{s:?}: {checks:?}");
        assert_eq!(basis_final(&cfg, &specs, &[0, 1]), s.iter().sum::<u64>() % 3);
    }
}

#[test]
fn transcripts_are_deterministic() {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let amps = vec![Complex64::new(h, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.0, -h)];
    let specs: Vec<_> = (0..3).map(|i| ParticipantSpec::superposition(i, amps.clone())).collect();
    for scheme in [Scheme::Separate, Scheme::Aggregated] {
        let cfg = config(2, 3, scheme, SecretMode::Measured, 99);
        let a = format!("{:?}", run_protocol(&cfg, &specs, &[2, 0]).unwrap().1);
        let b = format!("{:?}", run_protocol(&cfg, &specs, &[2, 0]).unwrap().1);
        assert_eq!(a, b);
    }
}

#[test]
fn equal_contribution_under_permutation() {
    let cfg = config(2, 3, Scheme::Aggregated, SecretMode::Basis, 0);
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    for s in triples() {
        let reference = basis_final(&cfg, &basis(3, &s), &[0, 1]);
        for p in perms {
            let permuted = [s[p[0]], s[p[1]], s[p[2]]];
            assert_eq!(basis_final(&cfg, &basis(3, &permuted), &[0, 1]), reference);
        }
    }
}

#[test]
fn any_k_players_agree() {
    let cfg = config(2, 3, Scheme::Aggregated, SecretMode::Basis, 0);
    for subset in [[0, 1], [0, 2], [1, 2]] {
        assert_eq!(basis_final(&cfg, &basis(3, &[1, 2, 0]), &subset), 0);
    }
}

#[test]
fn coalition_view_is_independent_of_others() {
    let dev = participant_view_deviation(&SchemeParams::smallest(2, 3).unwrap()).unwrap();
    assert!(dev < 1e-9, "deviation {dev}");
}

#[test]
fn share_secrecy_at_both_sizes() {
    let r = secrecy_scan(&SchemeParams::smallest(2, 3).unwrap(), 1).unwrap();
    assert!(r.passes(1e-9), "{r:?}");
    let r = secrecy_scan(&SchemeParams::smallest(3, 5).unwrap(), 2).unwrap();
    assert_eq!(r.subsets_checked, 10);
    assert!(r.passes(1e-9), "{r:?}");
}

#[test]
fn quarantined_surplus_shares_stay_secret() {
    // (2,2) deals three shares and parks one
    let r = secrecy_scan(&SchemeParams::smallest(2, 2).unwrap(), 1).unwrap();
    assert_eq!(r.subsets_checked, 2);
    assert!(r.passes(1e-9), "{r:?}");
}

#[test]
fn quitter_tolerance_at_3_5() {
    let cfg = config(3, 5, Scheme::Aggregated, SecretMode::Basis, 0);
    let digits = [1, 2, 3, 4, 0];
    let all: Vec<usize> = (0..5).collect();
    // two or more quitters keep the global state within desk scale
    assert!(matches!(run_protocol(&cfg, &basis(5, &digits), &[0, 1, 2]), Err(ProtocolError::TooLarge { .. })));
    for size in 2..=3 {
        for quitters in combinations(&all, size) {
            let mut specs = basis(5, &digits);
            for &l in &quitters {
                specs[l].behavior = Behavior::QuitterSilent;
            }
            let real: Vec<usize> = all.iter().copied().filter(|i| !quitters.contains(i)).collect();
            let result = run_protocol(&cfg, &specs, &real[..3.min(real.len())]);
            if size <= 2 {
                let expected = real.iter().map(|&i| digits[i]).sum::<u64>() % 5;
                assert_eq!(result.unwrap().0.final_secret, FinalSecret::Basis { digit: expected }, "{quitters:?}");
            } else {
                assert!(matches!(result, Err(ProtocolError::Aborted { .. })), "{quitters:?}");
            }
        }
    }
}

#[test]
fn schemes_agree_on_basis_inputs() {
    let one = config(2, 3, Scheme::Separate, SecretMode::Basis, 0);
    let two = config(2, 3, Scheme::Aggregated, SecretMode::Basis, 0);
    for s in triples() {
        let specs = basis(3, &s);
        let (a, t) = run_scheme1(&one, &specs, &[1, 2]).unwrap();
        assert_eq!(a.digit(), Some(basis_final(&two, &specs, &[1, 2])));
        assert_eq!(t.count(|e| matches!(e, EventKind::RecoveryInvocation { .. })), 3);
    }
}

#[test]
fn superposition_mode_pairs_sum_with_inputs() {
    let cfg = config(2, 3, Scheme::Aggregated, SecretMode::Superposition, 0);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut specs = basis(3, &[1, 2, 0]);
    specs[0].private_state = vec![Complex64::new(0.0, 0.0), Complex64::new(h, 0.0), Complex64::new(h, 0.0)];
    let rec = run_protocol(&cfg, &specs, &[0, 1]).unwrap().0;
    let FinalSecret::Superposition { state } = rec.final_secret else { panic!() };
    assert_eq!(state.len(), 2);
    for (d, a) in state.terms() {
        assert_eq!(d[0], (d[1] + d[2] + d[3]) % 3);
        assert!((a.norm() - h).abs() < 1e-9);
    }
}

#[test]
fn malicious_shift_is_linear_and_undetected() {
    let cfg = config(2, 3, Scheme::Aggregated, SecretMode::Basis, 0);
    let specs = basis(3, &[1, 2, 0]);
    for shift in 1..3 {
        let bad = inject_malicious(&specs, 1, shift).unwrap();
        assert_eq!(basis_final(&cfg, &bad, &[0, 2]), shift % 3);
        let measured = config(2, 3, Scheme::Aggregated, SecretMode::Measured, 5);
        let (rec, t) = run_protocol(&measured, &bad, &[0, 2]).unwrap();
        assert_eq!(rec.final_secret.digit(), Some(shift % 3));
        assert_eq!(t.count(|e| matches!(e, EventKind::ConsistencyCheck { passed: true, .. })), 1);
    }
}


#[test]
fn oracle_conformance_with_quitters() {
    let cfg = config(3, 5, Scheme::Aggregated, SecretMode::Basis, 0);
    let mut specs = basis(5, &[1, 2, 3, 4, 0]);
    specs[1].behavior = Behavior::QuitterSilent;
    specs[3].behavior = Behavior::QuitterSilent;
    for subset in [[0, 2, 4], [4, 0, 2]] {
        let checks = check_stages(&cfg, &specs, &subset, &Stage::ALL, 1e-9).unwrap();
        assert!(checks.iter().all(|c| c.passed), "{subset:?}: {checks:?}");
    }
}

#[test]
fn tampered_share_triggers_rerun() {
    use qshare_core::linalg::MatrixFq;
    use qshare_core::protocol::{run_generation, run_reconstruction};
    use qshare_core::threshold::share_register;
    let mut reruns = 0;
    for seed in 0..20 {
        let cfg = config(2, 3, Scheme::Aggregated, SecretMode::Measured, seed);
        let (mut deal, _) = run_generation(&cfg, &basis(3, &[1, 2, 0])).unwrap();
        let double = MatrixFq::from_rows(cfg.params.field(), &[&[2]]).unwrap();
        deal.state = deal.state.apply_matrix(&[share_register(1, 0)], &double).unwrap();
        let rec = run_reconstruction(&deal, &cfg, &[0, 1]).unwrap();
        if let FinalSecret::RerunRequired { secret, share_sum } = rec.final_secret {
            assert_ne!(secret, share_sum);
            assert_eq!(rec.transcript.count(|e| matches!(e, EventKind::RerunRequired)), 1);
            reruns += 1;
        }
    }
    assert!(reruns > 0);
}
