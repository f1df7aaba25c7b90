use dchar_core::dissipativity::{
    is_non_dissipative, trace_certificate, trace_normalize, CertificateOutcome, DissipativityVerdict, EIG_TOL,
};
use dchar_core::linalg::{min_eigenvalue, sym_eigenvalues};
use dchar_core::pencil::rank_profile;
use dchar_core::{rng, synth, Error, SymmetricForm};
use proptest::prelude::*;

/// Brute force: largest smallest eigenvalue of unit combinations on a fine grid.
fn brute_max_min_eig(a: &SymmetricForm, b: &SymmetricForm) -> f64 {
    let (an, bn) = (a.normalized(), b.normalized());
    (0..4000)
        .map(|i| {
            let t = std::f64::consts::TAU * i as f64 / 4000.0;
            let m = an.matrix() * t.cos() + bn.matrix() * t.sin();
            min_eigenvalue(&(&m / m.norm()))
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn traceless_pairs_are_certified(seed in any::<u64>(), n in 2usize..16) {
        let (a, b) = synth::traceless_pair(&mut rng::stream(seed, 0), n);
        prop_assert!(brute_max_min_eig(&a, &b) < 0.0);
        match trace_certificate(&a, &b).unwrap() {
            CertificateOutcome::Certified(cert) => {
                // independent re-evaluation of tr(QAQ), tr(QBQ) and Q ≻ 0
                let qa = (&cert.q * a.matrix() * &cert.q).trace();
                let qb = (&cert.q * b.matrix() * &cert.q).trace();
                prop_assert!(qa.abs() <= cert.tolerance && qb.abs() <= cert.tolerance);
                prop_assert!(sym_eigenvalues(&cert.q)[0] > 0.0);
            }
            other => prop_assert!(false, "{other:?}"),
        }
    }

    #[test]
    fn dissipative_pairs_yield_psd_witness(seed in any::<u64>(), n in 1usize..16) {
        let (a, b) = synth::dissipative_pair(&mut rng::stream(seed, 1), n);
        match is_non_dissipative(&a, &b).unwrap() {
            DissipativityVerdict::Dissipative { theta, witness, .. } => {
                let m = a.combine(theta.cos(), &b, theta.sin()).unwrap();
                prop_assert!(min_eigenvalue(&(m.matrix() / m.norm())) >= -EIG_TOL);
                prop_assert!((witness.norm() - 1.0).abs() < 1e-12);
            }
            other => prop_assert!(false, "{other:?}"),
        }
        let rejected = matches!(trace_normalize(&a, &b), Err(Error::Dissipative { .. }));
        prop_assert!(rejected);
    }

    #[test]
    fn trace_normalize_makes_both_traceless(seed in any::<u64>(), n in 2usize..12) {
        let (a, b) = synth::traceless_pair(&mut rng::stream(seed, 2), n);
        let (a2, b2, q) = trace_normalize(&a, &b).unwrap();
        let tol = 1e-8 * (a.norm() + b.norm()) * q.norm().powi(2);
        prop_assert!(a2.trace().abs() <= tol && b2.trace().abs() <= tol);
    }

    #[test]
    fn non_dissipative_pairs_have_minrank_at_least_two(seed in any::<u64>(), n in 2usize..14) {
        let (a, b) = synth::traceless_pair(&mut rng::stream(seed, 3), n);
        prop_assert!(is_non_dissipative(&a, &b).unwrap().is_non_dissipative());
        prop_assert!(rank_profile(&a, &b).unwrap().minrank >= 2);
    }

    #[test]
    fn verdict_invariant_under_congruence_and_scaling(seed in any::<u64>(), n in 2usize..10, s in 0.01f64..100.0) {
        let mut r = rng::stream(seed, 4);
        let (a, b) = if seed % 2 == 0 { synth::traceless_pair(&mut r, n) } else { synth::dissipative_pair(&mut r, n) };
        let t = synth::near_identity(&mut r, n, 0.5);
        let a2 = dchar_core::forms::congruence(&a, &t).unwrap().scale(s);
        let b2 = dchar_core::forms::congruence(&b, &t).unwrap();
        prop_assert_eq!(
            is_non_dissipative(&a, &b).unwrap().is_non_dissipative(),
            is_non_dissipative(&a2, &b2).unwrap().is_non_dissipative()
        );
    }
}

#[test]
fn semidefinite_member_is_dissipative() {
    let a = SymmetricForm::from_diagonal(&[1.0, 0.0]);
    let b = SymmetricForm::from_diagonal(&[0.0, 1.0]);
    assert!(!is_non_dissipative(&a, &b).unwrap().is_non_dissipative());
    assert!(matches!(
        trace_certificate(&a, &b).unwrap(),
        CertificateOutcome::Infeasible { .. }
    ));
}

#[test]
fn hyperbolic_pair_certified_by_identity() {
    let a = SymmetricForm::from_diagonal(&[1.0, -1.0]);
    let b = SymmetricForm::from_monomials(2, &[(0, 1, 1.0)]);
    match trace_certificate(&a, &b).unwrap() {
        CertificateOutcome::Certified(c) => {
            let expected = nalgebra::DMatrix::<f64>::identity(2, 2) / 2f64.sqrt();
            assert!((c.q - expected).norm() < 1e-12);
        }
        other => panic!("{other:?}"),
    }
}
