use proptest::prelude::*;
use qfpt_core::linalg::{identity, max_abs_diff};
use qfpt_core::liouville::{kron_lift, unvec, vec, vec_identity};
use qfpt_core::rng::substream;
use qfpt_core::{
    apply_scaled_perturbation, echo_curve, echo_deficit, jump_channel, loschmidt_echo, qfi,
    random_system, two_level_atom, CMatrix, InitialState, QfiOptions, C64,
};

fn complex_matrix(d: usize) -> impl Strategy<Value = CMatrix> {
    proptest::collection::vec((-2.0..2.0f64, -2.0..2.0f64), d * d)
        .prop_map(move |v| CMatrix::from_iterator(d, d, v.into_iter().map(|(a, b)| C64::new(a, b))))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn vec_roundtrip(m in (1usize..5).prop_flat_map(complex_matrix)) {
        prop_assert_eq!(unvec(&vec(&m)), m);
    }

    #[test]
    fn vec_of_product(a in complex_matrix(3), b in complex_matrix(3), c in complex_matrix(3)) {
        let lhs = vec(&(&a * &b * &c));
        let rhs = kron_lift(&c.transpose(), &a) * vec(&b);
        prop_assert!((lhs - rhs).camax() < 1e-11);
    }

    #[test]
    fn random_systems_are_trace_preserving(seed in any::<u64>(), d in 2usize..5, m in 1usize..4) {
        let sys = random_system(&mut substream(seed, 0), d, m);
        let z = jump_channel(&sys).unwrap();
        let one = vec_identity(d);
        let defect = z.matrix().tr_mul(&one) - &one;
        prop_assert!(defect.camax() < 1e-10);
    }

    #[test]
    fn effective_hamiltonian_antihermitian_part(seed in any::<u64>(), d in 2usize..5) {
        let sys = random_system(&mut substream(seed, 1), d, 2);
        let h = sys.effective_hamiltonian();
        let lhs = &h - h.adjoint();
        let rhs = sys.jump_rate_operator() * C64::new(0.0, -1.0);
        prop_assert!(max_abs_diff(&lhs, &rhs) < 1e-12);
    }

    #[test]
    fn zero_perturbation_is_identity(seed in any::<u64>(), d in 2usize..5) {
        let sys = random_system(&mut substream(seed, 2), d, 2);
        prop_assert_eq!(apply_scaled_perturbation(&sys, 0.0).unwrap(), sys);
    }

    #[test]
    fn echo_is_a_fidelity(seed in any::<u64>(), d in 2usize..4) {
        let mut rng = substream(seed, 3);
        let a = random_system(&mut rng, d, 2);
        let b = random_system(&mut rng, d, 2);
        let rho = InitialState::basis(d, 0).unwrap();
        for e in echo_curve(&a, &b, &rho, 6).unwrap() {
            prop_assert!(e.eta >= 0.0 && e.eta <= 1.0 + 1e-12);
        }
        for e in echo_curve(&a, &a, &rho, 6).unwrap() {
            prop_assert!((e.eta - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn deficit_agrees_with_direct_echo(seed in any::<u64>(), eps in 0.01..0.5f64) {
        let sys = random_system(&mut substream(seed, 4), 3, 2);
        let pert = apply_scaled_perturbation(&sys, eps).unwrap();
        let rho = InitialState::basis(3, 1).unwrap();
        let direct = loschmidt_echo(&sys, &pert, &rho, 5).unwrap().amplitude;
        let z = echo_deficit(&sys, &pert, &rho, 5).unwrap();
        prop_assert!((C64::new(1.0, 0.0) - z - direct).norm() < 1e-12);
    }
}

#[test]
fn atom_from_ground_state_is_a_renewal_process() {
    // Every jump resets the atom to |g⟩, so K-jump quantities factorize.
    let atom = two_level_atom(0.8, 1.7, 1.4).unwrap();
    let pert = two_level_atom(0.3, 1.1, 0.9).unwrap();
    let rho = InitialState::atom_ground();
    let curve = echo_curve(&atom, &pert, &rho, 6).unwrap();
    for e in &curve {
        let expect = curve[0].amplitude.powu(e.k as u32);
        assert!((e.amplitude - expect).norm() < 1e-13);
    }
    let j1 = qfi(&atom, &rho, 1, QfiOptions::default()).unwrap().value;
    for k in 2..=5 {
        let jk = qfi(&atom, &rho, k, QfiOptions::default()).unwrap().value;
        assert!(
            (jk - k as f64 * j1).abs() < 1e-6 * jk,
            "K={k}: {jk} vs {}",
            k as f64 * j1
        );
    }
}

#[test]
fn identity_lift_is_identity() {
    let i = identity(3);
    assert_eq!(kron_lift(&i, &i), identity(9));
}
