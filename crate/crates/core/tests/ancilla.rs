mod common;

use common::no_jump;
use qfpt_core::ancilla::{coherence_samples, extend};
use qfpt_core::linalg::max_abs_diff;
use qfpt_core::rng::substream;
use qfpt_core::trajectory::Sampler;
use qfpt_core::{
    ancilla_echo_curve, ancilla_estimate_echo, apply_scaled_perturbation,
    classical_echo_closed_form, embed_classical, loschmidt_echo, random_system, two_level_atom,
    CMatrix, CVector, ClassicalRateMatrix, InitialState, LindbladSystem, SamplerConfig,
};

fn fig5_pair() -> (LindbladSystem, LindbladSystem) {
    (
        two_level_atom(1.0, 1.0, 2.0).unwrap(),
        two_level_atom(0.4, 1.2, 0.5).unwrap(),
    )
}

#[test]
fn extended_kraus_operators_are_block_diagonal() {
    let mut rng = substream(31, 0);
    let a = random_system(&mut rng, 3, 2);
    let b = random_system(&mut rng, 3, 2);
    let ext = extend(&a, &b).unwrap();
    for &w in &[0.05, 0.7, 2.3] {
        let u = no_jump(ext.system(), w);
        let (ua, ub) = (no_jump(&a, w), no_jump(&b, w));
        for m in 0..2 {
            let y = &ext.system().jumps()[m] * &u;
            let mut expect = CMatrix::zeros(6, 6);
            expect
                .view_mut((0, 0), (3, 3))
                .copy_from(&(&a.jumps()[m] * &ua));
            expect
                .view_mut((3, 3), (3, 3))
                .copy_from(&(&b.jumps()[m] * &ub));
            assert!(max_abs_diff(&y, &expect) < 1e-12);
        }
    }
}

#[test]
fn extension_of_identical_systems_repeats_blocks() {
    let (a, _) = fig5_pair();
    let ext = extend(&a, &a).unwrap();
    let h = ext.system().hamiltonian();
    assert_eq!(h.view((0, 0), (2, 2)), h.view((2, 2), (2, 2)));
}

#[test]
fn sampled_states_keep_their_block_structure() {
    // Each sector must evolve under its own dynamics along the shared record.
    let (a, b) = fig5_pair();
    let ext = extend(&a, &b).unwrap();
    let psi = InitialState::atom_ground().as_pure().unwrap().clone();
    let start = ext.initial_state(&psi).unwrap();
    let sampler = Sampler::new(ext.system(), &SamplerConfig::new(0, 1)).unwrap();
    for i in 0..200 {
        let mut rng = substream(41, i);
        let mut block_a = psi.clone() * qfpt_core::C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let mut block_b = block_a.clone();
        sampler
            .run(&start, 6, &mut rng, |ev| {
                let m = ev.step.channel;
                block_a = &a.jumps()[m] * no_jump(&a, ev.step.w) * &block_a;
                block_b = &b.jumps()[m] * no_jump(&b, ev.step.w) * &block_b;
                let norm = (block_a.norm_squared() + block_b.norm_squared()).sqrt();
                block_a /= qfpt_core::C64::new(norm, 0.0);
                block_b /= qfpt_core::C64::new(norm, 0.0);
                let (got_a, got_b) = ext.blocks(ev.state);
                let tol = 1e-12;
                assert!((got_a - &block_a).camax() < tol);
                assert!((got_b - &block_b).camax() < tol);
            })
            .unwrap();
    }
}

#[test]
fn identical_dynamics_give_unit_estimator_per_trajectory() {
    let (a, _) = fig5_pair();
    let ext = extend(&a, &a).unwrap();
    let psi: CVector = InitialState::atom_ground().as_pure().unwrap().clone();
    let samples = coherence_samples(&ext, &psi, 5, &SamplerConfig::new(2, 200)).unwrap();
    for row in samples {
        for x in row {
            assert!((x - qfpt_core::C64::new(1.0, 0.0)).norm() < 1e-12);
        }
    }
}

#[test]
fn real_and_imaginary_parts_are_unbiased() {
    let (a, b) = fig5_pair();
    let rho = InitialState::atom_ground();
    let curve = ancilla_echo_curve(&a, &b, &rho, 3, &SamplerConfig::new(6, 20_000)).unwrap();
    for est in curve {
        let exact = loschmidt_echo(&a, &b, &rho, est.k).unwrap().amplitude;
        assert!(
            est.real.within_sigma(exact.re, 3.0),
            "K={} re {:?} vs {}",
            est.k,
            est.real,
            exact.re
        );
        assert!(
            est.imag.within_sigma(exact.im, 3.0),
            "K={} im {:?} vs {}",
            est.k,
            est.imag,
            exact.im
        );
    }
}

#[test]
fn squared_per_trajectory_estimator_is_biased() {
    // Averaging |x|² instead of squaring the mean overshoots by the variance.
    let (a, b) = fig5_pair();
    let rho = InitialState::atom_ground();
    let est = ancilla_estimate_echo(&a, &b, &rho, 2, &SamplerConfig::new(9, 20_000)).unwrap();
    let exact = loschmidt_echo(&a, &b, &rho, 2).unwrap().eta;
    assert!(est.eta.within_sigma(exact, 3.0));
    assert!(
        est.eta_naive > exact + 20.0 * est.eta.stderr,
        "{} vs {exact}",
        est.eta_naive
    );
}

#[test]
fn classical_amplitude_matches_closed_form() {
    let sys = embed_classical(&ClassicalRateMatrix::uniform(2, 1.0).unwrap()).unwrap();
    let pert = apply_scaled_perturbation(&sys, 0.1).unwrap();
    let rho = InitialState::basis(2, 0).unwrap();
    let est = ancilla_estimate_echo(&sys, &pert, &rho, 3, &SamplerConfig::new(12, 20_000)).unwrap();
    let closed = classical_echo_closed_form(0.1, 3).unwrap();
    assert!(
        est.real.within_sigma(closed, 3.0),
        "{:?} vs {closed}",
        est.real
    );
    assert!(est.imag.value.abs() < 1e-12);
}

#[test]
fn estimator_error_scales_as_inverse_root_n() {
    let (a, b) = fig5_pair();
    let rho = InitialState::atom_ground();
    let exact = loschmidt_echo(&a, &b, &rho, 2).unwrap().amplitude;
    let mut errors = Vec::new();
    for (i, n) in [1_000usize, 10_000, 100_000].into_iter().enumerate() {
        let est =
            ancilla_estimate_echo(&a, &b, &rho, 2, &SamplerConfig::new(50 + i as u64, n)).unwrap();
        assert!(est.real.within_sigma(exact.re, 3.0) && est.imag.within_sigma(exact.im, 3.0));
        errors.push(est.real.stderr);
    }
    for pair in errors.windows(2) {
        let ratio = pair[0] / pair[1];
        assert!((ratio / 10f64.sqrt() - 1.0).abs() < 0.15, "ratio {ratio}");
    }
}
