//! Quantum Markov chains stopped after a fixed number of jumps.
//!
//! The crate computes the Loschmidt echo between an original and a perturbed
//! Lindblad dynamics in Liouville space, the quantum Fisher information of the
//! time-rescaling family, exact first-passage moments, and checks the
//! resulting uncertainty relations against quantum-jump Monte Carlo and the
//! ancilla-qubit readout of the echo.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub mod ancilla;
pub mod config;
pub mod error;
pub mod linalg;
pub mod liouville;
pub mod model;
pub mod qfi_tur;
pub mod rng;
pub mod selftest;
pub mod stats;
pub mod trajectory;

pub use ancilla::{
    ancilla_echo_curve, ancilla_estimate_echo, ancilla_table, extend, AncillaEstimate, AncillaRow,
    ExtendedSystem,
};
pub use config::{InitialSpec, SystemSpec};
pub use error::{QfptError, Result};
pub use linalg::{CMatrix, CVector, C64};
pub use liouville::{
    classical_bound_limit, classical_echo_closed_form, echo_curve, echo_deficit, fpt_moments,
    jump_channel, loschmidt_echo, moment_superops, scaled_echo_deficit, two_sided_map, EchoReport,
    StepObservable, SuperOp,
};
pub use model::{
    apply_scaled_perturbation, embed_classical, random_chain, random_system, two_level_atom,
    ClassicalRateMatrix, InitialState, LindbladSystem, ScaledPerturbation, ValidationReport,
};
pub use qfi_tur::{
    qfi, sweep_kappa, sweep_random, tur_check_fpt, tur_check_general, MomentSource, QfiEstimate,
    QfiOptions, SweepRanges, SweepRow, TurReport, TurStatus,
};
pub use stats::{Estimate, MomentMethod, MomentResult};
pub use trajectory::{
    classical_fisher_cm, estimate_observable, sample_trajectories, FisherEstimate, SamplerConfig,
    TrajectoryRecord,
};
