//! Liouville-space superoperators for the K-jump process.
//!
//! Every waiting-time integral is done in closed form. With
//! `A = i (H⋆_eff^* ⊗ I) - i (I ⊗ H_eff)` Hurwitz,
//!
//! ```text
//! ∫ e^{Aw} dw = -A^{-1},   ∫ w e^{Aw} dw = A^{-2},   ∫ w² e^{Aw} dw = -2 A^{-3}
//! ```
//!
//! so the per-jump maps are jump lifts `L⋆,m^* ⊗ L_m` times powers of the
//! resolvent `R = -A^{-1}`.

mod expm;
mod vectorize;

pub use expm::{expm, expm_pade};
pub use vectorize::{kron_lift, unvec, vec, vec_identity};

use crate::error::{QfptError, Result};
use crate::linalg::{c, cr, eigenvalues, identity, inverse_checked, CMatrix, CVector, C64};
use crate::model::{InitialState, LindbladSystem, ScaledPerturbation};
use crate::stats::MomentResult;

/// Required margin of the resolvent generator's spectral abscissa below zero.
pub const HURWITZ_MARGIN: f64 = 1e-10;

/// A `d² x d²` matrix acting on column-stacked operators.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperOp {
    dim: usize,
    matrix: CMatrix,
}

impl SuperOp {
    pub fn from_matrix(dim: usize, matrix: CMatrix) -> Self {
        assert_eq!(matrix.shape(), (dim * dim, dim * dim));
        Self { dim, matrix }
    }

    /// Hilbert-space dimension `d`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn apply(&self, v: &CVector) -> CVector {
        &self.matrix * v
    }

    pub fn apply_operator(&self, rho: &CMatrix) -> CMatrix {
        unvec(&self.apply(&vec(rho)))
    }

    /// Composite of the trace functional with this map, as a row vector.
    pub fn trace_functional(&self) -> CVector {
        self.matrix.tr_mul(&vec_identity(self.dim))
    }
}

/// `A = i (H⋆_eff^* ⊗ I) - i (I ⊗ H_eff)`.
pub fn resolvent_generator(orig: &LindbladSystem, pert: &LindbladSystem) -> CMatrix {
    let d = orig.dim();
    let eye = identity(d);
    kron_lift(&pert.effective_hamiltonian().conjugate(), &eye) * c(0.0, 1.0)
        - kron_lift(&eye, &orig.effective_hamiltonian()) * c(0.0, 1.0)
}

/// Spectral abscissa of the Kronecker-sum generator, from the constituent
/// spectra: `max Im λ⋆ + max Im λ`.
pub fn resolvent_abscissa(orig: &LindbladSystem, pert: &LindbladSystem) -> Result<f64> {
    let top = |m: &CMatrix| -> Result<f64> {
        Ok(eigenvalues(m)?
            .iter()
            .map(|z| z.im)
            .fold(f64::NEG_INFINITY, f64::max))
    };
    Ok(top(&pert.effective_hamiltonian())? + top(&orig.effective_hamiltonian())?)
}

fn check_pair(orig: &LindbladSystem, pert: &LindbladSystem) -> Result<()> {
    if orig.dim() != pert.dim() {
        return Err(QfptError::Mismatch(format!(
            "dimensions differ: {} vs {}",
            orig.dim(),
            pert.dim()
        )));
    }
    if orig.channel_count() != pert.channel_count() {
        return Err(QfptError::Mismatch(format!(
            "channel counts differ: {} vs {}",
            orig.channel_count(),
            pert.channel_count()
        )));
    }
    Ok(())
}

/// `R = -A^{-1}` after verifying `A` is Hurwitz.
pub(crate) fn resolvent(orig: &LindbladSystem, pert: &LindbladSystem) -> Result<CMatrix> {
    let abscissa = resolvent_abscissa(orig, pert)?;
    if !(abscissa < -HURWITZ_MARGIN) {
        return Err(QfptError::NotHurwitz { abscissa });
    }
    Ok(-inverse_checked(&resolvent_generator(orig, pert))?)
}

fn jump_lift_sum(orig: &LindbladSystem, pert: &LindbladSystem) -> CMatrix {
    let d2 = orig.dim() * orig.dim();
    orig.jumps()
        .iter()
        .zip(pert.jumps())
        .fold(CMatrix::zeros(d2, d2), |acc, (l, lp)| {
            acc + kron_lift(&lp.conjugate(), l)
        })
}

/// Liouville matrix of `ρ ↦ Σ_m ∫ dw Y(w,m) ρ Y⋆†(w,m)`. Channels are matched
/// by index. With `pert == orig` this is the trace-preserving one-jump channel.
pub fn two_sided_map(orig: &LindbladSystem, pert: &LindbladSystem) -> Result<SuperOp> {
    check_pair(orig, pert)?;
    let r = resolvent(orig, pert)?;
    Ok(SuperOp::from_matrix(
        orig.dim(),
        jump_lift_sum(orig, pert) * r,
    ))
}

/// The one-jump channel `𝒵` of a single system.
pub fn jump_channel(sys: &LindbladSystem) -> Result<SuperOp> {
    two_sided_map(sys, sys)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EchoReport {
    /// `Tr[𝒵⋆^K(ρ₀)]`.
    pub amplitude: C64,
    /// `|amplitude|²`.
    pub eta: f64,
    pub k: usize,
}

impl EchoReport {
    fn new(amplitude: C64, k: usize) -> Self {
        Self {
            amplitude,
            eta: amplitude.norm_sqr(),
            k,
        }
    }
}

/// Loschmidt echo after `k` jumps, by repeated matrix-vector products.
pub fn loschmidt_echo(
    orig: &LindbladSystem,
    pert: &LindbladSystem,
    rho0: &InitialState,
    k: usize,
) -> Result<EchoReport> {
    let curve = echo_curve(orig, pert, rho0, k)?;
    Ok(*curve.last().expect("k >= 1"))
}

/// Echo reports for every jump count `1..=k_max`.
pub fn echo_curve(
    orig: &LindbladSystem,
    pert: &LindbladSystem,
    rho0: &InitialState,
    k_max: usize,
) -> Result<Vec<EchoReport>> {
    check_k(k_max)?;
    rho0.check_dim(orig.dim())?;
    let z = two_sided_map(orig, pert)?;
    let trace = vec_identity(orig.dim());
    let mut v = vec(&rho0.density());
    let mut out = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        v = z.apply(&v);
        out.push(EchoReport::new(trace.dot(&v), k));
    }
    Ok(out)
}

/// `1 - Tr[𝒵⋆^K(ρ₀)]` without cancellation.
///
/// Uses `1ᵀ 𝒵 = 1ᵀ` to telescope `1ᵀ(𝒵^K - 𝒵⋆^K) ρ = Σ_i 1ᵀ (𝒵 - 𝒵⋆) 𝒵⋆^{i-1} ρ`,
/// and forms `𝒵 - 𝒵⋆` from the differences of the generators so that it keeps
/// full relative accuracy when the two systems are close.
pub fn echo_deficit(
    orig: &LindbladSystem,
    pert: &LindbladSystem,
    rho0: &InitialState,
    k: usize,
) -> Result<C64> {
    check_pair(orig, pert)?;
    let heff_diff = orig.effective_hamiltonian() - pert.effective_hamiltonian();
    let jump_diffs: Vec<CMatrix> = orig
        .jumps()
        .iter()
        .zip(pert.jumps())
        .map(|(l, lp)| l - lp)
        .collect();
    deficit_from_differences(orig, pert, &heff_diff, &jump_diffs, rho0, k)
}

/// [`echo_deficit`] against `sys` rescaled by `1 + epsilon`.
///
/// The generator differences `-ε H_eff` and `(1 - √(1+ε)) L` are formed
/// directly, so the result keeps full relative accuracy as `ε → 0`.
pub fn scaled_echo_deficit(
    sys: &LindbladSystem,
    rho0: &InitialState,
    k: usize,
    epsilon: f64,
) -> Result<C64> {
    let pert = sys.apply_scaled_perturbation(ScaledPerturbation::new(epsilon)?);
    let heff_diff = sys.effective_hamiltonian() * cr(-epsilon);
    let jump_factor = -epsilon / (1.0 + (1.0 + epsilon).sqrt());
    let jump_diffs: Vec<CMatrix> = sys.jumps().iter().map(|l| l * cr(jump_factor)).collect();
    deficit_from_differences(sys, &pert, &heff_diff, &jump_diffs, rho0, k)
}

fn deficit_from_differences(
    orig: &LindbladSystem,
    pert: &LindbladSystem,
    heff_diff: &CMatrix,
    jump_diffs: &[CMatrix],
    rho0: &InitialState,
    k: usize,
) -> Result<C64> {
    check_k(k)?;
    rho0.check_dim(orig.dim())?;
    let r0 = resolvent(orig, orig)?;
    let r_star = resolvent(orig, pert)?;
    let d = orig.dim();
    let d2 = d * d;
    let eye = identity(d);

    // R0 - R⋆ = A⋆^{-1} (A0 - A⋆) A0^{-1} = R⋆ (A0 - A⋆) R0
    let gen_diff = kron_lift(&heff_diff.conjugate(), &eye) * c(0.0, 1.0);
    let r_diff = &r_star * gen_diff * &r0;

    let mut lift_diff = CMatrix::zeros(d2, d2);
    let mut lift_star = CMatrix::zeros(d2, d2);
    for ((l, lp), dl) in orig.jumps().iter().zip(pert.jumps()).zip(jump_diffs) {
        lift_diff += kron_lift(&dl.conjugate(), l);
        lift_star += kron_lift(&lp.conjugate(), l);
    }
    let diff = lift_diff * &r0 + &lift_star * r_diff;
    let z_star = lift_star * r_star;

    let row = diff.tr_mul(&vec_identity(d));
    let mut v = vec(&rho0.density());
    let mut total = C64::new(0.0, 0.0);
    for _ in 0..k {
        total += row.dot(&v);
        v = &z_star * v;
    }
    Ok(total)
}

/// `∫ w Y^*⊗Y dw` and `∫ w² Y^*⊗Y dw` summed over channels.
pub fn moment_superops(sys: &LindbladSystem) -> Result<(SuperOp, SuperOp)> {
    let r = resolvent(sys, sys)?;
    let lifts = jump_lift_sum(sys, sys);
    let r2 = &r * &r;
    let m1 = &lifts * &r2;
    let m2 = lifts * (r2 * r) * cr(2.0);
    Ok((
        SuperOp::from_matrix(sys.dim(), m1),
        SuperOp::from_matrix(sys.dim(), m2),
    ))
}

/// Per-step additive observable `h(w, m) = Σ_i g(w_i, m_i)`.
#[derive(Debug, Clone, PartialEq)]
pub enum StepObservable {
    /// `g = w`; the sum is the first-passage time `t_K`.
    TotalTime,
    /// `g = 1` when the channel is in the set.
    ChannelCount(Vec<usize>),
    /// `g = offset[m] + slope[m] * w`.
    Affine { offset: Vec<f64>, slope: Vec<f64> },
}

impl StepObservable {
    /// `(a_m, b_m)` per channel.
    pub fn coefficients(&self, channels: usize) -> Result<Vec<(f64, f64)>> {
        match self {
            Self::TotalTime => Ok(vec![(0.0, 1.0); channels]),
            Self::ChannelCount(set) => {
                if let Some(bad) = set.iter().find(|&&m| m >= channels) {
                    return Err(QfptError::UnsupportedObservable(format!(
                        "channel {bad} out of range for {channels} channels"
                    )));
                }
                Ok((0..channels)
                    .map(|m| (if set.contains(&m) { 1.0 } else { 0.0 }, 0.0))
                    .collect())
            }
            Self::Affine { offset, slope } => {
                if offset.len() != channels || slope.len() != channels {
                    return Err(QfptError::UnsupportedObservable(format!(
                        "affine observable needs {channels} coefficients per term, got {} and {}",
                        offset.len(),
                        slope.len()
                    )));
                }
                Ok(offset.iter().copied().zip(slope.iter().copied()).collect())
            }
        }
    }

    /// Evaluates `g(w, m)`.
    pub fn step_value(&self, w: f64, m: usize) -> f64 {
        match self {
            Self::TotalTime => w,
            Self::ChannelCount(set) => {
                if set.contains(&m) {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Affine { offset, slope } => offset[m] + slope[m] * w,
        }
    }
}

/// Exact mean and variance of a per-step additive observable after `k` jumps.
pub fn fpt_moments(
    sys: &LindbladSystem,
    rho0: &InitialState,
    k: usize,
    observable: &StepObservable,
) -> Result<MomentResult> {
    check_k(k)?;
    rho0.check_dim(sys.dim())?;
    let coeffs = observable.coefficients(sys.channel_count())?;
    let d = sys.dim();
    let d2 = d * d;
    let r = resolvent(sys, sys)?;
    let r2 = &r * &r;
    let r3 = &r2 * &r;

    let mut z = CMatrix::zeros(d2, d2);
    let mut g1 = CMatrix::zeros(d2, d2);
    let mut g2 = CMatrix::zeros(d2, d2);
    for (l, &(a, b)) in sys.jumps().iter().zip(&coeffs) {
        let lift = kron_lift(&l.conjugate(), l);
        z += &lift * &r;
        let first = &r * cr(a) + &r2 * cr(b);
        let second = &r * cr(a * a) + &r2 * cr(2.0 * a * b) + &r3 * cr(2.0 * b * b);
        g1 += &lift * first;
        g2 += lift * second;
    }

    // forward[i] = 𝒵^i ρ, backward[i] = 1ᵀ 𝒵^{k-1-i} (0-based step i).
    let mut forward = Vec::with_capacity(k);
    let mut v = vec(&rho0.density());
    for _ in 0..k {
        forward.push(v.clone());
        v = &z * v;
    }
    let mut backward = vec![CVector::zeros(d2); k];
    let mut u = vec_identity(d);
    for i in (0..k).rev() {
        backward[i] = u.clone();
        u = z.tr_mul(&u);
    }

    let mut mean = C64::new(0.0, 0.0);
    let mut second = C64::new(0.0, 0.0);
    // carry = Σ_{i<j} 𝒵^{j-i-1} G1 𝒵^{i} ρ
    let mut carry = CVector::zeros(d2);
    for j in 0..k {
        let g1v = &g1 * &forward[j];
        mean += backward[j].dot(&g1v);
        second += backward[j].dot(&(&g2 * &forward[j]));
        second += backward[j].dot(&(&g1 * &carry)) * 2.0;
        carry = &z * carry + g1v;
    }
    MomentResult::analytic(mean.re, second.re)
}

/// `(2√(1+ε)/(2+ε))^K`, the echo amplitude of every ε-scaled classical chain.
pub fn classical_echo_closed_form(epsilon: f64, k: usize) -> Result<f64> {
    if !(epsilon > -1.0) {
        return Err(QfptError::InvalidParameter {
            name: "epsilon",
            reason: format!("must be > -1, got {epsilon}"),
        });
    }
    Ok((2.0 * (1.0 + epsilon).sqrt() / (2.0 + epsilon)).powi(k as i32))
}

/// Pre-limit classical bound `1 / { ((ε+2)/ε)² [a^{-2K} - 1] }`; tends to `1/K`.
pub fn classical_bound_limit(epsilon: f64, k: usize) -> Result<f64> {
    if epsilon == 0.0 {
        return Err(QfptError::InvalidParameter {
            name: "epsilon",
            reason: "must be nonzero".into(),
        });
    }
    let base = 2.0 * (1.0 + epsilon).sqrt() / (2.0 + epsilon);
    if !(epsilon > -1.0) {
        return Err(QfptError::InvalidParameter {
            name: "epsilon",
            reason: format!("must be > -1, got {epsilon}"),
        });
    }
    // a^{-2K} - 1 = expm1(-2K ln a), kept accurate for small ε.
    let excess = (-2.0 * k as f64 * base.ln()).exp_m1();
    let prefactor = ((epsilon + 2.0) / epsilon).powi(2);
    Ok(1.0 / (prefactor * excess))
}

fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        return Err(QfptError::InvalidParameter {
            name: "k",
            reason: "jump count must be at least 1".into(),
        });
    }
    Ok(())
}
