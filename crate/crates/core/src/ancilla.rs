//! Echo estimation from the coherence of an ancilla qubit.
//!
//! The system is doubled into two ancilla sectors, `|𝔬⟩` evolving under the
//! original dynamics and `|𝔩⟩` under the perturbed one, with shared jump
//! records. Starting from `(|𝔬⟩ + |𝔩⟩)/√2 ⊗ ψ`, the off-diagonal ancilla
//! element after K jumps averages to `Tr[𝒵⋆^K ρ₀]/2`.

use std::io::{self, Write};

use crate::config::fmt_f64;
use crate::error::{QfptError, Result};
use crate::linalg::{CMatrix, CVector, C64};
use crate::liouville::echo_curve;
use crate::model::{InitialState, LindbladSystem};
use crate::stats::{jackknife_of_mean, mean, Estimate};
use crate::trajectory::{map_trajectories, SamplerConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedSystem {
    base_dim: usize,
    system: LindbladSystem,
}

impl ExtendedSystem {
    pub fn base_dim(&self) -> usize {
        self.base_dim
    }

    /// The `2d`-dimensional doubled system; block 0 is the original.
    pub fn system(&self) -> &LindbladSystem {
        &self.system
    }

    /// `(|𝔬⟩ + |𝔩⟩)/√2 ⊗ ψ`.
    pub fn initial_state(&self, psi: &CVector) -> Result<CVector> {
        if psi.len() != self.base_dim {
            return Err(QfptError::Mismatch(format!(
                "state has dimension {}, base system has {}",
                psi.len(),
                self.base_dim
            )));
        }
        let d = self.base_dim;
        let mut out = CVector::zeros(2 * d);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        out.rows_mut(0, d).copy_from(&(psi * C64::new(s, 0.0)));
        out.rows_mut(d, d).copy_from(&(psi * C64::new(s, 0.0)));
        Ok(out)
    }

    /// `(⟨𝔬|φ⟩, ⟨𝔩|φ⟩)`.
    pub fn blocks(&self, phi: &CVector) -> (CVector, CVector) {
        let d = self.base_dim;
        (phi.rows(0, d).into_owned(), phi.rows(d, d).into_owned())
    }

    /// Twice the ancilla coherence `Tr_S⟨𝔬|φ⟩⟨φ|𝔩⟩` of a normalized state.
    pub fn coherence(&self, phi: &CVector) -> C64 {
        let (a, b) = self.blocks(phi);
        b.dotc(&a) * 2.0
    }
}

fn block_diag(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let d = a.nrows();
    let mut out = CMatrix::zeros(2 * d, 2 * d);
    out.view_mut((0, 0), (d, d)).copy_from(a);
    out.view_mut((d, d), (d, d)).copy_from(b);
    out
}

/// Block-diagonal doubling `H̃ = diag(H, H⋆)`, `L̃_m = diag(L_m, L⋆,m)`.
pub fn extend(orig: &LindbladSystem, pert: &LindbladSystem) -> Result<ExtendedSystem> {
    if orig.dim() != pert.dim() || orig.channel_count() != pert.channel_count() {
        return Err(QfptError::Mismatch(format!(
            "original has d={}, M={}; perturbed has d={}, M={}",
            orig.dim(),
            orig.channel_count(),
            pert.dim(),
            pert.channel_count()
        )));
    }
    let hamiltonian = block_diag(orig.hamiltonian(), pert.hamiltonian());
    let jumps = orig
        .jumps()
        .iter()
        .zip(pert.jumps())
        .map(|(l, lp)| block_diag(l, lp))
        .collect();
    let system = LindbladSystem::new(hamiltonian, jumps)?.with_labels(orig.labels().to_vec());
    Ok(ExtendedSystem {
        base_dim: orig.dim(),
        system,
    })
}

/// Ancilla estimate of the echo after a fixed number of jumps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AncillaEstimate {
    pub k: usize,
    pub n_trials: usize,
    /// Mean of `2⟨φ_𝔩|φ_𝔬⟩` over trajectories.
    pub amplitude: C64,
    pub real: Estimate,
    pub imag: Estimate,
    /// `|amplitude|²`, jackknife error.
    pub eta: Estimate,
    /// Mean of the per-trajectory `|x|²`; biased upward, kept for comparison.
    pub eta_naive: f64,
}

fn summarize(k: usize, samples: &[C64]) -> Result<AncillaEstimate> {
    let total: C64 = crate::linalg::pairwise_sum_c(samples);
    let amplitude = total / samples.len() as f64;
    let re: Vec<f64> = samples.iter().map(|x| x.re).collect();
    let im: Vec<f64> = samples.iter().map(|x| x.im).collect();
    let sq: Vec<f64> = samples.iter().map(|x| x.norm_sqr()).collect();
    Ok(AncillaEstimate {
        k,
        n_trials: samples.len(),
        amplitude,
        real: jackknife_of_mean(&re, total.re, |m| m)?,
        imag: jackknife_of_mean(&im, total.im, |m| m)?,
        eta: jackknife_of_mean(samples, total, |m: C64| m.norm_sqr())?,
        eta_naive: mean(&sq),
    })
}

/// Per-trajectory coherence after each of the first `k_max` jumps, in
/// trajectory order.
pub fn coherence_samples(
    ext: &ExtendedSystem,
    psi: &CVector,
    k_max: usize,
    cfg: &SamplerConfig,
) -> Result<Vec<Vec<C64>>> {
    if k_max == 0 {
        return Err(QfptError::InvalidParameter {
            name: "k",
            reason: "jump count must be at least 1".into(),
        });
    }
    if cfg.n_traj < 2 {
        return Err(QfptError::TooFewSamples(cfg.n_traj));
    }
    let start = InitialState::Pure(ext.initial_state(psi)?);
    map_trajectories(ext.system(), &start, cfg, |sampler, rng, phi0, _| {
        let mut values = Vec::with_capacity(k_max);
        sampler.run(phi0, k_max, rng, |ev| values.push(ext.coherence(ev.state)))?;
        Ok(values)
    })
}

fn pure_vector(rho0: &InitialState) -> Result<&CVector> {
    rho0.as_pure().ok_or_else(|| {
        QfptError::InvalidState("the ancilla protocol needs a pure initial state".into())
    })
}

pub fn ancilla_estimate_echo(
    orig: &LindbladSystem,
    pert: &LindbladSystem,
    rho0: &InitialState,
    k: usize,
    cfg: &SamplerConfig,
) -> Result<AncillaEstimate> {
    let mut curve = ancilla_echo_curve(orig, pert, rho0, k, cfg)?;
    Ok(curve.pop().expect("k >= 1"))
}

/// Estimates for every `K = 1..=k_max`, all read off the same trajectories.
pub fn ancilla_echo_curve(
    orig: &LindbladSystem,
    pert: &LindbladSystem,
    rho0: &InitialState,
    k_max: usize,
    cfg: &SamplerConfig,
) -> Result<Vec<AncillaEstimate>> {
    let psi = pure_vector(rho0)?;
    let ext = extend(orig, pert)?;
    let samples = coherence_samples(&ext, psi, k_max, cfg)?;
    (0..k_max)
        .map(|i| {
            let column: Vec<C64> = samples.iter().map(|row| row[i]).collect();
            summarize(i + 1, &column)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AncillaRow {
    pub k: usize,
    pub eta_analytic: f64,
    pub eta_ancilla: f64,
    pub stderr: f64,
    pub n_trials: usize,
}

/// Ancilla estimates side by side with the transfer-matrix echo.
pub fn ancilla_table(
    orig: &LindbladSystem,
    pert: &LindbladSystem,
    rho0: &InitialState,
    k_max: usize,
    cfg: &SamplerConfig,
) -> Result<Vec<AncillaRow>> {
    let analytic = echo_curve(orig, pert, rho0, k_max)?;
    let estimates = ancilla_echo_curve(orig, pert, rho0, k_max, cfg)?;
    Ok(analytic
        .iter()
        .zip(&estimates)
        .map(|(a, e)| AncillaRow {
            k: e.k,
            eta_analytic: a.eta,
            eta_ancilla: e.eta.value,
            stderr: e.eta.stderr,
            n_trials: e.n_trials,
        })
        .collect())
}

pub fn write_ancilla_csv<W: Write>(rows: &[AncillaRow], mut out: W) -> io::Result<()> {
    writeln!(out, "K,eta_analytic,eta_ancilla,stderr,n_trials")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.k,
            fmt_f64(r.eta_analytic),
            fmt_f64(r.eta_ancilla),
            fmt_f64(r.stderr),
            r.n_trials
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::two_level_atom;

    #[test]
    fn extension_is_block_diagonal() {
        let a = two_level_atom(1.0, 1.0, 2.0).unwrap();
        let b = two_level_atom(0.4, 1.2, 0.5).unwrap();
        let ext = extend(&a, &b).unwrap();
        let h = ext.system().effective_hamiltonian();
        assert_eq!(
            h.view((0, 2), (2, 2)).iter().map(|z| z.norm()).sum::<f64>(),
            0.0
        );
        assert_eq!(
            h.view((2, 0), (2, 2)).iter().map(|z| z.norm()).sum::<f64>(),
            0.0
        );
        let diff = h.view((0, 0), (2, 2)) - a.effective_hamiltonian();
        assert!(diff.norm() < 1e-15);
        let diff = h.view((2, 2), (2, 2)) - b.effective_hamiltonian();
        assert!(diff.norm() < 1e-15);
    }

    #[test]
    fn identical_blocks_give_unit_coherence() {
        let a = two_level_atom(1.0, 1.0, 2.0).unwrap();
        let est = ancilla_estimate_echo(
            &a,
            &a,
            &InitialState::atom_ground(),
            4,
            &SamplerConfig::new(3, 50),
        )
        .unwrap();
        assert!((est.amplitude.re - 1.0).abs() < 1e-10);
        assert!(est.amplitude.im.abs() < 1e-10);
        assert!(est.eta.stderr < 1e-9);
    }

    #[test]
    fn rejects_mixed_state() {
        let a = two_level_atom(1.0, 1.0, 2.0).unwrap();
        let rho = InitialState::mixture(vec![0.5, 0.5]).unwrap();
        assert!(ancilla_estimate_echo(&a, &a, &rho, 1, &SamplerConfig::new(1, 10)).is_err());
    }
}
