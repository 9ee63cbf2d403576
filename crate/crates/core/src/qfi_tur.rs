//! Quantum Fisher information of the K-jump state and the uncertainty
//! relations it bounds.

use std::fmt;
use std::io::{self, Write};

use rand::Rng;
use rayon::prelude::*;

use crate::config::fmt_f64;
use crate::error::{QfptError, Result};
use crate::linalg::C64;
use crate::liouville::{echo_deficit, fpt_moments, scaled_echo_deficit, StepObservable};
use crate::model::{two_level_atom, InitialState, LindbladSystem};
use crate::rng::substream;
use crate::stats::{Estimate, MomentMethod, MomentResult};
use crate::trajectory::{estimate_observable, SamplerConfig};

/// Relative slack allowed when comparing a precision to its bound.
pub const BOUND_REL_TOL: f64 = 1e-9;
/// Relative change of J under step halving that counts as converged.
pub const QFI_CONVERGENCE_TOL: f64 = 1e-4;
pub const DEFAULT_EPS_FD: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QfiOptions {
    pub eps_fd: f64,
    /// Turn non-convergence into an error.
    pub strict: bool,
}

impl Default for QfiOptions {
    fn default() -> Self {
        Self {
            eps_fd: DEFAULT_EPS_FD,
            strict: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QfiEstimate {
    /// Richardson-extrapolated `J_K(0)`.
    pub value: f64,
    /// Fidelity quotient at `ε = eps_fd`.
    pub coarse: f64,
    /// Fidelity quotient at `ε = eps_fd / 2`.
    pub fine: f64,
    pub converged: bool,
}

/// `1 - |a|` from `z = 1 - a`, without cancellation.
fn one_minus_abs(z: C64) -> f64 {
    let a = C64::new(1.0, 0.0) - z;
    let one_minus_sq = 2.0 * z.re - z.norm_sqr();
    one_minus_sq / (1.0 + a.norm())
}

/// `(8/ε²) [1 - |Tr 𝒵⋆(ε)^K ρ₀|]` for the time-rescaled perturbation.
pub fn fidelity_quotient(
    sys: &LindbladSystem,
    rho0: &InitialState,
    k: usize,
    epsilon: f64,
) -> Result<f64> {
    let deficit = scaled_echo_deficit(sys, rho0, k, epsilon)?;
    Ok(8.0 / (epsilon * epsilon) * one_minus_abs(deficit))
}

/// Quantum Fisher information `J_K(0)` of the time-rescaling family.
pub fn qfi(
    sys: &LindbladSystem,
    rho0: &InitialState,
    k: usize,
    opts: QfiOptions,
) -> Result<QfiEstimate> {
    let eps = opts.eps_fd;
    if !(1e-6..=1e-2).contains(&eps) {
        return Err(QfptError::InvalidParameter {
            name: "eps_fd",
            reason: format!("must lie in [1e-6, 1e-2], got {eps}"),
        });
    }
    let coarse = fidelity_quotient(sys, rho0, k, eps)?;
    let fine = fidelity_quotient(sys, rho0, k, eps / 2.0)?;
    let finer = fidelity_quotient(sys, rho0, k, eps / 4.0)?;
    // The quotient is smooth in ε; two Richardson levels cancel O(ε) and O(ε²).
    let r1 = 2.0 * fine - coarse;
    let r2 = 2.0 * finer - fine;
    let value = (4.0 * r2 - r1) / 3.0;
    let converged = (coarse - fine).abs() <= QFI_CONVERGENCE_TOL * fine.abs();
    if !converged && opts.strict {
        return Err(QfptError::QfiNotConverged { coarse, fine });
    }
    Ok(QfiEstimate {
        value,
        coarse,
        fine,
        converged,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum TurStatus {
    Satisfied,
    Violated,
    /// Means too close to resolve the left-hand side.
    Indeterminate(String),
    /// Echo equals one while the statistics differ.
    Unsatisfiable(String),
}

impl fmt::Display for TurStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Satisfied => f.write_str("satisfied"),
            Self::Violated => f.write_str("violated"),
            Self::Indeterminate(why) => write!(f, "indeterminate ({why})"),
            Self::Unsatisfiable(why) => write!(f, "unsatisfiable configuration ({why})"),
        }
    }
}

/// Chain `var/mean² ≥ 1/I^cm ≥ 1/J` with 3σ slack on the Monte Carlo side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainCheck {
    pub classical_fisher: Estimate,
    pub precision_above_inverse_cfi: bool,
    pub cfi_below_qfi: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TurReport {
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
    pub slack: f64,
    pub status: TurStatus,
    pub k: usize,
    pub method: MomentMethod,
    /// Loschmidt echo (general relation only).
    pub eta: Option<f64>,
    /// `1/K` (first-passage relation only).
    pub bound_classical: Option<f64>,
    pub qfi: Option<QfiEstimate>,
    pub chain: Option<ChainCheck>,
}

impl TurReport {
    pub fn is_violation(&self) -> bool {
        self.status == TurStatus::Violated
    }
}

pub fn bound_holds(lhs: f64, rhs: f64) -> bool {
    lhs >= rhs - BOUND_REL_TOL * rhs.abs().max(1.0)
}

/// Checks `((σ + σ⋆)/(⟨O⟩ - ⟨O⟩⋆))² ≥ 1/(η⁻¹ - 1)` for given statistics of
/// the same observable under both dynamics.
pub fn tur_check_general(
    orig: &LindbladSystem,
    pert: &LindbladSystem,
    rho0: &InitialState,
    k: usize,
    stats: &MomentResult,
    stats_pert: &MomentResult,
) -> Result<TurReport> {
    let deficit = echo_deficit(orig, pert, rho0, k)?;
    let amplitude = C64::new(1.0, 0.0) - deficit;
    let eta = amplitude.norm_sqr();
    // η⁻¹ - 1 = (1 - η)/η with 1 - η = 2 Re z - |z|².
    let one_minus_eta = 2.0 * deficit.re - deficit.norm_sqr();

    let method = if stats.method == MomentMethod::MonteCarlo
        || stats_pert.method == MomentMethod::MonteCarlo
    {
        MomentMethod::MonteCarlo
    } else {
        MomentMethod::Analytic
    };
    let gap = stats.mean - stats_pert.mean;
    let combined_se = stats
        .stderr_mean
        .unwrap_or(0.0)
        .hypot(stats_pert.stderr_mean.unwrap_or(0.0));

    let mut report = TurReport {
        lhs: f64::NAN,
        rhs: f64::NAN,
        satisfied: false,
        slack: f64::NAN,
        status: TurStatus::Satisfied,
        k,
        method,
        eta: Some(eta),
        bound_classical: None,
        qfi: None,
        chain: None,
    };
    if gap == 0.0 || (method == MomentMethod::MonteCarlo && gap.abs() <= 10.0 * combined_se) {
        report.status = TurStatus::Indeterminate(format!(
            "mean difference {gap:.3e} not resolved (combined standard error {combined_se:.3e})"
        ));
        return Ok(report);
    }
    if one_minus_eta <= 0.0 {
        report.status = TurStatus::Unsatisfiable(format!(
            "echo is one (eta = {eta}) but means differ by {gap:.3e}"
        ));
        return Ok(report);
    }
    let lhs = ((stats.std_dev() + stats_pert.std_dev()) / gap).powi(2);
    let rhs = eta / one_minus_eta;
    let satisfied = bound_holds(lhs, rhs);
    report.lhs = lhs;
    report.rhs = rhs;
    report.slack = lhs - rhs;
    report.satisfied = satisfied;
    report.status = if satisfied {
        TurStatus::Satisfied
    } else {
        TurStatus::Violated
    };
    Ok(report)
}

/// Where first-passage moments come from.
#[derive(Debug, Clone, PartialEq)]
pub enum MomentSource {
    Analytic,
    MonteCarlo(SamplerConfig),
}

pub fn first_passage_moments(
    sys: &LindbladSystem,
    rho0: &InitialState,
    k: usize,
    source: &MomentSource,
) -> Result<MomentResult> {
    match source {
        MomentSource::Analytic => fpt_moments(sys, rho0, k, &StepObservable::TotalTime),
        MomentSource::MonteCarlo(cfg) => {
            estimate_observable(sys, rho0, k, |r| r.first_passage_time(), cfg)
        }
    }
}

/// Checks `var(t_K)/⟨t_K⟩² ≥ 1/J_K(0)`, attaching `1/K` and, when a Monte
/// Carlo `I^cm` is supplied, the chain through the classical Fisher information.
pub fn tur_check_fpt(
    sys: &LindbladSystem,
    rho0: &InitialState,
    k: usize,
    source: &MomentSource,
    opts: QfiOptions,
    classical_fisher: Option<Estimate>,
) -> Result<TurReport> {
    let moments = first_passage_moments(sys, rho0, k, source)?;
    let j = qfi(sys, rho0, k, opts)?;
    let lhs = moments.precision();
    let rhs = 1.0 / j.value;
    let satisfied = bound_holds(lhs, rhs);
    let chain = classical_fisher.map(|icm| {
        // Delta-method error of 1/I plus the Monte Carlo error of the precision.
        let inv_sigma = icm.stderr / (icm.value * icm.value);
        let lhs_sigma = precision_stderr(&moments);
        let sigma = inv_sigma.hypot(lhs_sigma);
        ChainCheck {
            classical_fisher: icm,
            precision_above_inverse_cfi: lhs >= 1.0 / icm.value - 3.0 * sigma,
            cfi_below_qfi: icm.value <= j.value + 3.0 * icm.stderr,
        }
    });
    Ok(TurReport {
        lhs,
        rhs,
        satisfied,
        slack: lhs - rhs,
        status: if satisfied {
            TurStatus::Satisfied
        } else {
            TurStatus::Violated
        },
        k,
        method: moments.method,
        eta: None,
        bound_classical: Some(1.0 / k as f64),
        qfi: Some(j),
        chain,
    })
}

/// Standard error of `var/mean²` by the delta method (zero for analytic input).
fn precision_stderr(m: &MomentResult) -> f64 {
    match (m.stderr_mean, m.stderr_variance) {
        (Some(se_mean), Some(se_var)) => {
            let p = m.precision();
            let rel_var = se_var / m.variance.max(f64::MIN_POSITIVE);
            let rel_mean = 2.0 * se_mean / m.mean.abs();
            p * rel_var.hypot(rel_mean)
        }
        _ => 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KappaRow {
    pub kappa: f64,
    pub qfi: f64,
}

/// `J_K(0)` of the driven atom over a grid of decay rates, starting in `|g⟩`.
pub fn sweep_kappa(
    delta: f64,
    omega: f64,
    kappas: &[f64],
    k: usize,
    opts: QfiOptions,
) -> Result<Vec<KappaRow>> {
    if let Some(bad) = kappas.iter().find(|&&x| !(x > 0.0)) {
        return Err(QfptError::InvalidParameter {
            name: "kappa",
            reason: format!("grid values must be positive, got {bad}"),
        });
    }
    let rho0 = InitialState::atom_ground();
    kappas
        .par_iter()
        .map(|&kappa| {
            let atom = two_level_atom(delta, omega, kappa)?;
            Ok(KappaRow {
                kappa,
                qfi: qfi(&atom, &rho0, k, opts)?.value,
            })
        })
        .collect()
}

/// `n` points evenly spaced in log scale over `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

pub fn write_kappa_csv<W: Write>(k: usize, rows: &[KappaRow], mut out: W) -> io::Result<()> {
    writeln!(out, "kappa,K,qfi")?;
    for r in rows {
        writeln!(out, "{},{k},{}", fmt_f64(r.kappa), fmt_f64(r.qfi))?;
    }
    Ok(())
}

/// Parameter box for random atom draws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRanges {
    pub delta: (f64, f64),
    pub omega: (f64, f64),
    pub kappa: (f64, f64),
    /// Inclusive range of jump counts.
    pub k: (usize, usize),
}

impl Default for SweepRanges {
    fn default() -> Self {
        Self {
            delta: (0.1, 3.0),
            omega: (0.1, 3.0),
            kappa: (1.0, 3.0),
            k: (1, 5),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub delta: f64,
    pub omega: f64,
    pub kappa: f64,
    pub k: usize,
    pub mean_fpt: f64,
    pub var_fpt: f64,
    /// `var_fpt / mean_fpt²`.
    pub precision: f64,
    pub qfi: f64,
    pub bound_qfi: f64,
    pub bound_classical: f64,
}

impl SweepRow {
    pub fn for_atom(
        delta: f64,
        omega: f64,
        kappa: f64,
        k: usize,
        opts: QfiOptions,
    ) -> Result<Self> {
        let atom = two_level_atom(delta, omega, kappa)?;
        let rho0 = InitialState::atom_ground();
        let m = fpt_moments(&atom, &rho0, k, &StepObservable::TotalTime)?;
        let j = qfi(&atom, &rho0, k, opts)?.value;
        Ok(Self {
            delta,
            omega,
            kappa,
            k,
            mean_fpt: m.mean,
            var_fpt: m.variance,
            precision: m.precision(),
            qfi: j,
            bound_qfi: 1.0 / j,
            bound_classical: 1.0 / k as f64,
        })
    }
}

/// Seeded random draws of the atom with analytic moments per draw.
pub fn sweep_random(
    n: usize,
    seed: u64,
    ranges: SweepRanges,
    opts: QfiOptions,
) -> Result<Vec<SweepRow>> {
    if n == 0 {
        return Err(QfptError::InvalidParameter {
            name: "n",
            reason: "need at least one draw".into(),
        });
    }
    if ranges.k.0 == 0 || ranges.k.0 > ranges.k.1 {
        return Err(QfptError::InvalidParameter {
            name: "k",
            reason: format!("invalid range {:?}", ranges.k),
        });
    }
    (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(seed, i);
            let mut uniform = |(lo, hi): (f64, f64)| lo + (hi - lo) * rng.random::<f64>();
            let delta = uniform(ranges.delta);
            let omega = uniform(ranges.omega);
            let kappa = uniform(ranges.kappa);
            let k = rng.random_range(ranges.k.0..=ranges.k.1);
            SweepRow::for_atom(delta, omega, kappa, k, opts)
        })
        .collect()
}

pub const SWEEP_CSV_HEADER: &str =
    "delta,omega,kappa,K,mean_fpt,var_fpt,precision,qfi,bound_qfi,bound_classical";

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut out: W) -> io::Result<()> {
    writeln!(out, "{SWEEP_CSV_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            fmt_f64(r.delta),
            fmt_f64(r.omega),
            fmt_f64(r.kappa),
            r.k,
            fmt_f64(r.mean_fpt),
            fmt_f64(r.var_fpt),
            fmt_f64(r.precision),
            fmt_f64(r.qfi),
            fmt_f64(r.bound_qfi),
            fmt_f64(r.bound_classical)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{embed_classical, ClassicalRateMatrix};

    #[test]
    fn classical_qfi_equals_k() {
        let sys = embed_classical(&ClassicalRateMatrix::uniform(3, 1.3).unwrap()).unwrap();
        let rho = InitialState::mixture(vec![0.2, 0.5, 0.3]).unwrap();
        let j = qfi(&sys, &rho, 7, QfiOptions::default()).unwrap();
        assert!((j.value - 7.0).abs() < 1e-6, "{j:?}");
        assert!(j.converged);
    }

    #[test]
    fn eps_out_of_range() {
        let sys = two_level_atom(1.0, 1.0, 2.0).unwrap();
        let opts = QfiOptions {
            eps_fd: 0.1,
            strict: false,
        };
        assert!(qfi(&sys, &InitialState::atom_ground(), 1, opts).is_err());
    }

    #[test]
    fn erlang_equality_is_satisfied() {
        let sys = embed_classical(&ClassicalRateMatrix::uniform(2, 1.0).unwrap()).unwrap();
        let rho = InitialState::mixture(vec![1.0, 0.0]).unwrap();
        let r = tur_check_fpt(
            &sys,
            &rho,
            4,
            &MomentSource::Analytic,
            QfiOptions::default(),
            None,
        )
        .unwrap();
        assert!((r.lhs - 0.25).abs() < 1e-12);
        assert!((r.rhs - 0.25).abs() < 1e-9);
        assert!(r.satisfied, "{r:?}");
    }

    #[test]
    fn identical_dynamics_is_indeterminate() {
        let atom = two_level_atom(1.0, 1.0, 2.0).unwrap();
        let rho = InitialState::atom_ground();
        let m = fpt_moments(&atom, &rho, 3, &StepObservable::TotalTime).unwrap();
        let r = tur_check_general(&atom, &atom, &rho, 3, &m, &m).unwrap();
        assert!(matches!(r.status, TurStatus::Indeterminate(_)));
        assert!(!r.is_violation());
    }

    #[test]
    fn atom_fpt_relation_holds() {
        let atom = two_level_atom(1.0, 1.0, 2.0).unwrap();
        for k in 1..=3 {
            let r = tur_check_fpt(
                &atom,
                &InitialState::atom_ground(),
                k,
                &MomentSource::Analytic,
                QfiOptions::default(),
                None,
            )
            .unwrap();
            assert!(r.satisfied, "K={k}: {r:?}");
        }
    }

    #[test]
    fn sweep_csv_header() {
        let rows = sweep_random(3, 1, SweepRanges::default(), QfiOptions::default()).unwrap();
        let mut buf = Vec::new();
        write_sweep_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), SWEEP_CSV_HEADER);
        assert_eq!(text.lines().count(), 4);
    }
}
