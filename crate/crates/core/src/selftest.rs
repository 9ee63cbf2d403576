//! Fast invariant suite for installation checks.

use std::fmt;

use crate::error::Result;
use crate::linalg::CMatrix;
use crate::liouville::{
    echo_curve, fpt_moments, kron_lift, resolvent, two_sided_map, vec_identity, StepObservable,
};
use crate::model::{
    embed_classical, random_chain, random_system, two_level_atom, ClassicalRateMatrix,
    InitialState, LindbladSystem,
};
use crate::qfi_tur::{qfi, QfiOptions};
use crate::rng::substream;

const SELFTEST_SEED: u64 = 0x5e1f_7e57;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SelftestOptions {
    /// Test hook: builds the jump lift as `L ⊗ L*` instead of `L* ⊗ L`.
    pub corrupt_vec_convention: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelftestReport {
    pub checks: Vec<CheckResult>,
}

impl SelftestReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

impl fmt::Display for SelftestReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let tag = if c.passed { "PASS" } else { "FAIL" };
            writeln!(f, "[{tag}] {}: {}", c.name, c.detail)?;
        }
        Ok(())
    }
}

fn check(name: &'static str, worst: Result<f64>, tol: f64) -> CheckResult {
    match worst {
        Ok(err) => CheckResult {
            name,
            passed: err <= tol,
            detail: format!("max error {err:.3e} (tolerance {tol:.0e})"),
        },
        Err(e) => CheckResult {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

fn test_systems() -> Vec<LindbladSystem> {
    let mut rng = substream(SELFTEST_SEED, 0);
    let mut out = vec![two_level_atom(1.0, 1.0, 2.0).expect("valid atom")];
    for d in 2..=4 {
        for m in 1..=2 {
            out.push(random_system(&mut rng, d, m));
        }
    }
    out
}

fn one_jump_channel(sys: &LindbladSystem, corrupt: bool) -> Result<CMatrix> {
    if !corrupt {
        return Ok(two_sided_map(sys, sys)?.matrix().clone());
    }
    let r = resolvent(sys, sys)?;
    let d2 = sys.dim() * sys.dim();
    let lift = sys.jumps().iter().fold(CMatrix::zeros(d2, d2), |acc, l| {
        acc + kron_lift(l, &l.conjugate())
    });
    Ok(lift * r)
}

/// `max |1ᵀ𝒵 - 1ᵀ|` over the test systems.
fn trace_preservation(systems: &[LindbladSystem], corrupt: bool) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for sys in systems {
        let z = one_jump_channel(sys, corrupt)?;
        let one = vec_identity(sys.dim());
        let defect = z.tr_mul(&one) - &one;
        worst = worst.max(defect.camax());
    }
    Ok(worst)
}

fn echo_identity(systems: &[LindbladSystem]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for sys in systems {
        let rho = InitialState::mixture(vec![1.0 / sys.dim() as f64; sys.dim()])?;
        for e in echo_curve(sys, sys, &rho, 20)? {
            worst = worst.max((e.eta - 1.0).abs());
        }
    }
    Ok(worst)
}

fn erlang_equality() -> Result<f64> {
    let sys = embed_classical(&ClassicalRateMatrix::uniform(2, 1.0)?)?;
    let rho = InitialState::mixture(vec![1.0, 0.0])?;
    let mut worst: f64 = 0.0;
    for k in 1..=10 {
        let m = fpt_moments(&sys, &rho, k, &StepObservable::TotalTime)?;
        worst = worst.max((m.precision() - 1.0 / k as f64).abs());
    }
    Ok(worst)
}

fn classical_qfi() -> Result<f64> {
    let mut rng = substream(SELFTEST_SEED, 1);
    let chain = random_chain(&mut rng, 3, 0.5, 2.0);
    let sys = embed_classical(&chain)?;
    let rho = InitialState::mixture(vec![0.5, 0.3, 0.2])?;
    let mut worst: f64 = 0.0;
    for k in 1..=5 {
        let j = qfi(&sys, &rho, k, QfiOptions::default())?;
        worst = worst.max((j.value - k as f64).abs());
    }
    Ok(worst)
}

pub fn run_selftest(opts: SelftestOptions) -> SelftestReport {
    let systems = test_systems();
    SelftestReport {
        checks: vec![
            check(
                "trace preservation",
                trace_preservation(&systems, opts.corrupt_vec_convention),
                1e-10,
            ),
            check("echo identity", echo_identity(&systems), 1e-9),
            check("Erlang equality", erlang_equality(), 1e-10),
            check("classical J = K", classical_qfi(), 1e-6),
        ],
    }
}

pub fn selftest() -> SelftestReport {
    run_selftest(SelftestOptions::default())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes() {
        let report = selftest();
        assert!(report.all_passed(), "{report}");
    }

    #[test]
    fn corrupted_convention_is_caught() {
        let report = run_selftest(SelftestOptions {
            corrupt_vec_convention: true,
        });
        assert!(!report.checks[0].passed, "{report}");
        assert!(report.checks[1..].iter().all(|c| c.passed));
    }
}
