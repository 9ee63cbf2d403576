//! Quantum Markov chain systems and the two worked model families.
//!
//! Basis conventions: for the driven two-level atom `|e⟩` is index 0 and `|g⟩`
//! is index 1. Classical state `B_i` is basis index `i - 1`, so the API is
//! 0-based throughout. `ħ = 1`.

use std::fmt;

use rand::Rng;

use crate::error::{QfptError, Result};
use crate::linalg::{c, cr, eigenvalues, hermiticity_defect, CMatrix, CVector};

pub const HERMITICITY_TOL: f64 = 1e-12;
/// Required margin of the spectral abscissa of `-i H_eff` below zero.
pub const DECAY_MARGIN: f64 = 1e-10;
pub const NORM_TOL: f64 = 1e-12;

/// Hamiltonian plus jump operators of the principal system.
#[derive(Debug, Clone, PartialEq)]
pub struct LindbladSystem {
    hamiltonian: CMatrix,
    jumps: Vec<CMatrix>,
    labels: Vec<String>,
}

impl LindbladSystem {
    /// Builds a system and enforces every invariant, including decay.
    pub fn new(hamiltonian: CMatrix, jumps: Vec<CMatrix>) -> Result<Self> {
        let sys = Self::from_parts(hamiltonian, jumps)?;
        let report = sys.validate();
        if !report.passed {
            return Err(QfptError::InvalidSystem(report.diagnosis.join("; ")));
        }
        Ok(sys)
    }

    /// Shape checks only. Use [`LindbladSystem::validate`] to inspect the
    /// remaining invariants.
    pub fn from_parts(hamiltonian: CMatrix, jumps: Vec<CMatrix>) -> Result<Self> {
        let d = hamiltonian.nrows();
        if d == 0 || hamiltonian.ncols() != d {
            return Err(QfptError::InvalidSystem(format!(
                "Hamiltonian must be square and nonempty, got {}x{}",
                hamiltonian.nrows(),
                hamiltonian.ncols()
            )));
        }
        for (m, l) in jumps.iter().enumerate() {
            if l.shape() != (d, d) {
                return Err(QfptError::InvalidSystem(format!(
                    "jump operator {m} has shape {:?}, expected ({d}, {d})",
                    l.shape()
                )));
            }
        }
        let labels = (0..jumps.len()).map(|m| format!("L{m}")).collect();
        Ok(Self {
            hamiltonian,
            jumps,
            labels,
        })
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Self {
        assert_eq!(labels.len(), self.jumps.len());
        self.labels = labels;
        self
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.nrows()
    }

    pub fn channel_count(&self) -> usize {
        self.jumps.len()
    }

    pub fn hamiltonian(&self) -> &CMatrix {
        &self.hamiltonian
    }

    pub fn jumps(&self) -> &[CMatrix] {
        &self.jumps
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// `Σ_m L_m† L_m`.
    pub fn jump_rate_operator(&self) -> CMatrix {
        let d = self.dim();
        self.jumps
            .iter()
            .fold(CMatrix::zeros(d, d), |acc, l| acc + l.adjoint() * l)
    }

    /// `H_S - (i/2) Σ_m L_m† L_m`.
    pub fn effective_hamiltonian(&self) -> CMatrix {
        &self.hamiltonian - self.jump_rate_operator() * c(0.0, 0.5)
    }

    pub fn apply_scaled_perturbation(&self, pert: ScaledPerturbation) -> Self {
        let scale = 1.0 + pert.epsilon();
        let root = scale.sqrt();
        Self {
            hamiltonian: &self.hamiltonian * cr(scale),
            jumps: self.jumps.iter().map(|l| l * cr(root)).collect(),
            labels: self.labels.clone(),
        }
    }

    pub fn validate(&self) -> ValidationReport {
        let hermiticity_defect = hermiticity_defect(&self.hamiltonian);
        let mut diagnosis = Vec::new();
        if hermiticity_defect > HERMITICITY_TOL {
            diagnosis.push(format!(
                "Hamiltonian is not Hermitian (defect {hermiticity_defect:.3e})"
            ));
        }
        if self.jumps.is_empty() {
            diagnosis.push("no decay: system has no jump operators".to_string());
        }
        // Eigenvalues μ of H_eff give -iμ for the no-jump generator.
        let spectral_abscissa = match eigenvalues(&self.effective_hamiltonian()) {
            Ok(ev) => ev.iter().map(|z| z.im).fold(f64::NEG_INFINITY, f64::max),
            Err(_) => f64::NAN,
        };
        if !(spectral_abscissa < -DECAY_MARGIN) && !self.jumps.is_empty() {
            diagnosis.push(format!(
                "no decay: spectral abscissa of -iH_eff is {spectral_abscissa:.3e}"
            ));
        }
        ValidationReport {
            hermiticity_defect,
            spectral_abscissa,
            passed: diagnosis.is_empty(),
            diagnosis,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub hermiticity_defect: f64,
    /// Largest real part among eigenvalues of `-i H_eff`.
    pub spectral_abscissa: f64,
    pub passed: bool,
    pub diagnosis: Vec<String>,
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} (hermiticity defect {:.3e}, spectral abscissa {:.6e})",
            if self.passed { "pass" } else { "fail" },
            self.hermiticity_defect,
            self.spectral_abscissa
        )?;
        for d in &self.diagnosis {
            write!(f, "\n  - {d}")?;
        }
        Ok(())
    }
}

/// Time-rescaling perturbation `H → (1+ε)H`, `L → √(1+ε) L`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledPerturbation(f64);

impl ScaledPerturbation {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > -1.0) || !epsilon.is_finite() {
            return Err(QfptError::InvalidParameter {
                name: "epsilon",
                reason: format!("must be finite and > -1, got {epsilon}"),
            });
        }
        Ok(Self(epsilon))
    }

    pub fn epsilon(self) -> f64 {
        self.0
    }
}

pub fn apply_scaled_perturbation(sys: &LindbladSystem, epsilon: f64) -> Result<LindbladSystem> {
    Ok(sys.apply_scaled_perturbation(ScaledPerturbation::new(epsilon)?))
}

/// Random system with a Hermitian Hamiltonian and `channels` dense complex
/// jump operators, entries uniform in `[-1, 1]`. Redraws until the decay
/// condition holds.
pub fn random_system<R: Rng + ?Sized>(rng: &mut R, dim: usize, channels: usize) -> LindbladSystem {
    assert!(
        dim > 0 && channels > 0,
        "random_system needs dim, channels >= 1"
    );
    let entry = |rng: &mut R| c(rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0));
    loop {
        let a = CMatrix::from_fn(dim, dim, |_, _| entry(rng));
        let h = (&a + a.adjoint()) * cr(0.5);
        let jumps = (0..channels)
            .map(|_| CMatrix::from_fn(dim, dim, |_, _| entry(rng)))
            .collect();
        if let Ok(sys) = LindbladSystem::new(h, jumps) {
            return sys;
        }
    }
}

/// Random classical chain on `n_states` states, off-diagonal rates uniform in
/// `[lo, hi]`.
pub fn random_chain<R: Rng + ?Sized>(
    rng: &mut R,
    n_states: usize,
    lo: f64,
    hi: f64,
) -> ClassicalRateMatrix {
    let rates = (0..n_states)
        .map(|to| {
            (0..n_states)
                .map(|from| {
                    if to == from {
                        0.0
                    } else {
                        rng.random_range(lo..=hi)
                    }
                })
                .collect()
        })
        .collect();
    ClassicalRateMatrix::new(rates).expect("positive rates give a valid chain")
}

/// Driven two-level atom with detuning `delta`, Rabi frequency `omega` and
/// decay rate `kappa`.
pub fn two_level_atom(delta: f64, omega: f64, kappa: f64) -> Result<LindbladSystem> {
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(QfptError::InvalidParameter {
            name: "kappa",
            reason: format!("decay rate must be positive, got {kappa}"),
        });
    }
    let h = CMatrix::from_row_slice(
        2,
        2,
        &[cr(delta), cr(omega / 2.0), cr(omega / 2.0), cr(0.0)],
    );
    // |g⟩⟨e|: row g (1), column e (0).
    let mut l = CMatrix::zeros(2, 2);
    l[(1, 0)] = cr(kappa.sqrt());
    Ok(LindbladSystem::new(h, vec![l])?.with_labels(vec!["e->g".to_string()]))
}

/// Classical continuous-time Markov chain; `rates[j][i]` is the rate `γ_ji`
/// of the transition `i → j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalRateMatrix {
    rates: Vec<Vec<f64>>,
}

impl ClassicalRateMatrix {
    pub fn new(rates: Vec<Vec<f64>>) -> Result<Self> {
        let n = rates.len();
        if n == 0 {
            return Err(QfptError::InvalidSystem("chain has no states".into()));
        }
        for (j, row) in rates.iter().enumerate() {
            if row.len() != n {
                return Err(QfptError::InvalidSystem(format!(
                    "rate row {j} has length {}, expected {n}",
                    row.len()
                )));
            }
            for (i, &g) in row.iter().enumerate() {
                if !(g >= 0.0) || !g.is_finite() {
                    return Err(QfptError::InvalidSystem(format!(
                        "rate {i}->{j} must be finite and nonnegative, got {g}"
                    )));
                }
                if i == j && g != 0.0 {
                    return Err(QfptError::InvalidSystem(format!(
                        "diagonal rate at state {i} must be zero"
                    )));
                }
            }
        }
        let chain = Self { rates };
        for i in 0..n {
            if chain.escape_rate(i) <= 0.0 {
                return Err(QfptError::InvalidSystem(format!(
                    "no decay: state {i} has no outgoing transition"
                )));
            }
        }
        Ok(chain)
    }

    /// Every ordered pair `i ≠ j` at the same rate.
    pub fn uniform(n_states: usize, rate: f64) -> Result<Self> {
        let rates = (0..n_states)
            .map(|j| {
                (0..n_states)
                    .map(|i| if i == j { 0.0 } else { rate })
                    .collect()
            })
            .collect();
        Self::new(rates)
    }

    /// Unidirectional ring `i → i+1 (mod n)`.
    pub fn ring(n_states: usize, rate: f64) -> Result<Self> {
        let rates = (0..n_states)
            .map(|j| {
                (0..n_states)
                    .map(|i| {
                        if (i + 1) % n_states == j && i != j {
                            rate
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();
        Self::new(rates)
    }

    pub fn n_states(&self) -> usize {
        self.rates.len()
    }

    /// `γ_ji`, the rate from `from = i` to `to = j`.
    pub fn rate(&self, from: usize, to: usize) -> f64 {
        self.rates[to][from]
    }

    pub fn escape_rate(&self, from: usize) -> f64 {
        (0..self.n_states()).map(|to| self.rate(from, to)).sum()
    }

    /// Jump channels `(from, to)` in the order `embed_classical` emits them.
    pub fn channels(&self) -> Vec<(usize, usize)> {
        let n = self.n_states();
        let mut out = Vec::new();
        for from in 0..n {
            for to in 0..n {
                if to != from && self.rate(from, to) > 0.0 {
                    out.push((from, to));
                }
            }
        }
        out
    }

    /// Embedded jump-chain matrix: `B[j][i] = γ_ji / Σ_k γ_ki`. Columns sum to one.
    pub fn branching_matrix(&self) -> Vec<Vec<f64>> {
        let n = self.n_states();
        (0..n)
            .map(|j| {
                (0..n)
                    .map(|i| {
                        if i == j {
                            0.0
                        } else {
                            self.rate(i, j) / self.escape_rate(i)
                        }
                    })
                    .collect()
            })
            .collect()
    }
}

/// Quantum emulation of a classical chain: `H_S = 0`, `L_ji = √γ_ji |j⟩⟨i|`.
pub fn embed_classical(chain: &ClassicalRateMatrix) -> Result<LindbladSystem> {
    let n = chain.n_states();
    let channels = chain.channels();
    let jumps = channels
        .iter()
        .map(|&(from, to)| {
            let mut l = CMatrix::zeros(n, n);
            l[(to, from)] = cr(chain.rate(from, to).sqrt());
            l
        })
        .collect();
    let labels = channels
        .iter()
        .map(|&(from, to)| format!("{from}->{to}"))
        .collect();
    Ok(LindbladSystem::new(CMatrix::zeros(n, n), jumps)?.with_labels(labels))
}

/// Initial state of the principal system.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    Pure(CVector),
    /// Diagonal mixture over basis states.
    Mixture(Vec<f64>),
}

impl InitialState {
    pub fn pure(psi: CVector) -> Result<Self> {
        let norm = psi.norm();
        if psi.is_empty() || (norm - 1.0).abs() > NORM_TOL {
            return Err(QfptError::InvalidState(format!(
                "pure state must have unit norm, got {norm}"
            )));
        }
        Ok(Self::Pure(psi))
    }

    /// Normalizes before checking.
    pub fn pure_normalized(psi: CVector) -> Result<Self> {
        let norm = psi.norm();
        if !(norm > 0.0) {
            return Err(QfptError::InvalidState("zero vector".into()));
        }
        Self::pure(psi.unscale(norm))
    }

    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(QfptError::InvalidState(format!(
                "basis index {index} out of range for dimension {dim}"
            )));
        }
        let mut psi = CVector::zeros(dim);
        psi[index] = cr(1.0);
        Ok(Self::Pure(psi))
    }

    /// Ground state `|g⟩` of the two-level atom.
    pub fn atom_ground() -> Self {
        Self::basis(2, 1).expect("index 1 in dimension 2")
    }

    pub fn mixture(probabilities: Vec<f64>) -> Result<Self> {
        if probabilities.is_empty() || probabilities.iter().any(|&p| !(p >= 0.0)) {
            return Err(QfptError::InvalidState(
                "mixture probabilities must be nonnegative".into(),
            ));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > NORM_TOL {
            return Err(QfptError::InvalidState(format!(
                "mixture probabilities sum to {total}, expected 1"
            )));
        }
        Ok(Self::Mixture(probabilities))
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Pure(psi) => psi.len(),
            Self::Mixture(p) => p.len(),
        }
    }

    pub fn density(&self) -> CMatrix {
        match self {
            Self::Pure(psi) => psi * psi.adjoint(),
            Self::Mixture(p) => {
                CMatrix::from_diagonal(&CVector::from_iterator(p.len(), p.iter().map(|&x| cr(x))))
            }
        }
    }

    pub fn as_pure(&self) -> Option<&CVector> {
        match self {
            Self::Pure(psi) => Some(psi),
            Self::Mixture(_) => None,
        }
    }

    pub fn check_dim(&self, dim: usize) -> Result<()> {
        if self.dim() != dim {
            return Err(QfptError::Mismatch(format!(
                "initial state has dimension {}, system has {dim}",
                self.dim()
            )));
        }
        Ok(())
    }
}
