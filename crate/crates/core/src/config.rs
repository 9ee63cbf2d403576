//! Serializable descriptions of systems and initial states.

use serde::{Deserialize, Serialize};

use crate::error::{QfptError, Result};
use crate::linalg::{CMatrix, CVector, C64};
use crate::model::{
    embed_classical, two_level_atom, ClassicalRateMatrix, InitialState, LindbladSystem,
};

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Rows of `[re, im]` pairs.
pub type MatrixSpec = Vec<Vec<[f64; 2]>>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomSpec {
    pub delta: f64,
    pub omega: f64,
    pub kappa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassicalSpec {
    /// `rates[to][from]`.
    pub rates: Vec<Vec<f64>>,
}

/// A system given by a factory shorthand or by explicit matrices.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atom: Option<AtomSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classical: Option<ClassicalSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hamiltonian: Option<MatrixSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jumps: Option<Vec<MatrixSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

fn config_err(msg: impl Into<String>) -> QfptError {
    QfptError::Config(msg.into())
}

fn matrix_from_spec(spec: &MatrixSpec, dim: usize, what: &str) -> Result<CMatrix> {
    if spec.len() != dim || spec.iter().any(|row| row.len() != dim) {
        return Err(config_err(format!("{what} must be {dim}x{dim}")));
    }
    Ok(CMatrix::from_fn(dim, dim, |i, j| {
        let [re, im] = spec[i][j];
        C64::new(re, im)
    }))
}

fn matrix_to_spec(m: &CMatrix) -> MatrixSpec {
    (0..m.nrows())
        .map(|i| {
            (0..m.ncols())
                .map(|j| [m[(i, j)].re, m[(i, j)].im])
                .collect()
        })
        .collect()
}

impl SystemSpec {
    pub fn atom(delta: f64, omega: f64, kappa: f64) -> Self {
        Self {
            atom: Some(AtomSpec {
                delta,
                omega,
                kappa,
            }),
            ..Self::default()
        }
    }

    /// Explicit-matrix description of `sys`.
    pub fn explicit(sys: &LindbladSystem) -> Self {
        Self {
            dim: Some(sys.dim()),
            hamiltonian: Some(matrix_to_spec(sys.hamiltonian())),
            jumps: Some(sys.jumps().iter().map(matrix_to_spec).collect()),
            labels: Some(sys.labels().to_vec()),
            ..Self::default()
        }
    }

    pub fn is_empty(&self) -> bool {
        self == &Self::default()
    }

    pub fn build(&self) -> Result<LindbladSystem> {
        let explicit = self.dim.is_some() || self.hamiltonian.is_some() || self.jumps.is_some();
        let forms = [self.atom.is_some(), self.classical.is_some(), explicit];
        if forms.iter().filter(|&&f| f).count() != 1 {
            return Err(config_err(
                "system needs exactly one of `atom`, `classical`, or `dim`/`hamiltonian`/`jumps`",
            ));
        }
        let sys = if let Some(a) = &self.atom {
            two_level_atom(a.delta, a.omega, a.kappa)?
        } else if let Some(c) = &self.classical {
            embed_classical(&ClassicalRateMatrix::new(c.rates.clone())?)?
        } else {
            let dim = self.dim.ok_or_else(|| config_err("missing key `dim`"))?;
            let h = self
                .hamiltonian
                .as_ref()
                .ok_or_else(|| config_err("missing key `hamiltonian`"))?;
            let jumps = self
                .jumps
                .as_ref()
                .ok_or_else(|| config_err("missing key `jumps`"))?;
            let h = matrix_from_spec(h, dim, "hamiltonian")?;
            let jumps = jumps
                .iter()
                .enumerate()
                .map(|(m, l)| matrix_from_spec(l, dim, &format!("jumps[{m}]")))
                .collect::<Result<Vec<_>>>()?;
            LindbladSystem::new(h, jumps)?
        };
        match &self.labels {
            Some(labels) if labels.len() != sys.channel_count() => Err(config_err(format!(
                "`labels` has {} entries for {} channels",
                labels.len(),
                sys.channel_count()
            ))),
            Some(labels) => Ok(sys.with_labels(labels.clone())),
            None => Ok(sys),
        }
    }
}

/// Initial state: a pure vector, a basis index, or a diagonal mixture.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pure: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mixture: Option<Vec<f64>>,
}

impl InitialSpec {
    pub fn build(&self, dim: usize) -> Result<InitialState> {
        let set = [
            self.pure.is_some(),
            self.basis.is_some(),
            self.mixture.is_some(),
        ];
        if set.iter().filter(|&&f| f).count() != 1 {
            return Err(config_err(
                "initial state needs exactly one of `pure`, `basis`, `mixture`",
            ));
        }
        let state = if let Some(v) = &self.pure {
            let psi = CVector::from_iterator(v.len(), v.iter().map(|[re, im]| C64::new(*re, *im)));
            InitialState::pure_normalized(psi)?
        } else if let Some(i) = self.basis {
            InitialState::basis(dim, i)?
        } else {
            InitialState::mixture(self.mixture.clone().unwrap_or_default())?
        };
        state.check_dim(dim)?;
        Ok(state)
    }
}
