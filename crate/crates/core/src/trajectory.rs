//! Quantum-jump Monte Carlo for trajectories stopped after K jumps.
//!
//! Waiting times are drawn exactly by inverting the survival function
//! `S(w) = ‖e^{-i H_eff w} ψ‖²`, which decreases strictly from 1 to 0 under
//! the decay condition. Channels are then picked with weights
//! `‖L_m e^{-i H_eff w} ψ‖²`.

use std::io::{self, Write};

use rand::distr::Open01;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{QfptError, Result};
use crate::linalg::{max_abs, CMatrix, CVector, EigenDecomposition, C64};
use crate::liouville::expm_pade;
use crate::model::{InitialState, LindbladSystem, ScaledPerturbation};
use crate::rng::{substream, Stream};
use crate::stats::{jackknife_mean, mean, Estimate, MomentResult};

pub const DEFAULT_ROOT_TOL: f64 = 1e-12;
pub const DEFAULT_BRACKET_GROWTH: f64 = 2.0;
pub const MAX_ROOT_ITERATIONS: usize = 200;
pub const DEFAULT_EPS_FD: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub seed: u64,
    pub n_traj: usize,
    /// Absolute tolerance on the survival value.
    pub root_tol: f64,
    pub bracket_growth: f64,
}

impl SamplerConfig {
    pub fn new(seed: u64, n_traj: usize) -> Self {
        Self {
            seed,
            n_traj,
            root_tol: DEFAULT_ROOT_TOL,
            bracket_growth: DEFAULT_BRACKET_GROWTH,
        }
    }

    fn check(&self) -> Result<()> {
        if !(self.root_tol > 0.0) {
            return Err(QfptError::InvalidParameter {
                name: "root_tol",
                reason: format!("must be positive, got {}", self.root_tol),
            });
        }
        if !(self.bracket_growth > 1.0) {
            return Err(QfptError::InvalidParameter {
                name: "bracket_growth",
                reason: format!("must exceed 1, got {}", self.bracket_growth),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub w: f64,
    /// 0-based channel index.
    pub channel: usize,
}

/// One K-jump realization.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub steps: Vec<Step>,
    /// Basis state drawn from a diagonal-mixture initial state.
    pub initial_basis: Option<usize>,
}

impl TrajectoryRecord {
    pub fn k(&self) -> usize {
        self.steps.len()
    }

    /// First-passage time `t_K = Σ w_i`.
    pub fn first_passage_time(&self) -> f64 {
        self.steps.iter().map(|s| s.w).sum()
    }

    /// Jump times `t_i`.
    pub fn jump_times(&self) -> Vec<f64> {
        self.steps
            .iter()
            .scan(0.0, |t, s| {
                *t += s.w;
                Some(*t)
            })
            .collect()
    }

    pub fn count_channel(&self, channel: usize) -> usize {
        self.steps.iter().filter(|s| s.channel == channel).count()
    }
}

/// Evaluates `e^{-i H_eff w}` on vectors.
#[derive(Debug, Clone)]
enum NoJumpPropagator {
    Spectral(EigenDecomposition),
    Dense(CMatrix),
}

impl NoJumpPropagator {
    fn new(h_eff: &CMatrix) -> Self {
        let generator = h_eff * C64::new(0.0, -1.0);
        match EigenDecomposition::new(&generator) {
            Some(eig) => Self::Spectral(eig),
            None => Self::Dense(generator),
        }
    }

    fn prepare(&self, psi: &CVector) -> CVector {
        match self {
            Self::Spectral(eig) => &eig.inverse_vectors * psi,
            Self::Dense(_) => psi.clone(),
        }
    }

    fn evolve(&self, prepared: &CVector, w: f64) -> CVector {
        match self {
            Self::Spectral(eig) => {
                let scaled = CVector::from_iterator(
                    prepared.len(),
                    prepared
                        .iter()
                        .zip(&eig.values)
                        .map(|(c, l)| c * (l * w).exp()),
                );
                &eig.vectors * scaled
            }
            Self::Dense(generator) => expm_pade(&(generator * C64::new(w, 0.0))) * prepared,
        }
    }
}

/// What the sampler reports after each jump.
#[derive(Debug)]
pub struct StepEvent<'a> {
    /// 0-based jump index.
    pub index: usize,
    pub step: Step,
    /// `|S(w) - u|` at the accepted waiting time.
    pub survival_residual: f64,
    pub channel_probabilities: &'a [f64],
    /// Normalized post-jump state.
    pub state: &'a CVector,
}

/// Per-system sampling machinery, reusable across trajectories.
#[derive(Debug, Clone)]
pub struct Sampler {
    jumps: Vec<CMatrix>,
    rate_op: CMatrix,
    propagator: NoJumpPropagator,
    dim: usize,
    root_tol: f64,
    bracket_growth: f64,
    time_scale: f64,
}

impl Sampler {
    pub fn new(sys: &LindbladSystem, cfg: &SamplerConfig) -> Result<Self> {
        cfg.check()?;
        let report = sys.validate();
        if !report.passed {
            return Err(QfptError::InvalidSystem(report.diagnosis.join("; ")));
        }
        let rate_op = sys.jump_rate_operator();
        Ok(Self {
            jumps: sys.jumps().to_vec(),
            time_scale: 1.0 / max_abs(&rate_op).max(f64::MIN_POSITIVE),
            rate_op,
            propagator: NoJumpPropagator::new(&sys.effective_hamiltonian()),
            dim: sys.dim(),
            root_tol: cfg.root_tol,
            bracket_growth: cfg.bracket_growth,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Draws `k` jumps from `psi0`, reporting each one to `observer`.
    pub fn run(
        &self,
        psi0: &CVector,
        k: usize,
        rng: &mut Stream,
        mut observer: impl FnMut(&StepEvent<'_>),
    ) -> Result<Vec<Step>> {
        check_pure(psi0, self.dim)?;
        let mut psi = psi0.clone();
        let mut steps = Vec::with_capacity(k);
        let mut probs = vec![0.0; self.jumps.len()];
        for index in 0..k {
            let u: f64 = rng.sample(Open01);
            let prepared = self.propagator.prepare(&psi);
            let (w, residual) = self.invert_survival(&prepared, u)?;
            let phi = self.propagator.evolve(&prepared, w);

            let candidates: Vec<CVector> = self.jumps.iter().map(|l| l * &phi).collect();
            for (p, v) in probs.iter_mut().zip(&candidates) {
                *p = v.norm_squared();
            }
            let total: f64 = probs.iter().sum();
            if !(total > 0.0) {
                return Err(QfptError::InvalidSystem(
                    "all jump channels vanish at the sampled waiting time".into(),
                ));
            }
            probs.iter_mut().for_each(|p| *p /= total);
            let channel = pick(&probs, rng.sample(Open01));

            let next = &candidates[channel];
            psi = next.unscale(next.norm());
            let step = Step { w, channel };
            steps.push(step);
            observer(&StepEvent {
                index,
                step,
                survival_residual: residual,
                channel_probabilities: &probs,
                state: &psi,
            });
        }
        Ok(steps)
    }

    /// `S(w)` and `S'(w) = -⟨φ|Σ L†L|φ⟩`.
    fn survival(&self, prepared: &CVector, w: f64) -> (f64, f64) {
        let phi = self.propagator.evolve(prepared, w);
        let s = phi.norm_squared();
        let ds = -phi.dotc(&(&self.rate_op * &phi)).re;
        (s, ds)
    }

    /// Solves `S(w) = u` by bracket growth then safeguarded Newton.
    fn invert_survival(&self, prepared: &CVector, u: f64) -> Result<(f64, f64)> {
        let mut lo = 0.0;
        let mut hi = self.time_scale;
        let mut s_lo = 1.0;
        let (mut s_hi, _) = self.survival(prepared, hi);
        let mut iterations = 0;
        while s_hi > u {
            iterations += 1;
            if iterations >= MAX_ROOT_ITERATIONS || !hi.is_finite() {
                return Err(QfptError::RootFind {
                    iterations,
                    s_lo,
                    s_hi,
                    target: u,
                });
            }
            lo = hi;
            s_lo = s_hi;
            hi *= self.bracket_growth;
            s_hi = self.survival(prepared, hi).0;
        }

        let mut w = 0.5 * (lo + hi);
        while iterations < MAX_ROOT_ITERATIONS {
            iterations += 1;
            let (s, ds) = self.survival(prepared, w);
            let residual = (s - u).abs();
            if residual < self.root_tol {
                return Ok((w, residual));
            }
            if s > u {
                lo = w;
                s_lo = s;
            } else {
                hi = w;
                s_hi = s;
            }
            let newton = w - (s - u) / ds;
            let next = if ds < 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if next == w || hi - lo <= f64::EPSILON * hi {
                // Bracket collapsed to adjacent floats.
                if residual < self.root_tol {
                    return Ok((w, residual));
                }
                break;
            }
            w = next;
        }
        Err(QfptError::RootFind {
            iterations,
            s_lo,
            s_hi,
            target: u,
        })
    }
}

fn pick(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (m, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return m;
        }
    }
    // Roundoff in the cumulative sum: take the last channel with weight.
    probs
        .iter()
        .rposition(|&p| p > 0.0)
        .unwrap_or(probs.len() - 1)
}

fn check_pure(psi: &CVector, dim: usize) -> Result<()> {
    if psi.len() != dim {
        return Err(QfptError::Mismatch(format!(
            "state has dimension {}, system has {dim}",
            psi.len()
        )));
    }
    let norm = psi.norm();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(QfptError::InvalidState(format!(
            "pure state must have unit norm, got {norm}"
        )));
    }
    Ok(())
}

/// Starting vector for one trajectory; diagonal mixtures are unravelled by
/// drawing a basis state.
fn initial_vector(rho0: &InitialState, rng: &mut Stream) -> (CVector, Option<usize>) {
    match rho0 {
        InitialState::Pure(psi) => (psi.clone(), None),
        InitialState::Mixture(p) => {
            let i = pick(p, rng.sample(Open01));
            let mut psi = CVector::zeros(p.len());
            psi[i] = C64::new(1.0, 0.0);
            (psi, Some(i))
        }
    }
}

/// Draws one trajectory with default root-finding settings.
pub fn sample_trajectory(
    sys: &LindbladSystem,
    psi0: &CVector,
    k: usize,
    rng: &mut Stream,
) -> Result<TrajectoryRecord> {
    let sampler = Sampler::new(sys, &SamplerConfig::new(0, 1))?;
    let steps = sampler.run(psi0, k, rng, |_| {})?;
    Ok(TrajectoryRecord {
        steps,
        initial_basis: None,
    })
}

/// Maps `f` over `n_traj` independent trajectories in index order.
///
/// Trajectory `i` draws from substream `i`, so the output does not depend on
/// the rayon pool size.
pub fn map_trajectories<T, F>(
    sys: &LindbladSystem,
    rho0: &InitialState,
    cfg: &SamplerConfig,
    f: F,
) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&Sampler, &mut Stream, &CVector, Option<usize>) -> Result<T> + Sync,
{
    rho0.check_dim(sys.dim())?;
    let sampler = Sampler::new(sys, cfg)?;
    (0..cfg.n_traj as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(cfg.seed, i);
            let (psi, basis) = initial_vector(rho0, &mut rng);
            f(&sampler, &mut rng, &psi, basis)
        })
        .collect()
}

pub fn sample_trajectories(
    sys: &LindbladSystem,
    rho0: &InitialState,
    k: usize,
    cfg: &SamplerConfig,
) -> Result<Vec<TrajectoryRecord>> {
    check_k(k)?;
    map_trajectories(sys, rho0, cfg, |sampler, rng, psi, basis| {
        Ok(TrajectoryRecord {
            steps: sampler.run(psi, k, rng, |_| {})?,
            initial_basis: basis,
        })
    })
}

/// Monte Carlo mean and variance of an arbitrary record functional.
pub fn estimate_observable<F>(
    sys: &LindbladSystem,
    rho0: &InitialState,
    k: usize,
    h: F,
    cfg: &SamplerConfig,
) -> Result<MomentResult>
where
    F: Fn(&TrajectoryRecord) -> f64 + Sync,
{
    if cfg.n_traj < 2 {
        return Err(QfptError::TooFewSamples(cfg.n_traj));
    }
    check_k(k)?;
    let values = map_trajectories(sys, rho0, cfg, |sampler, rng, psi, basis| {
        let rec = TrajectoryRecord {
            steps: sampler.run(psi, k, rng, |_| {})?,
            initial_basis: basis,
        };
        Ok(h(&rec))
    })?;
    MomentResult::from_samples(&values)
}

/// Evaluates exact record log-densities for one system.
#[derive(Debug, Clone)]
pub struct LikelihoodModel {
    jumps: Vec<CMatrix>,
    propagator: NoJumpPropagator,
    dim: usize,
}

impl LikelihoodModel {
    pub fn new(sys: &LindbladSystem) -> Self {
        Self {
            jumps: sys.jumps().to_vec(),
            propagator: NoJumpPropagator::new(&sys.effective_hamiltonian()),
            dim: sys.dim(),
        }
    }

    /// `ln ‖Y(w_K,m_K)···Y(w_1,m_1) ψ₀‖²`, accumulated step by step.
    /// Returns negative infinity for an impossible record.
    pub fn log_likelihood(&self, rec: &TrajectoryRecord, psi0: &CVector) -> Result<f64> {
        if psi0.len() != self.dim {
            return Err(QfptError::Mismatch(format!(
                "state has dimension {}, system has {}",
                psi0.len(),
                self.dim
            )));
        }
        let mut psi = psi0.clone();
        let mut total = 0.0;
        for step in &rec.steps {
            let l = self.jumps.get(step.channel).ok_or_else(|| {
                QfptError::Mismatch(format!(
                    "record channel {} out of range for {} channels",
                    step.channel,
                    self.jumps.len()
                ))
            })?;
            let next = l * self
                .propagator
                .evolve(&self.propagator.prepare(&psi), step.w);
            let norm_sq = next.norm_squared();
            if !(norm_sq > 0.0) {
                return Ok(f64::NEG_INFINITY);
            }
            total += norm_sq.ln();
            psi = next.unscale(norm_sq.sqrt());
        }
        Ok(total)
    }
}

pub fn log_likelihood(sys: &LindbladSystem, rec: &TrajectoryRecord, psi0: &CVector) -> Result<f64> {
    LikelihoodModel::new(sys).log_likelihood(rec, psi0)
}

/// Monte Carlo Fisher information of the continuous-measurement record with
/// respect to the time-rescaling parameter at `ε = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FisherEstimate {
    /// Mean squared score, with jackknife standard error.
    pub information: Estimate,
    /// Mean score, which should vanish.
    pub mean_score: Estimate,
    /// Same estimate with the finite-difference step halved.
    pub information_half_step: f64,
}

pub fn classical_fisher_cm(
    sys: &LindbladSystem,
    rho0: &InitialState,
    k: usize,
    cfg: &SamplerConfig,
    eps_fd: f64,
) -> Result<FisherEstimate> {
    if !(1e-6..=1e-2).contains(&eps_fd) {
        return Err(QfptError::InvalidParameter {
            name: "eps_fd",
            reason: format!("must lie in [1e-6, 1e-2], got {eps_fd}"),
        });
    }
    if cfg.n_traj < 2 {
        return Err(QfptError::TooFewSamples(cfg.n_traj));
    }
    check_k(k)?;
    let shifted = |eps: f64| -> Result<LikelihoodModel> {
        Ok(LikelihoodModel::new(
            &sys.apply_scaled_perturbation(ScaledPerturbation::new(eps)?),
        ))
    };
    let (plus, minus) = (shifted(eps_fd)?, shifted(-eps_fd)?);
    let (plus_half, minus_half) = (shifted(eps_fd / 2.0)?, shifted(-eps_fd / 2.0)?);

    let scores = map_trajectories(sys, rho0, cfg, |sampler, rng, psi, basis| {
        let rec = TrajectoryRecord {
            steps: sampler.run(psi, k, rng, |_| {})?,
            initial_basis: basis,
        };
        let full =
            (plus.log_likelihood(&rec, psi)? - minus.log_likelihood(&rec, psi)?) / (2.0 * eps_fd);
        let half =
            (plus_half.log_likelihood(&rec, psi)? - minus_half.log_likelihood(&rec, psi)?) / eps_fd;
        Ok((full, half))
    })?;
    let squares: Vec<f64> = scores.iter().map(|(s, _)| s * s).collect();
    let half_squares: Vec<f64> = scores.iter().map(|(_, s)| s * s).collect();
    let raw: Vec<f64> = scores.iter().map(|(s, _)| *s).collect();
    Ok(FisherEstimate {
        information: jackknife_mean(&squares)?,
        mean_score: jackknife_mean(&raw)?,
        information_half_step: mean(&half_squares),
    })
}

/// Writes `traj_id,step,w,m,t_cumulative`. `step` and `m` are 1-based.
pub fn write_trajectory_csv<W: Write>(records: &[TrajectoryRecord], mut out: W) -> io::Result<()> {
    writeln!(out, "traj_id,step,w,m,t_cumulative")?;
    for (id, rec) in records.iter().enumerate() {
        let mut t = 0.0;
        for (i, s) in rec.steps.iter().enumerate() {
            t += s.w;
            writeln!(
                out,
                "{id},{},{},{},{}",
                i + 1,
                crate::config::fmt_f64(s.w),
                s.channel + 1,
                crate::config::fmt_f64(t)
            )?;
        }
    }
    Ok(())
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{embed_classical, two_level_atom, ClassicalRateMatrix};

    #[test]
    fn steps_have_unit_norm_and_small_residual() {
        let atom = two_level_atom(1.0, 1.0, 2.0).unwrap();
        let sampler = Sampler::new(&atom, &SamplerConfig::new(1, 1)).unwrap();
        let psi = InitialState::atom_ground().as_pure().unwrap().clone();
        for i in 0..200 {
            let mut rng = substream(5, i);
            sampler
                .run(&psi, 5, &mut rng, |ev| {
                    assert!((ev.state.norm() - 1.0).abs() < 1e-10);
                    assert!(ev.survival_residual < 1e-12);
                    assert!((ev.channel_probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                    assert!(ev.step.w > 0.0);
                })
                .unwrap();
        }
    }

    #[test]
    fn classical_log_likelihood_is_exponential_density() {
        let gamma = 1.7;
        let sys = embed_classical(&ClassicalRateMatrix::uniform(2, gamma).unwrap()).unwrap();
        let mut psi = CVector::zeros(2);
        psi[0] = C64::new(1.0, 0.0);
        let rec = TrajectoryRecord {
            steps: vec![
                Step { w: 0.3, channel: 0 },
                Step { w: 1.1, channel: 1 },
                Step {
                    w: 0.05,
                    channel: 0,
                },
            ],
            initial_basis: None,
        };
        let ll = log_likelihood(&sys, &rec, &psi).unwrap();
        let want: f64 = rec.steps.iter().map(|s| gamma.ln() - gamma * s.w).sum();
        assert!((ll - want).abs() < 1e-12);

        // Channel 1 is 1->0, impossible from state 0.
        let impossible = TrajectoryRecord {
            steps: vec![Step { w: 0.3, channel: 1 }],
            initial_basis: None,
        };
        assert_eq!(
            log_likelihood(&sys, &impossible, &psi).unwrap(),
            f64::NEG_INFINITY
        );
    }

    #[test]
    fn too_few_trajectories() {
        let atom = two_level_atom(1.0, 1.0, 2.0).unwrap();
        let err = estimate_observable(
            &atom,
            &InitialState::atom_ground(),
            2,
            |r| r.first_passage_time(),
            &SamplerConfig::new(1, 1),
        );
        assert!(matches!(err, Err(QfptError::TooFewSamples(1))));
    }

    #[test]
    fn single_channel_count_is_deterministic() {
        let atom = two_level_atom(1.0, 1.0, 2.0).unwrap();
        let r = estimate_observable(
            &atom,
            &InitialState::atom_ground(),
            4,
            |rec| rec.count_channel(0) as f64,
            &SamplerConfig::new(3, 500),
        )
        .unwrap();
        assert_eq!(r.mean, 4.0);
        assert_eq!(r.variance, 0.0);
    }

    #[test]
    fn invalid_psi_rejected() {
        let atom = two_level_atom(1.0, 1.0, 2.0).unwrap();
        let psi = CVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(1.0, 0.0)]);
        assert!(sample_trajectory(&atom, &psi, 1, &mut substream(0, 0)).is_err());
    }

    #[test]
    fn csv_dump_layout() {
        let rec = TrajectoryRecord {
            steps: vec![
                Step { w: 0.5, channel: 0 },
                Step {
                    w: 0.25,
                    channel: 2,
                },
            ],
            initial_basis: None,
        };
        let mut buf = Vec::new();
        write_trajectory_csv(&[rec], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "traj_id,step,w,m,t_cumulative");
        assert!(lines[2].starts_with("0,2,"));
        assert!(lines[2].contains(",3,"));
        assert!(lines[2].ends_with("7.5000000000000000e-1"));
    }
}
