//! Dispatch from a configuration to the computational modules and artifacts.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use qfpt_core::ancilla::{ancilla_table, write_ancilla_csv, AncillaRow};
use qfpt_core::config::{fmt_f64, SystemSpec};
use qfpt_core::qfi_tur::{
    bound_holds, log_grid, qfi, sweep_kappa, sweep_random, tur_check_fpt, tur_check_general,
    write_kappa_csv, write_sweep_csv, KappaRow, MomentSource, QfiOptions, SweepRanges, SweepRow,
    TurReport, TurStatus, DEFAULT_EPS_FD,
};
use qfpt_core::trajectory::{
    classical_fisher_cm, sample_trajectories, write_trajectory_csv, SamplerConfig,
};
use qfpt_core::{
    classical_echo_closed_form, echo_curve, embed_classical, fpt_moments, ClassicalRateMatrix,
    InitialState, LindbladSystem, MomentResult, ScaledPerturbation, StepObservable,
};

use crate::config::{config_error, ExperimentConfig, Kind, SweepSpec};
use crate::svg::{Axis, Chart, Mark, PALETTE};

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub n_traj: Option<usize>,
    pub out: Option<PathBuf>,
    pub strict: bool,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    /// Bound violations and failed comparisons.
    pub violations: usize,
    pub summary: String,
}

/// Effective settings after merging the file, overrides and defaults.
struct Plan {
    kind: Kind,
    cfg: ExperimentConfig,
    out: PathBuf,
    strict: bool,
}

impl Plan {
    fn seed(&self) -> anyhow::Result<u64> {
        self.cfg.seed.ok_or_else(|| {
            config_error(format!(
                "missing key `seed`: required for the stochastic experiment `{}`",
                self.kind
            ))
        })
    }

    fn sampler(&self, default_n: usize) -> anyhow::Result<SamplerConfig> {
        let n = self.cfg.n_traj.unwrap_or(default_n);
        if n < 2 {
            return Err(config_error(format!(
                "`n_traj` must be at least 2, got {n}"
            )));
        }
        Ok(SamplerConfig::new(self.seed()?, n))
    }

    fn qfi_options(&self) -> QfiOptions {
        QfiOptions {
            eps_fd: self.cfg.eps_fd.unwrap_or(DEFAULT_EPS_FD),
            strict: self.strict,
        }
    }

    fn system_spec(&self, default: SystemSpec) -> SystemSpec {
        self.cfg.system.clone().unwrap_or(default)
    }

    fn system(&self, default: SystemSpec) -> anyhow::Result<(SystemSpec, LindbladSystem)> {
        let spec = self.system_spec(default);
        let sys = spec
            .build()
            .map_err(|e| config_error(format!("[system]: {e}")))?;
        Ok((spec, sys))
    }

    fn perturbed(&self, sys: &LindbladSystem) -> anyhow::Result<Option<LindbladSystem>> {
        match (&self.cfg.perturbed, self.cfg.epsilon) {
            (Some(_), Some(_)) => Err(config_error(
                "give either `[perturbed]` or `epsilon`, not both",
            )),
            (Some(spec), None) => Ok(Some(
                spec.build()
                    .map_err(|e| config_error(format!("[perturbed]: {e}")))?,
            )),
            (None, Some(eps)) => Ok(Some(sys.apply_scaled_perturbation(
                ScaledPerturbation::new(eps).map_err(|e| config_error(format!("epsilon: {e}")))?,
            ))),
            (None, None) => Ok(None),
        }
    }

    fn initial(&self, spec: &SystemSpec, sys: &LindbladSystem) -> anyhow::Result<InitialState> {
        match &self.cfg.initial {
            Some(init) => init
                .build(sys.dim())
                .map_err(|e| config_error(format!("[initial]: {e}"))),
            None if spec.atom.is_some() => Ok(InitialState::atom_ground()),
            None => Ok(InitialState::basis(sys.dim(), 0)?),
        }
    }

    fn k_values(&self, default_max: usize) -> anyhow::Result<Vec<usize>> {
        match (self.cfg.k, self.cfg.k_max) {
            (Some(_), Some(_)) => Err(config_error("give either `k` or `k_max`, not both")),
            (Some(0), _) | (_, Some(0)) => Err(config_error("jump counts start at 1")),
            (Some(k), None) => Ok(vec![k]),
            (None, m) => Ok((1..=m.unwrap_or(default_max)).collect()),
        }
    }

    fn single_k(&self, default: usize) -> anyhow::Result<usize> {
        let ks = self.k_values(default)?;
        Ok(if self.cfg.k.is_some() {
            ks[0]
        } else {
            *ks.last().unwrap_or(&default)
        })
    }

    fn sweep(&self) -> SweepSpec {
        self.cfg.sweep.clone().unwrap_or_default()
    }

    fn create(&self, name: &str, files: &mut Vec<PathBuf>) -> anyhow::Result<BufWriter<File>> {
        let path = self.out.join(name);
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        files.push(path);
        Ok(BufWriter::new(file))
    }

    fn write_text(&self, name: &str, text: &str, files: &mut Vec<PathBuf>) -> anyhow::Result<()> {
        let mut w = self.create(name, files)?;
        w.write_all(text.as_bytes())?;
        w.flush()?;
        Ok(())
    }
}

fn fig5_pair() -> (SystemSpec, SystemSpec) {
    (
        SystemSpec::atom(1.0, 1.0, 2.0),
        SystemSpec::atom(0.4, 1.2, 0.5),
    )
}

pub fn default_out(kind: Kind) -> PathBuf {
    PathBuf::from("out").join(kind.name())
}

pub fn run(kind: Kind, mut cfg: ExperimentConfig, ov: &Overrides) -> anyhow::Result<Outcome> {
    if let Some(k) = cfg.experiment {
        if k != kind {
            return Err(config_error(format!(
                "config declares experiment `{k}` but `{kind}` was requested"
            )));
        }
    }
    cfg.experiment = Some(kind);
    if ov.seed.is_some() {
        cfg.seed = ov.seed;
    }
    if ov.n_traj.is_some() {
        cfg.n_traj = ov.n_traj;
    }
    let out = ov
        .out
        .clone()
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| default_out(kind));
    cfg.out = Some(out.clone());
    let strict = ov.strict || cfg.strict.unwrap_or(false);
    fs::create_dir_all(&out)
        .with_context(|| format!("creating output directory {}", out.display()))?;
    let plan = Plan {
        kind,
        cfg,
        out,
        strict,
    };
    let mut files = Vec::new();
    let (violations, summary) = match kind {
        Kind::Echo => echo(&plan, &mut files),
        Kind::Qfi => qfi_table(&plan, &mut files),
        Kind::FptMoments => moments(&plan, &mut files),
        Kind::Trajectories => trajectories(&plan, &mut files),
        Kind::SweepKappa => kappa_sweep(&plan, &mut files),
        Kind::SweepRandom => random_sweep(&plan, &mut files),
        Kind::Ancilla => ancilla(&plan, &mut files),
        Kind::ClassicalCheck => classical_check(&plan, &mut files),
        Kind::TurCheck => tur_check(&plan, &mut files),
    }
    .with_context(|| format!("experiment `{kind}`"))?;
    Ok(Outcome {
        files,
        violations,
        summary,
    })
}

/// Effective configuration as TOML, for the run manifest.
pub fn effective_config(kind: Kind, cfg: &ExperimentConfig, ov: &Overrides) -> String {
    let mut c = cfg.clone();
    c.experiment = Some(kind);
    if ov.seed.is_some() {
        c.seed = ov.seed;
    }
    if ov.n_traj.is_some() {
        c.n_traj = ov.n_traj;
    }
    c.to_toml()
}

type Step = anyhow::Result<(usize, String)>;

fn echo(plan: &Plan, files: &mut Vec<PathBuf>) -> Step {
    let (orig_default, pert_default) = fig5_pair();
    let (spec, sys) = plan.system(orig_default)?;
    let pert = match plan.perturbed(&sys)? {
        Some(p) => p,
        None if plan.cfg.system.is_none() => pert_default.build()?,
        None => return Err(config_error("echo needs `[perturbed]` or `epsilon`")),
    };
    let rho = plan.initial(&spec, &sys)?;
    let ks = plan.k_values(10)?;
    let curve = echo_curve(&sys, &pert, &rho, *ks.last().expect("nonempty"))?;
    let mut w = plan.create("echo.csv", files)?;
    writeln!(w, "K,amplitude_re,amplitude_im,eta")?;
    for e in curve.iter().filter(|e| ks.contains(&e.k)) {
        writeln!(
            w,
            "{},{},{},{}",
            e.k,
            fmt_f64(e.amplitude.re),
            fmt_f64(e.amplitude.im),
            fmt_f64(e.eta)
        )?;
    }
    w.flush()?;
    let last = curve.last().expect("nonempty");
    Ok((0, format!("eta(K={}) = {:.12}", last.k, last.eta)))
}

fn qfi_table(plan: &Plan, files: &mut Vec<PathBuf>) -> Step {
    let (spec, sys) = plan.system(SystemSpec::atom(1.0, 1.0, 2.0))?;
    let rho = plan.initial(&spec, &sys)?;
    let opts = plan.qfi_options();
    let mut w = plan.create("qfi.csv", files)?;
    writeln!(w, "K,qfi,qfi_coarse,qfi_fine,converged")?;
    let mut unconverged = 0;
    for k in plan.k_values(5)? {
        let j = qfi(&sys, &rho, k, opts)?;
        if !j.converged {
            unconverged += 1;
        }
        writeln!(
            w,
            "{k},{},{},{},{}",
            fmt_f64(j.value),
            fmt_f64(j.coarse),
            fmt_f64(j.fine),
            j.converged
        )?;
    }
    w.flush()?;
    Ok((0, format!("{unconverged} unconverged QFI values")))
}

fn moments(plan: &Plan, files: &mut Vec<PathBuf>) -> Step {
    let (spec, sys) = plan.system(SystemSpec::atom(1.0, 1.0, 2.0))?;
    let rho = plan.initial(&spec, &sys)?;
    let mut w = plan.create("fpt_moments.csv", files)?;
    writeln!(w, "K,mean,variance,precision,bound_classical")?;
    for k in plan.k_values(5)? {
        let m = fpt_moments(&sys, &rho, k, &StepObservable::TotalTime)?;
        writeln!(
            w,
            "{k},{},{},{},{}",
            fmt_f64(m.mean),
            fmt_f64(m.variance),
            fmt_f64(m.precision()),
            fmt_f64(1.0 / k as f64)
        )?;
    }
    w.flush()?;
    Ok((0, "analytic first-passage moments written".into()))
}

fn trajectories(plan: &Plan, files: &mut Vec<PathBuf>) -> Step {
    let (spec, sys) = plan.system(SystemSpec::atom(1.0, 1.0, 2.0))?;
    let rho = plan.initial(&spec, &sys)?;
    let cfg = plan.sampler(100)?;
    let k = plan.single_k(5)?;
    let records = sample_trajectories(&sys, &rho, k, &cfg)?;
    let mut w = plan.create("trajectories.csv", files)?;
    write_trajectory_csv(&records, &mut w)?;
    w.flush()?;
    Ok((0, format!("{} trajectories of {k} jumps", records.len())))
}

fn kappa_sweep(plan: &Plan, files: &mut Vec<PathBuf>) -> Step {
    let s = plan.sweep();
    let kappas = match &s.kappas {
        Some(v) if v.is_empty() => return Err(config_error("`sweep.kappas` is empty")),
        Some(v) => v.clone(),
        None => log_grid(
            s.kappa_min.unwrap_or(1.0),
            s.kappa_max.unwrap_or(10.0),
            s.points.unwrap_or(40).max(1),
        ),
    };
    let k = plan.single_k(1)?;
    let (delta, omega) = (s.delta.unwrap_or(1.0), s.omega.unwrap_or(1.0));
    let rows = sweep_kappa(delta, omega, &kappas, k, plan.qfi_options())?;
    let mut w = plan.create("sweep_kappa.csv", files)?;
    write_kappa_csv(k, &rows, &mut w)?;
    w.flush()?;
    plan.write_text("fig4a.svg", &kappa_chart(k, &rows), files)?;
    Ok((0, format!("{} grid points", rows.len())))
}

fn kappa_chart(k: usize, rows: &[KappaRow]) -> String {
    Chart {
        title: format!("Quantum Fisher information, K = {k}"),
        x: Axis::linear("kappa"),
        y: Axis::linear("J_K(0)"),
        marks: vec![
            Mark::Line {
                points: rows.iter().map(|r| (r.kappa, r.qfi)).collect(),
                color: PALETTE[0],
                dashed: false,
                label: Some("J_K(0)".into()),
            },
            Mark::Line {
                points: rows.iter().map(|r| (r.kappa, k as f64)).collect(),
                color: PALETTE[1],
                dashed: true,
                label: Some("K".into()),
            },
        ],
    }
    .render()
}

fn random_sweep(plan: &Plan, files: &mut Vec<PathBuf>) -> Step {
    let s = plan.sweep();
    let d = SweepRanges::default();
    let pair = |r: Option<[f64; 2]>, def: (f64, f64)| r.map_or(def, |[a, b]| (a, b));
    let ranges = SweepRanges {
        delta: pair(s.delta_range, d.delta),
        omega: pair(s.omega_range, d.omega),
        kappa: pair(s.kappa_range, d.kappa),
        k: s.k_range.map_or(d.k, |[a, b]| (a, b)),
    };
    let seed = plan.seed()?;
    let rows = sweep_random(s.n.unwrap_or(200), seed, ranges, plan.qfi_options())?;
    let violations = rows
        .iter()
        .filter(|r| !bound_holds(r.precision, r.bound_qfi))
        .count();
    let below_classical = rows
        .iter()
        .filter(|r| r.precision < r.bound_classical)
        .count();
    let mut w = plan.create("sweep_random.csv", files)?;
    write_sweep_csv(&rows, &mut w)?;
    w.flush()?;
    plan.write_text("fig4b.svg", &sweep_chart(&rows), files)?;
    Ok((
        violations,
        format!(
            "{} draws, {violations} below 1/J, {below_classical} below 1/K",
            rows.len()
        ),
    ))
}

fn sweep_chart(rows: &[SweepRow]) -> String {
    let (lo, hi) = rows
        .iter()
        .map(|r| r.bound_qfi)
        .fold((f64::INFINITY, 0.0f64), |(a, b), v| (a.min(v), b.max(v)));
    let mut marks = vec![Mark::Line {
        points: vec![(lo, lo), (hi, hi)],
        color: "black",
        dashed: false,
        label: Some("1/J".into()),
    }];
    let mut ks: Vec<usize> = rows.iter().map(|r| r.k).collect();
    ks.sort_unstable();
    ks.dedup();
    for (i, &k) in ks.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        marks.push(Mark::Points {
            points: rows
                .iter()
                .filter(|r| r.k == k)
                .map(|r| (r.bound_qfi, r.precision))
                .collect(),
            color,
            label: Some(format!("K = {k}")),
        });
        marks.push(Mark::Line {
            points: vec![(lo, 1.0 / k as f64), (hi, 1.0 / k as f64)],
            color,
            dashed: true,
            label: Some(format!("1/{k}")),
        });
    }
    Chart {
        title: "First-passage precision against 1/J".into(),
        x: Axis::log("1/J_K(0)"),
        y: Axis::log("var(t_K)/<t_K>^2"),
        marks,
    }
    .render()
}

fn ancilla(plan: &Plan, files: &mut Vec<PathBuf>) -> Step {
    let (orig_default, pert_default) = fig5_pair();
    let (spec, sys) = plan.system(orig_default)?;
    let pert = match plan.perturbed(&sys)? {
        Some(p) => p,
        None if plan.cfg.system.is_none() => pert_default.build()?,
        None => return Err(config_error("ancilla needs `[perturbed]` or `epsilon`")),
    };
    let rho = plan.initial(&spec, &sys)?;
    let cfg = plan.sampler(10_000)?;
    let k_max = plan.single_k(10)?;
    let rows = ancilla_table(&sys, &pert, &rho, k_max, &cfg)?;
    let mut w = plan.create("ancilla.csv", files)?;
    write_ancilla_csv(&rows, &mut w)?;
    w.flush()?;
    plan.write_text("fig5.svg", &ancilla_chart(&rows), files)?;
    let within = rows
        .iter()
        .filter(|r| (r.eta_ancilla - r.eta_analytic).abs() <= 3.0 * r.stderr)
        .count();
    Ok((
        0,
        format!("{within}/{} K values within 3 standard errors", rows.len()),
    ))
}

fn ancilla_chart(rows: &[AncillaRow]) -> String {
    Chart {
        title: format!(
            "Loschmidt echo, {} trials",
            rows.first().map_or(0, |r| r.n_trials)
        ),
        x: Axis::linear("K"),
        y: Axis::log("eta"),
        marks: vec![
            Mark::Line {
                points: rows.iter().map(|r| (r.k as f64, r.eta_analytic)).collect(),
                color: PALETTE[0],
                dashed: false,
                label: Some("analytic".into()),
            },
            Mark::ErrorBars {
                points: rows
                    .iter()
                    .map(|r| (r.k as f64, r.eta_ancilla, r.stderr))
                    .collect(),
                color: PALETTE[1],
                label: Some("ancilla".into()),
            },
        ],
    }
    .render()
}

fn classical_check(plan: &Plan, files: &mut Vec<PathBuf>) -> Step {
    let default = SystemSpec {
        classical: Some(qfpt_core::config::ClassicalSpec {
            rates: vec![vec![0.0, 1.0], vec![1.0, 0.0]],
        }),
        ..SystemSpec::default()
    };
    let spec = plan.system_spec(default);
    let chain = match &spec.classical {
        Some(c) => ClassicalRateMatrix::new(c.rates.clone())
            .map_err(|e| config_error(format!("[system]: {e}")))?,
        None => return Err(config_error("classical-check needs `system.classical`")),
    };
    let sys = embed_classical(&chain)?;
    let eps = plan.cfg.epsilon.unwrap_or(0.1);
    let pert = sys.apply_scaled_perturbation(ScaledPerturbation::new(eps)?);
    let rho = match &plan.cfg.initial {
        Some(init) => init.build(sys.dim())?,
        None => InitialState::mixture(vec![1.0 / sys.dim() as f64; sys.dim()])?,
    };
    let ks = plan.k_values(10)?;
    let curve = echo_curve(&sys, &pert, &rho, *ks.last().expect("nonempty"))?;
    let opts = plan.qfi_options();
    let mut w = plan.create("classical_check.csv", files)?;
    writeln!(w, "K,amplitude,closed_form,abs_diff,qfi")?;
    let mut mismatches = 0;
    for e in curve.iter().filter(|e| ks.contains(&e.k)) {
        let closed = classical_echo_closed_form(eps, e.k)?;
        let diff = (e.amplitude - closed).norm();
        let j = qfi(&sys, &rho, e.k, opts)?.value;
        if diff > 1e-10 || (j - e.k as f64).abs() > 1e-6 {
            mismatches += 1;
        }
        writeln!(
            w,
            "{},{},{},{},{}",
            e.k,
            fmt_f64(e.amplitude.re),
            fmt_f64(closed),
            fmt_f64(diff),
            fmt_f64(j)
        )?;
    }
    w.flush()?;
    Ok((
        mismatches,
        format!("{mismatches} mismatches against the closed form"),
    ))
}

fn status_name(s: &TurStatus) -> &'static str {
    match s {
        TurStatus::Satisfied => "satisfied",
        TurStatus::Violated => "violated",
        TurStatus::Indeterminate(_) => "indeterminate",
        TurStatus::Unsatisfiable(_) => "unsatisfiable",
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

fn tur_row(w: &mut impl Write, relation: &str, r: &TurReport) -> std::io::Result<()> {
    let (cfi, cfi_se) = match &r.chain {
        Some(c) => (
            Some(c.classical_fisher.value),
            Some(c.classical_fisher.stderr),
        ),
        None => (None, None),
    };
    writeln!(
        w,
        "{relation},{},{},{},{},{},{},{},{},{},{}",
        r.k,
        r.method,
        fmt_f64(r.lhs),
        fmt_f64(r.rhs),
        fmt_f64(r.slack),
        status_name(&r.status),
        opt(r.qfi.map(|j| j.value)),
        opt(r.bound_classical),
        opt(cfi),
        opt(cfi_se)
    )
}

fn tur_check(plan: &Plan, files: &mut Vec<PathBuf>) -> Step {
    let (spec, sys) = plan.system(SystemSpec::atom(1.0, 1.0, 2.0))?;
    let rho = plan.initial(&spec, &sys)?;
    let pert = plan.perturbed(&sys)?;
    let opts = plan.qfi_options();
    let source = if plan.cfg.n_traj.is_some() {
        MomentSource::MonteCarlo(plan.sampler(10_000)?)
    } else {
        MomentSource::Analytic
    };
    let fisher = plan.cfg.fisher.unwrap_or(false);
    let fisher_cfg = if fisher {
        Some(plan.sampler(10_000)?)
    } else {
        None
    };

    let mut w = plan.create("tur_check.csv", files)?;
    writeln!(
        w,
        "relation,K,method,lhs,rhs,slack,status,qfi,bound_classical,cfi,cfi_stderr"
    )?;
    let mut violations = 0;
    let mut rows = 0;
    for k in plan.k_values(5)? {
        let icm = match &fisher_cfg {
            Some(cfg) => Some(classical_fisher_cm(&sys, &rho, k, cfg, opts.eps_fd)?.information),
            None => None,
        };
        let r = tur_check_fpt(&sys, &rho, k, &source, opts, icm)?;
        if r.is_violation() {
            violations += 1;
        }
        if let Some(c) = &r.chain {
            if !(c.precision_above_inverse_cfi && c.cfi_below_qfi) {
                violations += 1;
            }
        }
        tur_row(&mut w, "fpt", &r)?;
        rows += 1;
        if let Some(pert) = &pert {
            let stats = |s: &LindbladSystem| -> anyhow::Result<MomentResult> {
                Ok(qfpt_core::qfi_tur::first_passage_moments(
                    s, &rho, k, &source,
                )?)
            };
            let g = tur_check_general(&sys, pert, &rho, k, &stats(&sys)?, &stats(pert)?)?;
            if g.is_violation() {
                violations += 1;
            }
            tur_row(&mut w, "general", &g)?;
            rows += 1;
        }
    }
    w.flush()?;
    Ok((
        violations,
        format!("{rows} relations checked, {violations} violations"),
    ))
}

/// Writes the run manifest as JSON.
pub fn write_manifest(
    out: &Path,
    kind: Kind,
    config_text: &str,
    config_path: Option<&Path>,
    seed: Option<u64>,
    outcome: &Outcome,
    wall_seconds: f64,
) -> anyhow::Result<PathBuf> {
    let manifest = serde_json::json!({
        "experiment": kind.name(),
        "version": env!("CARGO_PKG_VERSION"),
        "core_version": qfpt_core::VERSION,
        "seed": seed,
        "threads": rayon::current_num_threads(),
        "wall_time_seconds": wall_seconds,
        "config_path": config_path.map(|p| p.display().to_string()),
        "config": config_text,
        "outputs": outcome.files.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
        "violations": outcome.violations,
        "summary": outcome.summary,
    });
    let path = out.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}
