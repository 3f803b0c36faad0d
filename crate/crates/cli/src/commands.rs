//! The four subcommands. Each writes its human-readable report to `out`
//! and returns the process exit code.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use biofilm_core::analysis::{fit_decay, FitWindow};
use biofilm_core::dissipativity::{self, closed_form_check, Definiteness};
use biofilm_core::model;
use biofilm_core::solver::{build_perturbed_field, FieldState, Simulation};
use biofilm_core::Error;

use crate::config::RunConfig;
use crate::csv_io::{self, TraceWriter};
use crate::{CliError, EXIT_NEGATIVE, EXIT_OK};

/// Decay is accepted when `beta > 0` and `r² ≥` this.
pub const MIN_DECAY_R_SQUARED: f64 = 0.98;

/// Relative tolerance for the closed-form coefficient cross-check.
pub const CLOSED_FORM_TOL: f64 = 1e-9;

fn emit(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes()).map_err(|source| CliError::Io {
        path: "<stdout>".into(),
        source,
    })
}

fn io_err(path: &Path, source: std::io::Error) -> CliError {
    CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn analyze(cfg: &RunConfig, out: &mut dyn Write) -> Result<u8, CliError> {
    let p = cfg.params()?;
    let report = dissipativity::is_totally_dissipative(&p)?;
    let ubar = report.equilibrium;
    let eta = model::eta(&ubar.state(), &p)?;
    let speeds = model::eigenvalues(&ubar.state(), &p)?;
    let cf = closed_form_check(&p)?;
    let c = report.coefficients;

    let mut s = String::new();
    let _ = writeln!(s, "parameters (preset {}, rate scale {:e})", cfg.preset.name(), cfg.preset.scale_factor());
    let _ = writeln!(
        s,
        "  kB = {:e}  kE = {:e}  kD = {:e}  kN = {:e}  eps = {:e}  alpha = {}",
        p.k_b, p.k_e, p.k_d, p.k_n, p.eps, p.alpha
    );
    let _ = writeln!(s, "  gamma = {}  M = {:e}", p.gamma, p.friction);
    let _ = writeln!(s, "equilibrium");
    let _ = writeln!(s, "  B = {:.10}  E = {:.10}  D = {:.10}  v = 0", ubar.b, ubar.e, ubar.d);
    let _ = writeln!(s, "  L = {:.10} (kD/kB)", ubar.l);
    let _ = writeln!(s, "  eta = {eta:.10e}");
    let _ = writeln!(
        s,
        "  characteristic speeds = {:.10e}, {:.10e}, {:.10e}, {:.10e}",
        speeds[0], speeds[1], speeds[2], speeds[3]
    );
    let _ = writeln!(s, "Routh-Hurwitz on the (B, E, D) block of sym(A0 D), scaled by (kB - kD)/gamma");
    let _ = writeln!(s, "  a1 = {:.10e}  a2 = {:.10e}  a3 = {:.10e}", c.a1, c.a2, c.a3);
    let _ = writeln!(s, "  a1 > 0: {}", report.rh.a1_positive);
    let _ = writeln!(s, "  a3 > 0: {}", report.rh.a3_positive);
    let _ = writeln!(s, "  a1 a2 - a3 > 0: {} ({:.10e})", report.rh.hurwitz_positive, c.a1 * c.a2 - c.a3);
    let _ = writeln!(
        s,
        "  friction entry = {:.10e} (negative: {})",
        report.block44, report.block44_negative
    );
    let definiteness = match report.definiteness {
        Definiteness::NegativeDefinite => "negative definite",
        Definiteness::Marginal => "marginal",
        Definiteness::NotNegative => "not negative definite",
    };
    let _ = writeln!(
        s,
        "  largest eigenvalue of sym(A0 D) = {:.10e} ({definiteness}, agrees with RH: {})",
        report.max_eigenvalue, report.eigen_agrees
    );
    let _ = writeln!(s, "closed-form cross-check (numeric path is authoritative)");
    for (name, n, f, r) in [
        ("a1", cf.numeric.a1, cf.closed_form.a1, cf.relative_difference[0]),
        ("a2", cf.numeric.a2, cf.closed_form.a2, cf.relative_difference[1]),
        ("a3", cf.numeric.a3, cf.closed_form.a3, cf.relative_difference[2]),
    ] {
        let _ = writeln!(s, "  {name}: numeric {n:.10e}  closed form {f:.10e}  relative difference {r:.3e}");
    }
    let _ = writeln!(
        s,
        "  closed-form flags = {:?}; {}",
        cf.closed_form_flags.as_array(),
        if cf.agrees(CLOSED_FORM_TOL) {
            "agrees"
        } else {
            "MISMATCH"
        }
    );
    let verdict = if report.verdict {
        "totally dissipative"
    } else {
        "not totally dissipative"
    };
    let _ = writeln!(s, "verdict: {verdict}");
    emit(out, &s)?;
    Ok(if report.verdict { EXIT_OK } else { EXIT_NEGATIVE })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepArgs {
    pub a_min: f64,
    pub a_max: f64,
    pub step: f64,
    pub gamma: f64,
    pub friction: f64,
}

pub fn sweep(args: &SweepArgs, path: &Path, out: &mut dyn Write) -> Result<u8, CliError> {
    let result = dissipativity::sweep(args.a_min, args.a_max, args.step, args.gamma, args.friction)?;
    csv_io::write_sweep(path, &result)?;
    log::info!("wrote {}", path.display());
    let true_count = result.rows.iter().filter(|r| r.report.verdict).count();
    let mut s = format!(
        "{} rows written to {} ({} dissipative)\n",
        result.rows.len(),
        path.display(),
        true_count
    );
    if result.transitions.is_empty() {
        s.push_str("no verdict change in range\n");
    }
    for t in &result.transitions {
        let _ = writeln!(
            s,
            "transition a* = {:.10} in [{:.10}, {:.10}], verdict {} below",
            t.point(),
            t.lower,
            t.upper,
            t.verdict_below
        );
    }
    emit(out, &s)?;
    Ok(EXIT_OK)
}

/// Name of the error variant, used as the prefix of abort messages.
pub fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Domain(_) => "Domain",
        Error::NotSymmetrizable { .. } => "NotSymmetrizable",
        Error::ComplexEigenvalues { .. } => "ComplexEigenvalues",
        Error::NoPositiveEquilibrium { .. } => "NoPositiveEquilibrium",
        Error::InvalidParameter(_) => "InvalidParameter",
        Error::PerturbationTooLarge { .. } => "PerturbationTooLarge",
        Error::LeftHyperbolicDomain { .. } => "LeftHyperbolicDomain",
        Error::NonFiniteValue { .. } => "NonFiniteValue",
        Error::GridTooSmall { .. } => "GridTooSmall",
        Error::OutOfRange { .. } => "OutOfRange",
        Error::InsufficientData { .. } => "InsufficientData",
        Error::NonPositiveNorm { .. } => "NonPositiveNorm",
    }
}

pub const META_FILE: &str = "run.meta";
pub const TRACE_FILE: &str = "trace.csv";

pub fn diagnostic_file_name(step: usize) -> String {
    format!("diagnostic_{step:06}.csv")
}

struct RunSummary {
    status: &'static str,
    steps: usize,
    t_final: f64,
    max_wave_speed: f64,
    max_deviation: f64,
    stayed_in_omega: bool,
    in_domain: bool,
    dissipative: Option<bool>,
    source_dt_cap: Option<f64>,
}

fn write_meta(dir: &Path, cfg: &RunConfig, summary: &RunSummary) -> Result<(), CliError> {
    let p = cfg.params()?;
    let mut s = String::from("# resolved run configuration; rerun with --config pointing at this file\n");
    s.push_str(&cfg.to_ini());
    s.push_str("\n[run]\n");
    let _ = writeln!(s, "status = {}", summary.status);
    let _ = writeln!(s, "preset_scale = {:e}", cfg.preset.scale_factor());
    for (k, v) in [
        ("kB", p.k_b),
        ("kE", p.k_e),
        ("kD", p.k_d),
        ("kN", p.k_n),
        ("eps", p.eps),
        ("alpha", p.alpha),
        ("gamma", p.gamma),
        ("M", p.friction),
    ] {
        let _ = writeln!(s, "resolved_{k} = {v:e}");
    }
    let _ = writeln!(s, "steps = {}", summary.steps);
    let _ = writeln!(s, "t_final = {:e}", summary.t_final);
    let _ = writeln!(s, "max_wave_speed = {:e}", summary.max_wave_speed);
    if let Some(cap) = summary.source_dt_cap {
        let _ = writeln!(s, "source_dt_cap = {cap:e}");
    }
    let _ = writeln!(s, "in_domain = {}", summary.in_domain);
    let _ = writeln!(s, "max_deviation = {:e}", summary.max_deviation);
    let _ = writeln!(s, "stayed_in_omega = {}", summary.stayed_in_omega);
    if let Some(d) = summary.dissipative {
        let _ = writeln!(s, "dissipative = {d}");
    }
    let path = dir.join(META_FILE);
    std::fs::write(&path, s).map_err(|e| io_err(&path, e))
}

fn write_diagnostic(dir: &Path, cfg: &RunConfig, field: &FieldState<f64>) -> Result<std::path::PathBuf, CliError> {
    let grid = cfg.sim_config()?.grid;
    let path = dir.join(diagnostic_file_name(field.step));
    csv_io::write_snapshot(&path, &grid, field)?;
    Ok(path)
}

/// Runs the configured simulation, streaming snapshots and the trace into
/// `dir`. An abort writes a diagnostic snapshot of the offending field and
/// returns [`CliError::Aborted`].
pub fn simulate(cfg: &RunConfig, dir: &Path, out: &mut dyn Write) -> Result<u8, CliError> {
    let sim_cfg = cfg.sim_config()?;
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;

    let mut sim = match Simulation::new(sim_cfg) {
        Ok(sim) => sim,
        Err(err @ Error::PerturbationTooLarge { .. }) => {
            let ubar = dissipativity::equilibrium(&sim_cfg.params)?;
            let field = build_perturbed_field(&sim_cfg, &ubar);
            let diagnostic = write_diagnostic(dir, cfg, &field)?;
            let (cell, reason) = match &err {
                Error::PerturbationTooLarge { cell, reason } => (*cell, reason.clone()),
                _ => unreachable!(),
            };
            let u = field.cells[cell];
            write_meta(
                dir,
                cfg,
                &RunSummary {
                    status: "aborted",
                    steps: 0,
                    t_final: 0.0,
                    max_wave_speed: f64::NAN,
                    max_deviation: field.max_deviation(&ubar),
                    stayed_in_omega: false,
                    in_domain: false,
                    dissipative: None,
                    source_dt_cap: None,
                },
            )?;
            // initial data outside W is reported the same way as a run
            // that leaves it
            return Err(CliError::Aborted {
                kind: "LeftHyperbolicDomain",
                source: Error::LeftHyperbolicDomain {
                    cell,
                    t: 0.0,
                    state: u.to_array(),
                    reason: format!("initial data: {reason}"),
                },
                diagnostic: Some(diagnostic),
            });
        }
        Err(e) => return Err(e.into()),
    };

    let grid = sim_cfg.grid;
    let trace_path = dir.join(TRACE_FILE);
    let mut trace = TraceWriter::create(&trace_path)?;
    trace.push(&sim.trace().samples()[0])?;
    csv_io::write_snapshot_in(dir, &grid, sim.state())?;
    let mut snapshots = 1usize;

    while !sim.is_finished() {
        if let Err(err) = sim.advance() {
            trace.finish()?;
            csv_io::write_snapshot_in(dir, &grid, sim.state())?;
            let field = sim.rejected_field().unwrap_or_else(|| sim.state().clone());
            let diagnostic = write_diagnostic(dir, cfg, &field)?;
            let report = sim.report();
            write_meta(
                dir,
                cfg,
                &RunSummary {
                    status: "aborted",
                    steps: report.steps,
                    t_final: report.t_final,
                    max_wave_speed: report.max_wave_speed,
                    max_deviation: report.max_deviation,
                    stayed_in_omega: report.stayed_in_omega,
                    in_domain: false,
                    dissipative: Some(report.dissipative),
                    source_dt_cap: Some(report.source_dt_cap),
                },
            )?;
            return match err {
                Error::LeftHyperbolicDomain { .. } | Error::NonFiniteValue { .. } | Error::ComplexEigenvalues { .. } => {
                    Err(CliError::Aborted {
                        kind: error_kind(&err),
                        source: err,
                        diagnostic: Some(diagnostic),
                    })
                }
                other => Err(other.into()),
            };
        }
        let last = sim.trace().samples().last().expect("trace is never empty");
        trace.push(last)?;
        if sim.wants_snapshot() {
            csv_io::write_snapshot_in(dir, &grid, sim.state())?;
            snapshots += 1;
        }
    }
    trace.finish()?;

    let report = sim.report();
    write_meta(
        dir,
        cfg,
        &RunSummary {
            status: "completed",
            steps: report.steps,
            t_final: report.t_final,
            max_wave_speed: report.max_wave_speed,
            max_deviation: report.max_deviation,
            stayed_in_omega: report.stayed_in_omega,
            in_domain: true,
            dissipative: Some(report.dissipative),
            source_dt_cap: Some(report.source_dt_cap),
        },
    )?;
    log::info!("wrote {snapshots} snapshots and {} to {}", TRACE_FILE, dir.display());

    let samples = report.trace.samples();
    let (first, last) = (samples[0], samples[samples.len() - 1]);
    let mut s = String::new();
    let _ = writeln!(s, "completed {} steps to t = {}", report.steps, report.t_final);
    let _ = writeln!(s, "h2: {:.6e} -> {:.6e}", first.h2, last.h2);
    let _ = writeln!(s, "max wave speed = {:.6e}", report.max_wave_speed);
    let _ = writeln!(
        s,
        "max deviation from equilibrium = {:.6e} (within omega radius {}: {})",
        report.max_deviation, cfg.omega_radius, report.stayed_in_omega
    );
    if !report.dissipative {
        s.push_str("warning: parameters are not totally dissipative\n");
    }
    let _ = writeln!(s, "{snapshots} snapshots, trace and run.meta written to {}", dir.display());
    emit(out, &s)?;
    Ok(EXIT_OK)
}

pub fn decay(trace_path: &Path, window_start: f64, out: &mut dyn Write) -> Result<u8, CliError> {
    let trace = csv_io::read_trace(trace_path)?;
    let window = FitWindow::from_start_fraction(&trace, window_start)
        .map_err(|e| CliError::Input(e.to_string()))?;
    let fit = fit_decay(&trace, window).map_err(|e| CliError::Input(format!("{}: {e}", trace_path.display())))?;
    let decaying = fit.beta > 0.0 && fit.r_squared >= MIN_DECAY_R_SQUARED;
    let mut s = String::new();
    let _ = writeln!(s, "beta = {:.12e}", fit.beta);
    let _ = writeln!(s, "C1 = {:.12e}", fit.c1);
    let _ = writeln!(s, "r^2 = {:.12}", fit.r_squared);
    let _ = writeln!(
        s,
        "window = [{}, {}] ({} samples{})",
        fit.window.t_start,
        fit.window.t_end,
        fit.samples,
        if fit.shrunk { ", shrunk at a non-positive norm" } else { "" }
    );
    let _ = writeln!(
        s,
        "{}",
        if decaying {
            "exponential decay confirmed"
        } else {
            "no exponential decay (need beta > 0 and r^2 >= 0.98)"
        }
    );
    emit(out, &s)?;
    Ok(if decaying { EXIT_OK } else { EXIT_NEGATIVE })
}
