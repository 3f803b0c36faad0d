//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//!
//! Oracles are computed here from first principles (closed-form reaction
//! terms, a hand-written RK4 integrator, nalgebra eigensolves) rather than
//! through the library paths under test.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use biofilm_cli::commands;
use biofilm_cli::RunConfig;
use biofilm_core::analysis::{fit_decay, FitWindow};
use biofilm_core::dissipativity::{
    dissipation_matrix, equilibrium, is_totally_dissipative, param_family, sweep,
};
use biofilm_core::model::{self, ModelParams, PhaseState};
use biofilm_core::solver::{
    simulate, BoundaryCondition, FieldState, Grid1D, Perturbation, Profile, SimConfig, Solver,
};
use nalgebra::Matrix4;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_budget(elapsed: Duration, budget: Option<f64>) -> Result<(), String> {
    match budget {
        Some(b) if elapsed.as_secs_f64() > b => {
            Err(format!("runtime {:.3} s exceeds budget {b} s", elapsed.as_secs_f64()))
        }
        _ => Ok(()),
    }
}

// --- independent oracles -------------------------------------------------

/// Reaction terms written out directly.
fn reaction_oracle(u: [f64; 4], p: &ModelParams<f64>) -> [f64; 4] {
    let [b, e, d, v] = u;
    let l = 1.0 - b - e - d;
    let gb = p.k_b * b * l - p.k_d * b;
    let ge = p.k_e * b * l - p.eps * e;
    let gd = p.alpha * p.k_d * b - p.k_n * d;
    let gl = -(gb + ge + gd);
    let gv = (gl - p.friction) * v / (l * (1.0 - l));
    [gb, ge, gd, gv]
}

/// Interior equilibrium from its closed form.
fn equilibrium_oracle(p: &ModelParams<f64>) -> [f64; 4] {
    let b = (1.0 - p.k_d / p.k_b) / (1.0 + p.alpha * p.k_d / p.k_n + p.k_d * p.k_e / (p.eps * p.k_b));
    [b, b * p.k_e * p.k_d / (p.eps * p.k_b), b * p.alpha * p.k_d / p.k_n, 0.0]
}

fn rk4(p: &ModelParams<f64>, w0: [f64; 4], ubar: [f64; 4], t_end: f64, n: usize) -> [f64; 4] {
    let h = t_end / n as f64;
    let f = |w: [f64; 4]| reaction_oracle(std::array::from_fn(|k| ubar[k] + w[k]), p);
    let add = |a: [f64; 4], b: [f64; 4], s: f64| -> [f64; 4] { std::array::from_fn(|k| a[k] + s * b[k]) };
    let mut w = w0;
    for _ in 0..n {
        let k1 = f(w);
        let k2 = f(add(w, k1, 0.5 * h));
        let k3 = f(add(w, k2, 0.5 * h));
        let k4 = f(add(w, k3, h));
        w = std::array::from_fn(|k| w[k] + h / 6.0 * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k]));
    }
    w
}

/// Uniform sample of `(B, E, D, L)` on the simplex with every fraction at
/// least `min_frac`, and `v` strictly inside the symmetrizability bound.
fn random_state(rng: &mut ChaCha8Rng, p: &ModelParams<f64>, min_frac: f64) -> PhaseState<f64> {
    loop {
        let x: [f64; 4] = std::array::from_fn(|_| -rng.gen::<f64>().ln());
        let s: f64 = x.iter().sum();
        let f = x.map(|xi| xi / s);
        if f.iter().any(|&fi| fi < min_frac) {
            continue;
        }
        let l = f[3];
        let bound = l.powf(1.5) * p.gamma.sqrt() / (1.0 - l).sqrt();
        let v = rng.gen_range(-0.95..0.95) * bound;
        return PhaseState::new(f[0], f[1], f[2], v);
    }
}

fn random_params(rng: &mut ChaCha8Rng) -> ModelParams<f64> {
    let log_uniform = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| 10f64.powf(rng.gen_range(lo.log10()..hi.log10()));
    let k_b = log_uniform(rng, 1e-7, 1e-4);
    ModelParams {
        k_b,
        k_e: log_uniform(rng, 1e-7, 1e-4),
        k_d: k_b * rng.gen_range(0.01..0.9),
        k_n: log_uniform(rng, 1e-8, 1e-5),
        eps: log_uniform(rng, 1e-8, 1e-5),
        alpha: rng.gen_range(0.05..1.0),
        gamma: rng.gen_range(0.5..2.0),
        friction: log_uniform(rng, 1e-8, 1e-5),
    }
}

fn nalgebra_eigs_real_sorted(m: Matrix4<f64>) -> Vec<(f64, f64)> {
    let mut ev: Vec<(f64, f64)> = m.complex_eigenvalues().iter().map(|z| (z.re, z.im)).collect();
    ev.sort_by(|a, b| a.0.total_cmp(&b.0));
    ev
}

// --- criteria --------------------------------------------------------------

fn c1_dissipativity_interval() -> Outcome {
    let r = sweep(0.5, 1.5, 0.01, 1.0, 1e-6).map_err(|e| e.to_string())?;
    check(r.rows.len() == 101, || format!("{} rows", r.rows.len()))?;
    for row in &r.rows {
        let a = row.a;
        if a <= 0.98 + 1e-9 {
            check(row.report.verdict, || format!("verdict false at a = {a}"))?;
        }
        if a >= 1.01 - 1e-9 {
            check(!row.report.verdict, || format!("verdict true at a = {a}"))?;
        }
    }
    check(r.transitions.len() == 1, || format!("{} transitions", r.transitions.len()))?;
    let a_star = r.transitions[0].point();
    check((0.98..=1.01).contains(&a_star), || format!("a* = {a_star}"))?;
    // larger root of the printed quadratic in a
    let (qa, qb, qc) = (-3.366175e10, 4.1829869e10, -8.303370950e9);
    let disc: f64 = qb * qb - 4.0 * qa * qc;
    let root = (-qb - disc.sqrt()) / (2.0 * qa);
    check((a_star - root).abs() < 1e-3, || format!("a* = {a_star} vs quadratic root {root}"))?;
    Ok(format!("a* = {a_star:.7}, quadratic root {root:.7}"))
}

fn c2_table1_dissipative() -> Outcome {
    let rep = is_totally_dissipative(&ModelParams::<f64>::table1()).map_err(|e| e.to_string())?;
    check(rep.verdict, || "verdict false".into())?;
    check(rep.coefficients.a1 > 0.0 && rep.rh.a1_positive, || "a1 not positive".into())?;
    let mut buf = Vec::new();
    let code = commands::analyze(&RunConfig::default(), &mut buf).map_err(|e| e.to_string())?;
    let text = String::from_utf8(buf).unwrap();
    check(code == 0, || format!("analyze exit {code}"))?;
    check(text.contains("verdict: totally dissipative"), || "report lacks verdict".into())?;
    check(text.contains("a1 > 0: true"), || "report lacks a1 flag".into())?;
    Ok(format!("a1 = {:.4e}", rep.coefficients.a1))
}

fn c3_equilibrium() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut sets = vec![ModelParams::<f64>::table1()];
    sets.extend((0..100).map(|_| random_params(&mut rng)));
    let mut worst_g = 0.0f64;
    let mut worst_l = 0.0f64;
    for p in &sets {
        let eq = equilibrium(p).map_err(|e| e.to_string())?;
        let g = model::reaction(&eq.state(), p).map_err(|e| e.to_string())?.to_array();
        let g_norm = g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let rel = g_norm / p.max_rate();
        worst_g = worst_g.max(rel);
        check(rel <= 1e-12, || format!("|G(ū)| = {g_norm:e} for {p:?}"))?;
        let o = equilibrium_oracle(p);
        check((eq.b - o[0]).abs() <= 1e-12 && (eq.e - o[1]).abs() <= 1e-12, || {
            format!("equilibrium {:?} vs oracle {o:?}", eq.state())
        })?;
        let l_rel = (eq.l - p.k_d / p.k_b).abs() / (p.k_d / p.k_b);
        let l_sum_rel = ((1.0 - eq.b - eq.e - eq.d) - p.k_d / p.k_b).abs() / (p.k_d / p.k_b);
        worst_l = worst_l.max(l_rel);
        check(l_rel <= 1e-14, || format!("L̄ relative error {l_rel:e}"))?;
        // the stored fractions must also sum to the same liquid fraction
        check(l_sum_rel <= 1e-9, || format!("1 − (B̄+Ē+D̄) off kD/kB by {l_sum_rel:e}"))?;
    }
    Ok(format!("{} sets, max |G|/k = {worst_g:.1e}, max L̄ err {worst_l:.1e}", sets.len()))
}

fn c4_factorization() -> Outcome {
    let p = ModelParams::<f64>::table1();
    let eq = equilibrium(&p).map_err(|e| e.to_string())?;
    let ub = eq.state().to_array();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let u = random_state(&mut rng, &p, 1e-3);
        let g = reaction_oracle(u.to_array(), &p);
        let lib_g = model::reaction(&u, &p).map_err(|e| e.to_string())?.to_array();
        let dm = dissipation_matrix(&u, &eq, &p).map_err(|e| e.to_string())?;
        let w: [f64; 4] = std::array::from_fn(|k| u.to_array()[k] - ub[k]);
        let dw = dm.mul_vec(&w);
        let scale = (0..4)
            .map(|i| g[i].abs().max((0..4).map(|j| (dm[(i, j)] * w[j]).abs()).sum()))
            .fold(0.0f64, f64::max);
        let err = (0..4).map(|k| (g[k] - dw[k]).abs()).fold(0.0f64, f64::max) / scale;
        let lib_err = (0..4).map(|k| (g[k] - lib_g[k]).abs()).fold(0.0f64, f64::max) / scale;
        worst = worst.max(err);
        check(err <= 1e-12, || format!("relative residual {err:e} at {u:?}"))?;
        check(lib_err <= 1e-12, || format!("library reaction off by {lib_err:e} at {u:?}"))?;
    }
    Ok(format!("1000 states, max relative residual {worst:.1e}"))
}

fn c5_algebraic_structure() -> Outcome {
    let p = ModelParams::<f64>::table1();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut w_fd, mut w_sym, mut w_eig) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..200 {
        let u = random_state(&mut rng, &p, 1e-2);
        let j = model::jacobian(&u, &p).map_err(|e| e.to_string())?;
        let x = u.to_array();
        let mut fd = [[0.0; 4]; 4];
        for k in 0..4 {
            let h = 1e-6 * x[k].abs().max(1e-3);
            let mut xp = x;
            let mut xm = x;
            xp[k] += h;
            xm[k] -= h;
            let fp = model::flux(&PhaseState::from_array(xp), &p).map_err(|e| e.to_string())?;
            let fm = model::flux(&PhaseState::from_array(xm), &p).map_err(|e| e.to_string())?;
            for i in 0..4 {
                fd[i][k] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        let fd_err = (0..16).map(|n| (fd[n / 4][n % 4] - j[(n / 4, n % 4)]).abs()).fold(0.0, f64::max) / j.max_abs();
        w_fd = w_fd.max(fd_err);
        check(fd_err <= 1e-5, || format!("finite-difference Jacobian off by {fd_err:e} at {u:?}"))?;

        let a0 = model::symmetrizer(&u, &p).map_err(|e| e.to_string())?;
        let s = a0 * j;
        let sym = s.max_asymmetry() / s.max_abs();
        w_sym = w_sym.max(sym);
        check(sym <= 1e-12, || format!("A0 A asymmetry {sym:e} at {u:?}"))?;

        let analytic = model::eigenvalues(&u, &p).map_err(|e| e.to_string())?;
        let numeric = nalgebra_eigs_real_sorted(Matrix4::from_fn(|r, c| j[(r, c)]));
        for (a, (re, im)) in analytic.iter().zip(&numeric) {
            let err = (a - re).abs().max(im.abs());
            w_eig = w_eig.max(err);
            check(err <= 1e-9, || format!("eigenvalue {a} vs {re}+{im}i at {u:?}"))?;
        }

        let eta = model::eta(&u, &p).map_err(|e| e.to_string())?;
        let delta = model::delta(&u, &p).map_err(|e| e.to_string())?;
        check(delta > eta && eta > 0.0, || format!("Δ = {delta}, η = {eta} at {u:?}"))?;
    }
    Ok(format!("200 states, fd {w_fd:.1e}, sym {w_sym:.1e}, eig {w_eig:.1e}"))
}

fn c6_equilibrium_preservation() -> Outcome {
    let mut worst = 0.0f64;
    for (params, bc) in [
        (ModelParams::<f64>::fast(), BoundaryCondition::EquilibriumDirichlet),
        (ModelParams::<f64>::fast(), BoundaryCondition::Periodic),
        (ModelParams::<f64>::table1(), BoundaryCondition::EquilibriumDirichlet),
    ] {
        let mut cfg = SimConfig::new(params, Grid1D::new(-1.0, 1.0, 100).unwrap());
        cfg.bc = bc;
        let solver = Solver::new(cfg).map_err(|e| e.to_string())?;
        let ubar = *solver.equilibrium();
        let mut f = FieldState::uniform(ubar.state(), 100);
        for _ in 0..1000 {
            f = solver.step(&f).map_err(|e| e.to_string())?;
        }
        let dev = f.max_deviation(&ubar);
        worst = worst.max(dev);
        check(dev <= 1e-13, || format!("deviation {dev:e} ({bc:?})"))?;
    }
    Ok(format!("1000 steps, max deviation {worst:.1e}"))
}

fn c7_uniform_mode() -> Outcome {
    let p = ModelParams::<f64>::fast();
    let mut cfg = SimConfig::new(p, Grid1D::new(-1.0, 1.0, 16).unwrap());
    cfg.bc = BoundaryCondition::Periodic;
    cfg.perturbation = Perturbation {
        profile: Profile::Uniform,
        amplitude: [1e-3; 4],
    };
    cfg.snapshot_every = usize::MAX;
    let (snaps, report) = simulate(cfg).map_err(|e| e.to_string())?;
    let last = snaps.last().unwrap();
    check((last.t - 10.0).abs() < 1e-12, || format!("ended at t = {}", last.t))?;

    let ub = equilibrium_oracle(&p);
    let w = rk4(&p, [1e-3; 4], ub, 10.0, 100_000);
    let w_norm = w.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut err = 0.0f64;
    for u in &last.cells {
        let x = u.to_array();
        for k in 0..4 {
            err = err.max((x[k] - ub[k] - w[k]).abs());
        }
    }
    let rel = err / w_norm;
    check(rel <= 1e-3, || format!("relative error {rel:e} against the ODE oracle"))?;

    let eq = equilibrium(&p).map_err(|e| e.to_string())?;
    let d = dissipation_matrix(&eq.state(), &eq, &p).map_err(|e| e.to_string())?;
    let slowest = nalgebra_eigs_real_sorted(Matrix4::from_fn(|r, c| d[(r, c)]))
        .iter()
        .map(|z| z.0)
        .fold(f64::NEG_INFINITY, f64::max);
    let fit = fit_decay(&report.trace, FitWindow::second_half(&report.trace).unwrap()).map_err(|e| e.to_string())?;
    let rate_rel = (fit.beta - slowest.abs()).abs() / slowest.abs();
    check(rate_rel <= 0.2, || format!("beta {} vs |Re λ| {}", fit.beta, slowest.abs()))?;
    Ok(format!(
        "rel err {rel:.1e}, beta {:.4} vs {:.4} ({:.1}%)",
        fit.beta,
        slowest.abs(),
        100.0 * rate_rel
    ))
}

fn c8_h2_decay() -> Outcome {
    let mut cfg = SimConfig::new(ModelParams::<f64>::fast(), Grid1D::new(-1.0, 1.0, 400).unwrap());
    cfg.perturbation = Perturbation {
        profile: Profile::Sine { wavenumber: 1.0 },
        amplitude: [1e-3; 4],
    };
    cfg.snapshot_every = usize::MAX;
    let (_, report) = simulate(cfg).map_err(|e| e.to_string())?;
    let fit = fit_decay(&report.trace, FitWindow::second_half(&report.trace).unwrap()).map_err(|e| e.to_string())?;
    check(fit.beta > 0.0, || format!("beta = {}", fit.beta))?;
    check(fit.r_squared >= 0.98, || format!("r² = {}", fit.r_squared))?;
    let s = report.trace.samples();
    let start = s.len() / 5;
    for pair in s[start..].windows(2) {
        let inc = (pair[1].h2 - pair[0].h2) / pair[0].h2;
        check(inc <= 1e-12, || format!("h2 increases by {inc:e} at t = {}", pair[1].t))?;
    }
    Ok(format!("beta {:.4}, r² {:.6}, {} samples", fit.beta, fit.r_squared, s.len()))
}

fn c9_scale_invariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut positives = 0;
    for i in 0..20 {
        // half near the rate family (both verdicts occur), half unrestricted
        let p = if i % 2 == 0 {
            let a = rng.gen_range(0.5..1.5);
            param_family(a, rng.gen_range(0.5..2.0), 1e-6).unwrap()
        } else {
            random_params(&mut rng)
        };
        let base = is_totally_dissipative(&p).map_err(|e| e.to_string())?.verdict;
        positives += base as usize;
        for factor in [1e-3, 1e3] {
            let scaled = is_totally_dissipative(&p.with_rates_scaled(factor)).map_err(|e| e.to_string())?;
            check(scaled.verdict == base, || format!("verdict flips under ×{factor} for {p:?}"))?;
        }
    }
    Ok(format!("20 sets ({positives} dissipative), verdict stable under ×1e-3 and ×1e3"))
}

fn restrict(fine: &[PhaseState<f64>]) -> Vec<[f64; 4]> {
    fine.chunks(2)
        .map(|c| {
            let (a, b) = (c[0].to_array(), c[1].to_array());
            std::array::from_fn(|k| 0.5 * (a[k] + b[k]))
        })
        .collect()
}

fn l2_diff(coarse: &[PhaseState<f64>], restricted: &[[f64; 4]], dx: f64) -> f64 {
    coarse
        .iter()
        .zip(restricted)
        .map(|(u, r)| {
            let x = u.to_array();
            (0..4).map(|k| (x[k] - r[k]).powi(2)).sum::<f64>()
        })
        .sum::<f64>()
        .mul_add(dx, 0.0)
        .sqrt()
}

fn c10_self_convergence() -> Outcome {
    let run = |nx: usize| -> Result<Vec<PhaseState<f64>>, String> {
        let mut cfg = SimConfig::new(ModelParams::<f64>::fast(), Grid1D::new(-1.0, 1.0, nx).unwrap());
        cfg.bc = BoundaryCondition::Periodic;
        cfg.perturbation = Perturbation {
            profile: Profile::Sine { wavenumber: 1.0 },
            amplitude: [1e-3; 4],
        };
        cfg.t_end = 1.0;
        cfg.snapshot_every = usize::MAX;
        let (snaps, _) = simulate(cfg).map_err(|e| e.to_string())?;
        Ok(snaps.last().unwrap().cells.clone())
    };
    let (u200, u400, u800) = (run(200)?, run(400)?, run(800)?);
    let e1 = l2_diff(&u200, &restrict(&u400), 2.0 / 200.0);
    let e2 = l2_diff(&u400, &restrict(&u800), 2.0 / 400.0);
    let order = (e1 / e2).log2();
    check((0.7..=1.3).contains(&order), || format!("order {order} (e1 {e1:e}, e2 {e2:e})"))?;
    Ok(format!("order {order:.3} (e1 {e1:.2e}, e2 {e2:.2e})"))
}

fn c11_domain_guard() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let p = ModelParams::<f64>::fast();
    let eq = equilibrium(&p).map_err(|e| e.to_string())?;
    let l = eq.l;
    let bound = l.powf(1.5) * p.gamma.sqrt() / (1.0 - l).sqrt();
    let config = dir.path().join("guard.ini");
    std::fs::write(
        &config,
        format!(
            "[sim]\npreset = fast\n[perturbation]\nprofile = gaussian\namplitudes = 0, 0, 0, {:e}\n",
            1.5 * bound
        ),
    )
    .map_err(|e| e.to_string())?;
    let out_dir = dir.path().join("run");
    let output = Command::new(env!("CARGO_BIN_EXE_biofilm"))
        .args(["simulate", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .map_err(|e| e.to_string())?;
    let code = output.status.code();
    let stderr = String::from_utf8_lossy(&output.stderr);
    check(code == Some(2), || format!("exit {code:?}, stderr {stderr}"))?;
    check(stderr.contains("LeftHyperbolicDomain"), || format!("stderr: {stderr}"))?;
    let diagnostic = out_dir.join(commands::diagnostic_file_name(0));
    check(Path::exists(&diagnostic), || "no diagnostic snapshot".into())?;
    let (_, cells) = biofilm_cli::csv_io::read_snapshot(&diagnostic).map_err(|e| e.to_string())?;
    check(cells.iter().any(|u| !model::in_hyperbolic_domain(u, &p)), || {
        "diagnostic snapshot has no cell outside W".into()
    })?;
    Ok(format!("|v| = 1.5 × bound {bound:.3e} → exit 2 with diagnostic snapshot"))
}

type Criterion = (&'static str, Option<f64>, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 11] = [
        ("dissipativity interval on the rate family", Some(1.0), c1_dissipativity_interval),
        ("reference parameters are totally dissipative", Some(0.1), c2_table1_dissipative),
        ("equilibrium zeroes the reactions", None, c3_equilibrium),
        ("source factorization identity", None, c4_factorization),
        ("algebraic structure of the flux", None, c5_algebraic_structure),
        ("discrete equilibrium preservation", None, c6_equilibrium_preservation),
        ("uniform mode matches the reaction ODE", Some(10.0), c7_uniform_mode),
        ("exponential H2 decay", Some(60.0), c8_h2_decay),
        ("verdict scale invariance", None, c9_scale_invariance),
        ("first-order self-convergence", None, c10_self_convergence),
        ("hyperbolic-domain guard", None, c11_domain_guard),
    ];
    let mut failed = 0;
    for (i, (name, budget, f)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let outcome = f();
        let elapsed = t0.elapsed();
        let outcome = outcome.and_then(|detail| within_budget(elapsed, *budget).map(|_| detail));
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail} [{:.3} s]", i + 1, elapsed.as_secs_f64()),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {why} [{:.3} s]", i + 1, elapsed.as_secs_f64());
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
