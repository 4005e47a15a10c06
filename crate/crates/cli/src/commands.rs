//! The pipelines behind each subcommand.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use delaystab::analysis::{
    decay_bound_curve, fit_envelope, user_envelope, verify_decay, verify_energy_decay, verify_energy_window_inequality,
    window_bound_all_time, DecayBound, EnvelopeFit, FitSettings, StabilityEnvelope,
};
use delaystab::models::{compute_energy, EnergyLayout, EnergyReport};
use delaystab::oracle::{max_relative_deviation, oracle_solve};
use delaystab::semigroup::spectral_abscissa;
use delaystab::solver::{solve, Method, PicardDiagnostics, SolverConfig};
use delaystab::{estimate_certificate, DelayProblem, Error, SemigroupCertificate, Trajectory};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{self, Config};
use crate::Failure;

/// A loaded config with its assembled problem.
struct Prepared {
    config: Config,
    raw: Value,
    problem: DelayProblem,
    layout: Option<EnergyLayout>,
    solver: SolverConfig,
}

fn prepare(path: &Path) -> Result<Prepared, Failure> {
    let (config, raw) = config::load(path)?;
    let solver = config.solver_config()?;
    let built = config.build()?;
    Ok(Prepared { config, raw, problem: built.problem, layout: built.layout, solver })
}

impl Prepared {
    fn uses_steps(&self) -> bool {
        match self.config.solver.method {
            Method::Steps => true,
            Method::Picard => false,
            Method::Auto => self.problem.delay().lower_bound() >= 4.0 * self.solver.dt,
        }
    }

    /// The declared certificate if any, otherwise an estimated one.
    fn certificate(&self) -> Result<SemigroupCertificate, Failure> {
        if let Some(c) = self.problem.certificate() {
            return Ok(c.clone());
        }
        let a = &self.config.analysis;
        estimate_certificate(self.problem.generator(), a.omega_fraction, a.grid_density).map_err(|e| match e {
            Error::NotExponentiallyStable { .. } => Failure::hypothesis(format!("certificate: {e}")),
            Error::Invalid(_) | Error::Precondition(_) => Failure::config(format!("`analysis`: {e}")),
            e => Failure::solver(format!("certificate: {e}")),
        })
    }

    fn t_final(&self) -> f64 {
        self.config.solver.t_final
    }

    fn horizon(&self) -> f64 {
        self.config.analysis.envelope_horizon.unwrap_or(self.t_final())
    }
}

struct Run {
    problem: Arc<DelayProblem>,
    trajectory: Trajectory,
    diagnostics: Option<PicardDiagnostics>,
    certificate: Option<SemigroupCertificate>,
    energy: Option<EnergyReport>,
}

fn run_solver(prep: &Prepared, certificate: Option<SemigroupCertificate>) -> Result<Run, Failure> {
    let certificate = match certificate {
        Some(c) => Some(c),
        None if !prep.uses_steps() => Some(prep.certificate()?),
        None => None,
    };
    let problem = match &certificate {
        Some(c) => prep.problem.clone().with_certificate(c.clone()),
        None => prep.problem.clone(),
    };
    let problem = Arc::new(problem);
    let (trajectory, diagnostics) =
        solve(&problem, prep.t_final(), &prep.solver, prep.config.solver.method).map_err(|e| Failure::solver(format!("solver: {e}")))?;
    let energy = match &prep.layout {
        Some(layout) => Some(compute_energy(&trajectory, layout, trajectory.grid()).map_err(|e| Failure::solver(format!("energy: {e}")))?),
        None => None,
    };
    Ok(Run { problem, trajectory, diagnostics, certificate, energy })
}

fn create_dir(out: &Path) -> Result<(), Failure> {
    fs::create_dir_all(out).map_err(|e| Failure::io(format!("{}: {e}", out.display())))
}

fn write(out: &Path, name: &str, contents: &str) -> Result<(), Failure> {
    let path = out.join(name);
    fs::write(&path, contents).map_err(|e| Failure::io(format!("{}: {e}", path.display())))
}

fn write_json(out: &Path, name: &str, value: &impl Serialize) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::io(format!("{name}: {e}")))?;
    write(out, name, &(text + "\n"))
}

fn trajectory_csv(tr: &Trajectory) -> String {
    let dim = tr.problem().dim();
    let mut s = String::from("t");
    for i in 0..dim {
        let _ = write!(s, ",u_{i}");
    }
    s.push_str(",norm\n");
    for ((t, u), n) in tr.grid().iter().zip(tr.states()).zip(tr.norms()) {
        let _ = write!(s, "{t:.16e}");
        for x in u.iter() {
            let _ = write!(s, ",{x:.16e}");
        }
        let _ = writeln!(s, ",{n:.16e}");
    }
    s
}

fn energy_csv(e: &EnergyReport) -> String {
    let mut s = String::from("t,kinetic,potential,window,total\n");
    for i in 0..e.times.len() {
        let _ = writeln!(
            s,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            e.times[i], e.kinetic[i], e.potential[i], e.window[i], e.total[i]
        );
    }
    s
}

fn write_run(out: &Path, prep: &Prepared, run: &Run) -> Result<(), Failure> {
    create_dir(out)?;
    write(out, "trajectory.csv", &trajectory_csv(&run.trajectory))?;
    if let Some(e) = &run.energy {
        write(out, "energy.csv", &energy_csv(e))?;
    }
    let doc = json!({
        "config": prep.raw,
        "resolved": prep.config,
        "method": if run.diagnostics.is_some() { "picard" } else { "steps" },
        "certificate": run.certificate,
        "diagnostics": {
            "nodes": run.trajectory.grid().len(),
            "t_final": run.trajectory.final_time(),
            "final_norm": run.trajectory.norms().last(),
            "picard": run.diagnostics,
        },
    });
    write_json(out, "run.json", &doc)
}

pub fn simulate(path: &Path, out: &Path) -> Result<String, Failure> {
    let prep = prepare(path)?;
    let run = run_solver(&prep, None)?;
    write_run(out, &prep, &run)?;
    let mut msg = format!(
        "simulated [0, {}] on {} nodes, final ‖U‖ = {:.6e}",
        prep.t_final(),
        run.trajectory.grid().len(),
        run.trajectory.norms().last().copied().unwrap_or(0.0)
    );
    if let Some(d) = &run.diagnostics {
        let _ = write!(msg, ", {} Picard windows, {} iterations", d.windows.len(), d.total_iterations());
    }
    Ok(msg)
}

#[derive(Serialize)]
struct Check {
    pass: bool,
    detail: String,
}

#[derive(Serialize)]
struct Hypotheses {
    window_bound: Check,
    envelope: Check,
    lipschitz: Check,
}

#[derive(Serialize)]
struct EnergySection {
    pass: bool,
    c_star: f64,
    beta: f64,
    worst_margin: f64,
    empirical_rate: Option<f64>,
    window_inequality: bool,
    window_inequality_margin: f64,
}

#[derive(Serialize)]
struct VerifyReport {
    hypotheses: Hypotheses,
    bound_pass: Option<bool>,
    worst_margin: Option<f64>,
    empirical_rate: Option<f64>,
    theoretical_rate: Option<f64>,
    certificate: Option<SemigroupCertificate>,
    envelope: Option<StabilityEnvelope>,
    bound: Option<DecayBound>,
    energy: Option<EnergySection>,
}

fn fit_settings(prep: &Prepared, cert: &SemigroupCertificate, lipschitz: f64) -> FitSettings {
    let a = &prep.config.analysis;
    let mut s = FitSettings::uniform(cert.omega, a.omega_prime_count.max(1), prep.horizon());
    if let Some(list) = &a.omega_primes {
        s.omega_primes = list.clone();
    }
    s.t_target = a.t_target.unwrap_or(prep.t_final());
    s.lipschitz = lipschitz;
    s
}

fn fit(prep: &Prepared, cert: &SemigroupCertificate, lipschitz: f64) -> Result<EnvelopeFit, Failure> {
    let p = &prep.problem;
    fit_envelope(p.gain(), cert, p.feedback().norm(), p.tau_bar(), &fit_settings(prep, cert, lipschitz))
        .map_err(|e| Failure::config(format!("`analysis`: {e}")))
}

/// Checks the window bound, envelope and Lipschitz hypotheses; returns the envelope when all hold.
fn hypotheses(prep: &Prepared, cert: &SemigroupCertificate) -> Result<(Hypotheses, Option<StabilityEnvelope>), Failure> {
    let p = &prep.problem;
    let (m, omega) = (cert.m, cert.omega);
    let b_norm = p.feedback().norm();
    let lip = p.lipschitz();
    let window_bound = match window_bound_all_time(p.gain(), p.tau_bar(), prep.horizon()) {
        Ok((k, all_time)) => Check {
            pass: k.is_finite(),
            detail: format!("K = {k:.6e} ({})", if all_time { "all time" } else { "on the envelope horizon" }),
        },
        Err(e) => Check { pass: false, detail: e.to_string() },
    };
    let (envelope, fitted) = match prep.config.analysis.envelope {
        Some(spec) => match user_envelope(spec.gamma, spec.omega_prime, p.gain(), cert, b_norm, p.tau_bar(), prep.horizon()) {
            Ok(env) => (Check { pass: true, detail: format!("user-supplied γ = {}, ω' = {}", env.gamma, env.omega_prime) }, Some(env)),
            Err(e) => (Check { pass: false, detail: e.to_string() }, None),
        },
        None => match fit(prep, cert, 0.0)?.best() {
            Some(env) => (Check { pass: true, detail: format!("fitted γ = {:.6e}, ω' = {:.6e}", env.gamma, env.omega_prime) }, Some(env.clone())),
            None => (
                Check {
                    pass: false,
                    detail: format!("no (γ, ω') with ω' < ω = {omega:.6e} dominates M‖B‖e^{{ωτ̄}}∫|k| beyond the horizon"),
                },
                None,
            ),
        },
    };
    let threshold = |w: f64| (omega - w) / m;
    let (lipschitz, env) = match fitted {
        None => (Check { pass: lip == 0.0, detail: format!("L = {lip} (not checked without an envelope)") }, None),
        Some(env) if lip == 0.0 => (Check { pass: true, detail: "L = 0".into() }, Some(env)),
        Some(env) if prep.config.analysis.envelope.is_some() => {
            let pass = lip < threshold(env.omega_prime);
            (Check { pass, detail: format!("L = {lip} vs (ω - ω')/M = {:.6e}", threshold(env.omega_prime)) }, pass.then_some(env))
        }
        Some(env) => match fit(prep, cert, lip)?.best() {
            Some(e) => (
                Check { pass: true, detail: format!("L = {lip} < (ω - ω')/M = {:.6e}", threshold(e.omega_prime)) },
                Some(e.clone()),
            ),
            None => (
                Check {
                    pass: false,
                    detail: format!("L = {lip}: no admissible ω' has M L < ω - ω' (best envelope allows L < {:.6e})", threshold(env.omega_prime)),
                },
                None,
            ),
        },
    };
    let all = window_bound.pass && envelope.pass && lipschitz.pass;
    Ok((Hypotheses { window_bound, envelope, lipschitz }, env.filter(|_| all)))
}

pub fn verify(path: &Path, out: &Path) -> Result<String, Failure> {
    let prep = prepare(path)?;
    create_dir(out)?;
    let cert = prep.certificate()?;
    let (hyp, env) = hypotheses(&prep, &cert)?;
    let Some(env) = env else {
        let failed: Vec<&str> = [("window_bound", &hyp.window_bound), ("envelope", &hyp.envelope), ("lipschitz", &hyp.lipschitz)]
            .iter()
            .filter(|(_, c)| !c.pass)
            .map(|(n, _)| *n)
            .collect();
        let detail = failed.iter().map(|n| match *n {
            "window_bound" => hyp.window_bound.detail.clone(),
            "envelope" => hyp.envelope.detail.clone(),
            _ => hyp.lipschitz.detail.clone(),
        });
        let msg = format!("hypothesis unmet: {} ({})", failed.join(", "), detail.collect::<Vec<_>>().join("; "));
        let report = VerifyReport {
            hypotheses: hyp,
            bound_pass: None,
            worst_margin: None,
            empirical_rate: None,
            theoretical_rate: None,
            certificate: Some(cert),
            envelope: None,
            bound: None,
            energy: None,
        };
        write_json(out, "verify.json", &report)?;
        return Err(Failure::hypothesis(msg));
    };
    let p = &prep.problem;
    let lip = (p.lipschitz() > 0.0).then_some(p.lipschitz());
    let bound = decay_bound_curve(&env, &cert, p.feedback().norm(), p.generator(), p.history(), lip)
        .map_err(|e| Failure::hypothesis(format!("lipschitz: {e}")))?;
    let run = run_solver(&prep, Some(cert.clone()))?;
    write_run(out, &prep, &run)?;
    let decay = verify_decay(&run.trajectory, &bound);
    let energy = match &run.energy {
        Some(e) => {
            let (c, r) = verify_energy_decay(e, &bound);
            let (margin, ok) = verify_energy_window_inequality(&run.trajectory, e).map_err(|e| Failure::solver(format!("energy: {e}")))?;
            Some(EnergySection {
                pass: r.pass && ok,
                c_star: c.c_star,
                beta: c.beta,
                worst_margin: r.worst_margin,
                empirical_rate: r.empirical_rate,
                window_inequality: ok,
                window_inequality_margin: margin,
            })
        }
        None => None,
    };
    let pass = decay.pass && energy.as_ref().is_none_or(|e| e.pass);
    let msg = format!(
        "bound {}: worst margin {:.3e}, empirical rate {}, theoretical rate {:.6e}{}",
        if pass { "holds" } else { "violated" },
        decay.worst_margin,
        decay.empirical_rate.map_or("n/a".into(), |r| format!("{r:.6e}")),
        decay.theoretical_rate,
        energy.as_ref().map_or(String::new(), |e| format!(", energy bound {}", if e.pass { "holds" } else { "violated" })),
    );
    let report = VerifyReport {
        hypotheses: hyp,
        bound_pass: Some(pass),
        worst_margin: Some(decay.worst_margin),
        empirical_rate: decay.empirical_rate,
        theoretical_rate: Some(decay.theoretical_rate),
        certificate: Some(cert),
        envelope: Some(env),
        bound: Some(bound),
        energy,
    };
    write_json(out, "verify.json", &report)?;
    if pass {
        Ok(msg)
    } else {
        Err(Failure::bound(msg))
    }
}

pub fn compare_oracle(path: &Path, out: Option<&Path>) -> Result<String, Failure> {
    let prep = prepare(path)?;
    let a = &prep.config.analysis;
    if prep.problem.dim() > a.oracle_max_dim {
        return Err(Failure::config(format!(
            "problem dimension {} exceeds `analysis.oracle_max_dim` = {}",
            prep.problem.dim(),
            a.oracle_max_dim
        )));
    }
    if a.oracle_refinement == 0 {
        return Err(Failure::config("`analysis.oracle_refinement` must be positive"));
    }
    let run = run_solver(&prep, None)?;
    let reference = oracle_solve(&run.problem, prep.t_final(), prep.solver.dt / a.oracle_refinement as f64)
        .map_err(|e| Failure::solver(format!("oracle: {e}")))?;
    let dev = max_relative_deviation(&run.trajectory, &reference).map_err(|e| Failure::solver(format!("comparison: {e}")))?;
    let pass = dev <= a.compare_tolerance;
    if let Some(out) = out {
        create_dir(out)?;
        write_json(out, "compare.json", &json!({ "max_relative_deviation": dev, "tolerance": a.compare_tolerance, "pass": pass }))?;
    }
    let msg = format!("max relative deviation {dev:.6e} (tolerance {:e})", a.compare_tolerance);
    if pass {
        Ok(msg)
    } else {
        Err(Failure::tolerance(msg))
    }
}

pub fn estimate(path: &Path, out: &Path) -> Result<String, Failure> {
    let prep = prepare(path)?;
    let a = &prep.config.analysis;
    let g = prep.problem.generator();
    let estimated = estimate_certificate(g, a.omega_fraction, a.grid_density).map_err(|e| match e {
        Error::NotExponentiallyStable { .. } => Failure::hypothesis(format!("certificate: {e}")),
        e => Failure::config(format!("`analysis`: {e}")),
    })?;
    create_dir(out)?;
    write_json(
        out,
        "certificate.json",
        &json!({
            "spectral_abscissa": spectral_abscissa(g.matrix()),
            "estimated": estimated,
            "declared": prep.problem.certificate(),
        }),
    )?;
    Ok(format!("M = {:.6e}, ω = {:.6e} (spectral abscissa {:.6e})", estimated.m, estimated.omega, spectral_abscissa(g.matrix())))
}

pub fn fit_envelopes(path: &Path, out: &Path) -> Result<String, Failure> {
    let prep = prepare(path)?;
    let cert = prep.certificate()?;
    let fit = fit(&prep, &cert, prep.problem.lipschitz())?;
    create_dir(out)?;
    write_json(out, "envelope.json", &json!({ "certificate": { "m": cert.m, "omega": cert.omega }, "fit": fit, "best": fit.best() }))?;
    match fit.best() {
        Some(e) => Ok(format!(
            "{} envelopes, best γ = {:.6e}, ω' = {:.6e}, K = {:.6e}",
            fit.envelopes.len(),
            e.gamma,
            e.omega_prime,
            e.k_window
        )),
        None => Err(Failure::hypothesis(format!("envelope: no admissible (γ, ω') among {} rates below ω = {:.6e}", fit.envelopes.len(), cert.omega))),
    }
}
