use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use anyhow::Context;
use dualctl_core::certify::{check_dissipation, check_inequalities, random_samples};
use dualctl_core::oracle::equivalence_suite;
use dualctl_core::sim::{adversarial_search, empirical_gain, resolve_disturbance, running_max_gain, simulate};
use dualctl_core::vi::value_iterate_with;
use dualctl_core::{
    AlternatingPolicy, CeSignPolicy, Certificate, Error, MyopicLiteralPolicy, MyopicPolicy, Policy,
    ProportionalPolicy, ValueGrid, Verdict,
};

use crate::config::{bad, ConfigError, PolicyChoice, RunConfig};

/// Exit status of a subcommand that ran to completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Finding {
    Clean,
    Violation,
}

pub enum Failure {
    Config(ConfigError),
    Other(anyhow::Error),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

type Outcome = Result<Finding, Failure>;

/// Maps core argument errors to the config key they came from.
fn core_err(key: &str) -> impl Fn(Error) -> Failure + '_ {
    move |e| match e {
        Error::InvalidArgument(msg) | Error::Parse { msg, .. } => Failure::Config(bad(key, msg)),
        other => Failure::Other(other.into()),
    }
}

fn build_policy(choice: &PolicyChoice) -> Box<dyn Policy> {
    match choice {
        PolicyChoice::CeSign { k } => Box::new(CeSignPolicy::new(*k)),
        PolicyChoice::Myopic => Box::new(MyopicPolicy),
        PolicyChoice::MyopicLiteral => Box::new(MyopicLiteralPolicy),
        PolicyChoice::Alternating => Box::new(AlternatingPolicy),
        PolicyChoice::Proportional { gain } => Box::new(ProportionalPolicy::new(*gain)),
    }
}

/// Writes `body` to `out`, or to stdout. Returns whether stdout was used.
fn emit(out: Option<&Path>, body: &str) -> anyhow::Result<bool> {
    match out {
        Some(path) => {
            std::fs::write(path, body).with_context(|| format!("writing {}", path.display()))?;
            Ok(false)
        }
        None => {
            std::io::stdout().lock().write_all(body.as_bytes())?;
            Ok(true)
        }
    }
}

/// Summary goes to stderr when stdout carries the CSV.
fn summary(on_stdout: bool, line: &str) {
    if on_stdout {
        eprintln!("{line}");
    } else {
        println!("{line}");
    }
}

fn valid_certificate(cfg: &RunConfig) -> Option<Certificate> {
    let cert = cfg.certificate().ok()?;
    check_inequalities(&cert).ok().filter(|r| r.satisfied).map(|_| cert)
}

pub fn simulate_cmd(cfg: &RunConfig) -> Outcome {
    let policy = build_policy(&cfg.policy);
    let cert = cfg.certificate().ok();
    if cert.is_none() {
        log::warn!("certificate parameters are not admissible for gamma = {}; V̄ is not recorded", cfg.gamma);
    }
    let w = resolve_disturbance(&cfg.disturbance, cfg.horizon, &policy, cfg.x0, cfg.gamma)
        .map_err(core_err("disturbance"))?;
    let (traj, diverged_at) = match simulate(&policy, &w, cfg.x0, cfg.gamma, cert.as_ref()) {
        Ok(t) => (t, None),
        Err(Error::Diverged { t, partial, .. }) => (*partial, Some(t)),
        Err(e) => return Err(core_err("x0")(e)),
    };
    let on_stdout = emit(cfg.out.as_deref(), &traj.to_csv())?;

    let mut line = format!(
        "policy={} gamma={} x0={} N={} disturbance={} gain={:.6} running_max_gain={:.6}",
        policy.name(),
        cfg.gamma,
        cfg.x0,
        cfg.horizon,
        cfg.disturbance.kind(),
        empirical_gain(&traj),
        running_max_gain(&traj)
    );
    let mut finding = Finding::Clean;
    if let Some(t) = diverged_at {
        let _ = write!(line, " diverged_at={t}");
        finding = Finding::Violation;
    }
    if let Some(cert) = &cert {
        let slack = traj.gain_slack(cert.q * cfg.x0 * cfg.x0);
        let holds = slack >= -1e-9;
        let _ = write!(line, " prefix_slack={slack:.6e} bound={}", if holds { "holds" } else { "violated" });
        if !holds {
            finding = Finding::Violation;
        }
    }
    summary(on_stdout, &line);
    Ok(finding)
}

pub fn vi_cmd(cfg: &RunConfig) -> Outcome {
    let grid = ValueGrid::new(cfg.grid.clone()).map_err(core_err("vi"))?;
    let cert = valid_certificate(cfg);
    let mut max_excess = f64::NEG_INFINITY;
    let run = value_iterate_with(grid, cfg.max_iters, cfg.grid.tol, |g, _| {
        if let Some(c) = &cert {
            max_excess = max_excess.max(g.max_excess_over(c));
        }
    });
    let on_stdout = emit(cfg.out.as_deref(), &run.grid.to_csv())?;

    let w01 = run.grid.value([0.0, 0.0], 1.0).map_err(|e| Failure::Other(e.into()))?;
    let boundary = run.sweeps.last().map_or(0, |s| s.boundary_nodes);
    let mut line = format!(
        "verdict={} sweeps={} gamma={} W(0,1)={w01:.6} boundary_nodes={boundary}",
        run.verdict,
        run.sweeps.len(),
        cfg.gamma
    );
    let mut finding = if run.verdict == Verdict::Converged { Finding::Clean } else { Finding::Violation };
    if cert.is_some() {
        let _ = write!(line, " max_excess_over_vbar={max_excess:.3e}");
        if max_excess > 1e-9 {
            finding = Finding::Violation;
        }
    }
    summary(on_stdout, &line);
    Ok(finding)
}

pub fn certify_cmd(cfg: &RunConfig) -> Outcome {
    let cert = cfg.certificate()?;
    let report = check_inequalities(&cert).map_err(core_err("certificate"))?;
    let mut out = report.to_string();
    let violated = report.violated();
    let _ = writeln!(
        out,
        "satisfied={} violated={}",
        report.satisfied,
        if violated.is_empty() {
            "none".to_string()
        } else {
            violated.iter().map(|i| format!("inequality {i}")).collect::<Vec<_>>().join(";")
        }
    );

    let samples = random_samples(cfg.samples, cfg.seed, cfg.grid.delta_max, cfg.grid.y_max);
    let dissipation = check_dissipation(&cert, &samples).map_err(core_err("certificate"))?;
    let _ = writeln!(
        out,
        "dissipation samples={} violations={} worst_excess={:.6e} numeric_mismatches={} worst_relative_mismatch={:.3e} boundary_hits={}",
        dissipation.samples,
        dissipation.violations,
        dissipation.worst_excess,
        dissipation.numeric_mismatches,
        dissipation.worst_relative_mismatch,
        dissipation.boundary_hits
    );
    emit(cfg.out.as_deref(), &out)?;
    Ok(if report.satisfied && dissipation.passed() { Finding::Clean } else { Finding::Violation })
}

pub fn gain_search_cmd(cfg: &RunConfig) -> Outcome {
    let policy = build_policy(&cfg.policy);
    let found = adversarial_search(&policy, cfg.x0, cfg.gamma, cfg.horizon, &cfg.search)
        .map_err(core_err("horizon"))?;
    let mut body = String::new();
    for w in &found.w {
        let _ = writeln!(body, "{w}");
    }
    let on_stdout = emit(cfg.out.as_deref(), &body)?;

    let bias = cfg.q * cfg.x0 * cfg.x0;
    let excess = found.value - bias;
    let violated = excess > 1e-6;
    summary(
        on_stdout,
        &format!(
            "policy={} value={:.6e} bias={bias} excess={excess:.6e} family={} candidates={} diverged={} bound={}",
            policy.name(),
            found.value,
            found.family,
            found.candidates,
            found.diverged,
            if violated { "violated" } else { "holds" }
        ),
    );
    Ok(if violated { Finding::Violation } else { Finding::Clean })
}

pub fn oracle_check_cmd(cfg: &RunConfig) -> Outcome {
    let report = equivalence_suite(cfg.oracle_cases, cfg.oracle_max_horizon, &[1.0, 2.0, 4.0], cfg.seed, 1e-9)
        .map_err(core_err("oracle.max_horizon"))?;
    let body = format!(
        "cases={} passed={} failed={} max_abs_error={:.3e}\n",
        report.cases,
        report.cases - report.failures,
        report.failures,
        report.max_abs_error
    );
    emit(cfg.out.as_deref(), &body)?;
    Ok(if report.failures == 0 { Finding::Clean } else { Finding::Violation })
}
