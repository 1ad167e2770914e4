//! `dualctl`: simulation, value iteration, certificate checks and
//! falsification for the magnitude-measured integrator.
//!
//! Exit codes: 0 when every checked property held, 1 when a violation was
//! found, 2 for invalid configuration or arguments.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::{Failure, Finding};
use config::{FileConfig, Overrides};

#[derive(Parser)]
#[command(name = "dualctl", version, about = "Dual control of the magnitude-measured integrator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a closed loop and write the trajectory CSV.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        search: SearchArgs,
    },
    /// Run grid value iteration and write the value grid CSV.
    Vi {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        vi: ViArgs,
    },
    /// Check the certificate inequalities and dissipation.
    Certify {
        #[command(flatten)]
        common: Common,
        /// Number of random dissipation samples.
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Search for a disturbance that breaks the gain bound.
    GainSearch {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        search: SearchArgs,
    },
    /// Compare the recursive information state against enumeration.
    OracleCheck {
        #[command(flatten)]
        common: Common,
        /// Number of random measurement/control sequences.
        #[arg(long)]
        cases: Option<usize>,
        /// Longest horizon drawn.
        #[arg(long)]
        max_horizon: Option<usize>,
    },
}

#[derive(Args, Default)]
struct Common {
    /// JSON configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Target gain γ.
    #[arg(long, allow_hyphen_values = true)]
    gamma: Option<f64>,
    /// Certificate parameter p.
    #[arg(long, allow_hyphen_values = true)]
    p: Option<f64>,
    /// Certificate parameter q.
    #[arg(long, allow_hyphen_values = true)]
    q: Option<f64>,
    /// Certificate gain k.
    #[arg(long, allow_hyphen_values = true)]
    k: Option<f64>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Random seed (overrides DUALCTL_SEED and the config file).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Default)]
struct RunArgs {
    /// Only `integrator` is supported.
    #[arg(long)]
    system: Option<String>,
    /// ce-sign, myopic, myopic-literal, alternating, zero or proportional.
    #[arg(long)]
    policy: Option<String>,
    /// Gain of the proportional policy.
    #[arg(long, allow_hyphen_values = true)]
    gain: Option<f64>,
    /// Horizon N; the run has N + 1 steps.
    #[arg(long)]
    horizon: Option<usize>,
    /// Initial state.
    #[arg(long, allow_hyphen_values = true)]
    x0: Option<f64>,
    /// sinusoid, constant, random, file or adversarial.
    #[arg(long)]
    disturbance: Option<String>,
    /// Sinusoid amplitude.
    #[arg(long, allow_hyphen_values = true)]
    amplitude: Option<f64>,
    /// Sinusoid period in steps.
    #[arg(long)]
    period: Option<f64>,
    /// Constant disturbance value.
    #[arg(long, allow_hyphen_values = true)]
    value: Option<f64>,
    /// Bound of the uniform random disturbance.
    #[arg(long)]
    bound: Option<f64>,
    /// Disturbance file, one value per line.
    #[arg(long)]
    disturbance_file: Option<PathBuf>,
}

#[derive(Args, Default)]
struct SearchArgs {
    /// Candidate sequences evaluated by the adversarial search.
    #[arg(long)]
    budget: Option<usize>,
    /// Largest disturbance amplitude tried by the search.
    #[arg(long)]
    amplitude_max: Option<f64>,
}

#[derive(Args, Default)]
struct ViArgs {
    /// Sweep limit.
    #[arg(long)]
    max_iters: Option<usize>,
    /// Sup-norm change that counts as converged.
    #[arg(long)]
    tol: Option<f64>,
    /// Measurement grid size on [0, y_max].
    #[arg(long)]
    y_points: Option<usize>,
    /// Grid size for δ = r⁻ − r⁺.
    #[arg(long)]
    delta_points: Option<usize>,
    /// Control search grid size.
    #[arg(long)]
    u_points: Option<usize>,
    /// Next-measurement search grid size.
    #[arg(long)]
    v_points: Option<usize>,
    /// Refine the best grid control by golden-section search.
    #[arg(long)]
    refine_u: Option<bool>,
    /// Cap interpolated values by the certificate's V̄.
    #[arg(long)]
    cap_by_certificate: Option<bool>,
}

fn overrides(common: &Common) -> Overrides {
    Overrides {
        gamma: common.gamma,
        p: common.p,
        q: common.q,
        k: common.k,
        out: common.out.clone(),
        seed: common.seed,
        ..Overrides::default()
    }
}

fn with_run(mut o: Overrides, run: &RunArgs, search: &SearchArgs) -> Overrides {
    o.system = run.system.clone();
    o.policy = run.policy.clone();
    o.gain = run.gain;
    o.horizon = run.horizon;
    o.x0 = run.x0;
    o.disturbance = run.disturbance.clone();
    o.amplitude = run.amplitude;
    o.period = run.period;
    o.value = run.value;
    o.bound = run.bound;
    o.disturbance_file = run.disturbance_file.clone();
    o.budget = search.budget;
    o.amplitude_max = search.amplitude_max;
    o
}

fn execute(cli: Cli) -> Result<Finding, Failure> {
    let (common, o) = match &cli.command {
        Command::Simulate { common, run, search } | Command::GainSearch { common, run, search } => {
            (common, with_run(overrides(common), run, search))
        }
        Command::Vi { common, vi } => {
            let mut o = overrides(common);
            o.max_iters = vi.max_iters;
            o.tol = vi.tol;
            o.y_points = vi.y_points;
            o.delta_points = vi.delta_points;
            o.u_points = vi.u_points;
            o.v_points = vi.v_points;
            o.refine_u = vi.refine_u;
            o.cap_by_certificate = vi.cap_by_certificate;
            (common, o)
        }
        Command::Certify { common, samples } => (common, Overrides { samples: *samples, ..overrides(common) }),
        Command::OracleCheck { common, cases, max_horizon } => (
            common,
            Overrides { cases: *cases, max_horizon: *max_horizon, ..overrides(common) },
        ),
    };
    let file = match &common.config {
        Some(path) => config::read_file(path)?,
        None => FileConfig::default(),
    };
    let env_seed = std::env::var("DUALCTL_SEED").ok();
    let cfg = config::resolve(file, env_seed.as_deref(), &o)?;

    match cli.command {
        Command::Simulate { .. } => commands::simulate_cmd(&cfg),
        Command::Vi { .. } => commands::vi_cmd(&cfg),
        Command::Certify { .. } => commands::certify_cmd(&cfg),
        Command::GainSearch { .. } => commands::gain_search_cmd(&cfg),
        Command::OracleCheck { .. } => commands::oracle_check_cmd(&cfg),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(Finding::Clean) => ExitCode::SUCCESS,
        Ok(Finding::Violation) => ExitCode::from(1),
        Err(Failure::Config(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
