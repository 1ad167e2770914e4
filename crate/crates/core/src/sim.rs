//! Closed-loop simulation of the magnitude-measured integrator, disturbance
//! generation, ℓ2-gain accounting and a falsification search over
//! disturbance sequences.
//!
//! Step `t` measures `y_t = |x_t|`, asks the policy for `u_t`, applies
//! `w_t` and then updates the information state with `y_{t+1}`. Gain sums
//! run over `t = 0…N` on both sides.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::certify::{vbar_raw, Certificate};
use crate::control::Policy;
use crate::error::{ensure_positive, Error, Result};
use crate::istate::{update_magnitude, InfoState};

/// `|x|` beyond which a run is declared divergent.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

pub const TRAJECTORY_HEADER: &str = "t,x,y,u,w,r_plus,r_minus,vbar,cum_cost,cum_dist";

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: usize,
    pub x: f64,
    pub y: f64,
    pub u: f64,
    pub w: f64,
    /// Information state at time `t`, before `y_{t+1}` is incorporated.
    pub r_plus: f64,
    pub r_minus: f64,
    pub vbar: Option<f64>,
    /// `Σ_{τ≤t} (x_τ² + u_τ²)`.
    pub cum_cost: f64,
    /// `Σ_{τ≤t} w_τ²`.
    pub cum_dist: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub records: Vec<StepRecord>,
    pub gamma: f64,
    pub policy: String,
    pub x0: f64,
    pub horizon: usize,
    pub seed: Option<u64>,
    /// `x_{N+1}` and `r_{N+1}` after the last recorded step.
    pub final_x: f64,
    pub final_r: [f64; 2],
    pub final_vbar: Option<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&StepRecord> {
        self.records.last()
    }

    /// `Σ (x² + u² − γ²w²)` over the recorded steps.
    pub fn total_cost(&self) -> f64 {
        self.last()
            .map(|r| r.cum_cost - self.gamma * self.gamma * r.cum_dist)
            .unwrap_or(0.0)
    }

    /// Largest `cum_cost_t − γ²·cum_dist_t` over prefixes.
    pub fn worst_prefix_cost(&self) -> f64 {
        let g2 = self.gamma * self.gamma;
        self.records
            .iter()
            .map(|r| r.cum_cost - g2 * r.cum_dist)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `min_t (γ²·cum_dist_t + bias − cum_cost_t)`; nonnegative iff the gain
    /// inequality holds on every prefix.
    pub fn gain_slack(&self, bias: f64) -> f64 {
        let g2 = self.gamma * self.gamma;
        self.records
            .iter()
            .map(|r| g2 * r.cum_dist + bias - r.cum_cost)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.records.len() + 1));
        out.push_str(TRAJECTORY_HEADER);
        out.push('\n');
        for r in &self.records {
            let vbar = r.vbar.map(|v| v.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.t, r.x, r.y, r.u, r.w, r.r_plus, r.r_minus, vbar, r.cum_cost, r.cum_dist
            );
        }
        out
    }
}

/// `sqrt(cum_cost / cum_dist)` at the final step; `0/0 = 0`, `c/0 = ∞`.
pub fn empirical_gain(traj: &Trajectory) -> f64 {
    traj.last().map(|r| gain_ratio(r.cum_cost, r.cum_dist)).unwrap_or(0.0)
}

/// Running maximum of the prefix gain ratios.
pub fn running_max_gain(traj: &Trajectory) -> f64 {
    traj.records
        .iter()
        .map(|r| gain_ratio(r.cum_cost, r.cum_dist))
        .fold(0.0, f64::max)
}

fn gain_ratio(cost: f64, dist: f64) -> f64 {
    if dist == 0.0 {
        if cost == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (cost / dist).sqrt()
    }
}

/// Disturbance families.
#[derive(Debug, Clone, PartialEq)]
pub enum DisturbanceSpec {
    /// `amplitude·sin(2πt/period)`; period 20 gives `sin(πt/10)`.
    Sinusoid { amplitude: f64, period: f64 },
    Constant { value: f64 },
    /// i.i.d. uniform on `[−bound, bound]`.
    RandomUniform { bound: f64, seed: u64 },
    /// One real per line.
    File { path: PathBuf },
    /// Resolved by running [`adversarial_search`] against the policy.
    Adversarial(SearchSettings),
}

impl DisturbanceSpec {
    pub fn sinusoid() -> Self {
        DisturbanceSpec::Sinusoid { amplitude: 1.0, period: 20.0 }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            DisturbanceSpec::Sinusoid { .. } => "sinusoid",
            DisturbanceSpec::Constant { .. } => "constant",
            DisturbanceSpec::RandomUniform { .. } => "random-uniform",
            DisturbanceSpec::File { .. } => "file",
            DisturbanceSpec::Adversarial(_) => "adversarial",
        }
    }
}

/// A sequence `w_0 … w_N` (length `N + 1`).
pub fn generate_disturbance(spec: &DisturbanceSpec, horizon: usize) -> Result<Vec<f64>> {
    let n = horizon + 1;
    match spec {
        DisturbanceSpec::Sinusoid { amplitude, period } => {
            ensure_positive("period", *period)?;
            Ok((0..n)
                .map(|t| amplitude * (2.0 * std::f64::consts::PI * t as f64 / period).sin())
                .collect())
        }
        DisturbanceSpec::Constant { value } => Ok(vec![*value; n]),
        DisturbanceSpec::RandomUniform { bound, seed } => {
            if !(bound.is_finite() && *bound >= 0.0) {
                return Err(Error::InvalidArgument(format!("bound must be >= 0, got {bound}")));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            Ok((0..n).map(|_| uniform(&mut rng, *bound)).collect())
        }
        DisturbanceSpec::File { path } => read_disturbance_file(path, horizon),
        DisturbanceSpec::Adversarial(_) => Err(Error::InvalidArgument(
            "adversarial disturbances depend on the policy; use resolve_disturbance".into(),
        )),
    }
}

/// Like [`generate_disturbance`], but runs the adversarial search for the
/// adversarial kind.
pub fn resolve_disturbance<P: Policy>(
    spec: &DisturbanceSpec,
    horizon: usize,
    policy: &P,
    x0: f64,
    gamma: f64,
) -> Result<Vec<f64>> {
    match spec {
        DisturbanceSpec::Adversarial(settings) => {
            Ok(adversarial_search(policy, x0, gamma, horizon, settings)?.w)
        }
        other => generate_disturbance(other, horizon),
    }
}

fn uniform(rng: &mut ChaCha8Rng, bound: f64) -> f64 {
    if bound == 0.0 {
        0.0
    } else {
        rng.gen_range(-bound..=bound)
    }
}

/// Parses one real per line; blank lines are skipped. Truncated to
/// `horizon + 1` values; fewer values is an error.
pub fn parse_disturbance(text: &str, horizon: usize) -> Result<Vec<f64>> {
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let v: f64 = line.parse().map_err(|_| Error::Parse {
            line: i + 1,
            msg: format!("expected a real number, found `{line}`"),
        })?;
        if !v.is_finite() {
            return Err(Error::Parse { line: i + 1, msg: format!("non-finite value {v}") });
        }
        values.push(v);
    }
    if values.len() < horizon + 1 {
        return Err(Error::Parse {
            line: text.lines().count(),
            msg: format!("need {} values, found {}", horizon + 1, values.len()),
        });
    }
    values.truncate(horizon + 1);
    Ok(values)
}

pub fn read_disturbance_file(path: &Path, horizon: usize) -> Result<Vec<f64>> {
    parse_disturbance(&std::fs::read_to_string(path)?, horizon)
}

/// Runs the closed loop for `w_seq.len()` steps starting from `x0`.
pub fn simulate<P: Policy>(
    policy: &P,
    w_seq: &[f64],
    x0: f64,
    gamma: f64,
    cert: Option<&Certificate>,
) -> Result<Trajectory> {
    ensure_positive("gamma", gamma)?;
    if !x0.is_finite() {
        return Err(Error::InvalidArgument(format!("x0 must be finite, got {x0}")));
    }
    if let Some(w) = w_seq.iter().find(|w| !w.is_finite()) {
        return Err(Error::InvalidArgument(format!("disturbance must be finite, got {w}")));
    }
    let mut traj = Trajectory {
        records: Vec::with_capacity(w_seq.len()),
        gamma,
        policy: policy.name().to_string(),
        x0,
        horizon: w_seq.len().saturating_sub(1),
        seed: None,
        final_x: x0,
        final_r: [0.0, 0.0],
        final_vbar: None,
    };
    let mut x = x0;
    let mut state = InfoState::initial(x0.abs());
    let (mut cum_cost, mut cum_dist) = (0.0, 0.0);

    for (t, &w) in w_seq.iter().enumerate() {
        let y = state.y;
        let u = policy.control(&state, t)?;
        if !u.is_finite() {
            return Err(Error::PolicyFault { policy: policy.name().to_string(), t, u });
        }
        cum_cost += x * x + u * u;
        cum_dist += w * w;
        let r = state.pair();
        traj.records.push(StepRecord {
            t,
            x,
            y,
            u,
            w,
            r_plus: r[0],
            r_minus: r[1],
            vbar: cert.map(|c| vbar_raw(r, y, c)),
            cum_cost,
            cum_dist,
        });

        let x_next = x + u + w;
        if x_next.is_nan() || x_next.abs() > DIVERGENCE_LIMIT {
            traj.final_x = x_next;
            traj.final_r = r;
            return Err(Error::Diverged { t, limit: DIVERGENCE_LIMIT, partial: Box::new(traj) });
        }
        state = update_magnitude(&state, u, x_next.abs(), gamma)?;
        x = x_next;
    }

    traj.final_x = x;
    traj.final_r = state.pair();
    traj.final_vbar = cert.map(|c| vbar_raw(traj.final_r, state.y, c));
    Ok(traj)
}

/// Like [`simulate`], but a divergent run yields its partial trajectory.
pub fn simulate_lossy<P: Policy>(
    policy: &P,
    w_seq: &[f64],
    x0: f64,
    gamma: f64,
    cert: Option<&Certificate>,
) -> Result<(Trajectory, bool)> {
    match simulate(policy, w_seq, x0, gamma, cert) {
        Ok(t) => Ok((t, false)),
        Err(Error::Diverged { partial, .. }) => Ok((*partial, true)),
        Err(e) => Err(e),
    }
}

/// Candidate families and budget for [`adversarial_search`].
#[derive(Debug, Clone, PartialEq)]
pub struct SearchSettings {
    /// Total number of candidate sequences evaluated.
    pub budget: usize,
    pub seed: u64,
    /// Largest disturbance amplitude tried.
    pub amplitude_max: f64,
    pub constant: bool,
    pub switching: bool,
    pub greedy: bool,
    pub random: bool,
    /// Spend the remaining budget perturbing the best candidate found.
    pub refine: bool,
}

impl Default for SearchSettings {
    fn default() -> Self {
        SearchSettings {
            budget: 10_000,
            seed: 0,
            amplitude_max: 5.0,
            constant: true,
            switching: true,
            greedy: true,
            random: true,
            refine: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub w: Vec<f64>,
    /// Largest prefix value of `cum_cost − γ²·cum_dist` under `w`.
    pub value: f64,
    pub family: String,
    pub candidates: usize,
    pub diverged: bool,
}

struct Search<'a, P: Policy> {
    policy: &'a P,
    x0: f64,
    gamma: f64,
    budget: usize,
    evaluated: usize,
    best: SearchOutcome,
}

impl<P: Policy> Search<'_, P> {
    fn exhausted(&self) -> bool {
        self.evaluated >= self.budget
    }

    fn try_candidate(&mut self, w: Vec<f64>, family: &str) -> Result<()> {
        if self.exhausted() {
            return Ok(());
        }
        self.evaluated += 1;
        let (traj, diverged) = simulate_lossy(self.policy, &w, self.x0, self.gamma, None)?;
        let value = traj.worst_prefix_cost();
        if value > self.best.value {
            self.best = SearchOutcome {
                w,
                value,
                family: family.to_string(),
                candidates: 0,
                diverged,
            };
        }
        Ok(())
    }
}

fn amplitude_grid(max: f64, n: usize) -> Vec<f64> {
    (1..=n).map(|i| max * i as f64 / n as f64).collect()
}

/// Falsification probe for the sup over disturbances of
/// `Σ (x² + u² − γ²w²)`: evaluates constant, sign-switching, greedy and
/// random candidates, then locally perturbs the best one. Deterministic for
/// a fixed seed.
pub fn adversarial_search<P: Policy>(
    policy: &P,
    x0: f64,
    gamma: f64,
    horizon: usize,
    settings: &SearchSettings,
) -> Result<SearchOutcome> {
    ensure_positive("gamma", gamma)?;
    if horizon > 200 {
        return Err(Error::InvalidArgument(format!("horizon {horizon} exceeds 200")));
    }
    if settings.budget == 0 {
        return Err(Error::InvalidArgument("search budget must be at least 1".into()));
    }
    let n = horizon + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut search = Search {
        policy,
        x0,
        gamma,
        budget: settings.budget,
        evaluated: 0,
        best: SearchOutcome {
            w: vec![0.0; n],
            value: f64::NEG_INFINITY,
            family: "zero".into(),
            candidates: 0,
            diverged: false,
        },
    };
    search.try_candidate(vec![0.0; n], "zero")?;

    let amps = amplitude_grid(settings.amplitude_max, 20);
    if settings.constant {
        for &a in &amps {
            for s in [1.0, -1.0] {
                search.try_candidate(vec![s * a; n], "constant")?;
            }
        }
    }
    if settings.switching {
        for block in [1usize, 2, 3, 4, 5, 8, 10] {
            for &a in amps.iter().step_by(2) {
                for s in [1.0, -1.0] {
                    let w = (0..n)
                        .map(|t| if (t / block) % 2 == 0 { s * a } else { -s * a })
                        .collect();
                    search.try_candidate(w, "switching")?;
                }
            }
        }
        // single bursts followed by silence
        for len in [1usize, 2, 3, 5] {
            for &a in amps.iter().step_by(4) {
                for s in [1.0, -1.0] {
                    let w = (0..n).map(|t| if t < len { s * a } else { 0.0 }).collect();
                    search.try_candidate(w, "burst")?;
                }
            }
        }
    }
    if settings.greedy {
        for &a in amps.iter().step_by(4) {
            let w = greedy_sequence(policy, x0, gamma, n, a)?;
            search.try_candidate(w, "greedy")?;
        }
    }
    if settings.random {
        let share = settings.budget / 4;
        for i in 0..share {
            if search.exhausted() {
                break;
            }
            let a = amps[i % amps.len()];
            let w = if i % 2 == 0 {
                (0..n).map(|_| uniform(&mut rng, a)).collect()
            } else {
                // sparse impulses
                (0..n)
                    .map(|_| if rng.gen_bool(0.2) { uniform(&mut rng, a) } else { 0.0 })
                    .collect()
            };
            search.try_candidate(w, "random")?;
        }
    }
    if settings.refine {
        while !search.exhausted() {
            let mut w = search.best.w.clone();
            let scale = 0.05 + 0.5 * rng.gen::<f64>();
            let changes = 1 + rng.gen_range(0..n.min(4));
            for _ in 0..changes {
                let t = rng.gen_range(0..n);
                let a = settings.amplitude_max;
                w[t] = (w[t] + uniform(&mut rng, scale * a.max(1e-3))).clamp(-a, a);
            }
            search.try_candidate(w, "refine")?;
        }
    }

    let mut best = search.best;
    best.candidates = search.evaluated;
    Ok(best)
}

/// Chooses each `w_t` from a grid on `[−amplitude, amplitude]` to maximize
/// the next stage's `x² + u² − γ²w²` given the policy's response.
fn greedy_sequence<P: Policy>(policy: &P, x0: f64, gamma: f64, n: usize, amplitude: f64) -> Result<Vec<f64>> {
    let g2 = gamma * gamma;
    let grid: Vec<f64> = (-20..=20).map(|i| amplitude * i as f64 / 20.0).collect();
    let mut w_seq = Vec::with_capacity(n);
    let mut x = x0;
    let mut state = InfoState::initial(x0.abs());
    for t in 0..n {
        let u = policy.control(&state, t)?;
        if !u.is_finite() {
            return Err(Error::PolicyFault { policy: policy.name().to_string(), t, u });
        }
        let mut best = (f64::NEG_INFINITY, 0.0);
        for &w in &grid {
            let x_next = x + u + w;
            if x_next.abs() > DIVERGENCE_LIMIT {
                continue;
            }
            let next_state = update_magnitude(&state, u, x_next.abs(), gamma)?;
            let u_next = policy.control(&next_state, t + 1)?;
            let score = x_next * x_next + u_next * u_next - g2 * w * w;
            if score > best.0 {
                best = (score, w);
            }
        }
        let w = best.1;
        w_seq.push(w);
        let x_next = x + u + w;
        state = update_magnitude(&state, u, x_next.abs(), gamma)?;
        x = x_next;
    }
    Ok(w_seq)
}
