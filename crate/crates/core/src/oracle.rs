//! Brute-force worst-case histories.
//!
//! Enumerates every assignment of hypotheses to the measurement record
//! `y_0 … y_T` and sums the stage costs along the implied state path. When
//! the disturbance is determined by consecutive states this is exact, so
//! it serves as ground truth for the recursive information state.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::control::Policy;
use crate::error::{Error, Result};
use crate::extreal::ExtReal;
use crate::istate::{update_magnitude, InfoState};
use crate::sim::{simulate, Trajectory};
use crate::system::{Integrator, SystemModel};

pub const DEFAULT_MAX_HORIZON: usize = 16;
pub const DEFAULT_ENUMERATION_CAP: u64 = 10_000_000;

/// One hypothesis path through the measurement record.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryPath<W> {
    pub indices: Vec<usize>,
    /// `None` where no admissible disturbance realizes the transition.
    pub disturbances: Vec<Option<W>>,
    pub cost: ExtReal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistoryEnumeration<W> {
    pub horizon: usize,
    pub paths: Vec<HistoryPath<W>>,
}

impl<W> HistoryEnumeration<W> {
    pub fn worst_ending_in(&self, terminal: usize) -> ExtReal {
        ExtReal::max_of(
            self.paths
                .iter()
                .filter(|p| p.indices.last() == Some(&terminal))
                .map(|p| p.cost),
        )
    }
}

fn check_lengths<Y>(y_seq: &[Y], u_seq: &[f64], max_horizon: usize) -> Result<usize> {
    if y_seq.len() != u_seq.len() + 1 {
        return Err(Error::InvalidArgument(format!(
            "need len(y) = len(u) + 1, got {} and {}",
            y_seq.len(),
            u_seq.len()
        )));
    }
    let horizon = u_seq.len();
    if horizon > max_horizon {
        return Err(Error::ResourceLimit(format!(
            "horizon {horizon} exceeds the enumeration cap {max_horizon}"
        )));
    }
    Ok(horizon)
}

/// Every hypothesis path with its disturbances and accumulated cost.
pub fn enumerate_histories<S: SystemModel>(
    system: &S,
    y_seq: &[S::Measurement],
    u_seq: &[f64],
    gamma: f64,
    max_horizon: usize,
) -> Result<HistoryEnumeration<S::Disturbance>> {
    let horizon = check_lengths(y_seq, u_seq, max_horizon)?;
    let preimages = y_seq
        .iter()
        .map(|y| system.preimage(y))
        .collect::<Result<Vec<_>>>()?;
    let m = system.hypothesis_bound();
    let total = m.checked_pow((horizon + 1) as u32).ok_or_else(|| {
        Error::ResourceLimit("hypothesis path count overflows".into())
    })?;

    let mut paths = Vec::with_capacity(total);
    let mut indices = vec![0usize; horizon + 1];
    for code in 0..total {
        let mut c = code;
        for idx in indices.iter_mut() {
            *idx = c % m;
            c /= m;
        }
        let mut cost = ExtReal::ZERO;
        let mut disturbances = Vec::with_capacity(horizon);
        for tau in 0..horizon {
            let prev = &preimages[tau][indices[tau]];
            let next = &preimages[tau + 1][indices[tau + 1]];
            let w = system
                .disturbance_from_transition(next, prev, u_seq[tau])
                .filter(|w| system.disturbance_feasible(w));
            match &w {
                Some(w) => cost = cost + system.stage_cost(prev, u_seq[tau], w, gamma),
                None => cost = ExtReal::NEG_INFINITY,
            }
            disturbances.push(w);
        }
        paths.push(HistoryPath { indices: indices.clone(), disturbances, cost });
    }
    Ok(HistoryEnumeration { horizon, paths })
}

/// Largest accumulated cost over hypothesis paths ending in
/// `terminal_index`; −∞ if none is feasible.
pub fn worst_case_history<S: SystemModel>(
    system: &S,
    y_seq: &[S::Measurement],
    u_seq: &[f64],
    gamma: f64,
    terminal_index: usize,
) -> Result<ExtReal> {
    if terminal_index >= system.hypothesis_bound() {
        return Err(Error::InvalidArgument(format!(
            "terminal index {terminal_index} out of range"
        )));
    }
    Ok(brute_force_r(system, y_seq, u_seq, gamma)?[terminal_index])
}

/// [`worst_case_history`] for every terminal index, via depth-first
/// enumeration (no path storage).
pub fn brute_force_r<S: SystemModel>(
    system: &S,
    y_seq: &[S::Measurement],
    u_seq: &[f64],
    gamma: f64,
) -> Result<Vec<ExtReal>> {
    brute_force_r_capped(system, y_seq, u_seq, gamma, DEFAULT_MAX_HORIZON)
}

pub fn brute_force_r_capped<S: SystemModel>(
    system: &S,
    y_seq: &[S::Measurement],
    u_seq: &[f64],
    gamma: f64,
    max_horizon: usize,
) -> Result<Vec<ExtReal>> {
    check_lengths(y_seq, u_seq, max_horizon)?;
    let preimages = y_seq
        .iter()
        .map(|y| system.preimage(y))
        .collect::<Result<Vec<_>>>()?;
    let m = system.hypothesis_bound();
    let mut best = vec![ExtReal::NEG_INFINITY; m];

    struct Walk<'a, S: SystemModel> {
        system: &'a S,
        preimages: &'a [Vec<S::State>],
        u_seq: &'a [f64],
        gamma: f64,
        best: &'a mut [ExtReal],
    }

    impl<S: SystemModel> Walk<'_, S> {
        fn visit(&mut self, tau: usize, index: usize, cost: f64) {
            if tau == self.u_seq.len() {
                let c = ExtReal::from_kernel(cost);
                self.best[index] = self.best[index].max(c);
                return;
            }
            let prev = &self.preimages[tau][index];
            for next_index in 0..self.preimages[tau + 1].len() {
                let next = &self.preimages[tau + 1][next_index];
                let Some(w) = self.system.disturbance_from_transition(next, prev, self.u_seq[tau])
                else {
                    continue;
                };
                if !self.system.disturbance_feasible(&w) {
                    continue;
                }
                let stage = self.system.stage_cost(prev, self.u_seq[tau], &w, self.gamma);
                self.visit(tau + 1, next_index, cost + stage);
            }
        }
    }

    let mut walk = Walk {
        system,
        preimages: &preimages,
        u_seq,
        gamma,
        best: &mut best,
    };
    for start in 0..m {
        walk.visit(0, start, 0.0);
    }
    Ok(best)
}

/// Closed-loop cost `Σ_{t=0}^{N} l(x_t, u_t, w_t)` of the integrator under
/// one disturbance realization; a lower bound on the worst case.
pub fn evaluate_cost<P: Policy>(
    policy: &P,
    w_seq: &[f64],
    x0: f64,
    gamma: f64,
    horizon: usize,
) -> Result<(f64, Trajectory)> {
    if w_seq.len() != horizon + 1 {
        return Err(Error::InvalidArgument(format!(
            "need {} disturbances for horizon {horizon}, got {}",
            horizon + 1,
            w_seq.len()
        )));
    }
    let traj = simulate(policy, w_seq, x0, gamma, None)?;
    Ok((traj.total_cost(), traj))
}

/// `max` over measurement sequences `y_1 … y_{N+1}` drawn from `v_grid` of
/// `max_i r_{N+1}^i`, with controls generated by `policy`; a lower bound on
/// the policy's worst-case objective from `y0`.
pub fn sup_objective_grid<P: Policy>(
    policy: &P,
    gamma: f64,
    y0: f64,
    horizon: usize,
    v_grid: &[f64],
    cap: u64,
) -> Result<f64> {
    if v_grid.is_empty() {
        return Err(Error::InvalidArgument("v_grid must be nonempty".into()));
    }
    let leaves = (v_grid.len() as u64)
        .checked_pow((horizon + 1) as u32)
        .filter(|n| *n <= cap)
        .ok_or_else(|| {
            Error::ResourceLimit(format!(
                "{}^{} measurement sequences exceed the cap {cap}",
                v_grid.len(),
                horizon + 1
            ))
        })?;
    log::debug!("sup_objective_grid: enumerating {leaves} sequences");

    fn descend<P: Policy>(
        policy: &P,
        gamma: f64,
        v_grid: &[f64],
        state: &InfoState<f64>,
        t: usize,
        horizon: usize,
    ) -> Result<f64> {
        let u = policy.control(state, t)?;
        if !u.is_finite() {
            return Err(Error::PolicyFault { policy: policy.name().to_string(), t, u });
        }
        let mut best = f64::NEG_INFINITY;
        for &v in v_grid {
            let next = update_magnitude(state, u, v, gamma)?;
            let value = if t == horizon {
                next.max_entry().value()
            } else {
                descend(policy, gamma, v_grid, &next, t + 1, horizon)?
            };
            best = best.max(value);
        }
        Ok(best)
    }

    descend(policy, gamma, v_grid, &InfoState::initial(y0), 0, horizon)
}

/// Brute-force `r` for the magnitude-measured integrator.
pub fn brute_force_r_magnitude(y_seq: &[f64], u_seq: &[f64], gamma: f64) -> Result<[f64; 2]> {
    let r = brute_force_r(&Integrator, y_seq, u_seq, gamma)?;
    Ok([r[0].value(), r[1].value()])
}

/// Outcome of comparing the recursion against enumeration on random
/// sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceReport {
    pub cases: usize,
    pub failures: usize,
    pub max_abs_error: f64,
}

/// Draws `sequences` random `(y, u)` records with horizons `1..=max_horizon`
/// (`y ∈ [0, 3]`, `u ∈ [−3, 3]`) and compares the recursive `r` with
/// [`brute_force_r_magnitude`] for every `γ` in `gammas`. A case fails if
/// an entry differs by `tol` or more.
pub fn equivalence_suite(
    sequences: usize,
    max_horizon: usize,
    gammas: &[f64],
    seed: u64,
    tol: f64,
) -> Result<EquivalenceReport> {
    if max_horizon == 0 || max_horizon > DEFAULT_MAX_HORIZON {
        return Err(Error::InvalidArgument(format!(
            "max_horizon must be in 1..={DEFAULT_MAX_HORIZON}, got {max_horizon}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = EquivalenceReport { cases: 0, failures: 0, max_abs_error: 0.0 };
    for _ in 0..sequences {
        let n = rng.gen_range(1..=max_horizon);
        let ys: Vec<f64> = (0..=n).map(|_| rng.gen_range(0.0..3.0)).collect();
        let us: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        for &gamma in gammas {
            let mut state = InfoState::initial(ys[0]);
            for t in 0..n {
                state = update_magnitude(&state, us[t], ys[t + 1], gamma)?;
            }
            let brute = brute_force_r_magnitude(&ys, &us, gamma)?;
            let err = state
                .pair()
                .iter()
                .zip(brute)
                .map(|(a, b)| if *a == b { 0.0 } else { (a - b).abs() })
                .fold(0.0, f64::max);
            report.cases += 1;
            report.max_abs_error = report.max_abs_error.max(err);
            if err >= tol || err.is_nan() {
                report.failures += 1;
            }
        }
    }
    Ok(report)
}
