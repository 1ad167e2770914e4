//! Grid value iteration for the magnitude-measured integrator.
//!
//! Values are translation-equivariant in `r`, so only the normalised
//! function `W(δ, y) = V(r − 𝟏·max r, y)` with `δ = r⁻ − r⁺` is stored:
//!
//! ```text
//! V(r, y) = max(r⁺, r⁻) + W(r⁻ − r⁺, y)
//! ```
//!
//! The normalised state is `(−δ, 0)` for `δ ≥ 0` and `(0, δ)` otherwise.
//! `W` is bilinearly interpolated on a `(δ, y)` grid; queries outside the
//! grid are clamped. One sweep evaluates
//! `min_u max_v V_k(g(r, v, y, u), v)` at every node, with `u` and `v`
//! restricted to search grids.

use std::fmt::Write as _;

use crate::certify::Certificate;
use crate::control::Policy;
use crate::error::{ensure_positive, Error, Result};
use crate::istate::{magnitude_kernel, InfoState};

/// Grid sizes and iteration settings.
#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    pub gamma: f64,
    pub y_max: f64,
    pub y_points: usize,
    pub delta_max: f64,
    pub delta_points: usize,
    pub u_max: f64,
    pub u_points: usize,
    pub v_max: f64,
    pub v_points: usize,
    /// Extra controls `c·y` tried at every node.
    pub u_gains: Vec<f64>,
    /// Golden-section refinement of the best grid control.
    pub refine_u: bool,
    /// Certificate whose `V̄` caps interpolated values. Exact iterates never
    /// exceed a valid certificate, so the cap only removes interpolation
    /// overshoot.
    pub reference: Option<Certificate>,
    /// Divergence threshold on node values.
    pub value_cap: f64,
    pub tol: f64,
}

impl GridConfig {
    /// Default grids: `y ∈ [0, 5]` (51), `δ ∈ [−50, 50]` (101),
    /// `u ∈ [−7.5, 7.5]` (61), `v ∈ [0, 25]` (61) and a value cap of
    /// `10³·7·y_max²`.
    pub fn new(gamma: f64) -> Self {
        let y_max = 5.0;
        let u_max = 1.5 * y_max;
        GridConfig {
            gamma,
            y_max,
            y_points: 51,
            delta_max: 50.0,
            delta_points: 101,
            u_max,
            u_points: 61,
            v_max: 2.0 * (y_max + u_max),
            v_points: 61,
            u_gains: linspace(-1.5, 1.5, 31),
            refine_u: false,
            reference: None,
            value_cap: 1e3 * 7.0 * y_max * y_max,
            tol: 1e-6,
        }
    }

    pub fn with_reference(mut self, cert: Certificate) -> Self {
        self.reference = Some(cert);
        self
    }

    fn validate(&self) -> Result<()> {
        ensure_positive("gamma", self.gamma)?;
        ensure_positive("y_max", self.y_max)?;
        ensure_positive("delta_max", self.delta_max)?;
        ensure_positive("u_max", self.u_max)?;
        ensure_positive("v_max", self.v_max)?;
        ensure_positive("value_cap", self.value_cap)?;
        for (name, n) in [
            ("y_points", self.y_points),
            ("delta_points", self.delta_points),
            ("u_points", self.u_points),
            ("v_points", self.v_points),
        ] {
            if n < 2 {
                return Err(Error::InvalidArgument(format!("{name} must be at least 2, got {n}")));
            }
        }
        Ok(())
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            if i + 1 == n {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            }
        })
        .collect()
}

/// Normalised value function on the `(δ, y)` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueGrid {
    config: GridConfig,
    delta: Vec<f64>,
    y: Vec<f64>,
    u_grid: Vec<f64>,
    v_grid: Vec<f64>,
    /// δ-major: `values[i_delta * y.len() + i_y]`.
    values: Vec<f64>,
    iteration: usize,
    verdict: Option<Verdict>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Converged,
    Diverged,
    IterationCapped,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Converged => "converged",
            Verdict::Diverged => "diverged",
            Verdict::IterationCapped => "iteration-capped",
        })
    }
}

/// `max_v` of the Bellman objective for one control.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BellmanEval {
    pub value: f64,
    pub v: f64,
    /// The maximum sat on the last v-grid point.
    pub boundary_active: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BellmanStep {
    pub value: f64,
    pub u: f64,
    pub boundary_active: bool,
}

/// Per-sweep diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepStats {
    pub iteration: usize,
    /// `max |W_{k+1} − W_k|`.
    pub max_change: f64,
    /// `min (W_{k+1} − W_k)`; negative values break monotonicity.
    pub min_increment: f64,
    pub max_value: f64,
    /// Nodes whose inner maximum sat on the v-grid boundary.
    pub boundary_nodes: usize,
    /// Interpolation queries clamped to the grid during the sweep.
    pub clamped_queries: usize,
}

#[derive(Debug, Clone)]
pub struct ViRun {
    pub grid: ValueGrid,
    pub verdict: Verdict,
    pub sweeps: Vec<SweepStats>,
}

impl ValueGrid {
    /// Grid initialised to `V₀(r, y) = max_i rⁱ`, i.e. `W₀ ≡ 0`.
    pub fn new(config: GridConfig) -> Result<Self> {
        config.validate()?;
        let delta = linspace(-config.delta_max, config.delta_max, config.delta_points);
        let y = linspace(0.0, config.y_max, config.y_points);
        let u_grid = linspace(-config.u_max, config.u_max, config.u_points);
        let v_grid = linspace(0.0, config.v_max, config.v_points);
        let values = vec![0.0; delta.len() * y.len()];
        Ok(ValueGrid {
            config,
            delta,
            y,
            u_grid,
            v_grid,
            values,
            iteration: 0,
            verdict: None,
        })
    }

    pub fn config(&self) -> &GridConfig {
        &self.config
    }

    pub fn gamma(&self) -> f64 {
        self.config.gamma
    }

    pub fn delta_nodes(&self) -> &[f64] {
        &self.delta
    }

    pub fn y_nodes(&self) -> &[f64] {
        &self.y
    }

    pub fn u_grid(&self) -> &[f64] {
        &self.u_grid
    }

    pub fn v_grid(&self) -> &[f64] {
        &self.v_grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn verdict(&self) -> Option<Verdict> {
        self.verdict
    }

    /// Stored `W` at node `(i_delta, i_y)`.
    pub fn node(&self, i_delta: usize, i_y: usize) -> f64 {
        self.values[i_delta * self.y.len() + i_y]
    }

    /// The normalised hypothesis pair represented by `δ`.
    pub fn normalized_pair(delta: f64) -> [f64; 2] {
        if delta >= 0.0 {
            [-delta, 0.0]
        } else {
            [0.0, delta]
        }
    }

    /// Bilinear interpolation of `W`, clamped to the grid and capped by the
    /// reference bound when one is set. The flag reports clamping.
    #[inline]
    fn interp(&self, delta: f64, y: f64) -> (f64, bool) {
        let nd = self.delta.len();
        let ny = self.y.len();
        let dmax = self.config.delta_max;
        let ymax = self.config.y_max;
        let clamped = !(delta >= -dmax && delta <= dmax && y <= ymax);
        let d = delta.clamp(-dmax, dmax);
        let yy = y.clamp(0.0, ymax);

        let fd = (d + dmax) / (2.0 * dmax) * (nd - 1) as f64;
        let fy = yy / ymax * (ny - 1) as f64;
        let id = (fd.floor() as usize).min(nd - 2);
        let iy = (fy.floor() as usize).min(ny - 2);
        let td = fd - id as f64;
        let ty = fy - iy as f64;
        let base = id * ny + iy;
        let v00 = self.values[base];
        let v01 = self.values[base + 1];
        let v10 = self.values[base + ny];
        let v11 = self.values[base + ny + 1];
        let w = (1.0 - td) * ((1.0 - ty) * v00 + ty * v01) + td * ((1.0 - ty) * v10 + ty * v11);
        match &self.config.reference {
            Some(cert) => (w.min(crate::certify::vbar_raw(Self::normalized_pair(delta), y, cert)), clamped),
            None => (w, clamped),
        }
    }

    /// `V(r, y) = max r + W(r⁻ − r⁺, y)`.
    pub fn value(&self, r: [f64; 2], y: f64) -> Result<f64> {
        if r[0] == f64::NEG_INFINITY && r[1] == f64::NEG_INFINITY {
            return Err(Error::InfeasibleState);
        }
        let (w, clamped) = self.interp(r[1] - r[0], y);
        if clamped {
            log::trace!("value query ({r:?}, {y}) clamped to the grid");
        }
        Ok(r[0].max(r[1]) + w)
    }

    #[inline]
    fn continuation(&self, r: [f64; 2], y: f64, u: f64, v: f64, clamped: &mut usize) -> f64 {
        let next = magnitude_kernel(r, y, u, v, self.config.gamma);
        let top = next[0].max(next[1]);
        let delta = if next[0] == f64::NEG_INFINITY {
            f64::INFINITY
        } else if next[1] == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            next[1] - next[0]
        };
        let (w, c) = self.interp(delta, v);
        *clamped += c as usize;
        top + w
    }

    fn bellman_u_counted(&self, r: [f64; 2], y: f64, u: f64, clamped: &mut usize) -> BellmanEval {
        let last = self.v_grid.len() - 1;
        let mut best = BellmanEval { value: f64::NEG_INFINITY, v: 0.0, boundary_active: false };
        for (i, &v) in self.v_grid.iter().enumerate() {
            let val = self.continuation(r, y, u, v, clamped);
            if val > best.value {
                best = BellmanEval { value: val, v, boundary_active: i == last };
            }
        }
        // zero-disturbance continuations
        for v in [(u + y).abs(), (u - y).abs()] {
            if v <= self.config.v_max {
                let val = self.continuation(r, y, u, v, clamped);
                if val > best.value {
                    best = BellmanEval { value: val, v, boundary_active: false };
                }
            }
        }
        best
    }

    fn bellman_step_counted(&self, r: [f64; 2], y: f64, clamped: &mut usize) -> BellmanStep {
        let mut best: Option<(f64, f64, bool)> = None;
        for &u in &self.u_grid {
            let e = self.bellman_u_counted(r, y, u, clamped);
            if best.is_none_or(|b| prefer(e.value, u, b.0, b.1)) {
                best = Some((e.value, u, e.boundary_active));
            }
        }
        let (mut value, mut u, mut boundary) = best.expect("u grid is nonempty");
        for &c in &self.config.u_gains {
            let uc = c * y;
            let e = self.bellman_u_counted(r, y, uc, clamped);
            if prefer(e.value, uc, value, u) {
                value = e.value;
                u = uc;
                boundary = e.boundary_active;
            }
        }

        if self.config.refine_u {
            let h = self.u_grid[1] - self.u_grid[0];
            let (lo, hi) = (u - h, u + h);
            let (ru, rv) = golden_min_arg(
                |uu| self.bellman_u_counted(r, y, uu, &mut 0).value,
                lo,
                hi,
                40,
            );
            if prefer(rv, ru, value, u) {
                let e = self.bellman_u_counted(r, y, ru, clamped);
                value = e.value;
                u = ru;
                boundary = e.boundary_active;
            }
        }
        BellmanStep { value, u, boundary_active: boundary }
    }

    /// `max_v V(g(r, v, y, u), v)` over the v-grid and the two
    /// zero-disturbance measurements `|u ± y|`.
    pub fn bellman_u(&self, r: [f64; 2], y: f64, u: f64) -> Result<BellmanEval> {
        self.check_query(r, y)?;
        if !u.is_finite() {
            return Err(Error::InvalidArgument(format!("u must be finite, got {u}")));
        }
        Ok(self.bellman_u_counted(r, y, u, &mut 0))
    }

    /// Minimises [`ValueGrid::bellman_u`] over the u-grid, optionally refined
    /// around the best grid point. Ties go to smaller `|u|`, then to `u > 0`.
    pub fn bellman_step(&self, r: [f64; 2], y: f64) -> Result<BellmanStep> {
        self.check_query(r, y)?;
        Ok(self.bellman_step_counted(r, y, &mut 0))
    }

    fn check_query(&self, r: [f64; 2], y: f64) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::State("value grid is not initialised".into()));
        }
        if r[0] == f64::NEG_INFINITY && r[1] == f64::NEG_INFINITY {
            return Err(Error::InfeasibleState);
        }
        if r.iter().any(|x| x.is_nan() || *x == f64::INFINITY) || !(y.is_finite() && y >= 0.0) {
            return Err(Error::InvalidArgument(format!("invalid query ({r:?}, {y})")));
        }
        Ok(())
    }

    /// One application of the Bellman operator at every node.
    fn sweep(&self) -> (Vec<f64>, SweepStats) {
        let ny = self.y.len();
        let mut next = vec![0.0; self.values.len()];
        let mut clamped = 0usize;
        let mut boundary_nodes = 0usize;
        for (id, &delta) in self.delta.iter().enumerate() {
            let r = Self::normalized_pair(delta);
            for (iy, &y) in self.y.iter().enumerate() {
                let step = self.bellman_step_counted(r, y, &mut clamped);
                boundary_nodes += step.boundary_active as usize;
                // max r = 0 at normalised nodes
                next[id * ny + iy] = step.value;
            }
        }
        let (mut max_change, mut min_increment, mut max_value) = (0.0f64, f64::INFINITY, f64::NEG_INFINITY);
        for (new, old) in next.iter().zip(&self.values) {
            max_change = max_change.max((new - old).abs());
            min_increment = min_increment.min(new - old);
            max_value = max_value.max(*new);
        }
        let stats = SweepStats {
            iteration: self.iteration + 1,
            max_change,
            min_increment,
            max_value,
            boundary_nodes,
            clamped_queries: clamped,
        };
        (next, stats)
    }

    /// `max (W − W̄)` over the nodes, where `W̄` is the certificate bound in
    /// normalised coordinates.
    pub fn max_excess_over(&self, cert: &Certificate) -> f64 {
        let ny = self.y.len();
        let mut worst = f64::NEG_INFINITY;
        for (id, &delta) in self.delta.iter().enumerate() {
            let r = Self::normalized_pair(delta);
            for (iy, &y) in self.y.iter().enumerate() {
                let bound = crate::certify::vbar_raw(r, y, cert);
                worst = worst.max(self.values[id * ny + iy] - bound);
            }
        }
        worst
    }

    /// `δ,y,W` rows in δ-major order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("delta,y,W\n");
        for (id, d) in self.delta.iter().enumerate() {
            for (iy, y) in self.y.iter().enumerate() {
                let _ = writeln!(out, "{},{},{}", d, y, self.node(id, iy));
            }
        }
        out
    }
}

/// `true` if `(value, u)` beats `(best_value, best_u)` under the argmin
/// tie-break.
fn prefer(value: f64, u: f64, best_value: f64, best_u: f64) -> bool {
    let tie = 1e-12 * (1.0 + value.abs().max(best_value.abs()));
    if value < best_value - tie {
        return true;
    }
    if value > best_value + tie {
        return false;
    }
    let (a, b) = (u.abs(), best_u.abs());
    if a < b - 1e-15 {
        return true;
    }
    if a > b + 1e-15 {
        return false;
    }
    u > best_u
}

fn golden_min_arg<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, iters: usize) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut a = hi - INV_PHI * (hi - lo);
    let mut b = lo + INV_PHI * (hi - lo);
    let mut fa = f(a);
    let mut fb = f(b);
    for _ in 0..iters {
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - INV_PHI * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + INV_PHI * (hi - lo);
            fb = f(b);
        }
    }
    if fa <= fb {
        (a, fa)
    } else {
        (b, fb)
    }
}

/// Iterates the Bellman operator until the sup-norm change drops below
/// `tol` (converged), a node exceeds the value cap (diverged) or
/// `max_iters` sweeps have run (iteration-capped).
pub fn value_iterate(grid: ValueGrid, max_iters: usize, tol: f64) -> ViRun {
    value_iterate_with(grid, max_iters, tol, |_, _| {})
}

/// [`value_iterate`] with an observer called after every sweep.
pub fn value_iterate_with<F>(mut grid: ValueGrid, max_iters: usize, tol: f64, mut observe: F) -> ViRun
where
    F: FnMut(&ValueGrid, &SweepStats),
{
    let mut sweeps = Vec::new();
    let mut verdict = Verdict::IterationCapped;
    for _ in 0..max_iters {
        let (next, stats) = grid.sweep();
        grid.values = next;
        grid.iteration += 1;
        log::debug!(
            "sweep {}: change {:.3e}, min increment {:.3e}, max {:.4}, clamped {}",
            stats.iteration,
            stats.max_change,
            stats.min_increment,
            stats.max_value,
            stats.clamped_queries
        );
        observe(&grid, &stats);
        let done = if stats.max_value > grid.config.value_cap || !stats.max_value.is_finite() {
            verdict = Verdict::Diverged;
            true
        } else if stats.max_change < tol {
            verdict = Verdict::Converged;
            true
        } else {
            false
        };
        sweeps.push(stats);
        if done {
            break;
        }
    }
    let clamped: usize = sweeps.iter().map(|s| s.clamped_queries).sum();
    if clamped > 0 {
        log::warn!("{clamped} value queries fell outside the grid and were clamped");
    }
    if verdict == Verdict::Converged {
        if let Some(last) = sweeps.last() {
            if last.boundary_nodes > 0 {
                log::warn!(
                    "{} nodes attain the inner maximum on the v-grid boundary",
                    last.boundary_nodes
                );
            }
        }
    }
    grid.verdict = Some(verdict);
    ViRun { grid, verdict, sweeps }
}

/// Feedback `u = argmin_u B_u V(r, y)` read from a converged grid.
#[derive(Debug, Clone)]
pub struct GridPolicy {
    grid: ValueGrid,
}

pub fn extract_policy(grid: &ValueGrid) -> Result<GridPolicy> {
    match grid.verdict {
        Some(Verdict::Converged) => Ok(GridPolicy { grid: grid.clone() }),
        other => Err(Error::State(format!(
            "policy extraction needs a converged grid, verdict is {}",
            other.map_or("none".to_string(), |v| v.to_string())
        ))),
    }
}

impl GridPolicy {
    pub fn grid(&self) -> &ValueGrid {
        &self.grid
    }
}

impl Policy for GridPolicy {
    fn name(&self) -> &str {
        "vi-grid"
    }

    fn control(&self, state: &InfoState<f64>, _t: usize) -> Result<f64> {
        Ok(self.grid.bellman_step(state.pair(), state.y)?.u)
    }
}

/// Worst relative deviation from `V(α²r, αy) = α²V(r, y)` over interior
/// nodes whose scaled image stays inside the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomogeneityReport {
    pub max_rel_error: f64,
    pub checked: usize,
    pub within_one_percent: bool,
}

pub fn homogeneity_report(grid: &ValueGrid) -> HomogeneityReport {
    let mut max_rel = 0.0f64;
    let mut checked = 0;
    for alpha in [0.5, 2.0] {
        for &delta in &grid.delta {
            for &y in &grid.y {
                let (d2, y2) = (alpha * alpha * delta, alpha * y);
                if y == 0.0 || d2.abs() > grid.config.delta_max || y2 > grid.config.y_max {
                    continue;
                }
                let base = grid.interp(delta, y).0;
                let scaled = grid.interp(d2, y2).0;
                let expected = alpha * alpha * base;
                let rel = (scaled - expected).abs() / expected.abs().max(1e-9);
                max_rel = max_rel.max(rel);
                checked += 1;
            }
        }
    }
    HomogeneityReport {
        max_rel_error: max_rel,
        checked,
        within_one_percent: max_rel <= 0.01,
    }
}
