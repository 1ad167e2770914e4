//! Quadratic value bound for the magnitude-measured integrator.
//!
//! ```text
//! V̄(r, y) = max{ p·y² + r⁺,  p·y² + r⁻,  q·y² + (r⁺ + r⁻)/2 }
//! ```
//!
//! If the three parameter inequalities hold, then the sign controller
//! `u = k·sign(r⁻ − r⁺)·y` satisfies `B_u V̄ ≤ V̄` everywhere, which bounds
//! the closed-loop cost by `V̄(0, |x₀|) = q·x₀²`.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::control::hypothesis_sign;
use crate::error::{ensure_finite, ensure_positive, Error, Result};
use crate::istate::magnitude_kernel;

/// Absolute slack for `closed form ≤ V̄`.
pub const DISSIPATION_TOL: f64 = 1e-9;
/// Relative slack for the closed form against the dense numeric maximum.
pub const NUMERIC_REL_TOL: f64 = 1e-6;
/// Points of the dense v-grid used by the numeric cross-check.
pub const NUMERIC_V_POINTS: usize = 2001;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Certificate {
    pub gamma: f64,
    pub p: f64,
    pub q: f64,
    pub k: f64,
}

impl Certificate {
    /// Requires `0 < p ≤ q < γ²`.
    pub fn new(gamma: f64, p: f64, q: f64, k: f64) -> Result<Self> {
        ensure_positive("gamma", gamma)?;
        ensure_positive("p", p)?;
        ensure_positive("q", q)?;
        ensure_finite("k", k)?;
        if p > q {
            return Err(Error::InvalidArgument(format!("need p <= q, got p = {p}, q = {q}")));
        }
        if q >= gamma * gamma {
            return Err(Error::InvalidArgument(format!(
                "need q < gamma^2 = {}, got q = {q}",
                gamma * gamma
            )));
        }
        Ok(Certificate { gamma, p, q, k })
    }

    /// `γ = 4, p = 1.7, q = 7, k = 0.7`.
    pub fn reference() -> Self {
        Certificate { gamma: 4.0, p: 1.7, q: 7.0, k: 0.7 }
    }

    /// `p⁻¹ − γ⁻²` and `q⁻¹ − γ⁻²`; both must be positive.
    fn denominators(&self) -> Result<(f64, f64)> {
        let inv_g2 = 1.0 / (self.gamma * self.gamma);
        let dp = 1.0 / self.p - inv_g2;
        let dq = 1.0 / self.q - inv_g2;
        if dp <= 0.0 || dq <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "p^-1 - gamma^-2 = {dp} and q^-1 - gamma^-2 = {dq} must be positive"
            )));
        }
        Ok((dp, dq))
    }

    /// The controller `k·sign(r⁻ − r⁺)·y` with `sign(0) = +1`.
    pub fn control(&self, r: [f64; 2], y: f64) -> Result<f64> {
        Ok(self.k * hypothesis_sign(r[0], r[1], 1.0)? * y)
    }
}

/// `V̄(r, y)`. A −∞ entry removes its branch and the averaged branch.
pub fn vbar(r: [f64; 2], y: f64, cert: &Certificate) -> Result<f64> {
    if r[0] == f64::NEG_INFINITY && r[1] == f64::NEG_INFINITY {
        return Err(Error::InfeasibleState);
    }
    Ok(vbar_raw(r, y, cert))
}

#[inline]
pub(crate) fn vbar_raw(r: [f64; 2], y: f64, cert: &Certificate) -> f64 {
    let y2 = y * y;
    let py = cert.p * y2;
    (py + r[0]).max(py + r[1]).max(cert.q * y2 + 0.5 * (r[0] + r[1]))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InequalityReport {
    pub satisfied: bool,
    /// `(p − R₁, q − R₂, q − R₃)`.
    pub margins: [f64; 3],
    /// Right-hand sides `(R₁, R₂, R₃)`.
    pub bounds: [f64; 3],
}

impl InequalityReport {
    /// 1-based indices of the violated inequalities.
    pub fn violated(&self) -> Vec<usize> {
        (0..3).filter(|&i| self.margins[i] <= 0.0).map(|i| i + 1).collect()
    }
}

pub fn check_inequalities(cert: &Certificate) -> Result<InequalityReport> {
    let (dp, dq) = cert.denominators()?;
    let k = cert.k;
    let g2 = cert.gamma * cert.gamma;
    let base = 1.0 + k * k;
    let bounds = [
        base + (1.0 - k).powi(2) / dp,
        base + (1.0 + k).powi(2) / dp,
        base + 1.0 / dq - g2 * k * k,
    ];
    let margins = [cert.p - bounds[0], cert.q - bounds[1], cert.q - bounds[2]];
    Ok(InequalityReport {
        satisfied: margins.iter().all(|m| *m > 0.0),
        margins,
        bounds,
    })
}

/// Closed-form `B_u V̄(r, y)` split into its two groups.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedFormBellman {
    /// `B_u max{V̄⁺⁺, V̄⁻⁻}`.
    pub b_pm: f64,
    /// The mixed pair value `y²/(q⁻¹ − γ⁻²) − γ²u² + (r⁺ + r⁻)/2`.
    pub mixed: f64,
    /// `B_u V̄⁺⁻`.
    pub b_mixed: f64,
    pub total: f64,
}

pub fn closed_form_bellman(r: [f64; 2], y: f64, u: f64, cert: &Certificate) -> Result<ClosedFormBellman> {
    let (dp, dq) = cert.denominators()?;
    if r[0] == f64::NEG_INFINITY && r[1] == f64::NEG_INFINITY {
        return Err(Error::InfeasibleState);
    }
    let g2 = cert.gamma * cert.gamma;
    let base = y * y + u * u;
    let b_pm = base + ((y + u).powi(2) / dp + r[0]).max((y - u).powi(2) / dp + r[1]);
    let alpha_pp = r[0] - g2 * (u + y).powi(2);
    let alpha_mm = r[1] - g2 * (u - y).powi(2);
    let mixed = y * y / dq - g2 * u * u + 0.5 * (r[0] + r[1]);
    let b_mixed = base + alpha_pp.max(alpha_mm).max(mixed);
    Ok(ClosedFormBellman {
        b_pm,
        mixed,
        b_mixed,
        total: b_pm.max(b_mixed),
    })
}

/// Dense numeric `max_v V̄(g(r, v, y, u), v)` on `[0, 2(y + |u|) + 5]`,
/// refined by golden-section search around the best grid point.
/// Returns the value and whether the grid maximum sat on the last point.
pub fn numeric_bellman(r: [f64; 2], y: f64, u: f64, cert: &Certificate) -> (f64, bool) {
    let v_max = 2.0 * (y + u.abs()) + 5.0;
    let h = v_max / (NUMERIC_V_POINTS - 1) as f64;
    let eval = |v: f64| vbar_raw(magnitude_kernel(r, y, u, v, cert.gamma), v, cert);
    let (best_i, best) = (0..NUMERIC_V_POINTS)
        .map(|i| (i, eval(i as f64 * h)))
        .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
    let lo = (best_i as f64 - 1.0).max(0.0) * h;
    let hi = ((best_i + 1) as f64 * h).min(v_max);
    let refined = golden_max(eval, lo, hi, 80);
    (best.max(refined), best_i == NUMERIC_V_POINTS - 1)
}

/// Golden-section maximization of `f` on `[lo, hi]`; returns the best value
/// seen.
pub(crate) fn golden_max<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, iters: usize) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut a = hi - INV_PHI * (hi - lo);
    let mut b = lo + INV_PHI * (hi - lo);
    let mut fa = f(a);
    let mut fb = f(b);
    let mut best = fa.max(fb).max(f(lo)).max(f(hi));
    for _ in 0..iters {
        if fa >= fb {
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
        best = best.max(fa).max(fb);
        if hi - lo < 1e-14 * (1.0 + hi.abs()) {
            break;
        }
    }
    best
}

/// Outcome of checking `B_{η̄} V̄ ≤ V̄` on a set of samples.
#[derive(Debug, Clone, PartialEq)]
pub struct DissipationReport {
    pub samples: usize,
    /// Samples with closed form exceeding `V̄ + DISSIPATION_TOL`.
    pub violations: usize,
    /// Largest `closed form − V̄` over all samples.
    pub worst_excess: f64,
    /// The `(r, y)` attaining `worst_excess`.
    pub worst_sample: Option<([f64; 2], f64)>,
    /// Samples where the closed form and numeric maximum disagree beyond
    /// `NUMERIC_REL_TOL`.
    pub numeric_mismatches: usize,
    pub worst_relative_mismatch: f64,
    /// Samples whose numeric maximum sat on the v-grid boundary.
    pub boundary_hits: usize,
}

impl DissipationReport {
    pub fn passed(&self) -> bool {
        self.violations == 0 && self.numeric_mismatches == 0
    }
}

pub fn check_dissipation(cert: &Certificate, samples: &[([f64; 2], f64)]) -> Result<DissipationReport> {
    cert.denominators()?;
    let mut report = DissipationReport {
        samples: samples.len(),
        violations: 0,
        worst_excess: f64::NEG_INFINITY,
        worst_sample: None,
        numeric_mismatches: 0,
        worst_relative_mismatch: 0.0,
        boundary_hits: 0,
    };
    for &(r, y) in samples {
        if !(r[0].is_finite() && r[1].is_finite() && y.is_finite() && y >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "dissipation sample must have finite r and y >= 0, got ({r:?}, {y})"
            )));
        }
        let u = cert.control(r, y)?;
        let closed = closed_form_bellman(r, y, u, cert)?.total;
        let bound = vbar_raw(r, y, cert);
        let excess = closed - bound;
        if excess > report.worst_excess {
            report.worst_excess = excess;
            report.worst_sample = Some((r, y));
        }
        if excess > DISSIPATION_TOL {
            report.violations += 1;
        }
        let (numeric, on_boundary) = numeric_bellman(r, y, u, cert);
        if on_boundary {
            report.boundary_hits += 1;
        }
        let rel = (numeric - closed).abs() / closed.abs().max(1.0);
        report.worst_relative_mismatch = report.worst_relative_mismatch.max(rel);
        if rel > NUMERIC_REL_TOL {
            report.numeric_mismatches += 1;
        }
    }
    Ok(report)
}

impl fmt::Display for InequalityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "inequality,bound,margin,holds")?;
        for i in 0..3 {
            writeln!(
                f,
                "{},{},{},{}",
                i + 1,
                self.bounds[i],
                self.margins[i],
                self.margins[i] > 0.0
            )?;
        }
        Ok(())
    }
}

/// `n` normalised samples `(r, y)` with `δ = r⁻ − r⁺` uniform on
/// `[−delta_max, delta_max]` and `y` uniform on `[0, y_max]`.
pub fn random_samples(n: usize, seed: u64, delta_max: f64, y_max: f64) -> Vec<([f64; 2], f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let delta: f64 = rng.gen_range(-delta_max..=delta_max);
            let y = rng.gen_range(0.0..=y_max);
            let r = if delta >= 0.0 { [-delta, 0.0] } else { [0.0, delta] };
            (r, y)
        })
        .collect()
}
