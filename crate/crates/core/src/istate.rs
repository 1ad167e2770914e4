//! Recursive information state.
//!
//! For each hypothesis `ξⁱ ∈ h⁻¹{y}` the entry `rⁱ` is the largest
//! accumulated stage cost over all histories that are consistent with the
//! measurements and controls so far and end in `ξⁱ`. After a new
//! measurement `v` and the control `u`:
//!
//! ```text
//! r'ⁱ = max_j { l(ξʲ, u, w) + rʲ : ξ'ⁱ = f(ξʲ, u, w) }
//! ```
//!
//! For the magnitude-measured integrator this becomes
//! `r'ˢ = y² + u² + max_j { rʲ − γ²(s·v − u − j·y)² }`.

use crate::error::{ensure_finite, ensure_positive, Error, Result};
use crate::extreal::ExtReal;
use crate::system::SystemModel;

/// Hypothesis costs `r` paired with the current measurement `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct InfoState<Y = f64> {
    pub r: Vec<ExtReal>,
    pub y: Y,
}

impl<Y> InfoState<Y> {
    /// `r = 0` with `hypotheses` entries.
    pub fn initial_with(hypotheses: usize, y: Y) -> Self {
        InfoState {
            r: vec![ExtReal::ZERO; hypotheses],
            y,
        }
    }

    pub fn max_entry(&self) -> ExtReal {
        ExtReal::max_of(self.r.iter().copied())
    }
}

impl InfoState<f64> {
    /// Initial state of the magnitude-measured integrator.
    pub fn initial(y: f64) -> Self {
        Self::initial_with(2, y)
    }

    /// Two-hypothesis state from raw values; NaN and +∞ are rejected.
    pub fn magnitude(r_plus: f64, r_minus: f64, y: f64) -> Result<Self> {
        Ok(InfoState {
            r: vec![ExtReal::new(r_plus)?, ExtReal::new(r_minus)?],
            y,
        })
    }

    pub fn r_plus(&self) -> ExtReal {
        self.r[0]
    }

    pub fn r_minus(&self) -> ExtReal {
        self.r[1]
    }

    /// `(r⁺, r⁻)` as raw floats; −∞ entries are `f64::NEG_INFINITY`.
    pub fn pair(&self) -> [f64; 2] {
        [self.r[0].value(), self.r[1].value()]
    }
}

/// Magnitude-integrator update on raw floats. Entries may be −∞; the
/// result entries are −∞ iff both inputs are. All other inputs must be
/// finite.
#[inline]
pub(crate) fn magnitude_kernel(r: [f64; 2], y: f64, u: f64, v: f64, gamma: f64) -> [f64; 2] {
    let g2 = gamma * gamma;
    let base = y * y + u * u;
    // w for (next sign s, previous sign j) is s·v − u − j·y
    let wpp = v - u - y;
    let wpm = v - u + y;
    let wmp = -v - u - y;
    let wmm = -v - u + y;
    let plus = (r[0] - g2 * wpp * wpp).max(r[1] - g2 * wpm * wpm);
    let minus = (r[0] - g2 * wmp * wmp).max(r[1] - g2 * wmm * wmm);
    [base + plus, base + minus]
}

fn check_state_pair(state: &InfoState<f64>) -> Result<()> {
    if state.r.len() != 2 {
        return Err(Error::InvalidArgument(format!(
            "magnitude information state needs 2 entries, got {}",
            state.r.len()
        )));
    }
    if !(state.y.is_finite() && state.y >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "current measurement must be finite and nonnegative, got {}",
            state.y
        )));
    }
    Ok(())
}

/// Incorporates control `u` and the next magnitude measurement `v`.
pub fn update_magnitude(state: &InfoState<f64>, u: f64, v: f64, gamma: f64) -> Result<InfoState<f64>> {
    check_state_pair(state)?;
    ensure_finite("u", u)?;
    ensure_positive("gamma", gamma)?;
    if !(v.is_finite() && v >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "next measurement must be finite and nonnegative, got {v}"
        )));
    }
    let [rp, rm] = magnitude_kernel(state.pair(), state.y, u, v, gamma);
    let r = vec![ExtReal::from_kernel(rp), ExtReal::from_kernel(rm)];
    if r.iter().all(|e| e.is_neg_infinity()) {
        return Err(Error::InfeasibleObservation);
    }
    Ok(InfoState { r, y: v })
}

/// The update for an arbitrary [`SystemModel`]; the supremum over `w`
/// collapses because `w` is determined by the transition.
pub fn update_generic<S: SystemModel>(
    system: &S,
    state: &InfoState<S::Measurement>,
    u: f64,
    v: &S::Measurement,
    gamma: f64,
) -> Result<InfoState<S::Measurement>> {
    ensure_finite("u", u)?;
    ensure_positive("gamma", gamma)?;
    let m = system.hypothesis_bound();
    if state.r.len() != m {
        return Err(Error::InvalidArgument(format!(
            "information state has {} entries, system has {m} hypotheses",
            state.r.len()
        )));
    }
    let prev = system.preimage(&state.y)?;
    let next = system.preimage(v)?;

    let r: Vec<ExtReal> = next
        .iter()
        .map(|xi_next| {
            ExtReal::max_of(prev.iter().zip(&state.r).filter_map(|(xi, rj)| {
                if rj.is_neg_infinity() {
                    return None;
                }
                let w = system.disturbance_from_transition(xi_next, xi, u)?;
                if !system.disturbance_feasible(&w) {
                    return None;
                }
                let cost = system.stage_cost(xi, u, &w, gamma);
                Some(ExtReal::from_kernel(rj.value() + cost))
            }))
        })
        .collect();

    if r.iter().all(|e| e.is_neg_infinity()) {
        return Err(Error::InfeasibleObservation);
    }
    Ok(InfoState { r, y: v.clone() })
}

/// Shifts `r` so its largest entry is zero; returns the shift.
/// `r = shifted + 𝟏·offset` exactly for finite entries.
pub fn normalize_shift<Y: Clone>(state: &InfoState<Y>) -> Result<(InfoState<Y>, f64)> {
    let offset = state.max_entry();
    if offset.is_neg_infinity() {
        return Err(Error::InfeasibleState);
    }
    let offset = offset.value();
    let r = state.r.iter().map(|e| *e + (-offset)).collect();
    Ok((InfoState { r, y: state.y.clone() }, offset))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{Integrator, IoRealization, LinearModelSet};
    use approx::assert_abs_diff_eq;
    use nalgebra::DVector;

    #[test]
    fn origin_stays_at_zero() {
        let s = update_magnitude(&InfoState::initial(0.0), 0.0, 0.0, 4.0).unwrap();
        assert_eq!(s.pair(), [0.0, 0.0]);
        assert_eq!(s.y, 0.0);
    }

    #[test]
    fn one_step_values() {
        // (s0, s1) enumeration: s1=+ best via s0=+ (w=0); s1=- best via s0=+ (w=-0.6)
        let s = update_magnitude(&InfoState::initial(1.0), -0.7, 0.3, 4.0).unwrap();
        assert_abs_diff_eq!(s.r_plus().value(), 1.49, epsilon = 1e-12);
        assert_abs_diff_eq!(s.r_minus().value(), -4.27, epsilon = 1e-12);

        let mirrored = update_magnitude(&InfoState::initial(1.0), 0.7, 0.3, 4.0).unwrap();
        assert_abs_diff_eq!(mirrored.r_plus().value(), -4.27, epsilon = 1e-12);
        assert_abs_diff_eq!(mirrored.r_minus().value(), 1.49, epsilon = 1e-12);
    }

    #[test]
    fn rejects_negative_measurement() {
        let err = update_magnitude(&InfoState::initial(1.0), 0.0, -0.1, 4.0).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
        assert!(update_magnitude(&InfoState::initial(1.0), 0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn neg_infinity_propagates() {
        let s = InfoState::magnitude(f64::NEG_INFINITY, 0.0, 1.0).unwrap();
        let next = update_magnitude(&s, 0.2, 0.5, 4.0).unwrap();
        assert!(next.r.iter().all(|e| e.is_finite()));

        let dead = InfoState::magnitude(f64::NEG_INFINITY, f64::NEG_INFINITY, 1.0).unwrap();
        assert!(matches!(
            update_magnitude(&dead, 0.2, 0.5, 4.0),
            Err(Error::InfeasibleObservation)
        ));
    }

    #[test]
    fn generic_linear_model_set() {
        let set = LinearModelSet::scalar(&[(1.0, 1.0), (1.0, -1.0)]).unwrap();
        let s = InfoState::initial_with(2, DVector::from_element(1, 1.0));
        let next = update_generic(&set, &s, 1.0, &DVector::from_element(1, 2.0), 4.0).unwrap();
        assert_abs_diff_eq!(next.r[0].value(), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(next.r[1].value(), -62.0, epsilon = 1e-12);
    }

    #[test]
    fn generic_matches_kernel_on_integrator() {
        let fast = update_magnitude(&InfoState::initial(1.0), -0.7, 0.3, 4.0).unwrap();
        let slow = update_generic(&Integrator, &InfoState::initial(1.0), -0.7, &0.3, 4.0).unwrap();
        for (a, b) in fast.r.iter().zip(&slow.r) {
            assert_abs_diff_eq!(a.value(), b.value(), epsilon = 1e-12);
        }
    }

    #[test]
    fn generic_matches_kernel_on_first_order_io() {
        use crate::system::AugmentedMeasurement;
        let io = IoRealization::new(&[-1.0], &[1.0]).unwrap();
        let meas = |m: f64| AugmentedMeasurement { magnitudes: vec![m], past_inputs: vec![] };
        let fast = update_magnitude(&InfoState::initial(1.0), -0.7, 0.3, 4.0).unwrap();
        let slow =
            update_generic(&io, &InfoState::initial_with(2, meas(1.0)), -0.7, &meas(0.3), 4.0)
                .unwrap();
        for (a, b) in fast.r.iter().zip(&slow.r) {
            assert_abs_diff_eq!(a.value(), b.value(), epsilon = 1e-12);
        }
    }

    #[test]
    fn normalize_examples() {
        let (s, c) = normalize_shift(&InfoState::magnitude(3.0, -1.0, 1.0).unwrap()).unwrap();
        assert_eq!((s.pair(), c), ([0.0, -4.0], 3.0));
        let (s, c) = normalize_shift(&InfoState::magnitude(0.0, 0.0, 1.0).unwrap()).unwrap();
        assert_eq!((s.pair(), c), ([0.0, 0.0], 0.0));
        let (s, c) =
            normalize_shift(&InfoState::magnitude(f64::NEG_INFINITY, 5.0, 1.0).unwrap()).unwrap();
        assert!(s.r_plus().is_neg_infinity());
        assert_eq!((s.r_minus().value(), c), (0.0, 5.0));
        let dead = InfoState::magnitude(f64::NEG_INFINITY, f64::NEG_INFINITY, 1.0).unwrap();
        assert!(matches!(normalize_shift(&dead), Err(Error::InfeasibleState)));
    }
}
