//! Decision rules for the magnitude-measured integrator.
//!
//! Every policy maps the information state `(r⁺, r⁻, y)` and the time index
//! to a control. Policies that ignore `r` are still causal functions of the
//! measurement record, so they fit the same interface.

use crate::error::{Error, Result};
use crate::istate::InfoState;

pub trait Policy {
    fn name(&self) -> &str;

    fn control(&self, state: &InfoState<f64>, t: usize) -> Result<f64>;

    fn uses_info_state(&self) -> bool {
        true
    }

    fn uses_time(&self) -> bool {
        false
    }
}

impl<P: Policy + ?Sized> Policy for &P {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn control(&self, state: &InfoState<f64>, t: usize) -> Result<f64> {
        (**self).control(state, t)
    }
    fn uses_info_state(&self) -> bool {
        (**self).uses_info_state()
    }
    fn uses_time(&self) -> bool {
        (**self).uses_time()
    }
}

impl<P: Policy + ?Sized> Policy for Box<P> {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn control(&self, state: &InfoState<f64>, t: usize) -> Result<f64> {
        (**self).control(state, t)
    }
    fn uses_info_state(&self) -> bool {
        (**self).uses_info_state()
    }
    fn uses_time(&self) -> bool {
        (**self).uses_time()
    }
}

/// `sign(r⁻ − r⁺)` with the given value at ties. −∞ entries compare below
/// every finite value.
pub fn hypothesis_sign(r_plus: f64, r_minus: f64, tie: f64) -> Result<f64> {
    if r_plus == f64::NEG_INFINITY && r_minus == f64::NEG_INFINITY {
        return Err(Error::InfeasibleState);
    }
    Ok(if r_minus > r_plus {
        1.0
    } else if r_minus < r_plus {
        -1.0
    } else {
        tie
    })
}

/// Certainty-equivalence sign controller `u = k·sign(r⁻ − r⁺)·y`.
///
/// The gain magnitude is fixed offline; the sign follows whichever
/// hypothesis currently carries the larger worst-case cost.
#[derive(Debug, Clone, PartialEq)]
pub struct CeSignPolicy {
    pub k: f64,
    /// Sign used when `r⁺ = r⁻`, e.g. at `t = 0`.
    pub tie_sign: f64,
}

impl CeSignPolicy {
    pub fn new(k: f64) -> Self {
        CeSignPolicy { k, tie_sign: 1.0 }
    }
}

pub fn ce_sign_policy(state: &InfoState<f64>, k: f64) -> Result<f64> {
    CeSignPolicy::new(k).control(state, 0)
}

impl Policy for CeSignPolicy {
    fn name(&self) -> &str {
        "ce-sign"
    }

    fn control(&self, state: &InfoState<f64>, _t: usize) -> Result<f64> {
        let [rp, rm] = state.pair();
        Ok(self.k * hypothesis_sign(rp, rm, self.tie_sign)? * state.y)
    }
}

/// One-step minimax controller:
/// `argmin_u max_s { rˢ + (s·y + u)² + u² }`.
///
/// Each branch is the convex quadratic `2u² + 2s·y·u + y² + rˢ`, so the
/// minimizer of the max is either a branch minimizer `−s·y/2` or the
/// crossing point `(r⁻ − r⁺)/(4y)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MyopicPolicy;

pub fn myopic_policy(state: &InfoState<f64>) -> Result<f64> {
    MyopicPolicy.control(state, 0)
}

impl Policy for MyopicPolicy {
    fn name(&self) -> &str {
        "myopic"
    }

    fn control(&self, state: &InfoState<f64>, _t: usize) -> Result<f64> {
        let [rp, rm] = state.pair();
        let y = state.y;
        if rp == f64::NEG_INFINITY && rm == f64::NEG_INFINITY {
            return Err(Error::InfeasibleState);
        }
        if y == 0.0 {
            return Ok(0.0);
        }
        let branch = |s: f64, r: f64, u: f64| r + (s * y + u).powi(2) + u * u;
        let u_plus = -0.5 * y;
        if branch(1.0, rp, u_plus) >= branch(-1.0, rm, u_plus) {
            return Ok(u_plus);
        }
        let u_minus = 0.5 * y;
        if branch(-1.0, rm, u_minus) >= branch(1.0, rp, u_minus) {
            return Ok(u_minus);
        }
        Ok((rm - rp) / (4.0 * y))
    }
}

/// The literal reading of "minimize the current cost `x² + u²`": `u ≡ 0`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MyopicLiteralPolicy;

impl Policy for MyopicLiteralPolicy {
    fn name(&self) -> &str {
        "myopic-literal"
    }

    fn control(&self, _state: &InfoState<f64>, _t: usize) -> Result<f64> {
        Ok(0.0)
    }

    fn uses_info_state(&self) -> bool {
        false
    }
}

/// Time-varying `u_t = (−1)^t·y_t`; zeroes the undisturbed state from
/// `t = 2` on.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AlternatingPolicy;

pub fn alternating_policy(t: usize, y: f64) -> f64 {
    if t.is_multiple_of(2) {
        y
    } else {
        -y
    }
}

impl Policy for AlternatingPolicy {
    fn name(&self) -> &str {
        "alternating"
    }

    fn control(&self, state: &InfoState<f64>, t: usize) -> Result<f64> {
        Ok(alternating_policy(t, state.y))
    }

    fn uses_info_state(&self) -> bool {
        false
    }

    fn uses_time(&self) -> bool {
        true
    }
}

/// `u = gain·y`. Gain 0 is the zero policy.
#[derive(Debug, Clone, PartialEq)]
pub struct ProportionalPolicy {
    pub gain: f64,
    name: String,
}

impl ProportionalPolicy {
    pub fn new(gain: f64) -> Self {
        let name = if gain == 0.0 {
            "zero".to_string()
        } else {
            format!("proportional({gain})")
        };
        ProportionalPolicy { gain, name }
    }

    pub fn zero() -> Self {
        Self::new(0.0)
    }
}

pub fn proportional_policy(y: f64, gain: f64) -> f64 {
    gain * y
}

impl Policy for ProportionalPolicy {
    fn name(&self) -> &str {
        &self.name
    }

    fn control(&self, state: &InfoState<f64>, _t: usize) -> Result<f64> {
        Ok(proportional_policy(state.y, self.gain))
    }

    fn uses_info_state(&self) -> bool {
        false
    }
}
