//! Dynamical systems with a bounded-cardinality measurement preimage.
//!
//! A [`SystemModel`] bundles the dynamics `x⁺ = f(x, u, w)`, the
//! measurement `y = h(x)`, the stage cost and an enumerator for the
//! preimage `h⁻¹{y}`. The preimage always has exactly
//! [`SystemModel::hypothesis_bound`] entries; coinciding solutions are
//! repeated so the hypothesis vector keeps a fixed length.

use nalgebra::{DMatrix, DVector};

use crate::error::{ensure_finite, ensure_positive, Error, Result};

/// Relative tolerance used to decide whether the non-disturbance components
/// of a transition are reproduced by the dynamics.
const TRANSITION_TOL: f64 = 1e-12;

pub trait SystemModel {
    type State: Clone + std::fmt::Debug;
    type Measurement: Clone + std::fmt::Debug;
    type Disturbance: Clone + std::fmt::Debug;

    fn state_dim(&self) -> usize;

    /// Upper bound `M` on the preimage cardinality.
    fn hypothesis_bound(&self) -> usize;

    fn dynamics(&self, x: &Self::State, u: f64, w: &Self::Disturbance) -> Self::State;

    fn measurement(&self, x: &Self::State) -> Self::Measurement;

    /// Exactly `hypothesis_bound()` candidate states, in a stable order.
    fn preimage(&self, y: &Self::Measurement) -> Result<Vec<Self::State>>;

    /// The disturbance carrying `prev` to `next` under `u`, or `None` when no
    /// disturbance does.
    fn disturbance_from_transition(
        &self,
        next: &Self::State,
        prev: &Self::State,
        u: f64,
    ) -> Option<Self::Disturbance>;

    /// Membership in the admissible disturbance set. Built-in systems admit
    /// every disturbance.
    fn disturbance_feasible(&self, _w: &Self::Disturbance) -> bool {
        true
    }

    fn stage_cost(&self, x: &Self::State, u: f64, w: &Self::Disturbance, gamma: f64) -> f64;
}

/// `x + u + w`.
pub fn integrator_step(x: f64, u: f64, w: f64) -> Result<f64> {
    ensure_finite("x", x)?;
    ensure_finite("u", u)?;
    ensure_finite("w", w)?;
    Ok(x + u + w)
}

/// `|x|`.
pub fn measure_magnitude(x: f64) -> Result<f64> {
    Ok(ensure_finite("x", x)?.abs())
}

/// `x² + u² − γ²w²`.
pub fn stage_cost(x: f64, u: f64, w: f64, gamma: f64) -> Result<f64> {
    ensure_positive("gamma", gamma)?;
    ensure_finite("x", x)?;
    ensure_finite("u", u)?;
    ensure_finite("w", w)?;
    Ok(x * x + u * u - gamma * gamma * w * w)
}

fn check_magnitude(y: f64) -> Result<f64> {
    if y.is_finite() && y >= 0.0 {
        Ok(y)
    } else {
        Err(Error::InvalidArgument(format!(
            "magnitude measurement must be finite and nonnegative, got {y}"
        )))
    }
}

/// The scalar integrator measured through its magnitude. Hypotheses are
/// indexed `(+, −)`: `ξ⁺ = y`, `ξ⁻ = −y`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Integrator;

impl Integrator {
    pub const PLUS: usize = 0;
    pub const MINUS: usize = 1;
}

impl SystemModel for Integrator {
    type State = f64;
    type Measurement = f64;
    type Disturbance = f64;

    fn state_dim(&self) -> usize {
        1
    }

    fn hypothesis_bound(&self) -> usize {
        2
    }

    fn dynamics(&self, x: &f64, u: f64, w: &f64) -> f64 {
        x + u + w
    }

    fn measurement(&self, x: &f64) -> f64 {
        x.abs()
    }

    fn preimage(&self, y: &f64) -> Result<Vec<f64>> {
        let y = check_magnitude(*y)?;
        Ok(vec![y, -y])
    }

    fn disturbance_from_transition(&self, next: &f64, prev: &f64, u: f64) -> Option<f64> {
        Some(next - prev - u)
    }

    fn stage_cost(&self, x: &f64, u: f64, w: &f64, gamma: f64) -> f64 {
        x * x + u * u - gamma * gamma * w * w
    }
}

/// Augmented measurement of an input-output model:
/// `(|z_t|, …, |z_{t−d+1}|)` together with `(u_{t−1}, …, u_{t−d+1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedMeasurement {
    pub magnitudes: Vec<f64>,
    pub past_inputs: Vec<f64>,
}

/// Nonminimal state-space realization `x⁺ = A x + B u + G w` of
/// `z_{t+1} = −a₁z_t − … − a_d z_{t−d+1} + b₁u_t + … + b_d u_{t−d+1} + w_t`
/// with state `(z_t, …, z_{t−d+1}, u_{t−1}, …, u_{t−d+1})`.
///
/// Hypothesis `i` assigns sign `−` to stored output `z_{t−k}` when bit `k` of
/// `i` is set, so for `d = 1` the order is `(+, −)` as for [`Integrator`].
#[derive(Debug, Clone, PartialEq)]
pub struct IoRealization {
    a_coeffs: Vec<f64>,
    b_coeffs: Vec<f64>,
    a: DMatrix<f64>,
    b: DVector<f64>,
    g: DVector<f64>,
}

impl IoRealization {
    pub fn new(a_coeffs: &[f64], b_coeffs: &[f64]) -> Result<Self> {
        let d = a_coeffs.len();
        if d == 0 {
            return Err(Error::InvalidArgument("order d must be at least 1".into()));
        }
        if b_coeffs.len() != d {
            return Err(Error::InvalidArgument(format!(
                "a_coeffs has length {d} but b_coeffs has length {}",
                b_coeffs.len()
            )));
        }
        for (i, c) in a_coeffs.iter().chain(b_coeffs).enumerate() {
            ensure_finite(&format!("coefficient {i}"), *c)?;
        }

        let n = 2 * d - 1;
        let mut a = DMatrix::zeros(n, n);
        for (j, ai) in a_coeffs.iter().enumerate() {
            a[(0, j)] = -ai;
        }
        for (j, bi) in b_coeffs.iter().enumerate().skip(1) {
            a[(0, d + j - 1)] = *bi;
        }
        // z shift
        for i in 1..d {
            a[(i, i - 1)] = 1.0;
        }
        // row d receives u_t through B; the rest shift stored inputs
        for i in (d + 1)..n {
            a[(i, i - 1)] = 1.0;
        }

        let mut b = DVector::zeros(n);
        b[0] = b_coeffs[0];
        if d > 1 {
            b[d] = 1.0;
        }
        let mut g = DVector::zeros(n);
        g[0] = 1.0;

        Ok(IoRealization {
            a_coeffs: a_coeffs.to_vec(),
            b_coeffs: b_coeffs.to_vec(),
            a,
            b,
            g,
        })
    }

    pub fn order(&self) -> usize {
        self.a_coeffs.len()
    }

    pub fn a_coeffs(&self) -> &[f64] {
        &self.a_coeffs
    }

    pub fn b_coeffs(&self) -> &[f64] {
        &self.b_coeffs
    }

    pub fn a_matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b_matrix(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn g_matrix(&self) -> &DVector<f64> {
        &self.g
    }
}

impl SystemModel for IoRealization {
    type State = DVector<f64>;
    type Measurement = AugmentedMeasurement;
    type Disturbance = f64;

    fn state_dim(&self) -> usize {
        2 * self.order() - 1
    }

    fn hypothesis_bound(&self) -> usize {
        1 << self.order()
    }

    fn dynamics(&self, x: &DVector<f64>, u: f64, w: &f64) -> DVector<f64> {
        &self.a * x + &self.b * u + &self.g * *w
    }

    fn measurement(&self, x: &DVector<f64>) -> AugmentedMeasurement {
        let d = self.order();
        AugmentedMeasurement {
            magnitudes: x.iter().take(d).map(|z| z.abs()).collect(),
            past_inputs: x.iter().skip(d).copied().collect(),
        }
    }

    fn preimage(&self, y: &AugmentedMeasurement) -> Result<Vec<DVector<f64>>> {
        let d = self.order();
        if y.magnitudes.len() != d || y.past_inputs.len() != d - 1 {
            return Err(Error::InvalidArgument(format!(
                "augmented measurement must carry {d} magnitudes and {} inputs",
                d - 1
            )));
        }
        for m in &y.magnitudes {
            check_magnitude(*m)?;
        }
        for u in &y.past_inputs {
            ensure_finite("stored input", *u)?;
        }
        let states = (0..self.hypothesis_bound())
            .map(|idx| {
                let signed = y.magnitudes.iter().enumerate().map(|(k, m)| {
                    if idx >> k & 1 == 1 {
                        -m
                    } else {
                        *m
                    }
                });
                DVector::from_iterator(
                    self.state_dim(),
                    signed.chain(y.past_inputs.iter().copied()),
                )
            })
            .collect();
        Ok(states)
    }

    fn disturbance_from_transition(
        &self,
        next: &DVector<f64>,
        prev: &DVector<f64>,
        u: f64,
    ) -> Option<f64> {
        let predicted = &self.a * prev + &self.b * u;
        let residual = next - predicted;
        let scale = 1.0 + next.amax().max(prev.amax()).max(u.abs());
        if residual.iter().skip(1).all(|r| r.abs() <= TRANSITION_TOL * scale) {
            Some(residual[0])
        } else {
            None
        }
    }

    fn stage_cost(&self, x: &DVector<f64>, u: f64, w: &f64, gamma: f64) -> f64 {
        x[0] * x[0] + u * u - gamma * gamma * w * w
    }
}

/// State of the lifted uncertain-model system: the measured part `z` and
/// the (hidden, constant) index of the active model.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedState {
    pub z: DVector<f64>,
    pub model: usize,
}

/// `z⁺ = A z + B u + w` with `(A, B)` drawn from a finite known set and
/// `z` measured exactly. Hypotheses are the model indices.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModelSet {
    models: Vec<(DMatrix<f64>, DVector<f64>)>,
}

impl LinearModelSet {
    pub fn new(models: Vec<(DMatrix<f64>, DVector<f64>)>) -> Result<Self> {
        let Some((a0, _)) = models.first() else {
            return Err(Error::InvalidArgument("model set must be nonempty".into()));
        };
        let n = a0.nrows();
        if n == 0 {
            return Err(Error::InvalidArgument("state dimension must be positive".into()));
        }
        for (i, (a, b)) in models.iter().enumerate() {
            if a.nrows() != n || a.ncols() != n || b.len() != n {
                return Err(Error::InvalidArgument(format!(
                    "model {i} has shape A {}x{}, B {}; expected A {n}x{n}, B {n}",
                    a.nrows(),
                    a.ncols(),
                    b.len()
                )));
            }
        }
        Ok(LinearModelSet { models })
    }

    /// Scalar models given as `(a, b)` pairs.
    pub fn scalar(models: &[(f64, f64)]) -> Result<Self> {
        Self::new(
            models
                .iter()
                .map(|&(a, b)| (DMatrix::from_element(1, 1, a), DVector::from_element(1, b)))
                .collect(),
        )
    }

    pub fn models(&self) -> &[(DMatrix<f64>, DVector<f64>)] {
        &self.models
    }
}

impl SystemModel for LinearModelSet {
    type State = LiftedState;
    type Measurement = DVector<f64>;
    type Disturbance = DVector<f64>;

    fn state_dim(&self) -> usize {
        self.models[0].0.nrows()
    }

    fn hypothesis_bound(&self) -> usize {
        self.models.len()
    }

    fn dynamics(&self, x: &LiftedState, u: f64, w: &DVector<f64>) -> LiftedState {
        let (a, b) = &self.models[x.model];
        LiftedState {
            z: a * &x.z + b * u + w,
            model: x.model,
        }
    }

    fn measurement(&self, x: &LiftedState) -> DVector<f64> {
        x.z.clone()
    }

    fn preimage(&self, y: &DVector<f64>) -> Result<Vec<LiftedState>> {
        if y.len() != self.state_dim() {
            return Err(Error::InvalidArgument(format!(
                "measurement has dimension {}, expected {}",
                y.len(),
                self.state_dim()
            )));
        }
        for z in y.iter() {
            ensure_finite("measurement", *z)?;
        }
        Ok((0..self.models.len())
            .map(|model| LiftedState { z: y.clone(), model })
            .collect())
    }

    fn disturbance_from_transition(
        &self,
        next: &LiftedState,
        prev: &LiftedState,
        u: f64,
    ) -> Option<DVector<f64>> {
        if next.model != prev.model {
            return None;
        }
        let (a, b) = &self.models[prev.model];
        Some(&next.z - a * &prev.z - b * u)
    }

    fn stage_cost(&self, x: &LiftedState, u: f64, w: &DVector<f64>, gamma: f64) -> f64 {
        x.z.norm_squared() + u * u - gamma * gamma * w.norm_squared()
    }
}
