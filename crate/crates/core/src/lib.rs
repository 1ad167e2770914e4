//! Minimax dual control with finite-dimensional information states.
//!
//! The crate is organised around the magnitude-measured integrator
//! `x⁺ = x + u + w`, `y = |x|`, but the information-state machinery is
//! generic over any [`SystemModel`] whose measurement map has a preimage
//! of bounded cardinality.
//!
//! - [`system`]: dynamics, measurement maps and preimage enumeration.
//! - [`istate`]: the per-hypothesis worst-case cost recursion.
//! - [`oracle`]: brute-force history enumeration used as ground truth.
//! - [`vi`]: grid value iteration over the normalised information state.
//! - [`certify`]: the quadratic value bound and its dissipation checks.
//! - [`control`]: decision rules (certainty-equivalence sign controller and
//!   the comparison controllers).
//! - [`sim`]: closed-loop simulation, disturbances, adversarial search and
//!   ℓ2-gain accounting.

pub mod certify;
pub mod control;
pub mod error;
pub mod extreal;
pub mod istate;
pub mod oracle;
pub mod sim;
pub mod system;
pub mod vi;

pub use certify::{Certificate, ClosedFormBellman, DissipationReport, InequalityReport};
pub use control::{
    AlternatingPolicy, CeSignPolicy, MyopicLiteralPolicy, MyopicPolicy, Policy,
    ProportionalPolicy,
};
pub use error::{Error, Result};
pub use extreal::ExtReal;
pub use istate::InfoState;
pub use sim::{DisturbanceSpec, SearchSettings, StepRecord, Trajectory};
pub use system::{Integrator, IoRealization, LinearModelSet, SystemModel};
pub use vi::{GridConfig, ValueGrid, Verdict};
