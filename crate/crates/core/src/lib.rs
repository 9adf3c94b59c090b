//! Mean-field actor-critic fictitious play.
//!
//! * [`meanfield`]: histogram measures and the fictitious-play belief.
//! * [`envs`]: congestion, demand, and LQR environments.
//! * [`approx`]: two-layer networks, Adam, Gaussian policy.
//! * [`learner`]: the training loop.
//! * [`experiments`]: scoring trained policies.
//! * [`oracle`]: exact solutions used as references.

pub mod approx;
pub mod envs;
pub mod experiments;
pub mod learner;
pub mod meanfield;
pub mod oracle;
