//! Exact checks on small games.
//!
//! * [`game`]: finite mean-field games, best response, exploitability,
//!   fictitious play.
//! * [`potential`]: the unilateral-deviation identity for N players.
//! * [`scaling`]: value gap of a mean-field policy in an N-agent population.
//! * [`lqr`]: Riccati solution of the LQR environment.

pub mod game;
pub mod lqr;
pub mod potential;
pub mod scaling;

pub use game::{
    best_response, evaluate, exploitability, exploitability_with, fictitious_play, fictitious_play_from, induced_flow,
    monotone_ring, ring_game, DiscreteMFG, DiscretePolicy, FictitiousPlay, Flow, GameError, RewardFn, Weighting,
};
pub use lqr::{lqr_analytic, LqrError, LqrSolution};
pub use potential::potential_identity_check;
pub use scaling::{loglog_slope, nplayer_gap, scaling_csv, scaling_experiment, GapEstimate};
