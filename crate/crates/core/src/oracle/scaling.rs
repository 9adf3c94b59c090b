//! Value gap between a mean-field policy deployed in an N-agent population
//! and its infinite-population value.
//!
//! Each trial simulates N agents under the policy, records the realized
//! empirical flow, and values the policy exactly against that flow. The gap
//! is the distance from the value against the mean-field flow. Rewards only
//! see the flow through the mass at the agent's own state, so a
//! flow-independent reward gives a gap of exactly zero.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::game::{evaluate_unchecked, induced_flow, DiscreteMFG, DiscretePolicy, Flow, GameError};
use crate::learner::mix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapEstimate {
    pub agents: usize,
    pub trials: usize,
    pub mean: f64,
    pub std: f64,
}

/// Index drawn from the distribution `p`.
pub fn sample_index<R: Rng + ?Sized>(rng: &mut R, p: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, v) in p.iter().enumerate() {
        acc += v;
        if u < acc {
            return i;
        }
    }
    // rounding left the cumulative sum just under one
    p.iter().rposition(|&v| v > 0.0).unwrap_or(0)
}

/// Realized empirical flow of `agents` agents.
pub fn empirical_flow<R: Rng + ?Sized>(game: &DiscreteMFG, policy: &DiscretePolicy, agents: usize, rng: &mut R) -> Flow {
    let n = game.states();
    let mut pos: Vec<usize> = (0..agents).map(|_| sample_index(rng, game.init())).collect();
    let mut dists = Vec::with_capacity(game.horizon() + 1);
    let hist = |pos: &[usize]| {
        let mut h = vec![0.0; n];
        for &s in pos {
            h[s] += 1.0 / agents as f64;
        }
        h
    };
    dists.push(hist(&pos));
    for t in 0..game.horizon() {
        for s in pos.iter_mut() {
            let a = sample_index(rng, &policy.probs[t][*s]);
            *s = sample_index(rng, game.transition_row(*s, a));
        }
        dists.push(hist(&pos));
    }
    Flow { dists }
}

fn weighted_value(game: &DiscreteMFG, policy: &DiscretePolicy, flow: &Flow) -> f64 {
    evaluate_unchecked(game, policy, flow)[0].iter().zip(game.init()).map(|(v, w)| v * w).sum()
}

/// Mean and standard deviation over `trials` of `|J_N - J_inf|`.
///
/// One seed is drawn from `rng`; trial `k` uses its own stream derived
/// from it, so trials are independent of evaluation order.
pub fn nplayer_gap<R: Rng + ?Sized>(
    game: &DiscreteMFG,
    policy: &DiscretePolicy,
    agents: usize,
    trials: usize,
    rng: &mut R,
) -> Result<GapEstimate, GameError> {
    if agents == 0 || trials == 0 {
        return Err(GameError::Invalid("agents and trials must be >= 1".into()));
    }
    let j_inf = weighted_value(game, policy, &induced_flow(game, policy)?);
    let base: u64 = rng.random();
    let gaps: Vec<f64> = (0..trials as u64)
        .map(|k| {
            let mut trial_rng = ChaCha8Rng::seed_from_u64(mix(base, k));
            let flow = empirical_flow(game, policy, agents, &mut trial_rng);
            (weighted_value(game, policy, &flow) - j_inf).abs()
        })
        .collect();
    let mean = gaps.iter().sum::<f64>() / trials as f64;
    let var = gaps.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / trials as f64;
    Ok(GapEstimate { agents, trials, mean, std: var.sqrt() })
}

/// [`nplayer_gap`] for every population size in `sizes`.
pub fn scaling_experiment(
    game: &DiscreteMFG,
    policy: &DiscretePolicy,
    sizes: &[usize],
    trials: usize,
    seed: u64,
) -> Result<Vec<GapEstimate>, GameError> {
    sizes
        .iter()
        .enumerate()
        .map(|(i, &n)| nplayer_gap(game, policy, n, trials, &mut ChaCha8Rng::seed_from_u64(mix(seed, i as u64))))
        .collect()
}

/// `N,trials,gap_mean,gap_std`.
pub fn scaling_csv(rows: &[GapEstimate]) -> String {
    let mut out = String::from("N,trials,gap_mean,gap_std\n");
    for r in rows {
        out.push_str(&format!("{},{},{},{}\n", r.agents, r.trials, r.mean, r.std));
    }
    out
}

/// Least-squares slope of `ln gap_mean` against `ln N`.
pub fn loglog_slope(rows: &[GapEstimate]) -> Option<f64> {
    let pts: Vec<(f64, f64)> =
        rows.iter().filter(|r| r.mean > 0.0).map(|r| ((r.agents as f64).ln(), r.mean.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Population sizes `8, 16, ..., 1024`.
pub fn default_sizes() -> Vec<usize> {
    (3..=10).map(|k| 1usize << k).collect()
}
