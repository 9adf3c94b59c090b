//! Finite-population check of the potential-game identity.
//!
//! N players share the game's reward, each evaluated at the empirical
//! measure of the joint state. For a unilateral deviation of player `i`
//! from `pi` to `pi'` the payoff difference `J^i(pi) - J^i(pi')` must equal
//! the difference of the common payoff `Omega`. `J^i` is computed by
//! propagating the joint distribution forward; `Omega` by backward induction
//! over joint states with the deviator relabelled as player 0. The two
//! sides share no code past the joint kernel.

use std::sync::Arc;

use rand::Rng;

use super::game::{DiscreteMFG, DiscretePolicy, GameError, RewardFn};

/// Joint state and action spaces of `players` copies of a game.
#[derive(Debug, Clone, Copy)]
struct Joint {
    players: usize,
    states: usize,
    actions: usize,
}

impl Joint {
    fn new(game: &DiscreteMFG, players: usize) -> Result<Self, GameError> {
        if players == 0 {
            return Err(GameError::Invalid("players must be >= 1".into()));
        }
        let size = (game.states() as f64).powi(players as i32) * (game.actions() as f64).powi(players as i32);
        if size > 1e7 {
            return Err(GameError::Invalid(format!("joint space too large ({size:.0} state-action pairs)")));
        }
        Ok(Self { players, states: game.states(), actions: game.actions() })
    }

    fn num_states(&self) -> usize {
        self.states.pow(self.players as u32)
    }

    fn num_actions(&self) -> usize {
        self.actions.pow(self.players as u32)
    }

    fn decode(&self, mut code: usize, base: usize, out: &mut [usize]) {
        for d in out.iter_mut() {
            *d = code % base;
            code /= base;
        }
    }

    fn init(&self, game: &DiscreteMFG) -> Vec<f64> {
        let mut s = vec![0; self.players];
        (0..self.num_states())
            .map(|js| {
                self.decode(js, self.states, &mut s);
                s.iter().map(|&si| game.init()[si]).product()
            })
            .collect()
    }

    /// `(probability of the joint action, player's reward, next-state distribution)`
    /// for every joint action with positive probability at `(t, js)`.
    fn branches(&self, game: &DiscreteMFG, profile: &[DiscretePolicy], player: usize, t: usize, js: usize) -> Vec<(f64, f64, Vec<f64>)> {
        let mut s = vec![0; self.players];
        let mut a = vec![0; self.players];
        let mut s_next = vec![0; self.players];
        self.decode(js, self.states, &mut s);
        let n = self.players as f64;
        let mut out = Vec::new();
        for ja in 0..self.num_actions() {
            self.decode(ja, self.actions, &mut a);
            let p: f64 = (0..self.players).map(|i| profile[i].prob(t, s[i], a[i])).product();
            if p == 0.0 {
                continue;
            }
            let own = s[player];
            let mass = s.iter().filter(|&&v| v == own).count() as f64 / n;
            let r = game.reward(own, mass, a[player]);
            let next: Vec<f64> = (0..self.num_states())
                .map(|jn| {
                    self.decode(jn, self.states, &mut s_next);
                    (0..self.players).map(|i| game.transition_row(s[i], a[i])[s_next[i]]).product()
                })
                .collect();
            out.push((p, r, next));
        }
        out
    }
}

fn check_profile(game: &DiscreteMFG, profile: &[DiscretePolicy], player: usize) -> Result<(), GameError> {
    if player >= profile.len() {
        return Err(GameError::Shape(format!("player {player} out of {}", profile.len())));
    }
    for pi in profile {
        // rows are validated where the game consumes policies
        super::game::induced_flow(game, pi)?;
    }
    Ok(())
}

/// Expected total reward of `player` under `profile`, by forward
/// propagation of the joint state distribution.
pub fn player_payoff(game: &DiscreteMFG, profile: &[DiscretePolicy], player: usize) -> Result<f64, GameError> {
    check_profile(game, profile, player)?;
    let joint = Joint::new(game, profile.len())?;
    let mut dist = joint.init(game);
    let mut total = 0.0;
    for t in 0..game.horizon() {
        let mut next = vec![0.0; joint.num_states()];
        for (js, &w) in dist.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for (p, r, to) in joint.branches(game, profile, player, t, js) {
                total += w * p * r;
                for (nv, q) in next.iter_mut().zip(&to) {
                    *nv += w * p * q;
                }
            }
        }
        dist = next;
    }
    Ok(total)
}

/// Common payoff seen from `player`: the profile is relabelled so that
/// `player` comes first, then valued by backward induction.
pub fn common_payoff(game: &DiscreteMFG, profile: &[DiscretePolicy], player: usize) -> Result<f64, GameError> {
    check_profile(game, profile, player)?;
    let mut order: Vec<usize> = vec![player];
    order.extend((0..profile.len()).filter(|&i| i != player));
    let relabelled: Vec<DiscretePolicy> = order.iter().map(|&i| profile[i].clone()).collect();
    let joint = Joint::new(game, relabelled.len())?;
    let mut v = vec![0.0; joint.num_states()];
    for t in (0..game.horizon()).rev() {
        v = (0..joint.num_states())
            .map(|js| {
                joint
                    .branches(game, &relabelled, 0, t, js)
                    .iter()
                    .map(|(p, r, to)| p * (r + to.iter().zip(&v).map(|(q, vn)| q * vn).sum::<f64>()))
                    .sum()
            })
            .collect();
    }
    Ok(joint.init(game).iter().zip(&v).map(|(w, x)| w * x).sum())
}

/// `|(J^i(pi) - J^i(pi')) - (Omega(pi) - Omega(pi'))|` for player `player`
/// switching from `profile[player]` to `alt`.
pub fn deviation_discrepancy(
    game: &DiscreteMFG,
    profile: &[DiscretePolicy],
    player: usize,
    alt: &DiscretePolicy,
) -> Result<f64, GameError> {
    let mut deviated = profile.to_vec();
    if player >= deviated.len() {
        return Err(GameError::Shape(format!("player {player} out of {}", profile.len())));
    }
    deviated[player] = alt.clone();
    let lhs = player_payoff(game, profile, player)? - player_payoff(game, &deviated, player)?;
    let rhs = common_payoff(game, profile, player)? - common_payoff(game, &deviated, player)?;
    Ok((lhs - rhs).abs())
}

/// Largest discrepancy over `samples` random profiles and unilateral
/// deviations of a random player among `players`.
pub fn potential_identity_check<R: Rng + ?Sized>(
    game: &DiscreteMFG,
    players: usize,
    samples: usize,
    rng: &mut R,
) -> Result<f64, GameError> {
    Joint::new(game, players)?;
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let profile: Vec<DiscretePolicy> = (0..players).map(|_| DiscretePolicy::random(game, rng)).collect();
        let player = rng.random_range(0..players);
        let alt = DiscretePolicy::random(game, rng);
        worst = worst.max(deviation_discrepancy(game, &profile, player, &alt)?);
    }
    Ok(worst)
}

/// Random game with reward `base[s][a] + c[s] m + q[s] m^2` and a uniform
/// initial distribution.
pub fn random_game<R: Rng + ?Sized>(rng: &mut R, states: usize, actions: usize, horizon: usize) -> DiscreteMFG {
    let mut p = Vec::with_capacity(states * actions * states);
    for _ in 0..states * actions {
        let row: Vec<f64> = (0..states).map(|_| rng.random::<f64>() + 0.05).collect();
        let z: f64 = row.iter().sum();
        p.extend(row.iter().map(|v| v / z));
    }
    let base: Vec<f64> = (0..states * actions).map(|_| rng.random_range(-1.0..1.0)).collect();
    let c: Vec<f64> = (0..states).map(|_| rng.random_range(-1.0..1.0)).collect();
    let q: Vec<f64> = (0..states).map(|_| rng.random_range(-1.0..1.0)).collect();
    let reward: RewardFn = Arc::new(move |s, m, a| base[s * actions + a] + c[s] * m + q[s] * m * m);
    let init = vec![1.0 / states as f64; states];
    DiscreteMFG::new(states, actions, horizon, p, reward, init).expect("normalized random game")
}
