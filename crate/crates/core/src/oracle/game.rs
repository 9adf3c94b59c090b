use std::fmt;
use std::sync::Arc;

use rand::Rng;
use thiserror::Error;

/// Tolerance for row sums of kernels, flows, and policies.
pub const PROB_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GameError {
    #[error("transition row ({state}, {action}) is not a distribution")]
    Transition { state: usize, action: usize },
    #[error("initial distribution is not a distribution")]
    Initial,
    #[error("flow at t={0} is not a distribution")]
    Flow(usize),
    #[error("policy row (t={t}, s={state}) is not a distribution")]
    Policy { t: usize, state: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("{0}")]
    Invalid(String),
}

/// `L(state, mass at state, action)`.
pub type RewardFn = Arc<dyn Fn(usize, f64, usize) -> f64 + Send + Sync>;

/// Finite-horizon mean-field game on finite state and action sets.
///
/// Rewards are collected at `t = 0..T-1`; the flow has `T + 1` entries.
#[derive(Clone)]
pub struct DiscreteMFG {
    states: usize,
    actions: usize,
    horizon: usize,
    /// `P(s'|s,a)` at `(s * actions + a) * states + s'`.
    transition: Vec<f64>,
    reward: RewardFn,
    init: Vec<f64>,
}

impl fmt::Debug for DiscreteMFG {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiscreteMFG")
            .field("states", &self.states)
            .field("actions", &self.actions)
            .field("horizon", &self.horizon)
            .field("init", &self.init)
            .finish_non_exhaustive()
    }
}

fn is_distribution(p: &[f64]) -> bool {
    p.iter().all(|&v| v >= 0.0 && v.is_finite()) && (p.iter().sum::<f64>() - 1.0).abs() <= PROB_TOLERANCE
}

impl DiscreteMFG {
    pub fn new(
        states: usize,
        actions: usize,
        horizon: usize,
        transition: Vec<f64>,
        reward: RewardFn,
        init: Vec<f64>,
    ) -> Result<Self, GameError> {
        if states == 0 || actions == 0 || horizon == 0 {
            return Err(GameError::Invalid("states, actions, and horizon must be >= 1".into()));
        }
        if transition.len() != states * actions * states {
            return Err(GameError::Shape(format!(
                "transition has {} entries, expected {}",
                transition.len(),
                states * actions * states
            )));
        }
        for s in 0..states {
            for a in 0..actions {
                let row = &transition[(s * actions + a) * states..(s * actions + a + 1) * states];
                if !is_distribution(row) {
                    return Err(GameError::Transition { state: s, action: a });
                }
            }
        }
        if init.len() != states || !is_distribution(&init) {
            return Err(GameError::Initial);
        }
        Ok(Self { states, actions, horizon, transition, reward, init })
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn init(&self) -> &[f64] {
        &self.init
    }

    pub fn transition_row(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.actions + a) * self.states;
        &self.transition[start..start + self.states]
    }

    pub fn reward(&self, s: usize, mass: f64, a: usize) -> f64 {
        (self.reward)(s, mass, a)
    }

    /// The same game with every reward shifted by `c`.
    pub fn shifted(&self, c: f64) -> Self {
        let inner = self.reward.clone();
        Self { reward: Arc::new(move |s, m, a| inner(s, m, a) + c), ..self.clone() }
    }

    /// The same game started from `init`.
    pub fn with_init(&self, init: Vec<f64>) -> Result<Self, GameError> {
        if init.len() != self.states || !is_distribution(&init) {
            return Err(GameError::Initial);
        }
        Ok(Self { init, ..self.clone() })
    }

    fn check_flow(&self, flow: &Flow) -> Result<(), GameError> {
        if flow.dists.len() != self.horizon + 1 {
            return Err(GameError::Shape(format!("flow has {} steps, expected {}", flow.dists.len(), self.horizon + 1)));
        }
        for (t, d) in flow.dists.iter().enumerate() {
            if d.len() != self.states || !is_distribution(d) {
                return Err(GameError::Flow(t));
            }
        }
        Ok(())
    }

    fn check_policy(&self, policy: &DiscretePolicy) -> Result<(), GameError> {
        if policy.probs.len() != self.horizon {
            return Err(GameError::Shape(format!("policy has {} steps, expected {}", policy.probs.len(), self.horizon)));
        }
        for (t, rows) in policy.probs.iter().enumerate() {
            if rows.len() != self.states {
                return Err(GameError::Shape(format!("policy step {t} has {} states", rows.len())));
            }
            for (s, row) in rows.iter().enumerate() {
                if row.len() != self.actions || !is_distribution(row) {
                    return Err(GameError::Policy { t, state: s });
                }
            }
        }
        Ok(())
    }
}

/// State distributions for `t = 0..=T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Flow {
    pub dists: Vec<Vec<f64>>,
}

impl Flow {
    /// `mu` repeated at every time index.
    pub fn constant(mu: &[f64], horizon: usize) -> Self {
        Self { dists: vec![mu.to_vec(); horizon + 1] }
    }

    pub fn at(&self, t: usize) -> &[f64] {
        &self.dists[t]
    }

    /// Largest L1 distance over time indices.
    pub fn distance(&self, other: &Flow) -> f64 {
        self.dists
            .iter()
            .zip(&other.dists)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Entrywise mean of `flows`.
    pub fn mean(flows: &[Flow]) -> Option<Flow> {
        let first = flows.first()?;
        let n = flows.len() as f64;
        let mut dists = vec![vec![0.0; first.dists[0].len()]; first.dists.len()];
        for f in flows {
            for (acc, d) in dists.iter_mut().zip(&f.dists) {
                for (a, v) in acc.iter_mut().zip(d) {
                    *a += v;
                }
            }
        }
        dists.iter_mut().flatten().for_each(|v| *v /= n);
        Some(Flow { dists })
    }
}

/// `probs[t][s][a]` for `t = 0..T`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePolicy {
    pub probs: Vec<Vec<Vec<f64>>>,
}

impl DiscretePolicy {
    pub fn uniform(game: &DiscreteMFG) -> Self {
        let p = 1.0 / game.actions as f64;
        Self { probs: vec![vec![vec![p; game.actions]; game.states]; game.horizon] }
    }

    /// Plays `choice[t][s]` with probability one.
    pub fn deterministic(game: &DiscreteMFG, choice: &[Vec<usize>]) -> Self {
        let probs = choice
            .iter()
            .map(|row| {
                row.iter()
                    .map(|&a| {
                        let mut p = vec![0.0; game.actions];
                        p[a] = 1.0;
                        p
                    })
                    .collect()
            })
            .collect();
        Self { probs }
    }

    /// Independent random rows, each bounded away from zero.
    pub fn random<R: Rng + ?Sized>(game: &DiscreteMFG, rng: &mut R) -> Self {
        let probs = (0..game.horizon)
            .map(|_| {
                (0..game.states)
                    .map(|_| {
                        let row: Vec<f64> = (0..game.actions).map(|_| rng.random::<f64>() + 1e-3).collect();
                        let z: f64 = row.iter().sum();
                        row.iter().map(|v| v / z).collect()
                    })
                    .collect()
            })
            .collect();
        Self { probs }
    }

    pub fn prob(&self, t: usize, s: usize, a: usize) -> f64 {
        self.probs[t][s][a]
    }
}

/// Value of each state at each `t = 0..=T`; `values[T]` is all zeros.
pub type Values = Vec<Vec<f64>>;

/// Forward propagation of the population under a shared policy.
pub fn induced_flow(game: &DiscreteMFG, policy: &DiscretePolicy) -> Result<Flow, GameError> {
    game.check_policy(policy)?;
    let mut dists = Vec::with_capacity(game.horizon + 1);
    dists.push(game.init.clone());
    for t in 0..game.horizon {
        let cur = &dists[t];
        let mut next = vec![0.0; game.states];
        for s in 0..game.states {
            if cur[s] == 0.0 {
                continue;
            }
            for a in 0..game.actions {
                let w = cur[s] * policy.prob(t, s, a);
                if w == 0.0 {
                    continue;
                }
                for (n, p) in next.iter_mut().zip(game.transition_row(s, a)) {
                    *n += w * p;
                }
            }
        }
        dists.push(next);
    }
    Ok(Flow { dists })
}

fn q_value(game: &DiscreteMFG, flow: &Flow, next: &[f64], t: usize, s: usize, a: usize) -> f64 {
    let cont: f64 = game.transition_row(s, a).iter().zip(next).map(|(p, v)| p * v).sum();
    game.reward(s, flow.at(t)[s], a) + cont
}

/// Value of `policy` against a frozen flow.
pub fn evaluate(game: &DiscreteMFG, policy: &DiscretePolicy, flow: &Flow) -> Result<Values, GameError> {
    game.check_policy(policy)?;
    game.check_flow(flow)?;
    Ok(evaluate_unchecked(game, policy, flow))
}

/// [`evaluate`] for flows that need not be normalized, such as the empirical
/// measure of a finite population.
pub(crate) fn evaluate_unchecked(game: &DiscreteMFG, policy: &DiscretePolicy, flow: &Flow) -> Values {
    let mut values = vec![vec![0.0; game.states]; game.horizon + 1];
    for t in (0..game.horizon).rev() {
        let (head, tail) = values.split_at_mut(t + 1);
        let next = &tail[0];
        for s in 0..game.states {
            head[t][s] = (0..game.actions)
                .map(|a| {
                    let p = policy.prob(t, s, a);
                    if p == 0.0 {
                        0.0
                    } else {
                        p * q_value(game, flow, next, t, s, a)
                    }
                })
                .sum();
        }
    }
    values
}

/// Backward-induction best response to a frozen flow. Ties go to the
/// lowest action index.
pub fn best_response(game: &DiscreteMFG, flow: &Flow) -> Result<(DiscretePolicy, Values), GameError> {
    game.check_flow(flow)?;
    let mut values = vec![vec![0.0; game.states]; game.horizon + 1];
    let mut choice = vec![vec![0usize; game.states]; game.horizon];
    for t in (0..game.horizon).rev() {
        let (head, tail) = values.split_at_mut(t + 1);
        let next = &tail[0];
        for s in 0..game.states {
            let mut best = q_value(game, flow, next, t, s, 0);
            let mut arg = 0;
            for a in 1..game.actions {
                let q = q_value(game, flow, next, t, s, a);
                if q > best {
                    best = q;
                    arg = a;
                }
            }
            head[t][s] = best;
            choice[t][s] = arg;
        }
    }
    Ok((DiscretePolicy::deterministic(game, &choice), values))
}

/// How the per-state best-response gap is aggregated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Weighting {
    /// Expectation under the initial distribution.
    #[default]
    Initial,
    /// Largest gap over all states at `t = 0`.
    WorstCase,
}

/// Best-response gap of `policy` at its own induced flow.
pub fn exploitability(game: &DiscreteMFG, policy: &DiscretePolicy) -> Result<f64, GameError> {
    exploitability_with(game, policy, Weighting::Initial)
}

pub fn exploitability_with(game: &DiscreteMFG, policy: &DiscretePolicy, weighting: Weighting) -> Result<f64, GameError> {
    let flow = induced_flow(game, policy)?;
    let (_, v_br) = best_response(game, &flow)?;
    let v_pi = evaluate_unchecked(game, policy, &flow);
    let gaps = v_br[0].iter().zip(&v_pi[0]).map(|(b, p)| b - p);
    let eps = match weighting {
        Weighting::Initial => gaps.zip(&game.init).map(|(g, w)| g * w).sum(),
        Weighting::WorstCase => gaps.fold(0.0, f64::max),
    };
    // the best response dominates state by state; only rounding can push it below zero
    Ok(eps.max(0.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FictitiousPlay {
    /// Policy that induces the averaged flow.
    pub policy: DiscretePolicy,
    pub flow: Flow,
    /// Exploitability of the average policy after each iteration.
    pub exploitability: Vec<f64>,
    /// Flow induced by each iteration's best response.
    pub induced: Vec<Flow>,
}

impl FictitiousPlay {
    /// `iteration,exploitability`, iterations counted from 1.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iteration,exploitability\n");
        for (i, e) in self.exploitability.iter().enumerate() {
            out.push_str(&format!("{},{}\n", i + 1, e));
        }
        out
    }

    /// Running minimum of the exploitability trace.
    pub fn running_min(&self) -> Vec<f64> {
        let mut cur = f64::INFINITY;
        self.exploitability
            .iter()
            .map(|&e| {
                cur = cur.min(e);
                cur
            })
            .collect()
    }
}

/// Fictitious play started from the flow of the uniform policy.
pub fn fictitious_play(game: &DiscreteMFG, iterations: usize) -> Result<FictitiousPlay, GameError> {
    let start = induced_flow(game, &DiscretePolicy::uniform(game))?;
    fictitious_play_from(game, iterations, &start)
}

/// Fictitious play where `initial` is the belief the first best response
/// answers. It does not enter the average.
///
/// The average policy weights each iterate by the mass it puts on a state,
/// `pi_bar_t(a|s) = sum_j m^j_t(s) pi^j_t(a|s) / sum_j m^j_t(s)`, so it
/// induces exactly the averaged flow.
pub fn fictitious_play_from(game: &DiscreteMFG, iterations: usize, initial: &Flow) -> Result<FictitiousPlay, GameError> {
    if iterations == 0 {
        return Err(GameError::Invalid("iterations must be >= 1".into()));
    }
    game.check_flow(initial)?;
    let (s_n, a_n, t_n) = (game.states, game.actions, game.horizon);
    let mut belief = initial.clone();
    let mut weighted = vec![vec![vec![0.0; a_n]; s_n]; t_n];
    let mut mass = vec![vec![0.0; s_n]; t_n];
    let mut induced = Vec::with_capacity(iterations);
    let mut trace = Vec::with_capacity(iterations);
    let mut avg_policy = DiscretePolicy::uniform(game);
    for j in 1..=iterations {
        let (br, _) = best_response(game, &belief)?;
        let flow = induced_flow(game, &br)?;
        for t in 0..t_n {
            for s in 0..s_n {
                let m = flow.at(t)[s];
                mass[t][s] += m;
                for a in 0..a_n {
                    weighted[t][s][a] += m * br.prob(t, s, a);
                }
            }
        }
        for t in 0..t_n {
            for s in 0..s_n {
                // unreached states keep the latest best response
                avg_policy.probs[t][s] = if mass[t][s] > 0.0 {
                    weighted[t][s].iter().map(|w| w / mass[t][s]).collect()
                } else {
                    br.probs[t][s].clone()
                };
            }
        }
        let w = 1.0 / j as f64;
        for (b, d) in belief.dists.iter_mut().zip(&flow.dists) {
            for (bv, dv) in b.iter_mut().zip(d) {
                *bv = if j == 1 { *dv } else { *bv + w * (dv - *bv) };
            }
        }
        induced.push(flow);
        trace.push(exploitability(game, &avg_policy)?);
    }
    Ok(FictitiousPlay { policy: avg_policy, flow: belief, exploitability: trace, induced })
}

/// Ring of `n` states with actions stay (0) and move clockwise (1).
/// Moving succeeds with probability `success`, otherwise the agent stays.
pub fn ring_transitions(n: usize, success: f64) -> Vec<f64> {
    let mut p = vec![0.0; n * 2 * n];
    for s in 0..n {
        p[(s * 2) * n + s] = 1.0;
        let row = (s * 2 + 1) * n;
        p[row + (s + 1) % n] += success;
        p[row + s] += 1.0 - success;
    }
    p
}

/// The four-state monotone ring game.
///
/// Every state pays `w(s) / (1 + kappa * m)`, strictly decreasing in its own
/// mass, and moving costs `cost`. The weights make the crowded-out
/// equilibrium interior, so fictitious play has real work to do.
pub fn monotone_ring() -> DiscreteMFG {
    ring_game(&[1.0, 0.6, 0.4, 0.2], 4.0, 0.05, 4)
}

/// Ring game with per-state weights `w`, crowding `kappa`, and move cost.
pub fn ring_game(weights: &[f64], kappa: f64, cost: f64, horizon: usize) -> DiscreteMFG {
    let n = weights.len();
    let w = weights.to_vec();
    let reward: RewardFn = Arc::new(move |s, m, a| w[s] / (1.0 + kappa * m) - if a == 1 { cost } else { 0.0 });
    DiscreteMFG::new(n, 2, horizon, ring_transitions(n, 1.0), reward, vec![1.0 / n as f64; n]).expect("ring game is valid")
}
