//! Actor-critic fictitious play.
//!
//! Each episode the whole population acts under one shared Gaussian policy.
//! The realized per-step empirical measures are folded into the fictitious
//! play beliefs (one running-average grid per time index), the critic takes
//! one TD(0) step and the actor one policy-gradient step with the critic as
//! baseline. Rewards are evaluated against the averaged belief, so each
//! policy update is an approximate best response to `m̄ⁿ`.
//!
//! The belief moves with step `β(n) = 1/(n+1)` while the networks keep fixed
//! Adam rates, which makes the belief quasi-static late in training. A
//! decaying "theory" schedule is available for checking the two-timescale
//! conditions directly.
//!
//! Reproducibility: agent `i` of episode `n` draws all of its randomness from
//! its own ChaCha stream, and gradients are reduced in agent-id order, so a
//! run is determined by `(spec, config)` alone.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::approx::{gaussian_log_density, AdamState, ApproxError, GaussianPolicy, Mlp};
use crate::envs::{EnvError, EnvSpec, Point};
use crate::meanfield::{BeliefState, DensityGrid, GridError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearnerError {
    #[error("diverged at episode {episode}")]
    Diverged { episode: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Approx(#[from] ApproxError),
}

/// What the rewards are measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BeliefMode {
    /// The fictitious-play running average of past measures.
    Averaged,
    /// The current episode's own empirical measure.
    Instantaneous,
}

/// `scale * (n + 1)^(-exponent)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLaw {
    pub scale: f64,
    pub exponent: f64,
}

impl PowerLaw {
    pub fn at(&self, n: usize) -> f64 {
        self.scale * ((n + 1) as f64).powf(-self.exponent)
    }

    /// `sum_n a(n) = inf`.
    pub fn sum_diverges(&self) -> bool {
        self.scale > 0.0 && self.exponent <= 1.0
    }

    /// `sum_n a(n)^2 < inf`.
    pub fn square_summable(&self) -> bool {
        self.exponent > 0.5
    }

    pub fn is_robbins_monro(&self) -> bool {
        self.sum_diverges() && self.square_summable()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Schedule {
    /// Fixed Adam rates; belief step `1/(n+1)`.
    Fixed,
    /// Network rates `a/(n+1)` and belief step `b (n+1)^-0.6`, so the ratio
    /// of the two vanishes like `n^-0.4`.
    Theory { actor_scale: f64, belief_scale: f64 },
}

impl Schedule {
    pub fn belief_law(&self) -> PowerLaw {
        match *self {
            Schedule::Fixed => PowerLaw { scale: 1.0, exponent: 1.0 },
            Schedule::Theory { belief_scale, .. } => PowerLaw { scale: belief_scale, exponent: 0.6 },
        }
    }

    /// Network learning-rate law given the configured base rate.
    pub fn rate_law(&self, base: f64) -> PowerLaw {
        match *self {
            Schedule::Fixed => PowerLaw { scale: base, exponent: 0.0 },
            Schedule::Theory { actor_scale, .. } => PowerLaw { scale: actor_scale * base, exponent: 1.0 },
        }
    }

    pub fn belief_step(&self, n: usize) -> f64 {
        self.belief_law().at(n).min(1.0)
    }

    /// First episode `n0` from which the belief step stays below the network
    /// rate `base` for good. `None` when the belief never becomes the slower
    /// variable.
    pub fn crossover(&self, base: f64) -> Option<usize> {
        match *self {
            Schedule::Fixed if base > 0.0 => Some((1.0 / base).floor() as usize),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnerConfig {
    pub agents: usize,
    pub episodes: usize,
    pub seed: u64,
    pub hidden: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub policy_std: f64,
    pub belief_mode: BeliefMode,
    pub schedule: Schedule,
    /// Feed the local belief density to the critic.
    pub critic_density: bool,
    /// Abort once any parameter magnitude exceeds this.
    pub divergence_limit: f64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            agents: 1000,
            episodes: 2000,
            seed: 0,
            hidden: 64,
            actor_lr: 1e-4,
            critic_lr: 1e-4,
            policy_std: crate::approx::DEFAULT_POLICY_STD,
            belief_mode: BeliefMode::Averaged,
            schedule: Schedule::Fixed,
            critic_density: true,
            divergence_limit: 1e6,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<(), LearnerError> {
        let bad = |m: &str| Err(LearnerError::Config(m.into()));
        if self.agents == 0 {
            return bad("agents must be >= 1");
        }
        if self.hidden == 0 {
            return bad("hidden width must be >= 1");
        }
        if !(self.actor_lr > 0.0 && self.critic_lr > 0.0) {
            return bad("learning rates must be positive");
        }
        if !(self.policy_std > 0.0) {
            return bad("policy std must be positive");
        }
        Ok(())
    }
}

/// Network input layout shared by the rollout, the updates, and evaluation.
///
/// Positions are standardized as `(x - center) / scale`. A one-shot game
/// only ever shows the networks initial states, so those are standardized by
/// the initial distribution; longer games use the grid box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Features {
    horizon: usize,
    time: bool,
    density: bool,
    center: Point,
    scale: f64,
}

impl Features {
    pub fn new(horizon: usize, density: bool) -> Self {
        Self { horizon, time: horizon > 1, density, center: [0.0, 0.0], scale: 1.0 }
    }

    pub fn for_env(spec: &EnvSpec, density: bool) -> Self {
        let (center, scale) = if spec.horizon == 1 && spec.init_std > 0.0 {
            (spec.init_mean, spec.init_std)
        } else {
            let b = spec.grid.bounds();
            let half = 0.5 * (b.x_max - b.x_min).max(b.y_max - b.y_min);
            ([0.5 * (b.x_min + b.x_max), 0.5 * (b.y_min + b.y_max)], half)
        };
        Self { center, scale, ..Self::new(spec.horizon, density) }
    }

    pub fn policy_dim(&self) -> usize {
        2 + self.time as usize
    }

    pub fn critic_dim(&self) -> usize {
        self.policy_dim() + self.density as usize
    }

    /// Standardized `[x, y]`, plus `k/T` when the horizon exceeds one step.
    pub fn policy_input(&self, x: Point, k: usize, out: &mut Vec<f64>) {
        out.clear();
        out.push((x[0] - self.center[0]) / self.scale);
        out.push((x[1] - self.center[1]) / self.scale);
        if self.time {
            out.push(k as f64 / self.horizon as f64);
        }
    }

    /// Policy input plus `ln(1 + density)`.
    pub fn critic_input(&self, x: Point, k: usize, density: f64, out: &mut Vec<f64>) {
        self.policy_input(x, k, out);
        if self.density {
            out.push(density.ln_1p());
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub actor: GaussianPolicy,
    pub critic: Mlp,
    pub actor_opt: AdamState,
    pub critic_opt: AdamState,
    /// One fictitious-play belief per time index `0..=T`.
    pub beliefs: Vec<BeliefState>,
    pub episode: usize,
    pub gamma: f64,
    pub config: LearnerConfig,
    pub features: Features,
}

impl TrainState {
    pub fn new(spec: &EnvSpec, config: &LearnerConfig) -> Result<Self, LearnerError> {
        spec.validate()?;
        config.validate()?;
        let features = Features::for_env(spec, config.critic_density);
        let mut rng = ChaCha8Rng::seed_from_u64(mix(config.seed, u64::MAX));
        let actor_net = Mlp::init(features.policy_dim(), config.hidden, 2, &mut rng);
        let critic = Mlp::init(features.critic_dim(), config.hidden, 1, &mut rng);
        Ok(Self {
            actor_opt: AdamState::new(actor_net.num_params(), config.actor_lr),
            critic_opt: AdamState::new(critic.num_params(), config.critic_lr),
            actor: GaussianPolicy::new(actor_net, config.policy_std),
            critic,
            beliefs: (0..=spec.horizon).map(|_| BeliefState::new(spec.grid)).collect(),
            episode: 0,
            gamma: spec.gamma,
            config: config.clone(),
            features,
        })
    }

    /// Deterministic action: the policy mean.
    pub fn greedy_action(&self, x: Point, k: usize) -> Point {
        let mut input = Vec::with_capacity(3);
        self.features.policy_input(x, k, &mut input);
        let mut hidden = vec![0.0; self.actor.mean.hidden_dim()];
        let mut out = [0.0; 2];
        self.actor.mean.forward_into(&input, &mut hidden, &mut out);
        out
    }

    /// Grid used for rewards at time index `k`: the belief once it has seen
    /// at least one episode, else the episode's own measure.
    fn reward_grid<'a>(&'a self, k: usize, episode_grids: &'a [DensityGrid]) -> &'a DensityGrid {
        let belief = &self.beliefs[k];
        if self.config.belief_mode == BeliefMode::Averaged && belief.count() > 0 {
            belief.average()
        } else {
            &episode_grids[k]
        }
    }

    fn check_bounded(&self) -> Result<(), LearnerError> {
        let limit = self.config.divergence_limit;
        if self.actor.mean.is_bounded(limit) && self.critic.is_bounded(limit) {
            Ok(())
        } else {
            Err(LearnerError::Diverged { episode: self.episode })
        }
    }
}

/// Stream-splitting seed mixer (SplitMix64 finalizer).
pub fn mix(seed: u64, n: u64) -> u64 {
    let mut z = seed ^ n.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Noise source for agent `agent` in an episode seeded with `episode_seed`.
pub fn agent_rng(episode_seed: u64, agent: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(episode_seed);
    rng.set_stream(agent);
    rng
}

/// Full population record of one episode. Arrays are agent-major:
/// `states[i * (T + 1) + k]`, `actions[i * T + k]`, and so on.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeLog {
    pub horizon: usize,
    pub agent_ids: Vec<u64>,
    pub states: Vec<Point>,
    pub actions: Vec<Point>,
    pub rewards: Vec<f64>,
    pub log_probs: Vec<f64>,
    /// Local density fed to the critic at each visited state (`T + 1` per agent).
    pub densities: Vec<f64>,
    pub mean_return: f64,
}

impl EpisodeLog {
    pub fn agents(&self) -> usize {
        self.agent_ids.len()
    }

    pub fn state(&self, agent: usize, k: usize) -> Point {
        self.states[agent * (self.horizon + 1) + k]
    }

    pub fn action(&self, agent: usize, k: usize) -> Point {
        self.actions[agent * self.horizon + k]
    }

    pub fn reward(&self, agent: usize, k: usize) -> f64 {
        self.rewards[agent * self.horizon + k]
    }

    pub fn density(&self, agent: usize, k: usize) -> f64 {
        self.densities[agent * (self.horizon + 1) + k]
    }

    pub fn terminal_positions(&self) -> Vec<Point> {
        (0..self.agents()).map(|i| self.state(i, self.horizon)).collect()
    }

    /// Positions of every agent at time index `k`.
    pub fn positions_at(&self, k: usize) -> Vec<Point> {
        (0..self.agents()).map(|i| self.state(i, k)).collect()
    }

    /// Undiscounted return of each agent.
    pub fn returns(&self) -> Vec<f64> {
        self.rewards.chunks(self.horizon).map(|r| r.iter().sum()).collect()
    }

    /// Mean reward over agents at each step.
    pub fn mean_step_rewards(&self) -> Vec<f64> {
        let n = self.agents() as f64;
        (0..self.horizon).map(|k| (0..self.agents()).map(|i| self.reward(i, k)).sum::<f64>() / n).collect()
    }

    /// Agent indices in ascending id order; all reductions follow it.
    fn canonical_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.agents()).collect();
        order.sort_by_key(|&i| self.agent_ids[i]);
        order
    }

    /// The same log with agents reordered by `perm` (new position `j` holds old agent `perm[j]`).
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let t = self.horizon;
        let pick = |v: &Vec<Point>, w: usize| perm.iter().flat_map(|&i| v[i * w..(i + 1) * w].to_vec()).collect();
        let pick_f = |v: &Vec<f64>, w: usize| perm.iter().flat_map(|&i| v[i * w..(i + 1) * w].to_vec()).collect();
        Self {
            horizon: t,
            agent_ids: perm.iter().map(|&i| self.agent_ids[i]).collect(),
            states: pick(&self.states, t + 1),
            actions: pick(&self.actions, t),
            rewards: pick_f(&self.rewards, t),
            log_probs: pick_f(&self.log_probs, t),
            densities: pick_f(&self.densities, t + 1),
            mean_return: self.mean_return,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    pub log: EpisodeLog,
    /// Empirical measure of the realized population at each time index.
    pub grids: Vec<DensityGrid>,
}

/// Simulates `agents` agents for one episode under the current policy.
///
/// Dynamics never depend on the measure, so trajectories are simulated
/// agent by agent; rewards are evaluated afterwards against the reward grids.
pub fn rollout(spec: &EnvSpec, state: &TrainState, agents: usize, episode_seed: u64) -> Result<Rollout, LearnerError> {
    if agents == 0 {
        return Err(LearnerError::Config("agents must be >= 1".into()));
    }
    let t_len = spec.horizon;
    let mut states = Vec::with_capacity(agents * (t_len + 1));
    let mut actions = Vec::with_capacity(agents * t_len);
    let mut log_probs = Vec::with_capacity(agents * t_len);
    let net = &state.actor.mean;
    let std = state.actor.std;
    let mut input = Vec::with_capacity(3);
    let mut hidden = vec![0.0; net.hidden_dim()];
    let mut mean = [0.0; 2];
    for agent in 0..agents as u64 {
        let mut rng = agent_rng(episode_seed, agent);
        let mut x = spec.sample_initial(&mut rng);
        states.push(x);
        for k in 0..t_len {
            state.features.policy_input(x, k, &mut input);
            net.forward_into(&input, &mut hidden, &mut mean);
            let z: Point = [rng.sample(StandardNormal), rng.sample(StandardNormal)];
            let a = [mean[0] + std * z[0], mean[1] + std * z[1]];
            let noise: Point = [rng.sample(StandardNormal), rng.sample(StandardNormal)];
            x = spec.step(x, a, noise)?;
            if !(x[0].is_finite() && x[1].is_finite()) {
                return Err(LearnerError::Diverged { episode: state.episode });
            }
            log_probs.push(gaussian_log_density(&mean, &a, std));
            actions.push(a);
            states.push(x);
        }
    }

    let grids = (0..=t_len)
        .map(|k| {
            let pos: Vec<Point> = (0..agents).map(|i| states[i * (t_len + 1) + k]).collect();
            DensityGrid::empirical(spec.grid, &pos)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut rewards = Vec::with_capacity(agents * t_len);
    let mut densities = Vec::with_capacity(agents * (t_len + 1));
    for i in 0..agents {
        for k in 0..=t_len {
            let x = states[i * (t_len + 1) + k];
            densities.push(state.reward_grid(k, &grids).density_at(x));
        }
        for k in 0..t_len {
            let x_next = states[i * (t_len + 1) + k + 1];
            let d = densities[i * (t_len + 1) + k + 1];
            rewards.push(spec.reward(k, actions[i * t_len + k], x_next, d)?);
        }
    }
    let mean_return = rewards.iter().sum::<f64>() / agents as f64;
    Ok(Rollout {
        log: EpisodeLog {
            horizon: t_len,
            agent_ids: (0..agents as u64).collect(),
            states,
            actions,
            rewards,
            log_probs,
            densities,
            mean_return,
        },
        grids,
    })
}

/// Critic values `v(x_k)` for `k = 0..T` of one agent, with `v(x_T) = 0`.
fn agent_values(state: &TrainState, log: &EpisodeLog, i: usize, buf: &mut Vec<f64>, hidden: &mut [f64], out: &mut Vec<f64>) {
    out.clear();
    let mut v = [0.0];
    for k in 0..log.horizon {
        state.features.critic_input(log.state(i, k), k, log.density(i, k), buf);
        state.critic.forward_into(buf, hidden, &mut v);
        out.push(v[0]);
    }
    out.push(0.0);
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TdStats {
    /// `1/N sum_i sum_k delta^2 / 2` before the step.
    pub loss: f64,
    pub grad_norm: f64,
    pub step_norm: f64,
}

/// Gradient of the TD(0) loss, averaged over agents, with a fixed target.
pub fn td_gradient(state: &TrainState, log: &EpisodeLog) -> (f64, Vec<f64>) {
    let gamma = state.gamma;
    let n = log.agents() as f64;
    let mut grad = vec![0.0; state.critic.num_params()];
    let mut loss = 0.0;
    let mut buf = Vec::with_capacity(4);
    let mut hidden = vec![0.0; state.critic.hidden_dim()];
    let mut values = Vec::with_capacity(log.horizon + 1);
    let mut v = [0.0];
    for i in log.canonical_order() {
        agent_values(state, log, i, &mut buf, &mut hidden, &mut values);
        for k in 0..log.horizon {
            let delta = log.reward(i, k) + gamma * values[k + 1] - values[k];
            loss += 0.5 * delta * delta / n;
            state.features.critic_input(log.state(i, k), k, log.density(i, k), &mut buf);
            state.critic.forward_into(&buf, &mut hidden, &mut v);
            state.critic.accumulate_grad(&buf, &hidden, &[-delta], 1.0 / n, &mut grad, None);
        }
    }
    (loss, grad)
}

/// One Adam step on the critic's TD(0) loss.
pub fn td_update(state: &mut TrainState, log: &EpisodeLog) -> Result<TdStats, LearnerError> {
    let (loss, grad) = td_gradient(state, log);
    let grad_norm = norm(&grad);
    let step_norm = state.critic_opt.step(state.critic.params_mut(), &grad).map_err(|e| match e {
        ApproxError::Diverged => LearnerError::Diverged { episode: state.episode },
        other => other.into(),
    })?;
    state.check_bounded()?;
    Ok(TdStats { loss, grad_norm, step_norm })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PgStats {
    pub grad_norm: f64,
    pub step_norm: f64,
    pub mean_advantage: f64,
}

/// Score-function gradient `1/N sum_i sum_k grad log pi(a_k|x_k) * A_k` with
/// the TD advantage `A_k = r_k + gamma v(x_{k+1}) - v(x_k)`.
pub fn pg_gradient(state: &TrainState, log: &EpisodeLog) -> (f64, Vec<f64>) {
    let gamma = state.gamma;
    let n = log.agents() as f64;
    let net = &state.actor.mean;
    let var = state.actor.std * state.actor.std;
    let mut grad = vec![0.0; net.num_params()];
    let mut buf = Vec::with_capacity(4);
    let mut critic_hidden = vec![0.0; state.critic.hidden_dim()];
    let mut hidden = vec![0.0; net.hidden_dim()];
    let mut values = Vec::with_capacity(log.horizon + 1);
    let mut mean = [0.0; 2];
    let mut adv_sum = 0.0;
    for i in log.canonical_order() {
        agent_values(state, log, i, &mut buf, &mut critic_hidden, &mut values);
        for k in 0..log.horizon {
            let adv = log.reward(i, k) + gamma * values[k + 1] - values[k];
            adv_sum += adv;
            state.features.policy_input(log.state(i, k), k, &mut buf);
            net.forward_into(&buf, &mut hidden, &mut mean);
            let a = log.action(i, k);
            let upstream = [(a[0] - mean[0]) / var, (a[1] - mean[1]) / var];
            net.accumulate_grad(&buf, &hidden, &upstream, adv / n, &mut grad, None);
        }
    }
    (adv_sum / (n * log.horizon as f64), grad)
}

/// One Adam ascent step on the actor.
pub fn pg_update(state: &mut TrainState, log: &EpisodeLog) -> Result<PgStats, LearnerError> {
    let (mean_advantage, mut grad) = pg_gradient(state, log);
    let grad_norm = norm(&grad);
    grad.iter_mut().for_each(|g| *g = -*g);
    let step_norm = state.actor_opt.step(state.actor.mean.params_mut(), &grad).map_err(|e| match e {
        ApproxError::Diverged => LearnerError::Diverged { episode: state.episode },
        other => other.into(),
    })?;
    state.check_bounded()?;
    Ok(PgStats { grad_norm, step_norm, mean_advantage })
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub mean_return: f64,
    /// Largest L1 change of any per-step belief grid this episode.
    pub belief_drift: f64,
    pub belief_step: f64,
    pub actor_grad_norm: f64,
    pub critic_loss: f64,
    pub actor_step_norm: f64,
    pub critic_step_norm: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub records: Vec<EpisodeRecord>,
}

impl Trace {
    pub fn mean_returns(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.mean_return).collect()
    }

    /// `episode,mean_return,belief_drift,actor_grad_norm,critic_loss`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("episode,mean_return,belief_drift,actor_grad_norm,critic_loss\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.episode, r.mean_return, r.belief_drift, r.actor_grad_norm, r.critic_loss
            ));
        }
        out
    }
}

/// A failed run keeps the trace up to the failing episode.
#[derive(Debug, Error)]
#[error("{error}")]
pub struct TrainFailure {
    pub error: LearnerError,
    pub trace: Trace,
}

/// Seed of episode `n` for a run seeded with `seed`.
pub fn episode_seed(seed: u64, n: usize) -> u64 {
    mix(seed, n as u64)
}

/// Runs one full episode: rollout, belief update, critic step, actor step.
pub fn train_episode(spec: &EnvSpec, state: &mut TrainState) -> Result<(Rollout, EpisodeRecord), LearnerError> {
    let n = state.episode;
    let roll = rollout(spec, state, state.config.agents, episode_seed(state.config.seed, n))?;

    let schedule = state.config.schedule;
    let step = schedule.belief_step(n);
    let mut drift: f64 = 0.0;
    for (belief, grid) in state.beliefs.iter_mut().zip(&roll.grids) {
        let before = belief.average().clone();
        match schedule {
            Schedule::Fixed => belief.fp_update(grid)?,
            Schedule::Theory { .. } => belief.relax(grid, step)?,
        }
        drift = drift.max(before.distance(belief.average())?);
    }

    state.critic_opt.lr = schedule.rate_law(state.config.critic_lr).at(n);
    state.actor_opt.lr = schedule.rate_law(state.config.actor_lr).at(n);
    let td = td_update(state, &roll.log)?;
    let pg = pg_update(state, &roll.log)?;
    state.episode += 1;

    let record = EpisodeRecord {
        episode: n,
        mean_return: roll.log.mean_return,
        belief_drift: drift,
        belief_step: step,
        actor_grad_norm: pg.grad_norm,
        critic_loss: td.loss,
        actor_step_norm: pg.step_norm,
        critic_step_norm: td.step_norm,
    };
    Ok((roll, record))
}

/// Trains for `config.episodes` episodes from a fresh state.
pub fn train(spec: &EnvSpec, config: &LearnerConfig) -> Result<(TrainState, Trace), TrainFailure> {
    train_with(spec, config, |_, _, _| {})
}

/// [`train`] with a per-episode observer (used for snapshots).
pub fn train_with(
    spec: &EnvSpec,
    config: &LearnerConfig,
    mut observe: impl FnMut(&TrainState, &Rollout, &EpisodeRecord),
) -> Result<(TrainState, Trace), TrainFailure> {
    let mut trace = Trace::default();
    let mut state = TrainState::new(spec, config).map_err(|error| TrainFailure { error, trace: Trace::default() })?;
    for _ in 0..config.episodes {
        match train_episode(spec, &mut state) {
            Ok((roll, record)) => {
                observe(&state, &roll, &record);
                trace.records.push(record);
            }
            Err(error) => return Err(TrainFailure { error, trace }),
        }
    }
    Ok((state, trace))
}

/// Stabilization and drift statistics of a training trace.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceSummary {
    pub window: usize,
    pub window_mean: f64,
    pub window_std: f64,
    /// `max - min` of the mean return over the whole run.
    pub return_range: f64,
    pub belief_drift: Vec<f64>,
    pub final_drift: f64,
}

impl ConvergenceSummary {
    /// Window std relative to the full-run range (0 for a flat trace).
    pub fn stabilization_ratio(&self) -> f64 {
        if self.return_range == 0.0 {
            0.0
        } else {
            self.window_std / self.return_range
        }
    }
}

/// Statistics over the last `window` episodes. `None` for an empty trace.
pub fn convergence_metrics(trace: &Trace, window: usize) -> Option<ConvergenceSummary> {
    let returns = trace.mean_returns();
    if returns.is_empty() {
        return None;
    }
    let w = window.clamp(1, returns.len());
    let tail = &returns[returns.len() - w..];
    let mean = tail.iter().sum::<f64>() / w as f64;
    let var = tail.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / w as f64;
    let (lo, hi) = returns.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(*r), hi.max(*r)));
    let drift: Vec<f64> = trace.records.iter().map(|r| r.belief_drift).collect();
    Some(ConvergenceSummary {
        window: w,
        window_mean: mean,
        window_std: var.sqrt(),
        return_range: hi - lo,
        final_drift: *drift.last().unwrap_or(&0.0),
        belief_drift: drift,
    })
}

/// Mean Euclidean distance over all unordered pairs.
pub fn mean_pairwise_distance(points: &[Point]) -> f64 {
    let n = points.len();
    if n < 2 {
        return 0.0;
    }
    let mut total = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            total += ((points[i][0] - points[j][0]).powi(2) + (points[i][1] - points[j][1]).powi(2)).sqrt();
        }
    }
    total / (n * (n - 1) / 2) as f64
}
