//! Run configuration: a line-oriented `key = value` file.
//!
//! `#` starts a comment, blank lines are skipped, nested settings use dotted
//! keys (`env.alpha = 2.0`). The `experiment` key selects a full set of
//! defaults; every other key overrides one of them. Lists are comma
//! separated, lists of points separate the points with `;`.
//!
//! ```text
//! experiment = demand
//! env.init_mean = -0.2,0.0; -0.6,0.3
//! learner.actor_lr = 1e-3
//! ```

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use mfplay::envs::{
    Bump, CongestionReward, DemandPath, EnvError, EnvSpec, LqrReward, Mat2, MovementCost, Point, RewardModel,
    IDENTITY,
};
use mfplay::learner::{BeliefMode, LearnerConfig, Schedule};
use mfplay::meanfield::GridShape;
use thiserror::Error;

/// Where a bad setting came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Line(usize),
    /// The n-th `--set` override, counted from 1.
    Override(usize),
    File,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Line(n) => write!(f, "line {n}"),
            Location::Override(n) => write!(f, "--set #{n}"),
            Location::File => write!(f, "config"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{location}: {message}")]
pub struct ConfigError {
    pub location: Location,
    pub message: String,
}

impl ConfigError {
    fn new(location: Location, message: impl Into<String>) -> Self {
        Self { location, message: message.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Congestion,
    CongestionBimodal,
    Demand,
    Lqr,
    OracleFp,
    OracleScaling,
    OraclePotential,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::Congestion,
        Experiment::CongestionBimodal,
        Experiment::Demand,
        Experiment::Lqr,
        Experiment::OracleFp,
        Experiment::OracleScaling,
        Experiment::OraclePotential,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Congestion => "congestion",
            Experiment::CongestionBimodal => "congestion-bimodal",
            Experiment::Demand => "demand",
            Experiment::Lqr => "lqr",
            Experiment::OracleFp => "oracle-fp",
            Experiment::OracleScaling => "oracle-scaling",
            Experiment::OraclePotential => "oracle-potential",
        }
    }

    pub fn is_oracle(self) -> bool {
        matches!(self, Experiment::OracleFp | Experiment::OracleScaling | Experiment::OraclePotential)
    }
}

impl FromStr for Experiment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| format!("unknown experiment '{s}'"))
    }
}

/// Environment settings. Which fields matter depends on the experiment:
/// `spread` is the bump width for congestion and the demand width for the
/// demand game, `waypoints` only shape the demand path, `lqr_*` only the
/// regulator.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvOptions {
    /// Crowding averseness; congestion runs sweep over every entry.
    pub alphas: Vec<f64>,
    pub eta: f64,
    pub gamma: f64,
    pub horizon: usize,
    /// Initial means; demand runs train once per entry.
    pub init_means: Vec<Point>,
    pub init_std: f64,
    pub sigma1: f64,
    pub spread: f64,
    pub movement: MovementCost,
    pub waypoints: Vec<(f64, Point)>,
    pub lqr_target: Point,
    pub lqr_q: Mat2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnerOptions {
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub policy_std: f64,
    pub hidden: usize,
    pub grid_resolution: usize,
    pub belief: BeliefMode,
    pub schedule: Schedule,
    pub critic_density: bool,
    pub divergence_limit: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleOptions {
    /// Fictitious-play iterations (also used to build the scaling policy).
    pub iterations: usize,
    pub trials: usize,
    pub sizes: Vec<usize>,
    pub samples: usize,
    pub players: usize,
    pub states: usize,
    pub actions: usize,
    pub horizon: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub agents: usize,
    pub episodes: usize,
    pub seed: u64,
    /// Independent training runs per setting; run `r` uses seed `seed + r`.
    pub repeats: usize,
    /// Agents in the post-training evaluation rollout.
    pub eval_agents: usize,
    /// Belief snapshot period in episodes; 0 disables snapshots.
    pub snapshot_every: usize,
    pub output: PathBuf,
    pub env: EnvOptions,
    pub learner: LearnerOptions,
    pub oracle: OracleOptions,
}

/// The five initial means of the demand experiment.
pub const DEMAND_INIT_MEANS: [Point; 5] = [[-0.20, 0.00], [-0.20, 0.30], [-0.39, 0.16], [-0.60, 0.00], [-0.60, 0.30]];


impl RunConfig {
    pub fn defaults(experiment: Experiment) -> Self {
        let demand = EnvSpec::default_demand_path();
        let base = RunConfig {
            experiment,
            agents: 1000,
            episodes: 2000,
            seed: 0,
            repeats: 6,
            eval_agents: 1000,
            snapshot_every: 500,
            output: PathBuf::from("out").join(experiment.name()),
            env: EnvOptions {
                alphas: vec![1.0, 1.5, 2.0, 2.5, 3.0],
                eta: 0.0,
                gamma: mfplay::envs::DEFAULT_GAMMA,
                horizon: 1,
                init_means: vec![[1.0, 0.0]],
                init_std: 0.1,
                sigma1: 0.1,
                spread: 1.0,
                movement: MovementCost::Quadratic,
                waypoints: demand.waypoints().to_vec(),
                lqr_target: [0.5, -0.5],
                lqr_q: IDENTITY,
            },
            learner: LearnerOptions {
                actor_lr: 1e-4,
                critic_lr: 1e-4,
                policy_std: mfplay::approx::DEFAULT_POLICY_STD,
                hidden: 64,
                grid_resolution: mfplay::envs::DEFAULT_GRID_RESOLUTION,
                belief: BeliefMode::Averaged,
                schedule: Schedule::Fixed,
                critic_density: true,
                divergence_limit: 1e6,
            },
            oracle: OracleOptions {
                iterations: 500,
                trials: 200,
                sizes: mfplay::oracle::scaling::default_sizes(),
                samples: 100,
                players: 2,
                states: 2,
                actions: 2,
                horizon: 1,
            },
        };
        match experiment {
            Experiment::Congestion => base,
            Experiment::CongestionBimodal => RunConfig {
                env: EnvOptions { alphas: vec![1.0], spread: 0.05, ..base.env },
                ..base
            },
            Experiment::Demand => RunConfig {
                agents: 200,
                episodes: 10_000,
                eval_agents: 200,
                snapshot_every: 1000,
                env: EnvOptions {
                    alphas: vec![0.1],
                    eta: 2.0,
                    horizon: 30,
                    init_means: DEMAND_INIT_MEANS.to_vec(),
                    sigma1: 0.02,
                    spread: 0.2,
                    ..base.env
                },
                learner: LearnerOptions { actor_lr: 1e-3, critic_lr: 1e-3, ..base.learner },
                ..base
            },
            Experiment::Lqr => RunConfig {
                agents: 200,
                episodes: 5000,
                repeats: 1,
                eval_agents: 2000,
                snapshot_every: 1000,
                env: EnvOptions {
                    alphas: vec![1.0],
                    eta: 1.0,
                    horizon: 30,
                    init_means: vec![[0.0, 0.0]],
                    ..base.env
                },
                learner: LearnerOptions { actor_lr: 1e-3, critic_lr: 1e-3, ..base.learner },
                ..base
            },
            Experiment::OracleFp | Experiment::OracleScaling | Experiment::OraclePotential => {
                RunConfig { agents: 1, episodes: 0, repeats: 1, eval_agents: 1, snapshot_every: 0, ..base }
            }
        }
    }

    /// Environment for one setting of the sweep.
    pub fn env_spec(&self, alpha: f64, init_mean: Point) -> Result<EnvSpec, EnvError> {
        let e = &self.env;
        let mut spec = match self.experiment {
            Experiment::CongestionBimodal => {
                let mut s = EnvSpec::congestion_bimodal(alpha);
                s.reward = RewardModel::Congestion(CongestionReward::bimodal(
                    Bump::new([-1.0, 0.0], e.spread),
                    Bump::new([0.0, 0.0], e.spread),
                ));
                s
            }
            Experiment::Demand => {
                let mut s = EnvSpec::demand(init_mean, e.eta);
                s.reward = RewardModel::Demand { path: DemandPath::new(e.waypoints.clone())?, spread: e.spread };
                s
            }
            Experiment::Lqr => {
                let mut s = EnvSpec::lqr();
                s.reward = RewardModel::Lqr(LqrReward { target: e.lqr_target, q: e.lqr_q });
                s
            }
            _ => {
                let mut s = EnvSpec::congestion(alpha);
                s.reward = RewardModel::Congestion(CongestionReward::single([0.0, 0.0], e.spread));
                s
            }
        };
        spec.alpha = alpha;
        spec.eta = e.eta;
        spec.gamma = e.gamma;
        spec.horizon = e.horizon;
        spec.init_mean = init_mean;
        spec.init_std = e.init_std;
        spec.dynamics.sigma1 = e.sigma1;
        spec.movement = e.movement;
        let res = self.learner.grid_resolution;
        spec.grid = GridShape::new(spec.grid.bounds(), res, res).map_err(|err| EnvError::Invalid(err.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    /// Learner settings for the run seeded with `seed`.
    pub fn learner_config(&self, seed: u64) -> LearnerConfig {
        let l = &self.learner;
        LearnerConfig {
            agents: self.agents,
            episodes: self.episodes,
            seed,
            hidden: l.hidden,
            actor_lr: l.actor_lr,
            critic_lr: l.critic_lr,
            policy_std: l.policy_std,
            belief_mode: l.belief,
            schedule: l.schedule,
            critic_density: l.critic_density,
            divergence_limit: l.divergence_limit,
        }
    }

    /// Every key with its current value, in serialization order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let e = &self.env;
        let l = &self.learner;
        let o = &self.oracle;
        vec![
            ("experiment", self.experiment.name().to_string()),
            ("agents", self.agents.to_string()),
            ("episodes", self.episodes.to_string()),
            ("seed", self.seed.to_string()),
            ("repeats", self.repeats.to_string()),
            ("eval_agents", self.eval_agents.to_string()),
            ("snapshot_every", self.snapshot_every.to_string()),
            ("output", self.output.display().to_string()),
            ("env.alpha", join(&e.alphas)),
            ("env.eta", e.eta.to_string()),
            ("env.gamma", e.gamma.to_string()),
            ("env.horizon", e.horizon.to_string()),
            ("env.init_mean", e.init_means.iter().map(|p| format!("{},{}", p[0], p[1])).collect::<Vec<_>>().join("; ")),
            ("env.init_std", e.init_std.to_string()),
            ("env.sigma1", e.sigma1.to_string()),
            ("env.spread", e.spread.to_string()),
            ("env.movement", movement_name(e.movement).to_string()),
            (
                "env.waypoints",
                e.waypoints.iter().map(|(t, p)| format!("{t}:{},{}", p[0], p[1])).collect::<Vec<_>>().join("; "),
            ),
            ("env.lqr.target", format!("{},{}", e.lqr_target[0], e.lqr_target[1])),
            ("env.lqr.q", format!("{},{},{},{}", e.lqr_q[0][0], e.lqr_q[0][1], e.lqr_q[1][0], e.lqr_q[1][1])),
            ("learner.actor_lr", l.actor_lr.to_string()),
            ("learner.critic_lr", l.critic_lr.to_string()),
            ("learner.policy_std", l.policy_std.to_string()),
            ("learner.hidden", l.hidden.to_string()),
            ("learner.grid_resolution", l.grid_resolution.to_string()),
            ("learner.belief", belief_name(l.belief).to_string()),
            ("learner.schedule", schedule_name(l.schedule)),
            ("learner.critic_density", l.critic_density.to_string()),
            ("learner.divergence_limit", l.divergence_limit.to_string()),
            ("oracle.iterations", o.iterations.to_string()),
            ("oracle.trials", o.trials.to_string()),
            ("oracle.sizes", join(&o.sizes)),
            ("oracle.samples", o.samples.to_string()),
            ("oracle.players", o.players.to_string()),
            ("oracle.states", o.states.to_string()),
            ("oracle.actions", o.actions.to_string()),
            ("oracle.horizon", o.horizon.to_string()),
        ]
    }

    /// Applies one setting. `experiment` is not accepted here; it selects
    /// the defaults and is handled by the parser.
    fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let e = &mut self.env;
        let l = &mut self.learner;
        let o = &mut self.oracle;
        match key {
            "agents" => self.agents = at_least_one(value, "agents")?,
            "episodes" => self.episodes = int(value)?,
            "seed" => self.seed = int(value)?,
            "repeats" => self.repeats = at_least_one(value, "repeats")?,
            "eval_agents" => self.eval_agents = at_least_one(value, "eval_agents")?,
            "snapshot_every" => self.snapshot_every = int(value)?,
            "output" => {
                if value.is_empty() {
                    return Err("output must not be empty".into());
                }
                self.output = PathBuf::from(value)
            }
            "env.alpha" => {
                e.alphas = list(value, float)?;
                if e.alphas.iter().any(|a| !(*a > 0.0)) {
                    return Err("alpha must be > 0".into());
                }
            }
            "env.eta" => e.eta = non_negative(value, "eta")?,
            "env.gamma" => {
                e.gamma = float(value)?;
                if !(e.gamma > 0.0 && e.gamma <= 1.0) {
                    return Err("gamma must lie in (0, 1]".into());
                }
            }
            "env.horizon" => e.horizon = at_least_one(value, "horizon")?,
            "env.init_mean" => e.init_means = list_of(value, ';', point)?,
            "env.init_std" => e.init_std = non_negative(value, "init_std")?,
            "env.sigma1" => e.sigma1 = non_negative(value, "sigma1")?,
            "env.spread" => e.spread = positive(value, "spread")?,
            "env.movement" => {
                e.movement = match value {
                    "quadratic" => MovementCost::Quadratic,
                    "quartic" => MovementCost::Quartic,
                    _ => return Err(format!("expected quadratic or quartic, got '{value}'")),
                }
            }
            "env.waypoints" => e.waypoints = list_of(value, ';', waypoint)?,
            "env.lqr.target" => e.lqr_target = point(value)?,
            "env.lqr.q" => {
                let v = list(value, float)?;
                if v.len() != 4 {
                    return Err(format!("expected 4 matrix entries, got {}", v.len()));
                }
                e.lqr_q = [[v[0], v[1]], [v[2], v[3]]];
            }
            "learner.actor_lr" => l.actor_lr = positive(value, "learning rate")?,
            "learner.critic_lr" => l.critic_lr = positive(value, "learning rate")?,
            "learner.policy_std" => l.policy_std = positive(value, "policy_std")?,
            "learner.hidden" => l.hidden = at_least_one(value, "hidden")?,
            "learner.grid_resolution" => l.grid_resolution = at_least_one(value, "grid_resolution")?,
            "learner.belief" => {
                l.belief = match value {
                    "averaged" => BeliefMode::Averaged,
                    "instantaneous" => BeliefMode::Instantaneous,
                    _ => return Err(format!("expected averaged or instantaneous, got '{value}'")),
                }
            }
            "learner.schedule" => l.schedule = schedule(value)?,
            "learner.critic_density" => {
                l.critic_density = value.parse().map_err(|_| format!("expected true or false, got '{value}'"))?
            }
            "learner.divergence_limit" => l.divergence_limit = positive(value, "divergence_limit")?,
            "oracle.iterations" => o.iterations = at_least_one(value, "iterations")?,
            "oracle.trials" => o.trials = at_least_one(value, "trials")?,
            "oracle.sizes" => {
                o.sizes = list(value, int)?;
                if o.sizes.contains(&0) {
                    return Err("sizes must be >= 1".into());
                }
            }
            "oracle.samples" => o.samples = at_least_one(value, "samples")?,
            "oracle.players" => o.players = at_least_one(value, "players")?,
            "oracle.states" => o.states = at_least_one(value, "states")?,
            "oracle.actions" => o.actions = at_least_one(value, "actions")?,
            "oracle.horizon" => o.horizon = at_least_one(value, "horizon")?,
            _ => return Err(format!("unknown key '{key}'")),
        }
        Ok(())
    }

    /// Checks that involve more than one key.
    fn check(&self) -> Result<(), String> {
        if self.env.alphas.is_empty() {
            return Err("env.alpha needs at least one value".into());
        }
        if self.env.init_means.is_empty() {
            return Err("env.init_mean needs at least one point".into());
        }
        if !self.experiment.is_oracle() {
            for &alpha in &self.env.alphas {
                for &mean in &self.env.init_means {
                    self.env_spec(alpha, mean).map_err(|e| e.to_string())?;
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in self.entries() {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}

/// Parses a config file.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    parse_config_with(text, &[])
}

/// Parses a config file followed by `key=value` overrides, which may
/// replace settings from the file, including the experiment.
pub fn parse_config_with(text: &str, overrides: &[String]) -> Result<RunConfig, ConfigError> {
    let mut settings: Vec<(Location, String, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let loc = Location::Line(i + 1);
        let (k, v) = split_setting(line).ok_or_else(|| ConfigError::new(loc, format!("expected key = value, got '{line}'")))?;
        if let Some((prev, _, _)) = settings.iter().find(|(_, pk, _)| *pk == k) {
            return Err(ConfigError::new(loc, format!("duplicate key '{k}' (first set at {prev})")));
        }
        settings.push((loc, k, v));
    }
    for (i, raw) in overrides.iter().enumerate() {
        let loc = Location::Override(i + 1);
        let (k, v) = split_setting(raw.trim()).ok_or_else(|| ConfigError::new(loc, format!("expected key=value, got '{raw}'")))?;
        settings.push((loc, k, v));
    }

    let (loc, _, name) = settings
        .iter()
        .rev()
        .find(|(_, k, _)| k == "experiment")
        .ok_or_else(|| ConfigError::new(Location::File, "missing experiment"))?;
    let experiment: Experiment = name.parse().map_err(|m| ConfigError::new(*loc, m))?;
    let mut config = RunConfig::defaults(experiment);
    for (loc, k, v) in &settings {
        if k == "experiment" {
            continue;
        }
        config.set(k, v).map_err(|m| ConfigError::new(*loc, m))?;
    }
    config.check().map_err(|m| ConfigError::new(Location::File, m))?;
    Ok(config)
}

fn split_setting(line: &str) -> Option<(String, String)> {
    let (k, v) = line.split_once('=')?;
    let k = k.trim();
    if k.is_empty() {
        return None;
    }
    Some((k.to_string(), v.trim().to_string()))
}

fn join<T: ToString>(values: &[T]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

fn movement_name(m: MovementCost) -> &'static str {
    match m {
        MovementCost::Quadratic => "quadratic",
        MovementCost::Quartic => "quartic",
    }
}

fn belief_name(b: BeliefMode) -> &'static str {
    match b {
        BeliefMode::Averaged => "averaged",
        BeliefMode::Instantaneous => "instantaneous",
    }
}

/// `fixed` or `theory:<actor scale>:<belief scale>`.
fn schedule_name(s: Schedule) -> String {
    match s {
        Schedule::Fixed => "fixed".into(),
        Schedule::Theory { actor_scale, belief_scale } => format!("theory:{actor_scale}:{belief_scale}"),
    }
}

fn schedule(value: &str) -> Result<Schedule, String> {
    if value == "fixed" {
        return Ok(Schedule::Fixed);
    }
    let parts: Vec<&str> = value.split(':').collect();
    match parts.as_slice() {
        ["theory"] => Ok(Schedule::Theory { actor_scale: 1.0, belief_scale: 1.0 }),
        ["theory", a, b] => Ok(Schedule::Theory { actor_scale: positive(a, "actor scale")?, belief_scale: positive(b, "belief scale")? }),
        _ => Err(format!("expected fixed or theory[:a:b], got '{value}'")),
    }
}

fn float(v: &str) -> Result<f64, String> {
    let x: f64 = v.trim().parse().map_err(|_| format!("expected a number, got '{}'", v.trim()))?;
    if !x.is_finite() {
        return Err(format!("expected a finite number, got '{}'", v.trim()));
    }
    Ok(x)
}

fn int<T: FromStr>(v: &str) -> Result<T, String> {
    v.trim().parse().map_err(|_| format!("expected a non-negative integer, got '{}'", v.trim()))
}

fn at_least_one(v: &str, name: &str) -> Result<usize, String> {
    let n: usize = int(v)?;
    if n == 0 {
        return Err(format!("{name} must be ≥ 1"));
    }
    Ok(n)
}

fn positive(v: &str, name: &str) -> Result<f64, String> {
    let x = float(v)?;
    if !(x > 0.0) {
        return Err(format!("{name} must be > 0"));
    }
    Ok(x)
}

fn non_negative(v: &str, name: &str) -> Result<f64, String> {
    let x = float(v)?;
    if !(x >= 0.0) {
        return Err(format!("{name} must be ≥ 0"));
    }
    Ok(x)
}

fn list<T>(v: &str, item: impl Fn(&str) -> Result<T, String>) -> Result<Vec<T>, String> {
    list_of(v, ',', item)
}

fn list_of<T>(v: &str, sep: char, item: impl Fn(&str) -> Result<T, String>) -> Result<Vec<T>, String> {
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(sep).map(|s| item(s.trim())).collect()
}

fn point(v: &str) -> Result<Point, String> {
    let xs = list(v, float)?;
    match xs.as_slice() {
        [x, y] => Ok([*x, *y]),
        _ => Err(format!("expected a point x,y, got '{v}'")),
    }
}

/// `t:x,y`
fn waypoint(v: &str) -> Result<(f64, Point), String> {
    let (t, p) = v.split_once(':').ok_or_else(|| format!("expected t:x,y, got '{v}'"))?;
    Ok((float(t)?, point(p)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn experiment_one_defaults() {
        let c = parse_config("experiment=congestion").unwrap();
        assert_eq!(c.agents, 1000);
        assert_eq!(c.learner.actor_lr, 1e-4);
        assert_eq!(c.learner.critic_lr, 1e-4);
        assert_eq!(c.env.horizon, 1);
        assert_eq!(c.env.alphas, vec![1.0, 1.5, 2.0, 2.5, 3.0]);
        assert_eq!(c.env.eta, 0.0);
        assert_eq!(c.env.init_means, vec![[1.0, 0.0]]);
        assert_eq!(c.env.init_std, 0.1);
        assert_eq!(c.env.gamma, 0.99);
        assert_eq!(c.repeats, 6);
    }

    #[test]
    fn experiment_two_and_three_defaults() {
        let d = parse_config("experiment = demand").unwrap();
        assert_eq!((d.agents, d.learner.actor_lr, d.env.horizon), (200, 1e-3, 30));
        assert_eq!((d.env.eta, d.env.alphas.clone()), (2.0, vec![0.1]));
        assert_eq!(d.env.init_means, DEMAND_INIT_MEANS.to_vec());
        assert_eq!((d.env.gamma, d.repeats), (0.99, 6));
        let q = parse_config("experiment = lqr").unwrap();
        assert_eq!((q.agents, q.learner.actor_lr, q.learner.critic_lr, q.env.gamma), (200, 1e-3, 1e-3, 0.99));
    }

    #[test]
    fn comments_and_overrides() {
        let text = "# demo\nexperiment = congestion # trailing\n\nenv.alpha = 2.0, 3.0\nlearner.belief = instantaneous\n";
        let c = parse_config_with(text, &["agents=10".into(), "env.alpha=1".into()]).unwrap();
        assert_eq!(c.agents, 10);
        assert_eq!(c.env.alphas, vec![1.0]);
        assert_eq!(c.learner.belief, BeliefMode::Instantaneous);
    }

    #[test]
    fn errors_carry_locations() {
        let e = parse_config("experiment=congestion\nagents=0").unwrap_err();
        assert_eq!(e.location, Location::Line(2));
        assert_eq!(e.message, "agents must be ≥ 1");
        let e = parse_config("experiment=congestion\n\nbogus=1").unwrap_err();
        assert_eq!(e.to_string(), "line 3: unknown key 'bogus'");
        let e = parse_config("experiment=lqr\nenv.eta=fast").unwrap_err();
        assert_eq!(e.location, Location::Line(2));
        assert!(e.message.contains("expected a number"));
        let e = parse_config("agents=3").unwrap_err();
        assert_eq!(e.message, "missing experiment");
        let e = parse_config("experiment=chess").unwrap_err();
        assert_eq!(e.location, Location::Line(1));
        let e = parse_config("experiment=lqr\nno equals sign").unwrap_err();
        assert_eq!(e.location, Location::Line(2));
        let e = parse_config("experiment=lqr\nseed=1\nseed=2").unwrap_err();
        assert!(e.message.contains("duplicate"));
        let e = parse_config_with("experiment=lqr", &["repeats=0".into()]).unwrap_err();
        assert_eq!(e.location, Location::Override(1));
    }

    #[test]
    fn cross_field_errors() {
        let e = parse_config("experiment=demand\nenv.horizon=40").unwrap_err();
        assert_eq!(e.location, Location::File);
        assert!(e.message.contains("demand path"));
        assert!(parse_config("experiment=demand\nenv.waypoints=0:0,0; 0:1,1").is_err());
    }

    #[test]
    fn experiment_can_be_overridden() {
        let c = parse_config_with("experiment=congestion", &["experiment=lqr".into()]).unwrap();
        assert_eq!(c, RunConfig::defaults(Experiment::Lqr));
    }

    #[test]
    fn every_experiment_round_trips() {
        for e in Experiment::ALL {
            let c = RunConfig::defaults(e);
            assert_eq!(parse_config(&c.to_string()).unwrap(), c, "{}", e.name());
        }
    }

    #[test]
    fn env_spec_matches_library_defaults() {
        let c = RunConfig::defaults(Experiment::Lqr);
        assert_eq!(c.env_spec(1.0, [0.0, 0.0]).unwrap(), EnvSpec::lqr());
        let c = RunConfig::defaults(Experiment::Congestion);
        assert_eq!(c.env_spec(2.0, [1.0, 0.0]).unwrap(), EnvSpec::congestion(2.0));
        let c = RunConfig::defaults(Experiment::CongestionBimodal);
        assert_eq!(c.env_spec(1.0, [1.0, 0.0]).unwrap(), EnvSpec::congestion_bimodal(1.0));
        let c = RunConfig::defaults(Experiment::Demand);
        assert_eq!(c.env_spec(0.1, [-0.2, 0.0]).unwrap(), EnvSpec::demand([-0.2, 0.0], 2.0));
    }

    #[test]
    fn schedules_parse() {
        assert_eq!(schedule("fixed"), Ok(Schedule::Fixed));
        assert_eq!(schedule("theory"), Ok(Schedule::Theory { actor_scale: 1.0, belief_scale: 1.0 }));
        assert_eq!(schedule("theory:0.5:2"), Ok(Schedule::Theory { actor_scale: 0.5, belief_scale: 2.0 }));
        let t = Schedule::Theory { actor_scale: 0.25, belief_scale: 3.0 };
        assert_eq!(schedule(&schedule_name(t)), Ok(t));
        assert!(schedule("sometimes").is_err());
    }

    fn arb_config() -> impl Strategy<Value = RunConfig> {
        (
            0usize..7,
            1usize..5000,
            any::<u64>(),
            prop::collection::vec(0.01f64..10.0, 1..6),
            prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..6),
            1e-6f64..1.0,
            any::<bool>(),
            prop::collection::vec(1usize..4096, 1..8),
        )
            .prop_map(|(e, agents, seed, alphas, means, lr, inst, sizes)| {
                let mut c = RunConfig::defaults(Experiment::ALL[e]);
                c.agents = agents;
                c.seed = seed;
                c.env.alphas = alphas;
                c.env.init_means = means.into_iter().map(|(x, y)| [x, y]).collect();
                c.learner.actor_lr = lr;
                c.learner.belief = if inst { BeliefMode::Instantaneous } else { BeliefMode::Averaged };
                c.oracle.sizes = sizes;
                c
            })
    }

    proptest! {
        #[test]
        fn serialized_configs_reparse_identically(c in arb_config()) {
            let text = c.to_string();
            let back = parse_config(&text).unwrap();
            prop_assert_eq!(&back, &c);
            prop_assert_eq!(back.to_string(), text);
        }
    }
}
