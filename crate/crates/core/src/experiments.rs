//! Evaluation helpers shared by the CLI runners and the acceptance checks.
//!
//! Policies here are plain functions `(x, k) -> u`. [`simulate`] rolls a
//! population forward under one and pays rewards against that population's
//! own empirical measure, which is how a trained policy is scored once
//! learning has stopped.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::envs::{DemandPath, EnvError, EnvSpec, Point};
use crate::learner::{agent_rng, EpisodeLog, LearnerError, Rollout, TrainState};
use crate::meanfield::DensityGrid;

/// Rolls `agents` agents through one episode under a deterministic policy.
///
/// Agent `i` draws its initial state and then one environment noise pair
/// per step from `agent_rng(seed, i)`, so two policies simulated with the
/// same seed see identical noise.
pub fn simulate<P>(spec: &EnvSpec, agents: usize, seed: u64, policy: P) -> Result<Rollout, LearnerError>
where
    P: Fn(Point, usize) -> Point,
{
    if agents == 0 {
        return Err(LearnerError::Config("agents must be >= 1".into()));
    }
    spec.validate()?;
    let t_len = spec.horizon;
    let mut states = Vec::with_capacity(agents * (t_len + 1));
    let mut actions = Vec::with_capacity(agents * t_len);
    for agent in 0..agents as u64 {
        let mut rng = agent_rng(seed, agent);
        let mut x = spec.sample_initial(&mut rng);
        states.push(x);
        for k in 0..t_len {
            let u = policy(x, k);
            let noise: Point = [rng.sample(StandardNormal), rng.sample(StandardNormal)];
            x = spec.step(x, u, noise)?;
            actions.push(u);
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
        for (k, grid) in grids.iter().enumerate() {
            densities.push(grid.density_at(states[i * (t_len + 1) + k]));
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
            log_probs: vec![0.0; agents * t_len],
            densities,
            mean_return,
        },
        grids,
    })
}

/// The trained policy's mean action.
pub fn greedy_policy(state: &TrainState) -> impl Fn(Point, usize) -> Point + '_ {
    move |x, k| state.greedy_action(x, k)
}

/// Baseline for the demand game: aim straight at where the demand will be
/// on arrival, whatever it costs.
pub fn path_tracer(spec: &EnvSpec) -> Result<impl Fn(Point, usize) -> Point + '_, EnvError> {
    let path = spec.demand_path().ok_or_else(|| EnvError::Invalid("not a demand game".into()))?;
    let d = spec.dynamics;
    if d.b == 0.0 {
        return Err(EnvError::Invalid("control has no effect".into()));
    }
    Ok(move |x: Point, k: usize| {
        let target = path.position((k + 1) as f64).unwrap_or_else(|_| path_end(path));
        [(target[0] - d.a * x[0]) / d.b, (target[1] - d.a * x[1]) / d.b]
    })
}

fn path_end(path: &DemandPath) -> Point {
    path.waypoints().last().map(|w| w.1).unwrap_or([0.0, 0.0])
}

/// Per-coordinate mean and variance of all agent positions at time
/// indices `from..=T`, pooled.
pub fn stationary_stats(log: &EpisodeLog, from: usize) -> (Point, Point) {
    let pts: Vec<Point> = (from.min(log.horizon)..=log.horizon).flat_map(|k| log.positions_at(k)).collect();
    let n = pts.len() as f64;
    let mut mean = [0.0; 2];
    for p in &pts {
        mean[0] += p[0] / n;
        mean[1] += p[1] / n;
    }
    let mut var = [0.0; 2];
    for p in &pts {
        var[0] += (p[0] - mean[0]).powi(2) / n;
        var[1] += (p[1] - mean[1]).powi(2) / n;
    }
    (mean, var)
}

/// Fraction of `points` whose nearest peak is each entry of `peaks`.
/// Ties go to the earlier peak.
pub fn basin_fractions(points: &[Point], peaks: &[Point]) -> Vec<f64> {
    let mut counts = vec![0usize; peaks.len()];
    for p in points {
        let d2 = |q: &Point| (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2);
        let mut best = 0;
        for (j, q) in peaks.iter().enumerate().skip(1) {
            if d2(q) < d2(&peaks[best]) {
                best = j;
            }
        }
        if !peaks.is_empty() {
            counts[best] += 1;
        }
    }
    counts.iter().map(|&c| c as f64 / points.len().max(1) as f64).collect()
}

/// Mean position of the population at each time index.
pub fn mean_path(log: &EpisodeLog) -> Vec<Point> {
    (0..=log.horizon)
        .map(|k| {
            let pts = log.positions_at(k);
            let n = pts.len() as f64;
            pts.iter().fold([0.0, 0.0], |acc, p| [acc[0] + p[0] / n, acc[1] + p[1] / n])
        })
        .collect()
}

/// Largest distance between the mean agent position and the demand path
/// over time indices `from..=T`.
pub fn path_deviation(log: &EpisodeLog, path: &DemandPath, from: usize) -> Result<f64, EnvError> {
    let mut worst = 0.0f64;
    for (k, m) in mean_path(log).iter().enumerate().skip(from) {
        let p = path.position(k as f64)?;
        worst = worst.max(((m[0] - p[0]).powi(2) + (m[1] - p[1]).powi(2)).sqrt());
    }
    Ok(worst)
}

/// Mean of `series[..split]` and `series[split..]`.
pub fn early_late_means(series: &[f64], split: usize) -> (f64, f64) {
    let avg = |s: &[f64]| if s.is_empty() { 0.0 } else { s.iter().sum::<f64>() / s.len() as f64 };
    let split = split.min(series.len());
    (avg(&series[..split]), avg(&series[split..]))
}
