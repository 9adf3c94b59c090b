//! Benchmark environments: spatial congestion (uni- and bimodal), supply
//! with a moving demand, and the mean-field linear-quadratic regulator.
//!
//! Every environment shares the same contract: a Gaussian initial-state
//! sampler, the linear transition `x' = A x + B u + sigma1 * eps` with
//! `A`, `B`, `sigma1` multiples of the identity, and a per-step reward
//! that depends on the agent's own state and action plus the local agent
//! density. No agent index appears anywhere in this module.
//!
//! Rewards are paid on arrival: the reward for step `k` is evaluated at
//! `x_{k+1}` with the density of step `k + 1`, minus the control cost of `u_k`.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::meanfield::{Bounds, GridShape};

pub type Point = [f64; 2];
/// Row-major 2x2 matrix.
pub type Mat2 = [[f64; 2]; 2];

pub const IDENTITY: Mat2 = [[1.0, 0.0], [0.0, 1.0]];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("non-finite state/action")]
    NonFinite,
    #[error("singular reward spread")]
    SingularSpread,
    #[error("time {t} outside the demand path coverage")]
    OutsidePath { t: f64 },
    #[error("invalid environment: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvKind {
    Congestion,
    CongestionBimodal,
    Demand,
    Lqr,
}

impl EnvKind {
    pub fn name(self) -> &'static str {
        match self {
            EnvKind::Congestion => "congestion",
            EnvKind::CongestionBimodal => "congestion-bimodal",
            EnvKind::Demand => "demand",
            EnvKind::Lqr => "lqr",
        }
    }
}

/// `x' = a x + b u + sigma1 * noise_scale * z` with `z` standard normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dynamics {
    pub a: f64,
    pub b: f64,
    pub sigma1: f64,
    pub noise_scale: f64,
}

impl Dynamics {
    pub fn new(a: f64, b: f64, sigma1: f64) -> Self {
        Self { a, b, sigma1, noise_scale: 1.0 }
    }

    /// One transition given an explicit standard-normal draw.
    pub fn step(&self, x: Point, u: Point, noise: Point) -> Result<Point, EnvError> {
        if !(x.iter().chain(&u).chain(&noise).all(|v| v.is_finite())) {
            return Err(EnvError::NonFinite);
        }
        let s = self.sigma1 * self.noise_scale;
        Ok([
            self.a * x[0] + self.b * u[0] + s * noise[0],
            self.a * x[1] + self.b * u[1] + s * noise[1],
        ])
    }
}

/// Isotropic Gaussian bump with covariance `spread * I`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bump {
    pub mean: Point,
    pub spread: f64,
}

impl Bump {
    pub fn new(mean: Point, spread: f64) -> Self {
        Self { mean, spread }
    }

    /// `exp(-(x-mu)^T Sigma^-1 (x-mu))`, unnormalized.
    fn shape(&self, x: Point) -> f64 {
        let d = [x[0] - self.mean[0], x[1] - self.mean[1]];
        (-(d[0] * d[0] + d[1] * d[1]) / self.spread).exp()
    }
}

/// Gaussian desirability discounted by crowding.
///
/// With `k` components each bump is normalized by `(2 pi k sqrt|Sigma_i|)^-1`,
/// so a single bump peaks at `1/(2 pi sqrt|Sigma|)` and each of two bumps at
/// `1/(4 pi sqrt|Sigma_i|)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CongestionReward {
    pub components: Vec<Bump>,
}

impl CongestionReward {
    pub fn single(mean: Point, spread: f64) -> Self {
        Self { components: vec![Bump::new(mean, spread)] }
    }

    pub fn bimodal(a: Bump, b: Bump) -> Self {
        Self { components: vec![a, b] }
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        if self.components.is_empty() {
            return Err(EnvError::Invalid("no reward components".into()));
        }
        if self.components.iter().any(|c| !(c.spread > 0.0) || !c.spread.is_finite()) {
            return Err(EnvError::SingularSpread);
        }
        Ok(())
    }

    /// Largest attainable value, reached at an uncrowded peak of a single bump.
    pub fn peak(&self) -> f64 {
        let k = self.components.len() as f64;
        self.components.iter().map(|c| 1.0 / (2.0 * PI * k * c.spread)).fold(0.0, f64::max)
    }
}

/// `sum_i norm_i * exp(-(x-mu_i)^T Sigma_i^-1 (x-mu_i)) / (1 + density)^alpha`.
pub fn congestion_reward(
    params: &CongestionReward,
    x: Point,
    density: f64,
    alpha: f64,
) -> Result<f64, EnvError> {
    params.validate()?;
    let k = params.components.len() as f64;
    let desirability: f64 = params
        .components
        .iter()
        .map(|c| c.shape(x) / (2.0 * PI * k * c.spread))
        .sum();
    Ok(desirability / (1.0 + density.max(0.0)).powf(alpha))
}

/// `1/2 u^T R u`.
pub fn control_cost(r: &Mat2, u: Point) -> f64 {
    let ru = mat_vec(r, u);
    0.5 * (u[0] * ru[0] + u[1] * ru[1])
}

/// Movement penalty with marginal cost `eta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MovementCost {
    /// `1/2 u^T (eta I) u`
    Quadratic,
    /// `eta |u|^4`
    Quartic,
}

impl MovementCost {
    pub fn cost(self, eta: f64, u: Point) -> f64 {
        match self {
            MovementCost::Quadratic => control_cost(&scaled_identity(eta), u),
            MovementCost::Quartic => {
                let n2 = u[0] * u[0] + u[1] * u[1];
                eta * n2 * n2
            }
        }
    }
}

/// Piecewise-linear path through time-stamped waypoints.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandPath {
    waypoints: Vec<(f64, Point)>,
}

impl DemandPath {
    pub fn new(waypoints: Vec<(f64, Point)>) -> Result<Self, EnvError> {
        if waypoints.len() < 2 {
            return Err(EnvError::Invalid("demand path needs at least two waypoints".into()));
        }
        if waypoints.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(EnvError::Invalid("waypoint times must be strictly increasing".into()));
        }
        Ok(Self { waypoints })
    }

    pub fn waypoints(&self) -> &[(f64, Point)] {
        &self.waypoints
    }

    pub fn start(&self) -> f64 {
        self.waypoints[0].0
    }

    pub fn end(&self) -> f64 {
        self.waypoints[self.waypoints.len() - 1].0
    }

    pub fn position(&self, t: f64) -> Result<Point, EnvError> {
        if !(t >= self.start() && t <= self.end()) {
            return Err(EnvError::OutsidePath { t });
        }
        let i = self.waypoints.windows(2).position(|w| t <= w[1].0).unwrap_or(0);
        let (t0, p0) = self.waypoints[i];
        let (t1, p1) = self.waypoints[i + 1];
        let s = (t - t0) / (t1 - t0);
        Ok([(1.0 - s) * p0[0] + s * p1[0], (1.0 - s) * p0[1] + s * p1[1]])
    }
}

/// Crowding-discounted Gaussian centered on the path position at time `t`.
pub fn demand_reward(
    path: &DemandPath,
    spread: f64,
    t: f64,
    x: Point,
    density: f64,
    alpha: f64,
) -> Result<f64, EnvError> {
    let center = path.position(t)?;
    congestion_reward(&CongestionReward::single(center, spread), x, density, alpha)
}

/// Quadratic state cost around a target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LqrReward {
    pub target: Point,
    pub q: Mat2,
}

impl LqrReward {
    pub fn validate(&self) -> Result<(), EnvError> {
        let q = self.q;
        let symmetric = (q[0][1] - q[1][0]).abs() < 1e-12;
        let psd = q[0][0] >= 0.0 && q[1][1] >= 0.0 && q[0][0] * q[1][1] - q[0][1] * q[1][0] >= -1e-12;
        if symmetric && psd {
            Ok(())
        } else {
            Err(EnvError::Invalid("Q must be symmetric positive semidefinite".into()))
        }
    }
}

/// `-(x - target)^T Q (x - target)`.
pub fn lqr_reward(params: &LqrReward, x: Point) -> f64 {
    let d = [x[0] - params.target[0], x[1] - params.target[1]];
    -2.0 * control_cost(&params.q, d)
}

#[derive(Debug, Clone, PartialEq)]
pub enum RewardModel {
    Congestion(CongestionReward),
    Demand { path: DemandPath, spread: f64 },
    Lqr(LqrReward),
}

/// A complete environment definition.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvSpec {
    pub kind: EnvKind,
    pub horizon: usize,
    pub dynamics: Dynamics,
    pub reward: RewardModel,
    /// Marginal control cost; the control-cost matrix is `eta * I`.
    pub eta: f64,
    pub movement: MovementCost,
    /// Crowding averseness.
    pub alpha: f64,
    pub gamma: f64,
    pub init_mean: Point,
    pub init_std: f64,
    /// Histogram used for the population measure.
    pub grid: GridShape,
}

pub const DEFAULT_GAMMA: f64 = 0.99;
pub const DEFAULT_GRID_RESOLUTION: usize = 50;

impl EnvSpec {
    /// Single-bump congestion game with peak at the origin.
    pub fn congestion(alpha: f64) -> Self {
        Self {
            kind: EnvKind::Congestion,
            horizon: 1,
            dynamics: Dynamics::new(1.0, 1.0, 0.1),
            reward: RewardModel::Congestion(CongestionReward::single([0.0, 0.0], 1.0)),
            eta: 0.0,
            movement: MovementCost::Quadratic,
            alpha,
            gamma: DEFAULT_GAMMA,
            init_mean: [1.0, 0.0],
            init_std: 0.1,
            grid: GridShape::square(Bounds::new(-2.0, 2.0, -2.0, 2.0), DEFAULT_GRID_RESOLUTION)
                .expect("static grid"),
        }
    }

    /// Two bumps at `(-1, 0)` and `(0, 0)`, agents start at `(1, 0)`.
    pub fn congestion_bimodal(alpha: f64) -> Self {
        Self {
            kind: EnvKind::CongestionBimodal,
            reward: RewardModel::Congestion(CongestionReward::bimodal(
                Bump::new([-1.0, 0.0], 0.05),
                Bump::new([0.0, 0.0], 0.05),
            )),
            grid: GridShape::new(Bounds::new(-2.5, 1.5, -2.0, 2.0), 50, 50).expect("static grid"),
            ..Self::congestion(alpha)
        }
    }

    /// Default demand path: up from `(0.2,-0.2)` to `(0.2,0.4)`, then right
    /// to `(0.8,0.4)`, over 30 steps.
    pub fn default_demand_path() -> DemandPath {
        DemandPath::new(vec![(0.0, [0.2, -0.2]), (15.0, [0.2, 0.4]), (30.0, [0.8, 0.4])])
            .expect("static path")
    }

    pub fn demand(init_mean: Point, eta: f64) -> Self {
        Self {
            kind: EnvKind::Demand,
            horizon: 30,
            dynamics: Dynamics::new(1.0, 1.0, 0.02),
            reward: RewardModel::Demand { path: Self::default_demand_path(), spread: 0.2 },
            eta,
            movement: MovementCost::Quadratic,
            alpha: 0.1,
            gamma: DEFAULT_GAMMA,
            init_mean,
            init_std: 0.1,
            grid: GridShape::square(Bounds::new(-1.0, 1.2, -0.8, 1.4), DEFAULT_GRID_RESOLUTION)
                .expect("static grid"),
        }
    }

    /// Mean-field LQR: target `(0.5, -0.5)`, `Q = R = A = B = I`, `sigma1 = 0.1`.
    pub fn lqr() -> Self {
        Self {
            kind: EnvKind::Lqr,
            horizon: 30,
            dynamics: Dynamics::new(1.0, 1.0, 0.1),
            reward: RewardModel::Lqr(LqrReward { target: [0.5, -0.5], q: IDENTITY }),
            eta: 1.0,
            movement: MovementCost::Quadratic,
            alpha: 1.0,
            gamma: DEFAULT_GAMMA,
            init_mean: [0.0, 0.0],
            init_std: 0.1,
            grid: GridShape::square(Bounds::new(-1.0, 1.5, -1.5, 1.0), DEFAULT_GRID_RESOLUTION)
                .expect("static grid"),
        }
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        if self.horizon == 0 {
            return Err(EnvError::Invalid("horizon must be >= 1".into()));
        }
        if !(self.eta >= 0.0) {
            return Err(EnvError::Invalid("eta must be >= 0".into()));
        }
        if !(self.alpha > 0.0) {
            return Err(EnvError::Invalid("alpha must be > 0".into()));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(EnvError::Invalid("gamma must lie in (0, 1]".into()));
        }
        if !(self.init_std >= 0.0) || !self.init_mean.iter().all(|v| v.is_finite()) {
            return Err(EnvError::Invalid("bad initial distribution".into()));
        }
        let d = self.dynamics;
        if ![d.a, d.b, d.sigma1, d.noise_scale].iter().all(|v| v.is_finite()) {
            return Err(EnvError::Invalid("non-finite dynamics".into()));
        }
        match &self.reward {
            RewardModel::Congestion(c) => c.validate(),
            RewardModel::Demand { path, spread } => {
                if !(*spread > 0.0) {
                    return Err(EnvError::SingularSpread);
                }
                if path.start() > 0.0 || path.end() < self.horizon as f64 {
                    return Err(EnvError::Invalid("demand path must cover 0..=horizon".into()));
                }
                Ok(())
            }
            RewardModel::Lqr(l) => l.validate(),
        }
    }

    pub fn control_matrix(&self) -> Mat2 {
        scaled_identity(self.eta)
    }

    /// One transition. The grid box is the state space, so agents that
    /// would leave it stop at its edge.
    pub fn step(&self, x: Point, u: Point, noise: Point) -> Result<Point, EnvError> {
        Ok(self.grid.bounds().clamp(self.dynamics.step(x, u, noise)?))
    }

    /// State-dependent part of the reward at time `t` (no control cost).
    pub fn state_reward(&self, t: usize, x: Point, density: f64) -> Result<f64, EnvError> {
        match &self.reward {
            RewardModel::Congestion(c) => congestion_reward(c, x, density, self.alpha),
            RewardModel::Demand { path, spread } => {
                demand_reward(path, *spread, t as f64, x, density, self.alpha)
            }
            RewardModel::Lqr(l) => Ok(lqr_reward(l, x)),
        }
    }

    /// Reward for taking `u` at step `t` and arriving at `x_next`, where
    /// `density` is the local density at `x_next` for step `t + 1`.
    pub fn reward(&self, t: usize, u: Point, x_next: Point, density: f64) -> Result<f64, EnvError> {
        Ok(self.state_reward(t + 1, x_next, density)? - self.movement.cost(self.eta, u))
    }

    pub fn sample_initial<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        let z: Point = [rng.sample(StandardNormal), rng.sample(StandardNormal)];
        [self.init_mean[0] + self.init_std * z[0], self.init_mean[1] + self.init_std * z[1]]
    }

    /// Path of the demand peak, if this is a demand environment.
    pub fn demand_path(&self) -> Option<&DemandPath> {
        match &self.reward {
            RewardModel::Demand { path, .. } => Some(path),
            _ => None,
        }
    }
}

pub fn scaled_identity(s: f64) -> Mat2 {
    [[s, 0.0], [0.0, s]]
}

pub fn mat_vec(m: &Mat2, v: Point) -> Point {
    [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
}
