//! Discounted Riccati solution of the mean-field LQR environment.
//!
//! The environment pays on arrival: taking `u` at `x` and landing on
//! `x' = A x + B u + w` yields `-(x' - a)^T Q (x' - a) - 1/2 u^T R u`.
//! With `e = x - a` and `A = I` the target is a fixed point of the
//! uncontrolled dynamics, and the cost-to-go is quadratic in `e`. Writing
//! `W` for the arrival-inclusive matrix,
//!
//! ```text
//! W = Q + gamma (A^T W A - A^T W B (R' + B^T W B)^-1 B^T W A)
//! K = (R' + B^T W B)^-1 B^T W A,   u = -K e
//! ```
//!
//! with `R' = R / 2` for the half-weighted control cost.

use thiserror::Error;

use crate::envs::{EnvSpec, Mat2, Point, RewardModel};

pub const RICCATI_TOLERANCE: f64 = 1e-12;
pub const RICCATI_MAX_ITER: usize = 100_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LqrError {
    #[error("not an LQR environment")]
    NotLqr,
    #[error("control weight is singular")]
    SingularControl,
    #[error("riccati recursion did not converge in {0} iterations")]
    NoConvergence(usize),
    #[error("closed loop is not stable (spectral radius {0})")]
    Unstable(f64),
    #[error("stationary mean needs A = I, got {0:?}")]
    DriftingTarget(Mat2),
}

pub fn mat_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut c = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

pub fn transpose(a: &Mat2) -> Mat2 {
    [[a[0][0], a[1][0]], [a[0][1], a[1][1]]]
}

fn add(a: &Mat2, b: &Mat2) -> Mat2 {
    [[a[0][0] + b[0][0], a[0][1] + b[0][1]], [a[1][0] + b[1][0], a[1][1] + b[1][1]]]
}

fn sub(a: &Mat2, b: &Mat2) -> Mat2 {
    [[a[0][0] - b[0][0], a[0][1] - b[0][1]], [a[1][0] - b[1][0], a[1][1] - b[1][1]]]
}

fn scale(a: &Mat2, s: f64) -> Mat2 {
    [[a[0][0] * s, a[0][1] * s], [a[1][0] * s, a[1][1] * s]]
}

pub fn inverse(a: &Mat2) -> Option<Mat2> {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    if det.abs() < 1e-300 || !det.is_finite() {
        return None;
    }
    Some([[a[1][1] / det, -a[0][1] / det], [-a[1][0] / det, a[0][0] / det]])
}

fn max_abs(a: &Mat2) -> f64 {
    a.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
}

/// Spectral radius of a real 2x2 matrix.
pub fn spectral_radius(a: &Mat2) -> f64 {
    let tr = a[0][0] + a[1][1];
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    let disc = tr * tr / 4.0 - det;
    if disc >= 0.0 {
        let r = disc.sqrt();
        (tr / 2.0 + r).abs().max((tr / 2.0 - r).abs())
    } else {
        det.abs().sqrt()
    }
}

/// Fixed point `(W, K)` of the discounted Riccati map for stage cost
/// `x'^T Q x' + u^T R u`.
pub fn riccati(a: &Mat2, b: &Mat2, q: &Mat2, r: &Mat2, gamma: f64) -> Result<(Mat2, Mat2), LqrError> {
    let (at, bt) = (transpose(a), transpose(b));
    let gain = |w: &Mat2| -> Result<Mat2, LqrError> {
        let inner = inverse(&add(r, &mat_mul(&mat_mul(&bt, w), b))).ok_or(LqrError::SingularControl)?;
        Ok(mat_mul(&inner, &mat_mul(&mat_mul(&bt, w), a)))
    };
    let mut w = *q;
    for _ in 0..RICCATI_MAX_ITER {
        let k = gain(&w)?;
        let awa = mat_mul(&mat_mul(&at, &w), a);
        let awbk = mat_mul(&mat_mul(&mat_mul(&at, &w), b), &k);
        let next = add(q, &scale(&sub(&awa, &awbk), gamma));
        if !next.iter().flatten().all(|v| v.is_finite()) {
            break;
        }
        let done = max_abs(&sub(&next, &w)) <= RICCATI_TOLERANCE * max_abs(&next).max(1.0);
        w = next;
        if done {
            return Ok((w, gain(&w)?));
        }
    }
    Err(LqrError::NoConvergence(RICCATI_MAX_ITER))
}

/// Stationary covariance of `e' = F e + s w` with standard normal `w`.
pub fn stationary_covariance(f: &Mat2, s: f64) -> Result<Mat2, LqrError> {
    let rho = spectral_radius(f);
    if rho >= 1.0 {
        return Err(LqrError::Unstable(rho));
    }
    let noise = [[s * s, 0.0], [0.0, s * s]];
    let ft = transpose(f);
    let mut sigma = noise;
    for _ in 0..RICCATI_MAX_ITER {
        let next = add(&mat_mul(&mat_mul(f, &sigma), &ft), &noise);
        let done = max_abs(&sub(&next, &sigma)) <= RICCATI_TOLERANCE * max_abs(&next).max(1e-300);
        sigma = next;
        if done {
            return Ok(sigma);
        }
    }
    Err(LqrError::NoConvergence(RICCATI_MAX_ITER))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LqrSolution {
    /// Arrival-inclusive cost matrix `W`.
    pub w: Mat2,
    /// Feedback gain: `u = -K (x - target)`.
    pub gain: Mat2,
    pub mean: Point,
    /// Per-axis stationary variance.
    pub variance: Point,
    pub covariance: Mat2,
}

/// Optimal gain and stationary statistics of the LQR environment.
pub fn lqr_analytic(spec: &EnvSpec) -> Result<LqrSolution, LqrError> {
    let RewardModel::Lqr(reward) = &spec.reward else {
        return Err(LqrError::NotLqr);
    };
    let d = spec.dynamics;
    let a = [[d.a, 0.0], [0.0, d.a]];
    let b = [[d.b, 0.0], [0.0, d.b]];
    if a != crate::envs::IDENTITY {
        return Err(LqrError::DriftingTarget(a));
    }
    let r = scale(&spec.control_matrix(), 0.5);
    let (w, gain) = riccati(&a, &b, &reward.q, &r, spec.gamma)?;
    let f = sub(&a, &mat_mul(&b, &gain));
    let covariance = stationary_covariance(&f, d.sigma1 * d.noise_scale)?;
    Ok(LqrSolution { w, gain, mean: reward.target, variance: [covariance[0][0], covariance[1][1]], covariance })
}
