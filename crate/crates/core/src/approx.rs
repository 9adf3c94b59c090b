//! Two-layer tanh networks with hand-written gradients, Adam, and a Gaussian
//! policy head with a fixed standard deviation.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ApproxError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("diverged")]
    Diverged,
    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),
}

/// `W2 tanh(W1 x + b1) + b2`.
///
/// Parameters live in one flat vector laid out as `[W1, b1, W2, b2]` with
/// row-major weights, so optimizers and checkpoints see a single slice.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    input: usize,
    hidden: usize,
    output: usize,
    params: Vec<f64>,
}

impl Mlp {
    /// All-zero parameters.
    pub fn zeros(input: usize, hidden: usize, output: usize) -> Self {
        let n = hidden * input + hidden + output * hidden + output;
        Self { input, hidden, output, params: vec![0.0; n] }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init<R: Rng + ?Sized>(input: usize, hidden: usize, output: usize, rng: &mut R) -> Self {
        let mut net = Self::zeros(input, hidden, output);
        let l1 = (6.0 / (input + hidden) as f64).sqrt();
        let l2 = (6.0 / (hidden + output) as f64).sqrt();
        let (w1, w2) = (net.w1_range(), net.w2_range());
        for p in &mut net.params[w1] {
            *p = rng.random_range(-l1..=l1);
        }
        for p in &mut net.params[w2] {
            *p = rng.random_range(-l2..=l2);
        }
        net
    }

    pub fn input_dim(&self) -> usize {
        self.input
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden
    }

    pub fn output_dim(&self) -> usize {
        self.output
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    fn w1_range(&self) -> std::ops::Range<usize> {
        0..self.hidden * self.input
    }

    fn b1_range(&self) -> std::ops::Range<usize> {
        let s = self.hidden * self.input;
        s..s + self.hidden
    }

    fn w2_range(&self) -> std::ops::Range<usize> {
        let s = self.hidden * self.input + self.hidden;
        s..s + self.output * self.hidden
    }

    fn b2_range(&self) -> std::ops::Range<usize> {
        let s = self.hidden * self.input + self.hidden + self.output * self.hidden;
        s..s + self.output
    }

    fn check_input(&self, x: &[f64]) -> Result<(), ApproxError> {
        if x.len() != self.input {
            return Err(ApproxError::DimMismatch { expected: self.input, got: x.len() });
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, ApproxError> {
        self.check_input(x)?;
        let mut hidden = vec![0.0; self.hidden];
        let mut out = vec![0.0; self.output];
        self.forward_into(x, &mut hidden, &mut out);
        Ok(out)
    }

    /// Allocation-free forward pass; `hidden` receives the tanh activations.
    /// Dimensions are the caller's responsibility.
    pub fn forward_into(&self, x: &[f64], hidden: &mut [f64], out: &mut [f64]) {
        let p = &self.params;
        let w1 = &p[self.w1_range()];
        let b1 = &p[self.b1_range()];
        for (j, h) in hidden.iter_mut().enumerate() {
            let row = &w1[j * self.input..(j + 1) * self.input];
            let z: f64 = row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>() + b1[j];
            *h = z.tanh();
        }
        let w2 = &p[self.w2_range()];
        let b2 = &p[self.b2_range()];
        for (k, o) in out.iter_mut().enumerate() {
            let row = &w2[k * self.hidden..(k + 1) * self.hidden];
            *o = row.iter().zip(hidden.iter()).map(|(w, h)| w * h).sum::<f64>() + b2[k];
        }
    }

    /// Parameter and input gradients of `upstream . forward(x)`.
    pub fn backward(&self, x: &[f64], upstream: &[f64]) -> Result<(Vec<f64>, Vec<f64>), ApproxError> {
        self.check_input(x)?;
        if upstream.len() != self.output {
            return Err(ApproxError::DimMismatch { expected: self.output, got: upstream.len() });
        }
        let mut hidden = vec![0.0; self.hidden];
        let mut out = vec![0.0; self.output];
        self.forward_into(x, &mut hidden, &mut out);
        let mut grad = vec![0.0; self.params.len()];
        let mut dx = vec![0.0; self.input];
        self.accumulate_grad(x, &hidden, upstream, 1.0, &mut grad, Some(&mut dx));
        Ok((grad, dx))
    }

    /// Adds `scale * d(upstream . f)/d(params)` into `grad`, reusing the
    /// activations from [`Mlp::forward_into`]. Optionally writes the input
    /// gradient (unscaled) into `dx`.
    pub fn accumulate_grad(
        &self,
        x: &[f64],
        hidden: &[f64],
        upstream: &[f64],
        scale: f64,
        grad: &mut [f64],
        dx: Option<&mut [f64]>,
    ) {
        let (w1r, b1r, w2r, b2r) = (self.w1_range(), self.b1_range(), self.w2_range(), self.b2_range());
        let w2 = &self.params[w2r.clone()];
        // dL/dz for the hidden pre-activations
        let mut dz = vec![0.0; self.hidden];
        for (j, d) in dz.iter_mut().enumerate() {
            let back: f64 = (0..self.output).map(|k| upstream[k] * w2[k * self.hidden + j]).sum();
            *d = back * (1.0 - hidden[j] * hidden[j]);
        }
        {
            let g = &mut grad[w2r];
            for k in 0..self.output {
                let s = scale * upstream[k];
                for (j, h) in hidden.iter().enumerate() {
                    g[k * self.hidden + j] += s * h;
                }
            }
        }
        for (k, g) in grad[b2r].iter_mut().enumerate() {
            *g += scale * upstream[k];
        }
        {
            let g = &mut grad[w1r];
            for (j, d) in dz.iter().enumerate() {
                let s = scale * d;
                for (i, xi) in x.iter().enumerate() {
                    g[j * self.input + i] += s * xi;
                }
            }
        }
        for (g, d) in grad[b1r].iter_mut().zip(&dz) {
            *g += scale * d;
        }
        if let Some(dx) = dx {
            let w1 = &self.params[self.w1_range()];
            for (i, out) in dx.iter_mut().enumerate() {
                *out = dz.iter().enumerate().map(|(j, d)| d * w1[j * self.input + i]).sum();
            }
        }
    }

    /// True when every parameter is finite with magnitude at most `limit`.
    pub fn is_bounded(&self, limit: f64) -> bool {
        self.params.iter().all(|p| p.is_finite() && p.abs() <= limit)
    }

    /// Appends `name,rows,cols,values...` lines for the four parameter arrays.
    pub fn write_checkpoint(&self, prefix: &str, out: &mut String) {
        let arrays = [
            ("w1", self.hidden, self.input, self.w1_range()),
            ("b1", self.hidden, 1, self.b1_range()),
            ("w2", self.output, self.hidden, self.w2_range()),
            ("b2", self.output, 1, self.b2_range()),
        ];
        for (name, rows, cols, range) in arrays {
            let _ = write!(out, "{prefix}.{name},{rows},{cols}");
            for v in &self.params[range] {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
    }

    /// Inverse of [`Mlp::write_checkpoint`]; lines for other prefixes are ignored.
    pub fn read_checkpoint(prefix: &str, text: &str) -> Result<Self, ApproxError> {
        let mut arrays: Vec<(String, usize, usize, Vec<f64>)> = Vec::new();
        for line in text.lines().filter(|l| l.starts_with(&format!("{prefix}."))) {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() < 3 {
                return Err(ApproxError::Checkpoint(format!("short line {line:?}")));
            }
            let parse_dim = |s: &str| s.parse::<usize>().map_err(|e| ApproxError::Checkpoint(e.to_string()));
            let values = fields[3..]
                .iter()
                .map(|s| s.parse::<f64>().map_err(|e| ApproxError::Checkpoint(e.to_string())))
                .collect::<Result<Vec<_>, _>>()?;
            let name = fields[0][prefix.len() + 1..].to_string();
            arrays.push((name, parse_dim(fields[1])?, parse_dim(fields[2])?, values));
        }
        let find = |n: &str| {
            arrays
                .iter()
                .find(|a| a.0 == n)
                .ok_or_else(|| ApproxError::Checkpoint(format!("missing {prefix}.{n}")))
        };
        let (w1, b1, w2, b2) = (find("w1")?, find("b1")?, find("w2")?, find("b2")?);
        let (hidden, input, output) = (w1.1, w1.2, w2.1);
        let mut net = Self::zeros(input, hidden, output);
        let expected = [(w1, hidden * input), (b1, hidden), (w2, output * hidden), (b2, output)];
        if expected.iter().any(|(a, n)| a.3.len() != *n) || w2.2 != hidden {
            return Err(ApproxError::Checkpoint("inconsistent shapes".into()));
        }
        net.params = [&w1.3, &b1.3, &w2.3, &b2.3].into_iter().flatten().copied().collect();
        Ok(net)
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamState {
    pub fn new(num_params: usize, lr: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, m: vec![0.0; num_params], v: vec![0.0; num_params], t: 0 }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.m
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.v
    }

    /// Descent step `params -= lr * m_hat / (sqrt(v_hat) + eps)`. Returns the
    /// Euclidean norm of the applied update.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<f64, ApproxError> {
        if params.len() != self.m.len() {
            return Err(ApproxError::DimMismatch { expected: self.m.len(), got: params.len() });
        }
        if grads.len() != params.len() {
            return Err(ApproxError::DimMismatch { expected: params.len(), got: grads.len() });
        }
        if grads.iter().any(|g| !g.is_finite()) {
            return Err(ApproxError::Diverged);
        }
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        let mut sq = 0.0;
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grads[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grads[i] * grads[i];
            let delta = self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + self.eps);
            params[i] -= delta;
            sq += delta * delta;
        }
        Ok(sq.sqrt())
    }
}

pub const DEFAULT_POLICY_STD: f64 = 0.1;

/// Diagonal Gaussian policy: `a ~ N(mean(x), std^2 I)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPolicy {
    pub mean: Mlp,
    pub std: f64,
}

impl GaussianPolicy {
    pub fn new(mean: Mlp, std: f64) -> Self {
        Self { mean, std }
    }

    pub fn action_dim(&self) -> usize {
        self.mean.output_dim()
    }

    pub fn mean_action(&self, x: &[f64]) -> Result<Vec<f64>, ApproxError> {
        self.mean.forward(x)
    }

    pub fn log_prob(&self, x: &[f64], a: &[f64]) -> Result<f64, ApproxError> {
        let mu = self.mean.forward(x)?;
        if a.len() != mu.len() {
            return Err(ApproxError::DimMismatch { expected: mu.len(), got: a.len() });
        }
        Ok(gaussian_log_density(&mu, a, self.std))
    }

    /// Draws `mean(x) + std * z` and returns it with its log density.
    pub fn sample_action<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R) -> Result<(Vec<f64>, f64), ApproxError> {
        let mu = self.mean.forward(x)?;
        let a: Vec<f64> = mu.iter().map(|m| m + self.std * rng.sample::<f64, _>(StandardNormal)).collect();
        let lp = gaussian_log_density(&mu, &a, self.std);
        Ok((a, lp))
    }

    /// Gradient of `log pi(a|x)` w.r.t. the mean-network parameters:
    /// a backward pass with upstream `(a - mean(x)) / std^2`.
    pub fn logprob_grad(&self, x: &[f64], a: &[f64]) -> Result<Vec<f64>, ApproxError> {
        let mu = self.mean.forward(x)?;
        if a.len() != mu.len() {
            return Err(ApproxError::DimMismatch { expected: mu.len(), got: a.len() });
        }
        let var = self.std * self.std;
        let upstream: Vec<f64> = a.iter().zip(&mu).map(|(ai, mi)| (ai - mi) / var).collect();
        Ok(self.mean.backward(x, &upstream)?.0)
    }
}

pub fn gaussian_log_density(mean: &[f64], a: &[f64], std: f64) -> f64 {
    let var = std * std;
    let sq: f64 = a.iter().zip(mean).map(|(ai, mi)| (ai - mi) * (ai - mi)).sum();
    -0.5 * sq / var - mean.len() as f64 * (std * (2.0 * PI).sqrt()).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_net(seed: u64, i: usize, h: usize, o: usize) -> Mlp {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net = Mlp::init(i, h, o, &mut rng);
        for p in net.params_mut() {
            *p += rng.random_range(-0.3..0.3);
        }
        net
    }

    /// Independent forward oracle: explicit nested matrices, no flat layout.
    fn oracle_forward(w1: &[Vec<f64>], b1: &[f64], w2: &[Vec<f64>], b2: &[f64], x: &[f64]) -> Vec<f64> {
        let h: Vec<f64> = w1
            .iter()
            .zip(b1)
            .map(|(row, b)| (row.iter().zip(x).fold(*b, |acc, (w, xi)| acc + w * xi)).tanh())
            .collect();
        w2.iter().zip(b2).map(|(row, b)| row.iter().zip(&h).fold(*b, |acc, (w, hi)| acc + w * hi)).collect()
    }

    fn relative_error(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
    }

    #[test]
    fn zero_and_constant_nets() {
        let z = Mlp::zeros(3, 5, 2);
        assert_eq!(z.forward(&[1.0, -2.0, 0.5]).unwrap(), vec![0.0, 0.0]);
        let mut c = random_net(1, 3, 5, 2);
        let w1 = c.w1_range();
        let b1 = c.b1_range();
        let b2 = c.b2_range();
        for p in &mut c.params_mut()[w1] {
            *p = 0.0;
        }
        for p in &mut c.params_mut()[b1] {
            *p = 0.0;
        }
        c.params_mut()[b2.clone()].copy_from_slice(&[0.7, -1.3]);
        assert_eq!(c.forward(&[4.0, 1.0, -9.0]).unwrap(), vec![0.7, -1.3]);
        assert_eq!(c.forward(&[1.0]), Err(ApproxError::DimMismatch { expected: 3, got: 1 }));
    }

    #[test]
    fn forward_matches_matrix_oracle() {
        let net = random_net(7, 3, 6, 2);
        let p = net.params();
        let w1: Vec<Vec<f64>> = (0..6).map(|j| p[j * 3..j * 3 + 3].to_vec()).collect();
        let b1 = p[18..24].to_vec();
        let w2: Vec<Vec<f64>> = (0..2).map(|k| p[24 + k * 6..24 + k * 6 + 6].to_vec()).collect();
        let b2 = p[36..38].to_vec();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let got = net.forward(&x).unwrap();
            let want = oracle_forward(&w1, &b1, &w2, &b2, &x);
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn backward_zero_upstream() {
        let net = random_net(2, 2, 4, 2);
        let (g, dx) = net.backward(&[0.3, 0.1], &[0.0, 0.0]).unwrap();
        assert!(g.iter().chain(&dx).all(|v| *v == 0.0));
    }

    #[test]
    fn backward_single_unit_chain_rule() {
        // f(x) = w2 tanh(w1 x); near zero tanh' ~ 1 so df/dw1 ~ upstream * w2 * x.
        let mut net = Mlp::zeros(1, 1, 1);
        net.params_mut().copy_from_slice(&[1e-4, 0.0, 1.0, 0.0]);
        let x = 0.5;
        let (g, _) = net.backward(&[x], &[2.0]).unwrap();
        assert!((g[0] - 2.0 * x).abs() < 1e-7);
    }

    #[test]
    fn backward_matches_central_differences() {
        let net = random_net(5, 3, 7, 2);
        let x = [0.4, -0.9, 1.3];
        let up = [0.8, -1.7];
        let (grad, dx) = net.backward(&x, &up).unwrap();
        let f = |n: &Mlp, x: &[f64]| -> f64 {
            n.forward(x).unwrap().iter().zip(&up).map(|(o, u)| o * u).sum()
        };
        let h = 1e-5;
        for i in 0..net.num_params() {
            let mut plus = net.clone();
            plus.params_mut()[i] += h;
            let mut minus = net.clone();
            minus.params_mut()[i] -= h;
            let fd = (f(&plus, &x) - f(&minus, &x)) / (2.0 * h);
            assert!(relative_error(grad[i], fd) < 1e-4, "param {i}: {} vs {fd}", grad[i]);
        }
        for i in 0..3 {
            let mut xp = x;
            xp[i] += h;
            let mut xm = x;
            xm[i] -= h;
            let fd = (f(&net, &xp) - f(&net, &xm)) / (2.0 * h);
            assert!(relative_error(dx[i], fd) < 1e-4);
        }
    }

    #[test]
    fn adam_zero_gradient_is_noop() {
        let mut params = vec![0.5, -1.0, 2.0];
        let mut adam = AdamState::new(3, 0.1);
        adam.step(&mut params, &[0.0; 3]).unwrap();
        assert_eq!(params, vec![0.5, -1.0, 2.0]);
        assert_eq!(adam.steps(), 1);
    }

    #[test]
    fn adam_first_step_is_signed_lr() {
        let mut params = vec![0.0; 4];
        let g = [3.0, -0.02, 1e-3, -50.0];
        let mut adam = AdamState::new(4, 0.01);
        adam.step(&mut params, &g).unwrap();
        for (p, gi) in params.iter().zip(&g) {
            assert!((p + 0.01 * gi.signum()).abs() < 1e-7, "{p}");
        }
    }

    #[test]
    fn adam_rejects_non_finite_and_bad_shapes() {
        let mut adam = AdamState::new(2, 0.1);
        let mut p = vec![1.0, 1.0];
        assert_eq!(adam.step(&mut p, &[f64::NAN, 0.0]), Err(ApproxError::Diverged));
        assert_eq!(adam.steps(), 0);
        assert!(adam.step(&mut p, &[1.0]).is_err());
    }

    #[test]
    fn adam_quadratic_matches_hand_trace() {
        // Hand-stepped Adam on f(w) = w^2, written out with scalars only.
        let (lr, b1, b2, eps) = (0.1f64, 0.9f64, 0.999f64, 1e-8);
        let (mut w, mut m, mut v) = (1.0f64, 0.0f64, 0.0f64);
        let mut reference = Vec::new();
        for t in 1..=100 {
            let g = 2.0 * w;
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            w -= lr * (m / (1.0 - b1.powi(t))) / ((v / (1.0 - b2.powi(t))).sqrt() + eps);
            reference.push(w);
        }
        let mut adam = AdamState::new(1, 0.1);
        let mut p = [1.0];
        let mut trace = Vec::new();
        for _ in 0..100 {
            let g = [2.0 * p[0]];
            adam.step(&mut p, &g).unwrap();
            trace.push(p[0]);
        }
        for (a, b) in trace.iter().zip(&reference) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!(trace[99].abs() < 0.1);
        // Monotone decrease of |w| over the first descent phase.
        for w in trace[..8].windows(2) {
            assert!(w[1].abs() < w[0].abs());
        }
    }

    fn policy(seed: u64, std: f64) -> GaussianPolicy {
        GaussianPolicy::new(random_net(seed, 3, 6, 2), std)
    }

    #[test]
    fn degenerate_policy_returns_mean() {
        let pol = policy(1, 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = [0.3, 0.2, 0.1];
        let (a, _) = pol.sample_action(&x, &mut rng).unwrap();
        let mu = pol.mean_action(&x).unwrap();
        for (ai, mi) in a.iter().zip(&mu) {
            assert!((ai - mi).abs() < 1e-10);
        }
    }

    #[test]
    fn log_prob_at_mean_closed_form() {
        let pol = policy(2, 0.1);
        let x = [0.0, 1.0, -1.0];
        let mu = pol.mean_action(&x).unwrap();
        let lp = pol.log_prob(&x, &mu).unwrap();
        let expected = -2.0 * (0.1 * (2.0 * PI).sqrt()).ln();
        assert!((lp - expected).abs() < 1e-12);
        assert!((lp - 2.7673).abs() < 1e-4);
    }

    #[test]
    fn sampled_std_matches() {
        let pol = policy(3, 0.1);
        let x = [0.5, 0.5, 0.0];
        let mu = pol.mean_action(&x).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 100_000;
        let mut ss = [0.0; 2];
        for _ in 0..n {
            let (a, _) = pol.sample_action(&x, &mut rng).unwrap();
            for d in 0..2 {
                ss[d] += (a[d] - mu[d]).powi(2);
            }
        }
        for s in ss {
            let sd = (s / n as f64).sqrt();
            assert!((sd - 0.1).abs() < 0.002, "{sd}");
        }
    }

    #[test]
    fn density_integrates_to_one() {
        // Uniform samples over a box of half-width 6 std around the mean.
        let pol = policy(4, 0.1);
        let x = [0.1, -0.2, 0.3];
        let mu = pol.mean_action(&x).unwrap();
        let half = 0.6;
        let area = (2.0 * half) * (2.0 * half);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 100_000;
        let total: f64 = (0..n)
            .map(|_| {
                let a = [mu[0] + rng.random_range(-half..half), mu[1] + rng.random_range(-half..half)];
                pol.log_prob(&x, &a).unwrap().exp()
            })
            .sum();
        let integral = total / n as f64 * area;
        assert!((0.95..=1.05).contains(&integral), "{integral}");
    }

    #[test]
    fn logprob_grad_properties() {
        let pol = policy(5, 0.1);
        let x = [0.2, -0.4, 0.9];
        let mu = pol.mean_action(&x).unwrap();
        assert!(pol.logprob_grad(&x, &mu).unwrap().iter().all(|g| *g == 0.0));

        let d = [0.05, -0.02];
        let a1: Vec<f64> = mu.iter().zip(&d).map(|(m, di)| m + di).collect();
        let a3: Vec<f64> = mu.iter().zip(&d).map(|(m, di)| m + 3.0 * di).collect();
        let g1 = pol.logprob_grad(&x, &a1).unwrap();
        let g3 = pol.logprob_grad(&x, &a3).unwrap();
        for (u, v) in g1.iter().zip(&g3) {
            assert!((3.0 * u - v).abs() < 1e-9 * (1.0 + v.abs()));
        }

        let a = [mu[0] + 0.13, mu[1] - 0.07];
        let ga = pol.logprob_grad(&x, &a).unwrap();
        let h = 1e-5;
        for i in 0..pol.mean.num_params() {
            let mut plus = pol.clone();
            plus.mean.params_mut()[i] += h;
            let mut minus = pol.clone();
            minus.mean.params_mut()[i] -= h;
            let fd = (plus.log_prob(&x, &a).unwrap() - minus.log_prob(&x, &a).unwrap()) / (2.0 * h);
            assert!(relative_error(ga[i], fd) < 1e-4);
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        let net = random_net(9, 3, 4, 2);
        let mut text = String::new();
        net.write_checkpoint("actor", &mut text);
        Mlp::zeros(2, 2, 1).write_checkpoint("critic", &mut text);
        assert_eq!(Mlp::read_checkpoint("actor", &text).unwrap(), net);
        assert!(Mlp::read_checkpoint("missing", &text).is_err());
    }
}
