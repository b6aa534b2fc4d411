//! Tanh-squashed Gaussian policy.
//!
//! The network emits a mean and a raw log-std per action dimension. Samples
//! are `max_action · tanh(μ + σ·ε)`; internally actions are kept in the
//! normalized range `[-1, 1]` and only scaled at the environment boundary.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;

use super::mlp::{Mlp, Tape};

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;
/// Keeps the tanh Jacobian term finite at saturation.
pub const TANH_EPS: f64 = 1e-6;

const HALF_LOG_TAU: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPolicy {
    pub net: Mlp,
    act_dim: usize,
    max_action: f64,
}

/// Everything computed while drawing a batch of reparameterized actions.
#[derive(Debug, Clone)]
pub struct SquashedSample {
    pub eps: Array2<f64>,
    pub mean: Array2<f64>,
    pub raw_log_std: Array2<f64>,
    pub log_std: Array2<f64>,
    /// Normalized actions `tanh(u)`.
    pub action: Array2<f64>,
    pub log_prob: Array1<f64>,
}

pub fn standard_normal<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.sample(StandardNormal))
}

impl GaussianPolicy {
    pub fn new<R: Rng + ?Sized>(obs_dim: usize, hidden: &[usize], act_dim: usize, max_action: f64, rng: &mut R) -> Self {
        let mut sizes = vec![obs_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(2 * act_dim);
        Self::from_net(Mlp::new(&sizes, rng), max_action)
    }

    pub fn from_net(net: Mlp, max_action: f64) -> Self {
        assert!(net.output_dim() % 2 == 0, "policy head must emit mean and log-std");
        assert!(max_action > 0.0);
        let act_dim = net.output_dim() / 2;
        Self {
            net,
            act_dim,
            max_action,
        }
    }

    pub fn act_dim(&self) -> usize {
        self.act_dim
    }

    pub fn obs_dim(&self) -> usize {
        self.net.input_dim()
    }

    pub fn max_action(&self) -> f64 {
        self.max_action
    }

    fn squash(&self, out: &Array2<f64>, eps: ArrayView2<f64>) -> SquashedSample {
        let k = self.act_dim;
        let mean = out.slice(s![.., ..k]).to_owned();
        let raw_log_std = out.slice(s![.., k..]).to_owned();
        let log_std = raw_log_std.mapv(|v| v.clamp(LOG_STD_MIN, LOG_STD_MAX));
        let u = &mean + &(log_std.mapv(f64::exp) * eps);
        let action = u.mapv(f64::tanh);
        let gauss = (eps.mapv(|e| -0.5 * e * e) - &log_std).sum_axis(Axis(1)) - k as f64 * HALF_LOG_TAU;
        let jac = action.mapv(|t| (1.0 - t * t + TANH_EPS).ln()).sum_axis(Axis(1));
        let log_prob = gauss - jac - k as f64 * self.max_action.ln();
        SquashedSample {
            eps: eps.to_owned(),
            mean,
            raw_log_std,
            log_std,
            action,
            log_prob,
        }
    }

    /// Reparameterized batch sample with caller-supplied standard normal noise.
    pub fn sample_with(&self, obs: ArrayView2<f64>, eps: ArrayView2<f64>) -> (SquashedSample, Tape) {
        let (out, tape) = self.net.forward_tape(obs);
        (self.squash(&out, eps), tape)
    }

    pub fn sample_batch<R: Rng + ?Sized>(&self, obs: ArrayView2<f64>, rng: &mut R) -> SquashedSample {
        let eps = standard_normal(obs.nrows(), self.act_dim, rng);
        self.sample_with(obs, eps.view()).0
    }

    /// One environment-scale action and its log-density.
    pub fn sample<R: Rng + ?Sized>(&self, obs: &[f64], rng: &mut R) -> (Vec<f64>, f64) {
        let x = ArrayView2::from_shape((1, obs.len()), obs).unwrap();
        let smp = self.sample_batch(x, rng);
        let a = smp.action.row(0).iter().map(|t| t * self.max_action).collect();
        (a, smp.log_prob[0])
    }

    /// `max_action · tanh(μ)`.
    pub fn mean_action(&self, obs: &[f64]) -> Vec<f64> {
        let out = self.net.forward_one(obs);
        out.iter().take(self.act_dim).map(|m| m.tanh() * self.max_action).collect()
    }

    /// Log-density of an environment-scale action under the policy at `obs`.
    pub fn log_prob(&self, obs: &[f64], action: &[f64]) -> f64 {
        let out = self.net.forward_one(obs);
        let k = self.act_dim;
        let mut lp = 0.0;
        for i in 0..k {
            let t = action[i] / self.max_action;
            let u = t.atanh();
            let ls = out[k + i].clamp(LOG_STD_MIN, LOG_STD_MAX);
            let z = (u - out[i]) / ls.exp();
            lp += -0.5 * z * z - ls - HALF_LOG_TAU - (1.0 - t * t + TANH_EPS).ln() - self.max_action.ln();
        }
        lp
    }

    /// Chain rule from per-sample gradients with respect to the normalized
    /// action (`d_action`) and the log-density (`d_log_prob`) back to the
    /// network output `[μ | raw log-std]`.
    pub fn output_grad(&self, smp: &SquashedSample, d_action: ArrayView2<f64>, d_log_prob: &Array1<f64>) -> Array2<f64> {
        let (b, k) = (smp.action.nrows(), self.act_dim);
        let mut dout = Array2::zeros((b, 2 * k));
        for r in 0..b {
            for i in 0..k {
                let t = smp.action[[r, i]];
                let one_minus = 1.0 - t * t;
                let std = smp.log_std[[r, i]].exp();
                let dlp_du = 2.0 * t * one_minus / (one_minus + TANH_EPS);
                let g_u = d_action[[r, i]] * one_minus + d_log_prob[r] * dlp_du;
                let g_ls = g_u * std * smp.eps[[r, i]] - d_log_prob[r];
                let raw = smp.raw_log_std[[r, i]];
                dout[[r, i]] = g_u;
                dout[[r, k + i]] = if raw > LOG_STD_MIN && raw < LOG_STD_MAX { g_ls } else { 0.0 };
            }
        }
        dout
    }
}
