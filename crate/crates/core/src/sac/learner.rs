//! Soft actor-critic losses and update steps.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;

use super::adam::Adam;
use super::buffer::Batch;
use super::mlp::{soft_update, Mlp};
use super::policy::{standard_normal, GaussianPolicy};
use super::{SacError, SacHyper};

pub fn critic_input(obs: ArrayView2<f64>, action: ArrayView2<f64>) -> Array2<f64> {
    assert_eq!(obs.nrows(), action.nrows(), "batch sizes");
    let od = obs.ncols();
    let mut x = Array2::zeros((obs.nrows(), od + action.ncols()));
    x.slice_mut(s![.., ..od]).assign(&obs);
    x.slice_mut(s![.., od..]).assign(&action);
    x
}

/// Bellman targets `r + γ(1 − d)(min Q'(o', a') − α log π(a'|o'))` with
/// `a' = tanh(μ + σ·eps)`.
#[allow(clippy::too_many_arguments)]
pub fn critic_targets(
    policy: &GaussianPolicy,
    q1_target: &Mlp,
    q2_target: &Mlp,
    next_obs: ArrayView2<f64>,
    reward: ArrayView1<f64>,
    done: ArrayView1<f64>,
    eps: ArrayView2<f64>,
    gamma: f64,
    alpha: f64,
) -> Array1<f64> {
    let (next, _) = policy.sample_with(next_obs, eps);
    let x = critic_input(next_obs, next.action.view());
    let q1 = q1_target.forward(x.view());
    let q2 = q2_target.forward(x.view());
    let mut y = Array1::zeros(reward.len());
    for i in 0..y.len() {
        let soft = q1[[i, 0]].min(q2[[i, 0]]) - alpha * next.log_prob[i];
        y[i] = reward[i] + gamma * (1.0 - done[i]) * soft;
    }
    y
}

/// Mean squared error of one critic against fixed targets, and its gradient.
pub fn critic_loss_grad(q: &Mlp, input: ArrayView2<f64>, y: ArrayView1<f64>) -> (f64, Vec<f64>) {
    let (out, tape) = q.forward_tape(input);
    let n = y.len() as f64;
    let diff = &out.column(0) - &y;
    let loss = diff.mapv(|d| d * d).sum() / n;
    let dout = (diff * (2.0 / n)).insert_axis(Axis(1));
    let (grad, _) = q.backward(&tape, dout.view(), false);
    (loss, grad)
}

/// `mean(α log π(a|o) − min(Q1, Q2)(o, a))` with reparameterized actions,
/// and its gradient with respect to the policy parameters.
pub fn actor_loss_grad(
    policy: &GaussianPolicy,
    q1: &Mlp,
    q2: &Mlp,
    obs: ArrayView2<f64>,
    eps: ArrayView2<f64>,
    alpha: f64,
) -> (f64, Vec<f64>) {
    let (smp, tape) = policy.sample_with(obs, eps);
    let x = critic_input(obs, smp.action.view());
    let (v1, t1) = q1.forward_tape(x.view());
    let (v2, t2) = q2.forward_tape(x.view());
    let b = obs.nrows();
    let n = b as f64;
    let mut loss = 0.0;
    let mut d1 = Array2::zeros((b, 1));
    let mut d2 = Array2::zeros((b, 1));
    for i in 0..b {
        let (a, c) = (v1[[i, 0]], v2[[i, 0]]);
        loss += alpha * smp.log_prob[i] - a.min(c);
        if a <= c {
            d1[[i, 0]] = -1.0 / n;
        } else {
            d2[[i, 0]] = -1.0 / n;
        }
    }
    loss /= n;
    let obs_dim = obs.ncols();
    let d_action = q1.backward_input(&t1, d1.view(), obs_dim) + q2.backward_input(&t2, d2.view(), obs_dim);
    let d_log_prob = Array1::from_elem(b, alpha / n);
    let dout = policy.output_grad(&smp, d_action.view(), &d_log_prob);
    let (grad, _) = policy.net.backward(&tape, dout.view(), false);
    (loss, grad)
}

#[derive(Debug, Clone)]
pub struct SacLearner {
    pub hyper: SacHyper,
    pub policy: GaussianPolicy,
    pub q1: Mlp,
    pub q2: Mlp,
    pub q1_target: Mlp,
    pub q2_target: Mlp,
    policy_opt: Adam,
    q1_opt: Adam,
    q2_opt: Adam,
    updates: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateStats {
    pub critic_loss: f64,
    pub actor_loss: f64,
}

impl SacLearner {
    pub fn new<R: Rng + ?Sized>(obs_dim: usize, act_dim: usize, max_action: f64, hyper: SacHyper, rng: &mut R) -> Result<Self, SacError> {
        hyper.validate()?;
        let policy = GaussianPolicy::new(obs_dim, &hyper.hidden, act_dim, max_action, rng);
        let mut sizes = vec![obs_dim + act_dim];
        sizes.extend_from_slice(&hyper.hidden);
        sizes.push(1);
        let q1 = Mlp::new(&sizes, rng);
        let q2 = Mlp::new(&sizes, rng);
        Ok(Self::from_parts(hyper, policy, q1.clone(), q2.clone(), q1, q2))
    }

    pub fn from_parts(hyper: SacHyper, policy: GaussianPolicy, q1: Mlp, q2: Mlp, q1_target: Mlp, q2_target: Mlp) -> Self {
        let lr = hyper.lr;
        Self {
            policy_opt: Adam::new(policy.net.params().len(), lr),
            q1_opt: Adam::new(q1.params().len(), lr),
            q2_opt: Adam::new(q2.params().len(), lr),
            hyper,
            policy,
            q1,
            q2,
            q1_target,
            q2_target,
            updates: 0,
        }
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn obs_dim(&self) -> usize {
        self.policy.obs_dim()
    }

    pub fn act_dim(&self) -> usize {
        self.policy.act_dim()
    }

    /// Stochastic environment-scale action.
    pub fn act<R: Rng + ?Sized>(&self, obs: &[f64], rng: &mut R) -> Vec<f64> {
        self.policy.sample(obs, rng).0
    }

    pub fn act_deterministic(&self, obs: &[f64]) -> Vec<f64> {
        self.policy.mean_action(obs)
    }

    pub fn critic_update<R: Rng + ?Sized>(&mut self, batch: &Batch, rng: &mut R) -> f64 {
        let eps = standard_normal(batch.obs.nrows(), self.act_dim(), rng);
        let y = critic_targets(
            &self.policy,
            &self.q1_target,
            &self.q2_target,
            batch.next_obs.view(),
            batch.reward.view(),
            batch.done.view(),
            eps.view(),
            self.hyper.gamma,
            self.hyper.alpha,
        );
        let x = critic_input(batch.obs.view(), batch.action.view());
        let (l1, g1) = critic_loss_grad(&self.q1, x.view(), y.view());
        let (l2, g2) = critic_loss_grad(&self.q2, x.view(), y.view());
        self.q1_opt.step(self.q1.params_mut(), &g1);
        self.q2_opt.step(self.q2.params_mut(), &g2);
        l1 + l2
    }

    pub fn actor_update<R: Rng + ?Sized>(&mut self, batch: &Batch, rng: &mut R) -> f64 {
        let eps = standard_normal(batch.obs.nrows(), self.act_dim(), rng);
        let (loss, grad) = actor_loss_grad(&self.policy, &self.q1, &self.q2, batch.obs.view(), eps.view(), self.hyper.alpha);
        self.policy_opt.step(self.policy.net.params_mut(), &grad);
        loss
    }

    /// Critic step, actor step, then target tracking.
    pub fn update<R: Rng + ?Sized>(&mut self, batch: &Batch, rng: &mut R) -> Result<UpdateStats, SacError> {
        let critic_loss = self.critic_update(batch, rng);
        let actor_loss = self.actor_update(batch, rng);
        soft_update(&mut self.q1_target, &self.q1, self.hyper.tau)?;
        soft_update(&mut self.q2_target, &self.q2, self.hyper.tau)?;
        self.updates += 1;
        let nets = [&self.policy.net, &self.q1, &self.q2, &self.q1_target, &self.q2_target];
        if !nets.iter().all(|n| n.is_finite()) || !critic_loss.is_finite() || !actor_loss.is_finite() {
            return Err(SacError::NonFinite { update: self.updates });
        }
        Ok(UpdateStats { critic_loss, actor_loss })
    }

    /// Online critic values at (obs, normalized action).
    pub fn q_values(&self, obs: ArrayView2<f64>, action: ArrayView2<f64>) -> (Array1<f64>, Array1<f64>) {
        let x = critic_input(obs, action);
        (
            self.q1.forward(x.view()).slice(s![.., 0]).to_owned(),
            self.q2.forward(x.view()).slice(s![.., 0]).to_owned(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn hyper() -> SacHyper {
        SacHyper {
            hidden: vec![8, 8],
            batch_size: 4,
            ..SacHyper::default()
        }
    }

    fn batch(rng: &mut ChaCha8Rng, n: usize, od: usize, ad: usize, done: f64) -> Batch {
        Batch {
            obs: Array2::from_shape_fn((n, od), |_| rng.random_range(-1.0..1.0)),
            action: Array2::from_shape_fn((n, ad), |_| rng.random_range(-1.0..1.0)),
            next_obs: Array2::from_shape_fn((n, od), |_| rng.random_range(-1.0..1.0)),
            reward: Array1::from_shape_fn(n, |_| rng.random_range(-1.0..1.0)),
            done: Array1::from_elem(n, done),
        }
    }

    #[test]
    fn terminal_and_myopic_targets_equal_reward() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let l = SacLearner::new(3, 2, 1.0, hyper(), &mut rng).unwrap();
        let b = batch(&mut rng, 6, 3, 2, 1.0);
        let eps = standard_normal(6, 2, &mut rng);
        let y = critic_targets(&l.policy, &l.q1_target, &l.q2_target, b.next_obs.view(), b.reward.view(), b.done.view(), eps.view(), 0.99, 0.05);
        assert_eq!(y, b.reward);
        let b = batch(&mut rng, 6, 3, 2, 0.0);
        let y = critic_targets(&l.policy, &l.q1_target, &l.q2_target, b.next_obs.view(), b.reward.view(), b.done.view(), eps.view(), 0.0, 0.05);
        assert_eq!(y, b.reward);
    }

    #[test]
    fn actor_update_leaves_critics_alone_and_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let l = SacLearner::new(3, 2, 1.0, hyper(), &mut rng).unwrap();
        let b = batch(&mut rng, 8, 3, 2, 0.0);
        let mut a = l.clone();
        let mut c = l.clone();
        a.actor_update(&b, &mut ChaCha8Rng::seed_from_u64(5));
        c.actor_update(&b, &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(a.policy, c.policy);
        assert_ne!(a.policy, l.policy);
        assert_eq!(a.q1, l.q1);
        assert_eq!(a.q2, l.q2);
        assert_eq!(a.q1_target, l.q1_target);
    }

    #[test]
    fn zero_critics_push_log_std_up() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut l = SacLearner::new(3, 2, 1.0, hyper(), &mut rng).unwrap();
        let zero = |m: &Mlp| Mlp::from_params(m.sizes(), vec![0.0; m.params().len()]).unwrap();
        l.q1 = zero(&l.q1);
        l.q2 = zero(&l.q2);
        // narrow policy: a squashed Gaussian gains entropy as σ grows only
        // while σ is small
        let params = l.policy.net.params_mut();
        let n = params.len();
        params[n - 2..].fill(-2.0);
        let b = batch(&mut rng, 64, 3, 2, 0.0);
        let eps = standard_normal(64, 2, &mut rng);
        let (_, grad) = actor_loss_grad(&l.policy, &l.q1, &l.q2, b.obs.view(), eps.view(), 0.05);
        // bias of the log-std outputs is the tail of the parameter vector
        let n = grad.len();
        for g in &grad[n - 2..] {
            assert!(*g < 0.0, "descent must raise log-std, got gradient {g}");
        }
    }

    #[test]
    fn updates_reduce_critic_loss_on_fixed_batch() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut l = SacLearner::new(3, 2, 1.0, SacHyper { lr: 1e-3, ..hyper() }, &mut rng).unwrap();
        let b = batch(&mut rng, 16, 3, 2, 1.0);
        let first = l.update(&b, &mut rng).unwrap().critic_loss;
        let mut last = first;
        for _ in 0..300 {
            last = l.update(&b, &mut rng).unwrap().critic_loss;
        }
        assert!(last < 0.2 * first, "{first} -> {last}");
    }

    /// Largest elementwise relative error, with an absolute floor for
    /// entries that are zero in both.
    fn relative_error(a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-7))
            .fold(0.0, f64::max)
    }

    fn central_difference(params: &[f64], f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        let h = 1e-6;
        let mut p = params.to_vec();
        (0..p.len())
            .map(|i| {
                let orig = p[i];
                p[i] = orig + h;
                let up = f(&p);
                p[i] = orig - h;
                let down = f(&p);
                p[i] = orig;
                (up - down) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn toy_critic_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let q = Mlp::new(&[1, 3, 1], &mut rng);
        assert_eq!(q.params().len(), 10);
        let x = Array2::from_shape_fn((5, 1), |_| rng.random_range(-1.0..1.0));
        let y = Array1::from_shape_fn(5, |_| rng.random_range(-1.0..1.0));
        let (_, grad) = critic_loss_grad(&q, x.view(), y.view());
        let fd = central_difference(q.params(), |p| {
            let net = Mlp::from_params(q.sizes(), p.to_vec()).unwrap();
            critic_loss_grad(&net, x.view(), y.view()).0
        });
        assert!(relative_error(&fd, &grad) < 1e-4);
    }

    #[test]
    fn critic_gradient_matches_finite_differences() {
        for point in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + point);
            let q = Mlp::new(&[5, 6, 5, 1], &mut rng);
            let b = batch(&mut rng, 7, 3, 2, 0.0);
            let x = critic_input(b.obs.view(), b.action.view());
            let (_, grad) = critic_loss_grad(&q, x.view(), b.reward.view());
            let fd = central_difference(q.params(), |p| {
                let net = Mlp::from_params(q.sizes(), p.to_vec()).unwrap();
                critic_loss_grad(&net, x.view(), b.reward.view()).0
            });
            let err = relative_error(&fd, &grad);
            assert!(err < 1e-4, "point {point}: relative error {err}");
        }
    }

    #[test]
    fn actor_gradient_matches_finite_differences() {
        let hyper = SacHyper {
            hidden: vec![6, 5],
            ..SacHyper::default()
        };
        for point in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(200 + point);
            let l = SacLearner::new(3, 2, 0.7, hyper.clone(), &mut rng).unwrap();
            let b = batch(&mut rng, 7, 3, 2, 0.0);
            let eps = standard_normal(7, 2, &mut rng);
            let (_, grad) = actor_loss_grad(&l.policy, &l.q1, &l.q2, b.obs.view(), eps.view(), 0.05);
            let fd = central_difference(l.policy.net.params(), |p| {
                let net = Mlp::from_params(l.policy.net.sizes(), p.to_vec()).unwrap();
                let policy = GaussianPolicy::from_net(net, 0.7);
                actor_loss_grad(&policy, &l.q1, &l.q2, b.obs.view(), eps.view(), 0.05).0
            });
            let err = relative_error(&fd, &grad);
            assert!(err < 1e-4, "point {point}: relative error {err}");
        }
    }
}
