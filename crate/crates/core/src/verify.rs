//! Self-contained oracle checks behind `guapo verify`.

use nalgebra::UnitQuaternion;
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::env::{self, EnvConfig};
use crate::geometry::{cuboid_keypoints, CameraIntrinsics, Cuboid, Pose, Vec3};
use crate::harness::streams::{stream_rng, Stream};
use crate::perception::{self, build_uncertain_region, solve_pnp, PerceptionConfig};
use crate::region::{contains, membership_likelihood, NonparametricRegionSet, Region};
use crate::sac::learner::{actor_loss_grad, critic_input, critic_loss_grad};
use crate::sac::policy::{standard_normal, GaussianPolicy};
use crate::sac::{Mlp, SacHyper, SacLearner};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Self { name, passed, detail }
    }

    pub fn line(&self) -> String {
        format!("{} {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

/// Weighted indicator sum written out axis by axis.
fn explicit_likelihood(s: &Vec3, regions: &[Region], weights: &[f64]) -> f64 {
    let mut total = 0.0;
    for (r, w) in regions.iter().zip(weights) {
        let mut inside = true;
        for i in 0..3 {
            let lo = r.center[i] - r.half_extents[i];
            let hi = r.center[i] + r.half_extents[i];
            if s[i] < lo || s[i] > hi {
                inside = false;
            }
        }
        if inside {
            total += w;
        }
    }
    total
}

pub fn membership_oracle(cases: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let n = rng.random_range(1..=12);
        let regions: Vec<Region> = (0..n)
            .map(|_| {
                let c = Vec3::from_fn(|_, _| rng.random_range(-0.05..0.05));
                let h = Vec3::from_fn(|_, _| rng.random_range(0.001..0.04));
                Region::new(c, h).expect("positive extents")
            })
            .collect();
        let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..1.0)).collect();
        let sum: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / sum).collect();
        // a quarter of the queries sit exactly on a face of some region
        let s = if rng.random_bool(0.25) {
            let r = &regions[rng.random_range(0..n)];
            let axis = rng.random_range(0..3);
            let mut p = r.center;
            p[axis] += if rng.random_bool(0.5) { r.half_extents[axis] } else { -r.half_extents[axis] };
            p
        } else {
            Vec3::from_fn(|_, _| rng.random_range(-0.1..0.1))
        };
        let set = NonparametricRegionSet::new(regions.clone(), weights.clone()).expect("normalized weights");
        let diff = (membership_likelihood(&s, &set) - explicit_likelihood(&s, &regions, &weights)).abs();
        worst = worst.max(diff);
    }
    Check::new("membership-oracle", worst <= 1e-12, format!("{cases} cases, max |difference| {worst:.3e}"))
}

pub fn pnp_recovery(instances: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cam = CameraIntrinsics::new(615.0, 615.0, 320.0, 240.0, 640, 480).expect("valid intrinsics");
    let cuboid = Cuboid::new(Vec3::new(0.1, 0.08, 0.05)).expect("valid cuboid");
    let (mut worst_t, mut worst_r, mut non_monotone, mut failed) = (0.0f64, 0.0f64, 0, 0);
    let mut solved = 0;
    while solved + failed < instances {
        let axis = Vec3::from_fn(|_, _| rng.random_range(-1.0..1.0));
        let rot = UnitQuaternion::from_scaled_axis(axis.normalize() * rng.random_range(0.0..1.2));
        let z = rng.random_range(0.5..2.0);
        let truth = Pose::new(rot, Vec3::new(rng.random_range(-0.15..0.15) * z, rng.random_range(-0.1..0.1) * z, z));
        let Ok(kp) = cuboid_keypoints(&cuboid, &truth, &cam) else { continue };
        match solve_pnp(&kp, &cuboid, &cam) {
            Ok(sol) => {
                solved += 1;
                worst_t = worst_t.max((sol.pose.translation - truth.translation).norm());
                worst_r = worst_r.max(sol.pose.rotation_distance(&truth));
                if !sol.cost_history.windows(2).all(|w| w[1] <= w[0]) {
                    non_monotone += 1;
                }
            }
            Err(_) => failed += 1,
        }
    }
    let passed = failed == 0 && worst_t < 1e-6 && worst_r < 1e-6 && non_monotone == 0;
    Check::new(
        "pnp-recovery",
        passed,
        format!("{instances} instances, {failed} unsolved, max translation error {worst_t:.2e} m, max rotation error {worst_r:.2e} rad, {non_monotone} non-monotone"),
    )
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

/// `‖numeric − analytic‖ / max(‖numeric‖, ‖analytic‖)` over the whole
/// gradient vector.
fn relative_error(numeric: &[f64], analytic: &[f64]) -> f64 {
    let norm = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x * x).sum::<f64>().sqrt();
    let diff = norm(&mut numeric.iter().zip(analytic).map(|(x, y)| x - y));
    let scale = norm(&mut numeric.iter().copied()).max(norm(&mut analytic.iter().copied()));
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

pub fn gradient_certification(points: u64, seed: u64) -> Check {
    let hyper = SacHyper {
        hidden: vec![6, 5],
        ..SacHyper::default()
    };
    let (od, ad, n) = (3, 2, 7);
    let (mut critic, mut actor) = (0.0f64, 0.0f64);
    for point in 0..points {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(point));
        let learner = SacLearner::new(od, ad, 0.7, hyper.clone(), &mut rng).expect("valid hyper");
        let obs = Array2::from_shape_fn((n, od), |_| rng.random_range(-1.0..1.0));
        let act = Array2::from_shape_fn((n, ad), |_| rng.random_range(-1.0..1.0));
        let y = Array1::from_shape_fn(n, |_| rng.random_range(-2.0..2.0));
        let eps = standard_normal(n, ad, &mut rng);

        let x = critic_input(obs.view(), act.view());
        let q = &learner.q1;
        let (_, grad) = critic_loss_grad(q, x.view(), y.view());
        let fd = central_difference(q.params(), |p| {
            let net = Mlp::from_params(q.sizes(), p.to_vec()).expect("same shape");
            critic_loss_grad(&net, x.view(), y.view()).0
        });
        critic = critic.max(relative_error(&fd, &grad));

        let pol = &learner.policy;
        let (_, grad) = actor_loss_grad(pol, &learner.q1, &learner.q2, obs.view(), eps.view(), 0.05);
        let fd = central_difference(pol.net.params(), |p| {
            let net = Mlp::from_params(pol.net.sizes(), p.to_vec()).expect("same shape");
            let policy = GaussianPolicy::from_net(net, pol.max_action());
            actor_loss_grad(&policy, &learner.q1, &learner.q2, obs.view(), eps.view(), 0.05).0
        });
        actor = actor.max(relative_error(&fd, &grad));
    }
    Check::new(
        "gradient-certification",
        critic < 1e-4 && actor < 1e-4,
        format!("{points} points each, max relative error critic {critic:.2e}, actor {actor:.2e}"),
    )
}

/// Fraction of detections whose inflated region contains the true opening,
/// for each inflation factor.
pub fn coverage(ks: &[f64], episodes: u64, seed: u64, env: &EnvConfig, pc: &PerceptionConfig) -> Vec<f64> {
    let template = env::su_template(env).expect("valid template");
    let mut hits = vec![0usize; ks.len()];
    let mut total = 0usize;
    for e in 0..episodes {
        let box_pose = env::sample_box_pose(env, &mut stream_rng(seed, Stream::Layout, e));
        let hole = env::hole_position(env, &box_pose);
        let mut rng = stream_rng(seed, Stream::Perception, e);
        let bias = pc.sample_bias(&mut rng);
        total += 1;
        let Ok(out) = perception::perceive(&box_pose, &bias, &env.cuboid(), &env.hole_offset(), pc, &mut rng) else {
            continue;
        };
        for (h, k) in hits.iter_mut().zip(ks) {
            if build_uncertain_region(&out.hole, &template, *k).is_ok_and(|r| contains(&r, &hole)) {
                *h += 1;
            }
        }
    }
    hits.iter().map(|h| *h as f64 / total.max(1) as f64).collect()
}

pub fn coverage_monotonicity(episodes: u64, seed: u64) -> Check {
    let c = coverage(&[0.0, 1.0, 2.0], episodes, seed, &EnvConfig::default(), &PerceptionConfig::default());
    let passed = c[0] <= c[1] && c[1] <= c[2] && c[2] >= c[0] + 0.1;
    Check::new(
        "coverage-monotonicity",
        passed,
        format!("{episodes} episodes, coverage k=0 {:.3}, k=1 {:.3}, k=2 {:.3}", c[0], c[1], c[2]),
    )
}

/// Every fast check with its standard size.
pub fn run_all(seed: u64) -> Vec<Check> {
    vec![
        membership_oracle(10_000, seed),
        pnp_recovery(100, seed),
        gradient_certification(20, seed),
        coverage_monotonicity(500, seed),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_checks_pass() {
        assert!(membership_oracle(500, 1).passed);
        assert!(pnp_recovery(10, 1).passed);
        assert!(gradient_certification(2, 1).passed);
    }

    #[test]
    fn oracle_counts_closed_faces() {
        let r = Region::new(Vec3::zeros(), Vec3::repeat(1.0)).unwrap();
        assert_eq!(explicit_likelihood(&Vec3::new(1.0, -1.0, 0.0), &[r], &[1.0]), 1.0);
        assert_eq!(explicit_likelihood(&Vec3::new(1.0 + 1e-12, 0.0, 0.0), &[r], &[1.0]), 0.0);
    }

    #[test]
    fn relative_error_is_normwise() {
        assert_eq!(relative_error(&[0.0, 0.0], &[0.0, 0.0]), 0.0);
        assert!((relative_error(&[3.0, 0.0], &[3.0, 4.0]) - 0.8).abs() < 1e-15);
    }
}
