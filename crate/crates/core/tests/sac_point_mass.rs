//! Soft actor-critic on a 2-D point-mass reach task with a dense
//! negative-distance reward.

use guapo::sac::{ReplayBuffer, SacHyper, SacLearner, Transition};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STEP: f64 = 0.1;
const GOAL_RADIUS: f64 = 0.05;
const HORIZON: usize = 50;
const ENV_STEPS: usize = 20_000;

struct Reach {
    pos: [f64; 2],
    goal: [f64; 2],
    t: usize,
}

impl Reach {
    fn reset(rng: &mut ChaCha8Rng) -> Self {
        let mut draw = || [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        Self { pos: draw(), goal: draw(), t: 0 }
    }

    fn obs(&self) -> Vec<f64> {
        vec![self.pos[0], self.pos[1], self.goal[0] - self.pos[0], self.goal[1] - self.pos[1]]
    }

    fn distance(&self) -> f64 {
        (self.goal[0] - self.pos[0]).hypot(self.goal[1] - self.pos[1])
    }

    /// `(reward, reached, timed_out)` after one step of at most `STEP` per axis.
    fn step(&mut self, a: &[f64]) -> (f64, bool, bool) {
        for (p, u) in self.pos.iter_mut().zip(a) {
            *p = (*p + u.clamp(-1.0, 1.0) * STEP).clamp(-1.0, 1.0);
        }
        self.t += 1;
        let reached = self.distance() <= GOAL_RADIUS;
        (-self.distance(), reached, self.t >= HORIZON)
    }
}

fn train(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hyper = SacHyper {
        hidden: vec![64, 64],
        batch_size: 64,
        warmup_steps: 1000,
        ..SacHyper::default()
    };
    let mut learner = SacLearner::new(4, 2, 1.0, hyper.clone(), &mut rng).unwrap();
    let mut buffer = ReplayBuffer::new(ENV_STEPS);
    let mut env = Reach::reset(&mut rng);
    for t in 0..ENV_STEPS {
        let obs = env.obs();
        let a: Vec<f64> = if t < hyper.warmup_steps {
            vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]
        } else {
            learner.act(&obs, &mut rng)
        };
        let (reward, reached, timed_out) = env.step(&a);
        buffer.push(Transition {
            obs: obs.iter().map(|&x| x as f32).collect(),
            action: a,
            next_obs: env.obs().iter().map(|&x| x as f32).collect(),
            reward,
            done: reached,
        });
        if reached || timed_out {
            env = Reach::reset(&mut rng);
        }
        if t >= hyper.warmup_steps {
            let batch = buffer.sample_batch(hyper.batch_size, &mut rng).unwrap();
            learner.update(&batch, &mut rng).expect("finite parameters");
        }
    }

    let trials = 50;
    let mut reached = 0;
    for _ in 0..trials {
        let mut env = Reach::reset(&mut rng);
        loop {
            let (_, hit, timed_out) = env.step(&learner.act_deterministic(&env.obs()));
            if hit {
                reached += 1;
                break;
            }
            if timed_out {
                break;
            }
        }
    }
    reached as f64 / trials as f64
}

#[test]
fn reaches_the_goal_after_twenty_thousand_steps() {
    for seed in [1, 2, 3] {
        let rate = train(seed);
        assert!(rate >= 0.9, "seed {seed}: reached {rate:.2}");
    }
}
