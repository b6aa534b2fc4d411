//! Episode rollouts for every baseline: the switched agent, the residual
//! composition, plain SAC and the scripted model-based controllers.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{self, EnvConfig, EnvState};
use crate::geometry::{Pose, Vec3};
use crate::mb::{clip, scripted_action, MbConfig, RandomizedScript};
use crate::perception::{self, build_uncertain_region, PerceptionConfig, PerceptionError};
use crate::region::{alpha, contains, shrink_on_success, Region, RegionError};
use crate::sac::{ReplayBuffer, SacError, SacHyper, SacLearner, Transition};

#[derive(Debug, Error)]
pub enum AgentError {
    #[error(transparent)]
    Sac(#[from] SacError),
    #[error(transparent)]
    Region(#[from] RegionError),
    #[error(transparent)]
    Perception(#[from] PerceptionError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Baseline {
    MbPerfect,
    MbDope,
    MbRandPerfect,
    MbRandDope,
    Sac,
    Residual,
    Guapo,
}

impl Baseline {
    pub const ALL: [Baseline; 7] = [
        Baseline::MbPerfect,
        Baseline::MbDope,
        Baseline::MbRandPerfect,
        Baseline::MbRandDope,
        Baseline::Sac,
        Baseline::Residual,
        Baseline::Guapo,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Baseline::MbPerfect => "mb-perfect",
            Baseline::MbDope => "mb-dope",
            Baseline::MbRandPerfect => "mb-rand-perfect",
            Baseline::MbRandDope => "mb-rand-dope",
            Baseline::Sac => "sac",
            Baseline::Residual => "residual",
            Baseline::Guapo => "guapo",
        }
    }

    /// Whether the baseline owns a learner.
    pub fn learns(self) -> bool {
        matches!(self, Baseline::Sac | Baseline::Residual | Baseline::Guapo)
    }
}

impl fmt::Display for Baseline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("unknown baseline `{0}`")]
pub struct UnknownBaseline(pub String);

impl FromStr for Baseline {
    type Err = UnknownBaseline;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Baseline::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| UnknownBaseline(s.to_string()))
    }
}

/// Which controller produced a step's action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Mb,
    Rl,
    /// Sum of both, as in the residual baseline.
    Residual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Train,
    Eval,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EpisodeStatus {
    Success,
    Timeout,
    PerceptionFailed,
    Diverged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    /// End-effector before the action.
    pub ee: [f64; 3],
    pub action: [f64; 3],
    pub source: Source,
    pub reward: f64,
    pub alpha: u8,
    pub in_su: bool,
    pub in_shat: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub baseline: Baseline,
    pub phase: Phase,
    pub iteration: usize,
    pub episode: usize,
    pub status: EpisodeStatus,
    pub success: bool,
    pub steps: usize,
    pub steps_to_success: Option<usize>,
    /// Whether the goal was already localized when the episode began.
    pub goal_localized: bool,
    pub true_hole: [f64; 3],
    pub hole_estimate: Option<[f64; 3]>,
    pub shat_center: Option<[f64; 3]>,
    pub shat_half_extents: Option<[f64; 3]>,
    pub su_center: [f64; 3],
    pub su_half_extents: [f64; 3],
    pub final_ee: [f64; 3],
    pub final_in_su: bool,
    pub final_in_shat: bool,
    pub records: Vec<StepRecord>,
}

impl EpisodeLog {
    /// The end-effector visited the true interaction region.
    pub fn entered_su(&self) -> bool {
        self.final_in_su || self.records.iter().any(|r| r.in_su)
    }

    /// The end-effector visited the estimated interaction region.
    pub fn entered_shat(&self) -> bool {
        self.final_in_shat || self.records.iter().any(|r| r.in_shat)
    }

    pub fn shat(&self) -> Option<Region> {
        match (self.shat_center, self.shat_half_extents) {
            (Some(c), Some(h)) => Region::new(Vec3::from(c), Vec3::from(h)).ok(),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub env: EnvConfig,
    pub perception: PerceptionConfig,
    pub mb: MbConfig,
    pub sac: SacHyper,
}

/// Per-episode random streams.
#[derive(Debug, Clone)]
pub struct EpisodeRngs {
    /// Start state and observation noise.
    pub env: ChaCha8Rng,
    /// Detector bias and noise.
    pub perception: ChaCha8Rng,
    /// Policy sampling and MB randomization.
    pub exploration: ChaCha8Rng,
    /// Minibatch draws and target-action noise.
    pub updates: ChaCha8Rng,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EpisodeOptions {
    /// Store transitions, update the learner and shrink on success.
    pub learn: bool,
    /// Use the policy mean instead of sampling.
    pub deterministic: bool,
}

impl EpisodeOptions {
    pub const TRAIN: Self = Self {
        learn: true,
        deterministic: false,
    };
}

#[derive(Debug, Clone)]
pub struct AgentState {
    pub baseline: Baseline,
    pub config: AgentConfig,
    pub goal_localized: bool,
    /// Current switching region; `None` before the first perception pass.
    pub shat: Option<Region>,
    pub learner: Option<SacLearner>,
    pub buffer: Option<ReplayBuffer>,
    pub episodes: u64,
    pub env_steps: u64,
}

/// Everything an episode knows beyond the raw state.
#[derive(Debug, Clone)]
pub struct EpisodeContext {
    pub true_hole: Vec3,
    pub hole_estimate: Option<Vec3>,
    pub shat: Option<Region>,
}

impl AgentState {
    pub fn new(baseline: Baseline, config: AgentConfig, init_rng: &mut ChaCha8Rng) -> Result<Self, AgentError> {
        config.sac.validate()?;
        let (learner, buffer) = if baseline.learns() {
            let learner = SacLearner::new(config.env.observation_dim(), 3, 1.0, config.sac.clone(), init_rng)?;
            (Some(learner), Some(ReplayBuffer::new(config.sac.buffer_capacity)))
        } else {
            (None, None)
        };
        Ok(Self {
            baseline,
            config,
            goal_localized: false,
            shat: None,
            learner,
            buffer,
            episodes: 0,
            env_steps: 0,
        })
    }

    fn in_warmup(&self) -> bool {
        self.env_steps < self.config.sac.warmup_steps as u64
    }

    /// Normalized learner action in `[-1, 1]³`.
    fn rl_action(&self, features: &[f64], opts: EpisodeOptions, rng: &mut ChaCha8Rng) -> Vec3 {
        let learner = self.learner.as_ref().expect("learning baseline");
        if opts.learn && self.in_warmup() {
            return Vec3::from_fn(|_, _| rng.random_range(-1.0..=1.0));
        }
        let a = if opts.deterministic {
            learner.act_deterministic(features)
        } else {
            learner.act(features, rng)
        };
        Vec3::new(a[0], a[1], a[2])
    }

    /// The hard switch: the attractor toward the center of `shat` outside it,
    /// the learner inside it. Also returns the normalized learner action.
    pub fn select_action(
        &self,
        state: &EnvState,
        shat: &Region,
        features: &[f64],
        opts: EpisodeOptions,
        rng: &mut ChaCha8Rng,
    ) -> (Vec3, Source, Option<Vec3>) {
        let m = self.config.env.max_step;
        if alpha(&state.ee, shat) == 0 {
            (self.config.mb.guided_action(&state.ee, shat.center, m), Source::Mb, None)
        } else {
            let u = self.rl_action(features, opts, rng);
            (u * m, Source::Rl, Some(u))
        }
    }

    /// Attractor toward the estimated hole plus the learner's correction.
    pub fn residual_action(
        &self,
        state: &EnvState,
        hole_estimate: &Vec3,
        features: &[f64],
        opts: EpisodeOptions,
        rng: &mut ChaCha8Rng,
    ) -> (Vec3, Vec3) {
        let u = self.rl_action(features, opts, rng);
        (compose_residual(&self.config, &state.ee, hole_estimate, &u), u)
    }

    /// Rebuilds the switching region from a fresh detection.
    fn perceive(&self, state: &EnvState, rng: &mut ChaCha8Rng) -> Result<(Vec3, Region), AgentError> {
        let env = &self.config.env;
        let pc = &self.config.perception;
        let bias = pc.sample_bias(rng);
        let out = perception::perceive(&state.box_pose, &bias, &env.cuboid(), &env.hole_offset(), pc, rng)?;
        let template = env::su_template(env)?;
        let region = build_uncertain_region(&out.hole, &template, pc.k_sigma)?;
        Ok((out.hole.mean, region))
    }

    /// One episode against the box at `box_pose`.
    pub fn run_episode(
        &mut self,
        box_pose: Pose,
        rngs: &mut EpisodeRngs,
        opts: EpisodeOptions,
        phase: Phase,
        iteration: usize,
        episode: usize,
    ) -> EpisodeLog {
        let env_cfg = self.config.env.clone();
        let mut state = env::reset_with_box(&env_cfg, box_pose, &mut rngs.env);
        let true_hole = env::hole_position(&env_cfg, &box_pose);
        let su = env::true_su(&env_cfg, &box_pose);
        let goal_localized = self.goal_localized;

        let mut ctx = EpisodeContext {
            true_hole,
            hole_estimate: None,
            shat: None,
        };
        let mut status = EpisodeStatus::Timeout;
        if self.baseline == Baseline::Guapo && self.goal_localized {
            ctx.shat = self.shat;
            ctx.hole_estimate = self.shat.map(|r| r.center);
        } else {
            match self.perceive(&state, &mut rngs.perception) {
                Ok((mean, region)) => {
                    ctx.hole_estimate = Some(mean);
                    ctx.shat = Some(region);
                    if self.baseline == Baseline::Guapo {
                        self.shat = Some(region);
                    }
                }
                Err(_) => status = EpisodeStatus::PerceptionFailed,
            }
        }

        let mut log = EpisodeLog {
            baseline: self.baseline,
            phase,
            iteration,
            episode,
            status,
            success: false,
            steps: 0,
            steps_to_success: None,
            goal_localized,
            true_hole: true_hole.into(),
            hole_estimate: ctx.hole_estimate.map(Into::into),
            shat_center: ctx.shat.map(|r| r.center.into()),
            shat_half_extents: ctx.shat.map(|r| r.half_extents.into()),
            su_center: su.center.into(),
            su_half_extents: su.half_extents.into(),
            final_ee: state.ee.into(),
            final_in_su: contains(&su, &state.ee),
            final_in_shat: ctx.shat.is_some_and(|r| contains(&r, &state.ee)),
            records: Vec::new(),
        };
        if status == EpisodeStatus::PerceptionFailed && self.needs_estimate() {
            return log;
        }

        let mut script = RandomizedScript::new();
        let m = env_cfg.max_step;
        let tolerance = env_cfg.clearance() / 2.0;
        let depth = env_cfg.insertion_depth;
        let mut features = self.features(&state, &mut rngs.env);
        loop {
            let in_shat = ctx.shat.is_some_and(|r| contains(&r, &state.ee));
            let (action, source, stored) = match self.baseline {
                Baseline::MbPerfect => (scripted_action(&state.ee, &true_hole, depth, tolerance, &self.config.mb, m), Source::Mb, None),
                Baseline::MbDope => {
                    let target = ctx.hole_estimate.unwrap_or(true_hole);
                    (scripted_action(&state.ee, &target, depth, tolerance, &self.config.mb, m), Source::Mb, None)
                }
                Baseline::MbRandPerfect | Baseline::MbRandDope => {
                    let target = if self.baseline == Baseline::MbRandPerfect {
                        true_hole
                    } else {
                        ctx.hole_estimate.unwrap_or(true_hole)
                    };
                    let a = script.action(&state.ee, &target, depth, tolerance, &self.config.mb, m, &mut rngs.exploration);
                    (a, Source::Mb, None)
                }
                Baseline::Sac => {
                    let u = self.rl_action(&features, opts, &mut rngs.exploration);
                    (u * m, Source::Rl, Some(u))
                }
                Baseline::Residual => {
                    let target = ctx.hole_estimate.unwrap_or(true_hole);
                    let (a, u) = self.residual_action(&state, &target, &features, opts, &mut rngs.exploration);
                    (a, Source::Residual, Some(u))
                }
                Baseline::Guapo => {
                    let shat = ctx.shat.expect("guapo always has a region here");
                    let (a, s, u) = self.select_action(&state, &shat, &features, opts, &mut rngs.exploration);
                    (a, s, u.or(Some(a / m)))
                }
            };

            let result = env::step(&state, &action, &env_cfg);
            let reward = match self.baseline {
                Baseline::Sac | Baseline::Residual => {
                    let target = ctx.hole_estimate.unwrap_or(true_hole);
                    let shat = ctx.shat.unwrap_or(su);
                    env::shaped_reward(&result.state.ee, &target, &shat, result.success)
                }
                _ => result.reward,
            };
            log.records.push(StepRecord {
                t: state.t,
                ee: state.ee.into(),
                action: action.into(),
                source,
                reward,
                alpha: u8::from(in_shat),
                in_su: contains(&su, &state.ee),
                in_shat,
            });

            let next_features = self.features(&result.state, &mut rngs.env);
            self.env_steps += 1;
            if opts.learn {
                if let (Some(buffer), Some(u)) = (self.buffer.as_mut(), stored) {
                    buffer.push(Transition {
                        obs: features.iter().map(|&x| x as f32).collect(),
                        action: u.iter().copied().collect(),
                        next_obs: next_features.iter().map(|&x| x as f32).collect(),
                        reward,
                        done: result.success,
                    });
                }
                if self.train_step(&mut rngs.updates).is_err() {
                    log.status = EpisodeStatus::Diverged;
                    state = result.state;
                    break;
                }
            }
            state = result.state;
            features = next_features;

            if result.success {
                log.status = EpisodeStatus::Success;
                log.success = true;
                log.steps_to_success = Some(state.t);
                if self.baseline == Baseline::Guapo && opts.learn && !self.goal_localized {
                    let template = env::su_template(&env_cfg).expect("validated template");
                    if let Ok(region) = shrink_on_success(&state.ee, state.inserted_depth, &template) {
                        self.shat = Some(region);
                        self.goal_localized = true;
                    }
                }
            }
            if result.done {
                break;
            }
        }
        log.steps = state.t;
        log.final_ee = state.ee.into();
        log.final_in_su = contains(&su, &state.ee);
        log.final_in_shat = ctx.shat.is_some_and(|r| contains(&r, &state.ee));
        self.episodes += 1;
        log
    }

    fn needs_estimate(&self) -> bool {
        !matches!(self.baseline, Baseline::MbPerfect | Baseline::MbRandPerfect)
    }

    fn features(&self, state: &EnvState, rng: &mut ChaCha8Rng) -> Vec<f64> {
        if !self.baseline.learns() {
            return Vec::new();
        }
        let env = &self.config.env;
        env::noisy_local_observation(state, env, rng).features(env)
    }

    /// Configured gradient steps once warmup is over and a batch fits.
    fn train_step(&mut self, rng: &mut ChaCha8Rng) -> Result<(), AgentError> {
        if self.in_warmup() {
            return Ok(());
        }
        let (Some(learner), Some(buffer)) = (self.learner.as_mut(), self.buffer.as_ref()) else {
            return Ok(());
        };
        let n = learner.hyper.batch_size;
        if buffer.len() < n {
            return Ok(());
        }
        for _ in 0..learner.hyper.grad_steps {
            let batch = buffer.sample_batch(n, rng)?;
            learner.update(&batch, rng)?;
        }
        Ok(())
    }
}

/// Insertion goal under a hole-opening estimate: the opening lowered by the
/// insertion depth.
pub fn insertion_goal(config: &AgentConfig, hole_estimate: &Vec3) -> Vec3 {
    hole_estimate - Vec3::z() * config.env.insertion_depth
}

/// Clipped sum of the attractor toward the insertion goal under
/// `hole_estimate` and a normalized learner action.
pub fn compose_residual(config: &AgentConfig, ee: &Vec3, hole_estimate: &Vec3, rl: &Vec3) -> Vec3 {
    let m = config.env.max_step;
    let a = config.mb.guided_action(ee, insertion_goal(config, hole_estimate), m) + rl * m;
    clip(&a, &Vec3::repeat(m))
}
