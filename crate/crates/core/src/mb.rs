//! Model-based control on the kinematic end-effector point.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::geometry::Vec3;
use crate::region::Region;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttractorConfig {
    /// Fraction of the remaining error commanded per step.
    pub gain: f64,
    pub max_step: Vec3,
    pub target: Vec3,
}

/// Per-axis clip to `±max_step`.
pub fn clip(v: &Vec3, max_step: &Vec3) -> Vec3 {
    v.zip_map(max_step, |x, m| x.clamp(-m, m))
}

/// Clipped proportional pull toward the target.
pub fn attractor_action(ee: &Vec3, cfg: &AttractorConfig) -> Vec3 {
    clip(&((cfg.target - ee) * cfg.gain), &cfg.max_step)
}

/// Outward unit normal of `obstacle` at `ee`, and the distance to it.
///
/// On or inside the box the normal of the nearest face is used.
fn outward(ee: &Vec3, obstacle: &Region) -> (Vec3, f64) {
    let rel = ee - obstacle.center;
    let excess = rel.abs() - obstacle.half_extents;
    let d = obstacle.distance(ee);
    if d > 0.0 {
        let closest = rel.zip_map(&obstacle.half_extents, |r, h| r.clamp(-h, h));
        ((rel - closest) / d, d)
    } else {
        let axis = excess.imax();
        let mut n = Vec3::zeros();
        n[axis] = if rel[axis] < 0.0 { -1.0 } else { 1.0 };
        (n, 0.0)
    }
}

/// Repulsion away from an obstacle box, fading linearly to zero at
/// `influence_dist`.
pub fn barrier_action(ee: &Vec3, obstacle: &Region, strength: f64, influence_dist: f64, max_step: &Vec3) -> Vec3 {
    let (normal, d) = outward(ee, obstacle);
    if d >= influence_dist {
        return Vec3::zeros();
    }
    clip(&(normal * (strength * (1.0 - d / influence_dist))), max_step)
}

/// Zero-mean Gaussian perturbation with per-axis std `sigma`.
pub fn perturbation<R: Rng + ?Sized>(sigma: &Vec3, rng: &mut R) -> Vec3 {
    sigma.map(|s| if s > 0.0 { s * rng.sample::<f64, _>(StandardNormal) } else { 0.0 })
}

/// `action` plus Gaussian noise, clipped back to the action bound.
pub fn randomized<R: Rng + ?Sized>(action: &Vec3, sigma: &Vec3, max_step: &Vec3, rng: &mut R) -> Vec3 {
    if sigma.iter().all(|s| *s == 0.0) {
        return *action;
    }
    clip(&(action + perturbation(sigma, rng)), max_step)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleConfig {
    pub center: [f64; 3],
    pub half_extents: [f64; 3],
    pub strength: f64,
    pub influence_dist: f64,
}

/// How the MB-Rand baselines corrupt the scripted policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RandMode {
    /// Gaussian noise on every action.
    PerStep,
    /// Lateral target offset redrawn every `dither_period` steps, plus the
    /// per-step noise.
    Dither,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MbConfig {
    pub gain: f64,
    /// Height above the opening where the scripted policy lines up before
    /// descending.
    pub hover_height: f64,
    pub rand_mode: RandMode,
    /// Per-step noise std, meters.
    pub step_sigma: f64,
    /// Std of the lateral target offset in dither mode, meters.
    pub dither_sigma: f64,
    pub dither_period: usize,
    pub obstacle: Option<ObstacleConfig>,
}

impl Default for MbConfig {
    fn default() -> Self {
        Self {
            gain: 1.0,
            hover_height: 0.003,
            rand_mode: RandMode::Dither,
            step_sigma: 0.005,
            dither_sigma: 0.0125,
            dither_period: 10,
            obstacle: None,
        }
    }
}

impl ObstacleConfig {
    pub fn region(&self) -> Option<Region> {
        Region::new(Vec3::from(self.center), Vec3::from(self.half_extents)).ok()
    }
}

impl MbConfig {
    pub fn attractor(&self, target: Vec3, max_step: f64) -> AttractorConfig {
        AttractorConfig {
            gain: self.gain,
            max_step: Vec3::repeat(max_step),
            target,
        }
    }

    /// Attractor toward `target` plus the optional obstacle barrier.
    pub fn guided_action(&self, ee: &Vec3, target: Vec3, max_step: f64) -> Vec3 {
        let cfg = self.attractor(target, max_step);
        let mut a = attractor_action(ee, &cfg);
        if let Some(obs) = &self.obstacle {
            if let Some(region) = obs.region() {
                a += barrier_action(ee, &region, obs.strength, obs.influence_dist, &cfg.max_step);
                a = clip(&a, &cfg.max_step);
            }
        }
        a
    }
}

/// Scripted insertion toward an assumed opening at `hole`: hover above it,
/// then go straight down once laterally within `tolerance` or already below
/// the opening.
pub fn scripted_action(ee: &Vec3, hole: &Vec3, depth: f64, tolerance: f64, cfg: &MbConfig, max_step: f64) -> Vec3 {
    let lateral = ((ee.x - hole.x).powi(2) + (ee.y - hole.y).powi(2)).sqrt();
    let target = if lateral <= tolerance || ee.z < hole.z {
        hole - Vec3::new(0.0, 0.0, depth)
    } else {
        hole + Vec3::new(0.0, 0.0, cfg.hover_height)
    };
    cfg.guided_action(ee, target, max_step)
}

/// Stateful MB-Rand wrapper around [`scripted_action`].
#[derive(Debug, Clone)]
pub struct RandomizedScript {
    offset: Vec3,
    steps: usize,
}

impl Default for RandomizedScript {
    fn default() -> Self {
        Self::new()
    }
}

impl RandomizedScript {
    pub fn new() -> Self {
        Self {
            offset: Vec3::zeros(),
            steps: 0,
        }
    }

    pub fn action<R: Rng + ?Sized>(
        &mut self,
        ee: &Vec3,
        hole: &Vec3,
        depth: f64,
        tolerance: f64,
        cfg: &MbConfig,
        max_step: f64,
        rng: &mut R,
    ) -> Vec3 {
        if cfg.rand_mode == RandMode::Dither && self.steps % cfg.dither_period.max(1) == 0 {
            let p = perturbation(&Vec3::new(cfg.dither_sigma, cfg.dither_sigma, 0.0), rng);
            self.offset = p;
        }
        self.steps += 1;
        let a = scripted_action(ee, &(hole + self.offset), depth, tolerance, cfg, max_step);
        randomized(&a, &Vec3::repeat(cfg.step_sigma), &Vec3::repeat(max_step), rng)
    }
}
