//! Kinematic peg-insertion world.
//!
//! The end-effector is a point carrying a square peg footprint. A box sits
//! flush in a table, so the supporting plane is at the top-face height
//! everywhere, with a square opening at the center of the box. Motion is
//! quasi-static: commanded displacements are clipped, the peg slides without
//! friction over the plane, and it can only drop into the opening when its
//! whole footprint fits.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Cuboid, Pose, Vec3};
use crate::region::{contains, Region, RegionError};

/// Slack on the insertion-depth goal test, absorbing round-off from summing
/// displacements.
pub const GOAL_TOLERANCE: f64 = 1e-9;

/// Slack on the opening test so a peg clamped against a wall stays inside.
const WALL_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnvError {
    #[error("invalid env config `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub workspace_center: [f64; 3],
    pub workspace_half_extents: [f64; 3],
    pub box_half_extents: [f64; 3],
    /// Height of the top face; the box rests on the workspace floor.
    pub surface_height: f64,
    pub hole_half_width: f64,
    pub peg_half_width: f64,
    pub insertion_depth: f64,
    pub max_step: f64,
    pub horizon: usize,
    pub start_distance: f64,
    /// Minimum height of the start point above the opening.
    pub min_start_height: f64,
    /// Box centers are drawn uniformly in `±box_lateral_range` on x and y.
    pub box_lateral_range: f64,
    pub control_period: f64,
    pub patch_size: usize,
    pub cell_size: f64,
    pub sensing_radius: f64,
    /// Std of Gaussian noise on the continuous observation channels.
    pub obs_noise_std: f64,
    /// Half extents of the interaction region around the opening.
    pub su_half_extents: [f64; 3],
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            workspace_center: [0.0, 0.0, 0.4],
            workspace_half_extents: [0.5, 0.5, 0.4],
            box_half_extents: [0.1, 0.08, 0.05],
            surface_height: 0.1,
            hole_half_width: 0.015,
            peg_half_width: 0.013,
            insertion_depth: 0.02,
            max_step: 0.005,
            horizon: 1000,
            start_distance: 0.75,
            min_start_height: 0.3,
            box_lateral_range: 0.1,
            control_period: 0.05,
            patch_size: 16,
            cell_size: 0.004,
            sensing_radius: 0.06,
            obs_noise_std: 0.0,
            su_half_extents: [0.025, 0.025, 0.025],
        }
    }
}

fn invalid(field: &'static str, reason: impl Into<String>) -> EnvError {
    EnvError::InvalidConfig {
        field,
        reason: reason.into(),
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        if !(self.peg_half_width > 0.0 && self.peg_half_width < self.hole_half_width) {
            return Err(invalid("peg_half_width", "must be positive and smaller than hole_half_width"));
        }
        if !(self.max_step > 0.0) {
            return Err(invalid("max_step", "must be positive"));
        }
        if self.horizon < 1 {
            return Err(invalid("horizon", "must be at least 1"));
        }
        if !(self.insertion_depth > 0.0 && self.insertion_depth < 2.0 * self.box_half_extents[2]) {
            return Err(invalid("insertion_depth", "must be positive and shallower than the box"));
        }
        if self.box_half_extents.iter().any(|h| !(*h > 0.0)) {
            return Err(invalid("box_half_extents", "must be positive"));
        }
        if self.hole_half_width >= self.box_half_extents[0].min(self.box_half_extents[1]) {
            return Err(invalid("hole_half_width", "opening must fit in the top face"));
        }
        if (self.surface_height - 2.0 * self.box_half_extents[2] - self.workspace_min().z).abs() > 1e-9 {
            return Err(invalid("surface_height", "box must rest on the workspace floor"));
        }
        if self.su_half_extents.iter().any(|h| !(*h > 0.0)) || self.su_half_extents[2] < self.insertion_depth {
            return Err(invalid("su_half_extents", "must be positive and reach the insertion depth"));
        }
        let lateral_margin = self.box_lateral_range + self.box_half_extents[0].max(self.box_half_extents[1]);
        if lateral_margin >= self.workspace_half_extents[0].min(self.workspace_half_extents[1]) {
            return Err(invalid("box_lateral_range", "box must stay inside the workspace"));
        }
        if !(self.start_distance > self.min_start_height && self.min_start_height >= 0.0) {
            return Err(invalid("start_distance", "must exceed min_start_height"));
        }
        if self.surface_height + self.min_start_height >= self.workspace_max().z {
            return Err(invalid("min_start_height", "start must fit under the workspace ceiling"));
        }
        if !(self.control_period > 0.0 && self.cell_size > 0.0 && self.sensing_radius > 0.0) || self.patch_size == 0 {
            return Err(invalid("patch_size", "observation geometry must be positive"));
        }
        if !(self.obs_noise_std >= 0.0) {
            return Err(invalid("obs_noise_std", "must be non-negative"));
        }
        Ok(())
    }

    pub fn workspace_min(&self) -> Vec3 {
        Vec3::from(self.workspace_center) - Vec3::from(self.workspace_half_extents)
    }

    pub fn workspace_max(&self) -> Vec3 {
        Vec3::from(self.workspace_center) + Vec3::from(self.workspace_half_extents)
    }

    pub fn workspace(&self) -> Region {
        Region::new(Vec3::from(self.workspace_center), Vec3::from(self.workspace_half_extents))
            .expect("validated workspace")
    }

    pub fn cuboid(&self) -> Cuboid {
        Cuboid::new(Vec3::from(self.box_half_extents)).expect("validated box")
    }

    /// Opening center in the box frame.
    pub fn hole_offset(&self) -> Vec3 {
        Vec3::new(0.0, 0.0, self.box_half_extents[2])
    }

    /// Lateral slack between peg and opening, per side.
    pub fn clearance(&self) -> f64 {
        self.hole_half_width - self.peg_half_width
    }

    pub fn observation_dim(&self) -> usize {
        self.patch_size * self.patch_size + 5
    }

    pub fn max_speed(&self) -> f64 {
        self.max_step / self.control_period
    }
}

/// World position of the opening center for a box at `box_pose`.
pub fn hole_position(config: &EnvConfig, box_pose: &Pose) -> Vec3 {
    box_pose.transform_point(&config.hole_offset())
}

/// The true interaction region: the template centered on the opening.
pub fn true_su(config: &EnvConfig, box_pose: &Pose) -> Region {
    Region::new(hole_position(config, box_pose), Vec3::from(config.su_half_extents)).expect("validated template")
}

pub fn su_template(config: &EnvConfig) -> Result<Vec3, RegionError> {
    Region::new(Vec3::zeros(), Vec3::from(config.su_half_extents)).map(|r| r.half_extents)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub ee: Vec3,
    pub ee_vel: Vec3,
    /// True box pose; never shown to policies.
    pub box_pose: Pose,
    pub inserted_depth: f64,
    pub t: usize,
    pub contact: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalObservation {
    /// `patch_size x patch_size`, row-major with rows along +y: 1 opening,
    /// 0 top face, -1 nothing sensed.
    pub patch: Vec<i8>,
    pub ee_vel: Vec3,
    pub contact: bool,
    /// End-effector height above the top face.
    pub height: f64,
}

impl LocalObservation {
    /// Normalized network input of length `patch_size² + 5`.
    pub fn features(&self, config: &EnvConfig) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.patch.len() + 5);
        out.extend(self.patch.iter().map(|&c| f64::from(c)));
        let v = config.max_speed();
        out.extend(self.ee_vel.iter().map(|x| x / v));
        out.push(if self.contact { 1.0 } else { 0.0 });
        out.push((self.height / config.sensing_radius).clamp(-1.0, 3.0));
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub state: EnvState,
    /// Sparse reward: -1 per step, 0 on the success step.
    pub reward: f64,
    pub done: bool,
    pub success: bool,
    /// End-effector inside the true interaction region after the step.
    pub in_su: bool,
}

/// Box pose with a uniformly drawn lateral position.
pub fn sample_box_pose<R: Rng + ?Sized>(config: &EnvConfig, rng: &mut R) -> Pose {
    let r = config.box_lateral_range;
    let (x, y) = if r > 0.0 {
        (rng.random_range(-r..=r), rng.random_range(-r..=r))
    } else {
        (0.0, 0.0)
    };
    let z = config.surface_height - config.box_half_extents[2];
    Pose::from_translation(Vec3::new(config.workspace_center[0] + x, config.workspace_center[1] + y, z))
}

/// Fresh episode with a newly drawn box.
pub fn reset<R: Rng + ?Sized>(config: &EnvConfig, rng: &mut R) -> EnvState {
    let box_pose = sample_box_pose(config, rng);
    reset_with_box(config, box_pose, rng)
}

/// Fresh episode around an existing box: the end-effector starts
/// `start_distance` from the opening, above it, inside the workspace.
pub fn reset_with_box<R: Rng + ?Sized>(config: &EnvConfig, box_pose: Pose, rng: &mut R) -> EnvState {
    let hole = hole_position(config, &box_pose);
    let d = config.start_distance;
    let margin = 0.01;
    let lo = config.workspace_min().add_scalar(margin);
    let hi = config.workspace_max().add_scalar(-margin);
    let dz_max = (hi.z - hole.z).min(d);
    let ee = loop {
        let dz = rng.random_range(config.min_start_height..=dz_max);
        let heading = rng.random_range(0.0..std::f64::consts::TAU);
        let rho = (d * d - dz * dz).max(0.0).sqrt();
        let p = hole + Vec3::new(rho * heading.cos(), rho * heading.sin(), dz);
        if (0..3).all(|i| p[i] >= lo[i] && p[i] <= hi[i]) {
            break p;
        }
    };
    EnvState {
        ee,
        ee_vel: Vec3::zeros(),
        box_pose,
        inserted_depth: 0.0,
        t: 0,
        contact: false,
    }
}

struct Layout {
    box_center: Vec3,
    box_half: Vec3,
    hole: Vec3,
    slack: f64,
    surface: f64,
    bottom: f64,
}

impl Layout {
    fn new(config: &EnvConfig, box_pose: &Pose) -> Self {
        Self {
            box_center: box_pose.translation,
            box_half: Vec3::from(config.box_half_extents),
            hole: hole_position(config, box_pose),
            slack: config.clearance(),
            surface: config.surface_height,
            bottom: config.surface_height - config.insertion_depth,
        }
    }

    /// Whole peg footprint within the opening.
    fn in_opening(&self, p: &Vec3) -> bool {
        let s = self.slack + WALL_TOLERANCE;
        (p.x - self.hole.x).abs() <= s && (p.y - self.hole.y).abs() <= s
    }

    fn in_hole(&self, p: &Vec3) -> bool {
        p.z < self.surface && self.in_opening(p)
    }
}

/// Advances the world by one control period.
pub fn step(state: &EnvState, action: &Vec3, config: &EnvConfig) -> StepResult {
    let lay = Layout::new(config, &state.box_pose);
    let m = config.max_step;
    let a = action.map(|x| if x.is_finite() { x.clamp(-m, m) } else { 0.0 });
    let p = state.ee;
    let lo = config.workspace_min();
    let hi = config.workspace_max();
    let mut c = (p + a).zip_map(&lo, f64::max).zip_map(&hi, f64::min);
    let mut contact = false;

    if lay.in_hole(&p) {
        // Walls of the opening and its floor.
        for i in 0..2 {
            let clamped = c[i].clamp(lay.hole[i] - lay.slack, lay.hole[i] + lay.slack);
            contact |= clamped != c[i];
            c[i] = clamped;
        }
        if c.z <= lay.bottom {
            contact |= c.z < lay.bottom;
            c.z = lay.bottom;
        }
    } else if c.z < lay.surface {
        if lay.in_opening(&c) {
            if c.z <= lay.bottom {
                contact |= c.z < lay.bottom;
                c.z = lay.bottom;
            }
        } else {
            c.z = lay.surface;
            contact = true;
        }
    }

    let inserted_depth = if lay.in_hole(&c) {
        if c.z == lay.bottom {
            config.insertion_depth
        } else {
            (lay.surface - c.z).clamp(0.0, config.insertion_depth)
        }
    } else {
        0.0
    };

    let next = EnvState {
        ee: c,
        ee_vel: (c - p) / config.control_period,
        box_pose: state.box_pose,
        inserted_depth,
        t: state.t + 1,
        contact,
    };
    let success = in_goal(&next, config);
    let in_su = contains(&true_su(config, &next.box_pose), &next.ee);
    StepResult {
        reward: if success { 0.0 } else { -1.0 },
        done: success || next.t >= config.horizon,
        success,
        in_su,
        state: next,
    }
}

/// Goal set: peg inserted to the full depth (closed boundary).
pub fn in_goal(state: &EnvState, config: &EnvConfig) -> bool {
    state.inserted_depth >= config.insertion_depth - GOAL_TOLERANCE
}

/// Reward used by the shaped baselines: 1 on success, 0 inside the estimated
/// region, otherwise minus the distance to the estimated hole.
pub fn shaped_reward(ee: &Vec3, hole_estimate: &Vec3, shat: &Region, success: bool) -> f64 {
    if success {
        1.0
    } else if contains(shat, ee) {
        0.0
    } else {
        -(ee - hole_estimate).norm()
    }
}

/// What the wrist sensor reports: an occupancy patch of the top face under
/// the end-effector, plus proprioception. The surrounding table reads as
/// nothing sensed.
pub fn local_observation(state: &EnvState, config: &EnvConfig) -> LocalObservation {
    let lay = Layout::new(config, &state.box_pose);
    let k = config.patch_size;
    let half = (k as f64 - 1.0) / 2.0;
    let dz = state.ee.z - lay.surface;
    let r2 = config.sensing_radius * config.sensing_radius;
    let w = config.hole_half_width;
    let mut patch = Vec::with_capacity(k * k);
    for row in 0..k {
        let y = state.ee.y + (row as f64 - half) * config.cell_size;
        for col in 0..k {
            let x = state.ee.x + (col as f64 - half) * config.cell_size;
            let (dx, dy) = (x - state.ee.x, y - state.ee.y);
            let on_top = (x - lay.box_center.x).abs() <= lay.box_half.x && (y - lay.box_center.y).abs() <= lay.box_half.y;
            let cell = if dx * dx + dy * dy + dz * dz > r2 || !on_top {
                -1
            } else if (x - lay.hole.x).abs() <= w && (y - lay.hole.y).abs() <= w {
                1
            } else {
                0
            };
            patch.push(cell);
        }
    }
    LocalObservation {
        patch,
        ee_vel: state.ee_vel,
        contact: state.contact,
        height: dz,
    }
}

/// Observation with Gaussian noise of std `config.obs_noise_std` (meters or
/// m/s) on velocity and height; the patch stays ternary.
pub fn noisy_local_observation<R: Rng + ?Sized>(state: &EnvState, config: &EnvConfig, rng: &mut R) -> LocalObservation {
    let mut obs = local_observation(state, config);
    let s = config.obs_noise_std;
    if s > 0.0 {
        for v in obs.ee_vel.iter_mut() {
            *v += s * rng.sample::<f64, _>(StandardNormal);
        }
        obs.height += s * rng.sample::<f64, _>(StandardNormal);
    }
    obs
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg() -> EnvConfig {
        EnvConfig::default()
    }

    fn state_at(ee: Vec3) -> EnvState {
        let c = cfg();
        EnvState {
            ee,
            ee_vel: Vec3::zeros(),
            box_pose: Pose::from_translation(Vec3::new(0.0, 0.0, c.surface_height - c.box_half_extents[2])),
            inserted_depth: 0.0,
            t: 0,
            contact: false,
        }
    }

    #[test]
    fn default_config_is_valid() {
        cfg().validate().unwrap();
        let mut bad = cfg();
        bad.peg_half_width = 0.02;
        assert!(bad.validate().is_err());
        let mut bad = cfg();
        bad.horizon = 0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn resets_are_seeded_and_start_at_distance() {
        let c = cfg();
        let a = reset(&c, &mut ChaCha8Rng::seed_from_u64(5));
        let b = reset(&c, &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(a, b);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..1000 {
            let s = reset(&c, &mut rng);
            let hole = hole_position(&c, &s.box_pose);
            assert!(((s.ee - hole).norm() - 0.75).abs() <= 0.01);
            assert!(s.box_pose.translation.x.abs() <= c.box_lateral_range);
            assert!(s.box_pose.translation.y.abs() <= c.box_lateral_range);
            assert!(contains(&c.workspace(), &s.ee));
            assert!(!in_goal(&s, &c));
        }
    }

    #[test]
    fn free_space_translation() {
        let c = cfg();
        let s = state_at(Vec3::new(0.2, 0.2, 0.5));
        let r = step(&s, &Vec3::new(0.004, 0.0, 0.0), &c);
        assert!((r.state.ee - Vec3::new(0.204, 0.2, 0.5)).norm() < 1e-15);
        assert!(!r.state.contact);
        assert_eq!(r.reward, -1.0);
        assert!(!r.done);
    }

    #[test]
    fn action_is_clipped() {
        let c = cfg();
        let s = state_at(Vec3::new(0.2, 0.2, 0.5));
        let r = step(&s, &Vec3::new(1.0, -1.0, 0.0), &c);
        assert!((r.state.ee - Vec3::new(0.205, 0.195, 0.5)).norm() < 1e-15);
    }

    #[test]
    fn misaligned_peg_rests_on_surface() {
        let c = cfg();
        let s = state_at(Vec3::new(0.005, 0.0, c.surface_height + 0.002));
        let r = step(&s, &Vec3::new(0.0, 0.0, -0.005), &c);
        assert_eq!(r.state.ee.z, c.surface_height);
        assert!(r.state.contact);
        assert_eq!(r.state.inserted_depth, 0.0);
    }

    #[test]
    fn aligned_peg_inserts_in_four_steps() {
        let c = cfg();
        let mut s = state_at(Vec3::new(0.0, 0.0, c.surface_height));
        let mut steps = 0;
        loop {
            let r = step(&s, &Vec3::new(0.0, 0.0, -0.005), &c);
            steps += 1;
            s = r.state;
            if r.success {
                assert!(r.done);
                assert_eq!(r.reward, 0.0);
                break;
            }
            assert!(steps < 10);
        }
        assert_eq!(steps, (c.insertion_depth / 0.005_f64).ceil() as usize);
        assert!(in_goal(&s, &c));
    }

    #[test]
    fn hole_walls_hold_the_peg() {
        let c = cfg();
        let mut s = state_at(Vec3::new(0.0, 0.0, c.surface_height - 0.01));
        s.inserted_depth = 0.01;
        let r = step(&s, &Vec3::new(0.005, 0.0, 0.0), &c);
        assert!((r.state.ee.x - c.clearance()).abs() < 1e-15);
        assert!(r.state.contact);
        assert!((r.state.inserted_depth - 0.01).abs() < 1e-12);
    }

    #[test]
    fn plane_extends_beyond_the_box() {
        let c = cfg();
        let s = state_at(Vec3::new(0.3, 0.0, c.surface_height + 0.002));
        let r = step(&s, &Vec3::new(-0.005, 0.0, -0.005), &c);
        assert!((r.state.ee - Vec3::new(0.295, 0.0, c.surface_height)).norm() < 1e-15);
        assert!(r.state.contact);
    }

    #[test]
    fn goal_boundary_is_closed() {
        let c = cfg();
        let mut s = state_at(Vec3::new(0.0, 0.0, c.surface_height - c.insertion_depth));
        s.inserted_depth = c.insertion_depth;
        assert!(in_goal(&s, &c));
        s.inserted_depth = c.insertion_depth - 1e-6;
        assert!(!in_goal(&s, &c));
    }

    #[test]
    fn random_trajectories_never_penetrate() {
        let c = cfg();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..20 {
            let mut s = state_at(Vec3::new(rng.random_range(-0.15..0.15), rng.random_range(-0.15..0.15), 0.12));
            for _ in 0..2000 {
                let a = Vec3::new(rng.random_range(-0.006..0.006), rng.random_range(-0.006..0.006), rng.random_range(-0.006..0.004));
                let r = step(&s, &a, &c);
                s = r.state;
                let lay = Layout::new(&c, &s.box_pose);
                if !lay.in_opening(&s.ee) {
                    assert!(s.ee.z >= c.surface_height, "penetration at {:?}", s.ee);
                }
                assert!((0.0..=c.insertion_depth).contains(&s.inserted_depth));
                assert!(contains(&c.workspace(), &s.ee));
                if r.success {
                    assert!(r.in_su);
                    break;
                }
            }
        }
    }

    #[test]
    fn goal_states_lie_in_su() {
        let c = cfg();
        let box_pose = state_at(Vec3::zeros()).box_pose;
        let su = true_su(&c, &box_pose);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut goals = 0;
        for _ in 0..100_000 {
            let ee = Vec3::new(rng.random_range(-0.02..0.02), rng.random_range(-0.02..0.02), rng.random_range(0.075..0.11));
            let mut s = state_at(ee);
            // settle through one zero step so depth is consistent with pose
            s.inserted_depth = if Layout::new(&c, &box_pose).in_hole(&ee) { (c.surface_height - ee.z).min(c.insertion_depth) } else { 0.0 };
            if in_goal(&s, &c) {
                goals += 1;
                assert!(contains(&su, &s.ee));
            }
        }
        assert!(goals > 0);
    }

    #[test]
    fn observation_over_the_hole() {
        let c = cfg();
        let s = state_at(Vec3::new(0.0, 0.0, c.surface_height + 0.01));
        let obs = local_observation(&s, &c);
        let k = c.patch_size;
        assert_eq!(obs.patch.len(), k * k);
        assert_eq!(obs.patch[(k / 2) * k + k / 2], 1);
        assert_eq!(obs.patch[(k / 2 - 1) * k + k / 2 - 1], 1);
        assert_eq!(obs.patch[0], 0);
        assert_eq!(obs.patch[k * k - 1], 0);
        assert!(obs.patch.iter().all(|c| [-1, 0, 1].contains(c)));
        assert_eq!(obs.features(&c).len(), c.observation_dim());
    }

    #[test]
    fn observation_far_from_hole() {
        let c = cfg();
        let s = state_at(Vec3::new(0.09, 0.07, c.surface_height + 0.01));
        assert!(local_observation(&s, &c).patch.iter().all(|v| *v != 1));
        let s = state_at(Vec3::new(0.0, 0.0, c.surface_height + 0.2));
        assert!(local_observation(&s, &c).patch.iter().all(|v| *v == -1));
    }

    #[test]
    fn patch_is_translation_equivariant() {
        let c = cfg();
        let k = c.patch_size;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            // keep sensing radius out of play by staying low and centered
            let ee = Vec3::new(rng.random_range(-0.02..0.02), rng.random_range(-0.02..0.02), c.surface_height + 0.001);
            let mut big = c.clone();
            big.sensing_radius = 1.0;
            let a = local_observation(&state_at(ee), &big);
            let b = local_observation(&state_at(ee + Vec3::new(c.cell_size, 0.0, 0.0)), &big);
            for row in 0..k {
                for col in 0..k - 1 {
                    let x = ee.x + (col as f64 + 1.0 - (k as f64 - 1.0) / 2.0) * c.cell_size;
                    // skip cells sitting within round-off of the opening edge
                    if ((x - 0.0).abs() - c.hole_half_width).abs() < 1e-9 {
                        continue;
                    }
                    assert_eq!(b.patch[row * k + col], a.patch[row * k + col + 1]);
                }
            }
        }
    }

    #[test]
    fn shaped_reward_convention() {
        let shat = Region::new(Vec3::new(0.0, 0.0, 0.1), Vec3::repeat(0.03)).unwrap();
        let mu = Vec3::new(0.0, 0.0, 0.1);
        assert_eq!(shaped_reward(&Vec3::new(0.01, 0.0, 0.1), &mu, &shat, false), 0.0);
        assert_eq!(shaped_reward(&Vec3::new(0.01, 0.0, 0.1), &mu, &shat, true), 1.0);
        assert!((shaped_reward(&Vec3::new(0.3, 0.0, 0.5), &mu, &shat, false) + 0.5).abs() < 1e-12);
    }

    #[test]
    fn episodes_are_deterministic() {
        let c = cfg();
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut s = reset(&c, &mut rng);
            let mut trace = vec![s.clone()];
            for _ in 0..300 {
                let a = Vec3::new(rng.random_range(-0.01..0.01), rng.random_range(-0.01..0.01), rng.random_range(-0.01..0.01));
                s = step(&s, &a, &c).state;
                trace.push(s.clone());
            }
            trace
        };
        assert_eq!(run(3), run(3));
    }
}
