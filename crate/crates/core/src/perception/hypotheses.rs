//! From fitted peaks to a set of equally likely poses, and from those poses
//! to the hole-position Gaussian and the switching region.

use nalgebra::Matrix2;
use rand::Rng;
use rand_distr::StandardNormal;

use super::heatmap::PeakFit;
use super::pnp::solve_pnp;
use super::PerceptionError;
use crate::geometry::{CameraIntrinsics, Cuboid, Pose, Vec2, Vec3, NUM_KEYPOINTS};
use crate::region::Region;

pub type KeypointSet = [Vec2; NUM_KEYPOINTS];

/// Failed PnP solves are redrawn up to this many times `n` in total.
pub const RESAMPLE_BUDGET_FACTOR: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct PoseHypothesisSet {
    hypotheses: Vec<Pose>,
    weights: Vec<f64>,
}

impl PoseHypothesisSet {
    /// Uniformly weighted set.
    pub fn uniform(hypotheses: Vec<Pose>) -> Result<Self, PerceptionError> {
        if hypotheses.is_empty() {
            return Err(PerceptionError::EmptyHypothesisSet);
        }
        let n = hypotheses.len();
        Ok(Self {
            hypotheses,
            weights: vec![1.0 / n as f64; n],
        })
    }

    pub fn hypotheses(&self) -> &[Pose] {
        &self.hypotheses
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.hypotheses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hypotheses.is_empty()
    }
}

/// Diagonal Gaussian over hole positions (world frame).
#[derive(Debug, Clone, PartialEq)]
pub struct HoleEstimate {
    pub mean: Vec3,
    /// Per-axis sample standard deviation (n - 1 denominator).
    pub std: Vec3,
    pub samples: Vec<Vec3>,
}

/// Lower Cholesky factor of a 2x2 SPD matrix.
fn cholesky2(cov: &Matrix2<f64>) -> Result<Matrix2<f64>, PerceptionError> {
    cov.cholesky()
        .map(|c| c.l())
        .ok_or(PerceptionError::NotPositiveDefinite)
}

fn draw_set<R: Rng + ?Sized>(fits: &[PeakFit; NUM_KEYPOINTS], factors: &[Matrix2<f64>; NUM_KEYPOINTS], rng: &mut R) -> KeypointSet {
    std::array::from_fn(|k| {
        let z = Vec2::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
        fits[k].mean + factors[k] * z
    })
}

fn factors(fits: &[PeakFit; NUM_KEYPOINTS]) -> Result<[Matrix2<f64>; NUM_KEYPOINTS], PerceptionError> {
    let mut out = [Matrix2::zeros(); NUM_KEYPOINTS];
    for (o, f) in out.iter_mut().zip(fits) {
        *o = cholesky2(&f.covariance)?;
    }
    Ok(out)
}

/// Draws `n` keypoint sets, each keypoint independently from its fitted
/// Gaussian.
pub fn sample_keypoint_sets<R: Rng + ?Sized>(
    fits: &[PeakFit; NUM_KEYPOINTS],
    n: usize,
    rng: &mut R,
) -> Result<Vec<KeypointSet>, PerceptionError> {
    if n == 0 {
        return Err(PerceptionError::InvalidCount(n));
    }
    let l = factors(fits)?;
    Ok((0..n).map(|_| draw_set(fits, &l, rng)).collect())
}

/// `n` PnP poses from `n` sampled keypoint sets; failed solves are redrawn.
pub fn pose_hypotheses<R: Rng + ?Sized>(
    fits: &[PeakFit; NUM_KEYPOINTS],
    n: usize,
    cuboid: &Cuboid,
    cam: &CameraIntrinsics,
    rng: &mut R,
) -> Result<PoseHypothesisSet, PerceptionError> {
    if n < 2 {
        return Err(PerceptionError::InvalidCount(n));
    }
    let l = factors(fits)?;
    let budget = RESAMPLE_BUDGET_FACTOR * n;
    let mut poses = Vec::with_capacity(n);
    let mut attempts = 0;
    while poses.len() < n {
        if attempts == budget {
            return Err(PerceptionError::TooManyFailures { attempts, solved: poses.len() });
        }
        attempts += 1;
        let set = draw_set(fits, &l, rng);
        if let Ok(sol) = solve_pnp(&set, cuboid, cam) {
            poses.push(sol.pose);
        }
    }
    PoseHypothesisSet::uniform(poses)
}

/// Hole position under every hypothesis, in the world frame, summarized by a
/// diagonal Gaussian.
///
/// `hole_offset` is in the box frame; hypotheses are `camera_from_box`.
pub fn hole_estimate(set: &PoseHypothesisSet, hole_offset: &Vec3, world_from_camera: &Pose) -> Result<HoleEstimate, PerceptionError> {
    if set.is_empty() {
        return Err(PerceptionError::EmptyHypothesisSet);
    }
    let samples: Vec<Vec3> = set
        .hypotheses()
        .iter()
        .map(|h| world_from_camera.compose(h).transform_point(hole_offset))
        .collect();
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<Vec3>() / n;
    let std = if samples.len() > 1 {
        let var = samples
            .iter()
            .map(|s| (s - mean).component_mul(&(s - mean)))
            .sum::<Vec3>()
            / (n - 1.0);
        var.map(f64::sqrt)
    } else {
        Vec3::zeros()
    };
    Ok(HoleEstimate { mean, std, samples })
}

/// Template interaction region centered on the estimated hole, each axis
/// widened by `k` standard deviations.
pub fn build_uncertain_region(est: &HoleEstimate, template_half_extents: &Vec3, k: f64) -> Result<Region, PerceptionError> {
    if !(k >= 0.0) {
        return Err(PerceptionError::InvalidInflation(k));
    }
    Ok(Region::new(est.mean, template_half_extents + est.std * k)?)
}
