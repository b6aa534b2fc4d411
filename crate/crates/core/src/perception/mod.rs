//! Keypoint perception with uncertainty.
//!
//! The detector is simulated: [`heatmap::render_heatmaps`] draws one belief
//! map per cuboid keypoint around the projection of a biased box pose. The
//! rest of the pipeline is what a real detector would feed:
//!
//! 1. fit a 2D Gaussian to every peak ([`heatmap::fit_peak`]),
//! 2. sample `n` keypoint sets and solve PnP for each ([`hypotheses::pose_hypotheses`]),
//! 3. map the hole through every pose and fit a diagonal Gaussian ([`hypotheses::hole_estimate`]),
//! 4. inflate the interaction template by `k` standard deviations ([`hypotheses::build_uncertain_region`]).

pub mod heatmap;
pub mod hypotheses;
pub mod pnp;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{CameraIntrinsics, Cuboid, GeometryError, Pose, Vec3, NUM_KEYPOINTS};
use crate::region::{NonparametricRegionSet, Region, RegionError};

pub use heatmap::{fit_peak, render_heatmaps, Heatmap, PeakFit, PeakFitParams};
pub use hypotheses::{build_uncertain_region, hole_estimate, pose_hypotheses, sample_keypoint_sets, HoleEstimate, PoseHypothesisSet};
pub use pnp::{solve_pnp, PnpSolution};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PerceptionError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Region(#[from] RegionError),
    #[error("keypoint {index} projects outside the image")]
    KeypointOutOfImage { index: usize },
    #[error("heatmap must hold finite non-negative values matching its size")]
    InvalidHeatmap,
    #[error("no peak above the detection threshold")]
    NoPeak,
    #[error("peak covariance is not positive definite")]
    NotPositiveDefinite,
    #[error("invalid sample count {0}")]
    InvalidCount(usize),
    #[error("PnP diverged (reprojection RMS {rms:.2} px)")]
    PnpDivergence { rms: f64 },
    #[error("degenerate PnP configuration")]
    DegenerateConfiguration,
    #[error("PnP failed too often: {solved} poses after {attempts} attempts")]
    TooManyFailures { attempts: usize, solved: usize },
    #[error("empty hypothesis set")]
    EmptyHypothesisSet,
    #[error("inflation factor must be non-negative, got {0}")]
    InvalidInflation(f64),
    #[error("invalid noise model: {0}")]
    InvalidNoise(&'static str),
}

/// Per-episode detector corruption.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerceptionNoiseModel {
    /// Systematic shift of the perceived box, meters, in the frame of the
    /// pose passed to the renderer.
    pub bias: Vec3,
    /// Additive per-pixel noise, clamped so maps stay non-negative.
    pub pixel_noise_std: f64,
    /// Blob width, pixels.
    pub blob_std: f64,
}

impl PerceptionNoiseModel {
    pub fn new(bias: Vec3, pixel_noise_std: f64, blob_std: f64) -> Result<Self, PerceptionError> {
        if !(pixel_noise_std >= 0.0) {
            return Err(PerceptionError::InvalidNoise("pixel_noise_std must be >= 0"));
        }
        if !(blob_std > 0.0) {
            return Err(PerceptionError::InvalidNoise("blob_std must be > 0"));
        }
        Ok(Self {
            bias,
            pixel_noise_std,
            blob_std,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerceptionConfig {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    /// Camera position, world frame.
    pub camera_eye: [f64; 3],
    /// Point the camera looks at, world frame.
    pub camera_target: [f64; 3],
    /// Magnitude range of the lateral per-episode bias, meters.
    pub bias_min: f64,
    pub bias_max: f64,
    pub pixel_noise_std: f64,
    pub blob_std: f64,
    pub window_radius: usize,
    pub detection_threshold: f64,
    pub hypotheses: usize,
    /// Standard deviations added to the template when building the region.
    pub k_sigma: f64,
}

impl Default for PerceptionConfig {
    fn default() -> Self {
        Self {
            fx: 615.0,
            fy: 615.0,
            cx: 320.0,
            cy: 240.0,
            width: 640,
            height: 480,
            camera_eye: [0.0, -0.7, 0.9],
            camera_target: [0.0, 0.0, 0.1],
            bias_min: 0.025,
            bias_max: 0.035,
            pixel_noise_std: 0.02,
            blob_std: 3.0,
            window_radius: 7,
            detection_threshold: 0.1,
            hypotheses: 50,
            k_sigma: 1.0,
        }
    }
}

impl PerceptionConfig {
    pub fn intrinsics(&self) -> Result<CameraIntrinsics, PerceptionError> {
        Ok(CameraIntrinsics::new(self.fx, self.fy, self.cx, self.cy, self.width, self.height)?)
    }

    pub fn world_from_camera(&self) -> Pose {
        Pose::look_at(Vec3::from(self.camera_eye), Vec3::from(self.camera_target), Vec3::z())
    }

    pub fn peak_params(&self) -> PeakFitParams {
        PeakFitParams {
            window_radius: self.window_radius,
            threshold: self.detection_threshold,
        }
    }

    /// Lateral bias with uniform heading and magnitude in `[bias_min, bias_max]`.
    pub fn sample_bias<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec3 {
        let heading = rng.random_range(0.0..std::f64::consts::TAU);
        let magnitude = if self.bias_max > self.bias_min {
            rng.random_range(self.bias_min..=self.bias_max)
        } else {
            self.bias_min
        };
        Vec3::new(magnitude * heading.cos(), magnitude * heading.sin(), 0.0)
    }
}

#[derive(Debug, Clone)]
pub struct PerceptionOutput {
    pub fits: [PeakFit; NUM_KEYPOINTS],
    pub hypotheses: PoseHypothesisSet,
    pub hole: HoleEstimate,
}

/// Runs the whole detector pipeline for a box at `world_from_box`, perceived
/// with a world-frame `bias`. `hole_offset` is the opening in the box frame.
pub fn perceive<R: Rng + ?Sized>(
    world_from_box: &Pose,
    bias: &Vec3,
    cuboid: &Cuboid,
    hole_offset: &Vec3,
    cfg: &PerceptionConfig,
    rng: &mut R,
) -> Result<PerceptionOutput, PerceptionError> {
    let cam = cfg.intrinsics()?;
    let world_from_camera = cfg.world_from_camera();
    let camera_from_box = world_from_camera.inverse().compose(world_from_box);
    let noise = PerceptionNoiseModel::new(
        heatmap::bias_in_camera(bias, &world_from_camera),
        cfg.pixel_noise_std,
        cfg.blob_std,
    )?;
    let maps = render_heatmaps(&camera_from_box, &noise, cuboid, &cam, rng)?;
    let params = cfg.peak_params();
    let mut fits = [PeakFit {
        mean: Default::default(),
        covariance: Default::default(),
    }; NUM_KEYPOINTS];
    for (fit, map) in fits.iter_mut().zip(&maps) {
        *fit = fit_peak(map, &params)?;
    }
    let hypotheses = pose_hypotheses(&fits, cfg.hypotheses, cuboid, &cam, rng)?;
    let hole = hole_estimate(&hypotheses, hole_offset, &world_from_camera)?;
    Ok(PerceptionOutput {
        fits,
        hypotheses,
        hole,
    })
}

/// One template region per hole sample, equally weighted.
pub fn hypothesis_regions(est: &HoleEstimate, template_half_extents: &Vec3) -> Result<NonparametricRegionSet, PerceptionError> {
    let regions = est
        .samples
        .iter()
        .map(|h| Region::new(*h, *template_half_extents))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(NonparametricRegionSet::uniform(regions)?)
}
