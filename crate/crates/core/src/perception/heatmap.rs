//! Synthetic keypoint belief maps and moment-based peak fitting.

use nalgebra::Matrix2;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{PerceptionError, PerceptionNoiseModel};
use crate::geometry::{cuboid_keypoints, CameraIntrinsics, Cuboid, Pose, Vec2, Vec3, NUM_KEYPOINTS};

/// Peak value of a rendered blob.
pub const BLOB_AMPLITUDE: f64 = 1.0;

/// Row-major intensity grid, one per keypoint. Pixel `(u, v)` is centered at
/// integer coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl Heatmap {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            values: vec![0.0; width * height],
        }
    }

    pub fn from_values(width: usize, height: usize, values: Vec<f64>) -> Result<Self, PerceptionError> {
        if values.len() != width * height || values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(PerceptionError::InvalidHeatmap);
        }
        Ok(Self { width, height, values })
    }

    /// Noiseless isotropic blob of standard deviation `std` centered at `center`.
    pub fn gaussian_blob(width: usize, height: usize, center: Vec2, std: f64) -> Self {
        let mut map = Self::zeros(width, height);
        map.add_blob(center, std);
        map
    }

    fn add_blob(&mut self, center: Vec2, std: f64) {
        let inv = 1.0 / (2.0 * std * std);
        // Separable: precompute per-axis factors.
        let gx: Vec<f64> = (0..self.width).map(|u| (-(u as f64 - center.x).powi(2) * inv).exp()).collect();
        let gy: Vec<f64> = (0..self.height).map(|v| (-(v as f64 - center.y).powi(2) * inv).exp()).collect();
        for (v, row) in self.values.chunks_mut(self.width).enumerate() {
            for (u, cell) in row.iter_mut().enumerate() {
                *cell += BLOB_AMPLITUDE * gx[u] * gy[v];
            }
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.values[v * self.width + u]
    }

    /// First maximum in row-major order, as `(u, v, value)`.
    pub fn argmax(&self) -> (usize, usize, f64) {
        let (idx, val) = self
            .values
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best });
        (idx % self.width, idx / self.width, val)
    }
}

/// Gaussian summary of one detected peak.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakFit {
    pub mean: Vec2,
    pub covariance: Matrix2<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakFitParams {
    /// Half-size of the square moment window, pixels.
    pub window_radius: usize,
    /// Minimum peak value, as a fraction of [`BLOB_AMPLITUDE`].
    pub threshold: f64,
}

impl Default for PeakFitParams {
    fn default() -> Self {
        Self {
            window_radius: 7,
            threshold: 0.1,
        }
    }
}

pub const COVARIANCE_REGULARIZER: f64 = 1e-6;

/// Renders one belief map per keypoint for the box seen at `true_pose`
/// (`camera_from_box`), displaced by `noise.bias` (camera frame).
pub fn render_heatmaps<R: Rng + ?Sized>(
    true_pose: &Pose,
    noise: &PerceptionNoiseModel,
    cuboid: &Cuboid,
    cam: &CameraIntrinsics,
    rng: &mut R,
) -> Result<Vec<Heatmap>, PerceptionError> {
    let shifted = Pose::new(true_pose.rotation, true_pose.translation + noise.bias);
    let centers = cuboid_keypoints(cuboid, &shifted, cam)?;
    if let Some(index) = centers.iter().position(|c| !cam.contains(c)) {
        return Err(PerceptionError::KeypointOutOfImage { index });
    }
    let mut maps = Vec::with_capacity(NUM_KEYPOINTS);
    for center in centers {
        let mut map = Heatmap::gaussian_blob(cam.width, cam.height, center, noise.blob_std);
        if noise.pixel_noise_std > 0.0 {
            for cell in map.values.iter_mut() {
                let n: f64 = rng.sample(StandardNormal);
                *cell = (*cell + noise.pixel_noise_std * n).max(0.0);
            }
        }
        maps.push(map);
    }
    Ok(maps)
}

/// Intensity-weighted mean and second central moment in a square window
/// around the strongest pixel.
pub fn fit_peak(heatmap: &Heatmap, params: &PeakFitParams) -> Result<PeakFit, PerceptionError> {
    let (u0, v0, peak) = heatmap.argmax();
    if !(peak > params.threshold * BLOB_AMPLITUDE) {
        return Err(PerceptionError::NoPeak);
    }
    let r = params.window_radius;
    let (u_lo, u_hi) = (u0.saturating_sub(r), (u0 + r).min(heatmap.width - 1));
    let (v_lo, v_hi) = (v0.saturating_sub(r), (v0 + r).min(heatmap.height - 1));

    let mut w_sum = 0.0;
    let mut m = Vec2::zeros();
    for v in v_lo..=v_hi {
        for u in u_lo..=u_hi {
            let w = heatmap.get(u, v);
            w_sum += w;
            m += w * Vec2::new(u as f64, v as f64);
        }
    }
    let mean = m / w_sum;
    let mut cov = Matrix2::zeros();
    for v in v_lo..=v_hi {
        for u in u_lo..=u_hi {
            let w = heatmap.get(u, v);
            let d = Vec2::new(u as f64, v as f64) - mean;
            cov += w * d * d.transpose();
        }
    }
    cov /= w_sum;
    cov += Matrix2::identity() * COVARIANCE_REGULARIZER;
    Ok(PeakFit { mean, covariance: cov })
}

/// Shorthand for the camera-frame bias applied when rendering.
pub fn bias_in_camera(world_bias: &Vec3, world_from_camera: &Pose) -> Vec3 {
    world_from_camera.rotation.inverse() * world_bias
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::project_point;
    use nalgebra::UnitQuaternion;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cam() -> CameraIntrinsics {
        CameraIntrinsics::new(600.0, 600.0, 320.0, 240.0, 640, 480).unwrap()
    }

    fn setup() -> (Pose, Cuboid) {
        let pose = Pose::new(UnitQuaternion::from_euler_angles(0.4, 0.1, 0.3), Vec3::new(0.05, 0.02, 1.1));
        (pose, Cuboid::new(Vec3::new(0.1, 0.08, 0.05)).unwrap())
    }

    /// Discrete weighted moments of the ideal blob over the same window; an
    /// independent evaluation of the truncation effect.
    fn blob_moment_oracle(center: Vec2, std: f64, window_center: (i64, i64), r: i64) -> (Vec2, f64, f64) {
        let g = |x: f64, c: f64| (-(x - c).powi(2) / (2.0 * std * std)).exp();
        let (mut s, mut mx, mut my) = (0.0, 0.0, 0.0);
        for v in window_center.1 - r..=window_center.1 + r {
            for u in window_center.0 - r..=window_center.0 + r {
                let w = g(u as f64, center.x) * g(v as f64, center.y);
                s += w;
                mx += w * u as f64;
                my += w * v as f64;
            }
        }
        let (mx, my) = (mx / s, my / s);
        let (mut vx, mut vy) = (0.0, 0.0);
        for v in window_center.1 - r..=window_center.1 + r {
            for u in window_center.0 - r..=window_center.0 + r {
                let w = g(u as f64, center.x) * g(v as f64, center.y);
                vx += w * (u as f64 - mx).powi(2);
                vy += w * (v as f64 - my).powi(2);
            }
        }
        (Vec2::new(mx, my), vx / s, vy / s)
    }

    #[test]
    fn fit_of_ideal_blob() {
        let center = Vec2::new(100.0, 50.0);
        let map = Heatmap::gaussian_blob(640, 480, center, 3.0);
        let fit = fit_peak(&map, &PeakFitParams::default()).unwrap();
        assert!((fit.mean - center).norm() < 0.1);
        let (_, vx, vy) = blob_moment_oracle(center, 3.0, (100, 50), 7);
        assert!((fit.covariance[(0, 0)] - vx - COVARIANCE_REGULARIZER).abs() < 1e-9);
        assert!((fit.covariance[(1, 1)] - vy - COVARIANCE_REGULARIZER).abs() < 1e-9);
        for d in [fit.covariance[(0, 0)], fit.covariance[(1, 1)]] {
            assert!((d - 9.0).abs() < 0.15 * 9.0, "variance {d}");
        }
        assert!(fit.covariance[(0, 1)].abs() < 1e-9);
    }

    #[test]
    fn subpixel_centers() {
        let center = Vec2::new(100.5, 50.5);
        let map = Heatmap::gaussian_blob(640, 480, center, 3.0);
        let fit = fit_peak(&map, &PeakFitParams::default()).unwrap();
        assert!((fit.mean - center).norm() < 0.1);
        let (oracle_mean, _, _) = blob_moment_oracle(center, 3.0, (100, 50), 7);
        assert!((fit.mean - oracle_mean).norm() < 1e-9);

        let mut worst: f64 = 0.0;
        for i in 0..10 {
            for j in 0..10 {
                let c = Vec2::new(200.0 + i as f64 / 10.0, 150.0 + j as f64 / 10.0);
                let fit = fit_peak(&Heatmap::gaussian_blob(640, 480, c, 3.0), &PeakFitParams::default()).unwrap();
                worst = worst.max((fit.mean - c).abs().max());
            }
        }
        assert!(worst < 0.1, "worst sub-pixel error {worst}");
    }

    #[test]
    fn empty_map_has_no_peak() {
        let map = Heatmap::zeros(64, 48);
        assert_eq!(fit_peak(&map, &PeakFitParams::default()), Err(PerceptionError::NoPeak));
    }

    #[test]
    fn noiseless_maps_peak_at_projections() {
        let (pose, cuboid) = setup();
        let noise = PerceptionNoiseModel::new(Vec3::zeros(), 0.0, 3.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let maps = render_heatmaps(&pose, &noise, &cuboid, &cam(), &mut rng).unwrap();
        assert_eq!(maps.len(), NUM_KEYPOINTS);
        let kps = cuboid_keypoints(&cuboid, &pose, &cam()).unwrap();
        for (map, kp) in maps.iter().zip(kps) {
            let (u, v, _) = map.argmax();
            assert!((u as f64 - kp.x).abs() <= 1.0 && (v as f64 - kp.y).abs() <= 1.0);
        }
    }

    #[test]
    fn bias_moves_peaks_with_projection() {
        let (pose, cuboid) = setup();
        let bias = Vec3::new(0.03, 0.0, 0.0);
        let noise = PerceptionNoiseModel::new(bias, 0.0, 3.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let maps = render_heatmaps(&pose, &noise, &cuboid, &cam(), &mut rng).unwrap();
        let shifted = Pose::new(pose.rotation, pose.translation + bias);
        for (map, kp) in maps.iter().zip(cuboid.keypoints()) {
            let expect = project_point(&shifted, &cam(), &kp).unwrap();
            let fit = fit_peak(map, &PeakFitParams::default()).unwrap();
            assert!((fit.mean - expect).norm() < 0.1);
        }
    }

    #[test]
    fn rendering_is_deterministic() {
        let (pose, cuboid) = setup();
        let noise = PerceptionNoiseModel::new(Vec3::new(0.01, 0.0, 0.0), 0.05, 3.0).unwrap();
        let a = render_heatmaps(&pose, &noise, &cuboid, &cam(), &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let b = render_heatmaps(&pose, &noise, &cuboid, &cam(), &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|m| m.values().iter().all(|v| *v >= 0.0 && v.is_finite())));
    }

    #[test]
    fn out_of_image_keypoint() {
        let (mut pose, cuboid) = setup();
        pose.translation.x = 2.0;
        let noise = PerceptionNoiseModel::new(Vec3::zeros(), 0.0, 3.0).unwrap();
        let err = render_heatmaps(&pose, &noise, &cuboid, &cam(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap_err();
        assert!(matches!(err, PerceptionError::KeypointOutOfImage { .. }));
    }
}
