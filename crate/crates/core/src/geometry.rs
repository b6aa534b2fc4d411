//! Rigid poses, pinhole projection and the cuboid keypoint model.
//!
//! Frames follow the usual computer-vision convention: a [`Pose`] maps points
//! from a child frame into its parent (`parent_from_child`). Camera frames have
//! +z along the optical axis, +x to the right and +y down the image.

use nalgebra::{Matrix3, Matrix4, Rotation3, UnitQuaternion, Vector2, Vector3};
use thiserror::Error;

pub type Vec2 = Vector2<f64>;
pub type Vec3 = Vector3<f64>;

/// Points closer than this to the camera plane cannot be projected.
pub const MIN_DEPTH: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("point behind camera (depth {depth:.3e} m{})", keypoint_suffix(*.index))]
    PointBehindCamera { index: Option<usize>, depth: f64 },
    #[error("invalid camera intrinsics: {0}")]
    InvalidIntrinsics(&'static str),
    #[error("cuboid half extents must be positive, got {0:?}")]
    InvalidCuboid([f64; 3]),
}

fn keypoint_suffix(index: Option<usize>) -> String {
    index.map(|i| format!(", keypoint {i}")).unwrap_or_default()
}

/// Rigid transform `parent_from_child`: rotate then translate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: UnitQuaternion<f64>,
    pub translation: Vec3,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn new(rotation: UnitQuaternion<f64>, translation: Vec3) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn identity() -> Self {
        Self::new(UnitQuaternion::identity(), Vec3::zeros())
    }

    pub fn from_translation(translation: Vec3) -> Self {
        Self::new(UnitQuaternion::identity(), translation)
    }

    /// Pose whose rotation is given by a (not necessarily orthonormalized)
    /// rotation matrix.
    pub fn from_matrix_parts(rotation: &Matrix3<f64>, translation: Vec3) -> Self {
        let rot = Rotation3::from_matrix(rotation);
        Self::new(UnitQuaternion::from_rotation_matrix(&rot), translation)
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    pub fn transform_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation * v
    }

    /// `self ∘ other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose::new(
            self.rotation * other.rotation,
            self.rotation * other.translation + self.translation,
        )
    }

    pub fn inverse(&self) -> Pose {
        let inv = self.rotation.inverse();
        Pose::new(inv, -(inv * self.translation))
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        *self.rotation.to_rotation_matrix().matrix()
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0)
            .copy_from(&self.rotation_matrix());
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    /// Geodesic angle between two rotations, radians.
    pub fn rotation_distance(&self, other: &Pose) -> f64 {
        self.rotation.angle_to(&other.rotation)
    }

    /// Camera pose (`world_from_camera`) looking from `eye` at `target`, with
    /// image "up" roughly along `world_up`.
    pub fn look_at(eye: Vec3, target: Vec3, world_up: Vec3) -> Pose {
        let z = (target - eye).normalize();
        let x = z.cross(&world_up).normalize();
        let y = z.cross(&x);
        let r = Matrix3::from_columns(&[x, y, z]);
        Pose::from_matrix_parts(&r, eye)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraIntrinsics {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: usize,
        height: usize,
    ) -> Result<Self, GeometryError> {
        if !(fx > 0.0 && fy > 0.0) {
            return Err(GeometryError::InvalidIntrinsics("focal lengths must be positive"));
        }
        if !(cx >= 0.0 && cx < width as f64 && cy >= 0.0 && cy < height as f64) {
            return Err(GeometryError::InvalidIntrinsics(
                "principal point must lie inside the image",
            ));
        }
        Ok(Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        })
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    /// Projects a point already expressed in the camera frame.
    pub fn project(&self, p_cam: &Vec3) -> Result<Vec2, GeometryError> {
        if p_cam.z <= MIN_DEPTH {
            return Err(GeometryError::PointBehindCamera {
                index: None,
                depth: p_cam.z,
            });
        }
        Ok(Vec2::new(
            self.fx * p_cam.x / p_cam.z + self.cx,
            self.fy * p_cam.y / p_cam.z + self.cy,
        ))
    }

    /// Back-projects pixel `uv` to the camera-frame point at depth `z`.
    pub fn unproject(&self, uv: &Vec2, z: f64) -> Vec3 {
        Vec3::new(
            (uv.x - self.cx) / self.fx * z,
            (uv.y - self.cy) / self.fy * z,
            z,
        )
    }

    pub fn contains(&self, uv: &Vec2) -> bool {
        uv.x >= 0.0 && uv.y >= 0.0 && uv.x <= (self.width - 1) as f64 && uv.y <= (self.height - 1) as f64
    }
}

/// Projects body-frame `point` through `pose` (`camera_from_body`).
pub fn project_point(pose: &Pose, cam: &CameraIntrinsics, point: &Vec3) -> Result<Vec2, GeometryError> {
    cam.project(&pose.transform_point(point))
}

pub const NUM_KEYPOINTS: usize = 9;

/// Box model used by the keypoint detector.
///
/// Keypoints are the 8 corners ordered by sign pattern (x, y, z) with `-`
/// before `+` and z varying fastest, followed by the centroid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cuboid {
    half_extents: Vec3,
}

impl Cuboid {
    pub fn new(half_extents: Vec3) -> Result<Self, GeometryError> {
        if half_extents.iter().all(|h| *h > 0.0 && h.is_finite()) {
            Ok(Self { half_extents })
        } else {
            Err(GeometryError::InvalidCuboid(half_extents.into()))
        }
    }

    pub fn half_extents(&self) -> Vec3 {
        self.half_extents
    }

    pub fn keypoints(&self) -> [Vec3; NUM_KEYPOINTS] {
        let h = self.half_extents;
        let mut out = [Vec3::zeros(); NUM_KEYPOINTS];
        for (i, kp) in out.iter_mut().take(8).enumerate() {
            let sign = |bit: usize| if i & bit != 0 { 1.0 } else { -1.0 };
            *kp = Vec3::new(sign(4) * h.x, sign(2) * h.y, sign(1) * h.z);
        }
        out
    }
}

/// Pixel locations of the cuboid keypoints under `pose` (`camera_from_body`).
pub fn cuboid_keypoints(
    cuboid: &Cuboid,
    pose: &Pose,
    cam: &CameraIntrinsics,
) -> Result<[Vec2; NUM_KEYPOINTS], GeometryError> {
    let mut out = [Vec2::zeros(); NUM_KEYPOINTS];
    for (i, kp) in cuboid.keypoints().iter().enumerate() {
        out[i] = project_point(pose, cam, kp).map_err(|e| match e {
            GeometryError::PointBehindCamera { depth, .. } => GeometryError::PointBehindCamera {
                index: Some(i),
                depth,
            },
            other => other,
        })?;
    }
    Ok(out)
}
