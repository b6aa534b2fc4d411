//! Cuboid pose from keypoints: linear DLT initialization followed by
//! Gauss-Newton refinement of the reprojection error.

use nalgebra::{DMatrix, Matrix3, Matrix6, SMatrix, UnitQuaternion, Vector6};

use super::PerceptionError;
use crate::geometry::{CameraIntrinsics, Cuboid, Pose, Vec2, Vec3, MIN_DEPTH, NUM_KEYPOINTS};

pub const MIN_CORRESPONDENCES: usize = 6;
pub const MAX_ITERATIONS: usize = 100;
pub const STEP_TOLERANCE: f64 = 1e-10;
pub const MAX_HALVINGS: usize = 10;
/// Solutions whose reprojection RMS exceeds this are rejected.
pub const DIVERGENCE_RMS_PX: f64 = 50.0;

#[derive(Debug, Clone, PartialEq)]
pub struct PnpSolution {
    /// `camera_from_body`.
    pub pose: Pose,
    /// Per-point reprojection RMS of `pose`, pixels.
    pub rms: f64,
    /// Reprojection RMS of the linear initialization.
    pub initial_rms: f64,
    pub iterations: usize,
    /// Sum of squared residuals at the start and after each iteration.
    pub cost_history: Vec<f64>,
}

/// Solves for the pose of `cuboid` given the pixel locations of its nine
/// keypoints.
pub fn solve_pnp(
    keypoints: &[Vec2; NUM_KEYPOINTS],
    cuboid: &Cuboid,
    cam: &CameraIntrinsics,
) -> Result<PnpSolution, PerceptionError> {
    solve_pnp_points(&cuboid.keypoints(), keypoints, cam)
}

/// General form over arbitrary correspondences.
pub fn solve_pnp_points(
    object: &[Vec3],
    image: &[Vec2],
    cam: &CameraIntrinsics,
) -> Result<PnpSolution, PerceptionError> {
    if object.len() != image.len() || object.len() < MIN_CORRESPONDENCES {
        return Err(PerceptionError::DegenerateConfiguration);
    }
    let init = dlt_pose(object, image, cam)?;
    let initial_cost = reprojection_cost(&init, object, image, cam);
    if !initial_cost.is_finite() {
        return Err(PerceptionError::DegenerateConfiguration);
    }
    let (pose, cost_history) = refine(init, object, image, cam);
    let cost = *cost_history.last().expect("history starts with the initial cost");
    let n = object.len() as f64;
    let rms = (cost / n).sqrt();
    if !(rms <= DIVERGENCE_RMS_PX) {
        return Err(PerceptionError::PnpDivergence { rms });
    }
    Ok(PnpSolution {
        pose,
        rms,
        initial_rms: (initial_cost / n).sqrt(),
        iterations: cost_history.len() - 1,
        cost_history,
    })
}

/// Sum of squared pixel residuals; infinite if any point is behind the camera.
pub fn reprojection_cost(pose: &Pose, object: &[Vec3], image: &[Vec2], cam: &CameraIntrinsics) -> f64 {
    object
        .iter()
        .zip(image)
        .map(|(p, uv)| match cam.project(&pose.transform_point(p)) {
            Ok(proj) => (proj - uv).norm_squared(),
            Err(_) => f64::INFINITY,
        })
        .sum()
}

fn dlt_pose(object: &[Vec3], image: &[Vec2], cam: &CameraIntrinsics) -> Result<Pose, PerceptionError> {
    let n = object.len();
    let centroid = object.iter().sum::<Vec3>() / n as f64;
    let scale = object.iter().map(|p| (p - centroid).norm()).sum::<f64>() / n as f64;
    if !(scale > 0.0) {
        return Err(PerceptionError::DegenerateConfiguration);
    }

    let mut a = DMatrix::<f64>::zeros(2 * n, 12);
    for (i, (p, uv)) in object.iter().zip(image).enumerate() {
        let q = (p - centroid) / scale;
        let x = (uv.x - cam.cx) / cam.fx;
        let y = (uv.y - cam.cy) / cam.fy;
        let h = [q.x, q.y, q.z, 1.0];
        for k in 0..4 {
            a[(2 * i, k)] = h[k];
            a[(2 * i, 8 + k)] = -x * h[k];
            a[(2 * i + 1, 4 + k)] = h[k];
            a[(2 * i + 1, 8 + k)] = -y * h[k];
        }
    }

    let svd = a.svd(false, true);
    let v_t = svd.v_t.as_ref().ok_or(PerceptionError::DegenerateConfiguration)?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    let largest = svd.singular_values[order[order.len() - 1]];
    let second_smallest = svd.singular_values[order[1]];
    if !(largest > 0.0) || second_smallest / largest < 1e-10 {
        return Err(PerceptionError::DegenerateConfiguration);
    }
    let null = v_t.row(order[0]);

    // P' maps normalized object points; undo the normalization.
    let mut m = Matrix3::<f64>::zeros();
    let mut p4 = Vec3::zeros();
    for r in 0..3 {
        for c in 0..3 {
            m[(r, c)] = null[4 * r + c] / scale;
        }
        p4[r] = null[4 * r + 3];
    }
    p4 -= m * centroid;

    // Fix the projective sign so the object sits in front of the camera.
    let depth = (m * centroid + p4).z;
    if depth < 0.0 {
        m = -m;
        p4 = -p4;
    }

    let msvd = m.svd(true, true);
    let (u, v_t) = (msvd.u.unwrap(), msvd.v_t.unwrap());
    let lambda = msvd.singular_values.sum() / 3.0;
    if !(lambda > 0.0) {
        return Err(PerceptionError::DegenerateConfiguration);
    }
    let mut r = u * v_t;
    if r.determinant() < 0.0 {
        let fix = Matrix3::from_diagonal(&Vec3::new(1.0, 1.0, -1.0));
        r = u * fix * v_t;
    }
    Ok(Pose::from_matrix_parts(&r, p4 / lambda))
}

/// Gauss-Newton on the left-perturbed pose with step halving. The cost is
/// non-increasing across the returned history.
fn refine(mut pose: Pose, object: &[Vec3], image: &[Vec2], cam: &CameraIntrinsics) -> (Pose, Vec<f64>) {
    let mut cost = reprojection_cost(&pose, object, image, cam);
    let mut history = vec![cost];

    for _ in 0..MAX_ITERATIONS {
        let mut jtj = Matrix6::<f64>::zeros();
        let mut jtr = Vector6::<f64>::zeros();
        for (p, uv) in object.iter().zip(image) {
            let rp = pose.rotation * p;
            let pc = rp + pose.translation;
            if pc.z <= MIN_DEPTH {
                continue;
            }
            let iz = 1.0 / pc.z;
            let proj = Vec2::new(cam.fx * pc.x * iz + cam.cx, cam.fy * pc.y * iz + cam.cy);
            let res = proj - uv;
            let dproj = SMatrix::<f64, 2, 3>::new(
                cam.fx * iz,
                0.0,
                -cam.fx * pc.x * iz * iz,
                0.0,
                cam.fy * iz,
                -cam.fy * pc.y * iz * iz,
            );
            // d(pc)/d(omega) = -[R p]_x, d(pc)/d(t) = I
            let skew = Matrix3::new(0.0, -rp.z, rp.y, rp.z, 0.0, -rp.x, -rp.y, rp.x, 0.0);
            let mut j = SMatrix::<f64, 2, 6>::zeros();
            j.fixed_view_mut::<2, 3>(0, 0).copy_from(&(dproj * -skew));
            j.fixed_view_mut::<2, 3>(0, 3).copy_from(&dproj);
            jtj += j.transpose() * j;
            jtr += j.transpose() * res;
        }

        let Some(chol) = jtj.cholesky() else { break };
        let mut step = -chol.solve(&jtr);
        if !step.iter().all(|v| v.is_finite()) {
            break;
        }
        if step.norm() < STEP_TOLERANCE {
            break;
        }

        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let candidate = apply_step(&pose, &step);
            let c = reprojection_cost(&candidate, object, image, cam);
            if c <= cost {
                accepted = Some((candidate, c));
                break;
            }
            step *= 0.5;
        }
        let Some((candidate, c)) = accepted else { break };
        let converged = step.norm() < STEP_TOLERANCE;
        pose = candidate;
        cost = c;
        history.push(cost);
        if converged {
            break;
        }
    }
    (pose, history)
}

fn apply_step(pose: &Pose, step: &Vector6<f64>) -> Pose {
    let omega = Vec3::new(step[0], step[1], step[2]);
    let dt = Vec3::new(step[3], step[4], step[5]);
    let dq = UnitQuaternion::from_scaled_axis(omega);
    let q = dq * pose.rotation;
    // renormalize against drift
    let q = UnitQuaternion::new_normalize(q.into_inner());
    Pose::new(q, pose.translation + dt)
}
