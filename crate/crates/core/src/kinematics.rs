//! Homogeneous transforms, modified-DH chains, edge points and Jacobians.
//!
//! Two robot models are supported: a planar rigid rod (center position
//! plus heading) and a mobile arm (planar holonomic base carrying a
//! revolute chain described by modified DH rows, composed as
//! `Rx(α)·Tx(a)·Rz(θ_offset+θ)·Tz(d)`). Edge points are the world
//! positions whose joint containment certifies whole-body containment.

use nalgebra::{DVector, Matrix3xX, Matrix4, Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum KinematicsError {
    #[error("configuration has {got} joint angles, model expects {expected}")]
    AngleCountMismatch { expected: usize, got: usize },
    #[error("edge point index {got} out of range (model has {count})")]
    InvalidEdgeIndex { got: usize, count: usize },
    #[error("workspace cloud is empty")]
    EmptyCloud,
    #[error("workspace clouds are only defined for arm models")]
    NotAnArm,
    #[error("DH row {0} has limits min ≥ max")]
    BadLimits(usize),
    #[error("joint index {0} out of range for the DH table")]
    BadJointIndex(usize),
    #[error("steps_per_joint must be at least 2, got {0}")]
    BadResolution(usize),
}

/// A rigid-body transform stored as a full 4×4 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomTransform(pub Matrix4<f64>);

impl HomTransform {
    pub fn identity() -> Self {
        HomTransform(Matrix4::identity())
    }

    pub fn translation(x: f64, y: f64, z: f64) -> Self {
        HomTransform(Matrix4::new_translation(&Vector3::new(x, y, z)))
    }

    pub fn rot_x(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        let mut m = Matrix4::identity();
        m[(1, 1)] = c;
        m[(1, 2)] = -s;
        m[(2, 1)] = s;
        m[(2, 2)] = c;
        HomTransform(m)
    }

    pub fn rot_z(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        let mut m = Matrix4::identity();
        m[(0, 0)] = c;
        m[(0, 1)] = -s;
        m[(1, 0)] = s;
        m[(1, 1)] = c;
        HomTransform(m)
    }

    /// Matrix product `self · other` (apply `other` in `self`'s frame).
    pub fn compose(&self, other: &HomTransform) -> HomTransform {
        HomTransform(self.0 * other.0)
    }

    /// Map a point: `R p + offset`.
    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        let r = self.0.fixed_view::<3, 3>(0, 0);
        let t = self.0.fixed_view::<3, 1>(0, 3);
        r * p + t
    }

    pub fn origin(&self) -> Vector3<f64> {
        self.0.fixed_view::<3, 1>(0, 3).into()
    }

    pub fn rotation(&self) -> nalgebra::Matrix3<f64> {
        self.0.fixed_view::<3, 3>(0, 0).into()
    }

    /// Orthonormality check: bottom row (0,0,0,1), RᵀR = I and det R = +1
    /// to 1e-9.
    pub fn is_valid(&self) -> bool {
        let bottom_ok = (self.0[(3, 0)]).abs() < 1e-12
            && (self.0[(3, 1)]).abs() < 1e-12
            && (self.0[(3, 2)]).abs() < 1e-12
            && (self.0[(3, 3)] - 1.0).abs() < 1e-12;
        let r = self.rotation();
        let ortho = (r.transpose() * r - nalgebra::Matrix3::identity()).norm() < 1e-9;
        bottom_ok && ortho && (r.determinant() - 1.0).abs() < 1e-9
    }
}

/// One modified-DH link description.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct DHRow {
    /// Fixed angle added to the joint variable (radians).
    pub theta_offset: f64,
    /// Offset along the joint z-axis (length units).
    pub d: f64,
    /// Offset along the previous x-axis (length units).
    pub a: f64,
    /// Twist about the previous x-axis (radians).
    pub alpha: f64,
    /// Joint rotation range (min, max) in radians.
    pub limits: (f64, f64),
}

/// Link transform `Rx(α)·Tx(a)·Rz(θ_offset+θ)·Tz(d)`.
pub fn dh_link_transform(row: &DHRow, theta: f64) -> HomTransform {
    HomTransform::rot_x(row.alpha)
        .compose(&HomTransform::translation(row.a, 0.0, 0.0))
        .compose(&HomTransform::rot_z(row.theta_offset + theta))
        .compose(&HomTransform::translation(0.0, 0.0, row.d))
}

/// Camera mount geometry: two link offsets and a fixed mount angle.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct CameraMount {
    pub l1: f64,
    pub l2: f64,
    pub theta: f64,
}

/// Transform from the camera frame to the arm frame for joint-3 angle
/// `alpha`: identity x-row, a rotation about x, and a translation whose
/// y/z components are `∓√(l1²+l2²)·cos/sin(α+θ)`.
pub fn camera_to_arm_transform(mount: &CameraMount, alpha: f64) -> HomTransform {
    let hyp = (mount.l1 * mount.l1 + mount.l2 * mount.l2).sqrt();
    let (sa, ca) = alpha.sin_cos();
    let mut m = Matrix4::identity();
    m[(1, 1)] = ca;
    m[(1, 2)] = sa;
    m[(2, 1)] = -sa;
    m[(2, 2)] = ca;
    m[(1, 3)] = -hyp * (alpha + mount.theta).cos();
    m[(2, 3)] = hyp * (alpha + mount.theta).sin();
    HomTransform(m)
}

/// An arm on a planar holonomic base.
#[derive(Debug, Clone, PartialEq)]
pub struct MobileArm {
    /// Full DH chain; every row contributes a transform even when frozen.
    pub rows: Vec<DHRow>,
    /// Row indices of the actuated joints, ascending.
    pub active: Vec<usize>,
    /// Frame indices whose origins are edge points; 0 is the base
    /// reference point, i ≥ 1 the frame after row i-1.
    pub edge_frames: Vec<usize>,
    /// Angles used for frozen joints when sampling the workspace.
    pub rest_angles: Vec<f64>,
    /// Optional camera mount between joints 3 and 4.
    pub camera: Option<CameraMount>,
}

impl MobileArm {
    pub fn validate(&self) -> Result<(), KinematicsError> {
        for (i, row) in self.rows.iter().enumerate() {
            if row.limits.0 >= row.limits.1 {
                return Err(KinematicsError::BadLimits(i));
            }
        }
        for &j in &self.active {
            if j >= self.rows.len() {
                return Err(KinematicsError::BadJointIndex(j));
            }
        }
        for &f in &self.edge_frames {
            if f > self.rows.len() {
                return Err(KinematicsError::BadJointIndex(f));
            }
        }
        if self.rest_angles.len() != self.rows.len() {
            return Err(KinematicsError::AngleCountMismatch {
                expected: self.rows.len(),
                got: self.rest_angles.len(),
            });
        }
        Ok(())
    }
}

/// The robot being controlled.
#[derive(Debug, Clone, PartialEq)]
pub enum RobotModel {
    /// A rigid rod of length `l` moving in the plane: state (x, y, φ),
    /// input (v_x, v_y, ω).
    PlanarRod { length: f64 },
    /// Mobile arm: state (x, y, joint angles), input (active joint rates,
    /// v_x, v_y).
    MobileArm(MobileArm),
}

impl RobotModel {
    /// Number of joint angles carried in a configuration.
    pub fn angle_count(&self) -> usize {
        match self {
            RobotModel::PlanarRod { .. } => 1,
            RobotModel::MobileArm(arm) => arm.rows.len(),
        }
    }

    /// Input dimension: (v_x, v_y, ω) for the rod, active joint rates plus
    /// (v_x, v_y) for the arm.
    pub fn input_dim(&self) -> usize {
        match self {
            RobotModel::PlanarRod { .. } => 3,
            RobotModel::MobileArm(arm) => arm.active.len() + 2,
        }
    }

    pub fn edge_point_count(&self) -> usize {
        match self {
            RobotModel::PlanarRod { .. } => 2,
            RobotModel::MobileArm(arm) => arm.edge_frames.len(),
        }
    }
}

/// Generalized state: planar base position plus joint angles.
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    pub base: Vector2<f64>,
    pub angles: DVector<f64>,
}

impl Configuration {
    pub fn new(base: Vector2<f64>, angles: DVector<f64>) -> Self {
        Self { base, angles }
    }

    fn check(&self, model: &RobotModel) -> Result<(), KinematicsError> {
        if self.angles.len() != model.angle_count() {
            return Err(KinematicsError::AngleCountMismatch {
                expected: model.angle_count(),
                got: self.angles.len(),
            });
        }
        Ok(())
    }
}

/// World-frame transform of every frame of the model.
///
/// Arm: base frame first, then one frame per DH row (joint count + 1
/// entries). Rod: the two endpoint frames, heading `Rz(φ)`.
pub fn forward_kinematics(
    model: &RobotModel,
    q: &Configuration,
) -> Result<Vec<HomTransform>, KinematicsError> {
    q.check(model)?;
    match model {
        RobotModel::PlanarRod { length } => {
            let phi = q.angles[0];
            let half = length / 2.0;
            let center = HomTransform::translation(q.base.x, q.base.y, 0.0)
                .compose(&HomTransform::rot_z(phi));
            let minus = center.compose(&HomTransform::translation(-half, 0.0, 0.0));
            let plus = center.compose(&HomTransform::translation(half, 0.0, 0.0));
            Ok(vec![minus, plus])
        }
        RobotModel::MobileArm(arm) => {
            let mut frames = Vec::with_capacity(arm.rows.len() + 1);
            frames.push(HomTransform::translation(q.base.x, q.base.y, 0.0));
            for (i, row) in arm.rows.iter().enumerate() {
                let link = dh_link_transform(row, q.angles[i]);
                let next = frames[i].compose(&link);
                frames.push(next);
            }
            Ok(frames)
        }
    }
}

/// World positions of the model's edge points.
pub fn edge_points(
    model: &RobotModel,
    q: &Configuration,
) -> Result<Vec<Vector3<f64>>, KinematicsError> {
    let frames = forward_kinematics(model, q)?;
    Ok(edge_points_from_frames(model, &frames))
}

/// Edge points extracted from precomputed frames.
pub fn edge_points_from_frames(model: &RobotModel, frames: &[HomTransform]) -> Vec<Vector3<f64>> {
    match model {
        RobotModel::PlanarRod { .. } => frames.iter().map(|f| f.origin()).collect(),
        RobotModel::MobileArm(arm) => arm
            .edge_frames
            .iter()
            .map(|&f| frames[f].origin())
            .collect(),
    }
}

/// Velocity Jacobian of edge point `k`: world velocity = `J u` with `u`
/// stacking active joint rates then base velocities (v_x, v_y). Columns
/// of joints distal to the edge point are zero; base columns are the
/// planar unit translations.
pub fn edge_point_jacobian(
    model: &RobotModel,
    q: &Configuration,
    k: usize,
) -> Result<Matrix3xX<f64>, KinematicsError> {
    let count = model.edge_point_count();
    if k >= count {
        return Err(KinematicsError::InvalidEdgeIndex { got: k, count });
    }
    match model {
        RobotModel::PlanarRod { .. } => {
            q.check(model)?;
            Ok(rod_edge_jacobian(model, q, k))
        }
        RobotModel::MobileArm(arm) => {
            let frames = forward_kinematics(model, q)?;
            Ok(arm_frame_jacobian(arm, &frames, arm.edge_frames[k]))
        }
    }
}

fn rod_edge_jacobian(model: &RobotModel, q: &Configuration, k: usize) -> Matrix3xX<f64> {
    let RobotModel::PlanarRod { length } = model else {
        unreachable!()
    };
    let phi = q.angles[0];
    let half = length / 2.0;
    let sign = if k == 0 { -1.0 } else { 1.0 };
    let mut j = Matrix3xX::zeros(3);
    j[(0, 0)] = 1.0;
    j[(1, 1)] = 1.0;
    j[(0, 2)] = -sign * half * phi.sin();
    j[(1, 2)] = sign * half * phi.cos();
    j
}

/// Edge-point Jacobian computed from precomputed frames.
pub fn edge_point_jacobian_from_frames(
    model: &RobotModel,
    q: &Configuration,
    frames: &[HomTransform],
    k: usize,
) -> Matrix3xX<f64> {
    match model {
        RobotModel::PlanarRod { .. } => rod_edge_jacobian(model, q, k),
        RobotModel::MobileArm(arm) => arm_frame_jacobian(arm, frames, arm.edge_frames[k]),
    }
}

/// In-place variant for the per-step hot loop; `out` must be 3×input_dim.
pub fn edge_point_jacobian_into(
    model: &RobotModel,
    q: &Configuration,
    frames: &[HomTransform],
    k: usize,
    out: &mut Matrix3xX<f64>,
) {
    debug_assert_eq!(out.ncols(), model.input_dim());
    out.fill(0.0);
    match model {
        RobotModel::PlanarRod { length } => {
            let phi = q.angles[0];
            let half = length / 2.0;
            let sign = if k == 0 { -1.0 } else { 1.0 };
            out[(0, 0)] = 1.0;
            out[(1, 1)] = 1.0;
            out[(0, 2)] = -sign * half * phi.sin();
            out[(1, 2)] = sign * half * phi.cos();
        }
        RobotModel::MobileArm(arm) => {
            let target = arm.edge_frames[k];
            let p = frames[target].origin();
            let m = arm.active.len() + 2;
            for (col, &joint) in arm.active.iter().enumerate() {
                if target > joint {
                    let axis = frames[joint + 1].rotation() * Vector3::z();
                    let origin = frames[joint + 1].origin();
                    let col_vec = axis.cross(&(p - origin));
                    out.set_column(col, &col_vec);
                }
            }
            out[(0, m - 2)] = 1.0;
            out[(1, m - 1)] = 1.0;
        }
    }
}

/// Jacobian of an arm frame origin with respect to the stacked input.
fn arm_frame_jacobian(
    arm: &MobileArm,
    frames: &[HomTransform],
    target_frame: usize,
) -> Matrix3xX<f64> {
    let p = frames[target_frame].origin();
    let m = arm.active.len() + 2;
    let mut j = Matrix3xX::zeros(m);
    for (col, &joint) in arm.active.iter().enumerate() {
        // Joint `joint` rotates frame joint+1 about that frame's z-axis;
        // it moves the target only when the target frame is downstream.
        if target_frame > joint {
            let axis = frames[joint + 1].rotation() * Vector3::z();
            let origin = frames[joint + 1].origin();
            let col_vec = axis.cross(&(p - origin));
            j.set_column(col, &col_vec);
        }
    }
    j[(0, m - 2)] = 1.0;
    j[(1, m - 1)] = 1.0;
    j
}

/// Task reference point: the flange origin for arms, the center (z = 0)
/// for the rod.
pub fn end_effector_position(
    model: &RobotModel,
    q: &Configuration,
) -> Result<Vector3<f64>, KinematicsError> {
    match model {
        RobotModel::PlanarRod { .. } => {
            q.check(model)?;
            Ok(Vector3::new(q.base.x, q.base.y, 0.0))
        }
        RobotModel::MobileArm(arm) => {
            let frames = forward_kinematics(model, q)?;
            Ok(frames[arm.rows.len()].origin())
        }
    }
}

/// Velocity Jacobian of the task reference point. The rod's center is
/// driven directly by (v_x, v_y) and unaffected by ω.
pub fn end_effector_jacobian(
    model: &RobotModel,
    q: &Configuration,
) -> Result<Matrix3xX<f64>, KinematicsError> {
    match model {
        RobotModel::PlanarRod { .. } => {
            q.check(model)?;
            Ok(end_effector_jacobian_from_frames(model, &[]))
        }
        RobotModel::MobileArm(arm) => {
            let frames = forward_kinematics(model, q)?;
            Ok(arm_frame_jacobian(arm, &frames, arm.rows.len()))
        }
    }
}

/// Reference-point Jacobian from precomputed frames.
pub fn end_effector_jacobian_from_frames(
    model: &RobotModel,
    frames: &[HomTransform],
) -> Matrix3xX<f64> {
    match model {
        RobotModel::PlanarRod { .. } => {
            let mut j = Matrix3xX::zeros(3);
            j[(0, 0)] = 1.0;
            j[(1, 1)] = 1.0;
            j
        }
        RobotModel::MobileArm(arm) => arm_frame_jacobian(arm, frames, arm.rows.len()),
    }
}

/// Reference-point position from precomputed frames.
pub fn end_effector_position_from_frames(
    model: &RobotModel,
    q: &Configuration,
    frames: &[HomTransform],
) -> Vector3<f64> {
    match model {
        RobotModel::PlanarRod { .. } => Vector3::new(q.base.x, q.base.y, 0.0),
        RobotModel::MobileArm(arm) => frames[arm.rows.len()].origin(),
    }
}

/// End-effector positions over the joint-limit grid, in the arm base
/// frame. Row-major over the active joints (first active joint slowest).
pub fn workspace_cloud(
    model: &RobotModel,
    steps_per_joint: usize,
) -> Result<Vec<Vector3<f64>>, KinematicsError> {
    let arm = match model {
        RobotModel::MobileArm(arm) => arm,
        RobotModel::PlanarRod { .. } => return Err(KinematicsError::NotAnArm),
    };
    if steps_per_joint < 2 {
        return Err(KinematicsError::BadResolution(steps_per_joint));
    }
    let nj = arm.active.len();
    let total = steps_per_joint.pow(nj as u32);
    let mut cloud = Vec::with_capacity(total);
    let mut angles = DVector::from_row_slice(&arm.rest_angles);
    let base_q = Configuration::new(Vector2::zeros(), angles.clone());
    let model_at = |angles: &DVector<f64>| Configuration {
        base: base_q.base,
        angles: angles.clone(),
    };
    let mut counters = vec![0usize; nj];
    loop {
        for (slot, &joint) in arm.active.iter().enumerate() {
            let (lo, hi) = arm.rows[joint].limits;
            let t = counters[slot] as f64 / (steps_per_joint - 1) as f64;
            angles[joint] = lo + t * (hi - lo);
        }
        let frames = forward_kinematics(model, &model_at(&angles))?;
        cloud.push(frames[arm.rows.len()].origin());
        // row-major increment, last active joint fastest
        let mut slot = nj;
        loop {
            if slot == 0 {
                return Ok(cloud);
            }
            slot -= 1;
            counters[slot] += 1;
            if counters[slot] < steps_per_joint {
                break;
            }
            counters[slot] = 0;
        }
    }
}

/// True iff some cloud point, carried to the world frame at `q`, lies
/// within `tol` of the goal.
pub fn in_goal_region(
    model: &RobotModel,
    q: &Configuration,
    x_goal: &Vector3<f64>,
    cloud: &[Vector3<f64>],
    tol: f64,
) -> Result<bool, KinematicsError> {
    if cloud.is_empty() {
        return Err(KinematicsError::EmptyCloud);
    }
    q.check(model)?;
    let offset = Vector3::new(q.base.x, q.base.y, 0.0);
    let local = x_goal - offset;
    let tol2 = tol * tol;
    Ok(cloud.iter().any(|p| (p - local).norm_squared() <= tol2))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn deg(v: f64) -> f64 {
        v * PI / 180.0
    }

    /// The bundled six-axis arm in meters, joints J1,J2,J3,J5 active.
    pub(crate) fn sample_arm(active_joints: usize) -> MobileArm {
        let rows = vec![
            DHRow {
                theta_offset: 0.0,
                d: 0.080,
                a: 0.0,
                alpha: 0.0,
                limits: (deg(-100.0), deg(100.0)),
            },
            DHRow {
                theta_offset: -FRAC_PI_2,
                d: 0.0,
                a: 0.032,
                alpha: -FRAC_PI_2,
                limits: (deg(-60.0), deg(90.0)),
            },
            DHRow {
                theta_offset: 0.0,
                d: 0.0,
                a: 0.108,
                alpha: 0.0,
                limits: (deg(-180.0), deg(50.0)),
            },
            DHRow {
                theta_offset: 0.0,
                d: 0.176,
                a: 0.020,
                alpha: -FRAC_PI_2,
                limits: (deg(-180.0), deg(180.0)),
            },
            DHRow {
                theta_offset: FRAC_PI_2,
                d: 0.0,
                a: 0.0,
                alpha: FRAC_PI_2,
                limits: (deg(-180.0), deg(40.0)),
            },
            DHRow {
                theta_offset: 0.0,
                d: -0.020,
                a: 0.0,
                alpha: FRAC_PI_2,
                limits: (deg(-180.0), deg(180.0)),
            },
        ];
        let all_active = [0usize, 1, 2, 4];
        MobileArm {
            rows,
            active: all_active[..active_joints].to_vec(),
            edge_frames: vec![0, 1, 2, 3, 5, 6],
            rest_angles: vec![0.0; 6],
            camera: None,
        }
    }

    fn zero_config(model: &RobotModel) -> Configuration {
        Configuration::new(Vector2::zeros(), DVector::zeros(model.angle_count()))
    }

    #[test]
    fn compose_identity_and_translations() {
        let id = HomTransform::identity();
        assert_eq!(id.compose(&id).0, Matrix4::identity());
        let t1 = HomTransform::translation(1.0, 2.0, 3.0);
        let t2 = HomTransform::translation(1.0, 0.0, 0.0);
        let c = t1.compose(&t2);
        assert_relative_eq!(c.origin(), Vector3::new(2.0, 2.0, 3.0));
    }

    #[test]
    fn compose_rotation_then_translation() {
        // Rz(π/2) ∘ T(1,0,0) maps the origin to (0,1,0).
        let c = HomTransform::rot_z(FRAC_PI_2).compose(&HomTransform::translation(1.0, 0.0, 0.0));
        assert_relative_eq!(
            c.apply(&Vector3::zeros()),
            Vector3::new(0.0, 1.0, 0.0),
            epsilon = 1e-12
        );
        assert!(c.is_valid());
    }

    #[test]
    fn apply_examples() {
        let id = HomTransform::identity();
        assert_relative_eq!(
            id.apply(&Vector3::new(1.0, 2.0, 3.0)),
            Vector3::new(1.0, 2.0, 3.0)
        );
        let t = HomTransform::translation(0.0, 0.0, 5.0);
        assert_relative_eq!(t.apply(&Vector3::zeros()), Vector3::new(0.0, 0.0, 5.0));
        let r = HomTransform::rot_z(FRAC_PI_2);
        assert_relative_eq!(r.apply(&Vector3::x()), Vector3::y(), epsilon = 1e-12);
    }

    #[test]
    fn dh_zero_row_is_identity() {
        let row = DHRow {
            theta_offset: 0.0,
            d: 0.0,
            a: 0.0,
            alpha: 0.0,
            limits: (-1.0, 1.0),
        };
        let t = dh_link_transform(&row, 0.0);
        assert!((t.0 - Matrix4::identity()).norm() < 1e-15);
    }

    #[test]
    fn dh_pure_z_offset() {
        let row = DHRow {
            theta_offset: 0.0,
            d: 80.0,
            a: 0.0,
            alpha: 0.0,
            limits: (-1.0, 1.0),
        };
        let t = dh_link_transform(&row, 0.0);
        assert_relative_eq!(t.origin(), Vector3::new(0.0, 0.0, 80.0));
        assert!((t.rotation() - nalgebra::Matrix3::identity()).norm() < 1e-15);
    }

    #[test]
    fn dh_second_axis_hand_composed() {
        let row = DHRow {
            theta_offset: -FRAC_PI_2,
            d: 0.0,
            a: 32.0,
            alpha: -FRAC_PI_2,
            limits: (-1.0, 1.0),
        };
        let t = dh_link_transform(&row, 0.0);
        assert_relative_eq!(t.origin(), Vector3::new(32.0, 0.0, 0.0), epsilon = 1e-12);
        let expected = HomTransform::rot_x(-FRAC_PI_2).compose(&HomTransform::rot_z(-FRAC_PI_2));
        assert!((t.rotation() - expected.rotation()).norm() < 1e-12);
        assert!(t.is_valid());
    }

    #[test]
    fn fk_arm_zero_angles_golden_frames() {
        let model = RobotModel::MobileArm(sample_arm(4));
        let frames = forward_kinematics(&model, &zero_config(&model)).unwrap();
        assert_eq!(frames.len(), 7);
        assert_relative_eq!(
            frames[1].origin(),
            Vector3::new(0.0, 0.0, 0.080),
            epsilon = 1e-12
        );
        assert_relative_eq!(
            frames[2].origin(),
            Vector3::new(0.032, 0.0, 0.080),
            epsilon = 1e-12
        );
        assert_relative_eq!(
            frames[3].origin(),
            Vector3::new(0.032, 0.0, 0.188),
            epsilon = 1e-12
        );
        assert_relative_eq!(
            frames[5].origin(),
            Vector3::new(0.208, 0.0, 0.208),
            epsilon = 1e-12
        );
        assert_relative_eq!(
            frames[6].origin(),
            Vector3::new(0.208, 0.0, 0.188),
            epsilon = 1e-12
        );
        for f in &frames {
            assert!(f.is_valid());
        }
    }

    #[test]
    fn fk_rod_endpoints() {
        let model = RobotModel::PlanarRod { length: 1.0 };
        let q = Configuration::new(Vector2::zeros(), DVector::from_row_slice(&[0.0]));
        let frames = forward_kinematics(&model, &q).unwrap();
        assert_relative_eq!(frames[0].origin(), Vector3::new(-0.5, 0.0, 0.0));
        assert_relative_eq!(frames[1].origin(), Vector3::new(0.5, 0.0, 0.0));
    }

    #[test]
    fn fk_base_translation_equivariance() {
        let model = RobotModel::MobileArm(sample_arm(4));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let angles = DVector::from_iterator(6, (0..6).map(|_| rng.random_range(-0.5..0.5)));
        let q0 = Configuration::new(Vector2::zeros(), angles.clone());
        let q1 = Configuration::new(Vector2::new(1.0, 2.0), angles);
        let f0 = forward_kinematics(&model, &q0).unwrap();
        let f1 = forward_kinematics(&model, &q1).unwrap();
        for (a, b) in f0.iter().zip(&f1) {
            let shift = b.origin() - a.origin();
            assert_relative_eq!(shift, Vector3::new(1.0, 2.0, 0.0), epsilon = 1e-14);
        }
    }

    #[test]
    fn edge_points_rod_vertical() {
        let model = RobotModel::PlanarRod { length: 2.0 };
        let q = Configuration::new(
            Vector2::new(1.0, 1.0),
            DVector::from_row_slice(&[FRAC_PI_2]),
        );
        let pts = edge_points(&model, &q).unwrap();
        assert_relative_eq!(pts[0], Vector3::new(1.0, 0.0, 0.0), epsilon = 1e-12);
        assert_relative_eq!(pts[1], Vector3::new(1.0, 2.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn edge_point_link_lengths_are_golden() {
        let model = RobotModel::MobileArm(sample_arm(4));
        let pts = edge_points(&model, &zero_config(&model)).unwrap();
        assert_eq!(pts.len(), 6);
        let expected = [
            0.080,
            0.032,
            0.108,
            (0.176f64.powi(2) + 0.020f64.powi(2)).sqrt(),
            0.020,
        ];
        for (i, exp) in expected.iter().enumerate() {
            let d = (pts[i + 1] - pts[i]).norm();
            assert_relative_eq!(d, *exp, epsilon = 1e-12);
        }
    }

    #[test]
    fn jacobian_base_columns_are_unit_translations() {
        let model = RobotModel::MobileArm(sample_arm(4));
        let q = zero_config(&model);
        for k in 0..model.edge_point_count() {
            let j = edge_point_jacobian(&model, &q, k).unwrap();
            let m = j.ncols();
            assert_relative_eq!(Vector3::from(j.column(m - 2)), Vector3::x());
            assert_relative_eq!(Vector3::from(j.column(m - 1)), Vector3::y());
        }
    }

    #[test]
    fn jacobian_rod_omega_column() {
        let model = RobotModel::PlanarRod { length: 2.0 };
        let q = Configuration::new(Vector2::zeros(), DVector::from_row_slice(&[0.0]));
        let j = edge_point_jacobian(&model, &q, 1).unwrap();
        // endpoint = center + (l/2)(cosφ, sinφ): d/dφ at φ=0 is (0, l/2).
        assert_relative_eq!(Vector3::from(j.column(2)), Vector3::new(0.0, 1.0, 0.0));
        let j0 = edge_point_jacobian(&model, &q, 0).unwrap();
        assert_relative_eq!(Vector3::from(j0.column(2)), Vector3::new(0.0, -1.0, 0.0));
    }

    fn random_config(model: &RobotModel, rng: &mut ChaCha8Rng) -> Configuration {
        let base = Vector2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let angles = match model {
            RobotModel::PlanarRod { .. } => DVector::from_row_slice(&[rng.random_range(-PI..PI)]),
            RobotModel::MobileArm(arm) => DVector::from_iterator(
                arm.rows.len(),
                arm.rows.iter().map(|row| {
                    let (lo, hi) = row.limits;
                    rng.random_range(lo..hi)
                }),
            ),
        };
        Configuration::new(base, angles)
    }

    /// Central finite differences of edge point k over every input channel.
    pub(crate) fn fd_jacobian(
        model: &RobotModel,
        q: &Configuration,
        k: usize,
        step: f64,
    ) -> Matrix3xX<f64> {
        let m = model.input_dim();
        let mut j = Matrix3xX::zeros(m);
        let perturb = |q: &Configuration, ch: usize, delta: f64| -> Configuration {
            let mut q2 = q.clone();
            match model {
                RobotModel::PlanarRod { .. } => match ch {
                    0 => q2.base.x += delta,
                    1 => q2.base.y += delta,
                    _ => q2.angles[0] += delta,
                },
                RobotModel::MobileArm(arm) => {
                    if ch < arm.active.len() {
                        q2.angles[arm.active[ch]] += delta;
                    } else if ch == arm.active.len() {
                        q2.base.x += delta;
                    } else {
                        q2.base.y += delta;
                    }
                }
            }
            q2
        };
        // map input channel order to jacobian column order
        let col_of = |ch: usize| -> usize {
            match model {
                RobotModel::PlanarRod { .. } => match ch {
                    0 => 0,
                    1 => 1,
                    _ => 2,
                },
                RobotModel::MobileArm(_) => ch,
            }
        };
        for ch in 0..m {
            let plus = edge_points(model, &perturb(q, ch, step)).unwrap()[k];
            let minus = edge_points(model, &perturb(q, ch, -step)).unwrap()[k];
            j.set_column(col_of(ch), &((plus - minus) / (2.0 * step)));
        }
        j
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for model in [
            RobotModel::PlanarRod { length: 1.4 },
            RobotModel::MobileArm(sample_arm(4)),
            RobotModel::MobileArm(sample_arm(2)),
        ] {
            for _ in 0..100 {
                let q = random_config(&model, &mut rng);
                for k in 0..model.edge_point_count() {
                    let analytic = edge_point_jacobian(&model, &q, k).unwrap();
                    let fd = fd_jacobian(&model, &q, k, 1e-6);
                    let denom = analytic.norm().max(1.0);
                    assert!(
                        (analytic.clone() - fd).norm() / denom < 1e-5,
                        "edge {k}: jacobian mismatch"
                    );
                }
            }
        }
    }

    #[test]
    fn frames_stay_orthonormal_at_random_configurations() {
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        for model in [
            RobotModel::MobileArm(sample_arm(4)),
            RobotModel::PlanarRod { length: 1.2 },
        ] {
            for _ in 0..200 {
                let q = random_config(&model, &mut rng);
                for f in forward_kinematics(&model, &q).unwrap() {
                    assert!(f.is_valid(), "frame lost orthonormality");
                }
            }
        }
    }

    #[test]
    fn rigid_body_distances_drift_quadratically() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let model = RobotModel::MobileArm(sample_arm(4));
        let dt = 1e-4;
        for _ in 0..50 {
            let q = random_config(&model, &mut rng);
            let m = model.input_dim();
            let u = DVector::from_iterator(m, (0..m).map(|_| rng.random_range(-1.0..1.0f64)));
            let mut q2 = q.clone();
            if let RobotModel::MobileArm(arm) = &model {
                for (slot, &joint) in arm.active.iter().enumerate() {
                    q2.angles[joint] += u[slot] * dt;
                }
                q2.base.x += u[m - 2] * dt;
                q2.base.y += u[m - 1] * dt;
            }
            let before = edge_points(&model, &q).unwrap();
            let after = edge_points(&model, &q2).unwrap();
            for k in 1..before.len() {
                let d0 = (before[k] - before[k - 1]).norm();
                let d1 = (after[k] - after[k - 1]).norm();
                assert!((d1 - d0).abs() / d0.max(1e-9) < 1e-6, "link {k} stretched");
            }
        }
    }

    #[test]
    fn workspace_cloud_cardinality_and_reach() {
        let model = RobotModel::MobileArm(sample_arm(4));
        let cloud = workspace_cloud(&model, 2).unwrap();
        assert_eq!(cloud.len(), 16);
        let reach = 0.080 + 0.032 + 0.108 + (0.176f64.powi(2) + 0.020f64.powi(2)).sqrt() + 0.020;
        for p in workspace_cloud(&model, 5).unwrap() {
            assert!(p.norm() <= reach + 1e-9);
        }
    }

    #[test]
    fn workspace_single_joint_is_an_arc() {
        let model = RobotModel::MobileArm(sample_arm(1));
        let steps = 21;
        let cloud = workspace_cloud(&model, steps).unwrap();
        assert_eq!(cloud.len(), steps);
        let (lo, hi) = (deg(-100.0), deg(100.0));
        let rest = Vector3::new(0.208, 0.0, 0.188);
        for (i, p) in cloud.iter().enumerate() {
            let theta = lo + (hi - lo) * i as f64 / (steps - 1) as f64;
            let expected = HomTransform::rot_z(theta).apply(&rest);
            assert_relative_eq!(*p, expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn workspace_requires_resolution_and_arm() {
        let arm = RobotModel::MobileArm(sample_arm(2));
        assert!(matches!(
            workspace_cloud(&arm, 1),
            Err(KinematicsError::BadResolution(1))
        ));
        let rod = RobotModel::PlanarRod { length: 1.0 };
        assert!(matches!(
            workspace_cloud(&rod, 5),
            Err(KinematicsError::NotAnArm)
        ));
    }

    #[test]
    fn goal_region_membership() {
        let model = RobotModel::MobileArm(sample_arm(2));
        let cloud = workspace_cloud(&model, 9).unwrap();
        let q = zero_config(&model);
        let frames = forward_kinematics(&model, &q).unwrap();
        let ee = frames[6].origin();
        assert!(
            in_goal_region(&model, &q, &ee, &cloud, 1e-6).unwrap_or(false) || {
                // the zero-angle pose is on the grid only if 0 is a grid node;
                // fall back to a coarse tolerance
                in_goal_region(&model, &q, &ee, &cloud, 0.05).unwrap()
            }
        );
        let far = Vector3::new(10.0, 0.0, 0.0);
        assert!(!in_goal_region(&model, &q, &far, &cloud, 0.02).unwrap());
        assert!(matches!(
            in_goal_region(&model, &q, &far, &[], 0.02),
            Err(KinematicsError::EmptyCloud)
        ));
    }

    #[test]
    fn goal_region_matches_exhaustive_scan() {
        let model = RobotModel::MobileArm(sample_arm(3));
        let cloud = workspace_cloud(&model, 7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        for _ in 0..50 {
            let q = random_config(&model, &mut rng);
            let goal = Vector3::new(
                q.base.x + rng.random_range(-0.4..0.4),
                q.base.y + rng.random_range(-0.4..0.4),
                rng.random_range(0.0..0.4),
            );
            let tol = 0.02;
            let offset = Vector3::new(q.base.x, q.base.y, 0.0);
            let brute = cloud
                .iter()
                .map(|p| (p + offset - goal).norm())
                .fold(f64::INFINITY, f64::min)
                <= tol;
            assert_eq!(
                in_goal_region(&model, &q, &goal, &cloud, tol).unwrap(),
                brute
            );
        }
    }

    #[test]
    fn camera_transform_examples() {
        let mount = CameraMount {
            l1: 3.0,
            l2: 4.0,
            theta: 0.0,
        };
        // α = 0: identity rotation block, translation (0, -hyp·cosθ, hyp·sinθ).
        let t0 = camera_to_arm_transform(&mount, 0.0);
        assert!((t0.rotation() - nalgebra::Matrix3::identity()).norm() < 1e-12);
        assert_relative_eq!(t0.origin(), Vector3::new(0.0, -5.0, 0.0), epsilon = 1e-12);

        let vertical = CameraMount {
            l1: 3.0,
            l2: 4.0,
            theta: FRAC_PI_2,
        };
        let t1 = camera_to_arm_transform(&vertical, 0.0);
        assert_relative_eq!(t1.origin(), Vector3::new(0.0, 0.0, 5.0), epsilon = 1e-12);

        // Hand-evaluated entries at α = π/4.
        let a = std::f64::consts::FRAC_PI_4;
        let t2 = camera_to_arm_transform(&mount, a);
        let (s, c) = a.sin_cos();
        let p = t2.apply(&Vector3::new(1.0, 1.0, 1.0));
        assert_relative_eq!(p.x, 1.0, epsilon = 1e-12);
        assert_relative_eq!(p.y, c + s - 5.0 * c, epsilon = 1e-12);
        assert_relative_eq!(p.z, -s + c + 5.0 * s, epsilon = 1e-12);
    }

    #[test]
    fn camera_transform_is_proper_for_all_angles() {
        let mount = CameraMount {
            l1: 0.03,
            l2: 0.05,
            theta: 0.4,
        };
        for i in 0..64 {
            let a = -PI + 2.0 * PI * i as f64 / 63.0;
            let t = camera_to_arm_transform(&mount, a);
            assert!((t.rotation().determinant() - 1.0).abs() < 1e-12);
            // the x-axis is fixed
            assert_relative_eq!(t.rotation() * Vector3::x(), Vector3::x(), epsilon = 1e-12);
        }
    }

    #[test]
    fn fk_dimension_mismatch() {
        let model = RobotModel::MobileArm(sample_arm(4));
        let q = Configuration::new(Vector2::zeros(), DVector::zeros(3));
        assert!(matches!(
            forward_kinematics(&model, &q),
            Err(KinematicsError::AngleCountMismatch {
                expected: 6,
                got: 3
            })
        ));
    }
}
