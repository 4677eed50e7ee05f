//! CBF constraint assembly and the QP safety filter.
//!
//! For every edge point, every active convex set and every smooth face,
//! one affine row `∇H·J_k u ≥ -γ H` is emitted. The plant is driftless
//! (velocity-controlled kinematics), so the drift term of the barrier
//! condition vanishes and zero input is always admissible while the edge
//! points are inside their sets. The safe control is the Euclidean
//! projection of the nominal proportional control onto those rows.

use nalgebra::{DMatrix, DVector, Vector3};
use thiserror::Error;

use crate::geometry::ConvexSet;
use crate::kinematics::{
    edge_point_jacobian_into, edge_points_from_frames, end_effector_jacobian_from_frames,
    end_effector_position_from_frames, forward_kinematics, Configuration, HomTransform,
    KinematicsError, RobotModel,
};
use crate::qp::{QpSolver, QpStatus};

/// An edge point this far outside its active set aborts constraint
/// assembly. Matches the discrete-time safety tolerance: one Euler step
/// can legally dip a barrier a hair below zero.
pub const UNSAFE_TOL: f64 = 1e-4;

#[derive(Debug, Error)]
pub enum SafetyError {
    #[error("edge point {edge} is unsafe in set {set} (face {face}, barrier {barrier:.6})")]
    EdgePointUnsafe {
        edge: usize,
        set: usize,
        face: usize,
        barrier: f64,
    },
    #[error("CBF rows are infeasible; rows violated at zero input: {0:?}")]
    Infeasible(Vec<RowId>),
    #[error("QP solver hit its iteration limit after {0} iterations")]
    SolverStalled(usize),
    #[error("class-K gain must be positive, got {0}")]
    BadGain(f64),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
}

/// Linear extended class-K function `α(H) = γH`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassKappa {
    gamma: f64,
}

impl ClassKappa {
    pub fn new(gamma: f64) -> Result<Self, SafetyError> {
        if gamma <= 0.0 || !gamma.is_finite() {
            return Err(SafetyError::BadGain(gamma));
        }
        Ok(Self { gamma })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn alpha(&self, h: f64) -> f64 {
        self.gamma * h
    }
}

/// How the filter reacts when the QP has no feasible point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InfeasibilityPolicy {
    /// Stop the run with a report.
    Halt,
    /// Command zero input for this step; safe because the plant is driftless.
    ZeroInput,
}

#[derive(Debug, Clone)]
pub struct SafetyConfig {
    /// Proportional gain of the nominal controller.
    pub k_p: f64,
    pub kappa: ClassKappa,
    /// Damped-least-squares factor mapping task velocity to inputs.
    pub lambda_dls: f64,
    pub infeasibility: InfeasibilityPolicy,
    /// Emit joint-limit CBF rows for arm models.
    pub joint_limit_rows: bool,
}

impl Default for SafetyConfig {
    fn default() -> Self {
        Self {
            k_p: 1.0,
            kappa: ClassKappa::new(1.0).expect("positive"),
            lambda_dls: 0.01,
            infeasibility: InfeasibilityPolicy::Halt,
            joint_limit_rows: true,
        }
    }
}

/// One assembled CBF inequality `coefficients · u ≥ offset`.
#[derive(Debug, Clone)]
pub struct CbfRow {
    pub coefficients: DVector<f64>,
    /// `-γ H(x^(k))`.
    pub offset: f64,
    pub edge: usize,
    pub set: usize,
    pub face: usize,
}

/// Identifier of a QP row for diagnostics and infeasibility reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowId {
    EdgeFace {
        edge: usize,
        set: usize,
        face: usize,
    },
    JointLimit {
        joint: usize,
        upper: bool,
    },
}

/// A convex set labeled with its corridor index.
#[derive(Debug, Clone, Copy)]
pub struct LabeledSet<'a> {
    pub id: usize,
    pub set: &'a ConvexSet,
}

/// The same active set for every edge point.
pub fn uniform_assignment(
    id: usize,
    set: &ConvexSet,
    edge_count: usize,
) -> Vec<Vec<LabeledSet<'_>>> {
    vec![vec![LabeledSet { id, set }]; edge_count]
}

/// Nominal proportional control mapped to input space by damped least
/// squares on the reference-point Jacobian. The task error is taken at
/// the end effector (arm) or the rod center; the rod's nominal angular
/// rate is therefore zero.
pub fn nominal_control(
    model: &RobotModel,
    q: &Configuration,
    waypoint: &Vector3<f64>,
    cfg: &SafetyConfig,
) -> Result<DVector<f64>, SafetyError> {
    let frames = forward_kinematics(model, q)?;
    Ok(nominal_from_frames(model, q, &frames, waypoint, cfg))
}

fn nominal_from_frames(
    model: &RobotModel,
    q: &Configuration,
    frames: &[HomTransform],
    waypoint: &Vector3<f64>,
    cfg: &SafetyConfig,
) -> DVector<f64> {
    let x_ref = end_effector_position_from_frames(model, q, frames);
    let v = (waypoint - x_ref) * cfg.k_p;
    let jac = end_effector_jacobian_from_frames(model, frames);
    let jjt = &jac * jac.transpose();
    if cfg.lambda_dls > 0.0 {
        let damped = jjt + nalgebra::Matrix3::identity() * cfg.lambda_dls * cfg.lambda_dls;
        let y = damped
            .lu()
            .solve(&v)
            .expect("damped Gram matrix is invertible");
        jac.transpose() * y
    } else {
        // λ = 0: plain pseudo-inverse, rank-deficient directions dropped.
        let y = jjt.svd(true, true).solve(&v, 1e-12).expect("SVD solve");
        jac.transpose() * y
    }
}

/// One CBF row per (edge point, active set, face), in lexicographic
/// order. Errors if an edge point is already unsafe beyond [`UNSAFE_TOL`].
pub fn assemble_constraints(
    model: &RobotModel,
    q: &Configuration,
    active_sets: &[Vec<LabeledSet<'_>>],
    kappa: &ClassKappa,
) -> Result<Vec<CbfRow>, SafetyError> {
    let frames = forward_kinematics(model, q)?;
    assemble_from_frames(model, q, &frames, active_sets, kappa)
}

fn assemble_from_frames(
    model: &RobotModel,
    q: &Configuration,
    frames: &[HomTransform],
    active_sets: &[Vec<LabeledSet<'_>>],
    kappa: &ClassKappa,
) -> Result<Vec<CbfRow>, SafetyError> {
    let mut rows = Vec::new();
    visit_rows_from_frames(model, q, frames, active_sets, kappa, |id, coeff, offset| {
        let RowId::EdgeFace { edge, set, face } = id else {
            unreachable!("edge visitor only emits edge rows")
        };
        rows.push(CbfRow {
            coefficients: DVector::from_column_slice(coeff),
            offset,
            edge,
            set,
            face,
        });
    })?;
    Ok(rows)
}

/// Walk every (edge, set, face) row in lexicographic order without
/// materializing per-row vectors; the hot loop writes straight into the
/// QP matrix.
fn visit_rows_from_frames(
    model: &RobotModel,
    q: &Configuration,
    frames: &[HomTransform],
    active_sets: &[Vec<LabeledSet<'_>>],
    kappa: &ClassKappa,
    mut emit: impl FnMut(RowId, &[f64], f64),
) -> Result<(), SafetyError> {
    let points = edge_points_from_frames(model, frames);
    assert_eq!(
        points.len(),
        active_sets.len(),
        "one active-set list per edge point"
    );
    let m = model.input_dim();
    let mut coeff = [0.0f64; 16];
    let coeff = &mut coeff[..m];
    let mut jac = nalgebra::Matrix3xX::zeros(m);
    for (k, (point, sets)) in points.iter().zip(active_sets).enumerate() {
        debug_assert!(!sets.is_empty(), "every edge point needs an active set");
        edge_point_jacobian_into(model, q, frames, k, &mut jac);
        for labeled in sets {
            let mut unsafe_face: Option<(usize, f64)> = None;
            labeled
                .set
                .for_each_face_world(point, |face, value, gradient| {
                    if unsafe_face.is_some() {
                        return;
                    }
                    if value < -UNSAFE_TOL {
                        unsafe_face = Some((face, value));
                        return;
                    }
                    let js = jac.as_slice();
                    for (c, slot) in coeff.iter_mut().enumerate() {
                        let col = &js[c * 3..c * 3 + 3];
                        *slot = gradient.x * col[0] + gradient.y * col[1] + gradient.z * col[2];
                    }
                    emit(
                        RowId::EdgeFace {
                            edge: k,
                            set: labeled.id,
                            face,
                        },
                        coeff,
                        -kappa.alpha(value),
                    );
                });
            if let Some((face, barrier)) = unsafe_face {
                return Err(SafetyError::EdgePointUnsafe {
                    edge: k,
                    set: labeled.id,
                    face,
                    barrier,
                });
            }
        }
    }
    Ok(())
}

/// Joint-limit rows `±θ̇ ≥ -γ·(margin to the limit)` per active joint.
fn visit_joint_limit_rows(
    model: &RobotModel,
    q: &Configuration,
    kappa: &ClassKappa,
    mut emit: impl FnMut(RowId, usize, f64, f64),
) {
    let RobotModel::MobileArm(arm) = model else {
        return;
    };
    for (slot, &joint) in arm.active.iter().enumerate() {
        let theta = q.angles[joint];
        let (lo, hi) = arm.rows[joint].limits;
        emit(
            RowId::JointLimit { joint, upper: true },
            slot,
            -1.0,
            -kappa.alpha(hi - theta),
        );
        emit(
            RowId::JointLimit {
                joint,
                upper: false,
            },
            slot,
            1.0,
            -kappa.alpha(theta - lo),
        );
    }
}

/// Per-step diagnostics emitted by the filter.
#[derive(Debug, Clone)]
pub struct SafetyDiagnostics {
    /// Minimum barrier value per edge point over its active sets.
    pub per_edge_min_h: Vec<f64>,
    /// Total QP rows (edge faces plus joint limits).
    pub rows: usize,
    /// Rows active at the solution.
    pub active_rows: usize,
    /// Wall-clock seconds spent assembling and solving.
    pub solve_time: f64,
    pub qp_iterations: usize,
    /// True when the infeasibility policy replaced the input with zero.
    pub fallback_zero: bool,
}

/// Filter the nominal control through the CBF-QP.
pub fn safe_control(
    model: &RobotModel,
    q: &Configuration,
    active_sets: &[Vec<LabeledSet<'_>>],
    waypoint: &Vector3<f64>,
    cfg: &SafetyConfig,
    solver: &mut QpSolver,
) -> Result<(DVector<f64>, SafetyDiagnostics), SafetyError> {
    let start = now();
    let frames = forward_kinematics(model, q)?;
    let u_p = nominal_from_frames(model, q, &frames, waypoint, cfg);

    let m = model.input_dim();
    let edge_rows: usize = active_sets
        .iter()
        .map(|sets| sets.iter().map(|l| l.set.face_count()).sum::<usize>())
        .sum();
    let joint_rows = match (cfg.joint_limit_rows, model) {
        (true, RobotModel::MobileArm(arm)) => 2 * arm.active.len(),
        _ => 0,
    };
    let c = edge_rows + joint_rows;

    // rows are stored column-wise (m×c) so assembly writes and solver
    // scans both run over contiguous memory
    let mut gt = DMatrix::zeros(m, c);
    let mut h = DVector::zeros(c);
    let mut ids: Vec<RowId> = Vec::with_capacity(c);
    let mut per_edge_min_h = vec![f64::INFINITY; active_sets.len()];
    let gamma = cfg.kappa.gamma();

    {
        let mut i = 0usize;
        visit_rows_from_frames(
            model,
            q,
            &frames,
            active_sets,
            &cfg.kappa,
            |id, coeff, offset| {
                gt.column_mut(i).copy_from_slice(coeff);
                h[i] = offset;
                if let RowId::EdgeFace { edge, .. } = id {
                    let barrier = -offset / gamma;
                    if barrier < per_edge_min_h[edge] {
                        per_edge_min_h[edge] = barrier;
                    }
                }
                ids.push(id);
                i += 1;
            },
        )?;
        if cfg.joint_limit_rows {
            visit_joint_limit_rows(model, q, &cfg.kappa, |id, slot, sign, offset| {
                gt[(slot, i)] = sign;
                h[i] = offset;
                ids.push(id);
                i += 1;
            });
        }
        debug_assert_eq!(i, c);
    }

    let sol = solver.solve_transposed(&u_p, &gt, &h, 10 * (m + c).max(1), 1e-9);
    let solve_time = elapsed_secs(start);

    let mut diag = SafetyDiagnostics {
        per_edge_min_h,
        rows: c,
        active_rows: sol.active_rows.len(),
        solve_time,
        qp_iterations: sol.iterations,
        fallback_zero: false,
    };
    match sol.status {
        QpStatus::Optimal => Ok((sol.u_star, diag)),
        QpStatus::IterationLimit => Err(SafetyError::SolverStalled(sol.iterations)),
        QpStatus::Infeasible => match cfg.infeasibility {
            InfeasibilityPolicy::Halt => {
                let violated = ids
                    .iter()
                    .zip(h.iter())
                    .filter(|(_, off)| **off > 0.0)
                    .map(|(id, _)| *id)
                    .collect();
                Err(SafetyError::Infeasible(violated))
            }
            InfeasibilityPolicy::ZeroInput => {
                diag.fallback_zero = true;
                Ok((DVector::zeros(m), diag))
            }
        },
    }
}

#[cfg(not(target_arch = "wasm32"))]
fn now() -> std::time::Instant {
    std::time::Instant::now()
}

#[cfg(not(target_arch = "wasm32"))]
fn elapsed_secs(start: std::time::Instant) -> f64 {
    start.elapsed().as_secs_f64()
}

#[cfg(target_arch = "wasm32")]
fn now() {}

#[cfg(target_arch = "wasm32")]
fn elapsed_secs(_start: ()) -> f64 {
    0.0
}
