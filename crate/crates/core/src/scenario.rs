//! JSON scenario schema and loading.
//!
//! One scenario file describes a full experiment: the robot, the corridor
//! (an explicit set list or an occupancy-grid reference), the start
//! configuration, the goal and the control block. Units are meters,
//! radians and seconds throughout.

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector, Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corridor::{grid_maze_decompose, Corridor, CorridorError, OccupancyGrid};
use crate::geometry::{ConvexSet, GeometryError};
use crate::kinematics::{
    CameraMount, Configuration, DHRow, KinematicsError, MobileArm, RobotModel,
};
use crate::safety::{ClassKappa, InfeasibilityPolicy, SafetyConfig, SafetyError};
use crate::sim::SimConfig;

/// Joint rows eligible for actuation, in actuation order (J1, J2, J3, J5;
/// J4 and J6 only adjust the end-effector pose and stay frozen).
pub const ACTIVE_JOINT_CANDIDATES: [usize; 4] = [0, 1, 2, 4];

/// Default edge-point frames: base reference point plus the central
/// points of J1, J2, J3, J5 and J6.
pub const DEFAULT_EDGE_FRAMES: [usize; 6] = [0, 1, 2, 3, 5, 6];

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("scenario field {field}: {message}")]
    Invalid { field: String, message: String },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Corridor(#[from] CorridorError),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error(transparent)]
    Safety(#[from] SafetyError),
}

fn invalid(field: &str, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid {
        field: field.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum RobotSpec {
    PlanarRod {
        length: f64,
    },
    MobileArm {
        dh: Vec<DHRow>,
        /// How many of J1, J2, J3, J5 rotate (1..=4).
        active_joints: usize,
        /// Frame indices used as edge points; 0 is the base point.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        edge_point_frames: Option<Vec<usize>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        camera_mount: Option<CameraMount>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SetSpec {
    Box {
        min: Vec<f64>,
        max: Vec<f64>,
    },
    Polytope {
        #[serde(rename = "A")]
        a: Vec<Vec<f64>>,
        b: Vec<f64>,
    },
    Ellipsoid {
        center: Vec<f64>,
        shape: Vec<Vec<f64>>,
    },
}

impl SetSpec {
    pub fn build(&self) -> Result<ConvexSet, ScenarioError> {
        match self {
            SetSpec::Box { min, max } => Ok(ConvexSet::axis_box(min, max)?),
            SetSpec::Polytope { a, b } => {
                let rows = a.len();
                let cols = a.first().map(|r| r.len()).unwrap_or(0);
                if rows == 0 || cols == 0 {
                    return Err(invalid("corridor.sets", "polytope must have rows"));
                }
                if a.iter().any(|r| r.len() != cols) {
                    return Err(invalid("corridor.sets", "ragged polytope row matrix"));
                }
                let mat = DMatrix::from_fn(rows, cols, |i, j| a[i][j]);
                Ok(ConvexSet::polytope(mat, DVector::from_row_slice(b))?)
            }
            SetSpec::Ellipsoid { center, shape } => {
                let n = center.len();
                if shape.len() != n || shape.iter().any(|r| r.len() != n) {
                    return Err(invalid("corridor.sets", "ellipsoid shape must be n×n"));
                }
                let mat = DMatrix::from_fn(n, n, |i, j| shape[i][j]);
                Ok(ConvexSet::ellipsoid(DVector::from_row_slice(center), mat)?)
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum CorridorSpec {
    /// Explicit ordered set list.
    Explicit { sets: Vec<SetSpec> },
    /// Occupancy-grid file decomposed into boxes at load time. The path
    /// is resolved relative to the scenario file.
    Grid {
        grid_file: String,
        cell_size: f64,
        start_cell: [usize; 2],
        goal_cell: [usize; 2],
    },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct StartSpec {
    pub base: [f64; 2],
    pub angles: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum InfeasibilitySpec {
    Halt,
    ZeroInput,
}

impl From<InfeasibilitySpec> for InfeasibilityPolicy {
    fn from(v: InfeasibilitySpec) -> Self {
        match v {
            InfeasibilitySpec::Halt => InfeasibilityPolicy::Halt,
            InfeasibilitySpec::ZeroInput => InfeasibilityPolicy::ZeroInput,
        }
    }
}

fn default_k_p() -> f64 {
    1.0
}
fn default_gamma() -> f64 {
    1.0
}
fn default_lambda_dls() -> f64 {
    0.01
}
fn default_dt() -> f64 {
    1e-3
}
fn default_max_steps() -> usize {
    200_000
}
fn default_margin() -> f64 {
    0.05
}
fn default_goal_tol() -> f64 {
    0.02
}
fn default_true() -> bool {
    true
}
fn default_infeasibility() -> InfeasibilitySpec {
    InfeasibilitySpec::Halt
}
fn default_record_every() -> usize {
    10
}
fn default_workspace_steps() -> usize {
    9
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ControlSpec {
    #[serde(default = "default_k_p")]
    pub k_p: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_lambda_dls")]
    pub lambda_dls: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    #[serde(default = "default_margin")]
    pub margin: f64,
    #[serde(default = "default_goal_tol")]
    pub goal_tol: f64,
    #[serde(default = "default_true")]
    pub joint_limit_cbf: bool,
    #[serde(default = "default_infeasibility")]
    pub infeasibility: InfeasibilitySpec,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    #[serde(default = "default_workspace_steps")]
    pub workspace_steps: usize,
}

impl Default for ControlSpec {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields defaulted")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub robot: RobotSpec,
    pub corridor: CorridorSpec,
    pub start: StartSpec,
    pub goal: [f64; 3],
    #[serde(default)]
    pub control: ControlSpec,
    /// Reserved for randomized harnesses; the simulation itself is
    /// deterministic.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// A scenario resolved into runnable pieces.
#[derive(Debug, Clone)]
pub struct LoadedScenario {
    pub scenario: Scenario,
    pub model: RobotModel,
    pub corridor: Corridor,
    pub start: Configuration,
    pub sim: SimConfig,
}

impl LoadedScenario {
    pub fn goal(&self) -> Vector3<f64> {
        Vector3::new(
            self.scenario.goal[0],
            self.scenario.goal[1],
            self.scenario.goal[2],
        )
    }
}

/// Parse and resolve a scenario file.
pub fn load_scenario(path: &Path) -> Result<LoadedScenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let scenario: Scenario = serde_json::from_str(&text).map_err(|e| ScenarioError::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    resolve_scenario(scenario, path.parent().unwrap_or_else(|| Path::new(".")))
}

/// Resolve an in-memory scenario; `base_dir` anchors grid file paths.
pub fn resolve_scenario(
    scenario: Scenario,
    base_dir: &Path,
) -> Result<LoadedScenario, ScenarioError> {
    validate_numbers(&scenario)?;
    let model = build_model(&scenario)?;
    let corridor = build_corridor(&scenario, base_dir)?;
    let start = build_start(&scenario, &model)?;
    let sim = build_sim_config(&scenario)?;
    Ok(LoadedScenario {
        scenario,
        model,
        corridor,
        start,
        sim,
    })
}

fn validate_numbers(s: &Scenario) -> Result<(), ScenarioError> {
    let c = &s.control;
    if !(c.k_p.is_finite() && c.k_p > 0.0) {
        return Err(invalid("control.k_p", "must be finite and positive"));
    }
    if !(c.gamma.is_finite() && c.gamma > 0.0) {
        return Err(invalid("control.gamma", "must be finite and positive"));
    }
    if !(c.lambda_dls.is_finite() && c.lambda_dls >= 0.0) {
        return Err(invalid("control.lambda_dls", "must be finite and ≥ 0"));
    }
    if !(c.dt.is_finite() && c.dt > 0.0) {
        return Err(invalid("control.dt", "must be finite and positive"));
    }
    if c.max_steps == 0 {
        return Err(invalid("control.max_steps", "must be at least 1"));
    }
    if !(c.margin.is_finite() && (0.0..1.0).contains(&c.margin)) {
        return Err(invalid("control.margin", "must lie in [0, 1)"));
    }
    if !(c.goal_tol.is_finite() && c.goal_tol > 0.0) {
        return Err(invalid("control.goal_tol", "must be finite and positive"));
    }
    if c.record_every == 0 {
        return Err(invalid("control.record_every", "must be at least 1"));
    }
    if c.workspace_steps < 2 {
        return Err(invalid("control.workspace_steps", "must be at least 2"));
    }
    if s.goal.iter().any(|v| !v.is_finite()) {
        return Err(invalid("goal", "must be finite"));
    }
    if s.start.base.iter().any(|v| !v.is_finite()) || s.start.angles.iter().any(|v| !v.is_finite())
    {
        return Err(invalid("start", "must be finite"));
    }
    Ok(())
}

fn build_model(s: &Scenario) -> Result<RobotModel, ScenarioError> {
    match &s.robot {
        RobotSpec::PlanarRod { length } => {
            if !(length.is_finite() && *length > 0.0) {
                return Err(invalid("robot.length", "must be finite and positive"));
            }
            Ok(RobotModel::PlanarRod { length: *length })
        }
        RobotSpec::MobileArm {
            dh,
            active_joints,
            edge_point_frames,
            camera_mount,
        } => {
            if dh.is_empty() {
                return Err(invalid("robot.dh", "needs at least one row"));
            }
            if !(1..=4).contains(active_joints) {
                return Err(invalid("robot.active_joints", "must be 1..=4"));
            }
            if let Some(mount) = camera_mount {
                if mount.l1 * mount.l1 + mount.l2 * mount.l2 <= 0.0 {
                    return Err(invalid("robot.camera_mount", "l1² + l2² must be positive"));
                }
            }
            let arm = arm_variant(
                dh.clone(),
                *active_joints,
                edge_point_frames.clone(),
                s.start.angles.clone(),
                *camera_mount,
            )?;
            Ok(RobotModel::MobileArm(arm))
        }
    }
}

/// Build an arm with the first `active_joints` of J1, J2, J3, J5 actuated.
/// Without an explicit edge list the default covers base + J1..J6; grid
/// benchmarks truncate it to one frame past the last active joint.
pub fn arm_variant(
    dh: Vec<DHRow>,
    active_joints: usize,
    edge_point_frames: Option<Vec<usize>>,
    rest_angles: Vec<f64>,
    camera: Option<CameraMount>,
) -> Result<MobileArm, ScenarioError> {
    let active: Vec<usize> = ACTIVE_JOINT_CANDIDATES
        .iter()
        .copied()
        .filter(|&j| j < dh.len())
        .take(active_joints)
        .collect();
    if active.len() != active_joints {
        return Err(invalid(
            "robot.active_joints",
            "DH table too short for the requested joint count",
        ));
    }
    let edge_frames = edge_point_frames.unwrap_or_else(|| {
        DEFAULT_EDGE_FRAMES
            .iter()
            .copied()
            .filter(|&f| f <= dh.len())
            .collect()
    });
    let mut rest = rest_angles;
    if rest.len() != dh.len() {
        return Err(invalid(
            "start.angles",
            format!("expected {} joint angles, got {}", dh.len(), rest.len()),
        ));
    }
    for v in &mut rest {
        if !v.is_finite() {
            return Err(invalid("start.angles", "must be finite"));
        }
    }
    let arm = MobileArm {
        rows: dh,
        active,
        edge_frames,
        rest_angles: rest,
        camera,
    };
    arm.validate()?;
    Ok(arm)
}

/// Truncated edge-frame list for a benchmark variant with `joints` active
/// joints: the base point plus frames through one joint past the last
/// active one.
pub fn bench_edge_frames(joints: usize) -> Vec<usize> {
    let chain = [1usize, 2, 3, 5, 6];
    let mut frames = vec![0usize];
    frames.extend(&chain[..(joints + 1).min(chain.len())]);
    frames
}

fn build_corridor(s: &Scenario, base_dir: &Path) -> Result<Corridor, ScenarioError> {
    let goal = Vector3::new(s.goal[0], s.goal[1], s.goal[2]);
    match &s.corridor {
        CorridorSpec::Explicit { sets } => {
            let built: Result<Vec<ConvexSet>, ScenarioError> =
                sets.iter().map(|spec| spec.build()).collect();
            Ok(Corridor::new(built?, goal)?)
        }
        CorridorSpec::Grid {
            grid_file,
            cell_size,
            start_cell,
            goal_cell,
        } => {
            if !(cell_size.is_finite() && *cell_size > 0.0) {
                return Err(invalid("corridor.cell_size", "must be finite and positive"));
            }
            let grid_path = base_dir.join(grid_file);
            let text = std::fs::read_to_string(&grid_path).map_err(|source| ScenarioError::Io {
                path: grid_path.clone(),
                source,
            })?;
            let grid = OccupancyGrid::parse(&text)?;
            let corridor = grid_maze_decompose(
                &grid,
                (start_cell[0], start_cell[1]),
                (goal_cell[0], goal_cell[1]),
                *cell_size,
            )?;
            Ok(corridor.with_goal(goal))
        }
    }
}

fn build_start(s: &Scenario, model: &RobotModel) -> Result<Configuration, ScenarioError> {
    let expected = model.angle_count();
    if s.start.angles.len() != expected {
        return Err(invalid(
            "start.angles",
            format!("expected {expected} angles, got {}", s.start.angles.len()),
        ));
    }
    Ok(Configuration::new(
        Vector2::new(s.start.base[0], s.start.base[1]),
        DVector::from_row_slice(&s.start.angles),
    ))
}

fn build_sim_config(s: &Scenario) -> Result<SimConfig, ScenarioError> {
    let c = &s.control;
    Ok(SimConfig {
        dt: c.dt,
        max_steps: c.max_steps,
        goal_tol: c.goal_tol,
        margin: c.margin,
        record_every: c.record_every,
        workspace_steps: c.workspace_steps,
        safety: SafetyConfig {
            k_p: c.k_p,
            kappa: ClassKappa::new(c.gamma)?,
            lambda_dls: c.lambda_dls,
            infeasibility: c.infeasibility.into(),
            joint_limit_rows: c.joint_limit_cbf,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rod_scenario_json() -> String {
        r#"{
            "robot": {"type": "planar_rod", "length": 1.0},
            "corridor": {"type": "explicit", "sets": [
                {"type": "box", "min": [0.0, 0.0], "max": [4.0, 2.0]}
            ]},
            "start": {"base": [1.0, 1.0], "angles": [0.0]},
            "goal": [3.0, 1.0, 0.0],
            "control": {"max_steps": 50000}
        }"#
        .to_string()
    }

    #[test]
    fn scenario_round_trips_through_json() {
        let scenario: Scenario = serde_json::from_str(&rod_scenario_json()).unwrap();
        let text = serde_json::to_string_pretty(&scenario).unwrap();
        let again: Scenario = serde_json::from_str(&text).unwrap();
        assert_eq!(scenario, again);
    }

    #[test]
    fn resolves_rod_scenario() {
        let scenario: Scenario = serde_json::from_str(&rod_scenario_json()).unwrap();
        let loaded = resolve_scenario(scenario, Path::new(".")).unwrap();
        assert!(matches!(loaded.model, RobotModel::PlanarRod { .. }));
        assert_eq!(loaded.corridor.len(), 1);
        assert_eq!(loaded.sim.max_steps, 50000);
        assert_eq!(loaded.sim.record_every, 10, "default applies");
    }

    #[test]
    fn rejects_bad_control_values() {
        let mut scenario: Scenario = serde_json::from_str(&rod_scenario_json()).unwrap();
        scenario.control.dt = -1.0;
        assert!(matches!(
            resolve_scenario(scenario, Path::new(".")),
            Err(ScenarioError::Invalid { .. })
        ));
        let mut scenario: Scenario = serde_json::from_str(&rod_scenario_json()).unwrap();
        scenario.control.margin = 1.0;
        assert!(resolve_scenario(scenario, Path::new(".")).is_err());
    }

    #[test]
    fn polytope_sets_use_the_documented_field_names() {
        let text = r#"{
            "robot": {"type": "planar_rod", "length": 0.2},
            "corridor": {"type": "explicit", "sets": [
                {"type": "polytope",
                 "A": [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]],
                 "b": [2.0, 0.0, 1.0, 0.0]},
                {"type": "ellipsoid", "center": [1.5, 0.5],
                 "shape": [[1.0, 0.0], [0.0, 1.0]]}
            ]},
            "start": {"base": [0.5, 0.5], "angles": [0.0]},
            "goal": [1.5, 0.5, 0.0]
        }"#;
        let scenario: Scenario = serde_json::from_str(text).unwrap();
        let loaded = resolve_scenario(scenario, Path::new(".")).unwrap();
        assert_eq!(loaded.corridor.len(), 2);
        let json = serde_json::to_string(&loaded.scenario).unwrap();
        assert!(json.contains("\"A\""), "row matrix serializes as A");
    }

    #[test]
    fn rejects_unknown_fields_with_location() {
        let text = r#"{"robot": {"type": "planar_rod", "length": 1.0, "bogus": 1}}"#;
        let err = serde_json::from_str::<Scenario>(text).unwrap_err();
        assert!(err.line() >= 1);
    }

    #[test]
    fn bench_edge_frames_grow_with_joint_count() {
        assert_eq!(bench_edge_frames(1), vec![0, 1, 2]);
        assert_eq!(bench_edge_frames(2), vec![0, 1, 2, 3]);
        assert_eq!(bench_edge_frames(3), vec![0, 1, 2, 3, 5]);
        assert_eq!(bench_edge_frames(4), vec![0, 1, 2, 3, 5, 6]);
    }

    #[test]
    fn arm_variant_respects_active_count() {
        let dh = crate::kinematics::tests::sample_arm(4).rows;
        let arm = arm_variant(dh.clone(), 3, None, vec![0.0; 6], None).unwrap();
        assert_eq!(arm.active, vec![0, 1, 2]);
        assert_eq!(arm.edge_frames, vec![0, 1, 2, 3, 5, 6]);
        let arm = arm_variant(dh, 2, Some(bench_edge_frames(2)), vec![0.0; 6], None).unwrap();
        assert_eq!(arm.edge_frames, vec![0, 1, 2, 3]);
    }
}
