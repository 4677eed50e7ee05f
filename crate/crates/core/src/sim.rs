//! Closed-loop simulation: waypoint → nominal → CBF-QP → Euler step,
//! with trace recording, goal detection and the timing benchmark.

use nalgebra::{DVector, Vector3};
use thiserror::Error;

use crate::corridor::{advance, Corridor, CorridorError, CorridorReport, CorridorState};
use crate::kinematics::{
    edge_points, end_effector_position, in_goal_region, workspace_cloud, Configuration,
    KinematicsError, RobotModel,
};
use crate::qp::QpSolver;
use crate::safety::{safe_control, LabeledSet, SafetyConfig, SafetyError};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("scenario precondition failed:\n{0}")]
    InvalidScenario(CorridorReport),
    #[error(transparent)]
    Corridor(#[from] CorridorError),
    #[error(transparent)]
    Safety(SafetyError),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    /// Euler step in seconds.
    pub dt: f64,
    pub max_steps: usize,
    /// Goal tolerance in length units.
    pub goal_tol: f64,
    /// Waypoint pull-off-boundary fraction.
    pub margin: f64,
    /// Trace row stride; first and last rows are always recorded.
    pub record_every: usize,
    /// Workspace grid resolution for the arm goal predicate.
    pub workspace_steps: usize,
    pub safety: SafetyConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            max_steps: 200_000,
            goal_tol: 0.02,
            margin: 0.05,
            record_every: 10,
            workspace_steps: 9,
            safety: SafetyConfig::default(),
        }
    }
}

/// One recorded sample of the closed loop.
#[derive(Debug, Clone)]
pub struct TraceRow {
    pub t: f64,
    /// Base position then joint angles.
    pub state: Vec<f64>,
    /// Input applied at this step (zeros on the terminal row).
    pub input: Vec<f64>,
    pub active_set: usize,
    /// Minimum barrier per edge point in its active set.
    pub min_h: Vec<f64>,
    /// Minimum over `min_h`.
    pub min_dist: f64,
    /// Wall-clock seconds spent in the safety filter.
    pub solve_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimStatus {
    ReachedGoal,
    Infeasible,
    Timeout,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct TimingStats {
    pub mean: f64,
    pub median: f64,
    pub p99: f64,
    pub samples: usize,
}

impl TimingStats {
    pub fn from_samples(samples: &[f64]) -> Self {
        if samples.is_empty() {
            return Self::default();
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite times"));
        let mean = sorted.iter().sum::<f64>() / sorted.len() as f64;
        Self {
            mean,
            median: percentile(&sorted, 0.5),
            p99: percentile(&sorted, 0.99),
            samples: sorted.len(),
        }
    }
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let idx = ((sorted.len() - 1) as f64 * q).round() as usize;
    sorted[idx]
}

#[derive(Debug, Clone)]
pub struct SimResult {
    pub status: SimStatus,
    pub steps: usize,
    pub trace: Vec<TraceRow>,
    pub timing: TimingStats,
    /// Raw per-step safety-filter times, one per control solve.
    pub solve_times: Vec<f64>,
    /// Joint clamp events over the whole run.
    pub clamp_events: usize,
    pub final_configuration: Configuration,
}

/// Explicit Euler step. Arm joint angles are clamped to their DH limits
/// and the clamped joint indices are returned.
pub fn step(
    model: &RobotModel,
    q: &Configuration,
    u: &DVector<f64>,
    dt: f64,
) -> (Configuration, Vec<usize>) {
    let mut next = q.clone();
    let mut clamped = Vec::new();
    match model {
        RobotModel::PlanarRod { .. } => {
            next.base.x += u[0] * dt;
            next.base.y += u[1] * dt;
            next.angles[0] += u[2] * dt;
        }
        RobotModel::MobileArm(arm) => {
            let m = arm.active.len() + 2;
            for (slot, &joint) in arm.active.iter().enumerate() {
                let raw = next.angles[joint] + u[slot] * dt;
                let (lo, hi) = arm.rows[joint].limits;
                let clipped = raw.clamp(lo, hi);
                if clipped != raw {
                    clamped.push(joint);
                }
                next.angles[joint] = clipped;
            }
            next.base.x += u[m - 2] * dt;
            next.base.y += u[m - 1] * dt;
        }
    }
    (next, clamped)
}

/// Flat state vector stored in trace rows: base position then angles.
pub fn state_vector(q: &Configuration) -> Vec<f64> {
    let mut v = Vec::with_capacity(2 + q.angles.len());
    v.push(q.base.x);
    v.push(q.base.y);
    v.extend(q.angles.iter());
    v
}

/// Rebuild a configuration from a trace row's state columns.
pub fn configuration_from_state(model: &RobotModel, state: &[f64]) -> Configuration {
    let angles = DVector::from_row_slice(&state[2..]);
    debug_assert_eq!(angles.len(), model.angle_count());
    Configuration::new(nalgebra::Vector2::new(state[0], state[1]), angles)
}

/// Column labels for the state part of a trace row.
pub fn state_labels(model: &RobotModel) -> Vec<String> {
    match model {
        RobotModel::PlanarRod { .. } => vec!["base_x".into(), "base_y".into(), "phi".into()],
        RobotModel::MobileArm(arm) => {
            let mut labels = vec!["base_x".into(), "base_y".into()];
            labels.extend((1..=arm.rows.len()).map(|i| format!("q{i}")));
            labels
        }
    }
}

/// Column labels for the input part of a trace row.
pub fn input_labels(model: &RobotModel) -> Vec<String> {
    match model {
        RobotModel::PlanarRod { .. } => vec!["v_x".into(), "v_y".into(), "omega".into()],
        RobotModel::MobileArm(arm) => {
            let mut labels: Vec<String> =
                arm.active.iter().map(|j| format!("qd{}", j + 1)).collect();
            labels.push("v_x".into());
            labels.push("v_y".into());
            labels
        }
    }
}

/// Minimum barrier of every edge point in the corridor set `index`.
fn edge_barriers(corridor: &Corridor, index: usize, pts: &[Vector3<f64>]) -> Vec<f64> {
    pts.iter()
        .map(|p| corridor.set(index).min_barrier_world(p))
        .collect()
}

struct GoalTest {
    cloud: Vec<Vector3<f64>>,
    reach_min: f64,
    reach_max: f64,
}

impl GoalTest {
    fn new(model: &RobotModel, cfg: &SimConfig) -> Result<Self, SimError> {
        match model {
            RobotModel::PlanarRod { .. } => Ok(Self {
                cloud: Vec::new(),
                reach_min: 0.0,
                reach_max: 0.0,
            }),
            RobotModel::MobileArm(_) => {
                let cloud = workspace_cloud(model, cfg.workspace_steps)?;
                let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
                for p in &cloud {
                    let r = p.norm();
                    lo = lo.min(r);
                    hi = hi.max(r);
                }
                Ok(Self {
                    cloud,
                    reach_min: lo,
                    reach_max: hi,
                })
            }
        }
    }

    fn reached(
        &self,
        model: &RobotModel,
        q: &Configuration,
        goal: &Vector3<f64>,
        tol: f64,
    ) -> Result<bool, SimError> {
        match model {
            RobotModel::PlanarRod { .. } => {
                let d = ((q.base.x - goal.x).powi(2) + (q.base.y - goal.y).powi(2)).sqrt();
                Ok(d <= tol)
            }
            RobotModel::MobileArm(_) => {
                let from_base = (goal - Vector3::new(q.base.x, q.base.y, 0.0)).norm();
                if from_base > self.reach_max + tol || from_base < self.reach_min - tol {
                    return Ok(false);
                }
                Ok(in_goal_region(model, q, goal, &self.cloud, tol)?)
            }
        }
    }
}

/// Run the closed loop until the goal predicate holds, the filter turns
/// infeasible under the halt policy, or `max_steps` elapse.
pub fn run_scenario(
    model: &RobotModel,
    corridor: &Corridor,
    q0: &Configuration,
    cfg: &SimConfig,
) -> Result<SimResult, SimError> {
    let start_edges = edge_points(model, q0)?;
    let report = corridor.validate(&start_edges);
    if !report.is_valid() {
        return Err(SimError::InvalidScenario(report));
    }

    let goal_test = GoalTest::new(model, cfg)?;
    let goal = corridor.goal();
    let mut solver = QpSolver::new();
    let mut q = q0.clone();
    let mut state = CorridorState::initial(
        corridor,
        &end_effector_position(model, &q)?,
        start_edges.len(),
        cfg.margin,
    )?;

    let mut trace: Vec<TraceRow> = Vec::new();
    let mut solve_times: Vec<f64> = Vec::new();
    let mut clamp_events = 0usize;
    let mut status = SimStatus::Timeout;
    let mut steps = 0usize;

    let mut sets: Vec<Vec<LabeledSet<'_>>> = Vec::new();
    let mut sets_index = usize::MAX;

    for step_idx in 0..=cfg.max_steps {
        steps = step_idx;
        let t = step_idx as f64 * cfg.dt;
        let pts = edge_points(model, &q)?;
        let x_ref = end_effector_position(model, &q)?;
        state = advance(corridor, &state, &pts, &x_ref, cfg.margin)?;
        state.waypoint = corridor.select_waypoint(state.index, &x_ref, cfg.margin)?;
        if sets_index != state.index {
            sets = state
                .edge_assignment
                .iter()
                .map(|&idx| {
                    vec![LabeledSet {
                        id: idx,
                        set: corridor.set(idx),
                    }]
                })
                .collect();
            sets_index = state.index;
        }

        if goal_test.reached(model, &q, &goal, cfg.goal_tol)? {
            status = SimStatus::ReachedGoal;
            trace.push(terminal_row(model, corridor, &state, &q, t, &pts));
            break;
        }
        if step_idx == cfg.max_steps {
            status = SimStatus::Timeout;
            trace.push(terminal_row(model, corridor, &state, &q, t, &pts));
            break;
        }

        let (u, diag) =
            match safe_control(model, &q, &sets, &state.waypoint, &cfg.safety, &mut solver) {
                Ok(pair) => pair,
                Err(SafetyError::Infeasible(_)) => {
                    status = SimStatus::Infeasible;
                    trace.push(terminal_row(model, corridor, &state, &q, t, &pts));
                    break;
                }
                Err(other) => return Err(SimError::Safety(other)),
            };
        solve_times.push(diag.solve_time);

        if step_idx % cfg.record_every == 0 {
            let min_dist = diag
                .per_edge_min_h
                .iter()
                .fold(f64::INFINITY, |a, &b| a.min(b));
            trace.push(TraceRow {
                t,
                state: state_vector(&q),
                input: u.iter().copied().collect(),
                active_set: state.index,
                min_h: diag.per_edge_min_h.clone(),
                min_dist,
                solve_time: diag.solve_time,
            });
        }

        let (next, clamped) = step(model, &q, &u, cfg.dt);
        clamp_events += clamped.len();
        q = next;
    }

    Ok(SimResult {
        status,
        steps,
        trace,
        timing: TimingStats::from_samples(&solve_times),
        solve_times,
        clamp_events,
        final_configuration: q,
    })
}

fn terminal_row(
    model: &RobotModel,
    corridor: &Corridor,
    state: &CorridorState,
    q: &Configuration,
    t: f64,
    pts: &[Vector3<f64>],
) -> TraceRow {
    let min_h = edge_barriers(corridor, state.index, pts);
    let min_dist = min_h.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    TraceRow {
        t,
        state: state_vector(q),
        input: vec![0.0; model.input_dim()],
        active_set: state.index,
        min_h,
        min_dist,
        solve_time: 0.0,
    }
}

/// Per-edge (t, minimum barrier) series extracted from a trace.
pub fn min_distance_series(trace: &[TraceRow]) -> Vec<Vec<(f64, f64)>> {
    if trace.is_empty() {
        return Vec::new();
    }
    let edges = trace[0].min_h.len();
    (0..edges)
        .map(|k| trace.iter().map(|row| (row.t, row.min_h[k])).collect())
        .collect()
}

/// One benchmark table row.
#[derive(Debug, Clone)]
pub struct BenchRow {
    pub joints: usize,
    pub mean_s: f64,
    pub median_s: f64,
    pub p99_s: f64,
    /// Maximum QP row count observed.
    pub constraints: usize,
    pub steps: usize,
    pub status: SimStatus,
}

/// Median/p99 per-step safety-filter time per joint count; times are
/// pooled over `repeats` identical runs.
pub fn benchmark_scaling(
    joint_counts: &[usize],
    repeats: usize,
    make_model: impl Fn(usize) -> Result<(RobotModel, Configuration), SimError>,
    corridor: &Corridor,
    cfg: &SimConfig,
) -> Result<Vec<BenchRow>, SimError> {
    let mut rows = Vec::with_capacity(joint_counts.len());
    for &joints in joint_counts {
        let (model, q0) = make_model(joints)?;
        let mut pooled: Vec<f64> = Vec::new();
        let mut constraints = 0usize;
        let mut steps = 0usize;
        let mut status = SimStatus::Timeout;
        // unmeasured warm-up run: caches, allocator, CPU clocks
        run_scenario(&model, corridor, &q0, cfg)?;
        for rep in 0..repeats.max(1) {
            let result = run_scenario(&model, corridor, &q0, cfg)?;
            if rep == 0 {
                steps = result.steps;
                status = result.status;
                constraints = constraint_count(&model, corridor);
            }
            pooled.extend(result.solve_times);
        }
        let stats = TimingStats::from_samples(&pooled);
        rows.push(BenchRow {
            joints,
            mean_s: stats.mean,
            median_s: stats.median,
            p99_s: stats.p99,
            constraints,
            steps,
            status,
        });
    }
    Ok(rows)
}

/// QP rows for one active set: edge points × faces, plus joint limits.
fn constraint_count(model: &RobotModel, corridor: &Corridor) -> usize {
    let faces = match corridor.set(0) {
        crate::geometry::ConvexSet::Ellipsoid { .. } => 1,
        crate::geometry::ConvexSet::Polytope { rows, .. } => rows.nrows(),
    };
    let joint_rows = match model {
        RobotModel::MobileArm(arm) => 2 * arm.active.len(),
        RobotModel::PlanarRod { .. } => 0,
    };
    model.edge_point_count() * faces + joint_rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ConvexSet;
    use crate::kinematics::tests::sample_arm;
    use approx::assert_relative_eq;
    use nalgebra::Vector2;

    fn rod_config(x: f64, y: f64, phi: f64) -> Configuration {
        Configuration::new(Vector2::new(x, y), DVector::from_row_slice(&[phi]))
    }

    fn straight_corridor() -> Corridor {
        // generous 2-unit overlap so longer rods hand off without rotating
        Corridor::new(
            vec![
                ConvexSet::axis_box(&[0.0, 0.0], &[5.0, 2.0]).unwrap(),
                ConvexSet::axis_box(&[3.0, 0.0], &[8.0, 2.0]).unwrap(),
            ],
            Vector3::new(7.0, 1.0, 0.0),
        )
        .unwrap()
    }

    #[test]
    fn step_zero_input_is_identity() {
        let model = RobotModel::PlanarRod { length: 1.0 };
        let q = rod_config(0.4, 0.8, 0.3);
        let (next, clamped) = step(&model, &q, &DVector::zeros(3), 0.1);
        assert_eq!(next, q);
        assert!(clamped.is_empty());
    }

    #[test]
    fn step_translates_rod_center() {
        let model = RobotModel::PlanarRod { length: 1.0 };
        let q = rod_config(0.0, 0.0, 0.0);
        let (next, _) = step(&model, &q, &DVector::from_row_slice(&[1.0, 0.0, 0.0]), 0.1);
        assert_relative_eq!(next.base.x, 0.1);
        assert_relative_eq!(next.base.y, 0.0);
    }

    #[test]
    fn step_clamps_joint_at_limit() {
        let model = RobotModel::MobileArm(sample_arm(4));
        let mut q = Configuration::new(Vector2::zeros(), DVector::zeros(6));
        let hi = match &model {
            RobotModel::MobileArm(arm) => arm.rows[0].limits.1,
            _ => unreachable!(),
        };
        q.angles[0] = hi;
        let mut u = DVector::zeros(6);
        u[0] = 1.0; // push beyond the upper limit
        let (next, clamped) = step(&model, &q, &u, 0.1);
        assert_relative_eq!(next.angles[0], hi);
        assert_eq!(clamped, vec![0]);
    }

    #[test]
    fn run_reaches_goal_in_zero_steps_when_already_there() {
        let model = RobotModel::PlanarRod { length: 0.5 };
        let corridor = Corridor::new(
            vec![ConvexSet::axis_box(&[0.0, 0.0], &[2.0, 2.0]).unwrap()],
            Vector3::new(1.0, 1.0, 0.0),
        )
        .unwrap();
        let q0 = rod_config(1.0, 1.0, 0.0);
        let result = run_scenario(&model, &corridor, &q0, &SimConfig::default()).unwrap();
        assert_eq!(result.status, SimStatus::ReachedGoal);
        assert_eq!(result.steps, 0);
        assert_eq!(result.trace.len(), 1);
        assert_relative_eq!(result.trace[0].t, 0.0);
    }

    #[test]
    fn run_traverses_straight_corridor() {
        let model = RobotModel::PlanarRod { length: 0.8 };
        let corridor = straight_corridor();
        let q0 = rod_config(1.0, 1.0, 0.0);
        let cfg = SimConfig {
            max_steps: 40_000,
            ..SimConfig::default()
        };
        let result = run_scenario(&model, &corridor, &q0, &cfg).unwrap();
        assert_eq!(result.status, SimStatus::ReachedGoal);
        assert!(result.steps > 0);
        // barrier column stays above the discrete-time bound
        for row in &result.trace {
            assert!(row.min_dist >= -1e-4, "violation at t={}", row.t);
        }
        // active set index is non-decreasing and reaches the end
        let mut last = 0;
        for row in &result.trace {
            assert!(row.active_set >= last);
            last = row.active_set;
        }
        assert_eq!(last, corridor.last_index());
        // rows strictly increasing in t
        for pair in result.trace.windows(2) {
            assert!(pair[1].t > pair[0].t);
        }
    }

    #[test]
    fn run_rejects_start_outside_corridor() {
        let model = RobotModel::PlanarRod { length: 0.8 };
        let corridor = straight_corridor();
        let q0 = rod_config(-3.0, 1.0, 0.0);
        match run_scenario(&model, &corridor, &q0, &SimConfig::default()) {
            Err(SimError::InvalidScenario(report)) => {
                assert!(report.start_in_first.iter().any(|ok| !ok));
            }
            other => panic!("expected invalid scenario, got {other:?}"),
        }
    }

    #[test]
    fn run_times_out_on_unreachable_goal() {
        // Goal inside the final set but blocked by max_steps exhaustion.
        let model = RobotModel::PlanarRod { length: 0.8 };
        let corridor = straight_corridor();
        let q0 = rod_config(1.0, 1.0, 0.0);
        let cfg = SimConfig {
            max_steps: 5,
            ..SimConfig::default()
        };
        let result = run_scenario(&model, &corridor, &q0, &cfg).unwrap();
        assert_eq!(result.status, SimStatus::Timeout);
        assert_eq!(result.steps, 5);
    }

    #[test]
    fn traces_are_deterministic() {
        let model = RobotModel::PlanarRod { length: 1.1 };
        let corridor = straight_corridor();
        let q0 = rod_config(1.0, 1.0, 0.1);
        let cfg = SimConfig {
            max_steps: 20_000,
            ..SimConfig::default()
        };
        let a = run_scenario(&model, &corridor, &q0, &cfg).unwrap();
        let b = run_scenario(&model, &corridor, &q0, &cfg).unwrap();
        assert_eq!(a.steps, b.steps);
        assert_eq!(a.trace.len(), b.trace.len());
        for (ra, rb) in a.trace.iter().zip(&b.trace) {
            assert_eq!(ra.state, rb.state);
            assert_eq!(ra.input, rb.input);
            assert_eq!(ra.min_h, rb.min_h);
            assert_eq!(ra.active_set, rb.active_set);
        }
    }

    #[test]
    fn rod_length_does_not_drift() {
        let model = RobotModel::PlanarRod { length: 1.4 };
        let corridor = straight_corridor();
        let q0 = rod_config(1.0, 1.0, 0.2);
        let cfg = SimConfig {
            max_steps: 30_000,
            ..SimConfig::default()
        };
        let result = run_scenario(&model, &corridor, &q0, &cfg).unwrap();
        assert_eq!(result.status, SimStatus::ReachedGoal);
        for row in &result.trace {
            let q = configuration_from_state(&model, &row.state);
            let pts = edge_points(&model, &q).unwrap();
            let l = (pts[1] - pts[0]).norm();
            assert!((l - 1.4).abs() < 1e-6 * (result.steps as f64) * cfg.dt + 1e-12);
        }
    }

    #[test]
    fn min_distance_series_shapes() {
        let model = RobotModel::PlanarRod { length: 0.8 };
        let corridor = straight_corridor();
        let q0 = rod_config(1.0, 1.0, 0.0);
        let cfg = SimConfig {
            max_steps: 40_000,
            ..SimConfig::default()
        };
        let result = run_scenario(&model, &corridor, &q0, &cfg).unwrap();
        let series = min_distance_series(&result.trace);
        assert_eq!(series.len(), 2, "one series per rod endpoint");
        for s in &series {
            assert_eq!(s.len(), result.trace.len());
            assert!(s.iter().all(|(_, h)| *h >= -1e-4));
        }
    }

    #[test]
    fn benchmark_is_deterministic_and_constraints_grow() {
        let arm_rows = sample_arm(4).rows;
        let corridor = Corridor::new(
            vec![ConvexSet::axis_box(&[-0.5, -0.5, -0.05], &[1.5, 1.0, 0.6]).unwrap()],
            Vector3::new(0.8, 0.2, 0.188),
        )
        .unwrap();
        let cfg = SimConfig {
            max_steps: 3000,
            goal_tol: 0.05,
            ..SimConfig::default()
        };
        let make = |n: usize| -> Result<(RobotModel, Configuration), SimError> {
            let candidates = [0usize, 1, 2, 4];
            let chain = [1usize, 2, 3, 5, 6];
            let mut frames = vec![0usize];
            frames.extend(&chain[..n + 1]);
            let arm = crate::kinematics::MobileArm {
                rows: arm_rows.clone(),
                active: candidates[..n].to_vec(),
                edge_frames: frames,
                rest_angles: vec![0.0; 6],
                camera: None,
            };
            Ok((
                RobotModel::MobileArm(arm),
                Configuration::new(Vector2::zeros(), DVector::zeros(6)),
            ))
        };
        let a = benchmark_scaling(&[1, 2, 3], 2, make, &corridor, &cfg).unwrap();
        let b = benchmark_scaling(&[1, 2, 3], 2, make, &corridor, &cfg).unwrap();
        for (ra, rb) in a.iter().zip(&b) {
            assert_eq!(
                ra.steps, rb.steps,
                "repeat runs must use identical step counts"
            );
            assert_eq!(ra.constraints, rb.constraints);
        }
        assert!(a.windows(2).all(|w| w[1].constraints > w[0].constraints));
    }

    #[test]
    fn timing_stats_from_samples() {
        let stats = TimingStats::from_samples(&[3.0, 1.0, 2.0, 4.0]);
        assert_relative_eq!(stats.mean, 2.5);
        assert!(stats.median >= 2.0 && stats.median <= 3.0);
        assert_relative_eq!(stats.p99, 4.0);
        assert_eq!(stats.samples, 4);
        assert_eq!(TimingStats::from_samples(&[]).samples, 0);
    }
}
