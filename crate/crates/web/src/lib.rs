//! Browser demo bindings: interactive maze and arm runs plus the
//! workspace cloud, driven over the public library API and rendered by
//! the static page in `index.html`.

use nalgebra::{DVector, Vector2, Vector3};
use serde::Serialize;
use wasm_bindgen::prelude::*;

use corridor_cbf::corridor::{
    advance, grid_maze_decompose, Corridor, CorridorState, OccupancyGrid,
};
use corridor_cbf::kinematics::{
    edge_points, end_effector_position, in_goal_region, workspace_cloud, Configuration, RobotModel,
};
use corridor_cbf::qp::QpSolver;
use corridor_cbf::safety::{safe_control, ClassKappa, LabeledSet, SafetyError};
use corridor_cbf::scenario::{resolve_scenario, Scenario};
use corridor_cbf::sim::{step, SimConfig};

const MAZE_TEXT: &str = include_str!("../../core/scenarios/maze.txt");
const ARM4_JSON: &str = include_str!("../../core/scenarios/arm4.json");

fn err_str(e: impl std::fmt::Display) -> String {
    e.to_string()
}

#[derive(Serialize)]
struct BoxRect {
    min: Vec<f64>,
    max: Vec<f64>,
}

fn box_rects(corridor: &Corridor) -> Vec<BoxRect> {
    corridor
        .sets()
        .iter()
        .filter_map(|s| {
            s.as_box().map(|(lo, hi)| BoxRect {
                min: lo.iter().copied().collect(),
                max: hi.iter().copied().collect(),
            })
        })
        .collect()
}

/// One closed-loop stepper shared by both demos.
struct Loop {
    model: RobotModel,
    corridor: Corridor,
    cfg: SimConfig,
    solver: QpSolver,
    q: Configuration,
    state: CorridorState,
    t: f64,
    done: bool,
    infeasible: bool,
    cloud: Vec<Vector3<f64>>,
}

impl Loop {
    fn new(
        model: RobotModel,
        corridor: Corridor,
        cfg: SimConfig,
        q: Configuration,
    ) -> Result<Self, String> {
        let pts = edge_points(&model, &q).map_err(err_str)?;
        let report = corridor.validate(&pts);
        if !report.is_valid() {
            return Err(err_str(format!("scenario invalid:\n{report}")));
        }
        let x_ref = end_effector_position(&model, &q).map_err(err_str)?;
        let state =
            CorridorState::initial(&corridor, &x_ref, pts.len(), cfg.margin).map_err(err_str)?;
        let cloud = match &model {
            RobotModel::MobileArm(_) => {
                workspace_cloud(&model, cfg.workspace_steps).map_err(err_str)?
            }
            RobotModel::PlanarRod { .. } => Vec::new(),
        };
        Ok(Self {
            model,
            corridor,
            cfg,
            solver: QpSolver::new(),
            q,
            state,
            t: 0.0,
            done: false,
            infeasible: false,
            cloud,
        })
    }

    fn goal_reached(&self) -> bool {
        let goal = self.corridor.goal();
        match &self.model {
            RobotModel::PlanarRod { .. } => {
                let d =
                    ((self.q.base.x - goal.x).powi(2) + (self.q.base.y - goal.y).powi(2)).sqrt();
                d <= self.cfg.goal_tol
            }
            RobotModel::MobileArm(_) => {
                in_goal_region(&self.model, &self.q, &goal, &self.cloud, self.cfg.goal_tol)
                    .unwrap_or(false)
            }
        }
    }

    /// Advance up to `n` control steps; returns the latest per-edge
    /// barrier minima.
    fn run(&mut self, n: usize) -> Result<Vec<f64>, String> {
        let mut min_h = Vec::new();
        for _ in 0..n {
            if self.done {
                break;
            }
            let pts = edge_points(&self.model, &self.q).map_err(err_str)?;
            let x_ref = end_effector_position(&self.model, &self.q).map_err(err_str)?;
            self.state = advance(&self.corridor, &self.state, &pts, &x_ref, self.cfg.margin)
                .map_err(err_str)?;
            self.state.waypoint = self
                .corridor
                .select_waypoint(self.state.index, &x_ref, self.cfg.margin)
                .map_err(err_str)?;
            if self.goal_reached() {
                self.done = true;
                break;
            }
            let sets: Vec<Vec<LabeledSet<'_>>> = self
                .state
                .edge_assignment
                .iter()
                .map(|&i| {
                    vec![LabeledSet {
                        id: i,
                        set: self.corridor.set(i),
                    }]
                })
                .collect();
            let (u, diag) = match safe_control(
                &self.model,
                &self.q,
                &sets,
                &self.state.waypoint,
                &self.cfg.safety,
                &mut self.solver,
            ) {
                Ok(pair) => pair,
                Err(SafetyError::Infeasible(_)) => {
                    self.done = true;
                    self.infeasible = true;
                    break;
                }
                Err(e) => return Err(err_str(e)),
            };
            min_h = diag.per_edge_min_h;
            let (next, _) = step(&self.model, &self.q, &u, self.cfg.dt);
            self.q = next;
            self.t += self.cfg.dt;
        }
        Ok(min_h)
    }
}

#[derive(Serialize)]
struct MazeScene {
    walls: Vec<[usize; 2]>,
    rows: usize,
    cols: usize,
    cell: f64,
    boxes: Vec<BoxRect>,
    goal: [f64; 2],
}

#[derive(Serialize)]
struct MazeState {
    t: f64,
    endpoints: [[f64; 2]; 2],
    active_set: usize,
    waypoint: [f64; 2],
    min_h: Vec<f64>,
    min_dist: f64,
    done: bool,
    infeasible: bool,
}

/// Rigid rod navigating the bundled maze.
#[wasm_bindgen]
pub struct MazeDemo {
    inner: Loop,
    grid: OccupancyGrid,
    last_min_h: Vec<f64>,
}

#[wasm_bindgen]
impl MazeDemo {
    /// Rod length in maze units plus the proportional and barrier gains
    /// are the explorable parameters.
    #[wasm_bindgen(constructor)]
    pub fn new(length: f64, k_p: f64, gamma: f64) -> Result<MazeDemo, String> {
        if !(0.1..=1.95).contains(&length) {
            return Err(err_str("rod length must lie in [0.1, 1.95]"));
        }
        let grid = OccupancyGrid::parse(MAZE_TEXT).map_err(err_str)?;
        let corridor = grid_maze_decompose(&grid, (9, 0), (0, 9), 1.0)
            .map_err(err_str)?
            .with_goal(Vector3::new(8.9, 9.0, 0.0));
        let model = RobotModel::PlanarRod { length };
        let mut cfg = SimConfig {
            goal_tol: 0.05,
            ..SimConfig::default()
        };
        cfg.safety.k_p = k_p.clamp(0.05, 5.0);
        cfg.safety.kappa = ClassKappa::new(gamma.clamp(0.05, 10.0)).map_err(err_str)?;
        let q = Configuration::new(Vector2::new(1.0, 1.0), DVector::from_row_slice(&[0.0]));
        Ok(MazeDemo {
            inner: Loop::new(model, corridor, cfg, q)?,
            grid,
            last_min_h: vec![f64::INFINITY; 2],
        })
    }

    /// Static drawing data: wall cells, corridor boxes and the goal.
    pub fn scene_json(&self) -> String {
        let mut walls = Vec::new();
        for r in 0..self.grid.rows() {
            for c in 0..self.grid.cols() {
                if !self.grid.free(r, c) {
                    walls.push([r, c]);
                }
            }
        }
        let scene = MazeScene {
            walls,
            rows: self.grid.rows(),
            cols: self.grid.cols(),
            cell: 1.0,
            boxes: box_rects(&self.inner.corridor),
            goal: [self.inner.corridor.goal().x, self.inner.corridor.goal().y],
        };
        serde_json::to_string(&scene).expect("serializable")
    }

    /// Run up to `n` control steps; false once the run has finished.
    pub fn step(&mut self, n: usize) -> Result<bool, String> {
        let min_h = self.inner.run(n)?;
        if !min_h.is_empty() {
            self.last_min_h = min_h;
        }
        Ok(!self.inner.done)
    }

    pub fn state_json(&self) -> Result<String, String> {
        let pts = edge_points(&self.inner.model, &self.inner.q).map_err(err_str)?;
        let min_dist = self
            .last_min_h
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        let state = MazeState {
            t: self.inner.t,
            endpoints: [[pts[0].x, pts[0].y], [pts[1].x, pts[1].y]],
            active_set: self.inner.state.index,
            waypoint: [self.inner.state.waypoint.x, self.inner.state.waypoint.y],
            min_h: self.last_min_h.clone(),
            min_dist,
            done: self.inner.done,
            infeasible: self.inner.infeasible,
        };
        serde_json::to_string(&state).map_err(err_str)
    }
}

#[derive(Serialize)]
struct ArmScene {
    boxes: Vec<BoxRect>,
    goal: [f64; 3],
    edge_count: usize,
}

#[derive(Serialize)]
struct ArmState {
    t: f64,
    base: [f64; 2],
    edges: Vec<[f64; 3]>,
    active_set: usize,
    waypoint: [f64; 3],
    min_h: Vec<f64>,
    done: bool,
    infeasible: bool,
}

/// Four-joint mobile arm traversing the bundled box corridor.
#[wasm_bindgen]
pub struct ArmDemo {
    inner: Loop,
    last_min_h: Vec<f64>,
}

#[wasm_bindgen]
impl ArmDemo {
    #[wasm_bindgen(constructor)]
    pub fn new(k_p: f64, gamma: f64) -> Result<ArmDemo, String> {
        let scenario: Scenario = serde_json::from_str(ARM4_JSON).map_err(err_str)?;
        let loaded = resolve_scenario(scenario, std::path::Path::new(".")).map_err(err_str)?;
        let corridor = loaded.corridor.clone().with_goal(loaded.goal());
        let mut cfg = loaded.sim.clone();
        cfg.workspace_steps = 9; // keep the goal test light in the browser
        cfg.safety.k_p = k_p.clamp(0.05, 5.0);
        cfg.safety.kappa = ClassKappa::new(gamma.clamp(0.05, 10.0)).map_err(err_str)?;
        let edge_count = loaded.model.edge_point_count();
        Ok(ArmDemo {
            inner: Loop::new(loaded.model, corridor, cfg, loaded.start)?,
            last_min_h: vec![f64::INFINITY; edge_count],
        })
    }

    pub fn scene_json(&self) -> String {
        let goal = self.inner.corridor.goal();
        let scene = ArmScene {
            boxes: box_rects(&self.inner.corridor),
            goal: [goal.x, goal.y, goal.z],
            edge_count: self.inner.model.edge_point_count(),
        };
        serde_json::to_string(&scene).expect("serializable")
    }

    pub fn step(&mut self, n: usize) -> Result<bool, String> {
        let min_h = self.inner.run(n)?;
        if !min_h.is_empty() {
            self.last_min_h = min_h;
        }
        Ok(!self.inner.done)
    }

    pub fn state_json(&self) -> Result<String, String> {
        let pts = edge_points(&self.inner.model, &self.inner.q).map_err(err_str)?;
        let state = ArmState {
            t: self.inner.t,
            base: [self.inner.q.base.x, self.inner.q.base.y],
            edges: pts.iter().map(|p| [p.x, p.y, p.z]).collect(),
            active_set: self.inner.state.index,
            waypoint: [
                self.inner.state.waypoint.x,
                self.inner.state.waypoint.y,
                self.inner.state.waypoint.z,
            ],
            min_h: self.last_min_h.clone(),
            done: self.inner.done,
            infeasible: self.inner.infeasible,
        };
        serde_json::to_string(&state).map_err(err_str)
    }
}

/// Workspace cloud of the bundled arm as flat [x, y, z, ...] triples in
/// the arm base frame.
#[wasm_bindgen]
pub fn workspace_cloud_points(resolution: usize) -> Result<Vec<f64>, String> {
    if !(2..=17).contains(&resolution) {
        return Err(err_str("resolution must lie in 2..=17"));
    }
    let scenario: Scenario = serde_json::from_str(ARM4_JSON).map_err(err_str)?;
    let loaded = resolve_scenario(scenario, std::path::Path::new(".")).map_err(err_str)?;
    let cloud = workspace_cloud(&loaded.model, resolution).map_err(err_str)?;
    let mut flat = Vec::with_capacity(cloud.len() * 3);
    for p in cloud {
        flat.push(p.x);
        flat.push(p.y);
        flat.push(p.z);
    }
    Ok(flat)
}
