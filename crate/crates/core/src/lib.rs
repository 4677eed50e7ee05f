//! Configuration-aware safe control for kinematic robots.
//!
//! A nominal proportional controller is filtered through a least-distance
//! QP whose rows are Control-Barrier-Function constraints evaluated at a
//! handful of robot edge points, each required to stay inside the active
//! set of a corridor of convex obstacle-free regions. Keeping the edge
//! points inside a convex set keeps every link segment inside it, so a
//! small number of constraints certifies whole-body safety.
//!
//! Modules:
//! * [`geometry`] — ellipsoid/polytope sets, barriers, support points
//! * [`qp`] — dense dual active-set least-distance solver
//! * [`kinematics`] — homogeneous transforms, modified-DH chains, Jacobians
//! * [`safety`] — CBF constraint assembly and the QP safety filter
//! * [`corridor`] — set sequencing, waypoints, grid-maze decomposition
//! * [`sim`] — closed-loop integration, traces, timing benchmark
//! * [`scenario`] — JSON scenario schema and loading
//! * [`cli`] — the `run`/`check`/`bench`/`workspace` subcommands

pub mod cli;
pub mod corridor;
pub mod geometry;
pub mod kinematics;
pub mod qp;
pub mod safety;
pub mod scenario;
pub mod sim;

pub use corridor::{Corridor, CorridorError, CorridorReport, CorridorState, OccupancyGrid};
pub use geometry::{BarrierEvaluation, ConvexSet, GeometryError};
pub use kinematics::{
    CameraMount, Configuration, DHRow, HomTransform, KinematicsError, MobileArm, RobotModel,
};
pub use qp::{QpProblem, QpSolution, QpSolver, QpStatus};
pub use safety::{ClassKappa, InfeasibilityPolicy, SafetyConfig, SafetyError};
pub use scenario::{LoadedScenario, Scenario, ScenarioError};
pub use sim::{SimConfig, SimError, SimResult, SimStatus, TraceRow};
