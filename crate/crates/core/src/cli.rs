//! Command-line entry points: `run`, `check`, `bench` and `workspace`.
//!
//! Exit codes are the only machine-readable success channel: 0 reached
//! goal / valid, 2 infeasible, 3 timeout, 4 invalid input. Stdout is for
//! humans; CSV artifacts are for machines.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::kinematics::{edge_points, workspace_cloud, RobotModel};
use crate::scenario::{arm_variant, bench_edge_frames, load_scenario, RobotSpec};
use crate::sim::{
    benchmark_scaling, input_labels, run_scenario, state_labels, SimResult, SimStatus, TraceRow,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_TIMEOUT: i32 = 3;
pub const EXIT_INVALID: i32 = 4;

/// Relative output paths are resolved against this directory when set.
pub const OUT_DIR_ENV: &str = "CORRIDOR_CBF_OUT_DIR";

#[derive(Debug, Parser)]
#[command(
    name = "corridor-cbf",
    about = "CBF-QP safe control for kinematic robots in convex corridors"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a scenario to completion and report the outcome.
    Run {
        scenario: PathBuf,
        /// Write the trace CSV here.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Record measured solve times in the trace file. Off by default
        /// so repeated runs produce byte-identical traces.
        #[arg(long)]
        timing: bool,
        /// Override the scenario's seed. The pipeline is deterministic,
        /// so this only tags the run summary.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Validate a scenario: corridor connectivity, goal membership and
    /// start containment.
    Check { scenario: PathBuf },
    /// Per-step solve-time scaling over joint counts.
    Bench {
        scenario: PathBuf,
        /// Joint counts to benchmark (each in 1..=4).
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4")]
        joints: Vec<usize>,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        /// Output CSV (joints,median_s,p99_s,constraints).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the scenario's seed. The pipeline is deterministic,
        /// so this only tags the run summary.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Sample the arm workspace and export it as x,y,z rows.
    Workspace {
        scenario: PathBuf,
        #[arg(long, default_value_t = 25)]
        resolution: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

pub fn run(cli: Cli) -> i32 {
    match cli.command {
        Command::Run {
            scenario,
            trace,
            timing,
            seed,
        } => {
            if let Some(seed) = seed {
                println!("seed: {seed}");
            }
            cmd_run(&scenario, trace.as_deref(), timing)
        }
        Command::Check { scenario } => cmd_check(&scenario),
        Command::Bench {
            scenario,
            joints,
            repeats,
            out,
            seed,
        } => {
            if let Some(seed) = seed {
                println!("seed: {seed}");
            }
            cmd_bench(&scenario, &joints, repeats, out.as_deref())
        }
        Command::Workspace {
            scenario,
            resolution,
            out,
        } => cmd_workspace(&scenario, resolution, out.as_deref()),
    }
}

/// Execute a scenario; write the trace CSV when requested.
pub fn cmd_run(scenario_path: &Path, trace_path: Option<&Path>, timing: bool) -> i32 {
    let loaded = match load_scenario(scenario_path) {
        Ok(l) => l,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INVALID;
        }
    };
    let corridor = loaded.corridor.clone().with_goal(loaded.goal());
    let result = match run_scenario(&loaded.model, &corridor, &loaded.start, &loaded.sim) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INVALID;
        }
    };

    println!("status: {:?}", result.status);
    println!(
        "steps: {} ({:.3} s simulated)",
        result.steps,
        result.steps as f64 * loaded.sim.dt
    );
    println!(
        "solve time: mean {:.3e} s, median {:.3e} s, p99 {:.3e} s ({} samples)",
        result.timing.mean, result.timing.median, result.timing.p99, result.timing.samples
    );
    println!("clamp events: {}", result.clamp_events);

    if let Some(path) = trace_path {
        let resolved = resolve_out(path);
        if let Err(e) = write_trace(&loaded.model, &result, &resolved, timing) {
            eprintln!("error: failed to write trace {}: {e}", resolved.display());
            return EXIT_INVALID;
        }
        println!("trace: {}", resolved.display());
    }

    match result.status {
        SimStatus::ReachedGoal => EXIT_OK,
        SimStatus::Infeasible => EXIT_INFEASIBLE,
        SimStatus::Timeout => EXIT_TIMEOUT,
    }
}

/// Validate corridor connectivity, goal membership and start containment.
pub fn cmd_check(scenario_path: &Path) -> i32 {
    let loaded = match load_scenario(scenario_path) {
        Ok(l) => l,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INVALID;
        }
    };
    let corridor = loaded.corridor.clone().with_goal(loaded.goal());
    let start_edges = match edge_points(&loaded.model, &loaded.start) {
        Ok(pts) => pts,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INVALID;
        }
    };
    let report = corridor.validate(&start_edges);
    print!("{report}");
    println!("sets: {}", corridor.len());
    if report.is_valid() {
        println!("scenario ok");
        EXIT_OK
    } else {
        eprintln!("error: scenario failed validation");
        EXIT_INVALID
    }
}

/// Joint-count scaling benchmark on an arm scenario.
pub fn cmd_bench(
    scenario_path: &Path,
    joints: &[usize],
    repeats: usize,
    out: Option<&Path>,
) -> i32 {
    if joints.is_empty() || joints.iter().any(|j| !(1..=4).contains(j)) {
        eprintln!("error: --joints values must lie in 1..=4");
        return EXIT_INVALID;
    }
    let loaded = match load_scenario(scenario_path) {
        Ok(l) => l,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INVALID;
        }
    };
    let RobotSpec::MobileArm {
        dh, camera_mount, ..
    } = loaded.scenario.robot.clone()
    else {
        eprintln!("error: bench requires a mobile_arm scenario");
        return EXIT_INVALID;
    };
    let corridor = loaded.corridor.clone().with_goal(loaded.goal());
    let start = loaded.start.clone();
    let angles: Vec<f64> = start.angles.iter().copied().collect();

    let rows = match benchmark_scaling(
        joints,
        repeats,
        |n| {
            let arm = arm_variant(
                dh.clone(),
                n,
                Some(bench_edge_frames(n)),
                angles.clone(),
                camera_mount,
            )
            .map_err(|e| {
                crate::sim::SimError::Corridor(crate::corridor::CorridorError::BadGrid(
                    e.to_string(),
                ))
            })?;
            Ok((RobotModel::MobileArm(arm), start.clone()))
        },
        &corridor,
        &loaded.sim,
    ) {
        Ok(rows) => rows,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INVALID;
        }
    };

    println!("joints  median_s      p99_s         constraints  steps   status");
    for row in &rows {
        println!(
            "{:<7} {:<13.3e} {:<13.3e} {:<12} {:<7} {:?}",
            row.joints, row.median_s, row.p99_s, row.constraints, row.steps, row.status
        );
    }
    if let Some(path) = out {
        let resolved = resolve_out(path);
        let mut text = String::from("joints,median_s,p99_s,constraints\n");
        for row in &rows {
            text.push_str(&format!(
                "{},{},{},{}\n",
                row.joints,
                fmt_float(row.median_s),
                fmt_float(row.p99_s),
                row.constraints
            ));
        }
        if let Err(e) = std::fs::write(&resolved, text) {
            eprintln!("error: failed to write {}: {e}", resolved.display());
            return EXIT_INVALID;
        }
        println!("bench csv: {}", resolved.display());
    }
    EXIT_OK
}

/// Export the workspace cloud of an arm scenario.
pub fn cmd_workspace(scenario_path: &Path, resolution: usize, out: Option<&Path>) -> i32 {
    if resolution < 2 {
        eprintln!("error: --resolution must be at least 2");
        return EXIT_INVALID;
    }
    let loaded = match load_scenario(scenario_path) {
        Ok(l) => l,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INVALID;
        }
    };
    let cloud = match workspace_cloud(&loaded.model, resolution) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INVALID;
        }
    };
    let default_path = scenario_path
        .file_stem()
        .map(|s| PathBuf::from(format!("{}_workspace.csv", s.to_string_lossy())))
        .unwrap_or_else(|| PathBuf::from("workspace.csv"));
    let path = resolve_out(out.unwrap_or(&default_path));
    let mut text = String::from("x,y,z\n");
    for p in &cloud {
        text.push_str(&format!(
            "{},{},{}\n",
            fmt_float(p.x),
            fmt_float(p.y),
            fmt_float(p.z)
        ));
    }
    if let Err(e) = std::fs::write(&path, text) {
        eprintln!("error: failed to write {}: {e}", path.display());
        return EXIT_INVALID;
    }
    println!(
        "workspace cloud: {} rows -> {}",
        cloud.len(),
        path.display()
    );
    EXIT_OK
}

/// 17 significant digits, enough to round-trip any f64.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn resolve_out(path: &Path) -> PathBuf {
    if path.is_relative() {
        if let Ok(dir) = std::env::var(OUT_DIR_ENV) {
            return Path::new(&dir).join(path);
        }
    }
    path.to_path_buf()
}

/// Trace CSV: `t,<state>,<input>,active_set,minH_e0..,min_dist,solve_time_s`.
/// Solve times are zeroed unless `timing` is set, keeping default output
/// byte-identical across runs.
pub fn write_trace(
    model: &RobotModel,
    result: &SimResult,
    path: &Path,
    timing: bool,
) -> std::io::Result<()> {
    let mut text = String::from("t");
    for label in state_labels(model) {
        text.push(',');
        text.push_str(&label);
    }
    for label in input_labels(model) {
        text.push(',');
        text.push_str(&label);
    }
    text.push_str(",active_set");
    for k in 0..model.edge_point_count() {
        text.push_str(&format!(",minH_e{k}"));
    }
    text.push_str(",min_dist,solve_time_s\n");
    for row in &result.trace {
        push_trace_row(&mut text, row, timing);
    }
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(path, text)
}

fn push_trace_row(text: &mut String, row: &TraceRow, timing: bool) {
    text.push_str(&fmt_float(row.t));
    for v in row.state.iter().chain(row.input.iter()) {
        text.push(',');
        text.push_str(&fmt_float(*v));
    }
    text.push_str(&format!(",{}", row.active_set));
    for v in &row.min_h {
        text.push(',');
        text.push_str(&fmt_float(*v));
    }
    text.push(',');
    text.push_str(&fmt_float(row.min_dist));
    text.push(',');
    text.push_str(&fmt_float(if timing { row.solve_time } else { 0.0 }));
    text.push('\n');
}

/// Parse a trace CSV back into rows (used by tests and the demo tooling).
pub fn parse_trace(text: &str) -> Option<Vec<TraceRow>> {
    let mut lines = text.lines();
    let header = lines.next()?;
    let cols: Vec<&str> = header.split(',').collect();
    let min_h_count = cols.iter().filter(|c| c.starts_with("minH_e")).count();
    let active_idx = cols.iter().position(|c| *c == "active_set")?;
    let input_idx = cols
        .iter()
        .position(|c| *c == "v_x" || c.starts_with("qd"))?;
    let mut rows = Vec::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols.len() {
            return None;
        }
        let parse = |s: &str| s.parse::<f64>().ok();
        let floats = |range: std::ops::Range<usize>| -> Option<Vec<f64>> {
            fields[range].iter().map(|s| parse(s)).collect()
        };
        rows.push(TraceRow {
            t: parse(fields[0])?,
            state: floats(1..input_idx)?,
            input: floats(input_idx..active_idx)?,
            active_set: fields[active_idx].parse::<usize>().ok()?,
            min_h: floats(active_idx + 1..active_idx + 1 + min_h_count)?,
            min_dist: parse(fields[active_idx + 1 + min_h_count])?,
            solve_time: parse(fields[active_idx + 2 + min_h_count])?,
        });
    }
    Some(rows)
}
