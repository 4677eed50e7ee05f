//! Safe-corridor sequencing: waypoint selection, set handoff, validation
//! and a grid-maze box decomposer.
//!
//! A corridor is an ordered sequence of convex obstacle-free sets whose
//! consecutive members overlap. All edge points share one active set at a
//! time; the handoff to the next set happens only once every edge point is
//! inside it, so the convexity argument covers every link at every instant.

use nalgebra::{DVector, Vector3};
use thiserror::Error;

use crate::geometry::{intersection_nonempty, ConvexSet, GeometryError};

/// Projection rounds handed to `intersection_nonempty` during validation.
const CONNECTIVITY_PROBES: usize = 64;

#[derive(Debug, Error)]
pub enum CorridorError {
    #[error("corridor needs at least one set")]
    Empty,
    #[error("corridor sets must share one dimension (2 or 3); set {0} differs")]
    MixedDimensions(usize),
    #[error("goal lies outside the final set")]
    GoalOutsideFinalSet,
    #[error("cell ({0}, {1}) is outside the grid")]
    CellOutOfRange(usize, usize),
    #[error("cell ({0}, {1}) is blocked")]
    BlockedCell(usize, usize),
    #[error("no free 4-connected path between start and goal cells")]
    NoPath,
    #[error("occupancy grid is malformed: {0}")]
    BadGrid(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Ordered sequence of convex sets leading to a goal position.
#[derive(Debug, Clone)]
pub struct Corridor {
    sets: Vec<ConvexSet>,
    goal: Vector3<f64>,
}

impl Corridor {
    pub fn new(sets: Vec<ConvexSet>, goal: Vector3<f64>) -> Result<Self, CorridorError> {
        if sets.is_empty() {
            return Err(CorridorError::Empty);
        }
        let dim = sets[0].dim();
        if !(2..=3).contains(&dim) {
            return Err(CorridorError::MixedDimensions(0));
        }
        for (i, s) in sets.iter().enumerate() {
            if s.dim() != dim {
                return Err(CorridorError::MixedDimensions(i));
            }
        }
        Ok(Self { sets, goal })
    }

    pub fn with_goal(mut self, goal: Vector3<f64>) -> Self {
        self.goal = goal;
        self
    }

    pub fn sets(&self) -> &[ConvexSet] {
        &self.sets
    }

    pub fn set(&self, i: usize) -> &ConvexSet {
        &self.sets[i]
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn last_index(&self) -> usize {
        self.sets.len() - 1
    }

    pub fn goal(&self) -> Vector3<f64> {
        self.goal
    }

    /// Waypoint inside set `i`: the goal itself once it is a member,
    /// otherwise the support point toward the next set's center, pulled
    /// off the boundary by `margin`.
    ///
    /// A non-terminal set claims the goal only with `margin·ρ` clearance
    /// (ρ = the set's inradius proxy); a goal poking just inside an
    /// intermediate set must not stall progress toward the next one.
    pub fn select_waypoint(
        &self,
        i: usize,
        x_ref: &Vector3<f64>,
        margin: f64,
    ) -> Result<Vector3<f64>, CorridorError> {
        let set = &self.sets[i];
        let goal_clearance = set.min_barrier_world(&self.goal);
        if i == self.last_index() {
            if goal_clearance >= 0.0 {
                return Ok(self.goal);
            }
            return Err(CorridorError::GoalOutsideFinalSet);
        }
        let rho = set.min_barrier(&set.center()).unwrap_or(0.0).max(0.0);
        if goal_clearance >= margin * rho {
            return Ok(self.goal);
        }
        let n = set.dim();
        let next_center = self.sets[i + 1].center();
        let mut dir = DVector::zeros(n);
        for k in 0..n {
            dir[k] = next_center[k] - x_ref[k];
        }
        if dir.norm() < 1e-12 {
            // Reference already at the next center: freeze until handoff.
            return Ok(*x_ref);
        }
        let wp = set.farthest_point_along(&dir.normalize(), margin)?;
        Ok(set.lift_world(&wp))
    }

    /// Per-pair connectivity, goal membership in the final set and start
    /// edge-point membership in the first set.
    pub fn validate(&self, start_edge_points: &[Vector3<f64>]) -> CorridorReport {
        let pair_connectivity = self
            .sets
            .windows(2)
            .map(|w| intersection_nonempty(&w[0], &w[1], CONNECTIVITY_PROBES))
            .collect();
        let start_in_first = start_edge_points
            .iter()
            .map(|p| self.sets[0].contains_world(p))
            .collect();
        CorridorReport {
            pair_connectivity,
            goal_in_final: self.sets[self.last_index()].contains_world(&self.goal),
            start_in_first,
        }
    }
}

/// Validation outcome; `is_valid` when everything holds.
#[derive(Debug, Clone)]
pub struct CorridorReport {
    /// One flag per consecutive pair (i, i+1).
    pub pair_connectivity: Vec<bool>,
    pub goal_in_final: bool,
    /// One flag per start edge point.
    pub start_in_first: Vec<bool>,
}

impl CorridorReport {
    pub fn is_valid(&self) -> bool {
        self.pair_connectivity.iter().all(|&b| b)
            && self.goal_in_final
            && self.start_in_first.iter().all(|&b| b)
    }
}

impl std::fmt::Display for CorridorReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (i, ok) in self.pair_connectivity.iter().enumerate() {
            writeln!(
                f,
                "sets {i}-{}: {}",
                i + 1,
                if *ok { "connected" } else { "DISJOINT" }
            )?;
        }
        writeln!(
            f,
            "goal in final set: {}",
            if self.goal_in_final { "yes" } else { "NO" }
        )?;
        for (k, ok) in self.start_in_first.iter().enumerate() {
            writeln!(
                f,
                "start edge point {k} in first set: {}",
                if *ok { "yes" } else { "NO" }
            )?;
        }
        Ok(())
    }
}

/// Loop state: the active set index, the current waypoint and the active
/// set assignment per edge point (all equal under the all-points handoff).
#[derive(Debug, Clone)]
pub struct CorridorState {
    pub index: usize,
    pub waypoint: Vector3<f64>,
    pub edge_assignment: Vec<usize>,
}

impl CorridorState {
    pub fn initial(
        corridor: &Corridor,
        x_ref: &Vector3<f64>,
        edge_count: usize,
        margin: f64,
    ) -> Result<Self, CorridorError> {
        Ok(Self {
            index: 0,
            waypoint: corridor.select_waypoint(0, x_ref, margin)?,
            edge_assignment: vec![0; edge_count],
        })
    }
}

/// Hand off to the next set once every edge point is inside it. The index
/// never decreases; the waypoint is recomputed on handoff.
pub fn advance(
    corridor: &Corridor,
    state: &CorridorState,
    edge_points: &[Vector3<f64>],
    x_ref: &Vector3<f64>,
    margin: f64,
) -> Result<CorridorState, CorridorError> {
    if state.index >= corridor.last_index() {
        return Ok(state.clone());
    }
    let next = corridor.set(state.index + 1);
    if edge_points.iter().all(|p| next.contains_world(p)) {
        let index = state.index + 1;
        Ok(CorridorState {
            index,
            waypoint: corridor.select_waypoint(index, x_ref, margin)?,
            edge_assignment: vec![index; edge_points.len()],
        })
    } else {
        Ok(state.clone())
    }
}

/// Occupancy grid parsed from rows of `.` (free) and `#` (blocked).
#[derive(Debug, Clone)]
pub struct OccupancyGrid {
    rows: usize,
    cols: usize,
    blocked: Vec<bool>,
}

impl OccupancyGrid {
    pub fn parse(text: &str) -> Result<Self, CorridorError> {
        let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
        if lines.is_empty() {
            return Err(CorridorError::BadGrid("no rows".into()));
        }
        let cols = lines[0].chars().count();
        let mut blocked = Vec::with_capacity(lines.len() * cols);
        for (r, line) in lines.iter().enumerate() {
            if line.chars().count() != cols {
                return Err(CorridorError::BadGrid(format!(
                    "row {r} has {} cells, expected {cols}",
                    line.chars().count()
                )));
            }
            for ch in line.chars() {
                match ch {
                    '.' => blocked.push(false),
                    '#' => blocked.push(true),
                    other => {
                        return Err(CorridorError::BadGrid(format!(
                            "unexpected character {other:?} in row {r}"
                        )))
                    }
                }
            }
        }
        Ok(Self {
            rows: lines.len(),
            cols,
            blocked,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn free(&self, r: usize, c: usize) -> bool {
        r < self.rows && c < self.cols && !self.blocked[r * self.cols + c]
    }

    fn rect_free(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> bool {
        (r0..=r1).all(|r| (c0..=c1).all(|c| self.free(r, c)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Rect {
    r0: usize,
    r1: usize,
    c0: usize,
    c1: usize,
}

impl Rect {
    fn cell(r: usize, c: usize) -> Self {
        Rect {
            r0: r,
            r1: r,
            c0: c,
            c1: c,
        }
    }

    fn union_cell(&self, r: usize, c: usize) -> Self {
        Rect {
            r0: self.r0.min(r),
            r1: self.r1.max(r),
            c0: self.c0.min(c),
            c1: self.c1.max(c),
        }
    }

    fn contains(&self, other: &Rect) -> bool {
        self.r0 <= other.r0 && self.r1 >= other.r1 && self.c0 <= other.c0 && self.c1 >= other.c1
    }
}

/// Decompose a grid maze into a corridor of axis-aligned free boxes.
///
/// The shortest 4-connected cell path is found by breadth-first search;
/// consecutive path cells are merged greedily into free rectangles, each
/// rectangle then grown to a maximal free one. Consecutive rectangles
/// overlap by at least one cell, and the corridor goal defaults to the
/// goal cell center.
pub fn grid_maze_decompose(
    grid: &OccupancyGrid,
    start: (usize, usize),
    goal: (usize, usize),
    cell_size: f64,
) -> Result<Corridor, CorridorError> {
    for &(r, c) in &[start, goal] {
        if r >= grid.rows || c >= grid.cols {
            return Err(CorridorError::CellOutOfRange(r, c));
        }
        if !grid.free(r, c) {
            return Err(CorridorError::BlockedCell(r, c));
        }
    }
    let path = bfs_path(grid, start, goal).ok_or(CorridorError::NoPath)?;

    // Greedy merge of consecutive path cells into free bounding rectangles.
    let mut rects: Vec<Rect> = Vec::new();
    let mut cur = Rect::cell(path[0].0, path[0].1);
    for w in path.windows(2) {
        let (pr, pc) = w[0];
        let (r, c) = w[1];
        let cand = cur.union_cell(r, c);
        if grid.rect_free(cand.r0, cand.r1, cand.c0, cand.c1) {
            cur = cand;
        } else {
            rects.push(cur);
            // Restart from the previous path cell so the rectangles share it.
            cur = Rect::cell(pr, pc).union_cell(r, c);
        }
    }
    rects.push(cur);

    // Grow each rectangle to a maximal free one (N, S, W, E sweeps).
    for rect in &mut rects {
        loop {
            let mut grew = false;
            if rect.r0 > 0 && grid.rect_free(rect.r0 - 1, rect.r0 - 1, rect.c0, rect.c1) {
                rect.r0 -= 1;
                grew = true;
            }
            if rect.r1 + 1 < grid.rows && grid.rect_free(rect.r1 + 1, rect.r1 + 1, rect.c0, rect.c1)
            {
                rect.r1 += 1;
                grew = true;
            }
            if rect.c0 > 0 && grid.rect_free(rect.r0, rect.r1, rect.c0 - 1, rect.c0 - 1) {
                rect.c0 -= 1;
                grew = true;
            }
            if rect.c1 + 1 < grid.cols && grid.rect_free(rect.r0, rect.r1, rect.c1 + 1, rect.c1 + 1)
            {
                rect.c1 += 1;
                grew = true;
            }
            if !grew {
                break;
            }
        }
    }

    // Drop rectangles swallowed by a neighbor after inflation.
    let mut pruned: Vec<Rect> = Vec::with_capacity(rects.len());
    for rect in rects {
        if let Some(last) = pruned.last() {
            if last.contains(&rect) {
                continue;
            }
            if rect.contains(last) {
                pruned.pop();
            }
        }
        pruned.push(rect);
    }

    let sets = pruned
        .iter()
        .map(|rect| {
            let (min, max) = rect_to_world(rect, grid.rows, cell_size);
            ConvexSet::axis_box(&min, &max).expect("free rectangles are nonempty")
        })
        .collect();
    let goal_pos = cell_center(goal, grid.rows, cell_size);
    Corridor::new(sets, goal_pos)
}

/// World coordinates of a cell rectangle: columns map to x, rows map to y
/// with row 0 at the top of the text file.
fn rect_to_world(rect: &Rect, grid_rows: usize, s: f64) -> ([f64; 2], [f64; 2]) {
    let min = [rect.c0 as f64 * s, (grid_rows - 1 - rect.r1) as f64 * s];
    let max = [(rect.c1 + 1) as f64 * s, (grid_rows - rect.r0) as f64 * s];
    (min, max)
}

/// World center of a cell.
pub fn cell_center(cell: (usize, usize), grid_rows: usize, s: f64) -> Vector3<f64> {
    Vector3::new(
        (cell.1 as f64 + 0.5) * s,
        (grid_rows as f64 - cell.0 as f64 - 0.5) * s,
        0.0,
    )
}

fn bfs_path(
    grid: &OccupancyGrid,
    start: (usize, usize),
    goal: (usize, usize),
) -> Option<Vec<(usize, usize)>> {
    use std::collections::VecDeque;
    let idx = |r: usize, c: usize| r * grid.cols + c;
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; grid.rows * grid.cols];
    let mut seen = vec![false; grid.rows * grid.cols];
    let mut queue = VecDeque::new();
    seen[idx(start.0, start.1)] = true;
    queue.push_back(start);
    while let Some((r, c)) = queue.pop_front() {
        if (r, c) == goal {
            let mut path = vec![(r, c)];
            let mut cur = (r, c);
            while let Some(p) = parent[idx(cur.0, cur.1)] {
                path.push(p);
                cur = p;
            }
            path.reverse();
            return Some(path);
        }
        let neighbors = [
            (r.wrapping_sub(1), c),
            (r + 1, c),
            (r, c.wrapping_sub(1)),
            (r, c + 1),
        ];
        for (nr, nc) in neighbors {
            if grid.free(nr, nc) && !seen[idx(nr, nc)] {
                seen[idx(nr, nc)] = true;
                parent[idx(nr, nc)] = Some((r, c));
                queue.push_back((nr, nc));
            }
        }
    }
    None
}
