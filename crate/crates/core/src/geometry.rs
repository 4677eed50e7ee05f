//! Convex obstacle-free sets with barrier semantics.
//!
//! A [`ConvexSet`] is either an ellipsoid `{x : (x-c)ᵀP(x-c) ≤ 1}` or a
//! polytope `{x : Ax ≤ b}` with unit-normalized rows. Each face carries a
//! smooth barrier `H` that is nonnegative inside the set, so polytope
//! barriers are Euclidean distances to their faces and the set itself is
//! the intersection of the per-face zero-super level sets.

use nalgebra::{DMatrix, DVector, Vector3};
use thiserror::Error;

use crate::qp::{QpProblem, QpSolver, QpStatus};

/// Tolerance for membership and boundary predicates.
pub const FEAS_EPS: f64 = 1e-9;

/// Coordinate cap used to bound otherwise unbounded polyhedra during
/// vertex enumeration (Chebyshev validation only).
const BOX_CAP: f64 = 1e9;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("point dimension {got} does not match set dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("ellipsoid shape matrix is not symmetric (max asymmetry {0:.3e})")]
    NotSymmetric(f64),
    #[error("ellipsoid shape matrix is not positive definite (eigenvalue {0:.3e})")]
    NotPositiveDefinite(f64),
    #[error("polytope row {0} has zero norm")]
    ZeroRow(usize),
    #[error("polytope row count {rows} does not match offset count {offsets}")]
    RowCountMismatch { rows: usize, offsets: usize },
    #[error("polytope has empty interior")]
    EmptyInterior,
    #[error("polytope is unbounded along the requested direction")]
    Unbounded,
    #[error("direction vector has zero norm")]
    ZeroDirection,
    #[error("box min {0:?} must be strictly below max {1:?} in every coordinate")]
    InvalidBox(Vec<f64>, Vec<f64>),
}

/// Barrier value and gradient of one smooth face at a query point.
#[derive(Debug, Clone)]
pub struct BarrierEvaluation {
    /// `H(x)`: nonnegative inside the face's zero-super level set.
    pub value: f64,
    /// `∂H/∂x` at the query point.
    pub gradient: DVector<f64>,
}

/// An obstacle-free convex region.
#[derive(Debug, Clone)]
pub enum ConvexSet {
    Ellipsoid {
        center: DVector<f64>,
        /// Symmetric positive definite shape matrix, units 1/length².
        shape: DMatrix<f64>,
    },
    Polytope {
        /// Row matrix with unit-normalized rows; the set is `{x : Ax ≤ b}`.
        rows: DMatrix<f64>,
        offsets: DVector<f64>,
    },
}

impl ConvexSet {
    /// Build an ellipsoid, validating symmetry and positive definiteness.
    pub fn ellipsoid(center: DVector<f64>, shape: DMatrix<f64>) -> Result<Self, GeometryError> {
        let n = center.len();
        if shape.nrows() != n || shape.ncols() != n {
            return Err(GeometryError::DimensionMismatch {
                expected: n,
                got: shape.nrows(),
            });
        }
        let mut asym: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                asym = asym.max((shape[(i, j)] - shape[(j, i)]).abs());
            }
        }
        if asym > 1e-12 {
            return Err(GeometryError::NotSymmetric(asym));
        }
        let eig = shape.clone().symmetric_eigen();
        let min_eig = eig.eigenvalues.min();
        if min_eig <= 0.0 {
            return Err(GeometryError::NotPositiveDefinite(min_eig));
        }
        Ok(ConvexSet::Ellipsoid { center, shape })
    }

    /// Build a polytope `{x : Ax ≤ b}`. Rows are unit-normalized so face
    /// barriers equal Euclidean distances; an interior point must exist.
    pub fn polytope(rows: DMatrix<f64>, offsets: DVector<f64>) -> Result<Self, GeometryError> {
        if rows.nrows() != offsets.len() {
            return Err(GeometryError::RowCountMismatch {
                rows: rows.nrows(),
                offsets: offsets.len(),
            });
        }
        let mut rows = rows;
        let mut offsets = offsets;
        for i in 0..rows.nrows() {
            let norm = rows.row(i).norm();
            if norm < 1e-12 {
                return Err(GeometryError::ZeroRow(i));
            }
            for j in 0..rows.ncols() {
                rows[(i, j)] /= norm;
            }
            offsets[i] /= norm;
        }
        let set = ConvexSet::Polytope { rows, offsets };
        if set.chebyshev_radius() <= FEAS_EPS {
            return Err(GeometryError::EmptyInterior);
        }
        Ok(set)
    }

    /// Axis-aligned box `[min, max]`, expanded to unit-normal polytope rows.
    pub fn axis_box(min: &[f64], max: &[f64]) -> Result<Self, GeometryError> {
        let n = min.len();
        if max.len() != n {
            return Err(GeometryError::DimensionMismatch {
                expected: n,
                got: max.len(),
            });
        }
        if min.iter().zip(max).any(|(lo, hi)| lo >= hi) {
            return Err(GeometryError::InvalidBox(min.to_vec(), max.to_vec()));
        }
        let mut rows = DMatrix::zeros(2 * n, n);
        let mut offsets = DVector::zeros(2 * n);
        for k in 0..n {
            rows[(2 * k, k)] = 1.0;
            offsets[2 * k] = max[k];
            rows[(2 * k + 1, k)] = -1.0;
            offsets[2 * k + 1] = -min[k];
        }
        Ok(ConvexSet::Polytope { rows, offsets })
    }

    pub fn dim(&self) -> usize {
        match self {
            ConvexSet::Ellipsoid { center, .. } => center.len(),
            ConvexSet::Polytope { rows, .. } => rows.ncols(),
        }
    }

    /// Number of smooth barrier faces: 1 for an ellipsoid, one per row
    /// for a polytope.
    pub fn face_count(&self) -> usize {
        match self {
            ConvexSet::Ellipsoid { .. } => 1,
            ConvexSet::Polytope { rows, .. } => rows.nrows(),
        }
    }

    fn check_dim(&self, point: &DVector<f64>) -> Result<(), GeometryError> {
        if point.len() != self.dim() {
            return Err(GeometryError::DimensionMismatch {
                expected: self.dim(),
                got: point.len(),
            });
        }
        Ok(())
    }

    /// Per-face barrier values and gradients at `point`.
    ///
    /// Ellipsoids yield one entry `H = 1 - (x-c)ᵀP(x-c)`, `∇H = -2P(x-c)`;
    /// polytopes yield one entry per face, `H_j = b_j - a_jᵀx`, `∇H_j = -a_j`.
    pub fn barrier_faces(
        &self,
        point: &DVector<f64>,
    ) -> Result<Vec<BarrierEvaluation>, GeometryError> {
        self.check_dim(point)?;
        match self {
            ConvexSet::Ellipsoid { center, shape } => {
                let delta = point - center;
                let p_delta = shape * &delta;
                Ok(vec![BarrierEvaluation {
                    value: 1.0 - delta.dot(&p_delta),
                    gradient: -2.0 * p_delta,
                }])
            }
            ConvexSet::Polytope { rows, offsets } => Ok((0..rows.nrows())
                .map(|j| {
                    let row = rows.row(j);
                    BarrierEvaluation {
                        value: offsets[j] - row.transpose().dot(point),
                        gradient: -row.transpose(),
                    }
                })
                .collect()),
        }
    }

    /// Minimum face barrier. For polytopes with unit rows this is the
    /// signed Euclidean distance to the nearest face from inside; for
    /// ellipsoids it is the dimensionless algebraic barrier
    /// `1 - (x-c)ᵀP(x-c)` (true Euclidean boundary distance would need a
    /// root-find this crate does not implement).
    pub fn min_barrier(&self, point: &DVector<f64>) -> Result<f64, GeometryError> {
        self.check_dim(point)?;
        match self {
            ConvexSet::Ellipsoid { center, shape } => {
                let delta = point - center;
                Ok(1.0 - delta.dot(&(shape * &delta)))
            }
            ConvexSet::Polytope { rows, offsets } => {
                let mut min = f64::INFINITY;
                for j in 0..rows.nrows() {
                    min = min.min(offsets[j] - rows.row(j).transpose().dot(point));
                }
                Ok(min)
            }
        }
    }

    /// Closed-set membership: `min_barrier ≥ 0`.
    pub fn contains(&self, point: &DVector<f64>) -> Result<bool, GeometryError> {
        Ok(self.min_barrier(point)? >= 0.0)
    }

    /// A deterministic interior reference point: the ellipsoid center, or
    /// the centroid of the polytope's vertices.
    pub fn center(&self) -> DVector<f64> {
        match self {
            ConvexSet::Ellipsoid { center, .. } => center.clone(),
            ConvexSet::Polytope { rows, offsets } => {
                let verts = enumerate_vertices(rows, offsets);
                if verts.is_empty() {
                    // Unbounded degenerate polyhedron; fall back to the
                    // Chebyshev witness used at validation time.
                    return self
                        .chebyshev_center()
                        .unwrap_or_else(|| DVector::zeros(self.dim()));
                }
                let mut acc = DVector::zeros(self.dim());
                for v in &verts {
                    acc += v;
                }
                acc / verts.len() as f64
            }
        }
    }

    /// Support-style extremal point along `direction`, pulled toward the
    /// set center by `margin ∈ [0, 1)`.
    ///
    /// Ellipsoid: closed form `c + (1-margin)·P⁻¹d / √(dᵀP⁻¹d)`.
    /// Polytope: lexicographically smallest vertex maximizing `dᵀx`.
    pub fn farthest_point_along(
        &self,
        direction: &DVector<f64>,
        margin: f64,
    ) -> Result<DVector<f64>, GeometryError> {
        debug_assert!((0.0..1.0).contains(&margin), "margin must lie in [0, 1)");
        self.check_dim(direction)?;
        let norm = direction.norm();
        if norm < 1e-12 {
            return Err(GeometryError::ZeroDirection);
        }
        let d = direction / norm;
        match self {
            ConvexSet::Ellipsoid { center, shape } => {
                let chol = shape
                    .clone()
                    .cholesky()
                    .ok_or(GeometryError::NotPositiveDefinite(f64::NAN))?;
                let pinv_d = chol.solve(&d);
                let scale = (1.0 - margin) / d.dot(&pinv_d).sqrt();
                Ok(center + pinv_d * scale)
            }
            ConvexSet::Polytope { rows, offsets } => {
                if recession_unbounded(rows, &d) {
                    return Err(GeometryError::Unbounded);
                }
                let verts = enumerate_vertices(rows, offsets);
                let best = lexicographic_argmax(&verts, &d).ok_or(GeometryError::Unbounded)?;
                let center = self.center();
                Ok(&best * (1.0 - margin) + center * margin)
            }
        }
    }

    /// Whether the set, interpreted as a box, has per-axis intervals.
    /// Returns `(min, max)` when every row is an axis unit vector.
    pub fn as_box(&self) -> Option<(DVector<f64>, DVector<f64>)> {
        let (rows, offsets) = match self {
            ConvexSet::Polytope { rows, offsets } => (rows, offsets),
            _ => return None,
        };
        let n = rows.ncols();
        let mut lo = DVector::from_element(n, f64::NEG_INFINITY);
        let mut hi = DVector::from_element(n, f64::INFINITY);
        for i in 0..rows.nrows() {
            let row = rows.row(i);
            let mut axis = None;
            for k in 0..n {
                let v = row[k];
                if v.abs() > 1e-12 {
                    if axis.is_some() || (v.abs() - 1.0).abs() > 1e-9 {
                        return None;
                    }
                    axis = Some((k, v > 0.0));
                }
            }
            let (k, positive) = axis?;
            if positive {
                hi[k] = hi[k].min(offsets[i]);
            } else {
                lo[k] = lo[k].max(-offsets[i]);
            }
        }
        if lo.iter().any(|v| !v.is_finite()) || hi.iter().any(|v| !v.is_finite()) {
            return None;
        }
        Some((lo, hi))
    }

    /// Euclidean projection of `point` onto the set.
    pub fn project(
        &self,
        point: &DVector<f64>,
        solver: &mut QpSolver,
    ) -> Result<DVector<f64>, GeometryError> {
        self.check_dim(point)?;
        match self {
            ConvexSet::Polytope { rows, offsets } => {
                // min ‖x - p‖² s.t. Ax ≤ b  ⟺  G = -A, h = -b.
                let problem = QpProblem::new(point.clone(), -rows.clone(), -offsets.clone());
                let sol = solver.solve_least_distance(&problem);
                match sol.status {
                    QpStatus::Optimal => Ok(sol.u_star),
                    _ => Err(GeometryError::EmptyInterior),
                }
            }
            ConvexSet::Ellipsoid { center, shape } => {
                let delta = point - center;
                if delta.dot(&(shape * &delta)) <= 1.0 {
                    return Ok(point.clone());
                }
                Ok(center + project_onto_unit_level(shape, &delta))
            }
        }
    }

    /// Largest inscribed-ball radius (0 when the interior is empty).
    pub fn chebyshev_radius(&self) -> f64 {
        self.chebyshev().map(|(_, r)| r).unwrap_or(0.0)
    }

    fn chebyshev_center(&self) -> Option<DVector<f64>> {
        self.chebyshev().map(|(x, _)| x)
    }

    /// Chebyshev center and radius of a polytope via vertex enumeration of
    /// the lifted `(x, r)` polytope, capped to keep it bounded. Ellipsoids
    /// return their center and the radius along the stiffest axis.
    fn chebyshev(&self) -> Option<(DVector<f64>, f64)> {
        match self {
            ConvexSet::Ellipsoid { center, shape } => {
                let eig = shape.clone().symmetric_eigen();
                Some((center.clone(), 1.0 / eig.eigenvalues.max().sqrt()))
            }
            ConvexSet::Polytope { rows, offsets } => {
                let n = rows.ncols();
                let m = rows.nrows();
                // rows of the lifted polytope over (x, r):
                //   a_iᵀx + r ≤ b_i,  -r ≤ 0,  r ≤ CAP,  ±x_k ≤ CAP
                let mut lifted = DMatrix::zeros(m + 2 + 2 * n, n + 1);
                let mut lifted_b = DVector::zeros(m + 2 + 2 * n);
                for i in 0..m {
                    for j in 0..n {
                        lifted[(i, j)] = rows[(i, j)];
                    }
                    lifted[(i, n)] = 1.0;
                    lifted_b[i] = offsets[i];
                }
                lifted[(m, n)] = -1.0;
                lifted_b[m] = 0.0;
                lifted[(m + 1, n)] = 1.0;
                lifted_b[m + 1] = BOX_CAP;
                for k in 0..n {
                    lifted[(m + 2 + 2 * k, k)] = 1.0;
                    lifted_b[m + 2 + 2 * k] = BOX_CAP;
                    lifted[(m + 2 + 2 * k + 1, k)] = -1.0;
                    lifted_b[m + 2 + 2 * k + 1] = BOX_CAP;
                }
                let verts = enumerate_vertices(&lifted, &lifted_b);
                let mut dir = DVector::zeros(n + 1);
                dir[n] = 1.0;
                let best = lexicographic_argmax(&verts, &dir)?;
                let r = best[n];
                Some((best.rows(0, n).into_owned(), r))
            }
        }
    }
}

/// True when the two sets share a point.
///
/// Box-box pairs are decided exactly by interval overlap. Otherwise
/// alternating least-distance projections are run for up to `probes`
/// rounds from deterministic seed points; a point within `FEAS_EPS` of
/// both sets counts as a witness.
pub fn intersection_nonempty(a: &ConvexSet, b: &ConvexSet, probes: usize) -> bool {
    if a.dim() != b.dim() {
        return false;
    }
    if let (Some((alo, ahi)), Some((blo, bhi))) = (a.as_box(), b.as_box()) {
        return (0..alo.len()).all(|k| alo[k] <= bhi[k] + FEAS_EPS && blo[k] <= ahi[k] + FEAS_EPS);
    }
    let mut solver = QpSolver::new();
    let witness = |p: &DVector<f64>| {
        a.min_barrier(p).is_ok_and(|h| h >= -FEAS_EPS)
            && b.min_barrier(p).is_ok_and(|h| h >= -FEAS_EPS)
    };
    let ca = a.center();
    let cb = b.center();
    let mid = (&ca + &cb) * 0.5;
    for seed in [mid, ca, cb] {
        let mut x = seed;
        if witness(&x) {
            return true;
        }
        for _ in 0..probes.max(1) {
            let Ok(xa) = a.project(&x, &mut solver) else {
                break;
            };
            let Ok(xb) = b.project(&xa, &mut solver) else {
                break;
            };
            if witness(&xb) || witness(&xa) {
                return true;
            }
            if (&xb - &x).norm() < 1e-12 {
                break;
            }
            x = xb;
        }
    }
    false
}

/// Newton/bisection solve for the Euclidean projection of `c + delta`
/// onto the ellipsoid boundary `(x-c)ᵀP(x-c) = 1`, returned as `x - c`.
fn project_onto_unit_level(shape: &DMatrix<f64>, delta: &DVector<f64>) -> DVector<f64> {
    let eig = shape.clone().symmetric_eigen();
    let q = &eig.eigenvectors;
    let lam = &eig.eigenvalues;
    let y = q.transpose() * delta;
    // g(t) = Σ λᵢ yᵢ² / (1 + 2 t λᵢ)² is decreasing in t ≥ 0; find g(t) = 1.
    let g = |t: f64| -> f64 {
        (0..y.len())
            .map(|i| lam[i] * y[i] * y[i] / (1.0 + 2.0 * t * lam[i]).powi(2))
            .sum()
    };
    let mut hi = 1.0;
    while g(hi) > 1.0 {
        hi *= 2.0;
        if hi > 1e18 {
            break;
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    let scaled = DVector::from_iterator(
        y.len(),
        (0..y.len()).map(|i| y[i] / (1.0 + 2.0 * t * lam[i])),
    );
    q * scaled
}

/// All vertices of `{x : Ax ≤ b}` found by solving every n-subset of face
/// equations, deduplicated. Intended for low dimensions and modest face
/// counts; corridor sets here are 2- or 3-dimensional.
fn enumerate_vertices(rows: &DMatrix<f64>, offsets: &DVector<f64>) -> Vec<DVector<f64>> {
    let n = rows.ncols();
    let m = rows.nrows();
    let mut verts: Vec<DVector<f64>> = Vec::new();
    if m < n {
        return verts;
    }
    let mut idx: Vec<usize> = (0..n).collect();
    loop {
        let mut sub = DMatrix::zeros(n, n);
        let mut rhs = DVector::zeros(n);
        for (r, &i) in idx.iter().enumerate() {
            sub.row_mut(r).copy_from(&rows.row(i));
            rhs[r] = offsets[i];
        }
        if let Some(x) = sub.lu().solve(&rhs) {
            if x.iter().all(|v| v.is_finite() && v.abs() < 2.0 * BOX_CAP) {
                let feasible = (0..m).all(|i| rows.row(i).transpose().dot(&x) <= offsets[i] + 1e-7);
                if feasible && !verts.iter().any(|v| (v - &x).norm() < 1e-7) {
                    verts.push(x);
                }
            }
        }
        // next combination of n indices out of m
        let mut k = n;
        loop {
            if k == 0 {
                return verts;
            }
            k -= 1;
            if idx[k] + (n - k) < m {
                idx[k] += 1;
                for j in k + 1..n {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// True when the recession cone of `{Ax ≤ b}` contains a ray with positive
/// component along `d`, i.e. the support problem is unbounded.
fn recession_unbounded(rows: &DMatrix<f64>, d: &DVector<f64>) -> bool {
    let n = rows.ncols();
    let m = rows.nrows();
    // Bound the cone by the unit box and look at max dᵀr over its vertices.
    let mut cone = DMatrix::zeros(m + 2 * n, n);
    let mut cone_b = DVector::zeros(m + 2 * n);
    for i in 0..m {
        cone.row_mut(i).copy_from(&rows.row(i));
    }
    for k in 0..n {
        cone[(m + 2 * k, k)] = 1.0;
        cone_b[m + 2 * k] = 1.0;
        cone[(m + 2 * k + 1, k)] = -1.0;
        cone_b[m + 2 * k + 1] = 1.0;
    }
    enumerate_vertices(&cone, &cone_b)
        .iter()
        .any(|r| d.dot(r) > 1e-9)
}

/// Lexicographically smallest element of `verts` maximizing `dᵀv`.
fn lexicographic_argmax(verts: &[DVector<f64>], d: &DVector<f64>) -> Option<DVector<f64>> {
    let mut best: Option<&DVector<f64>> = None;
    let mut best_val = f64::NEG_INFINITY;
    for v in verts {
        let val = d.dot(v);
        if val > best_val + 1e-9 {
            best = Some(v);
            best_val = val;
        } else if val > best_val - 1e-9 {
            if let Some(b) = best {
                if lex_less(v, b) {
                    best = Some(v);
                    best_val = best_val.max(val);
                }
            }
        }
    }
    best.cloned()
}

fn lex_less(a: &DVector<f64>, b: &DVector<f64>) -> bool {
    for k in 0..a.len() {
        if a[k] < b[k] - 1e-12 {
            return true;
        }
        if a[k] > b[k] + 1e-12 {
            return false;
        }
    }
    false
}

// World-frame adapters. Corridor sets live in 2 or 3 dimensions while
// robot edge points are always 3-dimensional; a 2D set constrains the
// xy-plane and its gradients lift with zero z-component.

impl ConvexSet {
    pub fn min_barrier_world(&self, p: &Vector3<f64>) -> f64 {
        let n = self.dim();
        debug_assert!(n == 2 || n == 3, "world sets must be 2- or 3-dimensional");
        match self {
            ConvexSet::Ellipsoid { center, shape } => {
                let mut value = 1.0;
                for i in 0..n {
                    let mut pd = 0.0;
                    for j in 0..n {
                        pd += shape[(i, j)] * (p[j] - center[j]);
                    }
                    value -= (p[i] - center[i]) * pd;
                }
                value
            }
            ConvexSet::Polytope { rows, offsets } => {
                let mut min = f64::INFINITY;
                for i in 0..rows.nrows() {
                    let mut dot = 0.0;
                    for j in 0..n {
                        dot += rows[(i, j)] * p[j];
                    }
                    min = min.min(offsets[i] - dot);
                }
                min
            }
        }
    }

    pub fn contains_world(&self, p: &Vector3<f64>) -> bool {
        self.min_barrier_world(p) >= 0.0
    }

    /// Per-face evaluations with gradients lifted to 3D (zero z-component
    /// for planar sets).
    pub fn barrier_faces_world(&self, p: &Vector3<f64>) -> Vec<(f64, Vector3<f64>)> {
        let mut out = Vec::with_capacity(self.face_count());
        self.for_each_face_world(p, |_, value, gradient| out.push((value, gradient)));
        out
    }

    /// Allocation-free face walk used by the per-step constraint assembly.
    pub fn for_each_face_world(
        &self,
        p: &Vector3<f64>,
        mut visit: impl FnMut(usize, f64, Vector3<f64>),
    ) {
        let n = self.dim();
        debug_assert!(n == 2 || n == 3, "world sets must be 2- or 3-dimensional");
        match self {
            ConvexSet::Ellipsoid { center, shape } => {
                let mut grad = Vector3::zeros();
                let mut value = 1.0;
                for i in 0..n {
                    let mut pd = 0.0;
                    for j in 0..n {
                        pd += shape[(i, j)] * (p[j] - center[j]);
                    }
                    value -= (p[i] - center[i]) * pd;
                    grad[i] = -2.0 * pd;
                }
                visit(0, value, grad);
            }
            ConvexSet::Polytope { rows, offsets } => {
                for i in 0..rows.nrows() {
                    let mut grad = Vector3::zeros();
                    let mut dot = 0.0;
                    for j in 0..n {
                        dot += rows[(i, j)] * p[j];
                        grad[j] = -rows[(i, j)];
                    }
                    visit(i, offsets[i] - dot, grad);
                }
            }
        }
    }

    /// Lift an n-dimensional point to world coordinates with zero z.
    pub fn lift_world(&self, x: &DVector<f64>) -> Vector3<f64> {
        let mut p = Vector3::zeros();
        for k in 0..x.len().min(3) {
            p[k] = x[k];
        }
        p
    }
}
