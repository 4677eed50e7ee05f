//! Dense least-distance quadratic programming.
//!
//! Solves `min ‖u - u_p‖²  s.t.  G u ≥ h` with a dual active-set method
//! (Goldfarb-Idnani specialized to the identity Hessian). Problems here
//! are tiny (m ≤ 6 variables, a few dozen rows), so all linear algebra is
//! dense and the active-set systems are re-factored per iteration.

use nalgebra::{DMatrix, DVector};

/// Least-distance problem data: project `u_p` onto `{u : Gu ≥ h}`.
#[derive(Debug, Clone)]
pub struct QpProblem {
    pub u_p: DVector<f64>,
    pub g: DMatrix<f64>,
    pub h: DVector<f64>,
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl QpProblem {
    /// Problem with default tolerance 1e-9 and iteration cap `10(m + c)`.
    pub fn new(u_p: DVector<f64>, g: DMatrix<f64>, h: DVector<f64>) -> Self {
        assert_eq!(g.nrows(), h.len(), "row count must match offset count");
        assert_eq!(g.ncols(), u_p.len(), "column count must match target size");
        let max_iterations = 10 * (u_p.len() + g.nrows()).max(1);
        Self {
            u_p,
            g,
            h,
            max_iterations,
            tolerance: 1e-9,
        }
    }

    pub fn num_rows(&self) -> usize {
        self.g.nrows()
    }

    pub fn num_vars(&self) -> usize {
        self.u_p.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    Infeasible,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub status: QpStatus,
    /// The projection of `u_p` onto the feasible polyhedron (valid when Optimal).
    pub u_star: DVector<f64>,
    /// Indices of rows active at the solution, ascending.
    pub active_rows: Vec<usize>,
    /// Lagrange multipliers per row (zero off the active set).
    pub multipliers: DVector<f64>,
    pub iterations: usize,
    pub kkt_residual: f64,
}

/// Solver instance owning scratch state. Not for concurrent use; distinct
/// instances may run in parallel.
#[derive(Debug, Default)]
pub struct QpSolver {
    active: Vec<usize>,
    lambda: Vec<f64>,
}

impl QpSolver {
    pub fn new() -> Self {
        Self::default()
    }

    /// Euclidean projection of `u_p` onto `{u : Gu ≥ h}`.
    pub fn solve_least_distance(&mut self, p: &QpProblem) -> QpSolution {
        self.solve_transposed(
            &p.u_p,
            &p.g.transpose(),
            &p.h,
            p.max_iterations,
            p.tolerance,
        )
    }

    /// Same problem with the rows supplied column-wise (`gt` is m×c), so
    /// per-row dot products run over contiguous memory. Constraints enter
    /// by most-violated-row selection with lowest-index tie-breaking,
    /// which makes iteration counts and the returned active set
    /// deterministic for identical inputs.
    pub fn solve_transposed(
        &mut self,
        u_p: &DVector<f64>,
        gt: &DMatrix<f64>,
        h: &DVector<f64>,
        max_iterations: usize,
        tolerance: f64,
    ) -> QpSolution {
        let m = u_p.len();
        let c = h.len();
        assert_eq!(gt.nrows(), m, "gt must be m×c");
        assert_eq!(gt.ncols(), c, "gt must be m×c");
        let tol = tolerance;
        self.active.clear();
        self.lambda.clear();

        let mut u = u_p.clone();
        let mut iterations = 0usize;

        loop {
            if iterations >= max_iterations {
                return self.finish(u, c, iterations, QpStatus::IterationLimit);
            }

            // Most violated row not already active (ties: lowest index).
            // Hand-rolled over the contiguous column-major storage: this
            // scan runs once per control step and dominates the solve.
            let mut worst = 0.0;
            let mut min_slack = f64::INFINITY;
            let mut chosen = None;
            let gs = gt.as_slice();
            let us = u.as_slice();
            for j in 0..c {
                let col = &gs[j * m..j * m + m];
                let mut dot = 0.0;
                for k in 0..m {
                    dot += col[k] * us[k];
                }
                let slack = dot - h[j];
                min_slack = min_slack.min(slack);
                if slack < worst && slack < -tol && !self.active.contains(&j) {
                    worst = slack;
                    chosen = Some(j);
                }
            }
            let Some(picked) = chosen else {
                return self.finish_optimal(u_p, gt, h, u, iterations, min_slack, tol);
            };

            let np: DVector<f64> = gt.column(picked).into();
            let mut lambda_new = 0.0;

            // Inner loop: take primal/dual steps until `picked` becomes
            // active or infeasibility is certified.
            loop {
                iterations += 1;
                if iterations >= max_iterations {
                    return self.finish(u, c, iterations, QpStatus::IterationLimit);
                }

                let k = self.active.len();
                // r = (N Nᵀ)⁻¹ N np,  z = np - Nᵀ r
                let (z, r) = if k == 0 {
                    (np.clone(), DVector::zeros(0))
                } else {
                    let mut n_mat = DMatrix::zeros(k, m);
                    for (row, &idx) in self.active.iter().enumerate() {
                        n_mat.row_mut(row).copy_from(&gt.column(idx).transpose());
                    }
                    let gram = &n_mat * n_mat.transpose();
                    let rhs = &n_mat * &np;
                    let r = gram
                        .clone()
                        .cholesky()
                        .map(|ch| ch.solve(&rhs))
                        .unwrap_or_else(|| {
                            gram.lu().solve(&rhs).unwrap_or_else(|| DVector::zeros(k))
                        });
                    let z = &np - n_mat.transpose() * &r;
                    (z, r)
                };

                let z_norm2 = z.norm_squared();
                let slack = gt.column(picked).dot(&u) - h[picked];

                // Dual blocking step: first active multiplier driven to zero.
                let mut t1 = f64::INFINITY;
                let mut blocker = None;
                for (i, &ri) in r.iter().enumerate() {
                    if ri > tol {
                        let ratio = self.lambda[i] / ri;
                        if ratio < t1 - 1e-15 {
                            t1 = ratio;
                            blocker = Some(i);
                        }
                    }
                }

                if z_norm2 <= tol * tol {
                    // No primal progress possible: the new normal lies in the
                    // span of the active ones.
                    match blocker {
                        None => {
                            // Farkas certificate: dual unbounded, primal infeasible.
                            return self.finish(u, c, iterations, QpStatus::Infeasible);
                        }
                        Some(b) => {
                            for (i, &ri) in r.iter().enumerate() {
                                self.lambda[i] -= t1 * ri;
                            }
                            lambda_new += t1;
                            self.drop_active(b);
                            continue;
                        }
                    }
                }

                // Step that makes the picked row exactly active.
                let t2 = -slack / z_norm2;
                if t2 <= t1 {
                    u += &z * t2;
                    for (i, &ri) in r.iter().enumerate() {
                        self.lambda[i] -= t2 * ri;
                    }
                    lambda_new += t2;
                    self.active.push(picked);
                    self.lambda.push(lambda_new);
                    break;
                }
                u += &z * t1;
                for (i, &ri) in r.iter().enumerate() {
                    self.lambda[i] -= t1 * ri;
                }
                lambda_new += t1;
                let b = blocker.expect("finite t1 implies a blocking row");
                self.drop_active(b);
            }
        }
    }

    fn drop_active(&mut self, i: usize) {
        self.active.remove(i);
        self.lambda.remove(i);
    }

    /// Final polish and residual. Multipliers accumulated over many
    /// partial steps carry float drift and near-parallel rows can linger
    /// in the active set, so the equality-constrained projection is
    /// re-solved on an independent subset of the final active rows,
    /// dropping any row whose clean multiplier turns negative. The refined
    /// point is kept when it stays primal-feasible.
    #[allow(clippy::too_many_arguments)]
    fn finish_optimal(
        &self,
        u_p: &DVector<f64>,
        gt: &DMatrix<f64>,
        h: &DVector<f64>,
        mut u: DVector<f64>,
        iterations: usize,
        mut min_slack: f64,
        tol: f64,
    ) -> QpSolution {
        let m = u_p.len();
        let c = h.len();
        let mut final_active: Vec<usize> = self.active.clone();
        let mut final_lambda: Vec<f64> = self.lambda.clone();

        if !final_active.is_empty() {
            // Gram-Schmidt filter: keep rows that stay numerically
            // independent of the ones before them.
            let mut kept: Vec<usize> = Vec::with_capacity(final_active.len());
            let mut basis: Vec<DVector<f64>> = Vec::new();
            for &idx in &final_active {
                let mut v: DVector<f64> = gt.column(idx).into();
                let scale = v.norm().max(1.0);
                for b in &basis {
                    let proj = b.dot(&v);
                    v -= b * proj;
                }
                let n = v.norm();
                if n > 1e-8 * scale {
                    basis.push(v / n);
                    kept.push(idx);
                }
            }

            let solved = loop {
                if kept.is_empty() {
                    break Some((Vec::new(), DVector::zeros(0), u_p.clone()));
                }
                let k = kept.len();
                let mut n_mat = DMatrix::zeros(k, m);
                let mut rhs = DVector::zeros(k);
                for (row, &idx) in kept.iter().enumerate() {
                    n_mat.row_mut(row).copy_from(&gt.column(idx).transpose());
                    rhs[row] = h[idx] - dot2((0..m).map(|i| (gt[(i, idx)], u_p[i])));
                }
                let mut gram = DMatrix::zeros(k, k);
                for a in 0..k {
                    for b in 0..k {
                        gram[(a, b)] = dot2((0..m).map(|i| (n_mat[(a, i)], n_mat[(b, i)])));
                    }
                }
                let chol = gram.clone().cholesky();
                let lu = chol.is_none().then(|| gram.clone().lu());
                let solve = |b: &DVector<f64>| -> Option<DVector<f64>> {
                    match (&chol, &lu) {
                        (Some(ch), _) => Some(ch.solve(b)),
                        (None, Some(lu)) => lu.solve(b),
                        _ => None,
                    }
                };
                let Some(mut lam) = solve(&rhs) else {
                    break None;
                };
                if lam.iter().any(|l| !l.is_finite()) {
                    break None;
                }
                // Drop the most negative clean multiplier and retry.
                let mut worst = None;
                let mut worst_val = -tol;
                for (i, &l) in lam.iter().enumerate() {
                    if l < worst_val {
                        worst_val = l;
                        worst = Some(i);
                    }
                }
                match worst {
                    Some(i) => {
                        kept.remove(i);
                    }
                    None => {
                        // u = u_p + Nᵀλ, then iterative refinement against
                        // the original rows. Refining through the Gram
                        // system cannot help here: its entries are already
                        // rounded, leaving slacks ~κ·eps·‖λ‖ that the
                        // complementarity bound cannot absorb.
                        let mut u_ref = DVector::from_fn(m, |i, _| {
                            dot2(
                                std::iter::once((u_p[i], 1.0))
                                    .chain((0..k).map(|j| (n_mat[(j, i)], lam[j]))),
                            )
                        });
                        for _ in 0..3 {
                            let resid = DVector::from_fn(k, |row, _| {
                                dot2(
                                    std::iter::once((h[kept[row]], 1.0))
                                        .chain((0..m).map(|c| (n_mat[(row, c)], -u_ref[c]))),
                                )
                            });
                            let Some(dlam) = solve(&resid) else { break };
                            for c in 0..m {
                                u_ref[c] = dot2(
                                    std::iter::once((u_ref[c], 1.0))
                                        .chain((0..k).map(|j| (n_mat[(j, c)], dlam[j]))),
                                );
                            }
                            lam += dlam;
                        }
                        break Some((kept.clone(), lam, u_ref));
                    }
                }
            };

            if let Some((rows, lam, u_ref)) = solved {
                let mut ms = f64::INFINITY;
                let gs = gt.as_slice();
                let us = u_ref.as_slice();
                for j in 0..c {
                    let col = &gs[j * m..j * m + m];
                    let mut dot = 0.0;
                    for i in 0..m {
                        dot += col[i] * us[i];
                    }
                    ms = ms.min(dot - h[j]);
                }
                if ms >= -tol {
                    u = u_ref;
                    min_slack = ms;
                    final_active = rows;
                    final_lambda = lam.iter().copied().collect();
                }
            }
        }

        let mut multipliers = DVector::zeros(c);
        // stationarity: u - u_p - Σ λ_a g_a
        let mut residual = &u - u_p;
        let mut comp = 0.0f64;
        let mut dual = 0.0f64;
        for (&idx, &lam) in final_active.iter().zip(&final_lambda) {
            let lam_pos = lam.max(0.0);
            multipliers[idx] = lam_pos;
            dual = dual.max(-lam);
            let col = gt.column(idx);
            residual -= col * lam_pos;
            comp = comp.max((lam_pos * (col.dot(&u) - h[idx])).abs());
        }
        let kkt = residual
            .norm()
            .max((-min_slack).max(0.0))
            .max(dual)
            .max(comp);
        let mut active_rows = final_active;
        active_rows.sort_unstable();
        QpSolution {
            status: QpStatus::Optimal,
            u_star: u,
            active_rows,
            multipliers,
            iterations,
            kkt_residual: kkt,
        }
    }

    fn finish(
        &self,
        u: DVector<f64>,
        rows: usize,
        iterations: usize,
        status: QpStatus,
    ) -> QpSolution {
        let mut multipliers = DVector::zeros(rows);
        for (&idx, &lam) in self.active.iter().zip(&self.lambda) {
            multipliers[idx] = lam.max(0.0);
        }
        let mut active_rows = self.active.clone();
        active_rows.sort_unstable();
        QpSolution {
            status,
            u_star: u,
            active_rows,
            multipliers,
            iterations,
            kkt_residual: f64::INFINITY,
        }
    }
}

// Error-free transforms for the final polish. Near-degenerate active
// sets carry multipliers of magnitude ‖λ‖ ≫ 1 whose complementarity
// residual scales like ‖λ‖²·eps when the correction chain is accumulated
// in working precision; doubled-precision dots push the returned point to
// its f64 representability limit.

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, f64::mul_add(a, b, -p))
}

/// Compensated dot product over (a, b) pairs.
fn dot2(pairs: impl Iterator<Item = (f64, f64)>) -> f64 {
    let mut sum = 0.0;
    let mut err = 0.0;
    for (x, y) in pairs {
        let (p, pe) = two_prod(x, y);
        let (s, se) = two_sum(sum, p);
        sum = s;
        err += pe + se;
    }
    sum + err
}

/// KKT residual of a primal/dual pair: the largest of the stationarity
/// norm, primal violation, dual negativity and complementary slackness.
pub fn kkt_residual(p: &QpProblem, u: &DVector<f64>, multipliers: &DVector<f64>) -> f64 {
    assert_eq!(u.len(), p.num_vars());
    assert_eq!(multipliers.len(), p.num_rows());
    let stationarity = (u - &p.u_p - p.g.transpose() * multipliers).norm();
    let mut primal = 0.0f64;
    let mut comp = 0.0f64;
    for j in 0..p.num_rows() {
        let slack = p.g.row(j).transpose().dot(u) - p.h[j];
        primal = primal.max(-slack);
        comp = comp.max((multipliers[j] * slack).abs());
    }
    let dual = multipliers.iter().fold(0.0f64, |acc, &l| acc.max(-l));
    stationarity.max(primal.max(0.0)).max(dual).max(comp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn dv(vals: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(vals)
    }

    #[test]
    fn unconstrained_returns_target() {
        let p = QpProblem::new(dv(&[1.0, -2.0]), DMatrix::zeros(0, 2), dv(&[]));
        let sol = QpSolver::new().solve_least_distance(&p);
        assert_eq!(sol.status, QpStatus::Optimal);
        assert_relative_eq!((sol.u_star - dv(&[1.0, -2.0])).norm(), 0.0);
        assert_eq!(sol.kkt_residual, 0.0);
    }

    #[test]
    fn halfspace_projection_closed_form() {
        // -u₁ ≥ 0 with target (1, 0): projection is the origin.
        let p = QpProblem::new(
            dv(&[1.0, 0.0]),
            DMatrix::from_row_slice(1, 2, &[-1.0, 0.0]),
            dv(&[0.0]),
        );
        let sol = QpSolver::new().solve_least_distance(&p);
        assert_eq!(sol.status, QpStatus::Optimal);
        assert_relative_eq!(sol.u_star[0], 0.0, epsilon = 1e-12);
        assert_relative_eq!(sol.u_star[1], 0.0, epsilon = 1e-12);
        assert_eq!(sol.active_rows, vec![0]);
        assert!(sol.kkt_residual <= 1e-10);
    }

    #[test]
    fn contradictory_rows_infeasible() {
        // u₁ ≥ 1 and -u₁ ≥ 0.
        let p = QpProblem::new(
            dv(&[0.0, 0.0]),
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, -1.0, 0.0]),
            dv(&[1.0, 0.0]),
        );
        let sol = QpSolver::new().solve_least_distance(&p);
        assert_eq!(sol.status, QpStatus::Infeasible);
    }

    #[test]
    fn box_projection() {
        // u ≤ 1 componentwise as -u ≥ -1, target (2, 2) → (1, 1).
        let p = QpProblem::new(
            dv(&[2.0, 2.0]),
            DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -1.0]),
            dv(&[-1.0, -1.0]),
        );
        let sol = QpSolver::new().solve_least_distance(&p);
        assert_eq!(sol.status, QpStatus::Optimal);
        assert_relative_eq!(sol.u_star[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(sol.u_star[1], 1.0, epsilon = 1e-12);
        assert_eq!(sol.active_rows, vec![0, 1]);
    }

    #[test]
    fn kkt_residual_examples() {
        let p = QpProblem::new(
            dv(&[1.0, 0.0]),
            DMatrix::from_row_slice(1, 2, &[-1.0, 0.0]),
            dv(&[0.0]),
        );
        // Optimal pair from the halfspace example.
        let kkt = kkt_residual(&p, &dv(&[0.0, 0.0]), &dv(&[1.0]));
        assert!(kkt <= 1e-10);
        // Deliberately wrong u = u_p: residual is the primal violation 1.0.
        let wrong = kkt_residual(&p, &dv(&[1.0, 0.0]), &dv(&[0.0]));
        assert_relative_eq!(wrong, 1.0);
        // No rows at the target: zero residual.
        let empty = QpProblem::new(dv(&[3.0]), DMatrix::zeros(0, 1), dv(&[]));
        assert_eq!(kkt_residual(&empty, &dv(&[3.0]), &dv(&[])), 0.0);
    }

    /// Brute-force oracle: enumerate every active subset, solve the
    /// equality-constrained projection, keep feasible candidates, return
    /// the best objective. Independent of the solver's iteration path.
    pub(crate) fn brute_force_projection(p: &QpProblem) -> Option<DVector<f64>> {
        let c = p.num_rows();
        let mut best: Option<(f64, DVector<f64>)> = None;
        for mask in 0..(1usize << c) {
            let rows: Vec<usize> = (0..c).filter(|j| mask & (1 << j) != 0).collect();
            let cand = if rows.is_empty() {
                p.u_p.clone()
            } else {
                let k = rows.len();
                let mut n_mat = DMatrix::zeros(k, p.num_vars());
                let mut rhs = DVector::zeros(k);
                for (i, &j) in rows.iter().enumerate() {
                    n_mat.row_mut(i).copy_from(&p.g.row(j));
                    rhs[i] = p.h[j] - p.g.row(j).transpose().dot(&p.u_p);
                }
                // u = u_p + Nᵀ(NNᵀ)⁺ rhs — least-squares handles rank deficiency.
                let gram = &n_mat * n_mat.transpose();
                match gram.svd(true, true).solve(&rhs, 1e-10) {
                    Ok(lam) => &p.u_p + n_mat.transpose() * lam,
                    Err(_) => continue,
                }
            };
            let feasible = (0..c).all(|j| p.g.row(j).transpose().dot(&cand) >= p.h[j] - 1e-8);
            if !feasible {
                continue;
            }
            let obj = (&cand - &p.u_p).norm_squared();
            if best.as_ref().is_none_or(|(b, _)| obj < *b) {
                best = Some((obj, cand));
            }
        }
        best.map(|(_, u)| u)
    }

    #[test]
    fn matches_brute_force_on_random_problems() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mut solver = QpSolver::new();
        for _ in 0..300 {
            let m = rng.random_range(1..=3);
            let c = rng.random_range(0..=4);
            let u_p = DVector::from_iterator(m, (0..m).map(|_| rng.random_range(-2.0..2.0)));
            let g = DMatrix::from_iterator(c, m, (0..c * m).map(|_| rng.random_range(-1.0..1.0)));
            let h = DVector::from_iterator(c, (0..c).map(|_| rng.random_range(-1.5..1.0)));
            let p = QpProblem::new(u_p, g, h);
            let sol = solver.solve_least_distance(&p);
            let oracle = brute_force_projection(&p);
            match (sol.status, oracle) {
                (QpStatus::Optimal, Some(u_ref)) => {
                    assert!(
                        (&sol.u_star - &u_ref).norm() < 1e-8,
                        "projection mismatch: {} vs {}",
                        sol.u_star,
                        u_ref
                    );
                    assert!(sol.kkt_residual <= 1e-9);
                }
                (QpStatus::Infeasible, None) => {}
                (status, oracle) => panic!(
                    "status {status:?} disagrees with oracle feasibility {}",
                    oracle.is_some()
                ),
            }
        }
    }

    #[test]
    fn projection_is_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let mut solver = QpSolver::new();
        for _ in 0..100 {
            let m = rng.random_range(1..=3);
            let c = rng.random_range(1..=4);
            let u_p = DVector::from_iterator(m, (0..m).map(|_| rng.random_range(-2.0..2.0)));
            let g = DMatrix::from_iterator(c, m, (0..c * m).map(|_| rng.random_range(-1.0..1.0)));
            let h = DVector::from_iterator(c, (0..c).map(|_| rng.random_range(-1.5..0.5)));
            let p = QpProblem::new(u_p, g.clone(), h.clone());
            let sol = solver.solve_least_distance(&p);
            if sol.status != QpStatus::Optimal {
                continue;
            }
            let again = solver.solve_least_distance(&QpProblem::new(sol.u_star.clone(), g, h));
            assert_eq!(again.status, QpStatus::Optimal);
            assert!((again.u_star - sol.u_star).norm() <= 1e-9);
        }
    }

    #[test]
    fn projection_is_nonexpansive() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let mut solver = QpSolver::new();
        for _ in 0..100 {
            let m = rng.random_range(1..=3);
            let c = rng.random_range(1..=4);
            let g = DMatrix::from_iterator(c, m, (0..c * m).map(|_| rng.random_range(-1.0..1.0)));
            let h = DVector::from_iterator(c, (0..c).map(|_| rng.random_range(-1.5..0.5)));
            let a = DVector::from_iterator(m, (0..m).map(|_| rng.random_range(-2.0..2.0)));
            let b = DVector::from_iterator(m, (0..m).map(|_| rng.random_range(-2.0..2.0)));
            let sa = solver.solve_least_distance(&QpProblem::new(a.clone(), g.clone(), h.clone()));
            let sb = solver.solve_least_distance(&QpProblem::new(b.clone(), g, h));
            if sa.status != QpStatus::Optimal || sb.status != QpStatus::Optimal {
                continue;
            }
            assert!((sa.u_star - sb.u_star).norm() <= (a - b).norm() + 1e-9);
        }
    }

    #[test]
    fn deterministic_iterations_and_active_set() {
        let p = QpProblem::new(
            dv(&[2.0, 2.0, -1.0]),
            DMatrix::from_row_slice(
                4,
                3,
                &[-1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.5, 0.5, 0.0, 0.0, 0.0, 1.0],
            ),
            dv(&[-1.0, -1.0, 0.2, -0.5]),
        );
        let s1 = QpSolver::new().solve_least_distance(&p);
        let s2 = QpSolver::new().solve_least_distance(&p);
        assert_eq!(s1.active_rows, s2.active_rows);
        assert_eq!(s1.iterations, s2.iterations);
        assert_eq!(s1.u_star, s2.u_star);
    }
}
