//! Direct sparse solves with residual verification.
//!
//! Factorization is sparse LU with a fill-reducing column ordering and partial pivoting,
//! run single-threaded so results are bit-reproducible. The saddle systems here are
//! symmetric but indefinite, with a singular leading block, so pivoting is required.

use super::sparse::{norm2, CsrMatrix};
use crate::error::{Error, Result};
use faer::prelude::*;
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::{SparseColMat, Triplet};
use std::ops::Range;

pub const DEFAULT_RESIDUAL_TOL: f64 = 1e-10;

/// Numerical settings shared by every solve: backward-error tolerance, C0-IP penalty
/// and the triangle quadrature degree of macro and oscillating problems.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveSettings {
    pub residual_tol: f64,
    pub penalty: f64,
    pub quadrature_degree: usize,
}

impl Default for SolveSettings {
    fn default() -> Self {
        SolveSettings { residual_tol: DEFAULT_RESIDUAL_TOL, penalty: super::c0ip::DEFAULT_PENALTY, quadrature_degree: 4 }
    }
}
const REFINEMENT_STEPS: usize = 3;
/// `‖K‖‖u‖/‖f‖` bounds `κ(K)` from below; beyond this no digit of `u` is reliable.
const MAX_CONDITION_BOUND: f64 = 1e14;

/// Symmetric (possibly indefinite) system with one or more right-hand sides.
///
/// Rows listed in `multipliers` hold mean-value constraints; everything else is a field
/// unknown.
#[derive(Debug, Clone)]
pub struct SparseSymSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<Vec<f64>>,
    pub multipliers: Vec<MeanConstraint>,
}

/// Multiplier row of a mean-value constraint and the dof range of the field it acts on.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanConstraint {
    pub row: usize,
    pub field: Range<usize>,
}

pub struct Factorization {
    lu: Lu<usize, f64>,
    /// Present when the mean-value multipliers were eliminated before factorizing; `lu`
    /// then holds the pinned field block.
    bordered: Option<Bordered>,
    matrix: CsrMatrix,
    norm_inf: f64,
}

/// Elimination of mean-value constraints `Σ_c b_m(c) u_c = g_m` on fields whose block
/// annihilates constants. A dense constraint row would make the LU structure bound dense,
/// so the field block is factorized with one dof of each constrained field pinned and the
/// multipliers are recovered from compatibility.
struct Bordered {
    constraints: Vec<MeanConstraint>,
    /// Nonzero coefficients `(dof, b_m(dof))` of each constraint row.
    coefficients: Vec<Vec<(usize, f64)>>,
    /// `Σ_c b_m(c)`, the diagonal of `NᵀB` for the constant null vectors `N`.
    weights: Vec<f64>,
    /// Full index of every reduced unknown.
    reduced_to_full: Vec<usize>,
    /// Reduced index of every full unknown, `None` for multipliers and pins.
    full_to_reduced: Vec<Option<usize>>,
}

/// Solution vectors with their normwise backward errors
/// `‖Ku − f‖∞ / (‖K‖∞‖u‖∞ + ‖f‖∞)` and plain relative residuals `‖Ku − f‖ / ‖f‖`.
///
/// The tolerance applies to the backward error: for a stiff but well-posed system the
/// relative residual of any backward-stable solve is only bounded by `u·κ(K)`.
#[derive(Debug, Clone)]
pub struct Solved {
    pub solutions: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    pub relative_residuals: Vec<f64>,
}

fn check_matrix(matrix: &CsrMatrix) -> Result<()> {
    if matrix.n_rows != matrix.n_cols {
        return Err(Error::solver(format!("non-square matrix {}×{}", matrix.n_rows, matrix.n_cols)));
    }
    if let Some(v) = matrix.values.iter().find(|v| !v.is_finite()) {
        return Err(Error::solver(format!("non-finite matrix entry {v}")));
    }
    if matrix.n_rows == 0 {
        return Err(Error::solver("empty system"));
    }
    Ok(())
}

fn sparse_lu(n: usize, triplets: &[Triplet<usize, usize, f64>]) -> Result<Lu<usize, f64>> {
    faer::set_global_parallelism(faer::Par::Seq);
    let a =
        SparseColMat::<usize, f64>::try_new_from_triplets(n, n, triplets).map_err(|e| Error::solver(format!("matrix construction failed: {e:?}")))?;
    a.sp_lu().map_err(|e| Error::solver(format!("factorization failed (n = {n}): {e:?}")))
}

fn row_norm_inf(matrix: &CsrMatrix) -> f64 {
    (0..matrix.n_rows).map(|r| matrix.row(r).map(|(_, v)| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

pub fn factorize(matrix: &CsrMatrix) -> Result<Factorization> {
    check_matrix(matrix)?;
    let n = matrix.n_rows;
    let mut triplets = Vec::with_capacity(matrix.nnz());
    for r in 0..n {
        for (c, v) in matrix.row(r) {
            triplets.push(Triplet::new(r, c, v));
        }
    }
    let lu = sparse_lu(n, &triplets)?;
    Ok(Factorization { lu, bordered: None, matrix: matrix.clone(), norm_inf: row_norm_inf(matrix) })
}

/// Factorize a system with mean-value multiplier rows. When every constraint acts on a
/// disjoint block of dofs whose constant vector spans the field block's null space, the
/// multipliers are eliminated; otherwise the full matrix is factorized as is.
pub fn factorize_system(system: &SparseSymSystem) -> Result<Factorization> {
    let matrix = &system.matrix;
    check_matrix(matrix)?;
    match bordered_structure(matrix, &system.multipliers) {
        Some(b) => {
            let mut triplets = Vec::with_capacity(matrix.nnz());
            for (ri, &r) in b.reduced_to_full.iter().enumerate() {
                for (c, v) in matrix.row(r) {
                    if let Some(ci) = b.full_to_reduced[c] {
                        triplets.push(Triplet::new(ri, ci, v));
                    }
                }
            }
            let lu = sparse_lu(b.reduced_to_full.len(), &triplets)?;
            Ok(Factorization { lu, bordered: Some(b), matrix: matrix.clone(), norm_inf: row_norm_inf(matrix) })
        }
        None => factorize(matrix),
    }
}

fn bordered_structure(matrix: &CsrMatrix, constraints: &[MeanConstraint]) -> Option<Bordered> {
    let n = matrix.n_rows;
    if constraints.is_empty() {
        return None;
    }
    let mut is_multiplier = vec![false; n];
    let mut owner = vec![usize::MAX; n];
    for (i, m) in constraints.iter().enumerate() {
        if m.row >= n || m.field.end > n || m.field.is_empty() || is_multiplier[m.row] {
            return None;
        }
        is_multiplier[m.row] = true;
        for c in m.field.clone() {
            if owner[c] != usize::MAX {
                return None;
            }
            owner[c] = i;
        }
    }
    if constraints.iter().any(|m| owner[m.row] != usize::MAX) {
        return None;
    }
    let mut coefficients = Vec::with_capacity(constraints.len());
    let mut weights = Vec::with_capacity(constraints.len());
    for (i, m) in constraints.iter().enumerate() {
        let mut b = Vec::new();
        for (c, v) in matrix.row(m.row).filter(|(_, v)| *v != 0.0) {
            if owner[c] != i {
                return None;
            }
            b.push((c, v));
        }
        let w: f64 = b.iter().map(|(_, v)| v).sum();
        if w == 0.0 {
            return None;
        }
        coefficients.push(b);
        weights.push(w);
    }
    // the field block must map each constant vector 1_S to zero, up to assembly rounding
    let scale = row_norm_inf(matrix);
    let mut sums = vec![0.0; constraints.len()];
    for r in (0..n).filter(|r| !is_multiplier[*r]) {
        sums.iter_mut().for_each(|s| *s = 0.0);
        for (c, v) in matrix.row(r) {
            if owner[c] != usize::MAX {
                sums[owner[c]] += v;
            }
        }
        if sums.iter().any(|s| s.abs() > 1e-11 * scale) {
            return None;
        }
    }
    let mut full_to_reduced = vec![None; n];
    let mut reduced_to_full = Vec::with_capacity(n);
    for (r, slot) in full_to_reduced.iter_mut().enumerate() {
        let pinned = owner[r] != usize::MAX && constraints[owner[r]].field.start == r;
        if !is_multiplier[r] && !pinned {
            *slot = Some(reduced_to_full.len());
            reduced_to_full.push(r);
        }
    }
    Some(Bordered { constraints: constraints.to_vec(), coefficients, weights, reduced_to_full, full_to_reduced })
}

impl Factorization {
    pub fn dim(&self) -> usize {
        self.matrix.n_rows
    }

    fn apply_inverse(&self, rhs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = self.dim();
        let Some(bd) = &self.bordered else {
            let b = Mat::<f64>::from_fn(n, rhs.len(), |i, j| rhs[j][i]);
            let x = self.lu.solve(&b);
            return (0..rhs.len()).map(|j| (0..n).map(|i| x[(i, j)]).collect()).collect();
        };
        // λ from Nᵀf = NᵀBλ, then K v = f − Bλ with pins at 0, then shift v along N
        let lambdas: Vec<Vec<f64>> =
            rhs.iter().map(|f| bd.constraints.iter().zip(&bd.weights).map(|(m, w)| f[m.field.clone()].iter().sum::<f64>() / w).collect()).collect();
        let mut reduced = Mat::<f64>::from_fn(bd.reduced_to_full.len(), rhs.len(), |i, j| rhs[j][bd.reduced_to_full[i]]);
        for (j, lam) in lambdas.iter().enumerate() {
            for (b, l) in bd.coefficients.iter().zip(lam) {
                for (c, v) in b {
                    if let Some(ci) = bd.full_to_reduced[*c] {
                        reduced[(ci, j)] -= v * l;
                    }
                }
            }
        }
        let y = self.lu.solve(&reduced);
        (0..rhs.len())
            .map(|j| {
                let mut x = vec![0.0; n];
                for (i, &r) in bd.reduced_to_full.iter().enumerate() {
                    x[r] = y[(i, j)];
                }
                for (k, m) in bd.constraints.iter().enumerate() {
                    let b = &bd.coefficients[k];
                    let shift = (rhs[j][m.row] - b.iter().map(|(c, v)| v * x[*c]).sum::<f64>()) / bd.weights[k];
                    x[m.field.clone()].iter_mut().for_each(|v| *v += shift);
                    x[m.row] = lambdas[j][k];
                }
                x
            })
            .collect()
    }

    /// Solve for every right-hand side, refine iteratively, and fail if any relative
    /// residual stays above `tol`.
    pub fn solve(&self, rhs: &[Vec<f64>], tol: f64) -> Result<Solved> {
        if rhs.is_empty() {
            return Ok(Solved { solutions: vec![], residuals: vec![], relative_residuals: vec![] });
        }
        let mut x = self.apply_inverse(rhs);
        let mut residuals = vec![0.0; rhs.len()];
        let mut relative = vec![0.0; rhs.len()];
        let mut converged = false;
        for step in 0..=REFINEMENT_STEPS {
            let mut r = Vec::with_capacity(rhs.len());
            let mut worst = 0.0f64;
            for (j, b) in rhs.iter().enumerate() {
                let rj = self.matrix.residual_extended(b, &x[j]);
                let nb = norm2(b);
                relative[j] = if nb > 0.0 { norm2(&rj) / nb } else { norm2(&rj) };
                let scale = self.norm_inf * norm_inf(&x[j]) + norm_inf(b);
                let nr = norm_inf(&rj);
                residuals[j] = if scale > 0.0 { nr / scale } else { nr };
                if !residuals[j].is_finite() || x[j].iter().any(|v| !v.is_finite()) {
                    return Err(Error::solver(format!("singular system (n = {}): non-finite solution for right-hand side {j}", self.dim())));
                }
                worst = worst.max(residuals[j]);
                r.push(rj);
            }
            if converged || step == REFINEMENT_STEPS {
                break;
            }
            // with extended residuals each step also reduces the forward error; stop once
            // the correction is below the working precision of the iterate
            let dx = self.apply_inverse(&r);
            converged = true;
            for j in 0..rhs.len() {
                if norm_inf(&dx[j]) > f64::EPSILON * norm_inf(&x[j]) {
                    converged = false;
                }
                for i in 0..x[j].len() {
                    x[j][i] += dx[j][i];
                }
            }
        }
        for (j, b) in rhs.iter().enumerate() {
            let nb = norm_inf(b);
            if nb > 0.0 && self.norm_inf * norm_inf(&x[j]) / nb > MAX_CONDITION_BOUND {
                return Err(Error::solver(format!(
                    "singular system (n = {}): condition number bound exceeds {MAX_CONDITION_BOUND:e} for right-hand side {j}",
                    self.dim()
                )));
            }
        }
        if let Some((j, res)) = residuals.iter().enumerate().find(|(_, r)| **r > tol) {
            return Err(Error::solver(format!(
                "backward error {res:e} exceeds tolerance {tol:e} for right-hand side {j} (n = {}); system is singular or ill-conditioned",
                self.dim()
            )));
        }
        Ok(Solved { solutions: x, residuals, relative_residuals: relative })
    }
}

fn norm_inf(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn solve_saddle(system: &SparseSymSystem, tol: f64) -> Result<Solved> {
    let asym = system.matrix.asymmetry();
    if asym > 1e-12 {
        return Err(Error::solver(format!("system matrix not symmetric (relative asymmetry {asym:e})")));
    }
    factorize_system(system)?.solve(&system.rhs, tol)
}
