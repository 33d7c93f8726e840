//! Small dense linear-algebra helpers on top of nalgebra.
//!
//! Gram matrices are accumulated row by row and skip exact zeros, which keeps
//! markets reduced from trees (whose gain columns are supported on subtrees)
//! cheap to factor.

use alloc::vec::Vec;
use nalgebra::{Cholesky, ColPivQR, DMatrix, DVector, PermutationSequence, SymmetricEigen, SVD};
#[allow(unused_imports)]
use num_traits::Float;

/// Relative pivot threshold below which a Cholesky factor is treated as
/// rank-deficient and the minimum-norm route is taken instead.
const CHOLESKY_PIVOT_RATIO: f64 = 1e-13;
/// Pivots below `PINV_REL_TOL · max(k, n) · |R₀₀|` count as zero.
const PINV_REL_TOL: f64 = 1e-12;

/// `Aᵀ diag(w) A`.
pub fn weighted_gram(a: &DMatrix<f64>, w: &[f64]) -> DMatrix<f64> {
    let (rows, cols) = a.shape();
    debug_assert_eq!(rows, w.len());
    let mut out = DMatrix::zeros(cols, cols);
    let mut nz: Vec<(usize, f64)> = Vec::with_capacity(cols);
    for k in 0..rows {
        nz.clear();
        for j in 0..cols {
            let v = a[(k, j)];
            if v != 0.0 {
                nz.push((j, v));
            }
        }
        let wk = w[k];
        if wk == 0.0 {
            continue;
        }
        for (ia, &(i, vi)) in nz.iter().enumerate() {
            let s = wk * vi;
            for &(j, vj) in &nz[ia..] {
                out[(i, j)] += s * vj;
            }
        }
    }
    for i in 0..cols {
        for j in 0..i {
            out[(i, j)] = out[(j, i)];
        }
    }
    out
}

/// `Aᵀ diag(w) B` for a multi-column right-hand side.
pub fn weighted_cross(a: &DMatrix<f64>, w: &[f64], b: &DMatrix<f64>) -> DMatrix<f64> {
    let (rows, cols) = a.shape();
    let mut out = DMatrix::zeros(cols, b.ncols());
    for k in 0..rows {
        let wk = w[k];
        if wk == 0.0 {
            continue;
        }
        for j in 0..cols {
            let v = a[(k, j)];
            if v == 0.0 {
                continue;
            }
            let s = wk * v;
            for c in 0..b.ncols() {
                out[(j, c)] += s * b[(k, c)];
            }
        }
    }
    out
}

/// `Aᵀ diag(w) v`.
pub fn weighted_apply_t(a: &DMatrix<f64>, w: &[f64], v: &[f64]) -> DVector<f64> {
    let (rows, cols) = a.shape();
    let mut out = DVector::zeros(cols);
    for k in 0..rows {
        let s = w[k] * v[k];
        if s == 0.0 {
            continue;
        }
        for j in 0..cols {
            let x = a[(k, j)];
            if x != 0.0 {
                out[j] += s * x;
            }
        }
    }
    out
}

/// `Σₖ w[k]·a[k]·b[k]`.
pub fn weighted_dot(w: &[f64], a: &[f64], b: &[f64]) -> f64 {
    w.iter().zip(a).zip(b).map(|((w, a), b)| w * a * b).sum()
}

/// Solves `M X = B` for a symmetric positive semidefinite `M`.
///
/// Uses Cholesky when the factor is well conditioned and otherwise falls back
/// to the minimum-norm solution through the SVD pseudo-inverse.
pub fn solve_psd(m: &DMatrix<f64>, rhs: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    if n == 0 {
        return DMatrix::zeros(0, rhs.ncols());
    }
    if let Some(ch) = Cholesky::new(m.clone()) {
        let l = ch.l_dirty();
        let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
        for i in 0..n {
            let d = l[(i, i)].abs();
            lo = lo.min(d);
            hi = hi.max(d);
        }
        if hi > 0.0 && (lo / hi).powi(2) > CHOLESKY_PIVOT_RATIO {
            return ch.solve(rhs);
        }
    }
    min_norm_solve(m, rhs)
}

/// Complete orthogonal decomposition `A P = Q₁ R₁` (rank `r`, `Q₁` of size
/// `k × r`, `R₁` of size `r × n` upper trapezoidal) from column-pivoted QR,
/// with `R₁ᵀ = Q₂ R₂` for minimum-norm solutions.
///
/// Used instead of an SVD pseudo-inverse: it is rank revealing, backward
/// stable, and never forms a Gram matrix.
#[derive(Debug, Clone)]
pub struct Cod {
    q1: DMatrix<f64>,
    q2: DMatrix<f64>,
    r2: DMatrix<f64>,
    perm: PermutationSequence<nalgebra::Dyn>,
    rank: usize,
    ncols: usize,
}

impl Cod {
    pub fn new(a: &DMatrix<f64>) -> Self {
        let (k, n) = a.shape();
        let qr = ColPivQR::new(a.clone());
        let r = qr.r();
        let q = qr.q();
        let perm = qr.p().clone();
        let top = if r.nrows() > 0 && n > 0 { r[(0, 0)].abs() } else { 0.0 };
        let tol = PINV_REL_TOL * (k.max(n) as f64) * top;
        let rank = (0..r.nrows().min(n)).take_while(|&i| top > 0.0 && r[(i, i)].abs() > tol).count();
        let q1 = q.columns(0, rank).into_owned();
        let r1 = r.rows(0, rank).into_owned();
        let qr2 = r1.transpose().qr();
        Cod { q1, q2: qr2.q(), r2: qr2.r(), perm, rank, ncols: n }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Minimum-norm `X` minimizing `‖A X − B‖`.
    pub fn least_squares(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        if self.rank == 0 {
            return DMatrix::zeros(self.ncols, b.ncols());
        }
        let c = self.q1.transpose() * b;
        let w = self.r2.transpose().solve_lower_triangular(&c).expect("nonsingular by rank choice");
        let mut z = &self.q2 * w;
        self.perm.inv_permute_rows(&mut z);
        z
    }

    /// Minimum-norm `U` with `Aᵀ U = D` (in the least-squares sense when
    /// `D` is inconsistent).
    pub fn min_norm_transposed(&self, d: &DMatrix<f64>) -> DMatrix<f64> {
        if self.rank == 0 {
            return DMatrix::zeros(self.q1.nrows(), d.ncols());
        }
        let mut pd = d.clone();
        self.perm.permute_rows(&mut pd);
        // (AP)ᵀ U = R₁ᵀ Q₁ᵀ U = Pᵀ D with U = Q₁ Y: R₁ᵀ Y = PᵀD, solved
        // in the least-squares sense through R₁ᵀ = Q₂ R₂.
        let y = self.r2.solve_upper_triangular(&(self.q2.transpose() * pd)).expect("nonsingular by rank choice");
        &self.q1 * y
    }
}

/// `diag(√w)·A` and its complete orthogonal decomposition, for weighted
/// problems whose Gram matrix `Aᵀ diag(w) A` would square the condition
/// number. `None` for large problems (more than [`TALL_ROWS`] rows).
pub fn weighted_cod(a: &DMatrix<f64>, w: &[f64]) -> Option<Cod> {
    let (k, n) = a.shape();
    if n == 0 || k == 0 || k > TALL_ROWS {
        return None;
    }
    Some(Cod::new(&DMatrix::from_fn(k, n, |r, c| w[r].sqrt() * a[(r, c)])))
}

pub fn solve_psd_vec(m: &DMatrix<f64>, rhs: &DVector<f64>) -> DVector<f64> {
    let b = DMatrix::from_column_slice(rhs.len(), 1, rhs.as_slice());
    let x = solve_psd(m, &b);
    DVector::from_column_slice(x.as_slice())
}

/// Minimum-norm least-squares solution of `M X = B`.
pub fn min_norm_solve(m: &DMatrix<f64>, rhs: &DMatrix<f64>) -> DMatrix<f64> {
    Cod::new(m).least_squares(rhs)
}

/// Row count above which least squares goes through the (sparse-accumulated)
/// normal equations instead of a dense SVD of the design.
pub const TALL_ROWS: usize = 512;

/// Unweighted minimum-norm least squares `min ‖A c − b‖`; returns the
/// coefficients and the residual vector `b − A c`.
///
/// Tall designs (tree-reduced markets) are solved through the normal
/// equations; their Gram matrices are sparse to accumulate and well
/// conditioned in practice.
pub fn least_squares(a: &DMatrix<f64>, b: &[f64]) -> (DVector<f64>, Vec<f64>) {
    let rhs = DMatrix::from_column_slice(b.len(), 1, b);
    let coeffs = if a.ncols() == 0 {
        DMatrix::zeros(0, 1)
    } else if a.nrows() > TALL_ROWS && a.nrows() >= 2 * a.ncols() {
        let ones = alloc::vec![1.0; a.nrows()];
        let gram = weighted_gram(a, &ones);
        let atb = weighted_apply_t(a, &ones, b);
        solve_psd(&gram, &DMatrix::from_column_slice(atb.len(), 1, atb.as_slice()))
    } else {
        Cod::new(a).least_squares(&rhs)
    };
    let fitted = a * &coeffs;
    let residual = b.iter().enumerate().map(|(k, v)| v - fitted[(k, 0)]).collect();
    (DVector::from_column_slice(coeffs.as_slice()), residual)
}

/// Numerical rank with a relative singular-value threshold.
pub fn rank(a: &DMatrix<f64>, rel_tol: f64) -> usize {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0;
    }
    let sv = SVD::new(a.clone(), false, false).singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    sv.iter().filter(|s| **s > rel_tol * smax && **s > 0.0).count()
}

/// Singular values in descending order.
pub fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Vec::new();
    }
    let mut sv: Vec<f64> = SVD::new(a.clone(), false, false).singular_values.iter().cloned().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap_or(core::cmp::Ordering::Equal));
    sv
}

/// Eigenvalues of the symmetric part of `m`, ascending.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let sym = (m + m.transpose()) * 0.5;
    let mut ev: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().cloned().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
    ev
}

pub fn is_positive_definite(m: &DMatrix<f64>) -> bool {
    m.nrows() == 0 || Cholesky::new((m + m.transpose()) * 0.5).is_some()
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

pub fn max_abs_slice(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

/// Infinity norm (max absolute row sum).
pub fn inf_norm(m: &DMatrix<f64>) -> f64 {
    (0..m.nrows()).map(|i| m.row(i).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// `max |M − Mᵀ|`.
pub fn symmetry_defect(m: &DMatrix<f64>) -> f64 {
    max_abs(&(m - m.transpose()))
}

pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weighted_gram_matches_dense_product() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 2.0, -1.0, 0.5, 3.0]);
        let w = [0.2, 0.3, 0.5];
        let dense = a.transpose() * DMatrix::from_diagonal(&DVector::from_column_slice(&w)) * &a;
        assert!(max_abs(&(weighted_gram(&a, &w) - dense)) < 1e-15);
    }

    #[test]
    fn rank_deficient_system_gets_minimum_norm_solution() {
        // Two identical columns: the minimum-norm solution splits evenly.
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let x = solve_psd(&a, &DMatrix::from_column_slice(2, 1, &[2.0, 2.0]));
        assert!((x[(0, 0)] - 1.0).abs() < 1e-12);
        assert!((x[(1, 0)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn least_squares_residual_is_orthogonal() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0]);
        let (_, r) = least_squares(&a, &[1.0, 0.0, 2.0]);
        let ar = a.transpose() * DVector::from_column_slice(&r);
        assert!(ar.amax() < 1e-12);
    }

    fn rank_one() -> DMatrix<f64> {
        DMatrix::from_row_slice(
            6,
            2,
            &[
                0.04097119472721369,
                0.13887256240315507,
                -0.001724410681252378,
                -0.005844919376535104,
                -0.02950314557926504,
                -0.10000141447728988,
                0.0001412372095523191,
                0.00047872592751547756,
                0.00137257745565842,
                0.004652374665498313,
                -0.004999596247081319,
                -0.016946216639179456,
            ],
        )
    }

    #[test]
    fn cod_projection_is_orthogonal_on_rank_deficient_design() {
        let a = rank_one();
        let cod = Cod::new(&a);
        assert_eq!(cod.rank(), 1);
        let b = DMatrix::from_column_slice(6, 1, &[1.0, -0.5, 0.3, 0.2, -1.0, 0.7]);
        let x = cod.least_squares(&b);
        let resid = &a * &x - &b;
        assert!(max_abs(&(a.transpose() * resid)) < 1e-15);
        // Minimum norm: the solution lies in the row space, spanned by (1, c).
        let c = a[(0, 1)] / a[(0, 0)];
        assert!((x[(1, 0)] - c * x[(0, 0)]).abs() < 1e-12 * x.amax());
    }

    #[test]
    fn cod_transposed_solution_is_minimal_and_feasible() {
        let a = DMatrix::from_row_slice(4, 3, &[1.0, 2.0, 3.0, 0.0, 1.0, 1.0, 2.0, 0.0, 2.0, 1.0, 1.0, 2.0]);
        // Third column = first + second: consistent right-hand sides satisfy d₂ = d₀ + d₁.
        let d = DMatrix::from_column_slice(3, 1, &[1.0, -2.0, -1.0]);
        let u = Cod::new(&a).min_norm_transposed(&d);
        assert!(max_abs(&(a.transpose() * &u - &d)) < 1e-14);
        // u lies in range(A): its component orthogonal to the columns is zero.
        let proj = &a * Cod::new(&a).least_squares(&u);
        assert!(max_abs(&(proj - &u)) < 1e-14);
    }
}
