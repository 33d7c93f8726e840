//! Dense two-phase simplex for small linear programs in standard form
//!
//! ```text
//! maximize cᵀx  subject to  A x = b,  x ≥ 0
//! ```
//!
//! Bland's rule is used throughout, so the method terminates on degenerate
//! problems. The sizes met here (a few dozen rows) make a dense tableau the
//! simplest correct choice.

use alloc::vec;
use alloc::vec::Vec;
use nalgebra::DMatrix;

use crate::error::{invariant, Result};

const PIVOT_TOL: f64 = 1e-11;
const MAX_PIVOTS: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    obj: Vec<f64>,
    basis: Vec<usize>,
    width: usize,
}

impl Tableau {
    fn rhs(&self, i: usize) -> f64 {
        self.rows[i][self.width]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let piv = self.rows[r][c];
        for v in self.rows[r].iter_mut() {
            *v /= piv;
        }
        let prow = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for (v, p) in row.iter_mut().zip(&prow) {
                    *v -= f * p;
                }
                row[c] = 0.0;
            }
        }
        let f = self.obj[c];
        if f != 0.0 {
            for (v, p) in self.obj.iter_mut().zip(&prow) {
                *v -= f * p;
            }
            self.obj[c] = 0.0;
        }
        self.basis[r] = c;
    }

    /// Runs Bland's rule over the columns flagged in `allowed`.
    fn run(&mut self, allowed: &[bool]) -> Result<LpStatus> {
        for _ in 0..MAX_PIVOTS {
            let entering = (0..self.width).find(|&j| allowed[j] && self.obj[j] > PIVOT_TOL);
            let Some(c) = entering else {
                return Ok(LpStatus::Optimal);
            };
            let mut best: Option<(usize, f64)> = None;
            for i in 0..self.rows.len() {
                let a = self.rows[i][c];
                if a > PIVOT_TOL {
                    let ratio = self.rhs(i) / a;
                    best = match best {
                        None => Some((i, ratio)),
                        Some((bi, br)) => {
                            if ratio < br - 1e-15 * br.abs().max(1.0)
                                || ((ratio - br).abs() <= 1e-15 * br.abs().max(1.0) && self.basis[i] < self.basis[bi])
                            {
                                Some((i, ratio))
                            } else {
                                Some((bi, br))
                            }
                        }
                    };
                }
            }
            match best {
                None => return Ok(LpStatus::Unbounded),
                Some((r, _)) => self.pivot(r, c),
            }
        }
        Err(invariant!("simplex exceeded {MAX_PIVOTS} pivots"))
    }
}

/// Maximizes `cᵀx` subject to `A x = b`, `x ≥ 0`.
pub fn maximize(c: &[f64], a: &DMatrix<f64>, b: &[f64]) -> Result<LpSolution> {
    let (m, n) = a.shape();
    assert_eq!(c.len(), n);
    assert_eq!(b.len(), m);
    let width = n + m;
    let mut rows = Vec::with_capacity(m);
    for i in 0..m {
        let sign = if b[i] < 0.0 { -1.0 } else { 1.0 };
        let mut row = vec![0.0; width + 1];
        for j in 0..n {
            row[j] = sign * a[(i, j)];
        }
        row[n + i] = 1.0;
        row[width] = sign * b[i];
        rows.push(row);
    }
    // Phase 1: maximize −Σ artificials.
    let mut obj = vec![0.0; width + 1];
    for row in &rows {
        for j in 0..n {
            obj[j] += row[j];
        }
        obj[width] += row[width];
    }
    let mut t = Tableau { rows, obj, basis: (n..n + m).collect(), width };
    let allowed_all = vec![true; width];
    t.run(&allowed_all)?;
    let infeas = t.obj[width];
    let scale = 1.0 + b.iter().map(|v| v.abs()).sum::<f64>();
    if infeas > 1e-9 * scale {
        return Ok(LpSolution { status: LpStatus::Infeasible, x: vec![0.0; n], objective: f64::NAN });
    }
    // Drive artificials out of the basis; drop redundant rows.
    let mut i = 0;
    while i < t.rows.len() {
        if t.basis[i] >= n {
            let col = (0..n).find(|&j| t.rows[i][j].abs() > 1e-9);
            match col {
                Some(j) => {
                    t.pivot(i, j);
                    i += 1;
                }
                None => {
                    t.rows.remove(i);
                    t.basis.remove(i);
                }
            }
        } else {
            i += 1;
        }
    }
    // Phase 2.
    let mut obj = vec![0.0; width + 1];
    obj[..n].copy_from_slice(c);
    for (r, &bj) in t.basis.iter().enumerate() {
        let cb = if bj < n { c[bj] } else { 0.0 };
        if cb != 0.0 {
            for (v, p) in obj.iter_mut().zip(&t.rows[r]) {
                *v -= cb * p;
            }
        }
    }
    for &bj in &t.basis {
        obj[bj] = 0.0;
    }
    t.obj = obj;
    let allowed: Vec<bool> = (0..width).map(|j| j < n).collect();
    let status = t.run(&allowed)?;
    let mut x = vec![0.0; n];
    for (r, &bj) in t.basis.iter().enumerate() {
        if bj < n {
            x[bj] = t.rhs(r).max(0.0);
        }
    }
    let objective = c.iter().zip(&x).map(|(c, x)| c * x).sum();
    Ok(LpSolution { status, x, objective })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_problem() {
        // max 3x + 5y, x ≤ 4, 2y ≤ 12, 3x + 2y ≤ 18 → (2, 6), value 36.
        let a =
            DMatrix::from_row_slice(3, 5, &[1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 2.0, 0.0, 1.0, 0.0, 3.0, 2.0, 0.0, 0.0, 1.0]);
        let s = maximize(&[3.0, 5.0, 0.0, 0.0, 0.0], &a, &[4.0, 12.0, 18.0]).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - 36.0).abs() < 1e-10);
        assert!((s.x[0] - 2.0).abs() < 1e-10 && (s.x[1] - 6.0).abs() < 1e-10);
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let a = DMatrix::from_row_slice(2, 1, &[1.0, 1.0]);
        let s = maximize(&[1.0], &a, &[1.0, 2.0]).unwrap();
        assert_eq!(s.status, LpStatus::Infeasible);
        let a = DMatrix::from_row_slice(1, 2, &[1.0, -1.0]);
        let s = maximize(&[1.0, 0.0], &a, &[1.0]).unwrap();
        assert_eq!(s.status, LpStatus::Unbounded);
    }

    #[test]
    fn redundant_rows_are_dropped() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 2.0, 2.0]);
        let s = maximize(&[1.0, 2.0], &a, &[1.0, 2.0]).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - 2.0).abs() < 1e-12);
    }
}
