//! Reservation prices and certainty-equivalent values, and their
//! second-order expansions around `(x, 0)`.
//!
//! * The reservation (indifference) price `b` solves `u(x) = u(x − b, q)`.
//! * The certainty-equivalent value `c` solves `u(x, q) = u(x + c)`.
//!
//! Both expand as `⟨p, q⟩ + ½ (Δx, q) M (Δx, q)ᵀ` with
//! `M₀₀ = 0`, `M₀ᵢ = p'ᵢ`, and claim block `Bᵢⱼ = Dᵢⱼ − pᵢ p'ⱼ` for `b`,
//! `Cᵢⱼ = Dᵢⱼ + pᵢ p'ⱼ` for `c`. Only the symmetric part of each claim block
//! enters the quadratic form.

use alloc::vec;
use alloc::vec::Vec;
use nalgebra::DMatrix;

use crate::error::{invalid, Error, Result};
use crate::market::FiniteMarket;
use crate::sensitivity::SensitivityReport;
use crate::solver::{solve_primal, PrimalProblem};
use crate::utility::Utility;

/// A root of a monotone scalar equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub value: f64,
    /// Residual in value-function units.
    pub residual: f64,
    pub iterations: usize,
}

/// Value and marginal value `(u, u_x)` at `(x, q)`; `None` outside the domain.
fn value_and_slope(market: &FiniteMarket, utility: &Utility, x: f64, q: &[f64]) -> Result<Option<(f64, f64)>> {
    if !(x > 0.0) {
        return Ok(None);
    }
    match solve_primal(&PrimalProblem::new(market, utility, x, q.to_vec())) {
        Ok(s) => Ok(Some((s.u_value, s.y))),
        Err(Error::Infeasible(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Finds the root of a decreasing function `φ` given as `(φ, φ')`, with
/// `None` meaning "beyond the domain on the high side" (treated as `−∞`).
/// Safeguarded Newton inside an expanding bracket.
fn decreasing_root(
    mut phi: impl FnMut(f64) -> Result<Option<(f64, f64)>>,
    guess: f64,
    width: f64,
    tol: f64,
) -> Result<Root> {
    let mut lo = guess - width;
    let mut hi = guess + width;
    let mut expansions = 0;
    loop {
        match phi(lo)? {
            Some((v, _)) if v > 0.0 => break,
            Some(_) => lo -= width * (1 << expansions.min(30)) as f64,
            // Infeasible on the low side: move up towards the guess.
            None => lo = 0.5 * (lo + guess),
        }
        expansions += 1;
        if expansions > 60 {
            return Err(Error::Infeasible("could not bracket the root from below".into()));
        }
    }
    expansions = 0;
    loop {
        match phi(hi)? {
            Some((v, _)) if v > 0.0 => hi += width * (1 << expansions.min(30)) as f64,
            _ => break,
        }
        expansions += 1;
        if expansions > 60 {
            return Err(Error::Infeasible("could not bracket the root from above".into()));
        }
    }
    let mut t = guess.clamp(lo, hi);
    for it in 1..=200 {
        let next = match phi(t)? {
            Some((v, d)) => {
                if v.abs() < tol {
                    return Ok(Root { value: t, residual: v.abs(), iterations: it });
                }
                if v > 0.0 {
                    lo = t;
                } else {
                    hi = t;
                }
                t - v / d
            }
            None => {
                hi = t;
                f64::NAN
            }
        };
        t = if next > lo && next < hi { next } else { 0.5 * (lo + hi) };
        if hi - lo < 1e-15 * (1.0 + t.abs()) {
            break;
        }
    }
    let residual = phi(t)?.map(|(v, _)| v.abs()).unwrap_or(f64::INFINITY);
    if residual < tol {
        Ok(Root { value: t, residual, iterations: 200 })
    } else {
        Err(Error::NonConvergence { iterations: 200, residual })
    }
}

fn root_tol(y: f64, x: f64) -> f64 {
    1e-11 * y.abs() * x
}

fn check_inputs(market: &FiniteMarket, x: f64, q: &[f64]) -> Result<()> {
    if q.len() != market.n_claims() {
        return Err(invalid!("expected {} claim quantities, got {}", market.n_claims(), q.len()));
    }
    if !(x > 0.0) {
        return Err(invalid!("initial capital must be positive"));
    }
    Ok(())
}

/// `b` with `u(x) = u(x − b, q)`.
pub fn reservation_price(market: &FiniteMarket, utility: &Utility, x: f64, q: &[f64]) -> Result<Root> {
    check_inputs(market, x, q)?;
    let zero = vec![0.0; q.len()];
    let base = solve_primal(&PrimalProblem::new(market, utility, x, zero))?;
    if q.iter().all(|v| *v == 0.0) {
        return Ok(Root { value: 0.0, residual: 0.0, iterations: 0 });
    }
    let guess: f64 = base.prices(market).iter().zip(q).map(|(p, q)| p * q).sum();
    let target = base.u_value;
    decreasing_root(
        |b| Ok(value_and_slope(market, utility, x - b, q)?.map(|(u, y)| (u - target, -y))),
        guess,
        0.5 * x,
        root_tol(base.y, x),
    )
}

/// `c` with `u(x, q) = u(x + c)`.
pub fn certainty_equivalent(market: &FiniteMarket, utility: &Utility, x: f64, q: &[f64]) -> Result<Root> {
    check_inputs(market, x, q)?;
    let zero = vec![0.0; q.len()];
    let base = solve_primal(&PrimalProblem::new(market, utility, x, zero.clone()))?;
    if q.iter().all(|v| *v == 0.0) {
        return Ok(Root { value: 0.0, residual: 0.0, iterations: 0 });
    }
    let with = solve_primal(&PrimalProblem::new(market, utility, x, q.to_vec()))?;
    let guess: f64 = base.prices(market).iter().zip(q).map(|(p, q)| p * q).sum();
    let target = with.u_value;
    // u(x + c) − target is increasing in c; negate to reuse the decreasing solver.
    let r = decreasing_root(
        |c| Ok(value_and_slope(market, utility, x - c, &zero)?.map(|(u, y)| (u - target, -y))),
        -guess,
        0.5 * x,
        root_tol(base.y, x),
    )?;
    Ok(Root { value: -r.value, ..r })
}

/// The expansion matrices, raw and symmetrized.
#[derive(Debug, Clone)]
pub struct ExpansionMatrices {
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub b_sym: DMatrix<f64>,
    pub c_sym: DMatrix<f64>,
}

/// Assembles the `(m+1) × (m+1)` expansion matrices from a sensitivity report.
pub fn expansion_matrices(rep: &SensitivityReport) -> ExpansionMatrices {
    let m = rep.p.len();
    let build = |sign: f64| {
        DMatrix::from_fn(m + 1, m + 1, |i, j| match (i, j) {
            (0, 0) => 0.0,
            (0, j) => rep.p_prime[j - 1],
            (i, 0) => rep.p_prime[i - 1],
            (i, j) => rep.d[(i - 1, j - 1)] + sign * rep.p[i - 1] * rep.p_prime[j - 1],
        })
    };
    let b = build(-1.0);
    let c = build(1.0);
    let b_sym = (&b + b.transpose()) * 0.5;
    let c_sym = (&c + c.transpose()) * 0.5;
    ExpansionMatrices { b, c, b_sym, c_sym }
}

/// Which of the two quantities to expand.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    Reservation,
    CertaintyEquivalent,
}

/// Directional check at one step size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalePoint {
    pub eps: f64,
    /// `value(x + ε dx, ε dq) − ε ⟨p, dq⟩`.
    pub second_order: f64,
    /// `second_order / ε²`.
    pub scaled: f64,
}

/// Ratio test and stencil fit along one direction `d = (dx, dq)`.
#[derive(Debug, Clone)]
pub struct DirectionalFit {
    /// `½ dᵀ M d` from the expansion matrix.
    pub predicted: f64,
    pub points: Vec<ScalePoint>,
    /// `|scaled(ε₀) − scaled(ε₁)| / |scaled(ε₁)|` for the first two scales.
    pub stability: f64,
    /// `|scaled(ε_last) − predicted| / |predicted|`.
    pub relative_error: f64,
    /// `dᵀ M d` from a five-point second difference at the first scale.
    pub stencil_curvature: f64,
    pub stencil_relative_error: f64,
}

fn evaluate(market: &FiniteMarket, utility: &Utility, which: Quantity, x: f64, q: &[f64]) -> Result<f64> {
    // The base point of the expansion is the shifted capital with q scaled.
    Ok(match which {
        Quantity::Reservation => reservation_price(market, utility, x, q)?.value,
        Quantity::CertaintyEquivalent => certainty_equivalent(market, utility, x, q)?.value,
    })
}

/// Evaluates `value(x + ε dx, ε dq)` for each `ε` and compares with the
/// quadratic form of `matrix`.
#[allow(clippy::too_many_arguments)]
pub fn directional_fit(
    market: &FiniteMarket,
    utility: &Utility,
    rep: &SensitivityReport,
    which: Quantity,
    matrix: &DMatrix<f64>,
    dx: f64,
    dq: &[f64],
    eps: &[f64],
) -> Result<DirectionalFit> {
    if eps.len() < 2 {
        return Err(invalid!("the ratio test needs at least two step sizes"));
    }
    let x = rep.x;
    let mut d = vec![dx];
    d.extend_from_slice(dq);
    let n = d.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += d[i] * matrix[(i, j)] * d[j];
        }
    }
    let predicted = 0.5 * quad;
    let linear: f64 = rep.p.iter().zip(dq).map(|(p, q)| p * q).sum();
    let at = |t: f64| -> Result<f64> {
        let q: Vec<f64> = dq.iter().map(|v| v * t).collect();
        Ok(evaluate(market, utility, which, x + t * dx, &q)? - t * linear)
    };
    let mut points = Vec::with_capacity(eps.len());
    for &e in eps {
        let s = at(e)?;
        points.push(ScalePoint { eps: e, second_order: s, scaled: s / (e * e) });
    }
    let stability = (points[0].scaled - points[1].scaled).abs() / points[1].scaled.abs();
    let last = points[points.len() - 1].scaled;
    let relative_error = (last - predicted).abs() / predicted.abs();
    let h = eps[0];
    let s2 = [at(-2.0 * h)?, at(-h)?, 0.0, at(h)?, at(2.0 * h)?];
    let stencil_curvature = (-s2[4] + 16.0 * s2[3] - 30.0 * s2[2] + 16.0 * s2[1] - s2[0]) / (12.0 * h * h);
    let stencil_relative_error = (stencil_curvature - quad).abs() / quad.abs();
    Ok(DirectionalFit { predicted, points, stability, relative_error, stencil_curvature, stencil_relative_error })
}
