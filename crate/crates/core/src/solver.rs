//! Optimal investment with claim holdings: `u(x, q) = max_H E[U(x + gains·H + q·f)]`.
//!
//! The primal problem is solved by damped Newton on the holdings with the
//! exact Hessian. The dual optimizer is read off the primal one:
//! `z = U'(X̂ + q·f)/y` with `y = E[U'(X̂ + q·f)]`.

use alloc::vec;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};
use crate::linalg;
use crate::lp::{self, LpStatus};
use crate::market::FiniteMarket;
use crate::utility::Utility;

/// Tunable constants of the Newton iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Converged when `max_j |E[U'·gain_j]| < foc_tol · max(1, y)`.
    pub foc_tol: f64,
    pub max_iter: usize,
    pub fraction_to_boundary: f64,
    pub shrink: f64,
    pub armijo: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { foc_tol: 1e-11, max_iter: 200, fraction_to_boundary: 0.99, shrink: 0.5, armijo: 1e-4 }
    }
}

/// The agent's problem at initial capital `x` and claim quantities `q`.
#[derive(Debug, Clone)]
pub struct PrimalProblem<'a> {
    pub market: &'a FiniteMarket,
    pub utility: &'a Utility,
    pub x: f64,
    pub q: Vec<f64>,
}

impl<'a> PrimalProblem<'a> {
    pub fn new(market: &'a FiniteMarket, utility: &'a Utility, x: f64, q: Vec<f64>) -> Self {
        PrimalProblem { market, utility, x, q }
    }

    /// The problem without claims.
    pub fn at_zero(market: &'a FiniteMarket, utility: &'a Utility, x: f64) -> Self {
        let m = market.n_claims();
        PrimalProblem { market, utility, x, q: vec![0.0; m] }
    }
}

#[derive(Debug, Clone)]
pub struct PrimalSolution {
    pub x: f64,
    pub q: Vec<f64>,
    /// Optimal holdings (minimum-norm among optimizers when gains are degenerate).
    pub h: Vec<f64>,
    /// Optimal wealth from trading, `x + gains·H`; total terminal wealth is `X̂ + q·f`.
    pub x_hat: Vec<f64>,
    pub u_value: f64,
    /// `E[U'(X̂ + q·f)]`; equals `u_x(x, q)`.
    pub y: f64,
    /// Dual density `U'(X̂ + q·f)/y`.
    pub z: Vec<f64>,
    pub iterations: usize,
    pub foc_residual: f64,
}

impl PrimalSolution {
    /// Total terminal wealth `X̂ + q·f`.
    pub fn terminal_wealth(&self, market: &FiniteMarket) -> Vec<f64> {
        let e = market.endowment(&self.q);
        self.x_hat.iter().zip(&e).map(|(a, b)| a + b).collect()
    }

    /// Claim prices `Σ p z f` at `(x, q)`.
    pub fn prices(&self, market: &FiniteMarket) -> Vec<f64> {
        (0..market.n_claims()).map(|i| market.expectation(&self.z, &market.claim_column(i))).collect()
    }
}

struct State {
    h: DVector<f64>,
    wealth: Vec<f64>,
    value: f64,
    grad: DVector<f64>,
    y: f64,
}

fn evaluate(market: &FiniteMarket, utility: &Utility, base: &[f64], h: DVector<f64>) -> Option<State> {
    let gain = market.gain_of(h.as_slice());
    let wealth: Vec<f64> = base.iter().zip(&gain).map(|(b, g)| b + g).collect();
    if wealth.iter().any(|w| !(*w > 0.0)) {
        return None;
    }
    let probs = market.probs();
    let mut value = 0.0;
    let mut y = 0.0;
    let mut pu1 = Vec::with_capacity(wealth.len());
    for (k, w) in wealth.iter().enumerate() {
        let d = utility.eval_unchecked(*w);
        value += probs[k] * d.value;
        y += probs[k] * d.d1;
        pu1.push(d.d1);
    }
    let grad = linalg::weighted_apply_t(market.gains(), probs, &pu1);
    Some(State { h, wealth, value, grad, y })
}

fn newton_direction(market: &FiniteMarket, utility: &Utility, s: &State) -> DVector<f64> {
    let w: Vec<f64> = market.probs().iter().zip(&s.wealth).map(|(p, x)| -p * utility.u2(*x)).collect();
    let neg_hess = linalg::weighted_gram(market.gains(), &w);
    linalg::solve_psd_vec(&neg_hess, &s.grad)
}

fn max_step(market: &FiniteMarket, wealth: &[f64], d: &DVector<f64>, frac: f64) -> f64 {
    let dg = market.gain_of(d.as_slice());
    let mut alpha: f64 = 1.0;
    for (w, g) in wealth.iter().zip(&dg) {
        if *g < 0.0 {
            alpha = alpha.min(frac * w / -g);
        }
    }
    alpha
}

/// Holdings with strictly positive wealth, found by maximizing the worst-state margin.
fn feasible_start(market: &FiniteMarket, base: &[f64], scale: f64) -> Result<DVector<f64>> {
    let (k, j) = market.gains().shape();
    // Variables: H+ (j), H- (j), t, s (k), cap slack.
    let n = 2 * j + 1 + k + 1;
    let mut a = DMatrix::zeros(k + 1, n);
    let mut b = vec![0.0; k + 1];
    let g = market.gains();
    for r in 0..k {
        for c in 0..j {
            a[(r, c)] = -g[(r, c)];
            a[(r, j + c)] = g[(r, c)];
        }
        a[(r, 2 * j)] = 1.0;
        a[(r, 2 * j + 1 + r)] = 1.0;
        b[r] = base[r];
    }
    a[(k, 2 * j)] = 1.0;
    a[(k, n - 1)] = 1.0;
    b[k] = scale;
    let mut c = vec![0.0; n];
    c[2 * j] = 1.0;
    let sol = lp::maximize(&c, &a, &b)?;
    if sol.status != LpStatus::Optimal || sol.x[2 * j] <= 1e-12 * scale {
        return Err(Error::Infeasible(
            "no trading strategy keeps terminal wealth strictly positive in every state".into(),
        ));
    }
    Ok(DVector::from_fn(j, |c, _| sol.x[c] - sol.x[j + c]))
}

/// Solves the primal problem with default options.
pub fn solve_primal(problem: &PrimalProblem<'_>) -> Result<PrimalSolution> {
    solve_primal_with(problem, &SolverOptions::default())
}

pub fn solve_primal_with(problem: &PrimalProblem<'_>, opts: &SolverOptions) -> Result<PrimalSolution> {
    let PrimalProblem { market, utility, x, ref q } = *problem;
    utility.require_positive_domain()?;
    if !(x.is_finite() && x > 0.0) {
        return Err(invalid!("initial capital must be positive and finite (got {x})"));
    }
    if q.len() != market.n_claims() || q.iter().any(|v| !v.is_finite()) {
        return Err(invalid!("expected {} finite claim quantities, got {}", market.n_claims(), q.len()));
    }
    let endow = market.endowment(q);
    let base: Vec<f64> = endow.iter().map(|e| x + e).collect();
    let j = market.n_assets();
    let h0 = if base.iter().all(|w| *w > 0.0) { DVector::zeros(j) } else { feasible_start(market, &base, x)? };
    let mut s = evaluate(market, utility, &base, h0)
        .ok_or_else(|| Error::Infeasible("starting point leaves the wealth domain".into()))?;

    let residual = |s: &State| linalg::max_abs_slice(s.grad.as_slice()) / s.y.max(1.0);
    let mut iterations = 0;
    let mut converged = residual(&s) < opts.foc_tol;
    while !converged && iterations < opts.max_iter {
        iterations += 1;
        let d = newton_direction(market, utility, &s);
        let slope = s.grad.dot(&d);
        let mut alpha = max_step(market, &s.wealth, &d, opts.fraction_to_boundary);
        let gnorm = linalg::norm2(s.grad.as_slice());
        let mut accepted = None;
        while alpha > 1e-20 {
            if let Some(t) = evaluate(market, utility, &base, &s.h + &d * alpha) {
                let armijo = t.value >= s.value + opts.armijo * alpha * slope;
                // Near the optimum value differences drown in roundoff; a
                // smaller gradient is then the only usable progress signal.
                let roundoff = t.value >= s.value - 4.0 * f64::EPSILON * s.value.abs().max(1.0)
                    && linalg::norm2(t.grad.as_slice()) < gnorm;
                if armijo || roundoff {
                    accepted = Some(t);
                    break;
                }
            }
            alpha *= opts.shrink;
        }
        match accepted {
            Some(t) => s = t,
            None => break,
        }
        converged = residual(&s) < opts.foc_tol;
    }
    if !converged {
        return Err(Error::NonConvergence { iterations, residual: residual(&s) });
    }
    // One polishing step; kept only if it stays feasible and does not hurt.
    let d = newton_direction(market, utility, &s);
    if let Some(t) = evaluate(market, utility, &base, &s.h + &d) {
        if residual(&t) <= residual(&s) {
            s = t;
        }
    }
    let y = s.y;
    let z: Vec<f64> = s.wealth.iter().map(|w| utility.u1(*w) / y).collect();
    let x_hat: Vec<f64> = s.wealth.iter().zip(&endow).map(|(w, e)| w - e).collect();
    Ok(PrimalSolution {
        x,
        q: q.clone(),
        h: s.h.iter().cloned().collect(),
        x_hat,
        u_value: s.value,
        y,
        z,
        iterations,
        foc_residual: residual(&s),
    })
}

/// Value `u(x, q)`.
pub fn value(market: &FiniteMarket, utility: &Utility, x: f64, q: &[f64]) -> Result<f64> {
    Ok(solve_primal(&PrimalProblem::new(market, utility, x, q.to_vec()))?.u_value)
}

/// Marginal utility-based prices `p(x) = Σ p z f` at `q = 0`.
pub fn marginal_price(market: &FiniteMarket, utility: &Utility, x: f64) -> Result<Vec<f64>> {
    let sol = solve_primal(&PrimalProblem::at_zero(market, utility, x))?;
    Ok(sol.prices(market))
}

/// Dual optimizer `Y(y, r)`, recovered from the primal problem at the
/// `(x, q)` whose marginal utilities are `E[U'] = y` and `E[U' f] = r`.
#[derive(Debug, Clone)]
pub struct DualOptimum {
    pub x: f64,
    pub q: Vec<f64>,
    /// `Y_T = U'(X̂ + q·f)`.
    pub y_t: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

/// Chord iteration on `(x, q) ↦ (E[U'], E[U' f])` whose Jacobian is the
/// Hessian of `u`; `hessian` is that Hessian at (or near) the starting point.
pub fn dual_via_primal(
    market: &FiniteMarket,
    utility: &Utility,
    y: f64,
    r: &[f64],
    start: (f64, &[f64]),
    hessian: &DMatrix<f64>,
) -> Result<DualOptimum> {
    let m = market.n_claims();
    if r.len() != m || start.1.len() != m || hessian.shape() != (m + 1, m + 1) {
        return Err(invalid!("dual target, start and Hessian must match the {m} claims"));
    }
    if !(y > 0.0) {
        return Err(invalid!("dual variable y must be positive"));
    }
    let lu = hessian.clone().lu();
    let scale = y + r.iter().map(|v| v.abs()).sum::<f64>();
    let (mut x, mut q) = (start.0, start.1.to_vec());
    let mut last = f64::INFINITY;
    for it in 0..100 {
        let sol = solve_primal(&PrimalProblem::new(market, utility, x, q.clone()))?;
        let y_t: Vec<f64> = sol.z.iter().map(|z| z * sol.y).collect();
        let mut f = DVector::zeros(m + 1);
        f[0] = sol.y - y;
        for i in 0..m {
            f[i + 1] = market.expectation(&y_t, &market.claim_column(i)) - r[i];
        }
        let residual = f.amax();
        last = residual;
        if residual <= 1e-14 * scale {
            return Ok(DualOptimum { x, q, y_t, residual, iterations: it });
        }
        let step = lu.solve(&f).ok_or_else(|| Error::Invariant("singular value-function Hessian".into()))?;
        x -= step[0];
        for i in 0..m {
            q[i] -= step[i + 1];
        }
    }
    Err(Error::NonConvergence { iterations: 100, residual: last })
}

/// A raw central difference at `ε` and its Richardson extrapolation from `ε, ε/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdValue {
    pub raw: f64,
    pub half: f64,
    pub extrapolated: f64,
}

impl FdValue {
    fn from_pair(raw: f64, half: f64) -> Self {
        FdValue { raw, half, extrapolated: (4.0 * half - raw) / 3.0 }
    }
}

/// Finite-difference estimates of the value-function derivatives.
#[derive(Debug, Clone)]
pub struct FdOracles {
    pub eps: f64,
    /// `∂u/∂x` from values of `u`.
    pub u_prime: FdValue,
    /// `∂²u/∂x²` from differences of the solver's `y = u_x`.
    pub u_second: FdValue,
    /// `∂u/∂qᵢ`.
    pub u_q: Vec<FdValue>,
    /// `(∂u/∂qᵢ)/(∂u/∂x)`, extrapolated.
    pub price: Vec<f64>,
    /// Price interval `[(u(q+εeᵢ) − u(q))/(ε u_x), (u(q) − u(q−εeᵢ))/(ε u_x)]`
    /// from one-sided differences; it brackets the price by concavity.
    pub price_bounds: Vec<(f64, f64)>,
}

/// Central finite differences around `(x, q)` with step `eps` (in units of
/// capital; claim steps use the same value).
pub fn fd_oracles(market: &FiniteMarket, utility: &Utility, x: f64, q: &[f64], eps: f64) -> Result<FdOracles> {
    if !(eps > 0.0) || eps >= x {
        return Err(invalid!("finite-difference step must lie in (0, x)"));
    }
    let solve = |x: f64, q: &[f64]| -> Result<PrimalSolution> {
        solve_primal(&PrimalProblem::new(market, utility, x, q.to_vec())).map_err(|e| match e {
            Error::Infeasible(_) => Error::Infeasible("finite-difference stencil leaves the feasible cone".into()),
            other => other,
        })
    };
    let centre = solve(x, q)?;
    let dx = |h: f64| -> Result<(f64, f64)> {
        let up = solve(x + h, q)?;
        let dn = solve(x - h, q)?;
        Ok(((up.u_value - dn.u_value) / (2.0 * h), (up.y - dn.y) / (2.0 * h)))
    };
    let (u1a, u2a) = dx(eps)?;
    let (u1b, u2b) = dx(eps / 2.0)?;
    let u_prime = FdValue::from_pair(u1a, u1b);
    let u_second = FdValue::from_pair(u2a, u2b);
    let mut u_q = Vec::new();
    let mut price = Vec::new();
    let mut price_bounds = Vec::new();
    for i in 0..q.len() {
        let shifted = |h: f64| {
            let mut v = q.to_vec();
            v[i] += h;
            solve(x, &v).map(|s| s.u_value)
        };
        let (pa, ma) = (shifted(eps)?, shifted(-eps)?);
        let (pb, mb) = (shifted(eps / 2.0)?, shifted(-eps / 2.0)?);
        let d = FdValue::from_pair((pa - ma) / (2.0 * eps), (pb - mb) / eps);
        price.push(d.extrapolated / u_prime.extrapolated);
        price_bounds.push(((pa - centre.u_value) / (eps * centre.y), (centre.u_value - ma) / (eps * centre.y)));
        u_q.push(d);
    }
    Ok(FdOracles { eps, u_prime, u_second, u_q, price, price_bounds })
}
