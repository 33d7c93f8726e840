//! Second-order structure of the value function around `q = 0`.
//!
//! Everything is expressed under the measure `R(x)` with weights
//! `rₖ = pₖ X̂ₖ zₖ / x` and with payoffs discounted by the numéraire `X̂/x`:
//! `g₀ ≡ 1`, `gᵢ = x fᵢ / X̂`. The discounted traded gains form the matrix
//! `M` (see [`change_numeraire`]).
//!
//! * Quadratic hedges: `hᵢ = gᵢ + M βᵢ` minimizes `E_R[A(X̂) hᵢ²]`.
//! * `Gᵢⱼ = −(y/x) E_R[A hᵢ hⱼ]`, with `G₀₀ = u''(x)`.
//! * Dual quadratics: `Nᵢ` minimizes `E_R[B Nᵢ²]` subject to
//!   `E_R[Nᵢ c] = 0` for every column `c` of `M` and `E_R[Nᵢ gⱼ] = δᵢⱼ`.
//! * `Hᵢⱼ = (x/y) E_R[B Nᵢ Nⱼ]` and `(−G) H = I`.
//! * `L` minimizes `E_R[B L²]` subject to `E_R[L] = 1`, `E_R[L c] = 0`;
//!   `Y' = z L`, `p̃ᵢ = E[Y' fᵢ]`.
//! * `p' = (u''/y)(p̃ − p)` and `D = G_qq/y − (u''/y) p p̃ᵀ`.
//!
//! Here `A` is the relative risk aversion at `X̂` and `B = 1/A`.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use nalgebra::DMatrix;

use crate::error::{invalid, invariant, Result};
use crate::linalg;
use crate::market::{change_numeraire, is_replicable, span_design, FiniteMarket};
use crate::solver::{solve_primal, PrimalProblem, PrimalSolution};
use crate::utility::Utility;
#[allow(unused_imports)]
use num_traits::Float;

/// Hard tolerance on `‖(−G)H − I‖∞`.
pub const INVERSE_TOL: f64 = 1e-8;

/// How to treat claims violating the non-replicability assumption.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Assumption1Mode {
    /// Reject claim sets with a replicable nonzero combination.
    #[default]
    Strict,
    /// Proceed; `H` and the dual quantities are skipped when singular.
    Warn,
    /// Skip the check and the dual side entirely: only the primal-side
    /// quantities `p, p̃, p', D, G` are produced. Used for claims such as the
    /// risk-tolerance probe whose `G` is singular by construction.
    PrimalOnly,
}

/// Discounted quantities under `R(x)`.
#[derive(Debug, Clone)]
pub struct DiscountedSetting {
    pub x: f64,
    pub y: f64,
    pub r: Vec<f64>,
    /// `K × (m+1)`, column 0 identically one.
    pub g: DMatrix<f64>,
    /// `K × (J+1)` discounted gains.
    pub m_basis: DMatrix<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub x_hat: Vec<f64>,
    pub z: Vec<f64>,
    pub u2_at_x_hat: Vec<f64>,
}

impl DiscountedSetting {
    pub fn n_claims(&self) -> usize {
        self.g.ncols() - 1
    }

    /// Largest `|E_R[c]|` over columns `c` of the discounted gains.
    pub fn basis_mean_defect(&self) -> f64 {
        (0..self.m_basis.ncols())
            .map(|c| self.m_basis.column(c).iter().zip(&self.r).map(|(v, r)| v * r).sum::<f64>().abs())
            .fold(0.0, f64::max)
    }
}

/// Builds the discounted setting from a `q = 0` solution.
pub fn build_discounted_setting(
    market: &FiniteMarket,
    utility: &Utility,
    sol: &PrimalSolution,
) -> Result<DiscountedSetting> {
    if sol.q.iter().any(|q| *q != 0.0) {
        return Err(invalid!("the discounted setting is defined at q = 0"));
    }
    let x = sol.x;
    let k = market.n_states();
    let m = market.n_claims();
    let probs = market.probs();
    let r: Vec<f64> = (0..k).map(|s| probs[s] * sol.x_hat[s] * sol.z[s] / x).collect();
    let f = market.claims();
    let g = DMatrix::from_fn(k, m + 1, |s, c| if c == 0 { 1.0 } else { x * f[(s, c - 1)] / sol.x_hat[s] });
    let m_basis = change_numeraire(market, &sol.x_hat, x)?;
    let a: Vec<f64> = sol.x_hat.iter().map(|w| utility.risk_aversion(*w)).collect();
    let b = a.iter().map(|v| 1.0 / v).collect();
    let u2_at_x_hat = sol.x_hat.iter().map(|w| utility.u2(*w)).collect();
    Ok(DiscountedSetting { x, y: sol.y, r, g, m_basis, a, b, x_hat: sol.x_hat.clone(), z: sol.z.clone(), u2_at_x_hat })
}

/// Verifies that no nonzero combination of the claims is replicable.
///
/// Returns `Ok(None)` when the assumption holds and a description of the
/// failure otherwise. Each claim is run through [`is_replicable`]; the rank
/// of the projected claims then covers every combination.
pub fn check_assumption1(market: &FiniteMarket) -> Result<Option<String>> {
    let m = market.n_claims();
    if m == 0 {
        return Ok(None);
    }
    for i in 0..m {
        let rep = is_replicable(&market.claim_column(i), market)?;
        if rep.replicable {
            return Ok(Some(alloc::format!("claim {i} is replicable")));
        }
    }
    // A combination is replicable iff the claims' residuals after projection
    // onto span{1, gains} are linearly dependent.
    let base = span_design(market);
    let k = market.n_states();
    let mut resid = DMatrix::zeros(k, m);
    let mut scale: f64 = 0.0;
    for i in 0..m {
        let f = market.claim_column(i);
        scale = scale.max(linalg::norm2(&f));
        let (_, r) = linalg::least_squares(&base, &f);
        for s in 0..k {
            resid[(s, i)] = r[s];
        }
    }
    let independent = linalg::singular_values(&resid).iter().filter(|s| **s > 1e-9 * (1.0 + scale)).count();
    if independent < m {
        return Ok(Some(alloc::format!(
            "a nonzero combination of the claims is replicable (rank deficit {})",
            m - independent
        )));
    }
    Ok(None)
}

/// Solutions of the quadratic hedging problems.
#[derive(Debug, Clone)]
pub struct Hedges {
    /// `(J+1) × (m+1)`: column `i` holds `βᵢ`.
    pub beta: DMatrix<f64>,
    /// `K × (m+1)`: hedged gains `Mⁱ = M βᵢ`.
    pub gains: DMatrix<f64>,
    /// `K × (m+1)`: residuals `hᵢ = gᵢ + Mⁱ`.
    pub residuals: DMatrix<f64>,
    /// `αᵢⱼ = E_R[A hᵢ hⱼ]`.
    pub alpha: DMatrix<f64>,
    /// `max |E_R[A hᵢ c]|` over basis columns `c`.
    pub orthogonality: f64,
}

pub fn solve_quadratic_hedges(set: &DiscountedSetting) -> Hedges {
    let w: Vec<f64> = set.r.iter().zip(&set.a).map(|(r, a)| r * a).collect();
    let beta = match linalg::weighted_cod(&set.m_basis, &w) {
        Some(cod) => {
            let sg = DMatrix::from_fn(set.g.nrows(), set.g.ncols(), |s, i| -w[s].sqrt() * set.g[(s, i)]);
            cod.least_squares(&sg)
        }
        None => {
            let gram = linalg::weighted_gram(&set.m_basis, &w);
            let rhs = -linalg::weighted_cross(&set.m_basis, &w, &set.g);
            linalg::solve_psd(&gram, &rhs)
        }
    };
    let gains = &set.m_basis * &beta;
    let residuals = &set.g + &gains;
    let alpha = linalg::weighted_gram(&residuals, &w);
    let orth = linalg::weighted_cross(&set.m_basis, &w, &residuals);
    Hedges { beta, gains, residuals, alpha, orthogonality: linalg::max_abs(&orth) }
}

/// `Gᵢⱼ = −(y/x) αᵢⱼ`.
pub fn compute_g(set: &DiscountedSetting, hedges: &Hedges) -> DMatrix<f64> {
    let g = &hedges.alpha * (-set.y / set.x);
    (&g + g.transpose()) * 0.5
}

/// Solutions of a family of minimum-`B`-norm problems.
#[derive(Debug, Clone)]
pub struct DualSolutions {
    /// `K × n`, one solution per column.
    pub n: DMatrix<f64>,
    /// Largest violation of the linear constraints.
    pub constraint_residual: f64,
}

/// Minimizes `E_R[B N²]` subject to `E_R[N cₗ] = dₗ` for the columns of `c`.
///
/// Stationarity gives `B N = C λ`, i.e. `N = A·Cλ`, and the constraints
/// reduce to `(Cᵀ diag(rA) C) λ = d`, solved in the minimum-norm sense.
fn min_b_norm(set: &DiscountedSetting, c: &DMatrix<f64>, d: &DMatrix<f64>) -> DualSolutions {
    let w: Vec<f64> = set.r.iter().zip(&set.a).map(|(r, a)| r * a).collect();
    let n = match linalg::weighted_cod(c, &w) {
        // With v = √(rB)·N the problem is min ‖v‖ subject to (√(rA)·C)ᵀ v = d.
        Some(cod) => {
            let mut n = cod.min_norm_transposed(d);
            for (k, mut row) in n.row_iter_mut().enumerate() {
                row *= (set.a[k] / set.r[k]).sqrt();
            }
            n
        }
        None => {
            let gram = linalg::weighted_gram(c, &w);
            let lambda = linalg::solve_psd(&gram, d);
            let mut n = c * lambda;
            for (k, mut row) in n.row_iter_mut().enumerate() {
                row *= set.a[k];
            }
            n
        }
    };
    let achieved = linalg::weighted_cross(c, &set.r, &n);
    let constraint_residual = linalg::max_abs(&(achieved - d));
    DualSolutions { n, constraint_residual }
}

fn hcat(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(
        a.nrows(),
        a.ncols() + b.ncols(),
        |r, c| {
            if c < a.ncols() {
                a[(r, c)]
            } else {
                b[(r, c - a.ncols())]
            }
        },
    )
}

/// `Nᵢ`, `i = 0..m`.
pub fn solve_dual_quadratics(set: &DiscountedSetting) -> DualSolutions {
    let m1 = set.g.ncols();
    let c = hcat(&set.g, &set.m_basis);
    let d = DMatrix::from_fn(c.ncols(), m1, |r, col| if r == col { 1.0 } else { 0.0 });
    min_b_norm(set, &c, &d)
}

/// `L`: minimum `B`-norm element of `1 + N²`.
pub fn solve_l(set: &DiscountedSetting) -> DualSolutions {
    let ones = DMatrix::from_element(set.r.len(), 1, 1.0);
    let c = hcat(&ones, &set.m_basis);
    let mut d = DMatrix::zeros(c.ncols(), 1);
    d[(0, 0)] = 1.0;
    min_b_norm(set, &c, &d)
}

/// `Hᵢⱼ = (x/y) E_R[B Nᵢ Nⱼ]` and `‖(−G)H − I‖∞`.
pub fn compute_h_and_check(set: &DiscountedSetting, duals: &DualSolutions, g: &DMatrix<f64>) -> (DMatrix<f64>, f64) {
    let w: Vec<f64> = set.r.iter().zip(&set.b).map(|(r, b)| r * b).collect();
    let h = linalg::weighted_gram(&duals.n, &w) * (set.x / set.y);
    let h = (&h + h.transpose()) * 0.5;
    let n = h.nrows();
    let resid = linalg::inf_norm(&(-g * &h - DMatrix::identity(n, n)));
    (h, resid)
}

/// Derivatives of terminal quantities with respect to `x`, `q` and `y`.
#[derive(Debug, Clone)]
pub struct DerivativeProcesses {
    /// `X' = (X̂/x)(1 + M⁰)`.
    pub x_prime: Vec<f64>,
    /// `K × m`: `Zⁱ = (X̂/x) Mⁱ`.
    pub z: DMatrix<f64>,
    /// `K × (m+1)`: `Wⁱ = z Nⁱ` (absent when the duals are skipped).
    pub w: Option<DMatrix<f64>>,
    /// `Y' = z L`.
    pub y_prime: Vec<f64>,
    pub l: Vec<f64>,
}

pub fn derivative_processes(
    set: &DiscountedSetting,
    hedges: &Hedges,
    duals: Option<&DualSolutions>,
    l: &DualSolutions,
) -> DerivativeProcesses {
    let k = set.r.len();
    let m = set.n_claims();
    let ratio: Vec<f64> = set.x_hat.iter().map(|v| v / set.x).collect();
    let x_prime = (0..k).map(|s| ratio[s] * (1.0 + hedges.gains[(s, 0)])).collect();
    let z = DMatrix::from_fn(k, m, |s, i| ratio[s] * hedges.gains[(s, i + 1)]);
    let w = duals.map(|d| DMatrix::from_fn(k, d.n.ncols(), |s, i| set.z[s] * d.n[(s, i)]));
    let lv: Vec<f64> = l.n.column(0).iter().cloned().collect();
    let y_prime = (0..k).map(|s| set.z[s] * lv[s]).collect();
    DerivativeProcesses { x_prime, z, w, y_prime, l: lv }
}

/// Numerical checks of the exact identities.
#[derive(Debug, Clone, Default)]
pub struct Diagnostics {
    pub assumption1: Option<String>,
    pub basis_mean_defect: f64,
    pub hedge_orthogonality: f64,
    pub dual_constraint_residual: Option<f64>,
    pub l_constraint_residual: f64,
    /// `‖(−G)H − I‖∞`.
    pub inverse_residual: Option<f64>,
    /// `‖αβ − I‖∞` with `βᵢⱼ = E_R[B Nᵢ Nⱼ]`.
    pub alpha_beta_residual: Option<f64>,
    /// `max |A hᵢ − Σⱼ αᵢⱼ Nⱼ|`.
    pub hedge_dual_residual: Option<f64>,
    /// `max |U''(X̂) X' − u'' Y'|`.
    pub y_prime_identity: f64,
    /// `max |U''(X̂)(X'; Z + f) − G W|`.
    pub marginal_process_residual: Option<f64>,
    /// `max |E[Y' f] − E_R[L g]|`.
    pub p_tilde_two_way: f64,
    pub g_symmetry_defect: f64,
    pub d_symmetry_defect: f64,
    /// Eigenvalues of the symmetric part of `D`, ascending.
    pub d_sym_eigenvalues: Vec<f64>,
    /// Eigenvalues of `G`, ascending.
    pub g_eigenvalues: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SensitivityReport {
    pub x: f64,
    pub y: f64,
    pub p: Vec<f64>,
    pub p_tilde: Vec<f64>,
    pub p_prime: Vec<f64>,
    pub g: DMatrix<f64>,
    pub h: Option<DMatrix<f64>>,
    pub d: DMatrix<f64>,
    /// `u''(x)`, read from `G₀₀`.
    pub u2: f64,
    pub diagnostics: Diagnostics,
}

/// Every intermediate object together with the report.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub solution: PrimalSolution,
    pub setting: DiscountedSetting,
    pub hedges: Hedges,
    pub duals: Option<DualSolutions>,
    pub l: DualSolutions,
    pub processes: DerivativeProcesses,
    pub report: SensitivityReport,
}

/// Solves at `q = 0` and computes the full sensitivity analysis.
pub fn analyze(market: &FiniteMarket, utility: &Utility, x: f64, mode: Assumption1Mode) -> Result<Analysis> {
    let sol = solve_primal(&PrimalProblem::at_zero(market, utility, x))?;
    analyze_solution(market, utility, sol, mode)
}

/// As [`analyze`], from an existing `q = 0` solution.
pub fn analyze_solution(
    market: &FiniteMarket,
    utility: &Utility,
    sol: PrimalSolution,
    mode: Assumption1Mode,
) -> Result<Analysis> {
    let assumption1 = if mode == Assumption1Mode::PrimalOnly { None } else { check_assumption1(market)? };
    if let (Some(msg), Assumption1Mode::Strict) = (&assumption1, mode) {
        return Err(invalid!("claims violate non-replicability: {msg}"));
    }
    let set = build_discounted_setting(market, utility, &sol)?;
    let hedges = solve_quadratic_hedges(&set);
    let g = compute_g(&set, &hedges);
    let m = set.n_claims();
    let k = set.r.len();
    let l = solve_l(&set);

    let duals = (assumption1.is_none() && mode != Assumption1Mode::PrimalOnly).then(|| solve_dual_quadratics(&set));
    let processes = derivative_processes(&set, &hedges, duals.as_ref(), &l);

    let mut diag = Diagnostics {
        assumption1,
        basis_mean_defect: set.basis_mean_defect(),
        hedge_orthogonality: hedges.orthogonality,
        l_constraint_residual: l.constraint_residual,
        g_symmetry_defect: linalg::symmetry_defect(&(&hedges.alpha * (-set.y / set.x))),
        g_eigenvalues: linalg::sym_eigenvalues(&g),
        ..Default::default()
    };

    let mut h_out = None;
    if let Some(duals) = &duals {
        let (h, resid) = compute_h_and_check(&set, duals, &g);
        diag.dual_constraint_residual = Some(duals.constraint_residual);
        diag.inverse_residual = Some(resid);
        if !(resid < INVERSE_TOL) {
            return Err(invariant!("inverse identity violated: ‖(−G)H − I‖ = {resid:e}"));
        }
        let wb: Vec<f64> = set.r.iter().zip(&set.b).map(|(r, b)| r * b).collect();
        let beta = linalg::weighted_gram(&duals.n, &wb);
        diag.alpha_beta_residual = Some(linalg::inf_norm(&(&hedges.alpha * &beta - DMatrix::identity(m + 1, m + 1))));
        let ah = DMatrix::from_fn(k, m + 1, |s, i| set.a[s] * hedges.residuals[(s, i)]);
        let an = &duals.n * hedges.alpha.transpose();
        diag.hedge_dual_residual = Some(linalg::max_abs(&(ah - an)));
        // (X'; Z + f) scaled by U''(X̂) against G W, state by state.
        let w = processes.w.as_ref().expect("duals present");
        let gw = w * g.transpose();
        let f = market.claims();
        let mut worst: f64 = 0.0;
        for s in 0..k {
            for i in 0..=m {
                let lhs = set.u2_at_x_hat[s]
                    * if i == 0 { processes.x_prime[s] } else { processes.z[(s, i - 1)] + f[(s, i - 1)] };
                worst = worst.max((lhs - gw[(s, i)]).abs());
            }
        }
        diag.marginal_process_residual = Some(worst);
        h_out = Some(h);
    }

    let u2 = g[(0, 0)];
    diag.y_prime_identity = (0..k)
        .map(|s| (set.u2_at_x_hat[s] * processes.x_prime[s] - u2 * processes.y_prime[s]).abs())
        .fold(0.0, f64::max);

    let probs = market.probs();
    let p = sol.prices(market);
    let mut p_tilde = vec![0.0; m];
    for (i, pt) in p_tilde.iter_mut().enumerate() {
        let f = market.claim_column(i);
        let direct: f64 = (0..k).map(|s| probs[s] * processes.y_prime[s] * f[s]).sum();
        let via_r: f64 = (0..k).map(|s| set.r[s] * processes.l[s] * set.g[(s, i + 1)]).sum();
        diag.p_tilde_two_way = diag.p_tilde_two_way.max((direct - via_r).abs());
        *pt = direct;
    }
    let y = set.y;
    let p_prime: Vec<f64> = p.iter().zip(&p_tilde).map(|(p, pt)| u2 / y * (pt - p)).collect();
    let d = DMatrix::from_fn(m, m, |i, j| g[(i + 1, j + 1)] / y - u2 / y * p[i] * p_tilde[j]);
    diag.d_symmetry_defect = linalg::symmetry_defect(&d);
    diag.d_sym_eigenvalues = linalg::sym_eigenvalues(&d);

    let report = SensitivityReport { x: set.x, y, p, p_tilde, p_prime, g, h: h_out, d, u2, diagnostics: diag };
    Ok(Analysis { solution: sol, setting: set, hedges, duals, l, processes, report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::fd_oracles;

    fn market() -> FiniteMarket {
        // Four states, one traded asset, two claims.
        FiniteMarket::new(
            vec![0.2, 0.3, 0.1, 0.4],
            DMatrix::from_column_slice(4, 1, &[0.3, 0.1, -0.2, -0.1]),
            DMatrix::from_column_slice(4, 2, &[1.0, 0.0, 0.5, 0.2, 0.3, 1.2, 0.0, 0.7]),
        )
        .unwrap()
    }

    fn mix() -> Utility {
        Utility::mixture(vec![0.5, 0.5], vec![0.5, -1.0]).unwrap()
    }

    #[test]
    fn bond_only_market_has_r_equal_p() {
        let m = FiniteMarket::new(vec![0.3, 0.7], DMatrix::zeros(2, 0), DMatrix::from_column_slice(2, 1, &[1.0, 0.0]))
            .unwrap();
        let a = analyze(&m, &Utility::Log, 2.0, Assumption1Mode::Strict).unwrap();
        assert!(a.setting.r.iter().zip(m.probs()).all(|(r, p)| (r - p).abs() < 1e-15));
    }

    #[test]
    fn identities_hold_for_a_mixture() {
        let m = market();
        let a = analyze(&m, &mix(), 1.0, Assumption1Mode::Strict).unwrap();
        let d = &a.report.diagnostics;
        assert!((a.setting.r.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(d.basis_mean_defect < 1e-9);
        assert!(d.hedge_orthogonality < 1e-9);
        assert!(d.inverse_residual.unwrap() < 1e-8);
        assert!(d.alpha_beta_residual.unwrap() < 1e-8);
        assert!(d.hedge_dual_residual.unwrap() < 1e-9);
        assert!(d.y_prime_identity < 1e-8, "{}", d.y_prime_identity);
        assert!(d.marginal_process_residual.unwrap() < 1e-8, "{}", d.marginal_process_residual.unwrap());
        assert!(d.p_tilde_two_way < 1e-10);
        assert!(d.g_eigenvalues.iter().all(|e| *e < 0.0));
        assert!(linalg::is_positive_definite(a.report.h.as_ref().unwrap()));
    }

    #[test]
    fn g00_matches_fd_second_derivative() {
        let m = market();
        let u = mix();
        let a = analyze(&m, &u, 1.0, Assumption1Mode::Strict).unwrap();
        let fd = fd_oracles(&m, &u, 1.0, &[0.0, 0.0], 1e-3).unwrap();
        let rel = (a.report.u2 - fd.u_second.extrapolated).abs() / a.report.u2.abs();
        assert!(rel < 1e-5, "{rel}");
    }

    #[test]
    fn power_utility_has_zero_p_prime() {
        let m = market();
        let u = Utility::power(0.3).unwrap();
        let a = analyze(&m, &u, 1.7, Assumption1Mode::Strict).unwrap();
        assert!(linalg::max_abs_slice(&a.report.p_prime) < 1e-7);
        assert!(a.report.diagnostics.d_symmetry_defect < 1e-8);
        // Homotheticity: x² u''/u = p(p − 1).
        let ratio = 1.7 * 1.7 * a.report.u2 / a.solution.u_value;
        assert!((ratio - 0.3 * (0.3 - 1.0)).abs() < 1e-10);
    }

    #[test]
    fn replicable_claim_is_rejected_in_strict_mode() {
        let m = market().with_claim_columns(&[vec![1.3, 1.1, 0.8, 0.9]]).unwrap();
        assert!(analyze(&m, &Utility::Log, 1.0, Assumption1Mode::Strict).is_err());
        let a = analyze(&m, &Utility::Log, 1.0, Assumption1Mode::Warn).unwrap();
        assert!(a.report.h.is_none());
        let g = &a.report.g;
        let ev = linalg::sym_eigenvalues(g);
        assert!(ev.iter().map(|e| e.abs()).fold(f64::INFINITY, f64::min) < 1e-10 * linalg::max_abs(g));
    }

    #[test]
    fn complete_market_has_unit_l() {
        let m = FiniteMarket::new(vec![0.5, 0.5], DMatrix::from_column_slice(2, 1, &[1.0, -0.5]), DMatrix::zeros(2, 0))
            .unwrap();
        let a = analyze(&m, &mix(), 1.0, Assumption1Mode::Strict).unwrap();
        assert!(a.l.n.iter().all(|v| (v - 1.0).abs() < 1e-9));
        let h = a.report.h.unwrap();
        assert!((h[(0, 0)] * -a.report.g[(0, 0)] - 1.0).abs() < 1e-10);
    }
}
