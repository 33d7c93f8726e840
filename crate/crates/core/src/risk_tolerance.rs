//! Risk-tolerance wealth processes.
//!
//! The risk-tolerance claim is `τ = −U'(X̂)/U''(X̂)`. A risk-tolerance wealth
//! process exists exactly when `τ` is replicable; its initial value is then
//! `R0 = E[z τ] = −u'(x)/u''(x)`. When it exists, prices do not move with
//! capital (`p' = 0`) and `D` is symmetric negative definite with a
//! Kunita–Watanabe representation under the measure with density `R z/R0`.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use nalgebra::DMatrix;

use crate::error::{invalid, invariant, Error, Result};
use crate::linalg;
use crate::market::{change_numeraire, is_replicable, FiniteMarket};
use crate::sensitivity::{analyze, analyze_solution, Analysis, Assumption1Mode};
use crate::solver::PrimalSolution;
use crate::utility::Utility;

/// `τ = −U'(X̂)/U''(X̂)` state by state.
pub fn rt_claim(utility: &Utility, sol: &PrimalSolution) -> Vec<f64> {
    sol.x_hat.iter().map(|w| utility.risk_tolerance(*w)).collect()
}

#[derive(Debug, Clone)]
pub struct RiskToleranceReport {
    pub exists: bool,
    /// Residual of `τ` against `span{1, gains}`.
    pub residual_norm: f64,
    pub tau: Vec<f64>,
    pub r_t: Option<Vec<f64>>,
    pub r0: Option<f64>,
    /// `|(u')²/u'' − E[U'(X̂)²/U''(X̂)]|` relative to `|(u')²/u''|`.
    pub tolerance_mean_residual: f64,
    /// `|R0 + u'/u''|` relative to `R0`.
    pub r0_residual: Option<f64>,
    /// `max |X' − R/R0|`.
    pub x_prime_residual: Option<f64>,
    /// `max |L − 1|`.
    pub l_residual: Option<f64>,
}

/// Decides whether the risk-tolerance wealth process exists at `x`.
pub fn rt_exists(market: &FiniteMarket, utility: &Utility, x: f64) -> Result<RiskToleranceReport> {
    let bare = market.with_claims(DMatrix::zeros(market.n_states(), 0))?;
    let a = analyze(&bare, utility, x, Assumption1Mode::Strict)?;
    rt_exists_from(&bare, utility, &a)
}

/// As [`rt_exists`], reusing a sensitivity analysis at `q = 0`.
pub fn rt_exists_from(market: &FiniteMarket, utility: &Utility, a: &Analysis) -> Result<RiskToleranceReport> {
    let sol = &a.solution;
    let tau = rt_claim(utility, sol);
    let rep = is_replicable(&tau, market)?;
    let y = sol.y;
    let u2 = a.report.u2;
    let probs = market.probs();
    let expected: f64 = sol
        .x_hat
        .iter()
        .zip(probs)
        .map(|(w, p)| {
            let d = utility.eval_unchecked(*w);
            p * d.d1 * d.d1 / d.d2
        })
        .sum();
    let lhs = y * y / u2;
    let tolerance_mean_residual = (lhs - expected).abs() / lhs.abs();
    let mut out = RiskToleranceReport {
        exists: rep.replicable,
        residual_norm: rep.residual_norm,
        tau: tau.clone(),
        r_t: None,
        r0: None,
        tolerance_mean_residual,
        r0_residual: None,
        x_prime_residual: None,
        l_residual: None,
    };
    if !rep.replicable {
        return Ok(out);
    }
    let r0 = market.expectation(&sol.z, &tau);
    let r0_rel = (r0 + y / u2).abs() / r0;
    let xp = a.processes.x_prime.iter().zip(&tau).map(|(xp, t)| (xp - t / r0).abs()).fold(0.0, f64::max);
    let lres = a.processes.l.iter().map(|l| (l - 1.0).abs()).fold(0.0, f64::max);
    out.r_t = Some(tau);
    out.r0 = Some(r0);
    out.r0_residual = Some(r0_rel);
    out.x_prime_residual = Some(xp);
    out.l_residual = Some(lres);
    if !(r0 > 0.0) || r0_rel > 1e-8 || tolerance_mean_residual > 1e-6 || xp > 1e-8 || lres > 1e-9 {
        return Err(invariant!(
            "risk-tolerance identities fail: (R0 + u'/u'')/R0 = {r0_rel:e}, E[(U')²/U''] = {tolerance_mean_residual:e}, X' = {xp:e}, L = {lres:e}"
        ));
    }
    Ok(out)
}

/// Output of the Kunita–Watanabe route.
#[derive(Debug, Clone)]
pub struct Theorem8Result {
    pub p_prime: Vec<f64>,
    pub d_kw: DMatrix<f64>,
    /// `‖D_kw − D‖∞` against the generic computation.
    pub match_residual: f64,
    /// `max |E_r̃[g̃] − p|`.
    pub price_residual: f64,
    pub weight_sum_defect: f64,
    pub basis_mean_defect: f64,
    pub symmetry_defect: f64,
    pub eigenvalues: Vec<f64>,
}

/// `D` from the decomposition of the claims under the measure with weights
/// `r̃ = p R z / R0` and numéraire `R/R0`.
///
/// With `g̃ᵢ = fᵢ R0/R`, the residual `Ñⁱ` of `g̃ᵢ − pᵢ` after `r̃`-weighted
/// projection onto the discounted gains gives `D_kw = −(1/R0) E_r̃[Ñ Ñᵀ]`.
pub fn theorem8_path(market: &FiniteMarket, analysis: &Analysis, rt: &RiskToleranceReport) -> Result<Theorem8Result> {
    let (Some(r), Some(r0)) = (&rt.r_t, rt.r0) else {
        return Err(invalid!(
            "the risk-tolerance wealth process does not exist; the Kunita–Watanabe route is undefined"
        ));
    };
    let sol = &analysis.solution;
    let k = market.n_states();
    let m = market.n_claims();
    let probs = market.probs();
    let rt_w: Vec<f64> = (0..k).map(|s| probs[s] * r[s] * sol.z[s] / r0).collect();
    let weight_sum_defect = (rt_w.iter().sum::<f64>() - 1.0).abs();
    let mt = change_numeraire(market, r, r0)?;
    let basis_mean_defect = (0..mt.ncols())
        .map(|c| mt.column(c).iter().zip(&rt_w).map(|(v, w)| v * w).sum::<f64>().abs())
        .fold(0.0, f64::max);
    let f = market.claims();
    let gt = DMatrix::from_fn(k, m, |s, i| f[(s, i)] * r0 / r[s]);
    let p: Vec<f64> = (0..m).map(|i| (0..k).map(|s| rt_w[s] * gt[(s, i)]).sum()).collect();
    let price_residual = p.iter().zip(&analysis.report.p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let centred = DMatrix::from_fn(k, m, |s, i| gt[(s, i)] - p[i]);
    let gram = linalg::weighted_gram(&mt, &rt_w);
    let coef = linalg::solve_psd(&gram, &linalg::weighted_cross(&mt, &rt_w, &centred));
    let resid = centred - &mt * coef;
    let d_kw = linalg::weighted_gram(&resid, &rt_w) * (-1.0 / r0);
    let d_kw = (&d_kw + d_kw.transpose()) * 0.5;
    let match_residual = linalg::inf_norm(&(&d_kw - &analysis.report.d));
    Ok(Theorem8Result {
        p_prime: vec![0.0; m],
        symmetry_defect: linalg::symmetry_defect(&analysis.report.d),
        eigenvalues: linalg::sym_eigenvalues(&d_kw),
        d_kw,
        match_residual,
        price_residual,
        weight_sum_defect,
        basis_mean_defect,
    })
}

/// A five-state, one-asset market in which the risk-tolerance wealth
/// process does not exist for a utility with non-affine risk tolerance.
#[derive(Debug, Clone)]
pub struct Counterexample {
    /// Carries one claim, `(S₁ − 1)²`.
    pub market: FiniteMarket,
    /// Terminal stock prices `(x₁, x₂, x₃, 0.5, 2)`; `S₀ = 1`.
    pub terminal: Vec<f64>,
    pub alpha: f64,
    pub beta: f64,
    /// `|E[U'(S₁)(S₁ − 1)]|`: buy-and-hold at `x = 1` is optimal.
    pub foc_residual: f64,
    pub report: RiskToleranceReport,
}

/// Builds the five-outcome counterexample.
///
/// Scans `x₁ < x₂ < x₃` in `(0.5, 2)` for the strongest departure of `t`
/// from affinity, then picks `P = (α, α, α, β, 1 − 3α − β)` so that holding
/// one share is optimal from `x = 1`: `β` solves `E[U'(S₁)(S₁ − 1)] = 0` by
/// bisection on an `α` grid, every probability at least 0.01.
pub fn theorem7_counterexample(utility: &Utility) -> Result<Counterexample> {
    if utility.classify_linear_risk_tolerance().is_some() {
        return Err(invalid!("{} utility has affine risk tolerance; no counterexample exists", utility.family()));
    }
    utility.require_positive_domain()?;
    let grid: Vec<f64> = (1..30).map(|i| 0.5 + 0.05 * i as f64).collect();
    let t = |x: f64| utility.risk_tolerance(x);
    let mut triples = Vec::new();
    for a in 0..grid.len() {
        for b in a + 1..grid.len() {
            for c in b + 1..grid.len() {
                let (x1, x2, x3) = (grid[a], grid[b], grid[c]);
                let s1 = (t(x2) - t(x1)) / (x2 - x1);
                let s2 = (t(x3) - t(x2)) / (x3 - x2);
                let scale = t(x1).abs().max(t(x3).abs());
                let gap = (s2 - s1).abs();
                if gap > 1e-6 * scale {
                    triples.push((gap * (x3 - x1), [x1, x2, x3]));
                }
            }
        }
    }
    triples.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("finite"));
    let floor = 0.01;
    for (_, xs) in &triples {
        let s1 = [xs[0], xs[1], xs[2], 0.5, 2.0];
        let mu: Vec<f64> = s1.iter().map(|s| utility.u1(*s) * (s - 1.0)).collect();
        let foc =
            |alpha: f64, beta: f64| alpha * (mu[0] + mu[1] + mu[2]) + beta * mu[3] + (1.0 - 3.0 * alpha - beta) * mu[4];
        for ai in 1..=32 {
            let alpha = 0.01 * ai as f64;
            let (mut lo, mut hi) = (floor, 1.0 - 3.0 * alpha - floor);
            if hi <= lo {
                break;
            }
            let (flo, fhi) = (foc(alpha, lo), foc(alpha, hi));
            if flo.signum() == fhi.signum() {
                continue;
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if foc(alpha, mid).signum() == flo.signum() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let beta = 0.5 * (lo + hi);
            let probs = vec![alpha, alpha, alpha, beta, 1.0 - 3.0 * alpha - beta];
            if probs.iter().any(|p| *p < floor) {
                continue;
            }
            let gains = DMatrix::from_fn(5, 1, |s, _| s1[s] - 1.0);
            let claims = DMatrix::from_fn(5, 1, |s, _| (s1[s] - 1.0) * (s1[s] - 1.0));
            let market = FiniteMarket::new(probs.clone(), gains, claims)?;
            let foc_residual = probs.iter().zip(&mu).map(|(p, m)| p * m).sum::<f64>().abs();
            let report = rt_exists(&market, utility, 1.0)?;
            if report.exists {
                return Err(invariant!("constructed model admits a risk-tolerance wealth process"));
            }
            return Ok(Counterexample { market, terminal: s1.to_vec(), alpha, beta, foc_residual, report });
        }
    }
    Err(Error::Infeasible(alloc::format!(
        "no probability vector with entries ≥ {floor} found for {} candidate triples in (0.5, 2)",
        triples.len()
    )))
}

/// Cross-tabulation of the equivalent conditions for one market and utility.
#[derive(Debug, Clone)]
pub struct Theorem9Report {
    pub exists: bool,
    pub rt_residual: f64,
    pub p_prime_norm: f64,
    pub d_symmetry_defect: f64,
    pub d_max_eigenvalue: f64,
    pub d_full_rank: bool,
    pub assumption1: Option<String>,
    /// `‖D_kw − D‖∞` when the process exists.
    pub theorem8_match: Option<f64>,
    /// `|D₁₂ − D₂₁|` for the claim pair `(f₁, X̂/x)`.
    pub pair_asymmetry: f64,
    pub pair_p_prime_norm: f64,
    /// `|D|` for the single claim `τ`.
    pub probe_d: f64,
    pub consistent: bool,
    pub witnesses: Vec<String>,
}

pub const P_PRIME_TOL: f64 = 1e-7;
pub const SYMMETRY_TOL: f64 = 1e-8;
pub const PROBE_TOL: f64 = 1e-8;
pub const WITNESS_TOL: f64 = 1e-6;
pub const THEOREM8_TOL: f64 = 1e-7;

/// Runs the equivalence checks on the market's claims (at least one).
pub fn theorem9_battery(market: &FiniteMarket, utility: &Utility, x: f64) -> Result<Theorem9Report> {
    if market.n_claims() == 0 {
        return Err(invalid!("the equivalence battery needs at least one claim"));
    }
    let a = analyze(market, utility, x, Assumption1Mode::Warn)?;
    let bare = market.with_claims(DMatrix::zeros(market.n_states(), 0))?;
    let a0 = analyze_solution(&bare, utility, a.solution.clone(), Assumption1Mode::Strict)?;
    let rt = rt_exists_from(&bare, utility, &a0)?;
    let rep = &a.report;
    let p_prime_norm = linalg::max_abs_slice(&rep.p_prime);
    let d_max_eigenvalue = rep.diagnostics.d_sym_eigenvalues.last().cloned().unwrap_or(f64::NEG_INFINITY);
    let d_full_rank = rep.diagnostics.d_sym_eigenvalues.iter().all(|e| *e < -1e-12 * linalg::max_abs(&rep.d));

    let theorem8_match = if rt.exists { Some(theorem8_path(market, &a, &rt)?.match_residual) } else { None };

    let ratio: Vec<f64> = a.solution.x_hat.iter().map(|w| w / x).collect();
    let pair = market.with_claim_columns(&[market.claim_column(0), ratio])?;
    let ap = analyze_solution(&pair, utility, a.solution.clone(), Assumption1Mode::Warn)?;
    let pair_asymmetry = (ap.report.d[(0, 1)] - ap.report.d[(1, 0)]).abs();
    let pair_p_prime_norm = linalg::max_abs_slice(&ap.report.p_prime);

    let probe = market.with_claim_columns(core::slice::from_ref(&rt.tau))?;
    let aprobe = analyze_solution(&probe, utility, a.solution.clone(), Assumption1Mode::PrimalOnly)?;
    let probe_d = aprobe.report.d[(0, 0)].abs();
    if probe_d > PROBE_TOL {
        return Err(invariant!("D for the risk-tolerance claim is {probe_d:e}, expected 0"));
    }

    let mut witnesses = Vec::new();
    let consistent = if rt.exists {
        let ok = p_prime_norm < P_PRIME_TOL
            && rep.diagnostics.d_symmetry_defect < SYMMETRY_TOL
            && d_max_eigenvalue < 0.0
            && theorem8_match.is_none_or(|r| r < THEOREM8_TOL);
        ok && (d_full_rank || rep.diagnostics.assumption1.is_some())
    } else {
        if p_prime_norm > WITNESS_TOL {
            witnesses.push(alloc::format!("p' = {p_prime_norm:e} for the given claims"));
        }
        if pair_p_prime_norm > WITNESS_TOL {
            witnesses.push(alloc::format!("p' = {pair_p_prime_norm:e} for the pair (f, X/x)"));
        }
        if pair_asymmetry > WITNESS_TOL {
            witnesses.push(alloc::format!("|D12 - D21| = {pair_asymmetry:e} for the pair (f, X/x)"));
        }
        !witnesses.is_empty()
    };
    Ok(Theorem9Report {
        exists: rt.exists,
        rt_residual: rt.residual_norm,
        p_prime_norm,
        d_symmetry_defect: rep.diagnostics.d_symmetry_defect,
        d_max_eigenvalue,
        d_full_rank,
        assumption1: rep.diagnostics.assumption1.clone(),
        theorem8_match,
        pair_asymmetry,
        pair_p_prime_norm,
        probe_d,
        consistent,
        witnesses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn market() -> FiniteMarket {
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
    fn power_and_log_processes_exist() {
        let m = market();
        let r = rt_exists(&m, &Utility::power(0.5).unwrap(), 2.0).unwrap();
        assert!(r.exists);
        assert!((r.r0.unwrap() - 4.0).abs() < 1e-10);
        let r = rt_exists(&m, &Utility::Log, 2.0).unwrap();
        assert!((r.r0.unwrap() - 2.0).abs() < 1e-10);
    }

    #[test]
    fn mixture_tau_matches_definition() {
        let m = market();
        let a = analyze(&m, &mix(), 1.0, Assumption1Mode::Strict).unwrap();
        let tau = rt_claim(&mix(), &a.solution);
        for (t, w) in tau.iter().zip(&a.solution.x_hat) {
            let d = mix().eval(*w).unwrap();
            assert!((t + d.d1 / d.d2).abs() < 1e-12);
        }
    }

    #[test]
    fn kunita_watanabe_matches_generic_d() {
        let m = market();
        let u = Utility::power(-1.0).unwrap();
        let a = analyze(&m, &u, 1.0, Assumption1Mode::Strict).unwrap();
        let rt = rt_exists(&m, &u, 1.0).unwrap();
        let t8 = theorem8_path(&m, &a, &rt).unwrap();
        assert!(t8.match_residual < 1e-7, "{}", t8.match_residual);
        assert!(t8.price_residual < 1e-9);
        assert!(t8.eigenvalues.iter().all(|e| *e < 0.0));
    }

    #[test]
    fn kunita_watanabe_refuses_without_process() {
        let c = theorem7_counterexample(&mix()).unwrap();
        let a = analyze(&c.market, &mix(), 1.0, Assumption1Mode::Strict).unwrap();
        assert!(matches!(theorem8_path(&c.market, &a, &c.report), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn counterexample_for_mixture() {
        let c = theorem7_counterexample(&mix()).unwrap();
        assert!(!c.report.exists);
        assert!(c.foc_residual < 1e-10);
        assert!(c.market.probs().iter().all(|p| *p >= 0.01));
        // Buy-and-hold is the solver's optimum too.
        let a = analyze(&c.market, &mix(), 1.0, Assumption1Mode::Strict).unwrap();
        assert!((a.solution.h[0] - 1.0).abs() < 1e-8);
        assert!(matches!(theorem7_counterexample(&Utility::power(0.5).unwrap()), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn battery_is_consistent() {
        let m = market();
        for u in [Utility::Log, Utility::power(0.5).unwrap(), Utility::power(-1.0).unwrap()] {
            let r = theorem9_battery(&m, &u, 1.0).unwrap();
            assert!(r.exists && r.consistent, "{r:?}");
        }
        let c = theorem7_counterexample(&mix()).unwrap();
        let r = theorem9_battery(&c.market, &mix(), 1.0).unwrap();
        assert!(!r.exists && r.consistent, "{r:?}");
    }
}
