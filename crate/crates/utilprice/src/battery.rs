//! Randomized property battery over markets × utilities.
//!
//! Each instance runs the sensitivity pipeline, checks the inverse identity
//! `(−G)H = I`, compares `G₀₀` with a finite-difference `u''`, and runs the
//! risk-tolerance and equivalence checks. Instances are independent and run
//! concurrently; the outcome list is ordered by `(instance, utility)`.

use rayon::prelude::*;
use serde::Serialize;
use utilprice_core::random::{battery_dims, battery_instance};
use utilprice_core::risk_tolerance::{rt_exists_from, theorem9_battery};
use utilprice_core::sensitivity::{analyze_solution, Assumption1Mode};
use utilprice_core::solver::{fd_oracles, solve_primal, PrimalProblem};
use utilprice_core::{DMatrix, Utility};

use crate::report::Tolerances;

/// `{power 0.5, power −1, log, mixture(½·x^½/½ + ½·x^{−1}/(−1))}`.
pub fn battery_utilities() -> Vec<(&'static str, Utility)> {
    vec![
        ("power(0.5)", Utility::power(0.5).expect("valid")),
        ("power(-1)", Utility::power(-1.0).expect("valid")),
        ("log", Utility::Log),
        ("mixture(0.5@0.5,0.5@-1)", Utility::mixture(vec![0.5, 0.5], vec![0.5, -1.0]).expect("valid")),
    ]
}

#[derive(Debug, Clone, Serialize, Default)]
pub struct Outcome {
    pub instance: u64,
    pub utility: String,
    pub states: usize,
    pub assets: usize,
    pub claims: usize,
    pub inverse_residual: Option<f64>,
    pub g00: f64,
    pub fd_u2: f64,
    pub g00_relative_error: f64,
    pub rt_exists: bool,
    pub tolerance_mean_residual: f64,
    pub r0_residual: Option<f64>,
    pub l_residual: Option<f64>,
    pub p_prime_norm: Option<f64>,
    pub d_symmetry_defect: Option<f64>,
    pub d_max_eigenvalue: Option<f64>,
    pub theorem8_match: Option<f64>,
    pub probe_d: Option<f64>,
    pub equivalence_consistent: Option<bool>,
    pub violations: Vec<String>,
}

const X: f64 = 1.0;

fn run_one(seed: u64, index: u64, name: &str, u: &Utility, tol: &Tolerances) -> Outcome {
    let (k, j, m) = battery_dims(seed, index);
    let mut out =
        Outcome { instance: index, utility: name.to_string(), states: k, assets: j, claims: m, ..Default::default() };
    if let Err(e) = fill(&mut out, seed, index, u, tol) {
        out.violations.push(format!("{}: {e}", e.kind()));
    }
    out
}

fn fill(out: &mut Outcome, seed: u64, index: u64, u: &Utility, tol: &Tolerances) -> utilprice_core::Result<()> {
    let market = battery_instance(seed, index)?;
    let sol = solve_primal(&PrimalProblem::at_zero(&market, u, X))?;
    let a = analyze_solution(&market, u, sol.clone(), Assumption1Mode::Strict)?;
    out.inverse_residual = a.report.diagnostics.inverse_residual;
    if out.inverse_residual.is_none_or(|r| r >= tol.inverse_identity) {
        out.violations.push(format!("inverse identity residual {:?}", out.inverse_residual));
    }
    let fd = fd_oracles(&market, u, X, &vec![0.0; market.n_claims()], tol.fd_step)?;
    out.g00 = a.report.g[(0, 0)];
    out.fd_u2 = fd.u_second.extrapolated;
    out.g00_relative_error = (out.g00 - out.fd_u2).abs() / out.fd_u2.abs();
    if out.g00_relative_error >= 1e-5 {
        out.violations.push(format!("G00 vs FD u'' relative error {:e}", out.g00_relative_error));
    }
    let bare = market.with_claims(DMatrix::zeros(market.n_states(), 0))?;
    let a0 = analyze_solution(&bare, u, sol, Assumption1Mode::Strict)?;
    let rt = rt_exists_from(&bare, u, &a0)?;
    out.rt_exists = rt.exists;
    out.tolerance_mean_residual = rt.tolerance_mean_residual;
    out.r0_residual = rt.r0_residual;
    out.l_residual = rt.l_residual;
    let t9 = theorem9_battery(&market, u, X)?;
    out.p_prime_norm = Some(t9.p_prime_norm);
    out.d_symmetry_defect = Some(t9.d_symmetry_defect);
    out.d_max_eigenvalue = Some(t9.d_max_eigenvalue);
    out.theorem8_match = t9.theorem8_match;
    out.probe_d = Some(t9.probe_d);
    out.equivalence_consistent = Some(t9.consistent);
    if !t9.consistent && t9.exists {
        out.violations.push("risk-tolerance process exists but p', D properties fail".into());
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct BatterySummary {
    pub seed: u64,
    pub models: u64,
    pub runs: usize,
    pub invariant_violations: usize,
    pub max_inverse_residual: f64,
    pub max_g00_relative_error: f64,
    pub rt_exists_count: usize,
    pub outcomes: Vec<Outcome>,
}

/// Runs `models` instances against every battery utility.
pub fn run_battery(seed: u64, models: u64, tol: &Tolerances) -> BatterySummary {
    let utilities = battery_utilities();
    let jobs: Vec<(u64, usize)> = (0..models).flat_map(|i| (0..utilities.len()).map(move |u| (i, u))).collect();
    let outcomes: Vec<Outcome> = jobs
        .par_iter()
        .map(|&(i, ui)| {
            let (name, u) = &utilities[ui];
            run_one(seed, i, name, u, tol)
        })
        .collect();
    let fold = |f: fn(&Outcome) -> f64| outcomes.iter().map(f).fold(0.0, f64::max);
    BatterySummary {
        seed,
        models,
        runs: outcomes.len(),
        invariant_violations: outcomes.iter().filter(|o| !o.violations.is_empty()).count(),
        max_inverse_residual: fold(|o| o.inverse_residual.unwrap_or(f64::INFINITY)),
        max_g00_relative_error: fold(|o| o.g00_relative_error),
        rt_exists_count: outcomes.iter().filter(|o| o.rt_exists).count(),
        outcomes,
    }
}
