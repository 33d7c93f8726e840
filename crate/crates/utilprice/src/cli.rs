//! Command-line interface.
//!
//! Every subcommand prints its JSON report on standard output and, when an
//! output directory is given (`--out` or `UTILPRICE_OUT_DIR`), also writes it
//! there together with CSV mirrors of its matrices. Failures print a JSON
//! error object on standard error and exit with 2 (invalid or infeasible
//! input), 3 (arbitrage), 4 (non-convergence) or 5 (invariant violation).

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use utilprice_core::basis_risk::{crosscheck_tree, BasisRiskParams, McConfig, Payoff};
use utilprice_core::expansions::{
    certainty_equivalent, directional_fit, expansion_matrices, reservation_price, Quantity,
};
use utilprice_core::risk_tolerance::{rt_exists_from, theorem7_counterexample, theorem8_path, theorem9_battery};
use utilprice_core::sensitivity::{analyze, analyze_solution, Assumption1Mode};
use utilprice_core::solver::{solve_primal, PrimalProblem};
use utilprice_core::ssd::ssd_greatest;
use utilprice_core::{DMatrix, FiniteMarket, Utility};

use crate::battery::{battery_utilities, run_battery};
use crate::error::{CliError, CliResult};
use crate::formats::{load_model, read_json, UtilitySpec};
use crate::mc::simulate_d_parallel;
use crate::report::{matrix, opt_matrix, Sink, Tolerances};

#[derive(Debug, Parser)]
#[command(
    name = "utilprice",
    version,
    about = "Utility-based prices and their sensitivities in finite incomplete markets"
)]
pub struct Cli {
    /// Output directory for report files (defaults to $UTILPRICE_OUT_DIR).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Finite-difference step for derivative oracles.
    #[arg(long, global = true, default_value_t = 1e-4)]
    pub fd_step: f64,
    /// Tolerance for the inverse identity (−G)H = I.
    #[arg(long, global = true, default_value_t = 1e-8)]
    pub inverse_tol: f64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct ModelArgs {
    /// Market or tree file (JSON).
    #[arg(long)]
    pub model: PathBuf,
    /// `log`, `power:P`, `exp:G`, `mixture:W@E,...`, inline JSON or a JSON file.
    #[arg(long, default_value = "log")]
    pub utility: String,
    /// Initial capital.
    #[arg(long, default_value_t = 1.0)]
    pub x: f64,
}

impl ModelArgs {
    fn load(&self) -> CliResult<(FiniteMarket, Utility)> {
        let market = load_model(&self.model)?;
        let utility = UtilitySpec::parse(&self.utility)?.to_utility()?;
        if !(self.x > 0.0 && self.x.is_finite()) {
            return Err(CliError::Usage("initial capital must be positive".into()));
        }
        Ok((market, utility))
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum A1Mode {
    Strict,
    Warn,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimal investment for (x, q).
    Solve {
        #[command(flatten)]
        model: ModelArgs,
        /// Claim quantities, comma-separated (default zero).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        q: Vec<f64>,
    },
    /// Marginal prices and their sensitivities p', D.
    Sensitivity {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_enum, default_value = "strict")]
        assumption1: A1Mode,
    },
    /// Existence of the risk-tolerance wealth process and its identities.
    RiskTolerance {
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Second-order stochastic dominance over martingale densities.
    SsdCheck {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 1.0)]
        x: f64,
    },
    /// The five-state model where the risk-tolerance process does not exist.
    Counterexample {
        #[arg(long, default_value = "mixture:0.5@0.5,0.5@-1")]
        utility: String,
    },
    /// Equivalence checks between existence of R and p' = 0, D symmetric negative definite.
    Theorem9 {
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Reservation prices, certainty equivalents and their quadratic expansions.
    Expansions {
        #[command(flatten)]
        model: ModelArgs,
        /// Capital direction.
        #[arg(long, default_value_t = 0.5, allow_hyphen_values = true)]
        dx: f64,
        /// Claim direction (default all ones).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        dq: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = [1e-2, 5e-3])]
        eps: Vec<f64>,
    },
    /// Basis-risk sensitivity by Monte Carlo with a tree cross-check.
    BasisRisk(BasisRiskArgs),
    /// Property battery over random markets and utilities.
    RandomBattery {
        #[arg(long, default_value_t = 100)]
        models: u64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

#[derive(Debug, Args, Clone)]
pub struct BasisRiskArgs {
    #[arg(long, default_value_t = 0.1, allow_hyphen_values = true)]
    pub nu: f64,
    #[arg(long, default_value_t = 0.08, allow_hyphen_values = true)]
    pub mu: f64,
    #[arg(long, default_value_t = 0.3)]
    pub eta: f64,
    #[arg(long, default_value_t = 0.2)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0.5)]
    pub rho: f64,
    #[arg(long = "T", default_value_t = 1.0)]
    pub maturity: f64,
    #[arg(long, default_value_t = 1.0)]
    pub q0: f64,
    #[arg(long, default_value_t = 1.0)]
    pub s0: f64,
    /// `put:K`, `call:K[:CAP]`, `const:V` or `table:FILE` (JSON list of [q, h]).
    #[arg(long, default_value = "put:1")]
    pub payoff: String,
    /// Power exponent (0 for logarithmic utility).
    #[arg(long, default_value_t = 0.5, allow_hyphen_values = true)]
    pub p: f64,
    #[arg(long, default_value_t = 1.0)]
    pub x: f64,
    #[arg(long, default_value_t = 200_000)]
    pub paths: usize,
    #[arg(long, default_value_t = 64)]
    pub steps: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub antithetic: bool,
    /// Worker threads (default: all cores); results do not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Tree cross-check, e.g. `steps=2,4,6`.
    #[arg(long)]
    pub crosscheck: Option<String>,
}

/// Parses a payoff spec; uncapped calls get a cap of ten strikes and a warning.
pub fn parse_payoff(spec: &str) -> CliResult<(Payoff, Option<String>)> {
    let bad = || CliError::Usage(format!("unrecognised payoff '{spec}'"));
    let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        ["put", k] => Ok((Payoff::Put { strike: num(k)? }, None)),
        ["call", k, c] => Ok((Payoff::CappedCall { strike: num(k)?, cap: num(c)? }, None)),
        ["call", k] => {
            let strike = num(k)?;
            let cap = 10.0 * strike;
            Ok((Payoff::CappedCall { strike, cap }, Some(format!("call payoff capped at {cap} to keep it bounded"))))
        }
        ["const", v] => Ok((Payoff::Constant { value: num(v)? }, None)),
        ["table", path] => {
            let points: Vec<(f64, f64)> = read_json(std::path::Path::new(path))?;
            Ok((Payoff::Table { points }, None))
        }
        _ => Err(bad()),
    }
}

fn parse_steps(spec: &str) -> CliResult<Vec<usize>> {
    let list = spec.strip_prefix("steps=").unwrap_or(spec);
    list.split(',')
        .map(|s| s.trim().parse::<usize>().map_err(|_| CliError::Usage(format!("bad crosscheck steps '{spec}'"))))
        .collect()
}

impl BasisRiskArgs {
    pub fn params(&self) -> CliResult<(BasisRiskParams, Option<String>)> {
        let (payoff, warning) = parse_payoff(&self.payoff)?;
        let params = BasisRiskParams {
            nu: self.nu,
            mu: self.mu,
            eta: self.eta,
            sigma: self.sigma,
            rho: self.rho,
            maturity: self.maturity,
            q0: self.q0,
            s0: self.s0,
            payoff,
            p: self.p,
            x: self.x,
            mc: McConfig { paths: self.paths, steps: self.steps, seed: self.seed, antithetic: self.antithetic },
        };
        params.validate()?;
        Ok((params, warning))
    }
}

#[derive(Debug, Serialize)]
struct ConvergenceRow {
    steps: usize,
    p_prime: f64,
    d_tree: f64,
    d_mc: f64,
    abs_diff: f64,
    rel_diff: f64,
}

fn solve_report(market: &FiniteMarket, utility: &Utility, x: f64, q: Vec<f64>) -> CliResult<Value> {
    let q = if q.is_empty() { vec![0.0; market.n_claims()] } else { q };
    if q.len() != market.n_claims() {
        return Err(CliError::Usage(format!("expected {} claim quantities, got {}", market.n_claims(), q.len())));
    }
    let sol = solve_primal(&PrimalProblem::new(market, utility, x, q))?;
    Ok(json!({
        "u": sol.u_value,
        "y": sol.y,
        "H": sol.h,
        "X_hat": sol.x_hat,
        "z": sol.z,
        "p": sol.prices(market),
        "iterations": sol.iterations,
        "foc_residual": sol.foc_residual,
    }))
}

fn run_command(cli: &Cli, sink: &Sink, tol: &Tolerances) -> CliResult<(&'static str, Value)> {
    let config = json!({ "tolerances": tol });
    Ok(match &cli.command {
        Command::Solve { model, q } => {
            let (market, utility) = model.load()?;
            let mut r = solve_report(&market, &utility, model.x, q.clone())?;
            r["config"] = config;
            ("solve", r)
        }
        Command::Sensitivity { model, assumption1 } => {
            let (market, utility) = model.load()?;
            let mode = match assumption1 {
                A1Mode::Strict => Assumption1Mode::Strict,
                A1Mode::Warn => Assumption1Mode::Warn,
            };
            let a = analyze(&market, &utility, model.x, mode)?;
            let r = &a.report;
            let d = &r.diagnostics;
            sink.csv_matrix("sensitivity_D", &r.d)?;
            sink.csv_matrix("sensitivity_G", &r.g)?;
            if let Some(h) = &r.h {
                sink.csv_matrix("sensitivity_H", h)?;
            }
            (
                "sensitivity",
                json!({
                    "x": r.x, "y": r.y, "p": r.p, "p_tilde": r.p_tilde, "p_prime": r.p_prime,
                    "D": matrix(&r.d), "G": matrix(&r.g), "H": opt_matrix(r.h.as_ref()), "u2": r.u2,
                    "diagnostics": {
                        "assumption1": d.assumption1,
                        "h_skipped": r.h.is_none(),
                        "basis_mean_defect": d.basis_mean_defect,
                        "hedge_orthogonality": d.hedge_orthogonality,
                        "dual_constraint_residual": d.dual_constraint_residual,
                        "l_constraint_residual": d.l_constraint_residual,
                        "inverse_residual": d.inverse_residual,
                        "alpha_beta_residual": d.alpha_beta_residual,
                        "hedge_dual_residual": d.hedge_dual_residual,
                        "y_prime_identity": d.y_prime_identity,
                        "marginal_process_residual": d.marginal_process_residual,
                        "p_tilde_two_way": d.p_tilde_two_way,
                        "g_symmetry_defect": d.g_symmetry_defect,
                        "d_symmetry_defect": d.d_symmetry_defect,
                        "d_sym_eigenvalues": d.d_sym_eigenvalues,
                        "g_eigenvalues": d.g_eigenvalues,
                    },
                    "config": config,
                }),
            )
        }
        Command::RiskTolerance { model } => {
            let (market, utility) = model.load()?;
            let bare = market.with_claims(DMatrix::zeros(market.n_states(), 0))?;
            let a0 = analyze(&bare, &utility, model.x, Assumption1Mode::Strict)?;
            let rt = rt_exists_from(&bare, &utility, &a0)?;
            let t8 = if rt.exists && market.n_claims() > 0 {
                let a = analyze_solution(&market, &utility, a0.solution.clone(), Assumption1Mode::Warn)?;
                let t = theorem8_path(&market, &a, &rt)?;
                json!({
                    "p_prime": t.p_prime, "D": matrix(&t.d_kw), "match_residual": t.match_residual,
                    "price_residual": t.price_residual, "weight_sum_defect": t.weight_sum_defect,
                    "basis_mean_defect": t.basis_mean_defect, "symmetry_defect": t.symmetry_defect,
                    "eigenvalues": t.eigenvalues,
                })
            } else {
                Value::Null
            };
            (
                "risk_tolerance",
                json!({
                    "exists": rt.exists, "residual_norm": rt.residual_norm, "tau": rt.tau, "R_T": rt.r_t,
                    "R0": rt.r0, "tolerance_mean_residual": rt.tolerance_mean_residual, "r0_residual": rt.r0_residual,
                    "x_prime_residual": rt.x_prime_residual, "l_residual": rt.l_residual,
                    "theorem8": t8, "config": config,
                }),
            )
        }
        Command::SsdCheck { model, seed, x } => {
            let market = load_model(model)?;
            let g = ssd_greatest(&market, *seed)?;
            let mut per_utility = Vec::new();
            for (name, u) in battery_utilities() {
                let bare = market.with_claims(DMatrix::zeros(market.n_states(), 0))?;
                let a0 = analyze(&bare, &u, *x, Assumption1Mode::Strict)?;
                let rt = rt_exists_from(&bare, &u, &a0)?;
                per_utility.push(json!({ "utility": name, "rt_exists": rt.exists, "residual_norm": rt.residual_norm }));
            }
            (
                "ssd_check",
                json!({
                    "found": g.found, "candidate": g.candidate, "failures": g.failures,
                    "vertices_checked": g.vertices_checked, "samples_checked": g.samples_checked,
                    "scope": g.scope, "risk_tolerance": per_utility, "config": config,
                }),
            )
        }
        Command::Counterexample { utility } => {
            let u = UtilitySpec::parse(utility)?.to_utility()?;
            let c = theorem7_counterexample(&u)?;
            let r = &c.report;
            let states: Vec<Value> = (0..c.market.n_states())
                .map(|s| {
                    json!({
                        "prob": c.market.probs()[s],
                        "gains": c.market.gains().row(s).iter().collect::<Vec<_>>(),
                        "claims": c.market.claims().row(s).iter().collect::<Vec<_>>(),
                    })
                })
                .collect();
            (
                "counterexample",
                json!({
                    "states": states, "terminal": c.terminal, "alpha": c.alpha, "beta": c.beta,
                    "foc_residual": c.foc_residual, "rt_exists": r.exists, "residual_norm": r.residual_norm,
                    "tolerance_mean_residual": r.tolerance_mean_residual, "config": config,
                }),
            )
        }
        Command::Theorem9 { model } => {
            let (market, utility) = model.load()?;
            let t = theorem9_battery(&market, &utility, model.x)?;
            (
                "theorem9",
                json!({
                    "exists": t.exists, "rt_residual": t.rt_residual, "p_prime_norm": t.p_prime_norm,
                    "d_symmetry_defect": t.d_symmetry_defect, "d_max_eigenvalue": t.d_max_eigenvalue,
                    "d_full_rank": t.d_full_rank, "assumption1": t.assumption1, "theorem8_match": t.theorem8_match,
                    "pair_asymmetry": t.pair_asymmetry, "pair_p_prime_norm": t.pair_p_prime_norm,
                    "probe_d": t.probe_d, "consistent": t.consistent, "witnesses": t.witnesses, "config": config,
                }),
            )
        }
        Command::Expansions { model, dx, dq, eps } => {
            let (market, utility) = model.load()?;
            let m = market.n_claims();
            let dq = if dq.is_empty() { vec![1.0; m] } else { dq.clone() };
            if dq.len() != m {
                return Err(CliError::Usage(format!("expected {m} claim directions, got {}", dq.len())));
            }
            let a = analyze(&market, &utility, model.x, Assumption1Mode::Warn)?;
            let mats = expansion_matrices(&a.report);
            let mut values = Vec::new();
            for &e in eps {
                let q: Vec<f64> = dq.iter().map(|v| v * e).collect();
                let b = reservation_price(&market, &utility, model.x + e * dx, &q)?;
                let c = certainty_equivalent(&market, &utility, model.x + e * dx, &q)?;
                values.push(
                    json!({ "eps": e, "b": b.value, "b_residual": b.residual, "c": c.value, "c_residual": c.residual }),
                );
            }
            let mut fits = serde_json::Map::new();
            for (name, which, mat) in
                [("b", Quantity::Reservation, &mats.b_sym), ("c", Quantity::CertaintyEquivalent, &mats.c_sym)]
            {
                let f = directional_fit(&market, &utility, &a.report, which, mat, *dx, &dq, eps)?;
                let points: Vec<Value> = f
                    .points
                    .iter()
                    .map(|p| json!({ "eps": p.eps, "second_order": p.second_order, "scaled": p.scaled }))
                    .collect();
                fits.insert(
                    name.into(),
                    json!({
                        "predicted": f.predicted, "points": points, "stability": f.stability,
                        "relative_error": f.relative_error, "stencil_curvature": f.stencil_curvature,
                        "stencil_relative_error": f.stencil_relative_error,
                    }),
                );
            }
            sink.csv_matrix("expansions_B", &mats.b)?;
            sink.csv_matrix("expansions_C", &mats.c)?;
            (
                "expansions",
                json!({
                    "b": values.iter().map(|v| v["b"].clone()).collect::<Vec<_>>(),
                    "c": values.iter().map(|v| v["c"].clone()).collect::<Vec<_>>(),
                    "roots": values, "B": matrix(&mats.b), "C": matrix(&mats.c),
                    "B_sym": matrix(&mats.b_sym), "C_sym": matrix(&mats.c_sym),
                    "fits": fits, "config": config,
                }),
            )
        }
        Command::BasisRisk(args) => {
            let (params, warning) = args.params()?;
            if let Some(w) = &warning {
                eprintln!("{}", json!({ "warning": w }));
            }
            let r = simulate_d_parallel(&params, args.threads)?;
            let mut rows = Vec::new();
            if let Some(spec) = &args.crosscheck {
                for s in parse_steps(spec)? {
                    let c = crosscheck_tree(&params, s)?;
                    let diff = (c.d_tree - r.d).abs();
                    rows.push(ConvergenceRow {
                        steps: s,
                        p_prime: c.p_prime,
                        d_tree: c.d_tree,
                        d_mc: r.d,
                        abs_diff: diff,
                        rel_diff: diff / r.d.abs(),
                    });
                }
                sink.csv_table("basis_risk_convergence", &rows)?;
            }
            let non_increasing = rows.windows(2).all(|w| w[1].abs_diff <= w[0].abs_diff);
            (
                "basis_risk",
                json!({
                    "kappa": r.kappa, "price": r.price, "D": r.d, "stderr": r.stderr,
                    "estimators": {
                        "likelihood_ratio": { "D": r.d_likelihood_ratio, "stderr": r.stderr_likelihood_ratio },
                        "measure_shift": { "D": r.d_measure_shift, "stderr": r.stderr_measure_shift },
                        "z_score": r.z_score, "weight_z_score": r.weight_z_score,
                    },
                    "merton": { "pi_star": r.merton.pi_star, "R0": r.merton.r0, "theta": r.merton.theta, "value": r.merton.value },
                    "constant_payoff": r.constant_payoff,
                    "crosscheck": rows, "crosscheck_non_increasing": non_increasing,
                    "warning": warning,
                    "config": { "paths": params.mc.paths, "steps": params.mc.steps, "seed": params.mc.seed, "antithetic": params.mc.antithetic },
                }),
            )
        }
        Command::RandomBattery { models, seed } => {
            let s = run_battery(*seed, *models, tol);
            let mut v = serde_json::to_value(&s).expect("summary serializes");
            v["config"] = config;
            if s.invariant_violations > 0 {
                sink.json("random_battery", &v)?;
                let _ = writeln!(std::io::stdout(), "{}", serde_json::to_string_pretty(&v).expect("serializes"));
                return Err(CliError::Core(utilprice_core::Error::Invariant(format!(
                    "{} of {} battery runs violate an invariant",
                    s.invariant_violations, s.runs
                ))));
            }
            ("random_battery", v)
        }
    })
}

/// Runs the parsed command; returns the report or the error.
pub fn run(cli: &Cli) -> CliResult<Value> {
    if !(cli.fd_step > 0.0 && cli.inverse_tol > 0.0) {
        return Err(CliError::Usage("tolerances must be positive".into()));
    }
    let tol = Tolerances { fd_step: cli.fd_step, inverse_identity: cli.inverse_tol, ..Tolerances::default() };
    let sink = Sink::new(cli.out.clone());
    let (name, value) = run_command(cli, &sink, &tol)?;
    sink.json(name, &value)?;
    Ok(value)
}

/// Entry point: prints the report or a JSON error and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = write!(std::io::stdout(), "{e}");
            return 0;
        }
        Err(e) => {
            eprintln!("{}", json!({ "error": "usage", "message": e.to_string(), "exit_code": 2 }));
            return 2;
        }
    };
    match run(&cli) {
        Ok(v) => {
            // A closed pipe on stdout is not an error of the computation.
            let _ = writeln!(std::io::stdout(), "{}", serde_json::to_string_pretty(&v).expect("reports serialize"));
            0
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit_code()
        }
    }
}
