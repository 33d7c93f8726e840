//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (no libtest harness) so the verdict lines are
//! printed in order and the process exits non-zero if any criterion fails.

use std::time::{Duration, Instant};

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal, StandardUniform};
use utilprice::battery::{battery_utilities, run_battery, BatterySummary};
use utilprice::mc::simulate_d_parallel;
use utilprice::report::Tolerances;
use utilprice_core::basis_risk::{crosscheck_tree, two_factor_tree, BasisRiskParams, McConfig, Payoff};
use utilprice_core::expansions::{directional_fit, expansion_matrices, Quantity};
use utilprice_core::market::is_replicable;
use utilprice_core::random::{battery_instance, random_market};
use utilprice_core::risk_tolerance::{rt_exists, theorem7_counterexample, theorem9_battery};
use utilprice_core::sensitivity::{analyze, Assumption1Mode};
use utilprice_core::solver::{dual_via_primal, solve_primal, PrimalProblem};
use utilprice_core::ssd::{ssd_compare, ssd_compare_exact, ssd_greatest, Discrete, SsdRelation};
use utilprice_core::{reduce_tree, FiniteMarket, Utility};

type Verdict = Result<String, String>;
type Criterion<'a> = (u32, &'static str, Box<dyn Fn() -> Verdict + 'a>);

const BATTERY_SEED: u64 = 7;
const X: f64 = 1.0;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn utility_for(i: usize) -> (&'static str, Utility) {
    let all = battery_utilities();
    all[i % all.len()].clone()
}

fn max_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().map(f64::abs).fold(0.0, f64::max)
}

/// Deterministic direction of unit-ish entries for instance `i`.
fn direction(seed: u64, len: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len)
        .map(|_| {
            let u: f64 = StandardUniform.sample(&mut rng);
            let sign = if u < 0.5 { -1.0 } else { 1.0 };
            sign * (0.5 + (2.0 * u - 1.0).abs())
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Criteria 1, 3, 4, 5 share the market × utility battery.

fn battery_failures(s: &BatterySummary) -> Vec<String> {
    s.outcomes
        .iter()
        .filter(|o| !o.violations.is_empty())
        .map(|o| format!("instance {} {}: {}", o.instance, o.utility, o.violations.join("; ")))
        .collect()
}

fn criterion1(s: &BatterySummary, elapsed: Duration) -> Verdict {
    ensure(s.runs == 400, || format!("expected 400 runs, got {}", s.runs))?;
    let worst = s.outcomes.iter().map(|o| o.inverse_residual.unwrap_or(f64::INFINITY)).fold(0.0, f64::max);
    ensure(worst < 1e-8, || format!("max ‖(−G)H − I‖∞ = {worst:e}"))?;
    ensure(elapsed < Duration::from_secs(60), || format!("battery took {elapsed:?}"))?;
    Ok(format!("400 runs, max ‖(−G)H − I‖∞ = {worst:.2e}, {:.1}s", elapsed.as_secs_f64()))
}

fn criterion3(s: &BatterySummary) -> Verdict {
    let worst = s.outcomes.iter().map(|o| o.g00_relative_error).fold(0.0, f64::max);
    ensure(worst < 1e-5 && worst.is_finite(), || format!("max relative |G00 − u''| = {worst:e}"))?;
    Ok(format!("max relative |G00 − FD u''| = {worst:.2e}"))
}

fn criterion4(s: &BatterySummary) -> Verdict {
    let failures = battery_failures(s);
    ensure(failures.is_empty(), || failures.join(" | "))?;
    let (mut pp, mut sym, mut eig, mut t8, mut probe) = (0.0f64, 0.0f64, f64::NEG_INFINITY, 0.0f64, 0.0f64);
    for o in &s.outcomes {
        let probe_d = o.probe_d.ok_or_else(|| format!("instance {} {}: no probe", o.instance, o.utility))?;
        probe = probe.max(probe_d);
        if o.utility.starts_with("mixture") {
            continue;
        }
        let tag = || format!("instance {} {}", o.instance, o.utility);
        ensure(o.rt_exists, || format!("{}: no risk-tolerance process", tag()))?;
        pp = pp.max(o.p_prime_norm.unwrap_or(f64::INFINITY));
        sym = sym.max(o.d_symmetry_defect.unwrap_or(f64::INFINITY));
        eig = eig.max(o.d_max_eigenvalue.unwrap_or(f64::INFINITY));
        t8 = t8.max(o.theorem8_match.ok_or_else(|| format!("{}: no Kunita–Watanabe D", tag()))?);
    }
    ensure(pp < 1e-7, || format!("max ‖p'‖ = {pp:e}"))?;
    ensure(sym < 1e-8, || format!("max D symmetry defect = {sym:e}"))?;
    ensure(eig < 0.0, || format!("largest D eigenvalue = {eig:e}"))?;
    ensure(t8 < 1e-7, || format!("max |D_kw − D| = {t8:e}"))?;
    ensure(probe < 1e-8, || format!("max probe |D| = {probe:e}"))?;

    let (_, mixture) = utility_for(3);
    let c = theorem7_counterexample(&mixture).map_err(err)?;
    ensure(!c.report.exists && c.report.residual_norm > 1e-3, || {
        format!("counterexample: exists = {}, residual {:e}", c.report.exists, c.report.residual_norm)
    })?;
    let t9 = theorem9_battery(&c.market, &mixture, X).map_err(err)?;
    let witness = t9.pair_asymmetry.max(t9.pair_p_prime_norm);
    ensure(witness > 1e-6, || format!("counterexample witness only {witness:e}"))?;
    Ok(format!(
        "power/log: ‖p'‖ ≤ {pp:.1e}, sym ≤ {sym:.1e}, λmax(D) = {eig:.2e}, |D_kw − D| ≤ {t8:.1e}; \
         probe |D| ≤ {probe:.1e}; mixture counterexample residual {:.3e}, |D12 − D21| = {:.2e}, ‖p'‖ = {:.2e}",
        c.report.residual_norm, t9.pair_asymmetry, t9.pair_p_prime_norm
    ))
}

fn criterion5(s: &BatterySummary) -> Verdict {
    let mut n = 0;
    let (mut tm, mut r0r, mut l) = (0.0f64, 0.0f64, 0.0f64);
    for o in s.outcomes.iter().filter(|o| o.rt_exists) {
        n += 1;
        tm = tm.max(o.tolerance_mean_residual);
        r0r = r0r.max(o.r0_residual.unwrap_or(f64::INFINITY));
        l = l.max(o.l_residual.unwrap_or(f64::INFINITY));
    }
    ensure(n > 0, || "the risk-tolerance process never exists".into())?;
    ensure(tm < 1e-6, || format!("(u')²/u'' identity relative residual {tm:e}"))?;
    ensure(r0r < 1e-8, || format!("|R0 + u'/u''|/R0 = {r0r:e}"))?;
    ensure(l < 1e-9, || format!("max |L − 1| = {l:e}"))?;
    Ok(format!("{n} runs with R: (u')²/u'' rel {tm:.1e}, R0 rel {r0r:.1e}, |L − 1| {l:.1e}"))
}

// ---------------------------------------------------------------------------

fn prices_at(market: &FiniteMarket, u: &Utility, x: f64, q: &[f64]) -> Result<Vec<f64>, String> {
    let sol = solve_primal(&PrimalProblem::new(market, u, x, q.to_vec())).map_err(err)?;
    Ok(sol.prices(market))
}

fn criterion2() -> Verdict {
    let start = Instant::now();
    let (mut worst_ratio, mut worst_d) = (f64::INFINITY, 0.0f64);
    for i in 0..30u64 {
        let (name, u) = utility_for(i as usize);
        let market = battery_instance(1001, i).map_err(err)?;
        let m = market.n_claims();
        let a = analyze(&market, &u, X, Assumption1Mode::Strict).map_err(err)?;
        let rep = &a.report;
        let dir = direction(5000 + i, m + 1);
        let residual = |s: f64| -> Result<f64, String> {
            let q: Vec<f64> = dir[1..].iter().map(|v| s * v).collect();
            let dx = s * dir[0];
            let p = prices_at(&market, &u, X + dx, &q)?;
            let r = (0..m).map(|k| {
                let lin: f64 = (0..m).map(|j| rep.d[(k, j)] * q[j]).sum();
                p[k] - rep.p[k] - rep.p_prime[k] * dx - lin
            });
            let norm: f64 = r.map(|v| v * v).sum::<f64>().sqrt();
            let size = dx.abs() + q.iter().map(|v| v * v).sum::<f64>().sqrt();
            Ok(norm / size)
        };
        let ratio = residual(1e-3)? / residual(5e-4)?;
        ensure(ratio >= 1.7, || format!("instance {i} {name}: residual ratio {ratio:.3}"))?;
        worst_ratio = worst_ratio.min(ratio);

        let eps = 1e-3;
        for j in 0..m {
            let mut qp = vec![0.0; m];
            qp[j] = eps;
            let up = prices_at(&market, &u, X, &qp)?;
            qp[j] = -eps;
            let dn = prices_at(&market, &u, X, &qp)?;
            for k in 0..m {
                let fd = (up[k] - dn[k]) / (2.0 * eps);
                let rel = (fd - rep.d[(k, j)]).abs() / rep.d[(k, j)].abs();
                ensure(rel < 1e-3, || format!("instance {i} {name}: D[{k},{j}] = {:e}, FD {fd:e}", rep.d[(k, j)]))?;
                worst_d = worst_d.max(rel);
            }
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(120), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "30 instances: min residual ratio {worst_ratio:.3}, max relative D vs FD {worst_d:.2e}, {:.1}s",
        elapsed.as_secs_f64()
    ))
}

fn criterion6() -> Verdict {
    let (mut stab, mut rel, mut block, mut with_r) = (0.0f64, 0.0f64, 0.0f64, 0);
    for i in 0..20u64 {
        let (name, u) = utility_for(i as usize);
        let market = battery_instance(2002, i).map_err(err)?;
        let m = market.n_claims();
        let a = analyze(&market, &u, X, Assumption1Mode::Strict).map_err(err)?;
        let mats = expansion_matrices(&a.report);
        let dir = direction(6000 + i, m + 1);
        for (which, mat) in [(Quantity::Reservation, &mats.b_sym), (Quantity::CertaintyEquivalent, &mats.c_sym)] {
            let fit =
                directional_fit(&market, &u, &a.report, which, mat, dir[0], &dir[1..], &[1e-2, 5e-3]).map_err(err)?;
            ensure(fit.stability < 0.05 && fit.relative_error < 0.05, || {
                format!(
                    "instance {i} {name} {which:?}: stability {:.3e}, error {:.3e}",
                    fit.stability, fit.relative_error
                )
            })?;
            stab = stab.max(fit.stability);
            rel = rel.max(fit.relative_error);
        }
        if rt_exists(&market, &u, X).map_err(err)?.exists {
            with_r += 1;
            for r in 0..m {
                for c in 0..m {
                    let d = a.report.d[(r, c)];
                    block = block.max((mats.b[(r + 1, c + 1)] - d).abs()).max((mats.c[(r + 1, c + 1)] - d).abs());
                }
            }
        }
    }
    ensure(block < 1e-8, || format!("claim blocks of B, C differ from D by {block:e}"))?;
    Ok(format!(
        "20 instances: max stability {stab:.2e}, max error vs quadratic form {rel:.2e}; \
         {with_r} with R: |B − D|, |C − D| ≤ {block:.1e}"
    ))
}

fn criterion7() -> Verdict {
    let (mut replicable, mut disagreements) = (0, Vec::new());
    for i in 0..200u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(7000 + i);
        let k = 5 + (i % 6) as usize;
        let j = 1 + (i % 3) as usize;
        let market = random_market(9000 + i, k, j, 0).map_err(err)?;
        let target = i % 2 == 0;
        let claim: Vec<f64> = if target {
            let c0: f64 = StandardNormal.sample(&mut rng);
            let beta: Vec<f64> = (0..j).map(|_| StandardNormal.sample(&mut rng)).collect();
            (0..k).map(|s| c0 + (0..j).map(|a| beta[a] * market.gains()[(s, a)]).sum::<f64>()).collect()
        } else {
            (0..k).map(|_| -> f64 { Exp1.sample(&mut rng) }).collect()
        };
        let rep = is_replicable(&claim, &market).map_err(err)?;
        match rep.vertex_verdict {
            Some(v) if v == rep.span_verdict && v == target => {}
            other => {
                disagreements.push(format!("pair {i}: span {}, vertex {other:?}, built {target}", rep.span_verdict))
            }
        }
        replicable += rep.span_verdict as usize;
    }
    ensure(disagreements.is_empty(), || disagreements.join(" | "))?;
    Ok(format!("200 pairs ({replicable} replicable), 0 disagreements"))
}

fn random_discrete(rng: &mut ChaCha8Rng, n: usize) -> Discrete {
    let values: Vec<f64> = (0..n).map(|_| -> f64 { Exp1.sample(rng) }).collect();
    let weights: Vec<f64> = (0..n).map(|_| 0.1 + Distribution::<f64>::sample(&Exp1, rng)).collect();
    let total: f64 = weights.iter().sum();
    Discrete::new(values, weights.iter().map(|w| w / total).collect()).expect("valid distribution")
}

fn criterion8() -> Verdict {
    let mut counts = [0usize; 4];
    for i in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(8000 + i);
        let n = 2 + (i % 12) as usize;
        let a = random_discrete(&mut rng, n);
        // Mix of dominated, spread and unrelated pairs.
        let b = match i % 3 {
            0 => Discrete::new(a.values.iter().map(|v| v * 0.9).collect(), a.weights.clone()),
            1 => {
                let mut values = Vec::new();
                let mut weights = Vec::new();
                for (v, w) in a.values.iter().zip(&a.weights) {
                    let s: f64 = StandardUniform.sample(&mut rng);
                    values.extend([v * (1.0 - 0.3 * s), v * (1.0 + 0.3 * s)]);
                    weights.extend([0.5 * w, 0.5 * w]);
                }
                Discrete::new(values, weights)
            }
            _ => Ok(random_discrete(&mut rng, n)),
        }
        .map_err(err)?;
        let v = ssd_compare(&a, &b).map_err(|e| format!("pair {i}: {e}"))?;
        counts[match v.relation {
            SsdRelation::Equal => 0,
            SsdRelation::FirstDominates => 1,
            SsdRelation::SecondDominates => 2,
            SsdRelation::Incomparable => 3,
        }] += 1;
        ensure(v.relation == ssd_compare_exact(&a, &b).relation, || format!("pair {i}: verdict changed"))?;
        if i % 3 != 2 {
            ensure(v.relation == SsdRelation::FirstDominates, || format!("pair {i}: {}", v.relation.name()))?;
        }
    }

    let params = basis_params(Payoff::Put { strike: 1.0 }, McConfig::default());
    let mut models = Vec::new();
    for steps in [1, 2] {
        let market = reduce_tree(&two_factor_tree(&params, steps).map_err(err)?).map_err(err)?;
        let g = ssd_greatest(&market, 1).map_err(err)?;
        ensure(g.found, || format!("{steps}-step tree: no SSD-greatest density ({} failures)", g.failures.len()))?;
        for (name, u) in battery_utilities() {
            let rt = rt_exists(&market, &u, params.x).map_err(err)?;
            ensure(rt.exists, || format!("{steps}-step tree, {name}: residual {:e}", rt.residual_norm))?;
        }
        models.push(format!("{}-state", market.n_states()));
    }
    Ok(format!(
        "100 pairs (equal/first/second/incomparable = {counts:?}), 0 disagreements; \
         two-factor trees ({}): SSD-greatest found, R exists for all 4 utilities",
        models.join(", ")
    ))
}

fn basis_params(payoff: Payoff, mc: McConfig) -> BasisRiskParams {
    BasisRiskParams {
        nu: 0.1,
        mu: 0.08,
        eta: 0.3,
        sigma: 0.2,
        rho: 0.5,
        maturity: 1.0,
        q0: 1.0,
        s0: 1.0,
        payoff,
        p: 0.5,
        x: 1.0,
        mc,
    }
}

fn criterion9() -> Verdict {
    let start = Instant::now();
    let mc = McConfig { paths: 200_000, steps: 64, seed: 1, antithetic: false };
    let params = basis_params(Payoff::Put { strike: 1.0 }, mc);
    let r = simulate_d_parallel(&params, None).map_err(err)?;
    ensure(r.z_score < 3.0, || format!("estimators differ by {:.2} standard errors", r.z_score))?;
    ensure(r.d < 0.0, || format!("D = {:e}", r.d))?;
    let flat = simulate_d_parallel(&basis_params(Payoff::Constant { value: 0.7 }, mc), None).map_err(err)?;
    ensure(flat.d == 0.0, || format!("constant payoff D = {:e}", flat.d))?;
    let mut diffs = Vec::new();
    let mut p4 = f64::NAN;
    for steps in [2, 4, 6] {
        let row = crosscheck_tree(&params, steps).map_err(err)?;
        if steps == 4 {
            p4 = row.p_prime;
        }
        diffs.push((row.d_tree - r.d).abs());
    }
    ensure(p4.abs() < 1e-4, || format!("4-step |p'| = {p4:e}"))?;
    ensure(diffs.windows(2).all(|w| w[1] <= w[0]), || format!("|D_tree − D_mc| = {diffs:?}"))?;
    let rel6 = diffs[2] / r.d.abs();
    ensure(rel6 < 0.2, || format!("6-step relative difference {rel6:.3}"))?;
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(180), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "D = {:.5e} ± {:.1e} (estimators {:.2} s.e. apart); constant payoff D = 0; 4-step |p'| = {:.1e}; \
         |D_tree − D_mc| = {:.2e}, {:.2e}, {:.2e} ({:.1}% at 6 steps); {:.1}s",
        r.d,
        r.stderr,
        r.z_score,
        p4.abs(),
        diffs[0],
        diffs[1],
        diffs[2],
        100.0 * rel6,
        elapsed.as_secs_f64()
    ))
}

fn criterion10() -> Verdict {
    let (mut worst_x, mut worst_y) = (f64::INFINITY, f64::INFINITY);
    for i in 0..20u64 {
        let (name, u) = utility_for(i as usize);
        let market = battery_instance(3003, i).map_err(err)?;
        let m = market.n_claims();
        let k = market.n_states();
        let a = analyze(&market, &u, X, Assumption1Mode::Strict).map_err(err)?;
        let proc = &a.processes;
        let base = &a.solution;
        let dir = direction(10_000 + i, m + 1);

        let primal_error = |s: f64| -> Result<f64, String> {
            let dx = s * dir[0];
            let q: Vec<f64> = dir[1..].iter().map(|v| s * v).collect();
            let sol = solve_primal(&PrimalProblem::new(&market, &u, X + dx, q.clone())).map_err(err)?;
            let e = max_abs((0..k).map(|st| {
                let lin: f64 = (0..m).map(|j| proc.z[(st, j)] * q[j]).sum();
                sol.x_hat[st] - base.x_hat[st] - proc.x_prime[st] * dx - lin
            }));
            Ok(e / (dx.abs() + max_abs(q.iter().copied()) * m as f64))
        };
        let rx = primal_error(1e-3)? / primal_error(5e-4)?;
        ensure(rx >= 1.7, || format!("instance {i} {name}: primal error ratio {rx:.3}"))?;
        worst_x = worst_x.min(rx);

        let w = proc.w.as_ref().ok_or_else(|| format!("instance {i} {name}: no dual derivatives"))?;
        let y = base.y;
        let r: Vec<f64> = a.report.p.iter().map(|p| y * p).collect();
        let y_base: Vec<f64> = base.z.iter().map(|z| y * z).collect();
        let zero = vec![0.0; m];
        let dual_dir: Vec<f64> = (0..=m).map(|r| (0..=m).map(|c| a.report.g[(r, c)] * dir[c]).sum()).collect();
        let dual_error = |s: f64| -> Result<f64, String> {
            // Move along the image of the primal direction under the Hessian,
            // so the matching (x, q) stays a distance of order s away.
            let dy = s * dual_dir[0];
            let dr: Vec<f64> = dual_dir[1..].iter().map(|v| s * v).collect();
            let target: Vec<f64> = r.iter().zip(&dr).map(|(a, b)| a + b).collect();
            let opt = dual_via_primal(&market, &u, y + dy, &target, (X, &zero), &a.report.g)
                .map_err(|e| format!("instance {i} {name}: dual at scale {s:e}: {e}"))?;
            let e = max_abs((0..k).map(|st| {
                let lin: f64 = (0..m).map(|j| w[(st, j + 1)] * dr[j]).sum();
                opt.y_t[st] - y_base[st] - w[(st, 0)] * dy - lin
            }));
            Ok(e / (dy.abs() + dr.iter().map(|v| v.abs()).sum::<f64>()))
        };
        let ry = dual_error(1e-3)? / dual_error(5e-4)?;
        ensure(ry >= 1.7, || format!("instance {i} {name}: dual error ratio {ry:.3}"))?;
        worst_y = worst_y.min(ry);
    }
    Ok(format!("20 instances: min error ratio {worst_x:.3} for (X', Z), {worst_y:.3} for W"))
}

fn main() {
    let tol = Tolerances::default();
    let start = Instant::now();
    let battery = run_battery(BATTERY_SEED, 100, &tol);
    let battery_time = start.elapsed();

    let criteria: Vec<Criterion> = vec![
        (1, "inverse identity", Box::new(|| criterion1(&battery, battery_time))),
        (2, "sensitivities vs finite differences", Box::new(criterion2)),
        (3, "G00 equals u''", Box::new(|| criterion3(&battery))),
        (4, "risk-tolerance equivalences", Box::new(|| criterion4(&battery))),
        (5, "risk-tolerance identities", Box::new(|| criterion5(&battery))),
        (6, "reservation price and certainty equivalent expansions", Box::new(criterion6)),
        (7, "replicability tests agree", Box::new(criterion7)),
        (8, "second-order stochastic dominance", Box::new(criterion8)),
        (9, "basis risk", Box::new(criterion9)),
        (10, "derivative processes", Box::new(criterion10)),
    ];
    let mut failed = 0;
    for (n, title, run) in criteria {
        let t = Instant::now();
        match run() {
            Ok(detail) => println!("criterion {n:>2} PASS  {title}: {detail} [{:.1}s]", t.elapsed().as_secs_f64()),
            Err(why) => {
                failed += 1;
                println!("criterion {n:>2} FAIL  {title}: {why} [{:.1}s]", t.elapsed().as_secs_f64());
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed, {:.1}s total", 10 - failed, start.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
