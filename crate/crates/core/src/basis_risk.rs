//! Options on a non-traded asset hedged with a correlated traded one.
//!
//! The traded asset follows `dS = S(μ dt + σ dW)`; the non-traded asset
//! follows `dQ = Q(ν dt + η(ρ dW + √(1−ρ²) dB))`; the interest rate is zero.
//! Under the minimal martingale measure `Q̃_t = e^{−κt} Q_t` with
//! `κ = ν − (μ/σ)ρη` is a martingale, and the claim `h(Q_T)` has the hedge
//! amount `Δ(q̃, t)` invested in `Q̃`. For power utility the sensitivity
//! parameter is
//!
//! `D(x) = η²(1−ρ²) (u'/u'') E_R̃[∫₀ᵀ (Δ(Q̃_t, t)/R_t)² dt]`
//!
//! with `R = X/(1−p)` the Merton wealth scaled to a risk-tolerance process and
//! `dR̃/dP = R_T Ŷ_T / R0`. Under `R̃` the Brownian motion `W` acquires the
//! constant drift `θ = (μ/σ) p/(1−p)`.

use alloc::vec;
use alloc::vec::Vec;
use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{invalid, invariant, Result};
use crate::market::{TreeModel, TreeNode};
use crate::sensitivity::{analyze, Assumption1Mode};
use crate::utility::Utility;

/// Bounded payoff `h` of the claim on `Q_T`.
#[derive(Debug, Clone, PartialEq)]
pub enum Payoff {
    Put {
        strike: f64,
    },
    /// `min((Q − K)⁺, cap)`.
    CappedCall {
        strike: f64,
        cap: f64,
    },
    Constant {
        value: f64,
    },
    /// Piecewise-linear through `(q, h)` points with flat extrapolation.
    Table {
        points: Vec<(f64, f64)>,
    },
}

impl Payoff {
    pub fn eval(&self, q: f64) -> f64 {
        match self {
            Payoff::Put { strike } => (strike - q).max(0.0),
            Payoff::CappedCall { strike, cap } => (q - strike).max(0.0).min(*cap),
            Payoff::Constant { value } => *value,
            Payoff::Table { points } => interpolate(points, q),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Payoff::Put { strike } if !(*strike > 0.0) => Err(invalid!("put strike must be positive")),
            Payoff::CappedCall { strike, cap } if !(*strike > 0.0 && *cap > 0.0) => {
                Err(invalid!("capped call needs positive strike and cap"))
            }
            Payoff::Constant { value } if !value.is_finite() => Err(invalid!("constant payoff must be finite")),
            Payoff::Table { points } => {
                if points.len() < 2 || points.windows(2).any(|w| !(w[1].0 > w[0].0)) {
                    return Err(invalid!("payoff table needs at least two points with increasing abscissae"));
                }
                if points.iter().any(|(q, h)| !(q.is_finite() && h.is_finite())) {
                    return Err(invalid!("payoff table entries must be finite"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

fn interpolate(points: &[(f64, f64)], q: f64) -> f64 {
    if q <= points[0].0 {
        return points[0].1;
    }
    for w in points.windows(2) {
        if q <= w[1].0 {
            let s = (q - w[0].0) / (w[1].0 - w[0].0);
            return w[0].1 + s * (w[1].1 - w[0].1);
        }
    }
    points[points.len() - 1].1
}

/// Monte Carlo settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    pub paths: usize,
    pub steps: usize,
    pub seed: u64,
    /// Pair each path with its mirror image.
    pub antithetic: bool,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig { paths: 200_000, steps: 64, seed: 1, antithetic: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasisRiskParams {
    pub nu: f64,
    pub mu: f64,
    pub eta: f64,
    pub sigma: f64,
    pub rho: f64,
    pub maturity: f64,
    pub q0: f64,
    pub s0: f64,
    pub payoff: Payoff,
    /// Power exponent; `0` selects logarithmic utility.
    pub p: f64,
    pub x: f64,
    pub mc: McConfig,
}

impl BasisRiskParams {
    pub fn validate(&self) -> Result<()> {
        let finite =
            [self.nu, self.mu, self.eta, self.sigma, self.rho, self.maturity, self.q0, self.s0, self.p, self.x];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(invalid!("basis-risk parameters must be finite"));
        }
        if !(self.eta > 0.0 && self.sigma > 0.0) {
            return Err(invalid!("volatilities must be positive"));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(invalid!("correlation must lie in (0, 1)"));
        }
        if !(self.maturity > 0.0 && self.q0 > 0.0 && self.s0 > 0.0 && self.x > 0.0) {
            return Err(invalid!("maturity, prices and capital must be positive"));
        }
        if !(self.p < 1.0) {
            return Err(invalid!("power exponent must be below 1"));
        }
        if self.mc.steps == 0 || self.mc.paths < 2 {
            return Err(invalid!("Monte Carlo needs at least one step and two paths"));
        }
        self.payoff.validate()
    }

    pub fn utility(&self) -> Result<Utility> {
        if self.p == 0.0 {
            Ok(Utility::Log)
        } else {
            Utility::power(self.p)
        }
    }

    /// `κ = ν − (μ/σ) ρ η`.
    pub fn kappa(&self) -> f64 {
        self.nu - self.mu / self.sigma * self.rho * self.eta
    }
}

/// Standard normal distribution function.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / core::f64::consts::SQRT_2)
}

fn bs_call(f: f64, k: f64, sd: f64) -> (f64, f64) {
    let d1 = ((f / k).ln() + 0.5 * sd * sd) / sd;
    let d2 = d1 - sd;
    (f * norm_cdf(d1) - k * norm_cdf(d2), norm_cdf(d1))
}

/// Nodes and weights of Gauss–Hermite quadrature for `∫ e^{−t²} g(t) dt`.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    /// Newton iteration on the orthonormal Hermite recurrence.
    pub fn new(n: usize) -> Self {
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let pim4 = core::f64::consts::PI.powf(-0.25);
        let m = n.div_ceil(2);
        let mut z = 0.0f64;
        for i in 0..m {
            z = match i {
                0 => (2.0 * n as f64 + 1.0).sqrt() - 1.85575 * (2.0 * n as f64 + 1.0).powf(-1.0 / 6.0),
                1 => z - 1.14 * (n as f64).powf(0.426) / z,
                2 => 1.86 * z - 0.86 * nodes[0],
                3 => 1.91 * z - 0.91 * nodes[1],
                _ => 2.0 * z - nodes[i - 2],
            };
            let mut pp = 0.0;
            for _ in 0..100 {
                let mut p1 = pim4;
                let mut p2 = 0.0;
                for j in 0..n {
                    let p3 = p2;
                    p2 = p1;
                    p1 = z * (2.0 / (j as f64 + 1.0)).sqrt() * p2 - (j as f64 / (j as f64 + 1.0)).sqrt() * p3;
                }
                pp = (2.0 * n as f64).sqrt() * p2;
                let dz = p1 / pp;
                z -= dz;
                if dz.abs() < 1e-15 {
                    break;
                }
            }
            nodes[i] = z;
            nodes[n - 1 - i] = -z;
            weights[i] = 2.0 / (pp * pp);
            weights[n - 1 - i] = weights[i];
        }
        GaussHermite { nodes, weights }
    }

    /// `E[g(Z)]` for standard normal `Z`.
    pub fn expect(&self, g: impl Fn(f64) -> f64) -> f64 {
        let c = core::f64::consts::SQRT_2;
        let s: f64 = self.nodes.iter().zip(&self.weights).map(|(t, w)| w * g(c * t)).sum();
        s / core::f64::consts::PI.sqrt()
    }
}

/// Pricing and hedging of `h(e^{κT} Q̃_T)` under the minimal martingale measure.
#[derive(Debug, Clone)]
pub struct MmmPricer {
    kappa: f64,
    eta: f64,
    maturity: f64,
    payoff: Payoff,
    quad: Option<GaussHermite>,
}

/// Quadrature order for tabulated payoffs.
pub const HERMITE_NODES: usize = 64;

impl MmmPricer {
    pub fn new(params: &BasisRiskParams) -> Self {
        let quad = matches!(params.payoff, Payoff::Table { .. }).then(|| GaussHermite::new(HERMITE_NODES));
        MmmPricer {
            kappa: params.kappa(),
            eta: params.eta,
            maturity: params.maturity,
            payoff: params.payoff.clone(),
            quad,
        }
    }

    /// `P(q̃, t) = E_Q̃[h(e^{κT} Q̃_T) | Q̃_t = q̃]`.
    pub fn price(&self, q_tilde: f64, t: f64) -> f64 {
        let f = (self.kappa * self.maturity).exp() * q_tilde;
        let tau = (self.maturity - t).max(0.0);
        let sd = self.eta * tau.sqrt();
        if sd < 1e-12 {
            return self.payoff.eval(f);
        }
        match &self.payoff {
            Payoff::Put { strike } => {
                let (c, _) = bs_call(f, *strike, sd);
                c - f + strike
            }
            Payoff::CappedCall { strike, cap } => bs_call(f, *strike, sd).0 - bs_call(f, strike + cap, sd).0,
            Payoff::Constant { value } => *value,
            Payoff::Table { .. } => {
                let quad = self.quad.as_ref().expect("quadrature prepared for tables");
                quad.expect(|z| self.payoff.eval(f * (-0.5 * sd * sd + sd * z).exp()))
            }
        }
    }

    /// `Δ(q̃, t) = q̃ ∂P/∂q̃`, the amount held in `Q̃`.
    pub fn delta(&self, q_tilde: f64, t: f64) -> f64 {
        let f = (self.kappa * self.maturity).exp() * q_tilde;
        let tau = (self.maturity - t).max(0.0);
        let sd = self.eta * tau.sqrt();
        match &self.payoff {
            Payoff::Constant { .. } => 0.0,
            Payoff::Put { strike } if sd < 1e-12 => {
                if f < *strike {
                    -f
                } else {
                    0.0
                }
            }
            Payoff::Put { strike } => f * (bs_call(f, *strike, sd).1 - 1.0),
            Payoff::CappedCall { strike, cap } if sd < 1e-12 => {
                if f > *strike && f < strike + cap {
                    f
                } else {
                    0.0
                }
            }
            Payoff::CappedCall { strike, cap } => f * (bs_call(f, *strike, sd).1 - bs_call(f, strike + cap, sd).1),
            Payoff::Table { .. } => {
                let h = 1e-4;
                (self.price(q_tilde * (1.0 + h), t) - self.price(q_tilde * (1.0 - h), t)) / (2.0 * h)
            }
        }
    }
}

/// Closed-form Merton quantities for power (or log) utility.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merton {
    /// Optimal fraction of wealth in `S`.
    pub pi_star: f64,
    /// `R0 = x/(1−p)`.
    pub r0: f64,
    /// `u'/u'' = −x/(1−p)`.
    pub u1_over_u2: f64,
    /// Drift of `W` under `R̃`.
    pub theta: f64,
    /// `u(x)`.
    pub value: f64,
}

pub fn merton_power(params: &BasisRiskParams) -> Result<Merton> {
    params.validate()?;
    let p = params.p;
    let (mu, sigma, x, t) = (params.mu, params.sigma, params.x, params.maturity);
    let pi_star = mu / (sigma * sigma * (1.0 - p));
    let growth = mu * mu * t / (2.0 * sigma * sigma);
    let value = if p == 0.0 { x.ln() + growth } else { x.powf(p) / p * (p * growth / (1.0 - p)).exp() };
    Ok(Merton { pi_star, r0: x / (1.0 - p), u1_over_u2: -x / (1.0 - p), theta: mu / sigma * p / (1.0 - p), value })
}

/// Merton wealth `X_t` given `W_t`.
pub fn merton_wealth(params: &BasisRiskParams, m: &Merton, t: f64, w: f64) -> f64 {
    let (pi, mu, s) = (m.pi_star, params.mu, params.sigma);
    params.x * ((pi * mu - 0.5 * pi * pi * s * s) * t + pi * s * w).exp()
}

/// Monte Carlo estimators of the expectation in `D`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimator {
    /// Simulate under `P`, weight by `dR̃/dP`.
    LikelihoodRatio,
    /// Simulate under `R̃` with the drift `θ` added to `W`.
    MeasureShift,
}

impl Estimator {
    fn tag(self) -> u64 {
        match self {
            Estimator::LikelihoodRatio => 1,
            Estimator::MeasureShift => 2,
        }
    }
}

/// One Monte Carlo sample (a path, or an antithetic pair averaged).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSample {
    /// Weighted `∫ (Δ/R)² dt`.
    pub value: f64,
    /// `dR̃/dP` (one for the measure-shift estimator).
    pub weight: f64,
}

/// Everything a path needs, computed once.
#[derive(Debug, Clone)]
pub struct PathContext {
    params: BasisRiskParams,
    merton: Merton,
    pricer: MmmPricer,
}

impl PathContext {
    pub fn new(params: &BasisRiskParams) -> Result<Self> {
        params.validate()?;
        Ok(PathContext { params: params.clone(), merton: merton_power(params)?, pricer: MmmPricer::new(params) })
    }

    pub fn merton(&self) -> &Merton {
        &self.merton
    }

    pub fn pricer(&self) -> &MmmPricer {
        &self.pricer
    }

    /// Number of independent samples (pairs when antithetic).
    pub fn n_samples(&self) -> usize {
        if self.params.mc.antithetic {
            self.params.mc.paths / 2
        } else {
            self.params.mc.paths
        }
    }

    fn one_path(&self, est: Estimator, normals: &[(f64, f64)], sign: f64) -> PathSample {
        let pr = &self.params;
        let n = pr.mc.steps;
        let dt = pr.maturity / n as f64;
        let sq = dt.sqrt();
        let drift_w = match est {
            Estimator::LikelihoodRatio => 0.0,
            Estimator::MeasureShift => self.merton.theta,
        };
        let rho_c = (1.0 - pr.rho * pr.rho).sqrt();
        let kappa = pr.kappa();
        let one_minus_p = 1.0 - pr.p;
        let integrand = |t: f64, w: f64, b: f64| {
            let q_tilde =
                pr.q0 * ((pr.nu - kappa - 0.5 * pr.eta * pr.eta) * t + pr.eta * (pr.rho * w + rho_c * b)).exp();
            let r = merton_wealth(pr, &self.merton, t, w) / one_minus_p;
            let d = self.pricer.delta(q_tilde, t) / r;
            d * d
        };
        let (mut w, mut b) = (0.0, 0.0);
        let mut acc = 0.5 * integrand(0.0, 0.0, 0.0);
        for (i, (zw, zb)) in normals.iter().enumerate() {
            w += drift_w * dt + sign * zw * sq;
            b += sign * zb * sq;
            let t = (i + 1) as f64 * dt;
            let f = integrand(t, w, b);
            acc += if i + 1 == n { 0.5 * f } else { f };
        }
        let integral = acc * dt;
        match est {
            Estimator::LikelihoodRatio => {
                let th = self.merton.theta;
                let weight = (th * w - 0.5 * th * th * pr.maturity).exp();
                PathSample { value: weight * integral, weight }
            }
            Estimator::MeasureShift => PathSample { value: integral, weight: 1.0 },
        }
    }

    /// Sample `index` of estimator `est`; depends only on `(seed, est, index)`.
    pub fn sample(&self, est: Estimator, index: usize) -> PathSample {
        let mut rng = ChaCha8Rng::seed_from_u64(self.params.mc.seed);
        rng.set_stream((est.tag() << 56) ^ index as u64);
        let normals: Vec<(f64, f64)> = (0..self.params.mc.steps)
            .map(|_| (StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)))
            .collect();
        let a = self.one_path(est, &normals, 1.0);
        if self.params.mc.antithetic {
            let b = self.one_path(est, &normals, -1.0);
            PathSample { value: 0.5 * (a.value + b.value), weight: 0.5 * (a.weight + b.weight) }
        } else {
            a
        }
    }
}

/// Pairwise summation: the result depends only on the order of `v`.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 16 {
        return v.iter().sum();
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

/// Mean and standard error of one estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorSummary {
    pub mean: f64,
    pub stderr: f64,
    pub weight_mean: f64,
    pub weight_stderr: f64,
    pub samples: usize,
}

fn mean_and_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = pairwise_sum(v) / n;
    let dev: Vec<f64> = v.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&dev) / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn summarize(samples: &[PathSample]) -> EstimatorSummary {
    let values: Vec<f64> = samples.iter().map(|s| s.value).collect();
    let weights: Vec<f64> = samples.iter().map(|s| s.weight).collect();
    let (mean, stderr) = mean_and_stderr(&values);
    let (weight_mean, weight_stderr) = mean_and_stderr(&weights);
    EstimatorSummary { mean, stderr, weight_mean, weight_stderr, samples: samples.len() }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasisRiskResult {
    pub kappa: f64,
    /// Marginal price `P(Q0, 0)`.
    pub price: f64,
    pub merton: Merton,
    /// `D` from the measure-shift estimator (the default).
    pub d: f64,
    pub stderr: f64,
    pub d_likelihood_ratio: f64,
    pub stderr_likelihood_ratio: f64,
    pub d_measure_shift: f64,
    pub stderr_measure_shift: f64,
    /// `|D_a − D_b| / √(s_a² + s_b²)`.
    pub z_score: f64,
    /// `(mean − 1)/stderr` of the likelihood-ratio weights.
    pub weight_z_score: f64,
    pub constant_payoff: bool,
}

/// Scales the summaries into `D` and applies the consistency checks.
pub fn combine(ctx: &PathContext, a: &EstimatorSummary, b: &EstimatorSummary) -> Result<BasisRiskResult> {
    let pr = &ctx.params;
    let scale = pr.eta * pr.eta * (1.0 - pr.rho * pr.rho) * ctx.merton.u1_over_u2;
    let (da, sa) = (scale * a.mean, scale.abs() * a.stderr);
    let (db, sb) = (scale * b.mean, scale.abs() * b.stderr);
    let combined = (sa * sa + sb * sb).sqrt();
    let z_score = if combined > 0.0 {
        (da - db).abs() / combined
    } else if da == db {
        0.0
    } else {
        f64::INFINITY
    };
    if z_score > 3.0 {
        return Err(invariant!("Monte Carlo estimators disagree: z = {z_score:.2}"));
    }
    let weight_z_score = if a.weight_stderr > 0.0 { (a.weight_mean - 1.0) / a.weight_stderr } else { 0.0 };
    Ok(BasisRiskResult {
        kappa: pr.kappa(),
        price: ctx.pricer.price(pr.q0, 0.0),
        merton: ctx.merton,
        d: db,
        stderr: sb,
        d_likelihood_ratio: da,
        stderr_likelihood_ratio: sa,
        d_measure_shift: db,
        stderr_measure_shift: sb,
        z_score,
        weight_z_score,
        constant_payoff: matches!(pr.payoff, Payoff::Constant { .. }),
    })
}

/// Sequential Monte Carlo evaluation of `D` with both estimators.
pub fn simulate_d(params: &BasisRiskParams) -> Result<BasisRiskResult> {
    let ctx = PathContext::new(params)?;
    let n = ctx.n_samples();
    let run = |est| (0..n).map(|i| ctx.sample(est, i)).collect::<Vec<_>>();
    let a = summarize(&run(Estimator::LikelihoodRatio));
    let b = summarize(&run(Estimator::MeasureShift));
    combine(&ctx, &a, &b)
}

/// Recombination-free lattice for `(S, Q)`: each step has four equally
/// likely joint moves `(a, b) ∈ {(1, ρ ± c), (−1, −ρ ± c)}`, `c = √(1−ρ²)`,
/// which match the means, variances and covariance of the Gaussian
/// log-increments. Only `S` is traded; leaves carry `h(Q_T)`.
pub fn two_factor_tree(params: &BasisRiskParams, steps: usize) -> Result<TreeModel> {
    params.validate()?;
    if steps == 0 || 4usize.pow(steps as u32) > crate::market::MAX_TREE_LEAVES {
        return Err(invalid!("two-factor tree with {steps} steps exceeds the leaf cap"));
    }
    let dt = params.maturity / steps as f64;
    let c = (1.0 - params.rho * params.rho).sqrt();
    let moves = [(1.0, params.rho + c), (1.0, params.rho - c), (-1.0, -params.rho + c), (-1.0, -params.rho - c)];
    let ds = (params.mu - 0.5 * params.sigma * params.sigma) * dt;
    let dq = (params.nu - 0.5 * params.eta * params.eta) * dt;
    let vs = params.sigma * dt.sqrt();
    let vq = params.eta * dt.sqrt();
    fn build(
        s: f64,
        q: f64,
        left: usize,
        prob: f64,
        p: &BasisRiskParams,
        moves: &[(f64, f64); 4],
        step: (f64, f64, f64, f64),
    ) -> TreeNode {
        if left == 0 {
            return TreeNode::leaf(vec![s], prob, vec![p.payoff.eval(q)]);
        }
        let (ds, dq, vs, vq) = step;
        let children = moves
            .iter()
            .map(|(a, b)| build(s * (ds + vs * a).exp(), q * (dq + vq * b).exp(), left - 1, 0.25, p, moves, step))
            .collect();
        TreeNode { price: vec![s], prob, claims: Vec::new(), children }
    }
    TreeModel::new(build(params.s0, params.q0, steps, 1.0, params, &moves, (ds, dq, vs, vq)))
}

/// One row of the tree cross-check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrosscheckRow {
    pub steps: usize,
    pub p_prime: f64,
    pub d_tree: f64,
    pub price_tree: f64,
}

/// Runs the generic pipeline on the reduced two-factor tree.
pub fn crosscheck_tree(params: &BasisRiskParams, steps: usize) -> Result<CrosscheckRow> {
    let tree = two_factor_tree(params, steps)?;
    let market = crate::market::reduce_tree(&tree)?;
    let u = params.utility()?;
    let a = analyze(&market, &u, params.x, Assumption1Mode::Warn)?;
    Ok(CrosscheckRow { steps, p_prime: a.report.p_prime[0], d_tree: a.report.d[(0, 0)], price_tree: a.report.p[0] })
}

/// Merton closed form against a binomial tree solved by the generic solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MertonTreeCheck {
    pub pi_tree: f64,
    pub pi_closed: f64,
    pub value_tree: f64,
    pub value_closed: f64,
}

/// `steps`-period binomial tree with `u/d = exp((μ − σ²/2)dt ± σ√dt)`.
pub fn merton_tree_check(params: &BasisRiskParams, steps: usize) -> Result<MertonTreeCheck> {
    let m = merton_power(params)?;
    let dt = params.maturity / steps as f64;
    let drift = (params.mu - 0.5 * params.sigma * params.sigma) * dt;
    let vol = params.sigma * dt.sqrt();
    fn build(s: f64, left: usize, prob: f64, up: f64, dn: f64) -> TreeNode {
        if left == 0 {
            return TreeNode::leaf(vec![s], prob, Vec::new());
        }
        TreeNode {
            price: vec![s],
            prob,
            claims: Vec::new(),
            children: vec![build(s * up, left - 1, 0.5, up, dn), build(s * dn, left - 1, 0.5, up, dn)],
        }
    }
    let tree = TreeModel::new(build(params.s0, steps, 1.0, (drift + vol).exp(), (drift - vol).exp()))?;
    let market = crate::market::reduce_tree(&tree)?;
    let u = params.utility()?;
    let sol = crate::solver::solve_primal(&crate::solver::PrimalProblem::at_zero(&market, &u, params.x))?;
    Ok(MertonTreeCheck {
        // Root holdings are the first column of the reduced market.
        pi_tree: sol.h[0] * params.s0 / params.x,
        pi_closed: m.pi_star,
        value_tree: sol.u_value,
        value_closed: m.value,
    })
}
