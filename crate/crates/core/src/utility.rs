//! Utility families with exact derivatives, convex conjugates and the
//! risk-aversion / risk-tolerance functionals.

use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{invalid, Error, Result};

/// Supported utilities.
///
/// `Power { p }` is `x^p / p` with `p < 1, p ≠ 0`; `Log` is `ln x`;
/// `Exponential { gamma }` is `−e^{−γx}/γ` on the whole line; `Mixture` is
/// `Σ wᵢ x^{pᵢ}/pᵢ`.
#[derive(Debug, Clone, PartialEq)]
pub enum Utility {
    Power { p: f64 },
    Log,
    Exponential { gamma: f64 },
    Mixture { weights: Vec<f64>, exponents: Vec<f64> },
}

/// `U, U', U''` at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Derivs {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

/// Number of log-spaced points in the diagnostic grid.
pub const GRID_POINTS: usize = 64;

impl Utility {
    pub fn power(p: f64) -> Result<Self> {
        Utility::Power { p }.validated()
    }

    pub fn exponential(gamma: f64) -> Result<Self> {
        Utility::Exponential { gamma }.validated()
    }

    pub fn mixture(weights: Vec<f64>, exponents: Vec<f64>) -> Result<Self> {
        Utility::Mixture { weights, exponents }.validated()
    }

    /// Checks parameter ranges and returns `self`.
    pub fn validated(self) -> Result<Self> {
        match &self {
            Utility::Power { p } => {
                if !(p.is_finite() && *p < 1.0 && *p != 0.0) {
                    return Err(invalid!("power exponent must satisfy p < 1, p ≠ 0 (got {p})"));
                }
            }
            Utility::Log => {}
            Utility::Exponential { gamma } => {
                if !(gamma.is_finite() && *gamma > 0.0) {
                    return Err(invalid!("exponential utility needs gamma > 0 (got {gamma})"));
                }
            }
            Utility::Mixture { weights, exponents } => {
                if weights.is_empty() || weights.len() != exponents.len() {
                    return Err(invalid!("mixture needs equally many weights and exponents"));
                }
                if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
                    return Err(invalid!("mixture weights must be positive"));
                }
                if exponents.iter().any(|p| !(p.is_finite() && *p < 1.0 && *p != 0.0)) {
                    return Err(invalid!("mixture exponents must satisfy p < 1, p ≠ 0"));
                }
            }
        }
        Ok(self)
    }

    /// Short family name.
    pub fn family(&self) -> &'static str {
        match self {
            Utility::Power { .. } => "power",
            Utility::Log => "log",
            Utility::Exponential { .. } => "exp",
            Utility::Mixture { .. } => "mixture",
        }
    }

    /// Lower end of the domain: `−∞` for exponential, `0` otherwise.
    pub fn domain_lower(&self) -> f64 {
        match self {
            Utility::Exponential { .. } => f64::NEG_INFINITY,
            _ => 0.0,
        }
    }

    /// Errors unless the domain is `(0, ∞)`.
    pub fn require_positive_domain(&self) -> Result<()> {
        if self.domain_lower() == 0.0 {
            Ok(())
        } else {
            Err(invalid!("{} utility is defined on the whole line; a utility on (0, ∞) is required", self.family()))
        }
    }

    fn check_arg(&self, x: f64) -> Result<()> {
        if !x.is_finite() || x <= self.domain_lower() {
            return Err(invalid!("argument {x} outside the domain of {} utility", self.family()));
        }
        Ok(())
    }

    /// `U, U', U''` without a domain check; `x` must be in the domain.
    pub fn eval_unchecked(&self, x: f64) -> Derivs {
        match self {
            Utility::Power { p } => {
                let xp = x.powf(*p);
                Derivs { value: xp / p, d1: xp / x, d2: (p - 1.0) * xp / (x * x) }
            }
            Utility::Log => Derivs { value: x.ln(), d1: 1.0 / x, d2: -1.0 / (x * x) },
            Utility::Exponential { gamma } => {
                let e = (-gamma * x).exp();
                Derivs { value: -e / gamma, d1: e, d2: -gamma * e }
            }
            Utility::Mixture { weights, exponents } => {
                let mut d = Derivs { value: 0.0, d1: 0.0, d2: 0.0 };
                for (w, p) in weights.iter().zip(exponents) {
                    let xp = x.powf(*p);
                    d.value += w * xp / p;
                    d.d1 += w * xp / x;
                    d.d2 += w * (p - 1.0) * xp / (x * x);
                }
                d
            }
        }
    }

    pub fn eval(&self, x: f64) -> Result<Derivs> {
        self.check_arg(x)?;
        Ok(self.eval_unchecked(x))
    }

    pub fn u(&self, x: f64) -> f64 {
        self.eval_unchecked(x).value
    }
    pub fn u1(&self, x: f64) -> f64 {
        self.eval_unchecked(x).d1
    }
    pub fn u2(&self, x: f64) -> f64 {
        self.eval_unchecked(x).d2
    }

    /// Relative risk aversion `A(x) = −x U''(x)/U'(x)`.
    pub fn risk_aversion(&self, x: f64) -> f64 {
        match self {
            Utility::Power { p } => 1.0 - p,
            Utility::Log => 1.0,
            _ => {
                let d = self.eval_unchecked(x);
                -x * d.d2 / d.d1
            }
        }
    }

    /// Absolute risk tolerance `t(x) = −U'(x)/U''(x)`.
    pub fn risk_tolerance(&self, x: f64) -> f64 {
        match self {
            Utility::Power { p } => x / (1.0 - p),
            Utility::Log => x,
            Utility::Exponential { gamma } => 1.0 / gamma,
            Utility::Mixture { .. } => {
                let d = self.eval_unchecked(x);
                -d.d1 / d.d2
            }
        }
    }

    /// Inverse marginal utility `I = (U')⁻¹`.
    pub fn inverse_marginal(&self, y: f64) -> Result<f64> {
        if !(y.is_finite() && y > 0.0) {
            return Err(invalid!("marginal utility level must be positive (got {y})"));
        }
        Ok(match self {
            Utility::Power { p } => y.powf(1.0 / (p - 1.0)),
            Utility::Log => 1.0 / y,
            Utility::Exponential { gamma } => -y.ln() / gamma,
            Utility::Mixture { .. } => self.invert_mixture(y)?,
        })
    }

    /// Solves `ln U'(eˢ) = ln y` by bracketed Newton in `s = ln x`; the
    /// slope is `−A(x)`, bounded away from zero and infinity.
    fn invert_mixture(&self, y: f64) -> Result<f64> {
        let target = y.ln();
        let f = |s: f64| self.u1(s.exp()).ln() - target;
        let (c1, _) = self.risk_aversion_bounds().unwrap_or((1.0, 1.0));
        let mut s = 0.0;
        let f0 = f(s);
        // f is decreasing with slope in [−c2, −c1].
        let (mut lo, mut hi) = if f0 > 0.0 { (s, s + f0 / c1 + 1.0) } else { (s + f0 / c1 - 1.0, s) };
        while f(hi) > 0.0 {
            hi += (hi - lo).max(1.0);
        }
        while f(lo) < 0.0 {
            lo -= (hi - lo).max(1.0);
        }
        s = s.clamp(lo, hi);
        for _ in 0..200 {
            let fs = f(s);
            if fs == 0.0 {
                return Ok(s.exp());
            }
            if fs > 0.0 {
                lo = s;
            } else {
                hi = s;
            }
            let x = s.exp();
            let slope = -self.risk_aversion(x);
            let mut next = s - fs / slope;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - s).abs() <= 1e-15 * (1.0 + s.abs()) {
                return Ok(next.exp());
            }
            s = next;
            if (hi - lo) < 1e-15 * (1.0 + s.abs()) {
                return Ok(s.exp());
            }
        }
        Err(Error::NonConvergence { iterations: 200, residual: f(s).abs() })
    }

    /// Conjugate `V(y) = sup_x [U(x) − xy]` with `V'` and `V''`.
    pub fn conjugate(&self, y: f64) -> Result<Derivs> {
        let x = self.inverse_marginal(y)?;
        let d = self.eval_unchecked(x);
        Ok(Derivs { value: d.value - y * x, d1: -x, d2: -1.0 / d.d2 })
    }

    /// `B(y) = −y V''(y)/V'(y)`, which equals `1/A(I(y))`.
    pub fn conjugate_risk_tolerance(&self, y: f64) -> Result<f64> {
        let v = self.conjugate(y)?;
        Ok(-y * v.d2 / v.d1)
    }

    /// `|B(U'(x)) − 1/A(x)|`.
    pub fn duality_check(&self, x: f64) -> Result<f64> {
        self.check_arg(x)?;
        let b = self.conjugate_risk_tolerance(self.u1(x))?;
        Ok((b - 1.0 / self.risk_aversion(x)).abs())
    }

    /// Constants `0 < c₁ ≤ A(x) ≤ c₂` on `(0, ∞)`; `None` for exponential.
    pub fn risk_aversion_bounds(&self) -> Option<(f64, f64)> {
        match self {
            Utility::Power { p } => Some((1.0 - p, 1.0 - p)),
            Utility::Log => Some((1.0, 1.0)),
            Utility::Exponential { .. } => None,
            Utility::Mixture { exponents, .. } => {
                let lo = exponents.iter().map(|p| 1.0 - p).fold(f64::INFINITY, f64::min);
                let hi = exponents.iter().map(|p| 1.0 - p).fold(f64::NEG_INFINITY, f64::max);
                Some((lo, hi))
            }
        }
    }

    /// Returns `(c, d)` with `t(x) = c x + d` when the risk tolerance is
    /// affine; `None` otherwise.
    pub fn classify_linear_risk_tolerance(&self) -> Option<(f64, f64)> {
        match self {
            Utility::Power { p } => Some((1.0 / (1.0 - p), 0.0)),
            Utility::Log => Some((1.0, 0.0)),
            Utility::Exponential { gamma } => Some((0.0, 1.0 / gamma)),
            Utility::Mixture { exponents, .. } => {
                let first = exponents[0];
                if exponents.iter().all(|p| *p == first) {
                    return Some((1.0 / (1.0 - first), 0.0));
                }
                let xs = log_grid(1.0);
                let ts: Vec<f64> = xs.iter().map(|x| self.risk_tolerance(*x)).collect();
                let (c, d) = affine_fit(&xs, &ts);
                let scale = ts.iter().fold(0.0f64, |a, t| a.max(t.abs()));
                let dev = xs.iter().zip(&ts).map(|(x, t)| (t - (c * x + d)).abs()).fold(0.0, f64::max);
                (dev <= 1e-8 * scale).then_some((c, d))
            }
        }
    }

    /// Grid diagnostics on the standard log grid scaled by `scale`.
    pub fn check_invariants(&self, scale: f64) -> Result<InvariantReport> {
        let xs = log_grid(scale);
        let mut rep = InvariantReport::default();
        let mut prev: Option<Derivs> = None;
        for &x in &xs {
            let d = self.eval_unchecked(x);
            if !(d.d1 > 0.0 && d.d2 < 0.0) {
                rep.monotone_concave = false;
            }
            if let Some(p) = prev {
                if !(d.value > p.value && d.d1 < p.d1) {
                    rep.monotone_concave = false;
                }
            }
            prev = Some(d);
            let y = d.d1;
            let v = self.conjugate(y)?;
            rep.conjugacy_residual =
                rep.conjugacy_residual.max(((v.value + x * y) - d.value).abs() / (1.0 + d.value.abs()));
            let b = -y * v.d2 / v.d1;
            rep.duality_residual = rep.duality_residual.max((self.risk_aversion(x) * b - 1.0).abs());
            if let Some((c1, c2)) = self.risk_aversion_bounds() {
                let a = self.risk_aversion(x);
                if a < c1 * (1.0 - 1e-12) || a > c2 * (1.0 + 1e-12) {
                    rep.bounds_hold = false;
                }
            }
        }
        let lo = self.eval_unchecked(xs[0]).d1;
        let hi = self.eval_unchecked(xs[xs.len() - 1]).d1;
        rep.inada_ratio = hi / lo;
        Ok(rep)
    }
}

/// Output of [`Utility::check_invariants`].
#[derive(Debug, Clone, PartialEq)]
pub struct InvariantReport {
    pub monotone_concave: bool,
    pub conjugacy_residual: f64,
    pub duality_residual: f64,
    pub bounds_hold: bool,
    /// `U'(x_max)/U'(x_min)` on the grid; small values witness the Inada limits.
    pub inada_ratio: f64,
}

impl Default for InvariantReport {
    fn default() -> Self {
        InvariantReport {
            monotone_concave: true,
            conjugacy_residual: 0.0,
            duality_residual: 0.0,
            bounds_hold: true,
            inada_ratio: 0.0,
        }
    }
}

/// 64 log-spaced points on `[1e-4, 1e4]·scale`.
pub fn log_grid(scale: f64) -> Vec<f64> {
    (0..GRID_POINTS).map(|i| scale * 10f64.powf(-4.0 + 8.0 * i as f64 / (GRID_POINTS - 1) as f64)).collect()
}

fn affine_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let c = sxy / sxx;
    (c, my - c * mx)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mix() -> Utility {
        Utility::mixture(alloc::vec![0.5, 0.5], alloc::vec![0.5, -1.0]).unwrap()
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(Utility::power(1.0).is_err());
        assert!(Utility::power(0.0).is_err());
        assert!(Utility::exponential(-1.0).is_err());
        assert!(Utility::mixture(alloc::vec![1.0], alloc::vec![]).is_err());
        assert!(Utility::Log.eval(-1.0).is_err());
        assert!(Utility::exponential(1.0).unwrap().eval(-1.0).is_ok());
    }

    #[test]
    fn constant_relative_risk_aversion() {
        for x in [0.01, 1.0, 50.0] {
            assert_eq!(Utility::Log.risk_aversion(x), 1.0);
            assert!((Utility::power(-2.0).unwrap().risk_aversion(x) - 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn risk_tolerance_forms() {
        assert!((Utility::power(0.5).unwrap().risk_tolerance(3.0) - 6.0).abs() < 1e-15);
        assert_eq!(Utility::exponential(2.0).unwrap().risk_tolerance(-5.0), 0.5);
        let m = mix();
        let d = m.eval(1.0).unwrap();
        assert!((m.risk_tolerance(1.0) - 1.0 / m.risk_aversion(1.0)).abs() < 1e-10);
        assert!((m.risk_tolerance(1.0) + d.d1 / d.d2).abs() < 1e-15);
    }

    #[test]
    fn classification() {
        assert_eq!(Utility::Log.classify_linear_risk_tolerance(), Some((1.0, 0.0)));
        assert_eq!(Utility::exponential(2.0).unwrap().classify_linear_risk_tolerance(), Some((0.0, 0.5)));
        assert_eq!(Utility::power(0.5).unwrap().classify_linear_risk_tolerance(), Some((2.0, 0.0)));
        assert_eq!(mix().classify_linear_risk_tolerance(), None);
        // Three-point check: an affine t has equal divided differences.
        let m = mix();
        let (a, b, c) = (0.5, 1.0, 2.0);
        let s1 = (m.risk_tolerance(b) - m.risk_tolerance(a)) / (b - a);
        let s2 = (m.risk_tolerance(c) - m.risk_tolerance(b)) / (c - b);
        assert!((s1 - s2).abs() > 1e-3);
    }

    #[test]
    fn mixture_conjugate_matches_grid_maximization() {
        let m = mix();
        for y in [0.3, 1.0, 4.0] {
            let v = m.conjugate(y).unwrap();
            // Golden-section maximization of U(x) − xy in log x.
            let g = |s: f64| {
                let x = s.exp();
                m.u(x) - x * y
            };
            let (mut a, mut b) = (-10.0f64, 10.0f64);
            let r = 0.5 * (5f64.sqrt() - 1.0);
            for _ in 0..200 {
                let c = b - r * (b - a);
                let d = a + r * (b - a);
                if g(c) > g(d) {
                    b = d;
                } else {
                    a = c;
                }
            }
            let best = g(0.5 * (a + b));
            assert!((best - v.value).abs() < 1e-10, "y={y}: {best} vs {}", v.value);
            assert!((0.5 * (a + b)).exp() - (-v.d1) < 1e-6);
            for x in log_grid(1.0) {
                assert!(m.u(x) - x * y <= v.value + 1e-10);
            }
        }
    }

    #[test]
    fn inverse_marginal_round_trip() {
        let m = mix();
        for x in log_grid(1.0) {
            let back = m.inverse_marginal(m.u1(x)).unwrap();
            assert!((back / x - 1.0).abs() < 1e-13, "x={x} back={back}");
        }
    }

    #[test]
    fn grid_invariants_hold() {
        for u in [Utility::Log, Utility::power(0.5).unwrap(), Utility::power(-1.0).unwrap(), mix()] {
            let r = u.check_invariants(1.0).unwrap();
            assert!(r.monotone_concave);
            assert!(r.conjugacy_residual < 1e-10, "{r:?}");
            assert!(r.duality_residual < 1e-10, "{r:?}");
            assert!(r.bounds_hold);
            assert!(r.inada_ratio < 1e-3);
        }
    }
}
