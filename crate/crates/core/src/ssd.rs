//! Second-order stochastic dominance between discrete distributions and a
//! search for the SSD-greatest martingale density.
//!
//! `f ⪰₂ g` when `E[min(f, t)] ≥ E[min(g, t)]` for every `t ≥ 0`; for
//! nonnegative variables `E[min(f, t)] = ∫₀ᵗ P(f ≥ s) ds`. Equivalently
//! `E[φ(f)] ≤ E[φ(g)]` for every convex decreasing `φ`.

use alloc::vec;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use rand_distr::{Distribution, Exp1, StandardUniform};

use crate::error::{invalid, invariant, Result};
use crate::linalg;
use crate::market::{emm_vertices, FiniteMarket, DEFAULT_VERTEX_CAP};
#[allow(unused_imports)]
use num_traits::Float;

/// Number of convex decreasing test functions in the cross-validation battery.
pub const BATTERY_SIZE: usize = 50;
/// Interior polytope points sampled by [`ssd_greatest`].
pub const INTERIOR_SAMPLES: usize = 100;

/// A finitely supported distribution on `[0, ∞)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Discrete {
    pub values: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Discrete {
    pub fn new(values: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if values.len() != weights.len() || values.is_empty() {
            return Err(invalid!("a distribution needs equally many atoms and weights"));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(invalid!("atoms must be finite and nonnegative"));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(invalid!("weights must be nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(invalid!("weights sum to {total}, expected 1"));
        }
        Ok(Discrete { values, weights })
    }

    pub fn point(v: f64) -> Result<Self> {
        Discrete::new(vec![v], vec![1.0])
    }

    /// `E[min(X, t)]`.
    pub fn integrated_survival(&self, t: f64) -> f64 {
        self.values.iter().zip(&self.weights).map(|(v, w)| w * v.min(t)).sum()
    }

    /// `E[(s − X)⁺]`.
    pub fn expected_shortfall(&self, s: f64) -> f64 {
        self.values.iter().zip(&self.weights).map(|(v, w)| w * (s - v).max(0.0)).sum()
    }

    fn max_atom(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SsdRelation {
    FirstDominates,
    SecondDominates,
    Equal,
    Incomparable,
}

impl SsdRelation {
    pub fn name(self) -> &'static str {
        match self {
            SsdRelation::FirstDominates => "first_dominates",
            SsdRelation::SecondDominates => "second_dominates",
            SsdRelation::Equal => "equal",
            SsdRelation::Incomparable => "incomparable",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SsdVerdict {
    pub relation: SsdRelation,
    /// Threshold where the integrated survival functions cross.
    pub witness: Option<f64>,
    /// Breakpoints where the first (resp. second) integrated survival is strictly larger.
    pub first_ahead_at: Option<f64>,
    pub second_ahead_at: Option<f64>,
    /// Number of battery functions evaluated.
    pub battery_checked: usize,
}

fn tolerance(a: &Discrete, b: &Discrete) -> f64 {
    1e-12 * (1.0 + a.max_atom().max(b.max_atom()))
}

/// Exact comparison at the merged breakpoints; both integrated survival
/// functions are linear between consecutive atoms and constant beyond the
/// largest one, so these points decide the order.
pub fn ssd_compare_exact(a: &Discrete, b: &Discrete) -> SsdVerdict {
    let tol = tolerance(a, b);
    let mut pts: Vec<f64> = a.values.iter().chain(&b.values).cloned().collect();
    pts.sort_by(|x, y| x.partial_cmp(y).expect("finite atoms"));
    pts.dedup();
    let diffs: Vec<f64> = pts.iter().map(|t| a.integrated_survival(*t) - b.integrated_survival(*t)).collect();
    let first_ahead_at = pts.iter().zip(&diffs).find(|(_, d)| **d > tol).map(|(t, _)| *t);
    let second_ahead_at = pts.iter().zip(&diffs).find(|(_, d)| **d < -tol).map(|(t, _)| *t);
    let relation = match (first_ahead_at, second_ahead_at) {
        (None, None) => SsdRelation::Equal,
        (Some(_), None) => SsdRelation::FirstDominates,
        (None, Some(_)) => SsdRelation::SecondDominates,
        (Some(_), Some(_)) => SsdRelation::Incomparable,
    };
    let witness = (relation == SsdRelation::Incomparable).then(|| {
        // First sign change between consecutive significant breakpoints.
        let mut prev: Option<(f64, f64)> = None;
        for (t, d) in pts.iter().zip(&diffs) {
            if d.abs() <= tol {
                continue;
            }
            if let Some((pt, pd)) = prev {
                if pd.signum() != d.signum() {
                    return pt + (t - pt) * pd / (pd - d);
                }
            }
            prev = Some((*t, *d));
        }
        f64::NAN
    });
    SsdVerdict { relation, witness, first_ahead_at, second_ahead_at, battery_checked: 0 }
}

/// Compares two distributions and cross-checks the verdict against a
/// battery of convex decreasing piecewise-linear functions
/// `φ(v) = Σ wⱼ (sⱼ − v)⁺`. Disagreement is an invariant violation.
pub fn ssd_compare(a: &Discrete, b: &Discrete) -> Result<SsdVerdict> {
    let mut verdict = ssd_compare_exact(a, b);
    let tol = tolerance(a, b);
    let mut pts: Vec<f64> = a.values.iter().chain(&b.values).cloned().collect();
    pts.sort_by(|x, y| x.partial_cmp(y).expect("finite atoms"));
    pts.dedup();
    let top = pts[pts.len() - 1].max(1e-12);
    // Deterministic seed derived from the inputs keeps results reproducible.
    let seed = a.values.iter().chain(&b.values).fold(0u64, |h, v| h.rotate_left(7) ^ v.to_bits());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut first_better, mut second_better) = (false, false);
    // E[φ(a)] − E[φ(b)]: negative values favour the first distribution.
    let mut check = |kinks: &[(f64, f64)]| {
        let da: f64 = kinks.iter().map(|(s, w)| w * a.expected_shortfall(*s)).sum();
        let db: f64 = kinks.iter().map(|(s, w)| w * b.expected_shortfall(*s)).sum();
        if da - db < -tol {
            first_better = true;
        }
        if da - db > tol {
            second_better = true;
        }
    };
    let stride = (pts.len() as f64 / BATTERY_SIZE as f64).max(1.0);
    let n_kinks = pts.len().min(BATTERY_SIZE);
    for i in 0..n_kinks {
        check(&[(pts[(i as f64 * stride) as usize], 1.0)]);
    }
    for _ in n_kinks..BATTERY_SIZE {
        let u: f64 = StandardUniform.sample(&mut rng);
        let n = 1 + (u * 4.0) as usize;
        let mut kinks: Vec<(f64, f64)> = (0..n)
            .map(|_| {
                let u: f64 = StandardUniform.sample(&mut rng);
                let w: f64 = Exp1.sample(&mut rng);
                (1.1 * top * u, w)
            })
            .collect();
        let total: f64 = kinks.iter().map(|k| k.1).sum();
        kinks.iter_mut().for_each(|k| k.1 /= total);
        check(&kinks);
    }
    verdict.battery_checked = BATTERY_SIZE;
    let agrees = match verdict.relation {
        SsdRelation::Equal => !first_better && !second_better,
        SsdRelation::FirstDominates => !second_better,
        SsdRelation::SecondDominates => !first_better,
        SsdRelation::Incomparable => first_better && second_better,
    };
    if !agrees {
        return Err(invariant!("SSD verdict {} contradicts the test-function battery", verdict.relation.name()));
    }
    Ok(verdict)
}

/// Distribution of a density `z` under the market probabilities.
pub fn density_distribution(market: &FiniteMarket, z: &[f64]) -> Result<Discrete> {
    let total: f64 = market.probs().iter().sum();
    let z: Vec<f64> = z.iter().map(|v| v.max(0.0)).collect();
    Discrete::new(z, market.probs().iter().map(|p| p / total).collect())
}

#[derive(Debug, Clone)]
pub struct SsdGreatestReport {
    pub found: bool,
    /// Maximizer of `E[√z]` over the EMM polytope.
    pub candidate: Vec<f64>,
    /// Polytope points the candidate does not dominate.
    pub failures: Vec<Vec<f64>>,
    pub vertices_checked: usize,
    pub samples_checked: usize,
    /// Describes the scope of the check (vertices plus samples, not the continuum).
    pub scope: &'static str,
}

/// Maximizes `Σ p √z` over `{z ≥ 0, Σ p z = 1, Σ p z gⱼ = 0}` by a
/// log-barrier Newton method started from the market's certificate.
pub fn sqrt_maximizer(market: &FiniteMarket) -> Result<Vec<f64>> {
    let k = market.n_states();
    let j = market.n_assets();
    let probs = market.probs();
    let aeq = DMatrix::from_fn(1 + j, k, |r, s| if r == 0 { probs[s] } else { probs[s] * market.gains()[(s, r - 1)] });
    let mut z = DVector::from_column_slice(market.certificate());
    let objective =
        |z: &DVector<f64>, mu: f64| -> f64 { z.iter().zip(probs).map(|(v, p)| -p * v.sqrt() - mu * v.ln()).sum() };
    let mut mu = 1e-2;
    while mu > 1e-15 {
        for _ in 0..100 {
            let grad = DVector::from_fn(k, |s, _| -0.5 * probs[s] / z[s].sqrt() - mu / z[s]);
            let hdiag = DVector::from_fn(k, |s, _| 0.25 * probs[s] / (z[s] * z[s].sqrt()) + mu / (z[s] * z[s]));
            let hinv = hdiag.map(|h| 1.0 / h);
            let scaled = DMatrix::from_fn(1 + j, k, |r, s| aeq[(r, s)] * hinv[s]);
            let schur = &scaled * aeq.transpose();
            let rhs = -(&scaled * &grad);
            let nu = linalg::solve_psd_vec(&schur, &rhs);
            let dz = DVector::from_fn(k, |s, _| -hinv[s] * (grad[s] + (aeq.transpose() * &nu)[s]));
            let decrement = dz.iter().zip(hdiag.iter()).map(|(d, h)| d * d * h).sum::<f64>();
            if decrement < 1e-24 {
                break;
            }
            let mut alpha: f64 = 1.0;
            for s in 0..k {
                if dz[s] < 0.0 {
                    alpha = alpha.min(0.99 * z[s] / -dz[s]);
                }
            }
            let f0 = objective(&z, mu);
            let slope = grad.dot(&dz);
            while alpha > 1e-16 {
                let trial = &z + &dz * alpha;
                if objective(&trial, mu) <= f0 + 1e-4 * alpha * slope
                    || alpha * linalg::max_abs_slice(dz.as_slice()) < 1e-15
                {
                    break;
                }
                alpha *= 0.5;
            }
            z += &dz * alpha;
        }
        mu *= 0.1;
    }
    // Restore the equalities exactly (Newton steps keep them only up to roundoff).
    let defect = &aeq * &z - DVector::from_fn(1 + j, |r, _| if r == 0 { 1.0 } else { 0.0 });
    let corr = aeq.transpose() * linalg::solve_psd_vec(&(&aeq * aeq.transpose()), &defect);
    z -= corr;
    Ok(z.iter().cloned().collect())
}

/// Looks for an SSD-greatest element of the EMM polytope.
///
/// The candidate maximizes `E[√z]`; it is compared against every vertex and
/// against [`INTERIOR_SAMPLES`] random convex combinations of vertices.
/// Dominance over vertices and samples does not imply dominance over the
/// whole polytope, so a positive verdict is a strong heuristic, not a proof.
pub fn ssd_greatest(market: &FiniteMarket, seed: u64) -> Result<SsdGreatestReport> {
    let poly = emm_vertices(market, DEFAULT_VERTEX_CAP)?;
    let candidate = sqrt_maximizer(market)?;
    let cand = density_distribution(market, &candidate)?;
    let mut failures = Vec::new();
    let dominated = |z: &[f64]| -> Result<bool> {
        let other = density_distribution(market, z)?;
        let v = ssd_compare(&cand, &other)?;
        Ok(matches!(v.relation, SsdRelation::FirstDominates | SsdRelation::Equal))
    };
    for v in &poly.vertices {
        if !dominated(v)? {
            failures.push(v.clone());
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nv = poly.vertices.len();
    let k = market.n_states();
    let mut samples = 0;
    if nv > 1 {
        for _ in 0..INTERIOR_SAMPLES {
            let w: Vec<f64> = (0..nv).map(|_| Exp1.sample(&mut rng)).collect();
            let total: f64 = w.iter().sum();
            let mut z = vec![0.0; k];
            for (wi, v) in w.iter().zip(&poly.vertices) {
                for s in 0..k {
                    z[s] += wi / total * v[s];
                }
            }
            samples += 1;
            if !dominated(&z)? {
                failures.push(z);
            }
        }
    }
    Ok(SsdGreatestReport {
        found: failures.is_empty(),
        candidate,
        failures,
        vertices_checked: nv,
        samples_checked: samples,
        scope: "verified on vertices + sampled interior points",
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_distributions_are_equal() {
        let a = Discrete::new(vec![0.5, 2.0], vec![0.3, 0.7]).unwrap();
        assert_eq!(ssd_compare(&a, &a).unwrap().relation, SsdRelation::Equal);
    }

    #[test]
    fn mean_preserving_spread_is_dominated() {
        let a = Discrete::point(1.0).unwrap();
        let b = Discrete::new(vec![0.5, 1.5], vec![0.5, 0.5]).unwrap();
        assert_eq!(ssd_compare(&a, &b).unwrap().relation, SsdRelation::FirstDominates);
        assert_eq!(ssd_compare(&b, &a).unwrap().relation, SsdRelation::SecondDominates);
    }

    #[test]
    fn crossing_pair_is_incomparable() {
        // Safer low tail but lower mean: a = 1 for sure, b = {0.2, 3} equally likely.
        let a = Discrete::point(1.0).unwrap();
        let b = Discrete::new(vec![0.2, 3.0], vec![0.5, 0.5]).unwrap();
        let v = ssd_compare(&a, &b).unwrap();
        assert_eq!(v.relation, SsdRelation::Incomparable);
        let t = v.witness.unwrap();
        // Integrated survivals agree at the crossing.
        assert!((a.integrated_survival(t) - b.integrated_survival(t)).abs() < 1e-12);
    }

    #[test]
    fn rejects_negative_atoms() {
        assert!(Discrete::new(vec![-1.0], vec![1.0]).is_err());
    }

    #[test]
    fn complete_market_is_trivially_greatest() {
        let m = FiniteMarket::new(vec![0.5, 0.5], DMatrix::from_column_slice(2, 1, &[1.0, -0.5]), DMatrix::zeros(2, 0))
            .unwrap();
        let r = ssd_greatest(&m, 1).unwrap();
        assert!(r.found);
        assert_eq!(r.vertices_checked, 1);
    }

    #[test]
    fn trinomial_has_no_greatest_element() {
        // Two up moves of different size: the vertices' integrated survivals cross.
        let p = vec![0.45, 0.37, 0.18];
        let m =
            FiniteMarket::new(p, DMatrix::from_column_slice(3, 1, &[1.2, 0.75, -0.4]), DMatrix::zeros(3, 0)).unwrap();
        let poly = emm_vertices(&m, DEFAULT_VERTEX_CAP).unwrap();
        let a = density_distribution(&m, &poly.vertices[0]).unwrap();
        let b = density_distribution(&m, &poly.vertices[1]).unwrap();
        assert_eq!(ssd_compare(&a, &b).unwrap().relation, SsdRelation::Incomparable);
        let r = ssd_greatest(&m, 7).unwrap();
        assert!(!r.found);
    }

    #[test]
    fn sqrt_maximizer_is_feasible_and_optimal_on_vertices() {
        let p = vec![0.3, 0.4, 0.3];
        let m = FiniteMarket::new(p.clone(), DMatrix::from_column_slice(3, 1, &[1.0, 0.0, -0.5]), DMatrix::zeros(3, 0))
            .unwrap();
        let z = sqrt_maximizer(&m).unwrap();
        assert!(m.emm_defect(&z) < 1e-12);
        let obj = |z: &[f64]| z.iter().zip(&p).map(|(v, p)| p * v.max(0.0).sqrt()).sum::<f64>();
        for v in emm_vertices(&m, DEFAULT_VERTEX_CAP).unwrap().vertices {
            assert!(obj(&z) >= obj(&v));
        }
        // One-parameter family z = v₀ + s(v₁ − v₀): grid search oracle.
        let poly = emm_vertices(&m, DEFAULT_VERTEX_CAP).unwrap();
        let best = (0..=100000)
            .map(|i| {
                let s = i as f64 / 100000.0;
                let zz: Vec<f64> = (0..3).map(|k| (1.0 - s) * poly.vertices[0][k] + s * poly.vertices[1][k]).collect();
                obj(&zz)
            })
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((obj(&z) - best).abs() < 1e-9);
    }
}
