//! Deterministic random finite markets for batteries and property tests.
//!
//! Probabilities are normalized `Exp(1) + 0.1` draws, gains are
//! `0.2·N(0,1) + 0.03`, claims are `U[0, 2]`. Gain draws are rejected until
//! the market is arbitrage-free with some martingale density bounded below
//! by [`MIN_DENSITY`]; claim draws are rejected until the claims are
//! non-replicable and jointly non-redundant.

use alloc::vec::Vec;
use nalgebra::DMatrix;
use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use rand_distr::{Distribution, Exp1, StandardNormal, StandardUniform};

use crate::error::{invalid, Error, Result};
use crate::market::{check_no_arbitrage, FiniteMarket, NoArbitrage};
use crate::sensitivity::check_assumption1;

/// Smallest acceptable entry of the interior martingale density.
pub const MIN_DENSITY: f64 = 0.05;
const MAX_ATTEMPTS: usize = 10_000;

/// Draws a market with `k` states, `j` traded assets and `m` claims.
pub fn random_market(seed: u64, k: usize, j: usize, m: usize) -> Result<FiniteMarket> {
    if k > 16 {
        return Err(invalid!("random markets are limited to 16 states (got {k})"));
    }
    if k < 2 || k < j + m + 2 {
        return Err(invalid!("need at least j + m + 2 states (got k = {k}, j = {j}, m = {m})"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<f64> = (0..k)
        .map(|_| {
            let e: f64 = Exp1.sample(&mut rng);
            e + 0.1
        })
        .collect();
    let total: f64 = raw.iter().sum();
    let probs: Vec<f64> = raw.iter().map(|v| v / total).collect();

    let mut gains = None;
    for _ in 0..MAX_ATTEMPTS {
        let g = DMatrix::from_fn(k, j, |_, _| {
            let n: f64 = StandardNormal.sample(&mut rng);
            0.2 * n + 0.03
        });
        if let NoArbitrage::Free { min_slack, .. } = check_no_arbitrage(&probs, &g)? {
            if min_slack >= MIN_DENSITY {
                gains = Some(g);
                break;
            }
        }
    }
    let gains = gains.ok_or_else(|| Error::Infeasible("no admissible gains drawn".into()))?;
    let base = FiniteMarket::new(probs, gains, DMatrix::zeros(k, 0))?;
    if m == 0 {
        return Ok(base);
    }
    for _ in 0..MAX_ATTEMPTS {
        let f = DMatrix::from_fn(k, m, |_, _| {
            let u: f64 = StandardUniform.sample(&mut rng);
            2.0 * u
        });
        let candidate = base.with_claims(f)?;
        if check_assumption1(&candidate)?.is_none() {
            return Ok(candidate);
        }
    }
    Err(Error::Infeasible("no admissible claims drawn".into()))
}

/// Dimensions of battery instance `index`: `K ∈ 5..=10`, `J ∈ 1..=3`,
/// `m ∈ 1..=2`, with `K ≥ J + m + 2`.
pub fn battery_dims(seed: u64, index: u64) -> (usize, usize, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let mut pick = |lo: usize, hi: usize| {
        let u: f64 = StandardUniform.sample(&mut rng);
        lo + ((u * (hi - lo + 1) as f64) as usize).min(hi - lo)
    };
    let j = pick(1, 3);
    let m = pick(1, 2);
    let k = pick((j + m + 2).max(5), 10);
    (k, j, m)
}

/// Battery instance `index`: dimensions from [`battery_dims`] and a market
/// seeded by `(seed, index)`.
pub fn battery_instance(seed: u64, index: u64) -> Result<FiniteMarket> {
    let (k, j, m) = battery_dims(seed, index);
    random_market(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(index), k, j, m)
}
