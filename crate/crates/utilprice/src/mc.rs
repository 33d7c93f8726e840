//! Parallel Monte Carlo driver for the basis-risk sensitivity.
//!
//! Samples are keyed by `(seed, estimator, path index)` and collected in
//! index order before a sequential pairwise reduction, so results do not
//! depend on the number of worker threads.

use rayon::prelude::*;
use utilprice_core::basis_risk::{combine, summarize, BasisRiskParams, BasisRiskResult, Estimator, PathContext};

use crate::error::{CliError, CliResult};

pub fn simulate_d_parallel(params: &BasisRiskParams, threads: Option<usize>) -> CliResult<BasisRiskResult> {
    let ctx = PathContext::new(params)?;
    let n = ctx.n_samples();
    let job = || -> CliResult<BasisRiskResult> {
        let run = |est| (0..n).into_par_iter().map(|i| ctx.sample(est, i)).collect::<Vec<_>>();
        let a = summarize(&run(Estimator::LikelihoodRatio));
        let b = summarize(&run(Estimator::MeasureShift));
        Ok(combine(&ctx, &a, &b)?)
    };
    match threads {
        None => job(),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| CliError::Usage(format!("cannot start {t} worker threads: {e}")))?
            .install(job),
    }
}
