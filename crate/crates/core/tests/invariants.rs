//! Property tests over random markets.

use proptest::prelude::*;
use utilprice_core::market::{check_no_arbitrage, is_replicable};
use utilprice_core::random::{battery_dims, battery_instance, random_market};
use utilprice_core::risk_tolerance::rt_exists;
use utilprice_core::sensitivity::{analyze, Assumption1Mode};
use utilprice_core::solver::{solve_primal, PrimalProblem};
use utilprice_core::ssd::{ssd_compare, Discrete, SsdRelation};
use utilprice_core::Utility;

fn utility(which: u8) -> Utility {
    match which % 4 {
        0 => Utility::power(0.5).unwrap(),
        1 => Utility::power(-1.0).unwrap(),
        2 => Utility::Log,
        _ => Utility::mixture(vec![0.5, 0.5], vec![0.5, -1.0]).unwrap(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn random_markets_are_well_formed(seed in any::<u64>(), index in 0u64..1000) {
        let (k, j, m) = battery_dims(seed, index);
        prop_assert!((5..=10).contains(&k) && (1..=3).contains(&j) && (1..=2).contains(&m));
        prop_assert!(k >= j + m + 2);
        let market = battery_instance(seed, index).unwrap();
        prop_assert_eq!((market.n_states(), market.n_assets(), market.n_claims()), (k, j, m));
        let total: f64 = market.probs().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        prop_assert!(check_no_arbitrage(market.probs(), market.gains()).unwrap().is_free());
        prop_assert!(market.emm_defect(market.certificate()) < 1e-10);
    }

    #[test]
    fn second_order_structure_is_consistent(seed in any::<u64>(), which in 0u8..4) {
        let market = battery_instance(seed, 0).unwrap();
        let u = utility(which);
        let a = analyze(&market, &u, 1.0, Assumption1Mode::Strict).unwrap();
        let d = &a.report.diagnostics;
        prop_assert!(d.inverse_residual.unwrap() < 1e-8);
        prop_assert!(d.g_symmetry_defect < 1e-10);
        // The value function is strictly concave in (x, q).
        prop_assert!(d.g_eigenvalues.iter().all(|l| *l < 0.0));
        prop_assert!(a.solution.foc_residual < 1e-9);
        // Prices are expectations under a martingale density.
        prop_assert!(market.emm_defect(&a.solution.z) < 1e-10);
    }

    #[test]
    fn power_utility_is_homothetic(seed in any::<u64>(), scale in 0.2f64..5.0) {
        let market = battery_instance(seed, 1).unwrap();
        let u = Utility::power(-1.0).unwrap();
        let q = vec![0.0; market.n_claims()];
        let one = solve_primal(&PrimalProblem::new(&market, &u, 1.0, q.clone())).unwrap();
        let big = solve_primal(&PrimalProblem::new(&market, &u, scale, q)).unwrap();
        for (a, b) in one.h.iter().zip(&big.h) {
            prop_assert!((a * scale - b).abs() < 1e-9 * (1.0 + b.abs()));
        }
        for (a, b) in one.prices(&market).iter().zip(&big.prices(&market)) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn risk_tolerance_exists_for_hara(seed in any::<u64>(), which in 0u8..3) {
        let market = battery_instance(seed, 2).unwrap();
        let rep = rt_exists(&market, &utility(which), 1.0).unwrap();
        prop_assert!(rep.exists);
        prop_assert!(rep.r0_residual.unwrap() < 1e-8);
    }

    #[test]
    fn hedgeable_claims_are_replicable(seed in any::<u64>(), c0 in -1.0f64..1.0, beta in -2.0f64..2.0) {
        let market = random_market(seed, 6, 2, 0).unwrap();
        let claim: Vec<f64> = market.gain_column(1).iter().map(|g| c0 + beta * g).collect();
        let rep = is_replicable(&claim, &market).unwrap();
        prop_assert!(rep.replicable);
        prop_assert_eq!(rep.vertex_verdict, Some(true));
        prop_assert!((rep.cost.unwrap() - c0).abs() < 1e-10);
    }

    #[test]
    fn ssd_is_reflexive_and_detects_shifts(
        values in prop::collection::vec(0.01f64..10.0, 1..20),
        shift in 0.01f64..1.0,
    ) {
        let n = values.len();
        let a = Discrete::new(values.clone(), vec![1.0 / n as f64; n]).unwrap();
        prop_assert_eq!(ssd_compare(&a, &a).unwrap().relation, SsdRelation::Equal);
        let b = Discrete::new(values.iter().map(|v| v + shift).collect(), vec![1.0 / n as f64; n]).unwrap();
        prop_assert_eq!(ssd_compare(&b, &a).unwrap().relation, SsdRelation::FirstDominates);
    }
}
