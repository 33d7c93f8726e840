//! Round trips through the file formats.

use proptest::prelude::*;
use utilprice::formats::{MarketFile, UtilitySpec};
use utilprice_core::random::battery_instance;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn market_files_round_trip(seed in any::<u64>(), index in 0u64..50) {
        let market = battery_instance(seed, index).unwrap();
        let text = serde_json::to_string(&MarketFile::from_market(&market)).unwrap();
        let back: MarketFile = serde_json::from_str(&text).unwrap();
        let again = back.to_market().unwrap();
        for (a, b) in again.probs().iter().zip(market.probs()) {
            prop_assert!((a - b).abs() < 1e-15);
        }
        prop_assert!((again.gains() - market.gains()).amax() < 1e-15);
        prop_assert!((again.claims() - market.claims()).amax() < 1e-15);
    }

    #[test]
    fn power_shorthand_matches_json(p in -5.0f64..0.99) {
        prop_assume!(p.abs() > 1e-6);
        let short = UtilitySpec::parse(&format!("power:{p}")).unwrap().to_utility().unwrap();
        let long = UtilitySpec::parse(&format!(r#"{{"type": "power", "p": {p}}}"#)).unwrap().to_utility().unwrap();
        prop_assert_eq!(&short, &long);
        let spec = UtilitySpec::from_utility(&short);
        prop_assert_eq!(spec.to_utility().unwrap(), long);
    }
}
