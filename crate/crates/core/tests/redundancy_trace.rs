use proptest::prelude::*;

use aft::fault::BurstProfile;
use aft::redundancy::{self, Reaction, RedundancyPolicy};

mod common;
use common::{hysteresis_violations, HysteresisRules};

fn short_policy(calm_window: u64) -> RedundancyPolicy {
    RedundancyPolicy {
        calm_window,
        ..Default::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn traces_obey_hysteresis(
        seed in any::<u64>(),
        rate in 0.0f64..0.02,
        burst_len in 1u64..12,
        calm_window in 5u64..200,
    ) {
        let length = 5_000;
        let schedule = BurstProfile::new(length, rate, burst_len).generate(seed).unwrap();
        let e = redundancy::run_experiment(&schedule, &short_policy(calm_window), length).unwrap();
        let rules = HysteresisRules { calm_window, ..Default::default() };
        let violations = hysteresis_violations(&e.trace, &rules);
        prop_assert!(violations.is_empty(), "{:?}", &violations[..violations.len().min(3)]);
        prop_assert_eq!(e.summary.histogram.values().sum::<u64>(), length);
        let transitions: Vec<(u64, usize)> = e
            .trace
            .iter()
            .filter(|r| matches!(r.event, Reaction::Raised | Reaction::Lowered))
            .map(|r| (r.t, if r.event == Reaction::Raised { r.n as usize + 2 } else { r.n as usize - 2 }))
            .collect();
        prop_assert_eq!(&transitions, &e.summary.transitions);
    }

    #[test]
    fn same_seed_same_trace(seed in any::<u64>()) {
        let profile = BurstProfile::new(3_000, 0.01, 4);
        let policy = short_policy(50);
        let a = redundancy::run_experiment(&profile.generate(seed).unwrap(), &policy, 3_000).unwrap();
        let b = redundancy::run_experiment(&profile.generate(seed).unwrap(), &policy, 3_000).unwrap();
        prop_assert_eq!(a.trace, b.trace);
    }
}

#[test]
fn quiet_run_never_leaves_the_floor() {
    let schedule = BurstProfile::new(10_000, 0.0, 5).generate(1).unwrap();
    let e = redundancy::run_experiment(&schedule, &RedundancyPolicy::default(), 10_000).unwrap();
    assert_eq!(e.summary.fraction_at(3), 1.0);
    assert!(e.summary.transitions.is_empty());
}

#[test]
fn validator_rejects_an_early_decrease() {
    let schedule = BurstProfile::new(10_000, 0.001, 3).generate(5).unwrap();
    let e = redundancy::run_experiment(&schedule, &short_policy(100), 10_000).unwrap();
    assert!(e.trace.iter().any(|r| r.event == Reaction::Lowered));
    let rules = HysteresisRules {
        calm_window: 101,
        ..Default::default()
    };
    assert!(!hysteresis_violations(&e.trace, &rules).is_empty());
}
