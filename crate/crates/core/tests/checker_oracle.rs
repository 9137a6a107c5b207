// SPDX-License-Identifier: Apache-2.0

//! Property checker against the brute-force reference in `common::oracle`.

mod common;

use common::oracle::*;
use proptest::prelude::*;
use rtlscan_core::checker::{CheckStatus, CheckerConfig, SearchMode};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exhaustive_matches_reference(d in design()) {
        let reference = Reference(&d);
        let want = reference.earliest_violation();
        let got = run(&d, &exhaustive_cfg(d.depth));
        match (&got, want) {
            (CheckStatus::Falsified { trace, cycle, mode }, Some(w)) => {
                prop_assert_eq!(*mode, SearchMode::Exhaustive);
                prop_assert_eq!(*cycle, w, "{}", d.verilog());
                prop_assert!(reference.confirms(trace, *cycle), "trace does not replay\n{}", d.verilog());
            }
            (CheckStatus::NotFalsified { .. }, None) => {}
            _ => prop_assert!(false, "checker {:?} vs reference {:?}\n{}", got, want, d.verilog()),
        }
    }

    #[test]
    fn random_counterexamples_are_genuine(d in design(), seed in any::<u64>()) {
        let cfg = CheckerConfig {
            max_depth: d.depth,
            exhaustive_bit_budget: 0,
            random_trials: 200,
            seed,
        };
        let reference = Reference(&d);
        match run(&d, &cfg) {
            CheckStatus::Falsified { trace, cycle, .. } => {
                prop_assert!(reference.earliest_violation().is_some_and(|w| w <= cycle));
                prop_assert!(reference.confirms(&trace, cycle));
            }
            CheckStatus::NotFalsified { .. } => {}
            other => prop_assert!(false, "{:?}", other),
        }
    }

    #[test]
    fn checking_is_deterministic(d in design(), seed in any::<u64>()) {
        let cfg = CheckerConfig { max_depth: d.depth, exhaustive_bit_budget: 0, random_trials: 50, seed };
        prop_assert_eq!(run(&d, &cfg), run(&d, &cfg));
        prop_assert_eq!(run(&d, &exhaustive_cfg(d.depth)), run(&d, &exhaustive_cfg(d.depth)));
    }

    #[test]
    fn deeper_bounds_only_add_counterexamples(d in design()) {
        let shallow = run(&d, &exhaustive_cfg(d.depth));
        let deep = run(&d, &exhaustive_cfg(d.depth + 1));
        match (&shallow, &deep) {
            (CheckStatus::Falsified { cycle: a, .. }, CheckStatus::Falsified { cycle: b, .. }) => prop_assert_eq!(a, b),
            (CheckStatus::Falsified { .. }, _) => prop_assert!(false, "lost counterexample at depth {}", d.depth + 1),
            _ => {}
        }
    }
}

#[test]
fn reference_agrees_on_hand_written_lock() {
    let d = Design {
        width: 2,
        inputs: 2,
        init: vec![Some(0)],
        wire: E::In(1),
        next: vec![(Some(B::Ne(E::In(0), E::Const(0))), E::Wire)],
        disable: None,
        antecedent: B::Eq(E::Const(1), E::Const(1)),
        consequent: B::Stable(0),
        depth: 3,
    };
    assert_eq!(Reference(&d).earliest_violation(), Some(1));
    let CheckStatus::Falsified { trace, cycle, .. } = run(&d, &exhaustive_cfg(3)) else {
        panic!()
    };
    assert_eq!(cycle, 1);
    assert!(Reference(&d).confirms(&trace, cycle));
}

#[test]
fn fixed_sweep_hits_both_outcomes() {
    use proptest::strategy::ValueTree;
    use proptest::test_runner::{Config, TestRng, TestRunner};

    let mut runner = TestRunner::new_with_rng(
        Config::default(),
        TestRng::deterministic_rng(Config::default().rng_algorithm),
    );
    let (mut falsified, mut clean) = (0, 0);
    for _ in 0..40 {
        let d = design().new_tree(&mut runner).unwrap().current();
        let want = Reference(&d).earliest_violation();
        match run(&d, &exhaustive_cfg(d.depth)) {
            CheckStatus::Falsified { cycle, trace, .. } => {
                assert_eq!(Some(cycle), want, "{}", d.verilog());
                assert!(Reference(&d).confirms(&trace, cycle));
                falsified += 1;
            }
            CheckStatus::NotFalsified { .. } => {
                assert_eq!(want, None, "{}", d.verilog());
                clean += 1;
            }
            other => panic!("{other:?}\n{}", d.verilog()),
        }
    }
    assert!(falsified >= 5 && clean >= 5, "falsified {falsified}, clean {clean}");
}
