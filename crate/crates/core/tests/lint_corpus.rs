// SPDX-License-Identifier: Apache-2.0

mod common;

use std::collections::BTreeSet;

use common::{checks_fired, lint_corpus};
use rtlscan_core::lint::CheckId;

#[test]
fn corpus_agrees_with_labels() {
    let corpus = lint_corpus();
    assert!(corpus.len() >= 40, "corpus has {} snippets", corpus.len());
    let mut mismatches = Vec::new();
    for s in &corpus {
        let got = checks_fired(&s.name, &s.source);
        if got != s.expected {
            mismatches.push(format!("{}: expected {:?}, got {:?}", s.name, s.expected, got));
        }
    }
    assert!(mismatches.is_empty(), "{}", mismatches.join("\n"));
}

#[test]
fn corpus_covers_every_check_both_ways() {
    let corpus = lint_corpus();
    for c in CheckId::ALL {
        let pos = corpus.iter().filter(|s| s.expected.contains(&c)).count();
        let neg = corpus.iter().filter(|s| !s.expected.contains(&c)).count();
        assert!(pos >= 2, "{c} has {pos} positive snippets");
        assert!(neg >= 2, "{c} has {neg} negative snippets");
    }
    let empty: BTreeSet<CheckId> = BTreeSet::new();
    assert!(corpus.iter().filter(|s| s.expected == empty).count() >= 10);
}
