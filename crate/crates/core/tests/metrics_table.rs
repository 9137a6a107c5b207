// SPDX-License-Identifier: Apache-2.0

mod common;

use common::{corpus_dir, published_summary, replay_scan};
use proptest::prelude::*;
use rtlscan_core::pipeline::{compute_metrics, ratio_str, render_metrics, Labels, MetricsRow, MetricsTable};
use rtlscan_core::{CweId, Variation};

/// Schoolbook long division, then round half up on the remainder.
fn long_division(num: u64, den: u64, decimals: u32) -> String {
    let mut digits = vec![num / den];
    let mut rem = num % den;
    for _ in 0..decimals {
        rem *= 10;
        digits.push(rem / den);
        rem %= den;
    }
    if 2 * rem >= den {
        let mut k = digits.len() - 1;
        loop {
            digits[k] += 1;
            if digits[k] < 10 || k == 0 {
                break;
            }
            digits[k] = 0;
            k -= 1;
        }
    }
    let frac: String = digits[1..].iter().map(|d| d.to_string()).collect();
    if decimals == 0 {
        digits[0].to_string()
    } else {
        format!("{}.{frac}", digits[0])
    }
}

fn published_table() -> MetricsTable {
    let rows = published_summary()
        .into_iter()
        .filter(|p| p.variation.is_some())
        .map(|p| MetricsRow {
            cwe: p.cwe,
            variation: p.variation,
            assets: p.assets,
            assertions: p.assertions,
            ..MetricsRow::new(p.flagged, p.tps)
        })
        .collect();
    MetricsTable::from_rows(rows)
}

#[test]
fn published_ratios_reproduce() {
    let table = published_table();
    let mut checked = 0;
    for p in published_summary() {
        let row = match (p.cwe, p.variation) {
            (None, _) => &table.total,
            (Some(c), None) => table.cwe_totals.iter().find(|r| r.cwe == Some(c)).unwrap(),
            (Some(c), Some(v)) => table
                .rows
                .iter()
                .find(|r| r.cwe == Some(c) && r.variation == Some(v))
                .unwrap(),
        };
        let decimals = p.precision.split('.').nth(1).map_or(0, |d| d.len() as u32);
        assert_eq!((row.flagged, row.tps), (p.flagged, p.tps));
        assert_eq!(
            row.precision_str(decimals),
            p.precision,
            "{:?} {:?}",
            p.cwe,
            p.variation
        );
        assert_eq!(row.fdr_str(2), p.fdr, "{:?} {:?}", p.cwe, p.variation);
        assert_eq!((row.assets, row.assertions), (p.assets, p.assertions));
        checked += 1;
    }
    assert_eq!(checked, 26);
}

#[test]
fn rendered_table_carries_published_values() {
    let text = render_metrics(&published_table());
    let rows: Vec<Vec<&str>> = text.lines().map(|l| l.split_whitespace().collect()).collect();
    assert_eq!(
        rows[0],
        [
            "CWE",
            "Variation",
            "Flagged",
            "TPs",
            "Precision",
            "FDR",
            "Assets",
            "Assertions"
        ]
    );
    assert!(rows.contains(&vec!["1231", "v2", "24", "2", "0.08", "0.92", "33", "33"]));
    assert!(rows.contains(&vec!["1300", "v0", "8", "7", "0.88", "0.13", "2053", "-"]));
    assert!(rows.contains(&vec!["total", "414", "188", "0.45", "0.55", "2150", "1884"]));
    assert_eq!(
        rows.last().unwrap(),
        &vec!["all", "total", "545", "277", "0.508", "0.49", "12554", "2026"]
    );
}

#[test]
fn zero_flagged_prints_en_dash() {
    let t = MetricsTable::from_rows(vec![MetricsRow {
        cwe: Some(CweId::Cwe1244),
        variation: Some(Variation::V0),
        ..MetricsRow::new(0, 0)
    }]);
    let text = render_metrics(&t);
    assert!(text.lines().nth(1).unwrap().contains("\u{2013}"));
}

#[test]
fn corpus_reports_score_against_shipped_labels() {
    let labels: Labels =
        serde_json::from_str(&std::fs::read_to_string(corpus_dir().join("labels.json")).unwrap()).unwrap();
    let reports: Vec<_> = Variation::ALL
        .iter()
        .map(|&v| replay_scan("all.json", &CweId::ALL, v).report)
        .collect();
    let (table, diags) = compute_metrics(&reports, &labels);
    assert!(diags.is_empty(), "{diags:?}");
    let flagged: usize = reports.iter().map(|r| r.flagged()).sum();
    assert_eq!(table.total.flagged, flagged as u64);
    assert_eq!(table.rows.len(), 20);
    assert!(table.total.tps < table.total.flagged);
}

#[test]
fn unlabeled_findings_are_excluded() {
    let report = replay_scan("fig2.json", &[CweId::Cwe1191], Variation::V0).report;
    let (table, diags) = compute_metrics(&[report], &Labels::default());
    assert_eq!(table.total.flagged, 0);
    assert_eq!(diags.len(), 1);
    assert!(diags[0].message.contains("no label"));
}

proptest! {
    #[test]
    fn ratio_matches_long_division(den in 1u64..5000, num_frac in 0.0f64..=1.0, d in 0u32..5) {
        let num = (num_frac * den as f64) as u64;
        prop_assert_eq!(ratio_str(num, den, d), long_division(num, den, d));
    }

    #[test]
    fn precision_and_fdr_complement(flagged in 1u64..10_000, tp_frac in 0.0f64..=1.0) {
        let tps = (tp_frac * flagged as f64) as u64;
        let r = MetricsRow::new(flagged, tps);
        let (p, f) = (r.precision.unwrap(), r.fdr.unwrap());
        prop_assert!((0.0..=1.0).contains(&p) && (0.0..=1.0).contains(&f));
        prop_assert!((p + f - 1.0).abs() < 1e-12);
    }
}
