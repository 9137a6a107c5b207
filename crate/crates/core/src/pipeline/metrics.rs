// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;
use std::fmt::Write as _;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::ScanReport;
use crate::diag::DiagCode;
use crate::{CweId, Diagnostic, Strategy, Variation};

/// Adjudicated findings: source id to true-positive flag.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Labels {
    #[serde(default)]
    pub version: u32,
    pub labels: BTreeMap<String, bool>,
}

/// Flagged/true-positive counts with the derived ratios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub cwe: Option<CweId>,
    pub variation: Option<Variation>,
    pub flagged: u64,
    pub tps: u64,
    /// `None` when nothing was flagged.
    pub precision: Option<f64>,
    pub fdr: Option<f64>,
    pub assets: u64,
    /// `None` for lint-strategy CWEs.
    pub assertions: Option<u64>,
}

impl MetricsRow {
    pub fn new(flagged: u64, tps: u64) -> MetricsRow {
        assert!(tps <= flagged, "more true positives than flagged");
        let ratio = |n: u64| (flagged > 0).then(|| n as f64 / flagged as f64);
        MetricsRow {
            cwe: None,
            variation: None,
            flagged,
            tps,
            precision: ratio(tps),
            fdr: ratio(flagged - tps),
            assets: 0,
            assertions: None,
        }
    }

    /// Precision rounded half away from zero, or an en dash when undefined.
    pub fn precision_str(&self, decimals: u32) -> String {
        ratio_str(self.tps, self.flagged, decimals)
    }

    pub fn fdr_str(&self, decimals: u32) -> String {
        ratio_str(self.flagged - self.tps, self.flagged, decimals)
    }

    fn absorb(&mut self, o: &MetricsRow) {
        *self = MetricsRow {
            assets: self.assets + o.assets,
            assertions: match (self.assertions, o.assertions) {
                (None, None) => None,
                (a, b) => Some(a.unwrap_or(0) + b.unwrap_or(0)),
            },
            cwe: self.cwe,
            variation: self.variation,
            ..MetricsRow::new(self.flagged + o.flagged, self.tps + o.tps)
        };
    }
}

/// `num / den` in decimal, rounded half away from zero using integer
/// arithmetic so ties are exact.
pub fn ratio_str(num: u64, den: u64, decimals: u32) -> String {
    if den == 0 {
        return "\u{2013}".into();
    }
    let scale = 10u128.pow(decimals);
    let q = (2 * num as u128 * scale + den as u128) / (2 * den as u128);
    if decimals == 0 {
        return q.to_string();
    }
    format!("{}.{:0width$}", q / scale, q % scale, width = decimals as usize)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsTable {
    /// One row per (CWE, variation), ordered.
    pub rows: Vec<MetricsRow>,
    /// One row per CWE over all variations.
    pub cwe_totals: Vec<MetricsRow>,
    pub total: MetricsRow,
}

impl MetricsTable {
    /// Aggregate already-counted rows.
    pub fn from_rows(mut rows: Vec<MetricsRow>) -> MetricsTable {
        rows.sort_by_key(|r| (r.cwe, r.variation));
        let mut per: IndexMap<Option<CweId>, MetricsRow> = IndexMap::new();
        let mut total = MetricsRow::new(0, 0);
        for r in &rows {
            per.entry(r.cwe)
                .or_insert_with(|| MetricsRow {
                    cwe: r.cwe,
                    assertions: r.assertions.map(|_| 0),
                    ..MetricsRow::new(0, 0)
                })
                .absorb(r);
            total.absorb(r);
        }
        MetricsTable {
            rows,
            cwe_totals: per.into_values().collect(),
            total,
        }
    }
}

/// Precision and FDR per (CWE, variation) over the flagged findings of
/// `reports`. Flagged findings without a label are left out with a warning.
pub fn compute_metrics(reports: &[ScanReport], labels: &Labels) -> (MetricsTable, Vec<Diagnostic>) {
    let mut diags = Vec::new();
    let mut cells: IndexMap<(CweId, Variation), MetricsRow> = IndexMap::new();
    for rep in reports {
        for u in &rep.units {
            let row = cells.entry((u.cwe, rep.variation)).or_insert_with(|| MetricsRow {
                cwe: Some(u.cwe),
                variation: Some(rep.variation),
                assertions: (u.cwe.strategy() == Strategy::Assertion).then_some(0),
                ..MetricsRow::new(0, 0)
            });
            let (mut flagged, mut tps) = (0, 0);
            for f in u.findings.iter().filter(|f| f.finding.insecure) {
                match labels.labels.get(&f.finding.source) {
                    Some(&tp) => {
                        flagged += 1;
                        tps += u64::from(tp);
                    }
                    None => diags.push(Diagnostic::warning(
                        DiagCode::MissingVerdict,
                        format!(
                            "flagged finding {} (CWE-{}, {}) has no label; excluded",
                            f.finding.source, u.cwe, u.module
                        ),
                    )),
                }
            }
            row.absorb(&MetricsRow {
                assets: u.assets_identified as u64,
                assertions: row.assertions.map(|_| u.assertions_formed as u64),
                ..MetricsRow::new(flagged, tps)
            });
        }
    }
    (MetricsTable::from_rows(cells.into_values().collect()), diags)
}

/// Text table laid out like the published results summary: ratios to two
/// decimals, the grand-total precision to three.
pub fn render_metrics(t: &MetricsTable) -> String {
    let mut out = String::new();
    let line = |out: &mut String, cwe: &str, var: &str, r: &MetricsRow, pd: u32| {
        let assertions = r.assertions.map_or("-".to_string(), |a| a.to_string());
        let _ = writeln!(
            out,
            "{cwe:<6} {var:<9} {:>7} {:>5} {:>9} {:>5} {:>7} {:>10}",
            r.flagged,
            r.tps,
            r.precision_str(pd),
            r.fdr_str(2),
            r.assets,
            assertions
        );
    };
    let _ = writeln!(
        out,
        "{:<6} {:<9} {:>7} {:>5} {:>9} {:>5} {:>7} {:>10}",
        "CWE", "Variation", "Flagged", "TPs", "Precision", "FDR", "Assets", "Assertions"
    );
    for tot in &t.cwe_totals {
        let name = tot.cwe.map_or(String::new(), |c| c.to_string());
        for r in t.rows.iter().filter(|r| r.cwe == tot.cwe) {
            let v = r.variation.map_or("", Variation::as_str);
            line(&mut out, &name, v, r, 2);
        }
        line(&mut out, "", "total", tot, 2);
    }
    line(&mut out, "all", "total", &t.total, 3);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ties_round_away_from_zero() {
        assert_eq!(ratio_str(7, 8, 2), "0.88");
        assert_eq!(ratio_str(1, 8, 2), "0.13");
        assert_eq!(ratio_str(1, 3, 2), "0.33");
        assert_eq!(ratio_str(277, 545, 3), "0.508");
        assert_eq!(ratio_str(5, 5, 2), "1.00");
        assert_eq!(ratio_str(0, 5, 2), "0.00");
        assert_eq!(ratio_str(0, 0, 2), "\u{2013}");
        assert_eq!(ratio_str(1, 2, 0), "1");
    }

    #[test]
    fn zero_flagged_has_no_ratios() {
        let r = MetricsRow::new(0, 0);
        assert!(r.precision.is_none() && r.fdr.is_none());
        assert_eq!(r.precision_str(2), "\u{2013}");
    }

    #[test]
    fn totals_sum_rows() {
        let mk = |c, v, f, t| MetricsRow {
            cwe: Some(c),
            variation: Some(v),
            ..MetricsRow::new(f, t)
        };
        let t = MetricsTable::from_rows(vec![
            mk(CweId::Cwe1300, Variation::V1, 9, 8),
            mk(CweId::Cwe1300, Variation::V0, 8, 7),
            mk(CweId::Cwe1191, Variation::V0, 12, 12),
        ]);
        assert_eq!(t.rows[0].cwe, Some(CweId::Cwe1191));
        assert_eq!(t.cwe_totals.len(), 2);
        assert_eq!((t.cwe_totals[1].flagged, t.cwe_totals[1].tps), (17, 15));
        assert_eq!((t.total.flagged, t.total.tps), (29, 27));
    }
}
