// SPDX-License-Identifier: Apache-2.0

//! Latch inference for combinational blocks by definite-assignment analysis.

use std::collections::{BTreeSet, HashSet};

use indexmap::{IndexMap, IndexSet};

use super::checks::cond_hit;
use super::{CheckId, RawHit};
use crate::verilog::ast::{AlwaysBlock, AlwaysKind, DesignUnit, Expr, Stmt, StmtKind};
use crate::verilog::lexer::mask;
use crate::verilog::refs::lvalue_targets;
use crate::verilog::symbols::{const_eval, Symbol};
use crate::verilog::width::expr_width;

/// A signal that keeps its value on some path through a combinational
/// block, and the innermost conditional responsible.
#[derive(Debug, Clone)]
pub struct LatchSite<'a> {
    pub signal: String,
    pub conditional: &'a Stmt,
}

struct State<'a> {
    unit: &'a DesignUnit,
    maybe: IndexSet<String>,
    culprits: IndexMap<String, &'a Stmt>,
}

type Defined = BTreeSet<String>;

impl<'a> State<'a> {
    fn blame(&mut self, stmt: &'a Stmt, branches: &[Defined], all: &Defined) {
        let mut union: IndexSet<&String> = IndexSet::new();
        for b in branches {
            union.extend(b.iter());
        }
        for s in union {
            if !all.contains(s) {
                self.culprits.entry(s.clone()).or_insert(stmt);
            }
        }
    }

    fn analyze(&mut self, stmt: &'a Stmt, d_in: &Defined) -> Defined {
        match &stmt.kind {
            StmtKind::BlockingAssign { lhs, .. } | StmtKind::NonblockingAssign { lhs, .. } => {
                let mut d = d_in.clone();
                for t in lvalue_targets(lhs) {
                    if matches!(self.unit.symbols.get(&t), Some(Symbol::Signal(_))) {
                        self.maybe.insert(t.clone());
                        d.insert(t);
                    }
                }
                d
            }
            StmtKind::Block { stmts, .. } => {
                let mut d = d_in.clone();
                for s in stmts {
                    d = self.analyze(s, &d);
                }
                d
            }
            StmtKind::If {
                then_stmt, else_stmt, ..
            } => {
                let dt = self.analyze(then_stmt, d_in);
                let de = match else_stmt {
                    Some(e) => self.analyze(e, d_in),
                    None => d_in.clone(),
                };
                let all: Defined = dt.intersection(&de).cloned().collect();
                self.blame(stmt, &[dt, de], &all);
                all
            }
            StmtKind::Case {
                selector,
                items,
                default,
                ..
            } => {
                let mut branches: Vec<Defined> = items.iter().map(|it| self.analyze(&it.body, d_in)).collect();
                match default {
                    Some(d) => branches.push(self.analyze(d, d_in)),
                    None if self.labels_cover(selector, items.iter().flat_map(|i| &i.labels)) => {}
                    None => branches.push(d_in.clone()),
                }
                let mut all = branches.first().cloned().unwrap_or_else(|| d_in.clone());
                for b in &branches[1.min(branches.len())..] {
                    all = all.intersection(b).cloned().collect();
                }
                self.blame(stmt, &branches, &all);
                all
            }
            StmtKind::For { body, .. } => self.analyze(body, d_in),
            StmtKind::SystemTask { .. } | StmtKind::Null => d_in.clone(),
        }
    }

    /// Whether constant labels enumerate every value of a narrow selector.
    fn labels_cover<'e>(&self, selector: &Expr, labels: impl Iterator<Item = &'e Expr>) -> bool {
        let Some(w) = expr_width(selector, self.unit).known() else {
            return false;
        };
        if w > 16 {
            return false;
        }
        let mut values = HashSet::new();
        for l in labels {
            if let crate::verilog::ExprKind::Number(n) = &l.kind {
                if n.has_xz {
                    return false;
                }
            }
            match const_eval(l, &self.unit.symbols) {
                Some(v) if v >= 0 && (v as u128) <= mask(w) => {
                    values.insert(v);
                }
                _ => return false,
            }
        }
        values.len() as u128 == mask(w) + 1
    }
}

/// Signals latched by `block`, in first-assignment order.
pub fn latched_signals<'a>(unit: &'a DesignUnit, block: &'a AlwaysBlock) -> Vec<LatchSite<'a>> {
    let mut st = State {
        unit,
        maybe: IndexSet::new(),
        culprits: IndexMap::new(),
    };
    let defined = st.analyze(&block.body, &Defined::new());
    st.maybe
        .iter()
        .filter(|s| !defined.contains(*s))
        .filter_map(|s| {
            st.culprits.get(s).map(|c| LatchSite {
                signal: s.clone(),
                conditional: c,
            })
        })
        .collect()
}

pub(super) fn inferred_latch(unit: &DesignUnit) -> Vec<RawHit> {
    let mut hits = Vec::new();
    for b in &unit.always_blocks {
        if !b.is_combinational() || b.kind == AlwaysKind::AlwaysLatch {
            continue;
        }
        for site in latched_signals(unit, b) {
            let cond = match &site.conditional.kind {
                StmtKind::If { cond, .. } => cond,
                StmtKind::Case { selector, .. } => selector,
                _ => continue,
            };
            hits.push(cond_hit(
                CheckId::InferredLatch,
                unit,
                site.conditional,
                cond,
                site.signal,
            ));
        }
    }
    hits
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verilog::parse_str;

    fn latched(body: &str) -> Vec<String> {
        let src = format!(
            "module m(input sel, input [1:0] s2, input a, input b, output reg y, output reg z);\n\
             always @* {body}\nendmodule"
        );
        let u = parse_str(&src, "t.v").units.remove(0);
        latched_signals(&u, &u.always_blocks[0])
            .into_iter()
            .map(|l| l.signal)
            .collect()
    }

    #[test]
    fn if_without_else_latches() {
        assert_eq!(latched("if (sel) y = a;"), ["y"]);
        assert!(latched("if (sel) y = a; else y = b;").is_empty());
        assert!(latched("begin y = b; if (sel) y = a; end").is_empty());
        assert_eq!(latched("if (sel) begin y = a; z = a; end else y = b;"), ["z"]);
    }

    #[test]
    fn case_coverage() {
        assert_eq!(latched("case (sel) 1'b0: y = a; endcase"), ["y"]);
        assert!(latched("case (sel) 1'b0: y = a; 1'b1: y = b; endcase").is_empty());
        assert!(latched("case (s2) 0: y = a; default: y = b; endcase").is_empty());
        assert_eq!(latched("case (s2) 0: y = a; 1: y = b; 2: y = a; endcase"), ["y"]);
        assert!(latched("case (s2) 0, 1: y = a; 2, 3: y = b; endcase").is_empty());
    }
}
