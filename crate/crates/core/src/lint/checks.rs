// SPDX-License-Identifier: Apache-2.0

use indexmap::IndexSet;

use super::{CheckId, ModuleLibrary, RawHit};
use crate::verilog::ast::{AlwaysBlock, DesignUnit, Expr, ExprKind, SignalDecl, Stmt, StmtKind};
use crate::verilog::refs::add_signal_refs;
use crate::verilog::symbols::const_eval;
use crate::verilog::width::expr_width;
use crate::verilog::SourceSpan;

/// An assignment anywhere in a module.
pub(super) struct Site<'a> {
    pub lhs: &'a Expr,
    pub rhs: &'a Expr,
    pub span: &'a SourceSpan,
}

fn collect_stmt_sites<'a>(stmt: &'a Stmt, out: &mut Vec<Site<'a>>) {
    match &stmt.kind {
        StmtKind::BlockingAssign { lhs, rhs } | StmtKind::NonblockingAssign { lhs, rhs } => out.push(Site {
            lhs,
            rhs,
            span: &stmt.span,
        }),
        StmtKind::If {
            then_stmt, else_stmt, ..
        } => {
            collect_stmt_sites(then_stmt, out);
            if let Some(e) = else_stmt {
                collect_stmt_sites(e, out);
            }
        }
        StmtKind::Case { items, default, .. } => {
            for it in items {
                collect_stmt_sites(&it.body, out);
            }
            if let Some(d) = default {
                collect_stmt_sites(d, out);
            }
        }
        StmtKind::Block { stmts, .. } => stmts.iter().for_each(|s| collect_stmt_sites(s, out)),
        // loop headers only touch the loop variable
        StmtKind::For { body, .. } => collect_stmt_sites(body, out),
        StmtKind::SystemTask { .. } | StmtKind::Null => {}
    }
}

pub(super) fn assignment_sites(unit: &DesignUnit) -> Vec<Site<'_>> {
    let mut out: Vec<Site> = unit
        .continuous_assigns
        .iter()
        .map(|a| Site {
            lhs: &a.lhs,
            rhs: &a.rhs,
            span: &a.span,
        })
        .collect();
    for b in &unit.always_blocks {
        collect_stmt_sites(&b.body, &mut out);
    }
    for s in &unit.initial_blocks {
        collect_stmt_sites(s, &mut out);
    }
    out
}

fn site_signals(site: &Site) -> Vec<String> {
    let mut set = IndexSet::new();
    add_signal_refs(site.lhs, &mut set);
    add_signal_refs(site.rhs, &mut set);
    set.into_iter().collect()
}

fn site_hit(check: CheckId, unit: &DesignUnit, site: &Site) -> RawHit {
    RawHit {
        check,
        module: unit.name.clone(),
        span: site.span.clone(),
        statement: unit.text(site.span).to_string(),
        lhsexpr: unit.text(&site.lhs.span).to_string(),
        signals: site_signals(site),
    }
}

pub(super) fn width_mismatch(unit: &DesignUnit) -> Vec<RawHit> {
    assignment_sites(unit)
        .iter()
        .filter(
            |s| match (expr_width(s.lhs, unit).known(), expr_width(s.rhs, unit).known()) {
                (Some(l), Some(r)) => l != r,
                _ => false,
            },
        )
        .map(|s| site_hit(CheckId::WidthMismatch, unit, s))
        .collect()
}

pub(super) fn rhs_has_concat(unit: &DesignUnit) -> Vec<RawHit> {
    assignment_sites(unit)
        .iter()
        .filter(|s| s.rhs.is_concat_like())
        .map(|s| site_hit(CheckId::RhsHasConcat, unit, s))
        .collect()
}

/// The declaration behind an lvalue that names an array element
/// (`mem[i]`, `mem[i][3:0]`).
fn array_element_target<'u>(lhs: &Expr, unit: &'u DesignUnit) -> Option<&'u SignalDecl> {
    let mut e = lhs;
    loop {
        match &e.kind {
            ExprKind::Index { base, .. } => {
                if let ExprKind::Ident(n) = &base.kind {
                    return unit.signal(n).filter(|s| s.is_array);
                }
                e = base;
            }
            ExprKind::PartSelect { base, .. } | ExprKind::IndexedPartSelect { base, .. } => e = base,
            _ => return None,
        }
    }
}

pub(super) fn concat_in_array_assign(unit: &DesignUnit) -> Vec<RawHit> {
    assignment_sites(unit)
        .iter()
        .filter(|s| s.rhs.is_concat_like() && array_element_target(s.lhs, unit).is_some())
        .map(|s| site_hit(CheckId::ConcatInArrayAssign, unit, s))
        .collect()
}

fn is_unsized_literal(e: &Expr) -> bool {
    matches!(&e.kind, ExprKind::Number(n) if !n.sized)
}

/// Operands of a concatenation or replication that are unsized literals.
/// Replication counts are not operands.
fn has_unsized_operand(e: &Expr) -> bool {
    let mut found = false;
    e.walk(&mut |sub| match &sub.kind {
        ExprKind::Concat(items) | ExprKind::Replication { items, .. } if items.iter().any(is_unsized_literal) => {
            found = true;
        }
        _ => {}
    });
    found
}

pub(super) fn concat_using_unsized(unit: &DesignUnit) -> Vec<RawHit> {
    assignment_sites(unit)
        .iter()
        .filter(|s| has_unsized_operand(s.lhs) || has_unsized_operand(s.rhs))
        .map(|s| site_hit(CheckId::ConcatUsingUnsizedNumbers, unit, s))
        .collect()
}

/// Declared packed bounds of the vector a select applies to.
fn select_target<'u>(base: &Expr, unit: &'u DesignUnit) -> Option<&'u SignalDecl> {
    match &base.kind {
        ExprKind::Ident(n) => unit.signal(n).filter(|s| s.resolved && !s.is_array),
        ExprKind::Index { base: inner, .. } => match &inner.kind {
            ExprKind::Ident(n) => unit.signal(n).filter(|s| s.resolved && s.is_array),
            _ => None,
        },
        _ => None,
    }
}

/// Conditions and case selectors of procedural code.
fn condition_exprs(unit: &DesignUnit) -> Vec<&Expr> {
    let mut out = Vec::new();
    let bodies = unit
        .always_blocks
        .iter()
        .map(|b| &b.body)
        .chain(unit.initial_blocks.iter());
    for body in bodies {
        body.walk(&mut |st| match &st.kind {
            StmtKind::If { cond, .. } => out.push(cond),
            StmtKind::Case { selector, .. } => out.push(selector),
            _ => {}
        });
    }
    out
}

fn expr_hit(check: CheckId, unit: &DesignUnit, e: &Expr, lhsexpr: &str) -> RawHit {
    let mut set = IndexSet::new();
    add_signal_refs(e, &mut set);
    RawHit {
        check,
        module: unit.name.clone(),
        span: e.span.clone(),
        statement: unit.text(&e.span).to_string(),
        lhsexpr: lhsexpr.to_string(),
        signals: set.into_iter().collect(),
    }
}

/// Apply `pred` to every sub-expression of assignments, conditions and
/// instance connections; one hit per offending site.
fn scan_sites(unit: &DesignUnit, check: CheckId, pred: &dyn Fn(&Expr) -> bool) -> Vec<RawHit> {
    let any = |e: &Expr| {
        let mut f = false;
        e.walk(&mut |s| f |= pred(s));
        f
    };
    let mut hits = Vec::new();
    for s in assignment_sites(unit) {
        if any(s.lhs) || any(s.rhs) {
            hits.push(site_hit(check, unit, &s));
        }
    }
    for e in condition_exprs(unit) {
        if any(e) {
            hits.push(expr_hit(check, unit, e, ""));
        }
    }
    for inst in &unit.instances {
        for c in &inst.port_connections {
            if let Some(e) = &c.expr {
                if any(e) {
                    hits.push(connection_hit(check, unit, inst, c, e));
                }
            }
        }
    }
    hits
}

fn connection_hit(
    check: CheckId,
    unit: &DesignUnit,
    inst: &crate::verilog::ast::Instance,
    c: &crate::verilog::ast::PortConnection,
    e: &Expr,
) -> RawHit {
    let mut set = IndexSet::new();
    add_signal_refs(e, &mut set);
    RawHit {
        check,
        module: unit.name.clone(),
        span: c.span.clone(),
        statement: unit.text(&c.span).to_string(),
        lhsexpr: match &c.port {
            Some(p) => format!("{}.{p}", inst.name),
            None => inst.name.clone(),
        },
        signals: set.into_iter().collect(),
    }
}

pub(super) fn reverse_connected_bus(unit: &DesignUnit, library: &ModuleLibrary) -> Vec<RawHit> {
    let reversed = |e: &Expr| -> bool {
        let ExprKind::PartSelect { base, msb, lsb } = &e.kind else {
            return false;
        };
        let Some(decl) = select_target(base, unit) else {
            return false;
        };
        if decl.msb == decl.lsb {
            return false;
        }
        match (const_eval(msb, &unit.symbols), const_eval(lsb, &unit.symbols)) {
            (Some(m), Some(l)) if m != l => (m > l) != decl.descending(),
            _ => false,
        }
    };
    let mut hits = scan_sites(unit, CheckId::ReverseConnectedBus, &reversed);
    // formal vs actual direction across instance boundaries
    for inst in &unit.instances {
        let Some(callee) = library.get(inst.module_name.as_str()) else {
            continue;
        };
        for (i, c) in inst.port_connections.iter().enumerate() {
            let formal_name = match &c.port {
                Some(p) if p == "*" => continue,
                Some(p) => Some(p.as_str()),
                None => callee.ports.get(i).map(|p| p.name.as_str()),
            };
            let (Some(formal_name), Some(actual)) = (formal_name, &c.expr) else {
                continue;
            };
            let Some(formal) = callee.signal(formal_name).filter(|s| s.resolved) else {
                continue;
            };
            if formal.msb == formal.lsb {
                continue;
            }
            let actual_desc = match &actual.kind {
                ExprKind::Ident(n) => match unit.signal(n).filter(|s| s.resolved && !s.is_array) {
                    Some(s) if s.msb != s.lsb => Some(s.descending()),
                    _ => None,
                },
                ExprKind::PartSelect { msb, lsb, .. } => {
                    match (const_eval(msb, &unit.symbols), const_eval(lsb, &unit.symbols)) {
                        (Some(m), Some(l)) if m != l => Some(m > l),
                        _ => None,
                    }
                }
                _ => None,
            };
            if actual_desc.is_some_and(|d| d != formal.descending()) {
                hits.push(connection_hit(CheckId::ReverseConnectedBus, unit, inst, c, actual));
            }
        }
    }
    hits
}

pub(super) fn improper_range_index(unit: &DesignUnit) -> Vec<RawHit> {
    let bad = |e: &Expr| -> bool {
        let c = |x: &Expr| const_eval(x, &unit.symbols);
        match &e.kind {
            ExprKind::Index { base, index } => {
                if let ExprKind::Ident(n) = &base.kind {
                    if let Some(s) = unit.signal(n) {
                        if s.is_array {
                            return match (s.array_range, c(index)) {
                                (Some((a, b)), Some(i)) => i < a.min(b) || i > a.max(b),
                                _ => false,
                            };
                        }
                    }
                }
                match (select_target(base, unit), c(index)) {
                    (Some(s), Some(i)) => !s.in_range(i),
                    _ => false,
                }
            }
            ExprKind::PartSelect { base, msb, lsb } => match select_target(base, unit) {
                Some(s) => [c(msb), c(lsb)].into_iter().flatten().any(|i| !s.in_range(i)),
                None => false,
            },
            ExprKind::IndexedPartSelect {
                base,
                start,
                width,
                ascending,
            } => match (select_target(base, unit), c(start), c(width)) {
                (Some(s), Some(st), Some(w)) if w > 0 => {
                    let end = if *ascending { st + w - 1 } else { st - w + 1 };
                    !s.in_range(st) || !s.in_range(end)
                }
                _ => false,
            },
            _ => false,
        }
    };
    scan_sites(unit, CheckId::ImproperRangeIndex, &bad)
}

/// First assignment target text in a statement tree.
pub(super) fn first_target(unit: &DesignUnit, s: &Stmt) -> String {
    let mut out = None;
    s.walk(&mut |st| {
        if out.is_none() {
            if let StmtKind::BlockingAssign { lhs, .. } | StmtKind::NonblockingAssign { lhs, .. } = &st.kind {
                out = Some(unit.text(&lhs.span).to_string());
            }
        }
    });
    out.unwrap_or_default()
}

pub(super) fn cond_hit(check: CheckId, unit: &DesignUnit, stmt: &Stmt, cond: &Expr, lhs: String) -> RawHit {
    let mut set = IndexSet::new();
    add_signal_refs(cond, &mut set);
    RawHit {
        check,
        module: unit.name.clone(),
        span: stmt.span.clone(),
        statement: unit.text(&stmt.span).to_string(),
        lhsexpr: lhs,
        signals: set.into_iter().collect(),
    }
}

pub(super) fn if_without_else(unit: &DesignUnit) -> Vec<RawHit> {
    let mut hits = Vec::new();
    for b in &unit.always_blocks {
        collect_if_without_else(unit, b, &mut hits);
    }
    hits
}

fn collect_if_without_else(unit: &DesignUnit, b: &AlwaysBlock, hits: &mut Vec<RawHit>) {
    b.body.walk(&mut |s| {
        if let StmtKind::If {
            cond,
            then_stmt,
            else_stmt: None,
        } = &s.kind
        {
            hits.push(cond_hit(
                CheckId::IfWithoutElse,
                unit,
                s,
                cond,
                first_target(unit, then_stmt),
            ));
        }
    });
}
