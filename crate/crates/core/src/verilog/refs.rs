// SPDX-License-Identifier: Apache-2.0

use indexmap::IndexSet;

use super::ast::{Expr, ExprKind, Stmt, StmtKind};

/// Identifiers referenced by `expr`, in order of first occurrence. Call
/// names are excluded; their arguments are not.
pub fn collect_signal_refs(expr: &Expr) -> IndexSet<String> {
    let mut out = IndexSet::new();
    add_signal_refs(expr, &mut out);
    out
}

pub fn add_signal_refs(expr: &Expr, out: &mut IndexSet<String>) {
    expr.walk(&mut |e| {
        if let ExprKind::Ident(n) = &e.kind {
            out.insert(n.clone());
        }
    });
}

/// Root identifiers written by an assignment target (`{a, b[3]}` → a, b).
pub fn lvalue_targets(lhs: &Expr) -> Vec<String> {
    match &lhs.kind {
        ExprKind::Concat(items) => items.iter().flat_map(lvalue_targets).collect(),
        _ => lhs.base_ident().map(|s| vec![s.to_string()]).unwrap_or_default(),
    }
}

/// Every identifier referenced anywhere in a statement tree, in order.
pub fn stmt_signal_refs(stmt: &Stmt) -> IndexSet<String> {
    let mut out = IndexSet::new();
    stmt.walk(&mut |s| match &s.kind {
        StmtKind::BlockingAssign { lhs, rhs } | StmtKind::NonblockingAssign { lhs, rhs } => {
            add_signal_refs(lhs, &mut out);
            add_signal_refs(rhs, &mut out);
        }
        StmtKind::If { cond, .. } => add_signal_refs(cond, &mut out),
        StmtKind::Case { selector, items, .. } => {
            add_signal_refs(selector, &mut out);
            for it in items {
                it.labels.iter().for_each(|l| add_signal_refs(l, &mut out));
            }
        }
        StmtKind::For { cond, .. } => add_signal_refs(cond, &mut out),
        StmtKind::SystemTask { args, .. } => args.iter().for_each(|a| add_signal_refs(a, &mut out)),
        StmtKind::Block { .. } | StmtKind::Null => {}
    });
    out
}
