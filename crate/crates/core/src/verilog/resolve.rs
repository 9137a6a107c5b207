// SPDX-License-Identifier: Apache-2.0

use std::collections::HashSet;

use super::ast::{DesignUnit, Expr, ExprKind};
use crate::diag::{DiagCode, Diagnostic};

/// One `unresolved-reference` warning per name that is used in `unit` but
/// not declared there. Package-scoped names and unexpanded macros are
/// ignored.
pub fn check_references(unit: &DesignUnit) -> Vec<Diagnostic> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    let mut visit = |e: &Expr| {
        e.walk(&mut |sub| {
            if let ExprKind::Ident(name) = &sub.kind {
                if name.contains("::") || name.starts_with('`') {
                    return;
                }
                if !unit.symbols.resolves(name) && seen.insert(name.clone()) {
                    out.push(
                        Diagnostic::warning(
                            DiagCode::UnresolvedReference,
                            format!("'{name}' is not declared in module '{}'", unit.name),
                        )
                        .with_span(sub.span.clone()),
                    );
                }
            }
        });
    };
    for a in &unit.continuous_assigns {
        visit(&a.lhs);
        visit(&a.rhs);
    }
    for b in &unit.always_blocks {
        b.body.walk_exprs(&mut visit);
        if let super::ast::Sensitivity::List(items) = &b.sensitivity {
            items.iter().for_each(|i| visit(&i.expr));
        }
    }
    for s in &unit.initial_blocks {
        s.walk_exprs(&mut visit);
    }
    for inst in &unit.instances {
        for c in &inst.port_connections {
            if let Some(e) = &c.expr {
                visit(e);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use crate::verilog::parse_str;
    use crate::DiagCode;

    #[test]
    fn reports_each_undeclared_name_once() {
        let out = parse_str(
            "module m(input a); wire b; assign b = a & c; assign b = c | d; endmodule",
            "t.v",
        );
        let names: Vec<_> = out
            .diagnostics
            .iter()
            .filter(|d| d.code == DiagCode::UnresolvedReference)
            .map(|d| d.message.split('\'').nth(1).unwrap().to_string())
            .collect();
        assert_eq!(names, ["c", "d"]);
    }
}
