// SPDX-License-Identifier: Apache-2.0

//! Canonical Verilog text for AST nodes. Parentheses are emitted only where
//! precedence requires them, so rendering a re-parsed rendering is stable.

use std::fmt::Write;

use super::ast::*;

pub fn render_expr(e: &Expr) -> String {
    let mut s = String::new();
    expr_into(e, &mut s);
    s
}

fn precedence(e: &Expr) -> u8 {
    match &e.kind {
        ExprKind::Ternary { .. } => 1,
        ExprKind::Binary { op, .. } => op.precedence(),
        _ => u8::MAX,
    }
}

fn paren_if(e: &Expr, cond: bool, out: &mut String) {
    if cond {
        out.push('(');
        expr_into(e, out);
        out.push(')');
    } else {
        expr_into(e, out);
    }
}

fn list_into(items: &[Expr], out: &mut String) {
    for (i, it) in items.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        expr_into(it, out);
    }
}

fn expr_into(e: &Expr, out: &mut String) {
    match &e.kind {
        ExprKind::Ident(n) => out.push_str(n),
        ExprKind::Number(n) => out.push_str(&n.render()),
        ExprKind::Index { base, index } => {
            base_into(base, out);
            out.push('[');
            expr_into(index, out);
            out.push(']');
        }
        ExprKind::PartSelect { base, msb, lsb } => {
            base_into(base, out);
            out.push('[');
            expr_into(msb, out);
            out.push(':');
            expr_into(lsb, out);
            out.push(']');
        }
        ExprKind::IndexedPartSelect {
            base,
            start,
            width,
            ascending,
        } => {
            base_into(base, out);
            out.push('[');
            expr_into(start, out);
            out.push_str(if *ascending { " +: " } else { " -: " });
            expr_into(width, out);
            out.push(']');
        }
        ExprKind::Concat(items) => {
            out.push('{');
            list_into(items, out);
            out.push('}');
        }
        ExprKind::Replication { count, items } => {
            out.push('{');
            paren_if(count, precedence(count) != u8::MAX, out);
            out.push('{');
            list_into(items, out);
            out.push_str("}}");
        }
        ExprKind::Unary { op, operand } => {
            out.push_str(op.symbol());
            let wrap = !matches!(
                operand.kind,
                ExprKind::Ident(_)
                    | ExprKind::Number(_)
                    | ExprKind::Index { .. }
                    | ExprKind::PartSelect { .. }
                    | ExprKind::IndexedPartSelect { .. }
                    | ExprKind::Concat(_)
                    | ExprKind::Replication { .. }
                    | ExprKind::Call { .. }
            );
            paren_if(operand, wrap, out);
        }
        ExprKind::Binary { op, lhs, rhs } => {
            let p = op.precedence();
            paren_if(lhs, precedence(lhs) < p, out);
            out.push(' ');
            out.push_str(op.symbol());
            out.push(' ');
            paren_if(rhs, precedence(rhs) <= p, out);
        }
        ExprKind::Ternary {
            cond,
            then_expr,
            else_expr,
        } => {
            paren_if(cond, precedence(cond) <= 1, out);
            out.push_str(" ? ");
            expr_into(then_expr, out);
            out.push_str(" : ");
            expr_into(else_expr, out);
        }
        ExprKind::Call { name, args } => {
            out.push_str(name);
            if !(args.is_empty() && name.starts_with('$')) {
                out.push('(');
                list_into(args, out);
                out.push(')');
            }
        }
    }
}

fn base_into(base: &Expr, out: &mut String) {
    let plain = matches!(
        base.kind,
        ExprKind::Ident(_)
            | ExprKind::Index { .. }
            | ExprKind::PartSelect { .. }
            | ExprKind::IndexedPartSelect { .. }
            | ExprKind::Concat(_)
            | ExprKind::Replication { .. }
    );
    paren_if(base, !plain, out);
}

/// Whether a trailing `else` after `s` would bind to an `if` inside `s`.
fn ends_with_open_if(s: &Stmt) -> bool {
    match &s.kind {
        StmtKind::If { else_stmt: None, .. } => true,
        StmtKind::If { else_stmt: Some(e), .. } => ends_with_open_if(e),
        StmtKind::For { body, .. } => ends_with_open_if(body),
        _ => false,
    }
}

fn simple_stmt(s: &Stmt) -> String {
    match &s.kind {
        StmtKind::BlockingAssign { lhs, rhs } => {
            format!("{} = {}", render_expr(lhs), render_expr(rhs))
        }
        StmtKind::NonblockingAssign { lhs, rhs } => {
            format!("{} <= {}", render_expr(lhs), render_expr(rhs))
        }
        _ => String::new(),
    }
}

pub fn render_stmt(s: &Stmt, indent: usize) -> String {
    let mut out = String::new();
    stmt_into(s, indent, &mut out);
    out
}

fn pad(indent: usize, out: &mut String) {
    for _ in 0..indent {
        out.push_str("  ");
    }
}

fn stmt_into(s: &Stmt, indent: usize, out: &mut String) {
    pad(indent, out);
    match &s.kind {
        StmtKind::BlockingAssign { .. } | StmtKind::NonblockingAssign { .. } => {
            out.push_str(&simple_stmt(s));
            out.push_str(";\n");
        }
        StmtKind::Null => out.push_str(";\n"),
        StmtKind::SystemTask { name, args } => {
            out.push_str(name);
            if !args.is_empty() {
                out.push('(');
                list_into(args, out);
                out.push(')');
            }
            out.push_str(";\n");
        }
        StmtKind::Block { label, stmts } => {
            out.push_str("begin");
            if let Some(l) = label {
                let _ = write!(out, " : {l}");
            }
            out.push('\n');
            for st in stmts {
                stmt_into(st, indent + 1, out);
            }
            pad(indent, out);
            out.push_str("end\n");
        }
        StmtKind::If {
            cond,
            then_stmt,
            else_stmt,
        } => {
            let _ = writeln!(out, "if ({})", render_expr(cond));
            let guard = else_stmt.is_some() && ends_with_open_if(then_stmt);
            if guard {
                pad(indent + 1, out);
                out.push_str("begin\n");
                stmt_into(then_stmt, indent + 2, out);
                pad(indent + 1, out);
                out.push_str("end\n");
            } else {
                stmt_into(then_stmt, indent + 1, out);
            }
            if let Some(e) = else_stmt {
                pad(indent, out);
                out.push_str("else\n");
                stmt_into(e, indent + 1, out);
            }
        }
        StmtKind::Case {
            kind,
            selector,
            items,
            default,
        } => {
            let _ = writeln!(out, "{} ({})", kind.keyword(), render_expr(selector));
            for it in items {
                pad(indent + 1, out);
                list_into(&it.labels, out);
                out.push_str(":\n");
                stmt_into(&it.body, indent + 2, out);
            }
            if let Some(d) = default {
                pad(indent + 1, out);
                out.push_str("default:\n");
                stmt_into(d, indent + 2, out);
            }
            pad(indent, out);
            out.push_str("endcase\n");
        }
        StmtKind::For { init, cond, step, body } => {
            let _ = writeln!(
                out,
                "for ({}; {}; {})",
                simple_stmt(init),
                render_expr(cond),
                simple_stmt(step)
            );
            stmt_into(body, indent + 1, out);
        }
    }
}

fn range_text(s: &SignalDecl) -> String {
    match (&s.range, s.resolved) {
        (Some(r), _) => format!("[{}:{}] ", render_expr(&r.msb), render_expr(&r.lsb)),
        (None, true) if s.msb != 0 || s.lsb != 0 => format!("[{}:{}] ", s.msb, s.lsb),
        _ => String::new(),
    }
}

fn connections(conns: &[PortConnection]) -> String {
    conns
        .iter()
        .map(|c| match (&c.port, &c.expr) {
            (Some(p), _) if p == "*" => ".*".to_string(),
            (Some(p), Some(e)) => format!(".{p}({})", render_expr(e)),
            (Some(p), None) => format!(".{p}()"),
            (None, Some(e)) => render_expr(e),
            (None, None) => String::new(),
        })
        .collect::<Vec<_>>()
        .join(", ")
}

/// Render a whole module in a canonical non-ANSI form.
pub fn render_unit(u: &DesignUnit) -> String {
    let mut out = String::new();
    let ports: Vec<&str> = u.ports.iter().map(|p| p.name.as_str()).collect();
    if ports.is_empty() {
        let _ = writeln!(out, "module {};", u.name);
    } else {
        let _ = writeln!(out, "module {}({});", u.name, ports.join(", "));
    }
    for p in &u.params {
        let kw = if p.local { "localparam" } else { "parameter" };
        let _ = writeln!(out, "  {kw} {} = {};", p.name, render_expr(&p.value));
    }
    for s in &u.signals {
        let kw = match s.kind {
            SignalKind::Wire => "wire",
            SignalKind::Reg => "reg",
            SignalKind::Logic => "logic",
            SignalKind::Input => "input",
            SignalKind::Output => "output",
            SignalKind::Inout => "inout",
        };
        let _ = write!(out, "  {kw} {}{}", range_text(s), s.name);
        if let Some((a, b)) = s.array_range {
            let _ = write!(out, " [{a}:{b}]");
        }
        if let Some(init) = &s.init {
            let _ = write!(out, " = {}", render_expr(init));
        }
        out.push_str(";\n");
    }
    for a in &u.continuous_assigns {
        let _ = writeln!(out, "  assign {} = {};", render_expr(&a.lhs), render_expr(&a.rhs));
    }
    for b in &u.always_blocks {
        out.push_str("  ");
        out.push_str(b.kind.keyword());
        match (&b.kind, &b.sensitivity) {
            (AlwaysKind::AlwaysComb | AlwaysKind::AlwaysLatch, _) => {}
            (_, Sensitivity::Star) => out.push_str(" @*"),
            (_, Sensitivity::List(items)) => {
                let parts: Vec<String> = items
                    .iter()
                    .map(|i| match i.edge {
                        Some(e) => format!("{} {}", e.keyword(), render_expr(&i.expr)),
                        None => render_expr(&i.expr),
                    })
                    .collect();
                let _ = write!(out, " @({})", parts.join(" or "));
            }
        }
        out.push('\n');
        stmt_into(&b.body, 2, &mut out);
    }
    for s in &u.initial_blocks {
        out.push_str("  initial\n");
        stmt_into(s, 2, &mut out);
    }
    for inst in &u.instances {
        let params = if inst.params.is_empty() {
            String::new()
        } else {
            format!(" #({})", connections(&inst.params))
        };
        let _ = writeln!(
            out,
            "  {}{params} {} ({});",
            inst.module_name,
            inst.name,
            connections(&inst.port_connections)
        );
    }
    out.push_str("endmodule\n");
    out
}
