// SPDX-License-Identifier: Apache-2.0

use serde::Serialize;

use super::ast::{DesignUnit, Expr, ExprKind, UnaryOp};
use super::symbols::{const_eval, Symbol};

/// Self-determined bit width of an expression.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum Width {
    Known(u32),
    Unknown(String),
}

impl Width {
    pub fn known(&self) -> Option<u32> {
        match self {
            Width::Known(w) => Some(*w),
            Width::Unknown(_) => None,
        }
    }
}

const INTEGER_WIDTH: u32 = 32;

/// Width of `expr` within `unit`. Unsized literals, fill literals (`'0`),
/// parameters and loop variables have no self-determined width here and are
/// reported as unknown.
pub fn expr_width(expr: &Expr, unit: &DesignUnit) -> Width {
    use Width::*;
    let w = |e: &Expr| expr_width(e, unit);
    match &expr.kind {
        ExprKind::Number(n) => {
            if n.fill.is_some() {
                Unknown("fill literal sized by context".into())
            } else if n.sized {
                Known(n.width.unwrap_or(INTEGER_WIDTH))
            } else {
                Unknown("unsized literal".into())
            }
        }
        ExprKind::Ident(name) => match unit.symbols.get(name) {
            Some(Symbol::Signal(i)) => match unit.signals[i].width() {
                Some(w) => Known(w),
                None => Unknown(format!("width of '{name}' is not constant")),
            },
            Some(Symbol::Param { .. }) => Unknown(format!("parameter '{name}' is unsized")),
            Some(Symbol::LoopVar) => Unknown(format!("loop variable '{name}'")),
            None => Unknown(format!("'{name}' is not declared")),
        },
        ExprKind::Index { base, .. } => {
            if let ExprKind::Ident(name) = &base.kind {
                if let Some(s) = unit.signal(name) {
                    if s.is_array {
                        return match s.width() {
                            Some(w) => Known(w),
                            None => Unknown(format!("width of '{name}' is not constant")),
                        };
                    }
                }
            }
            Known(1)
        }
        ExprKind::PartSelect { msb, lsb, .. } => {
            match (const_eval(msb, &unit.symbols), const_eval(lsb, &unit.symbols)) {
                (Some(m), Some(l)) => Known(((m - l).unsigned_abs() + 1).min(u32::MAX as u64) as u32),
                _ => Unknown("part-select bounds are not constant".into()),
            }
        }
        ExprKind::IndexedPartSelect { width, .. } => match const_eval(width, &unit.symbols) {
            Some(v) if v > 0 => Known(v.min(u32::MAX as i64) as u32),
            _ => Unknown("indexed part-select width is not constant".into()),
        },
        ExprKind::Concat(items) => sum(items.iter().map(w)),
        ExprKind::Replication { count, items } => {
            let Some(c) = const_eval(count, &unit.symbols).filter(|c| *c >= 0) else {
                return Unknown("replication count is not constant".into());
            };
            match sum(items.iter().map(w)) {
                Known(inner) => Known(inner.saturating_mul(c.min(u32::MAX as i64) as u32)),
                u => u,
            }
        }
        ExprKind::Unary { op, operand } => {
            if op.is_reduction() || *op == UnaryOp::LogicalNot {
                Known(1)
            } else {
                w(operand)
            }
        }
        ExprKind::Binary { op, lhs, rhs } => {
            if op.is_boolean() {
                Known(1)
            } else if op.is_shift() || *op == super::ast::BinaryOp::Pow {
                w(lhs)
            } else {
                max(w(lhs), w(rhs))
            }
        }
        ExprKind::Ternary {
            then_expr, else_expr, ..
        } => max(w(then_expr), w(else_expr)),
        ExprKind::Call { name, args } => match name.as_str() {
            "$signed" | "$unsigned" if args.len() == 1 => w(&args[0]),
            "$clog2" | "$bits" | "$size" | "$countones" => Known(INTEGER_WIDTH),
            "$stable" | "$rose" | "$fell" | "$changed" | "$onehot" | "$onehot0" | "$isunknown" => Known(1),
            "$past" if !args.is_empty() => w(&args[0]),
            _ => Unknown(format!("width of call '{name}' is unknown")),
        },
    }
}

fn sum(widths: impl Iterator<Item = Width>) -> Width {
    let mut total: u32 = 0;
    for w in widths {
        match w {
            Width::Known(v) => total = total.saturating_add(v),
            u => return u,
        }
    }
    Width::Known(total)
}

fn max(a: Width, b: Width) -> Width {
    match (a, b) {
        (Width::Known(x), Width::Known(y)) => Width::Known(x.max(y)),
        (Width::Unknown(r), _) | (_, Width::Unknown(r)) => Width::Unknown(r),
    }
}
