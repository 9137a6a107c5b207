// SPDX-License-Identifier: Apache-2.0

use std::collections::HashMap;

use super::ast::{BinaryOp, Expr, ExprKind, UnaryOp};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Symbol {
    /// Index into `DesignUnit::signals`.
    Signal(usize),
    /// Index into `DesignUnit::params`, with its evaluated value.
    Param { index: usize, value: Option<i64> },
    /// Procedural loop variable declared in a `for` header.
    LoopVar,
}

/// Per-module name table.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SymbolTable {
    entries: HashMap<String, Symbol>,
}

impl SymbolTable {
    pub fn insert(&mut self, name: impl Into<String>, sym: Symbol) {
        self.entries.insert(name.into(), sym);
    }

    pub fn get(&self, name: &str) -> Option<Symbol> {
        self.entries.get(name).copied()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    /// Resolve a possibly hierarchical/member name (`s.field` resolves
    /// through `s`).
    pub fn resolves(&self, name: &str) -> bool {
        if self.contains(name) {
            return true;
        }
        name.split_once('.').is_some_and(|(head, _)| self.contains(head))
    }

    pub fn signal(&self, name: &str) -> Option<usize> {
        match self.get(name)? {
            Symbol::Signal(i) => Some(i),
            _ => None,
        }
    }

    pub fn param_value(&self, name: &str) -> Option<i64> {
        match self.get(name)? {
            Symbol::Param { value, .. } => value,
            _ => None,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Something that can supply values for named constants.
pub trait ConstEnv {
    fn constant(&self, name: &str) -> Option<i64>;
}

impl ConstEnv for SymbolTable {
    fn constant(&self, name: &str) -> Option<i64> {
        self.param_value(name)
    }
}

impl ConstEnv for HashMap<String, i64> {
    fn constant(&self, name: &str) -> Option<i64> {
        self.get(name).copied()
    }
}

/// Evaluate a constant expression over parameters. Returns `None` for
/// anything non-constant, x/z digits, or arithmetic faults.
pub fn const_eval(expr: &Expr, env: &dyn ConstEnv) -> Option<i64> {
    match &expr.kind {
        ExprKind::Number(n) => {
            if n.has_xz && n.fill.is_none() {
                return None;
            }
            if let Some('1') = n.fill {
                return None; // width-contextual
            }
            i64::try_from(n.value).ok()
        }
        ExprKind::Ident(name) => env.constant(name),
        ExprKind::Unary { op, operand } => {
            let v = const_eval(operand, env)?;
            Some(match op {
                UnaryOp::Plus => v,
                UnaryOp::Minus => v.checked_neg()?,
                UnaryOp::LogicalNot => i64::from(v == 0),
                UnaryOp::BitNot => !v,
                UnaryOp::ReduceOr => i64::from(v != 0),
                UnaryOp::ReduceNor => i64::from(v == 0),
                _ => return None,
            })
        }
        ExprKind::Binary { op, lhs, rhs } => {
            let a = const_eval(lhs, env)?;
            let b = const_eval(rhs, env)?;
            use BinaryOp::*;
            Some(match op {
                Add => a.checked_add(b)?,
                Sub => a.checked_sub(b)?,
                Mul => a.checked_mul(b)?,
                Div => a.checked_div(b)?,
                Mod => a.checked_rem(b)?,
                Pow => a.checked_pow(u32::try_from(b).ok()?)?,
                Shl | AShl => a.checked_shl(u32::try_from(b).ok()?)?,
                Shr | AShr => a.checked_shr(u32::try_from(b).ok()?)?,
                Lt => i64::from(a < b),
                Le => i64::from(a <= b),
                Gt => i64::from(a > b),
                Ge => i64::from(a >= b),
                Eq | CaseEq | WildEq => i64::from(a == b),
                Ne | CaseNe | WildNe => i64::from(a != b),
                BitAnd => a & b,
                BitOr => a | b,
                BitXor => a ^ b,
                BitXnor => !(a ^ b),
                LogicalAnd => i64::from(a != 0 && b != 0),
                LogicalOr => i64::from(a != 0 || b != 0),
            })
        }
        ExprKind::Ternary {
            cond,
            then_expr,
            else_expr,
        } => {
            if const_eval(cond, env)? != 0 {
                const_eval(then_expr, env)
            } else {
                const_eval(else_expr, env)
            }
        }
        ExprKind::Call { name, args } if name == "$clog2" && args.len() == 1 => {
            let v = const_eval(&args[0], env)?;
            if v <= 1 {
                Some(0)
            } else {
                Some(64 - i64::from((v - 1).leading_zeros()))
            }
        }
        _ => None,
    }
}
