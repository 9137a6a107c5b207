// SPDX-License-Identifier: Apache-2.0

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::lexer::NumberLit;
use super::span::SourceSpan;
use super::symbols::SymbolTable;

/// A source file as loaded from disk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceFile {
    pub path: Arc<str>,
    pub text: String,
}

impl SourceFile {
    pub fn new(path: impl Into<Arc<str>>, text: impl Into<String>) -> Arc<Self> {
        Arc::new(Self {
            path: path.into(),
            text: text.into(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Input,
    Output,
    Inout,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignalKind {
    Wire,
    Reg,
    Logic,
    Input,
    Output,
    Inout,
}

/// A declared `[msb:lsb]` range, with the bounds as written.
#[derive(Debug, Clone, PartialEq)]
pub struct Range {
    pub msb: Expr,
    pub lsb: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PortDecl {
    pub name: String,
    pub direction: Direction,
    pub range: Option<Range>,
    pub span: SourceSpan,
}

/// A net or variable. `msb`/`lsb` are the resolved packed bounds (`0:0` for
/// scalars); `resolved` is false when a bound could not be evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalDecl {
    pub name: String,
    pub kind: SignalKind,
    pub msb: i64,
    pub lsb: i64,
    pub resolved: bool,
    /// The packed range as written, when one was.
    pub range: Option<Range>,
    pub is_array: bool,
    pub array_range: Option<(i64, i64)>,
    pub init: Option<Expr>,
    pub span: SourceSpan,
}

impl SignalDecl {
    pub fn width(&self) -> Option<u32> {
        self.resolved.then(|| (self.msb - self.lsb).unsigned_abs() as u32 + 1)
    }

    pub fn in_range(&self, index: i64) -> bool {
        let (lo, hi) = (self.msb.min(self.lsb), self.msb.max(self.lsb));
        (lo..=hi).contains(&index)
    }

    pub fn descending(&self) -> bool {
        self.msb >= self.lsb
    }

    pub fn array_len(&self) -> Option<u32> {
        self.array_range.map(|(a, b)| (a - b).unsigned_abs() as u32 + 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamDecl {
    pub name: String,
    pub local: bool,
    pub value: Expr,
    pub resolved: Option<i64>,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Edge {
    Posedge,
    Negedge,
}

impl Edge {
    pub fn keyword(self) -> &'static str {
        match self {
            Edge::Posedge => "posedge",
            Edge::Negedge => "negedge",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensItem {
    pub edge: Option<Edge>,
    pub expr: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Sensitivity {
    Star,
    List(Vec<SensItem>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlwaysKind {
    Always,
    AlwaysFf,
    AlwaysComb,
    AlwaysLatch,
}

impl AlwaysKind {
    pub fn keyword(self) -> &'static str {
        match self {
            AlwaysKind::Always => "always",
            AlwaysKind::AlwaysFf => "always_ff",
            AlwaysKind::AlwaysComb => "always_comb",
            AlwaysKind::AlwaysLatch => "always_latch",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlwaysBlock {
    pub kind: AlwaysKind,
    pub sensitivity: Sensitivity,
    pub body: Stmt,
    pub span: SourceSpan,
}

impl AlwaysBlock {
    /// Combinational (level-sensitive) block: `@*`, `always_comb`,
    /// `always_latch` or a sensitivity list without edges.
    pub fn is_combinational(&self) -> bool {
        match &self.sensitivity {
            Sensitivity::Star => true,
            Sensitivity::List(items) => items.iter().all(|i| i.edge.is_none()),
        }
    }

    pub fn edges(&self) -> impl Iterator<Item = (Edge, &Expr)> {
        let items: &[SensItem] = match &self.sensitivity {
            Sensitivity::Star => &[],
            Sensitivity::List(items) => items,
        };
        items.iter().filter_map(|i| i.edge.map(|e| (e, &i.expr)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assign {
    pub lhs: Expr,
    pub rhs: Expr,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PortConnection {
    /// `None` for positional connections, `Some("*")` for `.*`.
    pub port: Option<String>,
    pub expr: Option<Expr>,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub module_name: String,
    pub name: String,
    pub params: Vec<PortConnection>,
    pub port_connections: Vec<PortConnection>,
    pub span: SourceSpan,
}

/// One parsed `module ... endmodule`.
#[derive(Debug, Clone)]
pub struct DesignUnit {
    pub name: String,
    pub ports: Vec<PortDecl>,
    pub params: Vec<ParamDecl>,
    pub signals: Vec<SignalDecl>,
    pub always_blocks: Vec<AlwaysBlock>,
    pub continuous_assigns: Vec<Assign>,
    pub instances: Vec<Instance>,
    pub initial_blocks: Vec<Stmt>,
    pub symbols: SymbolTable,
    pub span: SourceSpan,
    pub source: Arc<SourceFile>,
}

impl DesignUnit {
    pub fn signal(&self, name: &str) -> Option<&SignalDecl> {
        self.symbols.signal(name).map(|i| &self.signals[i])
    }

    /// Exact source text of `span` within this unit's file.
    pub fn text(&self, span: &SourceSpan) -> &str {
        span.slice(&self.source.text)
    }

    /// The module's own source text (`module` through `endmodule`).
    pub fn module_text(&self) -> &str {
        self.text(&self.span)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum UnaryOp {
    Plus,
    Minus,
    LogicalNot,
    BitNot,
    ReduceAnd,
    ReduceNand,
    ReduceOr,
    ReduceNor,
    ReduceXor,
    ReduceXnor,
}

impl UnaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            UnaryOp::Plus => "+",
            UnaryOp::Minus => "-",
            UnaryOp::LogicalNot => "!",
            UnaryOp::BitNot => "~",
            UnaryOp::ReduceAnd => "&",
            UnaryOp::ReduceNand => "~&",
            UnaryOp::ReduceOr => "|",
            UnaryOp::ReduceNor => "~|",
            UnaryOp::ReduceXor => "^",
            UnaryOp::ReduceXnor => "~^",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Self> {
        Some(match s {
            "+" => UnaryOp::Plus,
            "-" => UnaryOp::Minus,
            "!" => UnaryOp::LogicalNot,
            "~" => UnaryOp::BitNot,
            "&" => UnaryOp::ReduceAnd,
            "~&" => UnaryOp::ReduceNand,
            "|" => UnaryOp::ReduceOr,
            "~|" => UnaryOp::ReduceNor,
            "^" => UnaryOp::ReduceXor,
            "~^" | "^~" => UnaryOp::ReduceXnor,
            _ => return None,
        })
    }

    pub fn is_reduction(self) -> bool {
        !matches!(
            self,
            UnaryOp::Plus | UnaryOp::Minus | UnaryOp::BitNot | UnaryOp::LogicalNot
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Pow,
    Shl,
    Shr,
    AShl,
    AShr,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    CaseEq,
    CaseNe,
    WildEq,
    WildNe,
    BitAnd,
    BitOr,
    BitXor,
    BitXnor,
    LogicalAnd,
    LogicalOr,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        use BinaryOp::*;
        match self {
            Add => "+",
            Sub => "-",
            Mul => "*",
            Div => "/",
            Mod => "%",
            Pow => "**",
            Shl => "<<",
            Shr => ">>",
            AShl => "<<<",
            AShr => ">>>",
            Lt => "<",
            Le => "<=",
            Gt => ">",
            Ge => ">=",
            Eq => "==",
            Ne => "!=",
            CaseEq => "===",
            CaseNe => "!==",
            WildEq => "==?",
            WildNe => "!=?",
            BitAnd => "&",
            BitOr => "|",
            BitXor => "^",
            BitXnor => "~^",
            LogicalAnd => "&&",
            LogicalOr => "||",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Self> {
        use BinaryOp::*;
        Some(match s {
            "+" => Add,
            "-" => Sub,
            "*" => Mul,
            "/" => Div,
            "%" => Mod,
            "**" => Pow,
            "<<" => Shl,
            ">>" => Shr,
            "<<<" => AShl,
            ">>>" => AShr,
            "<" => Lt,
            "<=" => Le,
            ">" => Gt,
            ">=" => Ge,
            "==" => Eq,
            "!=" => Ne,
            "===" => CaseEq,
            "!==" => CaseNe,
            "==?" => WildEq,
            "!=?" => WildNe,
            "&" => BitAnd,
            "|" => BitOr,
            "^" => BitXor,
            "~^" | "^~" => BitXnor,
            "&&" => LogicalAnd,
            "||" => LogicalOr,
            _ => return None,
        })
    }

    /// Binding power; larger binds tighter.
    pub fn precedence(self) -> u8 {
        use BinaryOp::*;
        match self {
            LogicalOr => 2,
            LogicalAnd => 3,
            BitOr => 4,
            BitXor | BitXnor => 5,
            BitAnd => 6,
            Eq | Ne | CaseEq | CaseNe | WildEq | WildNe => 7,
            Lt | Le | Gt | Ge => 8,
            Shl | Shr | AShl | AShr => 9,
            Add | Sub => 10,
            Mul | Div | Mod => 11,
            Pow => 12,
        }
    }

    /// Result is a single bit regardless of operand widths.
    pub fn is_boolean(self) -> bool {
        use BinaryOp::*;
        matches!(
            self,
            Lt | Le | Gt | Ge | Eq | Ne | CaseEq | CaseNe | WildEq | WildNe | LogicalAnd | LogicalOr
        )
    }

    pub fn is_shift(self) -> bool {
        matches!(self, BinaryOp::Shl | BinaryOp::Shr | BinaryOp::AShl | BinaryOp::AShr)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    Ident(String),
    Index {
        base: Box<Expr>,
        index: Box<Expr>,
    },
    PartSelect {
        base: Box<Expr>,
        msb: Box<Expr>,
        lsb: Box<Expr>,
    },
    /// `base[start +: width]` (`ascending`) or `base[start -: width]`.
    IndexedPartSelect {
        base: Box<Expr>,
        start: Box<Expr>,
        width: Box<Expr>,
        ascending: bool,
    },
    Concat(Vec<Expr>),
    Replication {
        count: Box<Expr>,
        items: Vec<Expr>,
    },
    Unary {
        op: UnaryOp,
        operand: Box<Expr>,
    },
    Binary {
        op: BinaryOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    Ternary {
        cond: Box<Expr>,
        then_expr: Box<Expr>,
        else_expr: Box<Expr>,
    },
    Number(NumberLit),
    /// Function or system function call (`$stable(x)`, `f(a, b)`).
    Call {
        name: String,
        args: Vec<Expr>,
    },
}

impl Expr {
    pub fn new(kind: ExprKind, span: SourceSpan) -> Self {
        Self { kind, span }
    }

    /// The identifier at the root of an lvalue-like expression
    /// (`mem[i][3:0]` → `mem`).
    pub fn base_ident(&self) -> Option<&str> {
        match &self.kind {
            ExprKind::Ident(n) => Some(n),
            ExprKind::Index { base, .. }
            | ExprKind::PartSelect { base, .. }
            | ExprKind::IndexedPartSelect { base, .. } => base.base_ident(),
            _ => None,
        }
    }

    pub fn is_concat_like(&self) -> bool {
        matches!(self.kind, ExprKind::Concat(_) | ExprKind::Replication { .. })
    }

    /// Pre-order visit of this expression and all sub-expressions.
    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a Expr)) {
        f(self);
        match &self.kind {
            ExprKind::Ident(_) | ExprKind::Number(_) => {}
            ExprKind::Index { base, index } => {
                base.walk(f);
                index.walk(f);
            }
            ExprKind::PartSelect { base, msb, lsb } => {
                base.walk(f);
                msb.walk(f);
                lsb.walk(f);
            }
            ExprKind::IndexedPartSelect { base, start, width, .. } => {
                base.walk(f);
                start.walk(f);
                width.walk(f);
            }
            ExprKind::Concat(items) => items.iter().for_each(|e| e.walk(f)),
            ExprKind::Replication { count, items } => {
                count.walk(f);
                items.iter().for_each(|e| e.walk(f));
            }
            ExprKind::Unary { operand, .. } => operand.walk(f),
            ExprKind::Binary { lhs, rhs, .. } => {
                lhs.walk(f);
                rhs.walk(f);
            }
            ExprKind::Ternary {
                cond,
                then_expr,
                else_expr,
            } => {
                cond.walk(f);
                then_expr.walk(f);
                else_expr.walk(f);
            }
            ExprKind::Call { args, .. } => args.iter().for_each(|e| e.walk(f)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseKind {
    Case,
    Casez,
    Casex,
}

impl CaseKind {
    pub fn keyword(self) -> &'static str {
        match self {
            CaseKind::Case => "case",
            CaseKind::Casez => "casez",
            CaseKind::Casex => "casex",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseItem {
    pub labels: Vec<Expr>,
    pub body: Stmt,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StmtKind {
    BlockingAssign {
        lhs: Expr,
        rhs: Expr,
    },
    NonblockingAssign {
        lhs: Expr,
        rhs: Expr,
    },
    If {
        cond: Expr,
        then_stmt: Box<Stmt>,
        /// `None` records that no `else` branch was written.
        else_stmt: Option<Box<Stmt>>,
    },
    Case {
        kind: CaseKind,
        selector: Expr,
        items: Vec<CaseItem>,
        default: Option<Box<Stmt>>,
    },
    Block {
        label: Option<String>,
        stmts: Vec<Stmt>,
    },
    For {
        init: Box<Stmt>,
        cond: Expr,
        step: Box<Stmt>,
        body: Box<Stmt>,
    },
    /// `$display(...)` and friends; ignored by analyses.
    SystemTask {
        name: String,
        args: Vec<Expr>,
    },
    Null,
}

impl Stmt {
    pub fn new(kind: StmtKind, span: SourceSpan) -> Self {
        Self { kind, span }
    }

    /// Pre-order visit of this statement and nested statements.
    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a Stmt)) {
        f(self);
        match &self.kind {
            StmtKind::If {
                then_stmt, else_stmt, ..
            } => {
                then_stmt.walk(f);
                if let Some(e) = else_stmt {
                    e.walk(f);
                }
            }
            StmtKind::Case { items, default, .. } => {
                for item in items {
                    item.body.walk(f);
                }
                if let Some(d) = default {
                    d.walk(f);
                }
            }
            StmtKind::Block { stmts, .. } => stmts.iter().for_each(|s| s.walk(f)),
            StmtKind::For { init, step, body, .. } => {
                init.walk(f);
                step.walk(f);
                body.walk(f);
            }
            _ => {}
        }
    }

    /// Visit every expression directly owned by this statement tree.
    pub fn walk_exprs<'a>(&'a self, f: &mut dyn FnMut(&'a Expr)) {
        self.walk(&mut |s| match &s.kind {
            StmtKind::BlockingAssign { lhs, rhs } | StmtKind::NonblockingAssign { lhs, rhs } => {
                f(lhs);
                f(rhs);
            }
            StmtKind::If { cond, .. } => f(cond),
            StmtKind::Case { selector, items, .. } => {
                f(selector);
                for item in items {
                    item.labels.iter().for_each(&mut *f);
                }
            }
            StmtKind::For { cond, .. } => f(cond),
            StmtKind::SystemTask { args, .. } => args.iter().for_each(&mut *f),
            StmtKind::Block { .. } | StmtKind::Null => {}
        });
    }
}
