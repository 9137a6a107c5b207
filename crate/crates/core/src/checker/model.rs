// SPDX-License-Identifier: Apache-2.0

//! Cycle model of a single-clock module and its two-state evaluator.

use std::collections::{HashMap, HashSet};

use indexmap::{IndexMap, IndexSet};
use serde::{Deserialize, Serialize};

use crate::verilog::ast::{
    AlwaysKind, BinaryOp, CaseKind, DesignUnit, Edge, Expr, ExprKind, SignalKind, Stmt, StmtKind, UnaryOp,
};
use crate::verilog::lexer::{mask, Base, NumberLit};
use crate::verilog::refs::{add_signal_refs, lvalue_targets, stmt_signal_refs};
use crate::verilog::symbols::const_eval;

/// Loop iterations allowed per `for` statement before evaluation gives up.
const LOOP_LIMIT: u32 = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    State,
    Input,
    Comb,
    Clock,
    /// Procedural loop variable; scratch storage only.
    Local,
    /// Declared but never read or written.
    Unused,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimSignal {
    pub name: String,
    pub width: u32,
    /// Element count (1 for a plain vector).
    pub len: u32,
    /// Declared packed bounds, used for bit addressing.
    pub msb: i64,
    pub lsb: i64,
    /// Declared unpacked bounds.
    pub array_range: Option<(i64, i64)>,
    pub role: Role,
    /// First slot in the value vector.
    pub slot: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reset_value: Option<Vec<u128>>,
}

impl SimSignal {
    pub fn bits(&self) -> u64 {
        u64::from(self.width) * u64::from(self.len)
    }

    pub fn is_array(&self) -> bool {
        self.array_range.is_some()
    }

    /// Bit position of declared index `i`, if in range.
    fn bit_pos(&self, i: i64) -> Option<u32> {
        let pos = if self.msb >= self.lsb {
            i - self.lsb
        } else {
            self.lsb - i
        };
        (0..i64::from(self.width)).contains(&pos).then_some(pos as u32)
    }

    /// Element slot of array index `i`, if in range.
    fn elem(&self, i: i64) -> Option<usize> {
        let (a, b) = self.array_range?;
        let off = if a <= b { i - a } else { a - i };
        (0..i64::from(self.len))
            .contains(&off)
            .then(|| self.slot + off as usize)
    }
}

#[derive(Debug, Clone)]
enum CombUnit {
    Assign { lhs: Expr, rhs: Expr },
    Block(Stmt),
}

/// An elaborated module. Values live in a flat slot vector; each signal owns
/// `len` consecutive slots.
#[derive(Debug, Clone)]
pub struct SimModel {
    pub module: String,
    pub signals: Vec<SimSignal>,
    pub clock: Option<(String, Edge)>,
    index: HashMap<String, usize>,
    params: HashMap<String, i64>,
    comb: Vec<CombUnit>,
    clocked: Vec<Stmt>,
    slots: usize,
    /// Things the model approximates (free instance outputs and the like).
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ElabError {
    #[error("multiple clocks: {0}")]
    MultipleClocks(String),
    #[error("combinational loop through {0}")]
    CombLoop(String),
    #[error("signal '{0}' is driven from both combinational and clocked logic")]
    MixedDrivers(String),
    #[error("signal '{0}' has more than one combinational driver")]
    MultipleDrivers(String),
    #[error("signal '{name}' is {width} bits; at most 128 are simulated")]
    TooWide { name: String, width: u64 },
    #[error("signal '{0}' has an unresolved width")]
    UnresolvedWidth(String),
    #[error("unsupported construct: {0}")]
    Unsupported(String),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("unknown name '{0}'")]
    UnknownName(String),
    #[error("unsupported expression: {0}")]
    Unsupported(String),
    #[error("loop exceeded {LOOP_LIMIT} iterations")]
    LoopLimit,
    #[error("input vector has {got} slots, model expects {want}")]
    Shape { got: usize, want: usize },
}

/// A value and its self-determined width.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Val {
    pub v: u128,
    pub w: u32,
}

impl Val {
    fn new(v: u128, w: u32) -> Val {
        let w = w.clamp(1, 128);
        Val { v: v & mask(w), w }
    }

    fn bool(b: bool) -> Val {
        Val { v: u128::from(b), w: 1 }
    }

    pub fn truthy(self) -> bool {
        self.v != 0
    }
}

/// Values sampled one cycle earlier, for `$stable` and friends.
pub type Past<'a> = Option<&'a [u128]>;

impl SimModel {
    pub fn signal(&self, name: &str) -> Option<&SimSignal> {
        self.index.get(name).map(|&i| &self.signals[i])
    }

    pub fn slot_count(&self) -> usize {
        self.slots
    }

    pub fn has_param(&self, name: &str) -> bool {
        self.params.contains_key(name)
    }

    pub fn with_role(&self, role: Role) -> impl Iterator<Item = &SimSignal> {
        self.signals.iter().filter(move |s| s.role == role)
    }

    pub fn state_bits(&self) -> u64 {
        self.with_role(Role::State).map(SimSignal::bits).sum()
    }

    pub fn input_bits(&self) -> u64 {
        self.with_role(Role::Input).map(SimSignal::bits).sum()
    }

    pub fn comb_len(&self) -> usize {
        self.comb.len()
    }

    /// Initial slot vector: reset values where known, else `fill(signal)`.
    pub fn initial_state(&self, mut fill: impl FnMut(&SimSignal) -> u128) -> Vec<u128> {
        let mut env = vec![0; self.slots];
        for s in self.with_role(Role::State) {
            for k in 0..s.len as usize {
                env[s.slot + k] = match &s.reset_value {
                    Some(r) => r[k],
                    None => fill(s) & mask(s.width),
                };
            }
        }
        env
    }

    /// Combinational settle: `env` holds state and inputs; comb slots are
    /// recomputed in topological order.
    pub fn settle(&self, env: &mut [u128]) -> Result<(), EvalError> {
        if env.len() != self.slots {
            return Err(EvalError::Shape {
                got: env.len(),
                want: self.slots,
            });
        }
        for s in self.with_role(Role::Comb) {
            env[s.slot..s.slot + s.len as usize].fill(0);
        }
        for unit in &self.comb {
            match unit {
                CombUnit::Assign { lhs, rhs } => {
                    let v = self.eval_rhs(rhs, lhs, env, None)?;
                    let mut w = Writes::default();
                    self.assign(lhs, v, env, &mut w)?;
                    w.apply(env);
                }
                CombUnit::Block(body) => {
                    let mut nba = Writes::default();
                    self.exec(body, env, &mut nba, true)?;
                }
            }
        }
        Ok(())
    }

    /// Next state from a settled valuation: all clocked blocks see `env` and
    /// update simultaneously.
    pub fn next_state(&self, env: &[u128]) -> Result<Vec<u128>, EvalError> {
        let mut next = vec![0; self.slots];
        for s in self.with_role(Role::State) {
            let r = s.slot..s.slot + s.len as usize;
            next[r.clone()].copy_from_slice(&env[r]);
        }
        let mut nba_all = Writes::default();
        for body in &self.clocked {
            let mut work = env.to_vec();
            let before = work.clone();
            let mut nba = Writes::default();
            self.exec(body, &mut work, &mut nba, false)?;
            for s in self.with_role(Role::State) {
                for k in s.slot..s.slot + s.len as usize {
                    if work[k] != before[k] {
                        next[k] = work[k];
                    }
                }
            }
            nba_all.0.extend(nba.0);
        }
        for (slot, m, v) in nba_all.0 {
            next[slot] = (next[slot] & !m) | (v & m);
        }
        Ok(next)
    }

    /// One clock cycle: settle `state` under `inputs`, then advance.
    /// Both vectors are full slot vectors; only state (resp. input) slots
    /// are read from each.
    pub fn step(&self, state: &[u128], inputs: &[u128]) -> Result<Vec<u128>, EvalError> {
        let env = self.valuation(state, inputs)?;
        self.next_state(&env)
    }

    /// The settled valuation of one cycle.
    pub fn valuation(&self, state: &[u128], inputs: &[u128]) -> Result<Vec<u128>, EvalError> {
        for v in [state, inputs] {
            if v.len() != self.slots {
                return Err(EvalError::Shape {
                    got: v.len(),
                    want: self.slots,
                });
            }
        }
        let mut env = vec![0; self.slots];
        for s in &self.signals {
            let r = s.slot..s.slot + s.len as usize;
            match s.role {
                Role::State => env[r.clone()].copy_from_slice(&state[r]),
                Role::Input => {
                    for k in r {
                        env[k] = inputs[k] & mask(s.width);
                    }
                }
                _ => {}
            }
        }
        self.settle(&mut env)?;
        Ok(env)
    }

    fn lookup(&self, name: &str) -> Result<&SimSignal, EvalError> {
        self.signal(name)
            .ok_or_else(|| EvalError::UnknownName(name.to_string()))
    }

    fn const_index(&self, e: &Expr, env: &[u128], past: Past) -> Result<i64, EvalError> {
        if let Some(v) = const_eval(e, &self.params) {
            return Ok(v);
        }
        let v = self.eval(e, env, past)?;
        Ok(i64::try_from(v.v).unwrap_or(i64::MAX))
    }

    /// Evaluate a right-hand side, widening fill literals to the target.
    fn eval_rhs(&self, rhs: &Expr, lhs: &Expr, env: &[u128], past: Past) -> Result<u128, EvalError> {
        if let ExprKind::Number(n) = &rhs.kind {
            if n.fill.is_some() {
                let w = self.lvalue_width(lhs, env)?;
                return Ok(fill_value(n, w));
            }
        }
        Ok(self.eval(rhs, env, past)?.v)
    }

    fn lvalue_width(&self, lhs: &Expr, env: &[u128]) -> Result<u32, EvalError> {
        Ok(match &lhs.kind {
            ExprKind::Ident(n) => self.lookup(n)?.width,
            ExprKind::Index { base, .. } => match &base.kind {
                ExprKind::Ident(n) if self.lookup(n)?.is_array() => self.lookup(n)?.width,
                _ => 1,
            },
            ExprKind::PartSelect { msb, lsb, .. } => {
                let (m, l) = (self.const_index(msb, env, None)?, self.const_index(lsb, env, None)?);
                (m - l).unsigned_abs() as u32 + 1
            }
            ExprKind::IndexedPartSelect { width, .. } => self.const_index(width, env, None)? as u32,
            ExprKind::Concat(items) => items
                .iter()
                .map(|i| self.lvalue_width(i, env))
                .sum::<Result<u32, _>>()?,
            _ => return Err(EvalError::Unsupported("assignment target".into())),
        })
    }

    /// Evaluate with self-determined widths. `past` supplies the previous
    /// cycle's valuation for sampled-value functions.
    pub fn eval(&self, e: &Expr, env: &[u128], past: Past) -> Result<Val, EvalError> {
        Ok(match &e.kind {
            ExprKind::Number(n) => match n.fill {
                Some(_) => fill_val(n, 1),
                None => Val::new(n.value, n.width.unwrap_or(32)),
            },
            ExprKind::Ident(name) => match self.signal(name) {
                Some(s) if s.is_array() => return Err(EvalError::Unsupported(format!("whole-array read of '{name}'"))),
                Some(s) => Val::new(env[s.slot], s.width),
                None => match self.params.get(name) {
                    Some(&v) => Val::new(v as u128, 32),
                    None => return Err(EvalError::UnknownName(name.clone())),
                },
            },
            ExprKind::Index { base, index } => {
                let i = self.const_index(index, env, past)?;
                if let ExprKind::Ident(n) = &base.kind {
                    let s = self.lookup(n)?;
                    if s.is_array() {
                        let v = s.elem(i).map(|slot| env[slot]).unwrap_or(0);
                        return Ok(Val::new(v, s.width));
                    }
                }
                let (v, sig) = self.eval_based(base, env, past)?;
                let pos = match sig {
                    Some(s) => s.bit_pos(i),
                    None => (0..i64::from(v.w)).contains(&i).then_some(i as u32),
                };
                Val::bool(pos.is_some_and(|p| (v.v >> p) & 1 == 1))
            }
            ExprKind::PartSelect { base, msb, lsb } => {
                let (m, l) = (self.const_index(msb, env, past)?, self.const_index(lsb, env, past)?);
                let (v, sig) = self.eval_based(base, env, past)?;
                self.select(v, sig, m, l)
            }
            ExprKind::IndexedPartSelect {
                base,
                start,
                width,
                ascending,
            } => {
                let st = self.const_index(start, env, past)?;
                let w = self.const_index(width, env, past)?.max(1);
                let (v, sig) = self.eval_based(base, env, past)?;
                let (hi, lo) = if *ascending { (st + w - 1, st) } else { (st, st - w + 1) };
                match sig {
                    Some(s) if s.msb < s.lsb => self.select(v, sig, lo, hi),
                    _ => self.select(v, sig, hi, lo),
                }
            }
            ExprKind::Concat(items) => {
                let mut acc = Val { v: 0, w: 0 };
                for it in items {
                    let x = self.eval(it, env, past)?;
                    acc = concat(acc, x)?;
                }
                acc
            }
            ExprKind::Replication { count, items } => {
                let n = const_eval(count, &self.params)
                    .ok_or_else(|| EvalError::Unsupported("non-constant replication".into()))?;
                let mut one = Val { v: 0, w: 0 };
                for it in items {
                    one = concat(one, self.eval(it, env, past)?)?;
                }
                let mut acc = Val { v: 0, w: 0 };
                for _ in 0..n.max(0) {
                    acc = concat(acc, one)?;
                }
                if acc.w == 0 {
                    Val { v: 0, w: 1 }
                } else {
                    acc
                }
            }
            ExprKind::Unary { op, operand } => {
                let x = self.eval(operand, env, past)?;
                let m = mask(x.w);
                let ones = (x.v & m).count_ones();
                match op {
                    UnaryOp::Plus => x,
                    UnaryOp::Minus => Val::new(x.v.wrapping_neg(), x.w),
                    UnaryOp::BitNot => Val::new(!x.v, x.w),
                    UnaryOp::LogicalNot => Val::bool(x.v == 0),
                    UnaryOp::ReduceAnd => Val::bool(x.v & m == m),
                    UnaryOp::ReduceNand => Val::bool(x.v & m != m),
                    UnaryOp::ReduceOr => Val::bool(x.v != 0),
                    UnaryOp::ReduceNor => Val::bool(x.v == 0),
                    UnaryOp::ReduceXor => Val::bool(!ones.is_multiple_of(2)),
                    UnaryOp::ReduceXnor => Val::bool(ones.is_multiple_of(2)),
                }
            }
            ExprKind::Binary { op, lhs, rhs } => self.binary(*op, lhs, rhs, env, past)?,
            ExprKind::Ternary {
                cond,
                then_expr,
                else_expr,
            } => {
                let c = self.eval(cond, env, past)?;
                let t = self.eval(then_expr, env, past)?;
                let f = self.eval(else_expr, env, past)?;
                let w = t.w.max(f.w);
                Val::new(if c.truthy() { t.v } else { f.v }, w)
            }
            ExprKind::Call { name, args } => self.call(name, args, env, past)?,
        })
    }

    /// Evaluate a select base, reporting the declaration that addresses it.
    fn eval_based(&self, base: &Expr, env: &[u128], past: Past) -> Result<(Val, Option<&SimSignal>), EvalError> {
        let sig = match &base.kind {
            ExprKind::Ident(n) => self.signal(n),
            ExprKind::Index { base: b, .. } => match &b.kind {
                ExprKind::Ident(n) => self.signal(n).filter(|s| s.is_array()),
                _ => None,
            },
            _ => None,
        };
        Ok((self.eval(base, env, past)?, sig))
    }

    fn select(&self, v: Val, sig: Option<&SimSignal>, m: i64, l: i64) -> Val {
        let w = (m - l).unsigned_abs() as u32 + 1;
        let mut out = 0u128;
        // Walk from the lsb-side bound towards the msb-side bound.
        let step = if m >= l { 1 } else { -1 };
        for k in 0..i64::from(w.min(128)) {
            let i = l + step * k;
            let pos = match sig {
                Some(s) => s.bit_pos(i),
                None => (0..i64::from(v.w)).contains(&i).then_some(i as u32),
            };
            if pos.is_some_and(|p| (v.v >> p) & 1 == 1) {
                out |= 1 << k;
            }
        }
        Val::new(out, w)
    }

    fn binary(&self, op: BinaryOp, lhs: &Expr, rhs: &Expr, env: &[u128], past: Past) -> Result<Val, EvalError> {
        let is_fill = |e: &Expr| matches!(&e.kind, ExprKind::Number(n) if n.fill.is_some());
        let (a, b) = match (is_fill(lhs), is_fill(rhs)) {
            (false, true) => {
                let a = self.eval(lhs, env, past)?;
                let ExprKind::Number(n) = &rhs.kind else { unreachable!() };
                (a, fill_val(n, a.w))
            }
            (true, false) => {
                let b = self.eval(rhs, env, past)?;
                let ExprKind::Number(n) = &lhs.kind else { unreachable!() };
                (fill_val(n, b.w), b)
            }
            _ => (self.eval(lhs, env, past)?, self.eval(rhs, env, past)?),
        };
        let w = a.w.max(b.w);
        use BinaryOp::*;
        Ok(match op {
            Add => Val::new(a.v.wrapping_add(b.v), w),
            Sub => Val::new(a.v.wrapping_sub(b.v), w),
            Mul => Val::new(a.v.wrapping_mul(b.v), w),
            Div => Val::new(a.v.checked_div(b.v).unwrap_or(0), w),
            Mod => Val::new(a.v.checked_rem(b.v).unwrap_or(0), w),
            Pow => Val::new(a.v.wrapping_pow(u32::try_from(b.v).unwrap_or(u32::MAX)), a.w),
            Shl | AShl => Val::new(if b.v >= 128 { 0 } else { a.v << b.v }, a.w),
            Shr | AShr => Val::new(if b.v >= 128 { 0 } else { a.v >> b.v }, a.w),
            Lt => Val::bool(a.v < b.v),
            Le => Val::bool(a.v <= b.v),
            Gt => Val::bool(a.v > b.v),
            Ge => Val::bool(a.v >= b.v),
            Eq | CaseEq | WildEq => Val::bool(a.v == b.v),
            Ne | CaseNe | WildNe => Val::bool(a.v != b.v),
            BitAnd => Val::new(a.v & b.v, w),
            BitOr => Val::new(a.v | b.v, w),
            BitXor => Val::new(a.v ^ b.v, w),
            BitXnor => Val::new(!(a.v ^ b.v), w),
            LogicalAnd => Val::bool(a.truthy() && b.truthy()),
            LogicalOr => Val::bool(a.truthy() || b.truthy()),
        })
    }

    fn call(&self, name: &str, args: &[Expr], env: &[u128], past: Past) -> Result<Val, EvalError> {
        let arg = |i: usize| {
            args.get(i)
                .ok_or_else(|| EvalError::Unsupported(format!("{name} without argument")))
        };
        match name {
            "$signed" | "$unsigned" => self.eval(arg(0)?, env, past),
            "$clog2" => {
                let v = self.eval(arg(0)?, env, past)?.v;
                let r = if v <= 1 { 0 } else { 128 - (v - 1).leading_zeros() };
                Ok(Val::new(u128::from(r), 32))
            }
            "$countones" => Ok(Val::new(u128::from(self.eval(arg(0)?, env, past)?.v.count_ones()), 32)),
            "$onehot" => Ok(Val::bool(self.eval(arg(0)?, env, past)?.v.count_ones() == 1)),
            "$onehot0" => Ok(Val::bool(self.eval(arg(0)?, env, past)?.v.count_ones() <= 1)),
            "$isunknown" => Ok(Val::bool(false)),
            "$stable" | "$changed" | "$past" | "$rose" | "$fell" => {
                let prev =
                    past.ok_or_else(|| EvalError::Unsupported(format!("{name} outside a property consequent")))?;
                let x = arg(0)?;
                match name {
                    "$past" => self.eval(x, prev, None),
                    "$rose" | "$fell" => {
                        let now = self.eval(x, env, None)?.v & 1;
                        let was = self.eval(x, prev, None)?.v & 1;
                        Ok(Val::bool(if name == "$rose" {
                            now == 1 && was == 0
                        } else {
                            now == 0 && was == 1
                        }))
                    }
                    _ => {
                        let same = self.same(x, env, prev)?;
                        Ok(Val::bool(if name == "$stable" { same } else { !same }))
                    }
                }
            }
            other => Err(EvalError::Unsupported(format!("call to {other}"))),
        }
    }

    /// Whether `x` has the same value under both valuations; whole arrays
    /// compare element-wise.
    fn same(&self, x: &Expr, a: &[u128], b: &[u128]) -> Result<bool, EvalError> {
        if let ExprKind::Ident(n) = &x.kind {
            if let Some(s) = self.signal(n).filter(|s| s.is_array()) {
                let r = s.slot..s.slot + s.len as usize;
                return Ok(a[r.clone()] == b[r]);
            }
        }
        Ok(self.eval(x, a, None)?.v == self.eval(x, b, None)?.v)
    }

    /// Resolve an assignment target into (slot, mask, value) writes.
    fn assign(&self, lhs: &Expr, value: u128, env: &[u128], out: &mut Writes) -> Result<(), EvalError> {
        match &lhs.kind {
            ExprKind::Ident(n) => {
                let s = self.lookup(n)?;
                if s.is_array() {
                    return Err(EvalError::Unsupported(format!("whole-array write of '{n}'")));
                }
                out.push(s.slot, mask(s.width), value);
            }
            ExprKind::Index { base, index } => {
                let i = self.const_index(index, env, None)?;
                match &base.kind {
                    ExprKind::Ident(n) if self.lookup(n)?.is_array() => {
                        let s = self.lookup(n)?;
                        if let Some(slot) = s.elem(i) {
                            out.push(slot, mask(s.width), value);
                        }
                    }
                    _ => {
                        let (slot, s) = self.target_slot(base, env)?;
                        if let Some(p) = s.bit_pos(i) {
                            out.push(slot, 1 << p, (value & 1) << p);
                        }
                    }
                }
            }
            ExprKind::PartSelect { base, msb, lsb } => {
                let (m, l) = (self.const_index(msb, env, None)?, self.const_index(lsb, env, None)?);
                let (slot, s) = self.target_slot(base, env)?;
                self.write_range(out, slot, s, m, l, value);
            }
            ExprKind::IndexedPartSelect {
                base,
                start,
                width,
                ascending,
            } => {
                let st = self.const_index(start, env, None)?;
                let w = self.const_index(width, env, None)?.max(1);
                let (hi, lo) = if *ascending { (st + w - 1, st) } else { (st, st - w + 1) };
                let (slot, s) = self.target_slot(base, env)?;
                if s.msb < s.lsb {
                    self.write_range(out, slot, s, lo, hi, value);
                } else {
                    self.write_range(out, slot, s, hi, lo, value);
                }
            }
            ExprKind::Concat(items) => {
                let mut shift = 0u32;
                for it in items.iter().rev() {
                    let w = self.lvalue_width(it, env)?;
                    let part = if shift >= 128 { 0 } else { value >> shift };
                    self.assign(it, part & mask(w), env, out)?;
                    shift += w;
                }
            }
            _ => return Err(EvalError::Unsupported("assignment target".into())),
        }
        Ok(())
    }

    /// The slot holding a vector target (plain signal or array element).
    fn target_slot(&self, base: &Expr, env: &[u128]) -> Result<(usize, &SimSignal), EvalError> {
        match &base.kind {
            ExprKind::Ident(n) => {
                let s = self.lookup(n)?;
                Ok((s.slot, s))
            }
            ExprKind::Index { base: b, index } => match &b.kind {
                ExprKind::Ident(n) if self.lookup(n)?.is_array() => {
                    let s = self.lookup(n)?;
                    let i = self.const_index(index, env, None)?;
                    // Out-of-range element writes land nowhere.
                    Ok((s.elem(i).unwrap_or(usize::MAX), s))
                }
                _ => Err(EvalError::Unsupported("nested select target".into())),
            },
            _ => Err(EvalError::Unsupported("assignment target".into())),
        }
    }

    fn write_range(&self, out: &mut Writes, slot: usize, s: &SimSignal, m: i64, l: i64, value: u128) {
        let w = (m - l).unsigned_abs() + 1;
        let step = if m >= l { 1 } else { -1 };
        let (mut msk, mut val) = (0u128, 0u128);
        for k in 0..w.min(128) as i64 {
            if let Some(p) = s.bit_pos(l + step * k) {
                msk |= 1 << p;
                if (value >> k) & 1 == 1 {
                    val |= 1 << p;
                }
            }
        }
        out.push(slot, msk, val);
    }

    /// Execute a procedural statement. Blocking writes land in `env`;
    /// nonblocking writes queue in `nba` (or apply immediately in
    /// combinational blocks).
    fn exec(&self, s: &Stmt, env: &mut [u128], nba: &mut Writes, comb: bool) -> Result<(), EvalError> {
        match &s.kind {
            StmtKind::BlockingAssign { lhs, rhs } => {
                let v = self.eval_rhs(rhs, lhs, env, None)?;
                let mut w = Writes::default();
                self.assign(lhs, v, env, &mut w)?;
                w.apply(env);
            }
            StmtKind::NonblockingAssign { lhs, rhs } => {
                let v = self.eval_rhs(rhs, lhs, env, None)?;
                let mut w = Writes::default();
                self.assign(lhs, v, env, &mut w)?;
                if comb {
                    w.apply(env);
                } else {
                    nba.0.extend(w.0);
                }
            }
            StmtKind::If {
                cond,
                then_stmt,
                else_stmt,
            } => {
                if self.eval(cond, env, None)?.truthy() {
                    self.exec(then_stmt, env, nba, comb)?;
                } else if let Some(e) = else_stmt {
                    self.exec(e, env, nba, comb)?;
                }
            }
            StmtKind::Case {
                kind,
                selector,
                items,
                default,
            } => {
                let sel = self.eval(selector, env, None)?;
                for it in items {
                    for l in &it.labels {
                        if self.label_matches(*kind, sel, l, env)? {
                            return self.exec(&it.body, env, nba, comb);
                        }
                    }
                }
                if let Some(d) = default {
                    self.exec(d, env, nba, comb)?;
                }
            }
            StmtKind::Block { stmts, .. } => {
                for st in stmts {
                    self.exec(st, env, nba, comb)?;
                }
            }
            StmtKind::For { init, cond, step, body } => {
                self.exec(init, env, nba, comb)?;
                let mut n = 0;
                while self.eval(cond, env, None)?.truthy() {
                    n += 1;
                    if n > LOOP_LIMIT {
                        return Err(EvalError::LoopLimit);
                    }
                    self.exec(body, env, nba, comb)?;
                    self.exec(step, env, nba, comb)?;
                }
            }
            StmtKind::SystemTask { .. } | StmtKind::Null => {}
        }
        Ok(())
    }

    fn label_matches(&self, kind: CaseKind, sel: Val, label: &Expr, env: &[u128]) -> Result<bool, EvalError> {
        let care = match (&label.kind, kind) {
            (ExprKind::Number(n), CaseKind::Casez | CaseKind::Casex) => care_mask(n, kind),
            _ => u128::MAX,
        };
        let l = self.eval(label, env, None)?;
        let w = sel.w.max(l.w);
        let m = mask(w) & care;
        Ok(sel.v & m == l.v & m)
    }
}

/// Queued (slot, mask, value) writes.
#[derive(Debug, Default)]
struct Writes(Vec<(usize, u128, u128)>);

impl Writes {
    fn push(&mut self, slot: usize, m: u128, v: u128) {
        if slot != usize::MAX {
            self.0.push((slot, m, v));
        }
    }

    fn apply(self, env: &mut [u128]) {
        for (slot, m, v) in self.0 {
            env[slot] = (env[slot] & !m) | (v & m);
        }
    }
}

fn concat(hi: Val, lo: Val) -> Result<Val, EvalError> {
    let w = hi.w + lo.w;
    if w > 128 {
        return Err(EvalError::Unsupported(format!("{w}-bit concatenation")));
    }
    let v = if lo.w >= 128 { lo.v } else { (hi.v << lo.w) | lo.v };
    Ok(Val { v, w })
}

fn fill_value(n: &NumberLit, w: u32) -> u128 {
    if n.fill == Some('1') {
        mask(w)
    } else {
        0
    }
}

fn fill_val(n: &NumberLit, w: u32) -> Val {
    Val::new(fill_value(n, w), w)
}

/// Bits of a casez/casex label that must match.
fn care_mask(n: &NumberLit, kind: CaseKind) -> u128 {
    let per = match n.base {
        Base::Binary => 1,
        Base::Octal => 3,
        Base::Hex => 4,
        Base::Decimal => return u128::MAX,
    };
    let mut care = u128::MAX;
    for (k, c) in n.digits.chars().rev().enumerate() {
        let wild = match c.to_ascii_lowercase() {
            'z' | '?' => true,
            'x' => kind == CaseKind::Casex,
            _ => false,
        };
        let shift = k as u32 * per;
        if wild && shift < 128 {
            care &= !(mask(per) << shift);
        }
    }
    care
}

/// Names written by a statement tree, split into loop variables and the rest.
fn stmt_targets(s: &Stmt, targets: &mut IndexSet<String>, loops: &mut HashSet<String>) {
    s.walk(&mut |st| match &st.kind {
        StmtKind::BlockingAssign { lhs, .. } | StmtKind::NonblockingAssign { lhs, .. } => {
            targets.extend(lvalue_targets(lhs));
        }
        StmtKind::For { init, step, .. } => {
            for x in [init, step] {
                if let StmtKind::BlockingAssign { lhs, .. } = &x.kind {
                    loops.extend(lvalue_targets(lhs));
                }
            }
        }
        _ => {}
    });
}

/// The then-branch of a leading `if (reset) ... else ...`, when it only
/// loads constants (loops over constant bounds allowed).
fn reset_branch<'a>(body: &'a Stmt, params: &HashMap<String, i64>) -> Option<&'a Stmt> {
    let mut s = body;
    while let StmtKind::Block { stmts, .. } = &s.kind {
        match stmts.as_slice() {
            [only] => s = only,
            _ => return None,
        }
    }
    let StmtKind::If {
        then_stmt,
        else_stmt: Some(_),
        ..
    } = &s.kind
    else {
        return None;
    };
    let mut loops = HashSet::new();
    then_stmt.walk(&mut |st| {
        if let StmtKind::For { init, .. } = &st.kind {
            if let StmtKind::BlockingAssign { lhs, .. } = &init.kind {
                loops.extend(lvalue_targets(lhs));
            }
        }
    });
    let is_const = |e: &Expr| {
        let mut ok = true;
        e.walk(&mut |x| match &x.kind {
            ExprKind::Ident(n) if !loops.contains(n) && !params.contains_key(n) => ok = false,
            ExprKind::Call { .. } => ok = false,
            _ => {}
        });
        ok
    };
    let mut ok = true;
    then_stmt.walk(&mut |st| match &st.kind {
        StmtKind::Block { .. } | StmtKind::For { .. } | StmtKind::Null => {}
        StmtKind::BlockingAssign { lhs, rhs } | StmtKind::NonblockingAssign { lhs, rhs } => {
            let mut idx_ok = true;
            lhs.walk(&mut |x| {
                if let ExprKind::Index { index, .. } = &x.kind {
                    idx_ok &= is_const(index);
                }
            });
            ok &= idx_ok && is_const(rhs);
        }
        _ => ok = false,
    });
    ok.then_some(&**then_stmt)
}

/// Build the cycle model of `unit`.
pub fn elaborate(unit: &DesignUnit) -> Result<SimModel, ElabError> {
    let params: HashMap<String, i64> = unit
        .params
        .iter()
        .filter_map(|p| p.resolved.map(|v| (p.name.clone(), v)))
        .collect();

    // Clock and clocked bodies.
    let mut clocks: IndexMap<String, Edge> = IndexMap::new();
    let mut clocked = Vec::new();
    let mut comb: Vec<CombUnit> = Vec::new();
    for b in &unit.always_blocks {
        if b.is_combinational() {
            if b.kind == AlwaysKind::AlwaysFf {
                return Err(ElabError::Unsupported("always_ff without clock edge".into()));
            }
            comb.push(CombUnit::Block(b.body.clone()));
            continue;
        }
        let used = stmt_signal_refs(&b.body);
        let edges: Vec<(Edge, String)> = b
            .edges()
            .filter_map(|(e, x)| x.base_ident().map(|n| (e, n.to_string())))
            .collect();
        let clk = edges
            .iter()
            .find(|(_, n)| !used.contains(n))
            .or(edges.first())
            .cloned()
            .ok_or_else(|| ElabError::Unsupported("edge on a non-signal expression".into()))?;
        if let Some(prev) = clocks.insert(clk.1.clone(), clk.0) {
            if prev != clk.0 {
                return Err(ElabError::MultipleClocks(format!("both edges of '{}'", clk.1)));
            }
        }
        clocked.push(b.body.clone());
    }
    if clocks.len() > 1 {
        let names: Vec<&str> = clocks.keys().map(String::as_str).collect();
        return Err(ElabError::MultipleClocks(names.join(", ")));
    }
    let clock = clocks.into_iter().next();

    for a in &unit.continuous_assigns {
        comb.push(CombUnit::Assign {
            lhs: a.lhs.clone(),
            rhs: a.rhs.clone(),
        });
    }

    // Drivers.
    let mut loops = HashSet::new();
    let mut seq_targets = IndexSet::new();
    for body in &clocked {
        stmt_targets(body, &mut seq_targets, &mut loops);
    }
    let mut comb_writes: Vec<IndexSet<String>> = Vec::new();
    let mut comb_reads: Vec<IndexSet<String>> = Vec::new();
    for u in &comb {
        let mut w = IndexSet::new();
        let mut r = IndexSet::new();
        match u {
            CombUnit::Assign { lhs, rhs } => {
                w.extend(lvalue_targets(lhs));
                add_signal_refs(rhs, &mut r);
                add_signal_refs(lhs, &mut r);
            }
            CombUnit::Block(body) => {
                stmt_targets(body, &mut w, &mut loops);
                r = stmt_signal_refs(body);
            }
        }
        for l in &loops {
            w.shift_remove(l);
        }
        r.retain(|n| !w.contains(n));
        comb_writes.push(w);
        comb_reads.push(r);
    }
    for l in &loops {
        seq_targets.shift_remove(l);
    }
    let mut comb_driver: HashMap<&str, usize> = HashMap::new();
    for (i, w) in comb_writes.iter().enumerate() {
        for n in w {
            if seq_targets.contains(n) {
                return Err(ElabError::MixedDrivers(n.clone()));
            }
            if comb_driver.insert(n, i).is_some() {
                return Err(ElabError::MultipleDrivers(n.clone()));
            }
        }
    }

    // Topological order of combinational units.
    let n = comb.len();
    let mut indeg = vec![0usize; n];
    let mut succ: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (j, reads) in comb_reads.iter().enumerate() {
        let mut preds: IndexSet<usize> = IndexSet::new();
        for r in reads {
            if let Some(&i) = comb_driver.get(r.as_str()) {
                if i != j {
                    preds.insert(i);
                }
            }
        }
        for i in preds {
            succ[i].push(j);
            indeg[j] += 1;
        }
    }
    let mut ready: Vec<usize> = (0..n).filter(|&i| indeg[i] == 0).rev().collect();
    let mut order = Vec::with_capacity(n);
    while let Some(i) = ready.pop() {
        order.push(i);
        for &j in succ[i].iter().rev() {
            indeg[j] -= 1;
            if indeg[j] == 0 {
                ready.push(j);
            }
        }
    }
    if order.len() < n {
        let stuck: IndexSet<&str> = (0..n)
            .filter(|i| indeg[*i] > 0)
            .flat_map(|i| comb_writes[i].iter().map(String::as_str))
            .collect();
        return Err(ElabError::CombLoop(stuck.into_iter().collect::<Vec<_>>().join(", ")));
    }
    let mut slots_by_unit: Vec<Option<CombUnit>> = comb.into_iter().map(Some).collect();
    let comb: Vec<CombUnit> = order.iter().map(|&i| slots_by_unit[i].take().unwrap()).collect();

    // Everything any logic reads.
    let mut read: HashSet<String> = comb_reads.iter().flatten().cloned().collect();
    for body in &clocked {
        read.extend(stmt_signal_refs(body));
    }
    for inst in &unit.instances {
        for c in inst.port_connections.iter().chain(&inst.params) {
            if let Some(e) = &c.expr {
                let mut s = IndexSet::new();
                add_signal_refs(e, &mut s);
                read.extend(s);
            }
        }
    }

    let mut signals = Vec::new();
    let mut index = HashMap::new();
    let mut slots = 0;
    let mut notes = Vec::new();
    for s in &unit.signals {
        let len = s.array_len().unwrap_or(1);
        let role = if clock.as_ref().is_some_and(|(c, _)| *c == s.name) {
            Role::Clock
        } else if loops.contains(&s.name) {
            Role::Local
        } else if seq_targets.contains(&s.name) {
            Role::State
        } else if comb_driver.contains_key(s.name.as_str()) {
            Role::Comb
        } else if read.contains(&s.name) || s.kind == SignalKind::Input {
            if s.kind != SignalKind::Input {
                notes.push(format!("'{}' has no driver in this module and is left free", s.name));
            }
            Role::Input
        } else {
            Role::Unused
        };
        let width = match s.width() {
            Some(w) if w > 128 && role != Role::Unused => {
                return Err(ElabError::TooWide {
                    name: s.name.clone(),
                    width: u64::from(w),
                })
            }
            Some(w) => w.min(128),
            None if role == Role::Unused => 1,
            None => return Err(ElabError::UnresolvedWidth(s.name.clone())),
        };
        index.insert(s.name.clone(), signals.len());
        signals.push(SimSignal {
            name: s.name.clone(),
            width,
            len,
            msb: s.msb,
            lsb: s.lsb,
            array_range: s.array_range,
            role,
            slot: slots,
            reset_value: None,
        });
        slots += len as usize;
    }
    for lv in &loops {
        if !index.contains_key(lv) {
            index.insert(lv.clone(), signals.len());
            signals.push(SimSignal {
                name: lv.clone(),
                width: 32,
                len: 1,
                msb: 31,
                lsb: 0,
                array_range: None,
                role: Role::Local,
                slot: slots,
                reset_value: None,
            });
            slots += 1;
        }
    }

    let mut model = SimModel {
        module: unit.name.clone(),
        signals,
        clock,
        index,
        params,
        comb,
        clocked,
        slots,
        notes,
    };
    let mut exprs: Vec<&Expr> = Vec::new();
    for b in &unit.always_blocks {
        b.body.walk_exprs(&mut |e| exprs.push(e));
    }
    for a in &unit.continuous_assigns {
        exprs.extend([&a.lhs, &a.rhs]);
    }
    if let Some(reason) = exprs.into_iter().find_map(unsupported_call) {
        return Err(ElabError::Unsupported(reason));
    }
    assign_reset_values(&mut model, unit)?;
    Ok(model)
}

fn unsupported_call(e: &Expr) -> Option<String> {
    let mut bad = None;
    e.walk(&mut |x| {
        if let ExprKind::Call { name, .. } = &x.kind {
            if !matches!(
                name.as_str(),
                "$signed" | "$unsigned" | "$clog2" | "$countones" | "$onehot" | "$onehot0"
            ) {
                bad.get_or_insert_with(|| format!("call to {name}"));
            }
        }
    });
    bad
}

/// Reset values from declarations, `initial` blocks and reset branches.
/// Each source is executed over all-zero and all-one backgrounds; slots
/// that agree are determined by it.
fn assign_reset_values(model: &mut SimModel, unit: &DesignUnit) -> Result<(), ElabError> {
    let mut sources: Vec<Stmt> = Vec::new();
    for s in &unit.signals {
        if let Some(init) = &s.init {
            let lhs = Expr::new(ExprKind::Ident(s.name.clone()), s.span.clone());
            sources.push(Stmt::new(
                StmtKind::BlockingAssign { lhs, rhs: init.clone() },
                s.span.clone(),
            ));
        }
    }
    sources.extend(unit.initial_blocks.iter().cloned());
    for b in unit.always_blocks.iter().filter(|b| !b.is_combinational()) {
        sources.extend(reset_branch(&b.body, &model.params).cloned());
    }

    let ones: Vec<u128> = {
        let mut v = vec![0; model.slots];
        for s in &model.signals {
            v[s.slot..s.slot + s.len as usize].fill(mask(s.width));
        }
        v
    };
    let mut value = vec![0u128; model.slots];
    let mut known = vec![false; model.slots];
    for src in &sources {
        let run = |bg: &[u128]| {
            let mut env = bg.to_vec();
            let mut nba = Writes::default();
            model.exec(src, &mut env, &mut nba, true).ok().map(|_| env)
        };
        let (Some(lo), Some(hi)) = (run(&vec![0; model.slots]), run(&ones)) else {
            continue;
        };
        for k in 0..model.slots {
            if lo[k] == hi[k] {
                value[k] = lo[k];
                known[k] = true;
            }
        }
    }
    for s in model.signals.iter_mut().filter(|s| s.role == Role::State) {
        let r = s.slot..s.slot + s.len as usize;
        if r.clone().all(|k| known[k]) {
            s.reset_value = Some(value[r].iter().map(|v| v & mask(s.width)).collect());
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verilog::parse_str;

    fn model(src: &str) -> Result<SimModel, ElabError> {
        elaborate(&parse_str(src, "t.v").units.remove(0))
    }

    fn set(m: &SimModel, env: &mut [u128], name: &str, v: u128) {
        env[m.signal(name).unwrap().slot] = v;
    }

    fn get(m: &SimModel, env: &[u128], name: &str) -> u128 {
        env[m.signal(name).unwrap().slot]
    }

    #[test]
    fn comb_only_module() {
        let m = model("module m(input a, input b, output y); assign y = a & b; endmodule").unwrap();
        assert_eq!(m.with_role(Role::State).count(), 0);
        assert_eq!(m.comb_len(), 1);
        let mut inp = vec![0; m.slot_count()];
        set(&m, &mut inp, "a", 1);
        set(&m, &mut inp, "b", 1);
        let env = m.valuation(&inp, &inp).unwrap();
        assert_eq!(get(&m, &env, "y"), 1);
    }

    #[test]
    fn lock_toy_steps() {
        let m = model(
            "module m(input clk, input we, input wdata); reg lock;
             always @(posedge clk) if (we) lock <= wdata; endmodule",
        )
        .unwrap();
        assert_eq!(m.clock, Some(("clk".into(), Edge::Posedge)));
        let s0 = m.initial_state(|_| 0);
        let mut inp = vec![0; m.slot_count()];
        set(&m, &mut inp, "we", 1);
        set(&m, &mut inp, "wdata", 1);
        let s1 = m.step(&s0, &inp).unwrap();
        assert_eq!(get(&m, &s1, "lock"), 1);
        set(&m, &mut inp, "we", 0);
        set(&m, &mut inp, "wdata", 0);
        assert_eq!(get(&m, &m.step(&s1, &inp).unwrap(), "lock"), 1);
    }

    #[test]
    fn comb_loop_is_rejected() {
        let err =
            model("module m(output reg a, output reg b); always @* a = b; always @* b = a; endmodule").unwrap_err();
        assert!(matches!(err, ElabError::CombLoop(_)), "{err}");
    }

    #[test]
    fn two_clocks_are_rejected() {
        let err = model(
            "module m(input c1, input c2, input d); reg a, b;
             always @(posedge c1) a <= d; always @(posedge c2) b <= d; endmodule",
        )
        .unwrap_err();
        assert!(matches!(err, ElabError::MultipleClocks(_)));
    }

    #[test]
    fn reset_branch_and_async_reset() {
        let m = model(
            "module m(input clk, input rst_n, input [3:0] d); reg [3:0] q; reg [3:0] r;
             always @(posedge clk or negedge rst_n) if (!rst_n) begin q <= 4'd9; r <= '1; end else begin q <= d; r <= q; end
             endmodule",
        )
        .unwrap();
        assert_eq!(m.signal("q").unwrap().reset_value, Some(vec![9]));
        assert_eq!(m.signal("r").unwrap().reset_value, Some(vec![15]));
        assert_eq!(m.signal("rst_n").unwrap().role, Role::Input);
        assert_eq!(m.clock.as_ref().unwrap().0, "clk");
    }

    #[test]
    fn arrays_loops_and_selects() {
        let m = model(
            "module m(input clk, input rst, input [1:0] a, input [7:0] d); reg [7:0] mem [0:3]; integer j;
             always @(posedge clk) if (rst) begin for (j = 0; j < 4; j = j + 1) mem[j] <= 8'hff; end
             else begin mem[a][3:0] <= d[7:4]; end endmodule",
        )
        .unwrap();
        assert_eq!(m.signal("j").unwrap().role, Role::Local);
        assert_eq!(m.state_bits(), 32);
        assert_eq!(m.signal("mem").unwrap().reset_value, Some(vec![0xff; 4]));
        let mut s = m.initial_state(|_| 0);
        let mut inp = vec![0; m.slot_count()];
        set(&m, &mut inp, "rst", 1);
        s = m.step(&s, &inp).unwrap();
        let base = m.signal("mem").unwrap().slot;
        assert_eq!(&s[base..base + 4], &[0xff; 4]);
        set(&m, &mut inp, "rst", 0);
        set(&m, &mut inp, "a", 2);
        set(&m, &mut inp, "d", 0x5a);
        s = m.step(&s, &inp).unwrap();
        assert_eq!(&s[base..base + 4], &[0xff, 0xff, 0xf5, 0xff]);
    }

    #[test]
    fn counter_counts() {
        let m =
            model("module m(input clk); reg [3:0] c = 4'd0; always @(posedge clk) c <= c + 1'b1; endmodule").unwrap();
        let mut s = m.initial_state(|_| 7);
        let inp = vec![0; m.slot_count()];
        for _ in 0..3 {
            s = m.step(&s, &inp).unwrap();
        }
        assert_eq!(get(&m, &s, "c"), 3);
        for _ in 0..13 {
            s = m.step(&s, &inp).unwrap();
        }
        assert_eq!(get(&m, &s, "c"), 0);
    }

    #[test]
    fn casez_wildcards() {
        let m = model(
            "module m(input [3:0] s, output reg y); always @* casez (s) 4'b1???: y = 1'b1; default: y = 1'b0; endcase endmodule",
        )
        .unwrap();
        for (v, want) in [(0b1000, 1), (0b1111, 1), (0b0111, 0)] {
            let mut inp = vec![0; m.slot_count()];
            set(&m, &mut inp, "s", v);
            assert_eq!(get(&m, &m.valuation(&inp, &inp).unwrap(), "y"), want);
        }
    }

    #[test]
    fn ascending_ranges_address_bits() {
        let m =
            model("module m(input [0:7] a, output [3:0] y, output z); assign y = a[0:3]; assign z = a[7]; endmodule")
                .unwrap();
        let mut inp = vec![0; m.slot_count()];
        set(&m, &mut inp, "a", 0b1010_0001);
        let env = m.valuation(&inp, &inp).unwrap();
        assert_eq!(get(&m, &env, "y"), 0b1010);
        assert_eq!(get(&m, &env, "z"), 1);
    }
}
