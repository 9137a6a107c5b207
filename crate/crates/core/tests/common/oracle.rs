// SPDX-License-Identifier: Apache-2.0

//! Brute-force reference for the property checker. Designs come from a tiny
//! single-width IR that the reference evaluates directly.

use proptest::prelude::*;
use rtlscan_core::assertion::{ClockSense, PropertySpec};
use rtlscan_core::checker::{check_property, elaborate, CheckStatus, CheckerConfig, Trace};
use rtlscan_core::verilog::parse_str;

#[derive(Debug, Clone)]
pub enum E {
    Reg(usize),
    In(usize),
    Wire,
    Const(u8),
    Add(Box<E>, Box<E>),
    And(Box<E>, Box<E>),
    Or(Box<E>, Box<E>),
    Xor(Box<E>, Box<E>),
    Not(Box<E>),
    Mux(Box<B>, Box<E>, Box<E>),
}

#[derive(Debug, Clone)]
pub enum B {
    Eq(E, E),
    Ne(E, E),
    And(Box<B>, Box<B>),
    Or(Box<B>, Box<B>),
    Not(Box<B>),
    Stable(usize),
}

#[derive(Debug, Clone)]
pub struct Design {
    pub width: u32,
    pub inputs: usize,
    pub init: Vec<Option<u8>>,
    pub wire: E,
    pub next: Vec<(Option<B>, E)>,
    pub disable: Option<B>,
    pub antecedent: B,
    pub consequent: B,
    pub depth: u32,
}

pub fn e_text(e: &E, w: u32) -> String {
    match e {
        E::Reg(i) => format!("r{i}"),
        E::In(i) => format!("i{i}"),
        E::Wire => "w0".into(),
        E::Const(c) => format!("{w}'d{c}"),
        E::Add(a, b) => format!("({} + {})", e_text(a, w), e_text(b, w)),
        E::And(a, b) => format!("({} & {})", e_text(a, w), e_text(b, w)),
        E::Or(a, b) => format!("({} | {})", e_text(a, w), e_text(b, w)),
        E::Xor(a, b) => format!("({} ^ {})", e_text(a, w), e_text(b, w)),
        E::Not(a) => format!("(~{})", e_text(a, w)),
        E::Mux(c, a, b) => format!("({} ? {} : {})", b_text(c, w), e_text(a, w), e_text(b, w)),
    }
}

pub fn b_text(b: &B, w: u32) -> String {
    match b {
        B::Eq(x, y) => format!("({} == {})", e_text(x, w), e_text(y, w)),
        B::Ne(x, y) => format!("({} != {})", e_text(x, w), e_text(y, w)),
        B::And(x, y) => format!("({} && {})", b_text(x, w), b_text(y, w)),
        B::Or(x, y) => format!("({} || {})", b_text(x, w), b_text(y, w)),
        B::Not(x) => format!("(!{})", b_text(x, w)),
        B::Stable(i) => format!("$stable(r{i})"),
    }
}

impl Design {
    pub fn verilog(&self) -> String {
        let w = self.width;
        let mut s = String::from("module dut(input clk");
        for i in 0..self.inputs {
            s += &format!(", input [{}:0] i{i}", w - 1);
        }
        s += ");\n";
        for (k, init) in self.init.iter().enumerate() {
            match init {
                Some(v) => s += &format!("  reg [{}:0] r{k} = {w}'d{v};\n", w - 1),
                None => s += &format!("  reg [{}:0] r{k};\n", w - 1),
            }
        }
        s += &format!("  wire [{}:0] w0;\n  assign w0 = {};\n", w - 1, e_text(&self.wire, w));
        for (k, (guard, e)) in self.next.iter().enumerate() {
            let body = format!("r{k} <= {};", e_text(e, w));
            match guard {
                Some(g) => s += &format!("  always @(posedge clk) if {} {body}\n", b_text(g, w)),
                None => s += &format!("  always @(posedge clk) {body}\n"),
            }
        }
        s + "endmodule\n"
    }

    pub fn property(&self) -> PropertySpec {
        PropertySpec {
            clk_sense: ClockSense::Posedge,
            clk: "clk".into(),
            disable: self.disable.as_ref().map(|d| b_text(d, self.width)),
            antecedent: b_text(&self.antecedent, self.width),
            consequent: b_text(&self.consequent, self.width),
        }
    }

    pub fn mask(&self) -> u64 {
        (1 << self.width) - 1
    }

    pub fn unreset_bits(&self) -> u32 {
        self.init.iter().filter(|i| i.is_none()).count() as u32 * self.width
    }

    pub fn input_bits(&self) -> u32 {
        self.inputs as u32 * self.width
    }
}

/// One evaluated cycle: registers, inputs and the wire.
#[derive(Debug, Clone)]
pub struct Cycle {
    pub regs: Vec<u64>,
    pub ins: Vec<u64>,
    pub wire: u64,
}

pub struct Reference<'a>(pub &'a Design);

impl Reference<'_> {
    pub fn e(&self, e: &E, c: &Cycle) -> u64 {
        let m = self.0.mask();
        match e {
            E::Reg(i) => c.regs[*i],
            E::In(i) => c.ins[*i],
            E::Wire => c.wire,
            E::Const(v) => u64::from(*v) & m,
            E::Add(a, b) => (self.e(a, c) + self.e(b, c)) & m,
            E::And(a, b) => self.e(a, c) & self.e(b, c),
            E::Or(a, b) => self.e(a, c) | self.e(b, c),
            E::Xor(a, b) => self.e(a, c) ^ self.e(b, c),
            E::Not(a) => !self.e(a, c) & m,
            E::Mux(s, a, b) => {
                if self.b(s, c, None) {
                    self.e(a, c)
                } else {
                    self.e(b, c)
                }
            }
        }
    }

    pub fn b(&self, b: &B, c: &Cycle, prev: Option<&Cycle>) -> bool {
        match b {
            B::Eq(x, y) => self.e(x, c) == self.e(y, c),
            B::Ne(x, y) => self.e(x, c) != self.e(y, c),
            B::And(x, y) => self.b(x, c, prev) && self.b(y, c, prev),
            B::Or(x, y) => self.b(x, c, prev) || self.b(y, c, prev),
            B::Not(x) => !self.b(x, c, prev),
            B::Stable(i) => c.regs[*i] == prev.expect("stable needs a previous cycle").regs[*i],
        }
    }

    pub fn cycle(&self, regs: &[u64], ins: &[u64]) -> Cycle {
        let mut c = Cycle {
            regs: regs.to_vec(),
            ins: ins.to_vec(),
            wire: 0,
        };
        c.wire = self.e(&self.0.wire, &c);
        c
    }

    pub fn next(&self, c: &Cycle) -> Vec<u64> {
        self.0
            .next
            .iter()
            .enumerate()
            .map(|(k, (g, e))| match g {
                Some(g) if !self.b(g, c, None) => c.regs[k],
                _ => self.e(e, c),
            })
            .collect()
    }

    pub fn disabled(&self, c: &Cycle) -> bool {
        self.0.disable.as_ref().is_some_and(|d| self.b(d, c, None))
    }

    pub fn triggers(&self, c: &Cycle) -> bool {
        !self.disabled(c) && self.b(&self.0.antecedent, c, None)
    }

    pub fn violated(&self, prev: &Cycle, now: &Cycle) -> bool {
        !(self.disabled(prev) || self.disabled(now) || self.b(&self.0.consequent, now, Some(prev)))
    }

    pub fn decode(&self, mut code: u64, n: usize) -> Vec<u64> {
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            out.push(code & self.0.mask());
            code >>= self.0.width;
        }
        out
    }

    /// Earliest failing cycle over every initial state and input sequence.
    pub fn earliest_violation(&self) -> Option<u32> {
        let d = self.0;
        let unreset: Vec<usize> = (0..d.init.len()).filter(|&k| d.init[k].is_none()).collect();
        let mut best = None;
        for code in 0..1u64 << d.unreset_bits() {
            let vals = self.decode(code, unreset.len());
            let mut regs: Vec<u64> = d.init.iter().map(|i| i.map_or(0, u64::from)).collect();
            for (k, v) in unreset.iter().zip(vals) {
                regs[*k] = v;
            }
            self.walk(&regs, None, 0, &mut best);
        }
        best
    }

    pub fn walk(&self, regs: &[u64], prev: Option<&Cycle>, t: u32, best: &mut Option<u32>) {
        if t >= self.0.depth || best.is_some_and(|b| b <= t) {
            return;
        }
        for code in 0..1u64 << self.0.input_bits() {
            let c = self.cycle(regs, &self.decode(code, self.0.inputs));
            if let Some(p) = prev {
                if self.triggers(p) && self.violated(p, &c) {
                    *best = Some(best.map_or(t, |b: u32| b.min(t)));
                    return;
                }
            }
            self.walk(&self.next(&c), Some(&c), t + 1, best);
        }
    }

    /// Whether `trace` is a run of the design ending in a violation at `cycle`.
    pub fn confirms(&self, trace: &Trace, cycle: u32) -> bool {
        let d = self.0;
        let get = |m: &indexmap::IndexMap<String, rtlscan_core::checker::Bits>, n: &str| m[n].0 as u64;
        let mut regs: Vec<u64> = (0..d.init.len())
            .map(|k| get(&trace.cycles[0].state, &format!("r{k}")))
            .collect();
        for (k, init) in d.init.iter().enumerate() {
            if let Some(v) = init {
                if regs[k] != u64::from(*v) {
                    return false;
                }
            }
        }
        let mut cycles = Vec::new();
        for tc in &trace.cycles {
            for (k, r) in regs.iter().enumerate() {
                if get(&tc.state, &format!("r{k}")) != *r {
                    return false;
                }
            }
            let ins: Vec<u64> = (0..d.inputs).map(|i| get(&tc.inputs, &format!("i{i}"))).collect();
            let c = self.cycle(&regs, &ins);
            regs = self.next(&c);
            cycles.push(c);
        }
        let t = cycle as usize;
        t >= 1 && t < cycles.len() && self.triggers(&cycles[t - 1]) && self.violated(&cycles[t - 1], &cycles[t])
    }
}

pub fn e_strat(regs: usize, inputs: usize, width: u32, with_wire: bool) -> impl Strategy<Value = E> {
    let maxc = (1u8 << width) - 1;
    let mut leaves: Vec<BoxedStrategy<E>> = vec![
        (0..regs).prop_map(E::Reg).boxed(),
        (0..inputs).prop_map(E::In).boxed(),
        (0..=maxc).prop_map(E::Const).boxed(),
    ];
    if with_wire {
        leaves.push(Just(E::Wire).boxed());
    }
    let leaf = prop::strategy::Union::new(leaves);
    leaf.prop_recursive(3, 12, 2, move |inner| {
        let cmp = (inner.clone(), inner.clone()).prop_map(|(a, b)| B::Eq(a, b));
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| E::Add(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| E::And(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| E::Or(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| E::Xor(Box::new(a), Box::new(b))),
            inner.clone().prop_map(|a| E::Not(Box::new(a))),
            (cmp, inner.clone(), inner).prop_map(|(c, a, b)| E::Mux(Box::new(c), Box::new(a), Box::new(b))),
        ]
    })
}

pub fn b_strat(e: BoxedStrategy<E>, stable_regs: usize) -> impl Strategy<Value = B> {
    let mut leaves: Vec<BoxedStrategy<B>> = vec![
        (e.clone(), e.clone()).prop_map(|(a, b)| B::Eq(a, b)).boxed(),
        (e.clone(), e).prop_map(|(a, b)| B::Ne(a, b)).boxed(),
    ];
    if stable_regs > 0 {
        leaves.push((0..stable_regs).prop_map(B::Stable).boxed());
    }
    prop::strategy::Union::new(leaves).prop_recursive(2, 6, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| B::And(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| B::Or(Box::new(a), Box::new(b))),
            inner.prop_map(|a| B::Not(Box::new(a))),
        ]
    })
}

/// At most 12 state and input bits, and enumeration small enough for the
/// reference.
pub fn design() -> impl Strategy<Value = Design> {
    (1u32..=3, 1usize..=3, 1usize..=2, 2u32..=5)
        .prop_filter("bit budget", |&(w, r, i, d)| {
            (r + i) as u32 * w <= 12 && i as u32 * w * d <= 15
        })
        .prop_flat_map(|(w, regs, inputs, depth)| {
            let maxc = (1u8 << w) - 1;
            let e = e_strat(regs, inputs, w, true).boxed();
            let e0 = e_strat(regs, inputs, w, false).boxed();
            (
                prop::collection::vec(prop::option::weighted(0.7, 0..=maxc), regs),
                e0,
                prop::collection::vec((prop::option::of(b_strat(e.clone(), 0)), e.clone()), regs),
                prop::option::weighted(0.3, b_strat(e.clone(), 0)),
                b_strat(e.clone(), 0),
                b_strat(e, regs),
                Just((w, inputs, depth)),
            )
        })
        .prop_map(
            |(init, wire, next, disable, antecedent, consequent, (width, inputs, depth))| Design {
                width,
                inputs,
                init,
                wire,
                next,
                disable,
                antecedent,
                consequent,
                depth,
            },
        )
}

pub fn run(d: &Design, cfg: &CheckerConfig) -> CheckStatus {
    let src = d.verilog();
    let parsed = parse_str(&src, "dut.v");
    assert!(parsed.diagnostics.is_empty(), "{src}\n{:?}", parsed.diagnostics);
    let model = elaborate(&parsed.units[0]).unwrap_or_else(|e| panic!("{e}\n{src}"));
    check_property(&model, &d.property(), cfg)
}

pub fn exhaustive_cfg(depth: u32) -> CheckerConfig {
    CheckerConfig {
        max_depth: depth,
        ..Default::default()
    }
}
