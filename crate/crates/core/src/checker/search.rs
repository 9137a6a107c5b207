// SPDX-License-Identifier: Apache-2.0

use std::collections::{HashMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::model::{EvalError, Role, SimModel};
use super::{Bits, CheckStatus, CheckerConfig, SearchMode, Trace, TraceCycle};
use crate::assertion::PropertySpec;
use crate::verilog::ast::{Expr, ExprKind};
use crate::verilog::lexer::mask;
use crate::verilog::parse_expr;

const PAST_FNS: [&str; 5] = ["$stable", "$changed", "$past", "$rose", "$fell"];

/// A parsed property, checked against the model's names.
struct Compiled {
    disable: Option<Expr>,
    antecedent: Expr,
    consequent: Expr,
    /// Arguments of sampled-value calls in the consequent.
    past_args: Vec<Expr>,
}

impl Compiled {
    fn new(m: &SimModel, p: &PropertySpec) -> Result<Compiled, String> {
        if let Some((clk, edge)) = &m.clock {
            if *clk != p.clk || *edge != p.clk_sense.edge() {
                return Err(format!(
                    "property clock @({} {}) differs from design clock @({} {clk})",
                    p.clk_sense,
                    p.clk,
                    edge.keyword()
                ));
            }
        }
        let parse = |text: &str| parse_expr(text).map_err(|e| format!("cannot parse '{text}': {e}"));
        let disable = p.disable.as_deref().map(parse).transpose()?;
        let antecedent = parse(&p.antecedent)?;
        let consequent = parse(&p.consequent)?;
        for e in disable.iter().chain([&antecedent]) {
            if let Some(f) = calls(e).into_iter().find(|(n, _)| PAST_FNS.contains(&n.as_str())) {
                return Err(format!("{} outside the consequent", f.0));
            }
        }
        let past_args: Vec<Expr> = calls(&consequent)
            .into_iter()
            .filter(|(n, _)| PAST_FNS.contains(&n.as_str()))
            .filter_map(|(_, a)| a)
            .collect();
        for e in disable.iter().chain([&antecedent, &consequent]) {
            let mut bad = None;
            e.walk(&mut |x| {
                if let ExprKind::Ident(n) = &x.kind {
                    let known = m.signal(n).is_some_and(|s| s.role != Role::Local) || m.has_param(n);
                    if !known {
                        bad.get_or_insert_with(|| n.clone());
                    }
                }
            });
            if let Some(n) = bad {
                return Err(format!("'{n}' is not a signal of module {}", m.module));
            }
        }
        Ok(Compiled {
            disable,
            antecedent,
            consequent,
            past_args,
        })
    }

    fn disabled(&self, m: &SimModel, v: &[u128]) -> Result<bool, EvalError> {
        match &self.disable {
            Some(d) => Ok(m.eval(d, v, None)?.truthy()),
            None => Ok(false),
        }
    }

    /// An obligation starts at this cycle.
    fn triggers(&self, m: &SimModel, v: &[u128]) -> Result<bool, EvalError> {
        Ok(!self.disabled(m, v)? && m.eval(&self.antecedent, v, None)?.truthy())
    }

    /// The obligation from `prev` is met (or discharged) at `now`.
    fn holds(&self, m: &SimModel, prev: &[u128], now: &[u128]) -> Result<bool, EvalError> {
        if self.disabled(m, prev)? || self.disabled(m, now)? {
            return Ok(true);
        }
        Ok(m.eval(&self.consequent, now, Some(prev))?.truthy())
    }

    /// The parts of `prev` that the consequent can observe.
    fn past_key(&self, m: &SimModel, prev: &[u128]) -> Result<Vec<u128>, EvalError> {
        let mut key = Vec::new();
        for a in &self.past_args {
            let whole = match &a.kind {
                ExprKind::Ident(n) => m.signal(n).filter(|s| s.is_array()),
                _ => None,
            };
            match whole {
                Some(s) => key.extend_from_slice(&prev[s.slot..s.slot + s.len as usize]),
                None => key.push(m.eval(a, prev, None)?.v),
            }
        }
        // Disable is re-sampled on the earlier cycle as well.
        key.push(u128::from(self.disabled(m, prev)?));
        Ok(key)
    }
}

fn calls(e: &Expr) -> Vec<(String, Option<Expr>)> {
    let mut out = Vec::new();
    e.walk(&mut |x| {
        if let ExprKind::Call { name, args } = &x.kind {
            out.push((name.clone(), args.first().cloned()));
        }
    });
    out
}

/// (slot, width) fields packed into a counter, lowest first.
struct Layout(Vec<(usize, u32)>);

impl Layout {
    fn of(m: &SimModel, pick: impl Fn(&super::SimSignal) -> bool) -> Layout {
        let mut f = Vec::new();
        for s in m.signals.iter().filter(|s| pick(s)) {
            for k in 0..s.len as usize {
                f.push((s.slot + k, s.width));
            }
        }
        Layout(f)
    }

    fn bits(&self) -> u32 {
        self.0.iter().map(|(_, w)| w).sum()
    }

    fn decode(&self, mut c: u128, out: &mut [u128]) {
        for &(slot, w) in &self.0 {
            out[slot] = c & mask(w);
            c = if w >= 128 { 0 } else { c >> w };
        }
    }
}

enum Outcome {
    Violation {
        init: Vec<u128>,
        inputs: Vec<Vec<u128>>,
        cycle: u32,
    },
    Clean {
        vacuous: bool,
    },
}

struct Node {
    state: Vec<u128>,
    parent: usize,
    input: u128,
}

fn exhaustive(m: &SimModel, p: &Compiled, depth: u32) -> Result<Outcome, EvalError> {
    let inputs = Layout::of(m, |s| s.role == Role::Input);
    let unreset = Layout::of(m, |s| s.role == Role::State && s.reset_value.is_none());
    let n_inputs = 1u128 << inputs.bits();
    let base = m.initial_state(|_| 0);

    let mut nodes = Vec::new();
    let mut seen = HashSet::new();
    for c in 0..1u128 << unreset.bits() {
        let mut s = base.clone();
        unreset.decode(c, &mut s);
        if seen.insert(s.clone()) {
            nodes.push(Node {
                state: s,
                parent: usize::MAX,
                input: 0,
            });
        }
    }
    let mut level: Vec<usize> = (0..nodes.len()).collect();
    let mut cache: HashMap<(Vec<u128>, Vec<u128>), Option<u128>> = HashMap::new();
    let mut triggered = false;
    let mut buf = vec![0u128; m.slot_count()];
    let mut buf2 = vec![0u128; m.slot_count()];

    // Obligations start at cycles 0..=depth-2 so traces fit in `depth`.
    for t in 0..depth.saturating_sub(1) {
        let last = t + 2 >= depth;
        let mut next_level = Vec::new();
        for &n in &level {
            for c in 0..n_inputs {
                inputs.decode(c, &mut buf);
                let v = m.valuation(&nodes[n].state, &buf)?;
                let s_next = m.next_state(&v)?;
                if p.triggers(m, &v)? {
                    triggered = true;
                    let key = (s_next.clone(), p.past_key(m, &v)?);
                    let bad = match cache.get(&key) {
                        Some(b) => *b,
                        None => {
                            let mut found = None;
                            for c2 in 0..n_inputs {
                                inputs.decode(c2, &mut buf2);
                                let v2 = m.valuation(&s_next, &buf2)?;
                                if !p.holds(m, &v, &v2)? {
                                    found = Some(c2);
                                    break;
                                }
                            }
                            cache.insert(key, found);
                            found
                        }
                    };
                    if let Some(c2) = bad {
                        let mut path = vec![c2, c];
                        let mut k = n;
                        while nodes[k].parent != usize::MAX {
                            path.push(nodes[k].input);
                            k = nodes[k].parent;
                        }
                        path.reverse();
                        let inputs_seq = path
                            .into_iter()
                            .map(|c| {
                                let mut v = vec![0; m.slot_count()];
                                inputs.decode(c, &mut v);
                                v
                            })
                            .collect();
                        return Ok(Outcome::Violation {
                            init: nodes[k].state.clone(),
                            inputs: inputs_seq,
                            cycle: t + 1,
                        });
                    }
                }
                if !last && seen.insert(s_next.clone()) {
                    next_level.push(nodes.len());
                    nodes.push(Node {
                        state: s_next,
                        parent: n,
                        input: c,
                    });
                }
            }
        }
        if next_level.is_empty() {
            break;
        }
        level = next_level;
    }
    Ok(Outcome::Clean { vacuous: !triggered })
}

fn random(m: &SimModel, p: &Compiled, cfg: &CheckerConfig) -> Result<Outcome, EvalError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let inputs: Vec<(usize, u32)> = Layout::of(m, |s| s.role == Role::Input).0;
    let mut triggered = false;
    for _ in 0..cfg.random_trials {
        let init = m.initial_state(|_| rng.random::<u128>());
        let mut s = init.clone();
        let mut seq: Vec<Vec<u128>> = Vec::new();
        let mut prev: Option<(Vec<u128>, bool)> = None;
        for t in 0..cfg.max_depth {
            let mut inp = vec![0; m.slot_count()];
            for &(slot, w) in &inputs {
                inp[slot] = rng.random::<u128>() & mask(w);
            }
            let v = m.valuation(&s, &inp)?;
            seq.push(inp);
            if let Some((pv, true)) = &prev {
                if !p.holds(m, pv, &v)? {
                    return Ok(Outcome::Violation {
                        init,
                        inputs: seq,
                        cycle: t,
                    });
                }
            }
            let trig = p.triggers(m, &v)?;
            triggered |= trig;
            s = m.next_state(&v)?;
            prev = Some((v, trig));
        }
    }
    Ok(Outcome::Clean { vacuous: !triggered })
}

pub(super) fn element_names(s: &super::SimSignal) -> Vec<String> {
    match s.array_range {
        None => vec![s.name.clone()],
        Some((a, b)) => (0..i64::from(s.len))
            .map(|k| format!("{}[{}]", s.name, if a <= b { a + k } else { a - k }))
            .collect(),
    }
}

fn build_trace(m: &SimModel, init: &[u128], inputs: &[Vec<u128>]) -> Result<Trace, EvalError> {
    let mut cycles = Vec::new();
    let mut s = init.to_vec();
    for inp in inputs {
        let mut c = TraceCycle::default();
        for sig in &m.signals {
            let target = match sig.role {
                Role::Input => &mut c.inputs,
                Role::State => &mut c.state,
                _ => continue,
            };
            let src = if sig.role == Role::Input { inp } else { &s };
            for (k, name) in element_names(sig).into_iter().enumerate() {
                target.insert(name, Bits(src[sig.slot + k]));
            }
        }
        cycles.push(c);
        let v = m.valuation(&s, inp)?;
        s = m.next_state(&v)?;
    }
    Ok(Trace { cycles })
}

/// Settled valuations of every cycle of `trace`, starting from the state
/// recorded in its first cycle.
pub fn replay_trace(m: &SimModel, trace: &Trace) -> Result<Vec<Vec<u128>>, String> {
    let mut s = vec![0u128; m.slot_count()];
    let first = trace.cycles.first().ok_or("empty trace")?;
    let mut slots: HashMap<String, usize> = HashMap::new();
    for sig in &m.signals {
        for (k, name) in element_names(sig).into_iter().enumerate() {
            slots.insert(name, sig.slot + k);
        }
    }
    let slot_of = |name: &str| {
        slots
            .get(name)
            .copied()
            .ok_or_else(|| format!("unknown signal '{name}' in trace"))
    };
    for (name, v) in &first.state {
        s[slot_of(name)?] = v.0;
    }
    let mut out = Vec::new();
    for c in &trace.cycles {
        let mut inp = vec![0u128; m.slot_count()];
        for (name, v) in &c.inputs {
            inp[slot_of(name)?] = v.0;
        }
        let v = m.valuation(&s, &inp).map_err(|e| e.to_string())?;
        s = m.next_state(&v).map_err(|e| e.to_string())?;
        out.push(v);
    }
    Ok(out)
}

/// Search for a violation of `prop` within `cfg.max_depth` cycles.
pub fn check_property(m: &SimModel, prop: &PropertySpec, cfg: &CheckerConfig) -> CheckStatus {
    let p = match Compiled::new(m, prop) {
        Ok(p) => p,
        Err(reason) => return CheckStatus::Unsupported { reason },
    };
    let bits = m.state_bits() + m.input_bits();
    let mode = if bits <= cfg.exhaustive_bit_budget {
        SearchMode::Exhaustive
    } else {
        SearchMode::Random {
            trials: cfg.random_trials,
            seed: cfg.seed,
        }
    };
    let outcome = match mode {
        SearchMode::Exhaustive => exhaustive(m, &p, cfg.max_depth),
        SearchMode::Random { .. } => random(m, &p, cfg),
    };
    let unsupported = |e: &dyn std::fmt::Display| CheckStatus::Unsupported { reason: e.to_string() };
    match outcome {
        Err(e) => unsupported(&e),
        Ok(Outcome::Clean { vacuous }) => CheckStatus::NotFalsified {
            depth: cfg.max_depth,
            mode,
            vacuous,
        },
        Ok(Outcome::Violation { init, inputs, cycle }) => {
            let trace = match build_trace(m, &init, &inputs) {
                Ok(t) => t,
                Err(e) => return unsupported(&e),
            };
            match confirm(m, &p, &trace, cycle) {
                Ok(true) => CheckStatus::Falsified { trace, cycle, mode },
                Ok(false) => unsupported(&"counterexample did not replay"),
                Err(e) => unsupported(&e),
            }
        }
    }
}

fn confirm(m: &SimModel, p: &Compiled, trace: &Trace, cycle: u32) -> Result<bool, String> {
    let vals = replay_trace(m, trace)?;
    let t = cycle as usize;
    if t == 0 || t >= vals.len() {
        return Ok(false);
    }
    let e = |x: EvalError| x.to_string();
    Ok(p.triggers(m, &vals[t - 1]).map_err(e)? && !p.holds(m, &vals[t - 1], &vals[t]).map_err(e)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assertion::ClockSense;
    use crate::checker::elaborate;
    use crate::verilog::parse_str;

    fn model(src: &str) -> SimModel {
        elaborate(&parse_str(src, "t.v").units.remove(0)).unwrap()
    }

    fn prop(disable: Option<&str>, a: &str, c: &str) -> PropertySpec {
        PropertySpec {
            clk_sense: ClockSense::Posedge,
            clk: "clk".into(),
            disable: disable.map(String::from),
            antecedent: a.into(),
            consequent: c.into(),
        }
    }

    const LOCKED_REG: &str = "module m(input clk, input rst, input lock, input we, input [1:0] d);
        reg [1:0] r;
        always @(posedge clk) if (rst) r <= 2'd0; else if (we) r <= d;
        endmodule";

    #[test]
    fn unguarded_write_is_falsified_with_short_trace() {
        let m = model(LOCKED_REG);
        let st = check_property(
            &m,
            &prop(Some("rst"), "lock == '1", "$stable(r)"),
            &CheckerConfig::default(),
        );
        let CheckStatus::Falsified { trace, cycle, mode } = st else {
            panic!("{st:?}")
        };
        assert_eq!(mode, SearchMode::Exhaustive);
        assert_eq!(cycle, 1);
        assert_eq!(trace.cycles.len(), 2);
        assert_eq!(trace.cycles[0].state["r"], Bits(0));
        assert_eq!(trace.cycles[0].inputs["we"], Bits(1));
        assert_ne!(trace.cycles[0].inputs["d"], Bits(0));
    }

    #[test]
    fn guarded_write_holds() {
        let src = LOCKED_REG.replace("else if (we)", "else if (we && !lock)");
        let st = check_property(
            &model(&src),
            &prop(Some("rst"), "lock", "$stable(r)"),
            &CheckerConfig::default(),
        );
        assert!(matches!(st, CheckStatus::NotFalsified { vacuous: false, .. }), "{st:?}");
    }

    #[test]
    fn false_antecedent_is_vacuous() {
        let st = check_property(
            &model(LOCKED_REG),
            &prop(None, "1'b0", "$stable(r)"),
            &CheckerConfig::default(),
        );
        assert!(matches!(st, CheckStatus::NotFalsified { vacuous: true, .. }), "{st:?}");
    }

    #[test]
    fn deep_violation_needs_depth() {
        let src = "module m(input clk, input go); reg [2:0] c = 3'd0;
            always @(posedge clk) if (go) c <= c + 3'd1; endmodule";
        let p = prop(None, "c == 3'd4", "c == 3'd4");
        let shallow = CheckerConfig {
            max_depth: 5,
            ..Default::default()
        };
        assert!(!check_property(&model(src), &p, &shallow).is_falsified());
        let st = check_property(&model(src), &p, &CheckerConfig::default());
        let CheckStatus::Falsified { cycle, .. } = st else {
            panic!("{st:?}")
        };
        assert_eq!(cycle, 5);
    }

    #[test]
    fn random_mode_finds_wide_violation() {
        let src = "module m(input clk, input rst, input lock, input we, input [31:0] d);
            reg [31:0] r;
            always @(posedge clk) if (rst) r <= 32'd0; else if (we) r <= d;
            endmodule";
        let cfg = CheckerConfig {
            seed: 7,
            ..Default::default()
        };
        let st = check_property(&model(src), &prop(Some("rst"), "lock", "$stable(r)"), &cfg);
        let CheckStatus::Falsified { mode, .. } = st else {
            panic!("{st:?}")
        };
        assert_eq!(
            mode,
            SearchMode::Random {
                trials: 10_000,
                seed: 7
            }
        );
        assert_eq!(
            check_property(&model(src), &prop(Some("rst"), "lock", "$stable(r)"), &cfg),
            st
        );
    }

    #[test]
    fn unknown_names_and_clock_mismatch_are_unsupported() {
        let m = model(LOCKED_REG);
        let st = check_property(&m, &prop(None, "nope", "$stable(r)"), &CheckerConfig::default());
        assert!(matches!(st, CheckStatus::Unsupported { .. }));
        let mut p = prop(None, "lock", "$stable(r)");
        p.clk = "clk2".into();
        assert!(matches!(
            check_property(&m, &p, &CheckerConfig::default()),
            CheckStatus::Unsupported { .. }
        ));
    }

    #[test]
    fn stable_compares_whole_arrays() {
        let src = "module m(input clk, input we, input a, input d); reg mem [0:1];
            always @(posedge clk) if (we) mem[a] <= d; endmodule";
        let st = check_property(
            &model(src),
            &prop(None, "1'b1", "$stable(mem)"),
            &CheckerConfig::default(),
        );
        assert!(st.is_falsified(), "{st:?}");
    }
}
