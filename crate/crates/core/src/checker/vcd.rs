// SPDX-License-Identifier: Apache-2.0

use std::fmt::Write;

use super::model::{Role, SimModel};
use super::search::{element_names, replay_trace};
use super::Trace;

/// Short printable identifier codes, base 94.
fn code(mut n: usize) -> String {
    let mut s = String::new();
    loop {
        s.push((b'!' + (n % 94) as u8) as char);
        n /= 94;
        if n == 0 {
            return s;
        }
        n -= 1;
    }
}

/// Value change dump of a replayed trace. Each cycle lasts 10 time units
/// with the active clock edge at the midpoint.
pub fn render_vcd(m: &SimModel, trace: &Trace) -> Result<String, String> {
    let vals = replay_trace(m, trace)?;
    let mut out = String::new();
    let _ = writeln!(out, "$timescale 1ns $end");
    let _ = writeln!(out, "$scope module {} $end", m.module);
    let mut vars = Vec::new();
    for s in m
        .signals
        .iter()
        .filter(|s| !matches!(s.role, Role::Local | Role::Unused))
    {
        for (k, name) in element_names(s).into_iter().enumerate() {
            let id = code(vars.len());
            let _ = writeln!(
                out,
                "$var wire {} {id} {} $end",
                s.width,
                name.replace(['[', ']'], "_").trim_end_matches('_')
            );
            vars.push((id, s.slot + k, s.width, s.role == Role::Clock));
        }
    }
    let _ = writeln!(out, "$upscope $end\n$enddefinitions $end");
    let negedge = m
        .clock
        .as_ref()
        .is_some_and(|(_, e)| *e == crate::verilog::ast::Edge::Negedge);
    let emit = |out: &mut String, id: &str, v: u128, w: u32| {
        if w == 1 {
            let _ = writeln!(out, "{}{id}", v & 1);
        } else {
            let _ = writeln!(out, "b{v:b} {id}");
        }
    };
    let mut last: Vec<Option<u128>> = vec![None; vars.len()];
    for (t, v) in vals.iter().enumerate() {
        let _ = writeln!(out, "#{}", t * 10);
        for (i, (id, slot, w, clk)) in vars.iter().enumerate() {
            let x = if *clk { u128::from(negedge) } else { v[*slot] };
            if last[i] != Some(x) {
                emit(&mut out, id, x, *w);
                last[i] = Some(x);
            }
        }
        let _ = writeln!(out, "#{}", t * 10 + 5);
        for (i, (id, _, w, clk)) in vars.iter().enumerate() {
            if *clk {
                let x = u128::from(!negedge);
                emit(&mut out, id, x, *w);
                last[i] = Some(x);
            }
        }
    }
    let _ = writeln!(out, "#{}", vals.len() * 10);
    Ok(out)
}
