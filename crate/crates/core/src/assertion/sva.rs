// SPDX-License-Identifier: Apache-2.0

use indexmap::IndexSet;

use super::PopulatedAssertion;
use crate::verilog::ast::ExprKind;
use crate::verilog::render::render_expr;
use crate::verilog::symbols::Symbol;
use crate::verilog::{collect_signal_refs, parse_expr, DesignUnit};

fn referenced_names(a: &PopulatedAssertion) -> IndexSet<String> {
    let p = &a.property;
    let mut out = IndexSet::new();
    out.insert(p.clk.clone());
    for text in p.disable.iter().chain([&p.antecedent, &p.consequent]) {
        if let Ok(e) = parse_expr(text) {
            out.extend(collect_signal_refs(&e));
        }
    }
    out
}

/// A bindable checker module holding one labeled `assert property` per
/// distinct assertion, plus the `bind` directive attaching it to `unit`.
pub fn render_sva_file(assertions: &[PopulatedAssertion], unit: &DesignUnit) -> String {
    let mut seen = IndexSet::new();
    let distinct: Vec<&PopulatedAssertion> = assertions.iter().filter(|a| seen.insert(a.id.as_str())).collect();
    let mut names = IndexSet::new();
    for a in &distinct {
        names.extend(referenced_names(a));
    }

    let mut ports = Vec::new();
    let mut params = Vec::new();
    for s in &unit.signals {
        if !names.contains(&s.name) {
            continue;
        }
        let packed = if s.msb == s.lsb && s.range.is_none() {
            String::new()
        } else if s.resolved {
            format!(" [{}:{}]", s.msb, s.lsb)
        } else {
            let r = s.range.as_ref().expect("unresolved width has a written range");
            format!(" [{}:{}]", render_expr(&r.msb), render_expr(&r.lsb))
        };
        let unpacked = s.array_range.map(|(a, b)| format!(" [{a}:{b}]")).unwrap_or_default();
        ports.push(format!("    input logic{packed} {}{unpacked}", s.name));
    }
    for p in &unit.params {
        let used = names.contains(&p.name)
            || ports
                .iter()
                .any(|l| l.contains(&format!("[{}", p.name)) || l.contains(&format!(":{}]", p.name)));
        if used && matches!(unit.symbols.get(&p.name), Some(Symbol::Param { .. })) {
            let value = match (&p.value.kind, p.resolved) {
                (ExprKind::Number(_), _) | (_, None) => render_expr(&p.value),
                (_, Some(v)) => v.to_string(),
            };
            params.push(format!("    localparam {} = {value};", p.name));
        }
    }

    let checker = format!("{}_props", unit.name);
    let mut out = format!("// Properties bound to module {}.\n", unit.name);
    out += &format!("module {checker} (\n{}\n);\n", ports.join(",\n"));
    for p in &params {
        out += p;
        out.push('\n');
    }
    for a in &distinct {
        let body = a.sva_text.trim_end().trim_end_matches(';');
        out += &format!("    {}: assert property ({body});\n", a.id);
    }
    out += "endmodule\n\n";
    out += &format!("bind {} {checker} {checker}_i (.*);\n", unit.name);
    out
}
