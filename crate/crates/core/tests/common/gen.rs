// SPDX-License-Identifier: Apache-2.0

//! Generators for small random Verilog modules.

use proptest::prelude::*;

// Expressions over a fixed declaration set: a, b are [7:0], c is [3:0],
// s is one bit, mem is [7:0] x 4.
pub const DECLS: &str = "input [7:0] a, input [7:0] b, input [3:0] c, input s";

pub fn leaf() -> impl Strategy<Value = String> {
    prop_oneof![
        Just("a".to_string()),
        Just("b".to_string()),
        Just("c".to_string()),
        Just("s".to_string()),
        (0u32..4).prop_map(|i| format!("mem[{i}]")),
        (0u32..10).prop_map(|i| format!("a[{i}]")),
        Just("b[0:3]".to_string()),
        (0u32..4, 0u32..4).prop_map(|(m, l)| format!("b[{}:{}]", m + 4, l)),
        (1u32..9, 0u64..256).prop_map(|(w, v)| format!("{w}'h{:x}", v & ((1 << w) - 1))),
        (0u32..100).prop_map(|v| v.to_string()),
    ]
}

pub fn expr() -> impl Strategy<Value = String> {
    leaf().prop_recursive(4, 32, 3, |inner| {
        let bin = prop::sample::select(vec![
            "+", "-", "*", "&", "|", "^", "<<", ">>", "==", "!=", "<", ">=", "&&", "||",
        ]);
        let un = prop::sample::select(vec!["~", "!", "-", "&", "|", "^"]);
        prop_oneof![
            (inner.clone(), bin, inner.clone()).prop_map(|(l, o, r)| format!("({l} {o} {r})")),
            (un, inner.clone()).prop_map(|(o, e)| format!("{o}({e})")),
            prop::collection::vec(inner.clone(), 1..4).prop_map(|v| format!("{{{}}}", v.join(", "))),
            (1u32..4, inner.clone()).prop_map(|(n, e)| format!("{{{n}{{{e}}}}}")),
            (inner.clone(), inner.clone(), inner).prop_map(|(c, t, e)| format!("({c} ? {t} : {e})")),
        ]
    })
}

pub fn lvalue() -> impl Strategy<Value = String> {
    prop_oneof![
        Just("y".to_string()),
        Just("z".to_string()),
        (0u32..4).prop_map(|i| format!("mem[{i}]")),
        (0u32..8).prop_map(|i| format!("y[{i}]")),
    ]
}

pub fn stmt() -> impl Strategy<Value = String> {
    let assign = (lvalue(), expr()).prop_map(|(l, r)| format!("{l} = {r};"));
    assign.prop_recursive(3, 16, 3, |inner| {
        prop_oneof![
            (expr(), inner.clone()).prop_map(|(c, t)| format!("if ({c}) {t}")),
            (expr(), inner.clone(), inner.clone()).prop_map(|(c, t, e)| format!("if ({c}) {t} else {e}")),
            prop::collection::vec(inner.clone(), 0..3).prop_map(|v| format!("begin {} end", v.join(" "))),
            (inner.clone(), inner.clone(), prop::option::of(inner)).prop_map(|(x, y, d)| {
                let d = d.map(|d| format!(" default: {d}")).unwrap_or_default();
                format!("case (c) 4'd0: {x} 4'd1, 4'd2: {y}{d} endcase")
            }),
        ]
    })
}

pub fn module() -> impl Strategy<Value = String> {
    (
        prop::collection::vec((lvalue(), expr()), 0..3),
        prop::collection::vec(stmt(), 0..3),
        prop::collection::vec((lvalue(), expr()), 0..2),
    )
        .prop_map(|(assigns, comb, seq)| {
            let mut m = format!(
                "module gen(input clk, {DECLS}, output reg [7:0] y, output reg [7:0] z);\n  reg [7:0] mem [0:3];\n  wire [7:0] w;\n"
            );
            for (_, r) in assigns {
                m += &format!("  assign w = {r};\n");
            }
            for s in comb {
                m += &format!("  always @* {s}\n");
            }
            for (l, r) in seq {
                m += &format!("  always @(posedge clk) {l} <= {r};\n");
            }
            m + "endmodule\n"
        })
}
