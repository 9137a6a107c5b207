// SPDX-License-Identifier: Apache-2.0

//! WebAssembly bindings for the browser demo. Each export takes Verilog
//! text plus an asset list in the same JSON shape a model would return, and
//! answers with a JSON string.

use wasm_bindgen::prelude::*;

pub mod api {
    use rtlscan_core::assertion::{populate_assertions, render_sva_file, PopulatedAssertion};
    use rtlscan_core::checker::{check_assertions, elaborate, render_vcd, CheckStatus, CheckerConfig};
    use rtlscan_core::llm::parse_asset_response;
    use rtlscan_core::verilog::{parse_str, DesignUnit, ParseOutput};
    use rtlscan_core::{CweId, Diagnostic, Strategy};
    use serde::Serialize;
    use serde_json::{json, Value};

    fn cwe_for(n: u32, want: Strategy) -> Result<CweId, String> {
        let cwe = CweId::from_number(n).map_err(|e| e.to_string())?;
        if cwe.strategy() != want {
            return Err(format!("CWE-{n} does not use the {want:?} strategy"));
        }
        Ok(cwe)
    }

    fn notes(d: &[Diagnostic]) -> Vec<String> {
        d.iter().map(ToString::to_string).collect()
    }

    fn pick<'a>(parsed: &'a ParseOutput, module: &str) -> Result<&'a DesignUnit, String> {
        let found = if module.is_empty() {
            parsed.units.first()
        } else {
            parsed.units.iter().find(|u| u.name == module)
        };
        found.ok_or_else(|| match module {
            "" => "no module in source".to_string(),
            m => format!("no module named {m}"),
        })
    }

    fn to_string(v: &impl Serialize) -> String {
        serde_json::to_string_pretty(v).expect("values serialize")
    }

    /// Lint-strategy violations of `source` for CWE 1191 or 1300.
    pub fn lint(source: &str, cwe: u32, assets: &str) -> Result<String, String> {
        let cwe = cwe_for(cwe, Strategy::Lint)?;
        let parsed = parse_str(source, "input.v");
        let (assets, mut diags) = parse_asset_response(cwe, assets).map_err(|e| e.to_string())?;
        let units: Vec<&DesignUnit> = parsed.units.iter().collect();
        let (violations, d) =
            rtlscan_core::lint::run_lint_strategy(cwe, &units, &assets.signal_names()).map_err(|e| e.to_string())?;
        diags.extend(parsed.diagnostics.iter().cloned());
        diags.extend(d);
        let items: Vec<Value> = violations
            .iter()
            .map(|v| {
                json!({
                    "module": v.module,
                    "check": v.check.name(),
                    "line_no": v.line_no,
                    "statement": v.statement,
                    "lhsexpr": v.lhsexpr,
                    "security_sensitive_signal": v.security_sensitive_signal,
                })
            })
            .collect();
        Ok(to_string(&json!({"violations": items, "diagnostics": notes(&diags)})))
    }

    fn populated(
        source: &str,
        module: &str,
        cwe: u32,
        assets: &str,
    ) -> Result<(DesignUnit, Vec<PopulatedAssertion>, Vec<Diagnostic>), String> {
        let cwe = cwe_for(cwe, Strategy::Assertion)?;
        let parsed = parse_str(source, "input.v");
        let unit = pick(&parsed, module)?.clone();
        let (assets, mut diags) = parse_asset_response(cwe, assets).map_err(|e| e.to_string())?;
        diags.extend(parsed.diagnostics);
        let (a, d) = populate_assertions(&assets, &unit);
        diags.extend(d);
        Ok((unit, a, diags))
    }

    /// Bind assertion templates for CWE 1231, 1233 or 1244 and render the
    /// SVA file.
    pub fn populate(source: &str, module: &str, cwe: u32, assets: &str) -> Result<String, String> {
        let (unit, a, diags) = populated(source, module, cwe, assets)?;
        let items: Vec<Value> = a.iter().map(|x| json!({"id": x.id, "sva": x.sva_text})).collect();
        Ok(to_string(&json!({
            "assertions": items,
            "sva_file": render_sva_file(&a, &unit),
            "diagnostics": notes(&diags),
        })))
    }

    /// Populate, then search each property for a counterexample.
    pub fn check(
        source: &str,
        module: &str,
        cwe: u32,
        assets: &str,
        max_depth: u32,
        seed: u64,
    ) -> Result<String, String> {
        let (unit, a, diags) = populated(source, module, cwe, assets)?;
        let cfg = CheckerConfig {
            max_depth,
            seed,
            ..CheckerConfig::default()
        };
        let model = elaborate(&unit).ok();
        let results: Vec<Value> = a
            .iter()
            .zip(check_assertions(&unit, &a, &cfg))
            .map(|(x, r)| {
                let mut v = json!({"id": x.id, "sva": x.sva_text, "status": r.status.label()});
                match &r.status {
                    CheckStatus::Falsified { trace, cycle, .. } => {
                        v["failing_cycle"] = json!(cycle);
                        v["cycles"] = json!(trace.cycles.len());
                        if let Some(m) = &model {
                            v["vcd"] = json!(render_vcd(m, trace).unwrap_or_default());
                        }
                    }
                    CheckStatus::NotFalsified { depth, vacuous, .. } => {
                        v["depth"] = json!(depth);
                        v["vacuous"] = json!(vacuous);
                    }
                    CheckStatus::Unsupported { reason } => v["reason"] = json!(reason),
                }
                v
            })
            .collect();
        Ok(to_string(&json!({"results": results, "diagnostics": notes(&diags)})))
    }
}

fn js(r: Result<String, String>) -> Result<String, JsValue> {
    r.map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn lint(source: &str, cwe: u32, assets: &str) -> Result<String, JsValue> {
    js(api::lint(source, cwe, assets))
}

#[wasm_bindgen]
pub fn populate(source: &str, module: &str, cwe: u32, assets: &str) -> Result<String, JsValue> {
    js(api::populate(source, module, cwe, assets))
}

#[wasm_bindgen]
pub fn check(source: &str, module: &str, cwe: u32, assets: &str, max_depth: u32, seed: u64) -> Result<String, JsValue> {
    js(api::check(source, module, cwe, assets, max_depth, seed))
}

#[cfg(test)]
mod tests {
    use super::api;
    use serde_json::Value;

    const DMA: &str = "module dma(input clk_i, input rst_ni, input en, input [7:0] d, input [1:0] lk, output reg [7:0] a, output reg [7:0] b);
  always @(posedge clk_i) begin
    if (~rst_ni) begin
      a <= 8'h0;
      b <= 8'h0;
    end else if (en) begin
      if (!lk[0]) a <= d;
      b <= d;
    end
  end
endmodule
";

    const ASSETS: &str = r#"{"relevant-signals": {"security_sensitive_signals_info": [
        {"lock_signal": "lk[0]", "security_sensitive_signal": "a"},
        {"lock_signal": "lk[1]", "security_sensitive_signal": "b"}],
        "reset_conditions": "~rst_ni", "clk": "clk_i", "clk_sense": "posedge"}}"#;

    fn parse(s: String) -> Value {
        serde_json::from_str(&s).unwrap()
    }

    #[test]
    fn check_separates_guarded_from_unguarded() {
        let v = parse(api::check(DMA, "", 1233, ASSETS, 6, 0).unwrap());
        let r = v["results"].as_array().unwrap();
        assert_eq!(r[0]["status"], "not_falsified");
        assert_eq!(r[1]["status"], "falsified");
        assert!(r[1]["vcd"].as_str().unwrap().contains("$enddefinitions"));
    }

    #[test]
    fn populate_renders_a_bind_file() {
        let v = parse(api::populate(DMA, "dma", 1233, ASSETS).unwrap());
        assert_eq!(v["assertions"].as_array().unwrap().len(), 2);
        assert!(v["sva_file"].as_str().unwrap().contains("bind dma dma_props"));
    }

    #[test]
    fn lint_reports_violations() {
        let src = "module m(input [31:0] d, output reg [127:0] key);\n  always @* key = {96'h0, d};\nendmodule\n";
        let v = parse(api::lint(src, 1191, r#"{"access_control_related_signals": ["key"]}"#).unwrap());
        let viol = v["violations"].as_array().unwrap();
        assert!(!viol.is_empty());
        assert_eq!(viol[0]["lhsexpr"], "key");
    }

    #[test]
    fn strategy_mismatch_is_an_error() {
        assert!(api::lint(DMA, 1233, "{}").is_err());
        assert!(api::populate(DMA, "", 1191, "{}").is_err());
        assert!(api::populate(DMA, "nope", 1233, ASSETS).is_err());
    }
}
