// SPDX-License-Identifier: Apache-2.0

//! Assertion templates for the behavioural CWEs.
//!
//! An [`AssetSet`] produced by asset identification is validated against the
//! target module and bound into one SystemVerilog property per entry.

mod sva;

use std::fmt;
use std::str::FromStr;

use indexmap::{IndexMap, IndexSet};
use serde::{Deserialize, Serialize};

use crate::cwe::CweId;
use crate::diag::{DiagCode, Diagnostic, Severity};
use crate::digest::short_id;
use crate::verilog::ast::Edge;
use crate::verilog::{collect_signal_refs, parse_expr, DesignUnit, Expr, ExprKind};

pub use sva::render_sva_file;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClockSense {
    Posedge,
    Negedge,
}

impl ClockSense {
    pub fn keyword(self) -> &'static str {
        match self {
            ClockSense::Posedge => "posedge",
            ClockSense::Negedge => "negedge",
        }
    }

    pub fn edge(self) -> Edge {
        match self {
            ClockSense::Posedge => Edge::Posedge,
            ClockSense::Negedge => Edge::Negedge,
        }
    }
}

impl FromStr for ClockSense {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "posedge" | "rising" => Ok(ClockSense::Posedge),
            "negedge" | "falling" => Ok(ClockSense::Negedge),
            other => Err(format!("unknown clock sense '{other}'")),
        }
    }
}

impl fmt::Display for ClockSense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

/// A lock bit and the condition under which changing it is legal.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LockBitAsset {
    pub lock_signal: String,
    /// Legal-modification condition; the property negates it.
    pub conditions_for_lock_modification: String,
    pub clk: String,
    pub clk_sense: ClockSense,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LockPair {
    pub lock_signal: String,
    pub security_sensitive_signal: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LockProtectionAssets {
    pub pairs: Vec<LockPair>,
    pub reset_conditions: String,
    pub clk: String,
    pub clk_sense: ClockSense,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PrivilegeAsset {
    pub privilege_signal: String,
    pub conditions_for_privilege_escalation: String,
    pub reset_conditions: String,
    pub high_privilege: String,
    pub previous_privilege: String,
    pub clk: String,
    pub clk_sense: ClockSense,
}

/// Security-relevant signals identified for one CWE in one module.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssetSet {
    Cwe1191 {
        access_control_related_signals: Vec<String>,
    },
    Cwe1231 {
        lock_signals: Vec<LockBitAsset>,
    },
    Cwe1233(LockProtectionAssets),
    Cwe1244 {
        privilege_signals: Vec<PrivilegeAsset>,
    },
    Cwe1300 {
        side_channel_related_signals: Vec<String>,
    },
}

impl AssetSet {
    /// An asset set with no entries.
    pub fn empty(cwe: CweId) -> Self {
        match cwe {
            CweId::Cwe1191 => AssetSet::Cwe1191 {
                access_control_related_signals: Vec::new(),
            },
            CweId::Cwe1231 => AssetSet::Cwe1231 {
                lock_signals: Vec::new(),
            },
            CweId::Cwe1233 => AssetSet::Cwe1233(LockProtectionAssets {
                pairs: Vec::new(),
                reset_conditions: String::new(),
                clk: String::new(),
                clk_sense: ClockSense::Posedge,
            }),
            CweId::Cwe1244 => AssetSet::Cwe1244 {
                privilege_signals: Vec::new(),
            },
            CweId::Cwe1300 => AssetSet::Cwe1300 {
                side_channel_related_signals: Vec::new(),
            },
        }
    }

    pub fn cwe(&self) -> CweId {
        match self {
            AssetSet::Cwe1191 { .. } => CweId::Cwe1191,
            AssetSet::Cwe1231 { .. } => CweId::Cwe1231,
            AssetSet::Cwe1233(_) => CweId::Cwe1233,
            AssetSet::Cwe1244 { .. } => CweId::Cwe1244,
            AssetSet::Cwe1300 { .. } => CweId::Cwe1300,
        }
    }

    /// Number of asset entries: signals for lint CWEs, template bindings for
    /// assertion CWEs.
    pub fn entry_count(&self) -> usize {
        match self {
            AssetSet::Cwe1191 {
                access_control_related_signals: s,
            }
            | AssetSet::Cwe1300 {
                side_channel_related_signals: s,
            } => s.len(),
            AssetSet::Cwe1231 { lock_signals } => lock_signals.len(),
            AssetSet::Cwe1233(a) => a.pairs.len(),
            AssetSet::Cwe1244 { privilege_signals } => privilege_signals.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.entry_count() == 0
    }

    /// Root signal names mentioned by the set, in order.
    pub fn signal_names(&self) -> IndexSet<String> {
        let mut out = IndexSet::new();
        let mut add = |text: &str| match parse_expr(text) {
            Ok(e) => out.extend(collect_signal_refs(&e)),
            Err(_) => {
                out.insert(text.trim().to_string());
            }
        };
        match self {
            AssetSet::Cwe1191 {
                access_control_related_signals: s,
            }
            | AssetSet::Cwe1300 {
                side_channel_related_signals: s,
            } => s.iter().for_each(|x| add(x)),
            AssetSet::Cwe1231 { lock_signals } => lock_signals.iter().for_each(|l| add(&l.lock_signal)),
            AssetSet::Cwe1233(a) => a.pairs.iter().for_each(|p| {
                add(&p.lock_signal);
                add(&p.security_sensitive_signal);
            }),
            AssetSet::Cwe1244 { privilege_signals } => privilege_signals.iter().for_each(|p| add(&p.privilege_signal)),
        }
        out
    }
}

/// The pieces of a single-clock `|=>` property.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropertySpec {
    pub clk_sense: ClockSense,
    pub clk: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disable: Option<String>,
    pub antecedent: String,
    pub consequent: String,
}

impl PropertySpec {
    /// `@(posedge clk) disable iff (r) a |=> c;`
    pub fn render(&self) -> String {
        let mut s = format!("@({} {})", self.clk_sense, self.clk);
        if let Some(d) = &self.disable {
            s += &format!(" disable iff ({d})");
        }
        s + &format!(" {} |=> {};", self.antecedent, self.consequent)
    }
}

/// One bound template.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PopulatedAssertion {
    pub id: String,
    pub cwe: CweId,
    pub target_module: String,
    /// Placeholder name to bound text, in template order.
    pub fields: IndexMap<String, String>,
    pub property: PropertySpec,
    pub sva_text: String,
}

impl PopulatedAssertion {
    fn new(cwe: CweId, module: &str, fields: IndexMap<String, String>) -> Self {
        let property = property_from_fields(cwe, &fields);
        let sva_text = property.render();
        let mut parts: Vec<String> = vec![module.to_string()];
        parts.extend(fields.iter().map(|(k, v)| format!("{k}={v}")));
        let refs: Vec<&str> = parts.iter().map(String::as_str).collect();
        PopulatedAssertion {
            id: short_id(&format!("cwe{}", cwe.number()), &refs),
            cwe,
            target_module: module.to_string(),
            fields,
            property,
            sva_text,
        }
    }

    /// Re-render from the bound fields.
    pub fn rerender(&self) -> String {
        property_from_fields(self.cwe, &self.fields).render()
    }
}

fn field<'a>(fields: &'a IndexMap<String, String>, k: &str) -> &'a str {
    fields.get(k).map(String::as_str).unwrap_or_default()
}

/// Wrap in parentheses and prefix `~`.
pub fn negate(cond: &str) -> String {
    format!("~({})", cond.trim())
}

fn property_from_fields(cwe: CweId, f: &IndexMap<String, String>) -> PropertySpec {
    let clk_sense = field(f, "CLK_SENSE").parse().unwrap_or(ClockSense::Posedge);
    let clk = field(f, "CLK").to_string();
    let disable = f.get("RESET_CONDITIONS").cloned();
    let (antecedent, consequent) = match cwe {
        CweId::Cwe1231 => (
            field(f, "CONDITIONS_FOR_STABLE_LOCK").to_string(),
            format!("$stable({})", field(f, "LOCK_SIGNAL")),
        ),
        CweId::Cwe1233 => (
            format!("{} == '1", field(f, "LOCK_SIGNAL")),
            format!("$stable({})", field(f, "SECURITY_SENSITIVE_REGISTER")),
        ),
        CweId::Cwe1244 => {
            let p = field(f, "PRIVILEGE_SIGNAL");
            (
                negate(field(f, "CONDITIONS_FOR_PRIVILEGE_ESCALATION")),
                format!(
                    "({p} != {} || {p} == {})",
                    field(f, "HIGH_PRIVILEGE"),
                    field(f, "PREVIOUS_PRIVILEGE")
                ),
            )
        }
        CweId::Cwe1191 | CweId::Cwe1300 => (String::new(), String::new()),
    };
    PropertySpec {
        clk_sense,
        clk,
        disable,
        antecedent,
        consequent,
    }
}

/// What a bound text must look like.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Shape {
    /// A plain identifier naming a signal.
    Signal,
    /// An identifier, bit-select or part-select of a signal.
    Select,
    /// Any expression whose names resolve.
    Expr,
}

fn validate(unit: &DesignUnit, role: &str, text: &str, shape: Shape) -> Result<Expr, String> {
    let e = parse_expr(text).map_err(|err| format!("{role} '{text}' does not parse: {err}"))?;
    let is_signal = |n: &str| unit.symbols.signal(n).is_some();
    match shape {
        Shape::Signal => match &e.kind {
            ExprKind::Ident(n) if is_signal(n) => {}
            ExprKind::Ident(n) => return Err(format!("{role} '{n}' is not a signal of {}", unit.name)),
            _ => return Err(format!("{role} '{text}' is not a signal name")),
        },
        Shape::Select => match e.base_ident() {
            Some(n) if is_signal(n) => {}
            Some(n) => return Err(format!("{role} '{n}' is not a signal of {}", unit.name)),
            None => return Err(format!("{role} '{text}' is not a signal or select")),
        },
        Shape::Expr => {}
    }
    for n in collect_signal_refs(&e) {
        if !unit.symbols.resolves(&n) {
            return Err(format!("{role} refers to unknown name '{n}' in {}", unit.name));
        }
    }
    Ok(e)
}

fn fail(cwe: CweId, msg: String) -> Diagnostic {
    Diagnostic::warning(
        DiagCode::FormationFailure,
        format!("CWE-{} assertion not formed: {msg}", cwe.number()),
    )
}

fn clock_fields(unit: &DesignUnit, clk: &str, sense: ClockSense) -> Result<IndexMap<String, String>, String> {
    validate(unit, "clock", clk, Shape::Signal)?;
    let mut f = IndexMap::new();
    f.insert("CLK_SENSE".to_string(), sense.keyword().to_string());
    f.insert("CLK".to_string(), clk.trim().to_string());
    Ok(f)
}

fn bind_1231(unit: &DesignUnit, a: &LockBitAsset) -> Result<IndexMap<String, String>, String> {
    let mut f = clock_fields(unit, &a.clk, a.clk_sense)?;
    validate(unit, "lock signal", &a.lock_signal, Shape::Select)?;
    validate(unit, "lock condition", &a.conditions_for_lock_modification, Shape::Expr)?;
    f.insert(
        "CONDITIONS_FOR_STABLE_LOCK".into(),
        negate(&a.conditions_for_lock_modification),
    );
    f.insert("LOCK_SIGNAL".into(), a.lock_signal.trim().to_string());
    Ok(f)
}

fn bind_1233(unit: &DesignUnit, a: &LockProtectionAssets, p: &LockPair) -> Result<IndexMap<String, String>, String> {
    let mut f = clock_fields(unit, &a.clk, a.clk_sense)?;
    validate(unit, "reset condition", &a.reset_conditions, Shape::Expr)?;
    validate(unit, "lock signal", &p.lock_signal, Shape::Select)?;
    validate(
        unit,
        "security-sensitive register",
        &p.security_sensitive_signal,
        Shape::Select,
    )?;
    f.insert("RESET_CONDITIONS".into(), a.reset_conditions.trim().to_string());
    f.insert("LOCK_SIGNAL".into(), p.lock_signal.trim().to_string());
    f.insert(
        "SECURITY_SENSITIVE_REGISTER".into(),
        p.security_sensitive_signal.trim().to_string(),
    );
    Ok(f)
}

fn bind_1244(unit: &DesignUnit, a: &PrivilegeAsset) -> Result<IndexMap<String, String>, String> {
    let mut f = clock_fields(unit, &a.clk, a.clk_sense)?;
    validate(unit, "reset condition", &a.reset_conditions, Shape::Expr)?;
    validate(
        unit,
        "escalation condition",
        &a.conditions_for_privilege_escalation,
        Shape::Expr,
    )?;
    validate(unit, "privilege signal", &a.privilege_signal, Shape::Select)?;
    validate(unit, "high privilege", &a.high_privilege, Shape::Expr)?;
    validate(unit, "previous privilege", &a.previous_privilege, Shape::Expr)?;
    f.insert("RESET_CONDITIONS".into(), a.reset_conditions.trim().to_string());
    f.insert(
        "CONDITIONS_FOR_PRIVILEGE_ESCALATION".into(),
        a.conditions_for_privilege_escalation.trim().to_string(),
    );
    f.insert("PRIVILEGE_SIGNAL".into(), a.privilege_signal.trim().to_string());
    f.insert("HIGH_PRIVILEGE".into(), a.high_privilege.trim().to_string());
    f.insert("PREVIOUS_PRIVILEGE".into(), a.previous_privilege.trim().to_string());
    Ok(f)
}

/// Bind every asset entry of an assertion-strategy CWE into its template.
///
/// Entries that fail validation, and repeats of an already formed
/// assertion, are skipped with a [`DiagCode::FormationFailure`] diagnostic,
/// so `assets.entry_count() == assertions.len() + diagnostics.len()`.
pub fn populate_assertions(assets: &AssetSet, unit: &DesignUnit) -> (Vec<PopulatedAssertion>, Vec<Diagnostic>) {
    let cwe = assets.cwe();
    let bound: Vec<Result<IndexMap<String, String>, String>> = match assets {
        AssetSet::Cwe1231 { lock_signals } => lock_signals.iter().map(|a| bind_1231(unit, a)).collect(),
        AssetSet::Cwe1233(a) => a.pairs.iter().map(|p| bind_1233(unit, a, p)).collect(),
        AssetSet::Cwe1244 { privilege_signals } => privilege_signals.iter().map(|a| bind_1244(unit, a)).collect(),
        AssetSet::Cwe1191 { .. } | AssetSet::Cwe1300 { .. } => Vec::new(),
    };
    let mut out: Vec<PopulatedAssertion> = Vec::new();
    let mut diags = Vec::new();
    let mut seen = IndexSet::new();
    for b in bound {
        match b {
            Ok(fields) => {
                let a = PopulatedAssertion::new(cwe, &unit.name, fields);
                if seen.insert(a.id.clone()) {
                    out.push(a);
                } else {
                    diags.push(Diagnostic::new(
                        Severity::Info,
                        DiagCode::FormationFailure,
                        format!("duplicate asset entry skipped ({})", a.id),
                    ));
                }
            }
            Err(msg) => diags.push(fail(cwe, msg)),
        }
    }
    (out, diags)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verilog::parse_str;

    const DMA: &str = "module dma(input logic clk_i, input logic rst_ni, input logic rst_8,
        input logic [7:0] reglk_ctrl_i, input logic [31:0] wdata);
        logic [31:0] start_reg, core_lock_reg;
        endmodule";

    fn unit(src: &str) -> DesignUnit {
        parse_str(src, "t.v").units.remove(0)
    }

    fn lock_assets(pairs: &[(&str, &str)]) -> AssetSet {
        AssetSet::Cwe1233(LockProtectionAssets {
            pairs: pairs
                .iter()
                .map(|(l, s)| LockPair {
                    lock_signal: l.to_string(),
                    security_sensitive_signal: s.to_string(),
                })
                .collect(),
            reset_conditions: "~(rst_ni && ~rst_8)".into(),
            clk: "clk_i".into(),
            clk_sense: ClockSense::Posedge,
        })
    }

    #[test]
    fn lock_protection_template() {
        let u = unit(DMA);
        let (a, d) = populate_assertions(&lock_assets(&[("reglk_ctrl_i[7]", "core_lock_reg")]), &u);
        assert!(d.is_empty());
        assert_eq!(
            a[0].sva_text,
            "@(posedge clk_i) disable iff (~(rst_ni && ~rst_8)) reglk_ctrl_i[7] == '1 |=> $stable(core_lock_reg);"
        );
        assert!(a[0].id.starts_with("cwe1233_"));
        assert_eq!(a[0].id.len(), "cwe1233_".len() + 12);
        assert_eq!(a[0].rerender(), a[0].sva_text);
    }

    #[test]
    fn unresolved_and_duplicate_entries_are_counted() {
        let u = unit(DMA);
        let assets = lock_assets(&[
            ("reglk_ctrl_i[0]", "start_reg"),
            ("reglk_ctrl_i[0]", "start_reg"),
            ("reglk_ctrl_i[1]", "missing_reg"),
            ("???", "start_reg"),
        ]);
        let (a, d) = populate_assertions(&assets, &u);
        assert_eq!(a.len(), 1);
        assert_eq!(d.len(), 3);
        assert!(d.iter().all(|x| x.code == DiagCode::FormationFailure));
        assert!(d[1].message.contains("missing_reg"));
    }

    #[test]
    fn lock_bit_condition_is_negated() {
        let u = unit("module r(input clk, input rst_ni, input wr_en, input d); reg lock_q; endmodule");
        let assets = AssetSet::Cwe1231 {
            lock_signals: vec![LockBitAsset {
                lock_signal: "lock_q".into(),
                conditions_for_lock_modification: "(rst_ni && wr_en)".into(),
                clk: "clk".into(),
                clk_sense: ClockSense::Posedge,
            }],
        };
        let (a, _) = populate_assertions(&assets, &u);
        assert_eq!(a[0].property.antecedent, "~((rst_ni && wr_en))");
        assert_eq!(
            a[0].sva_text,
            "@(posedge clk) ~((rst_ni && wr_en)) |=> $stable(lock_q);"
        );
    }

    #[test]
    fn empty_assets_form_nothing() {
        let u = unit(DMA);
        for cwe in [CweId::Cwe1231, CweId::Cwe1233, CweId::Cwe1244] {
            let (a, d) = populate_assertions(&AssetSet::empty(cwe), &u);
            assert!(a.is_empty() && d.is_empty());
        }
    }

    #[test]
    fn signal_names_cover_selects() {
        let names = lock_assets(&[("reglk_ctrl_i[7]", "core_lock_reg")]).signal_names();
        assert_eq!(names.into_iter().collect::<Vec<_>>(), ["reglk_ctrl_i", "core_lock_reg"]);
    }
}
