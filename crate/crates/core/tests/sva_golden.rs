// SPDX-License-Identifier: Apache-2.0

mod common;

use common::sva_cases as cases;
use rtlscan_core::assertion::{populate_assertions, render_sva_file};
use rtlscan_core::verilog::parse_str;
use rtlscan_core::CweId;

#[test]
fn bindings_render_exact_text() {
    let cases = cases();
    for cwe in [CweId::Cwe1231, CweId::Cwe1233, CweId::Cwe1244] {
        assert!(cases.iter().filter(|c| c.assets.cwe() == cwe).count() >= 3, "{cwe:?}");
    }
    for c in &cases {
        let src = std::fs::read_to_string(common::data_dir().join("sva").join(&c.design)).unwrap();
        let parsed = parse_str(&src, &c.design);
        assert!(parsed.diagnostics.is_empty(), "{}: {:?}", c.design, parsed.diagnostics);
        let unit = &parsed.units[0];
        let (assertions, diags) = populate_assertions(&c.assets, unit);
        assert!(diags.is_empty(), "{}: {diags:?}", c.name);
        assert_eq!(assertions.len(), 1, "{}", c.name);
        assert_eq!(assertions[0].sva_text, c.expected, "{}", c.name);
        assert_eq!(assertions[0].property.render(), c.expected, "{}", c.name);

        let file = render_sva_file(&assertions, unit);
        let line = format!(
            "{}: assert property ({});",
            assertions[0].id,
            c.expected.trim_end_matches(';')
        );
        assert!(file.contains(&line), "{}:\n{file}", c.name);
        assert!(file.ends_with(&format!("bind {0} {0}_props {0}_props_i (.*);\n", unit.name)));
    }
}

#[test]
fn one_file_per_design_holds_every_binding() {
    let cases = cases();
    for design in ["reglk.v", "dma.v", "priv.v"] {
        let src = std::fs::read_to_string(common::data_dir().join("sva").join(design)).unwrap();
        let unit = parse_str(&src, design).units.remove(0);
        let mut all = Vec::new();
        for c in cases.iter().filter(|c| c.design == design) {
            all.extend(populate_assertions(&c.assets, &unit).0);
        }
        let file = render_sva_file(&all, &unit);
        assert_eq!(file.matches("assert property").count(), 3, "{design}");
        assert_eq!(file.matches("\nbind ").count(), 1);
    }
}

#[test]
fn checker_verdicts_on_golden_designs() {
    use rtlscan_core::checker::{check_assertions, CheckerConfig};
    let want = [
        ("memory_lock_under_jtag", "falsified"),
        ("scalar_lock_on_falling_edge", "unsupported"),
        ("lock_bit_select", "falsified"),
        ("core_lock_register", "falsified"),
        ("guarded_length_register", "not_falsified"),
        ("start_register_low_half", "falsified"),
        ("debug_escalation", "falsified"),
        ("literal_high_privilege", "falsified"),
        ("privilege_bit_on_falling_edge", "unsupported"),
    ];
    let cfg = CheckerConfig::default();
    for (c, (name, label)) in cases().iter().zip(want) {
        assert_eq!(c.name, name);
        let src = std::fs::read_to_string(common::data_dir().join("sva").join(&c.design)).unwrap();
        let unit = parse_str(&src, &c.design).units.remove(0);
        let (a, _) = populate_assertions(&c.assets, &unit);
        let r = check_assertions(&unit, &a, &cfg);
        assert_eq!(r[0].status.label(), label, "{name}: {:?}", r[0].status);
    }
}
