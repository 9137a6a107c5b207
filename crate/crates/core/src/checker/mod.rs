// SPDX-License-Identifier: Apache-2.0

//! Bounded checking of single-clock `|=>` properties against a cycle model.
//!
//! Small designs are explored exhaustively from reset; larger ones get a
//! seeded random search. Every counterexample is replayed before it is
//! reported.

mod model;
mod search;
mod vcd;

use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use model::{elaborate, ElabError, EvalError, Role, SimModel, SimSignal};
pub use search::{check_property, replay_trace};
pub use vcd::render_vcd;

use crate::assertion::PopulatedAssertion;
use crate::verilog::DesignUnit;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CheckerConfig {
    /// Trace length bound in cycles.
    pub max_depth: u32,
    /// Exhaustive search when state plus input bits fit in this budget.
    pub exhaustive_bit_budget: u64,
    pub random_trials: u32,
    pub seed: u64,
}

impl Default for CheckerConfig {
    fn default() -> Self {
        CheckerConfig {
            max_depth: 8,
            exhaustive_bit_budget: 20,
            random_trials: 10_000,
            seed: 0,
        }
    }
}

/// A bit vector of up to 128 bits, written as a hex string.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Bits(pub u128);

impl fmt::Display for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{:x}", self.0)
    }
}

impl Serialize for Bits {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Bits {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        let digits = text.strip_prefix("0x").unwrap_or(&text);
        u128::from_str_radix(digits, 16)
            .map(Bits)
            .map_err(serde::de::Error::custom)
    }
}

/// Values of one clock cycle. Array elements appear as `name[index]`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TraceCycle {
    pub inputs: IndexMap<String, Bits>,
    pub state: IndexMap<String, Bits>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Trace {
    pub cycles: Vec<TraceCycle>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SearchMode {
    Exhaustive,
    Random { trials: u32, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum CheckStatus {
    /// The consequent failed at `cycle`; `trace` starts from reset.
    Falsified {
        trace: Trace,
        cycle: u32,
        mode: SearchMode,
    },
    NotFalsified {
        depth: u32,
        mode: SearchMode,
        /// The antecedent never held on an enabled cycle.
        vacuous: bool,
    },
    Unsupported {
        reason: String,
    },
}

impl CheckStatus {
    pub fn is_falsified(&self) -> bool {
        matches!(self, CheckStatus::Falsified { .. })
    }

    pub fn label(&self) -> &'static str {
        match self {
            CheckStatus::Falsified { .. } => "falsified",
            CheckStatus::NotFalsified { .. } => "not_falsified",
            CheckStatus::Unsupported { .. } => "unsupported",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropertyResult {
    pub assertion_id: String,
    #[serde(flatten)]
    pub status: CheckStatus,
}

/// Check every assertion against `unit`. Elaboration failures mark all of
/// them unsupported.
pub fn check_assertions(
    unit: &DesignUnit,
    assertions: &[PopulatedAssertion],
    cfg: &CheckerConfig,
) -> Vec<PropertyResult> {
    let model = elaborate(unit);
    let run = |a: &PopulatedAssertion| PropertyResult {
        assertion_id: a.id.clone(),
        status: match &model {
            Ok(m) => check_property(m, &a.property, cfg),
            Err(e) => CheckStatus::Unsupported { reason: e.to_string() },
        },
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        assertions.par_iter().map(run).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        assertions.iter().map(run).collect()
    }
}
