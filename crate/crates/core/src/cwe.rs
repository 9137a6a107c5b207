// SPDX-License-Identifier: Apache-2.0

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The hardware CWEs the scanner knows how to look for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum CweId {
    /// On-chip debug and test interface with improper access control.
    Cwe1191,
    /// Improper prevention of lock bit modification.
    Cwe1231,
    /// Security-sensitive hardware controls with missing lock protection.
    Cwe1233,
    /// Internal asset exposed to unsafe debug access level or state.
    Cwe1244,
    /// Improper protection of physical side channels.
    Cwe1300,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unsupported CWE {0}; supported: 1191, 1231, 1233, 1244, 1300")]
pub struct UnsupportedCwe(pub String);

/// Which static-analysis strategy a CWE is checked with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Lint,
    Assertion,
}

impl CweId {
    pub const ALL: [CweId; 5] = [
        CweId::Cwe1191,
        CweId::Cwe1231,
        CweId::Cwe1233,
        CweId::Cwe1244,
        CweId::Cwe1300,
    ];

    pub fn number(self) -> u32 {
        match self {
            CweId::Cwe1191 => 1191,
            CweId::Cwe1231 => 1231,
            CweId::Cwe1233 => 1233,
            CweId::Cwe1244 => 1244,
            CweId::Cwe1300 => 1300,
        }
    }

    pub fn from_number(n: u32) -> Result<Self, UnsupportedCwe> {
        match n {
            1191 => Ok(CweId::Cwe1191),
            1231 => Ok(CweId::Cwe1231),
            1233 => Ok(CweId::Cwe1233),
            1244 => Ok(CweId::Cwe1244),
            1300 => Ok(CweId::Cwe1300),
            other => Err(UnsupportedCwe(other.to_string())),
        }
    }

    /// Structural CWEs go through the linter, behavioural ones through
    /// assertions.
    pub fn strategy(self) -> Strategy {
        match self {
            CweId::Cwe1191 | CweId::Cwe1300 => Strategy::Lint,
            CweId::Cwe1231 | CweId::Cwe1233 | CweId::Cwe1244 => Strategy::Assertion,
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            CweId::Cwe1191 => "On-Chip Debug and Test Interface With Improper Access Control",
            CweId::Cwe1231 => "Improper Prevention of Lock Bit Modification",
            CweId::Cwe1233 => "Security-Sensitive Hardware Controls with Missing Lock Protection",
            CweId::Cwe1244 => "Internal Asset Exposed to Unsafe Debug Access Level or State",
            CweId::Cwe1300 => "Improper Protection of Physical Side Channels",
        }
    }
}

/// Look up the strategy for a raw CWE number.
pub fn dispatch_strategy(cwe: u32) -> Result<Strategy, UnsupportedCwe> {
    CweId::from_number(cwe).map(CweId::strategy)
}

impl From<CweId> for u32 {
    fn from(c: CweId) -> u32 {
        c.number()
    }
}

impl TryFrom<u32> for CweId {
    type Error = UnsupportedCwe;
    fn try_from(n: u32) -> Result<Self, Self::Error> {
        CweId::from_number(n)
    }
}

impl FromStr for CweId {
    type Err = UnsupportedCwe;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        let t = t.strip_prefix("CWE-").or_else(|| t.strip_prefix("cwe-")).unwrap_or(t);
        t.parse::<u32>()
            .map_err(|_| UnsupportedCwe(s.to_string()))
            .and_then(CweId::from_number)
    }
}

impl fmt::Display for CweId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

/// Prompt variation. `v1` adds an in-context CWE exemplar, `v2` adds a
/// second "re-think" contextualization turn, `v3` does both.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variation {
    V0,
    V1,
    V2,
    V3,
}

impl Variation {
    pub const ALL: [Variation; 4] = [Variation::V0, Variation::V1, Variation::V2, Variation::V3];

    pub fn uses_exemplar(self) -> bool {
        matches!(self, Variation::V1 | Variation::V3)
    }

    pub fn uses_rethink(self) -> bool {
        matches!(self, Variation::V2 | Variation::V3)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variation::V0 => "v0",
            Variation::V1 => "v1",
            Variation::V2 => "v2",
            Variation::V3 => "v3",
        }
    }
}

impl FromStr for Variation {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "v0" => Ok(Variation::V0),
            "v1" => Ok(Variation::V1),
            "v2" => Ok(Variation::V2),
            "v3" => Ok(Variation::V3),
            other => Err(format!("unknown variation '{other}' (expected v0|v1|v2|v3)")),
        }
    }
}

impl fmt::Display for Variation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}
