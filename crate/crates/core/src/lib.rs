// SPDX-License-Identifier: Apache-2.0

//! Asset-driven security scanning for RTL designs.
//!
//! The crate is organised around a three-stage flow:
//!
//! 1. an LLM identifies security-relevant signals ("assets") for a CWE,
//! 2. static analysis looks for the CWE, either through structural lint
//!    checks ([`lint`]) or through populated SystemVerilog assertion
//!    templates that are falsified by a bounded checker ([`assertion`],
//!    [`checker`]),
//! 3. the LLM triages each static-analysis hit and explains the real ones.
//!
//! [`verilog`] provides the parser the static stages run on, [`llm`] the
//! prompt construction and provider layer (including an offline replay
//! store), and [`pipeline`] ties the stages together and computes metrics.

pub mod assertion;
pub mod checker;
pub mod cwe;
pub mod diag;
pub mod digest;
pub mod lint;
pub mod llm;
pub mod pipeline;
pub mod verilog;

pub use cwe::{CweId, Strategy, Variation};
pub use diag::{DiagCode, Diagnostic, Severity};
