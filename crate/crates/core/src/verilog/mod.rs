// SPDX-License-Identifier: Apache-2.0

//! Verilog/SystemVerilog frontend: lexer, parser, symbol resolution, width
//! inference and canonical rendering.

pub mod ast;
pub mod lexer;
pub mod parser;
pub mod refs;
pub mod render;
pub mod resolve;
pub mod span;
pub mod symbols;
pub mod width;

pub use ast::{DesignUnit, Expr, ExprKind, SourceFile, Stmt, StmtKind};
pub use lexer::{tokenize, Token, TokenKind};
pub use parser::{parse_expr, parse_file, parse_str, ParseOutput};
pub use refs::collect_signal_refs;
pub use render::{render_expr, render_unit};
pub use span::SourceSpan;
pub use width::{expr_width, Width};
