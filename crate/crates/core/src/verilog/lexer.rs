// SPDX-License-Identifier: Apache-2.0

//! Tokenizer for the supported Verilog/SystemVerilog subset.
//!
//! Whitespace and comments are trivia: they do not produce tokens, but every
//! byte of the input is either inside a token lexeme or inside trivia, so the
//! token stream plus the gaps between spans reproduces the input exactly.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::span::{LineIndex, SourceSpan};
use crate::diag::{DiagCode, Diagnostic};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Base {
    Binary,
    Octal,
    Decimal,
    Hex,
}

impl Base {
    fn from_char(c: char) -> Option<Base> {
        match c.to_ascii_lowercase() {
            'b' => Some(Base::Binary),
            'o' => Some(Base::Octal),
            'd' => Some(Base::Decimal),
            'h' => Some(Base::Hex),
            _ => None,
        }
    }

    pub fn radix(self) -> u32 {
        match self {
            Base::Binary => 2,
            Base::Octal => 8,
            Base::Decimal => 10,
            Base::Hex => 16,
        }
    }

    pub fn letter(self) -> char {
        match self {
            Base::Binary => 'b',
            Base::Octal => 'o',
            Base::Decimal => 'd',
            Base::Hex => 'h',
        }
    }
}

/// An integer literal. `sized` is set iff an explicit width prefix was
/// written (`8'h00`); `fill` holds the digit of an unbased unsized literal
/// such as `'1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NumberLit {
    pub sized: bool,
    pub width: Option<u32>,
    pub base: Base,
    pub signed: bool,
    pub digits: String,
    pub value: u128,
    pub has_xz: bool,
    pub fill: Option<char>,
}

impl NumberLit {
    pub fn unsized_decimal(value: u128) -> Self {
        NumberLit {
            sized: false,
            width: None,
            base: Base::Decimal,
            signed: false,
            digits: value.to_string(),
            value,
            has_xz: false,
            fill: None,
        }
    }

    pub fn sized(width: u32, base: Base, value: u128) -> Self {
        let digits = match base {
            Base::Binary => format!("{value:b}"),
            Base::Octal => format!("{value:o}"),
            Base::Decimal => value.to_string(),
            Base::Hex => format!("{value:x}"),
        };
        NumberLit {
            sized: true,
            width: Some(width),
            base,
            signed: false,
            digits,
            value: value & mask(width),
            has_xz: false,
            fill: None,
        }
    }

    /// Canonical source form.
    pub fn render(&self) -> String {
        if let Some(c) = self.fill {
            return format!("'{c}");
        }
        let s = if self.signed { "s" } else { "" };
        match (self.sized, self.width) {
            (true, Some(w)) => format!("{w}'{s}{}{}", self.base.letter(), self.digits),
            _ if self.base == Base::Decimal && !self.signed => self.digits.clone(),
            _ => format!("'{s}{}{}", self.base.letter(), self.digits),
        }
    }
}

/// All-ones mask for `width` bits (saturating at 128).
pub fn mask(width: u32) -> u128 {
    if width >= 128 {
        u128::MAX
    } else {
        (1u128 << width) - 1
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TokenKind {
    Keyword,
    Identifier,
    SystemIdentifier,
    Number(NumberLit),
    Operator,
    Punctuation,
    /// A compiler directive or macro use (`` `define ...``, `` `WIDTH ``).
    Directive,
    /// Bytes the lexer could not classify.
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub kind: TokenKind,
    pub lexeme: String,
    pub span: SourceSpan,
}

impl Token {
    pub fn is(&self, lexeme: &str) -> bool {
        self.lexeme == lexeme && !matches!(self.kind, TokenKind::Number(_) | TokenKind::Error)
    }
}

pub const KEYWORDS: &[&str] = &[
    "always",
    "always_comb",
    "always_ff",
    "always_latch",
    "and",
    "assert",
    "assign",
    "assume",
    "automatic",
    "begin",
    "bit",
    "byte",
    "case",
    "casex",
    "casez",
    "class",
    "cover",
    "default",
    "disable",
    "else",
    "end",
    "endcase",
    "endclass",
    "endfunction",
    "endgenerate",
    "endinterface",
    "endmodule",
    "endpackage",
    "endproperty",
    "endsequence",
    "endtask",
    "enum",
    "for",
    "forever",
    "function",
    "generate",
    "genvar",
    "if",
    "iff",
    "import",
    "initial",
    "inout",
    "input",
    "int",
    "integer",
    "interface",
    "localparam",
    "logic",
    "longint",
    "module",
    "negedge",
    "or",
    "output",
    "package",
    "packed",
    "parameter",
    "posedge",
    "priority",
    "property",
    "reg",
    "repeat",
    "sequence",
    "shortint",
    "signed",
    "struct",
    "supply0",
    "supply1",
    "task",
    "tri",
    "typedef",
    "union",
    "unique",
    "unsigned",
    "wand",
    "while",
    "wire",
    "wor",
];

const LINE_DIRECTIVES: &[&str] = &[
    "define",
    "undef",
    "include",
    "ifdef",
    "ifndef",
    "elsif",
    "else",
    "endif",
    "timescale",
    "default_nettype",
    "resetall",
    "celldefine",
    "endcelldefine",
    "line",
    "pragma",
    "begin_keywords",
    "end_keywords",
];

const OPERATORS: &[&str] = &[
    "<<<=", ">>>=", "===", "!==", "==?", "!=?", "<<<", ">>>", "|->", "|=>", "<->", "<<=", ">>=", "->", "==", "!=",
    "<=", ">=", "&&", "||", "**", "<<", ">>", "~&", "~|", "~^", "^~", "+:", "-:", "::", "++", "--", "+=", "-=", "*=",
    "/=", "%=", "|=", "&=", "^=", "##", ".*", "+", "-", "*", "/", "%", "<", ">", "=", "!", "~", "&", "|", "^", "?",
    ":", "@", "#", ".", "'",
];

const PUNCT: &[char] = &['(', ')', '[', ']', '{', '}', ',', ';'];

pub struct Lexed {
    pub tokens: Vec<Token>,
    pub diagnostics: Vec<Diagnostic>,
}

/// Tokenize `source`. Never fails: unknown bytes become `Error` tokens and a
/// diagnostic.
pub fn tokenize(source: &str, file: &str) -> Lexed {
    Lexer::new(source, file.into()).run()
}

struct Lexer<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    lines: LineIndex,
    tokens: Vec<Token>,
    diagnostics: Vec<Diagnostic>,
}

fn is_ident_start(b: u8) -> bool {
    b.is_ascii_alphabetic() || b == b'_'
}

fn is_ident_char(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_' || b == b'$'
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str, file: Arc<str>) -> Self {
        Self {
            src,
            bytes: src.as_bytes(),
            pos: 0,
            lines: LineIndex::new(file, src),
            tokens: Vec::new(),
            diagnostics: Vec::new(),
        }
    }

    fn peek(&self, off: usize) -> Option<u8> {
        self.bytes.get(self.pos + off).copied()
    }

    fn push(&mut self, kind: TokenKind, start: usize) {
        let span = self.lines.span(start, self.pos);
        self.tokens.push(Token {
            kind,
            lexeme: self.src[start..self.pos].to_string(),
            span,
        });
    }

    fn run(mut self) -> Lexed {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            let start = self.pos;
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'/' && self.peek(1) == Some(b'/') {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if b == b'/' && self.peek(1) == Some(b'*') {
                match self.src[self.pos + 2..].find("*/") {
                    Some(i) => self.pos += 2 + i + 2,
                    None => {
                        self.pos = self.bytes.len();
                        let span = self.lines.span(start, self.pos);
                        self.diagnostics
                            .push(Diagnostic::error(DiagCode::LexError, "unterminated block comment").with_span(span));
                    }
                }
            } else if is_ident_start(b) {
                while self.peek(0).is_some_and(is_ident_char) {
                    self.pos += 1;
                }
                let word = &self.src[start..self.pos];
                let kind = if KEYWORDS.binary_search(&word).is_ok() {
                    TokenKind::Keyword
                } else {
                    TokenKind::Identifier
                };
                self.push(kind, start);
            } else if b == b'\\' {
                // escaped identifier runs to the next whitespace
                self.pos += 1;
                while self.peek(0).is_some_and(|c| !c.is_ascii_whitespace()) {
                    self.pos += 1;
                }
                self.push(TokenKind::Identifier, start);
            } else if b == b'$' && self.peek(1).is_some_and(is_ident_start) {
                self.pos += 1;
                while self.peek(0).is_some_and(is_ident_char) {
                    self.pos += 1;
                }
                self.push(TokenKind::SystemIdentifier, start);
            } else if b == b'`' {
                self.directive(start);
            } else if b.is_ascii_digit() {
                self.number(start);
            } else if b == b'\'' && self.try_based_number(start, None) {
                // handled
            } else if b == b'"' {
                self.string(start);
            } else if PUNCT.contains(&(b as char)) {
                self.pos += 1;
                self.push(TokenKind::Punctuation, start);
            } else if let Some(op) = OPERATORS.iter().find(|op| self.src[self.pos..].starts_with(**op)) {
                self.pos += op.len();
                self.push(TokenKind::Operator, start);
            } else {
                let ch_len = self.src[self.pos..].chars().next().map_or(1, char::len_utf8);
                self.pos += ch_len;
                self.push(TokenKind::Error, start);
                let span = self.lines.span(start, self.pos);
                let ch = &self.src[start..self.pos];
                self.diagnostics.push(
                    Diagnostic::error(DiagCode::LexError, format!("unexpected character {ch:?}")).with_span(span),
                );
            }
        }
        Lexed {
            tokens: self.tokens,
            diagnostics: self.diagnostics,
        }
    }

    fn directive(&mut self, start: usize) {
        self.pos += 1;
        while self.peek(0).is_some_and(is_ident_char) {
            self.pos += 1;
        }
        let name = &self.src[start + 1..self.pos];
        if LINE_DIRECTIVES.contains(&name) {
            // consume to end of line, honouring backslash continuations
            while self.pos < self.bytes.len() {
                let c = self.bytes[self.pos];
                if c == b'\n' {
                    if self.pos > 0 && self.bytes[self.pos - 1] == b'\\' {
                        self.pos += 1;
                        continue;
                    }
                    break;
                }
                self.pos += 1;
            }
            // trailing '\r' and spaces stay inside the lexeme; harmless
        }
        self.push(TokenKind::Directive, start);
    }

    fn string(&mut self, start: usize) {
        self.pos += 1;
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'\\' => self.pos += 2,
                b'"' => {
                    self.pos += 1;
                    break;
                }
                b'\n' => break,
                _ => self.pos += 1,
            }
        }
        self.pos = self.pos.min(self.bytes.len());
        // strings only appear as system task arguments; treat as an opaque
        // identifier-like token
        self.push(TokenKind::Identifier, start);
    }

    fn number(&mut self, start: usize) {
        while self.peek(0).is_some_and(|c| c.is_ascii_digit() || c == b'_') {
            self.pos += 1;
        }
        let size_digits: String = self.src[start..self.pos].chars().filter(|c| *c != '_').collect();
        // optional whitespace between size and the base tick
        let mut look = self.pos;
        while self.bytes.get(look).is_some_and(|c| *c == b' ' || *c == b'\t') {
            look += 1;
        }
        if self.bytes.get(look) == Some(&b'\'') && self.based_follows(look + 1) {
            let width = size_digits.parse::<u32>().ok();
            self.pos = look;
            if self.try_based_number(start, Some(width.unwrap_or(0))) {
                return;
            }
        }
        // real-number tail: keep it in the lexeme, integer part is the value
        if self.peek(0) == Some(b'.') && self.peek(1).is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
            while self.peek(0).is_some_and(|c| c.is_ascii_digit() || c == b'_') {
                self.pos += 1;
            }
        }
        let value = parse_digits(&size_digits, 10).0;
        let lit = NumberLit {
            sized: false,
            width: None,
            base: Base::Decimal,
            signed: false,
            digits: size_digits,
            value,
            has_xz: false,
            fill: None,
        };
        self.push(TokenKind::Number(lit), start);
    }

    fn based_follows(&self, at: usize) -> bool {
        let mut i = at;
        if self.bytes.get(i).is_some_and(|c| *c == b's' || *c == b'S') {
            i += 1;
        }
        self.bytes.get(i).is_some_and(|c| Base::from_char(*c as char).is_some())
    }

    /// At a `'`: lex a based literal (`'h1f`, `8'b0`) or fill literal (`'1`).
    /// Returns false (consuming nothing) when the tick is an operator.
    fn try_based_number(&mut self, start: usize, width: Option<u32>) -> bool {
        debug_assert_eq!(self.bytes[self.pos], b'\'');
        let tick = self.pos;
        if width.is_none() {
            if let Some(c) = self.peek(1) {
                let after = self.peek(2);
                if matches!(c, b'0' | b'1' | b'x' | b'X' | b'z' | b'Z') && !after.is_some_and(is_ident_char) {
                    self.pos += 2;
                    let fill = (c as char).to_ascii_lowercase();
                    let lit = NumberLit {
                        sized: false,
                        width: None,
                        base: Base::Binary,
                        signed: false,
                        digits: fill.to_string(),
                        value: u128::from(fill == '1'),
                        has_xz: matches!(fill, 'x' | 'z'),
                        fill: Some(fill),
                    };
                    self.push(TokenKind::Number(lit), start);
                    return true;
                }
            }
        }
        if !self.based_follows(tick + 1) {
            return false;
        }
        self.pos = tick + 1;
        let mut signed = false;
        if self.peek(0).is_some_and(|c| c == b's' || c == b'S') {
            signed = true;
            self.pos += 1;
        }
        let base = Base::from_char(self.bytes[self.pos] as char).expect("checked by based_follows");
        self.pos += 1;
        while self.peek(0).is_some_and(|c| c == b' ' || c == b'\t') {
            self.pos += 1;
        }
        let digits_start = self.pos;
        while self
            .peek(0)
            .is_some_and(|c| c.is_ascii_hexdigit() || matches!(c, b'_' | b'x' | b'X' | b'z' | b'Z' | b'?'))
        {
            self.pos += 1;
        }
        let digits: String = self.src[digits_start..self.pos]
            .chars()
            .filter(|c| *c != '_')
            .map(|c| c.to_ascii_lowercase())
            .collect();
        if digits.is_empty() {
            let span = self.lines.span(start, self.pos);
            self.diagnostics
                .push(Diagnostic::error(DiagCode::LexError, "based literal without digits").with_span(span));
        }
        let (mut value, has_xz) = parse_digits(&digits, base.radix());
        if let Some(w) = width {
            if w == 0 {
                let span = self.lines.span(start, self.pos);
                self.diagnostics
                    .push(Diagnostic::error(DiagCode::LexError, "literal width must be positive").with_span(span));
            }
            value &= mask(w);
        }
        let lit = NumberLit {
            sized: width.is_some(),
            width,
            base,
            signed,
            digits,
            value,
            has_xz,
            fill: None,
        };
        self.push(TokenKind::Number(lit), start);
        true
    }
}

/// Parse digits in `radix`; x/z/? digits read as 0. Values wider than 128
/// bits keep their low 128 bits.
fn parse_digits(digits: &str, radix: u32) -> (u128, bool) {
    let mut value: u128 = 0;
    let mut xz = false;
    for c in digits.chars() {
        let d = match c {
            'x' | 'z' | '?' => {
                xz = true;
                0
            }
            _ => match c.to_digit(radix) {
                Some(d) => d,
                None => continue,
            },
        };
        value = value.wrapping_mul(u128::from(radix)).wrapping_add(u128::from(d));
    }
    (value, xz)
}
