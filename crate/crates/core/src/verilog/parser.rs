// SPDX-License-Identifier: Apache-2.0

//! Recursive-descent parser for the synthesizable subset.
//!
//! Constructs outside the subset (generate blocks, functions, classes,
//! interfaces, concurrent assertions) are skipped with a
//! `skipped-construct` diagnostic. A syntax error inside a module drops that
//! module and resumes at the next module boundary.

use std::collections::HashMap;
use std::sync::Arc;

use super::ast::*;
use super::lexer::{tokenize, NumberLit, Token, TokenKind};
use super::span::{LineIndex, SourceSpan};
use super::symbols::{const_eval, Symbol, SymbolTable};
use crate::diag::{DiagCode, Diagnostic, Severity};

/// Result of parsing one file.
#[derive(Debug, Clone)]
pub struct ParseOutput {
    pub units: Vec<DesignUnit>,
    pub diagnostics: Vec<Diagnostic>,
}

/// Tokenize and parse a file, then check that every referenced identifier
/// resolves.
pub fn parse_file(source: Arc<SourceFile>) -> ParseOutput {
    let lexed = tokenize(&source.text, &source.path);
    let mut out = parse_source(&lexed.tokens, source);
    let mut diagnostics = lexed.diagnostics;
    diagnostics.append(&mut out.diagnostics);
    for unit in &out.units {
        diagnostics.extend(super::resolve::check_references(unit));
    }
    out.diagnostics = diagnostics;
    out
}

/// Convenience for tests and small inputs.
pub fn parse_str(text: &str, path: &str) -> ParseOutput {
    parse_file(SourceFile::new(path, text))
}

/// Parse a token stream produced by [`tokenize`] over `source`.
pub fn parse_source(tokens: &[Token], source: Arc<SourceFile>) -> ParseOutput {
    let mut p = Parser::new(tokens, source);
    p.file();
    ParseOutput {
        units: p.units,
        diagnostics: p.diags,
    }
}

#[derive(Debug)]
struct ParseError {
    message: String,
    span: SourceSpan,
}

type PResult<T> = Result<T, ParseError>;

#[derive(Debug, Clone)]
struct Packed {
    range: Option<Range>,
    msb: i64,
    lsb: i64,
    resolved: bool,
}

impl Packed {
    fn scalar() -> Self {
        Packed {
            range: None,
            msb: 0,
            lsb: 0,
            resolved: true,
        }
    }

    fn fixed(width: i64) -> Self {
        Packed {
            range: None,
            msb: width - 1,
            lsb: 0,
            resolved: true,
        }
    }

    fn unknown() -> Self {
        Packed {
            range: None,
            msb: 0,
            lsb: 0,
            resolved: false,
        }
    }

    fn width(&self) -> i64 {
        (self.msb - self.lsb).abs() + 1
    }
}

#[derive(Debug, Clone)]
struct TypeSpec {
    kind: Option<SignalKind>,
    packed: Packed,
}

#[derive(Debug, Clone)]
struct TypeDef {
    packed: Packed,
}

#[derive(Default)]
struct ModuleBuilder {
    ports: Vec<PortDecl>,
    params: Vec<ParamDecl>,
    signals: Vec<SignalDecl>,
    signal_index: HashMap<String, usize>,
    always_blocks: Vec<AlwaysBlock>,
    continuous_assigns: Vec<Assign>,
    instances: Vec<Instance>,
    initial_blocks: Vec<Stmt>,
    loop_vars: Vec<String>,
    consts: HashMap<String, i64>,
    typedefs: HashMap<String, TypeDef>,
}

impl ModuleBuilder {
    fn add_param(&mut self, name: String, local: bool, value: Expr, span: SourceSpan) {
        let resolved = const_eval(&value, &self.consts);
        if let Some(v) = resolved {
            self.consts.insert(name.clone(), v);
        }
        self.params.push(ParamDecl {
            name,
            local,
            value,
            resolved,
            span,
        });
    }

    #[allow(clippy::too_many_arguments)]
    fn declare(
        &mut self,
        name: &str,
        kind: SignalKind,
        packed: &Packed,
        explicit_range: bool,
        array_range: Option<(i64, i64)>,
        init: Option<Expr>,
        span: SourceSpan,
    ) {
        if let Some(&i) = self.signal_index.get(name) {
            let existing = &mut self.signals[i];
            let is_dir = matches!(kind, SignalKind::Input | SignalKind::Output | SignalKind::Inout);
            if is_dir {
                existing.kind = kind;
            }
            if explicit_range {
                existing.msb = packed.msb;
                existing.lsb = packed.lsb;
                existing.resolved = packed.resolved;
                existing.range = packed.range.clone();
            }
            if array_range.is_some() {
                existing.is_array = true;
                existing.array_range = array_range;
            }
            if init.is_some() {
                existing.init = init;
            }
            return;
        }
        self.signal_index.insert(name.to_string(), self.signals.len());
        self.signals.push(SignalDecl {
            name: name.to_string(),
            kind,
            msb: packed.msb,
            lsb: packed.lsb,
            resolved: packed.resolved,
            range: packed.range.clone(),
            is_array: array_range.is_some(),
            array_range,
            init,
            span,
        });
    }
}

struct Parser<'t> {
    toks: Vec<Token>,
    pos: usize,
    source: Arc<SourceFile>,
    lines: LineIndex,
    diags: Vec<Diagnostic>,
    units: Vec<DesignUnit>,
    global_typedefs: HashMap<String, TypeDef>,
    global_enum_consts: Vec<(String, Expr, SourceSpan)>,
    cur: ModuleBuilder,
    _marker: std::marker::PhantomData<&'t ()>,
}

const DIRECTIONS: &[&str] = &["input", "output", "inout"];
const NET_TYPES: &[&str] = &["wire", "tri", "wand", "wor", "supply0", "supply1"];
const VAR_TYPES: &[&str] = &["reg", "logic", "bit", "integer", "int", "byte", "shortint", "longint"];
const TIME_UNITS: &[&str] = &["s", "ms", "us", "ns", "ps", "fs", "step"];

impl<'t> Parser<'t> {
    fn new(tokens: &'t [Token], source: Arc<SourceFile>) -> Self {
        let lines = LineIndex::new(source.path.clone(), &source.text);
        let mut diags = Vec::new();
        let mut toks = Vec::with_capacity(tokens.len());
        for t in tokens {
            match t.kind {
                TokenKind::Error => {}
                TokenKind::Directive => {
                    let name = t.lexeme[1..]
                        .split(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
                        .next()
                        .unwrap_or("");
                    match name {
                        "define" => diags.push(
                            Diagnostic::warning(
                                DiagCode::MacroNotExpanded,
                                format!("macro definition not expanded: {}", t.lexeme.trim()),
                            )
                            .with_span(t.span.clone()),
                        ),
                        "ifdef" | "ifndef" | "elsif" | "else" | "endif" | "include" | "undef" => diags.push(
                            Diagnostic::warning(
                                DiagCode::MacroNotExpanded,
                                format!("preprocessor directive ignored: {}", t.lexeme.trim()),
                            )
                            .with_span(t.span.clone()),
                        ),
                        "timescale" | "default_nettype" | "resetall" | "celldefine" | "endcelldefine" | "line"
                        | "pragma" | "begin_keywords" | "end_keywords" => {}
                        _ => {
                            diags.push(
                                Diagnostic::warning(
                                    DiagCode::MacroNotExpanded,
                                    format!("macro use not expanded: {}", t.lexeme),
                                )
                                .with_span(t.span.clone()),
                            );
                            toks.push(Token {
                                kind: TokenKind::Identifier,
                                lexeme: t.lexeme.clone(),
                                span: t.span.clone(),
                            });
                        }
                    }
                }
                _ => toks.push(t.clone()),
            }
        }
        Self {
            toks,
            pos: 0,
            source,
            lines,
            diags,
            units: Vec::new(),
            global_typedefs: HashMap::new(),
            global_enum_consts: Vec::new(),
            cur: ModuleBuilder::default(),
            _marker: std::marker::PhantomData,
        }
    }

    // ---- token helpers -------------------------------------------------

    fn eof(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn peek(&self) -> Option<&Token> {
        self.toks.get(self.pos)
    }

    fn peek_at(&self, n: usize) -> Option<&Token> {
        self.toks.get(self.pos + n)
    }

    fn at(&self, lexeme: &str) -> bool {
        self.peek().is_some_and(|t| t.is(lexeme))
    }

    fn at_any(&self, set: &[&str]) -> bool {
        self.peek().is_some_and(|t| set.iter().any(|s| t.is(s)))
    }

    fn at_ident(&self) -> bool {
        self.peek().is_some_and(|t| t.kind == TokenKind::Identifier)
    }

    fn eat(&mut self, lexeme: &str) -> bool {
        if self.at(lexeme) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        self.pos += 1;
        t
    }

    fn eof_span(&self) -> SourceSpan {
        let n = self.source.text.len();
        self.lines.span(n, n)
    }

    fn cur_span(&self) -> SourceSpan {
        self.peek().map(|t| t.span.clone()).unwrap_or_else(|| self.eof_span())
    }

    fn error<T>(&self, message: impl Into<String>) -> PResult<T> {
        let found = self
            .peek()
            .map(|t| format!(" (found '{}')", t.lexeme))
            .unwrap_or_else(|| " (found end of file)".to_string());
        Err(ParseError {
            message: format!("{}{found}", message.into()),
            span: self.cur_span(),
        })
    }

    fn expect(&mut self, lexeme: &str) -> PResult<Token> {
        if self.at(lexeme) {
            Ok(self.bump())
        } else {
            self.error(format!("expected '{lexeme}'"))
        }
    }

    fn expect_ident(&mut self) -> PResult<(String, SourceSpan)> {
        match self.peek() {
            Some(t) if t.kind == TokenKind::Identifier => {
                let t = self.bump();
                Ok((t.lexeme, t.span))
            }
            _ => self.error("expected identifier"),
        }
    }

    /// Span from token `start` to the last consumed token.
    fn span_from(&self, start: usize) -> SourceSpan {
        let first = self
            .toks
            .get(start)
            .map(|t| t.span.start)
            .unwrap_or(self.source.text.len());
        let last = if self.pos > start {
            self.toks[self.pos - 1].span.end
        } else {
            first
        };
        self.lines.span(first, last.max(first))
    }

    fn skipped(&mut self, what: &str, span: SourceSpan) {
        self.diags.push(
            Diagnostic::new(
                Severity::Info,
                DiagCode::SkippedConstruct,
                format!("skipped unsupported construct: {what}"),
            )
            .with_span(span),
        );
    }

    /// Skip to and past the next `;` at bracket depth 0. Stops before
    /// `endmodule`.
    fn skip_to_semicolon(&mut self) {
        let mut depth = 0i32;
        while let Some(t) = self.peek() {
            if t.is("endmodule") && depth <= 0 {
                return;
            }
            if t.kind == TokenKind::Punctuation {
                match t.lexeme.as_str() {
                    "(" | "[" | "{" => depth += 1,
                    ")" | "]" | "}" => depth -= 1,
                    ";" if depth <= 0 => {
                        self.pos += 1;
                        return;
                    }
                    _ => {}
                }
            }
            self.pos += 1;
        }
    }

    /// Skip past the keyword `end_kw`, honouring nesting of `open_kw`.
    fn skip_past(&mut self, open_kw: &str, end_kw: &str) -> PResult<()> {
        let mut depth = 0;
        while let Some(t) = self.peek() {
            if t.is(open_kw) {
                depth += 1;
            } else if t.is(end_kw) {
                depth -= 1;
                if depth <= 0 {
                    self.pos += 1;
                    if self.eat(":") {
                        self.expect_ident()?;
                    }
                    return Ok(());
                }
            } else if t.is("endmodule") && end_kw != "endmodule" {
                return self.error(format!("missing '{end_kw}'"));
            }
            self.pos += 1;
        }
        self.error(format!("missing '{end_kw}'"))
    }

    fn skip_balanced_parens(&mut self) -> PResult<()> {
        self.expect("(")?;
        let mut depth = 1;
        while let Some(t) = self.peek() {
            if t.is("(") {
                depth += 1;
            } else if t.is(")") {
                depth -= 1;
                if depth == 0 {
                    self.pos += 1;
                    return Ok(());
                }
            }
            self.pos += 1;
        }
        self.error("unbalanced parentheses")
    }

    // ---- file level ----------------------------------------------------

    fn file(&mut self) {
        while !self.eof() {
            if self.at("module") || self.at("macromodule") {
                self.module_with_recovery();
            } else if self.at("typedef") {
                let start = self.pos;
                if let Err(e) = self.typedef(true) {
                    self.report(e);
                    self.pos = start + 1;
                    self.skip_to_semicolon();
                }
            } else if self.at_any(&["package", "interface", "class", "program"]) {
                let start = self.pos;
                let kw = self.bump().lexeme;
                let end = format!("end{kw}");
                let span = self.toks[start].span.clone();
                self.skipped(&kw, span);
                let mut depth = 1;
                while let Some(t) = self.peek() {
                    if t.is(&kw) {
                        depth += 1;
                    } else if t.is(&end) || t.lexeme == end {
                        depth -= 1;
                        if depth == 0 {
                            self.pos += 1;
                            break;
                        }
                    }
                    self.pos += 1;
                }
            } else if self.at("endmodule") {
                let span = self.cur_span();
                self.diags.push(
                    Diagnostic::error(DiagCode::UnbalancedModule, "'endmodule' without 'module'").with_span(span),
                );
                self.pos += 1;
            } else if self.at("import") {
                self.skip_to_semicolon();
            } else {
                let span = self.cur_span();
                let lex = self.peek().map(|t| t.lexeme.clone()).unwrap_or_default();
                self.diags.push(
                    Diagnostic::error(DiagCode::ParseError, format!("unexpected '{lex}' outside a module"))
                        .with_span(span),
                );
                self.skip_to_semicolon();
                if self.at("endmodule") {
                    self.pos += 1;
                }
            }
        }
    }

    fn report(&mut self, e: ParseError) {
        self.diags
            .push(Diagnostic::error(DiagCode::ParseError, e.message).with_span(e.span));
    }

    fn module_with_recovery(&mut self) {
        let start = self.pos;
        match self.module() {
            Ok(unit) => self.units.push(unit),
            Err(e) => {
                let name = self.toks.get(start + 1).map(|t| t.lexeme.clone()).unwrap_or_default();
                self.diags.push(
                    Diagnostic::error(
                        DiagCode::ParseError,
                        format!("in module '{name}': {}; module skipped", e.message),
                    )
                    .with_span(e.span),
                );
                if self.pos == start {
                    self.pos += 1;
                }
                while let Some(t) = self.peek() {
                    if t.is("endmodule") {
                        self.pos += 1;
                        if self.eat(":") {
                            let _ = self.expect_ident();
                        }
                        break;
                    }
                    if t.is("module") || t.is("macromodule") {
                        break;
                    }
                    self.pos += 1;
                }
            }
        }
    }

    fn module(&mut self) -> PResult<DesignUnit> {
        let start = self.pos;
        self.bump(); // module
        let _ = self.eat("automatic") || self.eat("static");
        let (name, _) = self.expect_ident()?;
        self.cur = ModuleBuilder {
            typedefs: self.global_typedefs.clone(),
            ..ModuleBuilder::default()
        };
        for (n, value, span) in self.global_enum_consts.clone() {
            self.cur.add_param(n, true, value, span);
        }
        while self.at("import") {
            self.skip_to_semicolon();
        }
        if self.eat("#") {
            self.expect("(")?;
            self.param_port_list()?;
            self.expect(")")?;
        }
        if self.eat("(") {
            self.port_list()?;
        }
        self.expect(";")?;
        loop {
            if self.eof() {
                let span = self.toks[start].span.clone();
                self.diags.push(
                    Diagnostic::error(
                        DiagCode::UnbalancedModule,
                        format!("module '{name}' has no 'endmodule'"),
                    )
                    .with_span(span),
                );
                break;
            }
            if self.at("endmodule") {
                self.pos += 1;
                if self.eat(":") {
                    self.expect_ident()?;
                }
                break;
            }
            if self.at("module") || self.at("macromodule") {
                let span = self.toks[start].span.clone();
                self.diags.push(
                    Diagnostic::error(
                        DiagCode::UnbalancedModule,
                        format!("module '{name}' has no 'endmodule' before next module"),
                    )
                    .with_span(span),
                );
                break;
            }
            self.module_item()?;
        }
        let span = self.span_from(start);
        Ok(self.finish_module(name, span))
    }

    fn finish_module(&mut self, name: String, span: SourceSpan) -> DesignUnit {
        let b = std::mem::take(&mut self.cur);
        let mut symbols = SymbolTable::default();
        for (i, p) in b.params.iter().enumerate() {
            symbols.insert(
                p.name.clone(),
                Symbol::Param {
                    index: i,
                    value: p.resolved,
                },
            );
        }
        for (i, s) in b.signals.iter().enumerate() {
            symbols.insert(s.name.clone(), Symbol::Signal(i));
        }
        for lv in &b.loop_vars {
            if !symbols.contains(lv) {
                symbols.insert(lv.clone(), Symbol::LoopVar);
            }
        }
        DesignUnit {
            name,
            ports: b.ports,
            params: b.params,
            signals: b.signals,
            always_blocks: b.always_blocks,
            continuous_assigns: b.continuous_assigns,
            instances: b.instances,
            initial_blocks: b.initial_blocks,
            symbols,
            span,
            source: self.source.clone(),
        }
    }

    fn param_port_list(&mut self) -> PResult<()> {
        if self.at(")") {
            return Ok(());
        }
        let mut local = false;
        loop {
            let start = self.pos;
            if self.eat("localparam") {
                local = true;
            } else if self.eat("parameter") {
                local = false;
            }
            self.skip_param_type()?;
            let (name, _) = self.expect_ident()?;
            self.expect("=")?;
            let value = self.expr()?;
            let span = self.span_from(start);
            self.cur.add_param(name, local, value, span);
            if !self.eat(",") {
                return Ok(());
            }
        }
    }

    fn skip_param_type(&mut self) -> PResult<()> {
        if self.at_any(VAR_TYPES) || self.at_any(&["signed", "unsigned"]) || self.at("[") {
            self.data_type()?;
        } else if self.at_ident() && self.peek_at(1).is_some_and(|t| t.kind == TokenKind::Identifier) {
            self.pos += 1;
        }
        Ok(())
    }

    fn port_list(&mut self) -> PResult<()> {
        if self.eat(")") {
            return Ok(());
        }
        let ansi = self.at_any(DIRECTIONS)
            || self.at_any(NET_TYPES)
            || self.at_any(VAR_TYPES)
            || self
                .peek_at(1)
                .is_some_and(|t| t.kind == TokenKind::Identifier || t.is(".") || t.is("["));
        if !ansi {
            loop {
                self.expect_ident()?;
                if self.eat(",") {
                    continue;
                }
                self.expect(")")?;
                return Ok(());
            }
        }
        let mut dir = Direction::Inout;
        let mut tspec = TypeSpec {
            kind: None,
            packed: Packed::scalar(),
        };
        let mut explicit_range = false;
        loop {
            let start = self.pos;
            if let Some(d) = self.direction() {
                dir = d;
                let (ts, explicit) = self.optional_type()?;
                tspec = ts;
                explicit_range = explicit;
            } else if self.at_any(NET_TYPES) || self.at_any(VAR_TYPES) || self.at("[") || self.at("signed") {
                let (ts, explicit) = self.optional_type()?;
                tspec = ts;
                explicit_range = explicit;
            } else if self.at_ident() && self.peek_at(1).is_some_and(|t| t.is(".")) {
                let span = self.cur_span();
                self.skipped("interface port", span);
                while !self.at(",") && !self.at(")") && !self.eof() {
                    self.pos += 1;
                }
                if self.eat(",") {
                    continue;
                }
                self.expect(")")?;
                return Ok(());
            } else if self.at_ident() && self.peek_at(1).is_some_and(|t| t.kind == TokenKind::Identifier) {
                let (tname, span) = self.expect_ident()?;
                tspec = self.named_type(&tname, span);
                explicit_range = true;
            }
            let (name, _) = self.expect_ident()?;
            let array = self.unpacked_dims()?;
            if self.eat("=") {
                self.expr()?;
            }
            let span = self.span_from(start);
            let kind = dir_kind(dir);
            self.cur.ports.push(PortDecl {
                name: name.clone(),
                direction: dir,
                range: tspec.packed.range.clone(),
                span: span.clone(),
            });
            self.cur
                .declare(&name, kind, &tspec.packed, explicit_range, array, None, span);
            if self.eat(",") {
                continue;
            }
            self.expect(")")?;
            return Ok(());
        }
    }

    fn direction(&mut self) -> Option<Direction> {
        let d = match self.peek()?.lexeme.as_str() {
            "input" => Direction::Input,
            "output" => Direction::Output,
            "inout" => Direction::Inout,
            _ => return None,
        };
        if self.peek()?.kind != TokenKind::Keyword {
            return None;
        }
        self.pos += 1;
        Some(d)
    }

    fn named_type(&mut self, tname: &str, span: SourceSpan) -> TypeSpec {
        match self.cur.typedefs.get(tname) {
            Some(td) => TypeSpec {
                kind: Some(SignalKind::Logic),
                packed: td.packed.clone(),
            },
            None => {
                self.diags.push(
                    Diagnostic::warning(
                        DiagCode::UnresolvedReference,
                        format!("unknown type '{tname}'; width left unresolved"),
                    )
                    .with_span(span),
                );
                TypeSpec {
                    kind: Some(SignalKind::Logic),
                    packed: Packed::unknown(),
                }
            }
        }
    }

    /// Optional data type after a direction. Returns the type and whether a
    /// width was stated.
    fn optional_type(&mut self) -> PResult<(TypeSpec, bool)> {
        if self.at_any(NET_TYPES) || self.at_any(VAR_TYPES) || self.at("[") || self.at_any(&["signed", "unsigned"]) {
            let explicit = !self.at_any(NET_TYPES) && !self.at_any(&["reg", "logic", "bit"])
                || self.peek_at(1).is_some_and(|t| t.is("["))
                || self.peek_at(2).is_some_and(|t| t.is("["));
            let ts = self.data_type()?;
            let explicit = explicit || ts.packed.range.is_some();
            return Ok((ts, explicit));
        }
        if self.at_ident() && self.peek_at(1).is_some_and(|t| t.kind == TokenKind::Identifier) {
            let (tname, span) = self.expect_ident()?;
            return Ok((self.named_type(&tname, span), true));
        }
        Ok((
            TypeSpec {
                kind: None,
                packed: Packed::scalar(),
            },
            false,
        ))
    }

    /// `[net_type|var_type] [signed|unsigned] {[msb:lsb]}`
    fn data_type(&mut self) -> PResult<TypeSpec> {
        let mut kind = None;
        let mut fixed = None;
        if self.at_any(NET_TYPES) {
            self.pos += 1;
            kind = Some(SignalKind::Wire);
            if self.eat("logic") || self.eat("reg") {}
        } else if let Some(t) = self.peek() {
            match t.lexeme.as_str() {
                "reg" => kind = Some(SignalKind::Reg),
                "logic" | "bit" => kind = Some(SignalKind::Logic),
                "integer" | "int" => {
                    kind = Some(SignalKind::Logic);
                    fixed = Some(32);
                }
                "byte" => {
                    kind = Some(SignalKind::Logic);
                    fixed = Some(8);
                }
                "shortint" => {
                    kind = Some(SignalKind::Logic);
                    fixed = Some(16);
                }
                "longint" => {
                    kind = Some(SignalKind::Logic);
                    fixed = Some(64);
                }
                _ => {}
            }
            if kind.is_some() && t.kind == TokenKind::Keyword {
                self.pos += 1;
            } else {
                kind = None;
                fixed = None;
            }
        }
        let _ = self.eat("signed") || self.eat("unsigned");
        if let Some(w) = fixed {
            return Ok(TypeSpec {
                kind,
                packed: Packed::fixed(w),
            });
        }
        let packed = self.packed_dims()?;
        Ok(TypeSpec { kind, packed })
    }

    fn packed_dims(&mut self) -> PResult<Packed> {
        let mut dims: Vec<Range> = Vec::new();
        while self.at("[") {
            self.pos += 1;
            let msb = self.expr()?;
            self.expect(":")?;
            let lsb = self.expr()?;
            self.expect("]")?;
            dims.push(Range { msb, lsb });
        }
        match dims.len() {
            0 => Ok(Packed::scalar()),
            1 => {
                let r = dims.pop().expect("one dim");
                let m = const_eval(&r.msb, &self.cur.consts);
                let l = const_eval(&r.lsb, &self.cur.consts);
                Ok(match (m, l) {
                    (Some(msb), Some(lsb)) => Packed {
                        range: Some(r),
                        msb,
                        lsb,
                        resolved: true,
                    },
                    _ => Packed {
                        range: Some(r),
                        msb: 0,
                        lsb: 0,
                        resolved: false,
                    },
                })
            }
            _ => {
                let mut total = 1i64;
                for r in &dims {
                    match (
                        const_eval(&r.msb, &self.cur.consts),
                        const_eval(&r.lsb, &self.cur.consts),
                    ) {
                        (Some(m), Some(l)) => total *= (m - l).abs() + 1,
                        _ => return Ok(Packed::unknown()),
                    }
                }
                Ok(Packed::fixed(total))
            }
        }
    }

    fn unpacked_dims(&mut self) -> PResult<Option<(i64, i64)>> {
        let mut first = None;
        let mut count = 0;
        while self.at("[") {
            let start = self.pos;
            self.pos += 1;
            let a = self.expr()?;
            let dim = if self.eat(":") {
                let b = self.expr()?;
                match (const_eval(&a, &self.cur.consts), const_eval(&b, &self.cur.consts)) {
                    (Some(x), Some(y)) => Some((x, y)),
                    _ => None,
                }
            } else {
                const_eval(&a, &self.cur.consts).map(|n| (0, n - 1))
            };
            self.expect("]")?;
            count += 1;
            if count == 1 {
                first = Some(dim.unwrap_or((0, 0)));
            } else {
                let span = self.span_from(start);
                self.skipped("multi-dimensional unpacked array (only first dimension kept)", span);
            }
        }
        Ok(first)
    }

    // ---- module items --------------------------------------------------

    fn module_item(&mut self) -> PResult<()> {
        let start = self.pos;
        let Some(tok) = self.peek() else {
            return Ok(());
        };
        let lex = tok.lexeme.clone();
        let is_kw = tok.kind == TokenKind::Keyword;
        if lex == ";" {
            self.pos += 1;
            return Ok(());
        }
        if is_kw {
            match lex.as_str() {
                "input" | "output" | "inout" => return self.port_decl(),
                "wire" | "tri" | "wand" | "wor" | "supply0" | "supply1" | "reg" | "logic" | "bit" | "integer"
                | "int" | "byte" | "shortint" | "longint" | "signed" => return self.net_decl(None),
                "genvar" => {
                    self.pos += 1;
                    loop {
                        let (n, _) = self.expect_ident()?;
                        self.cur.loop_vars.push(n);
                        if !self.eat(",") {
                            break;
                        }
                    }
                    self.expect(";")?;
                    return Ok(());
                }
                "parameter" | "localparam" => return self.param_decl(),
                "assign" => return self.continuous_assign(),
                "always" | "always_ff" | "always_comb" | "always_latch" => return self.always(),
                "initial" => {
                    self.pos += 1;
                    let body = self.stmt()?;
                    self.cur.initial_blocks.push(body);
                    return Ok(());
                }
                "typedef" => return self.typedef(false),
                "generate" => {
                    self.skip_past("generate", "endgenerate")?;
                    let span = self.span_from(start);
                    self.skipped("generate block", span);
                    return Ok(());
                }
                "for" | "if" | "case" => {
                    self.skip_generate_construct()?;
                    let span = self.span_from(start);
                    self.skipped("generate construct", span);
                    return Ok(());
                }
                "function" | "task" | "property" | "sequence" | "class" | "interface" => {
                    let end = format!("end{lex}");
                    self.skip_past(&lex, &end)?;
                    let span = self.span_from(start);
                    self.skipped(&lex, span);
                    return Ok(());
                }
                "assert" | "assume" | "cover" | "import" | "default" => {
                    self.skip_to_semicolon();
                    let span = self.span_from(start);
                    self.skipped(&lex, span);
                    return Ok(());
                }
                _ => {}
            }
        }
        if tok.kind == TokenKind::Identifier {
            // labelled concurrent assertion
            if self.peek_at(1).is_some_and(|t| t.is(":")) {
                self.skip_to_semicolon();
                let span = self.span_from(start);
                self.skipped("labelled item", span);
                return Ok(());
            }
            if self.looks_like_instance() {
                return self.instances();
            }
            if self.peek_at(1).is_some_and(|t| t.kind == TokenKind::Identifier) {
                let (tname, span) = self.expect_ident()?;
                let ts = self.named_type(&tname, span);
                return self.net_decl(Some(ts));
            }
        }
        self.skip_to_semicolon();
        let span = self.span_from(start);
        self.skipped(&format!("module item starting with '{lex}'"), span);
        if self.pos == start {
            self.pos += 1;
        }
        Ok(())
    }

    fn looks_like_instance(&self) -> bool {
        match self.peek_at(1) {
            Some(t) if t.is("#") => true,
            Some(t) if t.kind == TokenKind::Identifier => {
                let mut i = self.pos + 2;
                if self.toks.get(i).is_some_and(|t| t.is("[")) {
                    let mut depth = 0;
                    while let Some(t) = self.toks.get(i) {
                        if t.is("[") {
                            depth += 1;
                        } else if t.is("]") {
                            depth -= 1;
                            if depth == 0 {
                                i += 1;
                                break;
                            }
                        }
                        i += 1;
                    }
                }
                self.toks.get(i).is_some_and(|t| t.is("("))
            }
            _ => false,
        }
    }

    fn skip_generate_construct(&mut self) -> PResult<()> {
        if self.eat("for") {
            self.skip_balanced_parens()?;
            self.skip_generate_body()
        } else if self.eat("if") {
            self.skip_balanced_parens()?;
            self.skip_generate_body()?;
            if self.eat("else") {
                if self.at("if") {
                    self.skip_generate_construct()?;
                } else {
                    self.skip_generate_body()?;
                }
            }
            Ok(())
        } else if self.at("case") {
            self.skip_past("case", "endcase")
        } else {
            self.skip_to_semicolon();
            Ok(())
        }
    }

    fn skip_generate_body(&mut self) -> PResult<()> {
        if self.at("begin") {
            self.skip_past("begin", "end")
        } else if self.at("for") || self.at("if") || self.at("case") {
            self.skip_generate_construct()
        } else {
            self.skip_to_semicolon();
            Ok(())
        }
    }

    fn port_decl(&mut self) -> PResult<()> {
        let start = self.pos;
        let dir = self.direction().expect("caller checked direction keyword");
        let (ts, explicit) = self.optional_type()?;
        loop {
            let (name, _) = self.expect_ident()?;
            let array = self.unpacked_dims()?;
            let span = self.span_from(start);
            if !self.cur.ports.iter().any(|p| p.name == name) {
                self.cur.ports.push(PortDecl {
                    name: name.clone(),
                    direction: dir,
                    range: ts.packed.range.clone(),
                    span: span.clone(),
                });
            }
            self.cur
                .declare(&name, dir_kind(dir), &ts.packed, explicit, array, None, span);
            if !self.eat(",") {
                break;
            }
        }
        self.expect(";")?;
        Ok(())
    }

    fn net_decl(&mut self, named: Option<TypeSpec>) -> PResult<()> {
        let start = self.pos;
        let (ts, explicit) = match named {
            Some(ts) => (ts, true),
            None => {
                let ts = self.data_type()?;
                (ts, true)
            }
        };
        let kind = ts.kind.unwrap_or(SignalKind::Logic);
        loop {
            let name_start = self.pos;
            let (name, _) = self.expect_ident()?;
            let array = self.unpacked_dims()?;
            let mut init = None;
            if self.eat("=") {
                let rhs = self.expr()?;
                if kind == SignalKind::Wire {
                    let span = self.span_from(name_start);
                    let lhs_span = self.toks[name_start].span.clone();
                    self.cur.continuous_assigns.push(Assign {
                        lhs: Expr::new(ExprKind::Ident(name.clone()), lhs_span),
                        rhs,
                        span,
                    });
                } else {
                    init = Some(rhs);
                }
            }
            let span = self.span_from(start);
            self.cur.declare(&name, kind, &ts.packed, explicit, array, init, span);
            if !self.eat(",") {
                break;
            }
        }
        self.expect(";")?;
        Ok(())
    }

    fn param_decl(&mut self) -> PResult<()> {
        let local = self.bump().lexeme == "localparam";
        if self.at_ident() && self.peek_at(1).is_some_and(|t| t.is("=")) {
            // plain name
        } else if self.at("type") {
            return self.error("type parameters are not supported");
        } else {
            self.skip_param_type()?;
        }
        loop {
            let start = self.pos;
            let (name, _) = self.expect_ident()?;
            self.expect("=")?;
            let value = self.expr()?;
            let span = self.span_from(start);
            self.cur.add_param(name, local, value, span);
            if !self.eat(",") {
                break;
            }
        }
        self.expect(";")?;
        Ok(())
    }

    fn typedef(&mut self, global: bool) -> PResult<()> {
        let start = self.pos;
        self.expect("typedef")?;
        let packed = if self.eat("enum") {
            let base = if self.at("{") {
                Packed::fixed(32)
            } else {
                self.data_type()?.packed
            };
            self.expect("{")?;
            let mut next = 0i64;
            loop {
                let item_start = self.pos;
                let (name, span) = self.expect_ident()?;
                let value = if self.eat("=") {
                    self.expr()?
                } else {
                    Expr::new(
                        ExprKind::Number(NumberLit::unsized_decimal(next.max(0) as u128)),
                        span.clone(),
                    )
                };
                if let Some(v) = const_eval(&value, &self.cur.consts) {
                    next = v + 1;
                } else {
                    next += 1;
                }
                let span = self.span_from(item_start);
                if global {
                    self.global_enum_consts
                        .push((name.clone(), value.clone(), span.clone()));
                }
                self.cur.add_param(name, true, value, span);
                if !self.eat(",") {
                    break;
                }
            }
            self.expect("}")?;
            base
        } else if self.eat("struct") {
            let is_packed = self.eat("packed");
            let _ = self.eat("signed") || self.eat("unsigned");
            self.expect("{")?;
            let mut total = Some(0i64);
            while !self.at("}") {
                if self.eof() {
                    return self.error("unterminated struct");
                }
                let ts = if self.at_ident() {
                    let (tname, span) = self.expect_ident()?;
                    self.named_type(&tname, span)
                } else {
                    self.data_type()?
                };
                loop {
                    self.expect_ident()?;
                    total = match (total, ts.packed.resolved) {
                        (Some(t), true) => Some(t + ts.packed.width()),
                        _ => None,
                    };
                    if !self.eat(",") {
                        break;
                    }
                }
                self.expect(";")?;
            }
            self.expect("}")?;
            match (is_packed, total) {
                (true, Some(w)) if w > 0 => Packed::fixed(w),
                _ => Packed::unknown(),
            }
        } else if self.at_ident() {
            let (tname, span) = self.expect_ident()?;
            self.named_type(&tname, span).packed
        } else {
            self.data_type()?.packed
        };
        let (name, _) = self.expect_ident()?;
        self.expect(";")?;
        let _ = start;
        let td = TypeDef { packed };
        if global {
            self.global_typedefs.insert(name.clone(), td.clone());
        }
        self.cur.typedefs.insert(name, td);
        Ok(())
    }

    fn continuous_assign(&mut self) -> PResult<()> {
        self.expect("assign")?;
        self.skip_delay()?;
        loop {
            let start = self.pos;
            let lhs = self.lvalue()?;
            self.expect("=")?;
            let rhs = self.expr()?;
            let span = self.span_from(start);
            self.cur.continuous_assigns.push(Assign { lhs, rhs, span });
            if !self.eat(",") {
                break;
            }
        }
        self.expect(";")?;
        Ok(())
    }

    fn skip_delay(&mut self) -> PResult<()> {
        if self.eat("#") {
            if self.at("(") {
                self.skip_balanced_parens()?;
            } else {
                self.pos += 1;
                if self.peek().is_some_and(|t| TIME_UNITS.contains(&t.lexeme.as_str())) {
                    self.pos += 1;
                }
            }
        }
        Ok(())
    }

    fn always(&mut self) -> PResult<()> {
        let start = self.pos;
        let kind = match self.bump().lexeme.as_str() {
            "always_ff" => AlwaysKind::AlwaysFf,
            "always_comb" => AlwaysKind::AlwaysComb,
            "always_latch" => AlwaysKind::AlwaysLatch,
            _ => AlwaysKind::Always,
        };
        let sensitivity = match kind {
            AlwaysKind::AlwaysComb | AlwaysKind::AlwaysLatch => Sensitivity::Star,
            _ => {
                if !self.at("@") {
                    self.skip_delay()?;
                    self.stmt()?;
                    let span = self.span_from(start);
                    self.skipped("always block without event control", span);
                    return Ok(());
                }
                self.sensitivity()?
            }
        };
        let body = self.stmt()?;
        let span = self.span_from(start);
        self.cur.always_blocks.push(AlwaysBlock {
            kind,
            sensitivity,
            body,
            span,
        });
        Ok(())
    }

    fn sensitivity(&mut self) -> PResult<Sensitivity> {
        self.expect("@")?;
        if self.eat("*") {
            return Ok(Sensitivity::Star);
        }
        if !self.at("(") {
            let e = self.postfix_primary()?;
            return Ok(Sensitivity::List(vec![SensItem { edge: None, expr: e }]));
        }
        self.expect("(")?;
        if self.eat("*") {
            self.expect(")")?;
            return Ok(Sensitivity::Star);
        }
        let mut items = Vec::new();
        loop {
            let edge = if self.eat("posedge") {
                Some(Edge::Posedge)
            } else if self.eat("negedge") {
                Some(Edge::Negedge)
            } else {
                None
            };
            let expr = self.expr()?;
            items.push(SensItem { edge, expr });
            if self.eat("or") || self.eat(",") {
                continue;
            }
            break;
        }
        self.expect(")")?;
        Ok(Sensitivity::List(items))
    }

    fn instances(&mut self) -> PResult<()> {
        let (module_name, _) = self.expect_ident()?;
        let params = if self.eat("#") {
            self.expect("(")?;
            self.connection_list()?
        } else {
            Vec::new()
        };
        loop {
            let start = self.pos;
            let (name, _) = self.expect_ident()?;
            if self.at("[") {
                self.unpacked_dims()?;
            }
            self.expect("(")?;
            let port_connections = self.connection_list()?;
            let span = self.span_from(start);
            self.cur.instances.push(Instance {
                module_name: module_name.clone(),
                name,
                params: params.clone(),
                port_connections,
                span,
            });
            if !self.eat(",") {
                break;
            }
        }
        self.expect(";")?;
        Ok(())
    }

    /// After the opening `(`; consumes the closing `)`.
    fn connection_list(&mut self) -> PResult<Vec<PortConnection>> {
        let mut out = Vec::new();
        if self.eat(")") {
            return Ok(out);
        }
        loop {
            let start = self.pos;
            let conn = if self.eat(".*") {
                PortConnection {
                    port: Some("*".into()),
                    expr: None,
                    span: self.span_from(start),
                }
            } else if self.eat(".") {
                let (port, pspan) = self.expect_ident()?;
                let expr = if self.eat("(") {
                    let e = if self.at(")") { None } else { Some(self.expr()?) };
                    self.expect(")")?;
                    e
                } else {
                    Some(Expr::new(ExprKind::Ident(port.clone()), pspan))
                };
                PortConnection {
                    port: Some(port),
                    expr,
                    span: self.span_from(start),
                }
            } else {
                let e = self.expr()?;
                PortConnection {
                    port: None,
                    expr: Some(e),
                    span: self.span_from(start),
                }
            };
            out.push(conn);
            if self.eat(",") {
                continue;
            }
            self.expect(")")?;
            return Ok(out);
        }
    }

    // ---- statements ----------------------------------------------------

    fn stmt(&mut self) -> PResult<Stmt> {
        let start = self.pos;
        let Some(tok) = self.peek() else {
            return self.error("expected statement");
        };
        let lex = tok.lexeme.clone();
        let kind = tok.kind.clone();
        if kind == TokenKind::Keyword || kind == TokenKind::Punctuation || kind == TokenKind::Operator {
            match lex.as_str() {
                "begin" => return self.block(),
                "if" => return self.if_stmt(),
                "unique" | "priority" => {
                    self.pos += 1;
                    return if self.at("if") {
                        self.if_stmt()
                    } else {
                        self.case_stmt()
                    };
                }
                "case" | "casez" | "casex" => return self.case_stmt(),
                "for" => return self.for_stmt(),
                ";" => {
                    self.pos += 1;
                    return Ok(Stmt::new(StmtKind::Null, self.span_from(start)));
                }
                "while" | "repeat" => {
                    self.pos += 1;
                    self.skip_balanced_parens()?;
                    self.stmt()?;
                    return Ok(self.skipped_stmt(&lex, start));
                }
                "forever" => {
                    self.pos += 1;
                    self.stmt()?;
                    return Ok(self.skipped_stmt(&lex, start));
                }
                "@" => {
                    self.sensitivity()?;
                    self.stmt()?;
                    return Ok(self.skipped_stmt("event control", start));
                }
                "#" => {
                    self.skip_delay()?;
                    self.stmt()?;
                    return Ok(self.skipped_stmt("delay control", start));
                }
                "assert" | "assume" | "cover" => {
                    self.pos += 1;
                    if self.at("(") {
                        self.skip_balanced_parens()?;
                    }
                    if self.at(";") {
                        self.pos += 1;
                    } else if !self.at("else") {
                        self.stmt()?;
                    }
                    if self.eat("else") {
                        self.stmt()?;
                    }
                    return Ok(self.skipped_stmt("immediate assertion", start));
                }
                "disable" => {
                    self.skip_to_semicolon();
                    return Ok(self.skipped_stmt("disable", start));
                }
                "reg" | "logic" | "bit" | "integer" | "int" | "byte" | "shortint" | "longint" | "wire" => {
                    self.net_decl(None)?;
                    return Ok(Stmt::new(StmtKind::Null, self.span_from(start)));
                }
                _ => {}
            }
        }
        if kind == TokenKind::SystemIdentifier {
            self.pos += 1;
            let args = if self.at("(") { self.call_args()? } else { Vec::new() };
            self.expect(";")?;
            return Ok(Stmt::new(
                StmtKind::SystemTask { name: lex, args },
                self.span_from(start),
            ));
        }
        if kind == TokenKind::Identifier {
            if self.peek_at(1).is_some_and(|t| t.is("(")) {
                self.skip_to_semicolon();
                return Ok(self.skipped_stmt("task call", start));
            }
            if self.peek_at(1).is_some_and(|t| t.kind == TokenKind::Identifier) && self.cur.typedefs.contains_key(&lex)
            {
                let (tname, span) = self.expect_ident()?;
                let ts = self.named_type(&tname, span);
                self.net_decl(Some(ts))?;
                return Ok(Stmt::new(StmtKind::Null, self.span_from(start)));
            }
            if matches!(lex.as_str(), "return" | "break" | "continue") {
                self.skip_to_semicolon();
                return Ok(self.skipped_stmt(&lex, start));
            }
        }
        if kind == TokenKind::Operator && (lex == "++" || lex == "--") {
            self.pos += 1;
            let lhs = self.lvalue()?;
            self.expect(";")?;
            return Ok(self.incdec(lhs, &lex, start));
        }
        let s = self.assignment(start)?;
        self.expect(";")?;
        Ok(Stmt::new(s.kind, self.span_from(start)))
    }

    fn skipped_stmt(&mut self, what: &str, start: usize) -> Stmt {
        let span = self.span_from(start);
        self.skipped(what, span.clone());
        Stmt::new(StmtKind::Null, span)
    }

    fn incdec(&self, lhs: Expr, op: &str, start: usize) -> Stmt {
        let span = self.span_from(start);
        let bop = if op == "++" { BinaryOp::Add } else { BinaryOp::Sub };
        let one = Expr::new(ExprKind::Number(NumberLit::unsized_decimal(1)), span.clone());
        let rhs = Expr::new(
            ExprKind::Binary {
                op: bop,
                lhs: Box::new(lhs.clone()),
                rhs: Box::new(one),
            },
            span.clone(),
        );
        Stmt::new(StmtKind::BlockingAssign { lhs, rhs }, span)
    }

    /// `lvalue (= | <= | op=) expr` or `lvalue++`, without the semicolon.
    fn assignment(&mut self, start: usize) -> PResult<Stmt> {
        let lhs = self.lvalue()?;
        let Some(op) = self.peek().map(|t| t.lexeme.clone()) else {
            return self.error("expected assignment operator");
        };
        match op.as_str() {
            "=" | "<=" => {
                self.pos += 1;
                self.skip_delay()?;
                let rhs = self.expr()?;
                let span = self.span_from(start);
                Ok(Stmt::new(
                    if op == "=" {
                        StmtKind::BlockingAssign { lhs, rhs }
                    } else {
                        StmtKind::NonblockingAssign { lhs, rhs }
                    },
                    span,
                ))
            }
            "++" | "--" => {
                self.pos += 1;
                Ok(self.incdec(lhs, &op, start))
            }
            "+=" | "-=" | "*=" | "/=" | "%=" | "|=" | "&=" | "^=" | "<<=" | ">>=" => {
                self.pos += 1;
                let rhs = self.expr()?;
                let span = self.span_from(start);
                let bop = BinaryOp::from_symbol(&op[..op.len() - 1]).expect("compound operator");
                let rhs = Expr::new(
                    ExprKind::Binary {
                        op: bop,
                        lhs: Box::new(lhs.clone()),
                        rhs: Box::new(rhs),
                    },
                    span.clone(),
                );
                Ok(Stmt::new(StmtKind::BlockingAssign { lhs, rhs }, span))
            }
            _ => self.error("expected assignment operator"),
        }
    }

    fn block(&mut self) -> PResult<Stmt> {
        let start = self.pos;
        self.expect("begin")?;
        let label = if self.eat(":") {
            Some(self.expect_ident()?.0)
        } else {
            None
        };
        let mut stmts = Vec::new();
        while !self.at("end") {
            if self.eof() || self.at("endmodule") {
                return self.error("missing 'end'");
            }
            stmts.push(self.stmt()?);
        }
        self.expect("end")?;
        if self.eat(":") {
            self.expect_ident()?;
        }
        Ok(Stmt::new(StmtKind::Block { label, stmts }, self.span_from(start)))
    }

    fn if_stmt(&mut self) -> PResult<Stmt> {
        let start = self.pos;
        self.expect("if")?;
        self.expect("(")?;
        let cond = self.expr()?;
        self.expect(")")?;
        let then_stmt = Box::new(self.stmt()?);
        let else_stmt = if self.eat("else") {
            Some(Box::new(self.stmt()?))
        } else {
            None
        };
        Ok(Stmt::new(
            StmtKind::If {
                cond,
                then_stmt,
                else_stmt,
            },
            self.span_from(start),
        ))
    }

    fn case_stmt(&mut self) -> PResult<Stmt> {
        let start = self.pos;
        let kind = match self.bump().lexeme.as_str() {
            "casez" => CaseKind::Casez,
            "casex" => CaseKind::Casex,
            "case" => CaseKind::Case,
            _ => return self.error("expected case"),
        };
        self.expect("(")?;
        let selector = self.expr()?;
        self.expect(")")?;
        if self.at("inside") {
            return self.error("case-inside is not supported");
        }
        let mut items = Vec::new();
        let mut default = None;
        while !self.at("endcase") {
            if self.eof() || self.at("endmodule") {
                return self.error("missing 'endcase'");
            }
            let item_start = self.pos;
            if self.eat("default") {
                let _ = self.eat(":");
                default = Some(Box::new(self.stmt()?));
                continue;
            }
            let mut labels = vec![self.expr()?];
            while self.eat(",") {
                labels.push(self.expr()?);
            }
            self.expect(":")?;
            let body = self.stmt()?;
            items.push(CaseItem {
                labels,
                body,
                span: self.span_from(item_start),
            });
        }
        self.expect("endcase")?;
        Ok(Stmt::new(
            StmtKind::Case {
                kind,
                selector,
                items,
                default,
            },
            self.span_from(start),
        ))
    }

    fn for_stmt(&mut self) -> PResult<Stmt> {
        let start = self.pos;
        self.expect("for")?;
        self.expect("(")?;
        let init_start = self.pos;
        if self.at_any(&["int", "integer", "genvar", "logic", "bit", "reg", "automatic"]) {
            let _ = self.eat("automatic");
            self.data_type()?;
            if let Some(t) = self.peek() {
                if t.kind == TokenKind::Identifier {
                    let name = t.lexeme.clone();
                    if !self.cur.signal_index.contains_key(&name) {
                        self.cur.loop_vars.push(name);
                    }
                }
            }
        }
        let init = self.assignment(init_start)?;
        self.expect(";")?;
        let cond = self.expr()?;
        self.expect(";")?;
        let step_start = self.pos;
        let step = if self.at("++") || self.at("--") {
            let op = self.bump().lexeme;
            let lhs = self.lvalue()?;
            self.incdec(lhs, &op, step_start)
        } else {
            self.assignment(step_start)?
        };
        self.expect(")")?;
        let body = self.stmt()?;
        Ok(Stmt::new(
            StmtKind::For {
                init: Box::new(init),
                cond,
                step: Box::new(step),
                body: Box::new(body),
            },
            self.span_from(start),
        ))
    }

    fn lvalue(&mut self) -> PResult<Expr> {
        if self.at("{") {
            return self.primary();
        }
        if !self.at_ident() {
            return self.error("expected assignment target");
        }
        self.postfix_primary()
    }

    // ---- expressions ---------------------------------------------------

    pub(crate) fn expr(&mut self) -> PResult<Expr> {
        let start = self.pos;
        let cond = self.binary(0)?;
        if self.eat("?") {
            let then_expr = self.expr()?;
            self.expect(":")?;
            let else_expr = self.expr()?;
            return Ok(Expr::new(
                ExprKind::Ternary {
                    cond: Box::new(cond),
                    then_expr: Box::new(then_expr),
                    else_expr: Box::new(else_expr),
                },
                self.span_from(start),
            ));
        }
        Ok(cond)
    }

    fn peek_binary_op(&self) -> Option<BinaryOp> {
        let t = self.peek()?;
        if t.kind != TokenKind::Operator {
            return None;
        }
        BinaryOp::from_symbol(&t.lexeme)
    }

    fn binary(&mut self, min_prec: u8) -> PResult<Expr> {
        let start = self.pos;
        let mut lhs = self.unary()?;
        while let Some(op) = self.peek_binary_op() {
            let prec = op.precedence();
            if prec <= min_prec {
                break;
            }
            self.pos += 1;
            let rhs = self.binary(prec)?;
            lhs = Expr::new(
                ExprKind::Binary {
                    op,
                    lhs: Box::new(lhs),
                    rhs: Box::new(rhs),
                },
                self.span_from(start),
            );
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        let start = self.pos;
        if let Some(t) = self.peek() {
            if t.kind == TokenKind::Operator {
                if let Some(op) = UnaryOp::from_symbol(&t.lexeme) {
                    self.pos += 1;
                    let operand = self.unary()?;
                    return Ok(Expr::new(
                        ExprKind::Unary {
                            op,
                            operand: Box::new(operand),
                        },
                        self.span_from(start),
                    ));
                }
            }
        }
        self.postfix_primary()
    }

    fn postfix_primary(&mut self) -> PResult<Expr> {
        let start = self.pos;
        let mut e = self.primary()?;
        // size / type casts: 8'(x), logic'(x)
        if self.at("'") && self.peek_at(1).is_some_and(|t| t.is("(")) {
            self.pos += 1;
            self.expect("(")?;
            let inner = self.expr()?;
            self.expect(")")?;
            return Ok(inner);
        }
        while self.at("[") {
            self.pos += 1;
            let first = self.expr()?;
            let kind = if self.eat(":") {
                let lsb = self.expr()?;
                ExprKind::PartSelect {
                    base: Box::new(e),
                    msb: Box::new(first),
                    lsb: Box::new(lsb),
                }
            } else if self.at("+:") || self.at("-:") {
                let ascending = self.bump().lexeme == "+:";
                let width = self.expr()?;
                ExprKind::IndexedPartSelect {
                    base: Box::new(e),
                    start: Box::new(first),
                    width: Box::new(width),
                    ascending,
                }
            } else {
                ExprKind::Index {
                    base: Box::new(e),
                    index: Box::new(first),
                }
            };
            self.expect("]")?;
            e = Expr::new(kind, self.span_from(start));
        }
        Ok(e)
    }

    fn call_args(&mut self) -> PResult<Vec<Expr>> {
        self.expect("(")?;
        let mut args = Vec::new();
        if self.eat(")") {
            return Ok(args);
        }
        loop {
            args.push(self.expr()?);
            if self.eat(",") {
                continue;
            }
            self.expect(")")?;
            return Ok(args);
        }
    }

    fn primary(&mut self) -> PResult<Expr> {
        let start = self.pos;
        let Some(tok) = self.peek().cloned() else {
            return self.error("expected expression");
        };
        match &tok.kind {
            TokenKind::Number(n) => {
                self.pos += 1;
                Ok(Expr::new(ExprKind::Number(n.clone()), tok.span))
            }
            TokenKind::Identifier => {
                self.pos += 1;
                let mut name = tok.lexeme.clone();
                loop {
                    if self.at("::") || self.at(".") {
                        let sep = self.bump().lexeme;
                        let (part, _) = self.expect_ident()?;
                        name.push_str(&sep);
                        name.push_str(&part);
                    } else {
                        break;
                    }
                }
                if self.at("(") {
                    let args = self.call_args()?;
                    return Ok(Expr::new(ExprKind::Call { name, args }, self.span_from(start)));
                }
                Ok(Expr::new(ExprKind::Ident(name), self.span_from(start)))
            }
            TokenKind::SystemIdentifier => {
                self.pos += 1;
                let args = if self.at("(") { self.call_args()? } else { Vec::new() };
                Ok(Expr::new(
                    ExprKind::Call {
                        name: tok.lexeme.clone(),
                        args,
                    },
                    self.span_from(start),
                ))
            }
            TokenKind::Punctuation if tok.lexeme == "(" => {
                self.pos += 1;
                let inner = self.expr()?;
                // min:typ:max
                if self.eat(":") {
                    self.expr()?;
                    self.expect(":")?;
                    self.expr()?;
                }
                self.expect(")")?;
                Ok(inner)
            }
            TokenKind::Punctuation if tok.lexeme == "{" => {
                self.pos += 1;
                let first = self.expr()?;
                if self.at("{") {
                    self.pos += 1;
                    let mut items = vec![self.expr()?];
                    while self.eat(",") {
                        items.push(self.expr()?);
                    }
                    self.expect("}")?;
                    self.expect("}")?;
                    return Ok(Expr::new(
                        ExprKind::Replication {
                            count: Box::new(first),
                            items,
                        },
                        self.span_from(start),
                    ));
                }
                let mut items = vec![first];
                while self.eat(",") {
                    items.push(self.expr()?);
                }
                self.expect("}")?;
                Ok(Expr::new(ExprKind::Concat(items), self.span_from(start)))
            }
            _ => self.error("expected expression"),
        }
    }
}

fn dir_kind(d: Direction) -> SignalKind {
    match d {
        Direction::Input => SignalKind::Input,
        Direction::Output => SignalKind::Output,
        Direction::Inout => SignalKind::Inout,
    }
}

/// Parse a standalone expression (used for LLM-supplied condition text).
pub fn parse_expr(text: &str) -> Result<Expr, String> {
    let source = SourceFile::new("<expr>", text);
    let lexed = tokenize(text, "<expr>");
    if let Some(d) = lexed.diagnostics.first() {
        return Err(d.message.clone());
    }
    let mut p = Parser::new(&lexed.tokens, source);
    let e = p.expr().map_err(|e| e.message)?;
    if let Some(t) = p.peek() {
        return Err(format!("unexpected '{}' after expression", t.lexeme));
    }
    if p.diags.iter().any(|d| d.code == DiagCode::MacroNotExpanded) {
        return Err("macros are not supported in expressions".into());
    }
    Ok(e)
}
