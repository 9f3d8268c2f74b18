//! SPICE-subset netlist AST, parser and canonical emitter.
//!
//! The dialect covers `R`, `C`, `M`, `V`, `I` and `X` cards plus the
//! `.title`, `.subckt`/`.ends`, `.model` and `.end` directives. Keywords,
//! node names and model names are case-insensitive and stored lowercased;
//! element names keep their spelling but must be unique per scope ignoring
//! case. Anything outside the dialect becomes a diagnostic, never a panic.

use std::collections::{BTreeMap, HashSet};
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::error::NetlistError;
use crate::value::{canonical_number, parse_value, Value};

pub const GROUND: &str = "0";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ElementKind {
    Resistor,
    Capacitor,
    Mosfet,
    VSource,
    ISource,
    SubcktInstance,
}

impl ElementKind {
    pub fn from_letter(c: char) -> Option<Self> {
        Some(match c.to_ascii_uppercase() {
            'R' => ElementKind::Resistor,
            'C' => ElementKind::Capacitor,
            'M' => ElementKind::Mosfet,
            'V' => ElementKind::VSource,
            'I' => ElementKind::ISource,
            'X' => ElementKind::SubcktInstance,
            _ => return None,
        })
    }

    /// Fixed terminal count, `None` for subcircuit instances.
    pub fn terminal_count(self) -> Option<usize> {
        match self {
            ElementKind::Mosfet => Some(4),
            ElementKind::SubcktInstance => None,
            _ => Some(2),
        }
    }

    pub fn is_source(self) -> bool {
        matches!(self, ElementKind::VSource | ElementKind::ISource)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Element {
    pub kind: ElementKind,
    pub name: String,
    pub nodes: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, Value>,
    /// Model name for MOSFETs, subcircuit name for instances.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_ref: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<Value>,
}

impl Element {
    pub fn param(&self, key: &str) -> Option<f64> {
        self.params.get(key).map(|v| v.magnitude)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Nmos,
    Pmos,
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Polarity::Nmos => "nmos",
            Polarity::Pmos => "pmos",
        })
    }
}

/// Level-1 MOSFET model card. `vto` keeps the sign written on the card.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelCard {
    pub name: String,
    pub polarity: Polarity,
    pub level: u32,
    pub vto: f64,
    pub kp: f64,
    pub lambda: f64,
}

impl ModelCard {
    pub fn new(name: &str, polarity: Polarity, vto: f64, kp: f64) -> Self {
        ModelCard {
            name: name.to_ascii_lowercase(),
            polarity,
            level: 1,
            vto,
            kp,
            lambda: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubcktDef {
    pub name: String,
    pub ports: Vec<String>,
    pub body: Vec<Element>,
    #[serde(default)]
    pub local_models: BTreeMap<String, ModelCard>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub line: usize,
    pub col: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub line: usize,
    pub col: usize,
    pub severity: Severity,
    pub code: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(
            f,
            "{sev}[{}] line {}, col {}: {}",
            self.code, self.line, self.col, self.message
        )
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Netlist {
    pub title: String,
    pub elements: Vec<Element>,
    pub models: BTreeMap<String, ModelCard>,
    pub subckts: BTreeMap<String, SubcktDef>,
    /// Keyed by lowercased element name, or `subckt/name` inside a body.
    #[serde(default)]
    pub source_spans: BTreeMap<String, Span>,
    #[serde(default)]
    pub diagnostics: Vec<Diagnostic>,
}

/// Structural equality; spans and diagnostics are provenance, not structure.
impl PartialEq for Netlist {
    fn eq(&self, other: &Self) -> bool {
        self.title == other.title
            && self.elements == other.elements
            && self.models == other.models
            && self.subckts == other.subckts
    }
}

impl Netlist {
    pub fn errors(&self) -> impl Iterator<Item = &Diagnostic> {
        self.diagnostics
            .iter()
            .filter(|d| d.severity == Severity::Error)
    }

    pub fn has_errors(&self) -> bool {
        self.errors().next().is_some()
    }

    /// Fail with the first error-severity diagnostic, if any.
    pub fn into_result(self) -> Result<Netlist, NetlistError> {
        let first = self.errors().next().cloned();
        match first {
            None => Ok(self),
            Some(d) if d.code == codes::UNSUPPORTED => Err(NetlistError::UnsupportedElement {
                line: d.line,
                col: d.col,
                name: d.message,
            }),
            Some(d) => Err(NetlistError::Syntax {
                line: d.line,
                col: d.col,
                message: d.message,
            }),
        }
    }

    pub fn span_of(&self, name: &str) -> Option<Span> {
        self.source_spans.get(&name.to_ascii_lowercase()).copied()
    }
}

pub mod codes {
    pub const SYNTAX: &str = "syntax";
    pub const UNSUPPORTED: &str = "unsupported-element";
    pub const DUPLICATE: &str = "duplicate-element";
    pub const UNKNOWN_DIRECTIVE: &str = "unknown-directive";
    pub const IGNORED_FIELD: &str = "ignored-field";
    pub const EMPTY_DECK: &str = "empty-deck";
    pub const UNRESOLVED_SUBCKT: &str = "unresolved-subckt";
    pub const PORT_ARITY: &str = "port-arity";
    pub const MODEL: &str = "model";
}

#[derive(Debug, Clone)]
struct Token {
    text: String,
    line: usize,
    col: usize,
}

#[derive(Debug)]
struct LogicalLine {
    raw: String,
    line: usize,
    tokens: Vec<Token>,
}

fn strip_inline_comment(line: &str) -> &str {
    match line.find(';') {
        Some(i) => &line[..i],
        None => line,
    }
}

/// Split one physical line into tokens. Parentheses and commas separate
/// fields; `key = value` is glued into a single `key=value` token.
fn tokenize(line: &str, line_no: usize, col_offset: usize) -> Vec<Token> {
    let mut raw: Vec<Token> = Vec::new();
    let mut current = String::new();
    let mut start = 0;
    for (i, ch) in line.char_indices() {
        let sep = ch.is_whitespace() || matches!(ch, '(' | ')' | ',');
        if sep || ch == '=' {
            if !current.is_empty() {
                raw.push(Token {
                    text: std::mem::take(&mut current),
                    line: line_no,
                    col: col_offset + start + 1,
                });
            }
            if ch == '=' {
                raw.push(Token {
                    text: "=".into(),
                    line: line_no,
                    col: col_offset + i + 1,
                });
            }
        } else {
            if current.is_empty() {
                start = i;
            }
            current.push(ch);
        }
    }
    if !current.is_empty() {
        raw.push(Token {
            text: current,
            line: line_no,
            col: col_offset + start + 1,
        });
    }

    let mut out: Vec<Token> = Vec::with_capacity(raw.len());
    let mut iter = raw.into_iter().peekable();
    while let Some(tok) = iter.next() {
        if tok.text == "=" {
            // Attach to the previous key and pull in the following value.
            let value = iter.next_if(|t| t.text != "=");
            match out.last_mut() {
                Some(prev) if !prev.text.ends_with('=') => {
                    prev.text.push('=');
                    if let Some(v) = value {
                        prev.text.push_str(&v.text);
                    }
                }
                _ => {
                    let mut t = tok;
                    if let Some(v) = value {
                        t.text.push_str(&v.text);
                    }
                    out.push(t);
                }
            }
        } else {
            out.push(tok);
        }
    }
    out
}

fn logical_lines(text: &str) -> Vec<LogicalLine> {
    let mut lines: Vec<LogicalLine> = Vec::new();
    for (idx, physical) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = physical.trim_start();
        let indent = physical.len() - trimmed.len();
        if trimmed.is_empty() || trimmed.starts_with('*') {
            continue;
        }
        let content = strip_inline_comment(trimmed);
        if let Some(rest) = content.strip_prefix('+') {
            if let Some(last) = lines.last_mut() {
                last.raw.push(' ');
                last.raw.push_str(rest);
                last.tokens.extend(tokenize(rest, line_no, indent + 1));
                continue;
            }
        }
        lines.push(LogicalLine {
            raw: content.to_string(),
            line: line_no,
            tokens: tokenize(content, line_no, indent),
        });
    }
    lines
}

struct Scope {
    subckt: Option<SubcktDef>,
    names: HashSet<String>,
}

struct Parser {
    netlist: Netlist,
    scope: Scope,
    top_names: HashSet<String>,
}

impl Parser {
    fn diag(&mut self, line: usize, col: usize, severity: Severity, code: &str, message: String) {
        self.netlist.diagnostics.push(Diagnostic {
            line,
            col,
            severity,
            code: code.to_string(),
            message,
        });
    }

    fn error_at(&mut self, tok: &Token, message: String) {
        self.diag(tok.line, tok.col, Severity::Error, codes::SYNTAX, message);
    }

    fn warn_at(&mut self, tok: &Token, code: &str, message: String) {
        self.diag(tok.line, tok.col, Severity::Warning, code, message);
    }

    fn value_at(&mut self, tok: &Token, what: &str) -> Option<Value> {
        match parse_value(&tok.text) {
            Ok(v) => Some(v),
            Err(e) => {
                self.error_at(tok, format!("bad {what}: {e}"));
                None
            }
        }
    }

    fn directive(&mut self, ll: &LogicalLine) -> bool {
        let head = &ll.tokens[0];
        let keyword = head.text.to_ascii_lowercase();
        match keyword.as_str() {
            ".title" => {
                let rest = ll.raw.trim_start();
                let title = rest.get(6..).unwrap_or("").trim();
                self.netlist.title = title.to_string();
            }
            ".subckt" => self.open_subckt(ll),
            ".ends" => match self.scope.subckt.take() {
                Some(def) => {
                    if let Some(name) = ll.tokens.get(1) {
                        if !name.text.eq_ignore_ascii_case(&def.name) {
                            self.warn_at(
                                name,
                                codes::SYNTAX,
                                format!(".ends {} closes subcircuit {}", name.text, def.name),
                            );
                        }
                    }
                    self.scope.names = std::mem::take(&mut self.top_names);
                    self.netlist.subckts.insert(def.name.clone(), def);
                }
                None => self.error_at(head, ".ends without matching .subckt".into()),
            },
            ".model" => self.model(ll),
            ".end" => return false,
            _ => self.warn_at(
                head,
                codes::UNKNOWN_DIRECTIVE,
                format!("directive {} is not supported and was ignored", head.text),
            ),
        }
        true
    }

    fn open_subckt(&mut self, ll: &LogicalLine) {
        let head = &ll.tokens[0];
        if self.scope.subckt.is_some() {
            self.error_at(head, "nested .subckt definitions are not supported".into());
            return;
        }
        let Some(name_tok) = ll.tokens.get(1) else {
            self.error_at(head, ".subckt needs a name".into());
            return;
        };
        let name = name_tok.text.to_ascii_lowercase();
        if self.netlist.subckts.contains_key(&name) {
            self.error_at(name_tok, format!("subcircuit {} defined twice", name_tok.text));
        }
        let mut ports = Vec::new();
        let mut seen = HashSet::new();
        for tok in &ll.tokens[2..] {
            if tok.text.contains('=') {
                self.warn_at(tok, codes::IGNORED_FIELD, format!("subcircuit parameter {} ignored", tok.text));
                continue;
            }
            let port = tok.text.to_ascii_lowercase();
            if !seen.insert(port.clone()) {
                self.error_at(tok, format!("duplicate port {} in subcircuit {}", tok.text, name_tok.text));
                continue;
            }
            ports.push(port);
        }
        self.top_names = std::mem::take(&mut self.scope.names);
        self.scope.subckt = Some(SubcktDef {
            name,
            ports,
            body: Vec::new(),
            local_models: BTreeMap::new(),
        });
    }

    fn model(&mut self, ll: &LogicalLine) {
        let head = &ll.tokens[0];
        let (Some(name_tok), Some(type_tok)) = (ll.tokens.get(1), ll.tokens.get(2)) else {
            self.error_at(head, ".model needs a name and a type".into());
            return;
        };
        let polarity = match type_tok.text.to_ascii_lowercase().as_str() {
            "nmos" => Polarity::Nmos,
            "pmos" => Polarity::Pmos,
            other => {
                self.diag(
                    type_tok.line,
                    type_tok.col,
                    Severity::Error,
                    codes::MODEL,
                    format!("model type `{other}` is not supported (nmos or pmos only)"),
                );
                return;
            }
        };
        let mut card = ModelCard::new(&name_tok.text, polarity, 0.0, 2e-5);
        for tok in &ll.tokens[3..] {
            let Some((key, raw)) = tok.text.split_once('=') else {
                self.error_at(tok, format!("expected key=value in .model, found `{}`", tok.text));
                continue;
            };
            let key = key.to_ascii_lowercase();
            let value = match parse_value(raw) {
                Ok(v) => v.magnitude,
                Err(e) => {
                    self.error_at(tok, format!("bad model parameter {key}: {e}"));
                    continue;
                }
            };
            match key.as_str() {
                "kp" => card.kp = value,
                "vto" => card.vto = value,
                "lambda" => card.lambda = value,
                "level" => card.level = value as u32,
                _ => self.warn_at(
                    tok,
                    codes::IGNORED_FIELD,
                    format!("model parameter {key} is not used by the level-1 model"),
                ),
            }
        }
        if card.level != 1 {
            self.diag(
                head.line,
                head.col,
                Severity::Error,
                codes::MODEL,
                format!("model {} uses level {}; only level 1 is supported", card.name, card.level),
            );
        }
        if !(card.kp > 0.0) {
            self.diag(
                head.line,
                head.col,
                Severity::Error,
                codes::MODEL,
                format!("model {} needs kp > 0", card.name),
            );
        }
        let models = match self.scope.subckt.as_mut() {
            Some(def) => &mut def.local_models,
            None => &mut self.netlist.models,
        };
        if models.insert(card.name.clone(), card).is_some() {
            self.error_at(name_tok, format!("model {} defined twice", name_tok.text));
        }
    }

    fn element(&mut self, ll: &LogicalLine) {
        let head = &ll.tokens[0];
        let name = head.text.clone();
        let letter = name.chars().next().unwrap_or(' ');
        let Some(kind) = ElementKind::from_letter(letter) else {
            self.diag(
                head.line,
                head.col,
                Severity::Error,
                codes::UNSUPPORTED,
                name.clone(),
            );
            return;
        };
        let args = &ll.tokens[1..];
        let element = match kind {
            ElementKind::Resistor | ElementKind::Capacitor => self.two_terminal(kind, head, args, false),
            ElementKind::VSource | ElementKind::ISource => self.two_terminal(kind, head, args, true),
            ElementKind::Mosfet => self.mosfet(head, args),
            ElementKind::SubcktInstance => self.instance(head, args),
        };
        let Some(element) = element else { return };

        let key = name.to_ascii_lowercase();
        if !self.scope.names.insert(key.clone()) {
            self.diag(
                head.line,
                head.col,
                Severity::Error,
                codes::DUPLICATE,
                format!("duplicate element name {name}"),
            );
            return;
        }
        let span = Span {
            line: head.line,
            col: head.col,
        };
        match self.scope.subckt.as_mut() {
            Some(def) => {
                self.netlist
                    .source_spans
                    .insert(format!("{}/{key}", def.name), span);
                def.body.push(element);
            }
            None => {
                self.netlist.source_spans.insert(key, span);
                self.netlist.elements.push(element);
            }
        }
    }

    fn params(&mut self, tokens: &[Token]) -> Option<BTreeMap<String, Value>> {
        let mut params = BTreeMap::new();
        for tok in tokens {
            let Some((key, raw)) = tok.text.split_once('=') else {
                self.error_at(tok, format!("unexpected field `{}`", tok.text));
                return None;
            };
            let value = match parse_value(raw) {
                Ok(v) => v,
                Err(e) => {
                    self.error_at(tok, format!("bad parameter {key}: {e}"));
                    return None;
                }
            };
            params.insert(key.to_ascii_lowercase(), value);
        }
        Some(params)
    }

    fn two_terminal(&mut self, kind: ElementKind, head: &Token, args: &[Token], source: bool) -> Option<Element> {
        if args.len() < 3 {
            self.error_at(
                head,
                format!("element {} needs 2 nodes and a value", head.text),
            );
            return None;
        }
        let nodes = vec![args[0].text.to_ascii_lowercase(), args[1].text.to_ascii_lowercase()];
        let mut rest = &args[2..];
        if source && rest[0].text.eq_ignore_ascii_case("dc") {
            rest = &rest[1..];
            if rest.is_empty() {
                self.error_at(&args[2], format!("source {} has DC keyword but no value", head.text));
                return None;
            }
        }
        let value = self.value_at(&rest[0], "value")?;
        let rest = &rest[1..];
        let params = if source {
            if let Some(tok) = rest.first() {
                self.warn_at(
                    tok,
                    codes::IGNORED_FIELD,
                    format!("fields after the DC value of {} were ignored", head.text),
                );
            }
            BTreeMap::new()
        } else {
            self.params(rest)?
        };
        Some(Element {
            kind,
            name: head.text.clone(),
            nodes,
            params,
            model_ref: None,
            value: Some(value),
        })
    }

    fn mosfet(&mut self, head: &Token, args: &[Token]) -> Option<Element> {
        let positional = args.iter().take_while(|t| !t.text.contains('=')).count();
        if positional != 5 {
            self.error_at(
                head,
                format!(
                    "MOSFET {} needs drain, gate, source, bulk and a model (found {positional} fields)",
                    head.text
                ),
            );
            return None;
        }
        let params = self.params(&args[5..])?;
        for key in ["l", "w"] {
            if let Some(v) = params.get(key) {
                if !(v.magnitude > 0.0) {
                    self.error_at(head, format!("MOSFET {} needs {key} > 0", head.text));
                    return None;
                }
            }
        }
        Some(Element {
            kind: ElementKind::Mosfet,
            name: head.text.clone(),
            nodes: args[..4].iter().map(|t| t.text.to_ascii_lowercase()).collect(),
            params,
            model_ref: Some(args[4].text.to_ascii_lowercase()),
            value: None,
        })
    }

    fn instance(&mut self, head: &Token, args: &[Token]) -> Option<Element> {
        let positional: Vec<&Token> = args.iter().filter(|t| !t.text.contains('=')).collect();
        let Some((subckt, nodes)) = positional.split_last() else {
            self.error_at(head, format!("instance {} needs a subcircuit name", head.text));
            return None;
        };
        for tok in args.iter().filter(|t| t.text.contains('=')) {
            self.warn_at(
                tok,
                codes::IGNORED_FIELD,
                format!("instance parameter {} ignored", tok.text),
            );
        }
        Some(Element {
            kind: ElementKind::SubcktInstance,
            name: head.text.clone(),
            nodes: nodes.iter().map(|t| t.text.to_ascii_lowercase()).collect(),
            params: BTreeMap::new(),
            model_ref: Some(subckt.text.to_ascii_lowercase()),
            value: None,
        })
    }

    fn check_instances(&mut self) {
        let mut found = Vec::new();
        let scopes = std::iter::once((None, &self.netlist.elements)).chain(
            self.netlist
                .subckts
                .values()
                .map(|d| (Some(d.name.as_str()), &d.body)),
        );
        for (scope, elements) in scopes {
            for el in elements.iter().filter(|e| e.kind == ElementKind::SubcktInstance) {
                let target = el.model_ref.as_deref().unwrap_or_default();
                let key = match scope {
                    Some(s) => format!("{s}/{}", el.name.to_ascii_lowercase()),
                    None => el.name.to_ascii_lowercase(),
                };
                let span = self.netlist.source_spans.get(&key).copied().unwrap_or(Span { line: 0, col: 0 });
                match self.netlist.subckts.get(target) {
                    None => found.push((span, codes::UNRESOLVED_SUBCKT, format!(
                        "instance {} references undefined subcircuit {target}",
                        el.name
                    ))),
                    Some(def) if def.ports.len() != el.nodes.len() => found.push((span, codes::PORT_ARITY, format!(
                        "instance {} connects {} nodes but subcircuit {} declares {} ports",
                        el.name,
                        el.nodes.len(),
                        def.name,
                        def.ports.len()
                    ))),
                    Some(_) => {}
                }
            }
        }
        for (span, code, message) in found {
            self.diag(span.line, span.col, Severity::Error, code, message);
        }
    }
}

/// Parse a deck. Never fails: problems are reported in `diagnostics`, and
/// [`Netlist::into_result`] turns the first error into a `NetlistError`.
pub fn parse_netlist(text: &str) -> Netlist {
    let mut parser = Parser {
        netlist: Netlist::default(),
        scope: Scope {
            subckt: None,
            names: HashSet::new(),
        },
        top_names: HashSet::new(),
    };
    let lines = logical_lines(text);
    let mut last_line = 0;
    for ll in &lines {
        last_line = ll.line;
        if ll.tokens.is_empty() {
            continue;
        }
        if ll.tokens[0].text.starts_with('.') {
            if !parser.directive(ll) {
                break;
            }
        } else {
            parser.element(ll);
        }
    }
    if let Some(def) = parser.scope.subckt.take() {
        parser.diag(
            last_line.max(1),
            1,
            Severity::Error,
            codes::SYNTAX,
            format!("subcircuit {} is missing .ends", def.name),
        );
        parser.netlist.subckts.insert(def.name.clone(), def);
    }
    parser.check_instances();

    let nl = &parser.netlist;
    if nl.elements.is_empty() && nl.subckts.is_empty() && nl.models.is_empty() && nl.diagnostics.is_empty() {
        parser.diag(1, 1, Severity::Warning, codes::EMPTY_DECK, "empty deck".into());
    }
    parser.netlist
}

/// Drop provenance: spans, diagnostics and the original spelling of values.
pub fn canonicalize(netlist: &Netlist) -> Netlist {
    fn canon_el(e: &Element) -> Element {
        Element {
            value: e.value.as_ref().map(|v| Value::new(v.magnitude)),
            params: e
                .params
                .iter()
                .map(|(k, v)| (k.clone(), Value::new(v.magnitude)))
                .collect(),
            ..e.clone()
        }
    }
    Netlist {
        title: netlist.title.clone(),
        elements: netlist.elements.iter().map(canon_el).collect(),
        models: netlist.models.clone(),
        subckts: netlist
            .subckts
            .iter()
            .map(|(k, d)| {
                (
                    k.clone(),
                    SubcktDef {
                        body: d.body.iter().map(canon_el).collect(),
                        ..d.clone()
                    },
                )
            })
            .collect(),
        source_spans: BTreeMap::new(),
        diagnostics: Vec::new(),
    }
}

fn emit_model(out: &mut String, m: &ModelCard) {
    let _ = writeln!(
        out,
        ".model {} {} (level={} kp={} vto={} lambda={})",
        m.name,
        m.polarity,
        m.level,
        canonical_number(m.kp),
        canonical_number(m.vto),
        canonical_number(m.lambda)
    );
}

fn emit_element(out: &mut String, e: &Element) {
    out.push_str(&e.name);
    for n in &e.nodes {
        out.push(' ');
        out.push_str(n);
    }
    if let Some(m) = &e.model_ref {
        out.push(' ');
        out.push_str(m);
    }
    if let Some(v) = &e.value {
        out.push(' ');
        out.push_str(&canonical_number(v.magnitude));
    }
    for (k, v) in &e.params {
        let _ = write!(out, " {k}={}", canonical_number(v.magnitude));
    }
    out.push('\n');
}

/// Render the canonical deck: title, models, subcircuits, elements, `.end`.
pub fn emit(netlist: &Netlist) -> String {
    let mut out = String::new();
    if netlist.title.is_empty() {
        out.push_str(".title\n");
    } else {
        let _ = writeln!(out, ".title {}", netlist.title);
    }
    for m in netlist.models.values() {
        emit_model(&mut out, m);
    }
    for def in netlist.subckts.values() {
        out.push_str(".subckt ");
        out.push_str(&def.name);
        for p in &def.ports {
            out.push(' ');
            out.push_str(p);
        }
        out.push('\n');
        for m in def.local_models.values() {
            emit_model(&mut out, m);
        }
        for e in &def.body {
            emit_element(&mut out, e);
        }
        let _ = writeln!(out, ".ends {}", def.name);
    }
    for e in &netlist.elements {
        emit_element(&mut out, e);
    }
    out.push_str(".end\n");
    out
}
