//! The line-oriented input format.
//!
//! ```text
//! # comment
//! [space X]
//! dimension = 10
//! H8 = Z<u8> + Z/2<t2> + Z/3<t3>
//!
//! [bundle TX]
//! space = X
//! field = real
//! p2 = 6*u8 + t2
//!
//! [patch U]
//! dimension = 2
//! matrix_size = 1
//!
//! [connection A]
//! patch = U
//! dx1 = [[x2]]
//! ```
//!
//! Parsing validates the whole document: every diagnostic carries the line and
//! column where it was detected.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use fivebrane::abelian::AbelianGroup;
use fivebrane::bundle_model::{class_degree, BaseSpace, Bundle, CohClass, Field, StiefelWhitney};
use fivebrane::cs_forms::{CoordPoly, MatrixPolyForm, PolyMatrix, MAX_PATCH_DIM};
use fivebrane::BigRational;
use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

pub const MAX_SPACE_DIM: u32 = 64;
pub const MAX_MATRIX_SIZE: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DiagnosticKind {
    Syntax,
    Undeclared,
    DegreeMismatch,
    Invalid,
}

impl fmt::Display for DiagnosticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DiagnosticKind::Syntax => "syntax error",
            DiagnosticKind::Undeclared => "undeclared reference",
            DiagnosticKind::DegreeMismatch => "degree mismatch",
            DiagnosticKind::Invalid => "invalid value",
        })
    }
}

/// A positioned parse or validation error. Lines and columns are 1-based; columns
/// count characters.
#[derive(Clone, Debug, Error, PartialEq, Eq)]
#[error("line {line}, column {column}: {kind}: {message}")]
pub struct Diagnostic {
    pub line: usize,
    pub column: usize,
    pub kind: DiagnosticKind,
    pub message: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SectionKind {
    Space,
    Bundle,
    Patch,
    Connection,
    /// Machine output; entries are kept as text.
    Result,
}

impl SectionKind {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "space" => SectionKind::Space,
            "bundle" => SectionKind::Bundle,
            "patch" => SectionKind::Patch,
            "connection" => SectionKind::Connection,
            "result" => SectionKind::Result,
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SectionKind::Space => "space",
            SectionKind::Bundle => "bundle",
            SectionKind::Patch => "patch",
            SectionKind::Connection => "connection",
            SectionKind::Result => "result",
        }
    }
}

/// One summand of a presented group: `Z<name>` (order `None`) or `Z/n<name>`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Summand {
    pub order: Option<u64>,
    pub name: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Value {
    Integer(BigInt),
    Word(String),
    Group(Vec<Summand>),
    /// Integer combination of generators, like terms merged, in order of first use.
    Class(Vec<(BigInt, String)>),
    Matrix(Vec<Vec<CoordPoly>>),
    Text(String),
}

impl Value {
    pub fn render(&self) -> String {
        match self {
            Value::Integer(n) => n.to_string(),
            Value::Word(w) | Value::Text(w) => w.clone(),
            Value::Group(s) if s.is_empty() => "0".into(),
            Value::Group(s) => s
                .iter()
                .map(|x| match x.order {
                    None => format!("Z<{}>", x.name),
                    Some(n) => format!("Z/{n}<{}>", x.name),
                })
                .collect::<Vec<_>>()
                .join(" + "),
            Value::Class(terms) => render_class(terms),
            Value::Matrix(rows) => {
                let rows: Vec<String> = rows
                    .iter()
                    .map(|r| {
                        let cells: Vec<String> = r.iter().map(CoordPoly::render).collect();
                        format!("[{}]", cells.join(", "))
                    })
                    .collect();
                format!("[{}]", rows.join(", "))
            }
        }
    }
}

fn render_class(terms: &[(BigInt, String)]) -> String {
    if terms.is_empty() {
        return "0".into();
    }
    let mut out = String::new();
    for (i, (c, name)) in terms.iter().enumerate() {
        let mag = c.abs();
        let t = if mag.is_one() {
            name.clone()
        } else {
            format!("{mag}*{name}")
        };
        match (i, c.is_negative()) {
            (0, true) => out.push('-'),
            (0, false) => {}
            (_, true) => out.push_str(" - "),
            (_, false) => out.push_str(" + "),
        }
        out.push_str(&t);
    }
    out
}

/// An entry; positions are not part of equality.
#[derive(Clone, Debug)]
pub struct Entry {
    pub key: String,
    pub value: Value,
    pub line: usize,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.key == other.key && self.value == other.value
    }
}

impl Eq for Entry {}

#[derive(Clone, Debug)]
pub struct Section {
    pub kind: SectionKind,
    pub name: String,
    pub entries: Vec<Entry>,
    pub line: usize,
}

impl PartialEq for Section {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind && self.name == other.name && self.entries == other.entries
    }
}

impl Eq for Section {}

impl Section {
    pub fn get(&self, key: &str) -> Option<&Value> {
        self.entries.iter().find(|e| e.key == key).map(|e| &e.value)
    }
}

#[derive(Clone, Debug)]
pub struct Patch {
    pub dimension: u8,
    pub matrix_size: usize,
}

#[derive(Clone, Debug)]
pub struct Connection {
    pub name: String,
    pub patch: String,
    pub form: MatrixPolyForm,
}

/// The objects a validated document describes.
#[derive(Clone, Debug, Default)]
pub struct Model {
    pub spaces: BTreeMap<String, Arc<BaseSpace>>,
    pub bundles: Vec<Bundle>,
    pub patches: BTreeMap<String, Patch>,
    pub connections: Vec<Connection>,
}

impl Model {
    pub fn bundle(&self, name: &str) -> Option<&Bundle> {
        self.bundles.iter().find(|b| b.name == name)
    }

    pub fn connection(&self, name: &str) -> Option<&Connection> {
        self.connections.iter().find(|c| c.name == name)
    }
}

#[derive(Clone, Debug)]
pub struct InputDocument {
    pub sections: Vec<Section>,
    model: Model,
}

impl PartialEq for InputDocument {
    fn eq(&self, other: &Self) -> bool {
        self.sections == other.sections
    }
}

impl InputDocument {
    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn section(&self, kind: SectionKind, name: &str) -> Option<&Section> {
        self.sections
            .iter()
            .find(|s| s.kind == kind && s.name == name)
    }

    /// Canonical text; parsing it yields an equal document.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (i, s) in self.sections.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            if s.name.is_empty() {
                out.push_str(&format!("[{}]\n", s.kind.as_str()));
            } else {
                out.push_str(&format!("[{} {}]\n", s.kind.as_str(), s.name));
            }
            for e in &s.entries {
                out.push_str(&format!("{} = {}\n", e.key, e.value.render()));
            }
        }
        out
    }
}

impl fmt::Display for InputDocument {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// Raw `key = value` before interpretation. Offsets are byte offsets into the line.
struct RawEntry<'a> {
    key: &'a str,
    value: &'a str,
    line_no: usize,
    line: &'a str,
    key_at: usize,
    value_at: usize,
}

struct RawSection<'a> {
    kind: SectionKind,
    name: String,
    line_no: usize,
    entries: Vec<RawEntry<'a>>,
}

fn column(line: &str, byte: usize) -> usize {
    line.char_indices().take_while(|(i, _)| *i < byte).count() + 1
}

fn diag(
    line_no: usize,
    line: &str,
    byte: usize,
    kind: DiagnosticKind,
    message: impl Into<String>,
) -> Diagnostic {
    Diagnostic {
        line: line_no,
        column: column(line, byte),
        kind,
        message: message.into(),
    }
}

impl RawEntry<'_> {
    fn err(&self, at: usize, kind: DiagnosticKind, message: impl Into<String>) -> Diagnostic {
        diag(self.line_no, self.line, self.value_at + at, kind, message)
    }

    fn key_err(&self, kind: DiagnosticKind, message: impl Into<String>) -> Diagnostic {
        diag(self.line_no, self.line, self.key_at, kind, message)
    }
}

pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn is_result_key(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
}

fn is_result_name(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_graphic() && c != ']' && c != '#')
}

/// Parses arbitrary bytes; invalid UTF-8 is a positioned diagnostic.
pub fn parse_bytes(bytes: &[u8]) -> Result<InputDocument, Diagnostic> {
    match std::str::from_utf8(bytes) {
        Ok(text) => parse(text),
        Err(e) => {
            let good = &bytes[..e.valid_up_to()];
            let line = good.iter().filter(|&&b| b == b'\n').count() + 1;
            let start = good.iter().rposition(|&b| b == b'\n').map_or(0, |p| p + 1);
            let prefix = std::str::from_utf8(&good[start..]).unwrap_or("");
            Err(Diagnostic {
                line,
                column: prefix.chars().count() + 1,
                kind: DiagnosticKind::Syntax,
                message: "invalid UTF-8".into(),
            })
        }
    }
}

pub fn parse(text: &str) -> Result<InputDocument, Diagnostic> {
    let raw = split_sections(text)?;
    let mut model = Model::default();
    let mut sections: Vec<Option<Section>> = vec![None; raw.len()];
    // Spaces and patches first so that references may point forward.
    for (i, s) in raw.iter().enumerate() {
        let built = match s.kind {
            SectionKind::Space => {
                let (sec, space) = build_space(s)?;
                model.spaces.insert(s.name.clone(), Arc::new(space));
                sec
            }
            SectionKind::Patch => {
                let (sec, patch) = build_patch(s)?;
                model.patches.insert(s.name.clone(), patch);
                sec
            }
            _ => continue,
        };
        sections[i] = Some(built);
    }
    for (i, s) in raw.iter().enumerate() {
        let built = match s.kind {
            SectionKind::Bundle => {
                let (sec, bundle) = build_bundle(s, &model)?;
                model.bundles.push(bundle);
                sec
            }
            SectionKind::Connection => {
                let (sec, conn) = build_connection(s, &model)?;
                model.connections.push(conn);
                sec
            }
            SectionKind::Result => Section {
                kind: s.kind,
                name: s.name.clone(),
                line: s.line_no,
                entries: s
                    .entries
                    .iter()
                    .map(|e| Entry {
                        key: e.key.to_string(),
                        value: Value::Text(e.value.to_string()),
                        line: e.line_no,
                    })
                    .collect(),
            },
            _ => continue,
        };
        sections[i] = Some(built);
    }
    Ok(InputDocument {
        sections: sections
            .into_iter()
            .map(|s| s.expect("every section built"))
            .collect(),
        model,
    })
}

fn split_sections(text: &str) -> Result<Vec<RawSection<'_>>, Diagnostic> {
    let mut out: Vec<RawSection<'_>> = Vec::new();
    let mut seen: HashMap<(SectionKind, String), usize> = HashMap::new();
    for (idx, full) in text.split('\n').enumerate() {
        let line_no = idx + 1;
        let line = full.strip_suffix('\r').unwrap_or(full);
        let content = match line.find('#') {
            Some(p) => &line[..p],
            None => line,
        };
        if let Some(p) = content.find(|c: char| c.is_control() && c != '\t') {
            return Err(diag(
                line_no,
                line,
                p,
                DiagnosticKind::Syntax,
                "control character",
            ));
        }
        let trimmed = content.trim();
        if trimmed.is_empty() {
            continue;
        }
        let lead = content.len() - content.trim_start().len();
        if trimmed.starts_with('[') {
            let Some(inner) = trimmed.strip_suffix(']').map(|t| &t[1..]) else {
                return Err(diag(
                    line_no,
                    line,
                    lead + trimmed.len(),
                    DiagnosticKind::Syntax,
                    "expected `]`",
                ));
            };
            let mut words = inner.split_whitespace();
            let kind_word = words.next().unwrap_or("");
            let Some(kind) = SectionKind::parse(kind_word) else {
                return Err(diag(
                    line_no,
                    line,
                    lead + 1,
                    DiagnosticKind::Syntax,
                    format!("unknown section kind `{kind_word}` (expected space, bundle, patch, connection or result)"),
                ));
            };
            let name = words.next().unwrap_or("");
            if let Some(extra) = words.next() {
                let at = lead + 1 + inner.find(extra).unwrap_or(0);
                return Err(diag(
                    line_no,
                    line,
                    at,
                    DiagnosticKind::Syntax,
                    "unexpected text after the section name",
                ));
            }
            let name_ok = match kind {
                SectionKind::Result => name.is_empty() || is_result_name(name),
                _ => is_identifier(name),
            };
            if !name_ok {
                let at = lead
                    + 1
                    + inner
                        .find(name)
                        .filter(|_| !name.is_empty())
                        .unwrap_or(kind_word.len());
                return Err(diag(
                    line_no,
                    line,
                    at,
                    DiagnosticKind::Syntax,
                    "expected a section name",
                ));
            }
            let key = (kind, name.to_string());
            if let Some(prev) = seen.get(&key) {
                return Err(diag(
                    line_no,
                    line,
                    lead,
                    DiagnosticKind::Invalid,
                    format!("{} `{name}` already declared on line {prev}", kind.as_str()),
                ));
            }
            seen.insert(key, line_no);
            out.push(RawSection {
                kind,
                name: name.to_string(),
                line_no,
                entries: Vec::new(),
            });
            continue;
        }
        let Some(eq) = content.find('=') else {
            return Err(diag(
                line_no,
                line,
                lead,
                DiagnosticKind::Syntax,
                "expected `key = value` or a `[kind name]` header",
            ));
        };
        let key = content[..eq].trim();
        let value_raw = &content[eq + 1..];
        let value = value_raw.trim();
        let value_at = eq + 1 + (value_raw.len() - value_raw.trim_start().len());
        let Some(section) = out.last_mut() else {
            return Err(diag(
                line_no,
                line,
                lead,
                DiagnosticKind::Syntax,
                "entry outside of any section",
            ));
        };
        let key_ok = if section.kind == SectionKind::Result {
            is_result_key(key)
        } else {
            is_identifier(key)
        };
        if !key_ok {
            return Err(diag(
                line_no,
                line,
                lead,
                DiagnosticKind::Syntax,
                "expected a key",
            ));
        }
        if value.is_empty() {
            return Err(diag(
                line_no,
                line,
                value_at,
                DiagnosticKind::Syntax,
                "missing value",
            ));
        }
        if let Some(prev) = section.entries.iter().find(|e| e.key == key) {
            return Err(diag(
                line_no,
                line,
                lead,
                DiagnosticKind::Invalid,
                format!("`{key}` already set on line {}", prev.line_no),
            ));
        }
        section.entries.push(RawEntry {
            key,
            value,
            line_no,
            line,
            key_at: lead,
            value_at,
        });
    }
    Ok(out)
}

fn missing(s: &RawSection<'_>, key: &str) -> Diagnostic {
    Diagnostic {
        line: s.line_no,
        column: 1,
        kind: DiagnosticKind::Invalid,
        message: format!("{} `{}` needs `{key}`", s.kind.as_str(), s.name),
    }
}

fn find<'a, 'b>(s: &'b RawSection<'a>, key: &str) -> Option<&'b RawEntry<'a>> {
    s.entries.iter().find(|e| e.key == key)
}

fn parse_integer(e: &RawEntry<'_>) -> Result<BigInt, Diagnostic> {
    let t = e.value;
    let digits = t.strip_prefix('-').unwrap_or(t);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(e.err(0, DiagnosticKind::Syntax, "expected an integer"));
    }
    t.parse::<BigInt>()
        .map_err(|_| e.err(0, DiagnosticKind::Syntax, "expected an integer"))
}

fn parse_bounded(e: &RawEntry<'_>, lo: u64, hi: u64) -> Result<u64, Diagnostic> {
    let n = parse_integer(e)?;
    let ok = n >= BigInt::from(lo) && n <= BigInt::from(hi);
    if !ok {
        return Err(e.err(
            0,
            DiagnosticKind::Invalid,
            format!("`{}` must be between {lo} and {hi}", e.key),
        ));
    }
    Ok(n.try_into().expect("bounded"))
}

fn entry(e: &RawEntry<'_>, value: Value) -> Entry {
    Entry {
        key: e.key.to_string(),
        value,
        line: e.line_no,
    }
}

fn unknown_key(s: &RawSection<'_>, e: &RawEntry<'_>) -> Diagnostic {
    e.key_err(
        DiagnosticKind::Invalid,
        format!("unknown key `{}` in a {} section", e.key, s.kind.as_str()),
    )
}

/// `H<d>` keys.
fn cohomology_degree(key: &str) -> Option<&str> {
    key.strip_prefix('H')
        .filter(|d| !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit()))
}

fn build_space(s: &RawSection<'_>) -> Result<(Section, BaseSpace), Diagnostic> {
    let dim_entry = find(s, "dimension").ok_or_else(|| missing(s, "dimension"))?;
    let dimension = parse_bounded(dim_entry, 0, MAX_SPACE_DIM as u64)? as u32;
    let mut space = BaseSpace::new(s.name.clone(), dimension);
    let mut entries = Vec::new();
    let mut names: HashMap<String, u32> = HashMap::new();
    for e in &s.entries {
        if e.key == "dimension" {
            entries.push(entry(e, Value::Integer(BigInt::from(dimension))));
            continue;
        }
        let Some(d) = cohomology_degree(e.key) else {
            return Err(unknown_key(s, e));
        };
        let degree = match d.parse::<u32>() {
            Ok(n) if n <= dimension && !(d.len() > 1 && d.starts_with('0')) => n,
            _ => {
                return Err(e.key_err(
                    DiagnosticKind::Invalid,
                    format!("degree must be at most the dimension {dimension}"),
                ))
            }
        };
        if degree == 0 {
            return Err(e.key_err(DiagnosticKind::Invalid, "H0 is always Z"));
        }
        let summands = parse_group(e, degree)?;
        for x in &summands {
            if let Some(prev) = names.insert(x.name.clone(), degree) {
                let at = e.value.find(x.name.as_str()).unwrap_or(0);
                return Err(e.err(
                    at,
                    DiagnosticKind::Invalid,
                    format!("generator `{}` already declared in H{prev}", x.name),
                ));
            }
        }
        let free: Vec<String> = summands
            .iter()
            .filter(|x| x.order.is_none())
            .map(|x| x.name.clone())
            .collect();
        let torsion: Vec<&Summand> = summands.iter().filter(|x| x.order.is_some()).collect();
        let group = AbelianGroup::new(
            free.len(),
            torsion.iter().map(|x| x.order.expect("torsion")).collect(),
        )
        .map_err(|err| e.err(0, DiagnosticKind::Invalid, err.to_string()))?;
        let mut all = free;
        all.extend(torsion.iter().map(|x| x.name.clone()));
        space
            .declare(degree, group, all)
            .map_err(|err| e.err(0, DiagnosticKind::Invalid, err.to_string()))?;
        entries.push(entry(e, Value::Group(summands)));
    }
    let section = Section {
        kind: s.kind,
        name: s.name.clone(),
        entries,
        line: s.line_no,
    };
    Ok((section, space))
}

/// `0` or `Z<a> + Z/2<b> + ...`; omitted names become `h<d>_<i>`.
fn parse_group(e: &RawEntry<'_>, degree: u32) -> Result<Vec<Summand>, Diagnostic> {
    let text = e.value;
    if text == "0" {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    let mut pos = 0;
    let bytes = text.as_bytes();
    let skip_ws = |pos: &mut usize| {
        while *pos < bytes.len() && (bytes[*pos] == b' ' || bytes[*pos] == b'\t') {
            *pos += 1;
        }
    };
    loop {
        skip_ws(&mut pos);
        if bytes.get(pos) != Some(&b'Z') {
            return Err(e.err(pos, DiagnosticKind::Syntax, "expected `Z` or `Z/n`"));
        }
        pos += 1;
        let mut order = None;
        if bytes.get(pos) == Some(&b'/') {
            pos += 1;
            let start = pos;
            while pos < bytes.len() && bytes[pos].is_ascii_digit() {
                pos += 1;
            }
            let n = text[start..pos]
                .parse::<u64>()
                .ok()
                .filter(|n| *n >= 2)
                .ok_or_else(|| {
                    e.err(
                        start,
                        DiagnosticKind::Invalid,
                        "torsion order must be an integer of at least 2",
                    )
                })?;
            order = Some(n);
        }
        let name = if bytes.get(pos) == Some(&b'<') {
            let start = pos + 1;
            let Some(len) = text[start..].find('>') else {
                return Err(e.err(pos, DiagnosticKind::Syntax, "expected `>`"));
            };
            let name = &text[start..start + len];
            if !is_identifier(name) {
                return Err(e.err(start, DiagnosticKind::Syntax, "expected a generator name"));
            }
            pos = start + len + 1;
            name.to_string()
        } else {
            format!("h{degree}_{}", out.len() + 1)
        };
        out.push(Summand { order, name });
        skip_ws(&mut pos);
        match bytes.get(pos) {
            None => return Ok(out),
            Some(b'+') => pos += 1,
            Some(_) => return Err(e.err(pos, DiagnosticKind::Syntax, "expected `+`")),
        }
    }
}

fn parse_field(e: &RawEntry<'_>) -> Result<Field, Diagnostic> {
    match e.value {
        "real" => Ok(Field::Real),
        "complex" => Ok(Field::Complex),
        _ => Err(e.err(
            0,
            DiagnosticKind::Invalid,
            "field must be `real` or `complex`",
        )),
    }
}

fn parse_sw(e: &RawEntry<'_>) -> Result<StiefelWhitney, Diagnostic> {
    match e.value {
        "0" => Ok(StiefelWhitney::Vanishes),
        "unknown" => Ok(StiefelWhitney::Unknown),
        "nonzero" => Ok(StiefelWhitney::NonVanishing(None)),
        _ => Err(e.err(
            0,
            DiagnosticKind::Invalid,
            "expected `0`, `nonzero` or `unknown`",
        )),
    }
}

/// A located failure: byte offset into the expression and message.
pub type TermError = (usize, String);

/// Reads `3*u8 - t2 + u8` into merged terms with the position of each first use.
pub fn parse_class_terms(text: &str) -> Result<Vec<(BigInt, String, usize)>, TermError> {
    let bytes = text.as_bytes();
    let mut pos = 0;
    let mut terms: Vec<(BigInt, String, usize)> = Vec::new();
    let ws = |pos: &mut usize| {
        while *pos < bytes.len() && (bytes[*pos] == b' ' || bytes[*pos] == b'\t') {
            *pos += 1;
        }
    };
    let mut first = true;
    loop {
        ws(&mut pos);
        let mut sign = BigInt::one();
        match bytes.get(pos) {
            Some(b'-') => {
                sign = -sign;
                pos += 1;
            }
            Some(b'+') if !first => pos += 1,
            _ if first => {}
            None => return Err((pos, "expected a term".into())),
            Some(_) => return Err((pos, "expected `+` or `-`".into())),
        }
        ws(&mut pos);
        let start = pos;
        let mut coeff = BigInt::one();
        let mut has_coeff = false;
        if bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            while pos < bytes.len() && bytes[pos].is_ascii_digit() {
                pos += 1;
            }
            coeff = text[start..pos].parse().expect("digits");
            has_coeff = true;
            ws(&mut pos);
        }
        let name = if !has_coeff || bytes.get(pos) == Some(&b'*') {
            if has_coeff {
                pos += 1;
                ws(&mut pos);
            }
            let ns = pos;
            while pos < bytes.len() && (bytes[pos].is_ascii_alphanumeric() || bytes[pos] == b'_') {
                pos += 1;
            }
            let name = &text[ns..pos];
            if !is_identifier(name) {
                return Err((ns, "expected a generator name".into()));
            }
            Some((name.to_string(), ns))
        } else {
            None
        };
        match name {
            Some((name, at)) => {
                let c = sign * coeff;
                match terms.iter_mut().find(|t| t.1 == name) {
                    Some(t) => t.0 += c,
                    None => terms.push((c, name, at)),
                }
            }
            None if coeff.is_zero() => {}
            None => {
                return Err((
                    start,
                    "a nonzero constant is not a class in positive degree".into(),
                ))
            }
        }
        first = false;
        ws(&mut pos);
        if pos >= bytes.len() {
            break;
        }
    }
    Ok(terms)
}

/// Offset, kind and message of a class expression that does not resolve.
pub type ClassError = (usize, DiagnosticKind, String);

/// Resolves a class expression against `space` in the given degree.
pub fn resolve_class(
    space: &BaseSpace,
    degree: u32,
    text: &str,
) -> Result<(CohClass, Vec<(BigInt, String)>), ClassError> {
    let terms = parse_class_terms(text).map_err(|(at, m)| (at, DiagnosticKind::Syntax, m))?;
    let group = space.group(degree);
    let r = group.group.free_rank();
    let mut free = vec![BigRational::zero(); r];
    let mut torsion = vec![BigInt::zero(); group.group.torsion().len()];
    for (c, name, at) in &terms {
        match space.find_generator(name) {
            None => {
                return Err((
                    *at,
                    DiagnosticKind::Undeclared,
                    format!("`{name}` is not a declared generator"),
                ))
            }
            Some((d, _)) if d != degree => {
                return Err((
                    *at,
                    DiagnosticKind::DegreeMismatch,
                    format!("`{name}` has degree {d}, this slot needs degree {degree}"),
                ))
            }
            Some((_, i)) if i < r => free[i] += BigRational::from_integer(c.clone()),
            Some((_, i)) => torsion[i - r] += c,
        }
    }
    let class = CohClass::new(group, free, torsion)
        .map_err(|e| (0, DiagnosticKind::Invalid, e.to_string()))?;
    let merged = terms
        .into_iter()
        .filter(|t| !t.0.is_zero())
        .map(|(c, n, _)| (c, n))
        .collect();
    Ok((class, merged))
}

fn build_bundle(s: &RawSection<'_>, model: &Model) -> Result<(Section, Bundle), Diagnostic> {
    let space_entry = find(s, "space").ok_or_else(|| missing(s, "space"))?;
    let space = model.spaces.get(space_entry.value).ok_or_else(|| {
        space_entry.err(
            0,
            DiagnosticKind::Undeclared,
            format!("no space named `{}`", space_entry.value),
        )
    })?;
    let field_entry = find(s, "field").ok_or_else(|| missing(s, "field"))?;
    let field = parse_field(field_entry)?;
    let mut bundle = Bundle::new(
        s.name.clone(),
        Arc::clone(space),
        field,
        space.dimension() as i64,
    );
    let mut entries = Vec::new();
    for e in &s.entries {
        let value = match e.key {
            "space" | "field" => Value::Word(e.value.to_string()),
            "rank" => {
                let n = parse_integer(e)?;
                bundle.rank = i64::try_from(&n)
                    .ok()
                    .filter(|r| r.unsigned_abs() <= 1 << 20)
                    .ok_or_else(|| e.err(0, DiagnosticKind::Invalid, "rank out of range"))?;
                Value::Integer(n)
            }
            "w1" | "w2" => {
                if field != Field::Real {
                    return Err(e.key_err(
                        DiagnosticKind::Invalid,
                        "Stiefel-Whitney data only applies to real bundles",
                    ));
                }
                let sw = parse_sw(e)?;
                if e.key == "w1" {
                    bundle.w1 = sw;
                } else {
                    bundle.w2 = sw;
                }
                Value::Word(e.value.to_string())
            }
            key => {
                let Some(degree) = class_degree(field, key) else {
                    return Err(unknown_key(s, e));
                };
                let (class, terms) = resolve_class(space, degree, e.value)
                    .map_err(|(at, kind, m)| e.err(at, kind, m))?;
                bundle
                    .set_class(key, class)
                    .map_err(|err| e.err(0, DiagnosticKind::Invalid, err.to_string()))?;
                Value::Class(terms)
            }
        };
        entries.push(entry(e, value));
    }
    let section = Section {
        kind: s.kind,
        name: s.name.clone(),
        entries,
        line: s.line_no,
    };
    Ok((section, bundle))
}

fn build_patch(s: &RawSection<'_>) -> Result<(Section, Patch), Diagnostic> {
    let d = find(s, "dimension").ok_or_else(|| missing(s, "dimension"))?;
    let dimension = parse_bounded(d, 1, MAX_PATCH_DIM as u64)? as u8;
    let m = find(s, "matrix_size").ok_or_else(|| missing(s, "matrix_size"))?;
    let matrix_size = parse_bounded(m, 1, MAX_MATRIX_SIZE as u64)? as usize;
    let mut entries = Vec::new();
    for e in &s.entries {
        let value = match e.key {
            "dimension" => Value::Integer(BigInt::from(dimension)),
            "matrix_size" => Value::Integer(BigInt::from(matrix_size)),
            _ => return Err(unknown_key(s, e)),
        };
        entries.push(entry(e, value));
    }
    let section = Section {
        kind: s.kind,
        name: s.name.clone(),
        entries,
        line: s.line_no,
    };
    Ok((
        section,
        Patch {
            dimension,
            matrix_size,
        },
    ))
}

fn build_connection(
    s: &RawSection<'_>,
    model: &Model,
) -> Result<(Section, Connection), Diagnostic> {
    let p = find(s, "patch").ok_or_else(|| missing(s, "patch"))?;
    let patch = model.patches.get(p.value).ok_or_else(|| {
        p.err(
            0,
            DiagnosticKind::Undeclared,
            format!("no patch named `{}`", p.value),
        )
    })?;
    let (dim, size) = (patch.dimension, patch.matrix_size);
    let mut comps = vec![PolyMatrix::zero(dim, size); dim as usize];
    let mut entries = Vec::new();
    for e in &s.entries {
        if e.key == "patch" {
            entries.push(entry(e, Value::Word(e.value.to_string())));
            continue;
        }
        let k = e
            .key
            .strip_prefix("dx")
            .filter(|k| !k.starts_with('0'))
            .and_then(|k| k.parse::<usize>().ok())
            .filter(|k| (1..=dim as usize).contains(k))
            .ok_or_else(|| {
                e.key_err(
                    DiagnosticKind::Invalid,
                    format!("expected a component dx1..dx{dim}, got `{}`", e.key),
                )
            })?;
        let rows = parse_matrix(e, dim, size)?;
        comps[k - 1] = PolyMatrix::from_rows(rows.clone()).expect("square");
        entries.push(entry(e, Value::Matrix(rows)));
    }
    let form = MatrixPolyForm::one_form(dim, size, comps).expect("shapes match the patch");
    let section = Section {
        kind: s.kind,
        name: s.name.clone(),
        entries,
        line: s.line_no,
    };
    Ok((
        section,
        Connection {
            name: s.name.clone(),
            patch: p.value.to_string(),
            form,
        },
    ))
}

/// `[[a, b], [c, d]]`, or a bare polynomial for 1×1 matrices.
fn parse_matrix(e: &RawEntry<'_>, dim: u8, size: usize) -> Result<Vec<Vec<CoordPoly>>, Diagnostic> {
    let text = e.value;
    let poly = |start: usize, end: usize| -> Result<CoordPoly, Diagnostic> {
        let cell = &text[start..end];
        let lead = cell.len() - cell.trim_start().len();
        if cell.trim().is_empty() {
            return Err(e.err(start, DiagnosticKind::Syntax, "empty matrix entry"));
        }
        CoordPoly::parse(dim, cell.trim()).map_err(|err| {
            let kind = if err.message.starts_with("unknown coordinate") {
                DiagnosticKind::Undeclared
            } else {
                DiagnosticKind::Syntax
            };
            e.err(start + lead + err.offset, kind, err.message)
        })
    };
    if !text.starts_with('[') {
        if size != 1 {
            return Err(e.err(
                0,
                DiagnosticKind::Syntax,
                format!("expected a {size}x{size} matrix `[[...], ...]`"),
            ));
        }
        return Ok(vec![vec![poly(0, text.len())?]]);
    }
    let bytes = text.as_bytes();
    let mut rows: Vec<Vec<CoordPoly>> = Vec::new();
    let mut pos = 1;
    let ws = |pos: &mut usize| {
        while *pos < bytes.len() && (bytes[*pos] == b' ' || bytes[*pos] == b'\t') {
            *pos += 1;
        }
    };
    loop {
        ws(&mut pos);
        if bytes.get(pos) != Some(&b'[') {
            return Err(e.err(pos, DiagnosticKind::Syntax, "expected `[` to open a row"));
        }
        pos += 1;
        let mut row = Vec::new();
        loop {
            let start = pos;
            let mut depth = 0usize;
            while pos < bytes.len() {
                match bytes[pos] {
                    b'(' => depth += 1,
                    b')' if depth > 0 => depth -= 1,
                    b',' | b']' if depth == 0 => break,
                    b'[' => return Err(e.err(pos, DiagnosticKind::Syntax, "unexpected `[`")),
                    _ => {}
                }
                pos += 1;
            }
            if pos >= bytes.len() {
                return Err(e.err(pos, DiagnosticKind::Syntax, "expected `]` to close a row"));
            }
            row.push(poly(start, pos)?);
            let sep = bytes[pos];
            pos += 1;
            if sep == b']' {
                break;
            }
        }
        if row.len() != size {
            return Err(e.err(
                pos - 1,
                DiagnosticKind::Invalid,
                format!("row has {} entries, the patch needs {size}", row.len()),
            ));
        }
        rows.push(row);
        ws(&mut pos);
        match bytes.get(pos) {
            Some(b',') => pos += 1,
            Some(b']') => {
                pos += 1;
                break;
            }
            _ => return Err(e.err(pos, DiagnosticKind::Syntax, "expected `,` or `]`")),
        }
    }
    ws(&mut pos);
    if pos < bytes.len() {
        return Err(e.err(
            pos,
            DiagnosticKind::Syntax,
            "unexpected text after the matrix",
        ));
    }
    if rows.len() != size {
        return Err(e.err(
            0,
            DiagnosticKind::Invalid,
            format!("matrix has {} rows, the patch needs {size}", rows.len()),
        ));
    }
    Ok(rows)
}
