//! Corpus scanning and lexical method extraction.
//!
//! Extraction is purely lexical: after comments and string/char literals are
//! blanked out, a method definition is an identifier followed by a balanced
//! parameter list, an optional `throws` clause and an opening brace, found
//! directly inside a type body and preceded by a type-like token. Callees are
//! the distinct non-keyword names that appear as `name(` inside the body,
//! minus constructor invocations (`new Name(`) and annotation arguments
//! (`@Name(...)`). No symbol resolution of any kind takes place; a call
//! through a receiver (`buf.write(x)`) contributes the member name (`write`).

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One source file: relative path, declared package and raw text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceUnit {
    pub path: String,
    pub package_name: String,
    pub text: String,
}

impl SourceUnit {
    pub fn new(path: impl Into<String>, text: impl Into<String>) -> Self {
        let text = text.into();
        let package_name = parse_package_name(&text);
        SourceUnit {
            path: path.into(),
            package_name,
            text,
        }
    }
}

/// One extracted method definition with its deduplicated callee name set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodRecord {
    pub name: String,
    #[serde(rename = "package")]
    pub package_name: String,
    pub path: String,
    pub callees: BTreeSet<String>,
}

/// Extraction output for one unit.
#[derive(Debug, Clone)]
pub struct ExtractedUnit {
    pub unit: SourceUnit,
    pub records: Vec<MethodRecord>,
    pub diagnostics: Vec<String>,
}

/// Result of scanning a corpus root.
#[derive(Debug, Clone)]
pub struct Scan {
    pub units: Vec<SourceUnit>,
    /// Files matching the extension filter that could not be decoded or read.
    pub skipped_files: usize,
}

/// Scan options; defaults target Java sources.
#[derive(Debug, Clone)]
pub struct ScanOptions {
    /// Recognized extensions, without the leading dot.
    pub extensions: Vec<String>,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            extensions: vec!["java".to_string()],
        }
    }
}

/// Walk `root` and return every recognized source file in lexicographic path
/// order. Paths are reported relative to `root` with `/` separators. Files
/// that cannot be decoded as UTF-8 are counted and skipped.
pub fn scan_corpus(root: &Path, options: &ScanOptions) -> Result<Scan> {
    if !root.is_dir() {
        return Err(Error::io(
            root,
            std::io::Error::new(std::io::ErrorKind::NotFound, "not a readable directory"),
        ));
    }
    let mut units = Vec::new();
    let mut skipped = 0usize;
    for entry in walkdir::WalkDir::new(root) {
        let entry = entry.map_err(|e| {
            Error::io(
                root,
                e.into_io_error()
                    .unwrap_or_else(|| std::io::Error::other("walk error")),
            )
        })?;
        if !entry.file_type().is_file() {
            continue;
        }
        let ext = entry
            .path()
            .extension()
            .and_then(|e| e.to_str())
            .unwrap_or("");
        if !options.extensions.iter().any(|want| want == ext) {
            continue;
        }
        let rel = entry
            .path()
            .strip_prefix(root)
            .expect("walked path is under root")
            .to_string_lossy()
            .replace('\\', "/");
        match std::fs::read(entry.path()) {
            Ok(bytes) => match String::from_utf8(bytes) {
                Ok(text) => units.push(SourceUnit::new(rel, text)),
                Err(_) => skipped += 1,
            },
            Err(_) => skipped += 1,
        }
    }
    units.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(Scan {
        units,
        skipped_files: skipped,
    })
}

/// Extract all method records from one unit. Never fails: unbalanced input is
/// parsed up to the longest consistent prefix and reported as a diagnostic.
pub fn extract_methods(unit: &SourceUnit) -> ExtractedUnit {
    let stripped = strip_comments_and_strings(&unit.text);
    let tokens = tokenize(&stripped);
    let mut scanner = Scanner::new(unit, &tokens);
    scanner.run();
    ExtractedUnit {
        unit: unit.clone(),
        records: scanner.records,
        diagnostics: scanner.diagnostics,
    }
}

/// Extract every unit, optionally in parallel. The output order is the input
/// unit order either way, so both modes produce identical results.
pub fn extract_all(units: &[SourceUnit], parallel: bool) -> Vec<ExtractedUnit> {
    if parallel {
        units.par_iter().map(extract_methods).collect()
    } else {
        units.iter().map(extract_methods).collect()
    }
}

/// Cleansing outcome: kept units plus per-rule drop counts.
#[derive(Debug)]
pub struct CleanseOutcome {
    pub kept: Vec<ExtractedUnit>,
    pub dropped_test_package: usize,
    pub dropped_serial: usize,
}

/// Drop units whose package name contains `test` (case-insensitive) and units
/// of three or more methods that all share one alphabetic base name with an
/// integer suffix (`get0`, `get1`, ..., `get100`).
pub fn cleanse(extracted: Vec<ExtractedUnit>) -> CleanseOutcome {
    let mut kept = Vec::with_capacity(extracted.len());
    let mut dropped_test_package = 0;
    let mut dropped_serial = 0;
    for item in extracted {
        if item.unit.package_name.to_ascii_lowercase().contains("test") {
            dropped_test_package += 1;
        } else if is_serially_numbered(&item.records) {
            dropped_serial += 1;
        } else {
            kept.push(item);
        }
    }
    CleanseOutcome {
        kept,
        dropped_test_package,
        dropped_serial,
    }
}

fn is_serially_numbered(records: &[MethodRecord]) -> bool {
    if records.len() < 3 {
        return false;
    }
    let mut shared_base: Option<&str> = None;
    for record in records {
        let name = record.name.as_str();
        let digits = name.chars().rev().take_while(|c| c.is_ascii_digit()).count();
        if digits == 0 || digits == name.len() {
            return false;
        }
        let base = &name[..name.len() - digits];
        if !base.chars().all(|c| c.is_ascii_alphabetic()) {
            return false;
        }
        match shared_base {
            None => shared_base = Some(base),
            Some(seen) if seen != base => return false,
            Some(_) => {}
        }
    }
    true
}

/// Write records as JSON Lines, one record per line, keys in declaration
/// order and callees sorted. Byte-identical for identical input.
pub fn write_records_jsonl<W: Write>(records: &[MethodRecord], mut out: W) -> Result<()> {
    for record in records {
        let line = serde_json::to_string(record).expect("record serialization cannot fail");
        out.write_all(line.as_bytes())
            .and_then(|_| out.write_all(b"\n"))
            .map_err(|e| Error::io("<records>", e))?;
    }
    Ok(())
}

/// Read records back from JSON Lines; errors carry the offending line number.
pub fn read_records_jsonl<R: BufRead>(reader: R, origin: &Path) -> Result<Vec<MethodRecord>> {
    let mut records = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(origin, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: MethodRecord = serde_json::from_str(&line)
            .map_err(|e| Error::format(origin, idx + 1, e.to_string()))?;
        records.push(record);
    }
    Ok(records)
}

/// `true` for a lexically valid identifier: letters, digits, `_`, `$`, not
/// starting with a digit.
pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' || c == '$' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '$')
}

/// Reserved words that can never be method names or callees. Contextual
/// keywords (`var`, `record`, `yield`) are absent on purpose: they are legal
/// method names.
const RESERVED: &[&str] = &[
    "abstract", "assert", "boolean", "break", "byte", "case", "catch", "char", "class", "const",
    "continue", "default", "do", "double", "else", "enum", "extends", "final", "finally", "float",
    "for", "goto", "if", "implements", "import", "instanceof", "int", "interface", "long",
    "native", "new", "package", "private", "protected", "public", "return", "short", "static",
    "strictfp", "super", "switch", "synchronized", "this", "throw", "throws", "transient", "try",
    "void", "volatile", "while", "true", "false", "null",
];

fn is_reserved(word: &str) -> bool {
    RESERVED.contains(&word)
}

/// Primitive type keywords plus `void`: legal tokens directly before a method
/// name in a definition header.
const TYPE_KEYWORDS: &[&str] = &[
    "void", "int", "long", "boolean", "char", "byte", "short", "float", "double",
];

/// Replace comment bodies and string/char literal contents with spaces,
/// preserving length and line structure so token positions stay meaningful.
pub fn strip_comments_and_strings(text: &str) -> String {
    #[derive(PartialEq)]
    enum State {
        Code,
        LineComment,
        BlockComment,
        Str,
        TextBlock,
        Chr,
    }
    let bytes = text.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut state = State::Code;
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        match state {
            State::Code => {
                if b == b'/' && bytes.get(i + 1) == Some(&b'/') {
                    state = State::LineComment;
                    out.extend_from_slice(b"  ");
                    i += 2;
                } else if b == b'/' && bytes.get(i + 1) == Some(&b'*') {
                    state = State::BlockComment;
                    out.extend_from_slice(b"  ");
                    i += 2;
                } else if b == b'"' && bytes.get(i + 1) == Some(&b'"') && bytes.get(i + 2) == Some(&b'"')
                {
                    state = State::TextBlock;
                    out.extend_from_slice(b"   ");
                    i += 3;
                } else if b == b'"' {
                    state = State::Str;
                    out.push(b' ');
                    i += 1;
                } else if b == b'\'' {
                    state = State::Chr;
                    out.push(b' ');
                    i += 1;
                } else {
                    out.push(b);
                    i += 1;
                }
            }
            State::LineComment => {
                if b == b'\n' {
                    state = State::Code;
                    out.push(b'\n');
                } else {
                    out.push(b' ');
                }
                i += 1;
            }
            State::BlockComment => {
                if b == b'*' && bytes.get(i + 1) == Some(&b'/') {
                    state = State::Code;
                    out.extend_from_slice(b"  ");
                    i += 2;
                } else {
                    out.push(if b == b'\n' { b'\n' } else { b' ' });
                    i += 1;
                }
            }
            State::Str => {
                if b == b'\\' && i + 1 < bytes.len() {
                    out.extend_from_slice(b"  ");
                    i += 2;
                } else {
                    if b == b'"' || b == b'\n' {
                        // Unterminated literals end at the line break.
                        state = State::Code;
                        out.push(if b == b'\n' { b'\n' } else { b' ' });
                    } else {
                        out.push(b' ');
                    }
                    i += 1;
                }
            }
            State::TextBlock => {
                if b == b'"' && bytes.get(i + 1) == Some(&b'"') && bytes.get(i + 2) == Some(&b'"') {
                    state = State::Code;
                    out.extend_from_slice(b"   ");
                    i += 3;
                } else {
                    out.push(if b == b'\n' { b'\n' } else { b' ' });
                    i += 1;
                }
            }
            State::Chr => {
                if b == b'\\' && i + 1 < bytes.len() {
                    out.extend_from_slice(b"  ");
                    i += 2;
                } else {
                    if b == b'\'' || b == b'\n' {
                        state = State::Code;
                        out.push(if b == b'\n' { b'\n' } else { b' ' });
                    } else {
                        out.push(b' ');
                    }
                    i += 1;
                }
            }
        }
    }
    // The replacement is ASCII-for-ASCII; multibyte chars pass through intact.
    String::from_utf8(out).expect("stripping preserves UTF-8")
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num,
    Punct(char),
    Arrow, // ->
}

fn tokenize(text: &str) -> Vec<(Tok, usize)> {
    let mut tokens = Vec::new();
    let bytes = text.as_bytes();
    let mut line = 1usize;
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        if b == b'\n' {
            line += 1;
            i += 1;
        } else if b.is_ascii_whitespace() {
            i += 1;
        } else if b.is_ascii_alphabetic() || b == b'_' || b == b'$' {
            let start = i;
            while i < bytes.len()
                && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] == b'$')
            {
                i += 1;
            }
            tokens.push((Tok::Ident(text[start..i].to_string()), line));
        } else if b.is_ascii_digit() {
            // Numeric literal; the exact shape is irrelevant, it only must not
            // merge with a following identifier.
            while i < bytes.len()
                && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] == b'.')
            {
                i += 1;
            }
            tokens.push((Tok::Num, line));
        } else if b == b'-' && bytes.get(i + 1) == Some(&b'>') {
            tokens.push((Tok::Arrow, line));
            i += 2;
        } else if b.is_ascii() {
            tokens.push((Tok::Punct(b as char), line));
            i += 1;
        } else {
            // Non-ASCII outside literals: skip the full code point.
            let ch_len = text[i..].chars().next().map(char::len_utf8).unwrap_or(1);
            i += ch_len;
        }
    }
    tokens
}

fn parse_package_name(text: &str) -> String {
    let stripped = strip_comments_and_strings(text);
    let tokens = tokenize(&stripped);
    let mut depth = 0usize;
    let mut i = 0;
    while i < tokens.len() {
        match &tokens[i].0 {
            Tok::Punct('{') => depth += 1,
            Tok::Punct('}') => depth = depth.saturating_sub(1),
            Tok::Ident(word) if word == "package" && depth == 0 => {
                let mut parts = Vec::new();
                let mut j = i + 1;
                while j < tokens.len() {
                    match &tokens[j].0 {
                        Tok::Ident(part) => parts.push(part.clone()),
                        Tok::Punct('.') => {}
                        _ => break,
                    }
                    j += 1;
                }
                return parts.join(".");
            }
            _ => {}
        }
        i += 1;
    }
    String::new()
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum ScopeKind {
    Type,
    Method,
    Block,
}

struct Scanner<'a> {
    unit: &'a SourceUnit,
    tokens: &'a [(Tok, usize)],
    /// Scope stack; a `Method` entry owns the index of its in-progress record.
    scopes: Vec<(ScopeKind, Option<usize>)>,
    /// Header tokens (indices) since the last `{`, `}` or `;`.
    header: Vec<usize>,
    records: Vec<MethodRecord>,
    /// Indices into `records` for every open method scope, innermost last.
    open_methods: Vec<usize>,
    diagnostics: Vec<String>,
}

impl<'a> Scanner<'a> {
    fn new(unit: &'a SourceUnit, tokens: &'a [(Tok, usize)]) -> Self {
        Scanner {
            unit,
            tokens,
            scopes: Vec::new(),
            header: Vec::new(),
            records: Vec::new(),
            open_methods: Vec::new(),
            diagnostics: Vec::new(),
        }
    }

    fn ident(&self, idx: usize) -> Option<&str> {
        match &self.tokens[idx].0 {
            Tok::Ident(s) => Some(s),
            _ => None,
        }
    }

    fn run(&mut self) {
        let mut i = 0;
        while i < self.tokens.len() {
            match &self.tokens[i].0 {
                Tok::Punct('{') => {
                    self.open_scope();
                    self.header.clear();
                }
                Tok::Punct('}') => {
                    self.header.clear();
                    if self.scopes.is_empty() {
                        // Extra closing brace: stop at the longest consistent
                        // prefix rather than misattributing what follows.
                        self.diagnostics.push(format!(
                            "{}: line {}: unbalanced '}}', stopping extraction",
                            self.unit.path, self.tokens[i].1
                        ));
                        break;
                    }
                    self.close_scope();
                }
                Tok::Punct(';') => self.header.clear(),
                Tok::Ident(word) => {
                    self.maybe_collect_callee(i, word);
                    self.header.push(i);
                }
                _ => self.header.push(i),
            }
            i += 1;
        }
        if !self.scopes.is_empty() {
            self.diagnostics.push(format!(
                "{}: unclosed brace at end of file",
                self.unit.path
            ));
        }
    }

    fn open_scope(&mut self) {
        let kind = self.classify_header();
        match kind {
            HeaderKind::Type => self.scopes.push((ScopeKind::Type, None)),
            HeaderKind::Method(name) => {
                // The definition name itself reads as `name(` to any enclosing
                // method body, so it was already collected as a callee there.
                let record = MethodRecord {
                    name,
                    package_name: self.unit.package_name.clone(),
                    path: self.unit.path.clone(),
                    callees: BTreeSet::new(),
                };
                self.records.push(record);
                let idx = self.records.len() - 1;
                self.open_methods.push(idx);
                self.scopes.push((ScopeKind::Method, Some(idx)));
            }
            HeaderKind::Block => self.scopes.push((ScopeKind::Block, None)),
        }
    }

    fn close_scope(&mut self) {
        if let Some((ScopeKind::Method, _)) = self.scopes.pop() {
            self.open_methods.pop();
        }
    }

    fn current_kind(&self) -> Option<ScopeKind> {
        self.scopes.last().map(|(k, _)| *k)
    }

    fn maybe_collect_callee(&mut self, idx: usize, word: &str) {
        if self.open_methods.is_empty() || is_reserved(word) {
            return;
        }
        if !matches!(self.tokens.get(idx + 1).map(|t| &t.0), Some(Tok::Punct('('))) {
            return;
        }
        // Walk the dotted chain back to its head: `a.b.name(`.
        let mut head = idx;
        while head >= 2
            && matches!(&self.tokens[head - 1].0, Tok::Punct('.'))
            && matches!(&self.tokens[head - 2].0, Tok::Ident(_))
        {
            head -= 2;
        }
        match self.tokens.get(head.wrapping_sub(1)).map(|t| &t.0) {
            Some(Tok::Ident(prev)) if prev == "new" => return, // constructor
            Some(Tok::Punct('@')) => return,                   // annotation
            _ => {}
        }
        for &record_idx in &self.open_methods {
            self.records[record_idx].callees.insert(word.to_string());
        }
    }

    fn classify_header(&self) -> HeaderKind {
        let header = &self.header;
        // Type declarations, including `record Name(...)`. A `class` keyword
        // preceded by `.` is the class-literal form (`Foo.class`), not a
        // declaration.
        for (pos, &tok_idx) in header.iter().enumerate() {
            let after_dot = pos > 0 && matches!(self.tokens[header[pos - 1]].0, Tok::Punct('.'));
            if after_dot {
                continue;
            }
            if let Some(word) = self.ident(tok_idx) {
                match word {
                    "class" | "interface" | "enum" => return HeaderKind::Type,
                    "record" => {
                        let next_is_name = header
                            .get(pos + 1)
                            .and_then(|&t| self.ident(t))
                            .is_some_and(|w| !is_reserved(w));
                        let then_paren = header
                            .get(pos + 2)
                            .is_some_and(|&t| matches!(self.tokens[t].0, Tok::Punct('(')));
                        if next_is_name && then_paren {
                            return HeaderKind::Type;
                        }
                    }
                    _ => {}
                }
            }
        }

        // Strip a trailing `throws A.B, C` clause.
        let mut end = header.len();
        for (pos, &tok_idx) in header.iter().enumerate() {
            if self.ident(tok_idx) == Some("throws") {
                let tail_ok = header[pos + 1..].iter().all(|&t| {
                    matches!(&self.tokens[t].0, Tok::Ident(w) if !is_reserved(w))
                        || matches!(&self.tokens[t].0, Tok::Punct('.') | Tok::Punct(','))
                });
                if tail_ok && pos > 0 {
                    end = pos;
                }
                break;
            }
        }
        let header = &header[..end];

        let Some(&last) = header.last() else {
            return HeaderKind::Block;
        };
        if !matches!(self.tokens[last].0, Tok::Punct(')')) {
            return HeaderKind::Block;
        }
        // Find the `(` matching the trailing `)`.
        let mut balance = 0i32;
        let mut open = None;
        for (pos, &tok_idx) in header.iter().enumerate().rev() {
            match self.tokens[tok_idx].0 {
                Tok::Punct(')') => balance += 1,
                Tok::Punct('(') => {
                    balance -= 1;
                    if balance == 0 {
                        open = Some(pos);
                        break;
                    }
                }
                _ => {}
            }
        }
        let Some(open) = open else {
            return HeaderKind::Block;
        };
        if open == 0 {
            return HeaderKind::Block;
        }
        let name_pos = open - 1;
        let Some(name) = self.ident(header[name_pos]) else {
            return HeaderKind::Block;
        };
        if is_reserved(name) {
            return HeaderKind::Block; // if (...) {, while (...) {, ...
        }

        // `new Name(...) {` or `new a.b.Name(...) {` opens an anonymous class
        // body; methods defined inside it are real definitions.
        let mut chain_start = name_pos;
        while chain_start >= 2
            && matches!(self.tokens[header[chain_start - 1]].0, Tok::Punct('.'))
            && self.ident(header[chain_start - 2]).is_some()
        {
            chain_start -= 2;
        }
        if chain_start > 0 && self.ident(header[chain_start - 1]) == Some("new") {
            return HeaderKind::Type;
        }

        // A method definition needs a type-like token before the name and a
        // type body around it.
        if self.current_kind() != Some(ScopeKind::Type) {
            return HeaderKind::Block;
        }
        if name_pos == 0 {
            return HeaderKind::Block; // constructor in a default-access class
        }
        let before = header[name_pos - 1];
        let type_like = match &self.tokens[before].0 {
            Tok::Ident(w) => TYPE_KEYWORDS.contains(&w.as_str()) || !is_reserved(w),
            Tok::Punct(']') | Tok::Punct('>') => true,
            _ => false,
        };
        if type_like {
            HeaderKind::Method(name.to_string())
        } else {
            HeaderKind::Block
        }
    }
}

enum HeaderKind {
    Type,
    Method(String),
    Block,
}

/// Render extraction/cleansing counters for logs.
pub fn summarize(extracted: &[ExtractedUnit]) -> String {
    let records: usize = extracted.iter().map(|e| e.records.len()).sum();
    let diags: usize = extracted.iter().map(|e| e.diagnostics.len()).sum();
    let mut s = String::new();
    let _ = write!(s, "{} units, {} methods, {} diagnostics", extracted.len(), records, diags);
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn unit(text: &str) -> SourceUnit {
        SourceUnit::new("Test.java", text)
    }

    fn extract(text: &str) -> Vec<MethodRecord> {
        extract_methods(&unit(text)).records
    }

    fn callees(record: &MethodRecord) -> Vec<&str> {
        record.callees.iter().map(|s| s.as_str()).collect()
    }

    #[test]
    fn member_and_direct_calls() {
        let records = extract("class A { void saveFile(){ open(); buf.write(x); } }");
        assert_eq!(records.len(), 1);
        assert_eq!(records[0].name, "saveFile");
        assert_eq!(callees(&records[0]), ["open", "write"]);
    }

    #[test]
    fn nested_invocations_both_counted() {
        let records = extract("class A { void f(){ g(h()); } }");
        assert_eq!(records.len(), 1);
        assert_eq!(records[0].name, "f");
        assert_eq!(callees(&records[0]), ["g", "h"]);
    }

    #[test]
    fn constructor_invocation_excluded() {
        let records = extract("class A { Foo f(){ return new Foo(); } }");
        assert_eq!(records.len(), 1);
        assert!(records[0].callees.is_empty());
    }

    #[test]
    fn qualified_constructor_excluded() {
        let records = extract("class A { void f(){ x = new a.b.Foo(y); } }");
        assert!(records[0].callees.is_empty());
    }

    #[test]
    fn chained_call_after_new_is_a_call() {
        let records = extract("class A { void f(){ new Foo().bar(); } }");
        assert_eq!(callees(&records[0]), ["bar"]);
    }

    #[test]
    fn constructors_not_emitted() {
        let records = extract("class A { public A(int x){ init(); } void g(){} }");
        let names: Vec<_> = records.iter().map(|r| r.name.as_str()).collect();
        assert_eq!(names, ["g"]);
    }

    #[test]
    fn control_flow_keywords_excluded() {
        let records = extract(
            "class A { void f(){ if (ready()) { while (x) { poll(); } } switch (kind()) { default: break; } synchronized (this) { run(); } } }",
        );
        assert_eq!(callees(&records[0]), ["kind", "poll", "ready", "run"]);
    }

    #[test]
    fn annotation_arguments_excluded() {
        let records =
            extract("class A { @Test(expected = Foo.class) void f(){ check(); } }");
        assert_eq!(records.len(), 1);
        assert_eq!(records[0].name, "f");
        assert_eq!(callees(&records[0]), ["check"]);
    }

    #[test]
    fn comments_and_strings_stripped() {
        let records = extract(
            "class A { void f(){ /* fake() */ real(); // gone()\n String s = \"lie()\"; char c = '('; } }",
        );
        assert_eq!(callees(&records[0]), ["real"]);
    }

    #[test]
    fn recursion_self_call_kept() {
        let records = extract("class A { int fib(int n){ return fib(n - 1) + fib(n - 2); } }");
        assert_eq!(callees(&records[0]), ["fib"]);
    }

    #[test]
    fn generic_and_array_return_types() {
        let records = extract(
            "class A { List<String> names(){ return fetch(); } int[] ids() throws IOException { return scan(); } }",
        );
        let names: Vec<_> = records.iter().map(|r| r.name.as_str()).collect();
        assert_eq!(names, ["names", "ids"]);
        assert_eq!(callees(&records[1]), ["scan"]);
    }

    #[test]
    fn interface_signatures_have_no_body() {
        let records = extract("interface A { void f(); int g(int x); }");
        assert!(records.is_empty());
    }

    #[test]
    fn initializer_blocks_not_emitted() {
        let records = extract("class A { static { setup(); } { warm(); } void f(){ go(); } }");
        assert_eq!(records.len(), 1);
        assert_eq!(records[0].name, "f");
        assert_eq!(callees(&records[0]), ["go"]);
    }

    #[test]
    fn anonymous_class_methods_extracted_and_counted_in_outer() {
        let records = extract(
            "class A { void f(){ exec(new Runnable(){ public void run(){ step(); } }); } }",
        );
        let names: Vec<_> = records.iter().map(|r| r.name.as_str()).collect();
        assert_eq!(names, ["f", "run"]);
        let f = records.iter().find(|r| r.name == "f").unwrap();
        // `run(` and `step(` both occur lexically inside f's body.
        assert_eq!(callees(f), ["exec", "run", "step"]);
        let run = records.iter().find(|r| r.name == "run").unwrap();
        assert_eq!(callees(run), ["step"]);
    }

    #[test]
    fn lambda_body_attributes_to_enclosing_method() {
        let records = extract("class A { void f(){ list.forEach(x -> { handle(x); }); } }");
        assert_eq!(callees(&records[0]), ["forEach", "handle"]);
    }

    #[test]
    fn array_initializer_is_not_a_scope_of_interest() {
        let records =
            extract("class A { void f(){ int[] xs = new int[] { 1, 2 }; use(xs); } }");
        assert_eq!(callees(&records[0]), ["use"]);
    }

    #[test]
    fn unbalanced_open_brace_keeps_prefix() {
        let extracted = extract_methods(&unit("class A { void f(){ g(); "));
        assert_eq!(extracted.records.len(), 1);
        assert_eq!(extracted.records[0].name, "f");
        assert_eq!(callees(&extracted.records[0]), ["g"]);
        assert_eq!(extracted.diagnostics.len(), 1);
    }

    #[test]
    fn unbalanced_close_brace_stops_cleanly() {
        let extracted = extract_methods(&unit("class A { void f(){ g(); } } } class B {}"));
        assert_eq!(extracted.records.len(), 1);
        assert_eq!(extracted.diagnostics.len(), 1);
    }

    #[test]
    fn extraction_is_deterministic() {
        let text = "class A { void f(){ g(); h.i(j()); } int k(){ return f(); } }";
        assert_eq!(extract(text), extract(text));
    }

    #[test]
    fn every_callee_appears_in_stripped_text() {
        let text = "class A { void f(){ g(); buf.write(x); /* no() */ } }";
        let stripped = strip_comments_and_strings(text);
        for record in extract(text) {
            for callee in &record.callees {
                let pat = format!("{callee}(");
                assert!(stripped.contains(&pat), "callee {callee} not found as a call site");
            }
        }
    }

    #[test]
    fn parameters_are_not_callees() {
        let records = extract("class A { void f(int count, Reader reader){ go(count); } }");
        assert_eq!(callees(&records[0]), ["go"]);
    }

    #[test]
    fn package_parsing() {
        let u = SourceUnit::new("a/B.java", "package a.b.c;\nclass B {}");
        assert_eq!(u.package_name, "a.b.c");
        let u = SourceUnit::new("a/B.java", "// header\npackage a;\nclass B {}");
        assert_eq!(u.package_name, "a");
        let u = SourceUnit::new("B.java", "class B {}");
        assert_eq!(u.package_name, "");
    }

    #[test]
    fn scan_empty_directory() {
        let dir = tempfile::tempdir().unwrap();
        let scan = scan_corpus(dir.path(), &ScanOptions::default()).unwrap();
        assert!(scan.units.is_empty());
        assert_eq!(scan.skipped_files, 0);
    }

    #[test]
    fn scan_orders_lexicographically_and_parses_packages() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir_all(dir.path().join("b")).unwrap();
        fs::create_dir_all(dir.path().join("a")).unwrap();
        fs::write(dir.path().join("b/A.java"), "package b;\nclass A {}").unwrap();
        fs::write(dir.path().join("a/B.java"), "package a;\nclass B {}").unwrap();
        fs::write(dir.path().join("a/notes.txt"), "ignored").unwrap();
        let scan = scan_corpus(dir.path(), &ScanOptions::default()).unwrap();
        let paths: Vec<_> = scan.units.iter().map(|u| u.path.as_str()).collect();
        assert_eq!(paths, ["a/B.java", "b/A.java"]);
        assert_eq!(scan.units[0].package_name, "a");
    }

    #[test]
    fn scan_skips_undecodable_files() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("Ok.java"), "class Ok {}").unwrap();
        fs::write(dir.path().join("Bad.java"), [0xffu8, 0xfe, 0x00, 0x41]).unwrap();
        let scan = scan_corpus(dir.path(), &ScanOptions::default()).unwrap();
        assert_eq!(scan.units.len(), 1);
        assert_eq!(scan.skipped_files, 1);
    }

    #[test]
    fn scan_missing_root_is_fatal() {
        assert!(scan_corpus(Path::new("/nonexistent/nowhere"), &ScanOptions::default()).is_err());
    }

    #[test]
    fn cleanse_drops_test_packages() {
        let u = SourceUnit::new("T.java", "package com.foo.test.util;\nclass T { void a(){} void b(){} }");
        let out = cleanse(extract_all(std::slice::from_ref(&u), false));
        assert!(out.kept.is_empty());
        assert_eq!(out.dropped_test_package, 1);
    }

    #[test]
    fn cleanse_drops_serially_numbered_units() {
        let body: String = (0..5).map(|i| format!("void get{i}(){{}} ")).collect();
        let u = SourceUnit::new("G.java", format!("package gen;\nclass G {{ {body} }}"));
        let out = cleanse(extract_all(std::slice::from_ref(&u), false));
        assert!(out.kept.is_empty());
        assert_eq!(out.dropped_serial, 1);
    }

    #[test]
    fn cleanse_keeps_mixed_names() {
        let u = SourceUnit::new(
            "M.java",
            "package app;\nclass M { void parse(){} void get1(){} void load(){} }",
        );
        let out = cleanse(extract_all(std::slice::from_ref(&u), false));
        assert_eq!(out.kept.len(), 1);
    }

    #[test]
    fn cleanse_is_idempotent() {
        let units = vec![
            SourceUnit::new("A.java", "package app;\nclass A { void f(){} }"),
            SourceUnit::new("T.java", "package tests;\nclass T { void f(){} }"),
        ];
        let once = cleanse(extract_all(&units, false));
        let kept_paths: Vec<_> = once.kept.iter().map(|e| e.unit.path.clone()).collect();
        let twice = cleanse(once.kept);
        let twice_paths: Vec<_> = twice.kept.iter().map(|e| e.unit.path.clone()).collect();
        assert_eq!(kept_paths, twice_paths);
        assert_eq!(twice.dropped_test_package + twice.dropped_serial, 0);
    }

    #[test]
    fn parallel_extraction_matches_sequential() {
        let units: Vec<SourceUnit> = (0..16)
            .map(|i| {
                SourceUnit::new(
                    format!("u{i}/F.java"),
                    format!("package p{i};\nclass F {{ void m{i}(){{ a{i}(); shared(); }} }}"),
                )
            })
            .collect();
        let seq: Vec<_> = extract_all(&units, false).into_iter().map(|e| e.records).collect();
        let par: Vec<_> = extract_all(&units, true).into_iter().map(|e| e.records).collect();
        assert_eq!(seq, par);
    }

    #[test]
    fn jsonl_round_trip_and_stability() {
        let records = extract("class A { void f(){ g(); b.h(); } void k(){} }");
        let mut records: Vec<MethodRecord> = records;
        for r in &mut records {
            r.package_name = "app".into();
        }
        let mut buf1 = Vec::new();
        write_records_jsonl(&records, &mut buf1).unwrap();
        let mut buf2 = Vec::new();
        write_records_jsonl(&records, &mut buf2).unwrap();
        assert_eq!(buf1, buf2);
        let parsed = read_records_jsonl(&buf1[..], Path::new("rec.jsonl")).unwrap();
        assert_eq!(parsed, records);
        let line = String::from_utf8(buf1).unwrap();
        assert!(line.starts_with(r#"{"name":"f","package":"app","path":"Test.java","callees":["g","h"]}"#));
    }

    #[test]
    fn jsonl_error_carries_line_number() {
        let data = b"{\"name\":\"f\",\"package\":\"\",\"path\":\"x\",\"callees\":[]}\nnot json\n";
        let err = read_records_jsonl(&data[..], Path::new("rec.jsonl")).unwrap_err();
        match err {
            Error::Format { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error: {other}"),
        }
    }
}
