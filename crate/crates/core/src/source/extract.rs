//! Top-level structure recognition: splits a token stream into declaration
//! chunks and derives the kind, name and metadata of each.

use std::collections::BTreeSet;
use std::ops::Range;

use super::declarator::{
    is_keyword, matching_close, parse_declaration, parse_param, split_top_level,
    starts_declaration, VarDecl,
};
use super::lexer::{directive_name, tokenize, TokKind, Token};
use super::{DeclKind, DeclarationMeta};

/// A located parse failure; `line` is zero-based within the scanned text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChunkError {
    pub line: usize,
    pub message: String,
}

impl ChunkError {
    fn new(line: usize, message: impl Into<String>) -> Self {
        ChunkError {
            line,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ChunkKind {
    /// `#define` line.
    Define,
    /// Any other directive (`#include`, `#if`, ...); kept as gap text.
    OtherDirective,
    Decl,
}

#[derive(Debug, Clone)]
pub struct Chunk {
    pub kind: ChunkKind,
    pub bytes: Range<usize>,
}

/// Splits a unit into top-level chunks. Text between chunks is gap text.
pub fn chunk(src: &str, toks: &[Token]) -> Result<Vec<Chunk>, ChunkError> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    let mut braces = 0usize;
    let mut parens = 0usize;
    let mut body_open = false;
    let mut saw_assign = false;
    let mut prev: Option<&str> = None;
    for (i, t) in toks.iter().enumerate() {
        let text = t.text(src);
        if t.kind == TokKind::Directive && braces == 0 && parens == 0 {
            if let Some(s) = start {
                return Err(ChunkError::new(
                    t.line,
                    format!(
                        "preprocessor directive splits the declaration starting on line {}",
                        toks[s].line + 1
                    ),
                ));
            }
            let kind = if directive_name(text) == "define" {
                ChunkKind::Define
            } else {
                ChunkKind::OtherDirective
            };
            out.push(Chunk {
                kind,
                bytes: t.range(),
            });
            prev = None;
            continue;
        }
        if start.is_none() {
            if text == ";" {
                // Stray semicolon at top level.
                continue;
            }
            start = Some(i);
            body_open = false;
            saw_assign = false;
        }
        match text {
            "(" | "[" => parens += 1,
            ")" | "]" => {
                parens = parens
                    .checked_sub(1)
                    .ok_or_else(|| ChunkError::new(t.line, format!("unbalanced `{text}`")))?;
            }
            "=" if braces == 0 && parens == 0 => saw_assign = true,
            "{" => {
                if braces == 0 && parens == 0 && prev == Some(")") && !saw_assign {
                    body_open = true;
                }
                braces += 1;
            }
            "}" => {
                braces = braces
                    .checked_sub(1)
                    .ok_or_else(|| ChunkError::new(t.line, "unbalanced `}`"))?;
                if braces == 0 && body_open {
                    let s = toks[start.take().unwrap()].start;
                    out.push(Chunk {
                        kind: ChunkKind::Decl,
                        bytes: s..t.end,
                    });
                    prev = None;
                    continue;
                }
            }
            ";" if braces == 0 && parens == 0 => {
                let s = toks[start.take().unwrap()].start;
                out.push(Chunk {
                    kind: ChunkKind::Decl,
                    bytes: s..t.end,
                });
                prev = None;
                continue;
            }
            _ => {}
        }
        if t.kind != TokKind::Directive {
            prev = Some(text);
        }
    }
    if let Some(s) = start {
        let what = if braces > 0 || parens > 0 {
            "unbalanced braces or parentheses"
        } else {
            "missing `;`"
        };
        return Err(ChunkError::new(
            toks[s].line,
            format!("unterminated declaration ({what})"),
        ));
    }
    Ok(out)
}

/// Everything derived from one declaration's own text.
#[derive(Debug, Clone)]
pub struct ParsedDecl {
    pub kind: DeclKind,
    pub name: String,
    pub aliases: Vec<String>,
    pub meta: DeclarationMeta,
    /// Procedure with a body, struct/union/enum with a member list, or a
    /// non-extern global.
    pub defining: bool,
}

/// Parses the text of a single top-level declaration. Leading and trailing
/// comments are allowed; more than one declaration is an error.
pub fn parse_single(code: &str) -> Result<ParsedDecl, ChunkError> {
    let toks = tokenize(code).map_err(|e| ChunkError::new(e.line() - 1, e.to_string()))?;
    let chunks = chunk(code, &toks)?;
    let mut decls = chunks
        .iter()
        .filter(|c| c.kind != ChunkKind::OtherDirective);
    let Some(first) = decls.next() else {
        return Err(ChunkError::new(0, "no declaration found"));
    };
    if decls.next().is_some() {
        return Err(ChunkError::new(
            0,
            "text contains more than one top-level declaration",
        ));
    }
    let lo = toks.partition_point(|t| t.start < first.bytes.start);
    let hi = toks.partition_point(|t| t.start < first.bytes.end);
    match first.kind {
        ChunkKind::Define => Ok(parse_define(code, &toks[lo])),
        _ => classify(code, &toks, lo..hi),
    }
}

fn parse_define(code: &str, tok: &Token) -> ParsedDecl {
    let text = tok.text(code);
    let rest = text.trim_start().trim_start_matches('#').trim_start();
    let rest = rest["define".len()..].trim_start();
    let end = rest
        .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
        .unwrap_or(rest.len());
    ParsedDecl {
        kind: DeclKind::Macro,
        name: rest[..end].to_string(),
        aliases: Vec::new(),
        meta: DeclarationMeta::default(),
        defining: true,
    }
}

fn text_of<'a>(code: &'a str, toks: &[Token]) -> &'a str {
    match (toks.first(), toks.last()) {
        (Some(a), Some(b)) => &code[a.start..b.end],
        _ => "",
    }
}

/// Identifier references and member names, skipping comments and literals.
fn collect_names(code: &str, toks: &[Token]) -> (BTreeSet<String>, BTreeSet<String>) {
    let mut refs = BTreeSet::new();
    let mut members = BTreeSet::new();
    let mut prev_member = false;
    for t in toks {
        match t.kind {
            TokKind::Ident => {
                let s = t.text(code);
                if prev_member {
                    members.insert(s.to_string());
                } else if !is_keyword(s) {
                    refs.insert(s.to_string());
                }
            }
            TokKind::Directive => {
                // Conditional branches and embedded defines are scanned too.
                let body = t.text(code).trim_start().trim_start_matches('#');
                let body = body.trim_start();
                let body = &body[directive_name(t.text(code)).len()..];
                if let Ok(inner) = tokenize(body) {
                    let (r, m) = collect_names(body, &inner);
                    refs.extend(r);
                    members.extend(m);
                }
            }
            _ => {}
        }
        prev_member = matches!(t.text(code), "." | "->");
    }
    (refs, members)
}

fn storage_skipped(code: &str, toks: &[Token]) -> usize {
    toks.iter()
        .take_while(|t| {
            matches!(
                t.text(code),
                "static" | "extern" | "inline" | "__inline" | "__inline__" | "register" | "const"
            )
        })
        .count()
}

fn classify(code: &str, all: &[Token], range: Range<usize>) -> Result<ParsedDecl, ChunkError> {
    let toks = &all[range.clone()];
    let (referenced_names, member_names) = collect_names(code, toks);
    let last = toks.last().expect("non-empty chunk");
    let line = toks[0].line;
    if last.text(code) == "}" {
        return parse_function(code, toks, referenced_names, member_names);
    }
    let inner = &toks[..toks.len() - 1];
    let first = inner
        .get(storage_skipped(code, inner))
        .map(|t| t.text(code))
        .unwrap_or("");
    let is_extern = inner.iter().any(|t| t.text(code) == "extern")
        && !inner.iter().any(|t| t.text(code) == "{");
    let mut meta = DeclarationMeta {
        referenced_names,
        member_names,
        ..Default::default()
    };

    if first == "typedef" {
        let (name, aliases, fields, has_body) = parse_typedef(code, inner)
            .ok_or_else(|| ChunkError::new(line, "cannot find the name of this typedef"))?;
        meta.fields = fields;
        return Ok(ParsedDecl {
            kind: DeclKind::TypeDecl,
            name,
            aliases,
            meta,
            defining: has_body,
        });
    }

    if let Some(td) = parse_tagged_type(code, inner) {
        meta.fields = td.fields;
        return Ok(ParsedDecl {
            kind: DeclKind::TypeDecl,
            name: td.tag,
            aliases: td.enumerators,
            meta,
            defining: td.has_body,
        });
    }

    if let Some(proto) = prototype_name(code, inner) {
        let mut f = parse_function_header(code, inner, proto);
        f.referenced_names = meta.referenced_names;
        f.member_names = meta.member_names;
        f.is_extern = is_extern;
        let name = inner[proto].text(code).to_string();
        return Ok(ParsedDecl {
            kind: DeclKind::Procedure,
            name,
            aliases: Vec::new(),
            meta: f,
            defining: false,
        });
    }

    // Global variable(s).
    let mut aliases = Vec::new();
    let name;
    match parse_declaration(code, inner, 0) {
        Some(decls) if !decls.is_empty() => {
            name = decls[0].name.clone();
            aliases.extend(decls.iter().skip(1).map(|d| d.name.clone()));
            // struct S {..} g; also names the tag.
            if let Some(td) = parse_tagged_type_prefix(code, inner) {
                aliases.push(td.tag);
                aliases.extend(td.enumerators);
                meta.fields = td.fields;
            }
            meta.globals = decls;
        }
        _ => {
            name = fallback_global_name(code, inner)
                .ok_or_else(|| ChunkError::new(line, "unrecognized top-level declaration"))?;
        }
    }
    meta.is_extern = is_extern;
    Ok(ParsedDecl {
        kind: DeclKind::Global,
        name,
        aliases,
        meta,
        defining: !is_extern,
    })
}

fn fallback_global_name(code: &str, toks: &[Token]) -> Option<String> {
    let mut depth = 0i32;
    let mut name = None;
    for t in toks {
        match t.text(code) {
            "(" | "[" | "{" => depth += 1,
            ")" | "]" | "}" => depth -= 1,
            "=" if depth == 0 => break,
            s if depth == 0 && t.kind == TokKind::Ident && !is_keyword(s) => {
                name = Some(s.to_string())
            }
            _ => {}
        }
    }
    name
}

struct TaggedType {
    tag: String,
    enumerators: Vec<String>,
    fields: Vec<VarDecl>,
    has_body: bool,
}

/// Finds `struct|union|enum [tag] [{...}]` at the start of `toks` (after
/// storage classes). Returns the tag info and the index after it.
fn tagged_prefix(code: &str, toks: &[Token]) -> Option<(TaggedType, usize)> {
    let mut i = storage_skipped(code, toks);
    let kw = toks.get(i)?.text(code);
    if !matches!(kw, "struct" | "union" | "enum") {
        return None;
    }
    i += 1;
    let mut tag = None;
    if let Some(t) = toks.get(i).filter(|t| t.kind == TokKind::Ident) {
        tag = Some(t.text(code).to_string());
        i += 1;
    }
    let mut fields = Vec::new();
    let mut enumerators = Vec::new();
    let mut has_body = false;
    if toks.get(i).map(|t| t.text(code)) == Some("{") {
        let close = matching_close(code, toks, i)?;
        let body = &toks[i + 1..close];
        if kw == "enum" {
            enumerators = enum_constants(code, body);
        } else {
            fields = struct_fields(code, body);
        }
        has_body = true;
        i = close + 1;
    }
    let tag = tag.unwrap_or_else(|| format!("<anonymous {kw} line {}>", toks[0].line + 1));
    Some((
        TaggedType {
            tag,
            enumerators,
            fields,
            has_body,
        },
        i,
    ))
}

/// A pure type definition: `struct S {...};` or `struct S;`.
fn parse_tagged_type(code: &str, toks: &[Token]) -> Option<TaggedType> {
    let (td, end) = tagged_prefix(code, toks)?;
    (end == toks.len()).then_some(td)
}

fn parse_tagged_type_prefix(code: &str, toks: &[Token]) -> Option<TaggedType> {
    let (td, _) = tagged_prefix(code, toks)?;
    td.has_body.then_some(td)
}

fn enum_constants(code: &str, body: &[Token]) -> Vec<String> {
    split_top_level(code, body, ",")
        .into_iter()
        .filter_map(|item| item.first())
        .filter(|t| t.kind == TokKind::Ident)
        .map(|t| t.text(code).to_string())
        .collect()
}

pub(crate) fn struct_fields(code: &str, body: &[Token]) -> Vec<VarDecl> {
    split_top_level(code, body, ";")
        .into_iter()
        .filter(|s| !s.is_empty())
        .filter_map(|s| parse_declaration(code, s, 0))
        .flatten()
        .collect()
}

fn parse_typedef(code: &str, toks: &[Token]) -> Option<(String, Vec<String>, Vec<VarDecl>, bool)> {
    let td_pos = toks.iter().position(|t| t.text(code) == "typedef")?;
    let rest = &toks[td_pos + 1..];
    let mut aliases = Vec::new();
    let mut fields = Vec::new();
    let mut has_body = true;
    let mut after = 0;
    if let Some((td, end)) = tagged_prefix(code, rest) {
        if !td.tag.starts_with('<') {
            aliases.push(td.tag.clone());
        }
        aliases.extend(td.enumerators);
        fields = td.fields;
        has_body = td.has_body;
        after = end;
    }
    let tail = &rest[after..];
    // typedef int (*cb)(int);
    let name = if let Some(p) = tail
        .windows(2)
        .position(|w| w[0].text(code) == "(" && w[1].text(code) == "*")
    {
        tail[p + 2..]
            .iter()
            .find(|t| t.kind == TokKind::Ident)
            .map(|t| t.text(code).to_string())
    } else {
        let mut depth = 0i32;
        let mut name = None;
        for t in tail {
            match t.text(code) {
                "(" | "[" => depth += 1,
                ")" | "]" => depth -= 1,
                s if depth == 0 && t.kind == TokKind::Ident && !is_keyword(s) => {
                    name = Some(s.to_string())
                }
                _ => {}
            }
        }
        name
    }?;
    aliases.retain(|a| *a != name);
    // Further declarators of the typedef (typedef struct s S, *PS;).
    Some((name, aliases, fields, has_body))
}

/// Index of the name token if `toks` is a function prototype.
fn prototype_name(code: &str, toks: &[Token]) -> Option<usize> {
    let mut i = 0;
    while i < toks.len() {
        let s = toks[i].text(code);
        match s {
            "=" | "{" | "[" | ":" => return None,
            "__attribute__" | "__declspec" => {
                i += 1;
                if toks.get(i).map(|t| t.text(code)) == Some("(") {
                    i = matching_close(code, toks, i)? + 1;
                }
                continue;
            }
            "(" => {
                let prev = toks.get(i.checked_sub(1)?)?;
                if prev.kind != TokKind::Ident || is_keyword(prev.text(code)) {
                    return None;
                }
                if toks.get(i + 1).map(|t| t.text(code)) == Some("*") {
                    return None;
                }
                return Some(i - 1);
            }
            _ => {}
        }
        i += 1;
    }
    None
}

/// Metadata from a function header; `name_idx` indexes the name token.
fn parse_function_header(code: &str, header: &[Token], name_idx: usize) -> DeclarationMeta {
    let mut meta = DeclarationMeta::default();
    let open = name_idx + 1;
    let close = matching_close(code, header, open).unwrap_or(header.len() - 1);
    let ret_start = storage_skipped_ret(code, header);
    if ret_start < name_idx {
        meta.return_type = text_of(code, &header[ret_start..name_idx]).to_string();
    }
    for p in split_top_level(code, &header[open + 1..close], ",") {
        if let Some(v) = parse_param(code, p, 0) {
            meta.params.push(v);
        }
    }
    if header.get(close + 1).map(|t| t.text(code)) == Some(":") {
        let rest = &header[close + 2..];
        let end = rest
            .iter()
            .position(|t| matches!(t.text(code), "{" | ";"))
            .unwrap_or(rest.len());
        if end > 0 {
            meta.return_bounds = Some(text_of(code, &rest[..end]).to_string());
        }
    }
    meta
}

/// Skips storage classes but keeps type qualifiers in the return type.
fn storage_skipped_ret(code: &str, toks: &[Token]) -> usize {
    toks.iter()
        .take_while(|t| {
            matches!(
                t.text(code),
                "static" | "extern" | "inline" | "__inline" | "__inline__"
            )
        })
        .count()
}

fn parse_function(
    code: &str,
    toks: &[Token],
    referenced_names: BTreeSet<String>,
    member_names: BTreeSet<String>,
) -> Result<ParsedDecl, ChunkError> {
    let line = toks[0].line;
    // The body opens at the first top-level `{` that follows `)`.
    let mut depth = 0i32;
    let mut body_open = None;
    for (i, t) in toks.iter().enumerate() {
        match t.text(code) {
            "(" | "[" => depth += 1,
            ")" | "]" => depth -= 1,
            "{" if depth == 0 => {
                body_open = Some(i);
                break;
            }
            _ => {}
        }
    }
    let body_open = body_open.ok_or_else(|| ChunkError::new(line, "function body not found"))?;
    let header = &toks[..body_open];
    let name_idx = prototype_name(code, header)
        .ok_or_else(|| ChunkError::new(line, "cannot find the function name"))?;
    let mut meta = parse_function_header(code, header, name_idx);
    meta.referenced_names = referenced_names;
    meta.member_names = member_names;
    let sig_end = header.last().map_or(0, |t| t.end);
    meta.signature_text = code[toks[0].start..sig_end].to_string();
    let sig_first = toks[0].line;
    let sig_last = header.last().map_or(sig_first, |t| t.line);
    meta.signature_lines = sig_first..sig_last + 1;
    meta.locals = body_locals(code, &toks[body_open + 1..toks.len() - 1]);
    Ok(ParsedDecl {
        kind: DeclKind::Procedure,
        name: header[name_idx].text(code).to_string(),
        aliases: Vec::new(),
        meta,
        defining: true,
    })
}

/// Local declarations found at statement starts in a function body.
fn body_locals(code: &str, body: &[Token]) -> Vec<VarDecl> {
    let mut out = Vec::new();
    let mut parens = 0i32;
    let mut start = 0;
    for (i, t) in body.iter().enumerate() {
        let s = t.text(code);
        let boundary =
            t.kind == TokKind::Directive || (parens == 0 && matches!(s, ";" | "{" | "}"));
        match s {
            "(" => parens += 1,
            ")" => parens -= 1,
            _ => {}
        }
        if boundary {
            let stmt = &body[start..i];
            if starts_declaration(code, stmt) {
                if let Some(decls) = parse_declaration(code, stmt, 0) {
                    out.extend(decls);
                }
            }
            start = i + 1;
        }
    }
    out
}
