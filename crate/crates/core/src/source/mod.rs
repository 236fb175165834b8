//! Source model: files, top-level declarations and their metadata.
//!
//! A [`Program`] keeps every unit as an ordered list of pieces (gap text,
//! declarations, and forward declarations that were linked into another
//! node) so that rendering an untouched program reproduces its input bytes.

pub mod declarator;
pub mod extract;
pub mod lexer;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::Range;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use declarator::{DeclType, Level, VarDecl};
use extract::{chunk, parse_single, ChunkKind};

#[derive(Debug, Error)]
pub enum SourceError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: not UTF-8 text")]
    Encoding { path: PathBuf },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

/// One input file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceUnit {
    pub path: PathBuf,
    pub text: String,
    /// Byte offset of the start of every line.
    pub line_index: Vec<usize>,
}

impl SourceUnit {
    pub fn new(path: impl Into<PathBuf>, text: impl Into<String>) -> Self {
        let text = text.into();
        let mut line_index = vec![0];
        line_index.extend(
            text.match_indices('\n')
                .map(|(i, _)| i + 1)
                .filter(|&i| i < text.len()),
        );
        SourceUnit {
            path: path.into(),
            text,
            line_index,
        }
    }

    /// One-based line containing `offset`.
    pub fn line_of(&self, offset: usize) -> usize {
        self.line_index.partition_point(|&s| s <= offset)
    }

    pub fn to_text(&self) -> String {
        self.text.clone()
    }
}

/// Reads each path into a [`SourceUnit`].
pub fn parse_units<P: AsRef<Path>>(paths: &[P]) -> Result<Vec<SourceUnit>, SourceError> {
    paths
        .iter()
        .map(|p| {
            let path = p.as_ref();
            let bytes = std::fs::read(path).map_err(|source| SourceError::Io {
                path: path.to_path_buf(),
                source,
            })?;
            let text = String::from_utf8(bytes).map_err(|_| SourceError::Encoding {
                path: path.to_path_buf(),
            })?;
            if text.contains('\0') {
                return Err(SourceError::Encoding {
                    path: path.to_path_buf(),
                });
            }
            Ok(SourceUnit::new(path, text))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeclKind {
    Procedure,
    #[serde(rename = "type")]
    TypeDecl,
    Global,
    Macro,
}

impl DeclKind {
    pub fn tag(self) -> &'static str {
        match self {
            DeclKind::Procedure => "proc",
            DeclKind::TypeDecl => "type",
            DeclKind::Global => "global",
            DeclKind::Macro => "macro",
        }
    }
}

impl fmt::Display for DeclKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DeclId(pub String);

impl fmt::Display for DeclId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl DeclId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

/// Location of a declaration at parse time; lines are one-based, inclusive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Span {
    pub path: PathBuf,
    pub start_line: usize,
    pub end_line: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct DeclarationMeta {
    pub params: Vec<VarDecl>,
    pub locals: Vec<VarDecl>,
    pub return_type: String,
    pub return_bounds: Option<String>,
    pub referenced_names: BTreeSet<String>,
    /// Identifiers used after `.` or `->`.
    pub member_names: BTreeSet<String>,
    pub signature_text: String,
    /// Zero-based line range of the signature within the code.
    pub signature_lines: Range<usize>,
    /// Members of a struct or union definition.
    pub fields: Vec<VarDecl>,
    /// Declarators of a global declaration.
    pub globals: Vec<VarDecl>,
    pub is_extern: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Declaration {
    pub id: DeclId,
    pub kind: DeclKind,
    pub name: String,
    /// Other names this node answers to: struct tags, enumerators, further
    /// declarators of a global.
    pub aliases: Vec<String>,
    pub span: Span,
    pub code: String,
    pub meta: DeclarationMeta,
    /// False for prototypes, `extern` globals and forward struct declarations
    /// that have no defining counterpart.
    pub defining: bool,
}

impl Declaration {
    pub fn names(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.name.as_str()).chain(self.aliases.iter().map(String::as_str))
    }

    pub fn has_body(&self) -> bool {
        self.kind == DeclKind::Procedure && self.defining
    }

    /// Re-derives kind, name and metadata from new code. Fails if the code no
    /// longer parses as one declaration of the same kind and name.
    pub fn reparse(&self, code: &str) -> Result<Declaration, String> {
        let p = parse_single(code).map_err(|e| format!("line {}: {}", e.line + 1, e.message))?;
        if p.kind != self.kind || p.name != self.name {
            return Err(format!(
                "patched code declares {} `{}` instead of {} `{}`",
                p.kind, p.name, self.kind, self.name
            ));
        }
        Ok(Declaration {
            code: code.to_string(),
            aliases: p.aliases,
            meta: p.meta,
            defining: p.defining,
            ..self.clone()
        })
    }

    /// Parses free-standing code into a declaration (used for symbolic
    /// insertions).
    pub fn from_code(code: &str, path: &Path) -> Result<Declaration, String> {
        let p = parse_single(code).map_err(|e| format!("line {}: {}", e.line + 1, e.message))?;
        Ok(Declaration {
            id: DeclId(format!("{}:{}", p.kind.tag(), p.name)),
            kind: p.kind,
            name: p.name,
            aliases: p.aliases,
            span: Span {
                path: path.to_path_buf(),
                start_line: 0,
                end_line: 0,
            },
            code: code.to_string(),
            meta: p.meta,
            defining: p.defining,
        })
    }
}

/// Part of a unit's text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Piece {
    Gap(String),
    Decl(DeclId),
    /// A redundant declaration linked into `target` (prototype, `extern`).
    Forward {
        target: DeclId,
        text: String,
    },
}

#[derive(Debug, Clone)]
pub struct UnitLayout {
    pub path: PathBuf,
    pub pieces: Vec<Piece>,
}

/// All declarations of a codebase plus the layout needed to print it back.
#[derive(Debug, Clone)]
pub struct Program {
    pub units: Vec<UnitLayout>,
    /// In unit order, then source order.
    pub decls: Vec<Declaration>,
    /// Signatures at parse time, used to keep prototypes in sync.
    original_signatures: BTreeMap<DeclId, String>,
}

struct RawDecl {
    unit: usize,
    piece: usize,
    parsed: extract::ParsedDecl,
    code: String,
    span: Span,
}

impl Program {
    pub fn empty() -> Self {
        Program {
            units: Vec::new(),
            decls: Vec::new(),
            original_signatures: BTreeMap::new(),
        }
    }

    /// Extracts and links the declarations of all units.
    pub fn from_units(units: &[SourceUnit]) -> Result<Program, SourceError> {
        let mut layouts = Vec::new();
        let mut raws: Vec<RawDecl> = Vec::new();
        for (ui, unit) in units.iter().enumerate() {
            let perr = |line: usize, message: String| SourceError::Parse {
                path: unit.path.clone(),
                line: line + 1,
                message,
            };
            let toks =
                lexer::tokenize(&unit.text).map_err(|e| perr(e.line() - 1, e.to_string()))?;
            let chunks = chunk(&unit.text, &toks).map_err(|e| perr(e.line, e.message))?;
            let mut pieces = Vec::new();
            let mut cursor = 0;
            for ch in chunks {
                if ch.kind == ChunkKind::OtherDirective {
                    continue;
                }
                if ch.bytes.start > cursor {
                    pieces.push(Piece::Gap(unit.text[cursor..ch.bytes.start].to_string()));
                }
                let code = unit.text[ch.bytes.clone()].to_string();
                let start_line = unit.line_of(ch.bytes.start);
                let parsed =
                    parse_single(&code).map_err(|e| perr(start_line - 1 + e.line, e.message))?;
                raws.push(RawDecl {
                    unit: ui,
                    piece: pieces.len(),
                    parsed,
                    span: Span {
                        path: unit.path.clone(),
                        start_line,
                        end_line: unit.line_of(ch.bytes.end.saturating_sub(1).max(ch.bytes.start)),
                    },
                    code,
                });
                // Placeholder, resolved after linking.
                pieces.push(Piece::Gap(String::new()));
                cursor = ch.bytes.end;
            }
            if cursor < unit.text.len() {
                pieces.push(Piece::Gap(unit.text[cursor..].to_string()));
            }
            layouts.push(UnitLayout {
                path: unit.path.clone(),
                pieces,
            });
        }
        let (decls, assignment) = link(&raws, units);
        for (raw, slot) in raws.iter().zip(assignment) {
            layouts[raw.unit].pieces[raw.piece] = match slot {
                Slot::Node(id) => Piece::Decl(id),
                Slot::Forward(target) => Piece::Forward {
                    target,
                    text: raw.code.clone(),
                },
            };
        }
        // Drop empty placeholder gaps (none should remain) and merge nothing else.
        let original_signatures = decls
            .iter()
            .filter(|d| d.kind == DeclKind::Procedure)
            .map(|d| (d.id.clone(), d.meta.signature_text.clone()))
            .collect();
        Ok(Program {
            units: layouts,
            decls,
            original_signatures,
        })
    }

    pub fn get(&self, id: &DeclId) -> Option<&Declaration> {
        self.decls.iter().find(|d| &d.id == id)
    }

    pub fn get_mut(&mut self, id: &DeclId) -> Option<&mut Declaration> {
        self.decls.iter_mut().find(|d| &d.id == id)
    }

    pub fn find_by_name(&self, name: &str) -> Option<&Declaration> {
        self.decls.iter().find(|d| d.name == name)
    }

    /// Inserts `decl` right before `before` in its unit, separated by a
    /// blank line.
    pub fn insert_before(&mut self, before: &DeclId, mut decl: Declaration) {
        let (ui, pi) = self
            .position(before)
            .expect("insertion anchor must be laid out");
        let anchor = self.get(before).expect("anchor exists");
        decl.span = Span {
            path: anchor.span.path.clone(),
            start_line: anchor.span.start_line,
            end_line: anchor.span.start_line,
        };
        let di = self.decls.iter().position(|d| &d.id == before).unwrap();
        let id = decl.id.clone();
        self.decls.insert(di, decl);
        let pieces = &mut self.units[ui].pieces;
        pieces.insert(pi, Piece::Gap("\n\n".to_string()));
        pieces.insert(pi, Piece::Decl(id));
    }

    fn position(&self, id: &DeclId) -> Option<(usize, usize)> {
        self.units.iter().enumerate().find_map(|(ui, u)| {
            u.pieces
                .iter()
                .position(|p| matches!(p, Piece::Decl(d) if d == id))
                .map(|pi| (ui, pi))
        })
    }

    /// Renders a unit from the current declaration texts.
    pub fn render_unit(&self, index: usize) -> String {
        let mut out = String::new();
        for piece in &self.units[index].pieces {
            match piece {
                Piece::Gap(s) => out.push_str(s),
                Piece::Decl(id) => out.push_str(&self.get(id).expect("laid-out decl").code),
                Piece::Forward { target, text } => out.push_str(&self.forward_text(target, text)),
            }
        }
        out
    }

    /// A prototype follows its definition when the definition's signature
    /// changed; otherwise it is printed verbatim.
    fn forward_text(&self, target: &DeclId, text: &str) -> String {
        let Some(decl) = self.get(target) else {
            return text.to_string();
        };
        match self.original_signatures.get(target) {
            Some(orig)
                if decl.kind == DeclKind::Procedure
                    && decl.has_body()
                    && *orig != decl.meta.signature_text =>
            {
                format!("{};", decl.meta.signature_text.trim_end())
            }
            _ => text.to_string(),
        }
    }

    /// Map from every declared name and alias to the ids carrying it.
    pub fn name_index(&self) -> BTreeMap<String, Vec<DeclId>> {
        let mut idx: BTreeMap<String, Vec<DeclId>> = BTreeMap::new();
        for d in &self.decls {
            for n in d.names() {
                idx.entry(n.to_string()).or_default().push(d.id.clone());
            }
        }
        idx
    }
}

enum Slot {
    Node(DeclId),
    Forward(DeclId),
}

/// Merges duplicate declarations of the same (kind, name): the defining one
/// becomes the node and the rest are forwards.
fn link(raws: &[RawDecl], units: &[SourceUnit]) -> (Vec<Declaration>, Vec<Slot>) {
    let mut groups: BTreeMap<(DeclKind, String), Vec<usize>> = BTreeMap::new();
    for (i, r) in raws.iter().enumerate() {
        groups
            .entry((r.parsed.kind, r.parsed.name.clone()))
            .or_default()
            .push(i);
    }
    let mut slots: Vec<Option<Slot>> = raws.iter().map(|_| None).collect();
    for ((kind, name), members) in &groups {
        let base_id = format!("{}:{}", kind.tag(), name);
        let defining: Vec<usize> = members
            .iter()
            .copied()
            .filter(|&i| raws[i].parsed.defining)
            .collect();
        // Procedures may legitimately have several bodies (file-static).
        let nodes: Vec<usize> = if *kind == DeclKind::Procedure && defining.len() > 1 {
            defining.clone()
        } else if let Some(&first) = defining.first() {
            vec![first]
        } else {
            vec![members[0]]
        };
        let ids: Vec<DeclId> = if nodes.len() == 1 {
            vec![DeclId(base_id.clone())]
        } else {
            let mut seen = BTreeMap::new();
            nodes
                .iter()
                .map(|&i| {
                    let file = units[raws[i].unit]
                        .path
                        .file_name()
                        .map(|f| f.to_string_lossy().into_owned())
                        .unwrap_or_default();
                    let n = seen.entry(file.clone()).or_insert(0);
                    *n += 1;
                    if *n == 1 {
                        DeclId(format!("{base_id}@{file}"))
                    } else {
                        DeclId(format!("{base_id}@{file}#{n}"))
                    }
                })
                .collect()
        };
        for (&i, id) in nodes.iter().zip(&ids) {
            slots[i] = Some(Slot::Node(id.clone()));
        }
        for &m in members {
            if slots[m].is_none() {
                // Prefer a node from the same unit.
                let target = nodes
                    .iter()
                    .position(|&n| raws[n].unit == raws[m].unit)
                    .unwrap_or(0);
                slots[m] = Some(Slot::Forward(ids[target].clone()));
            }
        }
    }
    let mut decls = Vec::new();
    let slots: Vec<Slot> = slots.into_iter().map(|s| s.expect("assigned")).collect();
    for (r, slot) in raws.iter().zip(&slots) {
        if let Slot::Node(id) = slot {
            decls.push(Declaration {
                id: id.clone(),
                kind: r.parsed.kind,
                name: r.parsed.name.clone(),
                aliases: r.parsed.aliases.clone(),
                span: r.span.clone(),
                code: r.code.clone(),
                meta: r.parsed.meta.clone(),
                defining: r.parsed.defining,
            });
        }
    }
    (decls, slots)
}

/// Every top-level declaration of the given units, linked across files.
pub fn extract_declarations(units: &[SourceUnit]) -> Result<Vec<Declaration>, SourceError> {
    Ok(Program::from_units(units)?.decls)
}

/// Names from `universe` that `d` refers to, excluding its own names.
/// Identifiers inside comments, literals, or after `.`/`->` never count.
pub fn scan_references(d: &Declaration, universe: &BTreeSet<String>) -> BTreeSet<String> {
    if d.kind == DeclKind::Macro {
        return BTreeSet::new();
    }
    let own: BTreeSet<&str> = d.names().collect();
    d.meta
        .referenced_names
        .iter()
        .filter(|n| universe.contains(*n) && !own.contains(n.as_str()))
        .cloned()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn program(files: &[(&str, &str)]) -> Program {
        let units: Vec<_> = files.iter().map(|(p, t)| SourceUnit::new(*p, *t)).collect();
        Program::from_units(&units).unwrap()
    }

    #[test]
    fn empty_file_has_no_declarations() {
        let p = program(&[("a.c", "")]);
        assert!(p.decls.is_empty());
        assert_eq!(p.render_unit(0), "");
    }

    #[test]
    fn minimal_global() {
        let p = program(&[("a.c", "int g;")]);
        assert_eq!(p.decls.len(), 1);
        assert_eq!(p.decls[0].kind, DeclKind::Global);
        assert_eq!(p.decls[0].name, "g");
    }

    #[test]
    fn macro_capture_has_empty_meta() {
        let p = program(&[("a.c", "#include <stdio.h>\n#define MAXABITS 26\n")]);
        assert_eq!(p.decls.len(), 1);
        let m = &p.decls[0];
        assert_eq!((m.kind, m.name.as_str()), (DeclKind::Macro, "MAXABITS"));
        assert_eq!(m.meta, DeclarationMeta::default());
        assert_eq!(
            p.render_unit(0),
            "#include <stdio.h>\n#define MAXABITS 26\n"
        );
    }

    #[test]
    fn prototypes_merge_into_the_definition() {
        let src = "int f(int x);\nint g(void) { return f(1); }\nint f(int x) { return x; }\n";
        let p = program(&[("a.c", src)]);
        let names: Vec<_> = p.decls.iter().map(|d| d.id.as_str()).collect();
        assert_eq!(names, vec!["proc:g", "proc:f"]);
        assert!(p.get(&DeclId("proc:f".into())).unwrap().has_body());
        assert_eq!(p.render_unit(0), src);
    }

    #[test]
    fn prototype_follows_signature_change() {
        let src = "int f(int *x);\nint f(int *x) { return x[0]; }\n";
        let mut p = program(&[("a.c", src)]);
        let id = DeclId("proc:f".into());
        let d = p.get(&id).unwrap();
        let new = d
            .reparse("int f(arr<int> x : count(n), int n) { return x[0]; }")
            .unwrap();
        *p.get_mut(&id).unwrap() = new;
        assert_eq!(
            p.render_unit(0),
            "int f(arr<int> x : count(n), int n);\nint f(arr<int> x : count(n), int n) { return x[0]; }\n"
        );
    }

    #[test]
    fn spans_and_code_slices() {
        let src = "/* header */\nstruct S {\n  int a;\n};\n\nint g = 1;\n";
        let unit = SourceUnit::new("a.c", src);
        let p = Program::from_units(std::slice::from_ref(&unit)).unwrap();
        let s = &p.decls[0];
        assert_eq!((s.span.start_line, s.span.end_line), (2, 4));
        assert_eq!(s.code, "struct S {\n  int a;\n};");
        let g = &p.decls[1];
        assert_eq!((g.span.start_line, g.span.end_line), (6, 6));
    }

    #[test]
    fn scan_references_ignores_comments_and_strings() {
        let p = program(&[(
            "a.c",
            "int foo(void);\nvoid bar(void) { /* foo() */ puts(\"foo\"); }\n",
        )]);
        let universe: BTreeSet<String> = ["foo".to_string()].into();
        let bar = p.find_by_name("bar").unwrap();
        assert!(scan_references(bar, &universe).is_empty());
    }

    #[test]
    fn cross_file_call_is_referenced() {
        let p = program(&[
            (
                "a.c",
                "int helper(int);\nint main(void) { return helper(2); }\n",
            ),
            ("b.c", "int helper(int x) { return x * 2; }\n"),
        ]);
        let universe: BTreeSet<String> = p.decls.iter().map(|d| d.name.clone()).collect();
        let main = p.find_by_name("main").unwrap();
        assert!(scan_references(main, &universe).contains("helper"));
        assert_eq!(p.decls.iter().filter(|d| d.name == "helper").count(), 1);
        assert_eq!(
            p.find_by_name("helper").unwrap().span.path,
            PathBuf::from("b.c")
        );
    }

    #[test]
    fn line_index_covers_text() {
        let u = SourceUnit::new("a.c", "a\nbb\n\nc");
        assert_eq!(u.line_index, vec![0, 2, 5, 6]);
        assert_eq!(u.line_of(3), 2);
        assert_eq!(u.line_of(6), 4);
    }
}
