//! Lightweight pointer-kind classification from syntactic uses.
//!
//! A plain `T*` is classified as:
//! * `Unchecked` if it is cast from/to an integer,
//! * `NtArr` if it takes part in a null-terminated scan or is passed to one
//!   of `strlen`, `strcpy`, `strcmp`, `strcat`,
//! * `Arr` if it is indexed or used in pointer arithmetic,
//! * `Ptr` otherwise.
//!
//! The first matching rule wins. Declarations already written with a checked
//! spelling keep their declared kind.

use std::collections::{BTreeMap, BTreeSet};

use super::sites::{extract_sites, AnnotationSite, SiteScope};
use super::PointerKind;
use crate::source::lexer::{tokenize, TokKind, Token};
use crate::source::{DeclId, DeclKind, Declaration, VarDecl};

/// Classified sites of a program, keyed by owning declaration.
#[derive(Debug, Clone, Default)]
pub struct Classification {
    pub sites: BTreeMap<DeclId, Vec<AnnotationSite>>,
}

impl Classification {
    pub fn sites_of(&self, id: &DeclId) -> &[AnnotationSite] {
        self.sites.get(id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn all(&self) -> impl Iterator<Item = &AnnotationSite> {
        self.sites.values().flatten()
    }

    /// Sites whose outer and element levels both need array bounds.
    pub fn nested_arrays(&self) -> impl Iterator<Item = &AnnotationSite> {
        self.all().filter(|s| s.is_nested_array())
    }
}

const STRING_FNS: [&str; 4] = ["strlen", "strcpy", "strcmp", "strcat"];
const ALLOC_FNS: [&str; 3] = ["malloc", "calloc", "realloc"];
const INT_TYPE_WORDS: [&str; 13] = [
    "int",
    "long",
    "short",
    "unsigned",
    "signed",
    "char",
    "size_t",
    "ssize_t",
    "intptr_t",
    "uintptr_t",
    "ptrdiff_t",
    "uint64_t",
    "int64_t",
];

#[derive(Debug, Default, Clone, Copy)]
struct Usage {
    indexed: bool,
    double_indexed: bool,
    arith: bool,
    null_scan: bool,
    string_fn: bool,
    int_cast: bool,
    elem_alloc: bool,
}

impl Usage {
    fn merge(&mut self, o: Usage) {
        self.indexed |= o.indexed;
        self.double_indexed |= o.double_indexed;
        self.arith |= o.arith;
        self.null_scan |= o.null_scan;
        self.string_fn |= o.string_fn;
        self.int_cast |= o.int_cast;
        self.elem_alloc |= o.elem_alloc;
    }

    fn outer_kind(&self) -> PointerKind {
        if self.int_cast {
            PointerKind::Unchecked
        } else if self.null_scan || self.string_fn {
            PointerKind::NtArr
        } else if self.indexed || self.arith {
            PointerKind::Arr
        } else {
            PointerKind::Ptr
        }
    }
}

struct Code<'a> {
    src: &'a str,
    toks: Vec<Token>,
}

impl<'a> Code<'a> {
    fn new(src: &'a str) -> Option<Self> {
        Some(Code {
            src,
            toks: tokenize(src).ok()?,
        })
    }

    fn text(&self, i: usize) -> &'a str {
        self.toks.get(i).map_or("", |t| t.text(self.src))
    }

    fn prev(&self, i: usize) -> &'a str {
        if i == 0 {
            ""
        } else {
            self.text(i - 1)
        }
    }

    fn is_operand_end(&self, i: usize) -> bool {
        self.toks.get(i).is_some_and(|t| {
            matches!(t.kind, TokKind::Ident | TokKind::Number | TokKind::Char)
                || matches!(t.text(self.src), ")" | "]")
        })
    }

    fn close_of(&self, open: usize) -> Option<usize> {
        let (o, c) = match self.text(open) {
            "(" => ("(", ")"),
            "[" => ("[", "]"),
            _ => return None,
        };
        let mut depth = 0usize;
        for j in open..self.toks.len() {
            let t = self.text(j);
            if t == o {
                depth += 1;
            } else if t == c {
                depth -= 1;
                if depth == 0 {
                    return Some(j);
                }
            }
        }
        None
    }

    fn open_of(&self, close: usize) -> Option<usize> {
        let (o, c) = match self.text(close) {
            ")" => ("(", ")"),
            "]" => ("[", "]"),
            _ => return None,
        };
        let mut depth = 0usize;
        for j in (0..=close).rev() {
            let t = self.text(j);
            if t == c {
                depth += 1;
            } else if t == o {
                depth -= 1;
                if depth == 0 {
                    return Some(j);
                }
            }
        }
        None
    }

    fn is_zero(&self, i: usize) -> bool {
        matches!(self.text(i), "0" | "'\\0'" | "NULL")
    }

    /// Usage of `sym` in this code. With `member`, only `.sym`/`->sym`
    /// occurrences count; otherwise those are skipped.
    fn usage(&self, sym: &str, member: bool, int_vars: &BTreeSet<String>) -> Usage {
        let mut u = Usage::default();
        for i in 0..self.toks.len() {
            if self.toks[i].kind != TokKind::Ident || self.text(i) != sym {
                continue;
            }
            let accessed = matches!(self.prev(i), "." | "->");
            if accessed != member {
                continue;
            }
            // The whole operand: `s.f` / `s->f` starts before the object.
            let start = if member { self.operand_start(i) } else { i };
            let next = self.text(i + 1);
            if !member && matches!(next, "." | "->") {
                // The object of a member access, not the pointer value.
                continue;
            }
            if next == "[" {
                u.indexed = true;
                if let Some(close) = self.close_of(i + 1) {
                    match self.text(close + 1) {
                        "[" => u.double_indexed = true,
                        "=" if self.allocates_array(close + 2) => u.elem_alloc = true,
                        "!=" if self.is_zero(close + 2) => u.null_scan = true,
                        "==" if self.text(close + 2) == "'\\0'" => u.null_scan = true,
                        _ => {}
                    }
                }
            }
            if matches!(next, "++" | "--" | "+=" | "-=") || matches!(self.prev(start), "++" | "--")
            {
                u.arith = true;
            }
            if matches!(next, "+" | "-") {
                u.arith = true;
            }
            if start >= 2 && matches!(self.prev(start), "+" | "-") && self.is_operand_end(start - 2)
            {
                u.arith = true;
            }
            // `*p != 0`, `*p == '\0'`, `while (*p)`.
            if self.prev(start) == "*" && !(start >= 2 && self.is_operand_end(start - 2)) {
                match next {
                    "!=" if self.is_zero(i + 2) => u.null_scan = true,
                    "==" if self.text(i + 2) == "'\\0'" => u.null_scan = true,
                    ")" | ";" if self.is_loop_condition(start - 1) => u.null_scan = true,
                    _ => {}
                }
            }
            if self.passed_to_string_fn(start) {
                u.string_fn = true;
            }
            if self.int_cast(start, i, int_vars) {
                u.int_cast = true;
            }
        }
        u
    }

    fn operand_start(&self, mut i: usize) -> usize {
        while i >= 2 && matches!(self.prev(i), "." | "->") {
            i -= 2;
            if matches!(self.text(i), ")" | "]") {
                match self.open_of(i) {
                    Some(o) if self.text(i) == "]" && o > 0 => i = o - 1,
                    Some(o) => return o,
                    None => return i,
                }
            }
        }
        i
    }

    fn allocates_array(&self, mut j: usize) -> bool {
        // Skip a cast.
        if self.text(j) == "(" && !ALLOC_FNS.contains(&self.text(j + 1)) {
            match self.close_of(j) {
                Some(c) => j = c + 1,
                None => return false,
            }
        }
        let f = self.text(j);
        if !ALLOC_FNS.contains(&f) || self.text(j + 1) != "(" {
            return false;
        }
        if f == "calloc" {
            return true;
        }
        let Some(close) = self.close_of(j + 1) else {
            return false;
        };
        let mut depth = 0i32;
        for k in j + 2..close {
            match self.text(k) {
                "(" => depth += 1,
                ")" => depth -= 1,
                "*" if depth == 0 => return true,
                _ => {}
            }
        }
        false
    }

    /// Whether the `(` group ending right after `star - ...` is a `while`
    /// condition or the middle clause of a `for`.
    fn is_loop_condition(&self, star: usize) -> bool {
        let mut depth = 0i32;
        for j in (0..star).rev() {
            match self.text(j) {
                ")" => depth += 1,
                "(" if depth == 0 => return matches!(self.prev(j), "while" | "if"),
                "(" => depth -= 1,
                ";" if depth == 0 => {
                    // `for (init; *p; step)`.
                    return self.enclosing_keyword(j) == Some("for");
                }
                "{" | "}" => return false,
                _ => {}
            }
        }
        false
    }

    fn enclosing_keyword(&self, from: usize) -> Option<&'a str> {
        let mut depth = 0i32;
        for j in (0..from).rev() {
            match self.text(j) {
                ")" => depth += 1,
                "(" if depth == 0 => return Some(self.prev(j)),
                "(" => depth -= 1,
                "{" | "}" => return None,
                _ => {}
            }
        }
        None
    }

    fn passed_to_string_fn(&self, start: usize) -> bool {
        // Walk outwards to the innermost call whose argument list holds us.
        let mut depth = 0i32;
        for j in (0..start).rev() {
            match self.text(j) {
                ")" => depth += 1,
                "(" if depth == 0 => return STRING_FNS.contains(&self.prev(j)),
                "(" => depth -= 1,
                "," | "+" | "-" if depth == 0 => continue,
                ";" | "{" | "}" | "=" => return false,
                _ => {}
            }
        }
        false
    }

    fn int_cast(&self, start: usize, i: usize, int_vars: &BTreeSet<String>) -> bool {
        // `(long) p`, but not `(long) p[i]`, which casts an element.
        if start >= 1
            && self.text(start - 1) == ")"
            && !matches!(self.text(i + 1), "[" | "->" | ".")
        {
            if let Some(o) = self.open_of(start - 1) {
                let words: Vec<&str> = (o + 1..start - 1).map(|k| self.text(k)).collect();
                if !words.is_empty() && words.iter().all(|w| INT_TYPE_WORDS.contains(w)) {
                    return true;
                }
            }
        }
        // `p = (T *) n` with `n` an integer variable.
        let mut j = i + 1;
        if self.text(j) == "[" {
            return false;
        }
        if self.text(j) != "=" {
            return false;
        }
        j += 1;
        if self.text(j) == "(" {
            if let Some(c) = self.close_of(j) {
                let is_ptr_cast = (j + 1..c).any(|k| self.text(k) == "*");
                let operand = self.text(c + 1);
                let end = self.text(c + 2);
                return is_ptr_cast && int_vars.contains(operand) && matches!(end, ";" | "," | ")");
            }
        }
        false
    }
}

fn is_integer_var(v: &VarDecl) -> bool {
    !v.ty.is_pointer()
        && !v.ty.is_array()
        && v.ty
            .base
            .split_whitespace()
            .any(|w| INT_TYPE_WORDS.contains(&w) && w != "char")
}

fn refine(site: &mut AnnotationSite, u: Usage) {
    if site.checked {
        return;
    }
    site.kind = u.outer_kind();
    if site.elem_kind.is_some() {
        site.elem_kind = Some(if u.double_indexed || u.elem_alloc {
            PointerKind::Arr
        } else {
            PointerKind::Ptr
        });
    }
}

/// Classifies the sites of a single declaration from its own code only.
pub fn classify_pointer_lite(decl: &Declaration) -> Vec<AnnotationSite> {
    classify_program(std::slice::from_ref(decl))
        .sites
        .remove(&decl.id)
        .unwrap_or_default()
}

/// Classifies all sites, taking uses of globals and fields in every
/// procedure into account.
pub fn classify_program(decls: &[Declaration]) -> Classification {
    let procs: Vec<(&Declaration, Option<Code<'_>>)> = decls
        .iter()
        .filter(|d| d.kind == DeclKind::Procedure)
        .map(|d| (d, Code::new(&d.code)))
        .collect();
    let global_ints: BTreeSet<String> = decls
        .iter()
        .filter(|d| d.kind == DeclKind::Global)
        .flat_map(|d| d.meta.globals.iter())
        .filter(|v| is_integer_var(v))
        .map(|v| v.name.clone())
        .collect();
    let mut out = Classification::default();
    for d in decls {
        let mut sites = extract_sites(d);
        if sites.is_empty() {
            continue;
        }
        for site in sites.iter_mut().filter(|s| !s.checked) {
            let mut u = Usage::default();
            match site.scope {
                SiteScope::Param | SiteScope::Local => {
                    let ints: BTreeSet<String> = d
                        .meta
                        .params
                        .iter()
                        .chain(&d.meta.locals)
                        .filter(|v| is_integer_var(v))
                        .map(|v| v.name.clone())
                        .chain(global_ints.iter().cloned())
                        .collect();
                    if let Some(code) = Code::new(&d.code) {
                        u.merge(code.usage(&site.symbol, false, &ints));
                    }
                }
                SiteScope::Global => {
                    for (p, code) in &procs {
                        if !p.meta.referenced_names.contains(&site.symbol) {
                            continue;
                        }
                        if let Some(code) = code {
                            let ints: BTreeSet<String> = p
                                .meta
                                .params
                                .iter()
                                .chain(&p.meta.locals)
                                .filter(|v| is_integer_var(v))
                                .map(|v| v.name.clone())
                                .chain(global_ints.iter().cloned())
                                .collect();
                            u.merge(code.usage(&site.symbol, false, &ints));
                        }
                    }
                }
                SiteScope::Field => {
                    for (p, code) in &procs {
                        if !p.meta.member_names.contains(&site.symbol) {
                            continue;
                        }
                        if let Some(code) = code {
                            u.merge(code.usage(&site.symbol, true, &global_ints));
                        }
                    }
                }
                SiteScope::Return => continue,
            }
            refine(site, u);
        }
        out.sites.insert(d.id.clone(), sites);
    }
    out
}
