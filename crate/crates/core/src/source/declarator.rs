//! Declaration-statement parsing: type specifiers, pointer levels, checked
//! pointer spellings, declarator names and trailing bounds annotations.

use std::ops::Range;

use serde::Serialize;

use super::lexer::{TokKind, Token};
use crate::checkedc::PointerKind;

/// One level of indirection, outermost first in [`DeclType::levels`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Level {
    Plain,
    Checked(PointerKind),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DeclType {
    /// Innermost pointee type, e.g. `unsigned char` or `struct arr_of_long`.
    pub base: String,
    pub levels: Vec<Level>,
    pub array_dims: Vec<String>,
    pub func_ptr: bool,
}

impl DeclType {
    pub fn is_pointer(&self) -> bool {
        !self.levels.is_empty() && !self.func_ptr
    }

    pub fn is_array(&self) -> bool {
        !self.array_dims.is_empty()
    }
}

/// A named variable, parameter or field declaration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VarDecl {
    pub name: String,
    pub type_text: String,
    pub ty: DeclType,
    /// Raw text after the `:` that follows the name, if any.
    pub bounds: Option<String>,
    /// One-based line within the owning declaration's code.
    pub line: usize,
    /// Byte range of the name within the owning declaration's code.
    #[serde(skip)]
    pub name_range: Range<usize>,
}

pub const CHECKED_SPELLINGS: &[&str] = &[
    "ptr",
    "arr",
    "nt_arr",
    "_Ptr",
    "_Array_ptr",
    "_Nt_array_ptr",
];

const STORAGE: &[&str] = &[
    "static",
    "extern",
    "register",
    "auto",
    "inline",
    "__inline",
    "__inline__",
    "_Thread_local",
    "typedef",
];
const QUALIFIERS: &[&str] = &["const", "volatile", "restrict", "__restrict", "_Atomic"];
const PRIMITIVES: &[&str] = &[
    "void", "char", "short", "int", "long", "float", "double", "_Bool", "signed", "unsigned",
    "__int128", "_Complex",
];
/// Reserved words that never start a declaration or name a type.
pub const KEYWORDS: &[&str] = &[
    "auto",
    "break",
    "case",
    "char",
    "const",
    "continue",
    "default",
    "do",
    "double",
    "else",
    "enum",
    "extern",
    "float",
    "for",
    "goto",
    "if",
    "inline",
    "int",
    "long",
    "register",
    "restrict",
    "return",
    "short",
    "signed",
    "sizeof",
    "static",
    "struct",
    "switch",
    "typedef",
    "union",
    "unsigned",
    "void",
    "volatile",
    "while",
    "_Bool",
    "_Alignof",
    "_Static_assert",
    "__attribute__",
    "asm",
    "__asm__",
];

pub fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s)
}

/// Token cursor over a slice of a source string.
pub(crate) struct Cursor<'a> {
    pub src: &'a str,
    pub toks: &'a [Token],
    pub pos: usize,
}

impl<'a> Cursor<'a> {
    pub fn new(src: &'a str, toks: &'a [Token]) -> Self {
        Cursor { src, toks, pos: 0 }
    }

    pub fn peek_text(&self, off: usize) -> Option<&'a str> {
        self.toks.get(self.pos + off).map(|t| t.text(self.src))
    }

    pub fn peek(&self, off: usize) -> Option<&'a Token> {
        self.toks.get(self.pos + off)
    }

    /// Skips a balanced group starting at the current opening token.
    pub fn skip_group(&mut self) -> bool {
        match matching_close(self.src, self.toks, self.pos) {
            Some(end) => {
                self.pos = end + 1;
                true
            }
            None => false,
        }
    }
}

/// Index of the token closing the group opened at `open`.
pub fn matching_close(src: &str, toks: &[Token], open: usize) -> Option<usize> {
    let (o, c) = match toks.get(open)?.text(src) {
        "(" => ("(", ")"),
        "[" => ("[", "]"),
        "{" => ("{", "}"),
        _ => return None,
    };
    let mut depth = 0usize;
    for (i, t) in toks.iter().enumerate().skip(open) {
        let s = t.text(src);
        if s == o {
            depth += 1;
        } else if s == c {
            depth -= 1;
            if depth == 0 {
                return Some(i);
            }
        }
    }
    None
}

/// Splits `toks` at top-level occurrences of `sep`, ignoring separators
/// nested inside (), [] or {}.
pub fn split_top_level<'t>(src: &str, toks: &'t [Token], sep: &str) -> Vec<&'t [Token]> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, t) in toks.iter().enumerate() {
        match t.text(src) {
            "(" | "[" | "{" => depth += 1,
            ")" | "]" | "}" => depth -= 1,
            s if s == sep && depth == 0 => {
                out.push(&toks[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(&toks[start..]);
    out
}

/// Parsed type specifier: its text plus any levels contributed by a checked
/// spelling such as `arr<char*>`.
struct TypeSpec {
    text: String,
    base: String,
    levels: Vec<Level>,
}

/// Parses a checked spelling `kind<inner>` starting at the cursor. `pending`
/// counts `>` characters already consumed from a `>>` token.
fn parse_checked(c: &mut Cursor, pending: &mut usize) -> Option<TypeSpec> {
    let start = c.peek(0)?.start;
    let kind = PointerKind::from_spelling(c.peek_text(0)?)?;
    if c.peek_text(1)? != "<" {
        return None;
    }
    c.pos += 2;
    let inner = parse_type_spec(c, pending, true)?;
    // Stars inside the angle brackets: arr<char *>.
    let mut inner_levels = Vec::new();
    while c.peek_text(0) == Some("*") {
        inner_levels.push(Level::Plain);
        c.pos += 1;
        skip_qualifiers(c);
    }
    inner_levels.reverse();
    // Close the angle bracket, possibly sharing a `>>` token.
    if *pending > 0 {
        *pending -= 1;
    } else {
        match c.peek_text(0)? {
            ">" => c.pos += 1,
            ">>" => {
                c.pos += 1;
                *pending += 1;
            }
            _ => return None,
        }
    }
    let end = c.toks[c.pos - 1].end;
    let mut levels = vec![Level::Checked(kind)];
    levels.extend(inner_levels);
    levels.extend(inner.levels);
    Some(TypeSpec {
        text: c.src[start..end].to_string(),
        base: inner.base,
        levels,
    })
}

fn skip_qualifiers(c: &mut Cursor) {
    while let Some(t) = c.peek_text(0) {
        if QUALIFIERS.contains(&t) {
            c.pos += 1;
        } else if t == "__attribute__" {
            c.pos += 1;
            if c.peek_text(0) == Some("(") {
                c.skip_group();
            }
        } else {
            break;
        }
    }
}

/// Tokens that may legitimately follow a declarator name.
fn ends_declarator(t: Option<&str>) -> bool {
    matches!(
        t,
        None | Some("," | ")" | ";" | "=" | "[" | ":" | ">" | ">>")
    )
}

fn parse_type_spec(c: &mut Cursor, pending: &mut usize, in_angle: bool) -> Option<TypeSpec> {
    let first = c.pos;
    while let Some(t) = c.peek_text(0) {
        if STORAGE.contains(&t) {
            c.pos += 1;
        } else {
            break;
        }
    }
    let spec_start = c.pos;
    let mut base_words: Vec<String> = Vec::new();
    let mut have_main = false;
    let mut levels = Vec::new();
    let mut checked_text = None;
    while let Some(tok) = c.peek(0) {
        if tok.kind != TokKind::Ident {
            break;
        }
        let t = tok.text(c.src);
        if QUALIFIERS.contains(&t) {
            base_words.push(t.to_string());
            c.pos += 1;
        } else if t == "__attribute__" {
            skip_qualifiers(c);
        } else if CHECKED_SPELLINGS.contains(&t) && c.peek_text(1) == Some("<") && !have_main {
            let spec = parse_checked(c, pending)?;
            base_words.push(spec.base.clone());
            levels = spec.levels;
            checked_text = Some(spec.text);
            have_main = true;
        } else if matches!(t, "struct" | "union" | "enum") && !have_main {
            let mut words = vec![t.to_string()];
            c.pos += 1;
            if let Some(tag) = c.peek(0).filter(|t| t.kind == TokKind::Ident) {
                words.push(tag.text(c.src).to_string());
                c.pos += 1;
            }
            if c.peek_text(0) == Some("{") && !c.skip_group() {
                return None;
            }
            base_words.push(words.join(" "));
            have_main = true;
        } else if PRIMITIVES.contains(&t) {
            base_words.push(t.to_string());
            c.pos += 1;
            if !matches!(t, "signed" | "unsigned") {
                have_main = true;
            }
        } else if !have_main && !is_keyword(t) {
            let only_sign = base_words.iter().any(|w| w == "signed" || w == "unsigned");
            if only_sign || (ends_declarator(c.peek_text(1)) && !in_angle) {
                break;
            }
            base_words.push(t.to_string());
            c.pos += 1;
            have_main = true;
        } else {
            break;
        }
    }
    if base_words.is_empty() || c.pos == spec_start {
        c.pos = first;
        return None;
    }
    let text = c.src[c.toks[spec_start].start..c.toks[c.pos - 1].end].to_string();
    let base = match &checked_text {
        // `const arr<int>` keeps the qualifier outside the checked base.
        Some(_) => unqualified(&base_words),
        None => base_words.join(" "),
    };
    Some(TypeSpec { text, base, levels })
}

fn unqualified(words: &[String]) -> String {
    words
        .iter()
        .filter(|w| !QUALIFIERS.contains(&w.as_str()))
        .cloned()
        .collect::<Vec<_>>()
        .join(" ")
}

/// Parses one declarator after the type specifier. Returns the declarator
/// and leaves the cursor after it (before `,` or the end).
fn parse_declarator(c: &mut Cursor, spec: &TypeSpec, line0: usize) -> Option<VarDecl> {
    let mut stars = 0usize;
    loop {
        match c.peek_text(0) {
            Some("*") => {
                stars += 1;
                c.pos += 1;
            }
            Some(q) if QUALIFIERS.contains(&q) || q == "__attribute__" => skip_qualifiers(c),
            _ => break,
        }
    }
    let mut func_ptr = false;
    let name_tok;
    if c.peek_text(0) == Some("(") && c.peek_text(1) == Some("*") {
        // Function pointer: (*name)(params)
        let close = matching_close(c.src, c.toks, c.pos)?;
        let inner = &c.toks[c.pos + 1..close];
        let ident = inner.iter().rev().find(|t| t.kind == TokKind::Ident)?;
        name_tok = ident.clone();
        c.pos = close + 1;
        if c.peek_text(0) == Some("(") && !c.skip_group() {
            return None;
        }
        func_ptr = true;
    } else {
        let t = c.peek(0)?;
        if t.kind != TokKind::Ident || is_keyword(t.text(c.src)) {
            return None;
        }
        name_tok = t.clone();
        c.pos += 1;
    }
    let mut dims = Vec::new();
    while c.peek_text(0) == Some("[") {
        let open = c.pos;
        let close = matching_close(c.src, c.toks, open)?;
        let text = if close > open + 1 {
            c.src[c.toks[open + 1].start..c.toks[close - 1].end].to_string()
        } else {
            String::new()
        };
        dims.push(text);
        c.pos = close + 1;
    }
    let mut bounds = None;
    if c.peek_text(0) == Some(":") {
        c.pos += 1;
        let start = c.pos;
        let mut depth = 0i32;
        while let Some(t) = c.peek_text(0) {
            match t {
                "(" | "[" => depth += 1,
                ")" | "]" if depth == 0 => break,
                ")" | "]" => depth -= 1,
                "," | "=" | ";" if depth == 0 => break,
                _ => {}
            }
            c.pos += 1;
        }
        if c.pos > start {
            bounds = Some(c.src[c.toks[start].start..c.toks[c.pos - 1].end].to_string());
        }
    }
    if c.peek_text(0) == Some("=") {
        let mut depth = 0i32;
        while let Some(t) = c.peek_text(0) {
            match t {
                "(" | "[" | "{" => depth += 1,
                ")" | "]" | "}" => depth -= 1,
                "," if depth == 0 => break,
                _ => {}
            }
            c.pos += 1;
        }
    }
    let mut levels = vec![Level::Plain; stars];
    levels.extend(spec.levels.iter().copied());
    let type_text = if stars > 0 {
        format!("{}{}", spec.text, "*".repeat(stars))
    } else {
        spec.text.clone()
    };
    Some(VarDecl {
        name: name_tok.text(c.src).to_string(),
        type_text,
        ty: DeclType {
            base: spec.base.clone(),
            levels,
            array_dims: dims,
            func_ptr,
        },
        bounds,
        line: name_tok.line - line0 + 1,
        name_range: name_tok.range(),
    })
}

/// Parses a declaration statement (without its terminating `;`) into its
/// declarators. `line0` is the zero-based line where the owning code starts.
pub fn parse_declaration(src: &str, toks: &[Token], line0: usize) -> Option<Vec<VarDecl>> {
    if toks.is_empty() {
        return None;
    }
    let mut c = Cursor::new(src, toks);
    let mut pending = 0;
    let spec = parse_type_spec(&mut c, &mut pending, false)?;
    if pending != 0 {
        return None;
    }
    let mut out = Vec::new();
    loop {
        let d = parse_declarator(&mut c, &spec, line0)?;
        out.push(d);
        match c.peek_text(0) {
            None => break,
            Some(",") => c.pos += 1,
            Some(_) => return None,
        }
    }
    Some(out)
}

/// Parses one parameter. Unnamed parameters and `void`/`...` yield `None`.
pub fn parse_param(src: &str, toks: &[Token], line0: usize) -> Option<VarDecl> {
    let decls = parse_declaration(src, toks, line0)?;
    match decls.as_slice() {
        [one] => Some(one.clone()),
        _ => None,
    }
}

/// Whether a statement's first tokens look like the start of a declaration.
pub fn starts_declaration(src: &str, toks: &[Token]) -> bool {
    let Some(first) = toks.first() else {
        return false;
    };
    if first.kind != TokKind::Ident {
        return false;
    }
    let t = first.text(src);
    if STORAGE.contains(&t) || QUALIFIERS.contains(&t) || PRIMITIVES.contains(&t) {
        return true;
    }
    if matches!(t, "struct" | "union" | "enum") {
        return true;
    }
    if CHECKED_SPELLINGS.contains(&t) {
        return toks.get(1).map(|t| t.text(src)) == Some("<");
    }
    if is_keyword(t) {
        return false;
    }
    // typedef-name followed by a declarator.
    match toks.get(1) {
        Some(n) if n.kind == TokKind::Ident => {
            !is_keyword(n.text(src)) || QUALIFIERS.contains(&n.text(src))
        }
        Some(n) if n.text(src) == "*" => {
            // `T *x` versus the expression `a * b`: require a declarator shape.
            let mut i = 1;
            while toks.get(i).map(|t| t.text(src)) == Some("*") {
                i += 1;
            }
            toks.get(i).is_some_and(|t| t.kind == TokKind::Ident)
                && ends_declarator(toks.get(i + 1).map(|t| t.text(src)))
        }
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::source::lexer::tokenize;

    fn decls(src: &str) -> Vec<VarDecl> {
        let toks = tokenize(src).unwrap();
        parse_declaration(src, &toks, 0).expect("declaration")
    }

    #[test]
    fn plain_double_pointer() {
        let d = decls("long** costMatrix");
        assert_eq!(d[0].name, "costMatrix");
        assert_eq!(d[0].ty.base, "long");
        assert_eq!(d[0].ty.levels, vec![Level::Plain, Level::Plain]);
        assert_eq!(d[0].type_text, "long**");
    }

    #[test]
    fn checked_nested_with_shift_token() {
        let d = decls("arr<arr<int>> a");
        assert_eq!(d[0].name, "a");
        assert_eq!(d[0].ty.base, "int");
        assert_eq!(
            d[0].ty.levels,
            vec![
                Level::Checked(PointerKind::Arr),
                Level::Checked(PointerKind::Arr)
            ]
        );
    }

    #[test]
    fn checked_with_bounds() {
        let d = decls("arr<unsigned char> buf: count(longs * 4)");
        assert_eq!(d[0].name, "buf");
        assert_eq!(d[0].ty.base, "unsigned char");
        assert_eq!(d[0].bounds.as_deref(), Some("count(longs * 4)"));
    }

    #[test]
    fn unsigned_name_is_not_a_type() {
        let d = decls("unsigned longs");
        assert_eq!(d[0].name, "longs");
        assert_eq!(d[0].ty.base, "unsigned");
        assert!(!d[0].ty.is_pointer());
    }

    #[test]
    fn typedef_name_and_multiple_declarators() {
        let d = decls("ulong net, *p = 0, buf[MAXABITS + 1]");
        let names: Vec<_> = d.iter().map(|v| v.name.as_str()).collect();
        assert_eq!(names, vec!["net", "p", "buf"]);
        assert!(d[1].ty.is_pointer());
        assert_eq!(d[2].ty.array_dims, vec!["MAXABITS + 1".to_string()]);
    }

    #[test]
    fn struct_types_and_function_pointers() {
        let d = decls("static struct hash *table");
        assert_eq!(d[0].ty.base, "struct hash");
        let f = decls("int (*mapfunc)(unsigned int)");
        assert_eq!(f[0].name, "mapfunc");
        assert!(f[0].ty.func_ptr);
        assert!(!f[0].ty.is_pointer());
    }

    #[test]
    fn checked_with_inner_star_and_initializer() {
        let d = decls("nt_arr<char> p : count(9) = a");
        assert_eq!(d[0].bounds.as_deref(), Some("count(9)"));
        let d = decls("arr<char *> names");
        assert_eq!(
            d[0].ty.levels,
            vec![Level::Checked(PointerKind::Arr), Level::Plain]
        );
        assert_eq!(d[0].ty.base, "char");
    }

    #[test]
    fn expression_statements_are_not_declarations() {
        for s in ["x = 5", "foo(bar)", "return x", "a * b + c", "total += n"] {
            let toks = tokenize(s).unwrap();
            assert!(!starts_declaration(s, &toks), "{s}");
        }
        for s in ["ulong n = 1", "Table *t", "const char *p", "arr<int> a"] {
            let toks = tokenize(s).unwrap();
            assert!(starts_declaration(s, &toks), "{s}");
        }
    }
}
