//! Token-guided textual edits of declarators.

use std::ops::Range;

use super::{PointerKind, Spelling};
use crate::source::lexer::{tokenize, TokKind, Token};

const TYPE_WORDS: [&str; 15] = [
    "void", "char", "short", "int", "long", "float", "double", "signed", "unsigned", "_Bool",
    "const", "volatile", "struct", "union", "enum",
];

/// Location of one declarator inside a piece of code (byte ranges).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeclaratorLoc {
    /// Type text for plain pointers (`unsigned char`), or the whole checked
    /// spelling (`arr<int>`).
    pub type_range: Option<Range<usize>>,
    /// Keyword of a checked spelling (`arr`).
    pub checked_kw: Option<Range<usize>>,
    /// Number of `*` between the type and the name.
    pub stars: usize,
    /// From the type start (or the first `*`) up to the name.
    pub prefix: Range<usize>,
    pub name: Range<usize>,
    /// Annotation after `:`, without the colon.
    pub bounds: Option<Range<usize>>,
    /// From the end of the name to the end of the annotation.
    pub bounds_with_colon: Option<Range<usize>>,
}

fn text<'a>(src: &'a str, toks: &[Token], i: usize) -> &'a str {
    toks.get(i).map_or("", |t| t.text(src))
}

/// Finds the declarator of `sym`. `line` is one-based within `code`; `None`
/// searches everywhere.
pub fn find_declarator(code: &str, sym: &str, line: Option<usize>) -> Option<DeclaratorLoc> {
    let toks = tokenize(code).ok()?;
    (0..toks.len()).find_map(|i| declarator_at(code, &toks, i, sym, line))
}

fn declarator_at(
    code: &str,
    toks: &[Token],
    i: usize,
    sym: &str,
    line: Option<usize>,
) -> Option<DeclaratorLoc> {
    let t = &toks[i];
    if t.kind != TokKind::Ident || t.text(code) != sym {
        return None;
    }
    if line.is_some_and(|l| t.line + 1 != l) {
        return None;
    }
    let prev = if i == 0 { "" } else { text(code, toks, i - 1) };
    let prev_is_word = i > 0 && toks[i - 1].kind == TokKind::Ident;
    if !(prev == "*" || prev == ">" || prev == ">>" || prev_is_word) {
        return None;
    }
    if prev_is_word && matches!(prev, "return" | "sizeof" | "case" | "goto") {
        return None;
    }
    let next = text(code, toks, i + 1);
    if !matches!(next, "," | ")" | ";" | "=" | "[" | ":" | "") {
        return None;
    }
    // Walk back over stars and qualifiers between the type and the name.
    let mut j = i;
    let mut stars = 0;
    while j > 0
        && matches!(
            text(code, toks, j - 1),
            "*" | "const" | "volatile" | "restrict"
        )
    {
        if text(code, toks, j - 1) == "*" {
            stars += 1;
        }
        j -= 1;
    }
    let first_star = j;
    let mut type_range = None;
    let mut checked_kw = None;
    let before = if j == 0 { "" } else { text(code, toks, j - 1) };
    if before == ">" || before == ">>" {
        let mut depth = 0i32;
        let mut k = j;
        while k > 0 {
            k -= 1;
            match text(code, toks, k) {
                ">" => depth += 1,
                ">>" => depth += 2,
                "<" => {
                    depth -= 1;
                    if depth == 0 {
                        break;
                    }
                }
                _ => {}
            }
        }
        if depth != 0 || k == 0 {
            return None;
        }
        let kw = &toks[k - 1];
        PointerKind::from_spelling(kw.text(code))?;
        checked_kw = Some(kw.range());
        type_range = Some(kw.start..toks[j - 1].end);
        j = k - 1;
    } else if j > 0 && toks[j - 1].kind == TokKind::Ident {
        // The type name right before the stars, then keywords before it.
        let mut k = j - 1;
        let is_kw = |w: &str| TYPE_WORDS.contains(&w);
        if !is_kw(text(code, toks, k))
            && k > 0
            && matches!(text(code, toks, k - 1), "struct" | "union" | "enum")
        {
            k -= 1;
        }
        while k > 0 && is_kw(text(code, toks, k - 1)) && toks[k - 1].kind == TokKind::Ident {
            k -= 1;
        }
        type_range = Some(toks[k].start..toks[j - 1].end);
        j = k;
    }
    let prefix_start = toks[j].start.min(toks[first_star.min(i)].start);
    let (bounds, bounds_with_colon) = if next == ":" {
        let mut depth = 0i32;
        let mut k = i + 2;
        while k < toks.len() {
            match text(code, toks, k) {
                "(" => depth += 1,
                ")" if depth == 0 => break,
                ")" => depth -= 1,
                "," | ";" | "=" | "{" if depth == 0 => break,
                _ => {}
            }
            k += 1;
        }
        if k == i + 2 {
            return None;
        }
        (
            Some(toks[i + 2].start..toks[k - 1].end),
            Some(t.end..toks[k - 1].end),
        )
    } else {
        (None, None)
    };
    Some(DeclaratorLoc {
        type_range,
        checked_kw,
        stars,
        prefix: prefix_start..t.start,
        name: t.range(),
        bounds,
        bounds_with_colon,
    })
}

fn splice(code: &str, r: Range<usize>, with: &str) -> String {
    format!("{}{}{}", &code[..r.start], with, &code[r.end..])
}

/// Gives `sym` pointer kind `kind` and, if `bounds` is given, that
/// annotation (replacing an existing one). Plain single-level pointers are
/// rewritten to the checked spelling; returns `None` if the declarator can't
/// be located or rewritten.
pub fn annotate(
    code: &str,
    sym: &str,
    line: Option<usize>,
    kind: Option<PointerKind>,
    bounds: Option<&str>,
    spelling: Spelling,
) -> Option<String> {
    let loc = find_declarator(code, sym, line)?;
    let mut out = code.to_string();
    // Edit from the back so earlier ranges stay valid.
    if let Some(b) = bounds {
        out = match &loc.bounds {
            Some(r) => splice(&out, r.clone(), b),
            None => splice(&out, loc.name.end..loc.name.end, &format!(" : {b}")),
        };
    }
    if let Some(k) = kind {
        let kw = k.spelling(spelling)?;
        match (&loc.checked_kw, &loc.type_range) {
            (Some(r), _) => out = splice(&out, r.clone(), kw),
            (None, Some(t)) if loc.stars == 1 => {
                let ty = &code[t.clone()];
                out = splice(
                    &out,
                    loc.prefix.start..loc.name.start,
                    &format!("{kw}<{ty}> "),
                );
            }
            _ => return None,
        }
    }
    Some(out)
}

/// Removes the bounds annotation of `sym`, if any.
pub fn strip_bounds(code: &str, sym: &str, line: Option<usize>) -> Option<String> {
    let loc = find_declarator(code, sym, line)?;
    let r = loc.bounds_with_colon?;
    Some(splice(code, r, ""))
}

/// Converts every checked pointer keyword to `spelling`.
pub fn convert_spelling(code: &str, spelling: Spelling) -> String {
    let Ok(toks) = tokenize(code) else {
        return code.to_string();
    };
    let mut out = code.to_string();
    for (i, t) in toks.iter().enumerate().rev() {
        if t.kind != TokKind::Ident || text(code, &toks, i + 1) != "<" {
            continue;
        }
        if let Some(k) = PointerKind::from_spelling(t.text(code)) {
            if let Some(s) = k.spelling(spelling) {
                out = splice(&out, t.range(), s);
            }
        }
    }
    out
}

/// Inserts `new_line` before the (one-based) `line`, with its indentation.
pub fn insert_line_before(code: &str, line: usize, new_line: &str) -> Option<String> {
    let lines: Vec<&str> = code.split('\n').collect();
    let target = *lines.get(line.checked_sub(1)?)?;
    let indent: String = target.chars().take_while(|c| c.is_whitespace()).collect();
    let mut out: Vec<String> = lines.iter().map(|s| s.to_string()).collect();
    out.insert(line - 1, format!("{indent}{new_line}"));
    Some(out.join("\n"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn retypes_plain_pointer_and_adds_bounds() {
        let code = "unsigned char byte_reverse(unsigned char* buf,\n  unsigned longs) {";
        let out = annotate(
            code,
            "buf",
            None,
            Some(PointerKind::Arr),
            Some("count(longs * 4)"),
            Spelling::Short,
        )
        .unwrap();
        assert_eq!(
            out,
            "unsigned char byte_reverse(arr<unsigned char> buf : count(longs * 4),\n  unsigned longs) {"
        );
    }

    #[test]
    fn struct_pointer_long_spelling() {
        let out = annotate(
            "  const struct node *n;",
            "n",
            Some(1),
            Some(PointerKind::Ptr),
            None,
            Spelling::Long,
        )
        .unwrap();
        assert_eq!(out, "  _Ptr<const struct node> n;");
    }

    #[test]
    fn replaces_existing_annotation_and_kind() {
        let code = "arr<int> p : count(n) = q;";
        let out = annotate(
            code,
            "p",
            None,
            Some(PointerKind::NtArr),
            Some("count(0)"),
            Spelling::Short,
        )
        .unwrap();
        assert_eq!(out, "nt_arr<int> p : count(0) = q;");
        assert_eq!(strip_bounds(code, "p", None).unwrap(), "arr<int> p = q;");
    }

    #[test]
    fn nested_checked_spelling_is_located() {
        let code = "int foo(arr<arr<int>> a, int i)";
        let loc = find_declarator(code, "a", None).unwrap();
        assert_eq!(&code[loc.type_range.unwrap()], "arr<arr<int>>");
    }

    #[test]
    fn uses_are_not_declarators() {
        assert!(find_declarator("  x = p + 1;\n  return p;", "p", None).is_none());
        assert!(find_declarator("  q->p = 0;", "p", None).is_none());
    }

    #[test]
    fn spelling_round_trip() {
        let code = "nt_arr<char> f(arr<ptr<int>> a : count(n), int arr);";
        let long = convert_spelling(code, Spelling::Long);
        assert_eq!(
            long,
            "_Nt_array_ptr<char> f(_Array_ptr<_Ptr<int>> a : count(n), int arr);"
        );
        assert_eq!(convert_spelling(&long, Spelling::Short), code);
    }

    #[test]
    fn line_insertion_keeps_indentation() {
        let code = "struct x {\n    int *p;\n};";
        assert_eq!(
            insert_line_before(code, 2, "int count_for_p;").unwrap(),
            "struct x {\n    int count_for_p;\n    int *p;\n};"
        );
    }
}
