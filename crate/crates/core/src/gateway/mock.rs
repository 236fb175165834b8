//! Deterministic rule-based stand-in for a model, answering bounds queries.
//!
//! For every listed element declared in the code, the first rule that fires
//! decides the answer:
//!
//! 1. `p = malloc(e * sizeof(T))` (or `calloc(e, sizeof(T))`) → `count(e)`;
//! 2. `for (i = 0; i < e; i++)` whose body indexes `p[i]` → `count(e)`;
//! 3. a null-terminated scan over `p` in a loop condition → `nt_arr`,
//!    `count(0)`;
//! 4. `p = q` where `q` is annotated, or was answered earlier in the same
//!    response → `q`'s bounds (where `q` is a fixed-size local, parameter or
//!    context global of `N` elements: `count(N)`, or `count(N - 1)` when
//!    `p` is an `nt_arr`);
//! 5. otherwise no change.
//!
//! Other tasks always get an empty answer.

use std::collections::BTreeMap;
use std::path::Path;

use super::{Backend, GatewayError, Query};
use crate::checkedc::rewrite::annotate;
use crate::checkedc::{
    classify_pointer_lite, extract_sites, nt_count_from_array, parse_bounds, parse_expr,
    BoundsAnnotation, Expr, PointerKind, Spelling,
};
use crate::patch::{MARK_END, MARK_ORIGINAL, MARK_REFACTORED, MARK_SEPARATOR};
use crate::prompt::{ElementOrigin, PromptSections, TaskId};
use crate::source::lexer::{tokenize, TokKind, Token};
use crate::source::{DeclKind, Declaration, Program, SourceUnit};

/// Answers every query with `n` copies of [`mock_respond`].
#[derive(Debug, Default, Clone, Copy)]
pub struct MockBackend;

impl Backend for MockBackend {
    fn tag(&self) -> &'static str {
        "mock"
    }

    fn complete(&mut self, q: Query<'_>) -> Result<Vec<String>, GatewayError> {
        Ok(vec![mock_respond(&q.prompt.rendered); q.n])
    }
}

struct Code<'a> {
    src: &'a str,
    toks: Vec<Token>,
}

impl<'a> Code<'a> {
    fn t(&self, i: usize) -> &'a str {
        self.toks.get(i).map_or("", |t| t.text(self.src))
    }

    fn prev(&self, i: usize) -> &'a str {
        if i == 0 {
            ""
        } else {
            self.t(i - 1)
        }
    }

    fn close_of(&self, open: usize) -> Option<usize> {
        let (o, c) = match self.t(open) {
            "(" => ("(", ")"),
            "[" => ("[", "]"),
            "{" => ("{", "}"),
            _ => return None,
        };
        let mut depth = 0usize;
        for j in open..self.toks.len() {
            let t = self.t(j);
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

    fn slice(&self, from: usize, to_incl: usize) -> &'a str {
        &self.src[self.toks[from].start..self.toks[to_incl].end]
    }

    fn is_zero(&self, i: usize) -> bool {
        matches!(self.t(i), "0" | "'\\0'")
    }

    /// Value occurrences of `sym` (not member names).
    fn uses(&self, sym: &'a str) -> impl Iterator<Item = usize> + '_ {
        (0..self.toks.len()).filter(move |&i| {
            self.toks[i].kind == TokKind::Ident
                && self.t(i) == sym
                && !matches!(self.prev(i), "." | "->")
        })
    }

    /// Whether token `i` sits in the header of a `while` or `for`.
    fn in_loop_header(&self, i: usize) -> bool {
        let mut depth = 0i32;
        for j in (0..i).rev() {
            match self.t(j) {
                ")" => depth += 1,
                "(" if depth == 0 => return matches!(self.prev(j), "while" | "for"),
                "(" => depth -= 1,
                "{" | "}" => return false,
                _ => {}
            }
        }
        false
    }
}

fn expr_of(text: &str) -> Option<Expr> {
    parse_expr(text).ok()
}

/// R1: allocation assigned to `sym`.
fn rule_alloc(c: &Code<'_>, sym: &str) -> Option<BoundsAnnotation> {
    for i in c.uses(sym) {
        if c.t(i + 1) != "=" {
            continue;
        }
        let mut j = i + 2;
        if c.t(j) == "(" && !matches!(c.t(j + 1), "malloc" | "calloc") {
            j = c.close_of(j)? + 1;
        }
        let f = c.t(j);
        if !matches!(f, "malloc" | "calloc") || c.t(j + 1) != "(" {
            continue;
        }
        let close = c.close_of(j + 1)?;
        if close == j + 2 {
            continue;
        }
        let (args_from, args_to) = (j + 2, close - 1);
        if f == "calloc" {
            let mut depth = 0;
            for k in args_from..=args_to {
                match c.t(k) {
                    "(" => depth += 1,
                    ")" => depth -= 1,
                    "," if depth == 0 && k > args_from => {
                        return expr_of(c.slice(args_from, k - 1)).map(BoundsAnnotation::Count);
                    }
                    _ => {}
                }
            }
            continue;
        }
        // Split the malloc argument into top-level factors.
        let mut factors = Vec::new();
        let mut depth = 0;
        let mut start = args_from;
        for k in args_from..=args_to {
            match c.t(k) {
                "(" => depth += 1,
                ")" => depth -= 1,
                "*" if depth == 0 => {
                    if k == start {
                        break;
                    }
                    factors.push((start, k - 1));
                    start = k + 1;
                }
                _ => {}
            }
        }
        if start > args_to {
            continue;
        }
        factors.push((start, args_to));
        let sizeofs = factors.iter().filter(|(a, _)| c.t(*a) == "sizeof").count();
        let rest: Vec<&str> = factors
            .iter()
            .filter(|(a, _)| c.t(*a) != "sizeof")
            .map(|&(a, b)| c.slice(a, b))
            .collect();
        if sizeofs != 1 || rest.is_empty() {
            continue;
        }
        if let Some(e) = expr_of(&rest.join(" * ")) {
            return Some(BoundsAnnotation::Count(e));
        }
    }
    None
}

/// R2: counted loop indexing `sym[i]`.
fn rule_loop(c: &Code<'_>, sym: &str) -> Option<BoundsAnnotation> {
    for f in 0..c.toks.len() {
        if c.t(f) != "for" || c.t(f + 1) != "(" {
            continue;
        }
        let Some(hclose) = c.close_of(f + 1) else {
            continue;
        };
        let semis: Vec<usize> = (f + 2..hclose).filter(|&k| c.t(k) == ";").collect();
        if semis.len() != 2 {
            continue;
        }
        // init: [type] i = 0
        let init = (f + 2, semis[0]);
        let Some(eq) = (init.0..init.1).find(|&k| c.t(k) == "=") else {
            continue;
        };
        if eq == init.0 || !c.is_zero(eq + 1) || eq + 2 != init.1 {
            continue;
        }
        let var = c.t(eq - 1);
        // cond: i < e
        let cond = (semis[0] + 1, semis[1]);
        if c.t(cond.0) != var || c.t(cond.0 + 1) != "<" || cond.0 + 2 >= cond.1 {
            continue;
        }
        let bound = c.slice(cond.0 + 2, cond.1 - 1);
        // step: i++ / ++i / i += 1
        let step: Vec<&str> = (semis[1] + 1..hclose).map(|k| c.t(k)).collect();
        if !(step == [var, "++"] || step == ["++", var] || step == [var, "+=", "1"]) {
            continue;
        }
        let body_end = if c.t(hclose + 1) == "{" {
            c.close_of(hclose + 1)?
        } else {
            (hclose + 1..c.toks.len()).find(|&k| c.t(k) == ";")?
        };
        let indexed = (hclose + 1..body_end).any(|k| {
            c.t(k) == sym
                && !matches!(c.prev(k), "." | "->")
                && c.t(k + 1) == "["
                && c.t(k + 2) == var
                && c.t(k + 3) == "]"
        });
        if indexed {
            if let Some(e) = expr_of(bound) {
                return Some(BoundsAnnotation::Count(e));
            }
        }
    }
    None
}

/// R3: null-terminated scan in a loop condition.
fn rule_null_scan(c: &Code<'_>, sym: &str) -> bool {
    c.uses(sym).any(|i| {
        if !c.in_loop_header(i) {
            return false;
        }
        let deref = c.prev(i) == "*" && matches!(c.t(i.saturating_sub(2)), "(" | ";" | "&&" | "||");
        if deref {
            // `*s++` and `*s--` read before stepping.
            let next = if matches!(c.t(i + 1), "++" | "--") {
                i + 2
            } else {
                i + 1
            };
            return match c.t(next) {
                "!=" => c.is_zero(next + 1),
                ")" | ";" | "&&" | "||" => true,
                _ => false,
            };
        }
        if c.t(i + 1) == "[" {
            if let Some(close) = c.close_of(i + 1) {
                return c.t(close + 1) == "!=" && c.is_zero(close + 2);
            }
        }
        false
    })
}

/// R4: `sym = q` with `q` annotated or a fixed-size array.
fn rule_copy(
    c: &Code<'_>,
    sym: &str,
    target: PointerKind,
    known: &BTreeMap<String, BoundsAnnotation>,
    arrays: &BTreeMap<String, String>,
) -> Option<BoundsAnnotation> {
    for i in c.uses(sym) {
        if c.t(i + 1) != "=" || !matches!(c.t(i + 3), ";" | "," | ")") {
            continue;
        }
        let q = c.t(i + 2);
        if q == sym {
            continue;
        }
        if let Some(b) = known.get(q) {
            return Some(b.clone());
        }
        if let Some(dim) = arrays.get(q) {
            if target == PointerKind::NtArr {
                if let Ok(n) = dim.trim().parse::<u64>() {
                    return nt_count_from_array(n).ok();
                }
                continue;
            }
            return expr_of(dim).map(BoundsAnnotation::Count);
        }
    }
    None
}

fn spelling_of(code: &str) -> Spelling {
    if ["_Ptr<", "_Array_ptr<", "_Nt_array_ptr<"]
        .iter()
        .any(|s| code.contains(s))
    {
        Spelling::Long
    } else {
        Spelling::Short
    }
}

/// The mock's answer to a rendered prompt.
pub fn mock_respond(rendered: &str) -> String {
    let Some(sec) = PromptSections::parse(rendered) else {
        return String::new();
    };
    if sec.task != Some(TaskId::BoundsInference) {
        return String::new();
    }
    let Ok(decl) = Declaration::from_code(&sec.code, Path::new("")) else {
        return String::new();
    };
    let Ok(toks) = tokenize(&sec.code) else {
        return String::new();
    };
    let code = Code {
        src: &sec.code,
        toks,
    };
    let sites = classify_pointer_lite(&decl);
    let mut known: BTreeMap<String, BoundsAnnotation> = BTreeMap::new();
    let mut arrays: BTreeMap<String, String> = BTreeMap::new();
    if let Ok(prelude) = Program::from_units(&[SourceUnit::new("prelude", sec.prelude.as_str())]) {
        for d in prelude.decls.iter().filter(|d| d.kind == DeclKind::Global) {
            for s in extract_sites(d).into_iter().filter(|s| s.is_annotated()) {
                known.insert(s.symbol, s.bounds);
            }
            for v in &d.meta.globals {
                if let (false, Some(dim)) = (v.ty.is_pointer(), v.ty.array_dims.first()) {
                    arrays.insert(v.name.clone(), dim.clone());
                }
            }
        }
    }
    for s in sites.iter().filter(|s| s.is_annotated()) {
        known.insert(s.symbol.clone(), s.bounds.clone());
    }
    for v in decl.meta.params.iter().chain(&decl.meta.locals) {
        if let (false, Some(dim)) = (v.ty.is_pointer(), v.ty.array_dims.first()) {
            arrays.insert(v.name.clone(), dim.clone());
        }
    }
    let spelling = spelling_of(&sec.code);
    let lines: Vec<&str> = sec.code.split('\n').collect();
    let mut edits: BTreeMap<usize, String> = BTreeMap::new();
    for el in sec
        .elements
        .iter()
        .filter(|e| e.origin == ElementOrigin::Own)
    {
        let Some(site) = sites
            .iter()
            .find(|s| s.symbol == el.symbol && !s.is_annotated())
        else {
            continue;
        };
        let sym = site.symbol.as_str();
        let answer = if let Some(b) = rule_alloc(&code, sym) {
            Some((PointerKind::Arr, b))
        } else if let Some(b) = rule_loop(&code, sym) {
            Some((PointerKind::Arr, b))
        } else if rule_null_scan(&code, sym) {
            Some((
                PointerKind::NtArr,
                parse_bounds("count(0)").expect("literal bounds"),
            ))
        } else {
            let target = if site.kind == PointerKind::NtArr {
                PointerKind::NtArr
            } else {
                PointerKind::Arr
            };
            rule_copy(&code, sym, target, &known, &arrays).map(|b| (target, b))
        };
        let Some((kind, bounds)) = answer else {
            continue;
        };
        // Later copies may adopt the bounds chosen here.
        known.insert(sym.to_string(), bounds.clone());
        // Keep a declared kind unless the scan rule promotes arr to nt_arr.
        let new_kind = if !site.checked || (kind == PointerKind::NtArr && site.kind != kind) {
            Some(if site.checked {
                kind
            } else {
                stricter(kind, site.kind)
            })
        } else {
            None
        };
        let Some(line) = site.line.checked_sub(1).and_then(|l| lines.get(l)) else {
            continue;
        };
        let current = edits
            .get(&site.line)
            .cloned()
            .unwrap_or_else(|| line.to_string());
        if let Some(new) = annotate(
            &current,
            sym,
            None,
            new_kind,
            Some(&bounds.to_string()),
            spelling,
        ) {
            edits.insert(site.line, new);
        }
    }
    let mut out = String::new();
    for (line, new) in edits {
        out.push_str(&format!(
            "{MARK_ORIGINAL}\n{}\n{MARK_SEPARATOR}\n{MARK_REFACTORED}\n{new}\n{MARK_END}\n",
            lines[line - 1]
        ));
    }
    out
}

/// The stricter of two array kinds: `nt_arr` wins over `arr`.
fn stricter(a: PointerKind, b: PointerKind) -> PointerKind {
    if a == PointerKind::NtArr || b == PointerKind::NtArr {
        PointerKind::NtArr
    } else {
        a
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompt::{render_prompt, ElementItem, TaskElements, DEFAULT_TOKEN_BUDGET};

    fn ask(task: TaskId, code: &str, elements: &[(&str, usize)]) -> String {
        let items = elements
            .iter()
            .map(|(s, l)| ElementItem {
                symbol: s.to_string(),
                line: *l,
                origin: ElementOrigin::Own,
                bounds_of: None,
            })
            .collect();
        let p = render_prompt(
            &task.spec(),
            &[],
            code,
            &[],
            &TaskElements { items },
            DEFAULT_TOKEN_BUDGET,
        )
        .unwrap();
        mock_respond(&p.rendered)
    }

    fn block(orig: &str, new: &str) -> String {
        format!("<<<<ORIGINAL\n{orig}\n====\n>>>>REFACTORED\n{new}\n<<<<END\n")
    }

    #[test]
    fn r1_malloc_count() {
        let code = "void f(int n) {\n  long *p;\n  p = malloc(n * sizeof(long));\n  p[0] = 1;\n}";
        assert_eq!(
            ask(TaskId::BoundsInference, code, &[("p", 2)]),
            block("  long *p;", "  arr<long> p : count(n);")
        );
    }

    #[test]
    fn r2_counted_loop() {
        let code = "int sum(int *p, int n) {\n  int s = 0;\n  for (int i = 0; i < n; i++) s += p[i];\n  return s;\n}";
        assert_eq!(
            ask(TaskId::BoundsInference, code, &[("p", 1)]),
            block(
                "int sum(int *p, int n) {",
                "int sum(arr<int> p : count(n), int n) {"
            )
        );
    }

    #[test]
    fn r3_null_scan() {
        let code =
            "int len(char *s) {\n  int k = 0;\n  while (*s != '\\0') { s++; k++; }\n  return k;\n}";
        assert_eq!(
            ask(TaskId::BoundsInference, code, &[("s", 1)]),
            block("int len(char *s) {", "int len(nt_arr<char> s : count(0)) {")
        );
    }

    #[test]
    fn r3_post_increment_scan() {
        let code = "int len(char *s) {\n  int k = 0;\n  while (*s++)\n    k++;\n  return k;\n}";
        assert_eq!(
            ask(TaskId::BoundsInference, code, &[("s", 1)]),
            block("int len(char *s) {", "int len(nt_arr<char> s : count(0)) {")
        );
    }

    #[test]
    fn r4_adopts_bounds_answered_in_the_same_response() {
        let code = "int f(int m) {\n  int *a = malloc(m * sizeof(int));\n  int *b;\n  b = a;\n  a[0] = 1;\n  return b[1];\n}";
        let want = block(
            "  int *a = malloc(m * sizeof(int));",
            "  arr<int> a : count(m) = malloc(m * sizeof(int));",
        ) + &block("  int *b;", "  arr<int> b : count(m);");
        assert_eq!(
            ask(TaskId::BoundsInference, code, &[("a", 2), ("b", 3)]),
            want
        );
    }

    #[test]
    fn r4_copy_and_fixed_array() {
        let code = "void f(arr<int> q : count(n), int n) {\n  int *p;\n  p = q;\n  p[1] = 0;\n}";
        assert_eq!(
            ask(TaskId::BoundsInference, code, &[("p", 2)]),
            block("  int *p;", "  arr<int> p : count(n);")
        );
        let code = "void foo() {\n  char a[10]; nt_arr<char> p = a;\n}";
        assert_eq!(
            ask(TaskId::BoundsInference, code, &[("p", 2)]),
            block(
                "  char a[10]; nt_arr<char> p = a;",
                "  char a[10]; nt_arr<char> p : count(9) = a;"
            )
        );
    }

    #[test]
    fn r5_nothing_and_other_tasks() {
        let code = "void f(int *p, int k) {\n  p[k] = 0;\n}";
        assert_eq!(ask(TaskId::BoundsInference, code, &[("p", 1)]), "");
        assert_eq!(ask(TaskId::BoundsInference, code, &[]), "");
        let code = "void f(int n) {\n  long *p = malloc(n * sizeof(long));\n  p[0] = 1;\n}";
        assert_eq!(ask(TaskId::NestedArrays, code, &[("p", 2)]), "");
    }

    #[test]
    fn mock_is_pure() {
        let code = "void f(int n) {\n  long *p = malloc(n * sizeof(long));\n  p[0] = 1;\n}";
        assert_eq!(
            ask(TaskId::BoundsInference, code, &[("p", 2)]),
            ask(TaskId::BoundsInference, code, &[("p", 2)])
        );
    }
}
