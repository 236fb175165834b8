use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{parse_bounds, BoundsAnnotation, PointerKind};
use crate::source::declarator::{parse_declaration, Level, VarDecl};
use crate::source::lexer::tokenize;
use crate::source::{DeclId, DeclKind, Declaration, DeclarationMeta};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SiteScope {
    Param,
    Local,
    Global,
    Field,
    Return,
}

/// A pointer declaration that can carry a checked kind and bounds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AnnotationSite {
    pub decl_id: DeclId,
    pub symbol: String,
    /// Declared kind for checked spellings; for plain `T*` declarations this
    /// is `Ptr` until [`classify_program`](super::classify_program) refines it.
    pub kind: PointerKind,
    /// Kind of the pointee for pointer-to-pointer declarations.
    pub elem_kind: Option<PointerKind>,
    #[serde(skip)]
    pub bounds: BoundsAnnotation,
    /// Annotation text as written, including unparseable text.
    pub bounds_text: Option<String>,
    pub scope: SiteScope,
    /// Enclosing struct for field sites.
    pub struct_name: Option<String>,
    /// One-based line within the owning declaration.
    pub line: usize,
    /// Written with a checked spelling (`arr<T>` etc.).
    pub checked: bool,
    /// Innermost element type.
    pub base_type: String,
}

impl AnnotationSite {
    pub fn is_annotated(&self) -> bool {
        !self.bounds.is_none()
    }

    /// Arr-of-Arr declaration that must become an array of structs.
    pub fn is_nested_array(&self) -> bool {
        self.kind == PointerKind::Arr && self.elem_kind == Some(PointerKind::Arr)
    }

    /// Stable key for matching the same site across versions of the code.
    pub fn key(&self) -> (DeclId, SiteScope, String) {
        (self.decl_id.clone(), self.scope, self.symbol.clone())
    }
}

fn site_from(decl: &Declaration, v: &VarDecl, scope: SiteScope) -> Option<AnnotationSite> {
    if !v.ty.is_pointer() {
        return None;
    }
    let level_kind = |l: &Level| match l {
        Level::Plain => None,
        Level::Checked(k) => Some(*k),
    };
    let outer = v.ty.levels[0];
    let checked = matches!(outer, Level::Checked(_));
    let kind = level_kind(&outer).unwrap_or(PointerKind::Ptr);
    let elem_kind =
        v.ty.levels
            .get(1)
            .map(|l| level_kind(l).unwrap_or(PointerKind::Ptr));
    // A bitfield width is not a bounds annotation.
    let bounds_text = v
        .bounds
        .clone()
        .filter(|b| !b.trim().chars().all(|c| c.is_ascii_digit()));
    let bounds = bounds_text
        .as_deref()
        .and_then(|t| parse_bounds(t).ok())
        .unwrap_or_default();
    Some(AnnotationSite {
        decl_id: decl.id.clone(),
        symbol: v.name.clone(),
        kind,
        elem_kind,
        bounds,
        bounds_text,
        scope,
        struct_name: (scope == SiteScope::Field).then(|| decl.name.clone()),
        line: v.line,
        checked,
        base_type: v.ty.base.clone(),
    })
}

/// All pointer declarations inside `decl`, with kinds as spelled.
pub fn extract_sites(decl: &Declaration) -> Vec<AnnotationSite> {
    let m = &decl.meta;
    let mut out = Vec::new();
    match decl.kind {
        DeclKind::Procedure => {
            if let Some(ret) = return_site(decl) {
                out.push(ret);
            }
            out.extend(
                m.params
                    .iter()
                    .filter_map(|v| site_from(decl, v, SiteScope::Param)),
            );
            out.extend(
                m.locals
                    .iter()
                    .filter_map(|v| site_from(decl, v, SiteScope::Local)),
            );
        }
        DeclKind::Global => {
            out.extend(
                m.globals
                    .iter()
                    .filter_map(|v| site_from(decl, v, SiteScope::Global)),
            );
            out.extend(
                m.fields
                    .iter()
                    .filter_map(|v| site_from(decl, v, SiteScope::Field)),
            );
        }
        DeclKind::TypeDecl => {
            out.extend(
                m.fields
                    .iter()
                    .filter_map(|v| site_from(decl, v, SiteScope::Field)),
            );
        }
        DeclKind::Macro => {}
    }
    out
}

fn return_site(decl: &Declaration) -> Option<AnnotationSite> {
    let rt = decl.meta.return_type.trim();
    if rt.is_empty() {
        return None;
    }
    let text = format!("{rt} __return_value");
    let toks = tokenize(&text).ok()?;
    let mut v = parse_declaration(&text, &toks, 0)?.pop()?;
    v.name = decl.name.clone();
    v.bounds = decl.meta.return_bounds.clone();
    v.line = 1;
    site_from(decl, &v, SiteScope::Return)
}

/// Names visible program-wide: globals, enum constants and macros.
#[derive(Debug, Clone, Default)]
pub struct Scope {
    pub globals: BTreeSet<String>,
    pub macros: BTreeSet<String>,
}

impl Scope {
    pub fn of_program<'a>(decls: impl IntoIterator<Item = &'a Declaration>) -> Scope {
        let mut s = Scope::default();
        for d in decls {
            match d.kind {
                DeclKind::Global => {
                    s.globals.extend(d.names().map(str::to_string));
                }
                DeclKind::TypeDecl => {
                    // Enumerators are integer constants; tag aliases never
                    // appear in bounds, so admitting them is harmless.
                    let field_names: BTreeSet<&str> =
                        d.meta.fields.iter().map(|f| f.name.as_str()).collect();
                    s.globals.extend(
                        d.aliases
                            .iter()
                            .filter(|a| !field_names.contains(a.as_str()))
                            .cloned(),
                    );
                }
                DeclKind::Macro => {
                    s.macros.insert(d.name.clone());
                }
                DeclKind::Procedure => {}
            }
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase", tag = "verdict", content = "identifier")]
pub enum ScopeVerdict {
    Valid,
    Rejected(String),
}

/// Checks that every identifier of the site's bounds is visible at the
/// site. `meta` belongs to the declaration owning the site.
pub fn validate_scope(
    site: &AnnotationSite,
    meta: &DeclarationMeta,
    scope: &Scope,
) -> ScopeVerdict {
    for ident in site.bounds.identifiers() {
        let visible = scope.globals.contains(&ident)
            || scope.macros.contains(&ident)
            || match site.scope {
                SiteScope::Param | SiteScope::Return => meta.params.iter().any(|p| p.name == ident),
                SiteScope::Local => {
                    meta.params.iter().any(|p| p.name == ident)
                        || meta
                            .locals
                            .iter()
                            .any(|l| l.name == ident && l.line <= site.line)
                }
                SiteScope::Field => meta.fields.iter().any(|f| f.name == ident),
                SiteScope::Global => false,
            };
        if !visible {
            return ScopeVerdict::Rejected(ident);
        }
    }
    ScopeVerdict::Valid
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::source::{Program, SourceUnit};

    fn program(src: &str) -> Program {
        Program::from_units(&[SourceUnit::new("t.c", src)]).unwrap()
    }

    #[test]
    fn sites_of_a_procedure() {
        let p = program(
            "nt_arr<char> f(arr<char> p_in : count(in_len), char *out, unsigned int in_len) : count(in_len) {\n  char *q = out;\n  int k;\n  return 0;\n}",
        );
        let sites = extract_sites(&p.decls[0]);
        let summary: Vec<_> = sites
            .iter()
            .map(|s| {
                (
                    s.symbol.as_str(),
                    s.scope,
                    s.kind,
                    s.checked,
                    s.bounds.to_string(),
                )
            })
            .collect();
        assert_eq!(
            summary,
            vec![
                (
                    "f",
                    SiteScope::Return,
                    PointerKind::NtArr,
                    true,
                    "count(in_len)".to_string()
                ),
                (
                    "p_in",
                    SiteScope::Param,
                    PointerKind::Arr,
                    true,
                    "count(in_len)".to_string()
                ),
                (
                    "out",
                    SiteScope::Param,
                    PointerKind::Ptr,
                    false,
                    String::new()
                ),
                (
                    "q",
                    SiteScope::Local,
                    PointerKind::Ptr,
                    false,
                    String::new()
                ),
            ]
        );
        assert_eq!(sites[3].line, 2);
    }

    #[test]
    fn field_sites_name_their_struct() {
        let p = program("struct x {\n  int count_for_p;\n  arr<int> p: count(count_for_p);\n};");
        let s = extract_sites(&p.decls[0]);
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].struct_name.as_deref(), Some("x"));
        assert_eq!(s[0].scope, SiteScope::Field);
        let scope = Scope::of_program(&p.decls);
        assert_eq!(
            validate_scope(&s[0], &p.decls[0].meta, &scope),
            ScopeVerdict::Valid
        );
    }

    #[test]
    fn nested_checked_array() {
        let p = program("int foo(arr<arr<int>> a, int i) {\n  return a[i][i];\n}");
        let s = extract_sites(&p.decls[0]);
        assert!(s[0].is_nested_array());
        assert_eq!(s[0].base_type, "int");
    }

    #[test]
    fn parameter_bounds_in_scope() {
        let p = program(
            "#define MAX 4\nint g;\nvoid f(arr<char> p_in : count(in_len), unsigned int in_len, arr<int> q : count(MAX + g), arr<int> r : count(m)) {}",
        );
        let f = p.find_by_name("f").unwrap();
        let scope = Scope::of_program(&p.decls);
        let sites = extract_sites(f);
        let verdicts: Vec<_> = sites
            .iter()
            .map(|s| validate_scope(s, &f.meta, &scope))
            .collect();
        assert_eq!(
            verdicts,
            vec![
                ScopeVerdict::Valid,
                ScopeVerdict::Valid,
                ScopeVerdict::Rejected("m".into())
            ]
        );
    }

    #[test]
    fn locals_must_be_declared_before_use() {
        let p = program("void f(void) {\n  arr<int> a : count(n) = 0;\n  int n = 3;\n  arr<int> b : count(n) = 0;\n}");
        let f = &p.decls[0];
        let scope = Scope::default();
        let sites = extract_sites(f);
        assert_eq!(
            validate_scope(&sites[0], &f.meta, &scope),
            ScopeVerdict::Rejected("n".into())
        );
        assert_eq!(
            validate_scope(&sites[1], &f.meta, &scope),
            ScopeVerdict::Valid
        );
    }

    #[test]
    fn newly_added_parameter_is_in_scope() {
        let p = program(
            "static int countint (lua_Integer key,\n  arr<unsigned int> nums: count(count_nums),\n  int count_nums\n) {\n  return 0;\n}",
        );
        let f = &p.decls[0];
        let s = extract_sites(f);
        assert_eq!(s[0].symbol, "nums");
        assert_eq!(
            validate_scope(&s[0], &f.meta, &Scope::default()),
            ScopeVerdict::Valid
        );
    }
}
