//! Symbolic edits made around the model-driven passes: array structs before
//! the nested-array pass, conflict removal after the bounds pass, bounds
//! variables before the globals/fields pass, and the final scope check.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::{AnnotationEvent, PassContext, PassReport, PipelineConfig};
use crate::checkedc::{
    annotate, classify_program, extract_sites, insert_line_before, strip_bounds, validate_scope,
    AnnotationSite, PointerKind, Scope, ScopeVerdict, SiteScope, Spelling,
};
use crate::prompt::IntroducedVar;
use crate::source::{DeclId, Declaration, Program};

/// An annotation one procedure's query wrote onto a global or field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Proposal {
    pub by: DeclId,
    /// Normalized bounds.
    pub bounds: String,
}

fn program_order(program: &Program) -> BTreeMap<DeclId, usize> {
    program
        .decls
        .iter()
        .enumerate()
        .map(|(i, d)| (d.id.clone(), i))
        .collect()
}

fn sorted_sites<'a>(
    program: &Program,
    sites: impl Iterator<Item = &'a AnnotationSite>,
) -> Vec<AnnotationSite> {
    let pos = program_order(program);
    let mut v: Vec<AnnotationSite> = sites.cloned().collect();
    v.sort_by_key(|s| {
        (
            pos.get(&s.decl_id).copied().unwrap_or(usize::MAX),
            s.line,
            s.symbol.clone(),
        )
    });
    v
}

/// Name of the struct wrapping an array of `T`.
pub fn array_struct_name(base_type: &str) -> String {
    let t: String = base_type
        .split_whitespace()
        .collect::<Vec<_>>()
        .join("_")
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect();
    format!("arr_of_{t}")
}

fn array_struct_code(name: &str, base_type: &str) -> String {
    let arr = PointerKind::Arr
        .spelling(Spelling::Short)
        .expect("arr has a spelling");
    format!(
        "typedef struct {name} {{\n  {arr}<{base_type}> ptr : count(len);\n  int len;\n}} {name};"
    )
}

/// Snapshots the arrays of arrays and inserts one wrapper struct per element
/// type before the first declaration that holds such an array.
pub fn pass1_prepare(
    program: &mut Program,
    _cfg: &PipelineConfig,
    ctx: &mut PassContext,
    report: &mut PassReport,
) {
    let class = classify_program(&program.decls);
    ctx.nested = sorted_sites(program, class.nested_arrays());
    let mut done = BTreeSet::new();
    for site in ctx.nested.clone() {
        if !done.insert(site.base_type.clone()) {
            continue;
        }
        let name = array_struct_name(&site.base_type);
        let code = array_struct_code(&name, &site.base_type);
        if let Some(existing) = program.find_by_name(&name) {
            let same = existing.code.split_whitespace().eq(code.split_whitespace());
            if same {
                ctx.array_structs
                    .insert(site.base_type.clone(), existing.id.clone());
            } else {
                report
                    .notes
                    .push(format!("`{name}` already exists with a different definition; no wrapper struct inserted"));
            }
            continue;
        }
        let Some(anchor) = program.get(&site.decl_id) else {
            continue;
        };
        match Declaration::from_code(&code, &anchor.span.path) {
            Ok(decl) => {
                let id = decl.id.clone();
                let anchor = anchor.id.clone();
                program.insert_before(&anchor, decl);
                ctx.array_structs.insert(site.base_type.clone(), id);
                report.inserted.push(name);
            }
            Err(e) => report.notes.push(format!("cannot build `{name}`: {e}")),
        }
    }
}

/// Removes global and field annotations on which the bounds queries of
/// different procedures disagreed.
pub fn pass2_postprocess(program: &mut Program, ctx: &PassContext, report: &mut PassReport) {
    for ((target, symbol), props) in &ctx.proposals {
        let distinct: BTreeSet<&str> = props.iter().map(|p| p.bounds.as_str()).collect();
        if distinct.len() < 2 {
            continue;
        }
        let Some(d) = program.get(target).cloned() else {
            continue;
        };
        let Some(site) = extract_sites(&d).into_iter().find(|s| {
            &s.symbol == symbol && matches!(s.scope, SiteScope::Global | SiteScope::Field)
        }) else {
            continue;
        };
        let detail: Vec<String> = props
            .iter()
            .map(|p| format!("{} by {}", p.bounds, p.by))
            .collect();
        let reason = format!("conflicting annotations: {}", detail.join(", "));
        if let Some(nd) =
            strip_bounds(&d.code, symbol, Some(site.line)).and_then(|c| d.reparse(&c).ok())
        {
            *program.get_mut(target).expect("exists") = nd;
        }
        report
            .notes
            .push(format!("{symbol} in {}: {reason}", d.name));
        report.dropped.push(AnnotationEvent {
            decl: target.clone(),
            symbol: symbol.clone(),
            bounds: site.bounds_text.unwrap_or_default(),
            reason: Some(reason),
        });
    }
}

fn fresh_name(base: &str, taken: &BTreeSet<String>) -> String {
    if !taken.contains(base) {
        return base.to_string();
    }
    (2..)
        .map(|k| format!("{base}_{k}"))
        .find(|n| !taken.contains(n))
        .expect("some suffix is free")
}

/// Adds an `int count_for_X` bounds variable for every unannotated array
/// global or field and annotates the pointer with it. Fields get a sibling
/// field; globals a new global declared right before them.
pub fn pass3_prepare(
    program: &mut Program,
    _cfg: &PipelineConfig,
    ctx: &mut PassContext,
    report: &mut PassReport,
) {
    let class = classify_program(&program.decls);
    let candidates = sorted_sites(
        program,
        class.all().filter(|s| {
            matches!(s.scope, SiteScope::Global | SiteScope::Field)
                && s.kind == PointerKind::Arr
                && s.elem_kind.is_none()
                && !s.is_annotated()
        }),
    );
    let mut taken: BTreeSet<String> = program.name_index().into_keys().collect();
    let mut by_decl: BTreeMap<DeclId, Vec<AnnotationSite>> = BTreeMap::new();
    let mut decl_order = Vec::new();
    for s in candidates {
        if !by_decl.contains_key(&s.decl_id) {
            decl_order.push(s.decl_id.clone());
        }
        by_decl.entry(s.decl_id.clone()).or_default().push(s);
    }

    for id in decl_order {
        let Some(d) = program.get(&id).cloned() else {
            continue;
        };
        let mut sites = by_decl.remove(&id).unwrap_or_default();
        // Bottom-up so inserted lines don't shift the remaining sites.
        sites.sort_by_key(|s| std::cmp::Reverse(s.line));
        let mut code = d.code.clone();
        let mut field_names: BTreeSet<String> =
            d.meta.fields.iter().map(|f| f.name.clone()).collect();
        let mut new_globals: Vec<(String, AnnotationSite)> = Vec::new();
        let mut new_fields: Vec<(String, String)> = Vec::new();
        for s in &sites {
            let kind = (!s.checked).then_some(PointerKind::Arr);
            let edited = match s.scope {
                SiteScope::Field => {
                    let var = fresh_name(&format!("count_for_{}", s.symbol), &field_names);
                    let bounds = format!("count({var})");
                    insert_line_before(&code, s.line, &format!("int {var};"))
                        .and_then(|c| {
                            annotate(
                                &c,
                                &s.symbol,
                                Some(s.line + 1),
                                kind,
                                Some(&bounds),
                                Spelling::Short,
                            )
                        })
                        .inspect(|_| {
                            field_names.insert(var.clone());
                            new_fields.push((var, s.symbol.clone()));
                        })
                }
                _ => {
                    let var = fresh_name(&format!("count_for_{}", s.symbol), &taken);
                    let bounds = format!("count({var})");
                    annotate(
                        &code,
                        &s.symbol,
                        Some(s.line),
                        kind,
                        Some(&bounds),
                        Spelling::Short,
                    )
                    .inspect(|_| {
                        taken.insert(var.clone());
                        new_globals.push((var, s.clone()));
                    })
                }
            };
            match edited {
                Some(c) => code = c,
                None => report.notes.push(format!(
                    "cannot add a bounds variable for {} in {}",
                    s.symbol, d.name
                )),
            }
        }
        if code == d.code {
            continue;
        }
        let nd = match d.reparse(&code) {
            Ok(nd) => nd,
            Err(e) => {
                report
                    .notes
                    .push(format!("bounds variables for {} do not parse: {e}", d.name));
                continue;
            }
        };
        let new_sites = extract_sites(&nd);
        ctx.state.mark(&id, &d.code);
        *program.get_mut(&id).expect("exists") = nd.clone();

        // Globals in source order, each right before the pointer's declaration.
        new_globals.reverse();
        for (var, site) in new_globals {
            let text = format!("int {var};");
            match Declaration::from_code(&text, &nd.span.path) {
                Ok(g) => {
                    program.insert_before(&id, g);
                    report.inserted.push(var.clone());
                    let target = new_sites
                        .iter()
                        .find(|t| t.symbol == site.symbol && t.scope == site.scope)
                        .cloned()
                        .unwrap_or(site);
                    ctx.introduced.push(IntroducedVar {
                        var,
                        line: 1,
                        target,
                    });
                }
                Err(e) => report.notes.push(format!("cannot declare {var}: {e}")),
            }
        }
        new_fields.reverse();
        for (var, sym) in new_fields {
            let line = nd
                .meta
                .fields
                .iter()
                .find(|f| f.name == var)
                .map_or(1, |f| f.line);
            let Some(target) = new_sites
                .iter()
                .find(|t| t.symbol == sym && t.scope == SiteScope::Field)
                .cloned()
            else {
                continue;
            };
            report.inserted.push(format!("{}.{var}", nd.name));
            ctx.introduced.push(IntroducedVar { var, line, target });
        }
    }
}

/// Checks every annotation of every modified declaration once more and
/// removes those that can't be parsed or name something out of scope.
pub fn final_sweep(
    program: &mut Program,
    original: &BTreeMap<DeclId, String>,
) -> Vec<AnnotationEvent> {
    let scope = Scope::of_program(&program.decls);
    let mut drops = Vec::new();
    let ids: Vec<DeclId> = program
        .decls
        .iter()
        .filter(|d| original.get(&d.id) != Some(&d.code))
        .map(|d| d.id.clone())
        .collect();
    for id in ids {
        let mut d = program.get(&id).expect("exists").clone();
        let mut sites = extract_sites(&d);
        sites.sort_by_key(|s| std::cmp::Reverse(s.line));
        for s in sites {
            let Some(text) = s.bounds_text.clone() else {
                continue;
            };
            let reason = if s.bounds.is_none() {
                format!("cannot parse bounds `{text}`")
            } else {
                match validate_scope(&s, &d.meta, &scope) {
                    ScopeVerdict::Valid => continue,
                    ScopeVerdict::Rejected(ident) => format!("`{ident}` is not in scope"),
                }
            };
            if let Some(nd) =
                strip_bounds(&d.code, &s.symbol, Some(s.line)).and_then(|c| d.reparse(&c).ok())
            {
                d = nd;
            }
            drops.push(AnnotationEvent {
                decl: id.clone(),
                symbol: s.symbol.clone(),
                bounds: text,
                reason: Some(reason),
            });
        }
        *program.get_mut(&id).expect("exists") = d;
    }
    drops
}
