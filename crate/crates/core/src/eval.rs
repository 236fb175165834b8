//! Scoring a ported codebase against hand-written annotations.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::checkedc::{extract_sites, parse_bounds, AnnotationSite, PointerKind, SiteScope};
use crate::source::lexer::{tokenize, TokKind};
use crate::source::{DeclKind, Program};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("ground truth line {line}: {message}")]
    GroundTruth { line: usize, message: String },
}

/// One expected annotation. `bounds` is empty for `ptr` sites.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruthEntry {
    pub decl: String,
    pub symbol: String,
    pub kind: PointerKind,
    #[serde(default)]
    pub bounds: String,
    /// Disambiguates a parameter from a local (or field) of the same name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scope: Option<SiteScope>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GroundTruth {
    pub entries: Vec<GroundTruthEntry>,
}

impl GroundTruth {
    /// Reads JSON lines; blank lines and `#` comments are skipped. Bounds
    /// are stored normalized.
    pub fn parse(text: &str) -> Result<GroundTruth, EvalError> {
        let mut entries = Vec::new();
        let mut seen = BTreeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| EvalError::GroundTruth {
                line: i + 1,
                message,
            };
            let mut e: GroundTruthEntry =
                serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
            if !e.bounds.trim().is_empty() {
                e.bounds = parse_bounds(&e.bounds)
                    .map_err(|x| err(format!("bounds `{}`: {x}", e.bounds)))?
                    .normalized();
            } else {
                e.bounds.clear();
            }
            if !seen.insert((e.decl.clone(), e.symbol.clone(), e.scope)) {
                return Err(err(format!(
                    "duplicate entry for {} in {}",
                    e.symbol, e.decl
                )));
            }
            entries.push(e);
        }
        Ok(GroundTruth { entries })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Metrics {
    pub required: usize,
    pub inferred: usize,
    pub correct: usize,
    pub incorrect: usize,
    pub not_inferred: usize,
}

impl Metrics {
    pub fn identities_hold(&self) -> bool {
        self.inferred == self.correct + self.incorrect
            && self.not_inferred == self.required - self.inferred
    }

    /// Correct share of the required sites, in percent.
    pub fn correct_percent(&self) -> f64 {
        if self.required == 0 {
            0.0
        } else {
            100.0 * self.correct as f64 / self.required as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Correct,
    Incorrect,
    NotInferred,
    /// The declaration does not exist in the output.
    MissingDecl,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EntryVerdict {
    pub entry: GroundTruthEntry,
    pub verdict: Verdict,
    /// What the output says, e.g. `arr count(n)`.
    pub found: Option<String>,
}

/// Call sites of procedures that gained parameters, and how many of them
/// pass the new argument count. Informational only.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CallerCoverage {
    pub procedures_with_new_params: usize,
    pub call_sites: usize,
    pub updated_call_sites: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EvalReport {
    pub metrics: Metrics,
    pub verdicts: Vec<EntryVerdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub callers: Option<CallerCoverage>,
}

fn output_kind(s: &AnnotationSite) -> PointerKind {
    if s.checked {
        s.kind
    } else {
        PointerKind::Unchecked
    }
}

fn describe(s: &AnnotationSite) -> String {
    match (&s.bounds_text, output_kind(s)) {
        (Some(_), k) => format!("{k} {}", s.bounds.normalized()),
        (None, k) => k.to_string(),
    }
}

/// Scores `output` against `gt`. Verdicts follow the entry order.
pub fn score(output: &Program, gt: &GroundTruth) -> EvalReport {
    let mut sites_by_decl: BTreeMap<&str, Vec<AnnotationSite>> = BTreeMap::new();
    for d in &output.decls {
        sites_by_decl
            .entry(d.name.as_str())
            .or_default()
            .extend(extract_sites(d));
    }
    let mut m = Metrics::default();
    let mut verdicts = Vec::new();
    for e in &gt.entries {
        m.required += 1;
        let Some(sites) = sites_by_decl.get(e.decl.as_str()) else {
            m.not_inferred += 1;
            verdicts.push(EntryVerdict {
                entry: e.clone(),
                verdict: Verdict::MissingDecl,
                found: None,
            });
            continue;
        };
        // Return values are only matched when asked for explicitly.
        let site = sites.iter().filter(|s| s.symbol == e.symbol).find(|s| {
            e.scope
                .map_or(s.scope != SiteScope::Return, |sc| sc == s.scope)
        });
        let Some(site) = site else {
            m.not_inferred += 1;
            verdicts.push(EntryVerdict {
                entry: e.clone(),
                verdict: Verdict::NotInferred,
                found: None,
            });
            continue;
        };
        let kind = output_kind(site);
        let inferred = site.checked && (site.is_annotated() || !kind.needs_bounds());
        let verdict = if !inferred {
            m.not_inferred += 1;
            Verdict::NotInferred
        } else if kind == e.kind && site.bounds.normalized() == e.bounds {
            m.inferred += 1;
            m.correct += 1;
            Verdict::Correct
        } else {
            m.inferred += 1;
            m.incorrect += 1;
            Verdict::Incorrect
        };
        verdicts.push(EntryVerdict {
            entry: e.clone(),
            verdict,
            found: Some(describe(site)),
        });
    }
    debug_assert!(m.identities_hold());
    EvalReport {
        metrics: m,
        verdicts,
        callers: None,
    }
}

/// Argument counts of every call to `name` in `code`.
fn call_arities(code: &str, name: &str) -> Vec<usize> {
    let Ok(toks) = tokenize(code) else {
        return Vec::new();
    };
    let mut out = Vec::new();
    for i in 0..toks.len() {
        let t = &toks[i];
        if t.kind != TokKind::Ident || t.text(code) != name {
            continue;
        }
        if toks.get(i + 1).map(|t| t.text(code)) != Some("(") {
            continue;
        }
        let mut depth = 0usize;
        let mut args = 0usize;
        let mut any = false;
        for t in &toks[i + 1..] {
            match t.text(code) {
                "(" | "[" | "{" => {
                    depth += 1;
                    if depth == 1 {
                        continue;
                    }
                }
                ")" | "]" | "}" => {
                    depth -= 1;
                    if depth == 0 {
                        break;
                    }
                }
                "," if depth == 1 => args += 1,
                _ => {}
            }
            any = true;
        }
        out.push(if any { args + 1 } else { 0 });
    }
    out
}

/// Compares procedure parameter counts between the input and the output
/// and checks that calls in the output pass the new count.
pub fn caller_coverage(original: &Program, output: &Program) -> CallerCoverage {
    let mut cov = CallerCoverage::default();
    for d in output.decls.iter().filter(|d| d.has_body()) {
        let Some(before) = original
            .decls
            .iter()
            .find(|o| o.kind == DeclKind::Procedure && o.name == d.name)
        else {
            continue;
        };
        let arity = d.meta.params.len();
        if arity <= before.meta.params.len() {
            continue;
        }
        cov.procedures_with_new_params += 1;
        for caller in output.decls.iter().filter(|c| c.has_body() && c.id != d.id) {
            for n in call_arities(&caller.code, &d.name) {
                cov.call_sites += 1;
                if n == arity {
                    cov.updated_call_sites += 1;
                }
            }
        }
    }
    cov
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// Text report: metrics, then every entry that is not correct.
    pub fn to_text(&self) -> String {
        let m = &self.metrics;
        let mut s = String::new();
        let _ = writeln!(
            s,
            "required {}  inferred {}  correct {} ({:.0}%)  incorrect {}  not inferred {}",
            m.required,
            m.inferred,
            m.correct,
            m.correct_percent(),
            m.incorrect,
            m.not_inferred
        );
        for v in &self.verdicts {
            if v.verdict == Verdict::Correct {
                continue;
            }
            let e = &v.entry;
            let expected = if e.bounds.is_empty() {
                e.kind.to_string()
            } else {
                format!("{} {}", e.kind, e.bounds)
            };
            let found = match (&v.verdict, &v.found) {
                (Verdict::MissingDecl, _) => "declaration missing from output".to_string(),
                (_, Some(f)) => f.clone(),
                (_, None) => "symbol not found".to_string(),
            };
            let _ = writeln!(
                s,
                "  {}::{}: expected {expected}, found {found}",
                e.decl, e.symbol
            );
        }
        if let Some(c) = &self.callers {
            let _ = writeln!(
                s,
                "callers: {} procedures gained parameters; {}/{} call sites pass them",
                c.procedures_with_new_params, c.updated_call_sites, c.call_sites
            );
        }
        s
    }
}
