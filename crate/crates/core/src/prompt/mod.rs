//! Prompt construction for the three porting tasks.
//!
//! A rendered prompt has fixed, marker-delimited sections so that it can be
//! inspected in logs and parsed back by the offline backends.

pub mod texts;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::checkedc::{AnnotationSite, PointerKind, SiteScope};
use crate::depgraph::PreludeEntry;
use crate::source::Declaration;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskId {
    NestedArrays,
    BoundsInference,
    GlobalsFields,
}

impl TaskId {
    pub const ALL: [TaskId; 3] = [
        TaskId::NestedArrays,
        TaskId::BoundsInference,
        TaskId::GlobalsFields,
    ];

    /// Pass number (1-based) of this task.
    pub fn pass(self) -> u8 {
        match self {
            TaskId::NestedArrays => 1,
            TaskId::BoundsInference => 2,
            TaskId::GlobalsFields => 3,
        }
    }

    pub fn from_pass(pass: u8) -> Option<TaskId> {
        TaskId::ALL.into_iter().find(|t| t.pass() == pass)
    }

    pub fn tag(self) -> &'static str {
        match self {
            TaskId::NestedArrays => "nested-arrays",
            TaskId::BoundsInference => "bounds",
            TaskId::GlobalsFields => "globals-fields",
        }
    }

    pub fn spec(self) -> TaskSpec {
        let (description, example) = match self {
            TaskId::NestedArrays => (
                texts::NESTED_ARRAYS_DESCRIPTION,
                texts::NESTED_ARRAYS_EXAMPLE,
            ),
            TaskId::BoundsInference => (texts::BOUNDS_DESCRIPTION, texts::BOUNDS_EXAMPLE),
            TaskId::GlobalsFields => (
                texts::GLOBALS_FIELDS_DESCRIPTION,
                texts::GLOBALS_FIELDS_EXAMPLE,
            ),
        };
        TaskSpec {
            id: self,
            description,
            example,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TaskSpec {
    pub id: TaskId,
    pub description: &'static str,
    pub example: &'static str,
}

/// A change to a successor made earlier in the same pass.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RefactorHistoryEntry {
    pub decl_name: String,
    pub old_code: String,
    pub new_code: String,
    /// Position of the change within the pass; larger is more recent.
    pub sequence: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "origin", content = "struct")]
pub enum ElementOrigin {
    /// Declared in the code being transformed.
    Own,
    Global,
    Field(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElementItem {
    pub symbol: String,
    /// One-based line within the declaring declaration.
    pub line: usize,
    pub origin: ElementOrigin,
    /// For bounds variables: the pointer whose bounds it stores.
    pub bounds_of: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct TaskElements {
    pub items: Vec<ElementItem>,
}

impl TaskElements {
    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// A bounds variable introduced for an unannotated global or field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IntroducedVar {
    pub var: String,
    /// One-based line of the new variable within its declaration.
    pub line: usize,
    /// The pointer it stores the bounds of.
    pub target: AnnotationSite,
}

/// The rendered text of a query plus its content hash.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptText {
    pub rendered: String,
    pub fingerprint: String,
}

impl PromptText {
    pub fn new(rendered: String) -> Self {
        let fingerprint = hex::encode(Sha256::digest(rendered.as_bytes()));
        PromptText {
            rendered,
            fingerprint,
        }
    }

    /// Estimated token count (four characters per token).
    pub fn estimated_tokens(&self) -> usize {
        self.rendered.len().div_ceil(4)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("prompt needs about {estimated} tokens, over the budget of {budget}")]
    TooLarge { estimated: usize, budget: usize },
    #[error("cannot render a prompt for empty code")]
    EmptyCode,
}

pub const DEFAULT_TOKEN_BUDGET: usize = 24_000;
pub const HISTORY_CAP: usize = 20;
pub const NONE_MARKER: &str = "(none)";

pub const SECTION_TASK: &str = "### Task definition";
pub const SECTION_INSTRUCTION: &str = "### Refactor instruction";
pub const SECTION_FORMAT: &str = "### Output format";
pub const SECTION_EXAMPLE: &str = "### Example";
pub const SECTION_PRELUDE: &str = "### Prelude";
pub const SECTION_CODE: &str = "### Code";
pub const SECTION_HISTORY: &str = "### Refactor history";
pub const SECTION_ELEMENTS: &str = "### Task elements";

fn fenced(out: &mut String, code: &str) {
    out.push_str("```c\n");
    out.push_str(code.trim_end_matches('\n'));
    out.push_str("\n```\n");
}

pub fn render_element(e: &ElementItem) -> String {
    let place = match &e.origin {
        ElementOrigin::Own => format!("declared at line {}", e.line),
        ElementOrigin::Global => {
            format!(
                "global variable, declared at line {} of its declaration",
                e.line
            )
        }
        ElementOrigin::Field(s) => format!(
            "field of struct {s}, declared at line {} of its declaration",
            e.line
        ),
    };
    match &e.bounds_of {
        Some(p) => format!("- {} ({place}; stores the bounds of {p})", e.symbol),
        None => format!("- {} ({place})", e.symbol),
    }
}

/// Renders the full prompt. Sections always appear, in a fixed order; an
/// empty prelude or history shows [`NONE_MARKER`].
pub fn render_prompt(
    task: &TaskSpec,
    prelude: &[PreludeEntry],
    code: &str,
    history: &[RefactorHistoryEntry],
    elements: &TaskElements,
    budget_tokens: usize,
) -> Result<PromptText, PromptError> {
    if code.trim().is_empty() {
        return Err(PromptError::EmptyCode);
    }
    let mut s = String::new();
    s.push_str(texts::PREAMBLE);
    let _ = write!(s, "\n{SECTION_TASK}\n{}\n", task.description);
    let _ = write!(
        s,
        "\n{SECTION_INSTRUCTION}\n{}\n",
        texts::REFACTOR_INSTRUCTION
    );
    let _ = write!(s, "\n{SECTION_FORMAT}\n{}\n", texts::OUTPUT_FORMAT);
    let _ = write!(
        s,
        "\n{SECTION_EXAMPLE}\n{}\n{}\n",
        texts::EXAMPLE_INTRO,
        task.example
    );

    let _ = write!(s, "\n{SECTION_PRELUDE}\n{}\n", texts::PRELUDE_INTRO);
    if prelude.is_empty() {
        let _ = writeln!(s, "{NONE_MARKER}");
    } else {
        let joined: Vec<&str> = prelude.iter().map(|p| p.text.trim_end()).collect();
        fenced(&mut s, &joined.join("\n\n"));
    }

    let _ = write!(s, "\n{SECTION_CODE}\n{}\n", texts::CODE_INTRO);
    fenced(&mut s, code);

    let _ = write!(s, "\n{SECTION_HISTORY}\n{}\n", texts::HISTORY_INTRO);
    if history.is_empty() {
        let _ = writeln!(s, "{NONE_MARKER}");
    } else {
        let mut recent: Vec<&RefactorHistoryEntry> = history.iter().collect();
        recent.sort_by(|a, b| {
            b.sequence
                .cmp(&a.sequence)
                .then(a.decl_name.cmp(&b.decl_name))
        });
        for h in recent.iter().take(HISTORY_CAP) {
            let _ = writeln!(s, "Change {} to {}:", h.sequence, h.decl_name);
            s.push_str("Old:\n");
            fenced(&mut s, &h.old_code);
            s.push_str("New:\n");
            fenced(&mut s, &h.new_code);
        }
        if recent.len() > HISTORY_CAP {
            let _ = writeln!(s, "({} older changes omitted)", recent.len() - HISTORY_CAP);
        }
    }

    let _ = write!(s, "\n{SECTION_ELEMENTS}\n{}\n", texts::ELEMENTS_INTRO);
    if elements.is_empty() {
        let _ = writeln!(s, "{NONE_MARKER}");
    }
    for e in &elements.items {
        let _ = writeln!(s, "{}", render_element(e));
    }

    let p = PromptText::new(s);
    let estimated = p.estimated_tokens();
    if estimated > budget_tokens {
        return Err(PromptError::TooLarge {
            estimated,
            budget: budget_tokens,
        });
    }
    Ok(p)
}

fn own_or_referenced(d: &Declaration, s: &AnnotationSite) -> Option<ElementOrigin> {
    if s.decl_id == d.id {
        return Some(ElementOrigin::Own);
    }
    match s.scope {
        SiteScope::Global if d.meta.referenced_names.contains(&s.symbol) => {
            Some(ElementOrigin::Global)
        }
        SiteScope::Field if d.meta.member_names.contains(&s.symbol) => Some(ElementOrigin::Field(
            s.struct_name.clone().unwrap_or_default(),
        )),
        _ => None,
    }
}

/// Selects the code elements a query on `d` should focus on.
///
/// * nested arrays: sites in `sites` flagged as arrays of arrays,
/// * bounds: unannotated `arr`/`nt_arr` sites,
/// * globals/fields: the bounds variables in `introduced` whose pointer `d`
///   uses.
///
/// `sites` may contain sites of any declaration; only those declared in `d`
/// or globals/fields that `d` uses are listed.
pub fn elements_for(
    task: TaskId,
    d: &Declaration,
    sites: &[AnnotationSite],
    introduced: &[IntroducedVar],
) -> TaskElements {
    let mut items = Vec::new();
    match task {
        TaskId::NestedArrays | TaskId::BoundsInference => {
            for s in sites {
                if s.scope == SiteScope::Return {
                    continue;
                }
                let wanted = match task {
                    TaskId::NestedArrays => s.is_nested_array(),
                    _ => {
                        matches!(s.kind, PointerKind::Arr | PointerKind::NtArr) && !s.is_annotated()
                    }
                };
                if !wanted {
                    continue;
                }
                if let Some(origin) = own_or_referenced(d, s) {
                    items.push(ElementItem {
                        symbol: s.symbol.clone(),
                        line: s.line,
                        origin,
                        bounds_of: None,
                    });
                }
            }
        }
        TaskId::GlobalsFields => {
            for v in introduced {
                if let Some(origin) = own_or_referenced(d, &v.target) {
                    if origin == ElementOrigin::Own {
                        // The declaration holding the new variable needs no query.
                        continue;
                    }
                    items.push(ElementItem {
                        symbol: v.var.clone(),
                        line: v.line,
                        origin,
                        bounds_of: Some(v.target.symbol.clone()),
                    });
                }
            }
        }
    }
    items.dedup();
    TaskElements { items }
}

/// The parts of a rendered prompt that the offline backends read back.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptSections {
    pub task: Option<TaskId>,
    pub prelude: String,
    pub code: String,
    pub elements: Vec<ElementItem>,
}

fn section<'a>(text: &'a str, header: &str) -> Option<&'a str> {
    let start = text.find(&format!("\n{header}\n"))? + header.len() + 2;
    let rest = &text[start..];
    let end = rest.find("\n### ").map_or(rest.len(), |e| e + 1);
    Some(&rest[..end])
}

fn fence_body(sec: &str) -> Option<String> {
    let start = sec.find("```c\n")? + 5;
    let rest = &sec[start..];
    let end = rest.find("\n```")?;
    Some(rest[..end].to_string())
}

fn parse_element(line: &str) -> Option<ElementItem> {
    let body = line.strip_prefix("- ")?;
    let (symbol, rest) = body.split_once(" (")?;
    let rest = rest.strip_suffix(')')?;
    let (place, bounds_of) = match rest.split_once("; stores the bounds of ") {
        Some((p, b)) => (p, Some(b.to_string())),
        None => (rest, None),
    };
    let line_no = |s: &str| -> Option<usize> {
        let after = s.split("declared at line ").nth(1)?;
        after.split_whitespace().next()?.parse().ok()
    };
    let origin = if place.starts_with("declared at line") {
        ElementOrigin::Own
    } else if place.starts_with("global variable") {
        ElementOrigin::Global
    } else {
        let s = place.strip_prefix("field of struct ")?;
        ElementOrigin::Field(s.split(',').next()?.to_string())
    };
    Some(ElementItem {
        symbol: symbol.to_string(),
        line: line_no(place)?,
        origin,
        bounds_of,
    })
}

impl PromptSections {
    pub fn parse(text: &str) -> Option<PromptSections> {
        let task_text = section(text, SECTION_TASK)?;
        let task = TaskId::ALL
            .into_iter()
            .find(|t| task_text.trim_end() == t.spec().description);
        let prelude = section(text, SECTION_PRELUDE)
            .and_then(fence_body)
            .unwrap_or_default();
        let code = fence_body(section(text, SECTION_CODE)?)?;
        let elements = section(text, SECTION_ELEMENTS)?
            .lines()
            .filter_map(parse_element)
            .collect();
        Some(PromptSections {
            task,
            prelude,
            code,
            elements,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::source::{DeclId, DeclKind};

    fn element(sym: &str, line: usize) -> ElementItem {
        ElementItem {
            symbol: sym.into(),
            line,
            origin: ElementOrigin::Own,
            bounds_of: None,
        }
    }

    fn render(
        task: TaskId,
        prelude: &[PreludeEntry],
        history: &[RefactorHistoryEntry],
        el: &[ElementItem],
    ) -> String {
        render_prompt(
            &task.spec(),
            prelude,
            "int f(int *p) {\n  return p[0];\n}",
            history,
            &TaskElements { items: el.to_vec() },
            DEFAULT_TOKEN_BUDGET,
        )
        .unwrap()
        .rendered
    }

    #[test]
    fn empty_sections_show_none_marker() {
        let s = render(TaskId::BoundsInference, &[], &[], &[element("p", 1)]);
        let prelude = section(&s, SECTION_PRELUDE).unwrap();
        let history = section(&s, SECTION_HISTORY).unwrap();
        assert!(prelude.contains(NONE_MARKER));
        assert!(history.contains(NONE_MARKER));
        let elements = section(&s, SECTION_ELEMENTS).unwrap();
        assert_eq!(elements.lines().filter(|l| l.starts_with("- ")).count(), 1);
    }

    #[test]
    fn sections_in_fixed_order() {
        let s = render(TaskId::NestedArrays, &[], &[], &[]);
        let markers = [
            "Checked C has three checked pointer types",
            SECTION_TASK,
            SECTION_INSTRUCTION,
            SECTION_FORMAT,
            SECTION_EXAMPLE,
            SECTION_PRELUDE,
            SECTION_CODE,
            SECTION_HISTORY,
            SECTION_ELEMENTS,
        ];
        let positions: Vec<usize> = markers.iter().map(|m| s.find(m).unwrap()).collect();
        assert!(positions.windows(2).all(|w| w[0] < w[1]));
        assert!(s.contains("arr<arr<int>> a"));
    }

    #[test]
    fn rendering_is_pure_and_parses_back() {
        let prelude = vec![PreludeEntry {
            id: DeclId("proc:g".into()),
            kind: DeclKind::Procedure,
            name: "g".into(),
            text: "int g(arr<int> q : count(n), int n);".into(),
        }];
        let els = vec![
            element("p", 1),
            ElementItem {
                symbol: "count_for_items".into(),
                line: 2,
                origin: ElementOrigin::Field("s".into()),
                bounds_of: Some("items".into()),
            },
        ];
        let a = render(TaskId::BoundsInference, &prelude, &[], &els);
        let b = render(TaskId::BoundsInference, &prelude, &[], &els);
        assert_eq!(a, b);
        let parsed = PromptSections::parse(&a).unwrap();
        assert_eq!(parsed.task, Some(TaskId::BoundsInference));
        assert_eq!(parsed.code, "int f(int *p) {\n  return p[0];\n}");
        assert_eq!(parsed.prelude, "int g(arr<int> q : count(n), int n);");
        assert_eq!(parsed.elements, els);
    }

    #[test]
    fn history_is_capped_most_recent_first() {
        let history: Vec<RefactorHistoryEntry> = (1..=23)
            .map(|i| RefactorHistoryEntry {
                decl_name: format!("f{i}"),
                old_code: "a".into(),
                new_code: "b".into(),
                sequence: i,
            })
            .collect();
        let s = render(TaskId::BoundsInference, &[], &history, &[]);
        assert!(s.find("Change 23 to f23").unwrap() < s.find("Change 22 to f22").unwrap());
        assert!(!s.contains("Change 3 to f3:"));
        assert!(s.contains("(3 older changes omitted)"));
    }

    #[test]
    fn budget_is_enforced() {
        let r = render_prompt(
            &TaskId::BoundsInference.spec(),
            &[],
            "int x;",
            &[],
            &TaskElements::default(),
            100,
        );
        assert!(matches!(r, Err(PromptError::TooLarge { budget: 100, .. })));
    }
}
