//! The three refactoring passes over the dependency order, plus the
//! preparation and cleanup steps around them.

mod files;
mod log;
mod prepare;

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use serde::Serialize;

pub use files::{collect_inputs, read_manifest, write_tree};
pub use log::{QueryRecord, RunLog};
pub use prepare::{final_sweep, pass1_prepare, pass2_postprocess, pass3_prepare, Proposal};

use crate::checkedc::{
    classify_pointer_lite, classify_program, convert_spelling, extract_sites, strip_bounds,
    validate_scope, AnnotationSite, PointerKind, Scope, ScopeVerdict, SiteScope, Spelling,
};
use crate::depgraph::{bottom_up_order, build_graph, prelude_of, PreludeEntry};
use crate::gateway::{Gateway, GatewayError};
use crate::patch::{apply_patch, locate, majority_vote, signature_changed, Patch};
use crate::prompt::{
    elements_for, render_prompt, IntroducedVar, RefactorHistoryEntry, TaskId, DEFAULT_TOKEN_BUDGET,
};
use crate::source::{DeclId, DeclKind, Declaration, Program};

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Completions requested per query.
    pub completions: usize,
    /// Passes to run (1, 2, 3); the others are reported as not run.
    pub passes: BTreeSet<u8>,
    pub budget_tokens: usize,
    /// Checked pointer spelling of modified declarations in the output.
    pub spelling: Spelling,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            completions: 10,
            passes: [1, 2, 3].into_iter().collect(),
            budget_tokens: DEFAULT_TOKEN_BUDGET,
            spelling: Spelling::Short,
        }
    }
}

/// Per-pass bookkeeping of what has been refactored so far.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TransformState {
    /// Code before the first change in this pass.
    pub oldcode: BTreeMap<DeclId, String>,
    /// Declarations whose interface changed in this pass.
    pub refactored: BTreeSet<DeclId>,
    /// Order in which declarations were refactored.
    pub sequence: BTreeMap<DeclId, u64>,
    next_seq: u64,
}

impl TransformState {
    /// Records that `id` changed from `old`; the first recorded old code wins.
    pub fn mark(&mut self, id: &DeclId, old: &str) {
        self.oldcode
            .entry(id.clone())
            .or_insert_with(|| old.to_string());
        self.refactored.insert(id.clone());
        self.next_seq += 1;
        self.sequence.insert(id.clone(), self.next_seq);
    }

    fn history_entry(&self, d: &Declaration) -> Option<RefactorHistoryEntry> {
        if !self.refactored.contains(&d.id) {
            return None;
        }
        let old = self.oldcode.get(&d.id)?;
        (old != &d.code).then(|| RefactorHistoryEntry {
            decl_name: d.name.clone(),
            old_code: old.clone(),
            new_code: d.code.clone(),
            sequence: self.sequence.get(&d.id).copied().unwrap_or(0),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "outcome")]
pub enum Outcome {
    Applied {
        blocks: usize,
        signature_changed: bool,
    },
    /// The model proposed no change.
    Empty,
    Skipped {
        reason: String,
    },
    Rejected {
        reason: String,
    },
}

impl Outcome {
    pub fn label(&self) -> &'static str {
        match self {
            Outcome::Applied { .. } => "applied",
            Outcome::Empty => "empty",
            Outcome::Skipped { .. } => "skipped",
            Outcome::Rejected { .. } => "rejected",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DeclOutcome {
    pub decl: DeclId,
    #[serde(flatten)]
    pub outcome: Outcome,
}

/// An annotation that was added to or removed from the code.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AnnotationEvent {
    pub decl: DeclId,
    pub symbol: String,
    pub bounds: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PassReport {
    pub pass: u8,
    pub task: String,
    pub ran: bool,
    pub outcomes: Vec<DeclOutcome>,
    pub queries: usize,
    pub completions: usize,
    pub replay_misses: usize,
    pub backend_failures: usize,
    pub added: Vec<AnnotationEvent>,
    pub dropped: Vec<AnnotationEvent>,
    /// Declarations inserted by the preparation step.
    pub inserted: Vec<String>,
    pub notes: Vec<String>,
}

impl PassReport {
    fn new(task: TaskId, ran: bool) -> Self {
        PassReport {
            pass: task.pass(),
            task: task.tag().to_string(),
            ran,
            outcomes: Vec::new(),
            queries: 0,
            completions: 0,
            replay_misses: 0,
            backend_failures: 0,
            added: Vec::new(),
            dropped: Vec::new(),
            inserted: Vec::new(),
            notes: Vec::new(),
        }
    }

    /// Number of outcomes per label.
    pub fn counts(&self) -> BTreeMap<&'static str, usize> {
        let mut m = BTreeMap::new();
        for o in &self.outcomes {
            *m.entry(o.outcome.label()).or_insert(0) += 1;
        }
        m
    }
}

/// Inputs a pass needs beyond the program itself.
#[derive(Debug, Clone, Default)]
pub struct PassContext {
    /// Arrays of arrays found before the nested-array pass started.
    pub nested: Vec<AnnotationSite>,
    /// Structs inserted for nested arrays, by element type.
    pub array_structs: BTreeMap<String, DeclId>,
    /// Bounds variables inserted before the globals/fields pass.
    pub introduced: Vec<IntroducedVar>,
    /// Annotations proposed for globals and fields during the bounds pass.
    pub proposals: BTreeMap<(DeclId, String), Vec<Proposal>>,
    pub state: TransformState,
}

pub struct PipelineOutput {
    pub program: Program,
    /// Code of every declaration before porting.
    pub original: BTreeMap<DeclId, String>,
    /// One report per pass, 1 to 3, including passes that did not run.
    pub reports: Vec<PassReport>,
    /// Annotations removed by the final scope check.
    pub final_drops: Vec<AnnotationEvent>,
}

impl PipelineOutput {
    /// Declarations whose code differs from the input (including inserted ones).
    pub fn modified(&self) -> Vec<DeclId> {
        self.program
            .decls
            .iter()
            .filter(|d| self.original.get(&d.id) != Some(&d.code))
            .map(|d| d.id.clone())
            .collect()
    }

    /// Output files as `(relative path, text)`, with modified declarations
    /// in the requested spelling.
    pub fn render(&self, spelling: Spelling) -> Vec<(PathBuf, String)> {
        let mut program = self.program.clone();
        if spelling == Spelling::Long {
            for id in self.modified() {
                let d = program.get(&id).expect("modified decl exists");
                let code = convert_spelling(&d.code, Spelling::Long);
                if let Ok(nd) = d.reparse(&code) {
                    *program.get_mut(&id).expect("exists") = nd;
                }
            }
        }
        (0..program.units.len())
            .map(|i| (program.units[i].path.clone(), program.render_unit(i)))
            .collect()
    }
}

/// Runs the selected passes in order, then the final scope check.
pub fn run_pipeline(
    mut program: Program,
    gateway: &mut Gateway,
    cfg: &PipelineConfig,
    log: &mut RunLog,
) -> PipelineOutput {
    let original: BTreeMap<DeclId, String> = program
        .decls
        .iter()
        .map(|d| (d.id.clone(), d.code.clone()))
        .collect();
    let mut reports = Vec::new();
    for task in TaskId::ALL {
        if !cfg.passes.contains(&task.pass()) {
            let r = PassReport::new(task, false);
            log.report(&r);
            reports.push(r);
            continue;
        }
        let mut ctx = PassContext::default();
        let mut report = PassReport::new(task, true);
        match task {
            TaskId::NestedArrays => pass1_prepare(&mut program, cfg, &mut ctx, &mut report),
            TaskId::GlobalsFields => pass3_prepare(&mut program, cfg, &mut ctx, &mut report),
            TaskId::BoundsInference => {}
        }
        run_pass_with(task, &mut program, gateway, cfg, log, &mut ctx, &mut report);
        if task == TaskId::BoundsInference {
            pass2_postprocess(&mut program, &ctx, &mut report);
        }
        log.report(&report);
        reports.push(report);
    }
    let final_drops = final_sweep(&mut program, &original);
    PipelineOutput {
        program,
        original,
        reports,
        final_drops,
    }
}

/// Runs one pass without its preparation or cleanup step.
pub fn run_pass(
    task: TaskId,
    program: &mut Program,
    gateway: &mut Gateway,
    cfg: &PipelineConfig,
    log: &mut RunLog,
) -> PassReport {
    let mut ctx = PassContext::default();
    if task == TaskId::NestedArrays {
        ctx.nested = classify_program(&program.decls)
            .nested_arrays()
            .cloned()
            .collect();
    }
    let mut report = PassReport::new(task, true);
    run_pass_with(task, program, gateway, cfg, log, &mut ctx, &mut report);
    report
}

fn visits(task: TaskId, kind: DeclKind) -> bool {
    match task {
        TaskId::BoundsInference => kind == DeclKind::Procedure,
        _ => kind != DeclKind::Macro,
    }
}

type SiteKinds = BTreeMap<(DeclId, SiteScope, String), (PointerKind, Option<PointerKind>)>;

/// Sites a bounds query on `d` may list: its own (classified from its own
/// code) plus current global and field sites with program-wide kinds.
fn bounds_sites(d: &Declaration, program: &Program, kinds: &SiteKinds) -> Vec<AnnotationSite> {
    let mut sites = classify_pointer_lite(d);
    for other in &program.decls {
        if other.id == d.id || !matches!(other.kind, DeclKind::Global | DeclKind::TypeDecl) {
            continue;
        }
        for mut s in extract_sites(other) {
            if !s.checked {
                if let Some((k, e)) = kinds.get(&s.key()) {
                    s.kind = *k;
                    s.elem_kind = *e;
                }
            }
            sites.push(s);
        }
    }
    sites
}

fn run_pass_with(
    task: TaskId,
    program: &mut Program,
    gateway: &mut Gateway,
    cfg: &PipelineConfig,
    log: &mut RunLog,
    ctx: &mut PassContext,
    report: &mut PassReport,
) {
    let graph = build_graph(&program.decls);
    let order = bottom_up_order(&graph).sequence;
    let kinds: SiteKinds = if task == TaskId::BoundsInference {
        classify_program(&program.decls)
            .all()
            .map(|s| (s.key(), (s.kind, s.elem_kind)))
            .collect()
    } else {
        SiteKinds::new()
    };
    let spec = task.spec();

    for id in order {
        let Some(d) = program.get(&id).cloned() else {
            continue;
        };
        if !visits(task, d.kind) {
            continue;
        }
        let mut prelude = prelude_of(&d, &graph, &program.decls);
        let history: Vec<RefactorHistoryEntry> = graph
            .successors(&id)
            .iter()
            .filter_map(|s| program.get(s))
            .filter_map(|s| ctx.state.history_entry(s))
            .collect();
        let elements = match task {
            TaskId::NestedArrays => elements_for(task, &d, &ctx.nested, &[]),
            TaskId::BoundsInference => {
                elements_for(task, &d, &bounds_sites(&d, program, &kinds), &[])
            }
            TaskId::GlobalsFields => elements_for(task, &d, &[], &ctx.introduced),
        };
        if elements.is_empty() && (history.is_empty() || d.kind != DeclKind::Procedure) {
            report.outcomes.push(DeclOutcome {
                decl: id,
                outcome: Outcome::Skipped {
                    reason: "nothing to do".into(),
                },
            });
            continue;
        }
        if task == TaskId::NestedArrays {
            add_array_structs(&mut prelude, &d, ctx, program);
        }

        let prompt = match render_prompt(
            &spec,
            &prelude,
            &d.code,
            &history,
            &elements,
            cfg.budget_tokens,
        ) {
            Ok(p) => p,
            Err(e) => {
                report.outcomes.push(DeclOutcome {
                    decl: id,
                    outcome: Outcome::Skipped {
                        reason: e.to_string(),
                    },
                });
                continue;
            }
        };
        let seq = log.next_seq();
        log.prompt(seq, task.pass(), &d.name, &prompt.rendered);
        let mut record = QueryRecord {
            seq,
            pass: task.pass(),
            decl: id.to_string(),
            fingerprint: gateway.key(&prompt, cfg.completions),
            n: cfg.completions,
            backend: gateway.backend_tag().to_string(),
            tally: BTreeMap::new(),
            winner: String::new(),
            status: String::new(),
        };
        report.queries += 1;
        let set = match gateway.complete_n(&prompt, cfg.completions) {
            Ok(s) => s,
            Err(e) => {
                match e {
                    GatewayError::ReplayMiss(_) => report.replay_misses += 1,
                    _ => report.backend_failures += 1,
                }
                log.warn(format!("query for {} failed: {e}", d.name));
                record.status = format!("skipped: {e}");
                log.record(record);
                report.outcomes.push(DeclOutcome {
                    decl: id,
                    outcome: Outcome::Skipped {
                        reason: e.to_string(),
                    },
                });
                continue;
            }
        };
        report.completions += set.completions.len();
        let vote = majority_vote(&set.completions);
        record.tally = vote.tally.clone();
        record.winner = vote.winner.to_wire();

        let outcome = if vote.winner.is_empty() {
            Outcome::Empty
        } else {
            let targets: Vec<DeclId> = std::iter::once(id.clone())
                .chain(
                    prelude
                        .iter()
                        .filter(|p| matches!(p.kind, DeclKind::Global | DeclKind::TypeDecl))
                        .filter(|p| program.get(&p.id).is_some())
                        .map(|p| p.id.clone()),
                )
                .collect();
            match apply_winner(task, program, &d, &vote.winner, &targets, ctx, report) {
                Ok(o) => o,
                Err(reason) => Outcome::Rejected { reason },
            }
        };
        record.status = match &outcome {
            Outcome::Rejected { reason } => format!("rejected: {reason}"),
            o => o.label().to_string(),
        };
        log.record(record);
        report.outcomes.push(DeclOutcome { decl: id, outcome });
    }
}

/// Lists the array-of-arrays structs for the element types `d` deals with.
fn add_array_structs(
    prelude: &mut Vec<PreludeEntry>,
    d: &Declaration,
    ctx: &PassContext,
    program: &Program,
) {
    let mut types: Vec<&str> = ctx
        .nested
        .iter()
        .filter(|s| s.decl_id == d.id || d.meta.referenced_names.contains(&s.symbol))
        .map(|s| s.base_type.as_str())
        .collect();
    types.sort_unstable();
    types.dedup();
    for t in types {
        let Some(sid) = ctx.array_structs.get(t) else {
            continue;
        };
        if prelude.iter().any(|p| &p.id == sid) {
            continue;
        }
        if let Some(s) = program.get(sid) {
            prelude.push(PreludeEntry {
                id: s.id.clone(),
                kind: s.kind,
                name: s.name.clone(),
                text: s.code.clone(),
            });
        }
    }
}

/// Splits the winning patch over `d` and the types and globals it uses, then
/// applies every part or nothing.
fn apply_winner(
    task: TaskId,
    program: &mut Program,
    d: &Declaration,
    winner: &Patch,
    targets: &[DeclId],
    ctx: &mut PassContext,
    report: &mut PassReport,
) -> Result<Outcome, String> {
    let mut groups: BTreeMap<usize, Patch> = BTreeMap::new();
    for (k, block) in winner.blocks.iter().enumerate() {
        let single = Patch {
            blocks: vec![block.clone()],
        };
        let t = targets
            .iter()
            .position(|t| {
                program
                    .get(t)
                    .is_some_and(|td| locate(&single, &td.code).is_ok())
            })
            .ok_or_else(|| {
                format!(
                    "block {} matches no line of the code or its dependencies",
                    k + 1
                )
            })?;
        groups.entry(t).or_default().blocks.push(block.clone());
    }

    // Patch and reparse everything before committing anything.
    let mut staged: Vec<(Declaration, Declaration, Patch)> = Vec::new();
    for (t, patch) in groups {
        let old = program.get(&targets[t]).expect("target exists").clone();
        let code = apply_patch(&patch, &old.code).map_err(|e| format!("{}: {e}", old.name))?;
        let new = old
            .reparse(&code)
            .map_err(|e| format!("patched {} does not parse: {e}", old.name))?;
        staged.push((old, new, patch));
    }

    let mut sig_changed = false;
    for (old, new, patch) in staged {
        if old.code == new.code {
            continue;
        }
        let new = checked_annotations(task, &old, new, program, d, ctx, report);
        let interface = if old.id == d.id {
            let s = d.kind != DeclKind::Procedure || signature_changed(&patch, &old);
            sig_changed = s;
            s
        } else {
            true
        };
        if interface && new.code != old.code {
            ctx.state.mark(&old.id, &old.code);
        }
        *program.get_mut(&old.id).expect("target exists") = new;
    }
    Ok(Outcome::Applied {
        blocks: winner.blocks.len(),
        signature_changed: sig_changed,
    })
}

/// Validates the annotations a patch added or changed in `new`; invalid
/// ones are stripped. Global and field annotations made in the bounds pass
/// are recorded as proposals.
fn checked_annotations(
    task: TaskId,
    old: &Declaration,
    mut new: Declaration,
    program: &Program,
    by: &Declaration,
    ctx: &mut PassContext,
    report: &mut PassReport,
) -> Declaration {
    let scope = Scope::of_program(
        program
            .decls
            .iter()
            .filter(|x| x.id != new.id)
            .chain([&new]),
    );
    let before: BTreeMap<_, Option<String>> = extract_sites(old)
        .into_iter()
        .map(|s| (s.key(), s.bounds_text))
        .collect();
    let mut changed: Vec<AnnotationSite> = extract_sites(&new)
        .into_iter()
        .filter(|s| s.bounds_text.is_some() && before.get(&s.key()) != Some(&s.bounds_text))
        .collect();
    // Strip from the bottom so earlier lines keep their numbers.
    changed.sort_by_key(|s| std::cmp::Reverse(s.line));
    for s in changed {
        let text = s.bounds_text.clone().unwrap_or_default();
        let problem = if s.bounds.is_none() {
            Some(format!("cannot parse bounds `{text}`"))
        } else {
            match validate_scope(&s, &new.meta, &scope) {
                ScopeVerdict::Valid => None,
                ScopeVerdict::Rejected(ident) => Some(format!("`{ident}` is not in scope")),
            }
        };
        let event = AnnotationEvent {
            decl: new.id.clone(),
            symbol: s.symbol.clone(),
            bounds: text.clone(),
            reason: problem.clone(),
        };
        match problem {
            None => {
                if task == TaskId::BoundsInference
                    && matches!(s.scope, SiteScope::Global | SiteScope::Field)
                    && new.id != by.id
                {
                    ctx.proposals
                        .entry((new.id.clone(), s.symbol.clone()))
                        .or_default()
                        .push(Proposal {
                            by: by.id.clone(),
                            bounds: s.bounds.normalized(),
                        });
                }
                report.added.push(event);
            }
            Some(_) => {
                let stripped = strip_bounds(&new.code, &s.symbol, Some(s.line))
                    .and_then(|c| new.reparse(&c).ok());
                if let Some(nd) = stripped {
                    new = nd;
                }
                report.dropped.push(event);
            }
        }
    }
    new
}
