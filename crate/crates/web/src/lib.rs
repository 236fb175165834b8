//! Browser bindings: the dependency graph of a C file, a port driven by the
//! deterministic mock backend, and a majority vote over pasted completions.
//! Each operation is a plain function returning JSON so it can be tested
//! natively; the `wasm_bindgen` wrappers only convert errors.

use ccport_core::checkedc::Spelling;
use ccport_core::depgraph::{bottom_up_order, build_graph};
use ccport_core::gateway::{salt_for, Gateway, MockBackend};
use ccport_core::orchestrator::{run_pipeline, AnnotationEvent, PipelineConfig, RunLog};
use ccport_core::patch::majority_vote;
use ccport_core::source::{Program, SourceUnit};
use serde::Serialize;
use wasm_bindgen::prelude::*;

const FILE_NAME: &str = "input.c";

fn parse(source: &str) -> Result<Program, String> {
    Program::from_units(&[SourceUnit::new(FILE_NAME, source)]).map_err(|e| e.to_string())
}

/// Nodes, edges, broken edges and visit order of `source`, as JSON.
pub fn graph_json(source: &str) -> Result<String, String> {
    let program = parse(source)?;
    let g = build_graph(&program.decls);
    let mut dump = g.dump();
    dump.order = bottom_up_order(&g).sequence;
    Ok(dump.to_json())
}

#[derive(Debug, Serialize)]
struct PortView {
    code: String,
    queries: usize,
    added: Vec<AnnotationEvent>,
    dropped: Vec<AnnotationEvent>,
    inserted: Vec<String>,
}

/// Runs all passes over `source` with the mock backend; returns the ported
/// code and what changed, as JSON.
pub fn port_json(source: &str, completions: usize) -> Result<String, String> {
    let program = parse(source)?;
    let cfg = PipelineConfig {
        completions: completions.max(1),
        ..PipelineConfig::default()
    };
    let mut gateway = Gateway::new(Box::new(MockBackend), salt_for("gpt-4", None));
    let out = run_pipeline(program, &mut gateway, &cfg, &mut RunLog::in_memory());
    let code = out
        .render(Spelling::Short)
        .into_iter()
        .next()
        .map(|(_, text)| text)
        .unwrap_or_default();
    let view = PortView {
        code,
        queries: out.reports.iter().map(|r| r.queries).sum(),
        added: out.reports.iter().flat_map(|r| r.added.clone()).collect(),
        dropped: out
            .reports
            .iter()
            .flat_map(|r| r.dropped.clone())
            .chain(out.final_drops.clone())
            .collect(),
        inserted: out
            .reports
            .iter()
            .flat_map(|r| r.inserted.clone())
            .collect(),
    };
    Ok(serde_json::to_string_pretty(&view).expect("view serializes"))
}

/// Majority vote over completions given as a JSON array of strings.
pub fn vote_json(completions: &str) -> Result<String, String> {
    let list: Vec<String> = serde_json::from_str(completions)
        .map_err(|e| format!("expected a JSON array of strings: {e}"))?;
    let v = majority_vote(&list);
    #[derive(Serialize)]
    struct VoteView {
        winner: String,
        tally: std::collections::BTreeMap<String, usize>,
        total: usize,
        malformed: usize,
    }
    let view = VoteView {
        winner: v.winner.to_wire(),
        tally: v.tally,
        total: v.total,
        malformed: v.malformed,
    };
    Ok(serde_json::to_string_pretty(&view).expect("view serializes"))
}

#[wasm_bindgen]
pub fn dependency_graph(source: &str) -> Result<String, JsError> {
    graph_json(source).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn port_with_mock(source: &str, completions: usize) -> Result<String, JsError> {
    port_json(source, completions).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn vote(completions: &str) -> Result<String, JsError> {
    vote_json(completions).map_err(|e| JsError::new(&e))
}
