use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::PathBuf;

use ccport_core::checkedc::Spelling;
use ccport_core::depgraph::{bottom_up_order, build_graph};
use ccport_core::eval::{caller_coverage, score, GroundTruth};
use ccport_core::gateway::http::{HttpBackend, HttpConfig};
use ccport_core::gateway::{
    salt_for, Backend, Gateway, MockBackend, ReplayBackend, ReplayStore, ScriptedBackend,
};
use ccport_core::orchestrator::{
    collect_inputs, read_manifest, run_pipeline, write_tree, PipelineConfig, PipelineOutput, RunLog,
};
use ccport_core::prompt::DEFAULT_TOKEN_BUDGET;
use ccport_core::source::Program;
use thiserror::Error;

use crate::config::{ConfigError, ConfigFile};
use crate::{EvalArgs, GraphArgs, InputArgs, PortArgs};

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, unreadable or unparseable inputs.
    #[error("{0}")]
    Input(String),
    /// Failures after the inputs were accepted.
    #[error("{0}")]
    Fatal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Fatal(_) => 1,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Input(e.to_string())
    }
}

fn load_config(a: &InputArgs) -> Result<ConfigFile, CliError> {
    Ok(match &a.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    })
}

fn load_program(a: &InputArgs, cfg: &ConfigFile) -> Result<Program, CliError> {
    let mut paths = cfg.paths(a.input.clone(), "input");
    if let Some(m) = cfg.path(a.manifest.clone(), "manifest") {
        paths.extend(read_manifest(&m).map_err(|e| CliError::Input(e.to_string()))?);
    }
    if paths.is_empty() {
        return Err(CliError::Input(
            "no inputs: pass --input or --manifest".into(),
        ));
    }
    let units = collect_inputs(&paths).map_err(|e| CliError::Input(e.to_string()))?;
    Program::from_units(&units).map_err(|e| CliError::Input(e.to_string()))
}

pub fn graph(a: GraphArgs) -> Result<(), CliError> {
    let cfg = load_config(&a.inputs)?;
    let program = load_program(&a.inputs, &cfg)?;
    let g = build_graph(&program.decls);
    let mut dump = g.dump();
    dump.order = bottom_up_order(&g).sequence;
    let json = dump.to_json();
    match cfg.path(a.out, "out") {
        Some(p) => std::fs::write(&p, json)
            .map_err(|e| CliError::Fatal(format!("{}: {e}", p.display())))?,
        None => print!("{json}"),
    }
    Ok(())
}

fn parse_passes(s: &str) -> Result<BTreeSet<u8>, CliError> {
    let mut set = BTreeSet::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.parse::<u8>() {
            Ok(p @ 1..=3) => {
                set.insert(p);
            }
            _ => {
                return Err(CliError::Input(format!(
                    "--passes: `{part}` is not 1, 2 or 3"
                )))
            }
        }
    }
    if set.is_empty() {
        return Err(CliError::Input(
            "--passes must name at least one pass".into(),
        ));
    }
    Ok(set)
}

fn parse_spelling(s: &str) -> Result<Spelling, CliError> {
    match s {
        "short" => Ok(Spelling::Short),
        "long" => Ok(Spelling::Long),
        other => Err(CliError::Input(format!(
            "--spelling: `{other}` is not short or long"
        ))),
    }
}

struct Settings {
    pipeline: PipelineConfig,
    out: PathBuf,
    log_dir: Option<PathBuf>,
    seed_label: Option<String>,
}

fn make_gateway(a: &PortArgs, cfg: &ConfigFile) -> Result<Gateway, CliError> {
    let backend = cfg
        .pick(a.backend.clone(), "backend")?
        .unwrap_or_else(|| "mock".into());
    let model = cfg.pick(a.model.clone(), "model")?;
    let temperature = cfg.pick(a.temperature, "temperature")?;
    // The model that answers; part of every replay key.
    let mut model_name = model.clone().unwrap_or_else(|| "gpt-4".into());
    let b: Box<dyn Backend> = match backend.as_str() {
        "mock" => Box::new(MockBackend),
        "replay" => {
            let dir = cfg
                .path(a.cache.clone(), "cache")
                .ok_or_else(|| CliError::Input("the replay backend needs --cache".into()))?;
            if !dir.is_dir() {
                log::warn!(
                    "replay store {} does not exist; every query will miss",
                    dir.display()
                );
            }
            Box::new(ReplayBackend::new(ReplayStore::at(dir)))
        }
        "scripted" => {
            let p = cfg
                .path(a.script.clone(), "script")
                .ok_or_else(|| CliError::Input("the scripted backend needs --script".into()))?;
            Box::new(ScriptedBackend::from_file(&p).map_err(|e| CliError::Input(e.to_string()))?)
        }
        "http" => {
            let mut h = HttpConfig::from_env();
            if let Some(e) = cfg.pick(a.endpoint.clone(), "endpoint")? {
                h.endpoint = e;
            }
            if h.endpoint.is_empty() {
                return Err(CliError::Input(
                    "the http backend needs --endpoint or CCPORT_ENDPOINT".into(),
                ));
            }
            if let Some(m) = &model {
                h.model = m.clone();
            }
            model_name = h.model.clone();
            h.temperature = temperature;
            Box::new(HttpBackend::new(h))
        }
        other => {
            return Err(CliError::Input(format!(
                "--backend: `{other}` is not mock, replay, http or scripted"
            )))
        }
    };
    let salt = salt_for(&model_name, temperature);
    let mut gw = Gateway::new(b, salt);
    if let Some(dir) = cfg.path(a.record.clone(), "record") {
        let store = ReplayStore::open(dir).map_err(|e| CliError::Fatal(e.to_string()))?;
        gw = gw.recording(store);
    }
    Ok(gw)
}

fn settings(a: &PortArgs, cfg: &ConfigFile) -> Result<Settings, CliError> {
    let completions = cfg.pick(a.completions, "completions")?.unwrap_or(10);
    if completions == 0 {
        return Err(CliError::Input("--completions must be at least 1".into()));
    }
    let passes = match cfg.pick(a.passes.clone(), "passes")? {
        Some(s) => parse_passes(&s)?,
        None => [1, 2, 3].into_iter().collect(),
    };
    let spelling = match cfg.pick(a.spelling.clone(), "spelling")? {
        Some(s) => parse_spelling(&s)?,
        None => Spelling::Short,
    };
    let out = cfg
        .path(a.out.clone(), "out")
        .ok_or_else(|| CliError::Input("port needs --out".into()))?;
    Ok(Settings {
        pipeline: PipelineConfig {
            completions,
            passes,
            budget_tokens: cfg
                .pick(a.budget, "budget")?
                .unwrap_or(DEFAULT_TOKEN_BUDGET),
            spelling,
        },
        out,
        log_dir: cfg.path(a.log_dir.clone(), "log-dir"),
        seed_label: cfg.pick(a.seed_label.clone(), "seed-label")?,
    })
}

/// The per-pass table printed after a run; contains no timestamps.
pub fn summary(out: &PipelineOutput, log: &RunLog) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<4} {:<14} {:<3} {:>7} {:>7} {:>5} {:>7} {:>8} {:>5} {:>7}",
        "pass",
        "task",
        "ran",
        "queries",
        "applied",
        "empty",
        "skipped",
        "rejected",
        "added",
        "dropped"
    );
    for r in &out.reports {
        let c = r.counts();
        let n = |k: &str| c.get(k).copied().unwrap_or(0);
        let _ = writeln!(
            s,
            "{:<4} {:<14} {:<3} {:>7} {:>7} {:>5} {:>7} {:>8} {:>5} {:>7}",
            r.pass,
            r.task,
            if r.ran { "yes" } else { "no" },
            r.queries,
            n("applied"),
            n("empty"),
            n("skipped"),
            n("rejected"),
            r.added.len(),
            r.dropped.len()
        );
    }
    for r in &out.reports {
        for i in &r.inserted {
            let _ = writeln!(s, "pass {}: inserted {i}", r.pass);
        }
        for d in &r.dropped {
            let _ = writeln!(
                s,
                "pass {}: dropped {} : {} in {} ({})",
                r.pass,
                d.symbol,
                d.bounds,
                d.decl,
                d.reason.as_deref().unwrap_or("")
            );
        }
    }
    for d in &out.final_drops {
        let _ = writeln!(
            s,
            "final check: dropped {} : {} in {} ({})",
            d.symbol,
            d.bounds,
            d.decl,
            d.reason.as_deref().unwrap_or("")
        );
    }
    let misses: usize = out.reports.iter().map(|r| r.replay_misses).sum();
    let failures: usize = out.reports.iter().map(|r| r.backend_failures).sum();
    let _ = writeln!(
        s,
        "warnings: {} (replay misses {misses}, backend failures {failures})",
        log.warnings.len()
    );
    s
}

pub fn port(a: PortArgs) -> Result<(), CliError> {
    let cfg = load_config(&a.inputs)?;
    let st = settings(&a, &cfg)?;
    let program = load_program(&a.inputs, &cfg)?;
    let mut gateway = make_gateway(&a, &cfg)?;
    let mut log = match &st.log_dir {
        Some(d) => {
            RunLog::to_dir(d).map_err(|e| CliError::Fatal(format!("{}: {e}", d.display())))?
        }
        None => RunLog::in_memory(),
    };
    if let Some(d) = &st.log_dir {
        let run = serde_json::json!({
            "backend": gateway.backend_tag(),
            "completions": st.pipeline.completions,
            "passes": st.pipeline.passes,
            "budget": st.pipeline.budget_tokens,
            "seed_label": st.seed_label,
        });
        let text = serde_json::to_string_pretty(&run).expect("run info serializes") + "\n";
        std::fs::write(d.join("run.json"), text).map_err(|e| CliError::Fatal(e.to_string()))?;
    }

    let out = run_pipeline(program, &mut gateway, &st.pipeline, &mut log);
    let files = out.render(st.pipeline.spelling);
    write_tree(&st.out, &files)
        .map_err(|e| CliError::Fatal(format!("{}: {e}", st.out.display())))?;
    print!("{}", summary(&out, &log));
    println!("wrote {} files to {}", files.len(), st.out.display());
    Ok(())
}

pub fn eval(a: EvalArgs) -> Result<(), CliError> {
    let cfg = load_config(&a.inputs)?;
    let output = load_program(&a.inputs, &cfg)?;
    let gt_path = cfg
        .path(a.gt, "gt")
        .ok_or_else(|| CliError::Input("eval needs --gt".into()))?;
    let text = std::fs::read_to_string(&gt_path)
        .map_err(|e| CliError::Input(format!("{}: {e}", gt_path.display())))?;
    let gt = GroundTruth::parse(&text)
        .map_err(|e| CliError::Input(format!("{}: {e}", gt_path.display())))?;
    let mut report = score(&output, &gt);
    let original = cfg.paths(a.original, "original");
    if !original.is_empty() {
        let units = collect_inputs(&original).map_err(|e| CliError::Input(e.to_string()))?;
        let before = Program::from_units(&units).map_err(|e| CliError::Input(e.to_string()))?;
        report.callers = Some(caller_coverage(&before, &output));
    }
    print!("{}", report.to_text());
    if let Some(p) = a.out {
        std::fs::write(&p, report.to_json())
            .map_err(|e| CliError::Fatal(format!("{}: {e}", p.display())))?;
    }
    Ok(())
}
