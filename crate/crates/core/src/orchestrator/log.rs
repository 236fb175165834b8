use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use super::PassReport;

/// One model query: what was asked, how the completions voted and what
/// happened to the winner.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct QueryRecord {
    pub seq: usize,
    pub pass: u8,
    pub decl: String,
    /// Store key of the query.
    pub fingerprint: String,
    pub n: usize,
    pub backend: String,
    pub tally: BTreeMap<String, usize>,
    pub winner: String,
    pub status: String,
}

/// Collects query records and, with a directory, writes prompts, records
/// and pass reports to disk. Wall-clock time only ever appears here.
#[derive(Debug, Default)]
pub struct RunLog {
    dir: Option<PathBuf>,
    pub records: Vec<QueryRecord>,
    pub warnings: Vec<String>,
}

fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

fn safe_name(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '_' || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

impl RunLog {
    pub fn in_memory() -> Self {
        RunLog::default()
    }

    pub fn to_dir(dir: impl Into<PathBuf>) -> std::io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(dir.join("prompts"))?;
        // A fresh query log per run.
        fs::write(dir.join("queries.jsonl"), "")?;
        Ok(RunLog {
            dir: Some(dir),
            ..RunLog::default()
        })
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn next_seq(&self) -> usize {
        self.records.len() + 1
    }

    pub fn warn(&mut self, msg: impl Into<String>) {
        let msg = msg.into();
        log::warn!("{msg}");
        self.warnings.push(msg);
    }

    fn io_warn(&mut self, what: &str, e: std::io::Error) {
        self.warn(format!("cannot write {what} to the run log: {e}"));
    }

    pub fn prompt(&mut self, seq: usize, pass: u8, decl: &str, text: &str) {
        let Some(dir) = &self.dir else { return };
        let path = dir
            .join("prompts")
            .join(format!("{seq:04}-pass{pass}-{}.txt", safe_name(decl)));
        if let Err(e) = fs::write(path, text) {
            self.io_warn("a prompt", e);
        }
    }

    pub fn record(&mut self, r: QueryRecord) {
        if let Some(dir) = &self.dir {
            let mut v = serde_json::to_value(&r).expect("record serializes");
            v["time"] = serde_json::json!(now());
            let line = format!("{v}\n");
            let res = fs::OpenOptions::new()
                .append(true)
                .create(true)
                .open(dir.join("queries.jsonl"))
                .and_then(|mut f| f.write_all(line.as_bytes()));
            if let Err(e) = res {
                self.io_warn("a query record", e);
            }
        }
        self.records.push(r);
    }

    pub fn report(&mut self, report: &PassReport) {
        let Some(dir) = &self.dir else { return };
        let mut v = serde_json::to_value(report).expect("report serializes");
        v["time"] = serde_json::json!(now());
        let text = serde_json::to_string_pretty(&v).expect("report serializes") + "\n";
        if let Err(e) = fs::write(dir.join(format!("report-pass{}.json", report.pass)), text) {
            self.io_warn("a pass report", e);
        }
    }
}
