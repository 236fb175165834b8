//! Helpers for driving the `ccport` binary against the checked-in fixtures.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn golden(name: &str) -> PathBuf {
    fixtures().join("golden").join(name)
}

pub const GOLDEN: &[&str] = &[
    "alloc_assign",
    "byte_reverse",
    "bin_to_ascii",
    "lua_table",
    "scope_drop",
    "conflict",
];

pub fn ccport(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ccport"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("ccport runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

/// Ports a fixture directory (`input/`, `passes`, `store/`) under the replay
/// backend into `out`, optionally logging to `log_dir`.
pub fn port_replay(fixture: &Path, out: &Path, log_dir: Option<&Path>) -> Output {
    let passes = std::fs::read_to_string(fixture.join("passes")).expect("passes file");
    let input = fixture.join("input");
    let store = fixture.join("store");
    let mut args = vec![
        "port",
        "--input",
        s(&input),
        "--out",
        s(out),
        "--backend",
        "replay",
        "--cache",
        s(&store),
        "--passes",
        passes.trim(),
    ];
    if let Some(d) = log_dir {
        args.extend(["--log-dir", s(d)]);
    }
    ccport(&args)
}

/// Ports a fixture's `input/` with the mock backend.
pub fn port_mock(fixture: &Path, out: &Path) -> Output {
    let input = fixture.join("input");
    ccport(&[
        "port",
        "--input",
        s(&input),
        "--out",
        s(out),
        "--backend",
        "mock",
    ])
}

/// Relative path → contents of every file under `dir`.
pub fn read_tree(dir: &Path) -> BTreeMap<String, String> {
    walkdir::WalkDir::new(dir)
        .sort_by_file_name()
        .into_iter()
        .map(|e| e.expect("readable tree"))
        .filter(|e| e.file_type().is_file())
        .map(|e| {
            let rel = e
                .path()
                .strip_prefix(dir)
                .unwrap()
                .to_string_lossy()
                .replace('\\', "/");
            (rel, std::fs::read_to_string(e.path()).expect("utf-8 file"))
        })
        .collect()
}

pub fn tree_hash(dir: &Path) -> String {
    let mut h = Sha256::new();
    for (path, text) in read_tree(dir) {
        h.update(path.as_bytes());
        h.update([0]);
        h.update(text.as_bytes());
        h.update([0]);
    }
    hex::encode(h.finalize())
}

/// `None` when both trees hold the same files byte for byte, else a short
/// description of the first difference.
pub fn tree_diff(expected: &Path, actual: &Path) -> Option<String> {
    let want = read_tree(expected);
    let got = read_tree(actual);
    if want.keys().ne(got.keys()) {
        return Some(format!(
            "file sets differ: expected {:?}, got {:?}",
            want.keys().collect::<Vec<_>>(),
            got.keys().collect::<Vec<_>>()
        ));
    }
    for (path, w) in &want {
        let g = &got[path];
        if w != g {
            let line = w
                .lines()
                .zip(g.lines())
                .position(|(a, b)| a != b)
                .unwrap_or_else(|| w.lines().count().min(g.lines().count()));
            return Some(format!(
                "{path} differs at line {}: expected {:?}, got {:?}",
                line + 1,
                w.lines().nth(line).unwrap_or("<eof>"),
                g.lines().nth(line).unwrap_or("<eof>")
            ));
        }
    }
    None
}

/// (decl, winner, tally) of every query in a run log, in order.
pub fn query_tallies(log_dir: &Path) -> Vec<String> {
    std::fs::read_to_string(log_dir.join("queries.jsonl"))
        .expect("query log")
        .lines()
        .map(|l| {
            let v: serde_json::Value = serde_json::from_str(l).expect("json line");
            format!("{} {} {}", v["decl"], v["winner"], v["tally"])
        })
        .collect()
}
