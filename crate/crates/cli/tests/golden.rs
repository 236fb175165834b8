mod common;

use common::*;

fn replay_matches(name: &str) {
    let dir = tempfile::tempdir().unwrap();
    let fixture = golden(name);
    let o = port_replay(&fixture, dir.path(), None);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("replay misses 0,"), "{}", stdout(&o));
    if let Some(d) = tree_diff(&fixture.join("expected"), dir.path()) {
        panic!("{name}: {d}");
    }
}

#[test]
fn alloc_assign() {
    replay_matches("alloc_assign");
}

#[test]
fn byte_reverse() {
    replay_matches("byte_reverse");
}

#[test]
fn bin_to_ascii() {
    replay_matches("bin_to_ascii");
}

#[test]
fn lua_table() {
    replay_matches("lua_table");
}

#[test]
fn scope_drop() {
    replay_matches("scope_drop");
}

#[test]
fn conflict() {
    replay_matches("conflict");
}

/// The stores were recorded from the scripts; the scripted backend must
/// still produce the same trees.
#[test]
fn scripts_agree_with_stores() {
    for name in GOLDEN {
        let fixture = golden(name);
        let dir = tempfile::tempdir().unwrap();
        let passes = std::fs::read_to_string(fixture.join("passes")).unwrap();
        let o = ccport(&[
            "port",
            "--input",
            fixture.join("input").to_str().unwrap(),
            "--out",
            dir.path().to_str().unwrap(),
            "--backend",
            "scripted",
            "--script",
            fixture.join("script.json").to_str().unwrap(),
            "--passes",
            passes.trim(),
        ]);
        assert!(o.status.success(), "{name}: {}", stderr(&o));
        assert_eq!(
            tree_diff(&fixture.join("expected"), dir.path()),
            None,
            "{name}"
        );
    }
}

#[test]
fn a_missing_store_leaves_the_code_unchanged() {
    let fixture = golden("byte_reverse");
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = ccport(&[
        "port",
        "--input",
        fixture.join("input").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--backend",
        "replay",
        "--cache",
        dir.path().join("empty-store").to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(!stdout(&o).contains("replay misses 0,"), "{}", stdout(&o));
    assert_eq!(tree_diff(&fixture.join("input"), &out), None);
}
