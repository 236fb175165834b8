//! Original/refactored block patches: parsing, application and voting.
//!
//! Wire format, one marker per line:
//!
//! ```text
//! <<<<ORIGINAL
//! lines copied from the code
//! ====
//! >>>>REFACTORED
//! replacement lines
//! <<<<END
//! ```
//!
//! Text outside blocks is ignored. Either of `====` and `>>>>REFACTORED`
//! may be omitted, but not both.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::ops::Range;

use serde::Serialize;
use thiserror::Error;

use crate::source::{DeclKind, Declaration};

pub const MARK_ORIGINAL: &str = "<<<<ORIGINAL";
pub const MARK_SEPARATOR: &str = "====";
pub const MARK_REFACTORED: &str = ">>>>REFACTORED";
pub const MARK_END: &str = "<<<<END";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PatchBlock {
    pub original: Vec<String>,
    pub refactored: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Patch {
    pub blocks: Vec<PatchBlock>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PatchError {
    #[error("malformed block at response line {line}: {reason}")]
    MalformedBlock { line: usize, reason: String },
    #[error("block {0} does not match the code")]
    NoMatch(usize),
    #[error("block {0} only matches code already claimed by an earlier block")]
    AmbiguousOverlap(usize),
}

impl Patch {
    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Serializes back into the wire format.
    pub fn to_wire(&self) -> String {
        let mut s = String::new();
        for b in &self.blocks {
            let _ = writeln!(s, "{MARK_ORIGINAL}");
            for l in &b.original {
                let _ = writeln!(s, "{l}");
            }
            let _ = writeln!(s, "{MARK_SEPARATOR}\n{MARK_REFACTORED}");
            for l in &b.refactored {
                let _ = writeln!(s, "{l}");
            }
            let _ = writeln!(s, "{MARK_END}");
        }
        s
    }

    /// Whitespace-insensitive form: lines trimmed, inner runs collapsed.
    pub fn normalized(&self) -> Patch {
        let norm = |ls: &[String]| ls.iter().map(|l| normalize_line(l)).collect();
        Patch {
            blocks: self
                .blocks
                .iter()
                .map(|b| PatchBlock {
                    original: norm(&b.original),
                    refactored: norm(&b.refactored),
                })
                .collect(),
        }
    }

    pub fn refactored_line_count(&self) -> usize {
        self.blocks.iter().map(|b| b.refactored.len()).sum()
    }
}

fn normalize_line(l: &str) -> String {
    l.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Extracts all blocks from a model response.
pub fn parse_response(text: &str) -> Result<Patch, PatchError> {
    enum State {
        Outside,
        Original(usize),
        Refactored { start: usize, saw_header: bool },
    }
    let mut state = State::Outside;
    let mut blocks = Vec::new();
    let mut original = Vec::new();
    let mut refactored = Vec::new();
    let malformed = |line: usize, reason: &str| PatchError::MalformedBlock {
        line: line + 1,
        reason: reason.to_string(),
    };
    for (i, raw) in text.lines().enumerate() {
        let t = raw.trim();
        match &mut state {
            State::Outside => {
                if t == MARK_ORIGINAL {
                    state = State::Original(i);
                    original.clear();
                    refactored.clear();
                }
            }
            State::Original(start) => match t {
                MARK_SEPARATOR | MARK_REFACTORED => {
                    if original.iter().all(|l: &String| l.trim().is_empty()) {
                        return Err(malformed(*start, "empty original part"));
                    }
                    state = State::Refactored {
                        start: *start,
                        saw_header: t == MARK_REFACTORED,
                    };
                }
                MARK_ORIGINAL => return Err(malformed(i, "block opened inside a block")),
                MARK_END => return Err(malformed(i, "block ends without a refactored part")),
                _ => original.push(raw.to_string()),
            },
            State::Refactored { saw_header, .. } => match t {
                MARK_REFACTORED if !*saw_header && refactored.is_empty() => *saw_header = true,
                MARK_END => {
                    blocks.push(PatchBlock {
                        original: std::mem::take(&mut original),
                        refactored: std::mem::take(&mut refactored),
                    });
                    state = State::Outside;
                }
                MARK_ORIGINAL | MARK_SEPARATOR | MARK_REFACTORED => {
                    return Err(malformed(i, "unexpected marker in refactored part"))
                }
                _ => refactored.push(raw.to_string()),
            },
        }
    }
    match state {
        State::Outside => Ok(Patch { blocks }),
        State::Original(start) | State::Refactored { start, .. } => {
            Err(malformed(start, "block is not terminated"))
        }
    }
}

struct Lines<'a> {
    /// Line contents including their terminator.
    raw: Vec<&'a str>,
}

impl<'a> Lines<'a> {
    fn new(code: &'a str) -> Self {
        Lines {
            raw: code.split_inclusive('\n').collect(),
        }
    }

    fn trimmed(&self, i: usize) -> &'a str {
        self.raw[i].trim()
    }

    fn matches_at(&self, at: usize, original: &[String]) -> bool {
        at + original.len() <= self.raw.len()
            && original
                .iter()
                .enumerate()
                .all(|(k, l)| self.trimmed(at + k) == l.trim())
    }
}

/// Line ranges (0-based, in the unpatched code) claimed by each block.
pub fn locate(p: &Patch, code: &str) -> Result<Vec<Range<usize>>, PatchError> {
    let lines = Lines::new(code);
    let mut claimed: Vec<Range<usize>> = Vec::new();
    for (k, b) in p.blocks.iter().enumerate() {
        let len = b.original.len();
        let mut overlapped = false;
        let mut found = None;
        for at in 0..lines.raw.len() {
            if !lines.matches_at(at, &b.original) {
                continue;
            }
            let r = at..at + len;
            if claimed.iter().any(|c| c.start < r.end && r.start < c.end) {
                overlapped = true;
                continue;
            }
            found = Some(r);
            break;
        }
        match found {
            Some(r) => claimed.push(r),
            None if overlapped => return Err(PatchError::AmbiguousOverlap(k)),
            None => return Err(PatchError::NoMatch(k)),
        }
    }
    Ok(claimed)
}

/// Applies all blocks or none. Text outside the matched lines is kept
/// byte-for-byte.
pub fn apply_patch(p: &Patch, code: &str) -> Result<String, PatchError> {
    let regions = locate(p, code)?;
    let lines = Lines::new(code);
    let mut order: Vec<usize> = (0..regions.len()).collect();
    order.sort_by_key(|&k| regions[k].start);
    let mut out = String::with_capacity(code.len());
    let mut pos = 0;
    for k in order {
        let r = &regions[k];
        for l in &lines.raw[pos..r.start] {
            out.push_str(l);
        }
        let last = lines.raw[r.end - 1];
        let eol = if last.ends_with("\r\n") {
            "\r\n"
        } else if last.ends_with('\n') {
            "\n"
        } else {
            ""
        };
        let first_eol = if lines.raw[r.start].ends_with("\r\n") {
            "\r\n"
        } else {
            "\n"
        };
        let repl = &p.blocks[k].refactored;
        for (j, l) in repl.iter().enumerate() {
            out.push_str(l);
            out.push_str(if j + 1 == repl.len() { eol } else { first_eol });
        }
        if repl.is_empty() && eol.is_empty() && out.ends_with('\n') {
            // Deleting the last line: drop the newline that preceded it.
            out.pop();
            if out.ends_with('\r') {
                out.pop();
            }
        }
        pos = r.end;
    }
    for l in &lines.raw[pos..] {
        out.push_str(l);
    }
    Ok(out)
}

/// Whether applying `p` to `d` changes its signature. Non-procedures count
/// any non-empty patch as a signature change.
pub fn signature_changed(p: &Patch, d: &Declaration) -> bool {
    if p.is_empty() {
        return false;
    }
    if d.kind != DeclKind::Procedure {
        return true;
    }
    let sig = &d.meta.signature_lines;
    match locate(p, &d.code) {
        Ok(regions) => regions
            .iter()
            .any(|r| r.start < sig.end && sig.start < r.end),
        Err(_) => false,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VoteResult {
    /// A representative of the winning group, with its original whitespace.
    pub winner: Patch,
    /// Normalized wire form of each candidate patch → number of votes.
    pub tally: BTreeMap<String, usize>,
    /// Number of parseable completions.
    pub total: usize,
    pub malformed: usize,
}

/// Majority vote over whole normalized patches; the empty patch is a
/// candidate. Ties go to fewer blocks, then fewer refactored lines, then
/// the smaller normalized text.
pub fn majority_vote(completions: &[String]) -> VoteResult {
    struct Group {
        count: usize,
        blocks: usize,
        lines: usize,
        representative: Patch,
        rep_wire: String,
    }
    let mut groups: BTreeMap<String, Group> = BTreeMap::new();
    let mut malformed = 0;
    for c in completions {
        let Ok(p) = parse_response(c) else {
            malformed += 1;
            continue;
        };
        let key = p.normalized().to_wire();
        let wire = p.to_wire();
        let g = groups.entry(key).or_insert_with(|| Group {
            count: 0,
            blocks: p.blocks.len(),
            lines: p.refactored_line_count(),
            representative: p.clone(),
            rep_wire: wire.clone(),
        });
        g.count += 1;
        if wire < g.rep_wire {
            g.representative = p;
            g.rep_wire = wire;
        }
    }
    let total = completions.len() - malformed;
    let winner = groups
        .iter()
        .min_by(|(ka, a), (kb, b)| {
            b.count
                .cmp(&a.count)
                .then(a.blocks.cmp(&b.blocks))
                .then(a.lines.cmp(&b.lines))
                .then(ka.cmp(kb))
        })
        .map(|(_, g)| g.representative.clone())
        .unwrap_or_default();
    VoteResult {
        winner,
        tally: groups.into_iter().map(|(k, g)| (k, g.count)).collect(),
        total,
        malformed,
    }
}
