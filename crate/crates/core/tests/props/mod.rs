//! Seeded randomized property checks. Each check runs a fixed number of
//! cases and returns the number that held, or the first counterexample.
//! Shared by the per-area test files and the acceptance target.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use ccport_core::depgraph::{bottom_up_order, DependencyGraph, NodeInfo};
use ccport_core::patch::{
    apply_patch, majority_vote, parse_response, Patch, PatchBlock, PatchError,
};
use ccport_core::source::{DeclId, DeclKind};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type CheckResult = Result<usize, String>;

/// Guards against a generator drifting into trivial cases: at least a
/// quarter of the cases must exercise the named situation.
fn coverage(what: &str, hits: usize, cases: usize) -> Result<(), String> {
    if hits * 4 < cases {
        return Err(format!("only {hits} of {cases} cases were {what}"));
    }
    Ok(())
}

fn node(i: usize) -> NodeInfo {
    NodeInfo {
        id: DeclId(format!("proc:n{i:02}")),
        kind: DeclKind::Procedure,
        name: format!("n{i:02}"),
        file: "g.c".into(),
        start_line: i + 1,
        end_line: i + 1,
    }
}

/// Whether `to` is reachable from `from` over `edges`.
fn reachable(edges: &BTreeSet<(DeclId, DeclId)>, from: &DeclId, to: &DeclId) -> bool {
    let mut seen = BTreeSet::new();
    let mut stack = vec![from.clone()];
    while let Some(n) = stack.pop() {
        if &n == to {
            return true;
        }
        if !seen.insert(n.clone()) {
            continue;
        }
        for (a, b) in edges {
            if *a == n {
                stack.push(b.clone());
            }
        }
    }
    false
}

/// Random graphs of up to 30 nodes with cycles: every kept edge points to
/// an earlier node in the order, kept and broken edges partition the input,
/// and re-adding any broken edge closes a cycle through kept edges.
pub fn dependency_order(cases: usize, seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut with_cycles = 0;
    for case in 0..cases {
        let n = rng.gen_range(1..=30);
        let density = rng.gen_range(0.02..0.25);
        let nodes: Vec<NodeInfo> = (0..n).map(node).collect();
        let mut edges = BTreeSet::new();
        for a in 0..n {
            for b in 0..n {
                if a != b && rng.gen_bool(density) {
                    edges.insert((nodes[a].id.clone(), nodes[b].id.clone()));
                }
            }
        }
        let g = DependencyGraph::from_parts(nodes.clone(), edges.clone());
        let order = bottom_up_order(&g).sequence;
        let fail = |why: String| Err(format!("case {case} (n={n}, {} edges): {why}", edges.len()));

        let pos: BTreeMap<&DeclId, usize> = order.iter().enumerate().map(|(i, d)| (d, i)).collect();
        if order.len() != n || pos.len() != n {
            return fail(format!(
                "order has {} entries, {} distinct",
                order.len(),
                pos.len()
            ));
        }
        for (a, b) in &g.edges {
            if pos[b] >= pos[a] {
                return fail(format!("kept edge {} -> {} is not bottom-up", a.0, b.0));
            }
        }
        let union: BTreeSet<_> = g.edges.union(&g.broken_edges).cloned().collect();
        if union != edges || !g.edges.is_disjoint(&g.broken_edges) {
            return fail("kept and broken edges do not partition the input".into());
        }
        for (a, b) in &g.broken_edges {
            if !reachable(&g.edges, b, a) {
                return fail(format!("broken edge {} -> {} closes no cycle", a.0, b.0));
            }
        }
        with_cycles += usize::from(!g.broken_edges.is_empty());
    }
    coverage("graphs with cycles", with_cycles, cases)?;
    Ok(cases)
}

const VOCAB: &[&str] = &[
    "int x = 0;",
    "x++;",
    "return x;",
    "p[i] = 0;",
    "for (i = 0; i < n; i++)",
    "{",
    "}",
    "s += a[i];",
    "free(p);",
    "int *p = malloc(n * sizeof(int));",
];

fn random_block(rng: &mut ChaCha8Rng, k: usize) -> PatchBlock {
    let orig_len = rng.gen_range(1..=3);
    let original = (0..orig_len)
        .map(|_| VOCAB.choose(rng).unwrap().to_string())
        .collect();
    let refactored = (0..rng.gen_range(0..=2))
        .map(|j| format!("edit_{k}_{j}();"))
        .collect();
    PatchBlock {
        original,
        refactored,
    }
}

fn pad(rng: &mut ChaCha8Rng, line: &str) -> String {
    let lead = " ".repeat(rng.gen_range(0..3));
    let trail = if rng.gen_bool(0.2) { "  " } else { "" };
    format!("{lead}{line}{trail}")
}

/// The line range (in trimmed `code` lines) that an independent scan assigns
/// to each block, first fit without overlap; `None` if any block has no place.
fn oracle_regions(code_lines: &[String], p: &Patch) -> Option<Vec<(usize, usize)>> {
    let trimmed: Vec<&str> = code_lines.iter().map(|l| l.trim()).collect();
    let mut claimed: Vec<(usize, usize)> = Vec::new();
    for b in &p.blocks {
        let want: Vec<&str> = b.original.iter().map(|l| l.trim()).collect();
        let len = want.len();
        let at = (0..trimmed.len().saturating_sub(len - 1)).find(|&at| {
            trimmed[at..at + len] == want[..]
                && !claimed.iter().any(|&(s, e)| s < at + len && at < e)
        })?;
        claimed.push((at, at + len));
    }
    Some(claimed)
}

/// Fuzzed patches against fuzzed code: success exactly when every block has
/// a non-overlapping place; a failed apply leaves the code as it was; a
/// successful one changes it, keeps every untouched line in order and emits
/// every refactored line.
pub fn patch_atomicity(cases: usize, seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut applied = 0;
    for case in 0..cases {
        let n = rng.gen_range(1..=12);
        let lines: Vec<String> = (0..n)
            .map(|_| {
                let l = *VOCAB.choose(&mut rng).unwrap();
                pad(&mut rng, l)
            })
            .collect();
        let mut code = lines.join("\n");
        if rng.gen_bool(0.7) {
            code.push('\n');
        }
        let mut blocks = Vec::new();
        for k in 0..rng.gen_range(1..=3) {
            let mut b = random_block(&mut rng, k);
            if rng.gen_bool(0.6) {
                // Copy a real window, with different surrounding whitespace.
                let len = rng.gen_range(1..=n.min(3));
                let at = rng.gen_range(0..=n - len);
                b.original = lines[at..at + len]
                    .iter()
                    .map(|l| {
                        let t = l.trim().to_string();
                        pad(&mut rng, &t)
                    })
                    .collect();
            }
            blocks.push(b);
        }
        let patch = Patch { blocks };
        let fail = |why: String| {
            Err(format!(
                "case {case}: {why}\ncode:\n{code}\npatch:\n{}",
                patch.to_wire()
            ))
        };

        let expected = oracle_regions(&lines, &patch);
        let result = apply_patch(&patch, &code);
        let out = result.clone().unwrap_or_else(|_| code.clone());
        match (&expected, &result) {
            (None, Ok(_)) => return fail("applied although a block has no place".into()),
            (Some(_), Err(e)) => return fail(format!("rejected a placeable patch: {e}")),
            (None, Err(PatchError::MalformedBlock { .. })) => {
                return fail("structural error on a well-formed patch".into())
            }
            _ => {}
        }
        let changed = out != code;
        if changed != result.is_ok() {
            return fail(format!("changed={changed} but ok={}", result.is_ok()));
        }
        if let Some(regions) = expected {
            // Untouched lines survive in order.
            let mut inside = vec![false; n];
            for (s, e) in &regions {
                inside[*s..*e].iter_mut().for_each(|f| *f = true);
            }
            let mut rest = out.as_str();
            for (i, l) in lines.iter().enumerate().filter(|(i, _)| !inside[*i]) {
                match rest.find(l.as_str()) {
                    Some(at) => rest = &rest[at + l.len()..],
                    None => return fail(format!("untouched line {} lost or reordered", i + 1)),
                }
            }
            for b in &patch.blocks {
                for r in &b.refactored {
                    if !out.contains(r.as_str()) {
                        return fail(format!("refactored line `{r}` missing"));
                    }
                }
            }
        }
        applied += usize::from(result.is_ok());
    }
    coverage("applied", applied, cases)?;
    coverage("rejected", cases - applied, cases)?;
    Ok(cases)
}

fn candidate_pool(rng: &mut ChaCha8Rng) -> Vec<String> {
    let mut pool = vec![String::new(), "no change needed".to_string()];
    for k in 0..rng.gen_range(2..=4) {
        let blocks = (0..rng.gen_range(1..=2))
            .map(|j| random_block(rng, k * 10 + j))
            .collect();
        pool.push(format!("commentary\n{}", Patch { blocks }.to_wire()));
    }
    pool.push("<<<<ORIGINAL\nint x = 0;\n<<<<END\n".to_string());
    pool
}

/// Adds whitespace that normalization must ignore: indentation, inner runs
/// and trailing blanks on block lines (markers are left as they are).
fn reflow(rng: &mut ChaCha8Rng, completion: &str) -> String {
    completion
        .lines()
        .map(|l| {
            if l.starts_with("<<<<") || l.starts_with(">>>>") || l == "====" || !l.contains(' ') {
                l.to_string()
            } else {
                let spaced = l.replacen(' ', "   ", 1);
                pad(rng, &spaced)
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
        + "\n"
}

/// Independent winner: highest count, then fewer blocks, then fewer
/// refactored lines, then the smaller normalized wire text.
fn oracle_winner(completions: &[String]) -> Option<String> {
    let mut groups: BTreeMap<String, (usize, usize, usize)> = BTreeMap::new();
    for c in completions {
        if let Ok(p) = parse_response(c) {
            let e = groups.entry(p.normalized().to_wire()).or_insert((
                0,
                p.blocks.len(),
                p.refactored_line_count(),
            ));
            e.0 += 1;
        }
    }
    groups
        .into_iter()
        .min_by(|(ka, a), (kb, b)| {
            b.0.cmp(&a.0)
                .then(a.1.cmp(&b.1))
                .then(a.2.cmp(&b.2))
                .then(ka.cmp(kb))
        })
        .map(|(k, _)| k)
}

/// Vote results are invariant under shuffling, follow the documented
/// tie-break, and do not depend on whitespace inside block lines.
pub fn majority_vote_properties(cases: usize, seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tied = 0;
    for case in 0..cases {
        let pool = candidate_pool(&mut rng);
        let mut set: Vec<String> = Vec::new();
        // Ties are common: several candidates share the top count.
        let top = rng.gen_range(1..=4);
        for c in &pool {
            let k = if rng.gen_bool(0.5) {
                top
            } else {
                rng.gen_range(0..=top)
            };
            set.extend(std::iter::repeat_n(c.clone(), k));
        }
        let base = majority_vote(&set);
        let fail = |why: String| Err(format!("case {case}: {why}"));

        let mut shuffled = set.clone();
        shuffled.shuffle(&mut rng);
        if majority_vote(&shuffled) != base {
            return fail("result depends on completion order".into());
        }
        if majority_vote(&set) != base {
            return fail("repeated vote differs".into());
        }
        let want = oracle_winner(&set).unwrap_or_default();
        if base.winner.normalized().to_wire() != want {
            return fail(format!(
                "winner\n{}\nexpected\n{want}",
                base.winner.to_wire()
            ));
        }
        let reflowed: Vec<String> = set.iter().map(|c| reflow(&mut rng, c)).collect();
        let r = majority_vote(&reflowed);
        if r.tally != base.tally || r.winner.normalized() != base.winner.normalized() {
            return fail("whitespace changes altered the vote".into());
        }
        let best = base.tally.values().max().copied().unwrap_or(0);
        tied += usize::from(base.tally.values().filter(|&&c| c == best).count() > 1);
    }
    coverage("ties at the top", tied, cases)?;
    Ok(cases)
}
