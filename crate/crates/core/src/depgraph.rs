//! Dependency graph over declarations and the bottom-up processing order.
//!
//! An edge `a → b` means `a` uses `b`: procedures depend on anything they
//! mention, types and globals only on types and macros, macros on nothing.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::source::{scan_references, DeclId, DeclKind, Declaration};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeInfo {
    pub id: DeclId,
    pub kind: DeclKind,
    pub name: String,
    pub file: String,
    pub start_line: usize,
    pub end_line: usize,
}

impl NodeInfo {
    fn key(&self) -> (DeclKind, &str, &DeclId) {
        (self.kind, &self.name, &self.id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub from: DeclId,
    pub to: DeclId,
}

/// Graph plus its cycle-free processing order. Immutable once built.
#[derive(Debug, Clone)]
pub struct DependencyGraph {
    /// Sorted by (kind, name, id).
    pub nodes: Vec<NodeInfo>,
    /// Edges kept after cycle breaking.
    pub edges: BTreeSet<(DeclId, DeclId)>,
    /// Edges removed to make the graph acyclic.
    pub broken_edges: BTreeSet<(DeclId, DeclId)>,
    order: Vec<DeclId>,
    index: BTreeMap<DeclId, usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BottomUpOrder {
    pub sequence: Vec<DeclId>,
}

fn edge_allowed(from: DeclKind, to: DeclKind) -> bool {
    match from {
        DeclKind::Procedure => true,
        DeclKind::TypeDecl | DeclKind::Global => {
            matches!(to, DeclKind::TypeDecl | DeclKind::Macro)
        }
        DeclKind::Macro => false,
    }
}

/// Builds the graph from linked declarations.
pub fn build_graph(decls: &[Declaration]) -> DependencyGraph {
    let mut by_name: BTreeMap<&str, Vec<&Declaration>> = BTreeMap::new();
    for d in decls {
        for n in d.names() {
            by_name.entry(n).or_default().push(d);
        }
    }
    let universe: BTreeSet<String> = by_name.keys().map(|s| s.to_string()).collect();
    let mut edges = BTreeSet::new();
    for d in decls {
        for name in scan_references(d, &universe) {
            for t in &by_name[name.as_str()] {
                if t.id != d.id && edge_allowed(d.kind, t.kind) {
                    edges.insert((d.id.clone(), t.id.clone()));
                }
            }
        }
    }
    let nodes = decls
        .iter()
        .map(|d| NodeInfo {
            id: d.id.clone(),
            kind: d.kind,
            name: d.name.clone(),
            file: d.span.path.to_string_lossy().into_owned(),
            start_line: d.span.start_line,
            end_line: d.span.end_line,
        })
        .collect();
    DependencyGraph::from_parts(nodes, edges)
}

impl DependencyGraph {
    /// Builds a graph from explicit nodes and edges. Self-edges and edges
    /// with unknown endpoints are dropped.
    pub fn from_parts(mut nodes: Vec<NodeInfo>, edges: BTreeSet<(DeclId, DeclId)>) -> Self {
        nodes.sort_by(|a, b| a.key().cmp(&b.key()));
        nodes.dedup_by(|a, b| a.id == b.id);
        let index: BTreeMap<DeclId, usize> = nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.id.clone(), i))
            .collect();
        let mut edges: BTreeSet<(DeclId, DeclId)> = edges
            .into_iter()
            .filter(|(a, b)| a != b && index.contains_key(a) && index.contains_key(b))
            .collect();
        let (order, broken) = dfs_order(&nodes, &index, &edges);
        for e in &broken {
            edges.remove(e);
        }
        DependencyGraph {
            nodes,
            edges,
            broken_edges: broken,
            order,
            index,
        }
    }

    pub fn node(&self, id: &DeclId) -> Option<&NodeInfo> {
        self.index.get(id).map(|&i| &self.nodes[i])
    }

    pub fn contains(&self, id: &DeclId) -> bool {
        self.index.contains_key(id)
    }

    /// Immediate successors (including those across a broken edge), in
    /// (kind, name) order.
    pub fn successors(&self, id: &DeclId) -> Vec<DeclId> {
        let mut out: Vec<usize> = self
            .edges
            .iter()
            .chain(&self.broken_edges)
            .filter(|(a, _)| a == id)
            .map(|(_, b)| self.index[b])
            .collect();
        out.sort_unstable();
        out.dedup();
        out.into_iter().map(|i| self.nodes[i].id.clone()).collect()
    }

    /// Immediate predecessors (users of `id`), in (kind, name) order.
    pub fn predecessors(&self, id: &DeclId) -> Vec<DeclId> {
        let mut out: Vec<usize> = self
            .edges
            .iter()
            .chain(&self.broken_edges)
            .filter(|(_, b)| b == id)
            .map(|(a, _)| self.index[a])
            .collect();
        out.sort_unstable();
        out.dedup();
        out.into_iter().map(|i| self.nodes[i].id.clone()).collect()
    }

    pub fn dump(&self) -> GraphDump {
        let pairs = |s: &BTreeSet<(DeclId, DeclId)>| {
            s.iter()
                .map(|(a, b)| Edge {
                    from: a.clone(),
                    to: b.clone(),
                })
                .collect()
        };
        GraphDump {
            nodes: self.nodes.clone(),
            edges: pairs(&self.edges),
            broken: pairs(&self.broken_edges),
            order: self.order.clone(),
        }
    }
}

/// Depth-first post-order, visiting roots and successors in node order.
/// Every edge to a node still on the stack closes a cycle and is broken.
fn dfs_order(
    nodes: &[NodeInfo],
    index: &BTreeMap<DeclId, usize>,
    edges: &BTreeSet<(DeclId, DeclId)>,
) -> (Vec<DeclId>, BTreeSet<(DeclId, DeclId)>) {
    let n = nodes.len();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (a, b) in edges {
        adj[index[a]].push(index[b]);
    }
    for a in &mut adj {
        a.sort_unstable();
    }
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Active,
        Done,
    }
    let mut mark = vec![Mark::New; n];
    let mut order = Vec::with_capacity(n);
    let mut broken = BTreeSet::new();
    for root in 0..n {
        if mark[root] != Mark::New {
            continue;
        }
        // Explicit stack of (node, next successor position).
        let mut stack = vec![(root, 0usize)];
        mark[root] = Mark::Active;
        while let Some(&mut (v, ref mut pos)) = stack.last_mut() {
            if let Some(&w) = adj[v].get(*pos) {
                *pos += 1;
                match mark[w] {
                    Mark::New => {
                        mark[w] = Mark::Active;
                        stack.push((w, 0));
                    }
                    Mark::Active => {
                        broken.insert((nodes[v].id.clone(), nodes[w].id.clone()));
                    }
                    Mark::Done => {}
                }
            } else {
                mark[v] = Mark::Done;
                order.push(nodes[v].id.clone());
                stack.pop();
            }
        }
    }
    (order, broken)
}

/// Processing order: every kept edge's target precedes its source.
pub fn bottom_up_order(g: &DependencyGraph) -> BottomUpOrder {
    BottomUpOrder {
        sequence: g.order.clone(),
    }
}

/// A successor's text as shown for context when porting a declaration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PreludeEntry {
    pub id: DeclId,
    pub kind: DeclKind,
    pub name: String,
    pub text: String,
}

/// The declaration-level prototype of a procedure.
pub fn signature_of(d: &Declaration) -> String {
    if d.has_body() {
        format!("{};", d.meta.signature_text.trim_end())
    } else {
        d.code.clone()
    }
}

/// Immediate successors of `d`: full text for types, globals and macros,
/// signatures only for procedures.
pub fn prelude_of(
    d: &Declaration,
    g: &DependencyGraph,
    decls: &[Declaration],
) -> Vec<PreludeEntry> {
    let by_id: BTreeMap<&DeclId, &Declaration> = decls.iter().map(|d| (&d.id, d)).collect();
    g.successors(&d.id)
        .into_iter()
        .filter_map(|id| by_id.get(&id).copied())
        .map(|s| PreludeEntry {
            id: s.id.clone(),
            kind: s.kind,
            name: s.name.clone(),
            text: if s.kind == DeclKind::Procedure {
                signature_of(s)
            } else {
                s.code.clone()
            },
        })
        .collect()
}

/// Serialized form of a graph (the `graph` command's output).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphDump {
    pub nodes: Vec<NodeInfo>,
    pub edges: Vec<Edge>,
    pub broken: Vec<Edge>,
    pub order: Vec<DeclId>,
}

impl GraphDump {
    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("graph dump serializes");
        s.push('\n');
        s
    }
}
