//! The aggregated call graph: a directed graph over method names.
//!
//! Every definition with the same name maps to one node, so an edge
//! `(caller, callee)` means "some definition named `caller` invokes the name
//! `callee`". Adjacency is stored in both directions because the training
//! gradient of a node needs its callers, not only its callees.

use std::collections::{BTreeSet, HashMap};
use std::io::{BufRead, Write};
use std::path::Path;

use crate::corpus::{is_identifier, MethodRecord};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AggregatedCallGraph {
    /// Node names in lexicographic order; node ids index into this.
    names: Vec<String>,
    index: HashMap<String, u32>,
    /// Out-neighbors (callees) per node, ascending.
    out_edges: Vec<Vec<u32>>,
    /// In-neighbors (callers) per node, ascending.
    in_edges: Vec<Vec<u32>>,
    edge_count: usize,
}

impl AggregatedCallGraph {
    pub fn node_count(&self) -> usize {
        self.names.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Node names in canonical (lexicographic) order.
    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, id: u32) -> &str {
        &self.names[id as usize]
    }

    pub fn node_id(&self, name: &str) -> Option<u32> {
        self.index.get(name).copied()
    }

    pub fn callee_ids(&self, id: u32) -> &[u32] {
        &self.out_edges[id as usize]
    }

    pub fn caller_ids(&self, id: u32) -> &[u32] {
        &self.in_edges[id as usize]
    }

    /// Sorted callee names of `name`; empty for leaves.
    pub fn callees(&self, name: &str) -> Result<Vec<&str>> {
        let id = self
            .node_id(name)
            .ok_or_else(|| Error::UnknownNode(name.to_string()))?;
        Ok(self.callee_ids(id).iter().map(|&c| self.name(c)).collect())
    }

    /// Sorted caller names of `name`.
    pub fn callers(&self, name: &str) -> Result<Vec<&str>> {
        let id = self
            .node_id(name)
            .ok_or_else(|| Error::UnknownNode(name.to_string()))?;
        Ok(self.caller_ids(id).iter().map(|&c| self.name(c)).collect())
    }
}

/// Build the graph from extracted records. Records sharing a name merge into
/// one node; duplicate edges collapse. The result is independent of record
/// order.
pub fn build_acg(records: &[MethodRecord]) -> AggregatedCallGraph {
    let mut names: BTreeSet<&str> = BTreeSet::new();
    for record in records {
        names.insert(&record.name);
        for callee in &record.callees {
            names.insert(callee);
        }
    }
    let names: Vec<String> = names.into_iter().map(str::to_string).collect();
    let index: HashMap<String, u32> = names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.clone(), i as u32))
        .collect();

    let mut edges: BTreeSet<(u32, u32)> = BTreeSet::new();
    for record in records {
        let caller = index[&record.name];
        for callee in &record.callees {
            edges.insert((caller, index[callee]));
        }
    }

    let mut out_edges = vec![Vec::new(); names.len()];
    let mut in_edges = vec![Vec::new(); names.len()];
    for &(caller, callee) in &edges {
        out_edges[caller as usize].push(callee);
        in_edges[callee as usize].push(caller);
    }
    for callers in &mut in_edges {
        callers.sort_unstable();
    }

    AggregatedCallGraph {
        names,
        index,
        out_edges,
        in_edges,
        edge_count: edges.len(),
    }
}

/// Write the graph: a `#nodes N #edges E` header, one `caller<TAB>callee`
/// line per edge in sorted order, then `#leaf <name>` lines for nodes that
/// appear in no edge.
pub fn save<W: Write>(graph: &AggregatedCallGraph, mut out: W) -> Result<()> {
    let io_err = |e| Error::io("<graph>", e);
    writeln!(out, "#nodes {} #edges {}", graph.node_count(), graph.edge_count()).map_err(io_err)?;
    for caller in 0..graph.node_count() as u32 {
        for &callee in graph.callee_ids(caller) {
            writeln!(out, "{}\t{}", graph.name(caller), graph.name(callee)).map_err(io_err)?;
        }
    }
    for id in 0..graph.node_count() as u32 {
        if graph.callee_ids(id).is_empty() && graph.caller_ids(id).is_empty() {
            writeln!(out, "#leaf {}", graph.name(id)).map_err(io_err)?;
        }
    }
    Ok(())
}

/// Read a graph file written by [`save`]. Errors name the offending line.
pub fn load<R: BufRead>(reader: R, origin: &Path) -> Result<AggregatedCallGraph> {
    let fail = |line: usize, msg: String| Error::format(origin, line, msg);
    let mut lines = reader.lines().enumerate();

    let (_, header) = lines
        .next()
        .ok_or_else(|| fail(1, "empty graph file".into()))?;
    let header = header.map_err(|e| Error::io(origin, e))?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    let (declared_nodes, declared_edges) = match parts.as_slice() {
        ["#nodes", n, "#edges", e] => {
            let n: usize = n.parse().map_err(|_| fail(1, format!("bad node count {n:?}")))?;
            let e: usize = e.parse().map_err(|_| fail(1, format!("bad edge count {e:?}")))?;
            (n, e)
        }
        _ => return Err(fail(1, format!("expected '#nodes N #edges E', got {header:?}"))),
    };

    let mut records: Vec<MethodRecord> = Vec::new();
    let mut leaves: Vec<String> = Vec::new();
    let mut edge_lines = 0usize;
    let mut seen_leaf = false;
    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(origin, e))?;
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix("#leaf ") {
            if !is_identifier(name) {
                return Err(fail(lineno, format!("bad leaf name {name:?}")));
            }
            leaves.push(name.to_string());
            seen_leaf = true;
            continue;
        }
        if seen_leaf {
            return Err(fail(lineno, "edge line after leaf section".into()));
        }
        let Some((caller, callee)) = line.split_once('\t') else {
            return Err(fail(lineno, format!("expected 'caller<TAB>callee', got {line:?}")));
        };
        if !is_identifier(caller) || !is_identifier(callee) {
            return Err(fail(lineno, format!("bad edge names {line:?}")));
        }
        edge_lines += 1;
        records.push(MethodRecord {
            name: caller.to_string(),
            package_name: String::new(),
            path: String::new(),
            callees: BTreeSet::from([callee.to_string()]),
        });
    }
    for leaf in leaves {
        records.push(MethodRecord {
            name: leaf,
            package_name: String::new(),
            path: String::new(),
            callees: BTreeSet::new(),
        });
    }

    let graph = build_acg(&records);
    if graph.edge_count() != edge_lines || edge_lines != declared_edges {
        return Err(fail(
            1,
            format!(
                "edge count mismatch: header {declared_edges}, {edge_lines} edge lines, {} distinct",
                graph.edge_count()
            ),
        ));
    }
    if graph.node_count() != declared_nodes {
        return Err(fail(
            1,
            format!("node count mismatch: header {declared_nodes}, found {}", graph.node_count()),
        ));
    }
    Ok(graph)
}
