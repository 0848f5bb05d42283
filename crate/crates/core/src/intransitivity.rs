//! Dominance-graph construction and intransitivity statistics.
//!
//! The dominance graph has an edge from the majority winner to the majority
//! loser of every observed pair; tied pairs contribute no edge. On that
//! graph:
//!
//! - `is_intrans`: whether any directed cycle exists,
//! - `intrans_at_3`: directed 3-cycles as a fraction of the `2 * C(n, 3)`
//!   oriented triples of a fully observed dataset (the fixed denominator is
//!   used regardless of observation density),
//! - `players_in_triangles`: players appearing in at least one 3-cycle,
//! - `enumerate_cycles`: elementary cycles via Johnson's algorithm, capped
//!   because the cycle count can grow exponentially.

use std::collections::HashSet;

use serde::Serialize;

use crate::dataset::{Dataset, PlayerId};
use crate::error::{Error, Result};

/// Directed majority-outcome graph. No self-loops; at most one direction per
/// pair.
#[derive(Debug, Clone)]
pub struct DominanceGraph {
    n: usize,
    out_adj: Vec<Vec<u32>>,
    in_adj: Vec<Vec<u32>>,
    edge_set: HashSet<(u32, u32)>,
}

impl DominanceGraph {
    pub fn from_edges(n: usize, edges: &[(u32, u32)]) -> Result<Self> {
        let mut g = DominanceGraph {
            n,
            out_adj: vec![Vec::new(); n],
            in_adj: vec![Vec::new(); n],
            edge_set: HashSet::with_capacity(edges.len()),
        };
        for &(u, v) in edges {
            if u as usize >= n || v as usize >= n {
                return Err(Error::InvalidEdge(format!(
                    "({u}, {v}) out of range for {n} players"
                )));
            }
            if u == v {
                return Err(Error::InvalidEdge(format!("self-loop at {u}")));
            }
            if g.edge_set.contains(&(v, u)) {
                return Err(Error::InvalidEdge(format!(
                    "both directions present for pair ({u}, {v})"
                )));
            }
            if g.edge_set.insert((u, v)) {
                g.out_adj[u as usize].push(v);
                g.in_adj[v as usize].push(u);
            }
        }
        for adj in g.out_adj.iter_mut().chain(g.in_adj.iter_mut()) {
            adj.sort_unstable();
        }
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edge_set.len()
    }

    pub fn has_edge(&self, u: u32, v: u32) -> bool {
        self.edge_set.contains(&(u, v))
    }

    pub fn out(&self, u: u32) -> &[u32] {
        &self.out_adj[u as usize]
    }

    pub fn edges(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.out_adj
            .iter()
            .enumerate()
            .flat_map(|(u, vs)| vs.iter().map(move |&v| (u as u32, v)))
    }
}

/// Builds the dominance graph of a dataset: edge `a -> b` iff `n_a > n_b`.
pub fn build_dominance_graph(d: &Dataset) -> DominanceGraph {
    let edges: Vec<(u32, u32)> = d
        .records
        .iter()
        .filter_map(|r| {
            if r.wins_a > r.wins_b {
                Some((r.a.0, r.b.0))
            } else if r.wins_b > r.wins_a {
                Some((r.b.0, r.a.0))
            } else {
                None
            }
        })
        .collect();
    DominanceGraph::from_edges(d.num_players(), &edges)
        .expect("canonical dataset yields a valid dominance graph")
}

/// Strongly connected components (iterative Tarjan), restricted to the
/// vertices where `allowed` is true. Each component is sorted ascending.
fn strongly_connected_components(g: &DominanceGraph, allowed: &[bool]) -> Vec<Vec<u32>> {
    let n = g.n;
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<u32> = Vec::new();
    let mut next_index = 0usize;
    let mut components = Vec::new();

    // Explicit DFS stack of (vertex, next-neighbor position).
    let mut work: Vec<(u32, usize)> = Vec::new();
    for start in 0..n as u32 {
        if !allowed[start as usize] || index[start as usize] != usize::MAX {
            continue;
        }
        work.push((start, 0));
        index[start as usize] = next_index;
        low[start as usize] = next_index;
        next_index += 1;
        stack.push(start);
        on_stack[start as usize] = true;

        while let Some(&mut (v, ref mut pos)) = work.last_mut() {
            let neighbors = g.out(v);
            if *pos < neighbors.len() {
                let w = neighbors[*pos];
                *pos += 1;
                if !allowed[w as usize] {
                    continue;
                }
                if index[w as usize] == usize::MAX {
                    index[w as usize] = next_index;
                    low[w as usize] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w as usize] = true;
                    work.push((w, 0));
                } else if on_stack[w as usize] {
                    low[v as usize] = low[v as usize].min(index[w as usize]);
                }
            } else {
                work.pop();
                if let Some(&mut (parent, _)) = work.last_mut() {
                    low[parent as usize] = low[parent as usize].min(low[v as usize]);
                }
                if low[v as usize] == index[v as usize] {
                    let mut component = Vec::new();
                    loop {
                        let w = stack.pop().expect("tarjan stack underflow");
                        on_stack[w as usize] = false;
                        component.push(w);
                        if w == v {
                            break;
                        }
                    }
                    component.sort_unstable();
                    components.push(component);
                }
            }
        }
    }
    components
}

/// True iff the graph contains any directed cycle (some strongly connected
/// component has at least two vertices; self-loops cannot occur).
pub fn has_cycle(g: &DominanceGraph) -> bool {
    let allowed = vec![true; g.n];
    strongly_connected_components(g, &allowed)
        .iter()
        .any(|c| c.len() >= 2)
}

/// Counts directed 3-cycles and marks their members. Each triangle is seen
/// once per edge, so the edge-wise count is divided by 3.
fn triangle_scan(g: &DominanceGraph) -> (u64, Vec<bool>) {
    let mut count = 0u64;
    let mut member = vec![false; g.n];
    for (u, v) in g.edges() {
        for &w in g.out(v) {
            if g.has_edge(w, u) {
                count += 1;
                member[u as usize] = true;
                member[v as usize] = true;
                member[w as usize] = true;
            }
        }
    }
    (count / 3, member)
}

/// Directed 3-cycle count and its share of the `2 * C(n, 3)` oriented
/// triples possible in a fully observed dataset.
pub fn intrans_at_3(g: &DominanceGraph) -> (u64, f64) {
    let (triangles, _) = triangle_scan(g);
    let n = g.n as u64;
    if n < 3 {
        return (triangles, 0.0);
    }
    let denom = 2.0 * (n * (n - 1) * (n - 2) / 6) as f64;
    (triangles, triangles as f64 / denom)
}

/// Players that appear in at least one directed 3-cycle, ascending.
pub fn players_in_triangles(g: &DominanceGraph) -> Vec<PlayerId> {
    let (_, member) = triangle_scan(g);
    member
        .iter()
        .enumerate()
        .filter(|(_, &m)| m)
        .map(|(i, _)| PlayerId(i as u32))
        .collect()
}

struct CycleSearch<'g> {
    g: &'g DominanceGraph,
    allowed: Vec<bool>,
    root: u32,
    blocked: Vec<bool>,
    block_list: Vec<Vec<u32>>,
    path: Vec<u32>,
    cycles: Vec<Vec<u32>>,
    limit: usize,
}

impl CycleSearch<'_> {
    fn unblock(&mut self, v: u32) {
        let mut queue = vec![v];
        while let Some(v) = queue.pop() {
            if self.blocked[v as usize] {
                self.blocked[v as usize] = false;
                queue.append(&mut self.block_list[v as usize]);
            }
        }
    }

    /// Johnson's CIRCUIT: explores elementary paths from `v` back to the
    /// root. Returns true if a cycle was closed in this subtree. Aborts as
    /// soon as `limit` cycles were collected.
    fn circuit(&mut self, v: u32) -> bool {
        let mut found = false;
        self.path.push(v);
        self.blocked[v as usize] = true;
        for i in 0..self.g.out(v).len() {
            if self.cycles.len() >= self.limit {
                break;
            }
            let w = self.g.out(v)[i];
            if !self.allowed[w as usize] {
                continue;
            }
            if w == self.root {
                self.cycles.push(self.path.clone());
                found = true;
            } else if !self.blocked[w as usize] && self.circuit(w) {
                found = true;
            }
        }
        if found {
            self.unblock(v);
        } else {
            for i in 0..self.g.out(v).len() {
                let w = self.g.out(v)[i];
                if self.allowed[w as usize] && !self.block_list[w as usize].contains(&v) {
                    self.block_list[w as usize].push(v);
                }
            }
        }
        self.path.pop();
        found
    }
}

/// Enumerates up to `cap` elementary directed cycles (Johnson's algorithm).
///
/// Each cycle is a vertex sequence rotated so its smallest vertex leads; the
/// list is sorted for a stable output order. The `truncated` flag is set iff
/// more cycles exist beyond the cap.
pub fn enumerate_cycles(g: &DominanceGraph, cap: usize) -> (Vec<Vec<PlayerId>>, bool) {
    let limit = cap.saturating_add(1);
    let mut cycles: Vec<Vec<u32>> = Vec::new();

    let allowed_all = vec![true; g.n];
    let mut pending: Vec<Vec<u32>> = strongly_connected_components(g, &allowed_all)
        .into_iter()
        .filter(|c| c.len() >= 2)
        .collect();

    'outer: while let Some(component) = pending.pop() {
        // The component minimum roots the search, so every cycle found here
        // already starts at its smallest vertex.
        let root = component[0];
        let mut allowed = vec![false; g.n];
        for &v in &component {
            allowed[v as usize] = true;
        }
        let mut search = CycleSearch {
            g,
            allowed,
            root,
            blocked: vec![false; g.n],
            block_list: vec![Vec::new(); g.n],
            path: Vec::new(),
            cycles: std::mem::take(&mut cycles),
            limit,
        };
        search.circuit(root);
        cycles = search.cycles;
        if cycles.len() >= limit {
            break 'outer;
        }
        // Retire the root and split the remainder into sub-components.
        let mut rest = vec![false; g.n];
        for &v in &component {
            if v != root {
                rest[v as usize] = true;
            }
        }
        pending.extend(
            strongly_connected_components(g, &rest)
                .into_iter()
                .filter(|c| c.len() >= 2),
        );
    }

    let truncated = cycles.len() > cap;
    cycles.truncate(cap);
    cycles.sort();
    (
        cycles
            .into_iter()
            .map(|c| c.into_iter().map(PlayerId).collect())
            .collect(),
        truncated,
    )
}

/// Full intransitivity report for one dominance graph.
#[derive(Debug, Clone, Serialize)]
pub struct IntransReport {
    pub n_players: usize,
    pub is_intrans: bool,
    pub triangles: u64,
    pub intrans_at_3: f64,
    pub players_in_triangles: Vec<PlayerId>,
    pub cycles_found: Vec<Vec<PlayerId>>,
    pub truncated: bool,
}

/// The scalar columns of [`IntransReport`], without the cycle list.
#[derive(Debug, Clone, Serialize)]
pub struct IntransSummary {
    pub n_players: usize,
    pub is_intrans: bool,
    pub triangles: u64,
    pub intrans_at_3: f64,
    pub players_in_triangles: usize,
}

impl IntransReport {
    pub fn summary(&self) -> IntransSummary {
        IntransSummary {
            n_players: self.n_players,
            is_intrans: self.is_intrans,
            triangles: self.triangles,
            intrans_at_3: self.intrans_at_3,
            players_in_triangles: self.players_in_triangles.len(),
        }
    }
}

/// Composes the dominance-graph statistics for a dataset, enumerating at
/// most `cap` elementary cycles.
pub fn stats(d: &Dataset, cap: usize) -> IntransReport {
    let g = build_dominance_graph(d);
    let is_intrans = has_cycle(&g);
    let (triangles, ratio) = intrans_at_3(&g);
    let players = players_in_triangles(&g);
    let (cycles_found, truncated) = enumerate_cycles(&g, cap);
    IntransReport {
        n_players: g.n(),
        is_intrans,
        triangles,
        intrans_at_3: ratio,
        players_in_triangles: players,
        cycles_found,
        truncated,
    }
}

/// Summary-only statistics (skips cycle enumeration).
pub fn stats_summary(d: &Dataset) -> IntransSummary {
    let g = build_dominance_graph(d);
    let (triangles, ratio) = intrans_at_3(&g);
    IntransSummary {
        n_players: g.n(),
        is_intrans: has_cycle(&g),
        triangles,
        intrans_at_3: ratio,
        players_in_triangles: players_in_triangles(&g).len(),
    }
}
