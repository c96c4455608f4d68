//! Simple undirected graphs laid out for fast edge-swap chains.
//!
//! Every edge `e` owns two endpoint slots, `2e` and `2e + 1`. A slot names one
//! end of one edge; its twin is the other end. Each vertex keeps the list of
//! slots that sit on it, and each slot remembers its position in that list, so
//! moving the far end of an edge from one vertex to another is O(1).
//!
//! Swaps never change degrees, so the degree index (vertices grouped by degree)
//! is built once. The endpoint slots incident to degree-`d` vertices are the
//! `f(d) * d` slots reached through that group, which is what makes both
//! sampling primitives O(1).

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::Rng;
use rustc_hash::{FxHashMap, FxHashSet};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vertex = u32;

/// One end of one edge: `2 * edge + end`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Slot(u32);

impl Slot {
    pub fn new(edge: usize, end: usize) -> Self {
        debug_assert!(end < 2);
        Slot((edge * 2 + end) as u32)
    }

    pub fn edge(self) -> usize {
        (self.0 >> 1) as usize
    }

    pub fn end(self) -> usize {
        (self.0 & 1) as usize
    }

    /// The opposite end of the same edge.
    pub fn twin(self) -> Slot {
        Slot(self.0 ^ 1)
    }

    fn index(self) -> usize {
        self.0 as usize
    }
}

#[inline]
pub(crate) fn edge_key(u: Vertex, v: Vertex) -> u64 {
    let (a, b) = if u < v { (u, v) } else { (v, u) };
    (u64::from(a) << 32) | u64::from(b)
}

/// Vertices grouped by degree, with each vertex's position in its group.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DegreeIndex {
    groups: Vec<Vec<Vertex>>,
    position: Vec<u32>,
}

impl DegreeIndex {
    fn build(incidence: &[Vec<u32>]) -> Self {
        let max_degree = incidence.iter().map(Vec::len).max().unwrap_or(0);
        let mut groups = vec![Vec::new(); max_degree + 1];
        let mut position = vec![0u32; incidence.len()];
        for (v, slots) in incidence.iter().enumerate() {
            let group = &mut groups[slots.len()];
            position[v] = group.len() as u32;
            group.push(v as Vertex);
        }
        DegreeIndex { groups, position }
    }

    pub fn vertices(&self, degree: usize) -> &[Vertex] {
        self.groups.get(degree).map_or(&[], Vec::as_slice)
    }

    pub fn max_degree(&self) -> usize {
        self.groups.len().saturating_sub(1)
    }
}

#[derive(Clone, Debug)]
pub struct Graph {
    slots: Vec<Vertex>,
    slot_pos: Vec<u32>,
    incidence: Vec<Vec<u32>>,
    edge_set: FxHashSet<u64>,
    degree_index: DegreeIndex,
}

impl Graph {
    /// Builds a simple graph on `n` vertices. Self-loops, repeated pairs and
    /// out-of-range ids are rejected.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Graph>
    where
        I: IntoIterator<Item = (Vertex, Vertex)>,
    {
        if n > u32::MAX as usize {
            return Err(Error::InvalidInput(format!("{n} vertices exceed the u32 id range")));
        }
        let mut slots = Vec::new();
        let mut slot_pos = Vec::new();
        let mut incidence: Vec<Vec<u32>> = vec![Vec::new(); n];
        let mut edge_set = FxHashSet::default();
        for (u, v) in edges {
            if u as usize >= n || v as usize >= n {
                return Err(Error::InvalidInput(format!(
                    "edge ({u}, {v}) references a vertex outside 0..{n}"
                )));
            }
            if u == v {
                return Err(Error::InvalidInput(format!("self-loop at vertex {u}")));
            }
            if !edge_set.insert(edge_key(u, v)) {
                return Err(Error::InvalidInput(format!("parallel edge ({u}, {v})")));
            }
            for w in [u, v] {
                let slot = slots.len() as u32;
                slots.push(w);
                slot_pos.push(incidence[w as usize].len() as u32);
                incidence[w as usize].push(slot);
            }
        }
        let degree_index = DegreeIndex::build(&incidence);
        Ok(Graph {
            slots,
            slot_pos,
            incidence,
            edge_set,
            degree_index,
        })
    }

    pub fn n(&self) -> usize {
        self.incidence.len()
    }

    pub fn m(&self) -> usize {
        self.slots.len() / 2
    }

    pub fn degree(&self, v: Vertex) -> usize {
        self.incidence[v as usize].len()
    }

    pub fn degrees(&self) -> impl Iterator<Item = usize> + '_ {
        self.incidence.iter().map(Vec::len)
    }

    pub fn max_degree(&self) -> usize {
        self.degree_index.max_degree()
    }

    pub fn neighbors(&self, v: Vertex) -> impl Iterator<Item = Vertex> + '_ {
        self.incidence[v as usize]
            .iter()
            .map(move |&s| self.slots[(s ^ 1) as usize])
    }

    pub fn has_edge(&self, u: Vertex, v: Vertex) -> bool {
        self.edge_set.contains(&edge_key(u, v))
    }

    /// Edges in storage order; the order changes as swaps are applied.
    pub fn edges(&self) -> impl Iterator<Item = (Vertex, Vertex)> + '_ {
        self.slots.chunks_exact(2).map(|e| (e[0], e[1]))
    }

    /// Edges as `(min, max)` pairs in ascending order.
    pub fn sorted_edges(&self) -> Vec<(Vertex, Vertex)> {
        let mut edges: Vec<_> = self.edges().map(|(u, v)| (u.min(v), u.max(v))).collect();
        edges.sort_unstable();
        edges
    }

    pub fn degree_index(&self) -> &DegreeIndex {
        &self.degree_index
    }

    /// Vertex sitting at `slot`.
    #[inline]
    pub fn endpoint(&self, slot: Slot) -> Vertex {
        self.slots[slot.index()]
    }

    /// Vertex at the other end of `slot`'s edge.
    #[inline]
    pub fn far_end(&self, slot: Slot) -> Vertex {
        self.slots[slot.twin().index()]
    }

    /// Uniform draw over all `2m` (edge, endpoint) slots.
    pub fn sample_uniform_edge_endpoint<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Slot> {
        if self.slots.is_empty() {
            return Err(Error::InvalidState("cannot sample an endpoint of an empty graph".into()));
        }
        Ok(Slot(rng.random_range(0..self.slots.len() as u32)))
    }

    /// Uniform draw over the endpoint slots that sit on degree-`degree`
    /// vertices, skipping `exclude`. The returned slot's vertex has the
    /// requested degree; its twin is the neighbor.
    pub fn sample_edge_at_degree<R: Rng + ?Sized>(
        &self,
        degree: usize,
        exclude: Option<Vertex>,
        rng: &mut R,
    ) -> Result<Slot> {
        let group = self.degree_index.vertices(degree);
        let skip = exclude
            .filter(|&x| (x as usize) < self.n() && self.degree(x) == degree)
            .map(|x| self.degree_index.position[x as usize] as usize);
        let candidates = group.len() - usize::from(skip.is_some());
        if degree == 0 || candidates == 0 {
            return Err(Error::SamplingExhausted { degree });
        }
        let draw = rng.random_range(0..candidates * degree);
        let mut which = draw / degree;
        if let Some(skip) = skip {
            if which >= skip {
                which += 1;
            }
        }
        let v = group[which];
        Ok(Slot(self.incidence[v as usize][draw % degree]))
    }

    /// Moves the far ends of two edges onto each other: with `a` at `s1`,
    /// `b` across from it, `c` at `s2` and `d` across from it, the edges
    /// `{a,b}`, `{c,d}` become `{a,d}`, `{c,b}`. The caller guarantees the
    /// result is simple.
    pub(crate) fn exchange_far_ends(&mut self, s1: Slot, s2: Slot) {
        let (t1, t2) = (s1.twin().index(), s2.twin().index());
        let (a, b) = (self.slots[s1.index()], self.slots[t1]);
        let (c, d) = (self.slots[s2.index()], self.slots[t2]);
        debug_assert!(a != d && c != b && s1.edge() != s2.edge());

        self.edge_set.remove(&edge_key(a, b));
        self.edge_set.remove(&edge_key(c, d));
        let fresh = self.edge_set.insert(edge_key(a, d)) & self.edge_set.insert(edge_key(c, b));
        debug_assert!(fresh, "swap introduced a parallel edge");

        let (p1, p2) = (self.slot_pos[t1], self.slot_pos[t2]);
        self.incidence[b as usize][p1 as usize] = t2 as u32;
        self.incidence[d as usize][p2 as usize] = t1 as u32;
        self.slot_pos.swap(t1, t2);
        self.slots.swap(t1, t2);
    }

    /// Rebuilds every derived structure from the slot array and compares.
    pub fn check_consistency(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidState(msg));
        let mut incidence: Vec<Vec<u32>> = vec![Vec::new(); self.n()];
        let mut seen = FxHashSet::default();
        for (s, &v) in self.slots.iter().enumerate() {
            incidence[v as usize].push(s as u32);
            if s % 2 == 1 {
                let u = self.slots[s - 1];
                if u == v {
                    return fail(format!("self-loop at vertex {u}"));
                }
                if !seen.insert(edge_key(u, v)) {
                    return fail(format!("parallel edge ({u}, {v})"));
                }
            }
        }
        if seen != self.edge_set {
            return fail("edge set out of sync with slot array".into());
        }
        for (v, slots) in self.incidence.iter().enumerate() {
            let mut expected = incidence[v].clone();
            let mut actual = slots.clone();
            expected.sort_unstable();
            actual.sort_unstable();
            if expected != actual {
                return fail(format!("incidence list of vertex {v} is stale"));
            }
            for (p, &s) in slots.iter().enumerate() {
                if self.slot_pos[s as usize] as usize != p {
                    return fail(format!("slot {s} has a stale position"));
                }
            }
        }
        if DegreeIndex::build(&self.incidence) != self.degree_index {
            return fail("degree index differs from a rebuild".into());
        }
        let degree_sum: usize = self.degrees().sum();
        if degree_sum != 2 * self.m() {
            return fail(format!("degree sum {degree_sum} != 2m = {}", 2 * self.m()));
        }
        Ok(())
    }

    /// Same graph with vertex `v` renamed to `perm[v]`.
    pub fn relabeled(&self, perm: &[Vertex]) -> Result<Graph> {
        if perm.len() != self.n() {
            return Err(Error::InvalidInput("permutation length differs from n".into()));
        }
        Graph::from_edges(
            self.n(),
            self.edges().map(|(u, v)| (perm[u as usize], perm[v as usize])),
        )
    }
}

/// Degree distribution `f` and sparse joint degree matrix `J`.
///
/// `J` is keyed by `(min degree, max degree)`; a diagonal entry counts each
/// edge once.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegreeProfile {
    pub f: Vec<usize>,
    pub joint: BTreeMap<(usize, usize), usize>,
}

impl DegreeProfile {
    pub fn vertices_of_degree(&self, d: usize) -> usize {
        self.f.get(d).copied().unwrap_or(0)
    }

    pub fn joint(&self, i: usize, j: usize) -> usize {
        self.joint.get(&(i.min(j), i.max(j))).copied().unwrap_or(0)
    }

    pub fn vertex_count(&self) -> usize {
        self.f.iter().sum()
    }

    pub fn edge_count(&self) -> usize {
        self.joint.values().sum()
    }
}

pub fn degree_profile(g: &Graph) -> DegreeProfile {
    let mut f = vec![0usize; g.max_degree() + 1];
    for d in g.degrees() {
        f[d] += 1;
    }
    let mut joint = BTreeMap::new();
    for (u, v) in g.edges() {
        let (du, dv) = (g.degree(u), g.degree(v));
        *joint.entry((du.min(dv), du.max(dv))).or_insert(0) += 1;
    }
    DegreeProfile { f, joint }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadReport {
    pub lines: usize,
    pub self_loops: usize,
    pub duplicates: usize,
    /// Vertices that appear in the input but end with no edges.
    pub isolated: usize,
}

#[derive(Clone, Debug)]
pub struct LoadedGraph {
    pub graph: Graph,
    /// Original id of each compact vertex, ascending.
    pub ids: Vec<u64>,
    pub report: LoadReport,
    pub path: PathBuf,
}

/// Reads a whitespace-separated edge list. `#` starts a comment line; tokens
/// past the second on a line are ignored. Ids are compacted to `0..n` in
/// ascending order of the original ids.
///
/// With `symmetrize` set, lines are treated as arcs: reverse and repeated pairs
/// collapse into one undirected edge and self-loops are dropped, both counted
/// in the report. Without it the file must already be a simple undirected
/// edge list and any self-loop or repeated pair is an error.
pub fn load_graph(path: impl AsRef<Path>, symmetrize: bool) -> Result<LoadedGraph> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };

    let mut report = LoadReport::default();
    let mut arcs: Vec<(u64, u64)> = Vec::new();
    let mut seen: FxHashSet<(u64, u64)> = FxHashSet::default();
    let mut all_ids: FxHashSet<u64> = FxHashSet::default();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        report.lines += 1;
        let mut tokens = text.split_whitespace();
        let mut next_id = || -> Result<u64> {
            let tok = tokens
                .next()
                .ok_or_else(|| parse_err(lineno, "expected two vertex ids".into()))?;
            tok.parse::<u64>()
                .map_err(|_| parse_err(lineno, format!("`{tok}` is not a vertex id")))
        };
        let (u, v) = (next_id()?, next_id()?);
        all_ids.insert(u);
        all_ids.insert(v);
        if u == v {
            if !symmetrize {
                return Err(parse_err(lineno, format!("self-loop at vertex {u}")));
            }
            report.self_loops += 1;
            continue;
        }
        if !seen.insert((u.min(v), u.max(v))) {
            if !symmetrize {
                return Err(parse_err(lineno, format!("repeated edge ({u}, {v})")));
            }
            report.duplicates += 1;
            continue;
        }
        arcs.push((u, v));
    }
    if arcs.is_empty() {
        return Err(Error::InvalidInput(format!(
            "{} contains no edges",
            path.display()
        )));
    }

    let mut ids: Vec<u64> = all_ids.into_iter().collect();
    ids.sort_unstable();
    let compact: FxHashMap<u64, Vertex> = ids
        .iter()
        .enumerate()
        .map(|(i, &id)| (id, i as Vertex))
        .collect();
    let graph = Graph::from_edges(
        ids.len(),
        arcs.iter().map(|(u, v)| (compact[u], compact[v])),
    )?;
    report.isolated = graph.degrees().filter(|&d| d == 0).count();
    Ok(LoadedGraph {
        graph,
        ids,
        report,
        path: path.to_path_buf(),
    })
}

/// Writes `g` as sorted `min max` lines, translating through `ids` when given.
pub fn write_edge_list(path: impl AsRef<Path>, g: &Graph, ids: Option<&[u64]>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_edges(&mut out, g, ids).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn write_edges<W: Write>(out: &mut W, g: &Graph, ids: Option<&[u64]>) -> std::io::Result<()> {
    let name = |v: Vertex| ids.map_or(u64::from(v), |ids| ids[v as usize]);
    let mut edges: Vec<(u64, u64)> = g
        .edges()
        .map(|(u, v)| {
            let (a, b) = (name(u), name(v));
            (a.min(b), a.max(b))
        })
        .collect();
    edges.sort_unstable();
    writeln!(out, "# n={} m={}", g.n(), g.m())?;
    for (a, b) in edges {
        writeln!(out, "{a} {b}")?;
    }
    Ok(())
}
