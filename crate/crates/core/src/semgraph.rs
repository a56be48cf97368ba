//! The semantic knowledge graph: thresholded k-NN construction, Louvain
//! communities, weighted PageRank, structural statistics and the `AWKG`
//! graph file.
//!
//! Nodes are kept sorted by entity id, so node indices order the same way
//! entity ids do. Edges are undirected and stored once with `a < b`.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annindex::{IndexError, VectorIndex};
use crate::corpus::{Corpus, Entity, Granularity};

pub const DEFAULT_SIMILARITY_THRESHOLD: f64 = 0.10;
pub const DEFAULT_EDGE_LIMIT: u32 = 100;

const GRAPH_MAGIC: &[u8; 4] = b"AWKG";
const GRAPH_VERSION: u8 = 0x01;
const LOUVAIN_MIN_GAIN: f64 = 1e-7;
const LOUVAIN_MAX_PASSES: usize = 1000;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("no vector for entity {0:?}")]
    MissingVector(String),
    #[error("no document {doc_id:?} for entity {entity_id:?}")]
    MissingDoc { entity_id: String, doc_id: String },
    #[error("duplicate node id {0:?}")]
    DuplicateNode(String),
    #[error("invalid edge ({a}, {b}): {reason}")]
    InvalidEdge { a: usize, b: usize, reason: &'static str },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error("bad magic in graph file")]
    BadMagic,
    #[error("unsupported graph file version {0:#04x}")]
    VersionMismatch(u8),
    #[error("graph file checksum mismatch (stored {stored:#010x}, computed {computed:#010x})")]
    Checksum { stored: u32, computed: u32 },
    #[error("graph file truncated")]
    Truncated,
    #[error("graph file corrupt: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphConfig {
    pub similarity_threshold: f64,
    pub edge_limit: u32,
    pub granularity: Granularity,
    pub provider_id: String,
    pub dim: u32,
}

impl GraphConfig {
    /// Config with the default threshold (0.10) and edge limit (100).
    pub fn new(granularity: Granularity, provider_id: impl Into<String>, dim: u32) -> Self {
        GraphConfig {
            similarity_threshold: DEFAULT_SIMILARITY_THRESHOLD,
            edge_limit: DEFAULT_EDGE_LIMIT,
            granularity,
            provider_id: provider_id.into(),
            dim,
        }
    }

    pub fn validate(&self) -> Result<(), GraphError> {
        if !self.similarity_threshold.is_finite() || self.similarity_threshold <= 0.0 {
            return Err(GraphError::InvalidConfig(format!(
                "similarity threshold must be positive, got {}",
                self.similarity_threshold
            )));
        }
        if self.edge_limit == 0 {
            return Err(GraphError::InvalidConfig("edge limit must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub entity_id: String,
    pub parent_doc_id: String,
    pub extract_word_count: u32,
    pub community_id: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub a: u32,
    pub b: u32,
    pub weight: f32,
}

#[derive(Debug, Clone)]
pub struct SemanticGraph {
    config: GraphConfig,
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    adjacency: Vec<Vec<(u32, f32)>>,
    by_id: HashMap<String, u32>,
}

impl PartialEq for SemanticGraph {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config
            && self.nodes == other.nodes
            && self.edges.len() == other.edges.len()
            && self
                .edges
                .iter()
                .zip(&other.edges)
                .all(|(x, y)| x.a == y.a && x.b == y.b && x.weight.to_bits() == y.weight.to_bits())
    }
}

impl SemanticGraph {
    /// Assembles a graph, sorting nodes by id and checking every invariant:
    /// unique ids, no self-loops, no parallel edges, weights in
    /// `[threshold, 1]`. Edge endpoints index into `nodes` as given.
    pub fn from_parts(config: GraphConfig, nodes: Vec<Node>, edges: Vec<Edge>) -> Result<Self, GraphError> {
        config.validate()?;
        let n = nodes.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&x, &y| nodes[x].entity_id.cmp(&nodes[y].entity_id));
        let mut remap = vec![0u32; n];
        for (new, &old) in order.iter().enumerate() {
            remap[old] = new as u32;
        }
        let mut slots: Vec<Option<Node>> = nodes.into_iter().map(Some).collect();
        let nodes: Vec<Node> = order.iter().map(|&old| slots[old].take().expect("each slot taken once")).collect();
        let mut by_id = HashMap::with_capacity(n);
        for (i, node) in nodes.iter().enumerate() {
            if by_id.insert(node.entity_id.clone(), i as u32).is_some() {
                return Err(GraphError::DuplicateNode(node.entity_id.clone()));
            }
        }

        let mut canon: BTreeMap<(u32, u32), f32> = BTreeMap::new();
        for e in edges {
            let (a, b) = (e.a as usize, e.b as usize);
            let invalid = |reason| GraphError::InvalidEdge { a, b, reason };
            if a >= n || b >= n {
                return Err(invalid("endpoint out of range"));
            }
            if a == b {
                return Err(invalid("self-loop"));
            }
            let w = e.weight as f64;
            if !(w >= config.similarity_threshold && w <= 1.0) {
                return Err(invalid("weight outside [threshold, 1]"));
            }
            let (x, y) = (remap[a].min(remap[b]), remap[a].max(remap[b]));
            if canon.insert((x, y), e.weight).is_some() {
                return Err(invalid("parallel edge"));
            }
        }
        Ok(Self::assemble(config, nodes, canon, by_id))
    }

    fn assemble(
        config: GraphConfig,
        nodes: Vec<Node>,
        canon: BTreeMap<(u32, u32), f32>,
        by_id: HashMap<String, u32>,
    ) -> Self {
        let mut adjacency = vec![Vec::new(); nodes.len()];
        let edges: Vec<Edge> = canon
            .into_iter()
            .map(|((a, b), weight)| {
                adjacency[a as usize].push((b, weight));
                adjacency[b as usize].push((a, weight));
                Edge { a, b, weight }
            })
            .collect();
        for list in &mut adjacency {
            list.sort_by_key(|&(nb, _)| nb);
        }
        SemanticGraph { config, nodes, edges, adjacency, by_id }
    }

    pub fn config(&self) -> &GraphConfig {
        &self.config
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, idx: u32) -> &Node {
        &self.nodes[idx as usize]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn node_index(&self, entity_id: &str) -> Option<u32> {
        self.by_id.get(entity_id).copied()
    }

    /// Neighbors of `idx` with edge weights, in ascending index order.
    pub fn neighbors(&self, idx: u32) -> &[(u32, f32)] {
        &self.adjacency[idx as usize]
    }

    pub fn weight(&self, a: u32, b: u32) -> Option<f32> {
        let list = &self.adjacency[a as usize];
        list.binary_search_by_key(&b, |&(nb, _)| nb).ok().map(|i| list[i].1)
    }

    pub fn has_communities(&self) -> bool {
        self.nodes.iter().any(|n| n.community_id.is_some())
    }

    pub fn set_communities(&mut self, assignment: &CommunityAssignment) {
        for (node, &c) in self.nodes.iter_mut().zip(&assignment.communities) {
            node.community_id = Some(c);
        }
    }
}

/// Builds the graph: every entity selects its `edge_limit` nearest
/// neighbors, and each selection at or above the threshold becomes an
/// undirected edge. Isolated entities are kept as nodes.
pub fn build_graph(
    corpus: &Corpus,
    entities: &[Entity],
    index: &VectorIndex,
    config: GraphConfig,
) -> Result<SemanticGraph, GraphError> {
    build_graph_with_progress(corpus, entities, index, config, |_, _| {})
}

/// [`build_graph`] reporting `(entities_done, total)` as it goes.
pub fn build_graph_with_progress(
    corpus: &Corpus,
    entities: &[Entity],
    index: &VectorIndex,
    config: GraphConfig,
    mut progress: impl FnMut(usize, usize),
) -> Result<SemanticGraph, GraphError> {
    config.validate()?;
    let mut nodes = Vec::with_capacity(entities.len());
    for e in entities {
        if index.vector(&e.entity_id).is_none() {
            return Err(GraphError::MissingVector(e.entity_id.clone()));
        }
        let doc = corpus.get(&e.parent_doc_id).ok_or_else(|| GraphError::MissingDoc {
            entity_id: e.entity_id.clone(),
            doc_id: e.parent_doc_id.clone(),
        })?;
        nodes.push(Node {
            entity_id: e.entity_id.clone(),
            parent_doc_id: e.parent_doc_id.clone(),
            extract_word_count: doc.word_count_extract as u32,
            community_id: None,
        });
    }
    nodes.sort_by(|x, y| x.entity_id.cmp(&y.entity_id));
    let mut by_id = HashMap::with_capacity(nodes.len());
    for (i, node) in nodes.iter().enumerate() {
        if by_id.insert(node.entity_id.clone(), i as u32).is_some() {
            return Err(GraphError::DuplicateNode(node.entity_id.clone()));
        }
    }

    let total = nodes.len();
    let mut canon: BTreeMap<(u32, u32), f32> = BTreeMap::new();
    for (i, node) in nodes.iter().enumerate() {
        let q = index.vector(&node.entity_id).expect("checked above");
        let hits = index.query_topk(q, config.edge_limit as usize, Some(&node.entity_id))?;
        for hit in hits {
            let weight = hit.similarity as f32;
            if (weight as f64) < config.similarity_threshold {
                continue;
            }
            // Neighbors outside the entity list are not part of this graph.
            let Some(&j) = by_id.get(&hit.entity_id) else { continue };
            let key = ((i as u32).min(j), (i as u32).max(j));
            if let Some(prev) = canon.insert(key, weight) {
                debug_assert!((prev - weight).abs() <= 1e-6, "asymmetric similarity");
            }
        }
        progress(i + 1, total);
    }
    Ok(SemanticGraph::assemble(config, nodes, canon, by_id))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphStats {
    pub vertex_count: usize,
    pub edge_count: usize,
    /// `2 * edges / vertices`, 0 for an empty graph.
    pub average_degree: f64,
}

pub fn graph_stats(graph: &SemanticGraph) -> GraphStats {
    let v = graph.node_count();
    let e = graph.edge_count();
    GraphStats { vertex_count: v, edge_count: e, average_degree: if v == 0 { 0.0 } else { 2.0 * e as f64 / v as f64 } }
}

pub const STATS_HEADER: [&str; 4] = ["Model Name", "Number of Vertices", "Number of Edges", "Average Degree"];

/// Renders named stats rows as a tab-separated report with a header line.
pub fn render_stats_report(rows: &[(String, GraphStats)]) -> String {
    let mut out = STATS_HEADER.join("\t");
    out.push('\n');
    for (name, s) in rows {
        let _ = writeln!(out, "{name}\t{}\t{}\t{:.2}", s.vertex_count, s.edge_count, s.average_degree);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommunityAssignment {
    /// Community of each node, by node index; dense ids from 0 in order of
    /// first appearance.
    pub communities: Vec<u32>,
    pub modularity: f64,
}

impl CommunityAssignment {
    pub fn community_count(&self) -> usize {
        self.communities.iter().map(|&c| c as usize + 1).max().unwrap_or(0)
    }
}

/// Working graph for one Louvain level. `loops[i]` is the weight of node
/// i's self-loop; its degree counts the loop twice.
struct LevelGraph {
    adj: Vec<Vec<(usize, f64)>>,
    loops: Vec<f64>,
}

impl LevelGraph {
    fn from_graph(graph: &SemanticGraph) -> Self {
        LevelGraph {
            adj: graph.adjacency.iter().map(|l| l.iter().map(|&(nb, w)| (nb as usize, w as f64)).collect()).collect(),
            loops: vec![0.0; graph.node_count()],
        }
    }

    fn degree(&self, i: usize) -> f64 {
        self.adj[i].iter().map(|&(_, w)| w).sum::<f64>() + 2.0 * self.loops[i]
    }

    fn total_degree(&self) -> f64 {
        (0..self.adj.len()).map(|i| self.degree(i)).sum()
    }

    fn modularity(&self, comm: &[usize], resolution: f64) -> f64 {
        let m2 = self.total_degree();
        if m2 == 0.0 {
            return 0.0;
        }
        let k = comm.iter().max().map_or(0, |&c| c + 1);
        let mut inside = vec![0.0; k];
        let mut tot = vec![0.0; k];
        for i in 0..self.adj.len() {
            tot[comm[i]] += self.degree(i);
            inside[comm[i]] += 2.0 * self.loops[i];
            for &(j, w) in &self.adj[i] {
                if comm[j] == comm[i] {
                    inside[comm[i]] += w;
                }
            }
        }
        (0..k).map(|c| inside[c] / m2 - resolution * (tot[c] / m2).powi(2)).sum()
    }

    /// Local moving phase. Returns the dense partition and whether any node
    /// moved.
    fn local_moves(&self, resolution: f64) -> (Vec<usize>, bool) {
        let n = self.adj.len();
        let m2 = self.total_degree();
        let degrees: Vec<f64> = (0..n).map(|i| self.degree(i)).collect();
        let mut comm: Vec<usize> = (0..n).collect();
        let mut tot = degrees.clone();
        let mut any_move = false;
        if m2 == 0.0 {
            return (comm, false);
        }
        for _ in 0..LOUVAIN_MAX_PASSES {
            let mut moved = false;
            for i in 0..n {
                let ki = degrees[i];
                let old = comm[i];
                let mut links: BTreeMap<usize, f64> = BTreeMap::new();
                for &(j, w) in &self.adj[i] {
                    *links.entry(comm[j]).or_insert(0.0) += w;
                }
                tot[old] -= ki;
                let gain = |c: usize, w: f64| w - resolution * tot[c] * ki / m2;
                let mut best = old;
                let mut best_gain = gain(old, links.get(&old).copied().unwrap_or(0.0));
                for (&c, &w) in &links {
                    let g = gain(c, w);
                    if g > best_gain + 1e-12 {
                        best = c;
                        best_gain = g;
                    }
                }
                tot[best] += ki;
                if best != old {
                    comm[i] = best;
                    moved = true;
                    any_move = true;
                }
            }
            if !moved {
                break;
            }
        }
        (renumber(&comm), any_move)
    }

    fn aggregate(&self, comm: &[usize]) -> LevelGraph {
        let k = comm.iter().max().map_or(0, |&c| c + 1);
        let mut loops = vec![0.0; k];
        let mut between: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); k];
        for i in 0..self.adj.len() {
            loops[comm[i]] += self.loops[i];
            for &(j, w) in &self.adj[i] {
                let (ci, cj) = (comm[i], comm[j]);
                if ci == cj {
                    // Each undirected edge is seen from both ends.
                    loops[ci] += w / 2.0;
                } else {
                    *between[ci].entry(cj).or_insert(0.0) += w;
                }
            }
        }
        LevelGraph { adj: between.into_iter().map(|m| m.into_iter().collect()).collect(), loops }
    }
}

fn renumber(comm: &[usize]) -> Vec<usize> {
    let mut map = HashMap::new();
    comm.iter()
        .map(|&c| {
            let next = map.len();
            *map.entry(c).or_insert(next)
        })
        .collect()
}

/// Weighted-modularity Louvain. Nodes are visited in ascending entity id
/// order; among equal-gain target communities the smallest id wins and a
/// node only moves for a strictly positive improvement.
pub fn louvain_communities(graph: &SemanticGraph, resolution: f64) -> CommunityAssignment {
    let base = LevelGraph::from_graph(graph);
    let n = graph.node_count();
    let mut membership: Vec<usize> = (0..n).collect();
    let mut level = LevelGraph::from_graph(graph);
    let mut current_q = base.modularity(&membership, resolution);
    loop {
        let (partition, moved) = level.local_moves(resolution);
        if !moved {
            break;
        }
        let candidate: Vec<usize> = membership.iter().map(|&c| partition[c]).collect();
        let q = base.modularity(&candidate, resolution);
        let gain = q - current_q;
        membership = candidate;
        current_q = q;
        if gain < LOUVAIN_MIN_GAIN {
            break;
        }
        level = level.aggregate(&partition);
    }
    let membership = renumber(&membership);
    CommunityAssignment {
        modularity: base.modularity(&membership, resolution),
        communities: membership.into_iter().map(|c| c as u32).collect(),
    }
}

/// Weighted modularity of an arbitrary partition (by node index).
pub fn modularity(graph: &SemanticGraph, communities: &[u32], resolution: f64) -> f64 {
    let comm: Vec<usize> = renumber(&communities.iter().map(|&c| c as usize).collect::<Vec<_>>());
    LevelGraph::from_graph(graph).modularity(&comm, resolution)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PageRank {
    /// Score per node index.
    pub scores: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Weighted PageRank by power iteration. Transition probability is
/// proportional to edge weight; nodes without edges spread their mass
/// uniformly. Stops when the L1 change drops below `tol`.
pub fn pagerank(graph: &SemanticGraph, damping: f64, tol: f64, max_iter: usize) -> PageRank {
    let n = graph.node_count();
    if n == 0 {
        return PageRank { scores: Vec::new(), iterations: 0, converged: true };
    }
    let strength: Vec<f64> = (0..n).map(|i| graph.adjacency[i].iter().map(|&(_, w)| w as f64).sum()).collect();
    let uniform = 1.0 / n as f64;
    let mut scores = vec![uniform; n];
    let mut next = vec![0.0; n];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        let dangling: f64 = (0..n).filter(|&i| strength[i] == 0.0).map(|i| scores[i]).sum();
        let base = (1.0 - damping) * uniform + damping * dangling * uniform;
        next.iter_mut().for_each(|x| *x = base);
        for i in 0..n {
            if strength[i] == 0.0 {
                continue;
            }
            let share = damping * scores[i] / strength[i];
            for &(j, w) in &graph.adjacency[i] {
                next[j as usize] += share * w as f64;
            }
        }
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= total);
        let delta: f64 = scores.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut scores, &mut next);
        if delta < tol {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("pagerank did not converge within {max_iter} iterations");
    }
    PageRank { scores, iterations, converged }
}

struct Crc32Writer<W: Write> {
    inner: W,
    hasher: crc32fast::Hasher,
}

impl<W: Write> Write for Crc32Writer<W> {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.hasher.update(&buf[..n]);
        Ok(n)
    }

    fn flush(&mut self) -> std::io::Result<()> {
        self.inner.flush()
    }
}

fn write_str<W: Write>(out: &mut W, s: &str) -> Result<(), GraphError> {
    let len = u16::try_from(s.len()).map_err(|_| GraphError::Corrupt(format!("string too long: {s:?}")))?;
    out.write_all(&len.to_le_bytes())?;
    out.write_all(s.as_bytes())?;
    Ok(())
}

/// Serializes `graph` in the `AWKG` layout.
pub fn write_graph<W: Write>(graph: &SemanticGraph, out: W) -> Result<(), GraphError> {
    let mut w = Crc32Writer { inner: out, hasher: crc32fast::Hasher::new() };
    let c = &graph.config;
    w.write_all(GRAPH_MAGIC)?;
    w.write_all(&[GRAPH_VERSION])?;
    w.write_all(&c.similarity_threshold.to_le_bytes())?;
    w.write_all(&c.edge_limit.to_le_bytes())?;
    w.write_all(&[c.granularity.as_byte()])?;
    write_str(&mut w, &c.provider_id)?;
    w.write_all(&c.dim.to_le_bytes())?;
    w.write_all(&(graph.nodes.len() as u64).to_le_bytes())?;
    for node in &graph.nodes {
        write_str(&mut w, &node.entity_id)?;
        write_str(&mut w, &node.parent_doc_id)?;
        w.write_all(&node.extract_word_count.to_le_bytes())?;
        let community = node.community_id.map_or(-1i32, |c| c as i32);
        w.write_all(&community.to_le_bytes())?;
    }
    w.write_all(&(graph.edges.len() as u64).to_le_bytes())?;
    for e in &graph.edges {
        w.write_all(&e.a.to_le_bytes())?;
        w.write_all(&e.b.to_le_bytes())?;
        w.write_all(&e.weight.to_le_bytes())?;
    }
    let crc = w.hasher.finalize();
    w.inner.write_all(&crc.to_le_bytes())?;
    w.inner.flush()?;
    Ok(())
}

pub fn graph_to_bytes(graph: &SemanticGraph) -> Vec<u8> {
    let mut buf = Vec::new();
    write_graph(graph, &mut buf).expect("writing to memory cannot fail");
    buf
}

pub fn persist_graph(graph: &SemanticGraph, path: impl AsRef<Path>) -> Result<(), GraphError> {
    write_graph(graph, BufWriter::new(File::create(path)?))
}

pub fn load_graph(path: impl AsRef<Path>) -> Result<SemanticGraph, GraphError> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    graph_from_bytes(&bytes)
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], GraphError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or(GraphError::Truncated)?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], GraphError> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn string(&mut self) -> Result<String, GraphError> {
        let len = u16::from_le_bytes(self.array()?) as usize;
        let raw = self.take(len)?;
        String::from_utf8(raw.to_vec()).map_err(|_| GraphError::Corrupt("string is not UTF-8".into()))
    }
}

/// Parses an `AWKG` byte buffer, verifying magic, version and checksum
/// before decoding, then re-checking every graph invariant.
pub fn graph_from_bytes(bytes: &[u8]) -> Result<SemanticGraph, GraphError> {
    if bytes.len() < 5 {
        return Err(if bytes.len() >= 4 && &bytes[..4] != GRAPH_MAGIC {
            GraphError::BadMagic
        } else {
            GraphError::Truncated
        });
    }
    if &bytes[..4] != GRAPH_MAGIC {
        return Err(GraphError::BadMagic);
    }
    if bytes[4] != GRAPH_VERSION {
        return Err(GraphError::VersionMismatch(bytes[4]));
    }
    if bytes.len() < 9 {
        return Err(GraphError::Truncated);
    }
    let (body, trailer) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(trailer.try_into().expect("4 bytes"));
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(GraphError::Checksum { stored, computed });
    }

    let mut cur = Cursor { buf: body, pos: 5 };
    let similarity_threshold = f64::from_le_bytes(cur.array()?);
    let edge_limit = u32::from_le_bytes(cur.array()?);
    let [g] = cur.array::<1>()?;
    let granularity =
        Granularity::from_byte(g).ok_or_else(|| GraphError::Corrupt(format!("unknown granularity byte {g}")))?;
    let provider_id = cur.string()?;
    let dim = u32::from_le_bytes(cur.array()?);
    let config = GraphConfig { similarity_threshold, edge_limit, granularity, provider_id, dim };

    let node_count = u64::from_le_bytes(cur.array()?) as usize;
    let mut nodes = Vec::with_capacity(node_count.min(body.len()));
    for _ in 0..node_count {
        let entity_id = cur.string()?;
        let parent_doc_id = cur.string()?;
        let extract_word_count = u32::from_le_bytes(cur.array()?);
        let community = i32::from_le_bytes(cur.array()?);
        let community_id = match community {
            -1 => None,
            c if c >= 0 => Some(c as u32),
            c => return Err(GraphError::Corrupt(format!("negative community id {c}"))),
        };
        nodes.push(Node { entity_id, parent_doc_id, extract_word_count, community_id });
    }
    if nodes.windows(2).any(|w| w[0].entity_id >= w[1].entity_id) {
        return Err(GraphError::Corrupt("node table not sorted by entity id".into()));
    }
    let edge_count = u64::from_le_bytes(cur.array()?) as usize;
    let mut edges = Vec::with_capacity(edge_count.min(body.len()));
    for _ in 0..edge_count {
        let a = u32::from_le_bytes(cur.array()?);
        let b = u32::from_le_bytes(cur.array()?);
        let weight = f32::from_le_bytes(cur.array()?);
        edges.push(Edge { a, b, weight });
    }
    if cur.pos != body.len() {
        return Err(GraphError::Corrupt("trailing bytes before checksum".into()));
    }
    if edges.windows(2).any(|w| (w[0].a, w[0].b) >= (w[1].a, w[1].b)) || edges.iter().any(|e| e.a >= e.b) {
        return Err(GraphError::Corrupt("edge list not in canonical order".into()));
    }
    SemanticGraph::from_parts(config, nodes, edges)
}
