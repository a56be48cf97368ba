//! Constrained weighted shortest paths over a [`SemanticGraph`].
//!
//! All searches run over a [`SubgraphView`], which filters nodes lazily by a
//! [`PathConstraint`]; an edge is usable iff both endpoints pass. Paths are
//! ordered by total cost, and paths whose costs agree within [`COST_EPS`]
//! are ordered lexicographically by their entity id sequence. Node indices
//! follow entity id order, so comparing index sequences is the same as
//! comparing id sequences.

use std::cell::OnceCell;
use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Corpus;
use crate::queryfilter::{evaluate_filter, FilterError, FilterExpr};
use crate::semgraph::SemanticGraph;

pub const DEFAULT_LAMBDA: f64 = 0.5;
pub const DEFAULT_K: usize = 10;
pub const MAX_K: usize = 100;
/// 11 hops, i.e. at most 12 pieces of evidence in one chain.
pub const DEFAULT_MAX_HOPS: usize = 11;
pub const DEFAULT_SEGMENT_K: usize = 3;
/// Costs closer than this are treated as equal and tie-broken by sequence.
pub const COST_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PathError {
    #[error("no path from {from} to {to} in the constrained graph")]
    NoPath { from: String, to: String },
    #[error("endpoint {0} does not satisfy the constraint")]
    EndpointExcluded(String),
    #[error("unknown entity {0}")]
    UnknownEntity(String),
    #[error("path needs {hops} hops, budget is {budget}")]
    HopBudgetExceeded { hops: usize, budget: usize },
    #[error("every segment combination repeats a node")]
    NoDisjointCombination,
    #[error("k must be between 1 and {MAX_K}, got {0}")]
    InvalidK(usize),
    #[error("at least two waypoints are required")]
    TooFewWaypoints,
    #[error("invalid edge cost: {0}")]
    InvalidCost(String),
    #[error(transparent)]
    Filter(#[from] FilterError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CostKind {
    #[default]
    SemanticDistance,
    LengthPenalized,
}

impl std::str::FromStr for CostKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "semantic_distance" | "semantic" => Ok(CostKind::SemanticDistance),
            "length_penalized" | "length" => Ok(CostKind::LengthPenalized),
            other => Err(format!("unknown cost {other:?} (semantic_distance|length_penalized)")),
        }
    }
}

/// Traversal cost of entering node `v` over edge `(u, v)`.
///
/// `SemanticDistance`: `1 - weight`. `LengthPenalized`: that plus
/// `lambda * extract_words(v) / norm_words`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeCost {
    pub kind: CostKind,
    pub lambda: f64,
    pub norm_words: f64,
}

impl EdgeCost {
    pub fn semantic() -> Self {
        EdgeCost { kind: CostKind::SemanticDistance, lambda: DEFAULT_LAMBDA, norm_words: 1.0 }
    }

    pub fn length_penalized(lambda: f64, norm_words: f64) -> Self {
        EdgeCost { kind: CostKind::LengthPenalized, lambda, norm_words }
    }

    pub fn validate(&self) -> Result<(), PathError> {
        if !self.lambda.is_finite() || self.lambda < 0.0 {
            return Err(PathError::InvalidCost(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !self.norm_words.is_finite() || self.norm_words <= 0.0 {
            return Err(PathError::InvalidCost(format!("norm_words must be > 0, got {}", self.norm_words)));
        }
        Ok(())
    }

    pub fn hop(&self, weight: f32, entered_extract_words: u32) -> f64 {
        let distance = 1.0 - weight as f64;
        match self.kind {
            CostKind::SemanticDistance => distance,
            CostKind::LengthPenalized => distance + self.lambda * entered_extract_words as f64 / self.norm_words,
        }
    }
}

/// Conjunction of node predicates. Absent or empty clauses always pass.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PathConstraint {
    pub community_ids: Option<BTreeSet<u32>>,
    /// Each keyword must occur in the parent document's full text
    /// (case-insensitive).
    pub keyword_include: Vec<String>,
    /// No keyword may occur in the parent document's full text.
    pub keyword_exclude: Vec<String>,
    pub max_extract_words: Option<u32>,
    pub filter: Option<FilterExpr>,
}

impl PathConstraint {
    fn needs_doc(&self) -> bool {
        !self.keyword_include.is_empty() || !self.keyword_exclude.is_empty() || self.filter.is_some()
    }
}

/// Lazily filtered view of a graph. Verdicts are cached per node.
pub struct SubgraphView<'a> {
    graph: &'a SemanticGraph,
    corpus: Option<&'a Corpus>,
    constraint: &'a PathConstraint,
    include: Vec<String>,
    exclude: Vec<String>,
    verdicts: Vec<OnceCell<bool>>,
}

/// Builds the constrained view. `corpus` is needed only for keyword and
/// filter clauses; without it such clauses reject every node.
pub fn subgraph_view<'a>(
    graph: &'a SemanticGraph,
    corpus: Option<&'a Corpus>,
    constraint: &'a PathConstraint,
) -> Result<SubgraphView<'a>, PathError> {
    if let Some(f) = &constraint.filter {
        f.check()?;
    }
    let lower = |v: &[String]| v.iter().map(|k| k.to_lowercase()).collect();
    Ok(SubgraphView {
        graph,
        corpus,
        constraint,
        include: lower(&constraint.keyword_include),
        exclude: lower(&constraint.keyword_exclude),
        verdicts: vec![OnceCell::new(); graph.node_count()],
    })
}

impl<'a> SubgraphView<'a> {
    pub fn graph(&self) -> &'a SemanticGraph {
        self.graph
    }

    pub fn corpus(&self) -> Option<&'a Corpus> {
        self.corpus
    }

    pub fn constraint(&self) -> &'a PathConstraint {
        self.constraint
    }

    pub fn passes(&self, idx: u32) -> bool {
        *self.verdicts[idx as usize].get_or_init(|| self.evaluate(idx))
    }

    /// `None` if the entity is not in the graph.
    pub fn passes_id(&self, entity_id: &str) -> Option<bool> {
        self.graph.node_index(entity_id).map(|i| self.passes(i))
    }

    fn evaluate(&self, idx: u32) -> bool {
        let node = self.graph.node(idx);
        let c = self.constraint;
        if let Some(ids) = &c.community_ids {
            if !node.community_id.is_some_and(|cid| ids.contains(&cid)) {
                return false;
            }
        }
        if let Some(max) = c.max_extract_words {
            if node.extract_word_count > max {
                return false;
            }
        }
        if !c.needs_doc() {
            return true;
        }
        let Some(doc) = self.corpus.and_then(|corpus| corpus.get(&node.parent_doc_id)) else {
            return false;
        };
        if !self.include.is_empty() || !self.exclude.is_empty() {
            let text = doc.full_text.to_lowercase();
            if !self.include.iter().all(|k| text.contains(k.as_str())) {
                return false;
            }
            if self.exclude.iter().any(|k| text.contains(k.as_str())) {
                return false;
            }
        }
        c.filter.as_ref().is_none_or(|f| evaluate_filter(f, doc))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathResult {
    pub node_sequence: Vec<String>,
    pub total_cost: f64,
    pub hop_similarities: Vec<f32>,
}

impl PathResult {
    pub fn hops(&self) -> usize {
        self.node_sequence.len().saturating_sub(1)
    }
}

/// Path as node indices with its sequentially summed cost.
#[derive(Debug, Clone, PartialEq)]
struct Route {
    nodes: Vec<u32>,
    cost: f64,
}

fn cmp_routes(a_cost: f64, a: &[u32], b_cost: f64, b: &[u32]) -> Ordering {
    if (a_cost - b_cost).abs() <= COST_EPS {
        a.cmp(b)
    } else {
        a_cost.total_cmp(&b_cost)
    }
}

/// Min-heap entry.
struct Label(Route);

impl PartialEq for Label {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Label {}

impl PartialOrd for Label {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Label {
    fn cmp(&self, other: &Self) -> Ordering {
        cmp_routes(other.0.cost, &other.0.nodes, self.0.cost, &self.0.nodes)
    }
}

/// Shortest-path queries over one view with one cost function.
pub struct Pathfinder<'v, 'a> {
    view: &'v SubgraphView<'a>,
    cost: EdgeCost,
    max_hops: usize,
}

impl<'v, 'a> Pathfinder<'v, 'a> {
    pub fn new(view: &'v SubgraphView<'a>, cost: EdgeCost) -> Result<Self, PathError> {
        cost.validate()?;
        Ok(Pathfinder { view, cost, max_hops: DEFAULT_MAX_HOPS })
    }

    pub fn with_max_hops(mut self, max_hops: usize) -> Self {
        self.max_hops = max_hops;
        self
    }

    pub fn max_hops(&self) -> usize {
        self.max_hops
    }

    fn graph(&self) -> &'a SemanticGraph {
        self.view.graph
    }

    fn hop_cost(&self, from: u32, to: u32) -> f64 {
        let w = self.graph().weight(from, to).expect("consecutive path nodes are adjacent");
        self.cost.hop(w, self.graph().node(to).extract_word_count)
    }

    fn route_cost(&self, nodes: &[u32]) -> f64 {
        nodes.windows(2).fold(0.0, |acc, w| acc + self.hop_cost(w[0], w[1]))
    }

    fn endpoint(&self, id: &str) -> Result<u32, PathError> {
        let idx = self.graph().node_index(id).ok_or_else(|| PathError::UnknownEntity(id.to_string()))?;
        if !self.view.passes(idx) {
            return Err(PathError::EndpointExcluded(id.to_string()));
        }
        Ok(idx)
    }

    fn result(&self, route: &Route) -> PathResult {
        let g = self.graph();
        PathResult {
            node_sequence: route.nodes.iter().map(|&i| g.node(i).entity_id.clone()).collect(),
            total_cost: route.cost,
            hop_similarities: route.nodes.windows(2).map(|w| g.weight(w[0], w[1]).expect("adjacent")).collect(),
        }
    }

    fn no_path(&self, src: u32, dst: u32) -> PathError {
        PathError::NoPath {
            from: self.graph().node(src).entity_id.clone(),
            to: self.graph().node(dst).entity_id.clone(),
        }
    }

    /// Dijkstra keyed on `(cost, node sequence)`. `blocked_nodes` and
    /// `blocked_edges` (stored as `(min, max)`) are removed from the view.
    fn dijkstra(
        &self,
        src: u32,
        dst: u32,
        blocked_nodes: &HashSet<u32>,
        blocked_edges: &HashSet<(u32, u32)>,
    ) -> Option<Route> {
        let g = self.graph();
        let mut settled = vec![false; g.node_count()];
        let mut best: HashMap<u32, (f64, Vec<u32>)> = HashMap::new();
        let mut heap = BinaryHeap::new();
        heap.push(Label(Route { nodes: vec![src], cost: 0.0 }));
        while let Some(Label(route)) = heap.pop() {
            let v = *route.nodes.last().expect("non-empty route");
            if settled[v as usize] {
                continue;
            }
            settled[v as usize] = true;
            if v == dst {
                return Some(route);
            }
            for &(u, w) in g.neighbors(v) {
                if settled[u as usize]
                    || blocked_nodes.contains(&u)
                    || blocked_edges.contains(&(v.min(u), v.max(u)))
                    || !self.view.passes(u)
                {
                    continue;
                }
                let cost = route.cost + self.cost.hop(w, g.node(u).extract_word_count);
                let mut nodes = Vec::with_capacity(route.nodes.len() + 1);
                nodes.extend_from_slice(&route.nodes);
                nodes.push(u);
                let improves = best.get(&u).is_none_or(|(c, p)| cmp_routes(cost, &nodes, *c, p) == Ordering::Less);
                if improves {
                    best.insert(u, (cost, nodes.clone()));
                    heap.push(Label(Route { nodes, cost }));
                }
            }
        }
        None
    }

    fn check_budget(&self, route: &Route) -> Result<(), PathError> {
        let hops = route.nodes.len() - 1;
        if hops > self.max_hops {
            return Err(PathError::HopBudgetExceeded { hops, budget: self.max_hops });
        }
        Ok(())
    }

    /// Minimum-cost path from `src` to `dst`; equal-cost paths resolve to
    /// the lexicographically smallest sequence.
    pub fn shortest_path(&self, src: &str, dst: &str) -> Result<PathResult, PathError> {
        let (s, d) = (self.endpoint(src)?, self.endpoint(dst)?);
        let route = self.dijkstra(s, d, &HashSet::new(), &HashSet::new()).ok_or_else(|| self.no_path(s, d))?;
        self.check_budget(&route)?;
        Ok(self.result(&route))
    }

    /// Up to `k` loopless paths in `(cost, sequence)` order (Yen's
    /// algorithm). Paths over the hop budget are skipped.
    pub fn k_shortest_paths(&self, src: &str, dst: &str, k: usize) -> Result<Vec<PathResult>, PathError> {
        if k == 0 || k > MAX_K {
            return Err(PathError::InvalidK(k));
        }
        let (s, d) = (self.endpoint(src)?, self.endpoint(dst)?);
        let routes = self.yen(s, d, k)?;
        Ok(routes.iter().map(|r| self.result(r)).collect())
    }

    fn yen(&self, s: u32, d: u32, k: usize) -> Result<Vec<Route>, PathError> {
        let first = self.dijkstra(s, d, &HashSet::new(), &HashSet::new()).ok_or_else(|| self.no_path(s, d))?;
        // Over-budget paths still seed deviations, so generation continues
        // past them up to this many paths.
        let generation_cap = 10 * k + 100;
        let mut found: Vec<Route> = vec![first];
        let mut accepted: Vec<Route> = Vec::new();
        let mut candidates: Vec<Route> = Vec::new();
        let mut seen: HashSet<Vec<u32>> = HashSet::new();
        seen.insert(found[0].nodes.clone());
        let mut over_budget = None;
        loop {
            let last = found.last().expect("at least one path").clone();
            match self.check_budget(&last) {
                Ok(()) => {
                    accepted.push(last.clone());
                    if accepted.len() == k {
                        break;
                    }
                }
                Err(e) => {
                    over_budget.get_or_insert(e);
                }
            }
            if found.len() >= generation_cap {
                break;
            }
            for i in 0..last.nodes.len() - 1 {
                let spur = last.nodes[i];
                let root = &last.nodes[..=i];
                let blocked_edges: HashSet<(u32, u32)> = found
                    .iter()
                    .filter(|p| p.nodes.len() > i + 1 && &p.nodes[..=i] == root)
                    .map(|p| (p.nodes[i].min(p.nodes[i + 1]), p.nodes[i].max(p.nodes[i + 1])))
                    .collect();
                let blocked_nodes: HashSet<u32> = root[..i].iter().copied().collect();
                if let Some(spur_route) = self.dijkstra(spur, d, &blocked_nodes, &blocked_edges) {
                    let mut nodes = root[..i].to_vec();
                    nodes.extend_from_slice(&spur_route.nodes);
                    if seen.insert(nodes.clone()) {
                        let cost = self.route_cost(&nodes);
                        candidates.push(Route { nodes, cost });
                    }
                }
            }
            let Some(best) = (0..candidates.len()).min_by(|&a, &b| {
                let (x, y) = (&candidates[a], &candidates[b]);
                cmp_routes(x.cost, &x.nodes, y.cost, &y.nodes)
            }) else {
                break;
            };
            found.push(candidates.swap_remove(best));
        }
        if accepted.is_empty() {
            return Err(over_budget.unwrap_or_else(|| self.no_path(s, d)));
        }
        Ok(accepted)
    }

    /// Chains consecutive waypoints. For each pair the `per_segment_k`
    /// cheapest segments are computed; combinations are tried in ascending
    /// total cost until one repeats no node other than the shared junctions.
    pub fn multi_waypoint_path(&self, waypoints: &[&str], per_segment_k: usize) -> Result<PathResult, PathError> {
        if waypoints.len() < 2 {
            return Err(PathError::TooFewWaypoints);
        }
        if per_segment_k == 0 || per_segment_k > MAX_K {
            return Err(PathError::InvalidK(per_segment_k));
        }
        let idx: Vec<u32> = waypoints.iter().map(|w| self.endpoint(w)).collect::<Result<_, _>>()?;
        let mut segments: Vec<Vec<Route>> = Vec::with_capacity(idx.len() - 1);
        for pair in idx.windows(2) {
            segments.push(self.yen(pair[0], pair[1], per_segment_k)?);
        }

        let stitch = |combo: &[usize]| -> Vec<u32> {
            let mut nodes = segments[0][combo[0]].nodes.clone();
            for (seg, &choice) in segments.iter().zip(combo).skip(1) {
                nodes.extend_from_slice(&seg[choice].nodes[1..]);
            }
            nodes
        };
        let combo_cost = |combo: &[usize]| -> f64 { segments.iter().zip(combo).map(|(s, &c)| s[c].cost).sum() };

        let mut heap = BinaryHeap::new();
        let mut visited: HashSet<Vec<usize>> = HashSet::new();
        let start = vec![0usize; segments.len()];
        heap.push(Label(Route { nodes: stitch(&start), cost: combo_cost(&start) }));
        let mut combos: HashMap<Vec<u32>, Vec<usize>> = HashMap::new();
        combos.insert(stitch(&start), start.clone());
        visited.insert(start);
        let mut over_budget = None;
        while let Some(Label(route)) = heap.pop() {
            let combo = combos.remove(&route.nodes).expect("every queued route has a combo");
            let mut distinct = HashSet::with_capacity(route.nodes.len());
            if route.nodes.iter().all(|n| distinct.insert(*n)) {
                let route = Route { cost: self.route_cost(&route.nodes), nodes: route.nodes };
                match self.check_budget(&route) {
                    Ok(()) => return Ok(self.result(&route)),
                    Err(e) => {
                        over_budget.get_or_insert(e);
                    }
                }
            }
            for seg in 0..segments.len() {
                if combo[seg] + 1 >= segments[seg].len() {
                    continue;
                }
                let mut next = combo.clone();
                next[seg] += 1;
                if visited.insert(next.clone()) {
                    let nodes = stitch(&next);
                    let cost = combo_cost(&next);
                    // Distinct combos can stitch to one sequence only when a
                    // repeated node hides the difference; the first one wins.
                    if let std::collections::hash_map::Entry::Vacant(e) = combos.entry(nodes.clone()) {
                        e.insert(next);
                        heap.push(Label(Route { nodes, cost }));
                    }
                }
            }
        }
        Err(over_budget.unwrap_or(PathError::NoDisjointCombination))
    }
}
