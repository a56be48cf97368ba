//! Nearest-neighbor retrieval over entity embeddings.
//!
//! `Exact` mode is a brute-force cosine scan. `Approximate` mode builds a
//! hierarchical navigable small-world graph (M = 16, build beam 200, query
//! beam 64) and re-scores its candidates with exact cosine, so returned
//! similarities are always exact even when the candidate set is not.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{cosine_unchecked, EmbeddingVector};

const MAX_CONNECTIONS: usize = 16;
const MAX_CONNECTIONS_LAYER0: usize = 2 * MAX_CONNECTIONS;
const BUILD_BEAM: usize = 200;
const QUERY_BEAM: usize = 64;
const LEVEL_SEED: u64 = 0x0a17_3a5e;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IndexError {
    #[error("dimension mismatch: index has dim {expected}, got {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error("duplicate entity id {0:?}")]
    DuplicateId(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum IndexMode {
    #[default]
    Exact,
    Approximate,
}

impl std::str::FromStr for IndexMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "exact" => Ok(IndexMode::Exact),
            "approximate" | "approx" | "ann" => Ok(IndexMode::Approximate),
            other => Err(format!("unknown index mode {other:?} (exact|approximate)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Neighbor {
    pub entity_id: String,
    pub similarity: f64,
}

/// Result order: descending similarity, then ascending id.
fn rank_order(a: &(f64, &str), b: &(f64, &str)) -> Ordering {
    b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1))
}

#[derive(Debug, Clone)]
pub struct VectorIndex {
    dim: usize,
    mode: IndexMode,
    ids: Vec<String>,
    vectors: Vec<EmbeddingVector>,
    positions: HashMap<String, usize>,
    graph: Option<SmallWorld>,
}

/// Builds an index. All vectors must share one dimension and ids must be
/// unique; an empty input gives an empty index that answers every query
/// with no results.
pub fn build_index(entities: Vec<(String, EmbeddingVector)>, mode: IndexMode) -> Result<VectorIndex, IndexError> {
    let dim = entities.first().map_or(0, |(_, v)| v.dim());
    let mut ids = Vec::with_capacity(entities.len());
    let mut vectors = Vec::with_capacity(entities.len());
    let mut positions = HashMap::with_capacity(entities.len());
    for (id, v) in entities {
        if v.dim() != dim {
            return Err(IndexError::DimMismatch { expected: dim, found: v.dim() });
        }
        if positions.insert(id.clone(), ids.len()).is_some() {
            return Err(IndexError::DuplicateId(id));
        }
        ids.push(id);
        vectors.push(v);
    }
    let graph = match mode {
        IndexMode::Exact => None,
        IndexMode::Approximate => Some(SmallWorld::build(&vectors)),
    };
    Ok(VectorIndex { dim, mode, ids, vectors, positions, graph })
}

impl VectorIndex {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn mode(&self) -> IndexMode {
        self.mode
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn vector(&self, entity_id: &str) -> Option<&EmbeddingVector> {
        self.positions.get(entity_id).map(|&i| &self.vectors[i])
    }

    fn check_dim(&self, q: &EmbeddingVector) -> Result<(), IndexError> {
        if !self.is_empty() && q.dim() != self.dim {
            return Err(IndexError::DimMismatch { expected: self.dim, found: q.dim() });
        }
        Ok(())
    }

    /// The `k` most similar entities to `q`, never including `exclude`.
    pub fn query_topk(
        &self,
        q: &EmbeddingVector,
        k: usize,
        exclude: Option<&str>,
    ) -> Result<Vec<Neighbor>, IndexError> {
        self.check_dim(q)?;
        if k == 0 || self.is_empty() {
            return Ok(Vec::new());
        }
        let candidates: Vec<usize> = match &self.graph {
            None => (0..self.len()).collect(),
            Some(g) => g.search(&self.vectors, q.values(), QUERY_BEAM.max(k + 1)),
        };
        let mut scored: Vec<(f64, &str)> = candidates
            .into_iter()
            .filter(|&i| Some(self.ids[i].as_str()) != exclude)
            .map(|i| (cosine_unchecked(q.values(), self.vectors[i].values()), self.ids[i].as_str()))
            .collect();
        if scored.len() > k {
            scored.select_nth_unstable_by(k - 1, rank_order);
            scored.truncate(k);
        }
        scored.sort_by(rank_order);
        Ok(scored.into_iter().map(|(similarity, id)| Neighbor { entity_id: id.to_string(), similarity }).collect())
    }

    /// The most similar entity accepted by `accept`, by exhaustive scan.
    pub fn best_match(
        &self,
        q: &EmbeddingVector,
        mut accept: impl FnMut(&str) -> bool,
    ) -> Result<Option<Neighbor>, IndexError> {
        self.check_dim(q)?;
        let mut best: Option<(f64, &str)> = None;
        for (id, v) in self.ids.iter().zip(&self.vectors) {
            if !accept(id) {
                continue;
            }
            let cand = (cosine_unchecked(q.values(), v.values()), id.as_str());
            if best.is_none_or(|b| rank_order(&cand, &b) == Ordering::Less) {
                best = Some(cand);
            }
        }
        Ok(best.map(|(similarity, id)| Neighbor { entity_id: id.to_string(), similarity }))
    }
}

/// `(distance, node)` with a total order, smallest first.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Scored(f64, u32);

impl Eq for Scored {}

impl PartialOrd for Scored {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scored {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

#[derive(Debug, Clone)]
struct SmallWorld {
    /// `links[node][level]` = neighbor list.
    links: Vec<Vec<Vec<u32>>>,
    entry: Option<u32>,
    top_level: usize,
}

fn distance(a: &[f32], b: &[f32]) -> f64 {
    1.0 - cosine_unchecked(a, b)
}

impl SmallWorld {
    fn build(vectors: &[EmbeddingVector]) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(LEVEL_SEED);
        let level_mult = 1.0 / (MAX_CONNECTIONS as f64).ln();
        let mut g = SmallWorld { links: Vec::with_capacity(vectors.len()), entry: None, top_level: 0 };
        for node in 0..vectors.len() {
            let u: f64 = rng.gen_range(f64::EPSILON..1.0);
            let level = (-u.ln() * level_mult).floor() as usize;
            g.insert(vectors, node as u32, level);
        }
        g
    }

    fn insert(&mut self, vectors: &[EmbeddingVector], node: u32, level: usize) {
        self.links.push(vec![Vec::new(); level + 1]);
        let Some(mut entry) = self.entry else {
            self.entry = Some(node);
            self.top_level = level;
            return;
        };
        let q = vectors[node as usize].values();
        for l in (level + 1..=self.top_level).rev() {
            entry = self.greedy(vectors, q, entry, l);
        }
        let mut entries = vec![entry];
        for l in (0..=level.min(self.top_level)).rev() {
            let found = self.search_layer(vectors, q, &entries, BUILD_BEAM, l);
            let max_links = if l == 0 { MAX_CONNECTIONS_LAYER0 } else { MAX_CONNECTIONS };
            let chosen = select_neighbors(vectors, &found, MAX_CONNECTIONS);
            self.links[node as usize][l] = chosen.clone();
            for &nb in &chosen {
                let list = &mut self.links[nb as usize][l];
                list.push(node);
                if list.len() > max_links {
                    let base = vectors[nb as usize].values();
                    let mut cands: Vec<Scored> =
                        list.iter().map(|&x| Scored(distance(base, vectors[x as usize].values()), x)).collect();
                    cands.sort();
                    self.links[nb as usize][l] = select_neighbors(vectors, &cands, max_links);
                }
            }
            entries = found.iter().map(|s| s.1).collect();
        }
        if level > self.top_level {
            self.top_level = level;
            self.entry = Some(node);
        }
    }

    fn greedy(&self, vectors: &[EmbeddingVector], q: &[f32], mut cur: u32, level: usize) -> u32 {
        let mut best = distance(q, vectors[cur as usize].values());
        loop {
            let mut moved = false;
            for &nb in &self.links[cur as usize][level] {
                let d = distance(q, vectors[nb as usize].values());
                if Scored(d, nb) < Scored(best, cur) {
                    best = d;
                    cur = nb;
                    moved = true;
                }
            }
            if !moved {
                return cur;
            }
        }
    }

    /// Beam search on one layer; returns up to `beam` nodes, nearest first.
    fn search_layer(
        &self,
        vectors: &[EmbeddingVector],
        q: &[f32],
        entries: &[u32],
        beam: usize,
        level: usize,
    ) -> Vec<Scored> {
        let mut visited: HashSet<u32> = entries.iter().copied().collect();
        let mut frontier: BinaryHeap<Reverse<Scored>> = BinaryHeap::new();
        let mut best: BinaryHeap<Scored> = BinaryHeap::new();
        for &e in entries {
            let s = Scored(distance(q, vectors[e as usize].values()), e);
            frontier.push(Reverse(s));
            best.push(s);
        }
        while best.len() > beam {
            best.pop();
        }
        while let Some(Reverse(cur)) = frontier.pop() {
            if best.len() >= beam && best.peek().is_some_and(|w| cur > *w) {
                break;
            }
            for &nb in &self.links[cur.1 as usize][level] {
                if !visited.insert(nb) {
                    continue;
                }
                let s = Scored(distance(q, vectors[nb as usize].values()), nb);
                if best.len() < beam || best.peek().is_some_and(|w| s < *w) {
                    frontier.push(Reverse(s));
                    best.push(s);
                    if best.len() > beam {
                        best.pop();
                    }
                }
            }
        }
        best.into_sorted_vec()
    }

    fn search(&self, vectors: &[EmbeddingVector], q: &[f32], beam: usize) -> Vec<usize> {
        let Some(mut entry) = self.entry else {
            return Vec::new();
        };
        for l in (1..=self.top_level).rev() {
            entry = self.greedy(vectors, q, entry, l);
        }
        self.search_layer(vectors, q, &[entry], beam, 0).into_iter().map(|s| s.1 as usize).collect()
    }
}

/// Diversity heuristic: keep a candidate only if it is closer to the base
/// than to every neighbor kept so far, then top up with the nearest pruned
/// candidates.
fn select_neighbors(vectors: &[EmbeddingVector], sorted: &[Scored], m: usize) -> Vec<u32> {
    let mut kept: Vec<u32> = Vec::with_capacity(m);
    let mut pruned = Vec::new();
    for &Scored(d, c) in sorted {
        if kept.len() >= m {
            break;
        }
        let cv = vectors[c as usize].values();
        if kept.iter().all(|&k| distance(cv, vectors[k as usize].values()) > d) {
            kept.push(c);
        } else {
            pruned.push(c);
        }
    }
    for c in pruned {
        if kept.len() >= m {
            break;
        }
        kept.push(c);
    }
    kept
}
