//! Debate cases: resolve free-text arguments to graph entities, connect them
//! with constrained paths, and annotate each entry with highlight spans.

use serde::Serialize;
use thiserror::Error;

use crate::annindex::{IndexError, VectorIndex};
use crate::corpus::{word_count, Corpus};
use crate::embedding::{cosine_similarity, Embedder};
use crate::pathing::{PathError, PathResult, Pathfinder, SubgraphView, DEFAULT_SEGMENT_K};

pub const DEFAULT_TOP_FRACTION: f64 = 0.2;

/// Inclusive `(first, last)` whitespace-token indices into an extract.
pub type Span = (usize, usize);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CaseError {
    #[error("{0} argument is empty")]
    EmptyQuery(String),
    #[error("no entity satisfying the constraint matches the {0} argument")]
    NoCandidate(String),
    #[error("entity {0} has no source document in the corpus")]
    MissingDoc(String),
    #[error(transparent)]
    Path(#[from] PathError),
    #[error(transparent)]
    Index(#[from] IndexError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Resolved {
    pub entity_id: String,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseEntry {
    pub entity_id: String,
    pub tag: String,
    pub citation: String,
    pub extract: String,
    pub highlight_spans: Vec<Span>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DebateCase {
    pub entries: Vec<CaseEntry>,
    pub total_cost: f64,
    pub total_extract_words: usize,
}

/// Read-only inputs shared by every case request.
#[derive(Clone, Copy)]
pub struct CaseContext<'a> {
    pub corpus: &'a Corpus,
    pub index: &'a VectorIndex,
    pub embedder: &'a dyn Embedder,
}

/// The argument whose embedding is closest to `query` among graph entities
/// that pass the view. `role` names the argument in errors.
pub fn resolve_argument(
    query: &str,
    role: &str,
    view: &SubgraphView<'_>,
    index: &VectorIndex,
    embedder: &dyn Embedder,
) -> Result<Resolved, CaseError> {
    if query.trim().is_empty() {
        return Err(CaseError::EmptyQuery(role.to_string()));
    }
    let q = embedder.embed(query);
    let hit = index.best_match(&q, |id| view.passes_id(id) == Some(true))?;
    hit.map(|n| Resolved { entity_id: n.entity_id, similarity: n.similarity })
        .ok_or_else(|| CaseError::NoCandidate(role.to_string()))
}

/// Marks the `ceil(top_fraction * n)` extract tokens most similar to
/// `previous_tag`, earlier tokens winning ties, and merges runs of marked
/// tokens into spans.
///
/// # Panics
/// If `top_fraction` is not in `(0, 1]`.
pub fn highlight_overlap(previous_tag: &str, extract: &str, embedder: &dyn Embedder, top_fraction: f64) -> Vec<Span> {
    assert!(top_fraction > 0.0 && top_fraction <= 1.0, "top_fraction must be in (0, 1]");
    let tokens: Vec<&str> = extract.split_whitespace().collect();
    if tokens.is_empty() {
        return Vec::new();
    }
    let prev = embedder.embed(previous_tag);
    let mut scored: Vec<(f64, usize)> = tokens
        .iter()
        .enumerate()
        .map(|(i, t)| (cosine_similarity(&embedder.embed(t), &prev).unwrap_or(0.0), i))
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let take = ((top_fraction * tokens.len() as f64).ceil() as usize).clamp(1, tokens.len());
    let mut marked = vec![false; tokens.len()];
    for &(_, i) in &scored[..take] {
        marked[i] = true;
    }
    let mut spans: Vec<Span> = Vec::new();
    for (i, &m) in marked.iter().enumerate() {
        if !m {
            continue;
        }
        match spans.last_mut() {
            Some(last) if last.1 + 1 == i => last.1 = i,
            _ => spans.push((i, i)),
        }
    }
    spans
}

pub fn case_word_count(case: &DebateCase) -> usize {
    case.entries.iter().map(|e| word_count(&e.extract)).sum()
}

/// Ranked cases from `start` through `middles` to `end`.
///
/// Without middles this returns up to `k` loopless paths; with middles it
/// returns the single cheapest node-disjoint waypoint chain.
pub fn build_case(
    ctx: CaseContext<'_>,
    pathfinder: &Pathfinder<'_, '_>,
    view: &SubgraphView<'_>,
    start: &str,
    middles: &[&str],
    end: &str,
    k: usize,
) -> Result<Vec<DebateCase>, CaseError> {
    let mut waypoints = vec![resolve_argument(start, "start", view, ctx.index, ctx.embedder)?.entity_id];
    for (i, m) in middles.iter().enumerate() {
        let role = format!("middle {}", i + 1);
        waypoints.push(resolve_argument(m, &role, view, ctx.index, ctx.embedder)?.entity_id);
    }
    waypoints.push(resolve_argument(end, "end", view, ctx.index, ctx.embedder)?.entity_id);

    let paths = if middles.is_empty() {
        pathfinder.k_shortest_paths(&waypoints[0], &waypoints[1], k)?
    } else {
        let ids: Vec<&str> = waypoints.iter().map(String::as_str).collect();
        vec![pathfinder.multi_waypoint_path(&ids, DEFAULT_SEGMENT_K)?]
    };
    paths.iter().map(|p| assemble(ctx, view, p)).collect()
}

fn assemble(ctx: CaseContext<'_>, view: &SubgraphView<'_>, path: &PathResult) -> Result<DebateCase, CaseError> {
    let graph = view.graph();
    let mut entries: Vec<CaseEntry> = Vec::with_capacity(path.node_sequence.len());
    for id in &path.node_sequence {
        let doc = graph
            .node_index(id)
            .and_then(|i| ctx.corpus.get(&graph.node(i).parent_doc_id))
            .ok_or_else(|| CaseError::MissingDoc(id.clone()))?;
        let highlight_spans = match entries.last() {
            Some(prev) => highlight_overlap(&prev.tag, &doc.extract, ctx.embedder, DEFAULT_TOP_FRACTION),
            None => Vec::new(),
        };
        entries.push(CaseEntry {
            entity_id: id.clone(),
            tag: doc.abstract_text.clone(),
            citation: doc.citation.clone(),
            extract: doc.extract.clone(),
            highlight_spans,
        });
    }
    let mut case = DebateCase { entries, total_cost: path.total_cost, total_extract_words: 0 };
    case.total_extract_words = case_word_count(&case);
    Ok(case)
}
