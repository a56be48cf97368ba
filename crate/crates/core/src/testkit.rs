//! Brute-force reference implementations and random fixtures, shared by the
//! test suites. Nothing here reuses the optimized code paths it checks.

use std::collections::BTreeMap;

use rand::Rng;

use crate::corpus::{Corpus, Entity, EvidenceDoc, Granularity};
use crate::embedding::EmbeddingVector;
use crate::pathing::{CostKind, EdgeCost, COST_EPS};
use crate::queryfilter::{CmpOp, FilterExpr, Literal};
use crate::semgraph::{Edge, GraphConfig, Node, SemanticGraph};

/// Random graph over ids `v00, v01, ...` with edge probability `density`.
/// With `tied`, weights are multiples of 0.05 so many paths share a cost.
pub fn random_graph(rng: &mut impl Rng, n: usize, density: f64, tied: bool) -> SemanticGraph {
    let config = GraphConfig { similarity_threshold: 0.05, ..GraphConfig::new(Granularity::Abstract, "testkit", 2) };
    let nodes = (0..n)
        .map(|i| Node {
            entity_id: format!("v{i:02}"),
            parent_doc_id: format!("d{i:02}"),
            extract_word_count: rng.gen_range(5..200),
            community_id: Some(rng.gen_range(0..3)),
        })
        .collect();
    let mut edges = Vec::new();
    for a in 0..n as u32 {
        for b in a + 1..n as u32 {
            if rng.gen_bool(density) {
                let weight = if tied { rng.gen_range(1..=19) as f32 * 0.05 } else { rng.gen_range(0.05f32..1.0) };
                edges.push(Edge { a, b, weight });
            }
        }
    }
    SemanticGraph::from_parts(config, nodes, edges).expect("generated graph is valid")
}

fn hop(graph: &SemanticGraph, cost: &EdgeCost, from: u32, to: u32) -> f64 {
    let w = graph.neighbors(from).iter().find(|(nb, _)| *nb == to).expect("adjacent").1 as f64;
    let words = graph.node(to).extract_word_count as f64;
    match cost.kind {
        CostKind::SemanticDistance => 1.0 - w,
        CostKind::LengthPenalized => 1.0 - w + cost.lambda * words / cost.norm_words,
    }
}

/// Every simple `src -> dst` path whose nodes all pass, ordered by cost
/// (within `COST_EPS`) and then by id sequence.
pub fn simple_paths(
    graph: &SemanticGraph,
    passes: &dyn Fn(u32) -> bool,
    cost: &EdgeCost,
    src: u32,
    dst: u32,
) -> Vec<(f64, Vec<String>)> {
    let mut out = Vec::new();
    if passes(src) && passes(dst) {
        let mut on_path = vec![false; graph.node_count()];
        let mut stack = vec![src];
        on_path[src as usize] = true;
        walk(graph, passes, dst, &mut on_path, &mut stack, &mut out);
    }
    let mut scored: Vec<(f64, Vec<String>)> = out
        .into_iter()
        .map(|p| {
            let c = p.windows(2).map(|w| hop(graph, cost, w[0], w[1])).fold(0.0, |a, h| a + h);
            (c, p.iter().map(|&i| graph.node(i).entity_id.clone()).collect())
        })
        .collect();
    scored.sort_by(|a, b| if (a.0 - b.0).abs() <= COST_EPS { a.1.cmp(&b.1) } else { a.0.total_cmp(&b.0) });
    scored
}

fn walk(
    graph: &SemanticGraph,
    passes: &dyn Fn(u32) -> bool,
    dst: u32,
    on_path: &mut [bool],
    stack: &mut Vec<u32>,
    out: &mut Vec<Vec<u32>>,
) {
    let v = *stack.last().expect("non-empty");
    if v == dst {
        out.push(stack.clone());
        return;
    }
    for &(u, _) in graph.neighbors(v) {
        if on_path[u as usize] || !passes(u) {
            continue;
        }
        on_path[u as usize] = true;
        stack.push(u);
        walk(graph, passes, dst, on_path, stack, out);
        stack.pop();
        on_path[u as usize] = false;
    }
}

pub fn random_unit_vectors(rng: &mut impl Rng, n: usize, dim: usize) -> Vec<(String, EmbeddingVector)> {
    (0..n)
        .map(|i| {
            let raw: Vec<f32> = (0..dim).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
            (format!("e{i:04}"), EmbeddingVector::new(raw).normalized())
        })
        .collect()
}

/// One placeholder document and one abstract-level entity per vector id,
/// with the entity id equal to the vector id.
pub fn entities_for(items: &[(String, EmbeddingVector)]) -> (Corpus, Vec<Entity>) {
    let docs =
        items.iter().map(|(id, _)| EvidenceDoc::new(id.as_str(), "text", "extract", "tag", "", "", "", 2000)).collect();
    let entities = items
        .iter()
        .map(|(id, _)| Entity {
            entity_id: id.clone(),
            parent_doc_id: id.clone(),
            granularity: Granularity::Abstract,
            ordinal: 0,
            text: String::new(),
        })
        .collect();
    (Corpus::from_docs(docs).expect("unique ids"), entities)
}

fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let mut dot = 0.0f64;
    let mut na = 0.0f64;
    let mut nb = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        dot += *x as f64 * *y as f64;
        na += *x as f64 * *x as f64;
        nb += *y as f64 * *y as f64;
    }
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0)
    }
}

/// The `k` ids most similar to `q`, by full scan, ties to the smaller id.
pub fn brute_topk(items: &[(String, EmbeddingVector)], q: &[f32], k: usize, exclude: Option<&str>) -> Vec<String> {
    let mut scored: Vec<(f64, &str)> = items
        .iter()
        .filter(|(id, _)| Some(id.as_str()) != exclude)
        .map(|(id, v)| (cosine(q, v.values()), id.as_str()))
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(b.1)));
    scored.into_iter().take(k).map(|(_, id)| id.to_string()).collect()
}

/// Edge set by definition: each item keeps its `limit` most similar others,
/// those at or above `threshold` (after rounding to `f32`) become undirected
/// edges. Keys are `(smaller id, larger id)`.
pub fn knn_edges(items: &[(String, EmbeddingVector)], threshold: f64, limit: usize) -> BTreeMap<(String, String), f32> {
    let mut edges = BTreeMap::new();
    for (id, v) in items {
        for other in brute_topk(items, v.values(), limit, Some(id)) {
            let ov = &items.iter().find(|(x, _)| *x == other).expect("known id").1;
            let w = cosine(v.values(), ov.values()) as f32;
            if w as f64 >= threshold {
                let key = if *id < other { (id.clone(), other) } else { (other, id.clone()) };
                edges.insert(key, w);
            }
        }
    }
    edges
}

/// Newman modularity of `partition` straight from the definition.
pub fn modularity(graph: &SemanticGraph, partition: &[u32], resolution: f64) -> f64 {
    let m: f64 = graph.edges().iter().map(|e| e.weight as f64).sum();
    if m == 0.0 {
        return 0.0;
    }
    let n = graph.node_count();
    let degree: Vec<f64> = (0..n as u32).map(|i| graph.neighbors(i).iter().map(|(_, w)| *w as f64).sum()).collect();
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            if partition[i] != partition[j] {
                continue;
            }
            let a = graph.weight(i as u32, j as u32).map_or(0.0, |w| w as f64);
            q += a - resolution * degree[i] * degree[j] / (2.0 * m);
        }
    }
    q / (2.0 * m)
}

/// Grammar-covering filter sources for print/parse round trips.
pub const ROUND_TRIP_CASES: [&str; 25] = [
    "camp = 'Gonzaga'",
    "camp = 'Gonzaga' AND year = 2013 AND SIMILAR('environment')",
    "NOT camp = 'a' OR tag = 'b'",
    "year != 2013",
    "year <> 2010",
    "year < 2000 OR year >= 2020",
    "wordcount <= 500 AND extractwords > 10",
    "camp LIKE '%Michigan%'",
    "tag LIKE 'K_itik%'",
    "abstract LIKE '%warming%' AND NOT doc LIKE '%hoax%'",
    "extract = 'it''s real'",
    "(camp = 'a' OR camp = 'b') AND year = 2015",
    "camp = 'a' OR camp = 'b' AND year = 2015",
    "NOT (camp = 'a' AND tag = 'b')",
    "NOT NOT year = 1",
    "((year = 1))",
    "year = -5",
    "SIMILAR('nuclear war') AND SIMILAR('extinction')",
    "SIMILAR('x') OR year = 2",
    "a = 1 AND (b = 2 OR (c = 3 AND d = 4))",
    "camp = 'x' AND (tag = 'y' AND year = 3)",
    "camp = 'x' OR (tag = 'y' OR year = 3)",
    "camp\n  = 'multi'\n  AND year > 1",
    "cAmP = 'Case' and YEAR = 2001 or not TAG like 'z%'",
    "doc = '' OR extract != '%_'",
];

const STRING_FIELDS: [&str; 5] = ["camp", "tag", "doc", "extract", "abstract"];
const NUMBER_FIELDS: [&str; 3] = ["year", "wordcount", "extractwords"];
const WORDS: [&str; 6] = ["alpha", "Beta", "it's", "gamma ray", "", "DELTA"];

/// Well-typed random filter without `SIMILAR`, nested up to `depth`.
pub fn random_filter(rng: &mut impl Rng, depth: u32) -> FilterExpr {
    if depth == 0 || rng.gen_bool(0.3) {
        if rng.gen_bool(0.5) {
            let field = STRING_FIELDS[rng.gen_range(0..STRING_FIELDS.len())];
            let op = [CmpOp::Eq, CmpOp::Ne, CmpOp::Like][rng.gen_range(0..3)];
            let word = WORDS[rng.gen_range(0..WORDS.len())];
            let value = if op == CmpOp::Like { format!("%{}%", &word[..word.len().min(3)]) } else { word.to_string() };
            return FilterExpr::compare(field, op, Literal::Str(value));
        }
        let field = NUMBER_FIELDS[rng.gen_range(0..NUMBER_FIELDS.len())];
        let op = [CmpOp::Eq, CmpOp::Ne, CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge][rng.gen_range(0..6)];
        return FilterExpr::compare(field, op, Literal::Int(rng.gen_range(0..6)));
    }
    match rng.gen_range(0..3) {
        0 => FilterExpr::not(random_filter(rng, depth - 1)),
        1 => FilterExpr::and(random_filter(rng, depth - 1), random_filter(rng, depth - 1)),
        _ => FilterExpr::or(random_filter(rng, depth - 1), random_filter(rng, depth - 1)),
    }
}

/// Random document over the same small vocabulary as [`random_filter`].
pub fn random_doc(rng: &mut impl Rng) -> EvidenceDoc {
    let mut pick = || WORDS[rng.gen_range(0..WORDS.len())].to_string();
    let (full, extract, abs, camp, tag) = (pick(), pick(), pick(), pick(), pick());
    let year = rng.gen_range(0..6);
    EvidenceDoc::new("doc", full, extract, abs, "cite", camp, tag, year)
}

const FUZZ_TOKENS: [&str; 28] = [
    "camp",
    "year",
    "tag",
    "bogus",
    "=",
    "!=",
    "<>",
    "<",
    "<=",
    ">",
    ">=",
    "LIKE",
    "AND",
    "OR",
    "NOT",
    "(",
    ")",
    "SIMILAR",
    "'x'",
    "'it''s'",
    "'",
    "2013",
    "-7",
    "99999999999999999999999",
    "@",
    "\n",
    "!",
    "-",
];

/// Random token soup, sometimes with raw characters spliced in, or a
/// printed valid filter with one local edit.
pub fn fuzz_input(rng: &mut impl Rng) -> String {
    if rng.gen_bool(0.3) {
        let valid = random_filter(rng, 3).to_string();
        return mutate(rng, valid);
    }
    let n = rng.gen_range(0..16);
    let mut out = String::new();
    for _ in 0..n {
        if rng.gen_bool(0.1) {
            out.push(char::from_u32(rng.gen_range(0x20..0x3000)).unwrap_or('?'));
        } else {
            out.push_str(FUZZ_TOKENS[rng.gen_range(0..FUZZ_TOKENS.len())]);
        }
        if rng.gen_bool(0.8) {
            out.push(' ');
        }
    }
    out
}

fn mutate(rng: &mut impl Rng, src: String) -> String {
    let bounds: Vec<usize> = src.char_indices().map(|(i, _)| i).chain([src.len()]).collect();
    let at = bounds[rng.gen_range(0..bounds.len())];
    let (head, tail) = src.split_at(at);
    match rng.gen_range(0..5) {
        0 => src,
        1 => head.to_string(),
        2 => format!("{head}{}", tail.chars().skip(1).collect::<String>()),
        3 => format!("{head}{} {tail}", FUZZ_TOKENS[rng.gen_range(0..FUZZ_TOKENS.len())]),
        _ => format!("{tail}{head}"),
    }
}
