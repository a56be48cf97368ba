//! Fixtures shared by the integration tests and the acceptance runner.
#![allow(dead_code)]

use std::path::{Path, PathBuf};

use argweave::engine::{build_pipeline, BuildSettings, CaseRequest, Engine};
use argweave::render::render_cases_text;
use argweave_core::corpus::{entity_view, load_corpus, Corpus, EvidenceDoc, Granularity};
use argweave_core::embedding::{Embedder, EmbeddingVector, HashingEmbedder, HASHED_PROVIDER_ID};
use argweave_core::evalharness::{load_pairs, rank_graphs, EvalPair};
use argweave_core::pathing::CostKind;
use argweave_core::semgraph::{graph_to_bytes, Edge, GraphConfig, Node, SemanticGraph};

pub const GRAPH_NAME: &str = "Hashed-DebateKG-abs";
pub const BLESS_ENV: &str = "ARGWEAVE_BLESS";

pub fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

pub fn mini_corpus_path() -> PathBuf {
    repo_root().join("data/mini_corpus.jsonl")
}

pub fn eval_pairs() -> Vec<EvalPair> {
    load_pairs(repo_root().join("data/eval_pairs.jsonl")).expect("bundled eval pairs")
}

pub fn mini_corpus() -> Corpus {
    let (corpus, report) = load_corpus(mini_corpus_path(), true).expect("bundled corpus");
    assert_eq!(report.rejected, 0);
    corpus
}

/// Engine over the bundled corpus with the hashing provider and default
/// settings, plus the serialized graph.
pub fn mini_engine() -> (Engine, Vec<u8>) {
    let corpus = mini_corpus();
    let (graph, vectors) = build_pipeline(&corpus, &BuildSettings::default(), None, |_, _| {}).expect("build");
    let bytes = graph_to_bytes(&graph);
    (Engine::new(corpus, graph, vectors).expect("engine"), bytes)
}

/// The three regression artifacts: graph file, eval report and the
/// rendered best case for the first eval pair.
pub struct Artifacts {
    pub graph: Vec<u8>,
    pub eval_report: String,
    pub case_text: String,
}

pub fn regression_artifacts() -> Artifacts {
    let (engine, graph) = mini_engine();
    let pairs = eval_pairs();
    let row = engine.evaluate(GRAPH_NAME, &pairs, engine.edge_cost(CostKind::SemanticDistance, 0.5)).expect("eval");
    let eval_report = rank_graphs(vec![row]).render_text();
    let mut req = CaseRequest::new(pairs[0].start.clone(), pairs[0].end.clone());
    req.k = 1;
    let cases = engine.cases(&req).expect("case for pair 1");
    Artifacts { graph, eval_report, case_text: render_cases_text(&cases, true) }
}

/// Compares `actual` with the golden file, or rewrites it when
/// `ARGWEAVE_BLESS` is set.
pub fn check_golden(name: &str, actual: &[u8]) -> Result<(), String> {
    let path = golden_dir().join(name);
    if std::env::var_os(BLESS_ENV).is_some() {
        std::fs::create_dir_all(golden_dir()).map_err(|e| e.to_string())?;
        std::fs::write(&path, actual).map_err(|e| e.to_string())?;
        return Ok(());
    }
    let expected =
        std::fs::read(&path).map_err(|e| format!("{}: {e} (set {BLESS_ENV}=1 to create)", path.display()))?;
    if expected == actual {
        return Ok(());
    }
    let first = expected.iter().zip(actual).position(|(a, b)| a != b).unwrap_or(expected.len().min(actual.len()));
    Err(format!(
        "{name}: differs from golden at byte {first} (golden {} bytes, actual {} bytes)",
        expected.len(),
        actual.len()
    ))
}

pub fn check_all_goldens(a: &Artifacts) -> Result<(), String> {
    check_golden("mini_graph.awkg", &a.graph)?;
    check_golden("eval_report.txt", a.eval_report.as_bytes())?;
    check_golden("case_pair1.txt", a.case_text.as_bytes())
}

fn words(n: usize, stem: &str) -> String {
    (0..n).map(|i| format!("{stem}{}", i % 7)).collect::<Vec<_>>().join(" ")
}

/// Two node-disjoint routes from S to T with equal similarities. The
/// lexicographically smaller route passes through a long extract.
pub fn two_path_engine() -> Engine {
    let rows = [
        ("a", "alpha route stays long", 400),
        ("b", "beta route stays short", 40),
        ("s", "solar storms begin here", 50),
        ("t", "tidal floods end there", 50),
    ];
    let docs = rows
        .iter()
        .map(|&(id, tag, n)| {
            let extract = words(n, id);
            EvidenceDoc::new(
                id,
                format!("{tag}. {extract}"),
                extract.clone(),
                tag,
                format!("{id} 2020"),
                "Camp",
                "Aff",
                2020,
            )
        })
        .collect();
    let corpus = Corpus::from_docs(docs).unwrap();
    let entities = entity_view(&corpus, Granularity::Abstract);
    let embedder = HashingEmbedder::default();
    let vectors: Vec<(String, EmbeddingVector)> =
        entities.iter().map(|e| (e.entity_id.clone(), embedder.embed(&e.text))).collect();
    let nodes = entities
        .iter()
        .zip(rows)
        .map(|(e, (_, _, n))| Node {
            entity_id: e.entity_id.clone(),
            parent_doc_id: e.parent_doc_id.clone(),
            extract_word_count: n as u32,
            community_id: None,
        })
        .collect();
    let edge = |a: u32, b: u32| Edge { a, b, weight: 0.8 };
    let config = GraphConfig {
        similarity_threshold: 0.01,
        ..GraphConfig::new(Granularity::Abstract, HASHED_PROVIDER_ID, embedder.dim() as u32)
    };
    let graph = SemanticGraph::from_parts(config, nodes, vec![edge(2, 0), edge(0, 3), edge(2, 1), edge(1, 3)]).unwrap();
    Engine::new(corpus, graph, vectors).unwrap()
}

pub fn two_path_pairs() -> Vec<EvalPair> {
    vec![EvalPair { start: "solar storms begin here".into(), end: "tidal floods end there".into() }]
}
