//! Loaded state and the operations shared by the CLI and the HTTP service.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use argweave_core::annindex::{build_index, IndexError, IndexMode, VectorIndex};
use argweave_core::casebuilder::{build_case, CaseContext, CaseError, DebateCase};
use argweave_core::corpus::{entity_view, load_corpus, Corpus, CorpusError, Granularity};
use argweave_core::embedding::{
    EmbedError, Embedder, EmbeddingVector, HashingEmbedder, VectorFile, DEFAULT_DIM, HASHED_PROVIDER_ID,
};
use argweave_core::evalharness::{evaluate_graph, EvalError, EvalPair, EvalRow};
use argweave_core::pathing::{
    subgraph_view, CostKind, EdgeCost, PathConstraint, PathError, Pathfinder, DEFAULT_K, DEFAULT_LAMBDA, MAX_K,
};
use argweave_core::queryfilter::{parse_filter, select_entities, FilterError, FilterErrorKind, Position};
use argweave_core::semgraph::{
    build_graph_with_progress, graph_stats, load_graph, louvain_communities, pagerank, CommunityAssignment,
    GraphConfig, GraphError, GraphStats, PageRank, SemanticGraph, DEFAULT_EDGE_LIMIT, DEFAULT_SIMILARITY_THRESHOLD,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DATA_DIR_ENV: &str = "ARGWEAVE_DATA_DIR";
pub const CORPUS_FILE: &str = "corpus.jsonl";
pub const VECTORS_FILE: &str = "vectors.awev";
pub const GRAPH_FILE: &str = "graph.awkg";

const LOUVAIN_RESOLUTION: f64 = 1.0;
const PAGERANK_DAMPING: f64 = 0.85;
const PAGERANK_TOL: f64 = 1e-10;
const PAGERANK_MAX_ITER: usize = 1000;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Case(#[from] CaseError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{0}")]
    InvalidRequest(String),
    #[error("graph was built with provider {0:?}; free-text queries need {HASHED_PROVIDER_ID:?}")]
    NoQueryEmbedder(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl From<PathError> for EngineError {
    fn from(e: PathError) -> Self {
        match e {
            PathError::Filter(f) => EngineError::Filter(f),
            other => EngineError::Case(CaseError::Path(other)),
        }
    }
}

impl EngineError {
    /// Stable machine-readable error code.
    pub fn code(&self) -> &'static str {
        match self {
            EngineError::Corpus(_) => "CORPUS_REJECTED",
            EngineError::Embed(_) => "VECTOR_FILE",
            EngineError::Index(_) => "INDEX",
            EngineError::Graph(_) => "GRAPH_FILE",
            EngineError::Filter(f) => match f.kind {
                FilterErrorKind::Syntax => "SYNTAX_ERROR",
                FilterErrorKind::Type => "TYPE_ERROR",
                FilterErrorKind::UnknownField => "UNKNOWN_FIELD",
            },
            EngineError::Case(c) => match c {
                CaseError::EmptyQuery(_) => "EMPTY_QUERY",
                CaseError::NoCandidate(_) => "NO_CANDIDATE",
                CaseError::MissingDoc(_) => "MISSING_DOC",
                CaseError::Index(_) => "INDEX",
                CaseError::Path(p) => match p {
                    PathError::NoPath { .. } => "NO_PATH",
                    PathError::EndpointExcluded(_) => "ENDPOINT_EXCLUDED",
                    PathError::UnknownEntity(_) => "UNKNOWN_ENTITY",
                    PathError::HopBudgetExceeded { .. } => "HOP_BUDGET_EXCEEDED",
                    PathError::NoDisjointCombination => "NO_DISJOINT_COMBINATION",
                    PathError::InvalidK(_) | PathError::TooFewWaypoints | PathError::InvalidCost(_) => {
                        "INVALID_REQUEST"
                    }
                    PathError::Filter(_) => "TYPE_ERROR",
                },
            },
            EngineError::Eval(_) => "EVAL",
            EngineError::InvalidRequest(_) => "INVALID_REQUEST",
            EngineError::NoQueryEmbedder(_) => "NO_QUERY_EMBEDDER",
            EngineError::Io { .. } => "IO",
        }
    }

    pub fn position(&self) -> Option<Position> {
        match self {
            EngineError::Filter(f) => f.position,
            _ => None,
        }
    }

    /// True when the caller sent something malformed, as opposed to a
    /// well-formed request that has no answer.
    pub fn is_validation(&self) -> bool {
        matches!(self, EngineError::Filter(_) | EngineError::InvalidRequest(_))
            || matches!(self, EngineError::Case(CaseError::EmptyQuery(_)))
            || self.code() == "INVALID_REQUEST"
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> EngineError + '_ {
    move |source| EngineError::Io { path: path.to_path_buf(), source }
}

/// Default file locations inside a data directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataPaths {
    pub corpus: PathBuf,
    pub vectors: PathBuf,
    pub graph: PathBuf,
}

impl DataPaths {
    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let dir = dir.as_ref();
        DataPaths { corpus: dir.join(CORPUS_FILE), vectors: dir.join(VECTORS_FILE), graph: dir.join(GRAPH_FILE) }
    }
}

/// Graph construction parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BuildSettings {
    pub granularity: Granularity,
    pub threshold: f64,
    pub edge_limit: u32,
    pub index: IndexMode,
    pub dim: usize,
    pub communities: bool,
}

impl Default for BuildSettings {
    fn default() -> Self {
        BuildSettings {
            granularity: Granularity::Abstract,
            threshold: DEFAULT_SIMILARITY_THRESHOLD,
            edge_limit: DEFAULT_EDGE_LIMIT,
            index: IndexMode::Exact,
            dim: DEFAULT_DIM,
            communities: true,
        }
    }
}

pub fn hashed_vectors(corpus: &Corpus, granularity: Granularity, dim: usize) -> Vec<(String, EmbeddingVector)> {
    let embedder = HashingEmbedder::new(dim);
    entity_view(corpus, granularity).into_iter().map(|e| (e.entity_id, embedder.embed(&e.text))).collect()
}

/// Builds a graph from `vectors` (or hashed vectors when `None`), with
/// Louvain communities attached when the settings ask for them.
pub fn build_pipeline(
    corpus: &Corpus,
    settings: &BuildSettings,
    vectors: Option<(String, Vec<(String, EmbeddingVector)>)>,
    progress: impl FnMut(usize, usize),
) -> Result<(SemanticGraph, Vec<(String, EmbeddingVector)>), EngineError> {
    let (provider, vectors) = match vectors {
        Some(v) => v,
        None => (HASHED_PROVIDER_ID.to_string(), hashed_vectors(corpus, settings.granularity, settings.dim)),
    };
    let dim = vectors.first().map_or(settings.dim, |(_, v)| v.dim());
    let entities = entity_view(corpus, settings.granularity);
    let index = build_index(vectors.clone(), settings.index)?;
    let config = GraphConfig {
        similarity_threshold: settings.threshold,
        edge_limit: settings.edge_limit,
        ..GraphConfig::new(settings.granularity, provider, dim as u32)
    };
    let mut graph = build_graph_with_progress(corpus, &entities, &index, config, progress)?;
    if settings.communities {
        let c = louvain_communities(&graph, LOUVAIN_RESOLUTION);
        graph.set_communities(&c);
    }
    Ok((graph, vectors))
}

/// Free-text inputs and constraints for one case request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseRequest {
    pub start: String,
    pub end: String,
    #[serde(default)]
    pub middles: Vec<String>,
    #[serde(default)]
    pub filter: Option<String>,
    #[serde(default)]
    pub communities: Option<Vec<u32>>,
    #[serde(default)]
    pub keywords_include: Vec<String>,
    #[serde(default)]
    pub keywords_exclude: Vec<String>,
    #[serde(default)]
    pub max_extract_words: Option<u32>,
    #[serde(default)]
    pub cost: CostKind,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_k")]
    pub k: usize,
}

fn default_lambda() -> f64 {
    DEFAULT_LAMBDA
}

fn default_k() -> usize {
    DEFAULT_K
}

impl CaseRequest {
    pub fn new(start: impl Into<String>, end: impl Into<String>) -> Self {
        CaseRequest {
            start: start.into(),
            end: end.into(),
            middles: Vec::new(),
            filter: None,
            communities: None,
            keywords_include: Vec::new(),
            keywords_exclude: Vec::new(),
            max_extract_words: None,
            cost: CostKind::SemanticDistance,
            lambda: DEFAULT_LAMBDA,
            k: DEFAULT_K,
        }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        let bad = |m: String| Err(EngineError::InvalidRequest(m));
        if self.start.trim().is_empty() {
            return bad("start must not be empty".into());
        }
        if self.end.trim().is_empty() {
            return bad("end must not be empty".into());
        }
        if self.middles.iter().any(|m| m.trim().is_empty()) {
            return bad("middle arguments must not be empty".into());
        }
        if !(1..=MAX_K).contains(&self.k) {
            return bad(format!("k must be between 1 and {MAX_K}, got {}", self.k));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be a finite number >= 0, got {}", self.lambda));
        }
        Ok(())
    }

    pub fn constraint(&self) -> Result<PathConstraint, EngineError> {
        let filter = match self.filter.as_deref().map(str::trim) {
            Some(src) if !src.is_empty() => Some(parse_filter(src)?),
            _ => None,
        };
        Ok(PathConstraint {
            community_ids: self.communities.as_ref().map(|c| c.iter().copied().collect()),
            keyword_include: self.keywords_include.clone(),
            keyword_exclude: self.keywords_exclude.clone(),
            max_extract_words: self.max_extract_words,
            filter,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueryHit {
    pub entity_id: String,
    pub score: f64,
    pub tag: String,
    pub citation: String,
    pub camp: String,
    pub arg_type: String,
    pub year: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedMember {
    pub entity_id: String,
    pub tag: String,
    pub pagerank: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommunitySummary {
    pub community_id: u32,
    pub size: usize,
    pub top_members: Vec<RankedMember>,
}

/// Corpus, graph and vectors loaded together, plus derived analytics.
pub struct Engine {
    corpus: Corpus,
    graph: SemanticGraph,
    index: VectorIndex,
    embedder: Option<HashingEmbedder>,
    communities: Vec<u32>,
    pagerank: PageRank,
    norm_words: f64,
}

impl Engine {
    /// Loads the corpus and graph. Vectors of hashed graphs are recomputed
    /// from the corpus; other providers need the vector file.
    pub fn load(paths: &DataPaths) -> Result<Engine, EngineError> {
        let (corpus, report) = load_corpus(&paths.corpus, false)?;
        if report.rejected > 0 {
            log::warn!("{}: skipped {} invalid records", paths.corpus.display(), report.rejected);
        }
        let graph = load_graph(&paths.graph)?;
        let config = graph.config();
        let vectors = if config.provider_id == HASHED_PROVIDER_ID {
            hashed_vectors(&corpus, config.granularity, config.dim as usize)
        } else {
            let file = VectorFile::open(&paths.vectors)?;
            if file.dim != config.dim as usize {
                return Err(EmbedError::DimMismatch { expected: config.dim as usize, found: file.dim }.into());
            }
            file.records
        };
        Engine::new(corpus, graph, vectors)
    }

    pub fn new(
        corpus: Corpus,
        graph: SemanticGraph,
        vectors: Vec<(String, EmbeddingVector)>,
    ) -> Result<Engine, EngineError> {
        let index = build_index(vectors, IndexMode::Exact)?;
        for node in graph.nodes() {
            if index.vector(&node.entity_id).is_none() {
                return Err(GraphError::MissingVector(node.entity_id.clone()).into());
            }
            if corpus.get(&node.parent_doc_id).is_none() {
                return Err(GraphError::MissingDoc {
                    entity_id: node.entity_id.clone(),
                    doc_id: node.parent_doc_id.clone(),
                }
                .into());
            }
        }
        let embedder = (graph.config().provider_id == HASHED_PROVIDER_ID)
            .then(|| HashingEmbedder::new(graph.config().dim as usize));
        let communities = if graph.has_communities() {
            graph.nodes().iter().map(|n| n.community_id.expect("all nodes assigned")).collect()
        } else {
            let CommunityAssignment { communities, .. } = louvain_communities(&graph, LOUVAIN_RESOLUTION);
            communities
        };
        let pagerank = pagerank(&graph, PAGERANK_DAMPING, PAGERANK_TOL, PAGERANK_MAX_ITER);
        let norm_words = corpus.median_extract_words();
        Ok(Engine { corpus, graph, index, embedder, communities, pagerank, norm_words })
    }

    pub fn corpus(&self) -> &Corpus {
        &self.corpus
    }

    pub fn graph(&self) -> &SemanticGraph {
        &self.graph
    }

    pub fn stats(&self) -> GraphStats {
        graph_stats(&self.graph)
    }

    pub fn norm_words(&self) -> f64 {
        self.norm_words
    }

    fn embedder(&self) -> Result<&dyn Embedder, EngineError> {
        self.embedder
            .as_ref()
            .map(|e| e as &dyn Embedder)
            .ok_or_else(|| EngineError::NoQueryEmbedder(self.graph.config().provider_id.clone()))
    }

    /// Entities whose documents pass `filter`; a blank filter matches all.
    pub fn query(&self, filter: &str, limit: usize) -> Result<Vec<QueryHit>, EngineError> {
        let hits = if filter.trim().is_empty() {
            self.graph.nodes().iter().take(limit).map(|n| (n.entity_id.clone(), 0.0)).collect::<Vec<_>>()
        } else {
            let expr = parse_filter(filter)?;
            let embedder: &dyn Embedder = match self.embedder() {
                Ok(e) => e,
                Err(e) if !expr.similar_texts().is_empty() => return Err(e),
                Err(_) => &NoEmbedder,
            };
            select_entities(&self.corpus, &self.graph, &self.index, embedder, &expr, limit)?
                .into_iter()
                .map(|s| (s.entity_id, s.score))
                .collect()
        };
        Ok(hits
            .into_iter()
            .map(|(entity_id, score)| {
                let idx = self.graph.node_index(&entity_id).expect("selected from graph");
                let doc = self.corpus.get(&self.graph.node(idx).parent_doc_id).expect("checked at load");
                QueryHit {
                    entity_id,
                    score,
                    tag: doc.abstract_text.clone(),
                    citation: doc.citation.clone(),
                    camp: doc.camp.clone(),
                    arg_type: doc.arg_type.clone(),
                    year: doc.year,
                }
            })
            .collect())
    }

    pub fn edge_cost(&self, kind: CostKind, lambda: f64) -> EdgeCost {
        EdgeCost { kind, lambda, norm_words: self.norm_words }
    }

    pub fn cases(&self, req: &CaseRequest) -> Result<Vec<DebateCase>, EngineError> {
        req.validate()?;
        let constraint = req.constraint()?;
        let view = subgraph_view(&self.graph, Some(&self.corpus), &constraint)?;
        let pf = Pathfinder::new(&view, self.edge_cost(req.cost, req.lambda))?;
        let ctx = CaseContext { corpus: &self.corpus, index: &self.index, embedder: self.embedder()? };
        let middles: Vec<&str> = req.middles.iter().map(String::as_str).collect();
        Ok(build_case(ctx, &pf, &view, &req.start, &middles, &req.end, req.k)?)
    }

    pub fn evaluate(&self, name: &str, pairs: &[EvalPair], cost: EdgeCost) -> Result<EvalRow, EngineError> {
        let constraint = PathConstraint::default();
        let view = subgraph_view(&self.graph, Some(&self.corpus), &constraint)?;
        let pf = Pathfinder::new(&view, cost)?;
        let ctx = CaseContext { corpus: &self.corpus, index: &self.index, embedder: self.embedder()? };
        Ok(evaluate_graph(name, ctx, &pf, &view, pairs)?)
    }

    /// Communities largest first (ties by id), each with its `top` members
    /// by PageRank (ties by entity id).
    pub fn communities(&self, top: usize) -> Vec<CommunitySummary> {
        let mut members: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
        for (i, &c) in self.communities.iter().enumerate() {
            members.entry(c).or_default().push(i as u32);
        }
        let mut out: Vec<CommunitySummary> = members
            .into_iter()
            .map(|(community_id, mut nodes)| {
                let size = nodes.len();
                nodes.sort_by(|&a, &b| {
                    self.pagerank.scores[b as usize].total_cmp(&self.pagerank.scores[a as usize]).then(a.cmp(&b))
                });
                let top_members = nodes
                    .into_iter()
                    .take(top)
                    .map(|i| {
                        let node = self.graph.node(i);
                        RankedMember {
                            entity_id: node.entity_id.clone(),
                            tag: self
                                .corpus
                                .get(&node.parent_doc_id)
                                .map(|d| d.abstract_text.clone())
                                .unwrap_or_default(),
                            pagerank: self.pagerank.scores[i as usize],
                        }
                    })
                    .collect();
                CommunitySummary { community_id, size, top_members }
            })
            .collect();
        out.sort_by(|a, b| b.size.cmp(&a.size).then(a.community_id.cmp(&b.community_id)));
        out
    }
}

/// Stand-in for filters without `SIMILAR`, which never embed anything.
struct NoEmbedder;

impl Embedder for NoEmbedder {
    fn provider_id(&self) -> &str {
        "none"
    }

    fn dim(&self) -> usize {
        0
    }

    fn embed(&self, _text: &str) -> EmbeddingVector {
        EmbeddingVector::zeros(0)
    }
}

pub fn read_file(path: &Path) -> Result<String, EngineError> {
    std::fs::read_to_string(path).map_err(io_err(path))
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), EngineError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    std::fs::write(path, bytes).map_err(io_err(path))
}
