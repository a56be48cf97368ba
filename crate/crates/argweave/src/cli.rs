use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use argweave_core::annindex::IndexMode;
use argweave_core::corpus::{entity_view, load_corpus, Granularity};
use argweave_core::embedding::{VectorFile, DEFAULT_DIM, HASHED_PROVIDER_ID};
use argweave_core::evalharness::{load_pairs, rank_graphs};
use argweave_core::pathing::{CostKind, DEFAULT_K, DEFAULT_LAMBDA};
use argweave_core::semgraph::{
    graph_to_bytes, load_graph, render_stats_report, DEFAULT_EDGE_LIMIT, DEFAULT_SIMILARITY_THRESHOLD,
};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::engine::{
    build_pipeline, hashed_vectors, write_file, BuildSettings, CaseRequest, DataPaths, Engine, DATA_DIR_ENV,
};
use crate::render::render_cases_text;
use crate::service::{router, AppState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "argweave", version, about = "Semantic evidence graphs and debate-case construction")]
pub struct Cli {
    /// Directory holding corpus.jsonl, vectors.awev and graph.awkg.
    #[arg(long, env = DATA_DIR_ENV, default_value = "data", global = true)]
    pub data_dir: PathBuf,
    /// Graph file (default: <data-dir>/graph.awkg).
    #[arg(long, global = true)]
    pub graph: Option<PathBuf>,
    /// Vector file (default: <data-dir>/vectors.awev).
    #[arg(long, global = true)]
    pub vectors: Option<PathBuf>,
    /// Corpus file (default: <data-dir>/corpus.jsonl).
    #[arg(long, global = true)]
    pub corpus: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a JSONL corpus and store it in the data directory.
    Ingest {
        input: PathBuf,
        /// Abort on the first invalid record instead of skipping it.
        #[arg(long)]
        strict: bool,
    },
    /// Write entity vectors with the hashing provider, or import a vector file.
    Embed {
        #[arg(long, default_value = "abstract")]
        granularity: Granularity,
        #[arg(long, default_value_t = DEFAULT_DIM)]
        dim: usize,
        /// Vector file produced by an external provider.
        #[arg(long)]
        import: Option<PathBuf>,
    },
    /// Build, analyze and persist the semantic graph.
    Build(BuildArgs),
    /// Vertex, edge and degree counts for one or more graphs.
    Stats {
        /// Graph files; defaults to the current graph.
        graphs: Vec<PathBuf>,
    },
    /// Search evidence with the filter language.
    Query {
        filter: String,
        #[arg(long, default_value_t = 20)]
        limit: usize,
    },
    /// Connect start and end arguments with a chain of evidence.
    Case(CaseArgs),
    /// Rank graphs by the average extract words of their cases.
    Eval {
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long, default_value = "semantic_distance")]
        cost: CostKind,
        #[arg(long, default_value_t = DEFAULT_LAMBDA)]
        lambda: f64,
        /// Graph files; defaults to the current graph.
        graphs: Vec<PathBuf>,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
    },
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    #[arg(long, default_value = "abstract")]
    pub granularity: Granularity,
    #[arg(long, default_value_t = DEFAULT_SIMILARITY_THRESHOLD)]
    pub threshold: f64,
    #[arg(long, default_value_t = DEFAULT_EDGE_LIMIT)]
    pub edge_limit: u32,
    #[arg(long, default_value = "exact")]
    pub index: IndexMode,
    #[arg(long, default_value_t = DEFAULT_DIM)]
    pub dim: usize,
    /// Provider that produced the vector file. The hashing provider's
    /// vectors are recomputed instead of read.
    #[arg(long, default_value = HASHED_PROVIDER_ID)]
    pub provider: String,
    #[arg(long)]
    pub no_communities: bool,
}

#[derive(Debug, Args)]
pub struct CaseArgs {
    #[arg(long)]
    pub start: String,
    #[arg(long)]
    pub end: String,
    /// Arguments to pass through, in order.
    #[arg(long = "middle")]
    pub middles: Vec<String>,
    #[arg(long)]
    pub filter: Option<String>,
    /// Only use evidence from these communities.
    #[arg(long = "community")]
    pub communities: Vec<u32>,
    #[arg(long = "include")]
    pub keywords_include: Vec<String>,
    #[arg(long = "exclude")]
    pub keywords_exclude: Vec<String>,
    #[arg(long)]
    pub max_extract_words: Option<u32>,
    #[arg(long, default_value = "semantic_distance")]
    pub cost: CostKind,
    #[arg(long, default_value_t = DEFAULT_LAMBDA)]
    pub lambda: f64,
    #[arg(short, long, default_value_t = DEFAULT_K)]
    pub k: usize,
    /// Leave highlights unmarked in text output.
    #[arg(long)]
    pub no_markers: bool,
}

impl Cli {
    fn paths(&self) -> DataPaths {
        let mut p = DataPaths::in_dir(&self.data_dir);
        if let Some(g) = &self.graph {
            p.graph = g.clone();
        }
        if let Some(v) = &self.vectors {
            p.vectors = v.clone();
        }
        if let Some(c) = &self.corpus {
            p.corpus = c.clone();
        }
        p
    }
}

fn graph_name(path: &Path) -> String {
    path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}

fn print_json(out: &mut dyn Write, value: &impl serde::Serialize) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let paths = cli.paths();
    match &cli.command {
        Command::Ingest { input, strict } => {
            let (corpus, report) = load_corpus(input, *strict)?;
            let mut bytes = Vec::new();
            corpus.write_jsonl(&mut bytes)?;
            write_file(&paths.corpus, &bytes)?;
            match cli.format {
                Format::Json => print_json(out, &report)?,
                Format::Text => {
                    writeln!(out, "loaded {} documents, rejected {}", report.loaded, report.rejected)?;
                    for r in &report.rejections {
                        writeln!(out, "  line {}: {}", r.line, r.reason)?;
                    }
                    writeln!(out, "wrote {}", paths.corpus.display())?;
                }
            }
        }
        Command::Embed { granularity, dim, import } => {
            let (corpus, _) = load_corpus(&paths.corpus, false)?;
            let file = match import {
                Some(src) => {
                    let file = VectorFile::open(src).with_context(|| format!("reading {}", src.display()))?;
                    let have: std::collections::HashSet<&str> =
                        file.records.iter().map(|(id, _)| id.as_str()).collect();
                    if let Some(missing) =
                        entity_view(&corpus, *granularity).iter().find(|e| !have.contains(e.entity_id.as_str()))
                    {
                        bail!("{} has no vector for entity {}", src.display(), missing.entity_id);
                    }
                    file
                }
                None => VectorFile { dim: *dim, records: hashed_vectors(&corpus, *granularity, *dim) },
            };
            let mut bytes = Vec::new();
            file.write_to(&mut bytes)?;
            write_file(&paths.vectors, &bytes)?;
            writeln!(out, "wrote {} vectors of dim {} to {}", file.records.len(), file.dim, paths.vectors.display())?;
        }
        Command::Build(args) => {
            let (corpus, _) = load_corpus(&paths.corpus, false)?;
            let settings = BuildSettings {
                granularity: args.granularity,
                threshold: args.threshold,
                edge_limit: args.edge_limit,
                index: args.index,
                dim: args.dim,
                communities: !args.no_communities,
            };
            let imported = if args.provider == HASHED_PROVIDER_ID {
                None
            } else {
                let file = VectorFile::open(&paths.vectors)
                    .with_context(|| format!("reading vectors from {}", paths.vectors.display()))?;
                Some((args.provider.clone(), file.records))
            };
            let hashed = imported.is_none();
            let mut last_pct = 0;
            let (graph, vectors) = build_pipeline(&corpus, &settings, imported, |done, total| {
                let pct = done * 100 / total.max(1);
                if pct >= last_pct + 10 {
                    log::info!("linked {done}/{total} entities");
                    last_pct = pct;
                }
            })?;
            write_file(&paths.graph, &graph_to_bytes(&graph))?;
            if hashed {
                let mut bytes = Vec::new();
                VectorFile { dim: settings.dim, records: vectors }.write_to(&mut bytes)?;
                write_file(&paths.vectors, &bytes)?;
            }
            let stats = argweave_core::semgraph::graph_stats(&graph);
            match cli.format {
                Format::Json => print_json(out, &stats)?,
                Format::Text => writeln!(
                    out,
                    "wrote {}: {} vertices, {} edges, average degree {:.2}",
                    paths.graph.display(),
                    stats.vertex_count,
                    stats.edge_count,
                    stats.average_degree
                )?,
            }
        }
        Command::Stats { graphs } => {
            let files = if graphs.is_empty() { vec![paths.graph.clone()] } else { graphs.clone() };
            let mut rows = Vec::new();
            for f in &files {
                let g = load_graph(f).with_context(|| format!("loading {}", f.display()))?;
                rows.push((graph_name(f), argweave_core::semgraph::graph_stats(&g)));
            }
            match cli.format {
                Format::Json => print_json(out, &rows)?,
                Format::Text => write!(out, "{}", render_stats_report(&rows))?,
            }
        }
        Command::Query { filter, limit } => {
            let engine = Engine::load(&paths)?;
            let hits = engine.query(filter, *limit)?;
            match cli.format {
                Format::Json => print_json(out, &hits)?,
                Format::Text => {
                    for h in &hits {
                        writeln!(out, "{:.4}\t{}\t{}\t{}\t{}", h.score, h.entity_id, h.camp, h.year, h.tag)?;
                    }
                }
            }
        }
        Command::Case(args) => {
            let engine = Engine::load(&paths)?;
            let req = CaseRequest {
                start: args.start.clone(),
                end: args.end.clone(),
                middles: args.middles.clone(),
                filter: args.filter.clone(),
                communities: (!args.communities.is_empty()).then(|| args.communities.clone()),
                keywords_include: args.keywords_include.clone(),
                keywords_exclude: args.keywords_exclude.clone(),
                max_extract_words: args.max_extract_words,
                cost: args.cost,
                lambda: args.lambda,
                k: args.k,
            };
            let cases = engine.cases(&req)?;
            match cli.format {
                Format::Json => print_json(out, &cases)?,
                Format::Text => write!(out, "{}", render_cases_text(&cases, !args.no_markers))?,
            }
        }
        Command::Eval { pairs, cost, lambda, graphs } => {
            let pairs = load_pairs(pairs)?;
            let files = if graphs.is_empty() { vec![paths.graph.clone()] } else { graphs.clone() };
            let mut rows = Vec::new();
            for f in &files {
                let engine = Engine::load(&DataPaths { graph: f.clone(), ..paths.clone() })?;
                rows.push(engine.evaluate(&graph_name(f), &pairs, engine.edge_cost(*cost, *lambda))?);
            }
            let report = rank_graphs(rows);
            match cli.format {
                Format::Json => write!(out, "{}", report.render_json())?,
                Format::Text => write!(out, "{}", report.render_text())?,
            }
        }
        Command::Serve { addr } => {
            let engine = match Engine::load(&paths) {
                Ok(e) => Some(e),
                Err(e) => {
                    log::warn!("starting without a graph: {e}");
                    None
                }
            };
            let state = AppState::new(cli.data_dir.clone(), paths, engine);
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(async move {
                let listener = tokio::net::TcpListener::bind(addr).await.with_context(|| format!("binding {addr}"))?;
                log::info!("listening on http://{addr}");
                axum::serve(listener, router(state))
                    .with_graceful_shutdown(async {
                        let _ = tokio::signal::ctrl_c().await;
                    })
                    .await?;
                Ok::<_, anyhow::Error>(())
            })?;
        }
    }
    Ok(())
}
