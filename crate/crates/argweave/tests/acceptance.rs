//! Acceptance runner: one PASS/FAIL line per criterion, nonzero exit on
//! any failure.

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use argweave::engine::CaseRequest;
use argweave_core::annindex::{build_index, IndexMode};
use argweave_core::corpus::Granularity;
use argweave_core::embedding::{Embedder, EmbeddingVector, HashingEmbedder, VectorFile};
use argweave_core::pathing::{
    subgraph_view, CostKind, EdgeCost, PathConstraint, PathError, Pathfinder, COST_EPS, DEFAULT_MAX_HOPS,
};
use argweave_core::queryfilter::{evaluate_filter, parse_expr, parse_filter, FilterExpr};
use argweave_core::semgraph::{
    build_graph, graph_from_bytes, graph_to_bytes, louvain_communities, pagerank, Edge, GraphConfig, Node,
    SemanticGraph,
};
use argweave_core::testkit::{
    brute_topk, entities_for, fuzz_input, knn_edges, modularity, random_doc, random_filter, random_graph,
    random_unit_vectors, simple_paths, ROUND_TRIP_CASES,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if $cond {
        } else {
            return Err(format!($($msg)+));
        }
    };
}

fn graph_of(names: &[&str], edges: &[(u32, u32, f32)]) -> SemanticGraph {
    let nodes = names
        .iter()
        .map(|n| Node {
            entity_id: n.to_string(),
            parent_doc_id: n.to_string(),
            extract_word_count: 10,
            community_id: None,
        })
        .collect();
    let edges = edges.iter().map(|&(a, b, weight)| Edge { a, b, weight }).collect();
    let config = GraphConfig { similarity_threshold: 0.01, ..GraphConfig::new(Granularity::Abstract, "fixture", 2) };
    SemanticGraph::from_parts(config, nodes, edges).unwrap()
}

fn path_oracle() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1001);
    let mut queries = 0usize;
    for round in 0..120 {
        let n = rng.gen_range(2..=10);
        let density = rng.gen_range(0.2..0.7);
        let g = random_graph(&mut rng, n, density, round % 3 == 0);
        let cost = if rng.gen_bool(0.5) { EdgeCost::semantic() } else { EdgeCost::length_penalized(0.5, 80.0) };
        let k = rng.gen_range(1..=5);
        let none = PathConstraint::default();
        let view = subgraph_view(&g, None, &none).unwrap();
        let pf = Pathfinder::new(&view, cost).unwrap();
        for s in 0..n as u32 {
            for d in 0..n as u32 {
                let (sid, did) = (&g.node(s).entity_id, &g.node(d).entity_id);
                let oracle: Vec<_> = simple_paths(&g, &|_| true, &cost, s, d)
                    .into_iter()
                    .filter(|(_, p)| p.len() - 1 <= DEFAULT_MAX_HOPS)
                    .collect();
                queries += 1;
                match pf.k_shortest_paths(sid, did, k) {
                    Err(PathError::NoPath { .. }) => ensure!(oracle.is_empty(), "{sid}->{did}: missed {:?}", oracle[0]),
                    Err(e) => return Err(format!("{sid}->{did}: {e}")),
                    Ok(got) => {
                        ensure!(
                            got.len() == oracle.len().min(k),
                            "{sid}->{did}: {} paths, oracle {}",
                            got.len(),
                            oracle.len()
                        );
                        for (p, (c, seq)) in got.iter().zip(&oracle) {
                            ensure!(&p.node_sequence == seq, "{sid}->{did}: {:?} vs {seq:?}", p.node_sequence);
                            ensure!((p.total_cost - c).abs() <= 1e-9, "{sid}->{did}: cost {} vs {c}", p.total_cost);
                        }
                        let best = pf.shortest_path(sid, did).map_err(|e| e.to_string())?;
                        ensure!(best == got[0], "{sid}->{did}: shortest_path disagrees with k=1");
                    }
                }
            }
        }
    }
    let elapsed = started.elapsed();
    ensure!(elapsed < Duration::from_secs(30), "took {elapsed:?}");
    Ok(format!("120 graphs, {queries} endpoint pairs, {:.1}s", elapsed.as_secs_f64()))
}

fn graph_build_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1002);
    let mut builds = 0;
    for round in 0..50 {
        let n = rng.gen_range(2..=200);
        let dim = [3, 8, 24][round % 3];
        let items = random_unit_vectors(&mut rng, n, dim);
        let (corpus, entities) = entities_for(&items);
        let index = build_index(items.clone(), IndexMode::Exact).unwrap();
        for threshold in [0.10, 0.5] {
            for limit in [1u32, 3, 100] {
                let config = GraphConfig {
                    similarity_threshold: threshold,
                    edge_limit: limit,
                    ..GraphConfig::new(Granularity::Abstract, "random", dim as u32)
                };
                let g = build_graph(&corpus, &entities, &index, config).map_err(|e| e.to_string())?;
                let got: BTreeMap<(String, String), f32> = g
                    .edges()
                    .iter()
                    .map(|e| ((g.node(e.a).entity_id.clone(), g.node(e.b).entity_id.clone()), e.weight))
                    .collect();
                let oracle = knn_edges(&items, threshold, limit as usize);
                ensure!(
                    got.keys().eq(oracle.keys()),
                    "n={n} threshold={threshold} limit={limit}: {} edges vs {}",
                    got.len(),
                    oracle.len()
                );
                builds += 1;
            }
        }
    }
    Ok(format!("{builds} builds over 50 vector sets"))
}

fn louvain() -> Outcome {
    let triangles = graph_of(
        &["a", "b", "c", "d", "e", "f"],
        &[(0, 1, 0.9), (1, 2, 0.9), (0, 2, 0.9), (3, 4, 0.9), (4, 5, 0.9), (3, 5, 0.9)],
    );
    let c = louvain_communities(&triangles, 1.0).communities;
    ensure!(c[0] == c[1] && c[1] == c[2] && c[3] == c[4] && c[4] == c[5] && c[0] != c[3], "triangles split as {c:?}");
    let k4 = graph_of(
        &["a", "b", "c", "d"],
        &[(0, 1, 0.5), (0, 2, 0.5), (0, 3, 0.5), (1, 2, 0.5), (1, 3, 0.5), (2, 3, 0.5)],
    );
    let c = louvain_communities(&k4, 1.0).communities;
    ensure!(c.iter().all(|&x| x == c[0]), "K4 split as {c:?}");

    let mut rng = ChaCha8Rng::seed_from_u64(1003);
    for _ in 0..40 {
        let n = rng.gen_range(1..=30);
        let density = rng.gen_range(0.05..0.6);
        let g = random_graph(&mut rng, n, density, false);
        let first = louvain_communities(&g, 1.0);
        let singletons: Vec<u32> = (0..n as u32).collect();
        let (q, q0) = (modularity(&g, &first.communities, 1.0), modularity(&g, &singletons, 1.0));
        ensure!(q >= q0 - 1e-12, "n={n}: modularity {q} below singletons {q0}");
        for _ in 0..4 {
            ensure!(louvain_communities(&g, 1.0) == first, "n={n}: nondeterministic partition");
        }
    }
    Ok("2 cliques, K4, 40 random graphs x 5 runs".into())
}

fn page_rank() -> Outcome {
    let cycle = graph_of(&["a", "b", "c", "d"], &[(0, 1, 0.7), (1, 2, 0.7), (2, 3, 0.7), (0, 3, 0.7)]);
    let star = graph_of(&["a", "b", "c", "d", "e"], &[(0, 1, 0.6), (0, 2, 0.6), (0, 3, 0.6), (0, 4, 0.6)]);
    let mut graphs = vec![cycle.clone(), star.clone()];
    let mut rng = ChaCha8Rng::seed_from_u64(1004);
    for _ in 0..30 {
        let n = rng.gen_range(1..=40);
        let density = rng.gen_range(0.0..0.5);
        graphs.push(random_graph(&mut rng, n, density, false));
    }
    for g in &graphs {
        let s: f64 = pagerank(g, 0.85, 1e-12, 1000).scores.iter().sum();
        ensure!((s - 1.0).abs() <= 1e-8, "sum {s} on {} nodes", g.node_count());
    }
    let pr = pagerank(&cycle, 0.85, 1e-12, 1000).scores;
    ensure!(pr.iter().all(|x| (x - 0.25).abs() <= 1e-8), "4-cycle {pr:?}");
    let pr = pagerank(&star, 0.85, 1e-12, 1000).scores;
    ensure!(pr[1..].iter().all(|&leaf| pr[0] > leaf), "star {pr:?}");
    Ok(format!("{} graphs sum to 1, cycle uniform, star center {:.4}", graphs.len(), pr[0]))
}

fn length_penalty() -> Outcome {
    let engine = common::two_path_engine();
    let none = PathConstraint::default();
    let view = subgraph_view(engine.graph(), Some(engine.corpus()), &none).unwrap();
    let route = |kind| -> Result<Vec<String>, String> {
        let pf = Pathfinder::new(&view, engine.edge_cost(kind, 0.5)).map_err(|e| e.to_string())?;
        Ok(pf.shortest_path("s/abs", "t/abs").map_err(|e| e.to_string())?.node_sequence)
    };
    let semantic = route(CostKind::SemanticDistance)?;
    let penalized = route(CostKind::LengthPenalized)?;
    ensure!(semantic == ["s/abs", "a/abs", "t/abs"], "semantic chose {semantic:?}");
    ensure!(penalized == ["s/abs", "b/abs", "t/abs"], "penalized chose {penalized:?}");

    let pairs = common::two_path_pairs();
    let avg = |kind| -> Result<f64, String> {
        let row = engine.evaluate("g", &pairs, engine.edge_cost(kind, 0.5)).map_err(|e| e.to_string())?;
        row.average_case_words.ok_or_else(|| "no pair solved".to_string())
    };
    let (a, b) = (avg(CostKind::SemanticDistance)?, avg(CostKind::LengthPenalized)?);
    ensure!(b < a, "average {a} -> {b} did not decrease");
    Ok(format!("average case words {a:.0} -> {b:.0}"))
}

fn ann_recall() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1006);
    let items = random_unit_vectors(&mut rng, 1000, 32);
    let approx = build_index(items.clone(), IndexMode::Approximate).map_err(|e| e.to_string())?;
    let queries = random_unit_vectors(&mut rng, 50, 32);
    let mut recall = 0.0;
    for (_, q) in &queries {
        let truth = brute_topk(&items, q.values(), 10, None);
        let got = approx.query_topk(q, 10, None).map_err(|e| e.to_string())?;
        recall += got.iter().filter(|n| truth.contains(&n.entity_id)).count() as f64 / 10.0;
    }
    let mean = recall / queries.len() as f64;
    ensure!(mean >= 0.9, "mean recall@10 {mean:.3}");
    Ok(format!("mean recall@10 {mean:.3}"))
}

fn filter_dsl() -> Outcome {
    for src in ROUND_TRIP_CASES {
        let ast = parse_expr(src).map_err(|e| format!("{src:?}: {e}"))?;
        let printed = ast.to_string();
        ensure!(parse_expr(&printed).as_ref() == Ok(&ast), "{src:?} printed as {printed:?}");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(1007);
    for _ in 0..500 {
        let (a, b, c) = (random_filter(&mut rng, 2), random_filter(&mut rng, 2), random_filter(&mut rng, 0));
        let doc = random_doc(&mut rng);
        let not_and = FilterExpr::not(FilterExpr::and(a.clone(), b.clone()));
        let or_not = FilterExpr::or(FilterExpr::not(a.clone()), FilterExpr::not(b.clone()));
        ensure!(evaluate_filter(&not_and, &doc) == evaluate_filter(&or_not, &doc), "De Morgan fails for {a} / {b}");
        let not_or = FilterExpr::not(FilterExpr::or(a.clone(), b.clone()));
        let and_not = FilterExpr::and(FilterExpr::not(a.clone()), FilterExpr::not(b.clone()));
        ensure!(evaluate_filter(&not_or, &doc) == evaluate_filter(&and_not, &doc), "De Morgan fails for {a} / {b}");
        let leaf = |e: &FilterExpr| parse_filter(&e.to_string()).unwrap();
        let (la, lc) = (random_filter(&mut rng, 0), random_filter(&mut rng, 0));
        let src = format!("NOT {la} OR {c} AND {lc}");
        let expect = FilterExpr::or(FilterExpr::not(leaf(&la)), FilterExpr::and(leaf(&c), leaf(&lc)));
        ensure!(parse_filter(&src).as_ref() == Ok(&expect), "precedence of {src:?}");
    }
    let mut fuzz_errors = 0;
    for _ in 0..10_000 {
        let src = fuzz_input(&mut rng);
        let outcome =
            catch_unwind(|| parse_filter(&src).is_err()).map_err(|_| format!("parser panicked on {src:?}"))?;
        fuzz_errors += outcome as usize;
    }
    Ok(format!("25 round trips, 500 property rounds, 10000 fuzz inputs ({fuzz_errors} rejected)"))
}

fn regression() -> Outcome {
    let first = common::regression_artifacts();
    common::check_all_goldens(&first)?;
    let second = common::regression_artifacts();
    ensure!(
        first.graph == second.graph && first.eval_report == second.eval_report && first.case_text == second.case_text,
        "second run differs"
    );
    Ok(format!("graph {} bytes, report and case identical across 2 runs", first.graph.len()))
}

fn persistence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1009);
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    for round in 0..20 {
        let n = rng.gen_range(0..=30);
        let mut g = random_graph(&mut rng, n, 0.3, false);
        if round % 2 == 0 {
            let c = louvain_communities(&g, 1.0);
            g.set_communities(&c);
        }
        let path = dir.path().join(format!("g{round}.awkg"));
        argweave_core::semgraph::persist_graph(&g, &path).map_err(|e| e.to_string())?;
        let bytes = std::fs::read(&path).map_err(|e| e.to_string())?;
        let back = argweave_core::semgraph::load_graph(&path).map_err(|e| e.to_string())?;
        ensure!(back == g && graph_to_bytes(&back) == bytes, "graph {round} changed in round trip");
        let mut bad = bytes.clone();
        let i = rng.gen_range(0..bad.len());
        bad[i] ^= 1 << rng.gen_range(0..8);
        ensure!(graph_from_bytes(&bad).is_err(), "flipped bit at byte {i} went undetected");
        let mut crc = bytes.clone();
        let last = crc.len() - 1;
        crc[last] ^= 0xff;
        ensure!(graph_from_bytes(&crc).is_err(), "corrupted CRC trailer accepted");

        let dim = rng.gen_range(1..=64);
        let count = rng.gen_range(0..50);
        let mut records = random_unit_vectors(&mut rng, count, dim);
        records.push(("odd/values".into(), EmbeddingVector::new(vec![f32::MIN_POSITIVE; dim])));
        let file = VectorFile { dim, records };
        let vpath = dir.path().join(format!("v{round}.awev"));
        file.save(&vpath).map_err(|e| e.to_string())?;
        let back = VectorFile::open(&vpath).map_err(|e| e.to_string())?;
        let same_bits = back.records.len() == file.records.len()
            && back.records.iter().zip(&file.records).all(|((a, x), (b, y))| {
                a == b && x.values().iter().map(|v| v.to_bits()).eq(y.values().iter().map(|v| v.to_bits()))
            });
        ensure!(same_bits && back.dim == dim, "vector file {round} changed in round trip");
        let mut again = Vec::new();
        back.write_to(&mut again).map_err(|e| e.to_string())?;
        ensure!(again == std::fs::read(&vpath).map_err(|e| e.to_string())?, "vector file {round} rewrote differently");
    }
    Ok("20 graph files and 20 vector files bit-exact, corruption rejected".into())
}

fn case_shape() -> Outcome {
    let (engine, _) = common::mini_engine();
    let embedder = HashingEmbedder::default();
    let vectors: Vec<(String, EmbeddingVector)> = engine
        .graph()
        .nodes()
        .iter()
        .map(|n| {
            let doc = engine.corpus().get(&n.parent_doc_id).unwrap();
            (n.entity_id.clone(), embedder.embed(&doc.abstract_text))
        })
        .collect();
    let mut checked = 0;
    for pair in common::eval_pairs() {
        let mut req = CaseRequest::new(pair.start.clone(), pair.end.clone());
        req.k = 10;
        let cases = engine.cases(&req).map_err(|e| format!("{}: {e}", pair.start))?;
        let first = brute_topk(&vectors, embedder.embed(&pair.start).values(), 1, None);
        let last = brute_topk(&vectors, embedder.embed(&pair.end).values(), 1, None);
        for c in &cases {
            ensure!(c.entries.len() <= 12, "{} entries", c.entries.len());
            ensure!(c.entries[0].entity_id == first[0], "starts at {} not {}", c.entries[0].entity_id, first[0]);
            ensure!(c.entries.last().unwrap().entity_id == last[0], "ends at {}", c.entries.last().unwrap().entity_id);
            checked += 1;
        }
    }

    // A 15-node chain has exactly one route, 14 hops long.
    let names: Vec<String> = (0..15).map(|i| format!("n{i:02}")).collect();
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let edges: Vec<(u32, u32, f32)> = (0..14).map(|i| (i, i + 1, 0.9)).collect();
    let chain = graph_of(&refs, &edges);
    let none = PathConstraint::default();
    let view = subgraph_view(&chain, None, &none).unwrap();
    let pf = Pathfinder::new(&view, EdgeCost::semantic()).unwrap();
    let long = pf.shortest_path("n00", "n14");
    ensure!(matches!(long, Err(PathError::HopBudgetExceeded { .. })), "14-hop chain gave {long:?}");
    let edge = pf.shortest_path("n00", "n11").map_err(|e| e.to_string())?;
    ensure!(edge.node_sequence.len() == 12, "11-hop chain gave {} nodes", edge.node_sequence.len());
    ensure!(edge.total_cost.is_finite() && edge.total_cost > COST_EPS, "cost {}", edge.total_cost);
    Ok(format!("{checked} cases within 12 entries with resolved endpoints; 14-hop chain rejected"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("path oracle", path_oracle),
        ("graph-build oracle", graph_build_oracle),
        ("louvain", louvain),
        ("pagerank", page_rank),
        ("length-penalty dominance", length_penalty),
        ("ANN recall", ann_recall),
        ("filter DSL", filter_dsl),
        ("end-to-end regression", regression),
        ("persistence", persistence),
        ("case shape", case_shape),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(reason) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {reason}", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
