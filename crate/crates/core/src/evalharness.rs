//! Graph ranking by the average number of extract words read aloud per
//! generated case.

use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::casebuilder::{build_case, case_word_count, CaseContext};
use crate::pathing::{Pathfinder, SubgraphView};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("pairs line {line}: {reason}")]
    BadPair { line: usize, reason: String },
    #[error("no argument pairs given")]
    NoPairs,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalPair {
    pub start: String,
    pub end: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalRow {
    pub graph_name: String,
    pub attempted: usize,
    pub solved: usize,
    /// Mean over solved pairs; `None` when nothing was solved.
    pub average_case_words: Option<f64>,
}

impl EvalRow {
    /// Row from per-pair word counts, `None` marking an unsolved pair.
    pub fn from_counts(graph_name: impl Into<String>, counts: &[Option<usize>]) -> Self {
        let solved: Vec<usize> = counts.iter().flatten().copied().collect();
        let average_case_words =
            (!solved.is_empty()).then(|| solved.iter().sum::<usize>() as f64 / solved.len() as f64);
        EvalRow { graph_name: graph_name.into(), attempted: counts.len(), solved: solved.len(), average_case_words }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
}

pub fn parse_pairs<R: BufRead>(reader: R) -> Result<Vec<EvalPair>, EvalError> {
    let mut pairs = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let pair: EvalPair =
            serde_json::from_str(&line).map_err(|e| EvalError::BadPair { line: i + 1, reason: e.to_string() })?;
        if pair.start.trim().is_empty() || pair.end.trim().is_empty() {
            return Err(EvalError::BadPair { line: i + 1, reason: "empty argument".into() });
        }
        pairs.push(pair);
    }
    Ok(pairs)
}

pub fn load_pairs(path: impl AsRef<Path>) -> Result<Vec<EvalPair>, EvalError> {
    parse_pairs(std::io::BufReader::new(std::fs::File::open(path)?))
}

/// Builds the single cheapest case for every pair and averages the extract
/// word counts of the solved ones.
pub fn evaluate_graph(
    graph_name: &str,
    ctx: CaseContext<'_>,
    pathfinder: &Pathfinder<'_, '_>,
    view: &SubgraphView<'_>,
    pairs: &[EvalPair],
) -> Result<EvalRow, EvalError> {
    if pairs.is_empty() {
        return Err(EvalError::NoPairs);
    }
    let counts: Vec<Option<usize>> = pairs
        .iter()
        .map(|p| match build_case(ctx, pathfinder, view, &p.start, &[], &p.end, 1) {
            Ok(cases) => cases.first().map(case_word_count),
            Err(e) => {
                log::debug!("{graph_name}: pair {:?} -> {:?} unsolved: {e}", p.start, p.end);
                None
            }
        })
        .collect();
    Ok(EvalRow::from_counts(graph_name, &counts))
}

/// Ascending by average; undefined averages last; ties by name.
pub fn rank_graphs(mut rows: Vec<EvalRow>) -> EvalReport {
    rows.sort_by(|a, b| {
        let by_avg = match (a.average_case_words, b.average_case_words) {
            (Some(x), Some(y)) => x.total_cmp(&y),
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, Some(_)) => std::cmp::Ordering::Greater,
            (None, None) => std::cmp::Ordering::Equal,
        };
        by_avg.then_with(|| a.graph_name.cmp(&b.graph_name))
    });
    EvalReport { rows }
}

const HEADERS: [&str; 3] = ["Model", "Average Words in Case", "Solved"];

impl EvalReport {
    /// Pipe-separated table with padded columns; averages round to whole
    /// words and undefined ones print as `n/a`.
    pub fn render_text(&self) -> String {
        let cells: Vec<[String; 3]> = self
            .rows
            .iter()
            .map(|r| {
                [
                    r.graph_name.clone(),
                    r.average_case_words.map_or_else(|| "n/a".to_string(), |a| format!("{a:.0}")),
                    format!("{}/{}", r.solved, r.attempted),
                ]
            })
            .collect();
        let width = |c: usize| cells.iter().map(|r| r[c].len()).chain([HEADERS[c].len()]).max().unwrap_or(0);
        let (w0, w1) = (width(0), width(1));
        let line = |a: &str, b: &str, c: &str| format!("{a:<w0$} | {b:<w1$} | {c}\n");
        let mut out = line(HEADERS[0], HEADERS[1], HEADERS[2]);
        for [a, b, c] in &cells {
            out.push_str(&line(a, b, c));
        }
        out
    }

    pub fn render_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}
