//! Plain-text rendering of debate cases in spoken order.

use std::fmt::Write;

use argweave_core::casebuilder::{CaseEntry, DebateCase, Span};

pub const MARKER: &str = "**";
pub const SEPARATOR: &str = "next";

/// Byte range of every whitespace-separated token.
fn token_ranges(text: &str) -> Vec<(usize, usize)> {
    let base = text.as_ptr() as usize;
    text.split_whitespace()
        .map(|t| {
            let start = t.as_ptr() as usize - base;
            (start, start + t.len())
        })
        .collect()
}

/// `extract` with [`MARKER`] around each highlighted token span. Spans
/// outside the token range are ignored.
pub fn mark_extract(extract: &str, spans: &[Span]) -> String {
    let tokens = token_ranges(extract);
    let mut out = String::with_capacity(extract.len() + spans.len() * 4);
    let mut cursor = 0;
    for &(first, last) in spans {
        let (Some(&(start, _)), Some(&(_, end))) = (tokens.get(first), tokens.get(last)) else {
            continue;
        };
        if start < cursor || end < start {
            continue;
        }
        out.push_str(&extract[cursor..start]);
        out.push_str(MARKER);
        out.push_str(&extract[start..end]);
        out.push_str(MARKER);
        cursor = end;
    }
    out.push_str(&extract[cursor..]);
    out
}

fn render_entry(out: &mut String, entry: &CaseEntry, markers: bool) {
    let extract = if markers { mark_extract(&entry.extract, &entry.highlight_spans) } else { entry.extract.clone() };
    let _ = writeln!(out, "{}\n{}\n{}", entry.tag, entry.citation, extract);
}

/// Tag, citation and extract per entry, with a `next` line between entries.
pub fn render_case_text(case: &DebateCase, markers: bool) -> String {
    let mut out = String::new();
    for (i, entry) in case.entries.iter().enumerate() {
        if i > 0 {
            out.push_str(SEPARATOR);
            out.push('\n');
        }
        render_entry(&mut out, entry, markers);
    }
    out
}

/// Several cases, each under a numbered header with its cost and length.
pub fn render_cases_text(cases: &[DebateCase], markers: bool) -> String {
    let mut out = String::new();
    for (i, case) in cases.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let _ = writeln!(
            out,
            "=== case {} | cost {:.4} | {} entries | {} words ===",
            i + 1,
            case.total_cost,
            case.entries.len(),
            case.total_extract_words
        );
        out.push_str(&render_case_text(case, markers));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(tag: &str, extract: &str, spans: Vec<Span>) -> CaseEntry {
        CaseEntry {
            entity_id: tag.into(),
            tag: tag.into(),
            citation: format!("{tag} cite"),
            extract: extract.into(),
            highlight_spans: spans,
        }
    }

    fn case(entries: Vec<CaseEntry>) -> DebateCase {
        DebateCase { entries, total_cost: 0.0, total_extract_words: 0 }
    }

    #[test]
    fn markers_wrap_token_spans() {
        assert_eq!(mark_extract("global warming causes floods", &[(1, 2)]), "global **warming causes** floods");
        assert_eq!(mark_extract("a  b\tc", &[(0, 0), (2, 2)]), "**a**  b\t**c**");
        assert_eq!(mark_extract("a b", &[(5, 6)]), "a b");
        assert_eq!(mark_extract("", &[]), "");
    }

    #[test]
    fn separators_between_entries_only() {
        let one = render_case_text(&case(vec![entry("T1", "x y", vec![])]), true);
        assert_eq!(one, "T1\nT1 cite\nx y\n");
        let two = render_case_text(&case(vec![entry("T1", "x y", vec![]), entry("T2", "p q r", vec![(1, 1)])]), true);
        assert_eq!(two, "T1\nT1 cite\nx y\nnext\nT2\nT2 cite\np **q** r\n");
        assert_eq!(two.lines().filter(|l| *l == SEPARATOR).count(), 1);
        let plain = render_case_text(&case(vec![entry("T1", "x y", vec![(0, 1)])]), false);
        assert!(!plain.contains(MARKER));
    }
}
