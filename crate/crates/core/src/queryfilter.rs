//! A small SQL-style filter language over evidence metadata and text.
//!
//! ```text
//! expr       = or_expr ;
//! or_expr    = and_expr { "OR" and_expr } ;
//! and_expr   = not_expr { "AND" not_expr } ;
//! not_expr   = "NOT" not_expr | primary ;
//! primary    = "(" expr ")"
//!            | "SIMILAR" "(" string ")"
//!            | field ( "=" | "!=" | "<>" | "<" | "<=" | ">" | ">=" | "LIKE" ) literal ;
//! literal    = string | integer ;
//! string     = "'" { char | "''" } "'" ;
//! integer    = [ "-" ] digit { digit } ;
//! field      = "camp" | "tag" | "year" | "wordcount" | "extractwords"
//!            | "doc" | "extract" | "abstract" ;
//! ```
//!
//! Keywords and field names are case-insensitive. `SIMILAR` clauses never
//! filter: they evaluate to true and only drive ranking in
//! [`select_entities`].

use std::fmt;

use serde::Serialize;

use crate::annindex::VectorIndex;
use crate::corpus::{Corpus, EvidenceDoc};
use crate::embedding::{cosine_similarity, Embedder};
use crate::semgraph::SemanticGraph;

const MAX_DEPTH: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Position {
    pub line: usize,
    pub column: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterErrorKind {
    Syntax,
    Type,
    UnknownField,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FilterError {
    pub kind: FilterErrorKind,
    pub message: String,
    pub position: Option<Position>,
}

impl FilterError {
    fn at(kind: FilterErrorKind, pos: Position, message: impl Into<String>) -> Self {
        FilterError { kind, message: message.into(), position: Some(pos) }
    }
}

impl fmt::Display for FilterError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            FilterErrorKind::Syntax => "syntax error",
            FilterErrorKind::Type => "type error",
            FilterErrorKind::UnknownField => "unknown field",
        };
        match self.position {
            Some(p) => write!(f, "{kind} at line {}, column {}: {}", p.line, p.column, self.message),
            None => write!(f, "{kind}: {}", self.message),
        }
    }
}

impl std::error::Error for FilterError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Field {
    Camp,
    Tag,
    Year,
    WordCount,
    ExtractWords,
    Doc,
    Extract,
    Abstract,
}

impl Field {
    pub fn from_name(name: &str) -> Option<Field> {
        Some(match name.to_ascii_lowercase().as_str() {
            "camp" => Field::Camp,
            "tag" => Field::Tag,
            "year" => Field::Year,
            "wordcount" => Field::WordCount,
            "extractwords" => Field::ExtractWords,
            "doc" => Field::Doc,
            "extract" => Field::Extract,
            "abstract" => Field::Abstract,
            _ => return None,
        })
    }

    pub fn is_numeric(self) -> bool {
        matches!(self, Field::Year | Field::WordCount | Field::ExtractWords)
    }

    fn text(self, doc: &EvidenceDoc) -> &str {
        match self {
            Field::Camp => &doc.camp,
            Field::Tag => &doc.arg_type,
            Field::Doc => &doc.full_text,
            Field::Extract => &doc.extract,
            Field::Abstract => &doc.abstract_text,
            Field::Year | Field::WordCount | Field::ExtractWords => "",
        }
    }

    fn number(self, doc: &EvidenceDoc) -> i64 {
        match self {
            Field::Year => doc.year,
            Field::WordCount => doc.word_count_full as i64,
            Field::ExtractWords => doc.word_count_extract as i64,
            _ => 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Like,
}

impl CmpOp {
    fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Like => "LIKE",
        }
    }

    fn is_ordering(self) -> bool {
        matches!(self, CmpOp::Lt | CmpOp::Le | CmpOp::Gt | CmpOp::Ge)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Literal {
    Str(String),
    Int(i64),
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Str(s) => write!(f, "'{}'", s.replace('\'', "''")),
            Literal::Int(n) => write!(f, "{n}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FilterExpr {
    Compare { field: String, op: CmpOp, value: Literal },
    Similar(String),
    Not(Box<FilterExpr>),
    And(Box<FilterExpr>, Box<FilterExpr>),
    Or(Box<FilterExpr>, Box<FilterExpr>),
}

impl FilterExpr {
    pub fn compare(field: &str, op: CmpOp, value: Literal) -> Self {
        FilterExpr::Compare { field: field.to_string(), op, value }
    }

    pub fn and(l: FilterExpr, r: FilterExpr) -> Self {
        FilterExpr::And(Box::new(l), Box::new(r))
    }

    pub fn or(l: FilterExpr, r: FilterExpr) -> Self {
        FilterExpr::Or(Box::new(l), Box::new(r))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(e: FilterExpr) -> Self {
        FilterExpr::Not(Box::new(e))
    }

    fn precedence(&self) -> u8 {
        match self {
            FilterExpr::Or(..) => 1,
            FilterExpr::And(..) => 2,
            FilterExpr::Not(_) => 3,
            FilterExpr::Compare { .. } | FilterExpr::Similar(_) => 4,
        }
    }

    /// Texts of every `SIMILAR` clause, in source order.
    pub fn similar_texts(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_similar(&mut out);
        out
    }

    fn collect_similar<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            FilterExpr::Similar(t) => out.push(t),
            FilterExpr::Compare { .. } => {}
            FilterExpr::Not(e) => e.collect_similar(out),
            FilterExpr::And(l, r) | FilterExpr::Or(l, r) => {
                l.collect_similar(out);
                r.collect_similar(out);
            }
        }
    }

    /// Type-checks an expression built without the parser. Errors carry no
    /// position.
    pub fn check(&self) -> Result<(), FilterError> {
        match self {
            FilterExpr::Compare { field, op, value } => check_compare(field, *op, value)
                .map(|_| ())
                .map_err(|(kind, message)| FilterError { kind, message, position: None }),
            FilterExpr::Similar(_) => Ok(()),
            FilterExpr::Not(e) => {
                if !e.similar_texts().is_empty() {
                    return Err(FilterError {
                        kind: FilterErrorKind::Type,
                        message: "SIMILAR cannot be negated".into(),
                        position: None,
                    });
                }
                e.check()
            }
            FilterExpr::And(l, r) | FilterExpr::Or(l, r) => {
                l.check()?;
                r.check()
            }
        }
    }
}

fn check_compare(field: &str, op: CmpOp, value: &Literal) -> Result<Field, (FilterErrorKind, String)> {
    let f =
        Field::from_name(field).ok_or_else(|| (FilterErrorKind::UnknownField, format!("no field named {field:?}")))?;
    let type_err = |m: String| Err((FilterErrorKind::Type, m));
    match (f.is_numeric(), op, value) {
        (true, CmpOp::Like, _) => type_err(format!("LIKE needs a text field, {field} is numeric")),
        (true, _, Literal::Str(_)) => type_err(format!("{field} is numeric but compared with a string")),
        (false, _, Literal::Int(_)) => type_err(format!("{field} is text but compared with a number")),
        (false, op, _) if op.is_ordering() => {
            type_err(format!("{} needs a numeric field, {field} is text", op.symbol()))
        }
        _ => Ok(f),
    }
}

impl fmt::Display for FilterExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let child = |f: &mut fmt::Formatter<'_>, e: &FilterExpr, min: u8| {
            if e.precedence() < min {
                write!(f, "({e})")
            } else {
                write!(f, "{e}")
            }
        };
        match self {
            FilterExpr::Compare { field, op, value } => write!(f, "{field} {} {value}", op.symbol()),
            FilterExpr::Similar(t) => write!(f, "SIMILAR({})", Literal::Str(t.clone())),
            FilterExpr::Not(e) => {
                f.write_str("NOT ")?;
                child(f, e, 3)
            }
            FilterExpr::And(l, r) => {
                child(f, l, 2)?;
                f.write_str(" AND ")?;
                child(f, r, 3)
            }
            FilterExpr::Or(l, r) => {
                child(f, l, 1)?;
                f.write_str(" OR ")?;
                child(f, r, 2)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Str(String),
    Int(i64),
    Op(CmpOp),
    LParen,
    RParen,
    And,
    Or,
    Not,
    Similar,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier {s:?}"),
            Tok::Str(s) => format!("string '{s}'"),
            Tok::Int(n) => format!("number {n}"),
            Tok::Op(op) => format!("operator {}", op.symbol()),
            Tok::LParen => "'('".into(),
            Tok::RParen => "')'".into(),
            Tok::And => "AND".into(),
            Tok::Or => "OR".into(),
            Tok::Not => "NOT".into(),
            Tok::Similar => "SIMILAR".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

fn lex(src: &str) -> Result<Vec<(Tok, Position)>, FilterError> {
    let chars: Vec<char> = src.chars().collect();
    // Position of every character, plus one past the end.
    let mut positions = Vec::with_capacity(chars.len() + 1);
    let (mut line, mut column) = (1, 1);
    for &c in &chars {
        positions.push(Position { line, column });
        if c == '\n' {
            line += 1;
            column = 1;
        } else {
            column += 1;
        }
    }
    positions.push(Position { line, column });

    let mut toks = Vec::new();
    let mut i = 0;
    let syntax = |p: Position, m: String| FilterError::at(FilterErrorKind::Syntax, p, m);
    while i < chars.len() {
        let c = chars[i];
        let pos = positions[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = match c {
            '(' => {
                i += 1;
                Tok::LParen
            }
            ')' => {
                i += 1;
                Tok::RParen
            }
            '=' => {
                i += 1;
                Tok::Op(CmpOp::Eq)
            }
            '!' if chars.get(i + 1) == Some(&'=') => {
                i += 2;
                Tok::Op(CmpOp::Ne)
            }
            '<' => match chars.get(i + 1) {
                Some('=') => {
                    i += 2;
                    Tok::Op(CmpOp::Le)
                }
                Some('>') => {
                    i += 2;
                    Tok::Op(CmpOp::Ne)
                }
                _ => {
                    i += 1;
                    Tok::Op(CmpOp::Lt)
                }
            },
            '>' => {
                if chars.get(i + 1) == Some(&'=') {
                    i += 2;
                    Tok::Op(CmpOp::Ge)
                } else {
                    i += 1;
                    Tok::Op(CmpOp::Gt)
                }
            }
            '\'' => {
                let mut s = String::new();
                i += 1;
                loop {
                    match chars.get(i) {
                        None => return Err(syntax(pos, "unterminated string literal".into())),
                        Some('\'') if chars.get(i + 1) == Some(&'\'') => {
                            s.push('\'');
                            i += 2;
                        }
                        Some('\'') => {
                            i += 1;
                            break;
                        }
                        Some(&ch) => {
                            s.push(ch);
                            i += 1;
                        }
                    }
                }
                Tok::Str(s)
            }
            '-' | '0'..='9' => {
                i += 1;
                while chars.get(i).is_some_and(|c| c.is_ascii_digit()) {
                    i += 1;
                }
                let text: String = chars[start..i].iter().collect();
                if text == "-" {
                    return Err(syntax(pos, "expected digits after '-'".into()));
                }
                let n = text.parse::<i64>().map_err(|_| syntax(pos, format!("integer out of range: {text}")))?;
                Tok::Int(n)
            }
            c if c.is_alphabetic() || c == '_' => {
                while chars.get(i).is_some_and(|c| c.is_alphanumeric() || *c == '_') {
                    i += 1;
                }
                let word: String = chars[start..i].iter().collect();
                match word.to_ascii_uppercase().as_str() {
                    "AND" => Tok::And,
                    "OR" => Tok::Or,
                    "NOT" => Tok::Not,
                    "LIKE" => Tok::Op(CmpOp::Like),
                    "SIMILAR" => Tok::Similar,
                    _ => Tok::Ident(word),
                }
            }
            other => return Err(syntax(pos, format!("unexpected character {other:?}"))),
        };
        toks.push((tok, pos));
    }
    toks.push((Tok::Eof, positions[chars.len()]));
    Ok(toks)
}

struct Parser {
    toks: Vec<(Tok, Position)>,
    pos: usize,
    typed: bool,
    depth: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn position(&self) -> Position {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> (Tok, Position) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, expected: &str) -> FilterError {
        FilterError::at(
            FilterErrorKind::Syntax,
            self.position(),
            format!("expected {expected}, found {}", self.peek().describe()),
        )
    }

    fn expect(&mut self, tok: Tok, expected: &str) -> Result<(), FilterError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(expected))
        }
    }

    fn enter(&mut self) -> Result<(), FilterError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(FilterError::at(FilterErrorKind::Syntax, self.position(), "expression nested too deeply"));
        }
        Ok(())
    }

    fn expr(&mut self) -> Result<FilterExpr, FilterError> {
        self.enter()?;
        let mut left = self.and_expr()?;
        while *self.peek() == Tok::Or {
            self.bump();
            left = FilterExpr::or(left, self.and_expr()?);
        }
        self.depth -= 1;
        Ok(left)
    }

    fn and_expr(&mut self) -> Result<FilterExpr, FilterError> {
        let mut left = self.not_expr()?;
        while *self.peek() == Tok::And {
            self.bump();
            left = FilterExpr::and(left, self.not_expr()?);
        }
        Ok(left)
    }

    fn not_expr(&mut self) -> Result<FilterExpr, FilterError> {
        if *self.peek() != Tok::Not {
            return self.primary();
        }
        let (_, pos) = self.bump();
        self.enter()?;
        let inner = self.not_expr()?;
        self.depth -= 1;
        if self.typed && !inner.similar_texts().is_empty() {
            return Err(FilterError::at(FilterErrorKind::Type, pos, "SIMILAR cannot be negated"));
        }
        Ok(FilterExpr::not(inner))
    }

    fn primary(&mut self) -> Result<FilterExpr, FilterError> {
        match self.peek().clone() {
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(e)
            }
            Tok::Similar => {
                self.bump();
                self.expect(Tok::LParen, "'(' after SIMILAR")?;
                let Tok::Str(text) = self.peek().clone() else {
                    return Err(self.unexpected("a string literal"));
                };
                self.bump();
                self.expect(Tok::RParen, "')'")?;
                Ok(FilterExpr::Similar(text))
            }
            Tok::Ident(field) => {
                let (_, field_pos) = self.bump();
                let Tok::Op(op) = self.peek().clone() else {
                    return Err(self.unexpected("a comparison operator"));
                };
                self.bump();
                let value = match self.peek().clone() {
                    Tok::Str(s) => Literal::Str(s),
                    Tok::Int(n) => Literal::Int(n),
                    _ => return Err(self.unexpected("a literal")),
                };
                self.bump();
                if self.typed {
                    check_compare(&field, op, &value)
                        .map_err(|(kind, message)| FilterError::at(kind, field_pos, message))?;
                }
                Ok(FilterExpr::Compare { field, op, value })
            }
            _ => Err(self.unexpected("a comparison, SIMILAR or '('")),
        }
    }
}

fn parse(source: &str, typed: bool) -> Result<FilterExpr, FilterError> {
    let toks = lex(source)?;
    let mut p = Parser { toks, pos: 0, typed, depth: 0 };
    let e = p.expr()?;
    if *p.peek() != Tok::Eof {
        return Err(p.unexpected("AND, OR or end of input"));
    }
    Ok(e)
}

/// Parses and type-checks a filter.
pub fn parse_filter(source: &str) -> Result<FilterExpr, FilterError> {
    parse(source, true)
}

/// Parses without resolving field names or checking types. Useful for
/// tooling that works on the syntax tree alone.
pub fn parse_expr(source: &str) -> Result<FilterExpr, FilterError> {
    parse(source, false)
}

/// `%` matches any run of characters, `_` exactly one; case-insensitive.
pub fn like_match(text: &str, pattern: &str) -> bool {
    let t: Vec<char> = text.to_lowercase().chars().collect();
    let p: Vec<char> = pattern.to_lowercase().chars().collect();
    let (mut ti, mut pi) = (0, 0);
    let mut star: Option<(usize, usize)> = None;
    while ti < t.len() {
        if pi < p.len() && (p[pi] == '_' || (p[pi] != '%' && p[pi] == t[ti])) {
            ti += 1;
            pi += 1;
        } else if pi < p.len() && p[pi] == '%' {
            star = Some((pi, ti));
            pi += 1;
        } else if let Some((sp, st)) = star {
            pi = sp + 1;
            ti = st + 1;
            star = Some((sp, st + 1));
        } else {
            return false;
        }
    }
    p[pi..].iter().all(|&c| c == '%')
}

/// Boolean value of `expr` on `doc`. `SIMILAR` clauses are true here;
/// comparisons that fail the type check evaluate to false.
pub fn evaluate_filter(expr: &FilterExpr, doc: &EvidenceDoc) -> bool {
    match expr {
        FilterExpr::Similar(_) => true,
        FilterExpr::Not(e) => !evaluate_filter(e, doc),
        FilterExpr::And(l, r) => evaluate_filter(l, doc) && evaluate_filter(r, doc),
        FilterExpr::Or(l, r) => evaluate_filter(l, doc) || evaluate_filter(r, doc),
        FilterExpr::Compare { field, op, value } => {
            let Ok(f) = check_compare(field, *op, value) else { return false };
            match value {
                Literal::Int(n) => {
                    let x = f.number(doc);
                    match op {
                        CmpOp::Eq => x == *n,
                        CmpOp::Ne => x != *n,
                        CmpOp::Lt => x < *n,
                        CmpOp::Le => x <= *n,
                        CmpOp::Gt => x > *n,
                        CmpOp::Ge => x >= *n,
                        CmpOp::Like => false,
                    }
                }
                Literal::Str(s) => {
                    let x = f.text(doc);
                    match op {
                        CmpOp::Eq => x == s,
                        CmpOp::Ne => x != s,
                        CmpOp::Like => like_match(x, s),
                        _ => false,
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Selection {
    pub entity_id: String,
    pub score: f64,
}

/// Graph entities whose parent document passes `expr`, ranked.
///
/// With `SIMILAR` clauses the score is the mean cosine between each clause's
/// embedded text and the entity vector, sorted descending; otherwise every
/// score is 0 and results stay in entity id order. Ties break by ascending
/// entity id.
pub fn select_entities(
    corpus: &Corpus,
    graph: &SemanticGraph,
    index: &VectorIndex,
    embedder: &dyn Embedder,
    expr: &FilterExpr,
    limit: usize,
) -> Result<Vec<Selection>, FilterError> {
    expr.check()?;
    let probes: Vec<_> = expr.similar_texts().into_iter().map(|t| embedder.embed(t)).collect();
    let mut out: Vec<Selection> = graph
        .nodes()
        .iter()
        .filter(|n| corpus.get(&n.parent_doc_id).is_some_and(|d| evaluate_filter(expr, d)))
        .map(|n| {
            let score = match index.vector(&n.entity_id) {
                Some(v) if !probes.is_empty() => {
                    probes.iter().map(|p| cosine_similarity(p, v).unwrap_or(0.0)).sum::<f64>() / probes.len() as f64
                }
                _ => 0.0,
            };
            Selection { entity_id: n.entity_id.clone(), score }
        })
        .collect();
    if !probes.is_empty() {
        out.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.entity_id.cmp(&b.entity_id)));
    }
    out.truncate(limit);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cmp(field: &str, op: CmpOp, v: Literal) -> FilterExpr {
        FilterExpr::compare(field, op, v)
    }

    fn doc() -> EvidenceDoc {
        EvidenceDoc::new(
            "d1",
            "Warming is real. Emissions rise.",
            "warming is real",
            "Warming is real",
            "Mann 19",
            "Michigan (7-week)",
            "Kritik Answers",
            2013,
        )
    }

    #[test]
    fn parses_retrieval_example() {
        let e = parse_filter("camp = 'Gonzaga' AND year = 2013 AND SIMILAR('environment')").unwrap();
        let expect = FilterExpr::and(
            FilterExpr::and(
                cmp("camp", CmpOp::Eq, Literal::Str("Gonzaga".into())),
                cmp("year", CmpOp::Eq, Literal::Int(2013)),
            ),
            FilterExpr::Similar("environment".into()),
        );
        assert_eq!(e, expect);
    }

    #[test]
    fn not_binds_tighter_than_or() {
        let e = parse_expr("NOT a = 1 OR b = 2").unwrap();
        let expect =
            FilterExpr::or(FilterExpr::not(cmp("a", CmpOp::Eq, Literal::Int(1))), cmp("b", CmpOp::Eq, Literal::Int(2)));
        assert_eq!(e, expect);
        // The typed parser knows no field "a".
        assert_eq!(parse_filter("NOT a = 1 OR b = 2").unwrap_err().kind, FilterErrorKind::UnknownField);
    }

    #[test]
    fn syntax_error_positions() {
        let err = parse_filter("year = ").unwrap_err();
        assert_eq!(err.kind, FilterErrorKind::Syntax);
        assert_eq!(err.position, Some(Position { line: 1, column: 8 }));
        let err = parse_filter("year = 2013\n  AND camp ~ 'x'").unwrap_err();
        assert_eq!(err.position, Some(Position { line: 2, column: 12 }));
        let err = parse_filter("(year = 1").unwrap_err();
        assert_eq!(err.position, Some(Position { line: 1, column: 10 }));
        assert!(parse_filter("camp = 'open").is_err());
        assert!(parse_filter("").is_err());
    }

    #[test]
    fn type_errors() {
        let err = parse_filter("year LIKE 'x'").unwrap_err();
        assert_eq!((err.kind, err.position), (FilterErrorKind::Type, Some(Position { line: 1, column: 1 })));
        assert_eq!(parse_filter("camp > 'a'").unwrap_err().kind, FilterErrorKind::Type);
        assert_eq!(parse_filter("camp = 3").unwrap_err().kind, FilterErrorKind::Type);
        assert_eq!(parse_filter("  color = 'x'").unwrap_err().position, Some(Position { line: 1, column: 3 }));
        assert_eq!(parse_filter("NOT SIMILAR('x')").unwrap_err().kind, FilterErrorKind::Type);
    }

    #[test]
    fn evaluation_examples() {
        let d = doc();
        assert!(evaluate_filter(&parse_filter("year = 2013").unwrap(), &d));
        assert!(evaluate_filter(&parse_filter("camp LIKE '%Michigan%'").unwrap(), &d));
        assert!(!evaluate_filter(&parse_filter("NOT (tag = 'Kritik Answers')").unwrap(), &d));
        assert!(!evaluate_filter(&parse_filter("camp = 'michigan (7-week)'").unwrap(), &d));
        assert!(evaluate_filter(&parse_filter("camp LIKE 'michigan (_-week)'").unwrap(), &d));
        assert!(evaluate_filter(&parse_filter("extractwords = 3 AND wordcount = 5").unwrap(), &d));
        assert!(evaluate_filter(&parse_filter("SIMILAR('anything') AND doc LIKE '%EMISSIONS%'").unwrap(), &d));
        assert!(evaluate_filter(&parse_filter("year <> 2014 AND year < 2014 AND year > -1").unwrap(), &d));
    }

    #[test]
    fn like_patterns() {
        assert!(like_match("abc", "a%"));
        assert!(like_match("abc", "%"));
        assert!(like_match("", "%"));
        assert!(like_match("abc", "_b_"));
        assert!(!like_match("abc", "_b"));
        assert!(like_match("a%c", "a%c"));
        assert!(like_match("mississippi", "%iss%ppi"));
        assert!(!like_match("mississippi", "%iss%ppx"));
    }

    #[test]
    fn printing_escapes_and_parenthesizes() {
        let e = parse_filter("(camp = 'O''Brien' OR camp = 'x') AND NOT (year = 1 AND year = 2)").unwrap();
        let printed = e.to_string();
        assert_eq!(printed, "(camp = 'O''Brien' OR camp = 'x') AND NOT (year = 1 AND year = 2)");
        let right_nested = FilterExpr::and(
            cmp("year", CmpOp::Eq, Literal::Int(1)),
            FilterExpr::and(cmp("year", CmpOp::Eq, Literal::Int(2)), cmp("year", CmpOp::Eq, Literal::Int(3))),
        );
        assert_eq!(parse_filter(&right_nested.to_string()).unwrap(), right_nested);
    }

    #[test]
    fn deep_nesting_is_an_error_not_a_crash() {
        let src = format!("{}year = 1{}", "(".repeat(5000), ")".repeat(5000));
        assert_eq!(parse_filter(&src).unwrap_err().kind, FilterErrorKind::Syntax);
        let src = format!("{}year = 1", "NOT ".repeat(5000));
        assert!(parse_filter(&src).is_err());
    }
}
