//! Evidence corpus: JSONL ingest, sentence segmentation and entity views.
//!
//! A corpus is immutable once loaded. Each document can be viewed at one of
//! three granularities (its abstract, its extract, or the individual
//! sentences of its full text); every view yields [`Entity`] values whose
//! ids are a deterministic function of the parent document, the granularity
//! and the sentence ordinal.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Abbreviations that never end a sentence.
const ABBREVIATIONS: &[&str] = &["Dr.", "Mr.", "Ms.", "U.S.", "etc.", "e.g.", "i.e.", "vs."];

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read corpus {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {reason}")]
    Rejected { line: usize, reason: RejectReason },
    #[error("line {line}: duplicate doc id {doc_id:?}")]
    DuplicateId { line: usize, doc_id: String },
}

/// Why a record was not loaded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum RejectReason {
    Malformed(String),
    EmptyId,
    EmptyAbstract,
    EmptyExtract,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RejectReason::Malformed(msg) => write!(f, "malformed record: {msg}"),
            RejectReason::EmptyId => f.write_str("empty id"),
            RejectReason::EmptyAbstract => f.write_str("empty abstract"),
            RejectReason::EmptyExtract => f.write_str("empty extract"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Rejection {
    /// 1-based line number in the source file.
    pub line: usize,
    pub reason: RejectReason,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct IngestReport {
    pub loaded: usize,
    pub rejected: usize,
    pub rejections: Vec<Rejection>,
}

/// On-disk record layout. Unknown keys are ignored.
#[derive(Debug, Deserialize, Serialize)]
struct Record {
    id: String,
    #[serde(rename = "fullDocument")]
    full_document: String,
    extract: String,
    #[serde(rename = "abstract")]
    abstract_text: String,
    citation: String,
    camp: String,
    tag: String,
    year: i64,
}

/// One piece of evidence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceDoc {
    pub doc_id: String,
    pub full_text: String,
    /// The read-aloud extractive summary.
    pub extract: String,
    /// The one-sentence argument ("tag") read before the citation.
    pub abstract_text: String,
    pub citation: String,
    pub camp: String,
    pub arg_type: String,
    pub year: i64,
    pub word_count_full: usize,
    pub word_count_extract: usize,
}

impl EvidenceDoc {
    /// Builds a document, computing word counts from the text fields.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        doc_id: impl Into<String>,
        full_text: impl Into<String>,
        extract: impl Into<String>,
        abstract_text: impl Into<String>,
        citation: impl Into<String>,
        camp: impl Into<String>,
        arg_type: impl Into<String>,
        year: i64,
    ) -> Self {
        let full_text = full_text.into();
        let extract = extract.into();
        EvidenceDoc {
            doc_id: doc_id.into(),
            word_count_full: word_count(&full_text),
            word_count_extract: word_count(&extract),
            full_text,
            extract,
            abstract_text: abstract_text.into(),
            citation: citation.into(),
            camp: camp.into(),
            arg_type: arg_type.into(),
            year,
        }
    }

    fn from_record(r: Record) -> Self {
        EvidenceDoc::new(r.id, r.full_document, r.extract, r.abstract_text, r.citation, r.camp, r.tag, r.year)
    }

    fn to_record(&self) -> Record {
        Record {
            id: self.doc_id.clone(),
            full_document: self.full_text.clone(),
            extract: self.extract.clone(),
            abstract_text: self.abstract_text.clone(),
            citation: self.citation.clone(),
            camp: self.camp.clone(),
            tag: self.arg_type.clone(),
            year: self.year,
        }
    }
}

/// Number of whitespace-separated tokens.
pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Abstract,
    Extract,
    Sentence,
}

impl Granularity {
    pub fn as_byte(self) -> u8 {
        match self {
            Granularity::Abstract => 0,
            Granularity::Extract => 1,
            Granularity::Sentence => 2,
        }
    }

    pub fn from_byte(b: u8) -> Option<Self> {
        match b {
            0 => Some(Granularity::Abstract),
            1 => Some(Granularity::Extract),
            2 => Some(Granularity::Sentence),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Granularity::Abstract => "abstract",
            Granularity::Extract => "extract",
            Granularity::Sentence => "sentence",
        }
    }
}

impl fmt::Display for Granularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Granularity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "abstract" | "abs" => Ok(Granularity::Abstract),
            "extract" | "ext" => Ok(Granularity::Extract),
            "sentence" | "sent" => Ok(Granularity::Sentence),
            other => Err(format!("unknown granularity {other:?} (abstract|extract|sentence)")),
        }
    }
}

/// One graph node: a text unit drawn from a document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entity {
    pub entity_id: String,
    pub parent_doc_id: String,
    pub granularity: Granularity,
    /// Sentence index within the parent; 0 for document-level views.
    pub ordinal: usize,
    pub text: String,
}

/// Deterministic entity id for `(doc, granularity, ordinal)`.
///
/// Sentence ordinals are zero-padded so ids sort in sentence order.
pub fn entity_id(doc_id: &str, granularity: Granularity, ordinal: usize) -> String {
    match granularity {
        Granularity::Abstract => format!("{doc_id}/abs"),
        Granularity::Extract => format!("{doc_id}/ext"),
        Granularity::Sentence => format!("{doc_id}/s{ordinal:04}"),
    }
}

#[derive(Debug, Clone, Default)]
pub struct Corpus {
    docs: Vec<EvidenceDoc>,
    by_id: HashMap<String, usize>,
}

impl Corpus {
    /// Builds a corpus from already-validated documents.
    ///
    /// Fails on a duplicate id; empty abstracts or extracts are rejected the
    /// same way the loader rejects them.
    pub fn from_docs(docs: Vec<EvidenceDoc>) -> Result<Self, CorpusError> {
        let mut corpus = Corpus::default();
        for (i, doc) in docs.into_iter().enumerate() {
            if let Some(reason) = validate(&doc) {
                return Err(CorpusError::Rejected { line: i + 1, reason });
            }
            corpus.push(doc, i + 1)?;
        }
        Ok(corpus)
    }

    fn push(&mut self, doc: EvidenceDoc, line: usize) -> Result<(), CorpusError> {
        if self.by_id.contains_key(&doc.doc_id) {
            return Err(CorpusError::DuplicateId { line, doc_id: doc.doc_id });
        }
        self.by_id.insert(doc.doc_id.clone(), self.docs.len());
        self.docs.push(doc);
        Ok(())
    }

    pub fn docs(&self) -> &[EvidenceDoc] {
        &self.docs
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn get(&self, doc_id: &str) -> Option<&EvidenceDoc> {
        self.by_id.get(doc_id).map(|&i| &self.docs[i])
    }

    /// Median extract word count; 1.0 for an empty corpus so it can be used
    /// as a normalizer.
    pub fn median_extract_words(&self) -> f64 {
        let mut counts: Vec<usize> = self.docs.iter().map(|d| d.word_count_extract).collect();
        if counts.is_empty() {
            return 1.0;
        }
        counts.sort_unstable();
        let n = counts.len();
        let median = if n % 2 == 1 { counts[n / 2] as f64 } else { (counts[n / 2 - 1] + counts[n / 2]) as f64 / 2.0 };
        median.max(1.0)
    }

    /// Writes the corpus back out in the JSONL record layout.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for doc in &self.docs {
            serde_json::to_writer(&mut out, &doc.to_record())?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

fn validate(doc: &EvidenceDoc) -> Option<RejectReason> {
    if doc.doc_id.trim().is_empty() {
        Some(RejectReason::EmptyId)
    } else if doc.abstract_text.trim().is_empty() {
        Some(RejectReason::EmptyAbstract)
    } else if doc.extract.trim().is_empty() {
        Some(RejectReason::EmptyExtract)
    } else {
        None
    }
}

/// Loads a JSONL corpus file.
///
/// Blank lines are skipped and are not counted as records. In strict mode
/// the first rejected record aborts the load; otherwise rejected records are
/// logged and listed in the report. A duplicate id always aborts.
pub fn load_corpus(path: impl AsRef<Path>, strict: bool) -> Result<(Corpus, IngestReport), CorpusError> {
    let path = path.as_ref();
    let io_err = |source| CorpusError::Io { path: path.display().to_string(), source };
    let file = File::open(path).map_err(io_err)?;
    read_corpus(BufReader::new(file), strict).map_err(|e| match e {
        ReadError::Io(source) => io_err(source),
        ReadError::Corpus(e) => e,
    })
}

enum ReadError {
    Io(std::io::Error),
    Corpus(CorpusError),
}

/// Reads JSONL records from any buffered reader.
pub fn parse_corpus<R: BufRead>(reader: R, strict: bool) -> Result<(Corpus, IngestReport), CorpusError> {
    read_corpus(reader, strict).map_err(|e| match e {
        ReadError::Io(source) => CorpusError::Io { path: "<reader>".into(), source },
        ReadError::Corpus(e) => e,
    })
}

fn read_corpus<R: BufRead>(reader: R, strict: bool) -> Result<(Corpus, IngestReport), ReadError> {
    let mut corpus = Corpus::default();
    let mut report = IngestReport::default();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(ReadError::Io)?;
        if line.trim().is_empty() {
            continue;
        }
        let outcome = serde_json::from_str::<Record>(&line)
            .map_err(|e| RejectReason::Malformed(e.to_string()))
            .map(EvidenceDoc::from_record)
            .and_then(|doc| match validate(&doc) {
                Some(reason) => Err(reason),
                None => Ok(doc),
            });
        match outcome {
            Ok(doc) => {
                corpus.push(doc, line_no).map_err(ReadError::Corpus)?;
                report.loaded += 1;
            }
            Err(reason) => {
                if strict {
                    return Err(ReadError::Corpus(CorpusError::Rejected { line: line_no, reason }));
                }
                log::warn!("rejected corpus record at line {line_no}: {reason}");
                report.rejected += 1;
                report.rejections.push(Rejection { line: line_no, reason });
            }
        }
    }
    Ok((corpus, report))
}

/// Splits text into sentences.
///
/// A sentence ends after `.`, `?` or `!` when the terminator is followed by
/// whitespace and then an uppercase letter, or by nothing but whitespace up
/// to the end of the text. A `.` that closes one of the known abbreviations
/// never ends a sentence. Returned sentences are trimmed, non-empty slices
/// of the input.
pub fn segment_sentences(text: &str) -> Vec<&str> {
    let mut sentences = Vec::new();
    let mut start = 0;
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    for (pos, &(byte, c)) in chars.iter().enumerate() {
        if !matches!(c, '.' | '?' | '!') {
            continue;
        }
        let end = byte + c.len_utf8();
        let rest = &chars[pos + 1..];
        let ws = rest.iter().take_while(|(_, ch)| ch.is_whitespace()).count();
        let boundary = match rest.get(ws) {
            None => true,
            Some(&(_, next)) => ws > 0 && next.is_uppercase(),
        };
        if !boundary || (c == '.' && ends_with_abbreviation(&text[start..end])) {
            continue;
        }
        let sentence = text[start..end].trim();
        if !sentence.is_empty() {
            sentences.push(sentence);
        }
        start = end;
    }
    let tail = text[start..].trim();
    if !tail.is_empty() {
        sentences.push(tail);
    }
    sentences
}

fn ends_with_abbreviation(span: &str) -> bool {
    let last_word = span.rsplit(char::is_whitespace).next().unwrap_or("");
    ABBREVIATIONS.contains(&last_word)
}

/// The entities of `corpus` at `granularity`, in document order then
/// ordinal order.
pub fn entity_view(corpus: &Corpus, granularity: Granularity) -> Vec<Entity> {
    let mut out = Vec::new();
    for doc in corpus.docs() {
        let whole = |text: &str| Entity {
            entity_id: entity_id(&doc.doc_id, granularity, 0),
            parent_doc_id: doc.doc_id.clone(),
            granularity,
            ordinal: 0,
            text: text.to_string(),
        };
        match granularity {
            Granularity::Abstract => out.push(whole(&doc.abstract_text)),
            Granularity::Extract => out.push(whole(&doc.extract)),
            Granularity::Sentence => {
                for (ordinal, sentence) in segment_sentences(&doc.full_text).into_iter().enumerate() {
                    out.push(Entity {
                        entity_id: entity_id(&doc.doc_id, granularity, ordinal),
                        parent_doc_id: doc.doc_id.clone(),
                        granularity,
                        ordinal,
                        text: sentence.to_string(),
                    });
                }
            }
        }
    }
    out
}
