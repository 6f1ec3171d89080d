//! Polarity lexicons: loading, cross-lingual transfer and union.
//!
//! File layout is one `word<TAB>polarity[<TAB>origin<TAB>similarity]` entry
//! per line, `#` lines being comments. The optional columns record where a
//! transferred entry came from; readers that only need polarities ignore
//! them.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use thiserror::Error;

use crate::alignment::{AlignError, LinearMap};
use crate::embeddings::{fold_word, EmbeddingError, EmbeddingTable};
use crate::exec::Exec;
use crate::numfmt;

pub const DEFAULT_LAMBDA: f64 = 0.65;

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("{message} at line {line}")]
    Parse { line: usize, message: String },
    #[error("unknown polarity {token:?} at line {line}")]
    UnknownPolarity { line: usize, token: String },
    #[error("conflicting polarities for {0:?}")]
    Conflict(String),
    #[error("lexicon {0:?} is empty")]
    Empty(String),
    #[error("threshold must lie in (0, 1], got {0}")]
    Threshold(f64),
    #[error("dimension mismatch: map expects {expected}, table has {actual}")]
    Dimension { expected: usize, actual: usize },
    #[error(transparent)]
    Align(#[from] AlignError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Polarity {
    Negative,
    Positive,
}

impl Polarity {
    pub fn as_str(self) -> &'static str {
        match self {
            Polarity::Positive => "positive",
            Polarity::Negative => "negative",
        }
    }
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Polarity {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "positive" => Ok(Polarity::Positive),
            "negative" => Ok(Polarity::Negative),
            _ => Err(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Native,
    Transferred,
    Union,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub method: Method,
    pub origin: Option<String>,
    pub similarity: Option<f64>,
}

impl Provenance {
    pub fn native() -> Self {
        Provenance {
            method: Method::Native,
            origin: None,
            similarity: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LexiconEntry {
    pub polarity: Polarity,
    pub provenance: Provenance,
}

/// Word → polarity map, kept sorted by word.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarityLexicon {
    name: String,
    entries: BTreeMap<String, LexiconEntry>,
}

impl PolarityLexicon {
    pub fn new(name: &str) -> Self {
        PolarityLexicon {
            name: name.to_string(),
            entries: BTreeMap::new(),
        }
    }

    /// Builds a native lexicon; a word listed with both polarities is an
    /// error.
    pub fn from_words<S: AsRef<str>>(
        name: &str,
        words: impl IntoIterator<Item = (S, Polarity)>,
    ) -> Result<Self, LexiconError> {
        let mut lex = PolarityLexicon::new(name);
        for (w, p) in words {
            lex.insert_checked(w.as_ref(), p, Provenance::native())?;
        }
        Ok(lex)
    }

    fn insert_checked(&mut self, word: &str, polarity: Polarity, provenance: Provenance) -> Result<(), LexiconError> {
        match self.entries.get(word) {
            Some(e) if e.polarity != polarity => Err(LexiconError::Conflict(word.to_string())),
            Some(_) => Ok(()),
            None => {
                self.entries
                    .insert(word.to_string(), LexiconEntry { polarity, provenance });
                Ok(())
            }
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<&LexiconEntry> {
        self.entries.get(word)
    }

    pub fn polarity(&self, word: &str) -> Option<Polarity> {
        self.entries.get(word).map(|e| e.polarity)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &LexiconEntry)> {
        self.entries.iter().map(|(w, e)| (w.as_str(), e))
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn write_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# lexicon: {}", self.name)?;
        for (word, e) in &self.entries {
            write!(out, "{}\t{}", word, e.polarity)?;
            if let (Some(origin), Some(sim)) = (&e.provenance.origin, e.provenance.similarity) {
                write!(out, "\t{}\t{}", origin, numfmt::exact(sim))?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Reads a lexicon file. Repeated words must agree on polarity.
pub fn parse_lexicon<R: BufRead>(reader: R, name: &str, fold_case: bool) -> Result<PolarityLexicon, LexiconError> {
    let mut lex = PolarityLexicon::new(name);
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = i + 1;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() < 2 || cols[0].is_empty() {
            return Err(LexiconError::Parse {
                line: line_no,
                message: "expected \"word<TAB>polarity\"".to_string(),
            });
        }
        let polarity: Polarity = cols[1].trim().parse().map_err(|_| LexiconError::UnknownPolarity {
            line: line_no,
            token: cols[1].to_string(),
        })?;
        let provenance = match (cols.get(2), cols.get(3)) {
            (Some(origin), sim) if !origin.is_empty() => {
                let similarity = match sim {
                    Some(s) if !s.is_empty() => Some(s.trim().parse::<f64>().map_err(|_| LexiconError::Parse {
                        line: line_no,
                        message: format!("invalid similarity {:?}", s),
                    })?),
                    _ => None,
                };
                Provenance {
                    method: Method::Transferred,
                    origin: Some(origin.to_string()),
                    similarity,
                }
            }
            _ => Provenance::native(),
        };
        let word = fold_word(cols[0], fold_case);
        lex.insert_checked(&word, polarity, provenance)?;
    }
    if lex.is_empty() {
        return Err(LexiconError::Empty(name.to_string()));
    }
    Ok(lex)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransferReport {
    pub source_size: usize,
    pub translated_source_words: usize,
    pub oov_source_words: usize,
    /// In-vocabulary source words with no target word above the threshold.
    pub unmatched_source_words: usize,
    pub conflict_drops: usize,
    pub output_size: usize,
    pub lambda_used: f64,
    pub dropped_words: Vec<String>,
}

impl TransferReport {
    pub fn to_key_values(&self) -> String {
        format!(
            "source_size={}\ntranslated_source_words={}\noov_source_words={}\nunmatched_source_words={}\nconflict_drops={}\noutput_size={}\nlambda_used={}\n",
            self.source_size,
            self.translated_source_words,
            self.oov_source_words,
            self.unmatched_source_words,
            self.conflict_drops,
            self.output_size,
            self.lambda_used
        )
    }
}

enum Outcome {
    Oov,
    Matches(Vec<(String, f64)>),
}

/// Projects every source lexicon word and labels each target word whose
/// cosine with the projection exceeds `lambda` with the source polarity.
///
/// A target word reached from both polarities is dropped. When several
/// source words of one polarity reach the same target word, the provenance
/// records the most similar one.
pub fn transfer_lexicon(
    lex: &PolarityLexicon,
    map: &LinearMap,
    src: &EmbeddingTable,
    tgt: &EmbeddingTable,
    lambda: f64,
) -> Result<(PolarityLexicon, TransferReport), LexiconError> {
    transfer_lexicon_with(lex, map, src, tgt, lambda, Exec::default())
}

pub fn transfer_lexicon_with(
    lex: &PolarityLexicon,
    map: &LinearMap,
    src: &EmbeddingTable,
    tgt: &EmbeddingTable,
    lambda: f64,
    exec: Exec,
) -> Result<(PolarityLexicon, TransferReport), LexiconError> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(LexiconError::Threshold(lambda));
    }
    if map.source_dim() != src.dim() {
        return Err(LexiconError::Dimension {
            expected: map.source_dim(),
            actual: src.dim(),
        });
    }
    if map.target_dim() != tgt.dim() {
        return Err(LexiconError::Dimension {
            expected: map.target_dim(),
            actual: tgt.dim(),
        });
    }

    let words: Vec<(&str, Polarity)> = lex.iter().map(|(w, e)| (w, e.polarity)).collect();
    let outcomes = exec.map(&words, |(word, _)| -> Result<Outcome, LexiconError> {
        let Some(x) = src.lookup(word) else {
            return Ok(Outcome::Oov);
        };
        let projected = map.project(x)?;
        match tgt.neighbors_above_with(&projected, lambda, Exec::Sequential) {
            Ok(hits) => Ok(Outcome::Matches(
                hits.into_iter().map(|n| (n.word, n.similarity)).collect(),
            )),
            Err(EmbeddingError::ZeroNorm) => Ok(Outcome::Matches(Vec::new())),
            Err(e) => Err(e.into()),
        }
    });

    let mut report = TransferReport {
        source_size: words.len(),
        translated_source_words: 0,
        oov_source_words: 0,
        unmatched_source_words: 0,
        conflict_drops: 0,
        output_size: 0,
        lambda_used: lambda,
        dropped_words: Vec::new(),
    };
    // target word -> best (origin, similarity) per polarity
    let mut candidates: BTreeMap<String, [Option<(String, f64)>; 2]> = BTreeMap::new();
    for ((origin, polarity), outcome) in words.iter().zip(outcomes) {
        match outcome? {
            Outcome::Oov => report.oov_source_words += 1,
            Outcome::Matches(hits) if hits.is_empty() => report.unmatched_source_words += 1,
            Outcome::Matches(hits) => {
                report.translated_source_words += 1;
                for (target, sim) in hits {
                    let slot = &mut candidates.entry(target).or_default()[*polarity as usize];
                    if slot.as_ref().is_none_or(|(_, best)| sim > *best) {
                        *slot = Some((origin.to_string(), sim));
                    }
                }
            }
        }
    }

    let mut out = PolarityLexicon::new(&format!("{}@{}", lex.name(), tgt.language()));
    for (target, [neg, pos]) in candidates {
        let (polarity, (origin, sim)) = match (neg, pos) {
            (Some(n), None) => (Polarity::Negative, n),
            (None, Some(p)) => (Polarity::Positive, p),
            _ => {
                report.conflict_drops += 1;
                report.dropped_words.push(target);
                continue;
            }
        };
        out.entries.insert(
            target,
            LexiconEntry {
                polarity,
                provenance: Provenance {
                    method: Method::Transferred,
                    origin: Some(origin),
                    similarity: Some(sim),
                },
            },
        );
    }
    report.output_size = out.len();
    if out.is_empty() {
        log::warn!("transfer of {:?} produced an empty lexicon", lex.name());
    }
    Ok((out, report))
}

/// Adds induced entries under native ones; on collision the native entry
/// wins. Returns the merged lexicon and how many induced entries were
/// overridden.
pub fn overlay_native(native: &PolarityLexicon, induced: &PolarityLexicon) -> (PolarityLexicon, usize) {
    let mut out = PolarityLexicon {
        name: induced.name.clone(),
        entries: induced.entries.clone(),
    };
    let mut overridden = 0;
    for (word, e) in &native.entries {
        if out.entries.insert(word.clone(), e.clone()).is_some() {
            overridden += 1;
        }
    }
    (out, overridden)
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnionOutcome {
    pub lexicon: PolarityLexicon,
    pub conflicts: usize,
}

/// Set union. Words with opposite polarities in the two inputs are left
/// out; words present in both with the same polarity get the `Union`
/// provenance. Symmetric in its arguments.
pub fn union_lexicons(a: &PolarityLexicon, b: &PolarityLexicon) -> UnionOutcome {
    let name = if a.name <= b.name {
        format!("{}+{}", a.name, b.name)
    } else {
        format!("{}+{}", b.name, a.name)
    };
    let mut entries = BTreeMap::new();
    let mut conflicts = 0;
    for (word, ea) in &a.entries {
        match b.entries.get(word) {
            None => {
                entries.insert(word.clone(), ea.clone());
            }
            Some(eb) if eb.polarity == ea.polarity => {
                let provenance = if ea.provenance == eb.provenance {
                    ea.provenance.clone()
                } else {
                    Provenance {
                        method: Method::Union,
                        origin: None,
                        similarity: None,
                    }
                };
                entries.insert(
                    word.clone(),
                    LexiconEntry {
                        polarity: ea.polarity,
                        provenance,
                    },
                );
            }
            Some(_) => conflicts += 1,
        }
    }
    for (word, eb) in &b.entries {
        if !a.entries.contains_key(word) {
            entries.insert(word.clone(), eb.clone());
        }
    }
    UnionOutcome {
        lexicon: PolarityLexicon { name, entries },
        conflicts,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LexiconStats {
    pub positive: usize,
    pub negative: usize,
    /// Mean similarity over entries that carry one; absent when none do.
    pub mean_similarity: Option<f64>,
}

pub fn lexicon_stats(lex: &PolarityLexicon) -> LexiconStats {
    let positive = lex
        .entries
        .values()
        .filter(|e| e.polarity == Polarity::Positive)
        .count();
    let sims: Vec<f64> = lex
        .entries
        .values()
        .filter(|e| e.provenance.method == Method::Transferred)
        .filter_map(|e| e.provenance.similarity)
        .collect();
    LexiconStats {
        positive,
        negative: lex.len() - positive,
        mean_similarity: (!sims.is_empty()).then(|| sims.iter().sum::<f64>() / sims.len() as f64),
    }
}
