//! Monolingual word-embedding tables.
//!
//! Tables are read from the textual vector-file layout used by word2vec:
//!
//! ```text
//! 2 3
//! cat 1 0 0
//! dog 0 1 0
//! ```
//!
//! The first line holds the vocabulary size and the dimensionality, each
//! following line a word and its components. Raw vectors are kept for
//! fitting linear maps; a unit-normalized copy backs cosine retrieval.

use std::borrow::Cow;
use std::cmp::Ordering;
use std::collections::HashMap;
use std::io::{BufRead, Write};

use thiserror::Error;

use crate::exec::Exec;
use crate::numfmt;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("{message} at line {line}")]
    Parse { line: usize, message: String },
    #[error("zero-norm vector has no cosine similarity")]
    ZeroNorm,
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },
    #[error("threshold must lie in (0, 1], got {0}")]
    Threshold(f64),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Applies the case-folding policy shared by embeddings, dictionaries and
/// lexicons.
pub fn fold_word(word: &str, fold_case: bool) -> Cow<'_, str> {
    if fold_case && word.chars().any(char::is_uppercase) {
        Cow::Owned(word.to_lowercase())
    } else {
        Cow::Borrowed(word)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LoadOptions {
    pub fold_case: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions { fold_case: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub word: String,
    pub similarity: f64,
}

/// Immutable vocabulary → vector map for one language.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    language: String,
    dim: usize,
    fold_case: bool,
    vocab: Vec<String>,
    index: HashMap<String, usize>,
    vectors: Vec<f64>,
    unit: Vec<f64>,
    degenerate: Vec<bool>,
    duplicates: usize,
}

impl EmbeddingTable {
    /// Builds a table from `(word, vector)` rows. Duplicate words (after
    /// folding) keep their first occurrence.
    pub fn from_rows<I, S>(language: &str, dim: usize, rows: I, options: LoadOptions) -> Result<Self, EmbeddingError>
    where
        I: IntoIterator<Item = (S, Vec<f64>)>,
        S: AsRef<str>,
    {
        let mut table = EmbeddingTable::empty(language, dim, options);
        for (i, (word, vector)) in rows.into_iter().enumerate() {
            if vector.len() != dim {
                return Err(EmbeddingError::Dimension {
                    expected: dim,
                    actual: vector.len(),
                });
            }
            if vector.iter().any(|v| !v.is_finite()) {
                return Err(EmbeddingError::Parse {
                    line: i + 1,
                    message: "non-finite value".to_string(),
                });
            }
            table.push(word.as_ref(), &vector);
        }
        Ok(table)
    }

    fn empty(language: &str, dim: usize, options: LoadOptions) -> Self {
        EmbeddingTable {
            language: language.to_string(),
            dim,
            fold_case: options.fold_case,
            vocab: Vec::new(),
            index: HashMap::new(),
            vectors: Vec::new(),
            unit: Vec::new(),
            degenerate: Vec::new(),
            duplicates: 0,
        }
    }

    fn push(&mut self, word: &str, vector: &[f64]) {
        let word = fold_word(word, self.fold_case).into_owned();
        if self.index.contains_key(&word) {
            self.duplicates += 1;
            return;
        }
        self.index.insert(word.clone(), self.vocab.len());
        self.vocab.push(word);
        self.vectors.extend_from_slice(vector);
        let norm = l2_norm(vector);
        if norm > 0.0 {
            self.unit.extend(vector.iter().map(|v| v / norm));
            self.degenerate.push(false);
        } else {
            self.unit.extend(std::iter::repeat_n(0.0, vector.len()));
            self.degenerate.push(true);
        }
    }

    pub fn language(&self) -> &str {
        &self.language
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    pub fn fold_case(&self) -> bool {
        self.fold_case
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    /// Number of input rows skipped because their word was already present.
    pub fn duplicates(&self) -> usize {
        self.duplicates
    }

    /// Indices of zero-norm rows; these never appear in retrieval results.
    pub fn degenerate_rows(&self) -> Vec<usize> {
        self.degenerate
            .iter()
            .enumerate()
            .filter_map(|(i, &d)| d.then_some(i))
            .collect()
    }

    pub fn word(&self, index: usize) -> &str {
        &self.vocab[index]
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.index.get(fold_word(word, self.fold_case).as_ref()).copied()
    }

    pub fn lookup(&self, word: &str) -> Option<&[f64]> {
        self.index_of(word).map(|i| self.vector(i))
    }

    pub fn vector(&self, index: usize) -> &[f64] {
        &self.vectors[index * self.dim..(index + 1) * self.dim]
    }

    pub fn unit_vector(&self, index: usize) -> &[f64] {
        &self.unit[index * self.dim..(index + 1) * self.dim]
    }

    /// Cosine of every vocabulary row against `query`; `None` for
    /// degenerate rows.
    fn similarities(&self, query: &[f64], exec: Exec) -> Result<Vec<Option<f64>>, EmbeddingError> {
        if query.len() != self.dim {
            return Err(EmbeddingError::Dimension {
                expected: self.dim,
                actual: query.len(),
            });
        }
        let norm = l2_norm(query);
        if norm == 0.0 || !norm.is_finite() {
            return Err(EmbeddingError::ZeroNorm);
        }
        let q: Vec<f64> = query.iter().map(|v| v / norm).collect();
        Ok(exec.map_range(self.len(), |i| {
            if self.degenerate[i] {
                None
            } else {
                Some(dot(self.unit_vector(i), &q).clamp(-1.0, 1.0))
            }
        }))
    }

    /// All words whose cosine with `query` is strictly greater than
    /// `lambda`, most similar first.
    pub fn neighbors_above(&self, query: &[f64], lambda: f64) -> Result<Vec<Neighbor>, EmbeddingError> {
        self.neighbors_above_with(query, lambda, Exec::default())
    }

    pub fn neighbors_above_with(
        &self,
        query: &[f64],
        lambda: f64,
        exec: Exec,
    ) -> Result<Vec<Neighbor>, EmbeddingError> {
        if !(lambda > 0.0 && lambda <= 1.0) {
            return Err(EmbeddingError::Threshold(lambda));
        }
        let sims = self.similarities(query, exec)?;
        let mut hits: Vec<(usize, f64)> = sims
            .into_iter()
            .enumerate()
            .filter_map(|(i, s)| s.filter(|&s| s > lambda).map(|s| (i, s)))
            .collect();
        hits.sort_by(rank_order);
        Ok(self.to_neighbors(hits))
    }

    /// The `k` most similar words (fewer when the vocabulary is smaller).
    pub fn top_k(&self, query: &[f64], k: usize) -> Result<Vec<Neighbor>, EmbeddingError> {
        self.top_k_with(query, k, Exec::default())
    }

    pub fn top_k_with(&self, query: &[f64], k: usize, exec: Exec) -> Result<Vec<Neighbor>, EmbeddingError> {
        let sims = self.similarities(query, exec)?;
        let mut hits: Vec<(usize, f64)> = sims
            .into_iter()
            .enumerate()
            .filter_map(|(i, s)| s.map(|s| (i, s)))
            .collect();
        if k == 0 {
            return Ok(Vec::new());
        }
        if k < hits.len() {
            hits.select_nth_unstable_by(k - 1, rank_order);
            hits.truncate(k);
        }
        hits.sort_by(rank_order);
        Ok(self.to_neighbors(hits))
    }

    fn to_neighbors(&self, hits: Vec<(usize, f64)>) -> Vec<Neighbor> {
        hits.into_iter()
            .map(|(index, similarity)| Neighbor {
                index,
                word: self.vocab[index].clone(),
                similarity,
            })
            .collect()
    }

    /// Writes the table in the textual layout with 6 significant digits.
    pub fn write_text<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{} {}", self.len(), self.dim)?;
        let mut line = String::new();
        for (i, word) in self.vocab.iter().enumerate() {
            line.clear();
            line.push_str(word);
            for v in self.vector(i) {
                line.push(' ');
                line.push_str(&numfmt::significant(*v, 6));
            }
            writeln!(out, "{}", line)?;
        }
        Ok(())
    }
}

/// Descending similarity, ties by vocabulary order.
fn rank_order(a: &(usize, f64), b: &(usize, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}

pub fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

pub fn l2_norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64, EmbeddingError> {
    if u.len() != v.len() {
        return Err(EmbeddingError::Dimension {
            expected: u.len(),
            actual: v.len(),
        });
    }
    let nu = l2_norm(u);
    let nv = l2_norm(v);
    if nu == 0.0 || nv == 0.0 {
        return Err(EmbeddingError::ZeroNorm);
    }
    Ok((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0))
}

/// Parses a textual vector file.
///
/// The header's vocabulary count must match the number of vector lines.
/// Blank lines are ignored. Words repeated after case folding keep the
/// first vector; [`EmbeddingTable::duplicates`] reports how many were
/// skipped.
pub fn parse_embeddings<R: BufRead>(
    reader: R,
    language: &str,
    options: LoadOptions,
) -> Result<EmbeddingTable, EmbeddingError> {
    let mut lines = reader.lines().enumerate();
    let header = loop {
        match lines.next() {
            Some((_, line)) => {
                let line = line?;
                if !line.trim().is_empty() {
                    break line;
                }
            }
            None => {
                return Err(EmbeddingError::Parse {
                    line: 1,
                    message: "missing header".to_string(),
                })
            }
        }
    };
    let header_err = |message: &str| EmbeddingError::Parse {
        line: 1,
        message: message.to_string(),
    };
    let mut fields = header.split_ascii_whitespace();
    let count: usize = fields
        .next()
        .and_then(|f| f.parse().ok())
        .ok_or_else(|| header_err("malformed header: bad vocabulary count"))?;
    let dim: usize = fields
        .next()
        .and_then(|f| f.parse().ok())
        .ok_or_else(|| header_err("malformed header: bad dimension"))?;
    if dim == 0 || fields.next().is_some() {
        return Err(header_err("malformed header: expected \"vocab_count dim\""));
    }

    let mut table = EmbeddingTable::empty(language, dim, options);
    let mut seen = 0usize;
    let mut values = Vec::with_capacity(dim);
    for (i, line) in lines {
        let line = line?;
        let line_no = i + 1;
        let mut parts = line.split_ascii_whitespace();
        let Some(word) = parts.next() else { continue };
        seen += 1;
        if seen > count {
            return Err(EmbeddingError::Parse {
                line: line_no,
                message: format!("header declares {} words but more lines follow", count),
            });
        }
        values.clear();
        for field in parts {
            let v: f64 = field.parse().map_err(|_| EmbeddingError::Parse {
                line: line_no,
                message: format!("invalid number {:?}", field),
            })?;
            if !v.is_finite() {
                return Err(EmbeddingError::Parse {
                    line: line_no,
                    message: format!("non-finite value {:?}", field),
                });
            }
            values.push(v);
        }
        if values.len() != dim {
            return Err(EmbeddingError::Parse {
                line: line_no,
                message: format!("expected {} values, got {}", dim, values.len()),
            });
        }
        table.push(word, &values);
    }
    if seen != count {
        return Err(EmbeddingError::Parse {
            line: seen + 2,
            message: format!("header declares {} words but found {}", count, seen),
        });
    }
    if table.duplicates > 0 {
        log::warn!("{}: skipped {} duplicate vocabulary lines", language, table.duplicates);
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn parse(text: &str) -> Result<EmbeddingTable, EmbeddingError> {
        parse_embeddings(text.as_bytes(), "xx", LoadOptions::default())
    }

    fn toy() -> EmbeddingTable {
        parse("2 3\ncat 1 0 0\ndog 0 1 0\n").unwrap()
    }

    #[test]
    fn minimal_file() {
        let t = toy();
        assert_eq!(t.vocab(), &["cat".to_string(), "dog".to_string()]);
        assert_eq!(t.dim(), 3);
        assert_eq!(t.language(), "xx");
    }

    #[test]
    fn empty_file_misses_everything() {
        let t = parse("0 5\n").unwrap();
        assert!(t.is_empty());
        assert_eq!(t.dim(), 5);
        assert!(t.lookup("cat").is_none());
        assert!(t.neighbors_above(&[1.0; 5], 0.5).unwrap().is_empty());
        assert!(t.top_k(&[1.0; 5], 3).unwrap().is_empty());
    }

    #[test]
    fn short_line_is_rejected() {
        let err = parse("1 3\ncat 1 0\n").unwrap_err();
        assert_eq!(err.to_string(), "expected 3 values, got 2 at line 2");
    }

    #[test]
    fn bad_header_and_counts() {
        assert!(matches!(parse("x 3\n"), Err(EmbeddingError::Parse { line: 1, .. })));
        assert!(matches!(parse(""), Err(EmbeddingError::Parse { line: 1, .. })));
        assert!(parse("2 1\ncat 1\n").is_err());
        assert!(parse("1 1\ncat 1\ndog 2\n").is_err());
        let err = parse("1 2\ncat 1 NaN\n").unwrap_err();
        assert!(err.to_string().contains("non-finite"));
        let err = parse("1 2\ncat 1 inf\n").unwrap_err();
        assert!(err.to_string().contains("line 2"));
    }

    #[test]
    fn duplicates_keep_first() {
        let t = parse("3 1\ncat 1\nCat 2\ndog 3\n").unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.duplicates(), 1);
        assert_eq!(t.lookup("cat"), Some(&[1.0][..]));
    }

    #[test]
    fn lookup_and_case_folding() {
        let t = toy();
        assert_eq!(t.lookup("cat"), Some(&[1.0, 0.0, 0.0][..]));
        assert_eq!(t.lookup("bird"), None);
        assert_eq!(t.lookup("CAT"), Some(&[1.0, 0.0, 0.0][..]));

        let raw = parse_embeddings("1 1\nCat 1\n".as_bytes(), "xx", LoadOptions { fold_case: false }).unwrap();
        assert!(raw.lookup("cat").is_none());
        assert!(raw.lookup("Cat").is_some());
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!((cosine(&[1.0, 1.0], &[1.0, 0.0]).unwrap() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!(matches!(
            cosine(&[0.0, 0.0], &[1.0, 0.0]),
            Err(EmbeddingError::ZeroNorm)
        ));
    }

    #[test]
    fn neighbors_default_threshold() {
        let t = toy();
        let hits = t.neighbors_above(t.lookup("cat").unwrap(), 0.65).unwrap();
        assert_eq!(hits[0].word, "cat");
        assert_eq!(hits[0].similarity, 1.0);
        assert_eq!(hits.len(), 1);
    }

    #[test]
    fn threshold_one_is_strict() {
        let t = toy();
        assert!(t.neighbors_above(&[1.0, 0.0, 0.0], 1.0).unwrap().is_empty());
        assert!(t.neighbors_above(&[1.0, 0.0, 0.0], 0.0).is_err());
        assert!(t.neighbors_above(&[0.0, 0.0, 0.0], 0.5).is_err());
        assert!(t.neighbors_above(&[1.0, 0.0], 0.5).is_err());
    }

    #[test]
    fn zero_rows_are_flagged_and_skipped() {
        let t = parse("3 2\na 0 0\nb 1 0\nc 1 1\n").unwrap();
        assert_eq!(t.degenerate_rows(), vec![0]);
        let all = t.top_k(&[1.0, 0.0], 10).unwrap();
        assert_eq!(all.iter().map(|n| n.word.as_str()).collect::<Vec<_>>(), ["b", "c"]);
    }

    // Independent oracle: cosine from raw vectors, stable sort on
    // (-similarity, index).
    fn brute_ranking(t: &EmbeddingTable, q: &[f64]) -> Vec<(String, f64)> {
        let mut all: Vec<(usize, f64)> = (0..t.len())
            .filter_map(|i| cosine(t.vector(i), q).ok().map(|s| (i, s)))
            .collect();
        all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        all.into_iter().map(|(i, s)| (t.word(i).to_string(), s)).collect()
    }

    #[test]
    fn five_word_table_matches_brute_force() {
        let t = parse("5 3\na 0.3 -1.2 0.5\nb 1.1 0.4 0.9\nc -0.7 0.2 0.1\nd 0.5 0.5 0.5\ne 2.0 -0.1 0.3\n").unwrap();
        let q = [0.9, 0.1, 0.6];
        let oracle = brute_ranking(&t, &q);
        let got = t.neighbors_above(&q, 0.3).unwrap();
        let expect: Vec<_> = oracle.iter().filter(|(_, s)| *s > 0.3).collect();
        assert_eq!(got.len(), expect.len());
        for (n, (w, s)) in got.iter().zip(expect) {
            assert_eq!(&n.word, w);
            assert!((n.similarity - s).abs() < 1e-12);
        }
    }

    #[test]
    fn top_k_examples() {
        let t = parse("6 2\na 1 0\nb 0.9 0.1\nc 0.5 0.5\nd 0 1\ne -1 0.2\nf 0.7 -0.7\n").unwrap();
        let q = [1.0, 0.2];
        let oracle = brute_ranking(&t, &q);
        let top3 = t.top_k(&q, 3).unwrap();
        let words: Vec<_> = top3.iter().map(|n| n.word.clone()).collect();
        let expect: Vec<_> = oracle.iter().take(3).map(|(w, _)| w.clone()).collect();
        assert_eq!(words, expect);

        assert_eq!(t.top_k(t.lookup("d").unwrap(), 1).unwrap()[0].word, "d");
        assert_eq!(t.top_k(&q, 100).unwrap().len(), 6);
    }

    #[test]
    fn ties_follow_vocabulary_order() {
        let t = parse("3 2\nz 1 0\ny 2 0\nx 0 1\n").unwrap();
        let hits = t.top_k(&[1.0, 0.0], 2).unwrap();
        assert_eq!(hits[0].word, "z");
        assert_eq!(hits[1].word, "y");
    }

    #[test]
    fn unit_rows_are_normalized() {
        let t = parse("2 3\na 3 4 0\nb 1e-3 2e-3 -5\n").unwrap();
        for i in 0..t.len() {
            assert!((l2_norm(t.unit_vector(i)) - 1.0).abs() < 1e-6);
        }
    }

    fn arb_vec(d: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-10.0f64..10.0, d).prop_filter("nonzero", |v| l2_norm(v) > 1e-3)
    }

    proptest! {
        #[test]
        fn cosine_symmetric_and_scale_free(u in arb_vec(6), v in arb_vec(6), alpha in 1e-3f64..1e3) {
            let a = cosine(&u, &v).unwrap();
            let b = cosine(&v, &u).unwrap();
            prop_assert!((a - b).abs() <= 1e-12);
            prop_assert!((-1.0..=1.0).contains(&a));
            let scaled: Vec<f64> = u.iter().map(|x| x * alpha).collect();
            prop_assert!((cosine(&u, &scaled).unwrap() - 1.0).abs() <= 1e-9);
        }

        #[test]
        fn threshold_scan_is_filtered_full_ranking(
            rows in proptest::collection::vec(arb_vec(4), 1..30),
            q in arb_vec(4),
            lambda in 0.01f64..1.0,
        ) {
            let t = EmbeddingTable::from_rows(
                "xx", 4,
                rows.into_iter().enumerate().map(|(i, v)| (format!("w{}", i), v)),
                LoadOptions::default(),
            ).unwrap();
            let above = t.neighbors_above(&q, lambda).unwrap();
            let full: Vec<Neighbor> = t.top_k(&q, t.len()).unwrap()
                .into_iter().filter(|n| n.similarity > lambda).collect();
            prop_assert_eq!(above, full);
        }

        #[test]
        fn text_round_trip(rows in proptest::collection::vec(proptest::collection::vec(-100.0f64..100.0, 3), 0..20)) {
            let t = EmbeddingTable::from_rows(
                "xx", 3,
                rows.iter().enumerate().map(|(i, v)| (format!("w{}", i), v.clone())),
                LoadOptions::default(),
            ).unwrap();
            let mut buf = Vec::new();
            t.write_text(&mut buf).unwrap();
            let back = parse_embeddings(&buf[..], "xx", LoadOptions::default()).unwrap();
            prop_assert_eq!(back.vocab(), t.vocab());
            for i in 0..t.len() {
                for (a, b) in back.vector(i).iter().zip(t.vector(i)) {
                    prop_assert!((a - b).abs() <= b.abs() * 5e-6 + 1e-12);
                }
            }
        }
    }
}
