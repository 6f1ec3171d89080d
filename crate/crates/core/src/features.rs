//! Tweet tokenization and sparse feature extraction.
//!
//! The tokenizer is rule based: text is split on whitespace, then each
//! chunk is refined into hashtags, user mentions, emoticons (looked up in
//! [`EMOTICONS`]), `!`/`?` runs, words and leftover punctuation. Hashtags
//! and mentions are replaced by the generic surfaces `<hashtag>` and
//! `<user>`.
//!
//! Feature families, with their names in the [`FeatureIndex`]:
//!
//! | name | value |
//! |------|-------|
//! | `ng:<w1 .. wn>` | 1 if the lower-cased word n-gram occurs (n = 1..=ngram_max) |
//! | `allcaps` | words of length >= 2 made only of upper-case letters |
//! | `hashtags` | hashtag count |
//! | `lex:<name>:<polarity>` | words found in lexicon `name` with that polarity |
//! | `punct_runs` | runs of `!`, `?` or both |
//! | `last_punct` | 1 if the last token contains `!` or `?` |
//! | `emo_pos`, `emo_neg` | 1 if a positive / negative emoticon occurs |
//! | `last_emo_pos`, `last_emo_neg` | 1 if the last token is such an emoticon |
//! | `elongated` | words with a character repeated at least four times in a row |

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use thiserror::Error;

use crate::exec::Exec;
use crate::lexicon::{Polarity, PolarityLexicon};
use crate::numfmt;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("ngram_max must be at least 1, got {0}")]
    NgramOrder(usize),
    #[error("tweet {0:?} has empty text")]
    EmptyText(String),
    #[error("inference requires a non-empty frozen feature index")]
    EmptyIndex,
    #[error("unknown label {token:?} at line {line}")]
    UnknownLabel { line: usize, token: String },
    #[error("{message} at line {line}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Shipped emoticon inventory, matched case-sensitively against whole
/// whitespace-delimited chunks (or a chunk suffix).
pub const EMOTICONS: &[(&str, Polarity)] = &[
    (":)", Polarity::Positive),
    (":-)", Polarity::Positive),
    (":))", Polarity::Positive),
    (":D", Polarity::Positive),
    (":-D", Polarity::Positive),
    ("=)", Polarity::Positive),
    ("=D", Polarity::Positive),
    (";)", Polarity::Positive),
    (";-)", Polarity::Positive),
    (";D", Polarity::Positive),
    (":p", Polarity::Positive),
    (":P", Polarity::Positive),
    (":-p", Polarity::Positive),
    (":-P", Polarity::Positive),
    ("xD", Polarity::Positive),
    ("XD", Polarity::Positive),
    ("<3", Polarity::Positive),
    (":]", Polarity::Positive),
    ("=]", Polarity::Positive),
    ("(:", Polarity::Positive),
    ("^^", Polarity::Positive),
    ("^_^", Polarity::Positive),
    (":*", Polarity::Positive),
    (":-*", Polarity::Positive),
    (":')", Polarity::Positive),
    (":(", Polarity::Negative),
    (":-(", Polarity::Negative),
    (":((", Polarity::Negative),
    (":'(", Polarity::Negative),
    (":/", Polarity::Negative),
    (":-/", Polarity::Negative),
    (":[", Polarity::Negative),
    ("=(", Polarity::Negative),
    (":|", Polarity::Negative),
    ("D:", Polarity::Negative),
    (">:(", Polarity::Negative),
    (":S", Polarity::Negative),
    (":s", Polarity::Negative),
    ("</3", Polarity::Negative),
    ("):", Polarity::Negative),
    ("-_-", Polarity::Negative),
    (":@", Polarity::Negative),
];

fn emoticon(s: &str) -> Option<Polarity> {
    EMOTICONS.iter().find(|(e, _)| *e == s).map(|(_, p)| *p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    Negative,
    Neutral,
    Positive,
}

impl Label {
    /// Fixed class order; also the tie-breaking order in prediction.
    pub const ALL: [Label; 3] = [Label::Negative, Label::Neutral, Label::Positive];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Negative => "negative",
            Label::Neutral => "neutral",
            Label::Positive => "positive",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "negative" => Ok(Label::Negative),
            "neutral" => Ok(Label::Neutral),
            "positive" => Ok(Label::Positive),
            _ => Err(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tweet {
    pub id: String,
    pub text: String,
    pub label: Option<Label>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Word,
    Hashtag,
    Usertag,
    EmoticonPos,
    EmoticonNeg,
    PunctRun,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub surface: String,
    pub kind: TokenKind,
}

impl Token {
    fn new(surface: &str, kind: TokenKind) -> Self {
        Token {
            surface: surface.to_string(),
            kind,
        }
    }
}

fn emoticon_token(surface: &str, polarity: Polarity) -> Token {
    let kind = match polarity {
        Polarity::Positive => TokenKind::EmoticonPos,
        Polarity::Negative => TokenKind::EmoticonNeg,
    };
    Token::new(surface, kind)
}

pub fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    for chunk in text.split_whitespace() {
        tokenize_chunk(chunk, &mut tokens);
    }
    tokens
}

fn tokenize_chunk(chunk: &str, out: &mut Vec<Token>) {
    if let Some(p) = emoticon(chunk) {
        out.push(emoticon_token(chunk, p));
        return;
    }
    if chunk.starts_with("http://") || chunk.starts_with("https://") || chunk.starts_with("www.") {
        out.push(Token::new(chunk, TokenKind::Other));
        return;
    }
    // trailing emoticon glued to a word, e.g. "great:)"
    for (e, p) in EMOTICONS.iter().filter(|(e, _)| !e.starts_with(char::is_alphanumeric)) {
        if let Some(prefix) = chunk.strip_suffix(e) {
            if prefix.chars().last().is_some_and(char::is_alphanumeric) {
                tokenize_chunk(prefix, out);
                out.push(emoticon_token(e, *p));
                return;
            }
        }
    }
    for (marker, generic, kind) in [
        ('#', "<hashtag>", TokenKind::Hashtag),
        ('@', "<user>", TokenKind::Usertag),
    ] {
        if let Some(rest) = chunk.strip_prefix(marker) {
            let name_len = rest.find(|c: char| !is_word_char(c)).unwrap_or(rest.len());
            if name_len > 0 {
                out.push(Token::new(generic, kind));
                split_runs(&rest[name_len..], out);
                return;
            }
        }
    }
    split_runs(chunk, out);
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '\'' || c == '-'
}

#[derive(PartialEq, Clone, Copy)]
enum RunClass {
    Word,
    Punct,
    Other,
}

fn run_class(c: char) -> RunClass {
    if c == '!' || c == '?' {
        RunClass::Punct
    } else if is_word_char(c) {
        RunClass::Word
    } else {
        RunClass::Other
    }
}

/// Splits into maximal runs of word characters, `!`/`?`, and anything else.
fn split_runs(s: &str, out: &mut Vec<Token>) {
    let mut start = 0;
    let mut current: Option<RunClass> = None;
    let flush = |from: usize, to: usize, class: RunClass, out: &mut Vec<Token>| {
        let kind = match class {
            RunClass::Word => TokenKind::Word,
            RunClass::Punct => TokenKind::PunctRun,
            RunClass::Other => TokenKind::Other,
        };
        out.push(Token::new(&s[from..to], kind));
    };
    for (i, c) in s.char_indices() {
        let class = run_class(c);
        match current {
            Some(cur) if cur == class => {}
            Some(cur) => {
                flush(start, i, cur, out);
                start = i;
                current = Some(class);
            }
            None => {
                start = i;
                current = Some(class);
            }
        }
    }
    if let Some(cur) = current {
        flush(start, s.len(), cur, out);
    }
}

fn is_all_caps(word: &str) -> bool {
    word.chars().count() >= 2 && word.chars().all(|c| c.is_alphabetic() && c.is_uppercase())
}

fn is_elongated(word: &str) -> bool {
    let mut prev = None;
    let mut run = 0;
    for c in word.chars() {
        if Some(c) == prev {
            run += 1;
        } else {
            prev = Some(c);
            run = 1;
        }
        if run >= 4 {
            return true;
        }
    }
    false
}

/// Shared name ↔ id map. Grows while training; once frozen, unseen names
/// are dropped.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FeatureIndex {
    names: Vec<String>,
    ids: HashMap<String, u32>,
    frozen: bool,
}

impl FeatureIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn get(&self, name: &str) -> Option<u32> {
        self.ids.get(name).copied()
    }

    pub fn name(&self, id: u32) -> Option<&str> {
        self.names.get(id as usize).map(String::as_str)
    }

    /// Returns the id for `name`, allocating one unless frozen.
    pub fn intern(&mut self, name: &str) -> Option<u32> {
        if let Some(id) = self.get(name) {
            return Some(id);
        }
        if self.frozen {
            return None;
        }
        let id = self.names.len() as u32;
        self.names.push(name.to_string());
        self.ids.insert(name.to_string(), id);
        Some(id)
    }

    /// One `id<TAB>name` line per feature.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (id, name) in self.names.iter().enumerate() {
            writeln!(out, "{}\t{}", id, name)?;
        }
        Ok(())
    }

    /// Reads a mapping written by [`FeatureIndex::write_tsv`]; the result
    /// is frozen.
    pub fn parse_tsv<R: BufRead>(reader: R) -> Result<Self, FeatureError> {
        let mut index = FeatureIndex::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let (id, name) = line.split_once('\t').ok_or_else(|| FeatureError::Parse {
                line: i + 1,
                message: "expected \"id<TAB>name\"".to_string(),
            })?;
            if id.parse::<usize>().ok() != Some(index.len()) {
                return Err(FeatureError::Parse {
                    line: i + 1,
                    message: format!("non-contiguous feature id {:?}", id),
                });
            }
            index.intern(name);
        }
        index.freeze();
        Ok(index)
    }
}

/// Sparse vector sorted by feature id, zeros omitted.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureVector {
    entries: Vec<(u32, f64)>,
}

impl FeatureVector {
    pub fn from_entries(mut entries: Vec<(u32, f64)>) -> Self {
        entries.sort_by_key(|e| e.0);
        entries.dedup_by_key(|e| e.0);
        entries.retain(|e| e.1 != 0.0);
        FeatureVector { entries }
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn get(&self, id: u32) -> f64 {
        self.entries
            .binary_search_by_key(&id, |e| e.0)
            .map(|i| self.entries[i].1)
            .unwrap_or(0.0)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dot(&self, dense: &[f64]) -> f64 {
        self.entries
            .iter()
            .filter_map(|&(id, v)| dense.get(id as usize).map(|w| w * v))
            .sum()
    }
}

/// Named feature values before they are mapped to ids.
fn named_features(tokens: &[Token], lexicons: &[PolarityLexicon], ngram_max: usize) -> BTreeMap<String, f64> {
    let mut f = BTreeMap::new();
    let mut bump = |name: String, by: f64| *f.entry(name).or_insert(0.0) += by;

    let words: Vec<&Token> = tokens.iter().filter(|t| t.kind == TokenKind::Word).collect();
    let lowered: Vec<String> = words.iter().map(|t| t.surface.to_lowercase()).collect();
    for n in 1..=ngram_max {
        for gram in lowered.windows(n) {
            let name = format!("ng:{}", gram.join(" "));
            bump(name, 0.0);
        }
    }
    bump(
        "allcaps".into(),
        words.iter().filter(|t| is_all_caps(&t.surface)).count() as f64,
    );
    bump(
        "elongated".into(),
        words.iter().filter(|t| is_elongated(&t.surface)).count() as f64,
    );
    bump(
        "hashtags".into(),
        tokens.iter().filter(|t| t.kind == TokenKind::Hashtag).count() as f64,
    );
    bump(
        "punct_runs".into(),
        tokens.iter().filter(|t| t.kind == TokenKind::PunctRun).count() as f64,
    );
    let has = |kind| tokens.iter().any(|t| t.kind == kind) as u8 as f64;
    bump("emo_pos".into(), has(TokenKind::EmoticonPos));
    bump("emo_neg".into(), has(TokenKind::EmoticonNeg));
    let last = tokens.last();
    bump(
        "last_punct".into(),
        last.is_some_and(|t| t.surface.contains(['!', '?'])) as u8 as f64,
    );
    bump(
        "last_emo_pos".into(),
        last.is_some_and(|t| t.kind == TokenKind::EmoticonPos) as u8 as f64,
    );
    bump(
        "last_emo_neg".into(),
        last.is_some_and(|t| t.kind == TokenKind::EmoticonNeg) as u8 as f64,
    );

    for lex in lexicons {
        let mut counts = [0usize; 2];
        for w in &lowered {
            if let Some(p) = lex.polarity(w) {
                counts[p as usize] += 1;
            }
        }
        for p in [Polarity::Negative, Polarity::Positive] {
            bump(format!("lex:{}:{}", lex.name(), p), counts[p as usize] as f64);
        }
    }
    // n-gram indicators are binary
    for (name, v) in f.iter_mut() {
        if name.starts_with("ng:") {
            *v = 1.0;
        }
    }
    f
}

fn check_tweet(tweet: &Tweet, ngram_max: usize) -> Result<(), FeatureError> {
    if ngram_max == 0 {
        return Err(FeatureError::NgramOrder(ngram_max));
    }
    if tweet.text.trim().is_empty() {
        return Err(FeatureError::EmptyText(tweet.id.clone()));
    }
    Ok(())
}

/// Features of one tweet. With an unfrozen index every feature name is
/// registered (including zero-valued ones, so the layout does not depend
/// on which tweet came first); with a frozen index unknown names are
/// dropped.
pub fn extract_features(
    tweet: &Tweet,
    lexicons: &[PolarityLexicon],
    index: &mut FeatureIndex,
    ngram_max: usize,
) -> Result<FeatureVector, FeatureError> {
    check_tweet(tweet, ngram_max)?;
    let named = named_features(&tokenize(&tweet.text), lexicons, ngram_max);
    let entries = named
        .into_iter()
        .filter_map(|(name, v)| index.intern(&name).map(|id| (id, v)))
        .collect();
    Ok(FeatureVector::from_entries(entries))
}

/// Read-only variant for a frozen (or any fixed) index.
pub fn extract_features_frozen(
    tweet: &Tweet,
    lexicons: &[PolarityLexicon],
    index: &FeatureIndex,
    ngram_max: usize,
) -> Result<FeatureVector, FeatureError> {
    check_tweet(tweet, ngram_max)?;
    let named = named_features(&tokenize(&tweet.text), lexicons, ngram_max);
    let entries = named
        .into_iter()
        .filter_map(|(name, v)| index.get(&name).map(|id| (id, v)))
        .collect();
    Ok(FeatureVector::from_entries(entries))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Inference,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabeledDataset {
    pub ids: Vec<String>,
    pub vectors: Vec<FeatureVector>,
    pub labels: Vec<Option<Label>>,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn subset(&self, rows: &[usize]) -> LabeledDataset {
        LabeledDataset {
            ids: rows.iter().map(|&i| self.ids[i].clone()).collect(),
            vectors: rows.iter().map(|&i| self.vectors[i].clone()).collect(),
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Sparse export: `label id:value ...` per row, `?` for unlabeled rows.
    pub fn write_sparse<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (v, label) in self.vectors.iter().zip(&self.labels) {
            write!(out, "{}", label.map_or("?", Label::as_str))?;
            for (id, value) in v.entries() {
                write!(out, " {}:{}", id, numfmt::exact(*value))?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

pub fn featurize_dataset(
    tweets: &[Tweet],
    lexicons: &[PolarityLexicon],
    index: &mut FeatureIndex,
    ngram_max: usize,
    mode: Mode,
) -> Result<LabeledDataset, FeatureError> {
    featurize_dataset_with(tweets, lexicons, index, ngram_max, mode, Exec::default())
}

/// Training mode runs sequentially (single index writer) and leaves the
/// index unfrozen; inference mode is read-only and may run in parallel.
pub fn featurize_dataset_with(
    tweets: &[Tweet],
    lexicons: &[PolarityLexicon],
    index: &mut FeatureIndex,
    ngram_max: usize,
    mode: Mode,
    exec: Exec,
) -> Result<LabeledDataset, FeatureError> {
    if ngram_max == 0 {
        return Err(FeatureError::NgramOrder(ngram_max));
    }
    let vectors = match mode {
        Mode::Train => tweets
            .iter()
            .map(|t| extract_features(t, lexicons, index, ngram_max))
            .collect::<Result<Vec<_>, _>>()?,
        Mode::Inference => {
            if index.is_empty() {
                return Err(FeatureError::EmptyIndex);
            }
            let frozen: &FeatureIndex = index;
            exec.map(tweets, |t| extract_features_frozen(t, lexicons, frozen, ngram_max))
                .into_iter()
                .collect::<Result<Vec<_>, _>>()?
        }
    };
    Ok(LabeledDataset {
        ids: tweets.iter().map(|t| t.id.clone()).collect(),
        vectors,
        labels: tweets.iter().map(|t| t.label).collect(),
    })
}

/// Reads `id<TAB>label<TAB>text` rows; `id<TAB>text` rows (or an empty
/// label column) are unlabeled.
pub fn parse_dataset<R: BufRead>(reader: R) -> Result<Vec<Tweet>, FeatureError> {
    let mut tweets = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.splitn(3, '\t').collect();
        let (id, label, text) = match cols.as_slice() {
            [id, text] => (*id, None, *text),
            [id, "", text] => (*id, None, *text),
            [id, label, text] => {
                let l = label.parse().map_err(|_| FeatureError::UnknownLabel {
                    line: i + 1,
                    token: label.to_string(),
                })?;
                (*id, Some(l), *text)
            }
            _ => {
                return Err(FeatureError::Parse {
                    line: i + 1,
                    message: "expected \"id<TAB>label<TAB>text\"".to_string(),
                })
            }
        };
        tweets.push(Tweet {
            id: id.to_string(),
            text: text.to_string(),
            label,
        });
    }
    Ok(tweets)
}

pub fn write_dataset<W: Write>(tweets: &[Tweet], mut out: W) -> std::io::Result<()> {
    for t in tweets {
        writeln!(out, "{}\t{}\t{}", t.id, t.label.map_or("", Label::as_str), t.text)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(text: &str) -> Vec<(String, TokenKind)> {
        tokenize(text).into_iter().map(|t| (t.surface, t.kind)).collect()
    }

    fn tweet(text: &str) -> Tweet {
        Tweet {
            id: "t".into(),
            text: text.into(),
            label: None,
        }
    }

    fn value(v: &FeatureVector, index: &FeatureIndex, name: &str) -> f64 {
        index.get(name).map_or(0.0, |id| v.get(id))
    }

    #[test]
    fn markup_tokens() {
        assert_eq!(
            kinds("#happy @bob :)"),
            vec![
                ("<hashtag>".into(), TokenKind::Hashtag),
                ("<user>".into(), TokenKind::Usertag),
                (":)".into(), TokenKind::EmoticonPos)
            ]
        );
        assert_eq!(
            kinds("good!!"),
            vec![("good".into(), TokenKind::Word), ("!!".into(), TokenKind::PunctRun)]
        );
        assert_eq!(kinds("loooool"), vec![("loooool".into(), TokenKind::Word)]);
    }

    #[test]
    fn refinement_rules() {
        assert_eq!(
            kinds("great:( #win!? wait... http://t.co/x"),
            vec![
                ("great".into(), TokenKind::Word),
                (":(".into(), TokenKind::EmoticonNeg),
                ("<hashtag>".into(), TokenKind::Hashtag),
                ("!?".into(), TokenKind::PunctRun),
                ("wait".into(), TokenKind::Word),
                ("...".into(), TokenKind::Other),
                ("http://t.co/x".into(), TokenKind::Other),
            ]
        );
        assert_eq!(kinds("#"), vec![("#".into(), TokenKind::Other)]);
        assert!(tokenize("   ").is_empty());
        assert!(EMOTICONS.len() >= 40);
    }

    #[test]
    fn surface_features() {
        let mut index = FeatureIndex::new();
        let v = extract_features(&tweet("loooool"), &[], &mut index, 2).unwrap();
        assert_eq!(value(&v, &index, "elongated"), 1.0);
        let v = extract_features(&tweet("looool lool"), &[], &mut index, 2).unwrap();
        assert_eq!(value(&v, &index, "elongated"), 1.0);

        let v = extract_features(&tweet("GREAT DAY ok I"), &[], &mut index, 2).unwrap();
        assert_eq!(value(&v, &index, "allcaps"), 2.0);

        let v = extract_features(&tweet("what?! no!!! #a #b :) ok :("), &[], &mut index, 1).unwrap();
        assert_eq!(value(&v, &index, "punct_runs"), 2.0);
        assert_eq!(value(&v, &index, "hashtags"), 2.0);
        assert_eq!(value(&v, &index, "emo_pos"), 1.0);
        assert_eq!(value(&v, &index, "emo_neg"), 1.0);
        assert_eq!(value(&v, &index, "last_emo_neg"), 1.0);
        assert_eq!(value(&v, &index, "last_emo_pos"), 0.0);
        assert_eq!(value(&v, &index, "last_punct"), 0.0);

        let v = extract_features(&tweet("really?"), &[], &mut index, 1).unwrap();
        assert_eq!(value(&v, &index, "last_punct"), 1.0);
    }

    #[test]
    fn lexicon_counts() {
        let lex =
            PolarityLexicon::from_words("L", [("good", Polarity::Positive), ("bad", Polarity::Negative)]).unwrap();
        let mut index = FeatureIndex::new();
        let v = extract_features(&tweet("good Good bad #good"), std::slice::from_ref(&lex), &mut index, 1).unwrap();
        assert_eq!(value(&v, &index, "lex:L:positive"), 2.0);
        assert_eq!(value(&v, &index, "lex:L:negative"), 1.0);
    }

    #[test]
    fn ngrams_are_binary() {
        let mut index = FeatureIndex::new();
        let v = extract_features(&tweet("a b a b"), &[], &mut index, 2).unwrap();
        assert_eq!(value(&v, &index, "ng:a"), 1.0);
        assert_eq!(value(&v, &index, "ng:a b"), 1.0);
        assert_eq!(value(&v, &index, "ng:b a"), 1.0);
        assert!(index.get("ng:a b a").is_none());
        assert!(extract_features(&tweet("x"), &[], &mut index, 0).is_err());
        assert!(extract_features(&tweet(" "), &[], &mut index, 1).is_err());
    }

    #[test]
    fn dataset_modes() {
        let mut index = FeatureIndex::new();
        assert!(featurize_dataset(&[], &[], &mut index, 2, Mode::Train)
            .unwrap()
            .is_empty());
        assert!(matches!(
            featurize_dataset(&[tweet("x")], &[], &mut index, 2, Mode::Inference),
            Err(FeatureError::EmptyIndex)
        ));

        let tweets = vec![tweet("so GOOD!!"), tweet("so GOOD!!"), tweet("meh :(")];
        let train = featurize_dataset(&tweets, &[], &mut index, 2, Mode::Train).unwrap();
        assert_eq!(train.vectors[0], train.vectors[1]);
        index.freeze();
        let size = index.len();
        let replay = featurize_dataset(&tweets, &[], &mut index, 2, Mode::Inference).unwrap();
        assert_eq!(replay, train);
        let unseen = featurize_dataset(&[tweet("brand new words")], &[], &mut index, 2, Mode::Inference).unwrap();
        assert_eq!(index.len(), size);
        assert!(unseen.vectors[0]
            .entries()
            .iter()
            .all(|(id, _)| !index.name(*id).unwrap().starts_with("ng:")));
    }

    #[test]
    fn dataset_file() {
        let text = "1\tpositive\tgreat day\n2\tthis has no label\n3\t\tempty label col\n4\tneutral\ttab\tinside\n";
        let tweets = parse_dataset(text.as_bytes()).unwrap();
        assert_eq!(tweets.len(), 4);
        assert_eq!(tweets[0].label, Some(Label::Positive));
        assert_eq!(tweets[1].label, None);
        assert_eq!(tweets[2].text, "empty label col");
        assert_eq!(tweets[3].text, "tab\tinside");
        assert!(matches!(
            parse_dataset("1\tmaybe\ttext\n".as_bytes()),
            Err(FeatureError::UnknownLabel { line: 1, .. })
        ));
        let mut buf = Vec::new();
        write_dataset(&tweets, &mut buf).unwrap();
        assert_eq!(parse_dataset(&buf[..]).unwrap(), tweets);
    }

    #[test]
    fn index_file_round_trip() {
        let mut index = FeatureIndex::new();
        extract_features(&tweet("a b c"), &[], &mut index, 2).unwrap();
        let mut buf = Vec::new();
        index.write_tsv(&mut buf).unwrap();
        let back = FeatureIndex::parse_tsv(&buf[..]).unwrap();
        assert!(back.is_frozen());
        for id in 0..index.len() as u32 {
            assert_eq!(back.name(id), index.name(id));
        }
    }
}
