//! Linear maps between embedding spaces.
//!
//! Given dictionary pairs with source vectors `x_i` and target vectors
//! `y_i`, [`fit_linear_map`] finds the matrix `W` minimizing
//! `sum_i |W x_i - y_i|^2`. With the pairs stacked as rows of `X` and `Y`
//! this is the least-squares problem `X B = Y` with `B = W^T`; it is solved
//! through a Householder QR reduction of `X` followed by an SVD
//! pseudo-inverse of the triangular factor, so rank-deficient systems get
//! the minimum-norm solution.

use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use thiserror::Error;

use crate::embeddings::{fold_word, EmbeddingError, EmbeddingTable};
use crate::exec::Exec;
use crate::numfmt;

pub const SOLVER_TAG: &str = "householder-qr+svd";

#[derive(Debug, Error)]
pub enum AlignError {
    #[error("empty training set: all {skipped} dictionary entries are out of vocabulary")]
    EmptyTrainingSet { skipped: usize },
    #[error("empty held-out set: {oov} entries are out of vocabulary")]
    EmptyHeldOut { oov: usize },
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },
    #[error("{message} at line {line}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DictEntry {
    pub source: String,
    pub target: String,
    pub rank: Option<usize>,
}

/// Ordered translation pairs. A source word may appear with several
/// targets; exact duplicate pairs are dropped.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BilingualDictionary {
    entries: Vec<DictEntry>,
}

impl BilingualDictionary {
    pub fn new(entries: impl IntoIterator<Item = DictEntry>) -> Self {
        let mut seen = HashSet::new();
        let entries = entries
            .into_iter()
            .filter(|e| seen.insert((e.source.clone(), e.target.clone())))
            .collect();
        BilingualDictionary { entries }
    }

    pub fn from_pairs<S: Into<String>>(pairs: impl IntoIterator<Item = (S, S)>) -> Self {
        Self::new(pairs.into_iter().map(|(s, t)| DictEntry {
            source: s.into(),
            target: t.into(),
            rank: None,
        }))
    }

    /// Reads `source<TAB>target[<TAB>rank]` lines; `#` lines are comments.
    pub fn parse<R: BufRead>(reader: R, fold_case: bool) -> Result<Self, AlignError> {
        let mut entries = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim_end_matches(['\r', '\n']);
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            let bad = |message: String| AlignError::Parse { line: i + 1, message };
            if cols.len() < 2 || cols.len() > 3 || cols[0].is_empty() || cols[1].is_empty() {
                return Err(bad("expected \"source<TAB>target[<TAB>rank]\"".to_string()));
            }
            let rank = match cols.get(2) {
                Some(r) => Some(r.trim().parse().map_err(|_| bad(format!("invalid rank {:?}", r)))?),
                None => None,
            };
            entries.push(DictEntry {
                source: fold_word(cols[0], fold_case).into_owned(),
                target: fold_word(cols[1], fold_case).into_owned(),
                rank,
            });
        }
        Ok(Self::new(entries))
    }

    pub fn write_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for e in &self.entries {
            match e.rank {
                Some(r) => writeln!(out, "{}\t{}\t{}", e.source, e.target, r)?,
                None => writeln!(out, "{}\t{}", e.source, e.target)?,
            }
        }
        Ok(())
    }

    pub fn entries(&self) -> &[DictEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// The `n` most frequent entries. Entries without a rank are ordered
    /// by file position after all ranked ones.
    pub fn top_n(&self, n: usize) -> BilingualDictionary {
        let mut order: Vec<usize> = (0..self.entries.len()).collect();
        order.sort_by_key(|&i| (self.entries[i].rank.unwrap_or(usize::MAX), i));
        BilingualDictionary {
            entries: order.into_iter().take(n).map(|i| self.entries[i].clone()).collect(),
        }
    }
}

/// Stacked training vectors: row `i` of `x` and `y` holds the source and
/// target embeddings of `pair_words[i]`.
#[derive(Debug, Clone)]
pub struct PairSet {
    pub x: DMatrix<f64>,
    pub y: DMatrix<f64>,
    pub skipped: usize,
    pub pair_words: Vec<(String, String)>,
}

impl PairSet {
    pub fn from_matrices(x: DMatrix<f64>, y: DMatrix<f64>) -> Result<Self, AlignError> {
        if x.nrows() != y.nrows() {
            return Err(AlignError::Dimension {
                expected: x.nrows(),
                actual: y.nrows(),
            });
        }
        if x.nrows() == 0 {
            return Err(AlignError::EmptyTrainingSet { skipped: 0 });
        }
        let pair_words = (0..x.nrows()).map(|i| (format!("x{}", i), format!("y{}", i))).collect();
        Ok(PairSet {
            x,
            y,
            skipped: 0,
            pair_words,
        })
    }

    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.nrows() == 0
    }
}

/// Resolves every dictionary entry whose source and target words are both
/// in vocabulary, in dictionary order.
pub fn build_pairs(
    dict: &BilingualDictionary,
    src: &EmbeddingTable,
    tgt: &EmbeddingTable,
) -> Result<PairSet, AlignError> {
    let mut rows = Vec::new();
    let mut skipped = 0;
    for e in dict.entries() {
        match (src.index_of(&e.source), tgt.index_of(&e.target)) {
            (Some(si), Some(ti)) => rows.push((si, ti)),
            _ => skipped += 1,
        }
    }
    if rows.is_empty() {
        return Err(AlignError::EmptyTrainingSet { skipped });
    }
    let x = DMatrix::from_fn(rows.len(), src.dim(), |r, c| src.vector(rows[r].0)[c]);
    let y = DMatrix::from_fn(rows.len(), tgt.dim(), |r, c| tgt.vector(rows[r].1)[c]);
    let pair_words = rows
        .iter()
        .map(|&(si, ti)| (src.word(si).to_string(), tgt.word(ti).to_string()))
        .collect();
    Ok(PairSet {
        x,
        y,
        skipped,
        pair_words,
    })
}

/// The fitted `d_tgt x d_src` map with its training diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMap {
    w: DMatrix<f64>,
    train_pair_count: usize,
    mean_squared_residual: f64,
    solver_tag: String,
}

impl LinearMap {
    /// Wraps an explicit matrix; diagnostics are empty.
    pub fn from_matrix(w: DMatrix<f64>) -> Self {
        LinearMap {
            w,
            train_pair_count: 0,
            mean_squared_residual: 0.0,
            solver_tag: "given".to_string(),
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn source_dim(&self) -> usize {
        self.w.ncols()
    }

    pub fn target_dim(&self) -> usize {
        self.w.nrows()
    }

    pub fn train_pair_count(&self) -> usize {
        self.train_pair_count
    }

    pub fn mean_squared_residual(&self) -> f64 {
        self.mean_squared_residual
    }

    pub fn solver_tag(&self) -> &str {
        &self.solver_tag
    }

    /// `W x`.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>, AlignError> {
        if x.len() != self.source_dim() {
            return Err(AlignError::Dimension {
                expected: self.source_dim(),
                actual: x.len(),
            });
        }
        let y: Vec<f64> = (0..self.target_dim())
            .map(|r| self.w.row(r).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect();
        if y.iter().any(|v| !v.is_finite()) {
            return Err(AlignError::Numeric("projection overflowed".to_string()));
        }
        Ok(y)
    }

    fn check_dims(&self, pairs: &PairSet) -> Result<(), AlignError> {
        if pairs.x.ncols() != self.source_dim() {
            return Err(AlignError::Dimension {
                expected: self.source_dim(),
                actual: pairs.x.ncols(),
            });
        }
        if pairs.y.ncols() != self.target_dim() {
            return Err(AlignError::Dimension {
                expected: self.target_dim(),
                actual: pairs.y.ncols(),
            });
        }
        Ok(())
    }

    fn residuals(&self, pairs: &PairSet) -> DMatrix<f64> {
        &pairs.x * self.w.transpose() - &pairs.y
    }

    /// `sum_i |W x_i - y_i|^2`.
    pub fn objective(&self, pairs: &PairSet) -> Result<f64, AlignError> {
        self.check_dims(pairs)?;
        Ok(self.residuals(pairs).norm_squared())
    }

    /// Frobenius norm of the objective's gradient, `2 sum_i (W x_i - y_i) x_i^T`.
    pub fn residual_gradient_norm(&self, pairs: &PairSet) -> Result<f64, AlignError> {
        self.check_dims(pairs)?;
        let grad = self.residuals(pairs).transpose() * &pairs.x * 2.0;
        Ok(grad.norm())
    }

    /// Header `d_tgt d_src solver_tag n residual`, then one row of `W` per
    /// line, all reals with 17 significant digits.
    pub fn write_text<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(
            out,
            "{} {} {} {} {}",
            self.target_dim(),
            self.source_dim(),
            self.solver_tag,
            self.train_pair_count,
            numfmt::exact(self.mean_squared_residual)
        )?;
        for r in 0..self.target_dim() {
            let row: Vec<String> = self.w.row(r).iter().map(|v| numfmt::exact(*v)).collect();
            writeln!(out, "{}", row.join(" "))?;
        }
        Ok(())
    }

    pub fn parse_text<R: BufRead>(reader: R) -> Result<Self, AlignError> {
        let mut lines = reader.lines();
        let bad = |line: usize, message: &str| AlignError::Parse {
            line,
            message: message.to_string(),
        };
        let header = lines.next().ok_or_else(|| bad(1, "missing header"))??;
        let h: Vec<&str> = header.split_ascii_whitespace().collect();
        if h.len() != 5 {
            return Err(bad(1, "expected \"d_tgt d_src solver_tag n residual\""));
        }
        let rows: usize = h[0].parse().map_err(|_| bad(1, "bad d_tgt"))?;
        let cols: usize = h[1].parse().map_err(|_| bad(1, "bad d_src"))?;
        let n: usize = h[3].parse().map_err(|_| bad(1, "bad pair count"))?;
        let residual: f64 = h[4].parse().map_err(|_| bad(1, "bad residual"))?;
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            let line = lines.next().ok_or_else(|| bad(r + 2, "missing matrix row"))??;
            let before = data.len();
            for field in line.split_ascii_whitespace() {
                let v: f64 = field.parse().map_err(|_| bad(r + 2, "invalid number"))?;
                if !v.is_finite() {
                    return Err(bad(r + 2, "non-finite matrix entry"));
                }
                data.push(v);
            }
            if data.len() - before != cols {
                return Err(AlignError::Parse {
                    line: r + 2,
                    message: format!("expected {} values, got {}", cols, data.len() - before),
                });
            }
        }
        Ok(LinearMap {
            w: DMatrix::from_row_slice(rows, cols, &data),
            train_pair_count: n,
            mean_squared_residual: residual,
            solver_tag: h[2].to_string(),
        })
    }
}

/// Minimum-norm least-squares fit of `W` to the pairs.
pub fn fit_linear_map(pairs: &PairSet) -> Result<LinearMap, AlignError> {
    if pairs.is_empty() {
        return Err(AlignError::EmptyTrainingSet { skipped: pairs.skipped });
    }
    if pairs.x.iter().chain(pairs.y.iter()).any(|v| !v.is_finite()) {
        return Err(AlignError::Numeric("non-finite training vector".to_string()));
    }
    let b = min_norm_least_squares(&pairs.x, &pairs.y)?;
    let w = b.transpose();
    if w.iter().any(|v| !v.is_finite()) {
        return Err(AlignError::Numeric("solver produced non-finite entries".to_string()));
    }
    let mut map = LinearMap {
        w,
        train_pair_count: pairs.len(),
        mean_squared_residual: 0.0,
        solver_tag: SOLVER_TAG.to_string(),
    };
    map.mean_squared_residual = map.objective(pairs)? / pairs.len() as f64;
    Ok(map)
}

/// Solves `min |A X - B|_F` with the smallest `|X|_F`.
fn min_norm_least_squares(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>, AlignError> {
    let (n, d) = a.shape();
    let m = b.ncols();
    let steps = n.min(d);
    let mut a = a.clone();
    let mut b = b.clone();
    let mut v = vec![0.0; n];

    for k in 0..steps {
        let len = n - k;
        let col_k = &a.as_slice()[k * n + k..(k + 1) * n];
        let norm = col_k.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = if col_k[0] > 0.0 { -norm } else { norm };
        let v = &mut v[..len];
        v.copy_from_slice(col_k);
        v[0] -= alpha;
        let vv: f64 = v.iter().map(|x| x * x).sum();
        if vv == 0.0 {
            continue;
        }
        {
            let data = a.as_mut_slice();
            data[k * n + k] = alpha;
            data[k * n + k + 1..(k + 1) * n].fill(0.0);
            for j in k + 1..d {
                reflect(&mut data[j * n + k..(j + 1) * n], v, vv);
            }
        }
        let data = b.as_mut_slice();
        for j in 0..m {
            reflect(&mut data[j * n + k..(j + 1) * n], v, vv);
        }
    }

    let r = a.rows(0, steps).into_owned();
    let c = b.rows(0, steps).into_owned();
    let svd = r.svd(true, true);
    let largest = svd.singular_values.max();
    let tol = largest * n.max(d) as f64 * f64::EPSILON;
    svd.solve(&c, tol).map_err(|e| AlignError::Numeric(e.to_string()))
}

/// Applies `I - 2 v v^T / (v^T v)` to `col`.
fn reflect(col: &mut [f64], v: &[f64], vv: f64) {
    let s: f64 = col.iter().zip(v).map(|(a, b)| a * b).sum();
    let f = 2.0 * s / vv;
    for (c, vi) in col.iter_mut().zip(v) {
        *c -= f * vi;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionReport {
    pub precision: f64,
    pub evaluated: usize,
    pub oov: usize,
}

/// Fraction of held-out source words whose gold translation is among the
/// `k` nearest target words of their projection. Source words with several
/// gold targets count once and hit if any target is retrieved.
pub fn precision_at_k(
    map: &LinearMap,
    heldout: &BilingualDictionary,
    src: &EmbeddingTable,
    tgt: &EmbeddingTable,
    k: usize,
) -> Result<PrecisionReport, AlignError> {
    precision_at_k_with(map, heldout, src, tgt, k, Exec::default())
}

pub fn precision_at_k_with(
    map: &LinearMap,
    heldout: &BilingualDictionary,
    src: &EmbeddingTable,
    tgt: &EmbeddingTable,
    k: usize,
    exec: Exec,
) -> Result<PrecisionReport, AlignError> {
    if map.source_dim() != src.dim() {
        return Err(AlignError::Dimension {
            expected: map.source_dim(),
            actual: src.dim(),
        });
    }
    if map.target_dim() != tgt.dim() {
        return Err(AlignError::Dimension {
            expected: map.target_dim(),
            actual: tgt.dim(),
        });
    }
    let mut gold: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let mut sources_seen = HashSet::new();
    for e in heldout.entries() {
        sources_seen.insert(e.source.clone());
        if let (Some(si), Some(ti)) = (src.index_of(&e.source), tgt.index_of(&e.target)) {
            gold.entry(si).or_default().push(ti);
        }
    }
    let oov = sources_seen.len() - gold.len();
    if gold.is_empty() {
        return Err(AlignError::EmptyHeldOut { oov });
    }
    let queries: Vec<(usize, Vec<usize>)> = gold.into_iter().collect();
    let hits = exec.map(&queries, |(si, targets)| -> Result<bool, AlignError> {
        let projected = map.project(src.vector(*si))?;
        let found = match tgt.top_k_with(&projected, k, Exec::Sequential) {
            Ok(top) => top.iter().any(|n| targets.contains(&n.index)),
            Err(EmbeddingError::ZeroNorm) => false,
            Err(e) => return Err(e.into()),
        };
        Ok(found)
    });
    let mut correct = 0;
    for h in hits {
        if h? {
            correct += 1;
        }
    }
    Ok(PrecisionReport {
        precision: correct as f64 / queries.len() as f64,
        evaluated: queries.len(),
        oov,
    })
}
