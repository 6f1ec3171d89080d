//! Independent reference implementations used as test oracles. They share
//! no code with the library beyond its data types.
#![allow(dead_code)]

use std::collections::BTreeMap;

use lexmap::embeddings::EmbeddingTable;
use lexmap::features::Label;
use lexmap::lexicon::{Polarity, PolarityLexicon};
use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// Solves `(XᵀX) B = XᵀY` by Gaussian elimination with partial pivoting and
/// returns `W = Bᵀ`. Requires full column rank.
pub fn normal_equations_fit(x: &DMatrix<f64>, y: &DMatrix<f64>) -> DMatrix<f64> {
    let d = x.ncols();
    let m = y.ncols();
    let mut a = vec![vec![0.0; d + m]; d];
    for i in 0..d {
        for j in 0..d {
            a[i][j] = (0..x.nrows()).map(|r| x[(r, i)] * x[(r, j)]).sum();
        }
        for j in 0..m {
            a[i][d + j] = (0..x.nrows()).map(|r| x[(r, i)] * y[(r, j)]).sum();
        }
    }
    for col in 0..d {
        let pivot = (col..d)
            .max_by(|&p, &q| a[p][col].abs().partial_cmp(&a[q][col].abs()).unwrap())
            .unwrap();
        a.swap(col, pivot);
        let pivot_row = a[col].clone();
        let lead = pivot_row[col];
        assert!(lead.abs() > 1e-300, "singular normal equations");
        for (r, row) in a.iter_mut().enumerate() {
            if r != col {
                let factor = row[col] / lead;
                if factor != 0.0 {
                    for (dst, src) in row[col..].iter_mut().zip(&pivot_row[col..]) {
                        *dst -= factor * src;
                    }
                }
            }
        }
    }
    DMatrix::from_fn(m, d, |t, s| a[s][d + t] / a[s][s])
}

/// Random `n x n` matrix with singular values in `[1, cond)`.
pub fn conditioned(n: usize, cond: f64, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let u = gaussian(n, n, rng).qr().q();
    let v = gaussian(n, n, rng).qr().q();
    let s = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(n, |_, _| rng.random_range(1.0..cond)));
    u * s * v.transpose()
}

fn cos(u: &[f64], v: &[f64]) -> Option<f64> {
    let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return None;
    }
    let d: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    Some(d / (nu * nv))
}

/// Every row with cosine strictly above `lambda`, most similar first, ties
/// by row index.
pub fn brute_neighbors(table: &EmbeddingTable, q: &[f64], lambda: f64) -> Vec<(usize, f64)> {
    let mut hits = Vec::new();
    for i in 0..table.len() {
        if let Some(c) = cos(q, table.vector(i)) {
            if c > lambda {
                hits.push((i, c));
            }
        }
    }
    hits.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    hits
}

/// Target word → (polarity, origin, similarity), built by projecting with
/// `w` directly and scanning every target row.
pub fn brute_transfer(
    lex: &PolarityLexicon,
    w: &DMatrix<f64>,
    src: &EmbeddingTable,
    tgt: &EmbeddingTable,
    lambda: f64,
) -> BTreeMap<String, (Polarity, String, f64)> {
    let mut reached: BTreeMap<String, Vec<(Polarity, String, f64)>> = BTreeMap::new();
    for (word, entry) in lex.iter() {
        let Some(x) = src.lookup(word) else { continue };
        let y: Vec<f64> = (0..w.nrows())
            .map(|r| (0..w.ncols()).map(|c| w[(r, c)] * x[c]).sum())
            .collect();
        for (i, sim) in brute_neighbors(tgt, &y, lambda) {
            reached
                .entry(tgt.word(i).to_string())
                .or_default()
                .push((entry.polarity, word.to_string(), sim));
        }
    }
    let mut out = BTreeMap::new();
    for (target, hits) in reached {
        let first = hits[0].0;
        if hits.iter().any(|h| h.0 != first) {
            continue;
        }
        let best = hits
            .iter()
            .max_by(|a, b| a.2.partial_cmp(&b.2).unwrap().then(b.1.cmp(&a.1)))
            .unwrap();
        out.insert(target, best.clone());
    }
    out
}

/// Per-class F1 (in `Label::ALL` order) and macro-F, counting pair by pair.
pub fn brute_macro_f(gold: &[Label], pred: &[Label]) -> ([f64; 3], f64) {
    let mut f1 = [0.0; 3];
    for (slot, class) in Label::ALL.iter().enumerate() {
        let (mut tp, mut fp, mut fn_) = (0u32, 0u32, 0u32);
        for (g, p) in gold.iter().zip(pred) {
            match (g == class, p == class) {
                (true, true) => tp += 1,
                (false, true) => fp += 1,
                (true, false) => fn_ += 1,
                (false, false) => {}
            }
        }
        let p = if tp + fp == 0 {
            0.0
        } else {
            tp as f64 / (tp + fp) as f64
        };
        let r = if tp + fn_ == 0 {
            0.0
        } else {
            tp as f64 / (tp + fn_) as f64
        };
        f1[slot] = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    }
    (f1, (f1[0] + f1[1] + f1[2]) / 3.0)
}
