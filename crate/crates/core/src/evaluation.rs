//! Linear one-vs-rest SVM and macro-averaged F1 scoring.
//!
//! Each class gets a binary classifier minimizing
//!
//! ```text
//! (lambda / 2) (|w|^2 + b^2) + sum_i max(0, 1 - y_i (w . x_i + b))
//! ```
//!
//! solved by dual coordinate descent with the bias folded in as a constant
//! feature. `lambda = 1` is the usual `C = 1` linear SVM.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::exec::Exec;
use crate::features::{FeatureVector, Label, LabeledDataset};
use crate::numfmt;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("training data is empty")]
    EmptyData,
    #[error("training data has a single class ({0})")]
    SingleClass(Label),
    #[error("row {0} has no label")]
    Unlabeled(usize),
    #[error("row {0} has a non-finite feature value")]
    NonFinite(usize),
    #[error("gold and predicted label lists differ in length ({gold} vs {pred})")]
    LengthMismatch { gold: usize, pred: usize },
    #[error("unknown label {0:?}")]
    UnknownLabel(String),
    #[error("cannot split {rows} rows into {folds} folds")]
    Folds { rows: usize, folds: usize },
    #[error("{message} at line {line}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyper {
    pub regularization: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for Hyper {
    fn default() -> Self {
        Hyper {
            regularization: 1.0,
            epochs: 50,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    dim: usize,
    weights: [Vec<f64>; 3],
    bias: [f64; 3],
    hyper: Hyper,
}

// dual coordinate descent stops once the projected-gradient spread is this small
const DCD_TOLERANCE: f64 = 1e-12;

impl LinearModel {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn hyper(&self) -> Hyper {
        self.hyper
    }

    pub fn bias(&self, label: Label) -> f64 {
        self.bias[label.index()]
    }

    pub fn weights(&self, label: Label) -> &[f64] {
        &self.weights[label.index()]
    }

    pub fn scores(&self, v: &FeatureVector) -> [f64; 3] {
        let mut s = [0.0; 3];
        for c in Label::ALL {
            s[c.index()] = v.dot(&self.weights[c.index()]) + self.bias[c.index()];
        }
        s
    }

    /// Highest-scoring class; ties go to the earliest class in
    /// negative, neutral, positive order.
    pub fn predict(&self, v: &FeatureVector) -> Label {
        let s = self.scores(v);
        let mut best = Label::Negative;
        for c in Label::ALL {
            if s[c.index()] > s[best.index()] {
                best = c;
            }
        }
        best
    }

    pub fn predict_all(&self, vectors: &[FeatureVector], exec: Exec) -> Vec<Label> {
        exec.map(vectors, |v| self.predict(v))
    }

    pub fn write_text<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "lexmap-model v1")?;
        writeln!(out, "classes negative neutral positive")?;
        writeln!(out, "dim {}", self.dim)?;
        writeln!(
            out,
            "hyper {} {} {}",
            numfmt::exact(self.hyper.regularization),
            self.hyper.epochs,
            self.hyper.seed
        )?;
        writeln!(
            out,
            "bias {} {} {}",
            numfmt::exact(self.bias[0]),
            numfmt::exact(self.bias[1]),
            numfmt::exact(self.bias[2])
        )?;
        for c in Label::ALL {
            for (id, w) in self.weights[c.index()].iter().enumerate() {
                if *w != 0.0 {
                    writeln!(out, "w {} {} {}", c, id, numfmt::exact(*w))?;
                }
            }
        }
        Ok(())
    }

    pub fn parse_text<R: BufRead>(reader: R) -> Result<Self, EvalError> {
        let bad = |line: usize, message: &str| EvalError::Parse {
            line,
            message: message.to_string(),
        };
        let lines: Vec<String> = reader.lines().collect::<Result<_, _>>()?;
        if lines.first().map(String::as_str) != Some("lexmap-model v1") {
            return Err(bad(1, "not a lexmap-model v1 file"));
        }
        if lines.get(1).map(String::as_str) != Some("classes negative neutral positive") {
            return Err(bad(2, "unexpected class order"));
        }
        let field = |line: usize, key: &str| -> Result<Vec<&str>, EvalError> {
            let l = lines.get(line - 1).ok_or_else(|| bad(line, "truncated header"))?;
            let mut parts = l.split_ascii_whitespace();
            if parts.next() != Some(key) {
                return Err(bad(line, &format!("expected {:?}", key)));
            }
            Ok(parts.collect())
        };
        let num = |line: usize, s: &str| s.parse::<f64>().map_err(|_| bad(line, "invalid number"));
        let dim: usize = field(3, "dim")?
            .first()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad(3, "invalid dim"))?;
        let h = field(4, "hyper")?;
        if h.len() != 3 {
            return Err(bad(4, "expected 3 hyperparameters"));
        }
        let hyper = Hyper {
            regularization: num(4, h[0])?,
            epochs: h[1].parse().map_err(|_| bad(4, "invalid epochs"))?,
            seed: h[2].parse().map_err(|_| bad(4, "invalid seed"))?,
        };
        let b = field(5, "bias")?;
        if b.len() != 3 {
            return Err(bad(5, "expected 3 biases"));
        }
        let bias = [num(5, b[0])?, num(5, b[1])?, num(5, b[2])?];
        let mut weights = [vec![0.0; dim], vec![0.0; dim], vec![0.0; dim]];
        for (i, l) in lines.iter().enumerate().skip(5) {
            let line = i + 1;
            if l.is_empty() {
                continue;
            }
            let p: Vec<&str> = l.split_ascii_whitespace().collect();
            if p.len() != 4 || p[0] != "w" {
                return Err(bad(line, "expected \"w class id value\""));
            }
            let class: Label = p[1].parse().map_err(|_| bad(line, "unknown class"))?;
            let id: usize = p[2].parse().map_err(|_| bad(line, "invalid feature id"))?;
            if id >= dim {
                return Err(bad(line, "feature id out of range"));
            }
            weights[class.index()][id] = num(line, p[3])?;
        }
        Ok(LinearModel {
            dim,
            weights,
            bias,
            hyper,
        })
    }
}

fn validate(data: &LabeledDataset) -> Result<Vec<Label>, EvalError> {
    if data.is_empty() {
        return Err(EvalError::EmptyData);
    }
    let labels = data
        .labels
        .iter()
        .enumerate()
        .map(|(i, l)| l.ok_or(EvalError::Unlabeled(i)))
        .collect::<Result<Vec<_>, _>>()?;
    for (i, v) in data.vectors.iter().enumerate() {
        if v.entries().iter().any(|(_, x)| !x.is_finite()) {
            return Err(EvalError::NonFinite(i));
        }
    }
    if labels.iter().all(|l| *l == labels[0]) {
        return Err(EvalError::SingleClass(labels[0]));
    }
    Ok(labels)
}

pub fn train(data: &LabeledDataset, hyper: &Hyper) -> Result<LinearModel, EvalError> {
    train_with(data, hyper, Exec::default())
}

/// One-vs-rest training; the three binary problems are independent and
/// may run concurrently.
pub fn train_with(data: &LabeledDataset, hyper: &Hyper, exec: Exec) -> Result<LinearModel, EvalError> {
    let labels = validate(data)?;
    let dim = data
        .vectors
        .iter()
        .filter_map(|v| v.entries().last().map(|e| e.0 as usize + 1))
        .max()
        .unwrap_or(0);
    let fitted = exec.map_range(3, |c| {
        let targets: Vec<f64> = labels.iter().map(|l| if l.index() == c { 1.0 } else { -1.0 }).collect();
        binary_dcd(&data.vectors, &targets, dim, hyper)
    });
    let mut weights: [Vec<f64>; 3] = Default::default();
    let mut bias = [0.0; 3];
    for (c, (w, b)) in fitted.into_iter().enumerate() {
        weights[c] = w;
        bias[c] = b;
    }
    Ok(LinearModel {
        dim,
        weights,
        bias,
        hyper: *hyper,
    })
}

/// Dual coordinate descent for `(λ/2)(|w|² + b²) + Σ hinge`, the bias
/// being an extra constant-1 feature. `λ = 1` is the usual `C = 1` SVM.
fn binary_dcd(xs: &[FeatureVector], ys: &[f64], dim: usize, hyper: &Hyper) -> (Vec<f64>, f64) {
    let n = xs.len();
    let upper = 1.0 / hyper.regularization;
    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let mut alpha = vec![0.0; n];
    let qii: Vec<f64> = xs
        .iter()
        .map(|x| x.entries().iter().map(|(_, v)| v * v).sum::<f64>() + 1.0)
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);

    for _ in 0..hyper.epochs {
        order.shuffle(&mut rng);
        let mut pg_max = f64::NEG_INFINITY;
        let mut pg_min = f64::INFINITY;
        for &i in &order {
            let g = ys[i] * (xs[i].dot(&w) + b) - 1.0;
            let pg = if alpha[i] == 0.0 {
                g.min(0.0)
            } else if alpha[i] == upper {
                g.max(0.0)
            } else {
                g
            };
            pg_max = pg_max.max(pg);
            pg_min = pg_min.min(pg);
            if pg != 0.0 {
                let old = alpha[i];
                alpha[i] = (old - g / qii[i]).clamp(0.0, upper);
                let step = (alpha[i] - old) * ys[i];
                for &(id, v) in xs[i].entries() {
                    w[id as usize] += step * v;
                }
                b += step;
            }
        }
        if pg_max - pg_min <= DCD_TOLERANCE {
            break;
        }
    }
    (w, b)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    /// Indexed by [`Label::index`].
    pub precision: [f64; 3],
    pub recall: [f64; 3],
    pub f1: [f64; 3],
    pub macro_f: f64,
    /// `confusion[gold][pred]`.
    pub confusion: [[usize; 3]; 3],
}

impl EvaluationReport {
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<10} {:>9} {:>9} {:>9} {:>7}",
            "class", "precision", "recall", "f1", "gold"
        );
        for c in Label::ALL {
            let i = c.index();
            let _ = writeln!(
                s,
                "{:<10} {:>9.4} {:>9.4} {:>9.4} {:>7}",
                c.as_str(),
                self.precision[i],
                self.recall[i],
                self.f1[i],
                self.confusion[i].iter().sum::<usize>()
            );
        }
        let _ = writeln!(s, "{:<10} {:>29.4}", "macro-F", self.macro_f);
        s
    }

    pub fn to_key_values(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "macro_f={}", numfmt::exact(self.macro_f));
        for c in Label::ALL {
            let i = c.index();
            let _ = writeln!(s, "precision.{}={}", c, numfmt::exact(self.precision[i]));
            let _ = writeln!(s, "recall.{}={}", c, numfmt::exact(self.recall[i]));
            let _ = writeln!(s, "f1.{}={}", c, numfmt::exact(self.f1[i]));
        }
        for g in Label::ALL {
            for p in Label::ALL {
                let _ = writeln!(s, "confusion.{}.{}={}", g, p, self.confusion[g.index()][p.index()]);
            }
        }
        s
    }
}

/// Per-class precision, recall and F1 plus their unweighted mean over all
/// three classes. Zero denominators yield zero.
pub fn macro_f(gold: &[Label], pred: &[Label]) -> Result<EvaluationReport, EvalError> {
    if gold.len() != pred.len() {
        return Err(EvalError::LengthMismatch {
            gold: gold.len(),
            pred: pred.len(),
        });
    }
    if gold.is_empty() {
        return Err(EvalError::EmptyData);
    }
    let mut confusion = [[0usize; 3]; 3];
    for (g, p) in gold.iter().zip(pred) {
        confusion[g.index()][p.index()] += 1;
    }
    Ok(report_from_confusion(confusion))
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn report_from_confusion(confusion: [[usize; 3]; 3]) -> EvaluationReport {
    let mut precision = [0.0; 3];
    let mut recall = [0.0; 3];
    let mut f1 = [0.0; 3];
    for c in 0..3 {
        let tp = confusion[c][c];
        let predicted: usize = (0..3).map(|g| confusion[g][c]).sum();
        let actual: usize = confusion[c].iter().sum();
        precision[c] = ratio(tp, predicted);
        recall[c] = ratio(tp, actual);
        let (p, r) = (precision[c], recall[c]);
        f1[c] = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    }
    EvaluationReport {
        precision,
        recall,
        f1,
        macro_f: (f1[0] + f1[1] + f1[2]) / 3.0,
        confusion,
    }
}

/// [`macro_f`] over label tokens.
pub fn macro_f_tokens(gold: &[&str], pred: &[&str]) -> Result<EvaluationReport, EvalError> {
    let parse = |xs: &[&str]| -> Result<Vec<Label>, EvalError> {
        xs.iter()
            .map(|s| s.parse().map_err(|_| EvalError::UnknownLabel(s.to_string())))
            .collect()
    };
    macro_f(&parse(gold)?, &parse(pred)?)
}

/// Trains on `train` and scores on `test`.
pub fn train_and_score(
    train: &LabeledDataset,
    test: &LabeledDataset,
    hyper: &Hyper,
    exec: Exec,
) -> Result<(LinearModel, EvaluationReport), EvalError> {
    let model = train_with(train, hyper, exec)?;
    let gold = test
        .labels
        .iter()
        .enumerate()
        .map(|(i, l)| l.ok_or(EvalError::Unlabeled(i)))
        .collect::<Result<Vec<_>, _>>()?;
    let pred = model.predict_all(&test.vectors, exec);
    let report = macro_f(&gold, &pred)?;
    Ok((model, report))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossValidation {
    pub per_fold: Vec<EvaluationReport>,
    /// Per-class scores and macro-F averaged over folds; confusion summed.
    pub mean: EvaluationReport,
}

pub fn cross_validate(data: &LabeledDataset, folds: usize, hyper: &Hyper) -> Result<CrossValidation, EvalError> {
    cross_validate_with(data, folds, hyper, Exec::default())
}

/// Seeded shuffle, then contiguous blocks. Folds run independently.
pub fn cross_validate_with(
    data: &LabeledDataset,
    folds: usize,
    hyper: &Hyper,
    exec: Exec,
) -> Result<CrossValidation, EvalError> {
    let n = data.len();
    if folds < 2 || folds > n {
        return Err(EvalError::Folds { rows: n, folds });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(hyper.seed));
    let bounds: Vec<(usize, usize)> = (0..folds).map(|f| (f * n / folds, (f + 1) * n / folds)).collect();
    let per_fold = exec
        .map(&bounds, |&(lo, hi)| {
            let test_rows = &order[lo..hi];
            let train_rows: Vec<usize> = order[..lo].iter().chain(&order[hi..]).copied().collect();
            let (_, report) = train_and_score(
                &data.subset(&train_rows),
                &data.subset(test_rows),
                hyper,
                Exec::Sequential,
            )?;
            Ok(report)
        })
        .into_iter()
        .collect::<Result<Vec<_>, EvalError>>()?;

    let k = per_fold.len() as f64;
    let mut mean = EvaluationReport {
        precision: [0.0; 3],
        recall: [0.0; 3],
        f1: [0.0; 3],
        macro_f: 0.0,
        confusion: [[0; 3]; 3],
    };
    for r in &per_fold {
        for c in 0..3 {
            mean.precision[c] += r.precision[c] / k;
            mean.recall[c] += r.recall[c] / k;
            mean.f1[c] += r.f1[c] / k;
            for p in 0..3 {
                mean.confusion[c][p] += r.confusion[c][p];
            }
        }
        mean.macro_f += r.macro_f / k;
    }
    Ok(CrossValidation { per_fold, mean })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};
    use Label::*;

    fn vector(values: &[f64]) -> FeatureVector {
        FeatureVector::from_entries(values.iter().enumerate().map(|(i, v)| (i as u32, *v)).collect())
    }

    /// Three well separated blobs in R^3.
    fn blobs(per_class: usize, seed: u64) -> LabeledDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 0.3).unwrap();
        let mut data = LabeledDataset::default();
        for i in 0..per_class * 3 {
            let label = Label::ALL[i % 3];
            let mut v = [0.0; 3];
            v[label.index()] = 4.0;
            for x in v.iter_mut() {
                *x += noise.sample(&mut rng);
            }
            data.ids.push(i.to_string());
            data.vectors.push(vector(&v));
            data.labels.push(Some(label));
        }
        data
    }

    #[test]
    fn separable_data_is_learned() {
        let data = blobs(67, 1);
        let model = train(&data, &Hyper::default()).unwrap();
        let pred = model.predict_all(&data.vectors, Exec::Sequential);
        let gold: Vec<Label> = data.labels.iter().map(|l| l.unwrap()).collect();
        assert_eq!(macro_f(&gold, &pred).unwrap().macro_f, 1.0);
    }

    #[test]
    fn duplicating_separable_data_keeps_decision_function() {
        let data = blobs(10, 2);
        let hyper = Hyper {
            epochs: 2000,
            ..Hyper::default()
        };
        let twice = {
            let rows: Vec<usize> = (0..data.len()).chain(0..data.len()).collect();
            data.subset(&rows)
        };
        let a = train(&data, &hyper).unwrap();
        let b = train(&twice, &hyper).unwrap();
        for v in &data.vectors {
            let (sa, sb) = (a.scores(v), b.scores(v));
            for c in 0..3 {
                assert!((sa[c] - sb[c]).abs() <= 1e-6, "{:?} vs {:?}", sa, sb);
            }
        }
    }

    #[test]
    fn zero_features_collapse_to_bias() {
        let data = LabeledDataset {
            ids: vec!["a".into(), "b".into(), "c".into(), "d".into()],
            vectors: vec![FeatureVector::default(); 4],
            labels: vec![Some(Positive), Some(Positive), Some(Positive), Some(Negative)],
        };
        let model = train(&data, &Hyper::default()).unwrap();
        let preds = model.predict_all(&data.vectors, Exec::Sequential);
        assert!(preds.iter().all(|p| *p == preds[0]));
        let best = Label::ALL
            .into_iter()
            .max_by(|a, b| model.bias(*a).total_cmp(&model.bias(*b)).then(b.cmp(a)))
            .unwrap();
        assert_eq!(model.predict(&FeatureVector::default()), best);
    }

    #[test]
    fn training_errors() {
        assert!(matches!(
            train(&LabeledDataset::default(), &Hyper::default()),
            Err(EvalError::EmptyData)
        ));
        let mut one = blobs(2, 3);
        one.labels = vec![Some(Neutral); one.len()];
        assert!(matches!(
            train(&one, &Hyper::default()),
            Err(EvalError::SingleClass(Neutral))
        ));
        let mut bad = blobs(2, 3);
        bad.vectors[0] = FeatureVector::from_entries(vec![(0, f64::NAN)]);
        assert!(matches!(train(&bad, &Hyper::default()), Err(EvalError::NonFinite(0))));
    }

    #[test]
    fn ties_use_class_order() {
        let model = LinearModel {
            dim: 1,
            weights: [vec![1.0], vec![0.0], vec![1.0]],
            bias: [0.0, 0.5, 0.0],
            hyper: Hyper::default(),
        };
        assert_eq!(model.predict(&vector(&[2.0])), Negative);
        assert_eq!(model.predict(&FeatureVector::default()), Neutral);
        let tie_np = LinearModel {
            bias: [0.0, -1.0, 0.0],
            ..model.clone()
        };
        assert_eq!(tie_np.predict(&vector(&[1.0])), Negative);
        // features beyond the model dimension are ignored
        let extra = FeatureVector::from_entries(vec![(0, 2.0), (7, 3.0)]);
        assert_eq!(model.predict(&extra), model.predict(&vector(&[2.0])));
    }

    #[test]
    fn macro_f_examples() {
        let all = [Positive, Negative, Neutral, Positive];
        assert_eq!(macro_f(&all, &all).unwrap().macro_f, 1.0);

        let r = macro_f(
            &[Positive, Positive, Negative, Neutral],
            &[Positive, Negative, Negative, Neutral],
        )
        .unwrap();
        assert!((r.f1[Positive.index()] - 2.0 / 3.0).abs() < 1e-12);
        assert!((r.f1[Negative.index()] - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(r.f1[Neutral.index()], 1.0);
        assert!((r.macro_f - 0.7778).abs() < 1e-4);

        assert_eq!(
            macro_f(&[Positive, Negative], &[Neutral, Neutral]).unwrap().macro_f,
            0.0
        );
        assert!(macro_f(&[Positive], &[]).is_err());
        assert!(macro_f(&[], &[]).is_err());
        assert!(matches!(
            macro_f_tokens(&["positive"], &["good"]),
            Err(EvalError::UnknownLabel(_))
        ));
        assert_eq!(macro_f_tokens(&["positive"], &["positive"]).unwrap().macro_f, 1.0 / 3.0);
    }

    #[test]
    fn report_rendering() {
        let r = macro_f(&[Positive, Negative, Neutral], &[Positive, Negative, Positive]).unwrap();
        assert!(r.to_table().contains("macro-F"));
        let kv = r.to_key_values();
        assert!(kv.contains("confusion.neutral.positive=1"));
        assert!(kv.starts_with("macro_f="));
    }

    #[test]
    fn cross_validation() {
        let data = blobs(20, 4);
        let a = cross_validate(&data, 3, &Hyper::default()).unwrap();
        let b = cross_validate(&data, 3, &Hyper::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.per_fold.len(), 3);
        assert!(a.mean.macro_f >= 0.95);
        let total: usize = a.mean.confusion.iter().flatten().sum();
        assert_eq!(total, data.len());

        let small = blobs(3, 5);
        let loo = cross_validate(&small, small.len(), &Hyper::default()).unwrap();
        assert_eq!(loo.per_fold.len(), 9);
        assert!(matches!(
            cross_validate(&small, 10, &Hyper::default()),
            Err(EvalError::Folds { .. })
        ));
        assert!(cross_validate(&small, 1, &Hyper::default()).is_err());
    }

    #[test]
    fn model_file_round_trip() {
        let model = train(&blobs(5, 6), &Hyper::default()).unwrap();
        let mut buf = Vec::new();
        model.write_text(&mut buf).unwrap();
        assert_eq!(LinearModel::parse_text(&buf[..]).unwrap(), model);
        assert!(LinearModel::parse_text("junk\n".as_bytes()).is_err());
    }
}
