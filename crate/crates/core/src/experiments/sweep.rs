//! Dictionary-size and seed-lexicon sweeps.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::BufRead;
use std::path::{Path, PathBuf};

use crate::alignment::{build_pairs, fit_linear_map, precision_at_k_with, BilingualDictionary, DictEntry, LinearMap};
use crate::embeddings::{fold_word, EmbeddingTable};
use crate::evaluation::train_and_score;
use crate::features::Tweet;
use crate::lexicon::{transfer_lexicon_with, union_lexicons, Polarity, PolarityLexicon};
use crate::numfmt;
use crate::{Error, Exec, Result};

use super::commands::{featurize_split, load_dictionary, load_embeddings, load_lexicon, load_tweets, write_with};
use super::config::{write_file, RunConfig};
use super::synthetic::{SyntheticConfig, SyntheticData, SyntheticSpaces};

/// Held-out pairs per seed in synthetic dictionary sweeps.
pub const SYNTHETIC_HELDOUT: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    DictionarySize,
    SeedLexicon,
}

impl SweepKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepKind::DictionarySize => "dictionary-size",
            SweepKind::SeedLexicon => "seed-lexicon",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub x: usize,
    /// Mean over runs.
    pub score: f64,
    /// Sample standard deviation over runs; 0 for a single run.
    pub dispersion: f64,
    pub runs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCurve {
    pub kind: SweepKind,
    pub metric: String,
    pub seed: u64,
    pub points: Vec<SweepPoint>,
    /// `(requested, used)` for every clamped setting.
    pub clamped: Vec<(usize, usize)>,
}

impl SweepCurve {
    pub fn is_well_formed(&self) -> bool {
        !self.points.is_empty()
            && self.points.windows(2).all(|w| w[0].x < w[1].x)
            && self
                .points
                .iter()
                .all(|p| p.score.is_finite() && p.dispersion.is_finite() && p.runs > 0)
    }

    pub fn score_at(&self, x: usize) -> Option<f64> {
        self.points.iter().find(|p| p.x == x).map(|p| p.score)
    }

    /// Header block followed by the point table.
    pub fn write_text<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "kind\t{}", self.kind.as_str())?;
        writeln!(out, "metric\t{}", self.metric)?;
        writeln!(out, "seed\t{}", self.seed)?;
        let clamped: Vec<String> = self.clamped.iter().map(|(a, b)| format!("{}->{}", a, b)).collect();
        writeln!(out, "clamped\t{}", clamped.join(","))?;
        writeln!(out)?;
        self.write_tsv(out)
    }

    /// Plot-ready table.
    pub fn write_tsv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "x\tscore\tdispersion\truns")?;
        for p in &self.points {
            writeln!(
                out,
                "{}\t{}\t{}\t{}",
                p.x,
                numfmt::exact(p.score),
                numfmt::exact(p.dispersion),
                p.runs
            )?;
        }
        Ok(())
    }

    pub fn parse_text<R: BufRead>(reader: R) -> Result<Self> {
        let bad = |line: usize, msg: &str| Error::Config(format!("malformed curve file: {} at line {}", msg, line));
        let mut kind = None;
        let mut metric = None;
        let mut seed = None;
        let mut clamped = Vec::new();
        let mut points = Vec::new();
        let mut in_table = false;
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let n = i + 1;
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if in_table {
                if cols.len() != 4 {
                    return Err(bad(n, "expected 4 columns"));
                }
                let x = cols[0].parse().map_err(|_| bad(n, "bad x"))?;
                let score = cols[1].parse().map_err(|_| bad(n, "bad score"))?;
                let dispersion = cols[2].parse().map_err(|_| bad(n, "bad dispersion"))?;
                let runs = cols[3].parse().map_err(|_| bad(n, "bad runs"))?;
                points.push(SweepPoint {
                    x,
                    score,
                    dispersion,
                    runs,
                });
                continue;
            }
            match cols.as_slice() {
                ["kind", k] => {
                    kind = Some(match *k {
                        "dictionary-size" => SweepKind::DictionarySize,
                        "seed-lexicon" => SweepKind::SeedLexicon,
                        _ => return Err(bad(n, "unknown kind")),
                    })
                }
                ["metric", m] => metric = Some(m.to_string()),
                ["seed", s] => seed = Some(s.parse().map_err(|_| bad(n, "bad seed"))?),
                ["clamped", c] => {
                    for pair in c.split(',').filter(|s| !s.is_empty()) {
                        let (a, b) = pair.split_once("->").ok_or_else(|| bad(n, "bad clamp"))?;
                        clamped.push((
                            a.parse().map_err(|_| bad(n, "bad clamp"))?,
                            b.parse().map_err(|_| bad(n, "bad clamp"))?,
                        ));
                    }
                }
                ["x", "score", "dispersion", "runs"] => in_table = true,
                _ => return Err(bad(n, "unexpected line")),
            }
        }
        Ok(SweepCurve {
            kind: kind.ok_or_else(|| bad(0, "missing kind"))?,
            metric: metric.ok_or_else(|| bad(0, "missing metric"))?,
            seed: seed.ok_or_else(|| bad(0, "missing seed"))?,
            points,
            clamped,
        })
    }
}

/// Settings to run, plus `(requested, used)` for each clamped one.
pub type Normalized = (Vec<usize>, Vec<(usize, usize)>);

/// Sorted, deduplicated settings with values above `available` clamped to
/// it. Zero is rejected: no map can be fitted on zero pairs.
pub fn normalize_settings(requested: &[usize], available: usize, what: &str) -> Result<Normalized> {
    if requested.is_empty() {
        return Err(Error::Config(format!("no {} given", what)));
    }
    if requested.contains(&0) {
        return Err(Error::Config(format!(
            "{} must be positive: cannot fit a map on zero pairs",
            what
        )));
    }
    if available == 0 {
        return Err(Error::Config(format!("no pairs available for the {} sweep", what)));
    }
    let mut clamped = Vec::new();
    let mut xs: Vec<usize> = requested
        .iter()
        .map(|&x| {
            if x > available {
                log::warn!("{} {} exceeds the {} available pairs; clamped", what, x, available);
                clamped.push((x, available));
                available
            } else {
                x
            }
        })
        .collect();
    xs.sort_unstable();
    xs.dedup();
    clamped.sort_unstable();
    clamped.dedup();
    Ok((xs, clamped))
}

pub fn mean_and_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

struct Job {
    x: usize,
    run: usize,
}

/// Runs every `(x, run)` job, writes each result into its own point
/// directory, then reduces in `xs` order.
fn run_jobs<F>(run_dir: &Path, xs: &[usize], runs: usize, exec: Exec, f: F) -> Result<Vec<SweepPoint>>
where
    F: Fn(usize, usize) -> Result<f64> + Sync + Send,
{
    let jobs: Vec<Job> = xs
        .iter()
        .flat_map(|&x| (0..runs).map(move |run| Job { x, run }))
        .collect();
    let scores = exec.map(&jobs, |job| -> Result<f64> {
        let score = f(job.x, job.run)?;
        if !score.is_finite() {
            return Err(Error::Config(format!("non-finite score at x={}", job.x)));
        }
        let dir = run_dir.join("points").join(format!("x{}-run{}", job.x, job.run));
        fs::create_dir_all(&dir).map_err(|e| Error::from(e).in_file(&dir))?;
        write_file(
            &dir.join("result.kv"),
            format!("x={}\nrun={}\nscore={}\n", job.x, job.run, numfmt::exact(score)).as_bytes(),
        )?;
        Ok(score)
    });
    let scores = scores.into_iter().collect::<Result<Vec<f64>>>()?;
    Ok(xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let (score, dispersion) = mean_and_std(&scores[i * runs..(i + 1) * runs]);
            SweepPoint {
                x,
                score,
                dispersion,
                runs,
            }
        })
        .collect())
}

fn finish(run_dir: &Path, curve: &SweepCurve) -> Result<()> {
    write_with(&run_dir.join("curve.txt"), |w| curve.write_text(w))?;
    write_with(&run_dir.join("curve.tsv"), |w| curve.write_tsv(w))
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub run_dir: PathBuf,
    pub curve: SweepCurve,
}

/// Downstream data for macro-F sweeps.
struct Downstream {
    lexicons: Vec<PolarityLexicon>,
    train: Vec<Tweet>,
    test: Vec<Tweet>,
}

impl Downstream {
    fn load(cfg: &RunConfig) -> Result<Option<Self>> {
        let (train, test) = match (cfg.optional(&cfg.train)?, cfg.optional(&cfg.test)?) {
            (Some(tr), Some(te)) => (load_tweets(tr)?, load_tweets(te)?),
            (None, None) => return Ok(None),
            _ => return Err(Error::Config("macro-F sweeps need both --train and --test".to_string())),
        };
        let lexicons = cfg
            .require_lexicons(1)?
            .iter()
            .map(|p| load_lexicon(p, cfg.fold_case))
            .collect::<Result<Vec<_>>>()?;
        Ok(Some(Downstream { lexicons, train, test }))
    }

    /// Macro-F of a classifier using `target` as its lexicon feature set.
    fn score(&self, target: &PolarityLexicon, cfg: &RunConfig) -> Result<f64> {
        let lexs = std::slice::from_ref(target);
        let (_, tr, te) = featurize_split(&self.train, &self.test, lexs, cfg.ngram_max, Exec::Sequential)?;
        let (_, report) = train_and_score(&tr, &te, &cfg.hyper, Exec::Sequential)?;
        Ok(report.macro_f)
    }

    /// Transfers every source lexicon and unions the results.
    fn transferred(
        &self,
        map: &LinearMap,
        src: &EmbeddingTable,
        tgt: &EmbeddingTable,
        lambda: f64,
    ) -> Result<PolarityLexicon> {
        let mut acc: Option<PolarityLexicon> = None;
        for lex in &self.lexicons {
            let (t, _) = transfer_lexicon_with(lex, map, src, tgt, lambda, Exec::Sequential)?;
            acc = Some(match acc {
                None => t,
                Some(a) => union_lexicons(&a, &t).lexicon,
            });
        }
        Ok(acc.expect("at least one lexicon"))
    }
}

/// Fits the map on the `n` most frequent dictionary entries for every `n`
/// in `--sizes`.
///
/// Synthetic mode regenerates the shared-latent setup per seed with a
/// vocabulary of the largest size plus [`SYNTHETIC_HELDOUT`] words, the
/// highest ranks being the fixed held-out set; the metric is precision@k.
/// File mode runs once and scores precision@k on `--heldout`, or macro-F
/// when `--train`, `--test` and `--lexicon` are given.
pub fn cmd_sweep_dict(cfg: &RunConfig) -> Result<SweepOutcome> {
    let metric_p = format!("precision@{}", cfg.k);
    if cfg.synthetic {
        let (xs, clamped) = normalize_settings(&cfg.sizes, usize::MAX, "sizes")?;
        let vocab = xs[xs.len() - 1] + SYNTHETIC_HELDOUT;
        let run_dir = cfg.prepare_run_dir("sweep-dict")?;
        let base = SyntheticConfig::retrieval(cfg.seed());
        let spaces = cfg.exec.map_range(cfg.seeds, |r| {
            SyntheticSpaces::generate(vocab, base.dim, base.noise, cfg.seed() + r as u64)
        });
        let heldout: Vec<BilingualDictionary> = spaces
            .iter()
            .map(|s| s.dictionary(vocab - SYNTHETIC_HELDOUT..vocab))
            .collect();
        let points = run_jobs(&run_dir, &xs, cfg.seeds, cfg.exec, |x, run| {
            let s = &spaces[run];
            let pairs = build_pairs(&s.dictionary(0..x), &s.src, &s.tgt)?;
            let map = fit_linear_map(&pairs)?;
            Ok(precision_at_k_with(&map, &heldout[run], &s.src, &s.tgt, cfg.k, Exec::Sequential)?.precision)
        })?;
        let curve = SweepCurve {
            kind: SweepKind::DictionarySize,
            metric: metric_p,
            seed: cfg.seed(),
            points,
            clamped,
        };
        finish(&run_dir, &curve)?;
        return Ok(SweepOutcome { run_dir, curve });
    }

    let src = load_embeddings(cfg.require(&cfg.src_emb, "src-emb")?, "src", cfg.fold_case)?;
    let tgt = load_embeddings(cfg.require(&cfg.tgt_emb, "tgt-emb")?, "tgt", cfg.fold_case)?;
    let dict = load_dictionary(cfg.require(&cfg.dict, "dict")?, cfg.fold_case)?;
    let downstream = Downstream::load(cfg)?;
    let heldout = match downstream {
        Some(_) => None,
        None => Some(load_dictionary(cfg.require(&cfg.heldout, "heldout")?, cfg.fold_case)?),
    };
    let (xs, clamped) = normalize_settings(&cfg.sizes, dict.len(), "sizes")?;
    let run_dir = cfg.prepare_run_dir("sweep-dict")?;
    let points = run_jobs(&run_dir, &xs, 1, cfg.exec, |x, _| {
        let pairs = build_pairs(&dict.top_n(x), &src, &tgt)?;
        let map = fit_linear_map(&pairs)?;
        match (&downstream, &heldout) {
            (Some(d), _) => d.score(&d.transferred(&map, &src, &tgt, cfg.lambda)?, cfg),
            (None, Some(h)) => Ok(precision_at_k_with(&map, h, &src, &tgt, cfg.k, Exec::Sequential)?.precision),
            (None, None) => unreachable!("validated above"),
        }
    })?;
    let curve = SweepCurve {
        kind: SweepKind::DictionarySize,
        metric: if downstream.is_some() {
            "macro-f".to_string()
        } else {
            metric_p
        },
        seed: cfg.seed(),
        points,
        clamped,
    };
    finish(&run_dir, &curve)?;
    Ok(SweepOutcome { run_dir, curve })
}

/// Fraction of `remaining` gold pairs whose target appears in `transferred`
/// with the source word's polarity.
pub fn transfer_accuracy(
    remaining: &PolarityLexicon,
    gold: &BilingualDictionary,
    transferred: &PolarityLexicon,
    src: &EmbeddingTable,
    tgt: &EmbeddingTable,
) -> Result<f64> {
    let mut evaluated = 0usize;
    let mut hits = 0usize;
    for e in gold.entries() {
        let Some(polarity) = remaining.polarity(&e.source) else {
            continue;
        };
        if src.index_of(&e.source).is_none() || tgt.index_of(&e.target).is_none() {
            continue;
        }
        evaluated += 1;
        if transferred.polarity(&e.target) == Some(polarity) {
            hits += 1;
        }
    }
    if evaluated == 0 {
        return Err(Error::Config(
            "no in-vocabulary gold pairs left to evaluate".to_string(),
        ));
    }
    Ok(hits as f64 / evaluated as f64)
}

struct SeedSetup<'a> {
    lexicon: &'a PolarityLexicon,
    gold: &'a BilingualDictionary,
    src: &'a EmbeddingTable,
    tgt: &'a EmbeddingTable,
}

/// Seed pairs are the `c` best-ranked gold pairs; the map fitted on them
/// transfers the rest of the lexicon.
fn seed_lexicon_run(s: &SeedSetup, c: usize, cfg: &RunConfig, downstream: Option<&Downstream>) -> Result<f64> {
    let seed = s.gold.top_n(c);
    let pairs = build_pairs(&seed, s.src, s.tgt)?;
    let map = fit_linear_map(&pairs)?;
    let seed_sources: HashSet<&str> = seed.entries().iter().map(|e| e.source.as_str()).collect();
    let rest = PolarityLexicon::from_words(
        s.lexicon.name(),
        s.lexicon
            .iter()
            .filter(|(w, _)| !seed_sources.contains(w))
            .map(|(w, e)| (w.to_string(), e.polarity)),
    )?;
    let (transferred, _) = transfer_lexicon_with(&rest, &map, s.src, s.tgt, cfg.lambda, Exec::Sequential)?;
    match downstream {
        None => transfer_accuracy(&rest, s.gold, &transferred, s.src, s.tgt),
        Some(d) => {
            // a manual translation list may send both polarities to one word; such words are left out
            let mut manual: BTreeMap<String, Option<Polarity>> = BTreeMap::new();
            for e in seed.entries() {
                if let Some(p) = s.lexicon.polarity(&e.source) {
                    let slot = manual.entry(e.target.clone()).or_insert(Some(p));
                    if *slot != Some(p) {
                        *slot = None;
                    }
                }
            }
            let manual =
                PolarityLexicon::from_words("seed", manual.into_iter().filter_map(|(w, p)| p.map(|p| (w, p))))?;
            d.score(&union_lexicons(&transferred, &manual).lexicon, cfg)
        }
    }
}

/// For every count `c` in `--counts`, fits the map on `c` translated
/// lexicon words and transfers the remainder.
///
/// The metric is transfer accuracy on the remaining gold pairs, or macro-F
/// on `--train`/`--test` (with the transferred remainder plus the manual
/// translations as lexicon) when those are given. Counts are clamped so
/// that at least one gold pair is left for the accuracy metric.
pub fn cmd_sweep_seed_lexicon(cfg: &RunConfig) -> Result<SweepOutcome> {
    if cfg.synthetic {
        let gen_cfg = SyntheticConfig {
            vocab: 1500,
            dict_size: 0,
            lexicon_per_polarity: 500,
            train_tweets: 0,
            test_tweets: 0,
            label_noise: 0.0,
            ..SyntheticConfig::retrieval(cfg.seed())
        };
        let available = 2 * gen_cfg.lexicon_per_polarity - 1;
        let (xs, clamped) = normalize_settings(&cfg.counts, available, "counts")?;
        let run_dir = cfg.prepare_run_dir("sweep-seed-lexicon")?;
        let data = cfg.exec.map_range(cfg.seeds, |r| {
            SyntheticData::generate(&SyntheticConfig {
                seed: cfg.seed() + r as u64,
                ..gen_cfg.clone()
            })
        });
        let points = run_jobs(&run_dir, &xs, cfg.seeds, cfg.exec, |c, run| {
            let d = &data[run];
            let setup = SeedSetup {
                lexicon: &d.source_lexicon,
                gold: &d.lexicon_pairs,
                src: &d.spaces.src,
                tgt: &d.spaces.tgt,
            };
            seed_lexicon_run(&setup, c, cfg, None)
        })?;
        let curve = SweepCurve {
            kind: SweepKind::SeedLexicon,
            metric: "transfer-accuracy".to_string(),
            seed: cfg.seed(),
            points,
            clamped,
        };
        finish(&run_dir, &curve)?;
        return Ok(SweepOutcome { run_dir, curve });
    }

    let src = load_embeddings(cfg.require(&cfg.src_emb, "src-emb")?, "src", cfg.fold_case)?;
    let tgt = load_embeddings(cfg.require(&cfg.tgt_emb, "tgt-emb")?, "tgt", cfg.fold_case)?;
    let gold = load_dictionary(cfg.require(&cfg.gold_pairs, "gold-pairs")?, cfg.fold_case)?;
    let lexicon = load_lexicon(&cfg.require_lexicons(1)?[0], cfg.fold_case)?;
    let downstream = Downstream::load(cfg)?;
    // only pairs whose source word is in the lexicon can seed it
    let gold = BilingualDictionary::new(
        gold.entries()
            .iter()
            .filter(|e| lexicon.get(&fold_word(&e.source, cfg.fold_case)).is_some())
            .cloned()
            .collect::<Vec<DictEntry>>(),
    );
    let available = if downstream.is_some() {
        gold.len()
    } else {
        gold.len().saturating_sub(1)
    };
    let (xs, clamped) = normalize_settings(&cfg.counts, available, "counts")?;
    let run_dir = cfg.prepare_run_dir("sweep-seed-lexicon")?;
    let setup = SeedSetup {
        lexicon: &lexicon,
        gold: &gold,
        src: &src,
        tgt: &tgt,
    };
    let points = run_jobs(&run_dir, &xs, 1, cfg.exec, |c, _| {
        seed_lexicon_run(&setup, c, cfg, downstream.as_ref())
    })?;
    let curve = SweepCurve {
        kind: SweepKind::SeedLexicon,
        metric: if downstream.is_some() {
            "macro-f".to_string()
        } else {
            "transfer-accuracy".to_string()
        },
        seed: cfg.seed(),
        points,
        clamped,
    };
    finish(&run_dir, &curve)?;
    Ok(SweepOutcome { run_dir, curve })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn settings_are_sorted_and_clamped() {
        let (xs, clamped) = normalize_settings(&[500, 50, 2000, 50, 3000], 1000, "sizes").unwrap();
        assert_eq!(xs, vec![50, 500, 1000]);
        assert_eq!(clamped, vec![(2000, 1000), (3000, 1000)]);
        assert_eq!(normalize_settings(&[7], 10, "sizes").unwrap().0, vec![7]);
        assert!(normalize_settings(&[0], 10, "counts").is_err());
        assert!(normalize_settings(&[], 10, "counts").is_err());
    }

    #[test]
    fn sample_std() {
        assert_eq!(mean_and_std(&[3.0]), (3.0, 0.0));
        let (m, s) = mean_and_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn curve_round_trip() {
        let curve = SweepCurve {
            kind: SweepKind::SeedLexicon,
            metric: "transfer-accuracy".to_string(),
            seed: 9,
            points: vec![
                SweepPoint {
                    x: 50,
                    score: 0.1 + 0.2,
                    dispersion: 1.0 / 3.0,
                    runs: 5,
                },
                SweepPoint {
                    x: 500,
                    score: 0.9,
                    dispersion: 0.0,
                    runs: 5,
                },
            ],
            clamped: vec![(2000, 999)],
        };
        let mut buf = Vec::new();
        curve.write_text(&mut buf).unwrap();
        let back = SweepCurve::parse_text(buf.as_slice()).unwrap();
        assert_eq!(back, curve);
        assert!(back.is_well_formed());
    }
}
