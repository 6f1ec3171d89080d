//! File-level commands. Each one validates its inputs, creates a run
//! directory and writes its outputs there.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::alignment::{
    build_pairs, fit_linear_map, precision_at_k_with, BilingualDictionary, LinearMap, PrecisionReport,
};
use crate::embeddings::{parse_embeddings, EmbeddingTable, LoadOptions};
use crate::evaluation::{cross_validate_with, train_and_score, EvaluationReport, LinearModel};
use crate::features::{
    featurize_dataset_with, parse_dataset, write_dataset, FeatureIndex, LabeledDataset, Mode, Tweet,
};
use crate::lexicon::{
    lexicon_stats, overlay_native, parse_lexicon, transfer_lexicon_with, union_lexicons, PolarityLexicon,
    TransferReport,
};
use crate::numfmt;
use crate::{Error, Exec, Result};

use super::config::{write_file, RunConfig};
use super::synthetic::{SyntheticConfig, SyntheticData};

const DEFAULT_FOLDS: usize = 5;

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::from(e).in_file(path))
}

/// Writes through a buffered file handle, attaching the path to any error.
pub fn write_with<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
{
    let run = || -> std::io::Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        f(&mut out)?;
        out.flush()
    };
    run().map_err(|e| Error::from(e).in_file(path))
}

pub fn load_embeddings(path: &Path, lang: &str, fold_case: bool) -> Result<EmbeddingTable> {
    parse_embeddings(open(path)?, lang, LoadOptions { fold_case }).map_err(|e| Error::from(e).in_file(path))
}

pub fn load_dictionary(path: &Path, fold_case: bool) -> Result<BilingualDictionary> {
    BilingualDictionary::parse(open(path)?, fold_case).map_err(|e| Error::from(e).in_file(path))
}

/// The lexicon is named after the file stem.
pub fn load_lexicon(path: &Path, fold_case: bool) -> Result<PolarityLexicon> {
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "lexicon".to_string());
    parse_lexicon(open(path)?, &name, fold_case).map_err(|e| Error::from(e).in_file(path))
}

pub fn load_map(path: &Path) -> Result<LinearMap> {
    LinearMap::parse_text(open(path)?).map_err(|e| Error::from(e).in_file(path))
}

pub fn load_tweets(path: &Path) -> Result<Vec<Tweet>> {
    parse_dataset(open(path)?).map_err(|e| Error::from(e).in_file(path))
}

fn load_lexicons(cfg: &RunConfig, min: usize) -> Result<Vec<PolarityLexicon>> {
    let mut out: Vec<PolarityLexicon> = Vec::new();
    for p in cfg.require_lexicons(min)? {
        let lex = load_lexicon(p, cfg.fold_case)?;
        if out.iter().any(|l| l.name() == lex.name()) {
            return Err(Error::Config(format!(
                "two lexicons named {:?}; rename one of the files",
                lex.name()
            )));
        }
        out.push(lex);
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct AlignOutcome {
    pub run_dir: PathBuf,
    pub map: LinearMap,
    pub skipped: usize,
    pub gradient_norm: f64,
    pub precision: Option<PrecisionReport>,
}

pub fn cmd_align(cfg: &RunConfig) -> Result<AlignOutcome> {
    let src_path = cfg.require(&cfg.src_emb, "src-emb")?;
    let tgt_path = cfg.require(&cfg.tgt_emb, "tgt-emb")?;
    let dict_path = cfg.require(&cfg.dict, "dict")?;
    let heldout_path = cfg.optional(&cfg.heldout)?;
    let src = load_embeddings(src_path, "src", cfg.fold_case)?;
    let tgt = load_embeddings(tgt_path, "tgt", cfg.fold_case)?;
    let dict = load_dictionary(dict_path, cfg.fold_case)?;
    let heldout = heldout_path.map(|p| load_dictionary(p, cfg.fold_case)).transpose()?;
    let run_dir = cfg.prepare_run_dir("align")?;

    let pairs = build_pairs(&dict, &src, &tgt)?;
    let map = fit_linear_map(&pairs)?;
    let gradient_norm = map.residual_gradient_norm(&pairs)?;
    let precision = heldout
        .map(|h| precision_at_k_with(&map, &h, &src, &tgt, cfg.k, cfg.exec))
        .transpose()?;

    write_with(&run_dir.join("map.txt"), |w| map.write_text(w))?;
    let mut kv = format!(
        "pairs={}\nskipped={}\nmean_squared_residual={}\ngradient_norm={}\nsolver={}\nsrc_duplicates={}\ntgt_duplicates={}\n",
        map.train_pair_count(),
        pairs.skipped,
        numfmt::exact(map.mean_squared_residual()),
        numfmt::exact(gradient_norm),
        map.solver_tag(),
        src.duplicates(),
        tgt.duplicates()
    );
    if let Some(p) = &precision {
        kv.push_str(&format!(
            "k={}\nprecision={}\nevaluated={}\noov={}\n",
            cfg.k,
            numfmt::exact(p.precision),
            p.evaluated,
            p.oov
        ));
    }
    write_file(&run_dir.join("align.kv"), kv.as_bytes())?;
    log::info!(
        "fitted map on {} pairs ({} skipped), mean squared residual {:.3e}",
        map.train_pair_count(),
        pairs.skipped,
        map.mean_squared_residual()
    );
    Ok(AlignOutcome {
        run_dir,
        map,
        skipped: pairs.skipped,
        gradient_norm,
        precision,
    })
}

#[derive(Debug, Clone)]
pub struct TransferOutcome {
    pub run_dir: PathBuf,
    pub lexicons: Vec<(PolarityLexicon, TransferReport)>,
}

/// Transfers every `--lexicon` through `--map`. With `--native-lexicon`,
/// native entries take precedence over induced ones.
pub fn cmd_transfer(cfg: &RunConfig) -> Result<TransferOutcome> {
    let src_path = cfg.require(&cfg.src_emb, "src-emb")?;
    let tgt_path = cfg.require(&cfg.tgt_emb, "tgt-emb")?;
    let map_path = cfg.require(&cfg.map, "map")?;
    let native_path = cfg.optional(&cfg.native_lexicon)?;
    let sources = load_lexicons(cfg, 1)?;
    let src = load_embeddings(src_path, "src", cfg.fold_case)?;
    let tgt = load_embeddings(tgt_path, "tgt", cfg.fold_case)?;
    let map = load_map(map_path)?;
    let native = native_path.map(|p| load_lexicon(p, cfg.fold_case)).transpose()?;
    let run_dir = cfg.prepare_run_dir("transfer")?;

    let mut lexicons = Vec::new();
    for lex in &sources {
        let (mut induced, report) = transfer_lexicon_with(lex, &map, &src, &tgt, cfg.lambda, cfg.exec)?;
        let mut kv = report.to_key_values();
        if let Some(n) = &native {
            let (merged, overridden) = overlay_native(n, &induced);
            kv.push_str(&format!(
                "native_overrides={}\nmerged_size={}\n",
                overridden,
                merged.len()
            ));
            induced = merged;
        }
        write_with(&run_dir.join(format!("{}.tsv", lex.name())), |w| induced.write_tsv(w))?;
        write_file(&run_dir.join(format!("{}.report.kv", lex.name())), kv.as_bytes())?;
        lexicons.push((induced, report));
    }
    Ok(TransferOutcome { run_dir, lexicons })
}

#[derive(Debug, Clone)]
pub struct UnionResult {
    pub run_dir: PathBuf,
    pub lexicon: PolarityLexicon,
    pub conflicts: usize,
}

pub fn cmd_union(cfg: &RunConfig) -> Result<UnionResult> {
    let lexicons = load_lexicons(cfg, 2)?;
    let run_dir = cfg.prepare_run_dir("union")?;
    let mut acc = lexicons[0].clone();
    let mut conflicts = 0;
    for lex in &lexicons[1..] {
        let u = union_lexicons(&acc, lex);
        conflicts += u.conflicts;
        acc = u.lexicon;
    }
    let stats = lexicon_stats(&acc);
    write_with(&run_dir.join("union.tsv"), |w| acc.write_tsv(w))?;
    let kv = format!(
        "name={}\nsize={}\npositive={}\nnegative={}\nconflicts={}\n",
        acc.name(),
        acc.len(),
        stats.positive,
        stats.negative,
        conflicts
    );
    write_file(&run_dir.join("union.kv"), kv.as_bytes())?;
    Ok(UnionResult {
        run_dir,
        lexicon: acc,
        conflicts,
    })
}

/// Featurizes `train` with a fresh index, freezes it, then featurizes
/// `test` against it.
pub fn featurize_split(
    train: &[Tweet],
    test: &[Tweet],
    lexicons: &[PolarityLexicon],
    ngram_max: usize,
    exec: Exec,
) -> Result<(FeatureIndex, LabeledDataset, LabeledDataset)> {
    let mut index = FeatureIndex::new();
    let train_set = featurize_dataset_with(train, lexicons, &mut index, ngram_max, Mode::Train, exec)?;
    index.freeze();
    let test_set = featurize_dataset_with(test, lexicons, &mut index, ngram_max, Mode::Inference, exec)?;
    Ok((index, train_set, test_set))
}

#[derive(Debug, Clone)]
pub struct FeaturizeOutcome {
    pub run_dir: PathBuf,
    pub index: FeatureIndex,
    pub train: LabeledDataset,
    pub test: Option<LabeledDataset>,
}

pub fn cmd_featurize(cfg: &RunConfig) -> Result<FeaturizeOutcome> {
    let train_path = cfg.require(&cfg.train, "train")?;
    let test_path = cfg.optional(&cfg.test)?;
    let lexicons = if cfg.lexicons.is_empty() {
        Vec::new()
    } else {
        load_lexicons(cfg, 1)?
    };
    let train_tweets = load_tweets(train_path)?;
    let test_tweets = test_path.map(load_tweets).transpose()?;
    let run_dir = cfg.prepare_run_dir("featurize")?;

    let (index, train, test) = featurize_split(
        &train_tweets,
        test_tweets.as_deref().unwrap_or(&[]),
        &lexicons,
        cfg.ngram_max,
        cfg.exec,
    )?;
    write_with(&run_dir.join("features.tsv"), |w| index.write_tsv(w))?;
    write_with(&run_dir.join("train.svm"), |w| train.write_sparse(w))?;
    let test = match test_tweets {
        Some(_) => {
            write_with(&run_dir.join("test.svm"), |w| test.write_sparse(w))?;
            Some(test)
        }
        None => None,
    };
    Ok(FeaturizeOutcome {
        run_dir,
        index,
        train,
        test,
    })
}

#[derive(Debug, Clone)]
pub struct TrainEvalRow {
    /// `none` for the ablation row, the lexicon name, or `all`.
    pub name: String,
    pub report: EvaluationReport,
    /// Present only when a test split was given.
    pub model: Option<LinearModel>,
    /// Per-fold macro-F under cross-validation.
    pub fold_scores: Vec<f64>,
}

/// The lexicon sets evaluated by `train-eval`: none, each one alone, and
/// all together when there is more than one.
pub fn lexicon_rows(lexicons: &[PolarityLexicon]) -> Vec<(String, Vec<PolarityLexicon>)> {
    let mut rows = vec![("none".to_string(), Vec::new())];
    for lex in lexicons {
        rows.push((lex.name().to_string(), vec![lex.clone()]));
    }
    if lexicons.len() > 1 {
        rows.push(("all".to_string(), lexicons.to_vec()));
    }
    rows
}

/// Scores every lexicon row on a train/test split, or by cross-validation
/// over `train` when `test` is absent.
pub fn train_eval_rows(
    train: &[Tweet],
    test: Option<&[Tweet]>,
    lexicons: &[PolarityLexicon],
    cfg: &RunConfig,
) -> Result<Vec<TrainEvalRow>> {
    let rows = lexicon_rows(lexicons);
    let inner = if cfg.exec.is_parallel() {
        Exec::Sequential
    } else {
        cfg.exec
    };
    let folds = cfg.folds.unwrap_or(DEFAULT_FOLDS);
    cfg.exec
        .map(&rows, |(name, lexs)| -> Result<TrainEvalRow> {
            match test {
                Some(test) => {
                    let (_, tr, te) = featurize_split(train, test, lexs, cfg.ngram_max, inner)?;
                    let (model, report) = train_and_score(&tr, &te, &cfg.hyper, inner)?;
                    Ok(TrainEvalRow {
                        name: name.clone(),
                        report,
                        model: Some(model),
                        fold_scores: Vec::new(),
                    })
                }
                None => {
                    let (_, tr, _) = featurize_split(train, &[], lexs, cfg.ngram_max, inner)?;
                    let cv = cross_validate_with(&tr, folds, &cfg.hyper, inner)?;
                    Ok(TrainEvalRow {
                        name: name.clone(),
                        fold_scores: cv.per_fold.iter().map(|r| r.macro_f).collect(),
                        report: cv.mean,
                        model: None,
                    })
                }
            }
        })
        .into_iter()
        .collect()
}

#[derive(Debug, Clone)]
pub struct TrainEvalOutcome {
    pub run_dir: PathBuf,
    pub rows: Vec<TrainEvalRow>,
}

impl TrainEvalOutcome {
    pub fn macro_f(&self, row: &str) -> Option<f64> {
        self.rows.iter().find(|r| r.name == row).map(|r| r.report.macro_f)
    }
}

pub fn cmd_train_eval(cfg: &RunConfig) -> Result<TrainEvalOutcome> {
    let train_path = cfg.require(&cfg.train, "train")?;
    let test_path = cfg.optional(&cfg.test)?;
    if test_path.is_some() && cfg.folds.is_some() {
        log::warn!("--folds is ignored when --test is given");
    }
    let lexicons = if cfg.lexicons.is_empty() {
        Vec::new()
    } else {
        load_lexicons(cfg, 1)?
    };
    let train = load_tweets(train_path)?;
    let test = test_path.map(load_tweets).transpose()?;
    let run_dir = cfg.prepare_run_dir("train-eval")?;

    let rows = train_eval_rows(&train, test.as_deref(), &lexicons, cfg)?;
    let mut summary = String::from("row\tmacro_f\n");
    for row in &rows {
        summary.push_str(&format!("{}\t{}\n", row.name, numfmt::exact(row.report.macro_f)));
        let mut table = row.report.to_table();
        if !row.fold_scores.is_empty() {
            let folds: Vec<String> = row.fold_scores.iter().map(|f| numfmt::exact(*f)).collect();
            table.push_str(&format!("fold macro-F: {}\n", folds.join(" ")));
        }
        write_file(&run_dir.join(format!("{}.report.txt", row.name)), table.as_bytes())?;
        write_file(
            &run_dir.join(format!("{}.report.kv", row.name)),
            row.report.to_key_values().as_bytes(),
        )?;
        if let Some(model) = &row.model {
            write_with(&run_dir.join(format!("{}.model", row.name)), |w| model.write_text(w))?;
        }
    }
    write_file(&run_dir.join("summary.tsv"), summary.as_bytes())?;
    Ok(TrainEvalOutcome { run_dir, rows })
}

#[derive(Debug, Clone)]
pub struct SyntheticFiles {
    pub run_dir: PathBuf,
    pub src_emb: PathBuf,
    pub tgt_emb: PathBuf,
    pub dict: PathBuf,
    pub heldout: PathBuf,
    /// Planted source-language lexicon.
    pub lexicon: PathBuf,
    /// Its gold target-language translation.
    pub gold_lexicon: PathBuf,
    pub lexicon_pairs: PathBuf,
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
}

pub fn synthetic_preset(name: &str, seed: u64) -> Result<SyntheticConfig> {
    match name {
        "retrieval" => Ok(SyntheticConfig::retrieval(seed)),
        "labeled" => Ok(SyntheticConfig::labeled(seed)),
        other => Err(Error::Config(format!(
            "unknown synthetic preset {:?} (expected retrieval or labeled)",
            other
        ))),
    }
}

/// Writes a synthetic data set (preset chosen by `--preset`) as ordinary
/// input files.
pub fn cmd_gen_synthetic(cfg: &RunConfig) -> Result<SyntheticFiles> {
    let preset = synthetic_preset(&cfg.preset, cfg.seed())?;
    let run_dir = cfg.prepare_run_dir("gen-synthetic")?;
    let data = SyntheticData::generate(&preset);
    let path = |name: &str| run_dir.join(name);
    let files = SyntheticFiles {
        run_dir: run_dir.clone(),
        src_emb: path("src.vec"),
        tgt_emb: path("tgt.vec"),
        dict: path("dict.tsv"),
        heldout: path("heldout.tsv"),
        lexicon: path("lexicon.tsv"),
        gold_lexicon: path("gold_lexicon.tsv"),
        lexicon_pairs: path("lexicon_pairs.tsv"),
        train: (preset.train_tweets > 0).then(|| path("train.tsv")),
        test: (preset.test_tweets > 0).then(|| path("test.tsv")),
    };
    write_with(&files.src_emb, |w| data.spaces.src.write_text(w))?;
    write_with(&files.tgt_emb, |w| data.spaces.tgt.write_text(w))?;
    write_with(&files.dict, |w| data.dictionary.write_tsv(w))?;
    write_with(&files.heldout, |w| data.heldout.write_tsv(w))?;
    write_with(&files.lexicon, |w| data.source_lexicon.write_tsv(w))?;
    write_with(&files.gold_lexicon, |w| data.target_lexicon.write_tsv(w))?;
    write_with(&files.lexicon_pairs, |w| data.lexicon_pairs.write_tsv(w))?;
    if let Some(p) = &files.train {
        write_with(p, |w| write_dataset(&data.train, w))?;
    }
    if let Some(p) = &files.test {
        write_with(p, |w| write_dataset(&data.test, w))?;
    }
    Ok(files)
}
