//! Run configuration: a TOML key-value file merged under command-line flags.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::evaluation::Hyper;
use crate::lexicon::DEFAULT_LAMBDA;
use crate::{Error, Exec, Result};

/// Every setting optional; used both for the config file and for the
/// flags that override it.
#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct Settings {
    pub src_emb: Option<PathBuf>,
    pub tgt_emb: Option<PathBuf>,
    pub dict: Option<PathBuf>,
    pub heldout: Option<PathBuf>,
    pub map: Option<PathBuf>,
    #[serde(default)]
    pub lexicon: Vec<PathBuf>,
    pub native_lexicon: Option<PathBuf>,
    pub gold_pairs: Option<PathBuf>,
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub lambda: Option<f64>,
    pub ngram_max: Option<usize>,
    pub regularization: Option<f64>,
    pub epochs: Option<usize>,
    pub seed: Option<u64>,
    pub folds: Option<usize>,
    pub k: Option<usize>,
    pub sizes: Option<Vec<usize>>,
    pub counts: Option<Vec<usize>>,
    pub seeds: Option<usize>,
    pub synthetic: Option<bool>,
    pub preset: Option<String>,
    pub fold_case: Option<bool>,
    pub out: Option<PathBuf>,
    pub overwrite: Option<bool>,
}

impl Settings {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::from(e).in_file(path))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {}", path.display(), e)))
    }

    /// `self` wins wherever it is set.
    pub fn over(self, base: Settings) -> Settings {
        Settings {
            src_emb: self.src_emb.or(base.src_emb),
            tgt_emb: self.tgt_emb.or(base.tgt_emb),
            dict: self.dict.or(base.dict),
            heldout: self.heldout.or(base.heldout),
            map: self.map.or(base.map),
            lexicon: if self.lexicon.is_empty() {
                base.lexicon
            } else {
                self.lexicon
            },
            native_lexicon: self.native_lexicon.or(base.native_lexicon),
            gold_pairs: self.gold_pairs.or(base.gold_pairs),
            train: self.train.or(base.train),
            test: self.test.or(base.test),
            lambda: self.lambda.or(base.lambda),
            ngram_max: self.ngram_max.or(base.ngram_max),
            regularization: self.regularization.or(base.regularization),
            epochs: self.epochs.or(base.epochs),
            seed: self.seed.or(base.seed),
            folds: self.folds.or(base.folds),
            k: self.k.or(base.k),
            sizes: self.sizes.or(base.sizes),
            counts: self.counts.or(base.counts),
            seeds: self.seeds.or(base.seeds),
            synthetic: self.synthetic.or(base.synthetic),
            preset: self.preset.or(base.preset),
            fold_case: self.fold_case.or(base.fold_case),
            out: self.out.or(base.out),
            overwrite: self.overwrite.or(base.overwrite),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub src_emb: Option<PathBuf>,
    pub tgt_emb: Option<PathBuf>,
    pub dict: Option<PathBuf>,
    pub heldout: Option<PathBuf>,
    pub map: Option<PathBuf>,
    pub lexicons: Vec<PathBuf>,
    pub native_lexicon: Option<PathBuf>,
    pub gold_pairs: Option<PathBuf>,
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub lambda: f64,
    pub ngram_max: usize,
    pub hyper: Hyper,
    pub folds: Option<usize>,
    /// `k` of precision@k.
    pub k: usize,
    pub sizes: Vec<usize>,
    pub counts: Vec<usize>,
    /// Repetitions per sweep point in synthetic mode.
    pub seeds: usize,
    pub synthetic: bool,
    pub preset: String,
    pub fold_case: bool,
    pub out: PathBuf,
    pub overwrite: bool,
    /// Not part of the config hash: both modes produce identical outputs.
    pub exec: Exec,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::from_settings(Settings::default()).expect("defaults are valid")
    }
}

impl RunConfig {
    pub fn from_settings(s: Settings) -> Result<Self> {
        let hyper_default = Hyper::default();
        let cfg = RunConfig {
            src_emb: s.src_emb,
            tgt_emb: s.tgt_emb,
            dict: s.dict,
            heldout: s.heldout,
            map: s.map,
            lexicons: s.lexicon,
            native_lexicon: s.native_lexicon,
            gold_pairs: s.gold_pairs,
            train: s.train,
            test: s.test,
            lambda: s.lambda.unwrap_or(DEFAULT_LAMBDA),
            ngram_max: s.ngram_max.unwrap_or(2),
            hyper: Hyper {
                regularization: s.regularization.unwrap_or(hyper_default.regularization),
                epochs: s.epochs.unwrap_or(hyper_default.epochs),
                seed: s.seed.unwrap_or(hyper_default.seed),
            },
            folds: s.folds,
            k: s.k.unwrap_or(1),
            sizes: s.sizes.unwrap_or_default(),
            counts: s.counts.unwrap_or_default(),
            seeds: s.seeds.unwrap_or(5),
            synthetic: s.synthetic.unwrap_or(false),
            preset: s.preset.unwrap_or_else(|| "labeled".to_string()),
            fold_case: s.fold_case.unwrap_or(true),
            out: s.out.unwrap_or_else(|| PathBuf::from("runs")),
            overwrite: s.overwrite.unwrap_or(false),
            exec: Exec::default(),
        };
        if !(cfg.lambda > 0.0 && cfg.lambda <= 1.0) {
            return Err(Error::Config(format!("lambda must lie in (0, 1], got {}", cfg.lambda)));
        }
        if cfg.ngram_max == 0 {
            return Err(Error::Config("ngram-max must be at least 1".to_string()));
        }
        if !(cfg.hyper.regularization > 0.0 && cfg.hyper.regularization.is_finite()) {
            return Err(Error::Config("regularization must be positive".to_string()));
        }
        if cfg.k == 0 {
            return Err(Error::Config("k must be at least 1".to_string()));
        }
        if cfg.seeds == 0 {
            return Err(Error::Config("seeds must be at least 1".to_string()));
        }
        Ok(cfg)
    }

    pub fn seed(&self) -> u64 {
        self.hyper.seed
    }

    /// The path behind an optional setting, checked to exist.
    pub fn require<'a>(&self, path: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
        let p = path
            .as_deref()
            .ok_or_else(|| Error::Config(format!("missing required --{}", flag)))?;
        check_exists(p)?;
        Ok(p)
    }

    pub fn optional<'a>(&self, path: &'a Option<PathBuf>) -> Result<Option<&'a Path>> {
        match path.as_deref() {
            Some(p) => check_exists(p).map(|_| Some(p)),
            None => Ok(None),
        }
    }

    pub fn require_lexicons(&self, min: usize) -> Result<&[PathBuf]> {
        if self.lexicons.len() < min {
            return Err(Error::Config(format!("at least {} --lexicon required", min)));
        }
        for p in &self.lexicons {
            check_exists(p)?;
        }
        Ok(&self.lexicons)
    }

    /// Stable `key=value` rendering of every setting that affects outputs.
    pub fn canonical(&self, command: &str) -> String {
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let list = |xs: &[usize]| xs.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
        let mut s = String::new();
        let _ = writeln!(s, "command={}", command);
        let _ = writeln!(s, "src-emb={}", path(&self.src_emb));
        let _ = writeln!(s, "tgt-emb={}", path(&self.tgt_emb));
        let _ = writeln!(s, "dict={}", path(&self.dict));
        let _ = writeln!(s, "heldout={}", path(&self.heldout));
        let _ = writeln!(s, "map={}", path(&self.map));
        let lexicons: Vec<String> = self.lexicons.iter().map(|p| p.display().to_string()).collect();
        let _ = writeln!(s, "lexicon={}", lexicons.join(","));
        let _ = writeln!(s, "native-lexicon={}", path(&self.native_lexicon));
        let _ = writeln!(s, "gold-pairs={}", path(&self.gold_pairs));
        let _ = writeln!(s, "train={}", path(&self.train));
        let _ = writeln!(s, "test={}", path(&self.test));
        let _ = writeln!(s, "lambda={}", self.lambda);
        let _ = writeln!(s, "ngram-max={}", self.ngram_max);
        let _ = writeln!(s, "regularization={}", self.hyper.regularization);
        let _ = writeln!(s, "epochs={}", self.hyper.epochs);
        let _ = writeln!(s, "seed={}", self.hyper.seed);
        let _ = writeln!(s, "folds={}", self.folds.map(|f| f.to_string()).unwrap_or_default());
        let _ = writeln!(s, "k={}", self.k);
        let _ = writeln!(s, "sizes={}", list(&self.sizes));
        let _ = writeln!(s, "counts={}", list(&self.counts));
        let _ = writeln!(s, "seeds={}", self.seeds);
        let _ = writeln!(s, "synthetic={}", self.synthetic);
        let _ = writeln!(s, "preset={}", self.preset);
        let _ = writeln!(s, "fold-case={}", self.fold_case);
        s
    }

    pub fn config_hash(&self, command: &str) -> String {
        let digest = Sha256::digest(self.canonical(command).as_bytes());
        hex::encode(&digest[..6])
    }

    /// Creates `<out>/<command>-<hash>` and records the configuration in
    /// it. An existing non-empty run directory is an error unless
    /// `overwrite` is set.
    pub fn prepare_run_dir(&self, command: &str) -> Result<PathBuf> {
        let dir = self.out.join(format!("{}-{}", command, self.config_hash(command)));
        if dir.exists() && !self.overwrite {
            let occupied = fs::read_dir(&dir)
                .map_err(|e| Error::from(e).in_file(&dir))?
                .next()
                .is_some();
            if occupied {
                return Err(Error::Config(format!(
                    "run directory {} already exists; pass --overwrite to replace it",
                    dir.display()
                )));
            }
        }
        fs::create_dir_all(&dir).map_err(|e| Error::from(e).in_file(&dir))?;
        write_file(&dir.join("config.txt"), self.canonical(command).as_bytes())?;
        Ok(dir)
    }
}

fn check_exists(p: &Path) -> Result<()> {
    if p.exists() {
        Ok(())
    } else {
        Err(Error::Config(format!("{} does not exist", p.display())))
    }
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::from(e).in_file(path))
}
