use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lexmap::experiments::{self, RunConfig, Settings};
use lexmap::{Error, Exec, Result};

#[derive(Parser)]
#[command(
    name = "lexmap",
    version,
    about = "Cross-lingual sentiment lexicon induction via linear embedding maps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Fit the linear map on a bilingual dictionary
    Align,
    /// Translate source-language lexicons through a fitted map
    Transfer,
    /// Union two or more lexicons
    Union,
    /// Write feature index and sparse feature files
    Featurize,
    /// Train and evaluate with and without each lexicon
    TrainEval,
    /// Sweep the dictionary size
    SweepDict,
    /// Sweep the number of manually translated lexicon words
    SweepSeedLexicon,
    /// Write a synthetic data set
    GenSynthetic,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Align => "align",
            Command::Transfer => "transfer",
            Command::Union => "union",
            Command::Featurize => "featurize",
            Command::TrainEval => "train-eval",
            Command::SweepDict => "sweep-dict",
            Command::SweepSeedLexicon => "sweep-seed-lexicon",
            Command::GenSynthetic => "gen-synthetic",
        }
    }
}

#[derive(Args)]
struct Flags {
    /// Key-value (TOML) config file; flags override it
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    src_emb: Option<PathBuf>,
    #[arg(long, global = true)]
    tgt_emb: Option<PathBuf>,
    /// Training dictionary: source<TAB>target[<TAB>rank]
    #[arg(long, global = true)]
    dict: Option<PathBuf>,
    /// Held-out dictionary for precision@k
    #[arg(long, global = true)]
    heldout: Option<PathBuf>,
    /// Fitted map file
    #[arg(long, global = true)]
    map: Option<PathBuf>,
    /// Lexicon file (repeatable)
    #[arg(long, global = true)]
    lexicon: Vec<PathBuf>,
    /// Target-language lexicon whose entries override transferred ones
    #[arg(long, global = true)]
    native_lexicon: Option<PathBuf>,
    /// Gold translations of lexicon words (seed-lexicon sweep)
    #[arg(long, global = true)]
    gold_pairs: Option<PathBuf>,
    #[arg(long, global = true)]
    train: Option<PathBuf>,
    #[arg(long, global = true)]
    test: Option<PathBuf>,
    /// Similarity threshold, default 0.65
    #[arg(long, global = true)]
    lambda: Option<f64>,
    /// Highest n-gram order, default 2
    #[arg(long, global = true)]
    ngram_max: Option<usize>,
    /// SVM regularization strength, default 1
    #[arg(long, global = true)]
    regularization: Option<f64>,
    #[arg(long, global = true)]
    epochs: Option<usize>,
    /// Random seed, default 42
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Cross-validation folds when no test set is given, default 5
    #[arg(long, global = true)]
    folds: Option<usize>,
    /// k of precision@k, default 1
    #[arg(long, global = true)]
    k: Option<usize>,
    /// Dictionary sizes to sweep, comma separated
    #[arg(long, global = true, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    /// Seed-lexicon counts to sweep, comma separated
    #[arg(long, global = true, value_delimiter = ',')]
    counts: Option<Vec<usize>>,
    /// Runs per sweep point in synthetic mode, default 5
    #[arg(long, global = true)]
    seeds: Option<usize>,
    /// Run sweeps on generated data instead of input files
    #[arg(long, global = true)]
    synthetic: bool,
    /// Synthetic preset for gen-synthetic: retrieval or labeled
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Keep words as written instead of lowercasing
    #[arg(long, global = true)]
    no_fold_case: bool,
    /// Output root, default ./runs
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Replace an existing run directory
    #[arg(long, global = true)]
    overwrite: bool,
    /// Disable data parallelism
    #[arg(long, global = true)]
    sequential: bool,
}

impl Flags {
    fn settings(&self) -> Settings {
        Settings {
            src_emb: self.src_emb.clone(),
            tgt_emb: self.tgt_emb.clone(),
            dict: self.dict.clone(),
            heldout: self.heldout.clone(),
            map: self.map.clone(),
            lexicon: self.lexicon.clone(),
            native_lexicon: self.native_lexicon.clone(),
            gold_pairs: self.gold_pairs.clone(),
            train: self.train.clone(),
            test: self.test.clone(),
            lambda: self.lambda,
            ngram_max: self.ngram_max,
            regularization: self.regularization,
            epochs: self.epochs,
            seed: self.seed,
            folds: self.folds,
            k: self.k,
            sizes: self.sizes.clone(),
            counts: self.counts.clone(),
            seeds: self.seeds,
            synthetic: self.synthetic.then_some(true),
            preset: self.preset.clone(),
            fold_case: self.no_fold_case.then_some(false),
            out: self.out.clone(),
            overwrite: self.overwrite.then_some(true),
        }
    }
}

fn run(cli: Cli) -> Result<PathBuf> {
    let base = match &cli.flags.config {
        Some(p) => Settings::from_file(p)?,
        None => Settings::default(),
    };
    let mut cfg = RunConfig::from_settings(cli.flags.settings().over(base))?;
    if cli.flags.sequential {
        cfg.exec = Exec::Sequential;
    }
    log::debug!("running {}", cli.command.name());
    let dir = match cli.command {
        Command::Align => experiments::cmd_align(&cfg)?.run_dir,
        Command::Transfer => {
            let out = experiments::cmd_transfer(&cfg)?;
            for (lex, report) in &out.lexicons {
                eprint!("[{}]\n{}", lex.name(), report.to_key_values());
            }
            out.run_dir
        }
        Command::Union => experiments::cmd_union(&cfg)?.run_dir,
        Command::Featurize => experiments::cmd_featurize(&cfg)?.run_dir,
        Command::TrainEval => {
            let out = experiments::cmd_train_eval(&cfg)?;
            for row in &out.rows {
                eprintln!("{}\tmacro-F {:.4}", row.name, row.report.macro_f);
            }
            out.run_dir
        }
        Command::SweepDict => experiments::cmd_sweep_dict(&cfg)?.run_dir,
        Command::SweepSeedLexicon => experiments::cmd_sweep_seed_lexicon(&cfg)?.run_dir,
        Command::GenSynthetic => experiments::cmd_gen_synthetic(&cfg)?.run_dir,
    };
    Ok(dir)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(dir) => {
            println!("{}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {}", e);
            ExitCode::from(exit_status(&e))
        }
    }
}

fn exit_status(e: &Error) -> u8 {
    e.exit_code() as u8
}
