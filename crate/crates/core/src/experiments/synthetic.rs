//! Synthetic bilingual data with planted ground truth.
//!
//! Word `i` of both languages shares a latent vector `z_i ~ N(0, I/d)`.
//! Each language sees it through its own random linear view (a random
//! orthogonal matrix with column scales drawn from [0.5, 1.5]) plus
//! isotropic Gaussian noise, so the true source → target map is linear and
//! known. Word rank doubles as frequency rank: the dictionary is drawn from
//! the lowest ranks, evaluation words from the highest.
//!
//! For the classification pipeline, a block of source words is labeled
//! positive or negative, and tweets in the target language are built so
//! that their labels are driven by the target counterparts of those words.

use nalgebra::DMatrix;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::alignment::{BilingualDictionary, DictEntry};
use crate::embeddings::{EmbeddingTable, LoadOptions};
use crate::features::{Label, Tweet};
use crate::lexicon::{Polarity, PolarityLexicon};

pub fn source_word(i: usize) -> String {
    format!("s{}", i)
}

pub fn target_word(i: usize) -> String {
    format!("t{}", i)
}

/// Two embedding tables over the same latent vocabulary; `src[i]`
/// translates to `tgt[i]`.
#[derive(Debug, Clone)]
pub struct SyntheticSpaces {
    pub src: EmbeddingTable,
    pub tgt: EmbeddingTable,
}

impl SyntheticSpaces {
    pub fn generate(vocab: usize, dim: usize, noise: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = 1.0 / (dim as f64).sqrt();
        let latent = DMatrix::from_fn(vocab, dim, |_, _| {
            scale * Distribution::<f64>::sample(&StandardNormal, &mut rng)
        });
        let src_view = random_view(dim, &mut rng);
        let tgt_view = random_view(dim, &mut rng);
        let noise = Normal::new(0.0, noise).expect("noise must be finite and non-negative");
        let mut view = |m: &DMatrix<f64>, name: fn(usize) -> String, lang: &str| {
            let mapped = &latent * m.transpose();
            let rows: Vec<(String, Vec<f64>)> = (0..vocab)
                .map(|i| {
                    let v = mapped.row(i).iter().map(|x| x + noise.sample(&mut rng)).collect();
                    (name(i), v)
                })
                .collect();
            EmbeddingTable::from_rows(lang, dim, rows, LoadOptions::default()).expect("generated rows are well formed")
        };
        let src = view(&src_view, source_word, "src");
        let tgt = view(&tgt_view, target_word, "tgt");
        SyntheticSpaces { src, tgt }
    }

    /// Gold pairs for the word ranks in `ranks`, rank recorded.
    pub fn dictionary(&self, ranks: std::ops::Range<usize>) -> BilingualDictionary {
        BilingualDictionary::new(ranks.map(|i| DictEntry {
            source: source_word(i),
            target: target_word(i),
            rank: Some(i + 1),
        }))
    }
}

fn random_view(dim: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let g: DMatrix<f64> = DMatrix::from_fn(dim, dim, |_, _| StandardNormal.sample(rng));
    let q = g.qr().q();
    let scales: Vec<f64> = (0..dim).map(|_| rng.random_range(0.5..1.5)).collect();
    DMatrix::from_fn(dim, dim, |r, c| q[(r, c)] * scales[c])
}

/// Parameters of the full synthetic pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub vocab: usize,
    pub dim: usize,
    pub noise: f64,
    /// Dictionary drawn from ranks `0..dict_size`.
    pub dict_size: usize,
    /// Planted lexicon words per polarity, drawn from ranks above the
    /// dictionary.
    pub lexicon_per_polarity: usize,
    pub train_tweets: usize,
    pub test_tweets: usize,
    /// Probability that a tweet's label is replaced by a random one.
    pub label_noise: f64,
    pub seed: u64,
}

impl SyntheticConfig {
    /// Retrieval setup: 1,000 words, d = 50, σ = 0.01, 500 dictionary pairs.
    pub fn retrieval(seed: u64) -> Self {
        SyntheticConfig {
            vocab: 1000,
            dim: 50,
            noise: 0.01,
            dict_size: 500,
            lexicon_per_polarity: 100,
            train_tweets: 0,
            test_tweets: 0,
            label_noise: 0.0,
            seed,
        }
    }

    /// Labeled-tweet setup: 2,000 training and 500 test tweets.
    pub fn labeled(seed: u64) -> Self {
        SyntheticConfig {
            vocab: 3000,
            dim: 50,
            noise: 0.01,
            dict_size: 1000,
            lexicon_per_polarity: 800,
            train_tweets: 2000,
            test_tweets: 500,
            label_noise: 0.1,
            seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub spaces: SyntheticSpaces,
    pub dictionary: BilingualDictionary,
    /// Gold pairs for every rank outside the dictionary.
    pub heldout: BilingualDictionary,
    pub source_lexicon: PolarityLexicon,
    /// Target-language translation of the source lexicon.
    pub target_lexicon: PolarityLexicon,
    /// Gold translations of the source lexicon words.
    pub lexicon_pairs: BilingualDictionary,
    pub train: Vec<Tweet>,
    pub test: Vec<Tweet>,
}

impl SyntheticData {
    pub fn generate(cfg: &SyntheticConfig) -> Self {
        assert!(
            cfg.dict_size + 2 * cfg.lexicon_per_polarity <= cfg.vocab,
            "vocabulary too small for the requested split"
        );
        let spaces = SyntheticSpaces::generate(cfg.vocab, cfg.dim, cfg.noise, cfg.seed);
        let dictionary = spaces.dictionary(0..cfg.dict_size);
        let heldout = spaces.dictionary(cfg.dict_size..cfg.vocab);

        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_1e71);
        let mut pool: Vec<usize> = (cfg.dict_size..cfg.vocab).collect();
        pool.shuffle(&mut rng);
        let positive = &pool[..cfg.lexicon_per_polarity];
        let negative = &pool[cfg.lexicon_per_polarity..2 * cfg.lexicon_per_polarity];
        let planted = || {
            positive
                .iter()
                .map(|&i| (i, Polarity::Positive))
                .chain(negative.iter().map(|&i| (i, Polarity::Negative)))
        };
        let source_lexicon = PolarityLexicon::from_words("planted", planted().map(|(i, p)| (source_word(i), p)))
            .expect("planted words are distinct");
        let target_lexicon = PolarityLexicon::from_words("planted-gold", planted().map(|(i, p)| (target_word(i), p)))
            .expect("planted words are distinct");
        let lexicon_pairs = BilingualDictionary::new(planted().map(|(i, _)| DictEntry {
            source: source_word(i),
            target: target_word(i),
            rank: Some(i + 1),
        }));

        let mut fillers: Vec<usize> = (0..cfg.vocab).collect();
        fillers.retain(|i| !positive.contains(i) && !negative.contains(i));
        let pos_words: Vec<String> = positive.iter().map(|&i| target_word(i)).collect();
        let neg_words: Vec<String> = negative.iter().map(|&i| target_word(i)).collect();
        let filler_words: Vec<String> = fillers.iter().map(|&i| target_word(i)).collect();
        let mut tweet_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x7ee7);
        let mut make = |n: usize, prefix: &str| -> Vec<Tweet> {
            (0..n)
                .map(|k| {
                    synthetic_tweet(
                        format!("{}{}", prefix, k),
                        &pos_words,
                        &neg_words,
                        &filler_words,
                        cfg.label_noise,
                        &mut tweet_rng,
                    )
                })
                .collect()
        };
        let train = make(cfg.train_tweets, "train");
        let test = make(cfg.test_tweets, "test");

        SyntheticData {
            spaces,
            dictionary,
            heldout,
            source_lexicon,
            target_lexicon,
            lexicon_pairs,
            train,
            test,
        }
    }
}

const POS_EMOTICONS: &[&str] = &[":)", ":D", "<3"];
const NEG_EMOTICONS: &[&str] = &[":(", ":'(", ":/"];

fn synthetic_tweet(
    id: String,
    pos_words: &[String],
    neg_words: &[String],
    fillers: &[String],
    label_noise: f64,
    rng: &mut ChaCha8Rng,
) -> Tweet {
    let label = *Label::ALL.choose(rng).unwrap();
    let mut tokens: Vec<String> = (0..rng.random_range(5..10))
        .map(|_| fillers.choose(rng).unwrap().clone())
        .collect();
    let polar = match label {
        Label::Positive => Some(pos_words),
        Label::Negative => Some(neg_words),
        Label::Neutral => None,
    };
    if let Some(words) = polar {
        for _ in 0..rng.random_range(1..3) {
            let at = rng.random_range(0..=tokens.len());
            tokens.insert(at, words.choose(rng).unwrap().clone());
        }
    }
    // weak surface cues
    if rng.random_bool(0.2) {
        let emo = if rng.random_bool(0.5) {
            POS_EMOTICONS
        } else {
            NEG_EMOTICONS
        };
        tokens.push(emo.choose(rng).unwrap().to_string());
    }
    if rng.random_bool(0.15) {
        tokens.insert(0, "#tag".to_string());
    }
    if rng.random_bool(0.1) {
        tokens.push("!!".to_string());
    }
    let label = if rng.random_bool(label_noise) {
        *Label::ALL.choose(rng).unwrap()
    } else {
        label
    };
    Tweet {
        id,
        text: tokens.join(" "),
        label: Some(label),
    }
}
