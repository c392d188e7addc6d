use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Corpus, Label, Post, Task, UserRecord};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_risk: usize,
    pub n_control: usize,
    /// Inclusive range of posts per user.
    pub posts_min: usize,
    pub posts_max: usize,
    /// Probability that a word slot in a risk user's post is filled from the risk lexicons.
    pub signal: f64,
    pub seed: u64,
    pub task: Task,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_risk: 50,
            n_control: 50,
            posts_min: 5,
            posts_max: 15,
            signal: 0.5,
            seed: 0,
            task: Task::ThirtyDay,
        }
    }
}

/// Word pools for the generator: risk words come from the suicide, 3ST and
/// negative-emotion lexicons; neutral words are everyday vocabulary.
#[derive(Debug, Clone)]
pub struct SynthVocabulary {
    pub risk: Vec<String>,
    pub neutral: Vec<String>,
}

const PRONOUNS: [&str; 6] = ["i", "me", "my", "you", "we", "they"];
const ENDINGS: [&str; 3] = [".", "!", "?"];
const EXTRAS: [&str; 4] = ["https://t.co/x1y2z3", "@friend", "\u{1F622}", "\u{1F602}"];

/// Generates a labeled corpus whose risk users carry lexicon vocabulary at rate
/// `signal`. With `signal = 0` both classes are drawn from the same distribution.
pub fn generate_synthetic(config: &SynthConfig, vocab: &SynthVocabulary) -> Result<Corpus> {
    if vocab.risk.is_empty() || vocab.neutral.is_empty() {
        return Err(Error::Config("synthetic generator needs non-empty risk and neutral vocabularies".into()));
    }
    if config.n_risk == 0 || config.n_control == 0 {
        return Err(Error::Config("n_risk and n_control must be at least 1".into()));
    }
    if config.posts_min == 0 || config.posts_min > config.posts_max {
        return Err(Error::Config(format!(
            "invalid posts-per-user range {}..={}",
            config.posts_min, config.posts_max
        )));
    }
    if !(0.0..=1.0).contains(&config.signal) {
        return Err(Error::Config(format!("signal must lie in [0,1], got {}", config.signal)));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut labels: Vec<Label> = std::iter::repeat_n(Label::Risk, config.n_risk)
        .chain(std::iter::repeat_n(Label::Control, config.n_control))
        .collect();
    // ids are assigned after shuffling so they carry no label information
    labels.shuffle(&mut rng);

    let mut users = Vec::with_capacity(labels.len());
    for (idx, label) in labels.into_iter().enumerate() {
        let user_id = format!("syn{idx:05}");
        let n_posts = rng.random_range(config.posts_min..=config.posts_max);
        let mut timestamp: i64 = rng.random_range(1_500_000_000..1_600_000_000);
        let signal = if label.is_risk() { config.signal } else { 0.0 };
        let mut posts = Vec::with_capacity(n_posts);
        for p in 0..n_posts {
            timestamp += rng.random_range(3_600..259_200);
            posts.push(Post {
                post_id: format!("{user_id}-{p}"),
                timestamp,
                text: post_text(&mut rng, vocab, signal),
            });
        }
        users.push(UserRecord {
            user_id,
            label,
            posts,
        });
    }
    Corpus::new(config.task, users)
}

fn post_text(rng: &mut ChaCha8Rng, vocab: &SynthVocabulary, signal: f64) -> String {
    let n_sentences = rng.random_range(1..=3);
    let mut sentences = Vec::with_capacity(n_sentences);
    for _ in 0..n_sentences {
        let n_words = rng.random_range(5..=12);
        let mut words: Vec<&str> = Vec::with_capacity(n_words + 1);
        for _ in 0..n_words {
            let roll: f64 = rng.random();
            let word = if roll < 0.08 {
                PRONOUNS.choose(rng).copied().unwrap()
            } else if rng.random::<f64>() < signal {
                vocab.risk.choose(rng).unwrap().as_str()
            } else {
                vocab.neutral.choose(rng).unwrap().as_str()
            };
            words.push(word);
        }
        if rng.random::<f64>() < 0.05 {
            words.push(EXTRAS.choose(rng).copied().unwrap());
        }
        let mut sentence = capitalize(&words.join(" "));
        sentence.push_str(ENDINGS.choose(rng).unwrap());
        sentences.push(sentence);
    }
    sentences.join(" ")
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}
