//! Averaged-perceptron part-of-speech tagger and per-post tag-count features.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::container::{ModelContainer, ModelKind, Persist};
use crate::error::{Error, Result};
use crate::textprep::Token;

pub const TAGSET: [&str; 36] = [
    "CC", "CD", "DT", "EX", "FW", "IN", "JJ", "JJR", "JJS", "LS", "MD", "NN", "NNS", "NNP", "NNPS", "PDT",
    "POS", "PRP", "PRP$", "RB", "RBR", "RBS", "RP", "SYM", "TO", "UH", "VB", "VBD", "VBG", "VBN", "VBP",
    "VBZ", "WDT", "WP", "WP$", "WRB",
];

pub const N_TAGS: usize = TAGSET.len();

pub fn tag_index(tag: &str) -> Option<usize> {
    TAGSET.iter().position(|t| *t == tag)
}

/// A sentence of (token, gold tag index) pairs.
pub type TaggedSentence = Vec<(String, usize)>;

/// Parses `token_TAG` pairs, one sentence per line. The tag is everything after
/// the last underscore.
pub fn parse_treebank(text: &str, source_name: &str) -> Result<Vec<TaggedSentence>> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut sent = Vec::new();
        for pair in line.split_whitespace() {
            let (tok, tag) = pair
                .rsplit_once('_')
                .filter(|(t, _)| !t.is_empty())
                .ok_or_else(|| Error::parse(source_name, idx + 1, format!("malformed pair `{pair}`")))?;
            let tag = tag_index(tag)
                .ok_or_else(|| Error::parse(source_name, idx + 1, format!("unknown tag `{tag}`")))?;
            sent.push((tok.to_string(), tag));
        }
        out.push(sent);
    }
    Ok(out)
}

fn normalize(word: &str) -> String {
    if word.chars().all(|c| c.is_ascii_digit() || c == '.' || c == ',') && word.chars().any(|c| c.is_ascii_digit()) {
        "!digits".to_string()
    } else {
        word.to_lowercase()
    }
}

fn shape(word: &str) -> String {
    let mut out = String::new();
    for c in word.chars() {
        let s = if c.is_uppercase() {
            'X'
        } else if c.is_lowercase() {
            'x'
        } else if c.is_numeric() {
            'd'
        } else {
            c
        };
        if !out.ends_with(s) {
            out.push(s);
        }
    }
    out
}

fn suffix(word: &str, n: usize) -> &str {
    let start = word.char_indices().rev().nth(n.saturating_sub(1)).map_or(0, |(i, _)| i);
    &word[start..]
}

/// Feature strings for position `i`. Words outside the training vocabulary back
/// off to bias, suffix, shape and previous-tag features.
fn features(words: &[String], raw: &[&str], i: usize, prev: &str, prev2: &str, known: bool) -> Vec<String> {
    let w = &words[i];
    let mut f = vec![
        "bias".to_string(),
        format!("suf2 {}", suffix(w, 2)),
        format!("suf3 {}", suffix(w, 3)),
        format!("shape {}", shape(raw[i])),
        format!("prev {prev}"),
    ];
    if !known {
        return f;
    }
    let at = |j: isize| -> &str {
        if j < 0 {
            "-start-"
        } else {
            words.get(j as usize).map_or("-end-", String::as_str)
        }
    };
    let i = i as isize;
    f.extend([
        format!("word {w}"),
        format!("pre1 {}", w.chars().next().unwrap_or(' ')),
        format!("prev2 {prev2}"),
        format!("prevs {prev} {prev2}"),
        format!("prevword {prev} {w}"),
        format!("w-1 {}", at(i - 1)),
        format!("suf-1 {}", suffix(at(i - 1), 3)),
        format!("w-2 {}", at(i - 2)),
        format!("w+1 {}", at(i + 1)),
        format!("suf+1 {}", suffix(at(i + 1), 3)),
        format!("w+2 {}", at(i + 2)),
    ]);
    f
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaggerModel {
    pub tagset: Vec<String>,
    weights: BTreeMap<String, Vec<f64>>,
    known: BTreeSet<String>,
}

impl TaggerModel {
    fn scores(&self, feats: &[String]) -> [f64; N_TAGS] {
        let mut s = [0.0; N_TAGS];
        for f in feats {
            if let Some(w) = self.weights.get(f) {
                for (acc, v) in s.iter_mut().zip(w) {
                    *acc += v;
                }
            }
        }
        s
    }

    /// Greedy left-to-right tagging. Ties go to the earlier tag in the tagset.
    pub fn tag(&self, words: &[&str]) -> Vec<usize> {
        let norm: Vec<String> = words.iter().map(|w| normalize(w)).collect();
        let (mut prev, mut prev2) = ("-start-".to_string(), "-start2-".to_string());
        let mut out = Vec::with_capacity(words.len());
        for i in 0..words.len() {
            let known = self.known.contains(&norm[i]);
            let s = self.scores(&features(&norm, words, i, &prev, &prev2, known));
            let best = argmax(&s);
            out.push(best);
            prev2 = std::mem::replace(&mut prev, TAGSET[best].to_string());
        }
        out
    }

    pub fn accuracy(&self, sentences: &[TaggedSentence]) -> f64 {
        let (mut right, mut total) = (0usize, 0usize);
        for sent in sentences {
            let words: Vec<&str> = sent.iter().map(|(w, _)| w.as_str()).collect();
            for (pred, (_, gold)) in self.tag(&words).into_iter().zip(sent) {
                right += usize::from(pred == *gold);
                total += 1;
            }
        }
        if total == 0 {
            0.0
        } else {
            right as f64 / total as f64
        }
    }

    pub fn is_zero(&self) -> bool {
        self.weights.values().flatten().all(|w| *w == 0.0)
    }
}

fn argmax(s: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in s.iter().enumerate() {
        if *v > s[best] {
            best = i;
        }
    }
    best
}

/// Trains an averaged perceptron. Sentences are visited in a seeded shuffled
/// order each epoch.
pub fn train_tagger(sentences: &[TaggedSentence], epochs: usize, seed: u64) -> Result<TaggerModel> {
    if sentences.iter().all(|s| s.is_empty()) {
        return Err(Error::Training("tagger training corpus is empty".into()));
    }
    if let Some(bad) = sentences.iter().flatten().find(|(_, t)| *t >= N_TAGS) {
        return Err(Error::Validation(format!("tag index {} out of range", bad.1)));
    }
    let known: BTreeSet<String> = sentences.iter().flatten().map(|(w, _)| normalize(w)).collect();
    let mut model = TaggerModel {
        tagset: TAGSET.iter().map(|s| s.to_string()).collect(),
        weights: BTreeMap::new(),
        known,
    };
    let mut totals: HashMap<String, [f64; N_TAGS]> = HashMap::new();
    let mut stamps: HashMap<String, [u64; N_TAGS]> = HashMap::new();
    let mut clock: u64 = 0;
    let mut order: Vec<usize> = (0..sentences.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    for _ in 0..epochs {
        order.shuffle(&mut rng);
        for &si in &order {
            let sent = &sentences[si];
            let raw: Vec<&str> = sent.iter().map(|(w, _)| w.as_str()).collect();
            let norm: Vec<String> = raw.iter().map(|w| normalize(w)).collect();
            let (mut prev, mut prev2) = ("-start-".to_string(), "-start2-".to_string());
            for i in 0..sent.len() {
                clock += 1;
                let feats = features(&norm, &raw, i, &prev, &prev2, true);
                let guess = argmax(&model.scores(&feats));
                let gold = sent[i].1;
                if guess != gold {
                    for f in &feats {
                        let w = model.weights.entry(f.clone()).or_insert_with(|| vec![0.0; N_TAGS]);
                        let tot = totals.entry(f.clone()).or_insert([0.0; N_TAGS]);
                        let st = stamps.entry(f.clone()).or_insert([0; N_TAGS]);
                        for (tag, delta) in [(gold, 1.0), (guess, -1.0)] {
                            tot[tag] += (clock - st[tag]) as f64 * w[tag];
                            st[tag] = clock;
                            w[tag] += delta;
                        }
                    }
                }
                prev2 = std::mem::replace(&mut prev, TAGSET[gold].to_string());
            }
        }
    }

    if clock > 0 {
        for (f, w) in model.weights.iter_mut() {
            let tot = totals.get(f).copied().unwrap_or([0.0; N_TAGS]);
            let st = stamps.get(f).copied().unwrap_or([0; N_TAGS]);
            for tag in 0..N_TAGS {
                let total = tot[tag] + (clock - st[tag]) as f64 * w[tag];
                w[tag] = total / clock as f64;
            }
        }
    }
    model.weights.retain(|_, w| w.iter().any(|v| *v != 0.0));
    Ok(model)
}

impl Persist for TaggerModel {
    fn to_container(&self) -> Result<ModelContainer> {
        let mut c = ModelContainer::new(ModelKind::Tagger, &self.tagset)?;
        c.push_json("known", &self.known)?;
        c.push_json("features", &self.weights.keys().collect::<Vec<_>>())?;
        let flat: Vec<f64> = self.weights.values().flatten().copied().collect();
        c.push_f64s("weights", &flat);
        Ok(c)
    }

    fn from_container(c: &ModelContainer) -> Result<TaggerModel> {
        c.expect_kind(ModelKind::Tagger)?;
        let tagset: Vec<String> = c.config()?;
        if tagset.iter().map(String::as_str).ne(TAGSET) {
            return Err(Error::Container("tagger was trained on a different tagset".into()));
        }
        let names: Vec<String> = c.json("features")?;
        let flat = c.f64s("weights")?;
        if flat.len() != names.len() * N_TAGS {
            return Err(Error::Container("tagger weight blob has the wrong length".into()));
        }
        let weights = names.into_iter().zip(flat.chunks(N_TAGS).map(<[f64]>::to_vec)).collect();
        Ok(TaggerModel {
            tagset,
            weights,
            known: c.json("known")?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PosFeatureRow {
    pub tag_counts: [u32; N_TAGS],
    pub first_person_count: u32,
}

/// Tags every token of the stream (which should be the stream before stop-word
/// removal) and counts tags and first-person pronouns.
pub fn pos_features(stream: &[Token], model: &TaggerModel) -> PosFeatureRow {
    let words: Vec<&str> = stream.iter().map(|t| t.surface.as_str()).collect();
    let mut tag_counts = [0u32; N_TAGS];
    for t in model.tag(&words) {
        tag_counts[t] += 1;
    }
    PosFeatureRow {
        tag_counts,
        first_person_count: stream.iter().filter(|t| t.is_first_person).count() as u32,
    }
}
