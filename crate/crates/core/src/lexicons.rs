//! Word lists and intensity maps, the emotion / 3ST / suicide-keyword count
//! features, and nearest-neighbour dictionary construction from word embeddings.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textprep::Token;

/// Emotion feature slots. Categorical tags first, then the intensity-only tags;
/// `anger`, `joy` and `disgust` merge a categorical list with an intensity map,
/// while fear and sadness keep a separate intensity slot.
pub const DEFAULT_EMOTION_ROSTER: [&str; 17] = [
    "contentment",
    "pride",
    "fear",
    "anxiety",
    "sadness",
    "disgust",
    "relief",
    "shame",
    "anger",
    "interest",
    "agreeableness",
    "joy",
    "anticipation",
    "surprise",
    "trust",
    "fear_intensity",
    "sadness_intensity",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LexiconKind {
    WordSet,
    WordScoreMap,
}

impl std::str::FromStr for LexiconKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<LexiconKind> {
        match s {
            "word_set" => Ok(LexiconKind::WordSet),
            "word_score_map" => Ok(LexiconKind::WordScoreMap),
            other => Err(Error::Config(format!("unknown lexicon kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon {
    pub name: String,
    pub kind: LexiconKind,
    entries: BTreeMap<String, Option<f64>>,
}

/// Why a word cannot be a lexicon entry, or `None` if it can.
pub fn word_violation(word: &str) -> Option<&'static str> {
    if word.is_empty() {
        Some("empty word")
    } else if word.contains('-') {
        Some("hyphenated word")
    } else if !word.chars().all(char::is_alphabetic) {
        Some("non-alphabetic characters")
    } else if word.chars().any(char::is_uppercase) {
        Some("not lower-case")
    } else {
        None
    }
}

impl Lexicon {
    /// Parses a word_set (one word per line) or word_score_map (`word<ws>score`)
    /// file. Blank lines and `#` comments are skipped. All violations are
    /// reported together.
    pub fn parse(name: &str, text: &str, kind: LexiconKind) -> Result<Lexicon> {
        let mut entries = BTreeMap::new();
        let mut problems = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let lineno = idx + 1;
            let fields: Vec<&str> = line.split_whitespace().collect();
            let (word, score) = match (kind, fields.as_slice()) {
                (LexiconKind::WordSet, [w]) => (*w, None),
                (LexiconKind::WordScoreMap, [w, s]) => match s.parse::<f64>() {
                    Ok(v) if (0.0..=1.0).contains(&v) => (*w, Some(v)),
                    Ok(v) => {
                        problems.push(format!("line {lineno}: score {v} outside [0,1]"));
                        continue;
                    }
                    Err(_) => {
                        problems.push(format!("line {lineno}: unparsable score `{s}`"));
                        continue;
                    }
                },
                _ => {
                    problems.push(format!("line {lineno}: wrong number of fields"));
                    continue;
                }
            };
            if let Some(reason) = word_violation(word) {
                problems.push(format!("line {lineno}: `{word}`: {reason}"));
                continue;
            }
            if entries.insert(word.to_string(), score).is_some() {
                problems.push(format!("line {lineno}: duplicate word `{word}`"));
            }
        }
        if !problems.is_empty() {
            return Err(Error::Validation(format!("lexicon `{name}`: {}", problems.join("; "))));
        }
        Ok(Lexicon {
            name: name.to_string(),
            kind,
            entries,
        })
    }

    pub fn from_words<I, S>(name: &str, words: I) -> Result<Lexicon>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let text: Vec<String> = words.into_iter().map(|w| w.as_ref().to_string()).collect();
        Lexicon::parse(name, &text.join("\n"), LexiconKind::WordSet)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.entries.contains_key(word)
    }

    pub fn score(&self, word: &str) -> Option<f64> {
        self.entries.get(word).copied().flatten()
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Matches on the token lemma first, then on the lower-cased surface.
    /// Returns the entry's score (1.0 for word sets).
    pub fn match_token(&self, tok: &Token) -> Option<f64> {
        self.entries
            .get(&tok.lemma)
            .or_else(|| self.entries.get(&tok.lower))
            .map(|s| s.unwrap_or(1.0))
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (w, s) in &self.entries {
            match s {
                Some(v) => out.push_str(&format!("{w}\t{v}\n")),
                None => {
                    out.push_str(w);
                    out.push('\n');
                }
            }
        }
        out
    }
}

pub fn load_lexicon(path: impl AsRef<Path>, kind: LexiconKind) -> Result<Lexicon> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Lexicon::parse(&name, &text, kind)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntensityAggregation {
    #[default]
    Sum,
    Mean,
}

#[derive(Debug, Clone)]
pub struct EmotionSlot {
    pub name: String,
    pub lexicons: Vec<Lexicon>,
}

#[derive(Debug, Clone)]
pub struct EmotionBundle {
    slots: Vec<EmotionSlot>,
    pub aggregation: IntensityAggregation,
}

impl EmotionBundle {
    pub fn new(slots: Vec<EmotionSlot>) -> EmotionBundle {
        EmotionBundle {
            slots,
            aggregation: IntensityAggregation::Sum,
        }
    }

    /// Builds the bundle from a manifest of `slot<TAB>path<TAB>kind` lines. A slot
    /// may list several lexicons, whose contributions are added. `load` resolves a
    /// manifest path to file contents. Every roster tag must be present.
    pub fn from_manifest<F>(manifest: &str, roster: &[String], mut load: F) -> Result<EmotionBundle>
    where
        F: FnMut(&str) -> Result<String>,
    {
        let mut listed: BTreeMap<String, Vec<Lexicon>> = BTreeMap::new();
        for (idx, raw) in manifest.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
            let [slot, rel, kind] = fields.as_slice() else {
                return Err(Error::parse("emotion manifest", idx + 1, "expected slot, path and kind"));
            };
            let kind: LexiconKind = kind.parse()?;
            let name = Path::new(rel)
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| slot.to_string());
            let lex = Lexicon::parse(&name, &load(rel)?, kind)?;
            listed.entry(slot.to_string()).or_default().push(lex);
        }
        let mut slots = Vec::with_capacity(roster.len());
        for tag in roster {
            let lexicons = listed.remove(tag).ok_or_else(|| {
                Error::Config(format!("emotion bundle has no lexicon for tag `{tag}`"))
            })?;
            slots.push(EmotionSlot {
                name: tag.clone(),
                lexicons,
            });
        }
        for extra in listed.keys() {
            log::warn!("emotion manifest slot `{extra}` is not in the roster and is ignored");
        }
        Ok(EmotionBundle::new(slots))
    }

    pub fn slots(&self) -> &[EmotionSlot] {
        &self.slots
    }

    pub fn slot_names(&self) -> Vec<&str> {
        self.slots.iter().map(|s| s.name.as_str()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmotionFeatureRow {
    pub values: Vec<f64>,
}

/// Word sets contribute match counts; score maps contribute summed (or mean)
/// intensities of the matching tokens.
pub fn emotion_features(stream: &[Token], bundle: &EmotionBundle) -> EmotionFeatureRow {
    let values = bundle
        .slots
        .iter()
        .map(|slot| {
            slot.lexicons
                .iter()
                .map(|lex| {
                    let (mut total, mut hits) = (0.0, 0usize);
                    for tok in stream {
                        if let Some(score) = lex.match_token(tok) {
                            total += score;
                            hits += 1;
                        }
                    }
                    match (lex.kind, bundle.aggregation) {
                        (LexiconKind::WordScoreMap, IntensityAggregation::Mean) if hits > 0 => {
                            total / hits as f64
                        }
                        _ => total,
                    }
                })
                .sum()
        })
        .collect();
    EmotionFeatureRow { values }
}

#[derive(Debug, Clone)]
pub struct TstDictionaries {
    pub gloom_burden: Lexicon,
    pub violence: Lexicon,
    pub hurt: Lexicon,
    pub shame: Lexicon,
    pub suicide: Lexicon,
}

impl TstDictionaries {
    pub fn all(&self) -> [&Lexicon; 5] {
        [&self.gloom_burden, &self.violence, &self.hurt, &self.shame, &self.suicide]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TstFeatureRow {
    pub gloom_burden: u32,
    pub violence: u32,
    pub hurt: u32,
    pub shame: u32,
    pub suicide_keywords: u32,
}

impl TstFeatureRow {
    pub fn as_array(&self) -> [u32; 5] {
        [self.gloom_burden, self.violence, self.hurt, self.shame, self.suicide_keywords]
    }
}

impl std::ops::Add for TstFeatureRow {
    type Output = TstFeatureRow;

    fn add(self, o: TstFeatureRow) -> TstFeatureRow {
        TstFeatureRow {
            gloom_burden: self.gloom_burden + o.gloom_burden,
            violence: self.violence + o.violence,
            hurt: self.hurt + o.hurt,
            shame: self.shame + o.shame,
            suicide_keywords: self.suicide_keywords + o.suicide_keywords,
        }
    }
}

pub fn tst_features(stream: &[Token], dicts: &TstDictionaries) -> TstFeatureRow {
    let count = |lex: &Lexicon| stream.iter().filter(|t| lex.match_token(t).is_some()).count() as u32;
    TstFeatureRow {
        gloom_burden: count(&dicts.gloom_burden),
        violence: count(&dicts.violence),
        hurt: count(&dicts.hurt),
        shame: count(&dicts.shame),
        suicide_keywords: count(&dicts.suicide),
    }
}

/// A read-only word embedding table.
pub trait WordEmbeddings {
    fn words(&self) -> &[String];
    fn vector(&self, index: usize) -> &[f64];

    fn index_of(&self, word: &str) -> Option<usize> {
        self.words().iter().position(|w| w == word)
    }
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Indices of the `k` cosine-nearest neighbours of `index`, excluding itself.
/// Ties are broken by vocabulary order.
pub fn nearest_neighbors<E: WordEmbeddings + ?Sized>(emb: &E, index: usize, k: usize) -> Vec<usize> {
    let query = emb.vector(index);
    let mut scored: Vec<(f64, usize)> = (0..emb.words().len())
        .filter(|&j| j != index)
        .map(|j| (cosine(query, emb.vector(j)), j))
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    scored.into_iter().take(k).map(|(_, j)| j).collect()
}

/// Union of the `k` nearest neighbours of every seed, cleaned of stop-words,
/// hyphenated or non-alphabetic tokens and case duplicates.
pub fn build_3st_dictionary<E: WordEmbeddings + ?Sized>(
    name: &str,
    emb: &E,
    seeds: &[&str],
    k: usize,
    stopwords: &HashSet<String>,
) -> Result<Lexicon> {
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    let mut seed_idx = Vec::with_capacity(seeds.len());
    for seed in seeds {
        let idx = emb
            .index_of(seed)
            .ok_or_else(|| Error::OutOfVocabulary(format!("seed word `{seed}`")))?;
        seed_idx.push(idx);
    }
    let mut kept = std::collections::BTreeSet::new();
    for idx in seed_idx {
        for j in nearest_neighbors(emb, idx, k) {
            let word = emb.words()[j].to_lowercase();
            if stopwords.contains(&word) || word_violation(&word).is_some() {
                continue;
            }
            kept.insert(word);
        }
    }
    Lexicon::from_words(name, kept)
}
