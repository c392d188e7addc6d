//! Lexical resources shipped with the crate, or loaded from a directory with the
//! same layout as `data/`.

use std::fs;
use std::path::{Path, PathBuf};

use crate::corpus::SynthVocabulary;
use crate::error::{Error, Result};
use crate::lexicons::{EmotionBundle, Lexicon, LexiconKind, TstDictionaries, DEFAULT_EMOTION_ROSTER};
use crate::textprep::{Lemmatizer, Preprocessor};

macro_rules! bundled {
    ($($path:literal),* $(,)?) => {
        &[$(($path, include_str!(concat!("../data/", $path)))),*]
    };
}

static BUNDLED: &[(&str, &str)] = bundled!(
    "stopwords.txt",
    "lemma_rules.txt",
    "neutral_vocab.txt",
    "mini_treebank.txt",
    "lexicons/emotion_manifest.tsv",
    "lexicons/suicide.txt",
    "lexicons/tst/gloom_burden.txt",
    "lexicons/tst/violence.txt",
    "lexicons/tst/hurt.txt",
    "lexicons/tst/shame.txt",
    "lexicons/emotion/contentment.txt",
    "lexicons/emotion/pride.txt",
    "lexicons/emotion/fear.txt",
    "lexicons/emotion/anxiety.txt",
    "lexicons/emotion/sadness.txt",
    "lexicons/emotion/disgust.txt",
    "lexicons/emotion/relief.txt",
    "lexicons/emotion/shame.txt",
    "lexicons/emotion/anger.txt",
    "lexicons/emotion/interest.txt",
    "lexicons/emotion/agreeableness.txt",
    "lexicons/emotion/joy.txt",
    "lexicons/intensity/anger.tsv",
    "lexicons/intensity/anticipation.tsv",
    "lexicons/intensity/disgust.tsv",
    "lexicons/intensity/fear.tsv",
    "lexicons/intensity/joy.tsv",
    "lexicons/intensity/sadness.tsv",
    "lexicons/intensity/surprise.tsv",
    "lexicons/intensity/trust.tsv",
);

/// Emotion lexicons whose words also feed the synthetic risk vocabulary.
const NEGATIVE_EMOTIONS: [&str; 6] = ["fear", "anxiety", "sadness", "disgust", "shame", "anger"];

enum Source {
    Bundled,
    Dir(PathBuf),
}

impl Source {
    fn read(&self, rel: &str) -> Result<String> {
        match self {
            Source::Bundled => BUNDLED
                .iter()
                .find(|(p, _)| *p == rel)
                .map(|(_, text)| text.to_string())
                .ok_or_else(|| Error::Config(format!("no bundled resource `{rel}`"))),
            Source::Dir(dir) => {
                let path = dir.join(rel);
                fs::read_to_string(&path).map_err(|e| {
                    Error::Config(format!("cannot read resource {}: {e}", path.display()))
                })
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Resources {
    pub preprocessor: Preprocessor,
    pub emotions: EmotionBundle,
    pub tst: TstDictionaries,
    pub neutral_vocab: Vec<String>,
    pub treebank: String,
}

impl Resources {
    pub fn bundled() -> Result<Resources> {
        Resources::load(&Source::Bundled)
    }

    pub fn from_dir(dir: impl AsRef<Path>) -> Result<Resources> {
        let dir = dir.as_ref();
        if !dir.is_dir() {
            return Err(Error::Config(format!("resource directory {} does not exist", dir.display())));
        }
        Resources::load(&Source::Dir(dir.to_path_buf()))
    }

    pub fn from_optional_dir(dir: Option<&Path>) -> Result<Resources> {
        match dir {
            Some(d) => Resources::from_dir(d),
            None => Resources::bundled(),
        }
    }

    fn load(src: &Source) -> Result<Resources> {
        let stopwords = Preprocessor::parse_stopwords(&src.read("stopwords.txt")?);
        let lemmatizer = Lemmatizer::parse(&src.read("lemma_rules.txt")?, "lemma_rules.txt")?;
        let word_set = |rel: &str, name: &str| -> Result<Lexicon> {
            Lexicon::parse(name, &src.read(rel)?, LexiconKind::WordSet)
        };
        let tst = TstDictionaries {
            gloom_burden: word_set("lexicons/tst/gloom_burden.txt", "gloom_burden")?,
            violence: word_set("lexicons/tst/violence.txt", "violence")?,
            hurt: word_set("lexicons/tst/hurt.txt", "hurt")?,
            shame: word_set("lexicons/tst/shame.txt", "shame")?,
            suicide: word_set("lexicons/suicide.txt", "suicide")?,
        };
        let manifest = src.read("lexicons/emotion_manifest.tsv")?;
        let roster: Vec<String> = DEFAULT_EMOTION_ROSTER.iter().map(|s| s.to_string()).collect();
        let emotions = EmotionBundle::from_manifest(&manifest, &roster, |rel| {
            src.read(&format!("lexicons/{rel}"))
        })?;
        let neutral_vocab = src
            .read("neutral_vocab.txt")?
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(String::from)
            .collect();
        Ok(Resources {
            preprocessor: Preprocessor::new(stopwords, lemmatizer),
            emotions,
            tst,
            neutral_vocab,
            treebank: src.read("mini_treebank.txt")?,
        })
    }

    /// Risk vocabulary = suicide keywords, the four 3ST dictionaries and the
    /// negative-emotion lexicons; neutral vocabulary is the bundled word list.
    pub fn synth_vocabulary(&self) -> SynthVocabulary {
        let mut risk: Vec<String> = self
            .tst
            .all()
            .iter()
            .flat_map(|lex| lex.words().map(String::from).collect::<Vec<_>>())
            .collect();
        for slot in self.emotions.slots() {
            let base = slot.name.trim_end_matches("_intensity");
            if NEGATIVE_EMOTIONS.contains(&base) {
                for lex in &slot.lexicons {
                    risk.extend(lex.words().map(String::from));
                }
            }
        }
        risk.sort();
        risk.dedup();
        SynthVocabulary {
            risk,
            neutral: self.neutral_vocab.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_resources_load() {
        let r = Resources::bundled().unwrap();
        assert_eq!(r.emotions.slots().len(), 17);
        assert!(r.preprocessor.is_stopword("the"));
        assert!(r.treebank.lines().count() >= 500);
        let v = r.synth_vocabulary();
        assert!(v.risk.len() > 100);
        assert!(v.neutral.len() > 100);
    }

    #[test]
    fn missing_dir_is_an_error() {
        assert!(Resources::from_dir("/definitely/not/here").is_err());
    }

    #[test]
    fn dir_layout_matches_bundle() {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
        let r = Resources::from_dir(&dir).unwrap();
        let b = Resources::bundled().unwrap();
        assert_eq!(r.neutral_vocab, b.neutral_vocab);
        assert_eq!(r.emotions.slots().len(), b.emotions.slots().len());
    }
}
