//! Tokenization, stop-word flagging, rule-based lemmatization and segment chunking.

use std::collections::{HashMap, HashSet};

use crate::corpus::UserRecord;
use crate::error::{Error, Result};

pub const FIRST_PERSON: [&str; 5] = ["i", "me", "my", "mine", "myself"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub surface: String,
    pub lower: String,
    pub lemma: String,
    pub is_stopword: bool,
    pub is_first_person: bool,
}

impl Token {
    pub fn new(surface: &str) -> Token {
        let lower = surface.to_lowercase();
        let is_first_person = FIRST_PERSON.contains(&lower.as_str());
        Token {
            surface: surface.to_string(),
            lemma: lower.clone(),
            lower,
            is_stopword: false,
            is_first_person,
        }
    }

    /// Punctuation tokens contain no alphanumeric character and no emoji.
    pub fn is_punctuation(&self) -> bool {
        !self.surface.chars().any(|c| c.is_alphanumeric() || is_emoji(c))
    }
}

pub type TokenStream = Vec<Token>;

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

fn is_apostrophe(c: char) -> bool {
    c == '\'' || c == '\u{2019}'
}

pub(crate) fn is_emoji(c: char) -> bool {
    matches!(c as u32,
        0x1F000..=0x1FAFF | 0x2600..=0x27BF | 0x2B00..=0x2BFF | 0x2300..=0x23FF)
}

fn is_emoji_modifier(c: char) -> bool {
    matches!(c as u32, 0xFE0F | 0x1F3FB..=0x1F3FF)
}

const URL_TRAILING: &[char] = &['.', ',', '!', '?', ';', ':', ')', ']', '}', '\'', '"'];

/// Splits text into word, URL, @-mention, emoji and single-character punctuation tokens.
/// Internal apostrophes stay inside words ("don't").
pub fn tokenize(text: &str) -> TokenStream {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if starts_url(&chars[i..]) {
            let mut end = i;
            while end < chars.len() && !chars[end].is_whitespace() {
                end += 1;
            }
            let mut url_end = end;
            while url_end > i && URL_TRAILING.contains(&chars[url_end - 1]) {
                url_end -= 1;
            }
            tokens.push(Token::new(&chars[i..url_end].iter().collect::<String>()));
            for &p in &chars[url_end..end] {
                tokens.push(Token::new(&p.to_string()));
            }
            i = end;
        } else if c == '@' && chars.get(i + 1).is_some_and(|&n| is_word_char(n)) {
            let mut end = i + 1;
            while end < chars.len() && is_word_char(chars[end]) {
                end += 1;
            }
            tokens.push(Token::new(&chars[i..end].iter().collect::<String>()));
            i = end;
        } else if is_word_char(c) {
            let mut end = i;
            loop {
                while end < chars.len() && is_word_char(chars[end]) {
                    end += 1;
                }
                if end + 1 < chars.len() && is_apostrophe(chars[end]) && is_word_char(chars[end + 1]) {
                    end += 1;
                } else {
                    break;
                }
            }
            tokens.push(Token::new(&chars[i..end].iter().collect::<String>()));
            i = end;
        } else if is_emoji(c) {
            let mut end = i + 1;
            loop {
                while end < chars.len() && is_emoji_modifier(chars[end]) {
                    end += 1;
                }
                if end + 1 < chars.len() && chars[end] == '\u{200D}' && is_emoji(chars[end + 1]) {
                    end += 2;
                } else {
                    break;
                }
            }
            tokens.push(Token::new(&chars[i..end].iter().collect::<String>()));
            i = end;
        } else {
            tokens.push(Token::new(&c.to_string()));
            i += 1;
        }
    }
    tokens
}

fn starts_url(chars: &[char]) -> bool {
    let prefix: String = chars.iter().take(8).collect::<String>().to_lowercase();
    prefix.starts_with("http://") || prefix.starts_with("https://") || prefix.starts_with("www.")
}

#[derive(Debug, Clone)]
struct SuffixRule {
    suffix: String,
    replacement: String,
    min_stem: usize,
    undouble: bool,
}

/// Deterministic suffix-stripping lemmatizer driven by a rule table
/// (see `data/lemma_rules.txt` for the format).
#[derive(Debug, Clone, Default)]
pub struct Lemmatizer {
    irregular: HashMap<String, String>,
    keep: Vec<String>,
    rules: Vec<SuffixRule>,
}

impl Lemmatizer {
    pub fn parse(text: &str, source_name: &str) -> Result<Lemmatizer> {
        let mut lem = Lemmatizer::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let bad = |msg: &str| Error::parse(source_name, idx + 1, msg.to_string());
            match fields.as_slice() {
                ["irr", form, lemma] => {
                    lem.irregular.insert(form.to_string(), lemma.to_string());
                }
                ["keep", suffix] => lem.keep.push(suffix.to_string()),
                ["suf", suffix, repl, min_stem, rest @ ..] => {
                    let min_stem = min_stem.parse().map_err(|_| bad("min_stem must be an integer"))?;
                    let undouble = match rest {
                        [] => false,
                        ["undouble"] => true,
                        _ => return Err(bad("unexpected trailing fields")),
                    };
                    lem.rules.push(SuffixRule {
                        suffix: suffix.to_string(),
                        replacement: if *repl == "-" { String::new() } else { repl.to_string() },
                        min_stem,
                        undouble,
                    });
                }
                _ => return Err(bad("expected `irr`, `keep` or `suf` rule")),
            }
        }
        Ok(lem)
    }

    /// Lemmatizes a lower-cased word. Non-alphabetic words pass through unchanged.
    pub fn lemmatize(&self, lower: &str) -> String {
        if let Some(lemma) = self.irregular.get(lower) {
            return lemma.clone();
        }
        if !lower.chars().all(|c| c.is_alphabetic()) {
            return lower.to_string();
        }
        if self.keep.iter().any(|k| lower.ends_with(k.as_str())) {
            return lower.to_string();
        }
        for rule in &self.rules {
            if let Some(stem) = lower.strip_suffix(rule.suffix.as_str()) {
                if stem.chars().count() < rule.min_stem {
                    continue;
                }
                let mut out = stem.to_string();
                if rule.undouble {
                    undouble(&mut out);
                }
                out.push_str(&rule.replacement);
                return out;
            }
        }
        lower.to_string()
    }
}

fn undouble(stem: &mut String) {
    let chars: Vec<char> = stem.chars().collect();
    if let [.., a, b] = chars.as_slice() {
        if a == b && !"aeioulsz".contains(*b) {
            stem.pop();
        }
    }
}

#[derive(Debug, Clone)]
pub struct Preprocessor {
    stopwords: HashSet<String>,
    lemmatizer: Lemmatizer,
}

impl Preprocessor {
    pub fn new(stopwords: HashSet<String>, lemmatizer: Lemmatizer) -> Preprocessor {
        Preprocessor { stopwords, lemmatizer }
    }

    pub fn parse_stopwords(text: &str) -> HashSet<String> {
        text.lines()
            .map(|l| l.trim().to_lowercase())
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .collect()
    }

    pub fn is_stopword(&self, lower: &str) -> bool {
        self.stopwords.contains(lower)
    }

    pub fn stopwords(&self) -> &HashSet<String> {
        &self.stopwords
    }

    pub fn lemmatizer(&self) -> &Lemmatizer {
        &self.lemmatizer
    }

    /// Flags stop-words, optionally drops them, and optionally fills `lemma`.
    /// First-person pronouns are never dropped, so pronoun counts survive either
    /// setting. Every field is recomputed from `lower`, which makes this idempotent.
    pub fn preprocess(&self, stream: &[Token], remove_stopwords: bool, lemmatize: bool) -> TokenStream {
        stream
            .iter()
            .filter_map(|tok| {
                let is_stopword = self.stopwords.contains(&tok.lower);
                if remove_stopwords && is_stopword && !tok.is_first_person {
                    return None;
                }
                let lemma = if lemmatize {
                    self.lemmatizer.lemmatize(&tok.lower)
                } else {
                    tok.lower.clone()
                };
                Some(Token {
                    surface: tok.surface.clone(),
                    lower: tok.lower.clone(),
                    lemma,
                    is_stopword,
                    is_first_person: tok.is_first_person,
                })
            })
            .collect()
    }

    /// Token strings used for document embeddings: stop-words removed, lemmatized,
    /// punctuation dropped.
    pub fn doc_tokens(&self, text: &str, lowercase: bool) -> Vec<String> {
        self.preprocess(&tokenize(text), true, true)
            .into_iter()
            .filter(|t| !t.is_punctuation())
            .map(|t| {
                if lowercase || t.lemma != t.lower {
                    t.lemma
                } else {
                    t.surface
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChunkingConfig {
    pub segment_len: usize,
    pub lowercase: bool,
}

impl Default for ChunkingConfig {
    fn default() -> Self {
        ChunkingConfig {
            segment_len: 150,
            lowercase: true,
        }
    }
}

/// Concatenates a user's preprocessed posts in timestamp order and cuts the result
/// into consecutive segments of `segment_len` tokens; the last one may be shorter.
/// Returns an empty list when no token survives preprocessing.
pub fn chunk_user(user: &UserRecord, cfg: &ChunkingConfig, prep: &Preprocessor) -> Result<Vec<Vec<String>>> {
    if cfg.segment_len == 0 {
        return Err(Error::Config("segment_len must be at least 1".into()));
    }
    let tokens: Vec<String> = user
        .posts
        .iter()
        .flat_map(|p| prep.doc_tokens(&p.text, cfg.lowercase))
        .collect();
    Ok(tokens.chunks(cfg.segment_len).map(|c| c.to_vec()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Label, Post};
    use crate::resources::Resources;

    fn surfaces(s: &TokenStream) -> Vec<&str> {
        s.iter().map(|t| t.surface.as_str()).collect()
    }

    fn prep() -> Preprocessor {
        Resources::bundled().unwrap().preprocessor
    }

    #[test]
    fn tokenizes_with_pronoun_flags() {
        let s = tokenize("I hurt myself.");
        assert_eq!(surfaces(&s), ["I", "hurt", "myself", "."]);
        let flags: Vec<bool> = s.iter().map(|t| t.is_first_person).collect();
        assert_eq!(flags, [true, false, true, false]);
    }

    #[test]
    fn empty_text() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("   \n\t").is_empty());
    }

    #[test]
    fn keeps_urls_mentions_and_emoji() {
        assert_eq!(surfaces(&tokenize("check https://a.b now")), ["check", "https://a.b", "now"]);
        assert_eq!(
            surfaces(&tokenize("see www.x.org/p?q=1). @sam_2 \u{1F622}\u{1F622}")),
            ["see", "www.x.org/p?q=1", ")", ".", "@sam_2", "\u{1F622}", "\u{1F622}"]
        );
        assert_eq!(surfaces(&tokenize("don't stop")), ["don't", "stop"]);
    }

    #[test]
    fn stopwords_and_lemmas() {
        let p = prep();
        let stream: TokenStream = ["the", "cats", "were", "running"].iter().map(|w| Token::new(w)).collect();
        let out = p.preprocess(&stream, true, true);
        let lemmas: Vec<&str> = out.iter().map(|t| t.lemma.as_str()).collect();
        assert_eq!(lemmas, ["cat", "run"]);
    }

    #[test]
    fn lemma_rules_by_hand() {
        let lem = prep().lemmatizer().clone();
        let cases = [
            ("cats", "cat"),
            ("running", "run"),
            ("hurting", "hurt"),
            ("feeling", "feel"),
            ("cries", "cry"),
            ("cried", "cry"),
            ("wishes", "wish"),
            ("classes", "class"),
            ("class", "class"),
            ("went", "go"),
            ("falling", "fall"),
            ("is", "be"),
            ("gas", "gas"),
            ("2020s", "2020s"),
        ];
        for (word, lemma) in cases {
            assert_eq!(lem.lemmatize(word), lemma, "{word}");
        }
    }

    #[test]
    fn preprocess_identity_without_flags() {
        let p = prep();
        let stream = tokenize("The cats were running, I think.");
        let out = p.preprocess(&stream, false, false);
        assert_eq!(surfaces(&out), surfaces(&stream));
        for (a, b) in out.iter().zip(&stream) {
            assert_eq!(a.lemma, b.lemma);
        }
    }

    #[test]
    fn preprocess_is_idempotent() {
        let p = prep();
        let stream = tokenize("My friends were crying and I kept running home! https://x.y");
        for rs in [false, true] {
            for lm in [false, true] {
                let once = p.preprocess(&stream, rs, lm);
                assert_eq!(p.preprocess(&once, rs, lm), once);
            }
        }
    }

    #[test]
    fn pronouns_survive_stopword_removal() {
        let p = prep();
        let stream = tokenize("I told me that my own self is mine");
        let out = p.preprocess(&stream, true, true);
        let n_fp = out.iter().filter(|t| t.is_first_person).count();
        assert_eq!(n_fp, 4);
    }

    fn user_with(words: usize) -> UserRecord {
        let text: Vec<String> = (0..words).map(|i| format!("w{i}")).collect();
        UserRecord {
            user_id: "u".into(),
            label: Label::Risk,
            posts: vec![Post { post_id: "p".into(), timestamp: 0, text: text.join(" ") }],
        }
    }

    #[test]
    fn chunk_sizes() {
        let p = prep();
        let cfg = ChunkingConfig::default();
        let sizes = |n| chunk_user(&user_with(n), &cfg, &p).unwrap().iter().map(|s| s.len()).collect::<Vec<_>>();
        assert_eq!(sizes(320), [150, 150, 20]);
        assert_eq!(sizes(150), [150]);
        assert!(sizes(0).is_empty());
    }

    #[test]
    fn chunk_with_no_tokens_is_empty() {
        let p = prep();
        let mut user = user_with(1);
        user.posts[0].text = "the and , !".into();
        assert!(chunk_user(&user, &ChunkingConfig::default(), &p).unwrap().is_empty());
    }
}
