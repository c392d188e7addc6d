//! Labeled user corpora: the JSONL on-disk format, validation, the synthetic
//! generator and stratified user-level splits.

mod synth;

pub use synth::{generate_synthetic, SynthConfig, SynthVocabulary};

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Risk,
    Control,
}

impl Label {
    pub fn is_risk(self) -> bool {
        self == Label::Risk
    }

    pub fn from_risk(risk: bool) -> Label {
        if risk {
            Label::Risk
        } else {
            Label::Control
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Risk => "risk",
            Label::Control => "control",
        }
    }
}

/// Prediction horizon of the corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    ThirtyDay,
    SixMonth,
}

impl std::str::FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Task> {
        match s {
            "thirty_day" | "30d" => Ok(Task::ThirtyDay),
            "six_month" | "6m" => Ok(Task::SixMonth),
            other => Err(Error::Config(format!("unknown task `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Post {
    pub post_id: String,
    pub timestamp: i64,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserRecord {
    pub user_id: String,
    pub label: Label,
    pub posts: Vec<Post>,
}

impl UserRecord {
    fn validate(&self) -> std::result::Result<(), String> {
        if self.user_id.is_empty() {
            return Err("empty user_id".into());
        }
        if self.posts.is_empty() {
            return Err(format!("user `{}` has no posts", self.user_id));
        }
        for post in &self.posts {
            if post.text.trim().is_empty() {
                return Err(format!(
                    "user `{}`: post `{}` has empty text",
                    self.user_id, post.post_id
                ));
            }
            if post.timestamp < 0 {
                return Err(format!(
                    "user `{}`: post `{}` has negative timestamp",
                    self.user_id, post.post_id
                ));
            }
        }
        Ok(())
    }

    fn sort_posts(&mut self) {
        // stable: equal timestamps keep file order
        self.posts.sort_by_key(|p| p.timestamp);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub task: Task,
    pub users: Vec<UserRecord>,
}

impl Corpus {
    /// Validates every user, rejects duplicate ids and sorts posts by timestamp.
    pub fn new(task: Task, mut users: Vec<UserRecord>) -> Result<Corpus> {
        let mut seen = HashSet::new();
        for user in &mut users {
            user.validate().map_err(Error::Validation)?;
            if !seen.insert(user.user_id.clone()) {
                return Err(Error::Validation(format!(
                    "duplicate user_id `{}`",
                    user.user_id
                )));
            }
            user.sort_posts();
        }
        Ok(Corpus { task, users })
    }

    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }

    pub fn count(&self, label: Label) -> usize {
        self.users.iter().filter(|u| u.label == label).count()
    }

    /// Training corpora must contain both labels.
    pub fn require_both_labels(&self) -> Result<()> {
        if self.count(Label::Risk) == 0 || self.count(Label::Control) == 0 {
            return Err(Error::Validation(format!(
                "corpus needs both labels (risk={}, control={})",
                self.count(Label::Risk),
                self.count(Label::Control)
            )));
        }
        Ok(())
    }

    pub fn labels(&self) -> Vec<bool> {
        self.users.iter().map(|u| u.label.is_risk()).collect()
    }
}

pub fn load_corpus(path: impl AsRef<Path>, task: Task) -> Result<Corpus> {
    let path = path.as_ref();
    let file = File::open(path)?;
    read_corpus(BufReader::new(file), &path.display().to_string(), task)
}

/// Parses the JSONL corpus format, one user object per line. Blank lines are skipped.
pub fn read_corpus<R: BufRead>(reader: R, source_name: &str, task: Task) -> Result<Corpus> {
    let mut users = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let user: UserRecord = serde_json::from_str(&line)
            .map_err(|e| Error::parse(source_name, idx + 1, e.to_string()))?;
        users.push(user);
    }
    Corpus::new(task, users)
}

pub fn write_corpus<W: Write>(corpus: &Corpus, mut out: W) -> Result<()> {
    for user in &corpus.users {
        serde_json::to_writer(&mut out, user)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn save_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::new();
    write_corpus(corpus, &mut buf)?;
    crate::io::write_atomic(path.as_ref(), &buf)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.8,
            seed: 0,
        }
    }
}

/// User-level stratified split. Each class contributes `round(train_fraction * n_class)`
/// users to the first side, clamped so both sides keep at least one user of each class.
/// Users keep their corpus order within each side.
pub fn split(corpus: &Corpus, spec: SplitSpec) -> Result<(Corpus, Corpus)> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::Config(format!(
            "train_fraction must lie in (0,1), got {}",
            spec.train_fraction
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut train_idx = Vec::new();
    for label in [Label::Risk, Label::Control] {
        let mut members: Vec<usize> = corpus
            .users
            .iter()
            .enumerate()
            .filter(|(_, u)| u.label == label)
            .map(|(i, _)| i)
            .collect();
        if members.len() < 2 {
            return Err(Error::Stratification(format!(
                "class `{}` has {} user(s); at least 2 are needed",
                label.as_str(),
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        let n = members.len();
        let n_train = ((spec.train_fraction * n as f64).round() as usize).clamp(1, n - 1);
        train_idx.extend_from_slice(&members[..n_train]);
    }
    let train_set: HashSet<usize> = train_idx.into_iter().collect();
    let (mut train, mut rest) = (Vec::new(), Vec::new());
    for (i, user) in corpus.users.iter().enumerate() {
        if train_set.contains(&i) {
            train.push(user.clone());
        } else {
            rest.push(user.clone());
        }
    }
    Ok((
        Corpus {
            task: corpus.task,
            users: train,
        },
        Corpus {
            task: corpus.task,
            users: rest,
        },
    ))
}
