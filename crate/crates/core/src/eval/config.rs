//! Declarative experiment configuration (TOML).

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::cattention::CAttConfig;
use crate::corpus::{SynthConfig, Task};
use crate::doc2vec::Doc2VecConfig;
use crate::error::{Error, Result};
use crate::features::UserAggregation;
use crate::lexicons::IntensityAggregation;
use crate::shallow::{SegmentAggregation, ShallowParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub task: Task,
    pub seed: u64,
    pub test_fraction: f64,
    pub validation_fraction: f64,
    /// JSONL corpus; a synthetic corpus is generated when absent.
    pub corpus: Option<PathBuf>,
    /// Held-out corpus; when absent the test set is split off `corpus`.
    pub test_corpus: Option<PathBuf>,
    /// Directory laid out like the bundled `data/`; bundled resources otherwise.
    pub resources: Option<PathBuf>,
    pub selection: Selection,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            task: Task::ThirtyDay,
            seed: 0,
            test_fraction: 0.2,
            validation_fraction: 0.2,
            corpus: None,
            test_corpus: None,
            resources: None,
            selection: Selection::F2,
        }
    }
}

/// Validation metric used to pick among candidate hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Selection {
    /// F2, then F1 as tiebreak.
    #[default]
    F2,
    /// F1, then F2.
    F1,
    /// AUC, then F2.
    Auc,
}

/// Whether latent-track models classify segments (scores aggregated per user)
/// or one averaged segment embedding per user.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatentPath {
    #[default]
    SegmentScores,
    UserVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureSection {
    pub user_aggregation: UserAggregation,
    pub intensity: IntensityAggregation,
    pub tagger_epochs: usize,
    pub segment_len: usize,
    pub lowercase: bool,
    pub segment_aggregation: SegmentAggregation,
    pub latent_path: LatentPath,
    pub lda_lambda: f64,
}

impl Default for FeatureSection {
    fn default() -> Self {
        FeatureSection {
            user_aggregation: UserAggregation::Mean,
            intensity: IntensityAggregation::Sum,
            tagger_epochs: 5,
            segment_len: 150,
            lowercase: true,
            segment_aggregation: SegmentAggregation::Mean,
            latent_path: LatentPath::SegmentScores,
            lda_lambda: crate::shallow::lda::DEFAULT_LAMBDA,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Doc2VecSection {
    pub post: Doc2VecConfig,
    pub segment: Doc2VecConfig,
}

impl Default for Doc2VecSection {
    fn default() -> Self {
        Doc2VecSection {
            post: Doc2VecConfig { dim: 100, ..Default::default() },
            segment: Doc2VecConfig { dim: 200, ..Default::default() },
        }
    }
}

/// Reference numbers echoed in the report's external baseline row.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineRow {
    pub f1: Option<f64>,
    pub f2: Option<f64>,
    pub tpr: Option<f64>,
    pub fpr: Option<f64>,
    pub auc: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Track {
    /// Standardized 59-column user feature vectors.
    Handcrafted,
    /// Segment embeddings projected by LDA.
    Latent,
    /// Per-post embeddings for the C-Attention network.
    Post,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub name: String,
    /// `knn`, `svm_linear`, `svm_rbf`, `dtree`, `rforest`, `logreg` or `cattention`.
    pub kind: String,
    pub track: Track,
    /// Hyperparameters; array values form a grid of candidates.
    #[serde(default)]
    pub params: toml::Table,
}

/// A fully resolved hyperparameter choice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Candidate {
    Shallow(ShallowParams),
    Cattention(CAttConfig),
}

const SHALLOW_KINDS: [&str; 6] = ["knn", "svm_linear", "svm_rbf", "dtree", "rforest", "logreg"];

fn typed<T: DeserializeOwned>(table: toml::Table, what: &str) -> Result<T> {
    toml::Value::Table(table)
        .try_into()
        .map_err(|e| Error::Config(format!("{what}: {e}")))
}

impl ModelSpec {
    /// Cartesian product over array-valued parameters, keys in sorted order.
    pub fn grid(&self) -> Vec<toml::Table> {
        let mut out = vec![toml::Table::new()];
        let sorted: BTreeMap<&String, &toml::Value> = self.params.iter().collect();
        for (key, value) in sorted {
            let choices: Vec<toml::Value> = match value {
                toml::Value::Array(a) if !a.is_empty() => a.clone(),
                other => vec![other.clone()],
            };
            out = out
                .into_iter()
                .flat_map(|t| {
                    choices.iter().map(move |c| {
                        let mut t = t.clone();
                        t.insert(key.clone(), c.clone());
                        t
                    })
                })
                .collect();
        }
        out
    }

    pub fn candidate(&self, table: &toml::Table) -> Result<Candidate> {
        let what = format!("model `{}`", self.name);
        if self.kind == "cattention" {
            let cfg: CAttConfig = typed(table.clone(), &what)?;
            cfg.validate()?;
            return Ok(Candidate::Cattention(cfg));
        }
        if !SHALLOW_KINDS.contains(&self.kind.as_str()) {
            return Err(Error::Config(format!("{what}: unknown kind `{}`", self.kind)));
        }
        let mut t = table.clone();
        t.insert("kind".into(), toml::Value::String(self.kind.clone()));
        Ok(Candidate::Shallow(typed(t, &what)?))
    }

    pub fn candidates(&self) -> Result<Vec<Candidate>> {
        self.grid().iter().map(|t| self.candidate(t)).collect()
    }

    fn validate(&self) -> Result<()> {
        let post = self.kind == "cattention";
        if post != (self.track == Track::Post) {
            return Err(Error::Config(format!(
                "model `{}`: kind `{}` cannot use track {:?}",
                self.name, self.kind, self.track
            )));
        }
        self.candidates().map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub synthetic: SynthConfig,
    #[serde(default)]
    pub features: FeatureSection,
    #[serde(default)]
    pub doc2vec: Doc2VecSection,
    #[serde(default)]
    pub baseline: BaselineRow,
    #[serde(default, rename = "model")]
    pub models: Vec<ModelSpec>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<ExperimentConfig> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a config file; relative paths inside it resolve against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = ExperimentConfig::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let e = &mut cfg.experiment;
        for p in [&mut e.corpus, &mut e.test_corpus, &mut e.resources].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let e = &self.experiment;
        for (name, f) in [("test_fraction", e.test_fraction), ("validation_fraction", e.validation_fraction)] {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0,1), got {f}")));
            }
        }
        if self.features.segment_len == 0 {
            return Err(Error::Config("segment_len must be at least 1".into()));
        }
        let mut names = std::collections::HashSet::new();
        for m in &self.models {
            if !names.insert(m.name.as_str()) {
                return Err(Error::Config(format!("duplicate model name `{}`", m.name)));
            }
            m.validate()?;
        }
        Ok(())
    }

    pub fn uses(&self, track: Track) -> bool {
        self.models.iter().any(|m| m.track == track)
    }

    /// The seven-model setup on a synthetic corpus: C-Att on post embeddings,
    /// SVM/LR/RF on handcrafted features, KNN/D-Tree/SVM on LDA-projected
    /// segment embeddings.
    pub fn default_synthetic() -> ExperimentConfig {
        ExperimentConfig::parse(DEFAULT_CONFIG).expect("bundled default config is valid")
    }
}

pub const DEFAULT_CONFIG: &str = r#"
[experiment]
task = "thirty_day"
seed = 0
test_fraction = 0.2
validation_fraction = 0.2

[synthetic]
n_risk = 100
n_control = 100
posts_min = 5
posts_max = 15
signal = 0.9

[[model]]
name = "C-Att"
kind = "cattention"
track = "post"

[[model]]
name = "SVM(HF)"
kind = "svm_rbf"
track = "handcrafted"

[[model]]
name = "LR"
kind = "logreg"
track = "handcrafted"

[[model]]
name = "RF"
kind = "rforest"
track = "handcrafted"

[[model]]
name = "KNN"
kind = "knn"
track = "latent"

[[model]]
name = "D-Tree"
kind = "dtree"
track = "latent"

[[model]]
name = "SVM(EB)"
kind = "svm_linear"
track = "latent"
"#;
