//! End-to-end experiment: corpus → splits → feature tracks → model selection
//! on validation → test report. Fitted components persist to a directory.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{Candidate, ExperimentConfig, LatentPath, ModelSpec, Selection, Track};
use super::metrics::{evaluate, MetricsReport, Prediction};
use super::report::{Report, ReportRow};
use crate::cattention::{self, CAttModel, LossRecord, UserExample};
use crate::container::{ModelContainer, ModelKind, Persist};
use crate::corpus::{generate_synthetic, load_corpus, split, Corpus, SplitSpec};
use crate::doc2vec::{train_pvdm, DocKind, Doc2VecConfig, Doc2VecModel};
use crate::error::{Error, Result, StageExt};
use crate::features::{HandcraftedExtractor, Scaler};
use crate::postagger::{parse_treebank, train_tagger, TaggerModel};
use crate::resources::Resources;
use crate::shallow::lda::{fit_lda, LdaProjector};
use crate::shallow::{aggregate_scores, rows_to_array, DatasetMatrix, Granularity, ShallowModel, ShallowParams};
use crate::textprep::{chunk_user, ChunkingConfig};

/// Per-model predictions, in model order.
pub type ModelPredictions = Vec<(String, Vec<Prediction>)>;

/// Latent rows with labels, row ids and granularity.
type LatentRows = (Vec<Vec<f64>>, Vec<bool>, Vec<String>, Granularity);

/// Per-user inputs for every track the configured models use.
#[derive(Debug, Clone)]
pub struct FeatureSet {
    pub ids: Vec<String>,
    pub labels: Vec<bool>,
    /// Standardized handcrafted rows.
    pub handcrafted: Option<Vec<Vec<f64>>>,
    /// Segment embeddings per user.
    pub segments: Option<Vec<Vec<Vec<f64>>>>,
    /// Post embeddings per user, in time order.
    pub posts: Option<Vec<Vec<Vec<f64>>>>,
}

impl FeatureSet {
    pub fn gold(&self) -> Vec<(String, bool)> {
        self.ids.iter().cloned().zip(self.labels.iter().copied()).collect()
    }
}

#[derive(Debug, Clone)]
pub enum FittedModel {
    Shallow(ShallowModel),
    Cattention(CAttModel),
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub name: String,
    pub track: Track,
    pub candidate: Candidate,
    /// Validation metrics of the selected candidate.
    pub validation: Option<MetricsReport>,
    /// Epoch losses of the selected C-Att candidate.
    pub history: Vec<LossRecord>,
    pub model: FittedModel,
}

#[derive(Debug, Clone)]
pub struct TrainedPipeline {
    pub config: ExperimentConfig,
    pub resources: Resources,
    pub tagger: Option<TaggerModel>,
    pub scaler: Option<Scaler>,
    pub doc2vec_post: Option<Doc2VecModel>,
    pub doc2vec_segment: Option<Doc2VecModel>,
    pub lda: Option<LdaProjector>,
    /// Standardizes the LDA projection.
    pub latent_scaler: Option<Scaler>,
    pub models: Vec<TrainedModel>,
}

#[derive(Debug)]
pub struct ExperimentOutcome {
    pub report: Report,
    pub pipeline: TrainedPipeline,
    pub test: Corpus,
    /// Test predictions per model, in report order.
    pub predictions: ModelPredictions,
}

fn offset(base: u64, seed: u64) -> u64 {
    base.wrapping_add(seed)
}

fn effective_d2v(cfg: &Doc2VecConfig, seed: u64) -> Doc2VecConfig {
    Doc2VecConfig {
        seed: offset(cfg.seed, seed),
        ..cfg.clone()
    }
}

fn seeded_candidate(c: &Candidate, seed: u64) -> Candidate {
    match c {
        Candidate::Shallow(ShallowParams::Rforest(p)) => {
            let mut p = p.clone();
            p.seed = offset(p.seed, seed);
            Candidate::Shallow(ShallowParams::Rforest(p))
        }
        Candidate::Cattention(cfg) => {
            let mut cfg = cfg.clone();
            cfg.seed = offset(cfg.seed, seed);
            Candidate::Cattention(cfg)
        }
        other => other.clone(),
    }
}

fn selection_key(m: &MetricsReport, how: Selection) -> (f64, f64) {
    match how {
        Selection::F2 => (m.f2, m.f1),
        Selection::F1 => (m.f1, m.f2),
        Selection::Auc => (m.auc, m.f2),
    }
}

/// Loads or generates the corpus and splits it into fit, validation and test users.
pub fn prepare_splits(cfg: &ExperimentConfig, resources: &Resources) -> Result<(Corpus, Corpus, Corpus)> {
    let e = &cfg.experiment;
    let corpus = match &e.corpus {
        Some(path) => load_corpus(path, e.task),
        None => {
            let synth = crate::corpus::SynthConfig {
                seed: offset(cfg.synthetic.seed, e.seed),
                task: e.task,
                ..cfg.synthetic.clone()
            };
            generate_synthetic(&synth, &resources.synth_vocabulary())
        }
    }
    .stage("corpus")?;
    corpus.require_both_labels().stage("corpus")?;
    let (train_all, test) = match &e.test_corpus {
        Some(path) => (corpus, load_corpus(path, e.task).stage("corpus")?),
        None => split(
            &corpus,
            SplitSpec {
                train_fraction: 1.0 - e.test_fraction,
                seed: e.seed,
            },
        )
        .stage("split")?,
    };
    let (fit, val) = split(
        &train_all,
        SplitSpec {
            train_fraction: 1.0 - e.validation_fraction,
            seed: offset(e.seed, 1),
        },
    )
    .stage("split")?;
    Ok((fit, val, test))
}

/// Runs the whole experiment and reports test metrics for every configured model.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    if cfg.models.is_empty() {
        return Err(Error::Config("no models configured; the report would be empty".into()));
    }
    cfg.validate()?;
    let resources = Resources::from_optional_dir(cfg.experiment.resources.as_deref()).stage("resources")?;
    let (fit, val, test) = prepare_splits(cfg, &resources)?;
    log::info!("split: {} fit, {} validation, {} test users", fit.len(), val.len(), test.len());
    let pipeline = TrainedPipeline::fit(cfg.clone(), resources, &fit, &val)?;
    let (report, predictions) = pipeline.evaluate(&test)?;
    Ok(ExperimentOutcome {
        report,
        pipeline,
        test,
        predictions,
    })
}

#[derive(Serialize, Deserialize)]
struct ManifestEntry {
    name: String,
    track: Track,
    candidate: Candidate,
    validation: Option<MetricsReport>,
    file: String,
}

fn slug(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
        .collect::<String>()
        .trim_matches('_')
        .to_string()
}

impl TrainedPipeline {
    fn chunking(&self) -> ChunkingConfig {
        ChunkingConfig {
            segment_len: self.config.features.segment_len,
            lowercase: self.config.features.lowercase,
        }
    }

    fn post_docs(&self, corpus: &Corpus) -> Vec<Vec<Vec<String>>> {
        let lc = self.config.features.lowercase;
        corpus
            .users
            .iter()
            .map(|u| u.posts.iter().map(|p| self.resources.preprocessor.doc_tokens(&p.text, lc)).collect())
            .collect()
    }

    fn segment_docs(&self, corpus: &Corpus) -> Result<Vec<Vec<Vec<String>>>> {
        let chunking = self.chunking();
        corpus
            .users
            .iter()
            .map(|u| chunk_user(u, &chunking, &self.resources.preprocessor))
            .collect()
    }

    /// Fits every feature component on `fit`, then selects each model's
    /// hyperparameters on `val`.
    pub fn fit(config: ExperimentConfig, resources: Resources, fit: &Corpus, val: &Corpus) -> Result<TrainedPipeline> {
        let seed = config.experiment.seed;
        let mut p = TrainedPipeline {
            config,
            resources,
            tagger: None,
            scaler: None,
            doc2vec_post: None,
            doc2vec_segment: None,
            lda: None,
            latent_scaler: None,
            models: Vec::new(),
        };
        let cfg = p.config.clone();
        if cfg.uses(Track::Handcrafted) {
            let treebank = parse_treebank(&p.resources.treebank, "mini_treebank.txt").stage("tagger")?;
            p.tagger = Some(train_tagger(&treebank, cfg.features.tagger_epochs, seed).stage("tagger")?);
            let raw = p.handcrafted_raw(fit)?;
            p.scaler = Some(Scaler::fit(&raw).stage("features")?);
        }
        if cfg.uses(Track::Latent) {
            let docs: Vec<Vec<String>> = p.segment_docs(fit).stage("features")?.into_iter().flatten().collect();
            let d2v = train_pvdm(&docs, &effective_d2v(&cfg.doc2vec.segment, seed)).stage("doc2vec")?;
            p.doc2vec_segment = Some(d2v);
        }
        if cfg.uses(Track::Post) {
            let docs: Vec<Vec<String>> = p.post_docs(fit).into_iter().flatten().filter(|d| !d.is_empty()).collect();
            let d2v = train_pvdm(&docs, &effective_d2v(&cfg.doc2vec.post, seed)).stage("doc2vec")?;
            p.doc2vec_post = Some(d2v);
        }
        let fit_feats = p.features(fit)?;
        if cfg.uses(Track::Latent) {
            let data = p.lda_training_data(&fit_feats)?;
            let lda = fit_lda(&data, cfg.features.lda_lambda).stage("lda")?;
            let projected = lda.project(&data.x)?;
            let rows: Vec<Vec<f64>> = projected.rows().into_iter().map(|r| r.to_vec()).collect();
            p.latent_scaler = Some(Scaler::fit(&rows).stage("lda")?);
            p.lda = Some(lda);
        }
        let val_feats = p.features(val)?;
        let val_gold = val_feats.gold();
        for spec in &cfg.models {
            let trained = p.select(spec, &fit_feats, &val_feats, &val_gold).stage("train")?;
            p.models.push(trained);
        }
        Ok(p)
    }

    fn select(&self, spec: &ModelSpec, fit: &FeatureSet, val: &FeatureSet, gold: &[(String, bool)]) -> Result<TrainedModel> {
        let seed = self.config.experiment.seed;
        let mut best: Option<((f64, f64), TrainedModel)> = None;
        for cand in spec.candidates()? {
            let cand = seeded_candidate(&cand, seed);
            let (model, history) = self.fit_candidate(spec, &cand, fit, val)?;
            let preds = self.predict_with(spec.track, &model, val)?;
            let metrics = evaluate(&preds, gold)?;
            let key = selection_key(&metrics, self.config.experiment.selection);
            log::info!("{} {:?}: validation f2 {:.3} f1 {:.3}", spec.name, cand, metrics.f2, metrics.f1);
            if best.as_ref().is_none_or(|(k, _)| key > *k) {
                best = Some((
                    key,
                    TrainedModel {
                        name: spec.name.clone(),
                        track: spec.track,
                        candidate: cand,
                        validation: Some(metrics),
                        history,
                        model,
                    },
                ));
            }
        }
        best.map(|(_, m)| m)
            .ok_or_else(|| Error::Config(format!("model `{}` has no candidates", spec.name)))
    }

    fn fit_candidate(
        &self,
        spec: &ModelSpec,
        cand: &Candidate,
        fit: &FeatureSet,
        val: &FeatureSet,
    ) -> Result<(FittedModel, Vec<LossRecord>)> {
        match cand {
            Candidate::Shallow(params) => {
                let data = self.shallow_dataset(spec.track, fit)?;
                let mut model = ShallowModel::new(params.clone());
                model.fit(&data)?;
                Ok((FittedModel::Shallow(model), Vec::new()))
            }
            Candidate::Cattention(cfg) => {
                let dim = self.config.doc2vec.post.dim;
                if cfg.d_model != dim {
                    return Err(Error::Config(format!(
                        "model `{}`: d_model {} differs from the post embedding dimension {dim}",
                        spec.name, cfg.d_model
                    )));
                }
                let out = cattention::train(cfg, &post_examples(fit)?, Some(&post_examples(val)?))?;
                Ok((FittedModel::Cattention(out.model), out.history))
            }
        }
    }

    fn handcrafted_raw(&self, corpus: &Corpus) -> Result<Vec<Vec<f64>>> {
        let tagger = self.tagger.as_ref().ok_or(Error::NotFitted)?;
        let ex = HandcraftedExtractor {
            preprocessor: &self.resources.preprocessor,
            emotions: &self.resources.emotions,
            tst: &self.resources.tst,
            tagger,
            aggregation: self.config.features.user_aggregation,
        };
        Ok(corpus.users.iter().map(|u| ex.user_features(u)).collect())
    }

    /// Embeds each user's documents; users with nothing embeddable get one zero row.
    fn embed(&self, model: &Doc2VecModel, ids: &[String], docs: Vec<Vec<Vec<String>>>, kind: DocKind) -> Result<Vec<Vec<Vec<f64>>>> {
        let seed = model.config.seed;
        ids.iter()
            .zip(docs)
            .map(|(id, docs)| match model.embed_user(id, &docs, kind, seed) {
                Ok(m) => Ok(m.rows),
                Err(Error::OutOfVocabulary(_)) | Err(Error::Validation(_)) => {
                    log::warn!("user {id}: no embeddable {kind:?} documents; using a zero row");
                    Ok(vec![vec![0.0; model.dim()]])
                }
                Err(e) => Err(e),
            })
            .collect()
    }

    /// Computes the inputs of every configured track for `corpus`.
    pub fn features(&self, corpus: &Corpus) -> Result<FeatureSet> {
        let ids: Vec<String> = corpus.users.iter().map(|u| u.user_id.clone()).collect();
        let mut fs = FeatureSet {
            labels: corpus.labels(),
            ids,
            handcrafted: None,
            segments: None,
            posts: None,
        };
        if let Some(scaler) = &self.scaler {
            let raw = self.handcrafted_raw(corpus).stage("features")?;
            fs.handcrafted = Some(raw.iter().map(|r| scaler.transform(r)).collect());
        }
        if let Some(d2v) = &self.doc2vec_segment {
            let docs = self.segment_docs(corpus).stage("features")?;
            fs.segments = Some(self.embed(d2v, &fs.ids, docs, DocKind::Segment).stage("doc2vec")?);
        }
        if let Some(d2v) = &self.doc2vec_post {
            let docs = self.post_docs(corpus);
            fs.posts = Some(self.embed(d2v, &fs.ids, docs, DocKind::Post).stage("doc2vec")?);
        }
        Ok(fs)
    }

    fn user_means(segments: &[Vec<Vec<f64>>]) -> Vec<Vec<f64>> {
        segments
            .iter()
            .map(|rows| {
                let n = rows.len() as f64;
                let mut m = vec![0.0; rows[0].len()];
                for r in rows {
                    m.iter_mut().zip(r).for_each(|(a, v)| *a += v / n);
                }
                m
            })
            .collect()
    }

    /// Unprojected latent rows: one per segment, or one mean row per user.
    fn latent_rows(&self, fs: &FeatureSet) -> Result<LatentRows> {
        let segments = fs.segments.as_ref().ok_or(Error::NotFitted)?;
        Ok(match self.config.features.latent_path {
            LatentPath::SegmentScores => {
                let (mut rows, mut y, mut ids) = (Vec::new(), Vec::new(), Vec::new());
                for ((segs, &label), id) in segments.iter().zip(&fs.labels).zip(&fs.ids) {
                    for s in segs {
                        rows.push(s.clone());
                        y.push(label);
                        ids.push(id.clone());
                    }
                }
                (rows, y, ids, Granularity::Segment)
            }
            LatentPath::UserVector => (Self::user_means(segments), fs.labels.clone(), fs.ids.clone(), Granularity::User),
        })
    }

    fn lda_training_data(&self, fs: &FeatureSet) -> Result<DatasetMatrix> {
        let (rows, y, ids, g) = self.latent_rows(fs)?;
        DatasetMatrix::from_rows(&rows, y, ids, g)
    }

    fn shallow_dataset(&self, track: Track, fs: &FeatureSet) -> Result<DatasetMatrix> {
        match track {
            Track::Handcrafted => {
                let rows = fs.handcrafted.as_ref().ok_or(Error::NotFitted)?;
                DatasetMatrix::from_rows(rows, fs.labels.clone(), fs.ids.clone(), Granularity::User)
            }
            Track::Latent => {
                let lda = self.lda.as_ref().ok_or(Error::NotFitted)?;
                let scaler = self.latent_scaler.as_ref().ok_or(Error::NotFitted)?;
                let (rows, y, ids, g) = self.latent_rows(fs)?;
                let mut x = lda.project(&rows_to_array(&rows)?)?;
                for mut r in x.rows_mut() {
                    let t = scaler.transform(r.as_slice().ok_or(Error::NotFitted)?);
                    r.assign(&ndarray::ArrayView1::from(&t));
                }
                DatasetMatrix::new(x, y, ids, g)
            }
            Track::Post => Err(Error::Config("shallow models cannot use the post track".into())),
        }
    }

    fn predict_with(&self, track: Track, model: &FittedModel, fs: &FeatureSet) -> Result<Vec<Prediction>> {
        let scores: Vec<(String, f64)> = match model {
            FittedModel::Cattention(m) => {
                let posts = fs.posts.as_ref().ok_or(Error::NotFitted)?;
                let refs: Vec<&[Vec<f64>]> = posts.iter().map(|p| p.as_slice()).collect();
                fs.ids.iter().cloned().zip(cattention::predict_many(m, &refs)?).collect()
            }
            FittedModel::Shallow(m) => {
                let data = self.shallow_dataset(track, fs)?;
                let s = m.predict_score(&data.x)?;
                if data.granularity == Granularity::Segment {
                    let agg: HashMap<String, f64> =
                        aggregate_scores(&data.ids, &s, self.config.features.segment_aggregation).into_iter().collect();
                    fs.ids.iter().map(|id| (id.clone(), agg[id])).collect()
                } else {
                    data.ids.into_iter().zip(s).collect()
                }
            }
        };
        Ok(scores
            .into_iter()
            .map(|(user_id, score)| Prediction {
                user_id,
                label: score >= 0.5,
                score,
            })
            .collect())
    }

    /// Per-model predictions for every user of `corpus`, in model order.
    pub fn predict(&self, corpus: &Corpus) -> Result<ModelPredictions> {
        let fs = self.features(corpus)?;
        self.predict_features(&fs)
    }

    fn predict_features(&self, fs: &FeatureSet) -> Result<ModelPredictions> {
        self.models
            .iter()
            .map(|m| Ok((m.name.clone(), self.predict_with(m.track, &m.model, fs).stage("predict")?)))
            .collect()
    }

    /// Test report plus the underlying predictions.
    pub fn evaluate(&self, corpus: &Corpus) -> Result<(Report, ModelPredictions)> {
        corpus.require_both_labels().stage("evaluate")?;
        let fs = self.features(corpus)?;
        let gold = fs.gold();
        let predictions = self.predict_features(&fs)?;
        let rows = predictions
            .iter()
            .map(|(name, preds)| {
                Ok(ReportRow {
                    model: name.clone(),
                    metrics: evaluate(preds, &gold).stage("evaluate")?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((
            Report {
                rows,
                baseline: self.config.baseline.clone(),
            },
            predictions,
        ))
    }

    /// Writes `manifest.bin` and one container per fitted component into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        if let Some(t) = &self.tagger {
            t.save(dir.join("tagger.bin"))?;
        }
        if let Some(s) = &self.scaler {
            s.save(dir.join("scaler.bin"))?;
        }
        if let Some(d) = &self.doc2vec_post {
            d.save(dir.join("doc2vec_post.bin"))?;
        }
        if let Some(d) = &self.doc2vec_segment {
            d.save(dir.join("doc2vec_segment.bin"))?;
        }
        if let Some(l) = &self.lda {
            l.save(dir.join("lda.bin"))?;
        }
        if let Some(s) = &self.latent_scaler {
            s.save(dir.join("latent_scaler.bin"))?;
        }
        let mut entries = Vec::new();
        for (i, m) in self.models.iter().enumerate() {
            let file = format!("model_{i}_{}.bin", slug(&m.name));
            match &m.model {
                FittedModel::Shallow(s) => s.save(dir.join(&file))?,
                FittedModel::Cattention(c) => c.save(dir.join(&file))?,
            }
            entries.push(ManifestEntry {
                name: m.name.clone(),
                track: m.track,
                candidate: m.candidate.clone(),
                validation: m.validation,
                file,
            });
        }
        let mut manifest = ModelContainer::new(ModelKind::Manifest, &self.config)?;
        manifest.push_json("models", &entries)?;
        manifest.save(dir.join("manifest.bin"))
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<TrainedPipeline> {
        let dir = dir.as_ref();
        let manifest = ModelContainer::load(dir.join("manifest.bin"))?;
        manifest.expect_kind(ModelKind::Manifest)?;
        let config: ExperimentConfig = manifest.config()?;
        let entries: Vec<ManifestEntry> = manifest.json("models")?;
        let resources = Resources::from_optional_dir(config.experiment.resources.as_deref())?;
        fn opt<T: Persist>(path: &Path) -> Result<Option<T>> {
            if path.exists() {
                T::load(path).map(Some)
            } else {
                Ok(None)
            }
        }
        let mut models = Vec::new();
        for e in entries {
            let path = dir.join(&e.file);
            let model = match e.candidate {
                Candidate::Shallow(_) => FittedModel::Shallow(ShallowModel::load(&path)?),
                Candidate::Cattention(_) => FittedModel::Cattention(CAttModel::load(&path)?),
            };
            models.push(TrainedModel {
                name: e.name,
                track: e.track,
                candidate: e.candidate,
                validation: e.validation,
                history: Vec::new(),
                model,
            });
        }
        Ok(TrainedPipeline {
            tagger: opt(&dir.join("tagger.bin"))?,
            scaler: opt(&dir.join("scaler.bin"))?,
            doc2vec_post: opt(&dir.join("doc2vec_post.bin"))?,
            doc2vec_segment: opt(&dir.join("doc2vec_segment.bin"))?,
            lda: opt(&dir.join("lda.bin"))?,
            latent_scaler: opt(&dir.join("latent_scaler.bin"))?,
            config,
            resources,
            models,
        })
    }
}

fn post_examples(fs: &FeatureSet) -> Result<Vec<UserExample>> {
    let posts = fs.posts.as_ref().ok_or(Error::NotFitted)?;
    Ok(fs
        .ids
        .iter()
        .zip(posts)
        .zip(&fs.labels)
        .map(|((id, rows), &label)| UserExample {
            user_id: id.clone(),
            rows: rows.clone(),
            label,
        })
        .collect())
}
