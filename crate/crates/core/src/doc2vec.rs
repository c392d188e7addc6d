//! PV-DM paragraph vectors trained with negative sampling.

use std::collections::HashMap;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::container::{ModelContainer, ModelKind, Persist};
use crate::error::{Error, Result};
use crate::lexicons::WordEmbeddings;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Doc2VecConfig {
    pub dim: usize,
    pub window: usize,
    pub negative: usize,
    pub epochs: usize,
    pub initial_lr: f64,
    pub min_count: usize,
    pub seed: u64,
    /// Epochs used by `infer_vector` when the caller does not say otherwise.
    pub infer_epochs: usize,
}

impl Default for Doc2VecConfig {
    fn default() -> Self {
        Doc2VecConfig {
            dim: 100,
            window: 5,
            negative: 5,
            epochs: 20,
            initial_lr: 0.025,
            min_count: 2,
            seed: 0,
            infer_epochs: 20,
        }
    }
}

impl Doc2VecConfig {
    fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.window == 0 || self.negative == 0 {
            return Err(Error::Config("doc2vec dim, window and negative must be at least 1".into()));
        }
        if !(self.initial_lr >= 0.0 && self.initial_lr.is_finite()) {
            return Err(Error::Config(format!("invalid learning rate {}", self.initial_lr)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DocKind {
    Post,
    Segment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingMatrix {
    pub user_id: String,
    pub doc_kind: DocKind,
    pub rows: Vec<Vec<f64>>,
}

/// Writes one `{"user_id", "doc_kind", "rows"}` object per line.
pub fn write_embeddings<W: Write>(matrices: &[EmbeddingMatrix], mut out: W) -> Result<()> {
    for m in matrices {
        serde_json::to_writer(&mut out, m)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Loss and gradients of one negative-sampling step. `hidden` is the averaged
/// input vector, `outputs[i]` the output weights of sample `i` and `labels[i]`
/// is 1 for the true center word and 0 for noise words.
#[derive(Debug, Clone, PartialEq)]
pub struct StepGradient {
    pub loss: f64,
    pub d_hidden: Vec<f64>,
    pub d_outputs: Vec<Vec<f64>>,
}

impl StepGradient {
    pub fn compute(hidden: &[f64], outputs: &[&[f64]], labels: &[f64]) -> StepGradient {
        let mut loss = 0.0;
        let mut d_hidden = vec![0.0; hidden.len()];
        let mut d_outputs = Vec::with_capacity(outputs.len());
        for (out, &label) in outputs.iter().zip(labels) {
            let score = dot(out, hidden);
            let p = sigmoid(score);
            // -log σ(s) for positives, -log σ(-s) for negatives, computed stably
            let signed = if label > 0.5 { score } else { -score };
            loss += softplus(-signed);
            let g = p - label;
            for (dh, o) in d_hidden.iter_mut().zip(*out) {
                *dh += g * o;
            }
            d_outputs.push(hidden.iter().map(|h| g * h).collect());
        }
        StepGradient {
            loss,
            d_hidden,
            d_outputs,
        }
    }
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Averages the doc vector with the context word vectors.
pub fn pvdm_hidden(doc: &[f64], context: &[&[f64]]) -> Vec<f64> {
    let n = (1 + context.len()) as f64;
    let mut h = doc.to_vec();
    for c in context {
        for (a, b) in h.iter_mut().zip(*c) {
            *a += b;
        }
    }
    h.iter_mut().for_each(|v| *v /= n);
    h
}

fn seeded_vector(seed: u64, salt: u64, dim: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let half = 0.5 / dim as f64;
    (0..dim).map(|_| rng.random_range(-half..half)).collect()
}

const INFER_SALT: u64 = 0x1AFE;

/// Initial vector used by `infer_vector` for a given seed.
pub fn inference_init(seed: u64, dim: usize) -> Vec<f64> {
    seeded_vector(seed, INFER_SALT, dim)
}

#[derive(Debug, Clone)]
pub struct Doc2VecModel {
    pub config: Doc2VecConfig,
    pub vocab: Vec<String>,
    pub counts: Vec<u64>,
    index: HashMap<String, usize>,
    /// Row-major vocab × dim.
    pub word_vectors: Vec<f64>,
    /// Row-major docs × dim.
    pub doc_vectors: Vec<f64>,
    /// Row-major vocab × dim.
    pub output_weights: Vec<f64>,
    noise_cdf: Vec<f64>,
    /// Mean per-step loss of each training epoch.
    pub loss_history: Vec<f64>,
}

impl Doc2VecModel {
    fn from_parts(
        config: Doc2VecConfig,
        vocab: Vec<String>,
        counts: Vec<u64>,
        word_vectors: Vec<f64>,
        doc_vectors: Vec<f64>,
        output_weights: Vec<f64>,
        loss_history: Vec<f64>,
    ) -> Doc2VecModel {
        let index = vocab.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        let mut acc = 0.0;
        let mut noise_cdf: Vec<f64> = counts
            .iter()
            .map(|&c| {
                acc += (c as f64).powf(0.75);
                acc
            })
            .collect();
        noise_cdf.iter_mut().for_each(|v| *v /= acc);
        Doc2VecModel {
            config,
            vocab,
            counts,
            index,
            word_vectors,
            doc_vectors,
            output_weights,
            noise_cdf,
            loss_history,
        }
    }

    pub fn dim(&self) -> usize {
        self.config.dim
    }

    pub fn n_docs(&self) -> usize {
        self.doc_vectors.len() / self.config.dim
    }

    pub fn word_index(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn word_vector(&self, word: &str) -> Option<&[f64]> {
        let d = self.config.dim;
        self.word_index(word).map(|i| &self.word_vectors[i * d..(i + 1) * d])
    }

    pub fn doc_vector(&self, doc: usize) -> &[f64] {
        let d = self.config.dim;
        &self.doc_vectors[doc * d..(doc + 1) * d]
    }

    fn encode(&self, doc: &[String]) -> Vec<usize> {
        doc.iter().filter_map(|w| self.word_index(w)).collect()
    }

    fn sample_noise(&self, rng: &mut ChaCha8Rng) -> usize {
        let u: f64 = rng.random();
        self.noise_cdf.partition_point(|&c| c < u).min(self.vocab.len() - 1)
    }

    /// Context word indices around `pos` with a randomly reduced window.
    fn context(&self, words: &[usize], pos: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
        let b = self.config.window - rng.random_range(0..self.config.window);
        let lo = pos.saturating_sub(b);
        let hi = (pos + b + 1).min(words.len());
        (lo..hi).filter(|&j| j != pos).map(|j| words[j]).collect()
    }

    fn samples(&self, center: usize, rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<f64>) {
        let mut targets = vec![center];
        let mut labels = vec![1.0];
        for _ in 0..self.config.negative {
            let w = self.sample_noise(rng);
            if w != center {
                targets.push(w);
                labels.push(0.0);
            }
        }
        (targets, labels)
    }

    /// Gradient of one step; the doc vector is updated in place with its share.
    fn doc_step(&self, doc_vec: &mut [f64], context: &[usize], targets: &[usize], labels: &[f64], lr: f64) -> StepGradient {
        let d = self.config.dim;
        let ctx_rows: Vec<&[f64]> = context.iter().map(|&c| &self.word_vectors[c * d..(c + 1) * d]).collect();
        let hidden = pvdm_hidden(doc_vec, &ctx_rows);
        let out_rows: Vec<&[f64]> = targets.iter().map(|&t| &self.output_weights[t * d..(t + 1) * d]).collect();
        let g = StepGradient::compute(&hidden, &out_rows, labels);
        let scale = lr / (1 + context.len()) as f64;
        for (v, dh) in doc_vec.iter_mut().zip(&g.d_hidden) {
            *v -= scale * dh;
        }
        g
    }

    /// Full SGD step: doc vector, context word vectors and output weights.
    fn train_step(&mut self, doc_vec: &mut [f64], context: &[usize], targets: &[usize], labels: &[f64], lr: f64) -> f64 {
        let d = self.config.dim;
        let g = self.doc_step(doc_vec, context, targets, labels, lr);
        let scale = lr / (1 + context.len()) as f64;
        for (&t, d_out) in targets.iter().zip(&g.d_outputs) {
            for (w, dw) in self.output_weights[t * d..(t + 1) * d].iter_mut().zip(d_out) {
                *w -= lr * dw;
            }
        }
        for &c in context {
            for (w, dh) in self.word_vectors[c * d..(c + 1) * d].iter_mut().zip(&g.d_hidden) {
                *w -= scale * dh;
            }
        }
        g.loss
    }

    /// Optimizes a fresh document vector with word and output weights frozen.
    pub fn infer_vector(&self, doc: &[String], epochs: usize, seed: u64) -> Result<Vec<f64>> {
        let words = self.encode(doc);
        if words.is_empty() {
            return Err(Error::OutOfVocabulary("document has no in-vocabulary tokens".into()));
        }
        let mut v = inference_init(seed, self.config.dim);
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(INFER_SALT));
        let total = (epochs * words.len()).max(1) as f64;
        let lr0 = self.config.initial_lr;
        let mut done = 0usize;
        for _ in 0..epochs {
            for pos in 0..words.len() {
                let lr = decayed_lr(lr0, done as f64 / total);
                let ctx = self.context(&words, pos, &mut rng);
                let (targets, labels) = self.samples(words[pos], &mut rng);
                self.doc_step(&mut v, &ctx, &targets, &labels, lr);
                done += 1;
            }
        }
        Ok(v)
    }

    /// One row per document, in input order. Documents without in-vocabulary
    /// tokens become zero rows (with a warning); all of them failing is an error.
    pub fn embed_user(&self, user_id: &str, docs: &[Vec<String>], kind: DocKind, seed: u64) -> Result<EmbeddingMatrix> {
        if docs.is_empty() {
            return Err(Error::Validation(format!("user {user_id} has no documents to embed")));
        }
        let mut rows = Vec::with_capacity(docs.len());
        let mut failed = 0;
        for (i, doc) in docs.iter().enumerate() {
            match self.infer_vector(doc, self.config.infer_epochs, seed) {
                Ok(v) => rows.push(v),
                Err(Error::OutOfVocabulary(_)) => {
                    log::warn!("user {user_id}: document {i} has no in-vocabulary tokens; using a zero vector");
                    rows.push(vec![0.0; self.config.dim]);
                    failed += 1;
                }
                Err(e) => return Err(e),
            }
        }
        if failed == docs.len() {
            return Err(Error::OutOfVocabulary(format!("no document of user {user_id} has in-vocabulary tokens")));
        }
        Ok(EmbeddingMatrix {
            user_id: user_id.to_string(),
            doc_kind: kind,
            rows,
        })
    }
}

fn decayed_lr(lr0: f64, progress: f64) -> f64 {
    let min = 1e-4 * lr0;
    (lr0 - (lr0 - min) * progress).max(min)
}

/// Vocabulary ordered by descending frequency, ties alphabetical.
fn build_vocab(documents: &[Vec<String>], min_count: usize) -> (Vec<String>, Vec<u64>) {
    let mut freq: HashMap<&str, u64> = HashMap::new();
    for w in documents.iter().flatten() {
        *freq.entry(w.as_str()).or_default() += 1;
    }
    let mut kept: Vec<(&str, u64)> = freq.into_iter().filter(|(_, c)| *c as usize >= min_count.max(1)).collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    kept.into_iter().map(|(w, c)| (w.to_string(), c)).unzip()
}

pub fn train_pvdm(documents: &[Vec<String>], config: &Doc2VecConfig) -> Result<Doc2VecModel> {
    config.validate()?;
    let (vocab, counts) = build_vocab(documents, config.min_count);
    if vocab.is_empty() {
        return Err(Error::Training(format!(
            "empty vocabulary: no word occurs at least {} times",
            config.min_count
        )));
    }
    let d = config.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let half = 0.5 / d as f64;
    let word_vectors: Vec<f64> = (0..vocab.len() * d).map(|_| rng.random_range(-half..half)).collect();
    let doc_vectors: Vec<f64> = (0..documents.len())
        .flat_map(|i| seeded_vector(config.seed, i as u64 + 1, d))
        .collect();
    let output_weights = vec![0.0; vocab.len() * d];
    let mut model = Doc2VecModel::from_parts(config.clone(), vocab, counts, word_vectors, doc_vectors, output_weights, vec![]);

    let encoded: Vec<Vec<usize>> = documents.iter().map(|doc| model.encode(doc)).collect();
    if !encoded.iter().any(|e| e.len() > config.window) {
        return Err(Error::Training(format!(
            "no document has at least {} in-vocabulary tokens",
            config.window + 1
        )));
    }
    let per_epoch: usize = encoded.iter().map(Vec::len).sum();
    let total = (per_epoch * config.epochs).max(1) as f64;
    let mut order: Vec<usize> = (0..documents.len()).collect();
    let mut done = 0usize;
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for &di in &order {
            let words = &encoded[di];
            let mut doc_vec = model.doc_vector(di).to_vec();
            for pos in 0..words.len() {
                let lr = decayed_lr(config.initial_lr, done as f64 / total);
                let ctx = model.context(words, pos, &mut rng);
                let (targets, labels) = model.samples(words[pos], &mut rng);
                epoch_loss += model.train_step(&mut doc_vec, &ctx, &targets, &labels, lr);
                done += 1;
            }
            model.doc_vectors[di * d..(di + 1) * d].copy_from_slice(&doc_vec);
        }
        let mean = epoch_loss / per_epoch.max(1) as f64;
        if !mean.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        model.loss_history.push(mean);
    }
    Ok(model)
}

impl WordEmbeddings for Doc2VecModel {
    fn words(&self) -> &[String] {
        &self.vocab
    }

    fn vector(&self, index: usize) -> &[f64] {
        let d = self.config.dim;
        &self.word_vectors[index * d..(index + 1) * d]
    }

    fn index_of(&self, word: &str) -> Option<usize> {
        self.word_index(word)
    }
}

#[derive(Serialize, Deserialize)]
struct VocabBlob {
    words: Vec<String>,
    counts: Vec<u64>,
}

impl Persist for Doc2VecModel {
    fn to_container(&self) -> Result<ModelContainer> {
        let mut c = ModelContainer::new(ModelKind::Doc2Vec, &self.config)?;
        c.push_json(
            "vocab",
            &VocabBlob {
                words: self.vocab.clone(),
                counts: self.counts.clone(),
            },
        )?;
        c.push_f64s("word_vectors", &self.word_vectors);
        c.push_f64s("doc_vectors", &self.doc_vectors);
        c.push_f64s("output_weights", &self.output_weights);
        c.push_f64s("loss_history", &self.loss_history);
        Ok(c)
    }

    fn from_container(c: &ModelContainer) -> Result<Doc2VecModel> {
        c.expect_kind(ModelKind::Doc2Vec)?;
        let config: Doc2VecConfig = c.config()?;
        let vocab: VocabBlob = c.json("vocab")?;
        let word_vectors = c.f64s("word_vectors")?;
        let doc_vectors = c.f64s("doc_vectors")?;
        let output_weights = c.f64s("output_weights")?;
        let v = vocab.words.len();
        if vocab.counts.len() != v
            || word_vectors.len() != v * config.dim
            || output_weights.len() != v * config.dim
            || doc_vectors.len() % config.dim.max(1) != 0
        {
            return Err(Error::Container("doc2vec blob shapes do not match the vocabulary".into()));
        }
        Ok(Doc2VecModel::from_parts(
            config,
            vocab.words,
            vocab.counts,
            word_vectors,
            doc_vectors,
            output_weights,
            c.f64s("loss_history")?,
        ))
    }
}
