//! C-Attention network: post embeddings → multi-head self-attention (no
//! positional encoding) with residual and layer norm → additive attention that
//! re-weights each post → 1-D convolution over the post axis → mean pool →
//! linear → softmax.

mod network;
mod train;

use ndarray::{Array1, Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::container::{ModelContainer, ModelKind, Persist};
use crate::error::{Error, Result};

pub use network::{Forward, PaddedBatch, SampleCache};
pub use train::{predict, predict_many, train, write_loss_history, LossRecord, TrainOutcome, UserExample};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CAttConfig {
    pub d_model: usize,
    pub n_heads: usize,
    pub max_posts: usize,
    pub conv_channels: usize,
    pub conv_kernel: usize,
    pub dropout: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub patience: usize,
    pub seed: u64,
}

impl Default for CAttConfig {
    fn default() -> Self {
        CAttConfig {
            d_model: 100,
            n_heads: 4,
            max_posts: 64,
            conv_channels: 16,
            conv_kernel: 3,
            dropout: 0.1,
            lr: 1e-3,
            batch_size: 16,
            epochs: 60,
            patience: 5,
            seed: 0,
        }
    }
}

impl CAttConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("c-attention: {m}")));
        if self.d_model == 0 || self.n_heads == 0 || !self.d_model.is_multiple_of(self.n_heads) {
            return bad("n_heads must divide d_model");
        }
        if self.conv_kernel.is_multiple_of(2) {
            return bad("conv_kernel must be odd");
        }
        if self.conv_channels == 0 || self.max_posts == 0 || self.batch_size == 0 {
            return bad("conv_channels, max_posts and batch_size must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0,1)");
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return bad("lr must be a non-negative number");
        }
        Ok(())
    }
}

pub const PARAM_NAMES: [&str; 16] = [
    "wq", "bq", "wk", "bk", "wv", "bv", "wo", "bo", "ln_gamma", "ln_beta", "attn_u", "attn_c", "conv_w", "conv_b",
    "out_w", "out_b",
];

/// All trainable tensors. Projections act on row vectors (`X W + b`);
/// `conv_w` is `channels × d_model × kernel`; `out_w` is `channels × 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct CAttParams {
    pub wq: Array2<f64>,
    pub bq: Array1<f64>,
    pub wk: Array2<f64>,
    pub bk: Array1<f64>,
    pub wv: Array2<f64>,
    pub bv: Array1<f64>,
    pub wo: Array2<f64>,
    pub bo: Array1<f64>,
    pub ln_gamma: Array1<f64>,
    pub ln_beta: Array1<f64>,
    pub attn_u: Array1<f64>,
    pub attn_c: Array1<f64>,
    pub conv_w: Array3<f64>,
    pub conv_b: Array1<f64>,
    pub out_w: Array2<f64>,
    pub out_b: Array1<f64>,
}

impl CAttParams {
    pub fn zeros(cfg: &CAttConfig) -> CAttParams {
        let d = cfg.d_model;
        let ch = cfg.conv_channels;
        CAttParams {
            wq: Array2::zeros((d, d)),
            bq: Array1::zeros(d),
            wk: Array2::zeros((d, d)),
            bk: Array1::zeros(d),
            wv: Array2::zeros((d, d)),
            bv: Array1::zeros(d),
            wo: Array2::zeros((d, d)),
            bo: Array1::zeros(d),
            ln_gamma: Array1::zeros(d),
            ln_beta: Array1::zeros(d),
            attn_u: Array1::zeros(d),
            attn_c: Array1::zeros(d),
            conv_w: Array3::zeros((ch, d, cfg.conv_kernel)),
            conv_b: Array1::zeros(ch),
            out_w: Array2::zeros((ch, 2)),
            out_b: Array1::zeros(2),
        }
    }

    /// Glorot-uniform matrices, zero biases, unit layer-norm gain.
    pub fn init(cfg: &CAttConfig, seed: u64) -> CAttParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = CAttParams::zeros(cfg);
        let d = cfg.d_model as f64;
        let ch = cfg.conv_channels as f64;
        let k = cfg.conv_kernel as f64;
        let mut fill = |t: &mut [f64], bound: f64| t.iter_mut().for_each(|v| *v = rng.random_range(-bound..bound));
        let glorot = |a: f64, b: f64| (6.0 / (a + b)).sqrt();
        for w in [&mut p.wq, &mut p.wk, &mut p.wv, &mut p.wo] {
            fill(w.as_slice_mut().unwrap(), glorot(d, d));
        }
        fill(p.attn_u.as_slice_mut().unwrap(), 1.0 / d.sqrt());
        fill(p.conv_w.as_slice_mut().unwrap(), glorot(d * k, ch * k));
        fill(p.out_w.as_slice_mut().unwrap(), glorot(ch, 2.0));
        p.ln_gamma.fill(1.0);
        p
    }

    pub fn tensors(&self) -> [&[f64]; 16] {
        [
            self.wq.as_slice().unwrap(),
            self.bq.as_slice().unwrap(),
            self.wk.as_slice().unwrap(),
            self.bk.as_slice().unwrap(),
            self.wv.as_slice().unwrap(),
            self.bv.as_slice().unwrap(),
            self.wo.as_slice().unwrap(),
            self.bo.as_slice().unwrap(),
            self.ln_gamma.as_slice().unwrap(),
            self.ln_beta.as_slice().unwrap(),
            self.attn_u.as_slice().unwrap(),
            self.attn_c.as_slice().unwrap(),
            self.conv_w.as_slice().unwrap(),
            self.conv_b.as_slice().unwrap(),
            self.out_w.as_slice().unwrap(),
            self.out_b.as_slice().unwrap(),
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 16] {
        [
            self.wq.as_slice_mut().unwrap(),
            self.bq.as_slice_mut().unwrap(),
            self.wk.as_slice_mut().unwrap(),
            self.bk.as_slice_mut().unwrap(),
            self.wv.as_slice_mut().unwrap(),
            self.bv.as_slice_mut().unwrap(),
            self.wo.as_slice_mut().unwrap(),
            self.bo.as_slice_mut().unwrap(),
            self.ln_gamma.as_slice_mut().unwrap(),
            self.ln_beta.as_slice_mut().unwrap(),
            self.attn_u.as_slice_mut().unwrap(),
            self.attn_c.as_slice_mut().unwrap(),
            self.conv_w.as_slice_mut().unwrap(),
            self.conv_b.as_slice_mut().unwrap(),
            self.out_w.as_slice_mut().unwrap(),
            self.out_b.as_slice_mut().unwrap(),
        ]
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CAttModel {
    pub config: CAttConfig,
    pub params: CAttParams,
}

impl CAttModel {
    pub fn new(config: CAttConfig) -> Result<CAttModel> {
        config.validate()?;
        let params = CAttParams::init(&config, config.seed);
        Ok(CAttModel { config, params })
    }
}

impl Persist for CAttModel {
    fn to_container(&self) -> Result<ModelContainer> {
        let mut c = ModelContainer::new(ModelKind::CAttention, &self.config)?;
        for (name, t) in PARAM_NAMES.iter().zip(self.params.tensors()) {
            c.push_f64s(name, t);
        }
        Ok(c)
    }

    fn from_container(c: &ModelContainer) -> Result<CAttModel> {
        c.expect_kind(ModelKind::CAttention)?;
        let config: CAttConfig = c.config()?;
        config.validate()?;
        let mut params = CAttParams::zeros(&config);
        for (name, t) in PARAM_NAMES.iter().zip(params.tensors_mut()) {
            let data = c.f64s(name)?;
            if data.len() != t.len() {
                return Err(Error::Container(format!("tensor `{name}` has {} values, expected {}", data.len(), t.len())));
            }
            t.copy_from_slice(&data);
        }
        Ok(CAttModel { config, params })
    }
}
