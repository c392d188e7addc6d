use ndarray::{s, Array1, Array2, Array3, ArrayView2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{CAttModel, CAttParams};
use crate::error::{Error, Result};

const LN_EPS: f64 = 1e-5;

/// Users padded to a common post count. Valid posts keep their order; padding
/// rows are zero and masked out.
#[derive(Debug, Clone, PartialEq)]
pub struct PaddedBatch {
    /// batch × posts × d_model
    pub tensor: Array3<f64>,
    /// `true` marks a real post.
    pub mask: Array2<bool>,
    pub labels: Vec<bool>,
}

impl PaddedBatch {
    /// Keeps the most recent `max_posts` rows of each user (rows are in time
    /// order) and pads to the longest user in the batch.
    pub fn from_users(users: &[&[Vec<f64>]], labels: &[bool], max_posts: usize, d_model: usize) -> Result<PaddedBatch> {
        if users.len() != labels.len() {
            return Err(Error::Validation("batch users and labels differ in length".into()));
        }
        let len = users.iter().map(|u| u.len().min(max_posts)).max().unwrap_or(0);
        let mut tensor = Array3::zeros((users.len(), len, d_model));
        let mut mask = Array2::from_elem((users.len(), len), false);
        for (b, rows) in users.iter().enumerate() {
            if rows.is_empty() {
                return Err(Error::Validation("user has no post embeddings; every post would be masked".into()));
            }
            let kept = &rows[rows.len().saturating_sub(max_posts)..];
            for (t, r) in kept.iter().enumerate() {
                if r.len() != d_model {
                    return Err(Error::DimensionMismatch { expected: d_model, got: r.len() });
                }
                tensor.slice_mut(s![b, t, ..]).assign(&ArrayView2::from_shape((1, d_model), r).unwrap().row(0));
                mask[[b, t]] = true;
            }
        }
        Ok(PaddedBatch {
            tensor,
            mask,
            labels: labels.to_vec(),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Intermediate values of one user's forward pass. Rows of the per-post
/// matrices refer to `valid` positions only, except `z` and `conv`, which span
/// the padded length.
#[derive(Debug, Clone)]
pub struct SampleCache {
    pub valid: Vec<usize>,
    pub x: Array2<f64>,
    pub q: Array2<f64>,
    pub k: Array2<f64>,
    pub v: Array2<f64>,
    /// Per-head attention weights (valid × valid); rows sum to 1.
    pub attn: Vec<Array2<f64>>,
    pub o: Array2<f64>,
    pub dropout: Option<Array2<f64>>,
    pub xhat: Array2<f64>,
    pub inv_std: Array1<f64>,
    pub h: Array2<f64>,
    pub a: Array2<f64>,
    /// Attention-layer weight of each valid post.
    pub alpha: Array1<f64>,
    pub z: Array2<f64>,
    pub conv: Array2<f64>,
    pub pooled: Array1<f64>,
    pub probs: [f64; 2],
    pub log_probs: [f64; 2],
}

#[derive(Debug, Clone)]
pub struct Forward {
    /// batch × 2; column 1 is the risk probability.
    pub probs: Array2<f64>,
    /// Mean cross-entropy against the batch labels.
    pub loss: f64,
    pub samples: Vec<SampleCache>,
}

fn softmax_rows(m: &mut Array2<f64>) {
    for mut row in m.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
}

/// Index ranges `(t0, t1)` of output positions that read input `t + off`.
fn conv_range(len: usize, off: isize) -> Option<(usize, usize)> {
    let t0 = (-off).max(0) as usize;
    let t1 = (len as isize - off).min(len as isize);
    (t1 > t0 as isize).then_some((t0, t1 as usize))
}

impl CAttModel {
    /// Runs the network. Passing a generator enables dropout (training mode).
    pub fn forward(&self, batch: &PaddedBatch, mut dropout_rng: Option<&mut ChaCha8Rng>) -> Result<Forward> {
        let d = self.config.d_model;
        if batch.tensor.shape()[2] != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: batch.tensor.shape()[2],
            });
        }
        if batch.is_empty() {
            return Err(Error::Validation("empty batch".into()));
        }
        let mut samples = Vec::with_capacity(batch.len());
        let mut probs = Array2::zeros((batch.len(), 2));
        let mut loss = 0.0;
        for b in 0..batch.len() {
            let mask: Vec<bool> = batch.mask.row(b).to_vec();
            let cache = self.forward_sample(batch.tensor.index_axis(Axis(0), b), &mask, dropout_rng.as_deref_mut())?;
            probs[[b, 0]] = cache.probs[0];
            probs[[b, 1]] = cache.probs[1];
            loss -= cache.log_probs[usize::from(batch.labels[b])];
            samples.push(cache);
        }
        Ok(Forward {
            probs,
            loss: loss / batch.len() as f64,
            samples,
        })
    }

    fn forward_sample(&self, x_full: ArrayView2<f64>, mask: &[bool], rng: Option<&mut ChaCha8Rng>) -> Result<SampleCache> {
        let cfg = &self.config;
        let p = &self.params;
        let d = cfg.d_model;
        let valid: Vec<usize> = (0..mask.len()).filter(|&t| mask[t]).collect();
        if valid.is_empty() {
            return Err(Error::Validation("user has every post masked".into()));
        }
        let x = x_full.select(Axis(0), &valid);
        let q = x.dot(&p.wq) + &p.bq;
        let k = x.dot(&p.wk) + &p.bk;
        let v = x.dot(&p.wv) + &p.bv;

        let dh = d / cfg.n_heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let mut o = Array2::zeros(x.raw_dim());
        let mut attn = Vec::with_capacity(cfg.n_heads);
        for head in 0..cfg.n_heads {
            let cols = s![.., head * dh..(head + 1) * dh];
            let mut sc = q.slice(cols).dot(&k.slice(cols).t()) * scale;
            softmax_rows(&mut sc);
            o.slice_mut(cols).assign(&sc.dot(&v.slice(cols)));
            attn.push(sc);
        }
        let mut m = o.dot(&p.wo) + &p.bo;
        let dropout = match rng {
            Some(rng) if cfg.dropout > 0.0 => {
                let keep = 1.0 - cfg.dropout;
                let dm = Array2::from_shape_fn(m.raw_dim(), |_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 });
                m *= &dm;
                Some(dm)
            }
            _ => None,
        };

        let r = &x + &m;
        let mean = r.mean_axis(Axis(1)).unwrap();
        let centered = &r - &mean.view().insert_axis(Axis(1));
        let var = centered.mapv(|v| v * v).mean_axis(Axis(1)).unwrap();
        let inv_std = var.mapv(|v| 1.0 / (v + LN_EPS).sqrt());
        let xhat = &centered * &inv_std.view().insert_axis(Axis(1));
        let h = &xhat * &p.ln_gamma + &p.ln_beta;

        let a = (&h + &p.attn_c).mapv(f64::tanh);
        let e = a.dot(&p.attn_u);
        let emax = e.fold(f64::NEG_INFINITY, |acc, &v| acc.max(v));
        let mut alpha = e.mapv(|v| (v - emax).exp());
        alpha /= alpha.sum();
        let zv = &h * &alpha.view().insert_axis(Axis(1));

        let len = mask.len();
        let mut z = Array2::zeros((len, d));
        for (i, &t) in valid.iter().enumerate() {
            z.row_mut(t).assign(&zv.row(i));
        }
        let half = (cfg.conv_kernel / 2) as isize;
        let mut y = Array2::zeros((len, cfg.conv_channels)) + &p.conv_b;
        for kk in 0..cfg.conv_kernel {
            let off = kk as isize - half;
            if let Some((t0, t1)) = conv_range(len, off) {
                let src = z.slice(s![(t0 as isize + off) as usize..(t1 as isize + off) as usize, ..]);
                let wk = p.conv_w.index_axis(Axis(2), kk);
                let mut dst = y.slice_mut(s![t0..t1, ..]);
                dst += &src.dot(&wk.t());
            }
        }
        let conv = y.mapv(f64::tanh);
        let pooled = conv.select(Axis(0), &valid).mean_axis(Axis(0)).unwrap();
        let logits = pooled.dot(&p.out_w) + &p.out_b;
        let lmax = logits[0].max(logits[1]);
        let lse = lmax + ((logits[0] - lmax).exp() + (logits[1] - lmax).exp()).ln();
        let log_probs = [logits[0] - lse, logits[1] - lse];
        Ok(SampleCache {
            valid,
            x,
            q,
            k,
            v,
            attn,
            o,
            dropout,
            xhat,
            inv_std,
            h,
            a,
            alpha,
            z,
            conv,
            pooled,
            probs: [log_probs[0].exp(), log_probs[1].exp()],
            log_probs,
        })
    }

    /// Gradients of the batch-mean cross-entropy with respect to every parameter.
    pub fn backward(&self, batch: &PaddedBatch, fwd: &Forward) -> CAttParams {
        let mut g = CAttParams::zeros(&self.config);
        let w = 1.0 / batch.len() as f64;
        for (cache, &label) in fwd.samples.iter().zip(&batch.labels) {
            self.backward_sample(cache, label, w, &mut g);
        }
        g
    }

    fn backward_sample(&self, c: &SampleCache, label: bool, weight: f64, g: &mut CAttParams) {
        let cfg = &self.config;
        let p = &self.params;
        let d = cfg.d_model;
        let n_valid = c.valid.len() as f64;

        let target = [f64::from(!label), f64::from(label)];
        let dlogits = Array1::from_iter((0..2).map(|i| (c.probs[i] - target[i]) * weight));
        g.out_w += &outer(&c.pooled, &dlogits);
        g.out_b += &dlogits;
        let dpooled = p.out_w.dot(&dlogits);

        let len = c.z.nrows();
        let mut dy = Array2::zeros((len, cfg.conv_channels));
        for &t in &c.valid {
            let ct = c.conv.row(t);
            for o in 0..cfg.conv_channels {
                dy[[t, o]] = dpooled[o] / n_valid * (1.0 - ct[o] * ct[o]);
            }
        }
        g.conv_b += &dy.sum_axis(Axis(0));
        let half = (cfg.conv_kernel / 2) as isize;
        let mut dz = Array2::zeros((len, d));
        for kk in 0..cfg.conv_kernel {
            let off = kk as isize - half;
            if let Some((t0, t1)) = conv_range(len, off) {
                let (s0, s1) = ((t0 as isize + off) as usize, (t1 as isize + off) as usize);
                let dys = dy.slice(s![t0..t1, ..]);
                let wk = p.conv_w.index_axis(Axis(2), kk);
                let mut gk = g.conv_w.index_axis_mut(Axis(2), kk);
                gk += &dys.t().dot(&c.z.slice(s![s0..s1, ..]));
                let mut dst = dz.slice_mut(s![s0..s1, ..]);
                dst += &dys.dot(&wk);
            }
        }

        let dzv = dz.select(Axis(0), &c.valid);
        let mut dh = &dzv * &c.alpha.view().insert_axis(Axis(1));
        let dalpha = (&dzv * &c.h).sum_axis(Axis(1));
        let dot_ad = c.alpha.dot(&dalpha);
        let de = &c.alpha * &(dalpha - dot_ad);
        g.attn_u += &c.a.t().dot(&de);
        let dpre = outer(&de, &p.attn_u) * c.a.mapv(|v| 1.0 - v * v);
        dh += &dpre;
        g.attn_c += &dpre.sum_axis(Axis(0));

        g.ln_gamma += &(&dh * &c.xhat).sum_axis(Axis(0));
        g.ln_beta += &dh.sum_axis(Axis(0));
        let dxhat = &dh * &p.ln_gamma;
        let mean_dx = dxhat.mean_axis(Axis(1)).unwrap();
        let mean_dxx = (&dxhat * &c.xhat).mean_axis(Axis(1)).unwrap();
        let mut dm = (&dxhat - &mean_dx.view().insert_axis(Axis(1)) - &c.xhat * &mean_dxx.view().insert_axis(Axis(1)))
            * &c.inv_std.view().insert_axis(Axis(1));
        if let Some(mask) = &c.dropout {
            dm *= mask;
        }

        g.wo += &c.o.t().dot(&dm);
        g.bo += &dm.sum_axis(Axis(0));
        let d_o = dm.dot(&p.wo.t());

        let dh_size = d / cfg.n_heads;
        let scale = 1.0 / (dh_size as f64).sqrt();
        let mut dq = Array2::zeros(c.q.raw_dim());
        let mut dk = Array2::zeros(c.k.raw_dim());
        let mut dv = Array2::zeros(c.v.raw_dim());
        for (head, pm) in c.attn.iter().enumerate() {
            let cols = s![.., head * dh_size..(head + 1) * dh_size];
            let dos = d_o.slice(cols);
            let dp = dos.dot(&c.v.slice(cols).t());
            dv.slice_mut(cols).assign(&pm.t().dot(&dos));
            let rowdot = (&dp * pm).sum_axis(Axis(1));
            let ds = pm * &(&dp - &rowdot.view().insert_axis(Axis(1))) * scale;
            dq.slice_mut(cols).assign(&ds.dot(&c.k.slice(cols)));
            dk.slice_mut(cols).assign(&ds.t().dot(&c.q.slice(cols)));
        }
        g.wq += &c.x.t().dot(&dq);
        g.bq += &dq.sum_axis(Axis(0));
        g.wk += &c.x.t().dot(&dk);
        g.bk += &dk.sum_axis(Axis(0));
        g.wv += &c.x.t().dot(&dv);
        g.bv += &dv.sum_axis(Axis(0));
    }
}

fn outer(a: &Array1<f64>, b: &Array1<f64>) -> Array2<f64> {
    let a2 = a.view().insert_axis(Axis(1));
    let b2 = b.view().insert_axis(Axis(0));
    a2.dot(&b2)
}
