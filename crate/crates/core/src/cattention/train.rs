use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{CAttConfig, CAttModel, CAttParams, PaddedBatch};
use crate::error::{Error, Result};
use crate::eval::metrics::{f_beta, ConfusionCounts};

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// One user's post embeddings in time order.
#[derive(Debug, Clone, PartialEq)]
pub struct UserExample {
    pub user_id: String,
    pub rows: Vec<Vec<f64>>,
    pub label: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub val_f2: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: CAttModel,
    pub history: Vec<LossRecord>,
    /// Epoch whose parameters were kept.
    pub best_epoch: usize,
}

impl TrainOutcome {
    pub fn write_history<W: Write>(&self, out: W) -> Result<()> {
        write_loss_history(&self.history, out)
    }
}

/// CSV with header `epoch,train_loss,val_loss,val_f2`; missing validation
/// values are left empty.
pub fn write_loss_history<W: Write>(history: &[LossRecord], mut out: W) -> Result<()> {
    writeln!(out, "epoch,train_loss,val_loss,val_f2")?;
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
    for r in history {
        writeln!(out, "{},{:.6},{},{}", r.epoch, r.train_loss, opt(r.val_loss), opt(r.val_f2))?;
    }
    Ok(())
}

struct Adam {
    m: CAttParams,
    v: CAttParams,
    t: i32,
}

impl Adam {
    fn new(cfg: &CAttConfig) -> Adam {
        Adam {
            m: CAttParams::zeros(cfg),
            v: CAttParams::zeros(cfg),
            t: 0,
        }
    }

    fn step(&mut self, params: &mut CAttParams, grads: &CAttParams, lr: f64) {
        self.t += 1;
        let c1 = 1.0 - BETA1.powi(self.t);
        let c2 = 1.0 - BETA2.powi(self.t);
        let ms = self.m.tensors_mut();
        let vs = self.v.tensors_mut();
        for (((p, g), m), v) in params.tensors_mut().into_iter().zip(grads.tensors()).zip(ms).zip(vs) {
            for i in 0..p.len() {
                m[i] = BETA1 * m[i] + (1.0 - BETA1) * g[i];
                v[i] = BETA2 * v[i] + (1.0 - BETA2) * g[i] * g[i];
                p[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + ADAM_EPS);
            }
        }
    }
}

fn make_batch(model: &CAttModel, users: &[&UserExample]) -> Result<PaddedBatch> {
    let rows: Vec<&[Vec<f64>]> = users.iter().map(|u| u.rows.as_slice()).collect();
    let labels: Vec<bool> = users.iter().map(|u| u.label).collect();
    PaddedBatch::from_users(&rows, &labels, model.config.max_posts, model.config.d_model)
}

/// Mean loss and risk probabilities in eval mode.
fn evaluate(model: &CAttModel, users: &[UserExample]) -> Result<(f64, Vec<f64>)> {
    let mut loss = 0.0;
    let mut scores = Vec::with_capacity(users.len());
    let refs: Vec<&UserExample> = users.iter().collect();
    for chunk in refs.chunks(model.config.batch_size) {
        let batch = make_batch(model, chunk)?;
        let f = model.forward(&batch, None)?;
        loss += f.loss * chunk.len() as f64;
        scores.extend(f.probs.column(1).iter().copied());
    }
    Ok((loss / users.len() as f64, scores))
}

fn selection_metrics(scores: &[f64], users: &[UserExample]) -> (f64, f64) {
    let mut c = ConfusionCounts::default();
    for (s, u) in scores.iter().zip(users) {
        c.record(*s >= 0.5, u.label);
    }
    (f_beta(&c, 2.0).unwrap_or(0.0), f_beta(&c, 1.0).unwrap_or(0.0))
}

/// Mini-batch Adam on mean cross-entropy. With a validation set, the parameters
/// of the epoch with the best (F2, F1, −loss) are kept and training stops after
/// `patience` epochs without improvement.
pub fn train(config: &CAttConfig, train: &[UserExample], val: Option<&[UserExample]>) -> Result<TrainOutcome> {
    config.validate()?;
    let pos = train.iter().filter(|u| u.label).count();
    if pos == 0 || pos == train.len() {
        return Err(Error::Validation("c-attention training data must contain both classes".into()));
    }
    let val = val.filter(|v| !v.is_empty());
    let mut model = CAttModel::new(config.clone())?;
    let mut adam = Adam::new(config);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = Vec::new();
    let mut best: Option<((f64, f64, f64), CAttParams, usize)> = None;
    let mut stale = 0;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let users: Vec<&UserExample> = chunk.iter().map(|&i| &train[i]).collect();
            let batch = make_batch(&model, &users)?;
            let f = model.forward(&batch, Some(&mut rng))?;
            if !f.loss.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            total += f.loss * users.len() as f64;
            let grads = model.backward(&batch, &f);
            adam.step(&mut model.params, &grads, config.lr);
        }
        if !model.params.all_finite() {
            return Err(Error::Diverged { epoch });
        }
        let train_loss = total / train.len() as f64;
        let mut record = LossRecord {
            epoch,
            train_loss,
            val_loss: None,
            val_f2: None,
        };
        if let Some(val) = val {
            let (val_loss, scores) = evaluate(&model, val)?;
            if !val_loss.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            let (f2, f1) = selection_metrics(&scores, val);
            record.val_loss = Some(val_loss);
            record.val_f2 = Some(f2);
            let key = (f2, f1, -val_loss);
            if best.as_ref().is_none_or(|(k, _, _)| key > *k) {
                best = Some((key, model.params.clone(), epoch));
                stale = 0;
            } else {
                stale += 1;
            }
        }
        log::debug!("c-att epoch {epoch}: train loss {train_loss:.4}");
        history.push(record);
        if stale >= config.patience {
            break;
        }
    }
    let best_epoch = match best {
        Some((_, params, epoch)) => {
            model.params = params;
            epoch
        }
        None => history.len(),
    };
    Ok(TrainOutcome {
        model,
        history,
        best_epoch,
    })
}

/// Label and risk probability for one user, in eval mode.
pub fn predict(model: &CAttModel, rows: &[Vec<f64>]) -> Result<(bool, f64)> {
    if rows.is_empty() {
        return Err(Error::Validation("cannot predict from an empty embedding matrix".into()));
    }
    let batch = PaddedBatch::from_users(&[rows], &[false], model.config.max_posts, model.config.d_model)?;
    let p = model.forward(&batch, None)?.probs[[0, 1]];
    Ok((p >= 0.5, p))
}

/// Risk probabilities for many users, batched.
pub fn predict_many(model: &CAttModel, users: &[&[Vec<f64>]]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(users.len());
    for chunk in users.chunks(model.config.batch_size) {
        let labels = vec![false; chunk.len()];
        let batch = PaddedBatch::from_users(chunk, &labels, model.config.max_posts, model.config.d_model)?;
        out.extend(model.forward(&batch, None)?.probs.column(1).iter().copied());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn examples(seed: u64, n: usize, d: usize, shift: f64) -> Vec<UserExample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let label = i % 2 == 0;
                let posts = rng.random_range(1..6);
                let rows = (0..posts)
                    .map(|_| (0..d).map(|j| rng.random_range(-1.0..1.0) + if label && j < 2 { shift } else { 0.0 }).collect())
                    .collect();
                UserExample { user_id: format!("u{i}"), rows, label }
            })
            .collect()
    }

    fn small() -> CAttConfig {
        CAttConfig {
            d_model: 8,
            n_heads: 2,
            conv_channels: 4,
            epochs: 30,
            batch_size: 8,
            lr: 5e-3,
            ..Default::default()
        }
    }

    #[test]
    fn zero_lr_leaves_parameters_unchanged() {
        let cfg = CAttConfig { lr: 0.0, epochs: 3, ..small() };
        let out = train(&cfg, &examples(1, 16, 8, 2.0), None).unwrap();
        assert_eq!(out.model.params, CAttModel::new(cfg).unwrap().params);
    }

    #[test]
    fn separable_loss_drops() {
        let data = examples(2, 32, 8, 2.0);
        let out = train(&small(), &data, None).unwrap();
        let first = out.history[0].train_loss;
        let last = out.history.last().unwrap().train_loss;
        assert!(last < 0.2 * first, "{first} -> {last}");
    }

    #[test]
    fn early_stopping_and_history_csv() {
        let cfg = CAttConfig { epochs: 40, patience: 2, ..small() };
        let data = examples(3, 24, 8, 3.0);
        let val = examples(4, 10, 8, 3.0);
        let out = train(&cfg, &data, Some(&val)).unwrap();
        assert!(out.history.len() <= 40);
        let mut buf = Vec::new();
        out.write_history(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("epoch,train_loss,val_loss,val_f2\n"));
        assert_eq!(text.lines().count(), out.history.len() + 1);
    }

    #[test]
    fn predict_matches_forward() {
        let m = CAttModel::new(small()).unwrap();
        let data = examples(5, 2, 8, 0.0);
        let (_, score) = predict(&m, &data[0].rows).unwrap();
        let many = predict_many(&m, &[&data[0].rows, &data[1].rows]).unwrap();
        assert_eq!(score, many[0]);
        assert!(predict(&m, &[]).is_err());
    }
}
