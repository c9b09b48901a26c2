//! Training loop, KL annealing and resumable checkpoints.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{BatchNoise, LossTerms, VaeConfig, VaeModel};
use crate::nn::{adam_update, clip_gradients, export_tensors, import_tensors, AdamConfig, OptimizerState, Parameters, TensorRecord, Tensor};
use crate::scalar::Scalar;
use crate::sketch::{augment_scale, make_stroke_batches, Sketch, StrokeBatch};
use crate::{Error, Result};

/// `w_KL = 1 − (1 − w_KLs) · R^step`, evaluated as
/// `w_KLs + (1 − w_KLs)(1 − R^step)` so step 0 returns `w_KLs` exactly.
pub fn kl_weight(step: u64, w_kl_start: f64, decay: f64) -> f64 {
    w_kl_start + (1.0 - w_kl_start) * (1.0 - decay.powf(step as f64))
}

/// Point count at quantile `q` of all stroke lengths (nearest rank).
pub fn stroke_length_percentile(sketches: &[Sketch], q: f64) -> Option<usize> {
    let mut lens: Vec<usize> = sketches.iter().flat_map(|s| s.strokes()).map(|st| st.len()).collect();
    if lens.is_empty() {
        return None;
    }
    lens.sort_unstable();
    let rank = ((q.clamp(0.0, 1.0) * lens.len() as f64).ceil() as usize).max(1);
    Some(lens[rank - 1])
}

/// One optimization step of the loss history.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub step: u64,
    pub epoch: usize,
    pub j_d: f64,
    pub j_ps: f64,
    pub j_kl: f64,
    pub w_kl: f64,
    pub total: f64,
}

/// Model plus optimizer state. Every epoch draws its randomness from a
/// stream derived from `(seed, epoch)`, so a run resumed from a checkpoint
/// continues exactly as the uninterrupted run would have.
#[derive(Debug, Clone)]
pub struct Trainer<T> {
    pub model: VaeModel<T>,
    pub optimizer: OptimizerState<T>,
    pub seed: u64,
    pub epoch: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VaeCheckpoint {
    pub config: VaeConfig,
    pub seed: u64,
    pub epoch: usize,
    pub step: u64,
    pub params: Vec<TensorRecord>,
    pub adam_m: Vec<TensorRecord>,
    pub adam_v: Vec<TensorRecord>,
}

impl VaeCheckpoint {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_vec(self)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_slice(&std::fs::read(path)?)?)
    }

    /// The model alone, without optimizer state.
    pub fn model<T: Scalar>(&self) -> Result<VaeModel<T>> {
        self.config.validate()?;
        // initialization values are overwritten, any rng will do
        let mut m = VaeModel::new(self.config.clone(), &mut ChaCha8Rng::seed_from_u64(0))?;
        import_tensors(&mut m, &self.params)?;
        Ok(m)
    }
}

fn records_from_moments<T: Scalar>(names: &[String], t: &[Tensor<T>]) -> Vec<TensorRecord> {
    names.iter().zip(t).map(|(n, t)| TensorRecord::from_tensor(n.clone(), t)).collect()
}

fn moments_from_records<T: Scalar>(names: &[String], like: &[&Tensor<T>], recs: &[TensorRecord]) -> Result<Vec<Tensor<T>>> {
    if recs.len() != names.len() {
        return Err(Error::Checkpoint(format!("expected {} optimizer tensors, found {}", names.len(), recs.len())));
    }
    names
        .iter()
        .zip(like)
        .zip(recs)
        .map(|((n, l), r)| {
            if *n != r.name || [l.rows, l.cols] != r.shape {
                return Err(Error::Checkpoint(format!("optimizer tensor {} does not match {n}", r.name)));
            }
            r.to_tensor()
        })
        .collect()
}

impl<T: Scalar> Trainer<T> {
    pub fn new(model: VaeModel<T>, seed: u64) -> Self {
        let optimizer = OptimizerState::new(&model);
        Self { model, optimizer, seed, epoch: 0 }
    }

    /// Number of optimization steps taken so far.
    pub fn step(&self) -> u64 {
        self.optimizer.step
    }

    fn epoch_rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.epoch as u64);
        rng
    }

    fn augment(batch: &StrokeBatch, rng: &mut ChaCha8Rng) -> StrokeBatch {
        let mut out = batch.clone();
        for (i, row) in out.sequences.iter_mut().enumerate() {
            if !batch.is_padding_row(i) {
                *row = augment_scale(row, rng);
            }
        }
        out
    }

    /// One optimization step on `batch`.
    pub fn train_batch(&mut self, batch: &StrokeBatch, rng: &mut ChaCha8Rng) -> Result<LossRecord> {
        let cfg = self.model.config.clone();
        let step = self.step();
        let w_kl = kl_weight(step, cfg.kl_weight_start, cfg.kl_decay);
        let batch = if cfg.augment { Self::augment(batch, rng) } else { batch.clone() };
        let noise = BatchNoise::sample(&self.model, &batch, true, rng);
        let (terms, mut grads) = self.model.total_loss_and_grad(&batch, w_kl, &noise)?;
        if !terms.total.is_finite() || !grads.all_finite() {
            return Err(Error::NonFinite(format!(
                "training step {step}: J_d={} J_ps={} J_KL={} (gradient finite: {})",
                terms.j_d,
                terms.j_ps,
                terms.j_kl,
                grads.all_finite()
            )));
        }
        clip_gradients(&mut grads, T::lit(cfg.grad_clip));
        adam_update(&mut self.model, &grads, &mut self.optimizer, &AdamConfig::with_lr(cfg.lr))?;
        Ok(LossRecord {
            step,
            epoch: self.epoch,
            j_d: terms.j_d,
            j_ps: terms.j_ps,
            j_kl: terms.j_kl,
            w_kl,
            total: terms.total,
        })
    }

    /// Shuffles the corpus, batches it by stroke ordinal and takes one step
    /// per batch.
    pub fn train_epoch(&mut self, sketches: &[Sketch]) -> Result<Vec<LossRecord>> {
        if sketches.is_empty() {
            return Err(Error::invalid("cannot train on an empty corpus"));
        }
        let mut rng = self.epoch_rng();
        let mut order: Vec<usize> = (0..sketches.len()).collect();
        order.shuffle(&mut rng);
        let shuffled: Vec<Sketch> = order.iter().map(|&i| sketches[i].clone()).collect();
        let batches = make_stroke_batches(&shuffled, self.model.config.batch_size)?;
        let history = batches
            .iter()
            .map(|b| self.train_batch(b, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        self.epoch += 1;
        Ok(history)
    }

    /// Mean loss over `sketches` with `z = μ`, no dropout and no
    /// augmentation, at the current KL weight.
    pub fn evaluate(&self, sketches: &[Sketch]) -> Result<LossTerms> {
        let cfg = &self.model.config;
        let w_kl = kl_weight(self.step(), cfg.kl_weight_start, cfg.kl_decay);
        let batches = make_stroke_batches(sketches, cfg.batch_size)?;
        let mut acc = LossTerms { w_kl, ..Default::default() };
        let mut rows = 0usize;
        for b in &batches {
            let live = (0..b.rows()).filter(|&i| !b.is_padding_row(i)).count();
            let t = self.model.total_loss(b, w_kl, &BatchNoise::deterministic(&self.model, b))?;
            let k = live as f64;
            acc.j_d += t.j_d * k;
            acc.j_ps += t.j_ps * k;
            acc.j_kl += t.j_kl * k;
            rows += live;
        }
        if rows > 0 {
            let n = rows as f64;
            acc.j_d /= n;
            acc.j_ps /= n;
            acc.j_kl /= n;
        }
        acc.total = acc.j_d + acc.j_ps + w_kl * acc.j_kl;
        Ok(acc)
    }

    pub fn checkpoint(&self) -> VaeCheckpoint {
        let names = self.model.names();
        VaeCheckpoint {
            config: self.model.config.clone(),
            seed: self.seed,
            epoch: self.epoch,
            step: self.step(),
            params: export_tensors(&self.model),
            adam_m: records_from_moments(&names, &self.optimizer.m),
            adam_v: records_from_moments(&names, &self.optimizer.v),
        }
    }

    pub fn from_checkpoint(ck: &VaeCheckpoint) -> Result<Self> {
        let model: VaeModel<T> = ck.model()?;
        let names = model.names();
        let like = model.tensors();
        let m = moments_from_records(&names, &like, &ck.adam_m)?;
        let v = moments_from_records(&names, &like, &ck.adam_v)?;
        drop(like);
        Ok(Self { optimizer: OptimizerState { m, v, step: ck.step }, model, seed: ck.seed, epoch: ck.epoch })
    }
}

/// Trains `model` for `epochs` epochs with a seed drawn from `rng`. An unset
/// `max_len` is filled with the 99th percentile stroke length of the corpus.
pub fn train<T: Scalar, R: Rng + ?Sized>(
    mut model: VaeModel<T>,
    sketches: &[Sketch],
    epochs: usize,
    rng: &mut R,
) -> Result<(VaeModel<T>, Vec<LossRecord>)> {
    if model.config.max_len.is_none() {
        model.config.max_len = stroke_length_percentile(sketches, 0.99);
    }
    let mut trainer = Trainer::new(model, rng.random());
    let mut history = Vec::new();
    for _ in 0..epochs {
        history.extend(trainer.train_epoch(sketches)?);
    }
    Ok((trainer.model, history))
}
