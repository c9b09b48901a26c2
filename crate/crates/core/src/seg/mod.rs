//! Stroke classifier: a three-layer MLP over fixed per-stroke features,
//! trained with class-weighted cross entropy.

mod eval;

pub use eval::{
    cross_validate, evaluate_accuracy, extract_feature, make_folds, predict_labels,
    sketch_feature_vectors, ConfusionMatrix, CvOptions, CvReport, FeatureSource, FoldResult,
};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::idm::FeatureKind;
use crate::nn::{
    adam_update, export_tensors, import_tensors, xavier_init, AdamConfig, OptimizerState, Parameters, Tensor, TensorRecord,
};
use crate::scalar::{softmax, Scalar};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegConfig {
    pub hidden1: usize,
    pub hidden2: usize,
    pub batch_size: usize,
    pub keep_prob: f64,
    pub lr: f64,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    /// Share of the training set held out for early stopping; zero trains
    /// for `max_epochs` and returns the final model.
    pub validation_fraction: f64,
}

impl Default for SegConfig {
    fn default() -> Self {
        Self {
            hidden1: 1024,
            hidden2: 512,
            batch_size: 16,
            keep_prob: 0.5,
            lr: 1e-3,
            max_epochs: 200,
            patience: 20,
            validation_fraction: 0.1,
        }
    }
}

impl SegConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.hidden1 > 0
            && self.hidden2 > 0
            && self.batch_size > 0
            && self.keep_prob > 0.0
            && self.keep_prob <= 1.0
            && self.lr >= 0.0
            && self.lr.is_finite()
            && (0.0..1.0).contains(&self.validation_fraction);
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("segmentation config out of range: {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegModel<T> {
    pub w1: Tensor<T>,
    pub b1: Tensor<T>,
    pub w2: Tensor<T>,
    pub b2: Tensor<T>,
    pub wo: Tensor<T>,
    pub bo: Tensor<T>,
    pub keep_prob: f64,
    pub classes: Vec<String>,
}

impl<T: Scalar> Parameters<T> for SegModel<T> {
    fn tensors(&self) -> Vec<&Tensor<T>> {
        vec![&self.w1, &self.b1, &self.w2, &self.b2, &self.wo, &self.bo]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor<T>> {
        vec![&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2, &mut self.wo, &mut self.bo]
    }

    fn names(&self) -> Vec<String> {
        ["w1", "b1", "w2", "b2", "wo", "bo"].map(String::from).to_vec()
    }
}

/// Per-class loss weights `w = softmax(−n̂)` with `n̂` the class proportions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights {
    pub w: Vec<f64>,
}

pub fn class_weights(counts: &[usize]) -> Result<ClassWeights> {
    if counts.is_empty() {
        return Err(Error::invalid("class_weights needs at least one class"));
    }
    if let Some(c) = counts.iter().position(|&n| n == 0) {
        return Err(Error::invalid(format!("class {c} has no training instances")));
    }
    let total: usize = counts.iter().sum();
    let neg: Vec<f64> = counts.iter().map(|&n| -(n as f64) / total as f64).collect();
    Ok(ClassWeights { w: softmax(&neg) })
}

/// `−w_c · log ŷ_c`, with the log floored to stay finite.
pub fn seg_loss<T: Scalar>(probs: &[T], class: usize, w: &ClassWeights) -> T {
    -T::lit(w.w[class]) * probs[class].ln().max(T::log_floor())
}

/// Index of the largest probability; ties go to the lowest index.
pub fn argmax<T: Scalar>(v: &[T]) -> usize {
    (0..v.len()).fold(0, |b, k| if v[k] > v[b] { k } else { b })
}

struct Trace<T> {
    x: Vec<T>,
    a1: Vec<T>,
    m1: Option<Vec<T>>,
    d1: Vec<T>,
    a2: Vec<T>,
    m2: Option<Vec<T>>,
    d2: Vec<T>,
    probs: Vec<T>,
}

fn relu<T: Scalar>(v: Vec<T>) -> Vec<T> {
    v.into_iter().map(|x| x.max(T::zero())).collect()
}

fn apply_mask<T: Scalar>(v: &[T], m: &Option<Vec<T>>) -> Vec<T> {
    match m {
        Some(m) => v.iter().zip(m).map(|(&a, &b)| a * b).collect(),
        None => v.to_vec(),
    }
}

impl<T: Scalar> SegModel<T> {
    /// Xavier weights and zero biases.
    pub fn new<R: Rng + ?Sized>(input: usize, classes: Vec<String>, cfg: &SegConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        if input == 0 || classes.is_empty() {
            return Err(Error::invalid("segmenter needs a non-empty input and class list"));
        }
        let c = classes.len();
        Ok(Self {
            w1: xavier_init(cfg.hidden1, input, rng),
            b1: Tensor::zeros(cfg.hidden1, 1),
            w2: xavier_init(cfg.hidden2, cfg.hidden1, rng),
            b2: Tensor::zeros(cfg.hidden2, 1),
            wo: xavier_init(c, cfg.hidden2, rng),
            bo: Tensor::zeros(c, 1),
            keep_prob: cfg.keep_prob,
            classes,
        })
    }

    pub fn input_size(&self) -> usize {
        self.w1.cols
    }

    fn mask<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<T> {
        let on = T::lit(1.0 / self.keep_prob);
        (0..n).map(|_| if rng.random::<f64>() < self.keep_prob { on } else { T::zero() }).collect()
    }

    fn trace<R: Rng + ?Sized>(&self, feature: &[f64], training: bool, rng: &mut R) -> Result<Trace<T>> {
        if feature.len() != self.input_size() {
            return Err(Error::ShapeMismatch { what: "segmenter input", expected: self.input_size(), got: feature.len() });
        }
        let dropout = training && self.keep_prob < 1.0;
        let x: Vec<T> = feature.iter().map(|&v| T::lit(v)).collect();
        let a1 = relu(self.w1.affine(&x, &self.b1));
        let m1 = dropout.then(|| self.mask(a1.len(), rng));
        let d1 = apply_mask(&a1, &m1);
        let a2 = relu(self.w2.affine(&d1, &self.b2));
        let m2 = dropout.then(|| self.mask(a2.len(), rng));
        let d2 = apply_mask(&a2, &m2);
        let probs = softmax(&self.wo.affine(&d2, &self.bo));
        Ok(Trace { x, a1, m1, d1, a2, m2, d2, probs })
    }

    /// Class probabilities. Dropout is applied only when `training` is set.
    pub fn forward<R: Rng + ?Sized>(&self, feature: &[f64], training: bool, rng: &mut R) -> Result<Vec<T>> {
        Ok(self.trace(feature, training, rng)?.probs)
    }

    /// Deterministic class probabilities.
    pub fn predict_proba(&self, feature: &[f64]) -> Result<Vec<T>> {
        // no dropout, so the rng is never drawn from
        self.forward(feature, false, &mut ChaCha8Rng::seed_from_u64(0))
    }

    pub fn predict(&self, feature: &[f64]) -> Result<usize> {
        Ok(argmax(&self.predict_proba(feature)?))
    }

    fn backward(&self, tr: &Trace<T>, class: usize, weight: T, g: &mut SegModel<T>) {
        let zero = T::zero();
        let d_o: Vec<T> = tr
            .probs
            .iter()
            .enumerate()
            .map(|(k, &p)| weight * (p - if k == class { T::one() } else { zero }))
            .collect();
        g.wo.add_outer(&d_o, &tr.d2);
        g.bo.add_slice(&d_o);
        let mut dd2 = vec![zero; tr.d2.len()];
        self.wo.matvec_t_add(&d_o, &mut dd2);
        let dz2: Vec<T> = (0..dd2.len())
            .map(|j| {
                let m = tr.m2.as_ref().map_or(T::one(), |m| m[j]);
                if tr.a2[j] > zero { dd2[j] * m } else { zero }
            })
            .collect();
        g.w2.add_outer(&dz2, &tr.d1);
        g.b2.add_slice(&dz2);
        let mut dd1 = vec![zero; tr.d1.len()];
        self.w2.matvec_t_add(&dz2, &mut dd1);
        let dz1: Vec<T> = (0..dd1.len())
            .map(|j| {
                let m = tr.m1.as_ref().map_or(T::one(), |m| m[j]);
                if tr.a1[j] > zero { dd1[j] * m } else { zero }
            })
            .collect();
        g.w1.add_outer(&dz1, &tr.x);
        g.b1.add_slice(&dz1);
    }

    /// Mean weighted loss over `(features, labels)` and its gradient, with
    /// dropout masks drawn from `rng` when `training` is set.
    pub fn loss_and_grad<R: Rng + ?Sized>(
        &self,
        features: &[&[f64]],
        labels: &[usize],
        w: &ClassWeights,
        training: bool,
        rng: &mut R,
    ) -> Result<(f64, SegModel<T>)> {
        let mut g = self.zeros_like();
        let scale = T::one() / T::lit(features.len().max(1) as f64);
        let mut loss = T::zero();
        for (f, &c) in features.iter().zip(labels) {
            let tr = self.trace(f, training, rng)?;
            loss += seg_loss(&tr.probs, c, w);
            self.backward(&tr, c, scale * T::lit(w.w[c]), &mut g);
        }
        Ok(((loss * scale).as_f64(), g))
    }

    /// Mean weighted loss without dropout.
    pub fn mean_loss(&self, features: &[&[f64]], labels: &[usize], w: &ClassWeights) -> Result<f64> {
        let mut total = 0.0;
        for (f, &c) in features.iter().zip(labels) {
            total += seg_loss(&self.predict_proba(f)?, c, w).as_f64();
        }
        Ok(total / features.len().max(1) as f64)
    }
}

/// How training ended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegTrainSummary {
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_validation_loss: Option<f64>,
    pub train_loss: Vec<f64>,
}

fn check_labels(labels: &[usize], n_features: usize, n_classes: usize) -> Result<()> {
    if labels.len() != n_features {
        return Err(Error::ShapeMismatch { what: "labels", expected: n_features, got: labels.len() });
    }
    if let Some(&bad) = labels.iter().find(|&&c| c >= n_classes) {
        return Err(Error::invalid(format!("label index {bad} outside {n_classes} classes")));
    }
    Ok(())
}

/// Trains a fresh segmenter with Adam on mini-batches. When a validation
/// share is configured, the model with the lowest held-out loss is returned
/// and training stops after `patience` epochs without improvement.
pub fn train_segmenter<T: Scalar, R: Rng + ?Sized>(
    features: &[Vec<f64>],
    labels: &[usize],
    classes: &[String],
    cfg: &SegConfig,
    rng: &mut R,
) -> Result<(SegModel<T>, SegTrainSummary)> {
    cfg.validate()?;
    if features.is_empty() {
        return Err(Error::invalid("no training features"));
    }
    check_labels(labels, features.len(), classes.len())?;
    let dim = features[0].len();
    if let Some(f) = features.iter().find(|f| f.len() != dim) {
        return Err(Error::ShapeMismatch { what: "feature length", expected: dim, got: f.len() });
    }

    let mut order: Vec<usize> = (0..features.len()).collect();
    order.shuffle(rng);
    let n_val = if cfg.validation_fraction > 0.0 {
        ((features.len() as f64 * cfg.validation_fraction).round() as usize).clamp(1, features.len() - 1)
    } else {
        0
    };
    let (val_idx, train_idx) = if features.len() > 1 { order.split_at(n_val) } else { (&order[..0], &order[..]) };

    let mut counts = vec![0usize; classes.len()];
    for &i in train_idx {
        counts[labels[i]] += 1;
    }
    let weights = class_weights(&counts)?;

    let mut model = SegModel::<T>::new(dim, classes.to_vec(), cfg, rng)?;
    let mut opt = OptimizerState::new(&model);
    let adam = AdamConfig::with_lr(cfg.lr);
    let val_f: Vec<&[f64]> = val_idx.iter().map(|&i| features[i].as_slice()).collect();
    let val_l: Vec<usize> = val_idx.iter().map(|&i| labels[i]).collect();

    let mut best: Option<(f64, SegModel<T>, usize)> = None;
    let mut train_loss = Vec::new();
    let mut idx = train_idx.to_vec();
    let mut epochs_run = 0;
    for epoch in 0..cfg.max_epochs {
        idx.shuffle(rng);
        let mut epoch_loss = 0.0;
        for chunk in idx.chunks(cfg.batch_size) {
            let f: Vec<&[f64]> = chunk.iter().map(|&i| features[i].as_slice()).collect();
            let l: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
            let (loss, g) = model.loss_and_grad(&f, &l, &weights, true, rng)?;
            if !loss.is_finite() || !g.all_finite() {
                return Err(Error::NonFinite(format!("segmenter loss at epoch {epoch}: {loss}")));
            }
            adam_update(&mut model, &g, &mut opt, &adam)?;
            epoch_loss += loss * chunk.len() as f64;
        }
        train_loss.push(epoch_loss / idx.len() as f64);
        epochs_run = epoch + 1;
        if !val_f.is_empty() {
            let v = model.mean_loss(&val_f, &val_l, &weights)?;
            match &best {
                Some((b, _, _)) if v >= *b => {}
                _ => best = Some((v, model.clone(), epoch)),
            }
            if epoch - best.as_ref().map_or(0, |b| b.2) >= cfg.patience {
                break;
            }
        }
    }
    let summary = |best_epoch, best_validation_loss| SegTrainSummary { epochs_run, best_epoch, best_validation_loss, train_loss: train_loss.clone() };
    Ok(match best {
        Some((v, m, e)) => (m, summary(e, Some(v))),
        None => (model, summary(epochs_run.saturating_sub(1), None)),
    })
}

/// Serialized segmenter: configuration, feature kind and weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegCheckpoint {
    pub config: SegConfig,
    pub feature: FeatureKind,
    pub input_size: usize,
    pub classes: Vec<String>,
    pub params: Vec<TensorRecord>,
}

impl SegCheckpoint {
    pub fn new<T: Scalar>(model: &SegModel<T>, config: &SegConfig, feature: FeatureKind) -> Self {
        Self {
            config: config.clone(),
            feature,
            input_size: model.input_size(),
            classes: model.classes.clone(),
            params: export_tensors(model),
        }
    }

    pub fn model<T: Scalar>(&self) -> Result<SegModel<T>> {
        // weights are overwritten by the import
        let mut m = SegModel::new(self.input_size, self.classes.clone(), &self.config, &mut ChaCha8Rng::seed_from_u64(0))?;
        import_tensors(&mut m, &self.params)?;
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::finite_difference_check;

    fn small_cfg() -> SegConfig {
        SegConfig { hidden1: 6, hidden2: 5, ..SegConfig::default() }
    }

    fn classes(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("c{i}")).collect()
    }

    #[test]
    fn zero_weights_give_uniform_probabilities() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let m = SegModel::<f64>::new(4, classes(3), &small_cfg(), &mut rng).unwrap().zeros_like();
        let p = m.predict_proba(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!(p.iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn forward_is_a_distribution_and_checks_length() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = SegModel::<f64>::new(4, classes(3), &small_cfg(), &mut rng).unwrap();
        for training in [false, true] {
            let p = m.forward(&[0.5, -1.0, 3.0, 0.0], training, &mut rng).unwrap();
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert_eq!(m.predict_proba(&[0.1; 4]).unwrap(), m.predict_proba(&[0.1; 4]).unwrap());
        assert!(m.predict_proba(&[0.1; 3]).is_err());
    }

    #[test]
    fn class_weight_examples() {
        assert_eq!(class_weights(&[1, 1]).unwrap().w, vec![0.5, 0.5]);
        let w = class_weights(&[10, 90]).unwrap().w;
        assert!(w[0] > w[1]);
        // independent evaluation
        let e = [(-0.25f64).exp(), (-0.25f64).exp(), (-0.5f64).exp()];
        let s: f64 = e.iter().sum();
        let w = class_weights(&[1, 1, 2]).unwrap().w;
        for k in 0..3 {
            assert!((w[k] - e[k] / s).abs() < 1e-12);
        }
        assert!((w[0] - 0.35987).abs() < 1e-4 && (w[2] - 0.28027).abs() < 1e-4);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(class_weights(&[3, 0]).is_err());
    }

    #[test]
    fn loss_examples() {
        let w = ClassWeights { w: vec![1.0 / 3.0; 3] };
        assert_eq!(seg_loss(&[0.0f64, 1.0, 0.0], 1, &w), 0.0);
        let u = [1.0f64 / 3.0; 3];
        assert!((seg_loss(&u, 2, &w) - 3f64.ln() / 3.0).abs() < 1e-12);
        let w2 = ClassWeights { w: vec![2.0 / 3.0; 3] };
        assert!((seg_loss(&u, 0, &w2) - 2.0 * seg_loss(&u, 0, &w)).abs() < 1e-15);
        assert!(seg_loss(&[0.0f64, 1.0], 0, &ClassWeights { w: vec![1.0, 1.0] }).is_finite());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = SegModel::<f64>::new(3, classes(3), &small_cfg(), &mut rng).unwrap();
        let feats: Vec<Vec<f64>> = vec![vec![0.3, -0.7, 1.1], vec![-0.2, 0.5, 0.9], vec![1.5, 0.1, -0.4]];
        let f: Vec<&[f64]> = feats.iter().map(Vec::as_slice).collect();
        let labels = [0, 2, 1];
        let w = class_weights(&[1, 1, 2]).unwrap();
        let (_, g) = m.loss_and_grad(&f, &labels, &w, false, &mut rng).unwrap();
        let r = finite_difference_check(|p: &SegModel<f64>| p.mean_loss(&f, &labels, &w).unwrap(), &m, &g, 1e-6);
        assert!(r.max_rel_err < 1e-5, "{r:?}");
    }

    fn separable(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let c = i % 2;
                let s = if c == 0 { 1.0 } else { -1.0 };
                (vec![s + rng.random_range(-0.5..0.5), rng.random_range(-1.0..1.0)], c)
            })
            .unzip()
    }

    #[test]
    fn separable_data_is_fit() {
        let (f, l) = separable(40, 3);
        let cfg = SegConfig { validation_fraction: 0.0, max_epochs: 200, ..small_cfg() };
        let (m, s) = train_segmenter::<f64, _>(&f, &l, &classes(2), &cfg, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert_eq!(s.epochs_run, 200);
        let correct = f.iter().zip(&l).filter(|(x, &c)| m.predict(x).unwrap() == c).count();
        assert_eq!(correct, 40);
    }

    #[test]
    fn zero_lr_returns_initial_model_and_runs_are_seeded() {
        let (f, l) = separable(20, 5);
        let cfg = SegConfig { lr: 0.0, max_epochs: 3, validation_fraction: 0.0, ..small_cfg() };
        let mut r1 = ChaCha8Rng::seed_from_u64(6);
        let (m, _) = train_segmenter::<f64, _>(&f, &l, &classes(2), &cfg, &mut r1).unwrap();
        // replay the draws made before initialization
        let mut r2 = ChaCha8Rng::seed_from_u64(6);
        let mut order: Vec<usize> = (0..20).collect();
        order.shuffle(&mut r2);
        let init = SegModel::<f64>::new(2, classes(2), &cfg, &mut r2).unwrap();
        assert_eq!(m, init);

        let cfg = SegConfig { max_epochs: 30, ..small_cfg() };
        let a = train_segmenter::<f64, _>(&f, &l, &classes(2), &cfg, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        let b = train_segmenter::<f64, _>(&f, &l, &classes(2), &cfg, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
    }

    #[test]
    fn early_stopping_respects_patience() {
        let (f, l) = separable(30, 8);
        let cfg = SegConfig { max_epochs: 500, patience: 5, lr: 0.05, ..small_cfg() };
        let (_, s) = train_segmenter::<f64, _>(&f, &l, &classes(2), &cfg, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert!(s.epochs_run < 500);
        assert_eq!(s.epochs_run, s.best_epoch + 1 + 5);
    }

    #[test]
    fn rejects_bad_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cfg = small_cfg();
        assert!(train_segmenter::<f64, _>(&[], &[], &classes(2), &cfg, &mut rng).is_err());
        assert!(train_segmenter::<f64, _>(&[vec![1.0]], &[2], &classes(2), &cfg, &mut rng).is_err());
        assert!(train_segmenter::<f64, _>(&[vec![1.0], vec![1.0, 2.0]], &[0, 1], &classes(2), &cfg, &mut rng).is_err());
        // class 1 never appears
        assert!(train_segmenter::<f64, _>(&[vec![1.0], vec![2.0]], &[0, 0], &classes(2), &SegConfig { validation_fraction: 0.0, ..cfg }, &mut rng).is_err());
    }

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax(&[0.4f64, 0.4, 0.2]), 0);
        assert_eq!(argmax(&[0.1f64, 0.45, 0.45]), 1);
    }

    #[test]
    fn checkpoint_round_trip() {
        let cfg = small_cfg();
        let m = SegModel::<f64>::new(4, classes(3), &cfg, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let ck = SegCheckpoint::new(&m, &cfg, FeatureKind::Idm);
        let back: SegCheckpoint = serde_json::from_str(&serde_json::to_string(&ck).unwrap()).unwrap();
        let m2 = back.model::<f64>().unwrap();
        let x = [0.3, -1.0, 2.0, 0.5];
        assert_eq!(m.predict_proba(&x).unwrap(), m2.predict_proba(&x).unwrap());
        assert_eq!(m2.classes, m.classes);
    }
}
