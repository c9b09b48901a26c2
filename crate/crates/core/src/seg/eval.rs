//! Feature extraction for the segmenter, prediction and k-fold evaluation.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{train_segmenter, SegConfig, SegModel};
use crate::idm::{sketch_features, FeatureKind};
use crate::scalar::Scalar;
use crate::sketch::{to_offsets, Point2, Sketch, Stroke};
use crate::vae::VaeModel;
use crate::{Error, Result};

/// Where per-stroke features come from.
#[derive(Debug, Clone, Copy)]
pub enum FeatureSource<'a, T> {
    /// Deterministic encoder state `[h_f; h_b]` of a trained autoencoder.
    Encoder(&'a VaeModel<T>),
    Handcrafted(FeatureKind),
}

impl<T> FeatureSource<'_, T> {
    pub fn kind(&self) -> FeatureKind {
        match self {
            FeatureSource::Encoder(_) => FeatureKind::Nn,
            FeatureSource::Handcrafted(k) => *k,
        }
    }
}

/// Encoder state of one stroke, offsets taken from the canvas origin so the
/// feature also carries the stroke's position.
pub fn extract_feature<T: Scalar>(encoder: &VaeModel<T>, st: &Stroke) -> Result<Vec<f64>> {
    Ok(encoder.encoder_state(&to_offsets(st, Point2::ORIGIN))?.into_iter().map(T::as_f64).collect())
}

/// One feature vector per stroke of `sketch`.
pub fn sketch_feature_vectors<T: Scalar>(source: FeatureSource<'_, T>, sketch: &Sketch) -> Result<Vec<Vec<f64>>> {
    match source {
        FeatureSource::Encoder(enc) => sketch.strokes().iter().map(|st| extract_feature(enc, st)).collect(),
        FeatureSource::Handcrafted(FeatureKind::Nn) => Err(Error::invalid("the nn feature needs an encoder")),
        FeatureSource::Handcrafted(kind) => {
            Ok(sketch_features(sketch, kind)?.into_iter().map(|f| f.values).collect())
        }
    }
}

/// Most likely component label of every stroke.
pub fn predict_labels<T: Scalar>(seg: &SegModel<T>, source: FeatureSource<'_, T>, sketch: &Sketch) -> Result<Vec<String>> {
    sketch_feature_vectors(source, sketch)?
        .iter()
        .map(|f| Ok(seg.classes[seg.predict(f)?].clone()))
        .collect()
}

/// Share of positions where `pred` equals `truth`.
pub fn evaluate_accuracy<L: PartialEq>(pred: &[L], truth: &[L]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::ShapeMismatch { what: "predictions", expected: truth.len(), got: pred.len() });
    }
    if truth.is_empty() {
        return Err(Error::invalid("accuracy of an empty set"));
    }
    let hit = pred.iter().zip(truth).filter(|(a, b)| a == b).count();
    Ok(hit as f64 / truth.len() as f64)
}

/// Random partition of `0..n` into `k` folds whose sizes differ by at most one.
pub fn make_folds<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::invalid(format!("need at least 2 folds, got {k}")));
    }
    if n < k {
        return Err(Error::invalid(format!("{n} sketches cannot fill {k} folds")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let mut folds = vec![Vec::new(); k];
    for (j, i) in idx.into_iter().enumerate() {
        folds[j % k].push(i);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<String>,
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn new(classes: &[String]) -> Self {
        Self { classes: classes.to_vec(), counts: vec![vec![0; classes.len()]; classes.len()] }
    }

    pub fn add(&mut self, truth: usize, pred: usize) {
        self.counts[truth][pred] += 1;
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> usize {
        (0..self.counts.len()).map(|i| self.counts[i][i]).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub train_sketches: usize,
    pub test_sketches: usize,
    pub test_strokes: usize,
    pub correct: usize,
    pub accuracy: f64,
    pub epochs_run: usize,
    pub confusion: ConfusionMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub category: String,
    pub feature: FeatureKind,
    pub folds: Vec<FoldResult>,
    /// Accuracy over all test strokes, i.e. folds weighted by stroke count.
    pub mean_accuracy: f64,
    /// Unweighted mean of the per-fold accuracies.
    pub fold_mean_accuracy: f64,
    pub train_size: Option<usize>,
    pub confusion: ConfusionMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvOptions {
    pub k: usize,
    pub seed: u64,
    /// Cap on training sketches per fold; the subsets are nested across
    /// sizes for a fixed seed.
    pub train_size: Option<usize>,
    pub seg: SegConfig,
}

impl Default for CvOptions {
    fn default() -> Self {
        Self { k: 5, seed: 0, train_size: None, seg: SegConfig::default() }
    }
}

fn label_indices(sketch: &Sketch, classes: &[String], index: usize) -> Result<Vec<usize>> {
    let labels = sketch
        .labels()
        .ok_or_else(|| Error::Annotation { index, msg: "sketch has unlabeled strokes".into() })?;
    labels
        .iter()
        .map(|l| {
            classes
                .iter()
                .position(|c| c == l)
                .ok_or_else(|| Error::Annotation { index, msg: format!("label {l:?} is not one of {classes:?}") })
        })
        .collect()
}

/// k-fold cross-validation at the sketch level: all strokes of a sketch stay
/// in one fold. `features[i][j]` is the feature of stroke `j` of sketch `i`.
pub fn cross_validate<T: Scalar>(
    sketches: &[Sketch],
    features: &[Vec<Vec<f64>>],
    kind: FeatureKind,
    classes: &[String],
    opts: &CvOptions,
) -> Result<CvReport> {
    if features.len() != sketches.len() {
        return Err(Error::ShapeMismatch { what: "feature sets", expected: sketches.len(), got: features.len() });
    }
    let labels = sketches
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let l = label_indices(s, classes, i)?;
            if l.len() != features[i].len() {
                return Err(Error::ShapeMismatch { what: "stroke features", expected: l.len(), got: features[i].len() });
            }
            Ok(l)
        })
        .collect::<Result<Vec<_>>>()?;
    let folds = make_folds(sketches.len(), opts.k, &mut ChaCha8Rng::seed_from_u64(opts.seed))?;

    let mut results = Vec::with_capacity(opts.k);
    let mut confusion = ConfusionMatrix::new(classes);
    for (f, test) in folds.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        rng.set_stream(f as u64 + 1);
        let mut train: Vec<usize> = (0..sketches.len()).filter(|i| !test.contains(i)).collect();
        train.shuffle(&mut rng);
        if let Some(n) = opts.train_size {
            train.truncate(n.max(1));
        }
        let (x, y): (Vec<Vec<f64>>, Vec<usize>) = train
            .iter()
            .flat_map(|&i| features[i].iter().cloned().zip(labels[i].iter().copied()))
            .unzip();
        let (model, summary) = train_segmenter::<T, _>(&x, &y, classes, &opts.seg, &mut rng)?;

        let mut cm = ConfusionMatrix::new(classes);
        for &i in test {
            for (feat, &truth) in features[i].iter().zip(&labels[i]) {
                cm.add(truth, model.predict(feat)?);
            }
        }
        let (correct, total) = (cm.correct(), cm.total());
        confusion.merge(&cm);
        results.push(FoldResult {
            fold: f,
            train_sketches: train.len(),
            test_sketches: test.len(),
            test_strokes: total,
            correct,
            accuracy: correct as f64 / total.max(1) as f64,
            epochs_run: summary.epochs_run,
            confusion: cm,
        });
    }
    let fold_mean_accuracy = results.iter().map(|r| r.accuracy).sum::<f64>() / results.len() as f64;
    Ok(CvReport {
        category: sketches[0].category().to_string(),
        feature: kind,
        mean_accuracy: confusion.correct() as f64 / confusion.total().max(1) as f64,
        fold_mean_accuracy,
        train_size: opts.train_size,
        folds: results,
        confusion,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::synth_corpus;

    #[test]
    fn accuracy_examples() {
        assert_eq!(evaluate_accuracy(&[1, 2, 3], &[1, 2, 3]).unwrap(), 1.0);
        assert_eq!(evaluate_accuracy(&[0, 0], &[1, 1]).unwrap(), 0.0);
        assert_eq!(evaluate_accuracy(&["a", "b", "c", "d"], &["a", "b", "c", "x"]).unwrap(), 0.75);
        assert!(evaluate_accuracy(&[1], &[1, 2]).is_err());
    }

    #[test]
    fn folds_partition_the_sketches() {
        let f = make_folds(500, 5, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert!(f.iter().all(|x| x.len() == 100));
        let mut all: Vec<usize> = f.concat();
        all.sort_unstable();
        assert_eq!(all, (0..500).collect::<Vec<_>>());
        assert_eq!(f, make_folds(500, 5, &mut ChaCha8Rng::seed_from_u64(1)).unwrap());
        assert!(make_folds(3, 5, &mut ChaCha8Rng::seed_from_u64(1)).is_err());
        assert!(make_folds(3, 1, &mut ChaCha8Rng::seed_from_u64(1)).is_err());
    }

    #[test]
    fn cross_validation_on_spatial_features() {
        let data = synth_corpus("chair", 20, 3).unwrap();
        let classes: Vec<String> = ["back", "leg", "seat"].map(String::from).to_vec();
        let kind = FeatureKind::IdmSpt;
        let feats: Vec<Vec<Vec<f64>>> = data
            .iter()
            .map(|s| sketch_feature_vectors::<f64>(FeatureSource::Handcrafted(kind), s))
            .collect::<Result<_>>()
            .unwrap();
        let opts = CvOptions {
            k: 4,
            seed: 2,
            train_size: None,
            seg: SegConfig { hidden1: 16, hidden2: 8, max_epochs: 40, ..SegConfig::default() },
        };
        let r = cross_validate::<f64>(&data, &feats, kind, &classes, &opts).unwrap();
        assert_eq!(r.folds.len(), 4);
        let strokes: usize = data.iter().map(Sketch::num_strokes).sum();
        assert_eq!(r.folds.iter().map(|f| f.test_strokes).sum::<usize>(), strokes);
        assert_eq!(r.confusion.total(), strokes);
        let weighted: f64 = r.folds.iter().map(|f| f.accuracy * f.test_strokes as f64).sum::<f64>() / strokes as f64;
        assert!((weighted - r.mean_accuracy).abs() < 1e-12);
        assert_eq!(r, cross_validate::<f64>(&data, &feats, kind, &classes, &opts).unwrap());
    }

    #[test]
    fn unknown_label_is_reported() {
        let data = synth_corpus("chair", 5, 3).unwrap();
        let feats: Vec<Vec<Vec<f64>>> = data.iter().map(|s| vec![vec![0.0]; s.num_strokes()]).collect();
        let classes: Vec<String> = ["back", "seat"].map(String::from).to_vec();
        let err = cross_validate::<f64>(&data, &feats, FeatureKind::Idm, &classes, &CvOptions { k: 2, ..Default::default() });
        assert!(matches!(err, Err(Error::Annotation { .. })));
    }
}
