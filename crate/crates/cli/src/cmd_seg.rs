//! Segmentation commands: train-seg, eval-seg, segment, features.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use strokeseg::idm::FeatureKind;
use strokeseg::seg::{
    cross_validate, sketch_feature_vectors, train_segmenter, ConfusionMatrix, CvOptions, CvReport, FeatureSource,
    SegCheckpoint, SegConfig,
};
use strokeseg::sketch::{category_classes, Sketch, Stroke};
use strokeseg::VaeModel64;

use crate::cli::{EvalSegArgs, FeatureArgs, FeaturesArgs, SegmentArgs, TrainSegArgs};
use crate::cmd_data::{write_json, write_sketch_file, write_text};
use crate::config::merge_config;
use crate::data::{classes_of, load_encoder, load_sketches, require_labels, resolve_encoder, resolve_input, select_category};
use crate::manifest::{sha256_file, Run};

/// A trained segmenter plus the encoder its features came from.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SegmenterFile {
    pub category: String,
    pub encoder: Option<PathBuf>,
    pub encoder_sha256: Option<String>,
    pub training_accuracy: f64,
    pub segmenter: SegCheckpoint,
}

/// Loads the encoder when `kind` needs one.
fn encoder_for(kind: FeatureKind, spec: Option<&str>, run: &mut Run) -> Result<Option<(PathBuf, VaeModel64)>> {
    match (kind, spec) {
        (FeatureKind::Nn, None) => bail!("the nn feature needs --encoder"),
        (FeatureKind::Nn, Some(s)) => {
            let path = resolve_encoder(s)?;
            run.input(&path);
            let model = load_encoder(&path)?;
            Ok(Some((path, model)))
        }
        _ => Ok(None),
    }
}

fn feature_vectors(kind: FeatureKind, encoder: Option<&VaeModel64>, sketches: &[Sketch]) -> Result<Vec<Vec<Vec<f64>>>> {
    let source = match encoder {
        Some(e) if kind == FeatureKind::Nn => FeatureSource::Encoder(e),
        _ => FeatureSource::Handcrafted(kind),
    };
    sketches
        .iter()
        .enumerate()
        .map(|(i, s)| sketch_feature_vectors(source, s).with_context(|| format!("features of sketch {i}")))
        .collect()
}

/// Annotated sketches of one category and that category's classes.
fn annotated(data: &Path, src: &FeatureArgs, run: &mut Run) -> Result<(String, Vec<Sketch>, Vec<String>)> {
    let path = resolve_input(data)?;
    run.input(&path);
    let (cat, sketches) = select_category(load_sketches(&path)?, src.category.as_deref())?;
    require_labels(&sketches)?;
    let classes = classes_of(&cat, &sketches)?;
    Ok((cat, sketches, classes))
}

fn label_index(classes: &[String], label: &str) -> Result<usize> {
    classes.iter().position(|c| c == label).with_context(|| format!("label {label:?} is not one of {classes:?}"))
}

pub fn train_seg(a: &TrainSegArgs, run: &mut Run) -> Result<()> {
    let cfg: SegConfig = merge_config(&SegConfig::default(), &a.config)?;
    run.set_config(&serde_json::json!({ "feature": a.feature, "category": a.source.category, "seg": cfg }))?;
    let (category, sketches, classes) = annotated(&a.data, &a.source, run)?;
    let encoder = encoder_for(a.feature, a.source.encoder.as_deref(), run)?;
    let feats = run.timed("features", |_| feature_vectors(a.feature, encoder.as_ref().map(|e| &e.1), &sketches))?;
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (s, f) in sketches.iter().zip(&feats) {
        for (label, v) in s.labels().expect("checked").iter().zip(f) {
            x.push(v.clone());
            y.push(label_index(&classes, label)?);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(run.seed());
    let (model, summary) = run.timed("train", |_| Ok(train_segmenter::<f64, _>(&x, &y, &classes, &cfg, &mut rng)?))?;
    let correct = x.iter().zip(&y).map(|(f, &c)| Ok(usize::from(model.predict(f)? == c))).sum::<Result<usize>>()?;
    let training_accuracy = correct as f64 / x.len() as f64;
    eprintln!(
        "{} epochs (best {}), training accuracy {:.4} on {} strokes",
        summary.epochs_run,
        summary.best_epoch,
        training_accuracy,
        x.len()
    );
    let file = SegmenterFile {
        category,
        encoder_sha256: encoder.as_ref().map(|(p, _)| sha256_file(p)).transpose()?,
        encoder: encoder.map(|(p, _)| p),
        training_accuracy,
        segmenter: SegCheckpoint::new(&model, &cfg, a.feature),
    };
    write_json(&a.out, &file, run)
}

fn load_segmenter(path: &Path, encoder_override: Option<&str>, run: &mut Run) -> Result<(SegmenterFile, Option<VaeModel64>)> {
    let path = resolve_input(path)?;
    run.input(&path);
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let file: SegmenterFile = serde_json::from_str(&text).with_context(|| format!("parsing segmenter {}", path.display()))?;
    let spec = encoder_override.map(str::to_string).or_else(|| file.encoder.as_ref().map(|p| p.to_string_lossy().into_owned()));
    let enc = encoder_for(file.segmenter.feature, spec.as_deref(), run)?;
    if let (Some((p, _)), Some(expected), None) = (&enc, &file.encoder_sha256, encoder_override) {
        if sha256_file(p)? != *expected {
            bail!("encoder {} changed since the segmenter was trained", p.display());
        }
    }
    Ok((file, enc.map(|e| e.1)))
}

#[derive(Serialize)]
struct ScoreReport {
    category: String,
    feature: FeatureKind,
    strokes: usize,
    accuracy: f64,
    confusion: ConfusionMatrix,
}

#[derive(Serialize)]
struct EvalReport {
    category: String,
    encoder: Option<PathBuf>,
    folds: usize,
    seed: u64,
    seg: SegConfig,
    runs: Vec<CvReport>,
}

pub fn eval_seg(a: &EvalSegArgs, run: &mut Run) -> Result<()> {
    if let Some(seg_path) = &a.segmenter {
        return score(a, seg_path, run);
    }
    if a.feature.is_empty() {
        bail!("--feature needs at least one variant");
    }
    let cfg: SegConfig = merge_config(&SegConfig::default(), &a.config)?;
    run.set_config(&serde_json::json!({
        "feature": a.feature, "category": a.source.category, "folds": a.folds,
        "train_sizes": a.train_sizes, "seg": cfg,
    }))?;
    let (category, sketches, classes) = annotated(&a.data, &a.source, run)?;
    if a.folds > sketches.len() {
        bail!("{} folds need at least {} sketches, found {}", a.folds, a.folds, sketches.len());
    }
    let encoder = if a.feature.contains(&FeatureKind::Nn) {
        encoder_for(FeatureKind::Nn, a.source.encoder.as_deref(), run)?
    } else {
        None
    };
    let sizes: Vec<Option<usize>> =
        if a.train_sizes.is_empty() { vec![None] } else { a.train_sizes.iter().map(|&n| Some(n)).collect() };
    let mut runs = Vec::new();
    let mut table = String::new();
    for &kind in &a.feature {
        let feats = run.timed(&format!("features:{kind}"), |_| {
            feature_vectors(kind, encoder.as_ref().map(|e| &e.1), &sketches)
        })?;
        for &train_size in &sizes {
            let opts = CvOptions { k: a.folds, seed: run.seed(), train_size, seg: cfg.clone() };
            let report = run.timed(&format!("cv:{kind}"), |_| {
                Ok(cross_validate::<f64>(&sketches, &feats, kind, &classes, &opts)?)
            })?;
            let size = train_size.map_or("all".to_string(), |n| n.to_string());
            writeln!(table, "{category}\t{kind}\ttrain={size}\taccuracy={:.4}", report.mean_accuracy)?;
            runs.push(report);
        }
    }
    print!("{table}");
    let report = EvalReport { category, encoder: encoder.map(|e| e.0), folds: a.folds, seed: run.seed(), seg: cfg, runs };
    write_json(&a.out, &report, run)
}

fn score(a: &EvalSegArgs, seg_path: &Path, run: &mut Run) -> Result<()> {
    let (file, encoder) = load_segmenter(seg_path, a.source.encoder.as_deref(), run)?;
    let model = file.segmenter.model::<f64>()?;
    let kind = file.segmenter.feature;
    run.set_config(&serde_json::json!({ "segmenter": seg_path, "category": a.source.category, "feature": kind }))?;
    let (category, sketches, _) = annotated(&a.data, &a.source, run)?;
    let feats = feature_vectors(kind, encoder.as_ref(), &sketches)?;
    let mut cm = ConfusionMatrix::new(&model.classes);
    for (s, f) in sketches.iter().zip(&feats) {
        for (label, v) in s.labels().expect("checked").iter().zip(f) {
            cm.add(label_index(&model.classes, label)?, model.predict(v)?);
        }
    }
    let accuracy = cm.correct() as f64 / cm.total().max(1) as f64;
    println!("{category}\t{kind}\taccuracy={accuracy:.4}");
    write_json(&a.out, &ScoreReport { category, feature: kind, strokes: cm.total(), accuracy, confusion: cm }, run)
}

pub fn segment(a: &SegmentArgs, run: &mut Run) -> Result<()> {
    let (file, encoder) = load_segmenter(&a.segmenter, None, run)?;
    let model = file.segmenter.model::<f64>()?;
    run.set_config(&serde_json::json!({ "segmenter": a.segmenter }))?;
    let data = resolve_input(&a.data)?;
    run.input(&data);
    let sketches = load_sketches(&data)?;
    let feats = run.timed("features", |_| feature_vectors(file.segmenter.feature, encoder.as_ref(), &sketches))?;
    let mut out = Vec::with_capacity(sketches.len());
    for (i, (s, f)) in sketches.iter().zip(&feats).enumerate() {
        if let Some(known) = category_classes(s.category()) {
            if known.iter().map(|c| c.to_string()).collect::<Vec<_>>() != model.classes {
                bail!("sketch {i} is a {} but the segmenter labels {:?}", s.category(), model.classes);
            }
        }
        let strokes = s
            .strokes()
            .iter()
            .zip(f)
            .map(|(st, v)| Ok(st.clone().with_label(Some(model.classes[model.predict(v)?].clone()))))
            .collect::<Result<Vec<Stroke>>>()?;
        out.push(Sketch::new(s.category(), strokes)?);
    }
    write_sketch_file(&a.out, &out, run)
}

pub fn features(a: &FeaturesArgs, run: &mut Run) -> Result<()> {
    run.set_config(&serde_json::json!({ "feature": a.feature, "category": a.source.category }))?;
    let data = resolve_input(&a.data)?;
    run.input(&data);
    let sketches = load_sketches(&data)?;
    let (_, sketches) = match &a.source.category {
        Some(c) => select_category(sketches, Some(c))?,
        None => (String::new(), sketches),
    };
    let encoder = encoder_for(a.feature, a.source.encoder.as_deref(), run)?;
    let feats = run.timed("features", |_| feature_vectors(a.feature, encoder.as_ref().map(|e| &e.1), &sketches))?;
    let mut text = String::new();
    for (i, (s, f)) in sketches.iter().zip(&feats).enumerate() {
        let rec = serde_json::json!({
            "sketch": i, "category": s.category(), "feature": a.feature, "labels": s.labels(), "features": f,
        });
        writeln!(text, "{rec}")?;
    }
    write_text(&a.out, &text, run)
}
