//! Locating and loading input files.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use strokeseg::sketch::{category_classes, read_sketches, Sketch};
use strokeseg::vae::VaeCheckpoint;

pub const DATA_DIR_ENV: &str = "STROKESEG_DATA_DIR";

fn data_dir() -> Option<PathBuf> {
    std::env::var_os(DATA_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from)
}

/// `path` as given when it exists, otherwise relative to the data directory.
pub fn resolve_input(path: &Path) -> Result<PathBuf> {
    if path.exists() {
        return Ok(path.to_path_buf());
    }
    if path.is_relative() {
        if let Some(root) = data_dir() {
            let p = root.join(path);
            if p.exists() {
                return Ok(p);
            }
        }
    }
    bail!("input {} not found (also looked under ${DATA_DIR_ENV})", path.display())
}

/// Resolves an encoder given either as a checkpoint path or as a name. A name
/// is looked up as `encoders/<name>.json` or `encoders/<name>/checkpoint.json`
/// under the working directory and then under the data directory.
pub fn resolve_encoder(spec: &str) -> Result<PathBuf> {
    let direct = Path::new(spec);
    if direct.is_file() {
        return Ok(direct.to_path_buf());
    }
    let rel = [
        PathBuf::from("encoders").join(format!("{spec}.json")),
        PathBuf::from("encoders").join(spec).join("checkpoint.json"),
    ];
    for r in &rel {
        if r.is_file() {
            return Ok(r.clone());
        }
        if let Some(root) = data_dir() {
            if root.join(r).is_file() {
                return Ok(root.join(r));
            }
        }
    }
    resolve_input(direct).with_context(|| format!("no encoder named {spec:?}"))
}

pub fn load_sketches(path: &Path) -> Result<Vec<Sketch>> {
    let sketches = read_sketches(path).with_context(|| format!("reading sketches from {}", path.display()))?;
    if sketches.is_empty() {
        bail!("{} holds no sketches", path.display());
    }
    Ok(sketches)
}

pub fn load_encoder(path: &Path) -> Result<strokeseg::VaeModel64> {
    let ck = VaeCheckpoint::load(path).with_context(|| format!("reading encoder checkpoint {}", path.display()))?;
    ck.model().with_context(|| format!("restoring encoder from {}", path.display()))
}

/// Keeps the sketches of `category`, or checks that the data holds a single
/// category when none is given. Returns the category name.
pub fn select_category(sketches: Vec<Sketch>, category: Option<&str>) -> Result<(String, Vec<Sketch>)> {
    let cat = match category {
        Some(c) => c.to_string(),
        None => {
            let first = sketches[0].category().to_string();
            if let Some(other) = sketches.iter().find(|s| s.category() != first) {
                bail!(
                    "data mixes categories {first:?} and {:?}; choose one with --category",
                    other.category()
                );
            }
            first
        }
    };
    let kept: Vec<Sketch> = sketches.into_iter().filter(|s| s.category() == cat).collect();
    if kept.is_empty() {
        bail!("no sketches of category {cat:?}");
    }
    Ok((cat, kept))
}

/// Class list of an annotated category: the closed set when known, else the
/// sorted labels found in the data.
pub fn classes_of(category: &str, sketches: &[Sketch]) -> Result<Vec<String>> {
    if let Some(c) = category_classes(category) {
        return Ok(c.iter().map(|s| s.to_string()).collect());
    }
    let mut v = Vec::new();
    for (i, s) in sketches.iter().enumerate() {
        let labels = s.labels().with_context(|| format!("sketch {i} has unlabeled strokes"))?;
        v.extend(labels.into_iter().map(str::to_string));
    }
    v.sort();
    v.dedup();
    Ok(v)
}

pub fn require_labels(sketches: &[Sketch]) -> Result<()> {
    if let Some(i) = sketches.iter().position(|s| !s.is_labeled()) {
        bail!("sketch {i} is missing stroke labels");
    }
    Ok(())
}
