//! Data commands: synth, preprocess, render.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use strokeseg::sketch::{preprocess_sketch, write_sketches, PreprocessConfig, Sketch};
use strokeseg::synth::synth_corpus;
use strokeseg::Error;

use crate::cli::{PreprocessArgs, RenderArgs, SynthArgs};
use crate::data::{load_sketches, resolve_input};
use crate::manifest::Run;
use crate::svg::{render_panels, Panel};

pub fn create_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

pub fn write_sketch_file(path: &Path, sketches: &[Sketch], run: &mut Run) -> Result<()> {
    create_parent(path)?;
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    write_sketches(BufWriter::new(f), sketches)?;
    run.output(path);
    Ok(())
}

pub fn write_text(path: &Path, text: &str, run: &mut Run) -> Result<()> {
    create_parent(path)?;
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    run.output(path);
    Ok(())
}

pub fn write_json(path: &Path, value: &impl Serialize, run: &mut Run) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text, run)
}

#[derive(Serialize)]
struct SynthConfig<'a> {
    category: &'a str,
    count: usize,
}

pub fn synth(a: &SynthArgs, run: &mut Run) -> Result<()> {
    run.set_config(&SynthConfig { category: &a.category, count: a.count })?;
    let sketches = run.timed("generate", |r| Ok(synth_corpus(&a.category, a.count, r.seed())?))?;
    write_sketch_file(&a.out, &sketches, run)?;
    eprintln!("generated {} {} sketches", sketches.len(), a.category);
    Ok(())
}

pub fn preprocess(a: &PreprocessArgs, run: &mut Run) -> Result<()> {
    let cfg = PreprocessConfig { spacing: a.spacing, epsilon: a.epsilon, min_length: a.min_len };
    if !(cfg.spacing > 0.0) || !(cfg.epsilon >= 0.0) || !(cfg.min_length >= 0.0) {
        bail!("--spacing must be positive and --epsilon, --min-len non-negative");
    }
    run.set_config(&cfg)?;
    let input = resolve_input(&a.input)?;
    run.input(&input);
    let sketches = load_sketches(&input)?;
    let (kept, dropped) = run.timed("preprocess", |_| {
        let mut kept = Vec::with_capacity(sketches.len());
        let mut dropped = 0usize;
        for (i, s) in sketches.iter().enumerate() {
            match preprocess_sketch(s, &cfg) {
                Ok(p) => kept.push(p),
                // nothing drawable left
                Err(Error::Degenerate(_)) => dropped += 1,
                Err(e) => return Err(e).with_context(|| format!("sketch {i}")),
            }
        }
        Ok((kept, dropped))
    })?;
    if kept.is_empty() {
        bail!("every sketch was dropped as degenerate");
    }
    write_sketch_file(&a.out, &kept, run)?;
    eprintln!("kept {} sketches, dropped {dropped} degenerate", kept.len());
    Ok(())
}

pub fn render(a: &RenderArgs, run: &mut Run) -> Result<()> {
    let input = resolve_input(&a.input)?;
    run.input(&input);
    run.set_config(&serde_json::json!({ "index": a.index, "monochrome": a.monochrome }))?;
    let sketches = load_sketches(&input)?;
    let indices: Vec<usize> = match a.index {
        Some(i) if i < sketches.len() => vec![i],
        Some(i) => bail!("--index {i} is out of range for {} sketches", sketches.len()),
        None => (0..sketches.len()).collect(),
    };
    std::fs::create_dir_all(&a.out_dir)?;
    for i in indices {
        let s = &sketches[i];
        let panel = Panel { sketch: s, caption: format!("{} #{i}", s.category()), colored: !a.monochrome };
        let svg = render_panels(&[panel]).with_context(|| format!("sketch {i}"))?;
        write_text(&a.out_dir.join(format!("sketch-{i:04}.svg")), &svg, run)?;
    }
    Ok(())
}
