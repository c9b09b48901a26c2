//! Autoencoder commands: train-vae, reconstruct.

use std::fmt::Write as _;

use anyhow::{bail, Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use strokeseg::vae::{stroke_length_percentile, LossRecord, Trainer, VaeCheckpoint, VaeConfig, VaeModel};

use crate::cli::{ReconstructArgs, TrainVaeArgs};
use crate::cmd_data::{write_json, write_text};
use crate::config::merge_config;
use crate::data::{load_sketches, resolve_input};
use crate::manifest::Run;
use crate::svg::{render_panels, Panel};

pub const LOSS_HEADER: &str = "step,epoch,j_d,j_ps,j_kl,w_kl,total";

fn loss_row(out: &mut String, r: &LossRecord) {
    writeln!(out, "{},{},{},{},{},{},{}", r.step, r.epoch, r.j_d, r.j_ps, r.j_kl, r.w_kl, r.total).expect("write to String");
}

pub fn train_vae(a: &TrainVaeArgs, run: &mut Run) -> Result<()> {
    let data = resolve_input(&a.data)?;
    run.input(&data);
    let sketches = load_sketches(&data)?;

    let mut trainer: Trainer<f64> = match &a.resume {
        Some(path) => {
            if !a.config.is_empty() {
                bail!("--config cannot change a resumed run; its configuration comes from the checkpoint");
            }
            let path = resolve_input(path)?;
            run.input(&path);
            let ck = VaeCheckpoint::load(&path).with_context(|| format!("reading checkpoint {}", path.display()))?;
            if ck.seed != run.seed() {
                eprintln!("note: continuing with the checkpoint's seed {} (--seed {} ignored)", ck.seed, run.seed());
            }
            Trainer::from_checkpoint(&ck)?
        }
        None => {
            let mut cfg: VaeConfig = merge_config(&VaeConfig::default(), &a.config)?;
            if cfg.max_len.is_none() {
                cfg.max_len = stroke_length_percentile(&sketches, 0.99);
            }
            cfg.validate()?;
            // a stream of its own so initialization never shares draws with epoch 0
            let mut init = ChaCha8Rng::seed_from_u64(run.seed());
            init.set_stream(u64::MAX);
            Trainer::new(VaeModel::new(cfg, &mut init)?, run.seed())
        }
    };
    run.set_config(&trainer.model.config)?;

    std::fs::create_dir_all(&a.out_dir)?;
    let ck_path = a.out_dir.join("checkpoint.json");
    let loss_path = a.out_dir.join("loss.csv");
    let mut csv = format!("{LOSS_HEADER}\n");
    for _ in 0..a.epochs {
        let epoch = trainer.epoch;
        let history = run.timed("train", |_| Ok(trainer.train_epoch(&sketches)?))?;
        for r in &history {
            loss_row(&mut csv, r);
        }
        let mean = |f: fn(&LossRecord) -> f64| history.iter().map(f).sum::<f64>() / history.len().max(1) as f64;
        eprintln!(
            "epoch {epoch}: {} steps, J_d {:.4}, J_ps {:.4}, J_KL {:.4}, total {:.4}",
            history.len(),
            mean(|r| r.j_d),
            mean(|r| r.j_ps),
            mean(|r| r.j_kl),
            mean(|r| r.total)
        );
        // checkpoint after every epoch so an interrupted run can resume
        run.timed("checkpoint", |_| Ok(trainer.checkpoint().save(&ck_path)?))?;
        std::fs::write(&loss_path, &csv)?;
    }
    run.timed("checkpoint", |_| Ok(trainer.checkpoint().save(&ck_path)?))?;
    run.output(&ck_path);
    write_text(&loss_path, &csv, run)?;
    Ok(())
}

pub fn reconstruct(a: &ReconstructArgs, run: &mut Run) -> Result<()> {
    if a.tau.is_empty() {
        bail!("--tau needs at least one temperature");
    }
    if let Some(t) = a.tau.iter().find(|&&t| !(t > 0.0 && t <= 1.0)) {
        bail!("temperature {t} is outside (0, 1]");
    }
    let ck_path = resolve_input(&a.checkpoint)?;
    let data = resolve_input(&a.sketches)?;
    run.input(&ck_path);
    run.input(&data);
    let ck = VaeCheckpoint::load(&ck_path).with_context(|| format!("reading checkpoint {}", ck_path.display()))?;
    let model: VaeModel<f64> = ck.model().context("checkpoint does not match its configuration")?;
    run.set_config(&serde_json::json!({ "tau": a.tau, "limit": a.limit, "model": model.config }))?;
    let mut sketches = load_sketches(&data)?;
    if let Some(n) = a.limit {
        sketches.truncate(n);
    }
    std::fs::create_dir_all(&a.out_dir)?;
    let mut index = Vec::new();
    for (i, s) in sketches.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(run.seed());
        rng.set_stream(i as u64);
        let recons = run.timed("decode", |_| {
            a.tau.iter().map(|&t| Ok(model.reconstruct_sketch(s, t, &mut rng)?)).collect::<Result<Vec<_>>>()
        })?;
        let mut panels = vec![Panel { sketch: s, caption: format!("original ({})", s.category()), colored: true }];
        for (r, t) in recons.iter().zip(&a.tau) {
            panels.push(Panel { sketch: r, caption: format!("tau = {t}"), colored: true });
        }
        let name = format!("recon-{i:04}.svg");
        write_text(&a.out_dir.join(&name), &render_panels(&panels)?, run)?;
        index.push(serde_json::json!({ "sketch": i, "category": s.category(), "file": name }));
    }
    write_json(&a.out_dir.join("index.json"), &index, run)?;
    Ok(())
}
