//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if a criterion fails that is not a recorded deviation.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use strokeseg::idm::FeatureKind;
use strokeseg::mdn::{bivariate_pdf, split_params, transform_params};
use strokeseg::nn::finite_difference_check;
use strokeseg::seg::{class_weights, cross_validate, sketch_feature_vectors, train_segmenter, CvOptions, FeatureSource, SegConfig};
use strokeseg::sketch::{
    from_offsets, make_stroke_batches, preprocess_sketch, rdp_simplify, to_offsets, Point2, Point5, PreprocessConfig,
    Sketch, Stroke,
};
use strokeseg::synth::synth_corpus;
use strokeseg::vae::{kl_loss, kl_weight, sample_latent, BatchNoise, Trainer, VaeConfig, VaeModel};

/// Criteria expected to fail, with the reason.
const KNOWN_DEVIATIONS: &[(usize, &str)] = &[(
    11,
    "the listed example weights are not softmax(−n̂) of the listed n̂ and do not sum to 1",
)];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn preprocessed(category: &str, n: usize, seed: u64) -> Vec<Sketch> {
    synth_corpus(category, n, seed)
        .unwrap()
        .iter()
        .map(|s| preprocess_sketch(s, &PreprocessConfig::default()).unwrap())
        .collect()
}

// 1 ------------------------------------------------------------------------

fn mixture_math() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let m = 5;
    let mut worst_sum = 0.0f64;
    let mut worst_integral = 0.0f64;
    let mut valid = true;
    for _ in 0..1000 {
        let raw: Vec<f64> = (0..6 * m + 3).map(|_| rng.random_range(-3.0..3.0)).collect();
        let p = transform_params(&split_params(&raw, m).unwrap()).unwrap();
        worst_sum = worst_sum.max((p.pi.iter().sum::<f64>() - 1.0).abs()).max((p.q.iter().sum::<f64>() - 1.0).abs());
        valid &= p.sigma_x.iter().chain(&p.sigma_y).all(|&s| s > 0.0) && p.rho.iter().all(|r| r.abs() < 1.0);
        // midpoint rule over [μ ± 6σ]² with 400² cells, one component per draw
        let i = rng.random_range(0..m);
        let (sx, sy) = (p.sigma_x[i], p.sigma_y[i]);
        let (hx, hy) = (12.0 * sx / 400.0, 12.0 * sy / 400.0);
        let mut total = 0.0;
        for a in 0..400 {
            let x = p.mu_x[i] - 6.0 * sx + (a as f64 + 0.5) * hx;
            for b in 0..400 {
                let y = p.mu_y[i] - 6.0 * sy + (b as f64 + 0.5) * hy;
                total += bivariate_pdf(p.mu_x[i], p.mu_y[i], sx, sy, p.rho[i], x, y).unwrap();
            }
        }
        worst_integral = worst_integral.max((total * hx * hy - 1.0).abs());
    }
    outcome(
        worst_sum < 1e-6 && valid && worst_integral < 1e-2,
        format!("max |Σ−1| {worst_sum:.1e}, constraints hold: {valid}, max |∫pdf−1| {worst_integral:.1e}"),
    )
}

// 2 ------------------------------------------------------------------------

fn gradient_check() -> Outcome {
    let cfg = VaeConfig { enc_hidden: 4, dec_hidden: 8, num_mixtures: 2, z_size: 3, batch_size: 1, ..VaeConfig::default() };
    let model: VaeModel<f64> = VaeModel::new(cfg, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
    let st = Stroke::unlabeled(vec![Point2::new(1.0, 0.5), Point2::new(1.6, 1.1), Point2::new(2.3, 0.7)]).unwrap();
    let batch = make_stroke_batches(&[Sketch::new("chair", vec![st]).unwrap()], 1).unwrap().remove(0);
    // ε and the dropout masks are drawn once and held fixed
    let noise = BatchNoise::sample(&model, &batch, true, &mut ChaCha8Rng::seed_from_u64(3));
    let w_kl = 0.4;
    let (_, grad) = model.total_loss_and_grad(&batch, w_kl, &noise).unwrap();
    let report = finite_difference_check(|p: &VaeModel<f64>| p.total_loss(&batch, w_kl, &noise).unwrap().total, &model, &grad, 1e-5);
    outcome(
        report.max_rel_err < 1e-4,
        format!("max relative error {:.2e} over {} parameters (worst {:?})", report.max_rel_err, report.checked, report.worst),
    )
}

// 3 ------------------------------------------------------------------------

fn kl_monte_carlo() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let mu: Vec<f64> = (0..2)
            .map(|_| rng.random_range(0.5..2.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 })
            .collect();
        let sh: Vec<f64> = (0..2).map(|_| rng.random_range(-2.0..2.0)).collect();
        let n = 1_000_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let z = sample_latent(&mu, &sh, &mut rng);
            for ((&z, &m), &s) in z.iter().zip(&mu).zip(&sh) {
                // ln q(z) − ln p(z) for one coordinate
                acc += -0.5 * s - (z - m) * (z - m) / (2.0 * s.exp()) + 0.5 * z * z;
            }
        }
        let mc = acc / (n * 2) as f64;
        let closed = kl_loss(&mu, &sh);
        worst = worst.max((closed - mc).abs() / closed);
    }
    let zero = kl_loss(&[0.0f64, 0.0], &[0.0, 0.0]);
    outcome(worst < 0.02 && zero == 0.0, format!("max relative gap {:.3}% over 20 draws, kl_loss(0,0) = {zero}", worst * 100.0))
}

// 4 and 7 ------------------------------------------------------------------

/// Ten strokes of preprocessed chairs, each as its own sketch.
fn ten_strokes() -> Vec<Sketch> {
    preprocessed("chair", 10, 1)
        .iter()
        .flat_map(|s| s.strokes().to_vec())
        .take(10)
        .map(|st| Sketch::new("chair", vec![st]).unwrap())
        .collect()
}

struct Overfit {
    data: Vec<Sketch>,
    model: VaeModel<f64>,
    first_jd: f64,
    last_jd: f64,
    secs: f64,
}

fn overfit_toy() -> Overfit {
    let data = ten_strokes();
    let cfg = VaeConfig {
        enc_hidden: 16,
        dec_hidden: 64,
        num_mixtures: 3,
        z_size: 8,
        batch_size: 2,
        lr: 0.01,
        keep_prob: 1.0,
        augment: false,
        ..VaeConfig::default()
    };
    let t = Instant::now();
    let mut trainer = Trainer::new(VaeModel::new(cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap(), 1);
    let mean_jd = |h: &[strokeseg::vae::LossRecord]| h.iter().map(|r| r.j_d).sum::<f64>() / h.len() as f64;
    let mut first_jd = 0.0;
    let mut last_jd = 0.0;
    for e in 0..200 {
        let h = trainer.train_epoch(&data).unwrap();
        // smoothed: mean over the epoch's steps
        if e == 0 {
            first_jd = mean_jd(&h);
        }
        last_jd = mean_jd(&h);
    }
    Overfit { data, model: trainer.model, first_jd, last_jd, secs: t.elapsed().as_secs_f64() }
}

fn vae_overfit(o: &Overfit) -> Outcome {
    let acc = o.model.pen_accuracy(&o.data).unwrap();
    let drop = 1.0 - o.last_jd / o.first_jd;
    outcome(
        drop >= 0.5 && acc >= 0.95,
        format!(
            "epoch-mean J_d {:.2} -> {:.2} ({:.1}% lower), teacher-forced pen accuracy {:.1}%, {:.1} s",
            o.first_jd,
            o.last_jd,
            drop * 100.0,
            acc * 100.0,
            o.secs
        ),
    )
}

/// Mean over the common prefix of the per-point variance of absolute
/// positions across decodes.
fn spread(runs: &[Vec<Point2>]) -> f64 {
    let len = runs.iter().map(Vec::len).min().unwrap();
    let n = runs.len() as f64;
    let mut total = 0.0;
    for t in 0..len {
        let mx = runs.iter().map(|r| r[t].x).sum::<f64>() / n;
        let my = runs.iter().map(|r| r[t].y).sum::<f64>() / n;
        total += runs.iter().map(|r| (r[t].x - mx).powi(2) + (r[t].y - my).powi(2)).sum::<f64>() / n;
    }
    total / len as f64
}

fn temperature_limit(o: &Overfit) -> Outcome {
    let max_len = 2 * o.data.iter().map(|s| s.strokes()[0].len()).max().unwrap();
    let mut worst = 0.0f64;
    for s in &o.data {
        let (mu, _) = o.model.encode(&to_offsets(&s.strokes()[0], Point2::ORIGIN)).unwrap();
        let at = |tau: f64| {
            let runs: Vec<Vec<Point2>> = (0..10)
                .map(|seed| {
                    let pts = o.model.decode_sample(&mu, tau, &mut ChaCha8Rng::seed_from_u64(seed), max_len).unwrap();
                    from_offsets(&pts, Point2::ORIGIN)
                })
                .collect();
            spread(&runs)
        };
        worst = worst.max(at(0.01) / at(1.0));
    }
    outcome(
        worst < 0.05,
        format!(
            "worst stroke: τ=0.01 spread is {:.2}% of τ=1 (mean squared deviation; {:.1}% as a standard deviation)",
            worst * 100.0,
            worst.sqrt() * 100.0
        ),
    )
}

// 5 ------------------------------------------------------------------------

fn batching_example() -> Outcome {
    let stroke = |x: f64, k: usize| {
        Stroke::unlabeled(vec![Point2::new(x, k as f64), Point2::new(x + 1.0, k as f64 + 2.0), Point2::new(x + 3.0, 1.0)][..2 + k % 2].to_vec())
            .unwrap()
    };
    let sketch = |n: usize, x: f64| Sketch::new("chair", (0..n).map(|k| stroke(x, k)).collect()).unwrap();
    let sk = [sketch(4, 10.0), sketch(2, 20.0), sketch(1, 30.0)];
    let b = make_stroke_batches(&sk, 3).unwrap();
    let pad = Point5::padding();
    let mut ok = b.len() == 4 && pad.to_array() == [0.0, 0.0, 0.0, 0.0, 1.0];
    for (k, batch) in b.iter().enumerate() {
        ok &= batch.rows() == 3 && batch.temporal_index == k;
        for (row, s) in sk.iter().enumerate() {
            let seq = &batch.sequences[row];
            match s.strokes().get(k) {
                Some(st) => {
                    let real = to_offsets(st, Point2::ORIGIN);
                    ok &= seq[..real.len()] == real[..] && seq[real.len()..].iter().all(|p| *p == pad);
                }
                None => ok &= seq.iter().all(|p| *p == pad),
            }
        }
    }
    let live: Vec<usize> = b.iter().map(|x| (0..3).filter(|&i| !x.is_padding_row(i)).count()).collect();
    ok &= live == [3, 2, 1, 1];
    outcome(ok, format!("{} batches with {live:?} real rows; batch 2 = [s_2^1; s_2^2; padding]", b.len()))
}

// 6 ------------------------------------------------------------------------

/// Exact squared distance from `p` to segment `ab` as a rational `(num, den)`.
fn dist_sq(p: (i64, i64), a: (i64, i64), b: (i64, i64)) -> (i64, i64) {
    let (vx, vy) = (b.0 - a.0, b.1 - a.1);
    let (wx, wy) = (p.0 - a.0, p.1 - a.1);
    let len2 = vx * vx + vy * vy;
    let dot = wx * vx + wy * vy;
    if len2 == 0 || dot <= 0 {
        (wx * wx + wy * wy, 1)
    } else if dot >= len2 {
        ((p.0 - b.0).pow(2) + (p.1 - b.1).pow(2), 1)
    } else {
        ((vx * wy - vy * wx).pow(2), len2)
    }
}

fn gt(a: (i64, i64), b: (i64, i64)) -> bool {
    a.0 * b.1 > b.0 * a.1
}

/// The unique endpoint-preserving subsequence consistent with splitting at
/// the farthest point whenever it lies outside the ε band, found by trying
/// every subsequence.
fn rdp_oracle(pts: &[(i64, i64)], eps_sq: (i64, i64)) -> Option<u32> {
    let n = pts.len();
    let consistent = |mask: u32| {
        let mut stack = vec![(0usize, n - 1)];
        while let Some((lo, hi)) = stack.pop() {
            if hi <= lo + 1 {
                continue;
            }
            let mut arg = lo + 1;
            let mut best = dist_sq(pts[arg], pts[lo], pts[hi]);
            for i in lo + 2..hi {
                let d = dist_sq(pts[i], pts[lo], pts[hi]);
                if gt(d, best) {
                    best = d;
                    arg = i;
                }
            }
            let inner = (lo + 1..hi).any(|i| mask & (1 << i) != 0);
            if !gt(best, eps_sq) {
                if inner {
                    return false;
                }
            } else {
                if mask & (1 << arg) == 0 {
                    return false;
                }
                stack.push((lo, arg));
                stack.push((arg, hi));
            }
        }
        true
    };
    let ends = (1u32 << (n - 1)) | 1;
    let mut found = (0..(1u32 << (n - 2))).map(|inner| ends | (inner << 1)).filter(|&m| consistent(m));
    let first = found.next()?;
    found.next().is_none().then_some(first)
}

fn rdp_case(code: u64, n: usize, eps: f64, eps_sq: (i64, i64)) -> bool {
    let ipts: Vec<(i64, i64)> = (0..n)
        .map(|k| {
            let c = (code >> (4 * k)) & 15;
            ((c % 4) as i64, (c / 4) as i64)
        })
        .collect();
    let pts: Vec<Point2> = ipts.iter().map(|&(x, y)| Point2::new(x as f64, y as f64)).collect();
    let Some(mask) = rdp_oracle(&ipts, eps_sq) else { return false };
    let expected: Vec<Point2> = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| pts[i]).collect();
    rdp_simplify(&Stroke::unlabeled(pts).unwrap(), eps).unwrap().points() == &expected[..]
}

fn rdp_grid() -> Outcome {
    const EPS: [(f64, (i64, i64)); 3] = [(0.5, (1, 4)), (1.0, (1, 1)), (2.0, (4, 1))];
    const SAMPLES: usize = 200_000;
    let mut checked = 0usize;
    let mut failures = 0usize;
    for n in 2..=6 {
        for code in 0..16u64.pow(n as u32) {
            for &(eps, sq) in &EPS {
                checked += 1;
                failures += usize::from(!rdp_case(code, n, eps, sq));
            }
        }
    }
    let exhaustive = checked;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for n in 7..=8 {
        for _ in 0..SAMPLES {
            let code = rng.random_range(0..16u64.pow(n as u32));
            for &(eps, sq) in &EPS {
                checked += 1;
                failures += usize::from(!rdp_case(code, n, eps, sq));
            }
        }
    }
    outcome(
        failures == 0,
        format!(
            "{failures} mismatches in {checked} cases: every 2..6-point polyline ({exhaustive} cases) plus {SAMPLES} seeded draws each of 7 and 8 points, ε ∈ {{0.5, 1, 2}}"
        ),
    )
}

// 8 and 9 ------------------------------------------------------------------

struct Encoder {
    model: VaeModel<f64>,
    secs: f64,
}

fn desk_encoder() -> Encoder {
    let unlabeled = preprocessed("chair", 500, 100);
    let cfg = VaeConfig {
        enc_hidden: 32,
        dec_hidden: 64,
        num_mixtures: 5,
        z_size: 16,
        batch_size: 50,
        lr: 3e-3,
        ..VaeConfig::default()
    };
    let t = Instant::now();
    let mut trainer = Trainer::new(VaeModel::new(cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap(), 1);
    for _ in 0..5 {
        trainer.train_epoch(&unlabeled).unwrap();
    }
    Encoder { model: trainer.model, secs: t.elapsed().as_secs_f64() }
}

fn chair_classes() -> Vec<String> {
    ["back", "leg", "seat"].map(String::from).to_vec()
}

fn seg_overfit(enc: &Encoder) -> Outcome {
    let labeled = preprocessed("chair", 50, 300);
    let classes = chair_classes();
    let t = Instant::now();
    let mut x = Vec::new();
    let mut y = Vec::new();
    for s in &labeled {
        let feats = sketch_feature_vectors(FeatureSource::Encoder(&enc.model), s).unwrap();
        for (f, l) in feats.into_iter().zip(s.labels().unwrap()) {
            x.push(f);
            y.push(classes.iter().position(|c| c == l).unwrap());
        }
    }
    let cfg = SegConfig { validation_fraction: 0.0, max_epochs: 100, ..SegConfig::default() };
    let (model, _) = train_segmenter::<f64, _>(&x, &y, &classes, &cfg, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
    let correct = x.iter().zip(&y).filter(|(f, &c)| model.predict(f).unwrap() == c).count();
    let acc = correct as f64 / x.len() as f64;
    outcome(
        acc >= 0.95,
        format!(
            "training accuracy {:.1}% on {} strokes of 50 sketches ({}x{} MLP, {:.1} s)",
            acc * 100.0,
            x.len(),
            cfg.hidden1,
            cfg.hidden2,
            t.elapsed().as_secs_f64()
        ),
    )
}

fn desk_trend(enc: &Encoder) -> Outcome {
    let labeled = preprocessed("chair", 100, 200);
    let classes = chair_classes();
    let opts = CvOptions { k: 5, seed: 0, train_size: None, seg: SegConfig { hidden1: 64, hidden2: 32, ..SegConfig::default() } };
    let t = Instant::now();
    let mut acc = Vec::new();
    let sources = [
        FeatureSource::Encoder(&enc.model),
        FeatureSource::Handcrafted(FeatureKind::Idm),
        FeatureSource::Handcrafted(FeatureKind::IdmSpt),
        FeatureSource::Handcrafted(FeatureKind::IdmSptCon),
    ];
    for src in sources {
        let feats: Vec<_> = labeled.iter().map(|s| sketch_feature_vectors(src, s).unwrap()).collect();
        let r = cross_validate::<f64>(&labeled, &feats, src.kind(), &classes, &opts).unwrap();
        acc.push((src.kind(), r.mean_accuracy));
    }
    let (nn, idm) = (acc[0].1, acc[1].1);
    let listed: Vec<String> = acc.iter().map(|(k, a)| format!("{k} {:.1}%", a * 100.0)).collect();
    outcome(
        nn - idm >= 0.05,
        format!(
            "5-fold accuracy {} (nn − idm = {:+.1} points; encoder {:.0} s on 500 sketches, CV {:.0} s)",
            listed.join(", "),
            (nn - idm) * 100.0,
            enc.secs,
            t.elapsed().as_secs_f64()
        ),
    )
}

// 10 -----------------------------------------------------------------------

fn kl_annealing() -> Outcome {
    let cfg = VaeConfig::default();
    let (w0, r) = (cfg.kl_weight_start, cfg.kl_decay);
    let constants = w0 == 0.01 && r == 0.99995;
    let start = kl_weight(0, w0, r);
    // past ~10⁵ steps the increments fall below f64 resolution near 1
    let horizon = 100_000u64;
    let increasing = (0..horizon).all(|s| kl_weight(s + 1, w0, r) > kl_weight(s, w0, r));
    outcome(
        constants && start == 0.01 && increasing,
        format!("kl_weight(0) = {start}, strictly increasing over steps 0..{horizon}, w_KLs = {w0}, R = {r}"),
    )
}

// 11 -----------------------------------------------------------------------

fn class_weight_checks() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut anti = true;
    for _ in 0..1000 {
        let counts: Vec<usize> = (0..rng.random_range(2..8)).map(|_| rng.random_range(1..500)).collect();
        let w = class_weights(&counts).unwrap().w;
        for i in 0..counts.len() {
            for j in 0..counts.len() {
                if counts[i] < counts[j] {
                    anti &= w[i] > w[j];
                }
            }
        }
    }
    let w = class_weights(&[1, 1, 2]).unwrap().w;
    let listed = [0.3559, 0.3559, 0.2772];
    let gap = w.iter().zip(listed).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    // independent evaluation of softmax(−[0.25, 0.25, 0.5])
    let (a, b) = ((-0.25f64).exp(), (-0.5f64).exp());
    let direct = [a / (2.0 * a + b), a / (2.0 * a + b), b / (2.0 * a + b)];
    let recomputed = w.iter().zip(direct).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    outcome(
        anti && gap < 1e-4,
        format!(
            "anti-monotone: {anti}; counts [1,1,2] give [{:.5}, {:.5}, {:.5}], {gap:.1e} from the listed [0.3559, 0.3559, 0.2772] (sum {:.4}); direct softmax agrees to {recomputed:.1e}",
            w[0],
            w[1],
            w[2],
            listed.iter().sum::<f64>()
        ),
    )
}

// 12 -----------------------------------------------------------------------

fn cli(dir: &Path, args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_strokeseg"))
        .args(args)
        .current_dir(dir)
        .env_remove("STROKESEG_DATA_DIR")
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr).trim()))
    }
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let vae = ["--config", "enc_hidden=8", "--config", "dec_hidden=16", "--config", "num_mixtures=2", "--config", "z_size=4", "--config", "batch_size=8"];
    let seg = ["--config", "hidden1=16", "--config", "hidden2=8", "--config", "max_epochs=20"];
    let with = |base: &[&'static str], extra: &[&'static str]| -> Vec<&'static str> { base.iter().chain(extra).copied().collect() };
    // (command line, manifest, files compared after the replay)
    let runs: Vec<(Vec<&str>, &str, Vec<&str>)> = vec![
        (vec!["synth", "--count", "25", "--out", "raw.ndjson", "--seed", "4"], "raw.ndjson.manifest.json", vec!["raw.ndjson"]),
        (vec!["preprocess", "raw.ndjson", "--out", "pre.ndjson"], "pre.ndjson.manifest.json", vec!["pre.ndjson"]),
        (
            with(&["train-vae", "pre.ndjson", "--out-dir", "vae", "--epochs", "2", "--seed", "5"], &vae),
            "vae/manifest.json",
            vec!["vae/loss.csv", "vae/checkpoint.json"],
        ),
        (
            vec!["reconstruct", "pre.ndjson", "--checkpoint", "vae/checkpoint.json", "--out-dir", "rec", "--limit", "3", "--seed", "6"],
            "rec/manifest.json",
            vec!["rec/recon-0000.svg", "rec/recon-0002.svg", "rec/index.json"],
        ),
        (
            with(&["eval-seg", "pre.ndjson", "--feature", "nn,idm", "--encoder", "vae/checkpoint.json", "--train-sizes", "5,20", "--out", "cv.json", "--seed", "7"], &seg),
            "cv.json.manifest.json",
            vec!["cv.json"],
        ),
        (with(&["train-seg", "pre.ndjson", "--feature", "idm-spt-con", "--out", "seg.json", "--seed", "8"], &seg), "seg.json.manifest.json", vec!["seg.json"]),
        (vec!["eval-seg", "pre.ndjson", "--segmenter", "seg.json", "--out", "score.json"], "score.json.manifest.json", vec!["score.json"]),
        (vec!["segment", "pre.ndjson", "--segmenter", "seg.json", "--out", "pred.ndjson"], "pred.ndjson.manifest.json", vec!["pred.ndjson"]),
        (vec!["features", "pre.ndjson", "--feature", "idm-spt", "--out", "feat.ndjson"], "feat.ndjson.manifest.json", vec!["feat.ndjson"]),
        (vec!["render", "pred.ndjson", "--out-dir", "svg"], "svg/manifest.json", vec!["svg/sketch-0000.svg", "svg/sketch-0024.svg"]),
    ];
    let mut failures = Vec::new();
    for (args, manifest, files) in &runs {
        if let Err(e) = cli(d, args) {
            return outcome(false, format!("run failed: {e}"));
        }
        let before: Vec<Vec<u8>> = files.iter().map(|f| std::fs::read(d.join(f)).unwrap_or_default()).collect();
        if let Err(e) = cli(d, &["replay", manifest]) {
            failures.push(e);
            continue;
        }
        for (f, b) in files.iter().zip(&before) {
            if std::fs::read(d.join(f)).unwrap_or_default() != *b || b.is_empty() {
                failures.push(format!("{f} differs after replay"));
            }
        }
    }
    outcome(
        failures.is_empty(),
        if failures.is_empty() {
            format!("{} commands replayed from their manifests with byte-identical outputs", runs.len())
        } else {
            failures.join("; ")
        },
    )
}

// ---------------------------------------------------------------------------

fn main() {
    let total = Instant::now();
    let mut results: Vec<(usize, &str, Outcome, f64)> = Vec::new();
    let mut record = |id: usize, name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let o = f();
        let secs = t.elapsed().as_secs_f64();
        println!("{} {id:>2} {name} [{secs:.1} s]: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((id, name, o, secs));
    };

    record(1, "mixture math", &mut mixture_math);
    record(2, "gradient correctness", &mut gradient_check);
    record(3, "KL closed form", &mut kl_monte_carlo);
    let toy = overfit_toy();
    record(4, "temperature limit", &mut || temperature_limit(&toy));
    record(5, "stroke batching", &mut batching_example);
    record(6, "RDP oracle", &mut rdp_grid);
    record(7, "VAE overfit", &mut || vae_overfit(&toy));
    let enc = desk_encoder();
    record(8, "segmentation overfit", &mut || seg_overfit(&enc));
    record(9, "desk-scale trend", &mut || desk_trend(&enc));
    record(10, "KL annealing", &mut kl_annealing);
    record(11, "class weights", &mut class_weight_checks);
    record(12, "determinism", &mut determinism);

    let mut unexpected = Vec::new();
    for (id, _, o, _) in &results {
        let known = KNOWN_DEVIATIONS.iter().find(|(k, _)| k == id);
        match (o.pass, known) {
            (false, Some((_, why))) => println!("note: criterion {id} is a recorded deviation: {why}"),
            (false, None) => unexpected.push(*id),
            (true, Some(_)) => println!("note: criterion {id} is listed as a deviation but passed"),
            (true, None) => {}
        }
    }
    let passed = results.iter().filter(|r| r.2.pass).count();
    println!("acceptance: {passed}/{} passed in {:.0} s", results.len(), total.elapsed().as_secs_f64());
    if !unexpected.is_empty() {
        println!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
