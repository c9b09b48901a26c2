//! Per-stroke variational autoencoder.
//!
//! A bidirectional layer-normalized LSTM reads a stroke in offset form and
//! produces `h = [h_f; h_b]`, from which `μ` and `σ̂` are affine projections.
//! The latent `z = μ + exp(σ̂/2) ⊙ ε` initializes the decoder state through
//! `[h_0; c_0] = tanh(W_z z + b_z)`, and the decoder consumes `[s_{t-1}; z]`
//! at every step, emitting a bivariate Gaussian mixture over the next offset
//! plus pen-state logits.
//!
//! Training loss per stroke is `J_d + J_ps + w_KL · J_KL`. `J_d` averages the
//! mixture NLL over real points, `J_ps` averages the pen cross entropy over
//! the padded length so the decoder learns to stay in the end state.

mod train;

pub use train::{
    kl_weight, stroke_length_percentile, train, LossRecord, Trainer, VaeCheckpoint,
};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::mdn::{self, apply_temperature, output_size, sample_point, split_params, step_loss, transform_params};
use crate::nn::{lstm_backward, lstm_forward, xavier_init, LstmCache, LstmParams, Parameters, Tensor};
use crate::scalar::Scalar;
use crate::sketch::{from_offsets, to_offsets, PenState, Point2, Point5, Sketch, Stroke, StrokeBatch};
use crate::{Error, Result};

/// Sampling length used when neither the config nor the corpus provides one.
pub const DEFAULT_MAX_LEN: usize = 250;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VaeConfig {
    /// Hidden units per encoder direction.
    pub enc_hidden: usize,
    pub dec_hidden: usize,
    pub num_mixtures: usize,
    pub z_size: usize,
    pub batch_size: usize,
    pub kl_weight_start: f64,
    pub kl_decay: f64,
    pub lr: f64,
    pub grad_clip: f64,
    /// Keep probability of the recurrent dropout mask.
    pub keep_prob: f64,
    /// Sampling cap; `None` means "derive from the training corpus".
    pub max_len: Option<usize>,
    /// Random x/y scaling of training strokes.
    pub augment: bool,
}

impl Default for VaeConfig {
    fn default() -> Self {
        Self {
            enc_hidden: 512,
            dec_hidden: 1024,
            num_mixtures: 20,
            z_size: 128,
            batch_size: 100,
            kl_weight_start: 0.01,
            kl_decay: 0.99995,
            lr: 1e-4,
            grad_clip: 1.0,
            keep_prob: 0.9,
            max_len: None,
            augment: true,
        }
    }
}

impl VaeConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::invalid(format!("vae config: {m}")));
        if self.enc_hidden < 2 || self.dec_hidden < 2 {
            return bad("hidden sizes must be >= 2");
        }
        if self.num_mixtures == 0 || self.z_size == 0 || self.batch_size == 0 {
            return bad("num_mixtures, z_size and batch_size must be positive");
        }
        if !(self.kl_decay > 0.0 && self.kl_decay < 1.0) {
            return bad("kl_decay must lie in (0, 1)");
        }
        if !(0.0..=1.0).contains(&self.kl_weight_start) {
            return bad("kl_weight_start must lie in [0, 1]");
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return bad("lr must be finite and non-negative");
        }
        if !(self.grad_clip > 0.0) {
            return bad("grad_clip must be positive");
        }
        if !(self.keep_prob > 0.0 && self.keep_prob <= 1.0) {
            return bad("keep_prob must lie in (0, 1]");
        }
        if self.max_len == Some(0) {
            return bad("max_len must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VaeModel<T> {
    pub enc_fwd: LstmParams<T>,
    pub enc_bwd: LstmParams<T>,
    pub w_mu: Tensor<T>,
    pub b_mu: Tensor<T>,
    pub w_sigma: Tensor<T>,
    pub b_sigma: Tensor<T>,
    /// `2·dec_hidden × N_z`
    pub w_z: Tensor<T>,
    pub b_z: Tensor<T>,
    pub dec: LstmParams<T>,
    /// `(6M+3) × dec_hidden`
    pub w_y: Tensor<T>,
    pub b_y: Tensor<T>,
    pub config: VaeConfig,
}

impl<T: Scalar> Parameters<T> for VaeModel<T> {
    fn tensors(&self) -> Vec<&Tensor<T>> {
        let mut v = self.enc_fwd.tensors();
        v.extend(self.enc_bwd.tensors());
        v.extend([&self.w_mu, &self.b_mu, &self.w_sigma, &self.b_sigma, &self.w_z, &self.b_z]);
        v.extend(self.dec.tensors());
        v.extend([&self.w_y, &self.b_y]);
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut v = self.enc_fwd.tensors_mut();
        v.extend(self.enc_bwd.tensors_mut());
        v.extend([
            &mut self.w_mu,
            &mut self.b_mu,
            &mut self.w_sigma,
            &mut self.b_sigma,
            &mut self.w_z,
            &mut self.b_z,
        ]);
        v.extend(self.dec.tensors_mut());
        v.extend([&mut self.w_y, &mut self.b_y]);
        v
    }

    fn names(&self) -> Vec<String> {
        let mut v = crate::nn::prefixed("enc_fwd", &self.enc_fwd);
        v.extend(crate::nn::prefixed("enc_bwd", &self.enc_bwd));
        v.extend(["w_mu", "b_mu", "w_sigma", "b_sigma", "w_z", "b_z"].map(String::from));
        v.extend(crate::nn::prefixed("dec", &self.dec));
        v.extend(["w_y", "b_y"].map(String::from));
        v
    }
}

fn input<T: Scalar>(p: &Point5) -> [T; 5] {
    p.to_array().map(T::lit)
}

/// Recurrent dropout mask with entries `0` or `1/keep`.
fn dropout_mask<T: Scalar, R: Rng + ?Sized>(n: usize, keep: f64, rng: &mut R) -> Vec<T> {
    let on = T::lit(1.0 / keep);
    (0..n)
        .map(|_| if rng.random::<f64>() < keep { on } else { T::zero() })
        .collect()
}

/// Encoder/decoder caches of one stroke, kept for the backward pass.
struct RowTrace<T> {
    fwd: Vec<LstmCache<T>>,
    bwd: Vec<LstmCache<T>>,
    h: Vec<T>,
    mu: Vec<T>,
    sigma_hat: Vec<T>,
    z: Vec<T>,
    hc0: Vec<T>,
    dec: Vec<LstmCache<T>>,
    ys: Vec<Vec<T>>,
}

/// The random quantities of one training row, drawn ahead of the forward
/// pass so the computation itself is a pure function.
#[derive(Debug, Clone, PartialEq)]
pub struct RowNoise<T> {
    pub eps: Vec<T>,
    pub enc_fwd_masks: Option<Vec<Vec<T>>>,
    pub enc_bwd_masks: Option<Vec<Vec<T>>>,
    pub dec_masks: Option<Vec<Vec<T>>>,
}

/// Per-row noise for a batch; `None` for pure-padding rows.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNoise<T> {
    pub rows: Vec<Option<RowNoise<T>>>,
}

impl<T: Scalar> BatchNoise<T> {
    /// `ε = 0` and no dropout: the decoder is driven by `z = μ`.
    pub fn deterministic(m: &VaeModel<T>, batch: &StrokeBatch) -> Self {
        let rows = (0..batch.rows())
            .map(|i| {
                (!batch.is_padding_row(i)).then(|| RowNoise {
                    eps: vec![T::zero(); m.config.z_size],
                    enc_fwd_masks: None,
                    enc_bwd_masks: None,
                    dec_masks: None,
                })
            })
            .collect();
        Self { rows }
    }

    /// Standard normal `ε` per row, plus dropout masks when `dropout` is set
    /// and the keep probability is below one.
    pub fn sample<R: Rng + ?Sized>(m: &VaeModel<T>, batch: &StrokeBatch, dropout: bool, rng: &mut R) -> Self {
        let c = &m.config;
        let use_masks = dropout && c.keep_prob < 1.0;
        let rows = (0..batch.rows())
            .map(|i| {
                if batch.is_padding_row(i) {
                    return None;
                }
                let n = batch.real_len(i);
                let eps = (0..c.z_size).map(|_| T::lit(rng.sample(StandardNormal))).collect();
                let mut masks = |len: usize, h: usize| {
                    use_masks.then(|| (0..len).map(|_| dropout_mask(h, c.keep_prob, rng)).collect())
                };
                let enc_fwd_masks = masks(n, c.enc_hidden);
                let enc_bwd_masks = masks(n, c.enc_hidden);
                let dec_masks = masks(batch.seq_len(), c.dec_hidden);
                Some(RowNoise { eps, enc_fwd_masks, enc_bwd_masks, dec_masks })
            })
            .collect();
        Self { rows }
    }
}

/// The three loss terms, each averaged over the non-padding rows of a batch.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossTerms {
    pub j_d: f64,
    pub j_ps: f64,
    pub j_kl: f64,
    pub w_kl: f64,
    pub total: f64,
}

/// `−(1/2N_z) Σ (1 + σ̂ − μ² − exp σ̂)`.
pub fn kl_loss<T: Scalar>(mu: &[T], sigma_hat: &[T]) -> T {
    assert_eq!(mu.len(), sigma_hat.len(), "kl_loss length mismatch");
    let n = T::lit(mu.len() as f64);
    let s: T = mu
        .iter()
        .zip(sigma_hat)
        .map(|(&m, &s)| T::one() + s - m * m - s.exp())
        .sum();
    -s / (n + n)
}

/// `z = μ + exp(σ̂/2) ⊙ ε`.
pub fn sample_latent<T: Scalar, R: Rng + ?Sized>(mu: &[T], sigma_hat: &[T], rng: &mut R) -> Vec<T> {
    assert_eq!(mu.len(), sigma_hat.len(), "sample_latent length mismatch");
    let half = T::lit(0.5);
    mu.iter()
        .zip(sigma_hat)
        .map(|(&m, &s)| m + (s * half).exp() * T::lit(rng.sample(StandardNormal)))
        .collect()
}

fn row_mask<T>(masks: &Option<Vec<Vec<T>>>, t: usize) -> Option<&[T]> {
    masks.as_ref().map(|v| v[t].as_slice())
}

impl<T: Scalar> VaeModel<T> {
    pub fn new<R: Rng + ?Sized>(config: VaeConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let (e, d, nz) = (config.enc_hidden, config.dec_hidden, config.z_size);
        let out = output_size(config.num_mixtures);
        Ok(Self {
            enc_fwd: LstmParams::new(5, e, rng),
            enc_bwd: LstmParams::new(5, e, rng),
            w_mu: xavier_init(nz, 2 * e, rng),
            b_mu: Tensor::zeros(nz, 1),
            w_sigma: xavier_init(nz, 2 * e, rng),
            b_sigma: Tensor::zeros(nz, 1),
            w_z: xavier_init(2 * d, nz, rng),
            b_z: Tensor::zeros(2 * d, 1),
            dec: LstmParams::new(5 + nz, d, rng),
            w_y: xavier_init(out, d, rng),
            b_y: Tensor::zeros(out, 1),
            config,
        })
    }

    /// Runs the encoder over the real points of `seq`.
    fn encode_trace(
        &self,
        seq: &[Point5],
        fwd_masks: &Option<Vec<Vec<T>>>,
        bwd_masks: &Option<Vec<Vec<T>>>,
    ) -> Result<(Vec<LstmCache<T>>, Vec<LstmCache<T>>, Vec<T>)> {
        if seq.is_empty() {
            return Err(Error::invalid("cannot encode an empty sequence"));
        }
        let e = self.config.enc_hidden;
        let run = |p: &LstmParams<T>, order: &mut dyn Iterator<Item = &Point5>, masks: &Option<Vec<Vec<T>>>| {
            let (mut h, mut c) = (vec![T::zero(); e], vec![T::zero(); e]);
            let mut caches = Vec::with_capacity(seq.len());
            for (t, pt) in order.enumerate() {
                let cache = lstm_forward(p, &input::<T>(pt), &h, &c, row_mask(masks, t))?;
                h.clone_from(&cache.h);
                c.clone_from(&cache.c);
                caches.push(cache);
            }
            Ok::<_, Error>((caches, h))
        };
        let (fwd, hf) = run(&self.enc_fwd, &mut seq.iter(), fwd_masks)?;
        let (bwd, hb) = run(&self.enc_bwd, &mut seq.iter().rev(), bwd_masks)?;
        let mut h = hf;
        h.extend(hb);
        Ok((fwd, bwd, h))
    }

    /// Deterministic encoder output `h = [h_f; h_b]` (length `2·enc_hidden`).
    pub fn encoder_state(&self, seq: &[Point5]) -> Result<Vec<T>> {
        Ok(self.encode_trace(seq, &None, &None)?.2)
    }

    fn project(&self, h: &[T]) -> (Vec<T>, Vec<T>) {
        (self.w_mu.affine(h, &self.b_mu), self.w_sigma.affine(h, &self.b_sigma))
    }

    /// `(μ, σ̂)` of the approximate posterior for one stroke.
    pub fn encode(&self, seq: &[Point5]) -> Result<(Vec<T>, Vec<T>)> {
        Ok(self.project(&self.encoder_state(seq)?))
    }

    fn check_z(&self, z: &[T]) -> Result<()> {
        if z.len() != self.config.z_size {
            return Err(Error::ShapeMismatch { what: "latent vector", expected: self.config.z_size, got: z.len() });
        }
        Ok(())
    }

    /// `[h_0; c_0] = tanh(W_z z + b_z)`.
    pub fn init_decoder(&self, z: &[T]) -> Result<(Vec<T>, Vec<T>)> {
        self.check_z(z)?;
        let mut hc: Vec<T> = self.w_z.affine(z, &self.b_z).into_iter().map(|v| v.tanh()).collect();
        let c = hc.split_off(self.config.dec_hidden);
        Ok((hc, c))
    }

    fn decoder_input(prev: &Point5, z: &[T]) -> Vec<T> {
        let mut x = input::<T>(prev).to_vec();
        x.extend_from_slice(z);
        x
    }

    fn decode_trace(
        &self,
        z: &[T],
        seq: &[Point5],
        masks: &Option<Vec<Vec<T>>>,
    ) -> Result<(Vec<T>, Vec<LstmCache<T>>, Vec<Vec<T>>)> {
        self.check_z(z)?;
        let hc0: Vec<T> = self.w_z.affine(z, &self.b_z).into_iter().map(|v| v.tanh()).collect();
        let d = self.config.dec_hidden;
        let (mut h, mut c) = (hc0[..d].to_vec(), hc0[d..].to_vec());
        let mut prev = Point5::start_token();
        let mut caches = Vec::with_capacity(seq.len());
        let mut ys = Vec::with_capacity(seq.len());
        for (t, pt) in seq.iter().enumerate() {
            let cache = lstm_forward(&self.dec, &Self::decoder_input(&prev, z), &h, &c, row_mask(masks, t))?;
            ys.push(self.w_y.affine(&cache.h, &self.b_y));
            h.clone_from(&cache.h);
            c.clone_from(&cache.c);
            caches.push(cache);
            prev = *pt;
        }
        Ok((hc0, caches, ys))
    }

    /// Raw mixture vectors `y_t` (length `6M+3`) for every step of `seq`,
    /// feeding the ground-truth previous point at each step.
    pub fn decode_teacher_forced(&self, z: &[T], seq: &[Point5]) -> Result<Vec<Vec<T>>> {
        Ok(self.decode_trace(z, seq, &None)?.2)
    }

    /// Autoregressive sampling at temperature `tau`. Stops after a stroke-end
    /// point, before a sketch-end point, or at `max_len` points; the last
    /// emitted point always carries the stroke-end state.
    pub fn decode_sample<R: Rng + ?Sized>(&self, z: &[T], tau: f64, rng: &mut R, max_len: usize) -> Result<Vec<Point5>> {
        if !(tau > 0.0 && tau <= 1.0) {
            return Err(Error::invalid(format!("temperature must be in (0, 1], got {tau}")));
        }
        if max_len == 0 {
            return Err(Error::invalid("max_len must be positive"));
        }
        let (mut h, mut c) = self.init_decoder(z)?;
        let m = self.config.num_mixtures;
        let mut prev = Point5::start_token();
        let mut out: Vec<Point5> = Vec::new();
        while out.len() < max_len {
            let cache = lstm_forward(&self.dec, &Self::decoder_input(&prev, z), &h, &c, None)?;
            let y = self.w_y.affine(&cache.h, &self.b_y);
            h = cache.h;
            c = cache.c;
            let raw = split_params(&y, m)?;
            let params = apply_temperature(&raw, &transform_params(&raw)?, T::lit(tau))?;
            let (dx, dy, pen) = sample_point(&params, rng);
            let pen = PenState::from_index(pen).expect("pen index in 0..3");
            let pt = Point5::new(dx.as_f64(), dy.as_f64(), pen);
            if !(pt.dx.is_finite() && pt.dy.is_finite()) {
                return Err(Error::NonFinite(format!("sampled offset at step {}", out.len())));
            }
            match pen {
                PenState::Down => out.push(pt),
                PenState::StrokeEnd => {
                    out.push(pt);
                    break;
                }
                PenState::Ended => {
                    if out.is_empty() {
                        out.push(Point5::new(pt.dx, pt.dy, PenState::StrokeEnd));
                    }
                    break;
                }
            }
            prev = pt;
        }
        if let Some(last) = out.last_mut() {
            last.pen = PenState::StrokeEnd;
        }
        Ok(out)
    }

    fn row_forward(&self, seq: &[Point5], n_real: usize, noise: &RowNoise<T>) -> Result<RowTrace<T>> {
        let (fwd, bwd, h) = self.encode_trace(&seq[..n_real], &noise.enc_fwd_masks, &noise.enc_bwd_masks)?;
        let (mu, sigma_hat) = self.project(&h);
        if noise.eps.len() != mu.len() {
            return Err(Error::ShapeMismatch { what: "latent noise", expected: mu.len(), got: noise.eps.len() });
        }
        let half = T::lit(0.5);
        let z: Vec<T> = (0..mu.len()).map(|i| mu[i] + (sigma_hat[i] * half).exp() * noise.eps[i]).collect();
        let (hc0, dec, ys) = self.decode_trace(&z, seq, &noise.dec_masks)?;
        Ok(RowTrace { fwd, bwd, h, mu, sigma_hat, z, hc0, dec, ys })
    }

    /// Loss of one row; when `grads` is given, accumulates `scale · ∂loss`.
    fn row_loss(
        &self,
        seq: &[Point5],
        n_real: usize,
        noise: &RowNoise<T>,
        w_kl: T,
        grads: Option<(&mut VaeModel<T>, T)>,
    ) -> Result<(T, T, T)> {
        let tr = self.row_forward(seq, n_real, noise)?;
        let m = self.config.num_mixtures;
        let len = seq.len();
        let (wd, wp) = (T::one() / T::lit(n_real as f64), T::one() / T::lit(len as f64));
        let mut steps = Vec::with_capacity(len);
        let (mut j_d, mut j_ps) = (T::zero(), T::zero());
        for (t, pt) in seq.iter().enumerate() {
            let nll_w = if t < n_real { wd } else { T::zero() };
            let s = step_loss(&tr.ys[t], m, T::lit(pt.dx), T::lit(pt.dy), pt.pen.index(), nll_w, wp);
            j_d += nll_w * s.nll;
            j_ps += wp * s.pen_ce;
            steps.push(s.grad);
        }
        let j_kl = kl_loss(&tr.mu, &tr.sigma_hat);
        if let Some((g, scale)) = grads {
            self.row_backward(&tr, steps, w_kl, noise, g, scale);
        }
        Ok((j_d, j_ps, j_kl))
    }

    fn row_backward(&self, tr: &RowTrace<T>, dys: Vec<Vec<T>>, w_kl: T, noise: &RowNoise<T>, g: &mut VaeModel<T>, scale: T) {
        let (d, e, nz) = (self.config.dec_hidden, self.config.enc_hidden, self.config.z_size);
        let one = T::one();
        let mut dz = vec![T::zero(); nz];
        let (mut dh, mut dc) = (vec![T::zero(); d], vec![T::zero(); d]);
        for t in (0..dys.len()).rev() {
            let dy: Vec<T> = dys[t].iter().map(|&v| v * scale).collect();
            let cache = &tr.dec[t];
            g.w_y.add_outer(&dy, &cache.h);
            g.b_y.add_slice(&dy);
            self.w_y.matvec_t_add(&dy, &mut dh);
            let mut dx = vec![T::zero(); 5 + nz];
            let (dhp, dcp) = lstm_backward(&self.dec, cache, &dh, &dc, &mut g.dec, &mut dx);
            for (a, &b) in dz.iter_mut().zip(&dx[5..]) {
                *a += b;
            }
            dh = dhp;
            dc = dcp;
        }
        let dpre: Vec<T> = (0..2 * d)
            .map(|i| {
                let up = if i < d { dh[i] } else { dc[i - d] };
                up * (one - tr.hc0[i] * tr.hc0[i])
            })
            .collect();
        g.w_z.add_outer(&dpre, &tr.z);
        g.b_z.add_slice(&dpre);
        self.w_z.matvec_t_add(&dpre, &mut dz);

        let half = T::lit(0.5);
        let kl_scale = scale * w_kl / T::lit(nz as f64);
        let dmu: Vec<T> = (0..nz).map(|i| dz[i] + kl_scale * tr.mu[i]).collect();
        let dsh: Vec<T> = (0..nz)
            .map(|i| {
                let s = tr.sigma_hat[i];
                dz[i] * noise.eps[i] * half * (s * half).exp() - kl_scale * half * (one - s.exp())
            })
            .collect();
        g.w_mu.add_outer(&dmu, &tr.h);
        g.b_mu.add_slice(&dmu);
        g.w_sigma.add_outer(&dsh, &tr.h);
        g.b_sigma.add_slice(&dsh);
        let mut dhenc = vec![T::zero(); 2 * e];
        self.w_mu.matvec_t_add(&dmu, &mut dhenc);
        self.w_sigma.matvec_t_add(&dsh, &mut dhenc);

        for (p, gp, caches, dh0) in [
            (&self.enc_fwd, &mut g.enc_fwd, &tr.fwd, &dhenc[..e]),
            (&self.enc_bwd, &mut g.enc_bwd, &tr.bwd, &dhenc[e..]),
        ] {
            let (mut dh, mut dc) = (dh0.to_vec(), vec![T::zero(); e]);
            let mut dx = [T::zero(); 5];
            for cache in caches.iter().rev() {
                (dh, dc) = lstm_backward(p, cache, &dh, &dc, gp, &mut dx);
            }
        }
    }

    fn batch_loss(
        &self,
        batch: &StrokeBatch,
        w_kl: f64,
        noise: &BatchNoise<T>,
        mut grads: Option<&mut VaeModel<T>>,
    ) -> Result<LossTerms> {
        if noise.rows.len() != batch.rows() {
            return Err(Error::ShapeMismatch { what: "batch noise rows", expected: batch.rows(), got: noise.rows.len() });
        }
        let live: Vec<usize> = (0..batch.rows()).filter(|&i| !batch.is_padding_row(i)).collect();
        if live.is_empty() {
            return Ok(LossTerms { w_kl, ..Default::default() });
        }
        let scale = T::one() / T::lit(live.len() as f64);
        let w = T::lit(w_kl);
        let (mut j_d, mut j_ps, mut j_kl) = (T::zero(), T::zero(), T::zero());
        for &i in &live {
            let rn = noise.rows[i]
                .as_ref()
                .ok_or_else(|| Error::invalid(format!("missing noise for batch row {i}")))?;
            let g = grads.as_deref_mut().map(|g| (g, scale));
            let (d, p, k) = self.row_loss(&batch.sequences[i], batch.real_len(i), rn, w, g)?;
            j_d += d;
            j_ps += p;
            j_kl += k;
        }
        let (j_d, j_ps, j_kl) = ((j_d * scale).as_f64(), (j_ps * scale).as_f64(), (j_kl * scale).as_f64());
        Ok(LossTerms { j_d, j_ps, j_kl, w_kl, total: j_d + j_ps + w_kl * j_kl })
    }

    /// `J_d + J_ps + w_KL · J_KL` averaged over the non-padding rows of
    /// `batch`. Use [`kl_weight`] to obtain `w_kl` for a training step.
    pub fn total_loss(&self, batch: &StrokeBatch, w_kl: f64, noise: &BatchNoise<T>) -> Result<LossTerms> {
        self.batch_loss(batch, w_kl, noise, None)
    }

    /// [`VaeModel::total_loss`] together with its gradient.
    pub fn total_loss_and_grad(
        &self,
        batch: &StrokeBatch,
        w_kl: f64,
        noise: &BatchNoise<T>,
    ) -> Result<(LossTerms, VaeModel<T>)> {
        let mut g = self.zeros_like();
        let terms = self.batch_loss(batch, w_kl, noise, Some(&mut g))?;
        Ok((terms, g))
    }

    /// Fraction of real steps whose most likely pen state (teacher forced,
    /// `z = μ`) matches the target.
    pub fn pen_accuracy(&self, sketches: &[Sketch]) -> Result<f64> {
        let (mut hit, mut total) = (0usize, 0usize);
        let m = self.config.num_mixtures;
        for st in sketches.iter().flat_map(|s| s.strokes()) {
            let seq = to_offsets(st, Point2::ORIGIN);
            let (mu, _) = self.encode(&seq)?;
            for (y, pt) in self.decode_teacher_forced(&mu, &seq)?.iter().zip(&seq) {
                let q = &y[6 * m..];
                let best = (0..3).fold(0, |b, k| if q[k] > q[b] { k } else { b });
                hit += usize::from(best == pt.pen.index());
                total += 1;
            }
        }
        if total == 0 {
            return Err(Error::invalid("pen accuracy of an empty corpus"));
        }
        Ok(hit as f64 / total as f64)
    }

    /// Encodes, samples `z` and decodes every stroke of `sketch`. Absolute
    /// positions are recovered from the offsets, whose first entry is
    /// measured from the canvas origin.
    pub fn reconstruct_sketch<R: Rng + ?Sized>(&self, sketch: &Sketch, tau: f64, rng: &mut R) -> Result<Sketch> {
        let max_len = self.config.max_len.unwrap_or(DEFAULT_MAX_LEN);
        let strokes = sketch
            .strokes()
            .iter()
            .map(|st| {
                let (mu, sh) = self.encode(&to_offsets(st, Point2::ORIGIN))?;
                let z = sample_latent(&mu, &sh, rng);
                let mut pts = from_offsets(&self.decode_sample(&z, tau, rng, max_len)?, Point2::ORIGIN);
                if pts.len() == 1 {
                    pts.push(pts[0]);
                }
                Stroke::new(pts, st.label().map(String::from))
            })
            .collect::<Result<Vec<_>>>()?;
        Sketch::new(sketch.category(), strokes)
    }

    /// Mixture parameters of step `t` of a teacher-forced decode, mainly for
    /// inspection.
    pub fn step_mixture(&self, y: &[T]) -> Result<mdn::MixtureParams<T>> {
        transform_params(&split_params(y, self.config.num_mixtures)?)
    }
}
