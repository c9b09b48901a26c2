//! Layer-normalized LSTM cell.
//!
//! Gate pre-activations `a = W_x x + W_h h + b` are split into the blocks
//! `[i, f, g, o]`; each block is layer-normalized with its own gain and bias
//! before the nonlinearity. The cell update is
//! `c = f ⊙ c_prev + i ⊙ (g ⊙ mask)` where `mask` is the optional recurrent
//! dropout mask on the candidate, so the memory path itself is never zeroed.
//! The output is `h = o ⊙ tanh(LN(c))`.

use super::init::xavier_init;
use super::layer_norm::{layer_norm, layer_norm_backward, LayerNormCache, LN_EPS};
use super::params::Parameters;
use super::tensor::Tensor;
use crate::scalar::{sigmoid, Scalar};
use crate::{Error, Result};
use rand::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams<T> {
    pub input_size: usize,
    pub hidden_size: usize,
    /// `4H × I`
    pub w_x: Tensor<T>,
    /// `4H × H`
    pub w_h: Tensor<T>,
    pub bias: Tensor<T>,
    pub ln_gain: Tensor<T>,
    pub ln_bias: Tensor<T>,
    pub ln_c_gain: Tensor<T>,
    pub ln_c_bias: Tensor<T>,
}

impl<T: Scalar> LstmParams<T> {
    /// Xavier weights, zero biases, unit layer-norm gains and a forget-gate
    /// layer-norm bias of one.
    pub fn new<R: Rng + ?Sized>(input_size: usize, hidden_size: usize, rng: &mut R) -> Self {
        assert!(hidden_size >= 2, "layer norm needs at least 2 hidden units");
        let h = hidden_size;
        let mut ln_bias = Tensor::zeros(4 * h, 1);
        ln_bias.data[h..2 * h].iter_mut().for_each(|b| *b = T::one());
        Self {
            input_size,
            hidden_size,
            w_x: xavier_init(4 * h, input_size, rng),
            w_h: xavier_init(4 * h, h, rng),
            bias: Tensor::zeros(4 * h, 1),
            ln_gain: Tensor::filled(4 * h, 1, T::one()),
            ln_bias,
            ln_c_gain: Tensor::filled(h, 1, T::one()),
            ln_c_bias: Tensor::zeros(h, 1),
        }
    }

    /// All tensors zero (gains included).
    pub fn zeros(input_size: usize, hidden_size: usize) -> Self {
        let h = hidden_size;
        Self {
            input_size,
            hidden_size,
            w_x: Tensor::zeros(4 * h, input_size),
            w_h: Tensor::zeros(4 * h, h),
            bias: Tensor::zeros(4 * h, 1),
            ln_gain: Tensor::zeros(4 * h, 1),
            ln_bias: Tensor::zeros(4 * h, 1),
            ln_c_gain: Tensor::zeros(h, 1),
            ln_c_bias: Tensor::zeros(h, 1),
        }
    }
}

impl<T: Scalar> Parameters<T> for LstmParams<T> {
    fn tensors(&self) -> Vec<&Tensor<T>> {
        vec![
            &self.w_x,
            &self.w_h,
            &self.bias,
            &self.ln_gain,
            &self.ln_bias,
            &self.ln_c_gain,
            &self.ln_c_bias,
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor<T>> {
        vec![
            &mut self.w_x,
            &mut self.w_h,
            &mut self.bias,
            &mut self.ln_gain,
            &mut self.ln_bias,
            &mut self.ln_c_gain,
            &mut self.ln_c_bias,
        ]
    }

    fn names(&self) -> Vec<String> {
        ["w_x", "w_h", "bias", "ln_gain", "ln_bias", "ln_c_gain", "ln_c_bias"]
            .map(String::from)
            .to_vec()
    }
}

/// Everything the backward pass needs from one forward step.
#[derive(Debug, Clone)]
pub struct LstmCache<T> {
    pub x: Vec<T>,
    pub h_prev: Vec<T>,
    pub c_prev: Vec<T>,
    gate_ln: [LayerNormCache<T>; 4],
    /// post-activation gates `[i, f, g, o]`, each of length H
    gates: Vec<T>,
    mask: Option<Vec<T>>,
    c_ln: LayerNormCache<T>,
    tanh_c: Vec<T>,
    pub h: Vec<T>,
    pub c: Vec<T>,
}

fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::ShapeMismatch {
            what,
            expected,
            got,
        });
    }
    Ok(())
}

pub fn lstm_forward<T: Scalar>(
    p: &LstmParams<T>,
    x: &[T],
    h_prev: &[T],
    c_prev: &[T],
    mask: Option<&[T]>,
) -> Result<LstmCache<T>> {
    let hs = p.hidden_size;
    check_len("lstm input", p.input_size, x.len())?;
    check_len("lstm hidden state", hs, h_prev.len())?;
    check_len("lstm cell state", hs, c_prev.len())?;
    if let Some(m) = mask {
        check_len("dropout mask", hs, m.len())?;
    }
    let eps = T::lit(LN_EPS);
    let mut pre = p.bias.data.clone();
    p.w_x.matvec_add(x, &mut pre);
    p.w_h.matvec_add(h_prev, &mut pre);

    let mut gates = vec![T::zero(); 4 * hs];
    let gate_ln: [LayerNormCache<T>; 4] = std::array::from_fn(|k| {
        let r = k * hs..(k + 1) * hs;
        let (out, cache) = layer_norm(
            &pre[r.clone()],
            &p.ln_gain.data[r.clone()],
            &p.ln_bias.data[r.clone()],
            eps,
        );
        for (j, v) in out.into_iter().enumerate() {
            gates[k * hs + j] = if k == 2 { v.tanh() } else { sigmoid(v) };
        }
        cache
    });

    let mut c = vec![T::zero(); hs];
    for j in 0..hs {
        let cand = gates[2 * hs + j] * mask.map_or(T::one(), |m| m[j]);
        c[j] = gates[hs + j] * c_prev[j] + gates[j] * cand;
    }
    let (c_norm, c_ln) = layer_norm(&c, &p.ln_c_gain.data, &p.ln_c_bias.data, eps);
    let tanh_c: Vec<T> = c_norm.iter().map(|v| v.tanh()).collect();
    let h = (0..hs).map(|j| gates[3 * hs + j] * tanh_c[j]).collect();
    Ok(LstmCache {
        x: x.to_vec(),
        h_prev: h_prev.to_vec(),
        c_prev: c_prev.to_vec(),
        gate_ln,
        gates,
        mask: mask.map(<[T]>::to_vec),
        c_ln,
        tanh_c,
        h,
        c,
    })
}

/// One step of the cell; returns `(h, c)`.
pub fn lstm_step<T: Scalar>(
    p: &LstmParams<T>,
    x: &[T],
    h_prev: &[T],
    c_prev: &[T],
    mask: Option<&[T]>,
) -> Result<(Vec<T>, Vec<T>)> {
    let cache = lstm_forward(p, x, h_prev, c_prev, mask)?;
    Ok((cache.h, cache.c))
}

/// Back-propagates `(dh, dc)` through one step. Parameter gradients are
/// accumulated into `grads`, the input gradient into `dx`; returns
/// `(dh_prev, dc_prev)`.
pub fn lstm_backward<T: Scalar>(
    p: &LstmParams<T>,
    cache: &LstmCache<T>,
    dh: &[T],
    dc: &[T],
    grads: &mut LstmParams<T>,
    dx: &mut [T],
) -> (Vec<T>, Vec<T>) {
    let hs = p.hidden_size;
    let g = &cache.gates;
    let one = T::one();

    // h = o ⊙ tanh(LN(c))
    let mut dgate_act = vec![T::zero(); 4 * hs];
    let mut dc_norm = vec![T::zero(); hs];
    for j in 0..hs {
        dgate_act[3 * hs + j] = dh[j] * cache.tanh_c[j];
        let dt = dh[j] * g[3 * hs + j];
        dc_norm[j] = dt * (one - cache.tanh_c[j] * cache.tanh_c[j]);
    }
    let mut dc_total = layer_norm_backward(
        &cache.c_ln,
        &p.ln_c_gain.data,
        &dc_norm,
        &mut grads.ln_c_gain.data,
        &mut grads.ln_c_bias.data,
    );
    for j in 0..hs {
        dc_total[j] += dc[j];
    }

    // c = f ⊙ c_prev + i ⊙ g ⊙ mask
    let mut dc_prev = vec![T::zero(); hs];
    for j in 0..hs {
        let m = cache.mask.as_ref().map_or(one, |m| m[j]);
        let d = dc_total[j];
        dgate_act[j] = d * g[2 * hs + j] * m;
        dgate_act[hs + j] = d * cache.c_prev[j];
        dgate_act[2 * hs + j] = d * g[j] * m;
        dc_prev[j] = d * g[hs + j];
    }

    // activations, then per-block layer norm
    let mut dpre = vec![T::zero(); 4 * hs];
    for k in 0..4 {
        let r = k * hs..(k + 1) * hs;
        let dln: Vec<T> = r
            .clone()
            .map(|i| {
                let a = g[i];
                let local = if k == 2 { one - a * a } else { a * (one - a) };
                dgate_act[i] * local
            })
            .collect();
        let d = layer_norm_backward(
            &cache.gate_ln[k],
            &p.ln_gain.data[r.clone()],
            &dln,
            &mut grads.ln_gain.data[r.clone()],
            &mut grads.ln_bias.data[r.clone()],
        );
        dpre[r].copy_from_slice(&d);
    }

    grads.bias.add_slice(&dpre);
    grads.w_x.add_outer(&dpre, &cache.x);
    grads.w_h.add_outer(&dpre, &cache.h_prev);
    p.w_x.matvec_t_add(&dpre, dx);
    let mut dh_prev = vec![T::zero(); hs];
    p.w_h.matvec_t_add(&dpre, &mut dh_prev);
    (dh_prev, dc_prev)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::finite_difference_check;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_cell_outputs_zero() {
        let p = LstmParams::<f64>::zeros(3, 4);
        let (h, c) = lstm_step(&p, &[5.0, -2.0, 9.0], &[0.0; 4], &[0.0; 4], None).unwrap();
        assert_eq!(h, vec![0.0; 4]);
        assert_eq!(c, vec![0.0; 4]);
    }

    #[test]
    fn unit_mask_is_no_dropout() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = LstmParams::<f64>::new(3, 4, &mut rng);
        let x = [0.5, -1.0, 2.0];
        let h0 = [0.1, -0.2, 0.3, 0.0];
        let c0 = [0.5, 0.5, -0.5, 1.0];
        let a = lstm_step(&p, &x, &h0, &c0, None).unwrap();
        let b = lstm_step(&p, &x, &h0, &c0, Some(&[1.0; 4])).unwrap();
        assert_eq!(a, b);
        let c = lstm_step(&p, &x, &h0, &c0, None).unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let p = LstmParams::<f64>::zeros(3, 4);
        assert!(lstm_step(&p, &[0.0; 2], &[0.0; 4], &[0.0; 4], None).is_err());
        assert!(lstm_step(&p, &[0.0; 3], &[0.0; 3], &[0.0; 4], None).is_err());
        assert!(lstm_step(&p, &[0.0; 3], &[0.0; 4], &[0.0; 4], Some(&[1.0; 2])).is_err());
    }

    /// Three unrolled steps with a dropout mask on the middle one; the loss is
    /// a fixed linear read-out of the final `h` and `c` plus the inputs.
    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut p = LstmParams::<f64>::new(3, 4, &mut rng);
        for t in p.tensors_mut() {
            for v in &mut t.data {
                *v += rng.random_range(-0.3..0.3);
            }
        }
        let xs: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let mask = vec![1.0 / 0.9, 0.0, 1.0 / 0.9, 1.0 / 0.9];
        let wh: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let wc: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();

        let run = |p: &LstmParams<f64>| {
            let mut h = vec![0.0; 4];
            let mut c = vec![0.2, -0.1, 0.0, 0.3];
            let mut caches = Vec::new();
            for (t, x) in xs.iter().enumerate() {
                let m = (t == 1).then_some(mask.as_slice());
                let cache = lstm_forward(p, x, &h, &c, m).unwrap();
                h = cache.h.clone();
                c = cache.c.clone();
                caches.push(cache);
            }
            let loss = h.iter().zip(&wh).map(|(a, b)| a * b).sum::<f64>()
                + c.iter().zip(&wc).map(|(a, b)| a * b).sum::<f64>();
            (loss, caches)
        };

        let (_, caches) = run(&p);
        let mut grads = p.zeros_like();
        let mut dh = wh.clone();
        let mut dc = wc.clone();
        for cache in caches.iter().rev() {
            let mut dx = vec![0.0; 3];
            let (a, b) = lstm_backward(&p, cache, &dh, &dc, &mut grads, &mut dx);
            dh = a;
            dc = b;
        }
        let report = finite_difference_check(|q: &LstmParams<f64>| run(q).0, &p, &grads, 1e-5);
        assert!(report.max_rel_err < 1e-4, "{report:?}");
    }
}
