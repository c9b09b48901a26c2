use super::params::Parameters;
use super::tensor::Tensor;
use crate::scalar::Scalar;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            ..Self::default()
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates, one pair of tensors per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState<T> {
    pub m: Vec<Tensor<T>>,
    pub v: Vec<Tensor<T>>,
    pub step: u64,
}

impl<T: Scalar> OptimizerState<T> {
    pub fn new<P: Parameters<T>>(params: &P) -> Self {
        let zeros: Vec<Tensor<T>> = params
            .tensors()
            .iter()
            .map(|t| Tensor::zeros(t.rows, t.cols))
            .collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            step: 0,
        }
    }
}

fn check_shapes<T: Scalar>(a: &[&Tensor<T>], b: &[&Tensor<T>]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch {
            what: "parameter list",
            expected: a.len(),
            got: b.len(),
        });
    }
    for (x, y) in a.iter().zip(b) {
        if x.shape() != y.shape() {
            return Err(Error::ShapeMismatch {
                what: "parameter tensor",
                expected: x.len(),
                got: y.len(),
            });
        }
    }
    Ok(())
}

/// One bias-corrected Adam step; increments `state.step`.
pub fn adam_update<T: Scalar, P: Parameters<T>>(
    params: &mut P,
    grads: &P,
    state: &mut OptimizerState<T>,
    cfg: &AdamConfig,
) -> Result<()> {
    let g = grads.tensors();
    check_shapes(&params.tensors(), &g)?;
    check_shapes(&state.m.iter().collect::<Vec<_>>(), &g)?;
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (T::lit(cfg.beta1), T::lit(cfg.beta2));
    let one = T::one();
    let c1 = one - b1.powi(t);
    let c2 = one - b2.powi(t);
    let lr = T::lit(cfg.lr);
    let eps = T::lit(cfg.eps);
    for (((p, g), m), v) in params
        .tensors_mut()
        .into_iter()
        .zip(g)
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        for i in 0..p.data.len() {
            let gi = g.data[i];
            m.data[i] = b1 * m.data[i] + (one - b1) * gi;
            v.data[i] = b2 * v.data[i] + (one - b2) * gi * gi;
            let mh = m.data[i] / c1;
            let vh = v.data[i] / c2;
            p.data[i] -= lr * mh / (vh.sqrt() + eps);
        }
    }
    Ok(())
}

/// Clamps every gradient entry to `[-threshold, threshold]`.
pub fn clip_gradients<T: Scalar, P: Parameters<T>>(grads: &mut P, threshold: T) {
    assert!(threshold > T::zero(), "clip threshold must be positive");
    for t in grads.tensors_mut() {
        for v in &mut t.data {
            *v = v.max(-threshold).min(threshold);
        }
    }
}
