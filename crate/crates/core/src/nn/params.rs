use super::tensor::Tensor;
use crate::scalar::Scalar;

/// A collection of named parameter tensors in a fixed order.
///
/// The order of [`Parameters::tensors`], [`Parameters::tensors_mut`] and
/// [`Parameters::names`] must agree; optimizers and checkpoints rely on it.
pub trait Parameters<T: Scalar> {
    fn tensors(&self) -> Vec<&Tensor<T>>;
    fn tensors_mut(&mut self) -> Vec<&mut Tensor<T>>;
    fn names(&self) -> Vec<String>;

    fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    fn zero(&mut self) {
        for t in self.tensors_mut() {
            t.fill(T::zero());
        }
    }

    /// Zeroed copy with identical shapes, used as a gradient accumulator.
    fn zeros_like(&self) -> Self
    where
        Self: Clone + Sized,
    {
        let mut z = self.clone();
        z.zero();
        z
    }

    /// `self += s · other`, tensor by tensor.
    fn add_scaled(&mut self, other: &Self, s: T)
    where
        Self: Sized,
    {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (x, &y) in a.data.iter_mut().zip(&b.data) {
                *x += s * y;
            }
        }
    }

    fn flatten(&self) -> Vec<T> {
        self.tensors()
            .iter()
            .flat_map(|t| t.data.iter().copied())
            .collect()
    }

    fn all_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|t| t.data.iter().all(|v| v.is_finite()))
    }
}

/// Prefixes every name of a nested parameter set.
pub(crate) fn prefixed<T: Scalar, P: Parameters<T>>(prefix: &str, p: &P) -> Vec<String> {
    p.names()
        .into_iter()
        .map(|n| format!("{prefix}.{n}"))
        .collect()
}
