use super::tensor::Tensor;
use crate::scalar::Scalar;
use rand::Rng;

/// Xavier/Glorot uniform initialization: entries drawn from
/// `U(-√(6/(rows+cols)), √(6/(rows+cols)))`.
pub fn xavier_init<T: Scalar, R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Tensor<T> {
    assert!(rows > 0 && cols > 0, "xavier_init needs positive dimensions");
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| T::lit(rng.random_range(-bound..bound)))
        .collect();
    Tensor { rows, cols, data }
}
