use super::params::Parameters;
use super::tensor::Tensor;
use crate::scalar::Scalar;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Serialized form of one named tensor. Values are stored as `f64`, which
/// holds both `f32` and `f64` parameters exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorRecord {
    pub name: String,
    pub shape: [usize; 2],
    pub data: Vec<f64>,
}

impl TensorRecord {
    pub fn from_tensor<T: Scalar>(name: impl Into<String>, t: &Tensor<T>) -> Self {
        Self {
            name: name.into(),
            shape: [t.rows, t.cols],
            data: t.data.iter().map(|v| v.as_f64()).collect(),
        }
    }

    pub fn to_tensor<T: Scalar>(&self) -> Result<Tensor<T>> {
        Tensor::from_vec(
            self.shape[0],
            self.shape[1],
            self.data.iter().map(|&v| T::lit(v)).collect(),
        )
    }
}

pub fn export_tensors<T: Scalar, P: Parameters<T>>(p: &P) -> Vec<TensorRecord> {
    p.names()
        .into_iter()
        .zip(p.tensors())
        .map(|(n, t)| TensorRecord::from_tensor(n, t))
        .collect()
}

/// Loads records into `p`; names, order and shapes must match exactly.
pub fn import_tensors<T: Scalar, P: Parameters<T>>(p: &mut P, records: &[TensorRecord]) -> Result<()> {
    let names = p.names();
    if names.len() != records.len() {
        return Err(Error::Checkpoint(format!(
            "expected {} tensors, found {}",
            names.len(),
            records.len()
        )));
    }
    for ((name, t), rec) in names.iter().zip(p.tensors_mut()).zip(records) {
        if *name != rec.name {
            return Err(Error::Checkpoint(format!(
                "expected tensor {name}, found {}",
                rec.name
            )));
        }
        if [t.rows, t.cols] != rec.shape || rec.data.len() != t.len() {
            return Err(Error::Checkpoint(format!(
                "tensor {name}: expected shape {}x{}, found {:?}",
                t.rows, t.cols, rec.shape
            )));
        }
        *t = rec.to_tensor()?;
    }
    Ok(())
}
