use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Row-major dense buffer with an explicit shape.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorBuffer<T> {
    shape: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> TensorBuffer<T> {
    /// Rejects a value count that disagrees with `shape` and any non-finite entry.
    pub fn new(shape: Vec<usize>, values: Vec<T>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if values.len() != expected {
            return Err(Error::Shape {
                context: "tensor values",
                expected,
                got: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("tensor entry {i}")));
        }
        Ok(Self { shape, values })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            values: vec![T::zero(); n],
        }
    }

    pub fn vector(values: Vec<T>) -> Result<Self> {
        Self::new(vec![values.len()], values)
    }
}

impl<T> TensorBuffer<T> {
    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }
}
