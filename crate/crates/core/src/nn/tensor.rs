use crate::error::{Error, Result};

/// Dense row-major `f64` array whose first axis is the batch.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        if shape.is_empty() || shape.len() > 3 {
            return Err(Error::invalid(format!("tensors have 1 to 3 axes, got {}", shape.len())));
        }
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(Error::DimensionMismatch {
                what: "tensor data",
                expected: len,
                actual: data.len(),
            });
        }
        Ok(Self {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::new(shape, vec![0.0; shape.iter().product()]).expect("shape and data agree")
    }

    /// `batch × features` matrix from equally long rows.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let width = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * width);
        for r in rows {
            crate::error::ensure_len("tensor row", width, r.len())?;
            data.extend_from_slice(r);
        }
        Self::new(&[rows.len(), width], data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn batch(&self) -> usize {
        self.shape[0]
    }

    /// Number of values per batch entry.
    pub fn sample_len(&self) -> usize {
        self.shape[1..].iter().product()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, b: usize) -> &[f64] {
        let n = self.sample_len();
        &self.data[b * n..(b + 1) * n]
    }

    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        let len: usize = shape.iter().product();
        if len != self.data.len() || shape.is_empty() || shape.len() > 3 {
            return Err(Error::DimensionMismatch {
                what: "reshape",
                expected: self.data.len(),
                actual: len,
            });
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    /// Flattens every sample to one axis.
    pub fn flatten(self) -> Self {
        let shape = [self.batch(), self.sample_len()];
        self.reshape(&shape).expect("same element count")
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}
