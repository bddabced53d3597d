//! Flat row-major f64 tensors.

use std::sync::atomic::{AtomicU64, Ordering};

use super::DiffError;

static NEXT_PARAM_ID: AtomicU64 = AtomicU64::new(0);

/// Identity of a trainable parameter; keys gradient maps and Adam moments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(u64);

impl ParamId {
    fn fresh() -> Self {
        ParamId(NEXT_PARAM_ID.fetch_add(1, Ordering::Relaxed))
    }
}

/// Dense tensor: shape plus row-major f64 data.
///
/// Tensors built with [`Tensor::param`] carry a fresh [`ParamId`] and
/// `requires_grad == true`; everything else is a constant as far as the
/// tape is concerned.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
    requires_grad: bool,
    param_id: Option<ParamId>,
}

impl Tensor {
    pub fn from_vec(shape: Vec<usize>, data: Vec<f64>) -> Result<Self, DiffError> {
        let expect: usize = shape.iter().product();
        if expect != data.len() {
            return Err(DiffError::BadLength {
                shape,
                len: data.len(),
            });
        }
        Ok(Tensor {
            shape,
            data,
            requires_grad: false,
            param_id: None,
        })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape,
            data: vec![0.0; n],
            requires_grad: false,
            param_id: None,
        }
    }

    pub fn scalar(v: f64) -> Self {
        Tensor {
            shape: vec![1],
            data: vec![v],
            requires_grad: false,
            param_id: None,
        }
    }

    /// A trainable tensor with a fresh parameter id.
    pub fn param(shape: Vec<usize>, data: Vec<f64>) -> Result<Self, DiffError> {
        let mut t = Tensor::from_vec(shape, data)?;
        t.requires_grad = true;
        t.param_id = Some(ParamId::fresh());
        Ok(t)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn requires_grad(&self) -> bool {
        self.requires_grad
    }

    pub fn param_id(&self) -> Option<ParamId> {
        self.param_id
    }

    /// Rows of a 2-D tensor.
    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    /// Columns of a 2-D tensor.
    pub fn cols(&self) -> usize {
        self.shape[1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn length_checked() {
        assert!(Tensor::from_vec(vec![2, 2], vec![1.0; 3]).is_err());
        assert!(Tensor::from_vec(vec![2, 2], vec![1.0; 4]).is_ok());
    }

    #[test]
    fn param_ids_unique() {
        let a = Tensor::param(vec![1], vec![0.0]).unwrap();
        let b = Tensor::param(vec![1], vec![0.0]).unwrap();
        assert_ne!(a.param_id(), b.param_id());
        assert!(a.requires_grad());
    }

    #[test]
    fn constants_have_no_id() {
        let t = Tensor::zeros(vec![3]);
        assert!(!t.requires_grad());
        assert!(t.param_id().is_none());
    }
}
