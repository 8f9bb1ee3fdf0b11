use crate::error::{Error, Result};

/// Row-major dense array of `f64` with explicit extents.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseArray {
    dims: Vec<usize>,
    data: Vec<f64>,
}

impl DenseArray {
    pub fn new(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::Validation(format!(
                "array extents must be positive, got {dims:?}"
            )));
        }
        let expected = checked_product(&dims)?;
        if expected != data.len() {
            return Err(Error::dims("DenseArray::new", &dims, &[data.len()]));
        }
        Ok(DenseArray { dims, data })
    }

    pub fn zeros(dims: &[usize]) -> Self {
        let n = dims.iter().product();
        DenseArray {
            dims: dims.to_vec(),
            data: vec![0.0; n],
        }
    }

    pub fn filled(dims: &[usize], value: f64) -> Self {
        let n = dims.iter().product();
        DenseArray {
            dims: dims.to_vec(),
            data: vec![value; n],
        }
    }

    /// 1-D array over `values`. Panics on an empty vector.
    pub fn vector(values: Vec<f64>) -> Self {
        assert!(!values.is_empty(), "DenseArray::vector needs at least one value");
        DenseArray {
            dims: vec![values.len()],
            data: values,
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
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

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn reshape(self, dims: Vec<usize>) -> Result<Self> {
        DenseArray::new(dims, self.data)
    }

    pub fn fill(&mut self, value: f64) {
        self.data.iter_mut().for_each(|x| *x = value);
    }

    /// Index of the first non-finite element, if any.
    pub fn first_non_finite(&self) -> Option<usize> {
        self.data.iter().position(|x| !x.is_finite())
    }

    pub fn same_shape(&self, other: &DenseArray) -> bool {
        self.dims == other.dims
    }

    pub(crate) fn expect_rank(&self, rank: usize, op: &'static str) -> Result<()> {
        if self.dims.len() != rank {
            return Err(Error::Dimension {
                op,
                left: self.dims.clone(),
                right: vec![rank],
            });
        }
        Ok(())
    }
}

fn checked_product(dims: &[usize]) -> Result<usize> {
    dims.iter().try_fold(1usize, |acc, &d| {
        acc.checked_mul(d)
            .ok_or_else(|| Error::Validation(format!("extent product overflows for {dims:?}")))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_length_mismatch() {
        assert!(DenseArray::new(vec![2, 3], vec![0.0; 5]).is_err());
        assert!(DenseArray::new(vec![2, 0], vec![]).is_err());
        let a = DenseArray::new(vec![2, 3], vec![1.0; 6]).unwrap();
        assert_eq!(a.len(), 6);
        assert_eq!(a.reshape(vec![3, 2]).unwrap().dims(), &[3, 2]);
    }

    #[test]
    fn finds_non_finite() {
        let a = DenseArray::new(vec![3], vec![1.0, f64::NAN, 2.0]).unwrap();
        assert_eq!(a.first_non_finite(), Some(1));
    }
}
