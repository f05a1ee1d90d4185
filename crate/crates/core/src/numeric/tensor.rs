//! Dense row-major tensors.

use std::fmt::Debug;
use std::iter::Sum;

use num_traits::Float;

use super::NumericError;

/// Floating point element type usable by the numeric kernel.
///
/// Training runs use `f32`; gradient checks and oracles use `f64`.
pub trait Scalar: Float + Debug + Default + Sum + Send + Sync + 'static {
    fn of(x: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Scalar for f32 {
    #[inline]
    fn of(x: f64) -> Self {
        x as f32
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    #[inline]
    fn of(x: f64) -> Self {
        x
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    dims: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn new(dims: Vec<usize>, data: Vec<T>) -> Result<Self, NumericError> {
        let expected: usize = dims.iter().product();
        if dims.contains(&0) || expected != data.len() {
            return Err(NumericError::BadShape {
                dims,
                len: data.len(),
            });
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: &[usize]) -> Self {
        let len = dims.iter().product();
        Self {
            dims: dims.to_vec(),
            data: vec![T::zero(); len],
        }
    }

    pub fn full(dims: &[usize], value: T) -> Self {
        let len = dims.iter().product();
        Self {
            dims: dims.to_vec(),
            data: vec![value; len],
        }
    }

    /// Rank-1 tensor holding `data`.
    pub fn vector(data: Vec<T>) -> Self {
        assert!(!data.is_empty(), "empty vector tensor");
        Self {
            dims: vec![data.len()],
            data,
        }
    }

    pub fn scalar(value: T) -> Self {
        Self {
            dims: vec![1],
            data: vec![value],
        }
    }

    /// Rank-2 tensor from equal-length rows.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self, NumericError> {
        let cols = rows.first().map_or(0, Vec::len);
        let data: Vec<T> = rows.iter().flatten().copied().collect();
        Self::new(vec![rows.len(), cols], data)
    }

    pub fn from_f64(dims: &[usize], values: &[f64]) -> Result<Self, NumericError> {
        Self::new(dims.to_vec(), values.iter().map(|&v| T::of(v)).collect())
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    /// Trailing extent; the row width when viewed as a matrix.
    pub fn cols(&self) -> usize {
        *self.dims.last().expect("tensor has at least one dim")
    }

    /// Number of rows when viewed as a matrix whose width is [`Tensor::cols`].
    pub fn rows(&self) -> usize {
        self.data.len() / self.cols()
    }

    pub fn row(&self, r: usize) -> &[T] {
        let c = self.cols();
        &self.data[r * c..(r + 1) * c]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [T] {
        let c = self.cols();
        &mut self.data[r * c..(r + 1) * c]
    }

    pub fn reshape(mut self, dims: Vec<usize>) -> Result<Self, NumericError> {
        if dims.iter().product::<usize>() != self.data.len() || dims.contains(&0) {
            return Err(NumericError::BadShape {
                dims,
                len: self.data.len(),
            });
        }
        self.dims = dims;
        Ok(self)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            dims: self.dims.clone(),
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn sum(&self) -> T {
        self.data.iter().copied().sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Elementwise `self += scale * other`.
    pub fn add_scaled(&mut self, other: &Self, scale: T) {
        debug_assert_eq!(self.data.len(), other.data.len());
        super::kernels::axpy(scale, &other.data, &mut self.data);
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            dims: self.dims.clone(),
            data: self.data.iter().map(|&x| U::of(x.as_f64())).collect(),
        }
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        self.data.iter().map(|x| x.as_f64()).collect()
    }
}

impl<T: Scalar> std::ops::Index<usize> for Tensor<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        &self.data[i]
    }
}
