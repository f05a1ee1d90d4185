use rand::Rng;

use super::{Scalar, Tensor};

/// Glorot/Xavier uniform initialisation in `±sqrt(6 / (fan_in + fan_out))`.
///
/// For rank-2 `[out, in]` the fans are `in` and `out`; rank-1 tensors use
/// their length for both.
pub fn glorot_init<T: Scalar, R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> Tensor<T> {
    assert!(
        !dims.is_empty() && dims.iter().all(|&d| d > 0),
        "dims must be positive"
    );
    let (fan_out, fan_in) = match dims {
        [n] => (*n, *n),
        [out, rest @ ..] => (*out, rest.iter().product()),
        [] => unreachable!(),
    };
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let len = dims.iter().product();
    let data = (0..len)
        .map(|_| T::of(rng.gen_range(-bound..=bound)))
        .collect();
    Tensor::new(dims.to_vec(), data).expect("positive dims")
}

pub fn zeros_init<T: Scalar>(dims: &[usize]) -> Tensor<T> {
    Tensor::zeros(dims)
}
