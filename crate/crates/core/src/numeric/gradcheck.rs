use super::{Scalar, Tensor};

/// Central finite differences `(f(x + h·e_i) − f(x − h·e_i)) / 2h` for every element of `x`.
pub fn finite_difference_grad<F>(mut f: F, x: &Tensor<f64>, h: f64) -> Tensor<f64>
where
    F: FnMut(&Tensor<f64>) -> f64,
{
    assert!(h > 0.0, "step must be positive");
    let mut probe = x.clone();
    let mut grad = Tensor::zeros(x.dims());
    for i in 0..x.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + h;
        let up = f(&probe);
        probe.data_mut()[i] = orig - h;
        let down = f(&probe);
        probe.data_mut()[i] = orig;
        grad.data_mut()[i] = (up - down) / (2.0 * h);
    }
    grad
}

/// `|a − b| / max(1, |a|, |b|)`.
pub fn relative_error<T: Scalar>(a: T, b: T) -> f64 {
    let (a, b) = (a.as_f64(), b.as_f64());
    (a - b).abs() / 1f64.max(a.abs()).max(b.abs())
}
