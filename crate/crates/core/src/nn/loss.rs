use ndarray::{Array2, ArrayView2, Zip};

use super::Real;

/// Mean squared and mean absolute elementwise error, averaged over every element.
pub fn losses<T: Real>(x: ArrayView2<'_, T>, x_hat: ArrayView2<'_, T>) -> (f64, f64) {
    assert_eq!(x.dim(), x_hat.dim(), "loss operands differ in shape");
    let n = x.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let (mut sq, mut abs) = (0.0f64, 0.0f64);
    Zip::from(x).and(x_hat).for_each(|&a, &b| {
        let e = (b - a).to_f64().expect("finite");
        sq += e * e;
        abs += e.abs();
    });
    (sq / n as f64, abs / n as f64)
}

/// ∂MSE/∂x_hat = 2 (x_hat − x) / numel.
pub fn mse_gradient<T: Real>(x: ArrayView2<'_, T>, x_hat: ArrayView2<'_, T>) -> Array2<T> {
    assert_eq!(x.dim(), x_hat.dim(), "loss operands differ in shape");
    let scale = T::from_f64(2.0 / x.len().max(1) as f64).expect("representable");
    let mut g = &x_hat - &x;
    g.mapv_inplace(|v| v * scale);
    g
}
