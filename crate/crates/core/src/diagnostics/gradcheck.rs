//! Central finite differences for checking analytic derivatives.

use crate::scalar::Scalar;

/// `(f(x + h e_i) − f(x − h e_i)) / 2h` for every coordinate.
pub fn finite_difference_gradient<T: Scalar>(f: impl Fn(&[T]) -> T, x: &[T], h: T) -> Vec<T> {
    let mut w = x.to_vec();
    (0..x.len())
        .map(|i| {
            w[i] = x[i] + h;
            let up = f(&w);
            w[i] = x[i] - h;
            let down = f(&w);
            w[i] = x[i];
            (up - down) / (h + h)
        })
        .collect()
}

/// `‖a − b‖∞ / max(‖a‖∞, ‖b‖∞)`, or zero when both vanish.
pub fn max_relative_error<T: Scalar>(a: &[T], b: &[T]) -> T {
    if a.len() != b.len() {
        return T::infinity();
    }
    let inf = |v: &[T]| v.iter().fold(T::zero(), |m, x| m.max(x.abs()));
    let scale = inf(a).max(inf(b));
    if scale == T::zero() {
        return T::zero();
    }
    let diff = a.iter().zip(b).fold(T::zero(), |m, (&x, &y)| m.max((x - y).abs()));
    diff / scale
}
