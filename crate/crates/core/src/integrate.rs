//! Fixed-step classical Runge-Kutta.

use crate::scalar::Real;

/// One RK4 step of `y' = f(y)` over `dt`.
pub fn rk4<T: Real, const N: usize>(y: &[T; N], dt: T, f: impl Fn(&[T; N]) -> [T; N]) -> [T; N] {
    let axpy = |a: T, x: &[T; N]| -> [T; N] { std::array::from_fn(|i| y[i] + a * x[i]) };
    let h = dt * T::half();
    let k1 = f(y);
    let k2 = f(&axpy(h, &k1));
    let k3 = f(&axpy(h, &k2));
    let k4 = f(&axpy(dt, &k3));
    let sixth = dt / T::lit(6.0);
    std::array::from_fn(|i| y[i] + sixth * (k1[i] + T::two() * (k2[i] + k3[i]) + k4[i]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_is_fourth_order() {
        let err = |dt: f64| {
            let mut y = [1.0f64];
            let n = (1.0 / dt).round() as usize;
            for _ in 0..n {
                y = rk4(&y, dt, |v| [-v[0]]);
            }
            (y[0] - (-1.0f64).exp()).abs()
        };
        let ratio = err(0.1) / err(0.05);
        assert!((ratio - 16.0).abs() < 1.0, "{ratio}");
    }

    #[test]
    fn polynomial_exact_to_cubic() {
        // y' = 3t², carried as an autonomous system with t in slot 1
        let y = rk4(&[0.0f64, 0.0], 0.5, |v| [3.0 * v[1] * v[1], 1.0]);
        assert!((y[0] - 0.125).abs() < 1e-15);
    }
}
