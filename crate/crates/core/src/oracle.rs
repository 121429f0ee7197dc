//! Test-only numerical oracles, independent of the code under test.
//!
//! Shared with the integration tests through `#[path]`.
#![allow(dead_code)]

use std::f64::consts::FRAC_PI_2;

/// Tanh-sinh (double exponential) quadrature of `f` over `[a, b]`.
///
/// Tolerates integrable endpoint singularities; `f` is never evaluated at
/// the endpoints themselves.
pub fn tanh_sinh(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let half = 0.5 * (b - a);
    // contribution of the node pair at parameter t (and the centre for t = 0)
    let pair = |t: f64| -> f64 {
        let u = FRAC_PI_2 * t.sinh();
        let cu = u.cosh();
        let w = half * FRAC_PI_2 * t.cosh() / (cu * cu);
        if !(w > 0.0) || !w.is_finite() {
            return 0.0;
        }
        // distance from each endpoint: (b - a) / (1 + e^{2u})
        let delta = (b - a) / (1.0 + (2.0 * u).exp());
        if t == 0.0 {
            return w * f(a + half);
        }
        let mut s = 0.0;
        let left = a + delta;
        let right = b - delta;
        if left > a && left < b {
            s += w * f(left);
        }
        if right > a && right < b {
            s += w * f(right);
        }
        s
    };

    let t_max = 6.5;
    let mut h = 0.5;
    let mut sum = pair(0.0);
    let mut k = 1;
    while k as f64 * h <= t_max {
        sum += pair(k as f64 * h);
        k += 1;
    }
    let mut estimate = h * sum;
    for _ in 0..12 {
        h *= 0.5;
        let mut k = 1;
        while k as f64 * h <= t_max {
            sum += pair(k as f64 * h);
            k += 2;
        }
        let next = h * sum;
        let done = (next - estimate).abs() <= 1e-15 * next.abs().max(1e-300);
        estimate = next;
        if done {
            break;
        }
    }
    estimate
}

#[cfg(test)]
mod tests {
    #[test]
    fn integrates_smooth_and_singular() {
        assert!((super::tanh_sinh(|x| x * x, 0.0, 1.0) - 1.0 / 3.0).abs() < 1e-14);
        assert!((super::tanh_sinh(|x| 1.0 / x.sqrt(), 0.0, 1.0) - 2.0).abs() < 1e-12);
        assert!((super::tanh_sinh(|x| (1.0 - x * x).sqrt(), -1.0, 1.0) - std::f64::consts::FRAC_PI_2).abs() < 1e-13);
        assert!((super::tanh_sinh(f64::ln, 0.0, 1.0) + 1.0).abs() < 1e-12);
    }
}
