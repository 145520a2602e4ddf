//! Bessel functions of the first kind for integer and half-integer order.
//!
//! Both families use Miller's downward recurrence
//! `J_{nu-1}(x) = (2 nu / x) J_nu(x) - J_{nu+1}(x)`, started far above the
//! requested orders. Integer orders are normalized with
//! `J_0 + 2 sum_k J_{2k} = 1`, half-integer orders against the elementary
//! `J_{1/2}` and `J_{-1/2}`.

use std::f64::consts::PI;

use crate::error::{Error, Result};

const RESCALE_ABOVE: f64 = 1e200;
const SMALL_X: f64 = 1e-8;

fn start_order(top: usize, x: f64) -> usize {
    let m = (top as f64).max(x);
    let start = m + 30.0 + 10.0 * m.cbrt();
    // even, so the normalization sum picks up the right parity
    (start.ceil() as usize + 1) & !1
}

/// `(x/2)^nu / Gamma(nu + 1)` times the first correction, for tiny `x`.
fn small_argument(nu: f64, x: f64) -> f64 {
    let half = 0.5 * x;
    let lead = (nu * half.ln() - ln_gamma_half_integer(nu + 1.0)).exp();
    lead * (1.0 - half * half / (nu + 1.0))
}

/// `ln Gamma(a)` for `a` a positive multiple of 1/2.
fn ln_gamma_half_integer(a: f64) -> f64 {
    let (mut acc, mut z) = if (a - a.round()).abs() < 1e-12 { (0.0, 1.0) } else { (0.5 * PI.ln(), 0.5) };
    while z + 0.5 < a {
        acc += z.ln();
        z += 1.0;
    }
    acc
}

/// `J_0(x) .. J_top(x)` for `x >= 0`.
pub fn bessel_jn_sequence(x: f64, top: usize) -> Vec<f64> {
    assert!(x >= 0.0, "bessel_jn_sequence needs x >= 0, got {x}");
    let mut out = vec![0.0; top + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    if x < SMALL_X {
        for (n, v) in out.iter_mut().enumerate() {
            *v = small_argument(n as f64, x);
        }
        return out;
    }
    let start = start_order(top, x);
    let mut next = 0.0; // J_{k+1}
    let mut cur = 1e-300; // J_k
    let mut norm = 0.0;
    for k in (1..=start).rev() {
        if k % 2 == 0 {
            norm += 2.0 * cur;
        }
        if k <= top {
            out[k] = cur;
        }
        let prev = 2.0 * k as f64 / x * cur - next;
        next = cur;
        cur = prev;
        if cur.abs() > RESCALE_ABOVE {
            let s = 1.0 / RESCALE_ABOVE;
            cur *= s;
            next *= s;
            norm *= s;
            for v in out.iter_mut() {
                *v *= s;
            }
        }
    }
    out[0] = cur;
    norm += cur;
    for v in out.iter_mut() {
        *v /= norm;
    }
    out
}

/// `J_n(x)` for any integer `n` and real `x`.
pub fn bessel_jn(x: f64, n: i64) -> f64 {
    let order = n.unsigned_abs() as usize;
    let mut sign = if n < 0 && order % 2 == 1 { -1.0 } else { 1.0 };
    if x < 0.0 && order % 2 == 1 {
        sign = -sign;
    }
    sign * bessel_jn_sequence(x.abs(), order)[order]
}

/// `J_{1/2}(x) .. J_{top + 1/2}(x)` for `x >= 0`.
pub fn bessel_j_half_sequence(x: f64, top: usize) -> Vec<f64> {
    assert!(x >= 0.0, "bessel_j_half_sequence needs x >= 0, got {x}");
    let mut out = vec![0.0; top + 1];
    if x == 0.0 {
        return out;
    }
    if x < SMALL_X {
        for (k, v) in out.iter_mut().enumerate() {
            *v = small_argument(k as f64 + 0.5, x);
        }
        return out;
    }
    let start = start_order(top, x);
    let mut next = 0.0;
    let mut cur = 1e-300; // J_{k + 1/2}
    for k in (0..=start).rev() {
        if k <= top {
            out[k] = cur;
        }
        let nu = k as f64 + 0.5;
        let prev = 2.0 * nu / x * cur - next;
        next = cur;
        cur = prev;
        if cur.abs() > RESCALE_ABOVE {
            let s = 1.0 / RESCALE_ABOVE;
            cur *= s;
            next *= s;
            for v in out.iter_mut() {
                *v *= s;
            }
        }
    }
    // cur = J_{-1/2}, next = J_{1/2} (unnormalized)
    let amp = (2.0 / (PI * x)).sqrt();
    let (exact_minus, exact_plus) = (amp * x.cos(), amp * x.sin());
    let scale = if exact_plus.abs() >= exact_minus.abs() { exact_plus / next } else { exact_minus / cur };
    for v in out.iter_mut() {
        *v *= scale;
    }
    out
}

/// `J_nu(x)` for `nu` a non-negative integer or half-integer and `x >= 0`.
pub fn bessel_j(nu: f64, x: f64) -> Result<f64> {
    let twice = 2.0 * nu;
    if !(nu >= 0.0) || (twice - twice.round()).abs() > 1e-12 {
        return Err(Error::InvalidInput(format!("order must be a non-negative integer or half-integer, got {nu}")));
    }
    if !(x >= 0.0 && x.is_finite()) {
        return Err(Error::InvalidInput(format!("argument must be finite and >= 0, got {x}")));
    }
    let twice = twice.round() as usize;
    Ok(if twice.is_multiple_of(2) {
        bessel_jn_sequence(x, twice / 2)[twice / 2]
    } else {
        bessel_j_half_sequence(x, twice / 2)[twice / 2]
    })
}

/// Moment generating function `F_t(lambda) = sum_n e^{i lambda n} J_n(t)^2 = J_0(2 t sin(lambda/2))`.
pub fn bessel_generating(t: f64, lambda: f64) -> f64 {
    bessel_jn(2.0 * t * (0.5 * lambda).sin(), 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `J_n(x) = (1/pi) int_0^pi cos(n tau - x sin tau) d tau`; the integrand is
    /// smooth and periodic, so the trapezoid rule converges geometrically.
    fn integral_form(n: i64, x: f64) -> f64 {
        let m = 4096;
        let h = 2.0 * PI / m as f64;
        (0..m).map(|i| (n as f64 * i as f64 * h - x * (i as f64 * h).sin()).cos()).sum::<f64>() / m as f64
    }

    #[test]
    fn integer_orders_match_integral_form() {
        for &x in &[0.3, 1.0, 6.5, 20.0, 75.0] {
            for n in [0_i64, 1, 2, 5, 17, 40] {
                let want = integral_form(n, x);
                let got = bessel_jn(x, n);
                assert!((got - want).abs() < 1e-13, "J_{n}({x}) {got} vs {want}");
            }
        }
    }

    #[test]
    fn zero_argument() {
        assert_eq!(bessel_jn(0.0, 0), 1.0);
        assert_eq!(bessel_jn(0.0, 3), 0.0);
        assert_eq!(bessel_j(2.5, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn negative_order_and_argument() {
        let x = 2.7;
        assert_eq!(bessel_jn(x, -3), -bessel_jn(x, 3));
        assert_eq!(bessel_jn(-x, 3), -bessel_jn(x, 3));
        assert_eq!(bessel_jn(-x, 2), bessel_jn(x, 2));
    }

    #[test]
    fn half_orders_match_spherical_forms() {
        for &x in &[0.05, 0.9, 3.0, 12.0, 250.0] {
            let amp = (2.0 / (PI * x)).sqrt();
            let j12 = amp * x.sin();
            let j32 = amp * (x.sin() / x - x.cos());
            let j52 = amp * ((3.0 / (x * x) - 1.0) * x.sin() - 3.0 * x.cos() / x);
            let seq = bessel_j_half_sequence(x, 2);
            for (got, want) in seq.iter().zip([j12, j32, j52]) {
                assert!((got - want).abs() < 1e-13 * (1.0 + want.abs() / 1e-3), "{x}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn squares_sum_to_one() {
        let seq = bessel_jn_sequence(7.3, 60);
        let total = seq[0] * seq[0] + 2.0 * seq[1..].iter().map(|v| v * v).sum::<f64>();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tiny_argument_uses_series() {
        let x = 1e-10;
        assert!((bessel_jn(x, 1) - 0.5e-10).abs() < 1e-24);
        let j12 = (2.0 / (PI * x)).sqrt() * x.sin();
        assert!((bessel_j(0.5, x).unwrap() - j12).abs() < 1e-12 * j12);
    }

    #[test]
    fn bad_order_rejected() {
        assert!(bessel_j(0.3, 1.0).is_err());
        assert!(bessel_j(-1.0, 1.0).is_err());
    }

    #[test]
    fn generating_function_second_derivative() {
        let t = 3.0;
        let h = 1e-4;
        let d2 = (bessel_generating(t, h) - 2.0 * bessel_generating(t, 0.0) + bessel_generating(t, -h)) / (h * h);
        let brute: f64 = (-40..=40_i64).map(|n| (n * n) as f64 * bessel_jn(t, n).powi(2)).sum();
        assert!((-d2 - brute).abs() < 1e-5);
        assert!((brute - 4.5).abs() < 1e-12);
    }
}
