//! Convolution Volterra equations of the second kind,
//!
//! ```text
//! I(s) - d(s) = gamma * int_0^s d(s - s') I(s') ds',
//! ```
//!
//! whose solution resums every click order of the transfer eigenmode with
//! kernel `d`. The numerical solver uses trapezoidal product integration on a
//! uniform grid; closed forms for the cosine (qubit) and `J_0` (hopping)
//! kernels live here as well.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::models::bessel::{bessel_j_half_sequence, bessel_jn_sequence};

/// Kernel `d(t)` of a convolution Volterra equation. Every transfer
/// eigenvalue satisfies `d(0) = 1`.
#[derive(Debug, Clone, PartialEq)]
pub enum ConvolutionKernel {
    /// `d(t) = 1`, the stationary mode.
    ConstantOne,
    /// `d(t) = cos(omega t)`.
    Cosine { omega: f64 },
    /// `d(t) = J_0(omega t)`.
    BesselJ0 { omega: f64 },
    /// Values on the grid `i * step`.
    Sampled { step: f64, values: Arc<Vec<Complex64>> },
}

impl ConvolutionKernel {
    pub fn sampled(step: f64, values: Vec<Complex64>) -> Self {
        Self::Sampled { step, values: Arc::new(values) }
    }

    /// Evaluates the kernel. Sampled kernels return the value at the nearest node.
    pub fn eval(&self, t: f64) -> Complex64 {
        match self {
            Self::ConstantOne => Complex64::new(1.0, 0.0),
            Self::Cosine { omega } => Complex64::new((omega * t).cos(), 0.0),
            Self::BesselJ0 { omega } => Complex64::new(crate::models::bessel::bessel_jn((omega * t).abs(), 0), 0.0),
            Self::Sampled { step, values } => {
                let i = (t / step).round().max(0.0) as usize;
                values[i.min(values.len() - 1)]
            }
        }
    }

    /// Kernel values on `i * h`, `i = 0..=steps`.
    pub fn on_grid(&self, h: f64, steps: usize) -> Result<Vec<Complex64>> {
        match self {
            Self::Sampled { step, values } => {
                let ratio = h / step;
                let stride = ratio.round();
                if stride < 1.0 || (ratio - stride).abs() > 1e-9 * ratio {
                    return Err(Error::GridMismatch(format!(
                        "sampled kernel step {step} does not divide solver step {h}"
                    )));
                }
                let stride = stride as usize;
                if steps * stride >= values.len() {
                    return Err(Error::GridMismatch(format!(
                        "sampled kernel covers {} nodes, need {}",
                        values.len(),
                        steps * stride + 1
                    )));
                }
                Ok((0..=steps).map(|i| values[i * stride]).collect())
            }
            _ => Ok((0..=steps).map(|i| self.eval(i as f64 * h)).collect()),
        }
    }
}

/// `I(s)` on the grid `i * step`.
#[derive(Debug, Clone)]
pub struct VolterraSolution {
    step: f64,
    values: Vec<Complex64>,
    kernel: ConvolutionKernel,
    rate: f64,
    error_estimate: Option<f64>,
}

impl VolterraSolution {
    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn kernel(&self) -> &ConvolutionKernel {
        &self.kernel
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn t_max(&self) -> f64 {
        (self.values.len() - 1) as f64 * self.step
    }

    /// Max `|I_h - I_2h| / 3` over the coarse nodes, when available.
    pub fn error_estimate(&self) -> Option<f64> {
        self.error_estimate
    }

    /// Index of the node at time `t`.
    pub fn node(&self, t: f64) -> Result<usize> {
        grid_index(t, self.step, self.values.len() - 1)
    }

    /// `I(t)` at a grid node.
    pub fn at(&self, t: f64) -> Result<Complex64> {
        Ok(self.values[self.node(t)?])
    }
}

pub(crate) fn grid_index(t: f64, step: f64, last: usize) -> Result<usize> {
    let x = t / step;
    let i = x.round();
    if !(t >= 0.0) || (x - i).abs() > 1e-6 || i as usize > last {
        return Err(Error::TimeOffGrid { time: t, step });
    }
    Ok(i as usize)
}

fn check_step(rate: f64, t_max: f64, h: f64) -> Result<usize> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidInput(format!("step must be positive, got {h}")));
    }
    if !(rate >= 0.0 && rate.is_finite()) {
        return Err(Error::InvalidInput(format!("rate must be >= 0, got {rate}")));
    }
    if !(t_max >= h) {
        return Err(Error::InvalidInput(format!("t_max = {t_max} must be at least h = {h}")));
    }
    if rate * h >= 1.0 {
        return Err(Error::StepTooLarge { product: rate * h, suggested: 0.5 / rate });
    }
    Ok((t_max / h * (1.0 + 1e-12)).floor() as usize)
}

/// Trapezoidal product integration of the Volterra equation given kernel
/// samples `d[i] = d(i h)`.
///
/// At node `i`:
/// `I_i = d_i + gamma h [d_i I_0 / 2 + sum_{j=1}^{i-1} d_{i-j} I_j + d_0 I_i / 2]`,
/// solved for `I_i`.
pub fn solve_sampled(kernel: &[Complex64], rate: f64, h: f64) -> Vec<Complex64> {
    let m = kernel.len();
    let mut out = Vec::with_capacity(m);
    if m == 0 {
        return out;
    }
    let gh = rate * h;
    let divisor = Complex64::new(1.0, 0.0) - kernel[0] * (0.5 * gh);
    // empty integral at s = 0
    out.push(kernel[0]);
    for i in 1..m {
        let mut acc = kernel[i] * out[0] * 0.5;
        // sum_{j=1}^{i-1} d_{i-j} I_j
        let (mut re, mut im) = (0.0, 0.0);
        for j in 1..i {
            let d = kernel[i - j];
            let v = out[j];
            re += d.re * v.re - d.im * v.im;
            im += d.re * v.im + d.im * v.re;
        }
        acc += Complex64::new(re, im);
        out.push((kernel[i] + acc * gh) / divisor);
    }
    out
}

fn coarse_error(fine: &[Complex64], kernel: &[Complex64], rate: f64, h: f64) -> Option<f64> {
    if fine.len() < 5 {
        return None;
    }
    let coarse_kernel: Vec<Complex64> = kernel.iter().step_by(2).copied().collect();
    let coarse = solve_sampled(&coarse_kernel, rate, 2.0 * h);
    Some(coarse.iter().zip(fine.iter().step_by(2)).map(|(c, f)| (f - c).norm() / 3.0).fold(0.0, f64::max))
}

/// Solves the Volterra equation on `[0, t_max]` with step `h` (global error `O(h^2)`).
pub fn solve_volterra(kernel: &ConvolutionKernel, rate: f64, t_max: f64, h: f64) -> Result<VolterraSolution> {
    let steps = check_step(rate, t_max, h)?;
    let samples = kernel.on_grid(h, steps)?;
    let values = solve_sampled(&samples, rate, h);
    let error_estimate = coarse_error(&values, &samples, rate, h);
    Ok(VolterraSolution { step: h, values, kernel: kernel.clone(), rate, error_estimate })
}

/// Richardson-extrapolated solve: combines the trapezoid solutions at `h` and
/// `h/2` as `(4 I_{h/2} - I_h) / 3`, which cancels the leading `h^2` error
/// term for smooth kernels. Output lives on the `h` grid.
pub fn solve_volterra_extrapolated(
    kernel: &ConvolutionKernel,
    rate: f64,
    t_max: f64,
    h: f64,
) -> Result<VolterraSolution> {
    let steps = check_step(rate, t_max, h)?;
    let fine_samples = kernel.on_grid(0.5 * h, 2 * steps)?;
    let fine = solve_sampled(&fine_samples, rate, 0.5 * h);
    let coarse_samples: Vec<Complex64> = fine_samples.iter().step_by(2).copied().collect();
    let coarse = solve_sampled(&coarse_samples, rate, h);
    let mut error: f64 = 0.0;
    let values = coarse
        .iter()
        .zip(fine.iter().step_by(2))
        .map(|(c, f)| {
            error = error.max((f - c).norm() / 3.0);
            (f * 4.0 - c) / 3.0
        })
        .collect();
    Ok(VolterraSolution { step: h, values, kernel: kernel.clone(), rate, error_estimate: Some(error) })
}

/// n-th click-order term of the Volterra series for the `J_0(omega t)` kernel,
///
/// `I_n(s) = sqrt(pi) gamma^{n-1} (s / 2 omega)^{(n-1)/2} J_{(n-1)/2}(s omega) / Gamma(n/2)`,
///
/// with the `omega -> 0` limit `gamma^{n-1} s^{n-1} / (n-1)!`.
pub fn volterra_series_term(omega: f64, n: u32, rate: f64, s: f64) -> f64 {
    assert!(n >= 1, "series terms start at n = 1");
    let mut terms = series_terms(omega, rate, s, n as usize);
    terms.pop().unwrap_or(0.0)
}

/// All terms `I_1..I_count` of the `J_0` kernel series at `(omega, gamma, s)`.
pub(crate) fn series_terms(omega: f64, rate: f64, s: f64, count: usize) -> Vec<f64> {
    let omega = omega.abs();
    let x = s * omega;
    let mut out = Vec::with_capacity(count);
    if count == 0 {
        return out;
    }
    if rate == 0.0 {
        out.push(crate::models::bessel::bessel_jn(x, 0));
        out.resize(count, 0.0);
        return out;
    }
    if x <= 1.0 {
        // I_n = (gamma s)^{n-1}/(n-1)! * sum_m (-x^2/4)^m Gamma(nu+1) / (m! Gamma(nu+m+1)),
        // nu = (n-1)/2; exact, including omega = 0.
        let q = -0.25 * x * x;
        let mut lead = 1.0;
        for n in 1..=count {
            if n > 1 {
                lead *= rate * s / (n - 1) as f64;
            }
            let nu = 0.5 * (n - 1) as f64;
            let mut term = 1.0;
            let mut sum = 1.0;
            for m in 1..60 {
                term *= q / (m as f64 * (nu + m as f64));
                sum += term;
                if term.abs() < 1e-17 * sum.abs() {
                    break;
                }
            }
            out.push(lead * sum);
        }
        return out;
    }
    // J_{(n-1)/2}(x): integer orders for odd n, half-integer orders for even n.
    let int_orders = bessel_jn_sequence(x, (count - 1) / 2);
    let half_orders = if count >= 2 { bessel_j_half_sequence(x, (count - 2) / 2) } else { Vec::new() };
    let ln_ratio = (s / (2.0 * omega)).ln();
    let ln_rate = rate.ln();
    // ln Gamma(n/2), starting from Gamma(1/2) = sqrt(pi), Gamma(1) = 1.
    let mut ln_gamma_half = [0.5 * PI.ln(), 0.0];
    for n in 1..=count {
        let nu = 0.5 * (n - 1) as f64;
        let slot = (n + 1) % 2; // n odd -> Gamma(n/2) half-integer argument
        let ln_gamma = ln_gamma_half[slot];
        let bessel = if n % 2 == 1 { int_orders[(n - 1) / 2] } else { half_orders[(n - 2) / 2] };
        let ln_pref = 0.5 * PI.ln() + (n - 1) as f64 * ln_rate + nu * ln_ratio - ln_gamma;
        out.push(ln_pref.exp() * bessel);
        // advance Gamma(n/2) -> Gamma(n/2 + 1)
        ln_gamma_half[slot] += (0.5 * n as f64).ln();
    }
    out
}

/// Closed form of the qubit coherence mode,
/// `I(s) = e^{gamma s/2} [cosh(G s/2) + (gamma/G) sinh(G s/2)]`, `G = sqrt(gamma^2 - 4 omega^2)`.
pub fn closed_form_qubit_i(rate: f64, omega: f64, s: f64) -> f64 {
    let growth = (0.5 * rate * s).exp();
    if (rate - 2.0 * omega).abs() < 1e-8 * omega.abs() {
        return growth * (1.0 + 0.5 * rate * s);
    }
    let disc = rate * rate - 4.0 * omega * omega;
    if disc > 0.0 {
        let g = disc.sqrt();
        growth * ((0.5 * g * s).cosh() + rate / g * (0.5 * g * s).sinh())
    } else {
        let g = (-disc).sqrt();
        growth * ((0.5 * g * s).cos() + rate / g * (0.5 * g * s).sin())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_kernel_grows_exponentially() {
        let sol = solve_volterra(&ConvolutionKernel::ConstantOne, 1.0, 2.0, 1e-3).unwrap();
        assert!((sol.at(2.0).unwrap().re - 2f64.exp()).abs() < 1e-5);
        assert_eq!(sol.values()[0], Complex64::new(1.0, 0.0));
    }

    #[test]
    fn zero_rate_passes_kernel_through() {
        let kernel = ConvolutionKernel::Cosine { omega: 1.7 };
        let sol = solve_volterra(&kernel, 0.0, 3.0, 1e-2).unwrap();
        for (i, v) in sol.values().iter().enumerate() {
            assert_eq!(v.re, (1.7 * (i as f64 * 1e-2)).cos());
        }
    }

    #[test]
    fn critical_cosine_matches_closed_form() {
        let sol = solve_volterra(&ConvolutionKernel::Cosine { omega: 1.0 }, 2.0, 1.0, 1e-3).unwrap();
        let expected = 2.0 * 1f64.exp();
        assert!((sol.at(1.0).unwrap().re - expected).abs() < 1e-5);
        assert!((closed_form_qubit_i(2.0, 1.0, 1.0) - expected).abs() < 1e-12);
    }

    #[test]
    fn step_too_large_is_reported() {
        let err = solve_volterra(&ConvolutionKernel::ConstantOne, 10.0, 1.0, 0.1).unwrap_err();
        match err {
            Error::StepTooLarge { suggested, .. } => assert!(suggested * 10.0 < 1.0),
            other => panic!("unexpected {other:?}"),
        }
        assert!(solve_volterra(&ConvolutionKernel::ConstantOne, 1.0, 0.0, 0.1).is_err());
    }

    #[test]
    fn series_first_term_is_kernel() {
        for &(omega, s) in &[(0.3, 0.5), (2.0, 1.7), (4.0, 3.0)] {
            let j0 = crate::models::bessel::bessel_jn(omega * s, 0);
            assert!((volterra_series_term(omega, 1, 0.7, s) - j0).abs() < 1e-14);
        }
    }

    #[test]
    fn series_zero_frequency_limit() {
        assert!((volterra_series_term(0.0, 3, 2.0, 1.0) - 2.0).abs() < 1e-14);
        // both branches agree across the x = 1 switch
        let below = volterra_series_term(1.0 / 1.0000001, 4, 1.3, 1.0);
        let above = volterra_series_term(1.0 / 0.9999999, 4, 1.3, 1.0);
        assert!((below - above).abs() < 1e-6);
    }

    #[test]
    fn off_grid_time_rejected() {
        let sol = solve_volterra(&ConvolutionKernel::ConstantOne, 1.0, 1.0, 0.1).unwrap();
        assert!(matches!(sol.at(0.15), Err(Error::TimeOffGrid { .. })));
        assert!(sol.at(1.5).is_err());
    }
}
