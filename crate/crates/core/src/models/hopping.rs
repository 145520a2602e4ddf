//! Particle hopping on an infinite chain, `H = -omega sum_j (|j><j+1| + h.c.)`,
//! monitored in position and starting at `j = 0`.
//!
//! The transfer matrix is circulant with eigenvalues `d_k(t) = J_0(omega_k t)`,
//! `omega_k = 4 omega sin(k/2)`, so each Fourier mode has its own Volterra
//! solution `I_k(s)`. Everything here works in the infinite-chain limit.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::distribution::{Atom, MixedDistribution};
use crate::error::{Error, Result};
use crate::quad::Composite;
use crate::volterra::series_terms;

const MAX_SERIES_TERMS: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HoppingParams {
    pub omega: f64,
    pub rate: f64,
}

impl HoppingParams {
    pub fn new(omega: f64, rate: f64) -> Result<Self> {
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(Error::InvalidInput(format!("hopping amplitude must be > 0, got {omega}")));
        }
        if !(rate >= 0.0 && rate.is_finite()) {
            return Err(Error::InvalidInput(format!("rate must be >= 0, got {rate}")));
        }
        Ok(Self { omega, rate })
    }

    /// `omega_k = 4 omega |sin(k/2)|`.
    pub fn dispersion(&self, k: f64) -> f64 {
        4.0 * self.omega * (0.5 * k).sin().abs()
    }

    /// Half-width of the real-space window, `ceil(2 omega t) + 20`.
    pub fn j_max(&self, t: f64) -> usize {
        (2.0 * self.omega * t).ceil() as usize + 20
    }

    /// Default number of k nodes: even, at least 64 and at least `4 (2 omega t + 20)`.
    pub fn k_points(&self, t: f64) -> usize {
        let k = (4.0 * (2.0 * self.omega * t + 20.0)).ceil() as usize;
        (k.max(64) + 1) & !1
    }

    /// Odd ring size with at least `4 omega t + 40` sites, for finite-size
    /// emulation of the chain up to time `t`.
    pub fn ring_sites(&self, t: f64) -> usize {
        (4.0 * self.omega * t + 40.0).ceil() as usize | 1
    }
}

/// Number of series terms whose bound `(gamma s)^n / n!` stays above
/// `1e-12 e^{gamma s}`.
fn series_cutoff(rate: f64, s: f64) -> usize {
    let y = rate * s;
    if y == 0.0 {
        return 1;
    }
    let target = 1e-12 * y.exp();
    let mut bound = 1.0;
    let mut n = 0;
    while (bound >= target || (n as f64) < y) && n < MAX_SERIES_TERMS {
        n += 1;
        bound *= y / n as f64;
    }
    n + 1
}

/// `I_k(s)` by summing the click series; `cutoff = None` picks the number of
/// terms from the tail bound.
pub fn hopping_ik(p: &HoppingParams, k: f64, s: f64, cutoff: Option<usize>) -> f64 {
    let count = cutoff.unwrap_or_else(|| series_cutoff(p.rate, s)).max(1);
    series_terms(p.dispersion(k), p.rate, s, count).iter().sum()
}

/// `A(k) = int_0^t gamma I_k(s) ds` at the periodic trapezoid nodes `k_m = 2 pi m / K`.
fn integrated_modes(p: &HoppingParams, t: f64, k_points: usize) -> Vec<f64> {
    let rule = Composite::new();
    let panels = (t * (4.0 * p.omega + p.rate)).ceil() as usize + 2;
    // A(k) = A(-k): only 0..=K/2 are computed
    let half: Vec<f64> = (0..=k_points / 2)
        .into_par_iter()
        .map(|m| {
            let k = 2.0 * PI * m as f64 / k_points as f64;
            rule.integrate(0.0, t, panels, |s| p.rate * hopping_ik(p, k, s, None))
        })
        .collect();
    (0..k_points).map(|m| half[m.min(k_points - m)]).collect()
}

/// Click masses at `x = -j_max ..= j_max`,
/// `mass(j) = e^{-gamma t} int_0^t gamma ds (1/2pi) int dk cos(j k) I_k(s)`,
/// with the k integral done by the periodic trapezoid rule on `k_points` nodes.
pub fn hopping_click_masses(p: &HoppingParams, t: f64, j_max: usize, k_points: usize) -> Result<Vec<f64>> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidInput(format!("time must be >= 0, got {t}")));
    }
    if k_points < 64 || k_points % 2 == 1 {
        return Err(Error::InvalidInput(format!("k_points must be even and >= 64, got {k_points}")));
    }
    if t == 0.0 || p.rate == 0.0 {
        return Ok(vec![0.0; 2 * j_max + 1]);
    }
    let modes = integrated_modes(p, t, k_points);
    let decay = (-p.rate * t).exp();
    let masses: Vec<f64> = (0..=2 * j_max)
        .map(|idx| {
            let j = idx as f64 - j_max as f64;
            let sum: f64 =
                modes.iter().enumerate().map(|(m, a)| (j * 2.0 * PI * m as f64 / k_points as f64).cos() * a).sum();
            decay * sum / k_points as f64
        })
        .collect();
    if let Some((idx, &mass)) = masses.iter().enumerate().find(|(_, m)| **m < -1e-8) {
        return Err(Error::NegativeMass { site: idx as i64 - j_max as i64, mass });
    }
    Ok(masses)
}

/// Click mass at a single site `j`.
pub fn hopping_click_mass(p: &HoppingParams, j: i64, t: f64, k_points: usize) -> Result<f64> {
    let j_max = j.unsigned_abs() as usize;
    let masses = hopping_click_masses(p, t, j_max, k_points)?;
    Ok(masses[(j + j_max as i64) as usize])
}

/// Averaged site populations at `x = -j_max ..= j_max`,
/// `n(j, t) = e^{-gamma t} (1/2pi) int dk cos(j k) I_k(t)`.
pub fn hopping_site_density(p: &HoppingParams, t: f64, j_max: usize, k_points: usize) -> Result<Vec<f64>> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidInput(format!("time must be >= 0, got {t}")));
    }
    if k_points < 64 || k_points % 2 == 1 {
        return Err(Error::InvalidInput(format!("k_points must be even and >= 64, got {k_points}")));
    }
    let modes: Vec<f64> =
        (0..k_points).map(|m| hopping_ik(p, 2.0 * PI * m as f64 / k_points as f64, t, None)).collect();
    let decay = (-p.rate * t).exp();
    Ok((0..=2 * j_max)
        .map(|idx| {
            let j = idx as f64 - j_max as f64;
            let sum: f64 =
                modes.iter().enumerate().map(|(m, a)| (j * 2.0 * PI * m as f64 / k_points as f64).cos() * a).sum();
            decay * sum / k_points as f64
        })
        .collect())
}

/// Full distribution on the integers: no-click atom at 0 plus click masses on
/// `|j| <= j_max`. Masses below `1e-300` are omitted; tiny negative round-off
/// is clipped to zero.
pub fn hopping_distribution(p: &HoppingParams, t: f64, j_max: usize, k_points: usize) -> Result<MixedDistribution> {
    let masses = hopping_click_masses(p, t, j_max, k_points)?;
    let mut atoms: Vec<Atom> = masses
        .iter()
        .enumerate()
        .map(|(idx, m)| Atom { location: idx as f64 - j_max as f64, weight: m.max(0.0) })
        .collect();
    atoms[j_max].weight += (-p.rate * t).exp();
    atoms.retain(|a| a.weight > 1e-300);
    Ok(MixedDistribution { time: t, atoms, density: None })
}

/// `<x^2>(t) = (4 omega^2 / gamma^2) [(gamma t - 2) + e^{-gamma t} (gamma t + 2)]`,
/// the second moment of the trajectory distribution. Uses the Taylor series
/// for `gamma t < 0.1` to avoid cancellation.
pub fn hopping_second_moment(p: &HoppingParams, t: f64) -> f64 {
    let (g, w) = (p.rate, p.omega);
    if g == 0.0 {
        return 0.0;
    }
    let u = g * t;
    let f = if u < 0.1 {
        // sum_{m>=3} (-1)^{m+1} (m-2) u^m / m!
        let mut term = u * u / 2.0; // u^m / m! at m = 2
        let mut sum = 0.0;
        for m in 3..40 {
            term *= u / m as f64;
            let sign = if m % 2 == 1 { 1.0 } else { -1.0 };
            sum += sign * (m - 2) as f64 * term;
        }
        sum
    } else {
        (u - 2.0) + (-u).exp() * (u + 2.0)
    };
    4.0 * w * w / (g * g) * f
}

/// `<x_{q^2}>(t) = 4 omega^2 (gamma t + e^{-gamma t} - 1) / gamma^2`, the
/// averaged-state second moment, with the ballistic limit `2 omega^2 t^2` at `gamma = 0`.
pub fn hopping_qm_second_moment(p: &HoppingParams, t: f64) -> f64 {
    let (g, w) = (p.rate, p.omega);
    let u = g * t;
    if u < 0.1 {
        // (u + e^{-u} - 1) / u^2 = sum_{m>=2} (-u)^{m-2} / m!
        let mut term = 0.5;
        let mut sum = 0.0;
        for m in 2..40 {
            sum += term;
            term *= -u / (m + 1) as f64;
        }
        return 4.0 * w * w * t * t * sum;
    }
    4.0 * w * w * (u + (-u).exp() - 1.0) / (g * g)
}

/// Taylor coefficients `c_m(s)` of `e^{-gamma s} I(s)` in powers of `omega_k^2`,
/// `m = 0..=order`.
fn omega_squared_coefficients(rate: f64, s: f64, order: usize) -> Vec<f64> {
    // e^{-gamma s} I_n = e^{-gamma s} (gamma s)^{n-1}/(n-1)! sum_m (-s^2/4)^m / (m! (nu+1)...(nu+m))
    let y = rate * s;
    let count = series_cutoff(rate, s) + 10;
    let mut coeffs = vec![0.0; order + 1];
    let mut poisson = (-y).exp(); // e^{-y} y^{n-1}/(n-1)!
    for n in 1..=count {
        if n > 1 {
            poisson *= y / (n - 1) as f64;
        }
        let nu = 0.5 * (n - 1) as f64;
        let mut factor = 1.0;
        for (m, c) in coeffs.iter_mut().enumerate() {
            if m > 0 {
                factor *= -0.25 * s * s / (m as f64 * (nu + m as f64));
            }
            *c += poisson * factor;
        }
    }
    coeffs
}

/// `i^m e^{-gamma t} d^m/dk^m I_k(t)` at `k = 0`, from the Taylor coefficients of
/// `I` in `omega_k^2 = 8 omega^2 (1 - cos k)`.
fn scaled_k_derivative(p: &HoppingParams, m: u32, s: f64) -> f64 {
    let half = (m / 2) as usize;
    let c = omega_squared_coefficients(p.rate, s, half);
    // y(k) = 8 omega^2 (1 - cos k) as a polynomial in k^2, up to (k^2)^half
    let mut y = vec![0.0; half + 1];
    let mut fact = 1.0;
    for r in 1..=half {
        fact *= ((2 * r - 1) * (2 * r)) as f64;
        let sign = if r % 2 == 1 { 1.0 } else { -1.0 };
        y[r] = 8.0 * p.omega * p.omega * sign / fact;
    }
    // sum_j c_j y^j, truncated
    let mut total = vec![0.0; half + 1];
    let mut power = vec![0.0; half + 1];
    power[0] = 1.0;
    for cj in &c {
        for (t, pw) in total.iter_mut().zip(&power) {
            *t += cj * pw;
        }
        let mut next = vec![0.0; half + 1];
        for (a, pa) in power.iter().enumerate() {
            for (b, yb) in y.iter().enumerate().skip(1) {
                if a + b <= half {
                    next[a + b] += pa * yb;
                }
            }
        }
        power = next;
    }
    let factorial: f64 = (1..=m).map(f64::from).product();
    let sign = if half.is_multiple_of(2) { 1.0 } else { -1.0 }; // i^m for even m
    sign * factorial * total[half]
}

/// `<x_{q^m}>(t) = i^m e^{-gamma t} d^m_k I_k(t)` at `k = 0`, the `m`-th moment of
/// the position in the averaged state. Odd orders vanish by symmetry.
///
/// The derivative is taken exactly from the series in `omega_k^2` rather than
/// by finite differences.
pub fn hopping_qm_moment(p: &HoppingParams, m: u32, t: f64) -> f64 {
    if m % 2 == 1 {
        return 0.0;
    }
    scaled_k_derivative(p, m, t)
}

/// `m`-th moment of the click part of the trajectory distribution,
/// `e^{-gamma t} int_0^t gamma i^m d^m_k I_k(s) ds` at `k = 0`, i.e.
/// `int_0^t gamma e^{-gamma (t - s)} <x_{q^m}>(s) ds`.
pub fn hopping_click_moment(p: &HoppingParams, m: u32, t: f64) -> f64 {
    if m % 2 == 1 || p.rate == 0.0 || t == 0.0 {
        return 0.0;
    }
    let panels = (t * (4.0 * p.omega + p.rate)).ceil() as usize + 2;
    Composite::new().integrate(0.0, t, panels, |s| p.rate * (-p.rate * (t - s)).exp() * hopping_qm_moment(p, m, s))
}
