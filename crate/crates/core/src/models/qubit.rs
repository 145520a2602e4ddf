//! Spin-1/2 with `H = -(omega/2) sigma^x`, monitored along z, starting in `|+1>`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::distribution::{Atom, Density, MixedDistribution, XGrid};
use crate::error::{Error, Result};
use crate::quad::Composite;
use crate::volterra::closed_form_qubit_i;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `gamma < 2 omega`
    Oscillatory,
    Critical,
    /// `gamma > 2 omega`
    Overdamped,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitParams {
    pub omega: f64,
    pub rate: f64,
}

impl QubitParams {
    pub fn new(omega: f64, rate: f64) -> Result<Self> {
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(Error::InvalidInput(format!("omega must be > 0, got {omega}")));
        }
        if !(rate >= 0.0 && rate.is_finite()) {
            return Err(Error::InvalidInput(format!("rate must be >= 0, got {rate}")));
        }
        Ok(Self { omega, rate })
    }

    /// `Gamma = sqrt(gamma^2 - 4 omega^2)`, imaginary in the oscillatory regime.
    pub fn characteristic(&self) -> Complex64 {
        Complex64::new(self.rate * self.rate - 4.0 * self.omega * self.omega, 0.0).sqrt()
    }

    pub fn regime(&self) -> Regime {
        if (self.rate - 2.0 * self.omega).abs() < 1e-8 * self.omega {
            Regime::Critical
        } else if self.rate < 2.0 * self.omega {
            Regime::Oscillatory
        } else {
            Regime::Overdamped
        }
    }

    /// `I(s)` of the coherence mode.
    pub fn i(&self, s: f64) -> f64 {
        closed_form_qubit_i(self.rate, self.omega, s)
    }
}

/// Click density `P^{(n>0)}(x; t)` at `|x| < 1`, summed over the poles
/// `s = t - u` with `sigma cos(omega u) = x`, `u in [0, t]`.
pub fn qubit_click_density(p: &QubitParams, t: f64, x: f64) -> f64 {
    assert!(x.abs() < 1.0, "density is defined on the open interval, got {x}");
    let (g, w) = (p.rate, p.omega);
    if g == 0.0 {
        return 0.0;
    }
    let period = 2.0 * PI / w;
    let mut total = 0.0;
    for sigma in [1.0, -1.0] {
        let theta = (sigma * x).acos() / w;
        for base in [theta, period - theta] {
            let mut u = base;
            while u <= t {
                let s = t - u;
                // e^{-gamma t} folded into each term to avoid overflow
                total += (-g * u).exp() + sigma * (-g * t).exp() * p.i(s);
                u += period;
            }
        }
    }
    g * total / (2.0 * w * (1.0 - x * x).sqrt())
}

/// Exact click mass in every cell of `grid`, returned as a density.
///
/// The last click at `s` sends the value to `sigma cos(omega (t - s))`; on each
/// monotone piece of the cosine the cell edges map to an interval of `u = t - s`,
/// over which the smooth weight is integrated with Gauss-Legendre. Mass
/// landing outside `[grid.lo, grid.hi]` is dropped.
pub fn qubit_click_binned(p: &QubitParams, t: f64, grid: &XGrid) -> Density {
    let (g, w) = (p.rate, p.omega);
    let mut masses = vec![0.0; grid.nodes()];
    if g == 0.0 || t <= 0.0 {
        return Density::from_masses(*grid, &masses);
    }
    let rule = Composite::new();
    let dx = grid.spacing();
    let edges: Vec<f64> =
        (0..=grid.nodes()).map(|i| (grid.lo + (i as f64 - 0.5) * dx).clamp(grid.lo, grid.hi)).collect();
    let decay = (-g * t).exp();
    for sigma in [1.0_f64, -1.0] {
        let weight = |u: f64| 0.5 * g * ((-g * u).exp() + sigma * decay * p.i(t - u));
        let half = PI / w;
        let mut piece = 0;
        loop {
            let (u0, u1) = (piece as f64 * half, ((piece + 1) as f64 * half).min(t));
            if u0 >= t {
                break;
            }
            // inverse of sigma cos(omega u) on this monotone piece
            let u_of = |x: f64| {
                let c = (sigma * x).clamp(-1.0, 1.0);
                let a = c.acos(); // in [0, pi]
                if piece % 2 == 0 {
                    (piece as f64 * PI + a) / w
                } else {
                    ((piece + 1) as f64 * PI - a) / w
                }
            };
            for cell in 0..grid.nodes() {
                let (a, b) = (edges[cell], edges[cell + 1]);
                if b <= a {
                    continue;
                }
                let (ua, ub) = (u_of(a), u_of(b));
                let lo = ua.min(ub).max(u0);
                let hi = ua.max(ub).min(u1);
                if hi > lo {
                    masses[cell] += rule.integrate(lo, hi, 1, weight);
                }
            }
            piece += 1;
        }
    }
    Density::from_masses(*grid, &masses)
}

/// No-click atom plus the exact binned click density.
pub fn qubit_distribution(p: &QubitParams, t: f64, grid: &XGrid) -> MixedDistribution {
    MixedDistribution {
        time: t,
        atoms: vec![Atom { location: (p.omega * t).cos(), weight: (-p.rate * t).exp() }],
        density: Some(qubit_click_binned(p, t, grid)),
    }
}

/// `<x^2>(t) = e^{-gamma t} int_0^t gamma cos^2(omega (t - s)) e^{gamma s} ds + e^{-gamma t} cos^2(omega t)`,
/// integrated in closed form.
pub fn qubit_second_moment(p: &QubitParams, t: f64) -> f64 {
    let (g, w) = (p.rate, p.omega);
    let decay = (-g * t).exp();
    let flat = 0.5 * (1.0 - decay);
    let oscillating =
        0.5 * g * (g - decay * (g * (2.0 * w * t).cos() - 2.0 * w * (2.0 * w * t).sin())) / (g * g + 4.0 * w * w);
    flat + oscillating + decay * (w * t).cos().powi(2)
}

/// `t -> infinity` limit of [`qubit_second_moment`].
pub fn qubit_second_moment_limit(p: &QubitParams) -> f64 {
    let (g2, w2) = (p.rate * p.rate, p.omega * p.omega);
    (g2 + 2.0 * w2) / (g2 + 4.0 * w2)
}

/// `cosh(a) / sinh(b)` for `0 <= |a| <= b`, without overflow.
fn cosh_over_sinh(a: f64, b: f64) -> f64 {
    let a = a.abs();
    (a - b).exp() * (1.0 + (-2.0 * a).exp()) / -(-2.0 * b).exp_m1()
}

fn check_stationary(p: &QubitParams) -> Result<()> {
    if p.rate == 0.0 {
        Err(Error::StationaryUndefinedAtZeroRate)
    } else {
        Ok(())
    }
}

/// Stationary density
/// `P(x) = gamma [e^{2 gamma asin(x)/omega} + 1] e^{gamma acos(x)/omega} / (2 omega (e^{pi gamma/omega} - 1) sqrt(1 - x^2))`,
/// evaluated as `gamma cosh(gamma asin(x)/omega) / (2 omega sinh(pi gamma / 2 omega) sqrt(1 - x^2))`.
pub fn qubit_stationary_density(p: &QubitParams, x: f64) -> Result<f64> {
    check_stationary(p)?;
    if !(x.abs() < 1.0) {
        return Err(Error::InvalidInput(format!("stationary density needs |x| < 1, got {x}")));
    }
    let (g, w) = (p.rate, p.omega);
    let a = g * x.asin() / w;
    let b = 0.5 * PI * g / w;
    Ok(g * cosh_over_sinh(a, b) / (2.0 * w * (1.0 - x * x).sqrt()))
}

/// Stationary CDF `F(x) = 1/2 + sinh(gamma asin(x)/omega) / (2 sinh(pi gamma / 2 omega))`.
pub fn qubit_stationary_cdf(p: &QubitParams, x: f64) -> Result<f64> {
    check_stationary(p)?;
    let x = x.clamp(-1.0, 1.0);
    let (g, w) = (p.rate, p.omega);
    let a = g * x.asin() / w;
    let b = 0.5 * PI * g / w;
    let ratio = a.signum() * (a.abs() - b).exp() * -(-2.0 * a.abs()).exp_m1() / -(-2.0 * b).exp_m1();
    Ok(0.5 + 0.5 * ratio)
}

/// Stationary mass per cell of `grid`.
pub fn qubit_stationary_binned(p: &QubitParams, grid: &XGrid) -> Result<Density> {
    let dx = grid.spacing();
    let mut masses = Vec::with_capacity(grid.nodes());
    let mut prev = qubit_stationary_cdf(p, grid.lo)?;
    for i in 0..grid.nodes() {
        let upper = if i == grid.bins { grid.hi } else { grid.lo + (i as f64 + 0.5) * dx };
        let cur = qubit_stationary_cdf(p, upper)?;
        masses.push(cur - prev);
        prev = cur;
    }
    Ok(Density::from_masses(*grid, &masses))
}

/// `<x^{2n}> = 2F1(-2n, -n - i gamma/2 omega; 1 - n - i gamma/2 omega; -1) / (2^{2n} (1 - 2 i n omega/gamma))`,
/// real part. The series terminates after `2n + 1` terms.
pub fn qubit_stationary_even_moment(p: &QubitParams, n: u32) -> Result<f64> {
    check_stationary(p)?;
    if n == 0 {
        return Ok(1.0);
    }
    let nf = n as f64;
    let shift = Complex64::new(0.0, -p.rate / (2.0 * p.omega));
    let a = -2.0 * nf;
    let b = shift - nf;
    let c = shift + (1.0 - nf);
    let mut term = Complex64::new(1.0, 0.0);
    let mut sum = term;
    for m in 0..(2 * n) {
        let mf = m as f64;
        term *= (a + mf) * (b + mf) / ((c + mf) * (mf + 1.0)) * -1.0;
        sum += term;
    }
    let denom = Complex64::new(1.0, -2.0 * nf * p.omega / p.rate) * 4f64.powi(n as i32);
    Ok((sum / denom).re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::integrate;

    fn binomial(n: u32, k: u32) -> f64 {
        (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
    }

    #[test]
    fn regimes() {
        assert_eq!(QubitParams::new(1.0, 0.5).unwrap().regime(), Regime::Oscillatory);
        assert_eq!(QubitParams::new(1.0, 2.0).unwrap().regime(), Regime::Critical);
        assert_eq!(QubitParams::new(1.0, 5.0).unwrap().regime(), Regime::Overdamped);
        assert!(QubitParams::new(0.0, 1.0).is_err());
    }

    #[test]
    fn i_is_continuous_across_critical_rate() {
        for &s in &[0.5, 2.0, 5.0] {
            let lo = closed_form_qubit_i(2.0 * (1.0 - 1e-6), 1.0, s);
            let hi = closed_form_qubit_i(2.0 * (1.0 + 1e-6), 1.0, s);
            let mid = closed_form_qubit_i(2.0, 1.0, s);
            // I itself moves by dI/dgamma * 2e-6 ~ 4e-3 at s = 5, so compare relatively
            assert!((lo - mid).abs() < 1e-4 * mid && (hi - mid).abs() < 1e-4 * mid);
        }
    }

    #[test]
    fn zero_rate_i_is_cosine() {
        for &s in &[0.0, 0.7, 3.1] {
            assert!((closed_form_qubit_i(0.0, 1.3, s) - (1.3 * s).cos()).abs() < 1e-15);
        }
    }

    #[test]
    fn unreachable_values_have_zero_density() {
        let p = QubitParams::new(1.0, 0.5).unwrap();
        // at t = 1 the value cos(omega u) >= cos(1) for every last-interval u
        assert_eq!(qubit_click_density(&p, 1.0, 0.2), 0.0);
        assert!(qubit_click_density(&p, 1.0, 0.8) > 0.0);
    }

    #[test]
    fn density_integrates_to_click_probability() {
        let p = QubitParams::new(1.0, 0.5).unwrap();
        let t = 4.0;
        // x = cos(theta); breakpoints where poles enter or leave [0, t]
        let th = (p.omega * t).cos().acos();
        let mut cuts = [0.0, th, PI - th, PI];
        cuts.sort_by(f64::total_cmp);
        let mass: f64 = cuts
            .windows(2)
            .map(|w| integrate(w[0], w[1], 200, |theta| qubit_click_density(&p, t, theta.cos()) * theta.sin()))
            .sum();
        assert!((mass + (-p.rate * t).exp() - 1.0).abs() < 1e-6, "{mass}");
    }

    #[test]
    fn binned_masses_sum_to_click_probability() {
        let p = QubitParams::new(1.0, 0.2).unwrap();
        let grid = XGrid::new(-1.0, 1.0, 400).unwrap();
        let d = qubit_click_binned(&p, 5.0, &grid);
        assert!((d.moment(0) - (1.0 - (-1.0f64).exp())).abs() < 1e-12);
        assert!(d.values.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn binned_matches_pointwise_density() {
        let p = QubitParams::new(1.0, 2.0).unwrap();
        let grid = XGrid::new(-1.0, 1.0, 2000).unwrap();
        let d = qubit_click_binned(&p, 5.0, &grid);
        for i in (100..1900).step_by(37) {
            let x = grid.node(i);
            let exact = qubit_click_density(&p, 5.0, x);
            assert!((d.values[i] - exact).abs() < 1e-3 * (1.0 + exact), "{x}: {} vs {exact}", d.values[i]);
        }
    }

    #[test]
    fn second_moment_matches_quadrature() {
        let p = QubitParams::new(1.0, 1.0).unwrap();
        let t = 2.0;
        let integral = integrate(0.0, t, 20, |s| p.rate * (p.omega * (t - s)).cos().powi(2) * (p.rate * (s - t)).exp());
        let want = integral + (-p.rate * t).exp() * (p.omega * t).cos().powi(2);
        assert!((qubit_second_moment(&p, t) - want).abs() < 1e-10);
        assert_eq!(qubit_second_moment(&p, 0.0), 1.0);
        assert!((qubit_second_moment(&p, 60.0) - 0.6).abs() < 1e-15);
    }

    #[test]
    fn stationary_density_is_even_and_normalized() {
        let p = QubitParams::new(1.0, 0.7).unwrap();
        let (a, b) = (qubit_stationary_density(&p, 0.3).unwrap(), qubit_stationary_density(&p, -0.3).unwrap());
        assert!((a - b).abs() < 1e-12 * a);
        let total = integrate(0.0, PI, 100, |th| qubit_stationary_density(&p, th.cos()).unwrap() * th.sin());
        assert!((total - 1.0).abs() < 1e-8);
        assert!(matches!(
            qubit_stationary_density(&QubitParams::new(1.0, 0.0).unwrap(), 0.1),
            Err(Error::StationaryUndefinedAtZeroRate)
        ));
    }

    #[test]
    fn stationary_density_matches_exponential_form() {
        let p = QubitParams::new(1.0, 0.7).unwrap();
        for &x in &[-0.9, -0.2, 0.0, 0.45, 0.99] {
            let (g, w) = (p.rate, p.omega);
            let direct = g * ((2.0 * g * f64::asin(x) / w).exp() + 1.0) * (g * f64::acos(x) / w).exp()
                / (2.0 * w * ((PI * g / w).exp() - 1.0) * (1.0 - x * x).sqrt());
            let got = qubit_stationary_density(&p, x).unwrap();
            assert!((got - direct).abs() < 1e-12 * direct);
        }
        // no overflow deep in the Zeno regime
        let zeno = QubitParams::new(1.0, 2000.0).unwrap();
        assert!(qubit_stationary_density(&zeno, 0.5).unwrap().is_finite());
    }

    #[test]
    fn cdf_is_consistent_with_density() {
        let p = QubitParams::new(1.0, 1.3).unwrap();
        let (lo, hi) = (-0.4_f64, 0.7_f64);
        let by_quad =
            integrate(hi.acos(), lo.acos(), 40, |th| qubit_stationary_density(&p, th.cos()).unwrap() * th.sin());
        let by_cdf = qubit_stationary_cdf(&p, hi).unwrap() - qubit_stationary_cdf(&p, lo).unwrap();
        assert!((by_quad - by_cdf).abs() < 1e-12);
        assert_eq!(qubit_stationary_cdf(&p, -1.0).unwrap(), 0.0);
        assert!((qubit_stationary_cdf(&p, 1.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn even_moments_three_routes() {
        for &(g, w) in &[(1.0, 1.0), (2.0, 1.0), (0.3, 1.7)] {
            let p = QubitParams::new(w, g).unwrap();
            for n in 1..=4_u32 {
                let hyper = qubit_stationary_even_moment(&p, n).unwrap();
                let real_sum: f64 = (0..=2 * n)
                    .map(|m| binomial(2 * n, m) / (1.0 + ((2.0 * (n as f64 - m as f64)) * w / g).powi(2)))
                    .sum::<f64>()
                    / 4f64.powi(n as i32);
                // int_0^inf e^{-s} cos^{2n}(s w/g) ds, tail beyond s = 60 is below 1e-26
                let quad = integrate(0.0, 60.0, 600, |s| (-s).exp() * (s * w / g).cos().powi(2 * n as i32));
                assert!((hyper - real_sum).abs() < 1e-12, "{g} {w} {n}");
                assert!((hyper - quad).abs() < 1e-8, "{g} {w} {n}: {hyper} vs {quad}");
            }
        }
        let p = QubitParams::new(1.0, 2.0).unwrap();
        assert!((qubit_stationary_even_moment(&p, 1).unwrap() - 0.75).abs() < 1e-12);
    }

    #[test]
    fn even_moments_tend_to_one_in_zeno_limit() {
        let p = QubitParams::new(1.0, 1e6).unwrap();
        for n in 1..=4 {
            let m = qubit_stationary_even_moment(&p, n).unwrap();
            assert!((1.0 - m).abs() < 10.0 * (n * n) as f64 * 1e-12 && m <= 1.0 + 1e-12);
        }
    }
}
