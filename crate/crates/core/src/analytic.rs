//! Exact trajectory-ensemble distribution from the transfer spectrum and the
//! per-mode Volterra solutions.
//!
//! With the last click at `s`, the value at `t` is the deterministic
//! `X(a, t - s) = sum_a' o_a' T_{a',a}(t - s)` and the weight of outcome `a` is
//! `gamma e^{-gamma t} sum_alpha V_{a,alpha} I_alpha(s) conj(V_{a0,alpha})`.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::distribution::{Atom, Density, MixedDistribution, XGrid};
use crate::error::{Error, Result};
use crate::spectrum::{default_sample_times, spectral_decompose, TransferSpectrum};
use crate::system::MonitoredSystem;
use crate::volterra::{grid_index, solve_volterra, solve_volterra_extrapolated, ConvolutionKernel, VolterraSolution};

/// Tolerance on deposited cell mass before [`Error::NegativeWeight`].
pub const NEGATIVE_WEIGHT_TOL: f64 = 1e-8;
/// Tolerance on the imaginary part of the mode sum before [`Error::ImaginaryResidue`].
pub const IMAGINARY_TOL: f64 = 1e-8;
/// Spread in `X(a, .)` below which index `a` contributes an atom.
const CONSTANT_TOL: f64 = 1e-9;
/// Indices per deposit task; fixed so the merge order never depends on the pool.
const DEPOSIT_CHUNK: usize = 8;

/// Single atom at `<a0|U^dagger O U|a0>` with weight `e^{-gamma t}`.
pub fn no_click_distribution(system: &MonitoredSystem, t: f64) -> MixedDistribution {
    let x = system.free_values(t)[system.initial_index()];
    MixedDistribution::atom(t, x, (-system.rate() * t).exp())
}

fn check_solutions(spectrum: &TransferSpectrum, volterra: &[VolterraSolution], t: f64) -> Result<(f64, usize)> {
    if volterra.len() != spectrum.dim() {
        return Err(Error::InvalidInput(format!("{} Volterra solutions for {} modes", volterra.len(), spectrum.dim())));
    }
    let h = volterra[0].step();
    if volterra.iter().any(|v| (v.step() - h).abs() > 1e-15 * h) {
        return Err(Error::GridMismatch("Volterra solutions use different steps".into()));
    }
    let last = volterra.iter().map(|v| v.values().len() - 1).min().unwrap_or(0);
    Ok((h, grid_index(t, h, last)?))
}

/// `e^{-gamma t} sum_alpha V_{a,alpha} I_alpha(s_i) conj(V_{a0,alpha})`, real part, with the
/// imaginary residue guard.
fn scaled_weights(spectrum: &TransferSpectrum, a0: usize, modes: &[Complex64], decay: f64) -> Result<Vec<f64>> {
    let w = spectrum.propagate_modes(modes, a0);
    let mut out = Vec::with_capacity(w.len());
    for z in w {
        let z = z * decay;
        if z.im.abs() > IMAGINARY_TOL {
            return Err(Error::ImaginaryResidue { residue: z.im.abs() });
        }
        out.push(z.re);
    }
    Ok(out)
}

/// Mean outcome, `e^{-gamma t} sum_a o_a sum_alpha V_{a,alpha} I_alpha(t) conj(V_{a0,alpha})`.
///
/// Only meaningful for observables diagonal in the measured basis, which is
/// the only kind a [`MonitoredSystem`] carries.
pub fn first_moment(
    system: &MonitoredSystem,
    spectrum: &TransferSpectrum,
    volterra: &[VolterraSolution],
    t: f64,
) -> Result<f64> {
    let (_, n) = check_solutions(spectrum, volterra, t)?;
    let modes: Vec<Complex64> = volterra.iter().map(|v| v.values()[n]).collect();
    let w = scaled_weights(spectrum, system.initial_index(), &modes, (-system.rate() * t).exp())?;
    Ok(w.iter().zip(system.observable()).map(|(w, o)| w * o).sum())
}

/// `k`-th moment of a distribution: atoms plus trapezoid integral.
pub fn moment(distribution: &MixedDistribution, k: u32) -> f64 {
    distribution.moment(k)
}

/// Long-time mean `(1/N) sum_a o_a`: only the flat mode survives, and
/// `V_{a,0} conj(V_{a0,0}) = 1/N`.
pub fn stationary_moment_diag(system: &MonitoredSystem, spectrum: &TransferSpectrum) -> f64 {
    let v = spectrum.basis();
    let a0 = system.initial_index();
    system.observable().iter().enumerate().map(|(a, o)| o * (v[(a, 0)] * v[(a0, 0)].conj()).re).sum()
}

/// Click part on `grid` from the Volterra solutions; the free-evolution
/// values are recomputed on the Volterra grid.
pub fn click_distribution(
    system: &MonitoredSystem,
    spectrum: &TransferSpectrum,
    volterra: &[VolterraSolution],
    t: f64,
    grid: &XGrid,
) -> Result<MixedDistribution> {
    let (h, n) = check_solutions(spectrum, volterra, t)?;
    let values: Vec<Vec<f64>> = (0..=n).into_par_iter().map(|i| system.free_values(i as f64 * h)).collect();
    let modes: Vec<&[Complex64]> = volterra.iter().map(|v| v.values()).collect();
    assemble(system, spectrum, &modes, &values, h, n, grid)
}

/// Core deposit. `values[u][a]` is `X(a, u h)`, `modes[alpha][i]` is `I_alpha(i h)`,
/// and `t = n h`.
///
/// Each trapezoid segment `[s_i, s_{i+1}]` carries mass `h (w_i + w_{i+1}) / 2`,
/// spread uniformly over the cells crossed by `[X(a, t - s_i), X(a, t - s_{i+1})]`;
/// end cells are half as wide, so the deposited total equals the trapezoid
/// integral. Indices whose `X` does not move become atoms.
fn assemble(
    system: &MonitoredSystem,
    spectrum: &TransferSpectrum,
    modes: &[&[Complex64]],
    values: &[Vec<f64>],
    h: f64,
    n: usize,
    grid: &XGrid,
) -> Result<MixedDistribution> {
    let t = n as f64 * h;
    let dim = system.dim();
    let rate = system.rate();
    let decay = (-rate * t).exp();
    let a0 = system.initial_index();
    let mut atoms: Vec<Atom> = Vec::new();
    let mut masses = vec![0.0; grid.nodes()];
    if n == 0 || rate == 0.0 {
        return Ok(MixedDistribution { time: t, atoms, density: Some(Density::zeros(*grid)) });
    }

    // weights[i][a] = gamma e^{-gamma t} Re W_a(i h)
    let weights: Vec<Vec<f64>> = (0..=n)
        .into_par_iter()
        .map(|i| {
            let m: Vec<Complex64> = modes.iter().map(|v| v[i]).collect();
            scaled_weights(spectrum, a0, &m, decay).map(|w| w.into_iter().map(|x| rate * x).collect())
        })
        .collect::<Result<_>>()?;

    let chunks: Vec<(Vec<f64>, Vec<Atom>)> = (0..dim)
        .collect::<Vec<_>>()
        .par_chunks(DEPOSIT_CHUNK)
        .map(|chunk| {
            let mut local = vec![0.0; grid.nodes()];
            let mut local_atoms = Vec::new();
            for &a in chunk {
                let x = |i: usize| values[n - i][a];
                let (lo, hi) =
                    (0..=n).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), i| (lo.min(x(i)), hi.max(x(i))));
                if hi - lo < CONSTANT_TOL {
                    let mass: f64 = (0..n).map(|i| 0.5 * h * (weights[i][a] + weights[i + 1][a])).sum();
                    local_atoms.push(Atom { location: x(0), weight: mass });
                    continue;
                }
                for i in 0..n {
                    let mass = 0.5 * h * (weights[i][a] + weights[i + 1][a]);
                    deposit_segment(grid, &mut local, x(i), x(i + 1), mass);
                }
            }
            (local, local_atoms)
        })
        .collect();
    for (local, local_atoms) in chunks {
        for (m, l) in masses.iter_mut().zip(&local) {
            *m += l;
        }
        for atom in local_atoms {
            match atoms.iter_mut().find(|b| (b.location - atom.location).abs() <= CONSTANT_TOL) {
                Some(b) => b.weight += atom.weight,
                None => atoms.push(atom),
            }
        }
    }
    for (i, m) in masses.iter().enumerate() {
        if *m < -NEGATIVE_WEIGHT_TOL {
            return Err(Error::NegativeWeight { location: grid.node(i), mass: *m });
        }
    }
    if let Some(a) = atoms.iter().find(|a| a.weight < -NEGATIVE_WEIGHT_TOL) {
        return Err(Error::NegativeWeight { location: a.location, mass: a.weight });
    }
    atoms.sort_by(|a, b| a.location.total_cmp(&b.location));
    Ok(MixedDistribution { time: t, atoms, density: Some(Density::from_masses(*grid, &masses)) })
}

/// Spreads `mass` uniformly over `[x0, x1]` in the node-centred cells of `grid`.
fn deposit_segment(grid: &XGrid, masses: &mut [f64], x0: f64, x1: f64, mass: f64) {
    let top = grid.bins as f64 + 0.5;
    let u0 = grid.cell_coordinate(x0).clamp(0.5, top);
    let u1 = grid.cell_coordinate(x1).clamp(0.5, top);
    let (a, b) = if u0 <= u1 { (u0, u1) } else { (u1, u0) };
    let last = grid.bins;
    if b - a < 1e-12 {
        masses[(a.floor() as usize).min(last)] += mass;
        return;
    }
    let density = mass / (b - a);
    let (first, end) = ((a.floor() as usize).min(last), (b.floor() as usize).min(last));
    for (cell, m) in masses.iter_mut().enumerate().take(end + 1).skip(first) {
        let lo = a.max(cell as f64);
        let hi = b.min(cell as f64 + 1.0);
        if hi > lo {
            *m += density * (hi - lo);
        }
    }
}

/// Exact engine for one system: spectrum, tabulated kernels and free values,
/// and one Volterra solution per transfer mode, on a uniform grid up to `t_max`.
#[derive(Debug, Clone)]
pub struct ExactEngine {
    system: MonitoredSystem,
    spectrum: TransferSpectrum,
    step: f64,
    values: Vec<Vec<f64>>,
    solutions: Vec<VolterraSolution>,
}

impl ExactEngine {
    /// Builds the engine with Volterra step `h`. With `extrapolate`, each mode
    /// is solved at `h` and `h/2` and Richardson-combined.
    pub fn new(system: &MonitoredSystem, t_max: f64, h: f64, extrapolate: bool) -> Result<Self> {
        let spectrum = spectral_decompose(system, &default_sample_times(system))?;
        Self::with_spectrum(system, spectrum, t_max, h, extrapolate)
    }

    pub fn with_spectrum(
        system: &MonitoredSystem,
        spectrum: TransferSpectrum,
        t_max: f64,
        h: f64,
        extrapolate: bool,
    ) -> Result<Self> {
        if !(t_max >= h && h > 0.0) {
            return Err(Error::InvalidInput(format!("need 0 < h <= t_max, got h = {h}, t_max = {t_max}")));
        }
        let rate = system.rate();
        if rate * h >= 1.0 {
            return Err(Error::StepTooLarge { product: rate * h, suggested: 0.5 / rate });
        }
        let steps = (t_max / h * (1.0 + 1e-12)).floor() as usize;
        let t_max = steps as f64 * h;
        let (sub_step, sub_steps) = if extrapolate { (0.5 * h, 2 * steps) } else { (h, steps) };
        let (kernels, values) = spectrum.tabulate(system, sub_step, sub_steps);
        let values: Vec<Vec<f64>> = values.into_iter().step_by(sub_steps / steps).collect();
        let solutions = kernels
            .into_par_iter()
            .map(|d| {
                let kernel = ConvolutionKernel::sampled(sub_step, d);
                if extrapolate {
                    solve_volterra_extrapolated(&kernel, rate, t_max, h)
                } else {
                    solve_volterra(&kernel, rate, t_max, h)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { system: system.clone(), spectrum, step: h, values, solutions })
    }

    pub fn system(&self) -> &MonitoredSystem {
        &self.system
    }

    pub fn spectrum(&self) -> &TransferSpectrum {
        &self.spectrum
    }

    pub fn solutions(&self) -> &[VolterraSolution] {
        &self.solutions
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn t_max(&self) -> f64 {
        (self.values.len() - 1) as f64 * self.step
    }

    /// Largest per-mode error estimate of the Volterra solves.
    pub fn error_estimate(&self) -> f64 {
        self.solutions.iter().filter_map(|s| s.error_estimate()).fold(0.0, f64::max)
    }

    pub fn first_moment(&self, t: f64) -> Result<f64> {
        first_moment(&self.system, &self.spectrum, &self.solutions, t)
    }

    pub fn stationary_moment(&self) -> f64 {
        stationary_moment_diag(&self.system, &self.spectrum)
    }

    pub fn click_distribution(&self, t: f64, grid: &XGrid) -> Result<MixedDistribution> {
        let n = grid_index(t, self.step, self.values.len() - 1)?;
        let modes: Vec<&[Complex64]> = self.solutions.iter().map(|v| v.values()).collect();
        assemble(&self.system, &self.spectrum, &modes, &self.values, self.step, n, grid)
    }

    /// No-click atom plus click part.
    pub fn distribution(&self, t: f64, grid: &XGrid) -> Result<MixedDistribution> {
        let n = grid_index(t, self.step, self.values.len() - 1)?;
        let no_click =
            MixedDistribution::atom(t, self.values[n][self.system.initial_index()], (-self.system.rate() * t).exp());
        self.click_distribution(t, grid)?.combined(&no_click)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::qubit::{qubit_click_binned, qubit_second_moment, QubitParams};
    use crate::volterra::closed_form_qubit_i;

    #[test]
    fn no_click_atoms() {
        let q = MonitoredSystem::qubit(1.0, 0.3).unwrap();
        let d = no_click_distribution(&q, 2.0);
        assert!((d.atoms[0].location - 2f64.cos()).abs() < 1e-12);
        assert!((d.atoms[0].weight - (-0.6f64).exp()).abs() < 1e-15);
        let d0 = no_click_distribution(&q, 0.0);
        assert!((d0.atoms[0].location - 1.0).abs() < 1e-15 && d0.atoms[0].weight == 1.0);
        let ring = MonitoredSystem::hopping_ring(9, 1.0, 1.0).unwrap();
        assert!(no_click_distribution(&ring, 0.7).atoms[0].location.abs() < 1e-12);
    }

    #[test]
    fn qubit_first_moment_is_mz() {
        let q = MonitoredSystem::qubit(1.0, 2.0).unwrap();
        let engine = ExactEngine::new(&q, 1.0, 1e-3, true).unwrap();
        let want = (-2.0f64).exp() * closed_form_qubit_i(2.0, 1.0, 1.0);
        assert!((engine.first_moment(1.0).unwrap() - want).abs() < 1e-9);
        assert!((want - 2.0 * (-1.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn qubit_mass_and_second_moment() {
        let q = MonitoredSystem::qubit(1.0, 1.0).unwrap();
        let engine = ExactEngine::new(&q, 3.0, 1e-3, false).unwrap();
        let grid = XGrid::new(-1.0, 1.0, 2000).unwrap();
        let d = engine.distribution(3.0, &grid).unwrap();
        assert!((d.total_mass() - 1.0).abs() < 2e-3);
        let p = QubitParams::new(1.0, 1.0).unwrap();
        assert!((d.moment(2) - qubit_second_moment(&p, 3.0)).abs() < 5e-3);
        assert!((d.moment(1) - engine.first_moment(3.0).unwrap()).abs() < 5e-3);
    }

    #[test]
    fn qubit_density_matches_closed_form() {
        let q = MonitoredSystem::qubit(1.0, 0.2).unwrap();
        let engine = ExactEngine::new(&q, 5.0, 1e-3, false).unwrap();
        let grid = XGrid::new(-1.0, 1.0, 2000).unwrap();
        let click = engine.click_distribution(5.0, &grid).unwrap();
        let exact = qubit_click_binned(&QubitParams::new(1.0, 0.2).unwrap(), 5.0, &grid);
        let density = click.density.unwrap();
        assert!((density.moment(0) - (1.0 - (-1.0f64).exp())).abs() < 2e-3);
        let sup = (0..grid.nodes())
            .filter(|&i| grid.node(i).abs() <= 0.99)
            .map(|i| (density.values[i] - exact.values[i]).abs())
            .fold(0.0, f64::max);
        assert!(sup < 2e-2, "sup norm {sup}");
    }

    #[test]
    fn hopping_ring_has_integer_atoms() {
        // sites near the seam see the wrap-around and move; they carry no weight at this size
        let ring = MonitoredSystem::hopping_ring(49, 1.0, 1.0).unwrap();
        let engine = ExactEngine::new(&ring, 2.0, 1e-2, true).unwrap();
        let grid = XGrid::new(-24.0, 24.0, 48).unwrap();
        let d = engine.distribution(2.0, &grid).unwrap();
        assert!(d.density_mass().abs() < 1e-12, "{}", d.density_mass());
        assert!(d.atoms.iter().all(|a| (a.location - a.location.round()).abs() < 1e-9));
        // trapezoid in s: h^2 gamma^2 / 12 relative
        assert!((d.total_mass() - 1.0).abs() < 1e-4);
        assert!(engine.first_moment(2.0).unwrap().abs() < 1e-10);
        assert!(engine.stationary_moment().abs() < 1e-12);
    }

    #[test]
    fn stationary_mean_is_flat_average() {
        let h = nalgebra::DMatrix::from_row_slice(
            3,
            3,
            &[0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0].map(|x: f64| Complex64::new(x, 0.0)),
        );
        let sys = MonitoredSystem::new(h, vec![1.0, 2.0, 6.0], 1.0, 0).unwrap();
        let spectrum = spectral_decompose(&sys, &default_sample_times(&sys)).unwrap();
        assert!((stationary_moment_diag(&sys, &spectrum) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn mismatched_inputs_rejected() {
        let q = MonitoredSystem::qubit(1.0, 1.0).unwrap();
        let engine = ExactEngine::new(&q, 1.0, 1e-2, false).unwrap();
        assert!(matches!(engine.first_moment(0.005), Err(Error::TimeOffGrid { .. })));
        assert!(first_moment(&q, engine.spectrum(), &engine.solutions()[..1], 0.5).is_err());
        assert!(matches!(ExactEngine::new(&q, 1.0, 2.0, false), Err(Error::InvalidInput(_))));
    }
}
