//! Averaged-state dynamics,
//! `d rho/dt = -i [H, rho] + gamma (sum_a pi_a rho pi_a - rho)`,
//! integrated with fixed-step RK4. The dephasing term keeps the diagonal and
//! damps every coherence at rate `gamma`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::models::qubit::QubitParams;
use crate::system::MonitoredSystem;

/// Allowed `|Tr rho - 1|` after a step.
pub const TRACE_TOL: f64 = 1e-6;
/// Site population at the ring antipode above which finite-size leakage is reported.
pub const LEAK_TOL: f64 = 1e-8;

/// Density matrix in the measured basis, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl DensityMatrix {
    /// `|index><index|`.
    pub fn basis(dim: usize, index: usize) -> Self {
        let mut data = vec![Complex64::new(0.0, 0.0); dim * dim];
        data[index * dim + index] = Complex64::new(1.0, 0.0);
        Self { dim, data }
    }

    pub fn from_matrix(m: &DMatrix<Complex64>) -> Result<Self> {
        let dim = m.nrows();
        if m.ncols() != dim || dim == 0 {
            return Err(Error::InvalidInput("density matrix must be square and non-empty".into()));
        }
        let data = (0..dim * dim).map(|k| m[(k / dim, k % dim)]).collect();
        Ok(Self { dim, data })
    }

    pub fn to_matrix(&self) -> DMatrix<Complex64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.data)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.dim + j]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.data[i * self.dim + i].re).sum()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.data[i * self.dim + i].re).collect()
    }

    /// `Tr[rho O]` for a diagonal observable.
    pub fn expectation(&self, observable: &[f64]) -> f64 {
        self.diagonal().iter().zip(observable).map(|(p, o)| p * o).sum()
    }

    pub fn purity(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    /// `max |rho - rho^dagger|`.
    pub fn hermiticity_deviation(&self) -> f64 {
        let n = self.dim;
        let mut d: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                d = d.max((self.data[i * n + j] - self.data[j * n + i].conj()).norm());
            }
        }
        d
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        let m = self.to_matrix();
        let h = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
        h.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Largest step accepted by the integrator, `1e-3 / (||H||_2 + gamma)`.
pub fn step_bound(system: &MonitoredSystem) -> f64 {
    1e-3 / (system.spectral_norm() + system.rate()).max(f64::MIN_POSITIVE)
}

/// `out = L(rho)` using the sparse Hamiltonian rows; `H rho` is formed
/// once and `rho H = (H rho)^dagger`.
fn liouvillian(system: &MonitoredSystem, rho: &[Complex64], out: &mut [Complex64], h_rho: &mut [Complex64]) {
    let n = system.dim();
    let rate = system.rate();
    for (i, row) in system.sparse_rows().iter().enumerate() {
        let dst = &mut h_rho[i * n..(i + 1) * n];
        dst.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        for &(k, hik) in row {
            let src = &rho[k * n..(k + 1) * n];
            for (d, r) in dst.iter_mut().zip(src) {
                *d += hik * r;
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            let commutator = h_rho[i * n + j] - h_rho[j * n + i].conj();
            // -i [H, rho]
            let mut v = Complex64::new(commutator.im, -commutator.re);
            if i != j {
                v -= rho[i * n + j] * rate;
            }
            out[i * n + j] = v;
        }
    }
}

struct Rk4 {
    k: [Vec<Complex64>; 4],
    tmp: Vec<Complex64>,
    h_rho: Vec<Complex64>,
}

impl Rk4 {
    fn new(n: usize) -> Self {
        let z = vec![Complex64::new(0.0, 0.0); n * n];
        Self { k: [z.clone(), z.clone(), z.clone(), z.clone()], tmp: z.clone(), h_rho: z }
    }

    fn step(&mut self, system: &MonitoredSystem, rho: &mut [Complex64], dt: f64) {
        let Rk4 { k, tmp, h_rho } = self;
        liouvillian(system, rho, &mut k[0], h_rho);
        for (t, (r, a)) in tmp.iter_mut().zip(rho.iter().zip(&k[0])) {
            *t = r + a * (0.5 * dt);
        }
        liouvillian(system, tmp, &mut k[1], h_rho);
        for (t, (r, a)) in tmp.iter_mut().zip(rho.iter().zip(&k[1])) {
            *t = r + a * (0.5 * dt);
        }
        liouvillian(system, tmp, &mut k[2], h_rho);
        for (t, (r, a)) in tmp.iter_mut().zip(rho.iter().zip(&k[2])) {
            *t = r + a * dt;
        }
        liouvillian(system, tmp, &mut k[3], h_rho);
        let w = dt / 6.0;
        for (i, r) in rho.iter_mut().enumerate() {
            *r += (k[0][i] + (k[1][i] + k[2][i]) * 2.0 + k[3][i]) * w;
        }
    }
}

fn check_step(system: &MonitoredSystem, dt: f64) -> Result<()> {
    let bound = step_bound(system);
    if !(dt > 0.0) || dt > bound * (1.0 + 1e-12) {
        return Err(Error::LindbladStepTooLarge { dt, bound });
    }
    Ok(())
}

fn check_trace(data: &[Complex64], n: usize) -> Result<()> {
    let trace: f64 = (0..n).map(|i| data[i * n + i].re).sum();
    let drift = (trace - 1.0).abs();
    if !(drift <= TRACE_TOL) {
        return Err(Error::TraceDrift { drift });
    }
    Ok(())
}

/// One RK4 step of length `dt`.
pub fn lindblad_step(system: &MonitoredSystem, rho: &DensityMatrix, dt: f64) -> Result<DensityMatrix> {
    check_step(system, dt)?;
    if rho.dim != system.dim() {
        return Err(Error::InvalidInput("density matrix dimension mismatch".into()));
    }
    let mut out = rho.clone();
    Rk4::new(rho.dim).step(system, &mut out.data, dt);
    check_trace(&out.data, out.dim)?;
    Ok(out)
}

/// Integrates from `rho0` and returns `rho` at each of the ascending `times`.
/// Steps are at most `dt` (default: [`step_bound`]) and land exactly on
/// every requested time.
pub fn evolve_from(
    system: &MonitoredSystem,
    rho0: &DensityMatrix,
    times: &[f64],
    dt: Option<f64>,
) -> Result<Vec<DensityMatrix>> {
    let dt = dt.unwrap_or_else(|| step_bound(system));
    check_step(system, dt)?;
    if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidInput("times must be finite, >= 0 and ascending".into()));
    }
    let n = system.dim();
    let mut rk = Rk4::new(n);
    let mut rho = rho0.clone();
    let mut now = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        let span = t - now;
        if span > 0.0 {
            let steps = (span / dt).ceil().max(1.0) as usize;
            let h = span / steps as f64;
            for _ in 0..steps {
                rk.step(system, &mut rho.data, h);
                check_trace(&rho.data, n)?;
            }
        }
        now = t;
        out.push(rho.clone());
    }
    Ok(out)
}

/// `rho(t)` from the initial basis state.
pub fn evolve(system: &MonitoredSystem, t: f64, dt: Option<f64>) -> Result<DensityMatrix> {
    let rho0 = DensityMatrix::basis(system.dim(), system.initial_index());
    Ok(evolve_from(system, &rho0, &[t], dt)?.remove(0))
}

/// Bloch vector `(m_x, m_y, m_z)` of the monitored qubit started in `|+1>`:
/// `m_z = e^{-gamma t/2} [cosh(G t/2) + (gamma/G) sinh(G t/2)]`,
/// `m_y = e^{-gamma t/2} (2 omega/G) sinh(G t/2)`, `G = sqrt(gamma^2 - 4 omega^2)`.
pub fn qubit_bloch_solution(p: &QubitParams, t: f64) -> (f64, f64, f64) {
    let (g, w) = (p.rate, p.omega);
    let envelope = (-0.5 * g * t).exp();
    let disc = g * g - 4.0 * w * w;
    let (c, s_over) = if (g - 2.0 * w).abs() < 1e-8 * w {
        // sinh(G t/2)/G -> t/2
        (1.0, 0.5 * t)
    } else if disc > 0.0 {
        let big = disc.sqrt();
        ((0.5 * big * t).cosh(), (0.5 * big * t).sinh() / big)
    } else {
        let big = (-disc).sqrt();
        ((0.5 * big * t).cos(), (0.5 * big * t).sin() / big)
    };
    (0.0, envelope * 2.0 * w * s_over, envelope * (c + g * s_over))
}

/// Site populations `n(j, t)` of a hopping ring.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteDensities {
    pub positions: Vec<f64>,
    pub values: Vec<f64>,
    /// Population at the site farthest from the start, when it exceeds [`LEAK_TOL`].
    pub boundary_leak: Option<f64>,
}

impl SiteDensities {
    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// `sum_j j^m n(j, t)`.
    pub fn moment(&self, m: u32) -> f64 {
        self.positions.iter().zip(&self.values).map(|(x, n)| x.powi(m as i32) * n).sum()
    }
}

/// `n(j, t) = Tr[rho(t) pi_j]` with positions taken from the observable.
pub fn site_density(system: &MonitoredSystem, t: f64, dt: Option<f64>) -> Result<SiteDensities> {
    let rho = evolve(system, t, dt)?;
    let values = rho.diagonal();
    let n = system.dim();
    let antipode = (system.initial_index() + n / 2) % n;
    let leak = values[antipode];
    Ok(SiteDensities {
        positions: system.observable().to_vec(),
        values,
        boundary_leak: (leak > LEAK_TOL).then_some(leak),
    })
}
