//! Common eigenbasis of the transfer-matrix family `T(t)`.
//!
//! The exact engine needs a single unitary `V` with `T(t) = V D(t) V^dagger`
//! for all `t`. Whether such a basis exists depends on the Hamiltonian, so it
//! is checked on a set of sample times: the family (and its transposes) must
//! commute, and the basis obtained from a random Hermitian combination of the
//! samples must reconstruct every sample.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::system::{values_from_transfer, MonitoredSystem};

/// Commutator residual above which no time-independent basis is assumed.
pub const COMMUTATION_TOL: f64 = 1e-8;
/// Reconstruction residual above which the basis is rejected.
pub const RECONSTRUCTION_TOL: f64 = 1e-8;

const COMBINATION_SEED: u64 = 0x5EED_7AA5_F00D_0001;

/// Time-independent eigenbasis `V` of the transfer matrices together with the
/// eigenvalue samples `d_alpha(t)` at the decomposition times.
///
/// Column 0 of `V` is the flat vector `1/sqrt(N)` with `d_0(t) = 1`; the
/// remaining columns are sorted by decreasing time-averaged `|d_alpha|`.
#[derive(Debug, Clone)]
pub struct TransferSpectrum {
    basis: DMatrix<Complex64>,
    sample_times: Vec<f64>,
    samples: Vec<Vec<Complex64>>,
    commutation_residual: f64,
    reconstruction_residual: f64,
    real_basis: bool,
}

impl TransferSpectrum {
    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    /// `V`, columns are eigenvectors.
    pub fn basis(&self) -> &DMatrix<Complex64> {
        &self.basis
    }

    pub fn sample_times(&self) -> &[f64] {
        &self.sample_times
    }

    /// `samples()[i][alpha] = d_alpha(sample_times()[i])`.
    pub fn samples(&self) -> &[Vec<Complex64>] {
        &self.samples
    }

    pub fn commutation_residual(&self) -> f64 {
        self.commutation_residual
    }

    pub fn reconstruction_residual(&self) -> f64 {
        self.reconstruction_residual
    }

    pub fn is_real(&self) -> bool {
        self.real_basis
    }

    /// `d_alpha(t) = (V^dagger T(t) V)_{alpha alpha}` for every alpha.
    pub fn eigenvalues_at(&self, system: &MonitoredSystem, t: f64) -> Vec<Complex64> {
        self.diagonal(&system.transition_matrix(t))
    }

    fn diagonal(&self, transfer: &DMatrix<f64>) -> Vec<Complex64> {
        let n = self.dim();
        if self.real_basis {
            let v = self.basis.map(|z| z.re);
            let tv = transfer * &v;
            (0..n).map(|alpha| Complex64::new(v.column(alpha).dot(&tv.column(alpha)), 0.0)).collect()
        } else {
            let tc = transfer.map(|x| Complex64::new(x, 0.0));
            let tv = tc * &self.basis;
            (0..n)
                .map(|alpha| {
                    self.basis.column(alpha).iter().zip(tv.column(alpha).iter()).map(|(v, w)| v.conj() * w).sum()
                })
                .collect()
        }
    }

    /// Eigenvalues and free-evolution values on the uniform grid `i * step`,
    /// `i = 0..=steps`. Returns `(kernels, values)` with `kernels[alpha][i]`
    /// and `values[i][a] = sum_a' o_a' T_{a',a}(i * step)`.
    pub fn tabulate(&self, system: &MonitoredSystem, step: f64, steps: usize) -> (Vec<Vec<Complex64>>, Vec<Vec<f64>>) {
        let rows: Vec<(Vec<Complex64>, Vec<f64>)> = (0..=steps)
            .into_par_iter()
            .map(|i| {
                let transfer = system.transition_matrix(i as f64 * step);
                (self.diagonal(&transfer), values_from_transfer(system.observable(), &transfer))
            })
            .collect();
        let n = self.dim();
        let mut kernels = vec![Vec::with_capacity(steps + 1); n];
        let mut values = Vec::with_capacity(steps + 1);
        for (d, x) in rows {
            for (alpha, z) in d.into_iter().enumerate() {
                kernels[alpha].push(z);
            }
            values.push(x);
        }
        (kernels, values)
    }

    /// `sum_alpha V_{a,alpha} c_alpha conj(V_{a0,alpha})` for every `a`.
    pub(crate) fn propagate_modes(&self, coefficients: &[Complex64], a0: usize) -> Vec<Complex64> {
        let n = self.dim();
        (0..n)
            .map(|a| {
                (0..n).map(|alpha| self.basis[(a, alpha)] * coefficients[alpha] * self.basis[(a0, alpha)].conj()).sum()
            })
            .collect()
    }
}

/// Finds the common eigenbasis of `T(t)` over `sample_times`.
pub fn spectral_decompose(system: &MonitoredSystem, sample_times: &[f64]) -> Result<TransferSpectrum> {
    let mut times: Vec<f64> = sample_times.to_vec();
    if times.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(Error::InvalidInput("sample times must be finite and positive".into()));
    }
    times.sort_by(f64::total_cmp);
    times.dedup();
    if times.len() < 2 {
        return Err(Error::InvalidInput("need at least two distinct positive sample times".into()));
    }

    let n = system.dim();
    let transfers: Vec<DMatrix<f64>> = times.iter().map(|&t| system.transition_matrix(t)).collect();
    let symmetric = transfers.iter().all(|m| (m - m.transpose()).amax() <= 1e-13);

    let mut family: Vec<DMatrix<f64>> = transfers.clone();
    if !symmetric {
        family.extend(transfers.iter().map(|m| m.transpose()));
    }
    let mut commutation_residual: f64 = 0.0;
    for i in 0..family.len() {
        for j in (i + 1)..family.len() {
            let c = &family[i] * &family[j] - &family[j] * &family[i];
            commutation_residual = commutation_residual.max(c.amax());
        }
    }
    if commutation_residual > COMMUTATION_TOL {
        return Err(Error::NonCommutingFamily { residual: commutation_residual });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(COMBINATION_SEED);
    let flat = 1.0 / (n as f64).sqrt();
    let mut weight_sum = 0.0;

    let mut basis = if symmetric {
        let mut k = DMatrix::<f64>::zeros(n, n);
        for m in &transfers {
            let c: f64 = rng.random_range(0.5..1.5);
            weight_sum += c;
            k += m * c;
        }
        // Deflate the flat vector to a sentinel eigenvalue above the spectrum.
        let f = DMatrix::from_element(n, 1, flat);
        let p = DMatrix::<f64>::identity(n, n) - &f * f.transpose();
        let sentinel = 2.0 * weight_sum + 1.0;
        let k = &p * k * &p + (&f * f.transpose()) * sentinel;
        let eig = SymmetricEigen::new(k);
        eig.eigenvectors.map(|x| Complex64::new(x, 0.0))
    } else {
        let mut k = DMatrix::<Complex64>::zeros(n, n);
        for m in &transfers {
            let c: f64 = rng.random_range(0.5..1.5);
            let c_anti: f64 = rng.random_range(0.5..1.5);
            weight_sum += c + c_anti;
            let sym = (m + m.transpose()) * 0.5;
            let anti = (m - m.transpose()) * 0.5;
            k += sym.map(|x| Complex64::new(c * x, 0.0)) + anti.map(|x| Complex64::new(0.0, c_anti * x));
        }
        let f = DMatrix::from_element(n, 1, Complex64::new(flat, 0.0));
        let p = DMatrix::<Complex64>::identity(n, n) - &f * f.adjoint();
        let sentinel = Complex64::new(2.0 * weight_sum + 1.0, 0.0);
        let k = &p * k * &p + (&f * f.adjoint()) * sentinel;
        SymmetricEigen::new(k).eigenvectors
    };

    // Move the flat eigenvector to column 0 and pin it exactly.
    let flat_col = (0..n)
        .max_by(|&i, &j| {
            let oi: Complex64 = basis.column(i).iter().sum();
            let oj: Complex64 = basis.column(j).iter().sum();
            oi.norm().total_cmp(&oj.norm())
        })
        .unwrap_or(0);
    basis.swap_columns(0, flat_col);
    basis.column_mut(0).fill(Complex64::new(flat, 0.0));
    for alpha in 1..n {
        let overlap: Complex64 = basis.column(alpha).iter().sum::<Complex64>() * flat;
        let mut col = basis.column(alpha).clone_owned();
        for z in col.iter_mut() {
            *z -= overlap * flat;
        }
        let norm = col.norm();
        basis.set_column(alpha, &(col / Complex64::new(norm, 0.0)));
    }

    let mut spectrum = TransferSpectrum {
        basis,
        sample_times: times.clone(),
        samples: Vec::new(),
        commutation_residual,
        reconstruction_residual: 0.0,
        real_basis: symmetric,
    };
    let samples: Vec<Vec<Complex64>> = transfers.iter().map(|m| spectrum.diagonal(m)).collect();

    // Order the non-trivial modes by decreasing mean |d_alpha|.
    let mut order: Vec<usize> = (1..n).collect();
    let mean_abs = |alpha: usize| samples.iter().map(|s| s[alpha].norm()).sum::<f64>();
    order.sort_by(|&a, &b| mean_abs(b).total_cmp(&mean_abs(a)));
    order.insert(0, 0);
    let basis = DMatrix::from_fn(n, n, |r, c| spectrum.basis[(r, order[c])]);
    let samples: Vec<Vec<Complex64>> = samples.iter().map(|s| order.iter().map(|&alpha| s[alpha]).collect()).collect();
    spectrum.basis = basis;

    let mut residual: f64 = 0.0;
    for (m, d) in transfers.iter().zip(&samples) {
        let mut scaled = spectrum.basis.clone();
        for (alpha, mut col) in scaled.column_iter_mut().enumerate() {
            col *= d[alpha];
        }
        let rebuilt = scaled * spectrum.basis.adjoint();
        for r in 0..n {
            for c in 0..n {
                residual = residual.max((rebuilt[(r, c)] - m[(r, c)]).norm());
            }
        }
    }
    spectrum.reconstruction_residual = residual;
    spectrum.samples = samples;
    if residual > RECONSTRUCTION_TOL {
        return Err(Error::SpectralMismatch { residual });
    }
    Ok(spectrum)
}

/// Sample times used by the exact engine: irregularly spaced so that no two
/// are commensurate with simple Hamiltonian periods.
pub fn default_sample_times(system: &MonitoredSystem) -> Vec<f64> {
    let scale = 1.0 / system.spectral_norm().max(1e-3);
    [0.317, 0.771, 1.293, 2.031, 3.173].iter().map(|s| s * scale).collect()
}
