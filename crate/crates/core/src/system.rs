//! Monitored systems: Hamiltonian, measured-basis observable, measurement
//! rate and initial basis state, together with the cached eigendecomposition
//! used for every unitary stretch.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

const HERMITIAN_TOL: f64 = 1e-12;

/// Pure state in the measured basis.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    pub fn new(amplitudes: Vec<Complex64>) -> Self {
        Self { amplitudes }
    }

    /// The basis state `|index>` of an `dim`-level system.
    pub fn basis(dim: usize, index: usize) -> Self {
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); dim];
        amplitudes[index] = Complex64::new(1.0, 0.0);
        Self { amplitudes }
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum()
    }

    /// `|sum |psi_a|^2 - 1|`.
    pub fn norm_deviation(&self) -> f64 {
        (self.norm_sqr() - 1.0).abs()
    }

    /// Born probabilities in the measured basis.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|z| z.norm_sqr()).collect()
    }
}

/// Eigenvectors of `H`, stored row-major with split real and imaginary parts.
/// `transposed` holds `W^T` so that both `W x` and `W^dagger x` can be written
/// as sequences of contiguous axpy updates.
#[derive(Debug, Clone)]
struct EigenBasis {
    energies: Vec<f64>,
    re: Vec<f64>,
    im: Option<Vec<f64>>,
    re_t: Vec<f64>,
    im_t: Option<Vec<f64>>,
}

/// A finite-dimensional system whose unitary evolution is interrupted by
/// projective measurements of a basis observable at Poisson times.
#[derive(Debug, Clone)]
pub struct MonitoredSystem {
    hamiltonian: DMatrix<Complex64>,
    observable: Vec<f64>,
    rate: f64,
    initial_index: usize,
    eigen: EigenBasis,
    sparse_rows: Vec<Vec<(usize, Complex64)>>,
}

impl MonitoredSystem {
    /// Builds a system from a Hermitian Hamiltonian (in the measured basis),
    /// the observable eigenvalues `o_a`, the measurement rate and the index of
    /// the initial basis state.
    pub fn new(hamiltonian: DMatrix<Complex64>, observable: Vec<f64>, rate: f64, initial_index: usize) -> Result<Self> {
        let dim = hamiltonian.nrows();
        if dim == 0 || hamiltonian.ncols() != dim {
            return Err(Error::InvalidInput(format!(
                "hamiltonian must be a non-empty square matrix, got {}x{}",
                hamiltonian.nrows(),
                hamiltonian.ncols()
            )));
        }
        if observable.len() != dim {
            return Err(Error::InvalidInput(format!(
                "observable has {} values for a {dim}-level system",
                observable.len()
            )));
        }
        if observable.iter().any(|o| !o.is_finite()) {
            return Err(Error::InvalidInput("observable values must be finite".into()));
        }
        if !(rate >= 0.0 && rate.is_finite()) {
            return Err(Error::InvalidInput(format!("rate must be finite and >= 0, got {rate}")));
        }
        if initial_index >= dim {
            return Err(Error::InvalidInput(format!("initial index {initial_index} out of range for dimension {dim}")));
        }
        let mut deviation: f64 = 0.0;
        for i in 0..dim {
            for j in 0..dim {
                let d = (hamiltonian[(i, j)] - hamiltonian[(j, i)].conj()).norm();
                if !d.is_finite() {
                    return Err(Error::InvalidInput("hamiltonian has non-finite entries".into()));
                }
                deviation = deviation.max(d);
            }
        }
        if deviation > HERMITIAN_TOL {
            return Err(Error::NonHermitian { deviation });
        }

        let eigen = decompose(&hamiltonian);
        let sparse_rows = (0..dim)
            .map(|i| {
                (0..dim)
                    .filter(|&j| hamiltonian[(i, j)] != Complex64::new(0.0, 0.0))
                    .map(|j| (j, hamiltonian[(i, j)]))
                    .collect()
            })
            .collect();

        Ok(Self { hamiltonian, observable, rate, initial_index, eigen, sparse_rows })
    }

    /// Spin-1/2 with `H = -J sigma^x`, `J = omega / 2`, monitored along z and
    /// prepared in `|+1>`. Index 0 is `|+1>` (o = +1), index 1 is `|-1>`.
    pub fn qubit(omega: f64, rate: f64) -> Result<Self> {
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(Error::InvalidInput(format!("qubit splitting must be > 0, got {omega}")));
        }
        let j = 0.5 * omega;
        let h = DMatrix::from_row_slice(
            2,
            2,
            &[Complex64::new(0.0, 0.0), Complex64::new(-j, 0.0), Complex64::new(-j, 0.0), Complex64::new(0.0, 0.0)],
        );
        Self::new(h, vec![1.0, -1.0], rate, 0)
    }

    /// Single particle hopping on a ring of `sites` sites with amplitude
    /// `omega`, monitored in position. Site index `i` carries position
    /// `i - sites / 2`; the particle starts at position 0.
    pub fn hopping_ring(sites: usize, omega: f64, rate: f64) -> Result<Self> {
        if sites < 3 {
            return Err(Error::InvalidInput(format!("ring needs at least 3 sites, got {sites}")));
        }
        if !(omega.is_finite() && omega > 0.0) {
            return Err(Error::InvalidInput(format!("hopping amplitude must be > 0, got {omega}")));
        }
        let mut h = DMatrix::from_element(sites, sites, Complex64::new(0.0, 0.0));
        for i in 0..sites {
            let next = (i + 1) % sites;
            h[(i, next)] = Complex64::new(-omega, 0.0);
            h[(next, i)] = Complex64::new(-omega, 0.0);
        }
        let center = sites / 2;
        let positions = (0..sites).map(|i| i as f64 - center as f64).collect();
        Self::new(h, positions, rate, center)
    }

    /// Same Hamiltonian and observable with a different measurement rate.
    /// Reuses the cached eigendecomposition.
    pub fn with_rate(&self, rate: f64) -> Result<Self> {
        if !(rate >= 0.0 && rate.is_finite()) {
            return Err(Error::InvalidInput(format!("rate must be finite and >= 0, got {rate}")));
        }
        Ok(Self { rate, ..self.clone() })
    }

    pub fn dim(&self) -> usize {
        self.observable.len()
    }

    pub fn hamiltonian(&self) -> &DMatrix<Complex64> {
        &self.hamiltonian
    }

    pub fn observable(&self) -> &[f64] {
        &self.observable
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn initial_index(&self) -> usize {
        self.initial_index
    }

    pub fn energies(&self) -> &[f64] {
        &self.eigen.energies
    }

    /// `||H||_2`, the largest absolute eigenvalue.
    pub fn spectral_norm(&self) -> f64 {
        self.eigen.energies.iter().fold(0.0_f64, |m, e| m.max(e.abs()))
    }

    /// True when the Hamiltonian (hence every eigenvector) is real.
    pub fn is_real(&self) -> bool {
        self.eigen.im.is_none()
    }

    /// Nonzero entries of each Hamiltonian row.
    pub fn sparse_rows(&self) -> &[Vec<(usize, Complex64)>] {
        &self.sparse_rows
    }

    /// `sum_a o_a |psi_a|^2`.
    pub fn expectation(&self, state: &StateVector) -> f64 {
        state.amplitudes.iter().zip(&self.observable).map(|(z, o)| o * z.norm_sqr()).sum()
    }

    pub fn initial_state(&self) -> StateVector {
        StateVector::basis(self.dim(), self.initial_index)
    }

    /// `exp(-i H dt) |psi>`.
    pub fn propagate(&self, state: &StateVector, dt: f64) -> StateVector {
        assert_eq!(state.dim(), self.dim(), "state dimension mismatch");
        let mut workspace = Workspace::new(self.dim());
        let mut out = vec![Complex64::new(0.0, 0.0); self.dim()];
        self.propagate_into(&state.amplitudes, dt, &mut out, &mut workspace);
        StateVector::new(out)
    }

    /// `exp(-i H dt) |index>`, written into `out`.
    pub(crate) fn propagate_basis_into(&self, index: usize, dt: f64, out: &mut [Complex64], ws: &mut Workspace) {
        let n = self.dim();
        let e = &self.eigen;
        // c = phase * W^dagger e_index
        for k in 0..n {
            let (s, c) = (e.energies[k] * dt).sin_cos();
            let wr = e.re[index * n + k];
            let wi = e.im.as_ref().map_or(0.0, |im| -im[index * n + k]);
            // (wr + i wi)(c - i s)
            ws.coef_re[k] = wr * c + wi * s;
            ws.coef_im[k] = wi * c - wr * s;
        }
        self.apply_basis(ws, out);
    }

    /// `exp(-i H dt) psi`, written into `out`.
    pub(crate) fn propagate_into(&self, psi: &[Complex64], dt: f64, out: &mut [Complex64], ws: &mut Workspace) {
        let n = self.dim();
        let e = &self.eigen;
        ws.coef_re.iter_mut().for_each(|v| *v = 0.0);
        ws.coef_im.iter_mut().for_each(|v| *v = 0.0);
        // c_k = sum_a conj(W_ak) psi_a, accumulated row by row of W.
        for (a, z) in psi.iter().enumerate() {
            let row = &e.re[a * n..(a + 1) * n];
            axpy(z.re, row, &mut ws.coef_re);
            axpy(z.im, row, &mut ws.coef_im);
            if let Some(im) = &e.im {
                let row_im = &im[a * n..(a + 1) * n];
                // conj(W) = re - i im; (re - i im)(zr + i zi) = re zr + im zi + i(re zi - im zr)
                axpy(z.im, row_im, &mut ws.coef_re);
                axpy(-z.re, row_im, &mut ws.coef_im);
            }
        }
        for k in 0..n {
            let (s, c) = (e.energies[k] * dt).sin_cos();
            let (cr, ci) = (ws.coef_re[k], ws.coef_im[k]);
            ws.coef_re[k] = cr * c + ci * s;
            ws.coef_im[k] = ci * c - cr * s;
        }
        self.apply_basis(ws, out);
    }

    /// `|<a'| exp(-i H dt) |index>|^2` for every `a'`: column `index` of `T(dt)`.
    pub(crate) fn transition_column_into(&self, index: usize, dt: f64, probs: &mut [f64], ws: &mut Workspace) {
        let n = self.dim();
        let e = &self.eigen;
        for k in 0..n {
            let (s, c) = (e.energies[k] * dt).sin_cos();
            let wr = e.re[index * n + k];
            let wi = e.im.as_ref().map_or(0.0, |im| -im[index * n + k]);
            ws.coef_re[k] = wr * c + wi * s;
            ws.coef_im[k] = wi * c - wr * s;
        }
        self.accumulate(ws);
        for (p, (r, i)) in probs.iter_mut().zip(ws.out_re.iter().zip(&ws.out_im)) {
            *p = r * r + i * i;
        }
    }

    /// out = W c with c held in the workspace.
    fn apply_basis(&self, ws: &mut Workspace, out: &mut [Complex64]) {
        self.accumulate(ws);
        for (o, (r, i)) in out.iter_mut().zip(ws.out_re.iter().zip(&ws.out_im)) {
            *o = Complex64::new(*r, *i);
        }
    }

    /// `ws.out = W ws.coef`.
    fn accumulate(&self, ws: &mut Workspace) {
        let n = self.dim();
        let e = &self.eigen;
        ws.out_re.iter_mut().for_each(|v| *v = 0.0);
        ws.out_im.iter_mut().for_each(|v| *v = 0.0);
        for k in 0..n {
            let col = &e.re_t[k * n..(k + 1) * n];
            axpy(ws.coef_re[k], col, &mut ws.out_re);
            axpy(ws.coef_im[k], col, &mut ws.out_im);
            if let Some(im_t) = &e.im_t {
                let col_im = &im_t[k * n..(k + 1) * n];
                axpy(-ws.coef_im[k], col_im, &mut ws.out_re);
                axpy(ws.coef_re[k], col_im, &mut ws.out_im);
            }
        }
    }

    /// Real and imaginary parts of `U(t) = exp(-i H t)`.
    pub(crate) fn unitary_parts(&self, t: f64) -> (DMatrix<f64>, DMatrix<f64>) {
        let n = self.dim();
        let e = &self.eigen;
        let w_re = DMatrix::from_row_slice(n, n, &e.re);
        let (sin, cos): (Vec<f64>, Vec<f64>) = e.energies.iter().map(|en| (en * t).sin_cos()).unzip();
        let scale = |m: &DMatrix<f64>, f: &[f64]| {
            let mut out = m.clone();
            for (k, mut col) in out.column_iter_mut().enumerate() {
                col *= f[k];
            }
            out
        };
        match &e.im {
            None => {
                // U = W diag(cos) W^T - i W diag(sin) W^T
                let u_re = scale(&w_re, &cos) * w_re.transpose();
                let u_im = -(scale(&w_re, &sin) * w_re.transpose());
                (u_re, u_im)
            }
            Some(im) => {
                let w_im = DMatrix::from_row_slice(n, n, im);
                // U = W diag(c - i s) W^dagger, W = A + iB, W^dagger = A^T - i B^T
                let a_c = scale(&w_re, &cos);
                let a_s = scale(&w_re, &sin);
                let b_c = scale(&w_im, &cos);
                let b_s = scale(&w_im, &sin);
                // W diag(c - i s) = (A c + B s) + i (B c - A s)
                let p = a_c + b_s;
                let q = b_c - a_s;
                let (at, bt) = (w_re.transpose(), w_im.transpose());
                let u_re = &p * &at + &q * &bt;
                let u_im = &q * &at - &p * &bt;
                (u_re, u_im)
            }
        }
    }

    /// `U(t) = exp(-i H t)`.
    pub fn unitary(&self, t: f64) -> DMatrix<Complex64> {
        let (re, im) = self.unitary_parts(t);
        DMatrix::from_fn(self.dim(), self.dim(), |i, j| Complex64::new(re[(i, j)], im[(i, j)]))
    }

    /// Transfer matrix `T_{a',a}(t) = |<a'|U(t)|a>|^2`; rows and columns sum to one.
    pub fn transition_matrix(&self, t: f64) -> DMatrix<f64> {
        let (re, im) = self.unitary_parts(t);
        re.zip_map(&im, |r, i| r * r + i * i)
    }

    /// Value of the observable reached from `|a>` after a free stretch of length `t`,
    /// `sum_a' o_a' T_{a',a}(t)`, for every starting index `a`.
    pub fn free_values(&self, t: f64) -> Vec<f64> {
        values_from_transfer(&self.observable, &self.transition_matrix(t))
    }
}

pub(crate) fn values_from_transfer(observable: &[f64], transfer: &DMatrix<f64>) -> Vec<f64> {
    (0..transfer.ncols()).map(|a| transfer.column(a).iter().zip(observable).map(|(t, o)| t * o).sum()).collect()
}

/// Scratch buffers for allocation-free propagation.
#[derive(Debug, Clone)]
pub(crate) struct Workspace {
    coef_re: Vec<f64>,
    coef_im: Vec<f64>,
    out_re: Vec<f64>,
    out_im: Vec<f64>,
}

impl Workspace {
    pub(crate) fn new(n: usize) -> Self {
        Self { coef_re: vec![0.0; n], coef_im: vec![0.0; n], out_re: vec![0.0; n], out_im: vec![0.0; n] }
    }
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn decompose(h: &DMatrix<Complex64>) -> EigenBasis {
    let n = h.nrows();
    let real = h.iter().all(|z| z.im == 0.0);
    if real {
        let eig = SymmetricEigen::new(h.map(|z| z.re));
        let mut re = vec![0.0; n * n];
        let mut re_t = vec![0.0; n * n];
        for a in 0..n {
            for k in 0..n {
                re[a * n + k] = eig.eigenvectors[(a, k)];
                re_t[k * n + a] = eig.eigenvectors[(a, k)];
            }
        }
        EigenBasis { energies: eig.eigenvalues.iter().copied().collect(), re, im: None, re_t, im_t: None }
    } else {
        let eig = SymmetricEigen::new(h.clone());
        let mut re = vec![0.0; n * n];
        let mut im = vec![0.0; n * n];
        let mut re_t = vec![0.0; n * n];
        let mut im_t = vec![0.0; n * n];
        for a in 0..n {
            for k in 0..n {
                let w = eig.eigenvectors[(a, k)];
                re[a * n + k] = w.re;
                im[a * n + k] = w.im;
                re_t[k * n + a] = w.re;
                im_t[k * n + a] = w.im;
            }
        }
        EigenBasis { energies: eig.eigenvalues.iter().copied().collect(), re, im: Some(im), re_t, im_t: Some(im_t) }
    }
}
