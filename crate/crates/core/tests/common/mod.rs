//! Property checks shared by the proptest suite and the acceptance run.
#![allow(dead_code)]

use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

use trajdist::models::bessel::bessel_jn_sequence;
use trajdist::models::hopping::{hopping_click_masses, hopping_distribution, HoppingParams};
use trajdist::models::qubit::{qubit_distribution, qubit_stationary_density, QubitParams};
use trajdist::spectrum::default_sample_times;
use trajdist::{spectral_decompose, MonitoredSystem, TransferSpectrum, XGrid};

pub type Check = Result<(), TestCaseError>;

/// Qubit or hopping ring: `(is_ring, sites, omega, rate)`.
pub fn systems() -> impl Strategy<Value = (bool, usize, f64, f64)> {
    (any::<bool>(), 1usize..8, 0.2f64..3.0, 0.0f64..5.0).prop_map(|(ring, half, w, g)| (ring, 2 * half + 1, w, g))
}

pub fn build(ring: bool, sites: usize, omega: f64, rate: f64) -> MonitoredSystem {
    if ring {
        MonitoredSystem::hopping_ring(sites, omega, rate).unwrap()
    } else {
        MonitoredSystem::qubit(omega, rate).unwrap()
    }
}

fn spectrum(system: &MonitoredSystem) -> Result<TransferSpectrum, TestCaseError> {
    spectral_decompose(system, &default_sample_times(system)).map_err(|e| TestCaseError::fail(e.to_string()))
}

/// Rows and columns of `T(t)` sum to one, entries are non-negative.
pub fn bistochastic(system: &MonitoredSystem, t: f64) -> Check {
    let m = system.transition_matrix(t);
    let n = system.dim();
    for i in 0..n {
        let row: f64 = m.row(i).iter().sum();
        let col: f64 = m.column(i).iter().sum();
        prop_assert!((row - 1.0).abs() < 1e-10, "row {i} sums to {row}");
        prop_assert!((col - 1.0).abs() < 1e-10, "column {i} sums to {col}");
    }
    prop_assert!(m.iter().all(|x| *x >= -1e-14));
    Ok(())
}

/// `|d_alpha(t)| <= 1` for every transfer eigenvalue.
pub fn eigenvalues_bounded(system: &MonitoredSystem, t: f64) -> Check {
    let s = spectrum(system)?;
    for d in s.eigenvalues_at(system, t) {
        prop_assert!(d.norm() <= 1.0 + 1e-9, "|d| = {}", d.norm());
    }
    Ok(())
}

/// First column of `V` is flat with eigenvalue one, and `V^dagger V = 1`.
pub fn flat_column_and_unitary_basis(system: &MonitoredSystem, t: f64) -> Check {
    let s = spectrum(system)?;
    let v = s.basis();
    let n = system.dim();
    let flat = 1.0 / (n as f64).sqrt();
    for a in 0..n {
        prop_assert!((v[(a, 0)].norm() - flat).abs() < 1e-10);
    }
    prop_assert!((s.eigenvalues_at(system, t)[0].re - 1.0).abs() < 1e-10);
    let gram = v.adjoint() * v;
    for i in 0..n {
        for j in 0..n {
            let want = if i == j { 1.0 } else { 0.0 };
            prop_assert!((gram[(i, j)].re - want).abs() < 1e-10 && gram[(i, j)].im.abs() < 1e-10);
        }
    }
    Ok(())
}

/// `J_0(x)^2 + 2 sum_{n >= 1} J_n(x)^2 = 1`.
pub fn bessel_normalization(x: f64) -> Check {
    let top = x.ceil() as usize + 40;
    let j = bessel_jn_sequence(x, top);
    let sum = j[0] * j[0] + 2.0 * j[1..].iter().map(|v| v * v).sum::<f64>();
    prop_assert!((sum - 1.0).abs() < 1e-12, "sum = {sum} at x = {x}");
    Ok(())
}

/// Total mass of the hopping distribution (atoms only) and of the binned
/// qubit distribution is one.
pub fn distribution_normalized(omega: f64, rate: f64, t: f64) -> Check {
    let hp = HoppingParams::new(omega, rate).unwrap();
    let d = hopping_distribution(&hp, t, hp.j_max(t), hp.k_points(t)).unwrap();
    prop_assert!((d.total_mass() - 1.0).abs() < 1e-6, "hopping mass {}", d.total_mass());
    let qp = QubitParams::new(omega, rate).unwrap();
    let q = qubit_distribution(&qp, t, &XGrid::new(-1.0, 1.0, 400).unwrap());
    prop_assert!((q.total_mass() - 1.0).abs() < 1e-9, "qubit mass {}", q.total_mass());
    Ok(())
}

/// `mass(j) = mass(-j)`.
pub fn hopping_parity(omega: f64, rate: f64, t: f64) -> Check {
    let p = HoppingParams::new(omega, rate).unwrap();
    let j_max = p.j_max(t);
    let m = hopping_click_masses(&p, t, j_max, p.k_points(t)).unwrap();
    for j in 0..j_max {
        prop_assert!((m[j] - m[2 * j_max - j]).abs() < 1e-10);
    }
    Ok(())
}

/// `P_stat(x) = P_stat(-x)`.
pub fn stationary_even(omega: f64, rate: f64, x: f64) -> Check {
    let p = QubitParams::new(omega, rate).unwrap();
    let (a, b) = (qubit_stationary_density(&p, x).unwrap(), qubit_stationary_density(&p, -x).unwrap());
    prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    Ok(())
}

pub fn times() -> impl Strategy<Value = f64> {
    0.0f64..4.0
}

pub fn rates() -> impl Strategy<Value = f64> {
    0.05f64..5.0
}

pub fn bessel_args() -> impl Strategy<Value = f64> {
    0.0f64..200.0
}

pub fn stationary_args() -> impl Strategy<Value = (f64, f64, f64)> {
    (0.2f64..3.0, 0.05f64..8.0, 0.0f64..0.999)
}
