//! User-supplied Hamiltonians. A circulant one has a time-independent
//! transfer eigenbasis and goes through the exact engine; a generic one does
//! not, and falls back to sampling and the averaged state.

use nalgebra::DMatrix;
use num_complex::Complex64;
use trajdist::lindblad::evolve;
use trajdist::{run_ensemble, Error, ExactEngine, MonitoredSystem, XGrid};

fn main() -> trajdist::Result<()> {
    // 7-site ring with nearest and next-nearest hopping
    let n = 7;
    let mut h = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for i in 0..n {
        for (d, amp) in [(1, -1.0), (2, -0.3)] {
            let j = (i + d) % n;
            h[(i, j)] = Complex64::new(amp, 0.0);
            h[(j, i)] = Complex64::new(amp, 0.0);
        }
    }
    let positions: Vec<f64> = (0..n).map(|i| i as f64 - 3.0).collect();
    let ring = MonitoredSystem::new(h, positions, 0.8, 3)?;
    let engine = ExactEngine::new(&ring, 2.0, 1e-3, true)?;
    let dist = engine.distribution(2.0, &XGrid::new(-3.0, 3.0, 6)?)?;
    println!("circulant ring: commutation residual {:.1e}", engine.spectrum().commutation_residual());
    println!("  m2 = {:.6}, mass = {:.9}", dist.moment(2), dist.total_mass());

    let generic =
        DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.3, 1.0, 0.5, 0.7, 0.3, 0.7, -0.4]).map(|x| Complex64::new(x, 0.0));
    let system = MonitoredSystem::new(generic, vec![-1.0, 0.0, 1.0], 0.5, 0)?;
    match ExactEngine::new(&system, 2.0, 1e-3, true) {
        Err(e @ Error::NonCommutingFamily { .. }) => println!("generic 3-level system: {e}"),
        Err(e) => return Err(e),
        Ok(_) => println!("generic 3-level system unexpectedly commutes"),
    }
    let stats = run_ensemble(&system, 2.0, 20_000, 3, 1, &XGrid::new(-1.0, 1.0, 100)?)?;
    let rho = evolve(&system, 2.0, None)?;
    let m1 = stats.moment(1);
    println!(
        "  sampled m1 = {:+.4} +- {:.4}, averaged state {:+.4}",
        m1.value,
        m1.std_error,
        rho.expectation(system.observable())
    );
    Ok(())
}
