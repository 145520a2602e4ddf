//! Averaged dynamics: the RK4 integrator against the Bloch solution, and
//! site densities of the hopping ring.

use trajdist::lindblad::{evolve, qubit_bloch_solution, site_density};
use trajdist::models::hopping::HoppingParams;
use trajdist::models::qubit::QubitParams;
use trajdist::MonitoredSystem;

fn main() -> trajdist::Result<()> {
    println!("qubit, t = 3:   gamma   m_z (RK4)     m_z (closed)");
    for rate in [0.5, 2.0, 5.0] {
        let q = MonitoredSystem::qubit(1.0, rate)?;
        let rho = evolve(&q, 3.0, None)?;
        let (_, _, mz) = qubit_bloch_solution(&QubitParams::new(1.0, rate)?, 3.0);
        println!("                {rate:5.2}  {:+.10}  {mz:+.10}", rho.expectation(q.observable()));
    }

    let p = HoppingParams::new(1.0, 1.0)?;
    let t = 3.0;
    let ring = MonitoredSystem::hopping_ring(p.ring_sites(t), 1.0, 1.0)?;
    let n = site_density(&ring, t, None)?;
    println!("\nhopping ring of {} sites, t = {t}:", ring.dim());
    for (x, v) in n.positions.iter().zip(&n.values).filter(|(x, _)| x.abs() <= 4.0) {
        println!("  n({x:+.0}) = {v:.6}");
    }
    println!("  sum n = {:.9}, sum j^2 n = {:.6}", n.total(), n.moment(2));
    println!("  boundary leak: {:?}", n.boundary_leak);
    Ok(())
}
