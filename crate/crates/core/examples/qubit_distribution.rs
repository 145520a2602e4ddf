//! Outcome distribution of a monitored qubit at t = 5 for the three damping
//! regimes, from the generic engine and from the pole formula.

use trajdist::models::qubit::{qubit_click_density, qubit_distribution, QubitParams};
use trajdist::{ExactEngine, MonitoredSystem, XGrid};

fn main() -> trajdist::Result<()> {
    let t = 5.0;
    let grid = XGrid::new(-1.0, 1.0, 400)?;
    for rate in [0.2, 2.0, 5.0] {
        let p = QubitParams::new(1.0, rate)?;
        let system = MonitoredSystem::qubit(1.0, rate)?;
        let engine = ExactEngine::new(&system, t, 1e-3, true)?;
        let dist = engine.distribution(t, &grid)?;
        let closed = qubit_distribution(&p, t, &grid);

        println!("gamma = {rate} ({:?})", p.regime());
        for atom in &dist.atoms {
            println!("  no-click atom at x = {:+.6} with weight {:.6}", atom.location, atom.weight);
        }
        println!("  click mass {:.6}, m1 {:+.6}, m2 {:.6}", dist.density_mass(), dist.moment(1), dist.moment(2));
        let engine_d = dist.density.as_ref().unwrap();
        let closed_d = closed.density.as_ref().unwrap();
        println!("       x     engine      closed    pointwise");
        for x in [-0.9, -0.5, 0.0, 0.5, 0.9] {
            let i = grid.nearest(x);
            let xi = grid.node(i);
            println!(
                "  {xi:+.3} {:10.5} {:10.5} {:10.5}",
                engine_d.values[i],
                closed_d.values[i],
                qubit_click_density(&p, t, xi)
            );
        }
    }
    Ok(())
}
