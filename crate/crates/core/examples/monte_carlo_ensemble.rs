//! Trajectory ensemble for the qubit, checked against the exact distribution.

use trajdist::montecarlo::{distribution_distance, dump_trajectories};
use trajdist::{run_ensemble, ExactEngine, MonitoredSystem, XGrid};

fn main() -> trajdist::Result<()> {
    let (rate, t, n) = (2.0, 5.0, 50_000);
    let system = MonitoredSystem::qubit(1.0, rate)?;
    let grid = XGrid::new(-1.0, 1.0, 200)?;
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let stats = run_ensemble(&system, t, n, 42, workers, &grid)?;
    let exact = ExactEngine::new(&system, t, 1e-3, true)?.distribution(t, &grid)?;

    println!("{n} trajectories, gamma = {rate}, t = {t}");
    for k in 1..=4 {
        let m = stats.moment(k);
        println!("  m{k} = {:+.5} +- {:.5}   exact {:+.5}", m.value, m.std_error, exact.moment(k));
    }
    println!("  no-click fraction {:.5} (e^-gamma t = {:.5})", stats.no_click_fraction, (-rate * t).exp());
    println!("  jumps: mean {:.3}, variance {:.3}", stats.mean_jumps, stats.jump_variance);
    println!("  KS distance to exact: {:.4}", distribution_distance(&stats, &exact)?);

    println!("first three trajectories:");
    dump_trajectories(&system, 1.0, 3, 42, std::io::stdout())?;
    Ok(())
}
