//! Long-time law of the monitored qubit and its even moments.

use trajdist::models::qubit::{
    qubit_stationary_cdf, qubit_stationary_density, qubit_stationary_even_moment, QubitParams,
};
use trajdist::montecarlo::ks_against_cdf;
use trajdist::{run_ensemble, MonitoredSystem, XGrid};

fn main() -> trajdist::Result<()> {
    for rate in [0.2, 2.0, 5.0] {
        let p = QubitParams::new(1.0, rate)?;
        println!("gamma = {rate}");
        for x in [0.0, 0.5, 0.9] {
            println!("  P({x}) = {:.5}", qubit_stationary_density(&p, x)?);
        }
        for n in 1..=3 {
            println!("  <x^{}> = {:.6}", 2 * n, qubit_stationary_even_moment(&p, n)?);
        }
        let t = 40.0 / rate * (rate * rate).max(1.0);
        let q = MonitoredSystem::qubit(1.0, rate)?;
        let stats = run_ensemble(&q, t, 20_000, 7, 1, &XGrid::new(-1.0, 1.0, 100)?)?;
        let ks = ks_against_cdf(&stats.values, |x| qubit_stationary_cdf(&p, x).unwrap());
        println!(
            "  sampled at t = {t}: <x^2> = {:.4} +- {:.4}, KS {ks:.4}",
            stats.moment(2).value,
            stats.moment(2).std_error
        );
    }
    Ok(())
}
