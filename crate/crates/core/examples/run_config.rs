//! Drives the subcommands from a config built in code.

use trajdist::cli::{cmd_analytic, cmd_compare, cmd_lindblad};
use trajdist::RunConfig;

fn main() -> trajdist::Result<()> {
    let mut config = RunConfig::qubit(1.0, 1.0, 4.0, 5);
    config.montecarlo.n_traj = 20_000;
    config.output.dir = std::env::temp_dir().join("trajdist-example");
    println!("config hash {}", config.hash());
    config.save(&config.output.dir.with_extension("json"))?;

    for path in cmd_analytic(&config)?.iter().chain(&cmd_lindblad(&config)?) {
        println!("wrote {}", path.display());
    }
    let report = cmd_compare(&config)?;
    for p in &report.points {
        println!(
            "t = {:.1}: KS {:.4}, moment z {:?}, lindblad residual {:.1e}",
            p.t,
            p.ks,
            p.moment_sigma.map(|z| (z * 100.0).round() / 100.0),
            p.lindblad_residual
        );
    }
    println!("passed: {}", report.passed);
    Ok(())
}
