//! Click masses of a monitored particle on a chain and the crossover of the
//! spread from ballistic (t^3) to diffusive (t) growth.

use trajdist::models::hopping::{hopping_click_moment, hopping_distribution, hopping_second_moment, HoppingParams};

fn main() -> trajdist::Result<()> {
    let p = HoppingParams::new(1.0, 1.0)?;
    let t = 2.0;
    let dist = hopping_distribution(&p, t, p.j_max(t), p.k_points(t))?;
    println!("distribution at t = {t} (gamma = 1):");
    for atom in dist.atoms.iter().filter(|a| a.location.abs() <= 5.0) {
        println!("  x = {:+3.0}  P = {:.6}", atom.location, atom.weight);
    }
    println!("  sum j^2 P = {:.6}, closed form {:.6}", dist.moment(2), hopping_second_moment(&p, t));

    println!("\n  gamma t      <x^2>     local slope");
    let mut prev: Option<(f64, f64)> = None;
    for i in 0..=12 {
        let u = 10f64.powf(-2.0 + 0.35 * i as f64);
        let m2 = hopping_click_moment(&p, 2, u);
        let slope = prev.map(|(pu, pm)| (m2 / pm).ln() / (u / pu).ln());
        println!("  {u:9.4} {m2:12.5e}  {}", slope.map_or(String::from("-"), |s| format!("{s:.3}")));
        prev = Some((u, m2));
    }
    Ok(())
}
