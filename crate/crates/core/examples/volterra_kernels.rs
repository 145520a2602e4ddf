//! The resolvent equation `I(s) = d(s) + gamma int_0^s d(s - s') I(s') ds'`
//! for the built-in kernels and a tabulated one.

use num_complex::Complex64;
use trajdist::models::hopping::{hopping_ik, HoppingParams};
use trajdist::volterra::{closed_form_qubit_i, solve_volterra, solve_volterra_extrapolated};
use trajdist::ConvolutionKernel;

fn main() -> trajdist::Result<()> {
    let (rate, s_max, h) = (2.0, 3.0, 1e-3);

    let cos = solve_volterra_extrapolated(&ConvolutionKernel::Cosine { omega: 1.0 }, rate, s_max, h)?;
    let exact = closed_form_qubit_i(rate, 1.0, s_max);
    println!("cos kernel (critical): I({s_max}) = {:.12}, closed form {exact:.12}", cos.at(s_max)?.re);

    let p = HoppingParams::new(1.0, rate)?;
    let k = std::f64::consts::FRAC_PI_2;
    let bessel = ConvolutionKernel::BesselJ0 { omega: p.dispersion(k) };
    let plain = solve_volterra(&bessel, rate, s_max, h)?;
    let rich = solve_volterra_extrapolated(&bessel, rate, s_max, h)?;
    let series = hopping_ik(&p, k, s_max, None);
    println!(
        "J0 kernel, k = pi/2: trapezoid {:.3e} off, extrapolated {:.3e} off (estimate {:.1e})",
        (plain.at(s_max)?.re - series).abs(),
        (rich.at(s_max)?.re - series).abs(),
        plain.error_estimate().unwrap_or(f64::NAN)
    );

    // any kernel known on a grid, here d(s) = e^{-s}
    let values: Vec<Complex64> = (0..=6000).map(|i| Complex64::new((-(i as f64) * 5e-4).exp(), 0.0)).collect();
    let sampled = ConvolutionKernel::sampled(5e-4, values);
    let sol = solve_volterra(&sampled, 0.5, s_max, h)?;
    // d = e^{-s} gives I = e^{-(1 - gamma) s}
    println!("sampled e^(-s): I({s_max}) = {:.8}, exact {:.8}", sol.at(s_max)?.re, (-0.5 * s_max).exp());

    match solve_volterra(&ConvolutionKernel::ConstantOne, 50.0, 1.0, 0.05) {
        Err(e) => println!("step guard: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
