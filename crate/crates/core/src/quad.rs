//! Composite Gauss-Legendre quadrature.

use gauss_quad::GaussLegendre;

const DEGREE: usize = 20;

/// Nodes and weights of a fixed-degree Gauss-Legendre rule reused across panels.
#[derive(Debug, Clone)]
pub struct Composite {
    rule: GaussLegendre,
}

impl Default for Composite {
    fn default() -> Self {
        Self::new()
    }
}

impl Composite {
    pub fn new() -> Self {
        Self { rule: GaussLegendre::new(DEGREE).expect("degree is valid") }
    }

    /// `int_a^b f` on `panels` equal panels.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, panels: usize, mut f: F) -> f64 {
        let panels = panels.max(1);
        let w = (b - a) / panels as f64;
        (0..panels)
            .map(|p| {
                let lo = a + p as f64 * w;
                self.rule.integrate(lo, lo + w, &mut f)
            })
            .sum()
    }
}

/// `int_a^b f` with a 20-point rule on `panels` panels.
pub fn integrate<F: FnMut(f64) -> f64>(a: f64, b: f64, panels: usize, f: F) -> f64 {
    Composite::new().integrate(a, b, panels, f)
}
