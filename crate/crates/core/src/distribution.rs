//! Mixed probability measures: Dirac atoms plus a density sampled on a grid.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform grid of `bins + 1` nodes on `[lo, hi]`.
///
/// Node `i` owns the cell `[x_i - dx/2, x_i + dx/2]` clipped to `[lo, hi]`,
/// so the end cells are half as wide. Cell widths are exactly the trapezoid
/// weights, which keeps deposited mass and the trapezoid integral equal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XGrid {
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
}

impl XGrid {
    pub fn new(lo: f64, hi: f64, bins: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(Error::InvalidInput(format!("grid needs lo < hi, got [{lo}, {hi}]")));
        }
        if bins == 0 {
            return Err(Error::InvalidInput("grid needs at least one bin".into()));
        }
        Ok(Self { lo, hi, bins })
    }

    pub fn nodes(&self) -> usize {
        self.bins + 1
    }

    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / self.bins as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        if i == self.bins {
            self.hi
        } else {
            self.lo + i as f64 * self.spacing()
        }
    }

    pub fn node_positions(&self) -> Vec<f64> {
        (0..self.nodes()).map(|i| self.node(i)).collect()
    }

    /// Trapezoid weight (cell width) of node `i`.
    pub fn weight(&self, i: usize) -> f64 {
        if i == 0 || i == self.bins {
            0.5 * self.spacing()
        } else {
            self.spacing()
        }
    }

    /// Nearest node, clamped to the grid.
    pub fn nearest(&self, x: f64) -> usize {
        let u = ((x - self.lo) / self.spacing()).round();
        if u <= 0.0 {
            0
        } else {
            (u as usize).min(self.bins)
        }
    }

    /// Position of `x` in cell coordinates, `u = (x - lo) / dx + 1/2`, so
    /// that node `i` owns `[i, i + 1)`.
    pub(crate) fn cell_coordinate(&self, x: f64) -> f64 {
        (x - self.lo) / self.spacing() + 0.5
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    fn matches(&self, other: &XGrid) -> bool {
        let tol = 1e-12 * (self.hi - self.lo).abs().max(1.0);
        self.bins == other.bins && (self.lo - other.lo).abs() <= tol && (self.hi - other.hi).abs() <= tol
    }

    pub fn check_same(&self, other: &XGrid) -> Result<()> {
        if self.matches(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "[{}, {}] with {} bins vs [{}, {}] with {} bins",
                self.lo, self.hi, self.bins, other.lo, other.hi, other.bins
            )))
        }
    }
}

/// Probability per unit `x` at the grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Density {
    pub grid: XGrid,
    pub values: Vec<f64>,
}

impl Density {
    pub fn zeros(grid: XGrid) -> Self {
        Self { values: vec![0.0; grid.nodes()], grid }
    }

    /// Builds a density from the mass held by each node's cell.
    pub fn from_masses(grid: XGrid, masses: &[f64]) -> Self {
        assert_eq!(masses.len(), grid.nodes());
        let values = masses.iter().enumerate().map(|(i, m)| m / grid.weight(i)).collect();
        Self { grid, values }
    }

    pub fn masses(&self) -> Vec<f64> {
        self.values.iter().enumerate().map(|(i, v)| v * self.grid.weight(i)).collect()
    }

    /// Trapezoid integral of `x^k * density`.
    pub fn moment(&self, k: u32) -> f64 {
        self.values.iter().enumerate().map(|(i, v)| self.grid.weight(i) * v * self.grid.node(i).powi(k as i32)).sum()
    }
}

/// A Dirac mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub location: f64,
    pub weight: f64,
}

/// Atoms plus an optional gridded density at time `time`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedDistribution {
    pub time: f64,
    pub atoms: Vec<Atom>,
    pub density: Option<Density>,
}

impl MixedDistribution {
    pub fn atom(time: f64, location: f64, weight: f64) -> Self {
        Self { time, atoms: vec![Atom { location, weight }], density: None }
    }

    pub fn atom_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum()
    }

    pub fn density_mass(&self) -> f64 {
        self.density.as_ref().map_or(0.0, |d| d.moment(0))
    }

    pub fn total_mass(&self) -> f64 {
        self.atom_mass() + self.density_mass()
    }

    /// `sum_atoms w x^k + trapezoid int x^k P(x) dx`.
    pub fn moment(&self, k: u32) -> f64 {
        let atoms: f64 = self.atoms.iter().map(|a| a.weight * a.location.powi(k as i32)).sum();
        atoms + self.density.as_ref().map_or(0.0, |d| d.moment(k))
    }

    /// Sum of two measures at the same time. Densities must share a grid;
    /// atoms at the same location (to 1e-12) are merged.
    pub fn combined(&self, other: &MixedDistribution) -> Result<MixedDistribution> {
        let density = match (&self.density, &other.density) {
            (Some(a), Some(b)) => {
                a.grid.check_same(&b.grid)?;
                Some(Density { grid: a.grid, values: a.values.iter().zip(&b.values).map(|(x, y)| x + y).collect() })
            }
            (Some(a), None) => Some(a.clone()),
            (None, b) => b.clone(),
        };
        let mut atoms = self.atoms.clone();
        for atom in &other.atoms {
            match atoms.iter_mut().find(|a| (a.location - atom.location).abs() <= 1e-12) {
                Some(a) => a.weight += atom.weight,
                None => atoms.push(*atom),
            }
        }
        atoms.sort_by(|a, b| a.location.total_cmp(&b.location));
        Ok(MixedDistribution { time: self.time, atoms, density })
    }

    /// Mass per node of `grid`: cell masses of the density plus atoms at
    /// their nearest node.
    pub fn node_masses(&self, grid: &XGrid) -> Result<Vec<f64>> {
        let mut masses = match &self.density {
            Some(d) => {
                d.grid.check_same(grid)?;
                d.masses()
            }
            None => vec![0.0; grid.nodes()],
        };
        for atom in &self.atoms {
            masses[grid.nearest(atom.location)] += atom.weight;
        }
        Ok(masses)
    }

    /// CSV with header `x,density,atom_flag,weight`: one row per density
    /// node (weight = cell mass), then one row per atom.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "density", "atom_flag", "weight"])?;
        if let Some(d) = &self.density {
            for (i, (v, m)) in d.values.iter().zip(d.masses()).enumerate() {
                w.write_record([fmt(d.grid.node(i)), fmt(*v), "0".into(), fmt(m)])?;
            }
        }
        for a in &self.atoms {
            w.write_record([fmt(a.location), fmt(0.0), "1".into(), fmt(a.weight)])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the format produced by [`write_csv`](Self::write_csv). Density
    /// rows must lie on a uniform grid.
    pub fn read_csv<R: Read>(input: R, time: f64) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let headers = r.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["x", "density", "atom_flag", "weight"] {
            return Err(Error::InvalidInput(format!("unexpected csv header {headers:?}")));
        }
        let mut nodes = Vec::new();
        let mut values = Vec::new();
        let mut atoms = Vec::new();
        for record in r.records() {
            let record = record?;
            let field = |i: usize| -> Result<f64> {
                record[i]
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::InvalidInput(format!("bad number {:?}: {e}", &record[i])))
            };
            match record[2].trim() {
                "0" => {
                    nodes.push(field(0)?);
                    values.push(field(1)?);
                }
                "1" => atoms.push(Atom { location: field(0)?, weight: field(3)? }),
                flag => return Err(Error::InvalidInput(format!("atom_flag must be 0 or 1, got {flag}"))),
            }
        }
        let density = if nodes.is_empty() {
            None
        } else {
            if nodes.len() < 2 {
                return Err(Error::GridMismatch("density needs at least two nodes".into()));
            }
            let grid = XGrid::new(nodes[0], nodes[nodes.len() - 1], nodes.len() - 1)
                .map_err(|e| Error::GridMismatch(e.to_string()))?;
            let tol = 1e-9 * grid.spacing();
            if let Some((i, x)) = nodes.iter().enumerate().find(|(i, x)| (grid.node(*i) - **x).abs() > tol) {
                return Err(Error::GridMismatch(format!(
                    "density node {i} at {x} is off the uniform grid (expected {})",
                    grid.node(i)
                )));
            }
            Some(Density { grid, values })
        };
        Ok(Self { time, atoms, density })
    }
}

/// 17 significant digits, enough to round-trip any f64.
pub(crate) fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

/// Kolmogorov-Smirnov distance between two mass vectors on the same nodes,
/// each normalized to unit total.
pub fn ks_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::GridMismatch(format!("{} vs {} nodes", a.len(), b.len())));
    }
    let (ta, tb): (f64, f64) = (a.iter().sum(), b.iter().sum());
    if !(ta > 0.0 && tb > 0.0) {
        return Err(Error::InvalidInput("distributions must carry positive mass".into()));
    }
    let (mut ca, mut cb, mut d) = (0.0, 0.0, 0.0_f64);
    for (x, y) in a.iter().zip(b) {
        ca += x / ta;
        cb += y / tb;
        d = d.max((ca - cb).abs());
    }
    Ok(d)
}
