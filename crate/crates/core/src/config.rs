//! JSON run configuration shared by all subcommands.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::distribution::XGrid;
use crate::error::{Error, Result};
use crate::models::hopping::HoppingParams;
use crate::models::qubit::QubitParams;
use crate::system::MonitoredSystem;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelSpec {
    Qubit {
        omega: f64,
        rate: f64,
    },
    /// Without `sites` the analytic route uses the infinite chain and the
    /// other routes a ring sized from the light cone at `t_max`.
    Hopping {
        omega: f64,
        rate: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sites: Option<usize>,
    },
    CustomMatrix {
        /// Row-major real part of `H` in the measured basis.
        hamiltonian_re: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        hamiltonian_im: Option<Vec<Vec<f64>>>,
        observable: Vec<f64>,
        rate: f64,
        #[serde(default)]
        initial_index: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    pub t_max: f64,
    /// Number of equally spaced output times ending at `t_max`; one sample
    /// means `t_max` alone.
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VolterraSpec {
    pub step: f64,
    #[serde(default = "yes")]
    pub extrapolate: bool,
}

fn yes() -> bool {
    true
}

impl Default for VolterraSpec {
    fn default() -> Self {
        Self { step: 1e-3, extrapolate: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloSpec {
    pub n_traj: usize,
    pub base_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    /// Raw trajectories written as NDJSON for the last output time.
    #[serde(default)]
    pub dump: usize,
}

impl Default for MonteCarloSpec {
    fn default() -> Self {
        Self { n_traj: 10_000, base_seed: 1, workers: None, dump: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LindbladSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    pub ks: f64,
    pub sigma: f64,
    pub first_moment: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { ks: 0.02, sigma: 4.0, first_moment: 1e-4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: PathBuf,
    #[serde(default)]
    pub format: Format,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), format: Format::Csv }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub model: ModelSpec,
    pub times: TimeSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub volterra: VolterraSpec,
    #[serde(default)]
    pub montecarlo: MonteCarloSpec,
    #[serde(default)]
    pub lindblad: LindbladSpec,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub output: OutputSpec,
}

fn invalid<T>(msg: String) -> Result<T> {
    Err(Error::InvalidInput(msg))
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        invalid(format!("{name} must be finite and > 0, got {v}"))
    }
}

fn non_negative(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        invalid(format!("{name} must be finite and >= 0, got {v}"))
    }
}

impl RunConfig {
    /// A qubit run with default numerics.
    pub fn qubit(omega: f64, rate: f64, t_max: f64, samples: usize) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            model: ModelSpec::Qubit { omega, rate },
            times: TimeSpec { t_max, samples },
            grid: None,
            volterra: VolterraSpec::default(),
            montecarlo: MonteCarloSpec::default(),
            lindblad: LindbladSpec::default(),
            thresholds: Thresholds::default(),
            output: OutputSpec::default(),
        }
    }

    /// A hopping run on the infinite chain with default numerics.
    pub fn hopping(omega: f64, rate: f64, t_max: f64, samples: usize) -> Self {
        Self { model: ModelSpec::Hopping { omega, rate, sites: None }, ..Self::qubit(omega, rate, t_max, samples) }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    /// SHA-256 of the compact JSON form, hex encoded. Worker count and
    /// output directory are excluded since they do not change results.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.montecarlo.workers = None;
        canonical.output.dir = PathBuf::new();
        let bytes = serde_json::to_vec(&canonical).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return invalid(format!("unsupported schema_version {} (expected {SCHEMA_VERSION})", self.schema_version));
        }
        match &self.model {
            ModelSpec::Qubit { omega, rate } => {
                positive("omega", *omega)?;
                non_negative("rate", *rate)?;
            }
            ModelSpec::Hopping { omega, rate, sites } => {
                positive("omega", *omega)?;
                non_negative("rate", *rate)?;
                if let Some(n) = sites {
                    if *n < 3 || n % 2 == 0 {
                        return invalid(format!("sites must be odd and >= 3, got {n}"));
                    }
                }
            }
            ModelSpec::CustomMatrix { hamiltonian_re, hamiltonian_im, observable, rate, initial_index } => {
                non_negative("rate", *rate)?;
                let n = observable.len();
                let square = |m: &Vec<Vec<f64>>| m.len() == n && m.iter().all(|r| r.len() == n);
                if n == 0 || !square(hamiltonian_re) || !hamiltonian_im.as_ref().is_none_or(square) {
                    return invalid(format!("hamiltonian must be {n}x{n} to match the observable"));
                }
                if *initial_index >= n {
                    return invalid(format!("initial_index {initial_index} out of range"));
                }
            }
        }
        non_negative("times.t_max", self.times.t_max)?;
        if self.times.samples == 0 {
            return invalid("time grid is empty (times.samples = 0)".into());
        }
        if let Some(g) = &self.grid {
            XGrid::new(g.lo, g.hi, g.bins)?;
        }
        positive("volterra.step", self.volterra.step)?;
        if self.montecarlo.n_traj == 0 {
            return invalid("montecarlo.n_traj must be >= 1".into());
        }
        if self.montecarlo.workers == Some(0) {
            return invalid("montecarlo.workers must be >= 1".into());
        }
        if let Some(dt) = self.lindblad.dt {
            positive("lindblad.dt", dt)?;
        }
        positive("thresholds.ks", self.thresholds.ks)?;
        positive("thresholds.sigma", self.thresholds.sigma)?;
        positive("thresholds.first_moment", self.thresholds.first_moment)?;
        Ok(())
    }

    /// Output times `t_max * i / (samples - 1)`.
    pub fn time_points(&self) -> Vec<f64> {
        let TimeSpec { t_max, samples } = self.times;
        if samples == 1 {
            return vec![t_max];
        }
        (0..samples).map(|i| t_max * i as f64 / (samples - 1) as f64).collect()
    }

    pub fn rate(&self) -> f64 {
        match &self.model {
            ModelSpec::Qubit { rate, .. } | ModelSpec::Hopping { rate, .. } | ModelSpec::CustomMatrix { rate, .. } => {
                *rate
            }
        }
    }

    pub fn qubit_params(&self) -> Option<QubitParams> {
        match self.model {
            ModelSpec::Qubit { omega, rate } => QubitParams::new(omega, rate).ok(),
            _ => None,
        }
    }

    pub fn hopping_params(&self) -> Option<HoppingParams> {
        match self.model {
            ModelSpec::Hopping { omega, rate, .. } => HoppingParams::new(omega, rate).ok(),
            _ => None,
        }
    }

    /// Ring size used for finite-dimensional hopping routes.
    pub fn ring_sites(&self) -> Option<usize> {
        match self.model {
            ModelSpec::Hopping { omega, rate, sites } => {
                Some(sites.unwrap_or_else(|| HoppingParams { omega, rate }.ring_sites(self.times.t_max)))
            }
            _ => None,
        }
    }

    /// The finite system simulated by the sampler and the Lindblad integrator.
    pub fn system(&self) -> Result<MonitoredSystem> {
        match &self.model {
            ModelSpec::Qubit { omega, rate } => MonitoredSystem::qubit(*omega, *rate),
            ModelSpec::Hopping { omega, rate, .. } => {
                MonitoredSystem::hopping_ring(self.ring_sites().unwrap_or(3), *omega, *rate)
            }
            ModelSpec::CustomMatrix { hamiltonian_re, hamiltonian_im, observable, rate, initial_index } => {
                let n = observable.len();
                let h = DMatrix::from_fn(n, n, |i, j| {
                    let im = hamiltonian_im.as_ref().map_or(0.0, |m| m[i][j]);
                    Complex64::new(hamiltonian_re[i][j], im)
                });
                MonitoredSystem::new(h, observable.clone(), *rate, *initial_index)
            }
        }
    }

    /// The configured grid, or a default: `[-1, 1]` with 400 bins for the
    /// qubit, integer nodes out to the light cone for hopping, the observable
    /// range with 400 bins otherwise.
    pub fn x_grid(&self) -> Result<XGrid> {
        if let Some(g) = &self.grid {
            return XGrid::new(g.lo, g.hi, g.bins);
        }
        match &self.model {
            ModelSpec::Qubit { .. } => XGrid::new(-1.0, 1.0, 400),
            ModelSpec::Hopping { omega, rate, .. } => {
                let mut j = HoppingParams { omega: *omega, rate: *rate }.j_max(self.times.t_max);
                if let Some(n) = self.ring_sites() {
                    j = j.min(n / 2);
                }
                XGrid::new(-(j as f64), j as f64, 2 * j)
            }
            ModelSpec::CustomMatrix { observable, .. } => {
                let lo = observable.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = observable.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                if hi > lo {
                    XGrid::new(lo, hi, 400)
                } else {
                    XGrid::new(lo - 0.5, lo + 0.5, 2)
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_identical() {
        let mut c = RunConfig::hopping(1.0, 0.5, 4.0, 5);
        c.montecarlo.workers = Some(3);
        c.grid = Some(GridSpec { lo: -10.0, hi: 10.0, bins: 20 });
        let text = c.to_json().unwrap();
        let back = RunConfig::from_json(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_json().unwrap(), text);
        assert_eq!(back.hash(), c.hash());
        assert_eq!(c.hash().len(), 64);
        let mut moved = c.clone();
        moved.montecarlo.workers = Some(16);
        moved.output.dir = "elsewhere".into();
        assert_eq!(moved.hash(), c.hash());
        moved.montecarlo.base_seed += 1;
        assert_ne!(moved.hash(), c.hash());
    }

    #[test]
    fn minimal_json_fills_defaults() {
        let c = RunConfig::from_json(
            r#"{"schema_version":1,"model":{"kind":"qubit","omega":1,"rate":0.2},"times":{"t_max":5,"samples":6}}"#,
        )
        .unwrap();
        assert_eq!(c.volterra, VolterraSpec::default());
        assert_eq!(c.time_points(), vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(c.x_grid().unwrap().nodes(), 401);
    }

    #[test]
    fn validation_rejects_bad_fields() {
        let mut c = RunConfig::qubit(1.0, 0.2, 5.0, 0);
        assert!(matches!(c.validate(), Err(Error::InvalidInput(_))));
        c.times.samples = 1;
        c.validate().unwrap();
        c.model = ModelSpec::Qubit { omega: -1.0, rate: 0.2 };
        assert!(c.validate().is_err());
        let mut c = RunConfig::qubit(1.0, 0.2, 5.0, 2);
        c.schema_version = 2;
        assert!(c.validate().is_err());
        let unknown = r#"{"schema_version":1,"model":{"kind":"qubit","omega":1,"rate":0.2},"times":{"t_max":1,"samples":1,"x":0}}"#;
        assert!(RunConfig::from_json(unknown).is_err());
    }

    #[test]
    fn custom_matrix_builds_system() {
        let c = RunConfig {
            model: ModelSpec::CustomMatrix {
                hamiltonian_re: vec![vec![0.0, -0.5], vec![-0.5, 0.0]],
                hamiltonian_im: None,
                observable: vec![1.0, -1.0],
                rate: 0.3,
                initial_index: 0,
            },
            ..RunConfig::qubit(1.0, 0.3, 1.0, 2)
        };
        c.validate().unwrap();
        let sys = c.system().unwrap();
        let q = MonitoredSystem::qubit(1.0, 0.3).unwrap();
        assert_eq!(sys.hamiltonian(), q.hamiltonian());
        assert_eq!(c.x_grid().unwrap(), XGrid::new(-1.0, 1.0, 400).unwrap());
    }

    #[test]
    fn hopping_defaults_follow_light_cone() {
        let c = RunConfig::hopping(1.0, 1.0, 10.0, 2);
        assert_eq!(c.ring_sites(), Some(81));
        let g = c.x_grid().unwrap();
        assert_eq!(g.spacing(), 1.0);
        assert_eq!(c.system().unwrap().dim(), 81);
    }
}
