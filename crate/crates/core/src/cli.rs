//! Subcommands of the `trajdist` binary. Each `cmd_*` writes its files into
//! `config.output.dir` and returns their paths.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::analytic::ExactEngine;
use crate::config::{Format, ModelSpec, RunConfig};
use crate::distribution::{fmt, MixedDistribution, XGrid};
use crate::error::{Error, Result};
use crate::lindblad::{evolve_from, DensityMatrix};
use crate::models::hopping::{hopping_distribution, hopping_qm_moment};
use crate::montecarlo::{distribution_distance, dump_trajectories, run_ensemble, EnsembleStats, Estimate};

#[derive(Debug, Parser)]
#[command(name = "trajdist", version, about = "Measurement-outcome distributions of monitored quantum systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact distributions and moments from the spectral/Volterra engine.
    Analytic(CommonArgs),
    /// Trajectory ensembles.
    Montecarlo(CommonArgs),
    /// Averaged-state integration.
    Lindblad(CommonArgs),
    /// Cross-check engines for a config, or diff two distribution files.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Default, Args)]
pub struct Overrides {
    /// Output directory (overrides the config).
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Monte Carlo base seed (overrides the config).
    #[arg(long, value_name = "U64")]
    pub seed: Option<u64>,
    /// Worker threads for the sampler and the Volterra solves.
    #[arg(long, value_name = "K", env = "TRAJDIST_WORKERS")]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long, value_name = "PATH", required_unless_present = "reference")]
    pub config: Option<PathBuf>,
    /// Distribution CSV treated as exact.
    #[arg(long, value_name = "PATH", requires = "candidate", conflicts_with = "config")]
    pub reference: Option<PathBuf>,
    #[arg(long, value_name = "PATH", requires = "reference")]
    pub candidate: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: Overrides,
}

/// 0 success, 1 comparison outside thresholds, 2 invalid input, 3 numerical guard.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_numerical() {
        3
    } else {
        2
    }
}

/// Parses `args`, runs the subcommand and returns the process exit code.
pub fn main_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(outcome) => {
            for path in &outcome.files {
                println!("{}", path.display());
            }
            if outcome.passed {
                0
            } else {
                eprintln!("comparison outside thresholds");
                1
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub passed: bool,
}

fn load(path: &Path, overrides: &Overrides) -> Result<RunConfig> {
    let mut config = RunConfig::load(path)?;
    if let Some(out) = &overrides.out {
        config.output.dir = out.clone();
    }
    if let Some(seed) = overrides.seed {
        config.montecarlo.base_seed = seed;
    }
    if let Some(w) = overrides.workers {
        config.montecarlo.workers = Some(w);
    }
    config.validate()?;
    Ok(config)
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    let done = |files| Ok(Outcome { files, passed: true });
    match &cli.command {
        Command::Analytic(a) => done(cmd_analytic(&load(&a.config, &a.overrides)?)?),
        Command::Montecarlo(a) => done(cmd_montecarlo(&load(&a.config, &a.overrides)?)?),
        Command::Lindblad(a) => done(cmd_lindblad(&load(&a.config, &a.overrides)?)?),
        Command::Compare(a) => match (&a.reference, &a.candidate, &a.config) {
            (Some(r), Some(c), _) => {
                let report = compare_files(r, c)?;
                let dir = a.overrides.out.clone().unwrap_or_else(|| PathBuf::from("."));
                fs::create_dir_all(&dir)?;
                let path = dir.join("compare_files.json");
                write_json(&path, &report)?;
                Ok(Outcome { files: vec![path], passed: report.within_tolerance })
            }
            (_, _, Some(path)) => {
                let config = load(path, &a.overrides)?;
                let report = cmd_compare(&config)?;
                Ok(Outcome { files: vec![config.output.dir.join("compare.json")], passed: report.passed })
            }
            _ => Err(Error::InvalidInput("compare needs --config or --reference with --candidate".into())),
        },
    }
}

fn workers(config: &RunConfig) -> usize {
    config.montecarlo.workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct DistributionRow {
    x: f64,
    density: f64,
    atom_flag: u8,
    weight: f64,
}

#[derive(Serialize)]
struct DistributionJson {
    t: f64,
    rows: Vec<DistributionRow>,
}

fn write_distribution(dir: &Path, stem: &str, dist: &MixedDistribution, format: Format) -> Result<PathBuf> {
    match format {
        Format::Csv => {
            let path = dir.join(format!("{stem}.csv"));
            let mut w = BufWriter::new(File::create(&path)?);
            dist.write_csv(&mut w)?;
            w.flush()?;
            Ok(path)
        }
        Format::Json => {
            let path = dir.join(format!("{stem}.json"));
            let mut rows = Vec::new();
            if let Some(d) = &dist.density {
                for (i, (v, m)) in d.values.iter().zip(d.masses()).enumerate() {
                    rows.push(DistributionRow { x: d.grid.node(i), density: *v, atom_flag: 0, weight: m });
                }
            }
            rows.extend(dist.atoms.iter().map(|a| DistributionRow {
                x: a.location,
                density: 0.0,
                atom_flag: 1,
                weight: a.weight,
            }));
            write_json(&path, &DistributionJson { t: dist.time, rows })?;
            Ok(path)
        }
    }
}

/// Writes a numeric table as CSV (17 significant digits) or as a JSON array of objects.
fn write_table(dir: &Path, stem: &str, columns: &[&str], rows: &[Vec<f64>], format: Format) -> Result<PathBuf> {
    match format {
        Format::Csv => {
            let path = dir.join(format!("{stem}.csv"));
            let mut w = csv::Writer::from_path(&path)?;
            w.write_record(columns)?;
            for row in rows {
                w.write_record(row.iter().map(|v| fmt(*v)))?;
            }
            w.flush()?;
            Ok(path)
        }
        Format::Json => {
            let path = dir.join(format!("{stem}.json"));
            let objects: Vec<serde_json::Map<String, serde_json::Value>> = rows
                .iter()
                .map(|row| columns.iter().zip(row).map(|(c, v)| (c.to_string(), serde_json::json!(v))).collect())
                .collect();
            write_json(&path, &objects)?;
            Ok(path)
        }
    }
}

/// Exact distributions at every output time.
pub struct AnalyticRun {
    pub times: Vec<f64>,
    pub grid: XGrid,
    pub distributions: Vec<MixedDistribution>,
    pub first_moments: Vec<f64>,
}

/// Qubit and custom models (and hopping with explicit `sites`) go through
/// the generic engine; hopping without `sites` uses the infinite chain.
pub fn analytic_run(config: &RunConfig) -> Result<AnalyticRun> {
    let times = config.time_points();
    let grid = config.x_grid()?;
    if let (ModelSpec::Hopping { sites: None, .. }, Some(p)) = (&config.model, config.hopping_params()) {
        let t_max = config.times.t_max;
        let (j_max, k_points) = (p.j_max(t_max), p.k_points(t_max));
        let distributions =
            times.iter().map(|&t| hopping_distribution(&p, t, j_max, k_points)).collect::<Result<Vec<_>>>()?;
        let first_moments = times.iter().map(|&t| hopping_qm_moment(&p, 1, t)).collect();
        return Ok(AnalyticRun { times, grid, distributions, first_moments });
    }
    let system = config.system()?;
    let h = config.volterra.step;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers(config))
        .build()
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    let engine =
        pool.install(|| ExactEngine::new(&system, config.times.t_max.max(h), h, config.volterra.extrapolate))?;
    let distributions = times.iter().map(|&t| engine.distribution(t, &grid)).collect::<Result<Vec<_>>>()?;
    let first_moments = times.iter().map(|&t| engine.first_moment(t)).collect::<Result<Vec<_>>>()?;
    Ok(AnalyticRun { times, grid, distributions, first_moments })
}

#[derive(Serialize)]
struct AnalyticMoments {
    t: f64,
    m1: f64,
    m2: f64,
    m4: f64,
    mass_check: f64,
}

#[derive(Serialize)]
struct Report<T: Serialize> {
    config_hash: String,
    records: Vec<T>,
}

/// Distribution files `analytic_NNN.{csv,json}` and `analytic_moments.json`.
pub fn cmd_analytic(config: &RunConfig) -> Result<Vec<PathBuf>> {
    let run = analytic_run(config)?;
    let dir = &config.output.dir;
    fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    let mut records = Vec::new();
    for (i, dist) in run.distributions.iter().enumerate() {
        files.push(write_distribution(dir, &format!("analytic_{i:03}"), dist, config.output.format)?);
        records.push(AnalyticMoments {
            t: dist.time,
            m1: dist.moment(1),
            m2: dist.moment(2),
            m4: dist.moment(4),
            mass_check: dist.total_mass(),
        });
    }
    let path = dir.join("analytic_moments.json");
    write_json(&path, &Report { config_hash: config.hash(), records })?;
    files.push(path);
    Ok(files)
}

/// One ensemble per output time, all from the same base seed.
pub fn montecarlo_run(config: &RunConfig) -> Result<Vec<EnsembleStats>> {
    let system = config.system()?;
    let grid = config.x_grid()?;
    let mc = &config.montecarlo;
    config
        .time_points()
        .iter()
        .map(|&t| run_ensemble(&system, t, mc.n_traj, mc.base_seed, workers(config), &grid))
        .collect()
}

#[derive(Serialize)]
struct MonteCarloMoments {
    t: f64,
    n_traj: usize,
    moments: [Estimate; 4],
    no_click_fraction: f64,
    no_click_expected: f64,
    no_click_sigma: f64,
    mean_jumps: f64,
    jump_variance: f64,
}

/// Histogram files `montecarlo_NNN.{csv,json}`, `montecarlo_moments.json`
/// and, with `dump > 0`, `trajectories.ndjson` at the last time.
pub fn cmd_montecarlo(config: &RunConfig) -> Result<Vec<PathBuf>> {
    let runs = montecarlo_run(config)?;
    let dir = &config.output.dir;
    fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    let mut records = Vec::new();
    for (i, stats) in runs.iter().enumerate() {
        files.push(write_distribution(
            dir,
            &format!("montecarlo_{i:03}"),
            &stats.to_distribution(),
            config.output.format,
        )?);
        let p = (-config.rate() * stats.time).exp();
        records.push(MonteCarloMoments {
            t: stats.time,
            n_traj: stats.n_traj,
            moments: stats.moments,
            no_click_fraction: stats.no_click_fraction,
            no_click_expected: p,
            no_click_sigma: stats.no_click_sigma(p),
            mean_jumps: stats.mean_jumps,
            jump_variance: stats.jump_variance,
        });
    }
    let path = dir.join("montecarlo_moments.json");
    write_json(&path, &Report { config_hash: config.hash(), records })?;
    files.push(path);
    if config.montecarlo.dump > 0 {
        let path = dir.join("trajectories.ndjson");
        let mut w = BufWriter::new(File::create(&path)?);
        dump_trajectories(
            &config.system()?,
            config.times.t_max,
            config.montecarlo.dump,
            config.montecarlo.base_seed,
            &mut w,
        )?;
        w.flush()?;
        files.push(path);
    }
    Ok(files)
}

/// `rho(t)` at every output time.
pub fn lindblad_run(config: &RunConfig) -> Result<Vec<DensityMatrix>> {
    let system = config.system()?;
    let rho0 = DensityMatrix::basis(system.dim(), system.initial_index());
    evolve_from(&system, &rho0, &config.time_points(), config.lindblad.dt)
}

/// `lindblad.{csv,json}`: Bloch components for the qubit, `(t, j, n)` rows
/// for hopping, `(t, mean)` otherwise.
pub fn cmd_lindblad(config: &RunConfig) -> Result<Vec<PathBuf>> {
    let system = config.system()?;
    let states = lindblad_run(config)?;
    let times = config.time_points();
    let dir = &config.output.dir;
    fs::create_dir_all(dir)?;
    let (columns, rows): (Vec<&str>, Vec<Vec<f64>>) = match &config.model {
        ModelSpec::Qubit { .. } => (
            vec!["t", "m_x", "m_y", "m_z"],
            times
                .iter()
                .zip(&states)
                .map(|(t, rho)| {
                    let c = rho.get(0, 1);
                    vec![*t, 2.0 * c.re, -2.0 * c.im, rho.get(0, 0).re - rho.get(1, 1).re]
                })
                .collect(),
        ),
        ModelSpec::Hopping { .. } => {
            let antipode = (system.initial_index() + system.dim() / 2) % system.dim();
            let mut rows = Vec::new();
            for (t, rho) in times.iter().zip(&states) {
                let n = rho.diagonal();
                if n[antipode] > crate::lindblad::LEAK_TOL {
                    eprintln!(
                        "warning: population {:e} at the ring antipode at t = {t}; enlarge the ring",
                        n[antipode]
                    );
                }
                rows.extend(system.observable().iter().zip(n).map(|(j, v)| vec![*t, *j, v]));
            }
            (vec!["t", "j", "n"], rows)
        }
        ModelSpec::CustomMatrix { .. } => (
            vec!["t", "mean"],
            times.iter().zip(&states).map(|(t, rho)| vec![*t, rho.expectation(system.observable())]).collect(),
        ),
    };
    Ok(vec![write_table(dir, "lindblad", &columns, &rows, config.output.format)?])
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparePoint {
    pub t: f64,
    pub ks: f64,
    /// `(MC - exact) / standard error` for raw moments 1..=4.
    pub moment_sigma: [f64; 4],
    pub no_click_sigma: f64,
    pub first_moment_analytic: f64,
    pub first_moment_lindblad: f64,
    pub lindblad_residual: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    pub config_hash: String,
    pub thresholds: crate::config::Thresholds,
    pub points: Vec<ComparePoint>,
    pub passed: bool,
}

fn sigma_units(delta: f64, se: f64) -> f64 {
    if delta.abs() < 1e-12 {
        0.0
    } else if se > 0.0 {
        delta / se
    } else {
        f64::INFINITY.copysign(delta)
    }
}

/// Runs all three engines and writes `compare.json`.
pub fn cmd_compare(config: &RunConfig) -> Result<CompareReport> {
    let exact = analytic_run(config)?;
    let ensembles = montecarlo_run(config)?;
    let states = lindblad_run(config)?;
    let system = config.system()?;
    let th = config.thresholds.clone();
    let points: Vec<ComparePoint> = exact
        .distributions
        .iter()
        .zip(&ensembles)
        .zip(&states)
        .zip(&exact.first_moments)
        .map(|(((dist, stats), rho), m1)| -> Result<ComparePoint> {
            let ks = distribution_distance(stats, dist)?;
            let moment_sigma = [1u32, 2, 3, 4].map(|k| {
                let e = stats.moment(k);
                sigma_units(e.value - dist.moment(k), e.std_error)
            });
            let p = (-config.rate() * stats.time).exp();
            let no_click_sigma = sigma_units(stats.no_click_fraction - p, stats.no_click_sigma(p));
            let lindblad = rho.expectation(system.observable());
            let residual = (lindblad - m1).abs();
            let passed = ks < th.ks
                && moment_sigma.iter().all(|s| s.abs() < th.sigma)
                && no_click_sigma.abs() < th.sigma
                && residual < th.first_moment;
            Ok(ComparePoint {
                t: stats.time,
                ks,
                moment_sigma,
                no_click_sigma,
                first_moment_analytic: *m1,
                first_moment_lindblad: lindblad,
                lindblad_residual: residual,
                passed,
            })
        })
        .collect::<Result<_>>()?;
    let report =
        CompareReport { config_hash: config.hash(), thresholds: th, passed: points.iter().all(|p| p.passed), points };
    fs::create_dir_all(&config.output.dir)?;
    write_json(&config.output.dir.join("compare.json"), &report)?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct FileComparison {
    pub ks: f64,
    /// Candidate minus reference, raw moments 1..=4.
    pub moment_deltas: [f64; 4],
    pub total_mass: [f64; 2],
    pub within_tolerance: bool,
}

/// KS distance over the merged support of two mixed distributions. Density
/// parts must share the same grid.
pub fn compare_distributions(reference: &MixedDistribution, candidate: &MixedDistribution) -> Result<FileComparison> {
    let ks = match (&reference.density, &candidate.density) {
        (Some(a), Some(b)) => {
            a.grid.check_same(&b.grid)?;
            crate::distribution::ks_distance(&reference.node_masses(&a.grid)?, &candidate.node_masses(&a.grid)?)?
        }
        (None, None) => atom_ks(reference, candidate),
        _ => return Err(Error::GridMismatch("one file has a density part and the other does not".into())),
    };
    let moment_deltas = [1u32, 2, 3, 4].map(|k| candidate.moment(k) - reference.moment(k));
    Ok(FileComparison {
        ks,
        moment_deltas,
        total_mass: [reference.total_mass(), candidate.total_mass()],
        within_tolerance: ks < crate::config::Thresholds::default().ks,
    })
}

fn atom_ks(a: &MixedDistribution, b: &MixedDistribution) -> f64 {
    let mut events: Vec<(f64, f64)> = a.atoms.iter().map(|x| (x.location, x.weight / a.total_mass())).collect();
    events.extend(b.atoms.iter().map(|x| (x.location, -x.weight / b.total_mass())));
    events.sort_by(|x, y| x.0.total_cmp(&y.0));
    let (mut acc, mut d, mut i) = (0.0, 0.0_f64, 0);
    while i < events.len() {
        let x = events[i].0;
        while i < events.len() && events[i].0 == x {
            acc += events[i].1;
            i += 1;
        }
        d = d.max(acc.abs());
    }
    d
}

pub fn compare_files(reference: &Path, candidate: &Path) -> Result<FileComparison> {
    let a = MixedDistribution::read_csv(File::open(reference)?, 0.0)?;
    let b = MixedDistribution::read_csv(File::open(candidate)?, 0.0)?;
    compare_distributions(&a, &b)
}
