use std::fs;
use std::path::{Path, PathBuf};

use tempfile::TempDir;
use trajdist::cli::{compare_distributions, main_from};
use trajdist::config::{GridSpec, ModelSpec, RunConfig};
use trajdist::models::qubit::{qubit_distribution, QubitParams};
use trajdist::{MixedDistribution, XGrid};

fn write_config(dir: &Path, name: &str, config: &RunConfig) -> PathBuf {
    let path = dir.join(name);
    config.save(&path).unwrap();
    path
}

fn run(args: &[&str]) -> i32 {
    main_from(std::iter::once("trajdist").chain(args.iter().copied()))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_dist(path: &Path) -> MixedDistribution {
    MixedDistribution::read_csv(fs::File::open(path).unwrap(), 0.0).unwrap()
}

#[test]
fn config_round_trips_through_disk() {
    let dir = TempDir::new().unwrap();
    let config = RunConfig::hopping(1.0, 0.3, 2.0, 3);
    let path = write_config(dir.path(), "c.json", &config);
    let back = RunConfig::load(&path).unwrap();
    assert_eq!(back, config);
    back.save(&dir.path().join("d.json")).unwrap();
    assert_eq!(fs::read(&path).unwrap(), fs::read(dir.path().join("d.json")).unwrap());
}

#[test]
fn montecarlo_replays_and_ignores_workers() {
    let dir = TempDir::new().unwrap();
    let mut config = RunConfig::qubit(1.0, 1.0, 2.0, 2);
    config.montecarlo.n_traj = 3000;
    config.montecarlo.dump = 5;
    let path = write_config(dir.path(), "c.json", &config);
    let outs: Vec<PathBuf> = ["a", "b", "c"].iter().map(|n| dir.path().join(n)).collect();
    assert_eq!(run(&["montecarlo", "--config", s(&path), "--out", s(&outs[0]), "--workers", "1"]), 0);
    assert_eq!(run(&["montecarlo", "--config", s(&path), "--out", s(&outs[1]), "--workers", "4"]), 0);
    assert_eq!(run(&["montecarlo", "--config", s(&path), "--out", s(&outs[2]), "--seed", "99"]), 0);
    for name in ["montecarlo_000.csv", "montecarlo_001.csv", "montecarlo_moments.json", "trajectories.ndjson"] {
        assert_eq!(fs::read(outs[0].join(name)).unwrap(), fs::read(outs[1].join(name)).unwrap(), "{name}");
    }
    assert_ne!(
        fs::read(outs[0].join("montecarlo_001.csv")).unwrap(),
        fs::read(outs[2].join("montecarlo_001.csv")).unwrap()
    );
    let lines = fs::read_to_string(outs[0].join("trajectories.ndjson")).unwrap();
    assert_eq!(lines.lines().count(), 5);
    let first: serde_json::Value = serde_json::from_str(lines.lines().next().unwrap()).unwrap();
    assert!(first["jump_times"].is_array() && first["final_value"].is_number());
}

#[test]
fn unmonitored_qubit_histogram_is_one_atom() {
    let dir = TempDir::new().unwrap();
    let mut config = RunConfig::qubit(1.3, 0.0, 2.0, 1);
    config.montecarlo.n_traj = 200;
    config.output.dir = dir.path().join("out");
    let path = write_config(dir.path(), "c.json", &config);
    assert_eq!(run(&["montecarlo", "--config", s(&path)]), 0);
    let d = read_dist(&config.output.dir.join("montecarlo_000.csv"));
    let grid = XGrid::new(-1.0, 1.0, 400).unwrap();
    let masses = d.node_masses(&grid).unwrap();
    let hit = grid.nearest((1.3f64 * 2.0).cos());
    assert_eq!(masses[hit], 1.0);
    assert_eq!(masses.iter().sum::<f64>(), 1.0);
}

#[test]
fn analytic_qubit_matches_closed_form() {
    let dir = TempDir::new().unwrap();
    let mut config = RunConfig::qubit(1.0, 0.2, 5.0, 1);
    config.output.dir = dir.path().join("out");
    let path = write_config(dir.path(), "c.json", &config);
    assert_eq!(run(&["analytic", "--config", s(&path)]), 0);
    let got = read_dist(&config.output.dir.join("analytic_000.csv"));
    let grid = XGrid::new(-1.0, 1.0, 400).unwrap();
    let want = qubit_distribution(&QubitParams::new(1.0, 0.2).unwrap(), 5.0, &grid);
    let cmp = compare_distributions(&want, &got).unwrap();
    assert!(cmp.ks < 1e-3, "ks {}", cmp.ks);
    assert!(cmp.moment_deltas[1].abs() < 5e-3);
    let moments: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(config.output.dir.join("analytic_moments.json")).unwrap()).unwrap();
    assert_eq!(moments["config_hash"], config.hash());
    assert!((moments["records"][0]["mass_check"].as_f64().unwrap() - 1.0).abs() < 1e-6);
}

#[test]
fn analytic_json_format_parses() {
    let dir = TempDir::new().unwrap();
    let mut config = RunConfig::hopping(1.0, 1.0, 2.0, 2);
    config.output.format = trajdist::config::Format::Json;
    config.output.dir = dir.path().join("out");
    let path = write_config(dir.path(), "c.json", &config);
    assert_eq!(run(&["analytic", "--config", s(&path)]), 0);
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(config.output.dir.join("analytic_001.json")).unwrap()).unwrap();
    let rows = v["rows"].as_array().unwrap();
    let mass: f64 = rows.iter().map(|r| r["weight"].as_f64().unwrap()).sum();
    assert!((mass - 1.0).abs() < 1e-6);
    assert!(rows.iter().all(|r| r["atom_flag"] == 1 && r["x"].as_f64().unwrap().fract() == 0.0));
}

#[test]
fn validation_errors_exit_with_two() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("c.json");
    let text = r#"{"schema_version":1,"model":{"kind":"qubit","omega":1,"rate":0.2},"times":{"t_max":5,"samples":0}}"#;
    fs::write(&path, text).unwrap();
    assert_eq!(run(&["analytic", "--config", s(&path)]), 2);
    assert_eq!(run(&["analytic", "--config", s(&dir.path().join("missing.json"))]), 2);
    assert_eq!(run(&["bogus"]), 2);
}

#[test]
fn non_commuting_model_trips_numerical_guard() {
    let dir = TempDir::new().unwrap();
    let mut config = RunConfig::qubit(1.0, 0.5, 1.0, 1);
    config.model = ModelSpec::CustomMatrix {
        hamiltonian_re: vec![vec![0.0, 1.0, 0.3], vec![1.0, 0.5, 0.7], vec![0.3, 0.7, -0.4]],
        hamiltonian_im: None,
        observable: vec![-1.0, 0.0, 1.0],
        rate: 0.5,
        initial_index: 0,
    };
    config.output.dir = dir.path().join("out");
    let path = write_config(dir.path(), "c.json", &config);
    assert_eq!(run(&["analytic", "--config", s(&path)]), 3);
    // the sampler and the integrator do not need a common eigenbasis
    assert_eq!(run(&["lindblad", "--config", s(&path)]), 0);
}

#[test]
fn compare_self_and_corrupted_grid() {
    let dir = TempDir::new().unwrap();
    let mut config = RunConfig::qubit(1.0, 0.5, 1.0, 1);
    config.grid = Some(GridSpec { lo: -1.0, hi: 1.0, bins: 50 });
    config.output.dir = dir.path().join("out");
    let path = write_config(dir.path(), "c.json", &config);
    assert_eq!(run(&["analytic", "--config", s(&path)]), 0);
    let file = config.output.dir.join("analytic_000.csv");
    let report_dir = dir.path().join("report");
    assert_eq!(run(&["compare", "--reference", s(&file), "--candidate", s(&file), "--out", s(&report_dir)]), 0);
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(report_dir.join("compare_files.json")).unwrap()).unwrap();
    assert_eq!(v["ks"], 0.0);
    assert!(v["moment_deltas"].as_array().unwrap().iter().all(|d| d == 0.0));

    let text = fs::read_to_string(&file).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    // move one density node off the uniform grid
    let rest = lines[5].split_once(',').unwrap().1.to_string();
    lines[5] = format!("0.123,{rest}");
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, lines.join("\n") + "\n").unwrap();
    assert_eq!(run(&["compare", "--reference", s(&file), "--candidate", s(&bad), "--out", s(&report_dir)]), 2);
}

#[test]
fn compare_config_reports_all_engines() {
    let dir = TempDir::new().unwrap();
    let mut config = RunConfig::qubit(1.0, 1.0, 2.0, 3);
    config.montecarlo.n_traj = 20_000;
    config.output.dir = dir.path().join("out");
    let path = write_config(dir.path(), "c.json", &config);
    assert_eq!(run(&["compare", "--config", s(&path)]), 0);
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(config.output.dir.join("compare.json")).unwrap()).unwrap();
    assert_eq!(v["passed"], true);
    assert_eq!(v["points"].as_array().unwrap().len(), 3);
    for p in v["points"].as_array().unwrap() {
        assert!(p["lindblad_residual"].as_f64().unwrap() < 1e-4);
    }
}

#[test]
fn lindblad_outputs() {
    let dir = TempDir::new().unwrap();
    // overdamped qubit: m_z decays monotonically
    let mut config = RunConfig::qubit(1.0, 5.0, 4.0, 41);
    config.output.dir = dir.path().join("q");
    let path = write_config(dir.path(), "q.json", &config);
    assert_eq!(run(&["lindblad", "--config", s(&path)]), 0);
    let mut r = csv::Reader::from_path(config.output.dir.join("lindblad.csv")).unwrap();
    assert_eq!(r.headers().unwrap(), vec!["t", "m_x", "m_y", "m_z"]);
    let mz: Vec<f64> = r.records().map(|rec| rec.unwrap()[3].parse().unwrap()).collect();
    assert_eq!(mz.len(), 41);
    assert!(mz.windows(2).all(|w| w[1] < w[0]));

    // hopping densities stay normalized; a zero horizon gives one snapshot
    let mut config = RunConfig::hopping(1.0, 1.0, 1.0, 3);
    config.output.dir = dir.path().join("h");
    let path = write_config(dir.path(), "h.json", &config);
    assert_eq!(run(&["lindblad", "--config", s(&path)]), 0);
    let mut r = csv::Reader::from_path(config.output.dir.join("lindblad.csv")).unwrap();
    let rows: Vec<[f64; 3]> = r
        .records()
        .map(|rec| {
            let rec = rec.unwrap();
            [rec[0].parse().unwrap(), rec[1].parse().unwrap(), rec[2].parse().unwrap()]
        })
        .collect();
    for t in [0.0, 0.5, 1.0] {
        let total: f64 = rows.iter().filter(|r| r[0] == t).map(|r| r[2]).sum();
        assert!((total - 1.0).abs() < 1e-6);
    }

    let mut config = RunConfig::qubit(1.0, 1.0, 0.0, 1);
    config.output.dir = dir.path().join("z");
    let path = write_config(dir.path(), "z.json", &config);
    assert_eq!(run(&["lindblad", "--config", s(&path)]), 0);
    let text = fs::read_to_string(config.output.dir.join("lindblad.csv")).unwrap();
    assert_eq!(text.lines().count(), 2);
}
