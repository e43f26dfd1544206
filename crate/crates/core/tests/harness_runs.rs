use std::fs;

use waitdim_core::harness::{run_experiment, ExperimentConfig};
use waitdim_core::{Error, Exec};

fn config(dir: &std::path::Path, body: &str) -> ExperimentConfig {
    let text = format!("{body}\noutput = \"{}\"\n", dir.display());
    ExperimentConfig::parse(&text, "test.cfg").unwrap()
}

const SMALL: &str = r#"
system = "rotation"
angle = "golden"
n = 20000
k_min = 3
k_max = 10
sources = 4
targets = 6
seed = 21
tolerance = 0.2
cover_grid = 8
"#;

#[test]
fn reruns_write_identical_files() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ma = run_experiment(&config(a.path(), SMALL), "a.cfg", Exec::Parallel).unwrap();
    let mb = run_experiment(&config(b.path(), SMALL), "b.cfg", Exec::Sequential).unwrap();
    assert_eq!(ma.files, mb.files);
    assert_eq!(ma.files.len(), 5);
    for name in ma.files.keys() {
        assert_eq!(
            fs::read(a.path().join(name)).unwrap(),
            fs::read(b.path().join(name)).unwrap(),
            "{name}"
        );
    }
    // the output directory is part of the config, so the hashes differ
    assert_ne!(ma.config_hash, mb.config_hash);
    assert!(a.path().join("manifest.json").exists());
}

#[test]
fn short_doubling_orbit_reports_censoring() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        r#"
system = "doubling"
n = 10000
k_min = 4
k_max = 20
sources = 3
targets = 5
seed = 22
tolerance = 0.15
cover_grid = 8
"#,
    );
    run_experiment(&cfg, "censor.cfg", Exec::Parallel).unwrap();
    let csv = fs::read_to_string(dir.path().join("hitting.csv")).unwrap();
    assert!(csv.starts_with("system,x,y,k,tau_or_censored,n_max\n"));
    // 2^20 is far beyond 10^4 steps: the finest scales are censored
    let censored = csv.lines().filter(|l| l.contains(",20,CENSORED,")).count();
    assert!(censored > 0, "{csv}");
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("inequality.json")).unwrap()).unwrap();
    let pairs = report["pairs"].as_array().unwrap();
    assert_eq!(pairs.len(), 15);
    let infinite = pairs
        .iter()
        .filter(|p| p["r"]["estimate"]["infinite"] == serde_json::Value::Bool(true))
        .count();
    assert!(infinite > 0, "{}", serde_json::to_string_pretty(&pairs[0]).unwrap());
}

#[test]
fn bad_config_names_its_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), &SMALL.replace("k_max = 10", "k_max = 2"));
    match run_experiment(&cfg, "broken.cfg", Exec::Sequential) {
        Err(Error::Config { path, .. }) => assert_eq!(path, "broken.cfg"),
        other => panic!("{other:?}"),
    }
    assert!(ExperimentConfig::parse("system = \"doubling\"\nbogus = 1\n", "x.cfg").is_err());
}
