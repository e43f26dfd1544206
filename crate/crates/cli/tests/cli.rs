use std::fs;
use std::process::Command;

fn waitdim() -> Command {
    Command::new(env!("CARGO_BIN_EXE_waitdim"))
}

#[test]
fn hit_writes_a_profile_csv() {
    let dir = tempfile::tempdir().unwrap();
    let targets = dir.path().join("targets.txt");
    fs::write(&targets, "# targets\n0.25\n\n0.5\n").unwrap();
    let out = waitdim()
        .args(["hit", "--system", "rotation", "--angle", "golden", "--x", "0", "--n", "100000"])
        .args(["--kmin", "2", "--kmax", "12", "--targets"])
        .arg(&targets)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = String::from_utf8(out.stdout).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("system,x,y,k,tau_or_censored,n_max"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 2 * 11);
    assert!(rows.iter().all(|r| r.starts_with("rotation,") && r.ends_with(",99999")));
    assert!(!csv.contains("CENSORED"));
}

#[test]
fn sequential_and_parallel_agree() {
    let dir = tempfile::tempdir().unwrap();
    let targets = dir.path().join("t.txt");
    fs::write(&targets, "0.1;0.2\n0.7;0.3\n0.5;0.5\n").unwrap();
    let run = |seq: bool| {
        let mut c = waitdim();
        if seq {
            c.arg("--sequential");
        }
        c.args(["hit", "--system", "cat_map", "--x", "0.3;0.6", "--n", "50000", "--kmin", "2", "--kmax", "8"])
            .arg("--targets")
            .arg(&targets)
            .output()
            .unwrap()
    };
    let (a, b) = (run(false), run(true));
    assert!(a.status.success() && b.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn usage_errors_exit_with_two() {
    let out = waitdim().args(["hit", "--no-such-flag"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = waitdim().args(["suite", "--criterion", "11"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_input_exits_with_one() {
    let out = waitdim()
        .args(["simulate", "--system", "rotation", "--x", "0", "--n", "10", "--out", "/dev/null"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn simulate_writes_a_cache() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("orbit.bin");
    let out = waitdim()
        .args(["simulate", "--system", "doubling", "--x", "0.125", "--n", "1000", "--out"])
        .arg(&path)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(fs::metadata(&path).unwrap().len() > 1000);
}
