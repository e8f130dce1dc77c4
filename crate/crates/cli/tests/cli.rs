use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ising-lab")).args(args).env_remove("ISING_LAB_THREADS").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn temp_config(name: &str, body: &str) -> String {
    let path = std::env::temp_dir().join(format!("ising-lab-{}-{name}.cfg", std::process::id()));
    std::fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn csv_output_starts_with_the_fixed_header() {
    let o = run(&["exact", "--lattice", "2x2", "--beta", "0.5"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.lines().next(), Some("experiment,params,observable,value,stderr,provenance,seconds"));
}

#[test]
fn exact_records_have_an_empty_stderr() {
    let o = run(&["exact", "--lattice", "2x2", "--beta", "0.5"]);
    let text = stdout(&o);
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let row = rdr.records().next().unwrap().unwrap();
    assert_eq!(&row[4], "");
    // Z = 2^4 (cosh^4 b + sinh^4 b) on the four-cycle
    let (c, s) = (0.5f64.cosh(), 0.5f64.sinh());
    let expected = (16.0 * (c.powi(4) + s.powi(4))).ln();
    assert!((row[3].parse::<f64>().unwrap() - expected).abs() < 1e-12);
}

#[test]
fn flags_override_the_config_file() {
    let file = temp_config("precedence", "beta=0.2\nlattice=2x2\n");
    let o = run(&["exact", "--config", &file, "--beta", "0.3", "--dry-run"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.lines().any(|l| l == "beta=0.3"));
    assert!(text.lines().any(|l| l == "lattice=2x2"));
}

#[test]
fn environment_threads_apply_below_file_and_flags() {
    let bin = env!("CARGO_BIN_EXE_ising-lab");
    let o = Command::new(bin).args(["exact", "--dry-run"]).env("ISING_LAB_THREADS", "2").output().unwrap();
    assert!(stdout(&o).lines().any(|l| l == "threads=2"));
    let o = Command::new(bin).args(["exact", "--dry-run", "--threads", "3"]).env("ISING_LAB_THREADS", "2").output().unwrap();
    assert!(stdout(&o).lines().any(|l| l == "threads=3"));
}

#[test]
fn dry_run_output_is_a_loadable_config() {
    let first = stdout(&run(&["mc", "--beta", "0.35", "--L", "6", "--dry-run"]));
    let file = temp_config("roundtrip", &first);
    let second = stdout(&run(&["mc", "--config", &file, "--dry-run"]));
    assert_eq!(first, second);
}

#[test]
fn unknown_keys_and_bad_values_exit_with_one() {
    let file = temp_config("unknown", "nope=1\n");
    assert_eq!(run(&["exact", "--config", &file]).status.code(), Some(1));
    assert_eq!(run(&["exact", "--beta", "-1"]).status.code(), Some(1));
    assert_eq!(run(&["mc", "--bogus", "3"]).status.code(), Some(1));
    assert_eq!(run(&["mc", "--sweeps", "10", "--burnin", "10"]).status.code(), Some(1));
}

#[test]
fn too_few_samples_exit_with_two() {
    let o = run(&["mc", "--L", "4", "--sweeps", "12", "--burnin", "10", "--chains", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("insufficient samples"));
}

#[test]
fn json_output_parses_as_an_array_of_records() {
    let o = run(&["mc", "--L", "4", "--beta", "0.3", "--sweeps", "60", "--burnin", "10", "--format", "json"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let row = &v.as_array().unwrap()[0];
    assert_eq!(row["experiment"], "mc");
    assert!(row["stderr"].as_f64().unwrap() > 0.0);
    assert!(row["seconds"].is_null());
}

#[test]
fn ghs_battery_reports_no_violations() {
    let o = run(&["check", "--kind", "ghs", "--trials", "10", "--format", "csv"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let line = text.lines().find(|l| l.contains("ghs.violations")).unwrap();
    assert!(line.contains(",0.0000000000000000e0,"));
}

#[test]
fn seeded_runs_are_reproducible() {
    let args = ["mc", "--L", "6", "--beta", "0.4", "--sweeps", "100", "--burnin", "20", "--seed", "7"];
    assert_eq!(stdout(&run(&args)), stdout(&run(&args)));
}
