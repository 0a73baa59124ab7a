use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn provisim(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_provisim"))
        .args(args)
        .current_dir(cwd)
        .env_remove("PROVISIM_SERVER")
        .output()
        .expect("spawn provisim")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read(p: impl AsRef<Path>) -> String {
    fs::read_to_string(p).unwrap()
}

const SHORT: &str = "run.steps = 40\n";

#[test]
fn run_writes_trace_metrics_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("s.conf"), SHORT).unwrap();
    let o = provisim(&["run", "s.conf", "--out", "out"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let out = dir.path().join("out");
    let metrics = read(out.join("metrics.csv"));
    let lines: Vec<_> = metrics.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], "CR,avg_vm1_cpu,avg_vm2_cpu,AmRT,SLOO");
    assert_eq!(lines[1].split(',').count(), 5);
    let trace = read(out.join("trace.csv"));
    assert_eq!(trace.lines().count(), 1 + 40 * 2);
    assert!(read(out.join("timeline.svg")).starts_with("<svg"));
    assert!(String::from_utf8_lossy(&o.stdout).contains("wrote"));
}

#[test]
fn identical_invocations_give_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("s.conf"), "run.steps = 60\ncontroller.filter = mcc\n").unwrap();
    for out in ["a", "b"] {
        let o = provisim(&["run", "s.conf", "--seed", "9", "--out", out], dir.path());
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for f in ["trace.csv", "metrics.csv", "timeline.svg"] {
        assert_eq!(
            fs::read(dir.path().join("a").join(f)).unwrap(),
            fs::read(dir.path().join("b").join(f)).unwrap(),
            "{f} differs"
        );
    }
}

#[test]
fn set_overrides_the_file_and_output_key_is_honoured() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("s.conf"), "run.steps = 40\nrun.output = from-file\n").unwrap();
    let o = provisim(&["run", "s.conf", "--set", "run.steps=25"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let trace = read(dir.path().join("from-file/trace.csv"));
    assert_eq!(trace.lines().count(), 1 + 25 * 2);

    let o = provisim(&["run", "s.conf", "--out", "flag"], dir.path());
    assert!(o.status.success());
    assert!(dir.path().join("flag/trace.csv").exists());
}

#[test]
fn parse_error_exits_2_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.conf"), "run.steps = 40\n\nmodel.alpha = abc\n").unwrap();
    let o = provisim(&["run", "bad.conf"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
    assert!(!dir.path().join("provisim-out").exists());
}

#[test]
fn missing_scenario_file_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = provisim(&["run", "nope.conf"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bad_sweeps_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = provisim(&["sweep", "--param", "zeta", "--values", "1,2"], dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let o = provisim(&["sweep", "--param", "c", "--values", ","], dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let o = provisim(&["sweep", "--param", "c", "--values", "0.5,x"], dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let o = provisim(&["sweep", "--param", "theta", "--values", "0.1"], dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn sweep_writes_one_row_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let o = provisim(
        &["sweep", "--set", "run.steps=30", "--param", "c", "--values", "0.6,0.7,0.9", "--out", "sw"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = read(dir.path().join("sw/sweep.csv"));
    assert_eq!(csv.lines().next(), Some("value,AmRT,SLOO,CR"));
    assert_eq!(csv.lines().count(), 4);
    assert!(dir.path().join("sw/sweep.svg").exists());
}

#[test]
fn compare_all_shares_one_workload() {
    let dir = tempfile::tempdir().unwrap();
    let o = provisim(&["compare", "--set", "run.steps=30", "--seed", "4", "--out", "c"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = read(dir.path().join("c/comparison.csv"));
    let mut lines = csv.lines();
    let header: Vec<_> = lines.next().unwrap().split(',').collect();
    let seed_col = header.iter().position(|h| *h == "workload_seed").unwrap();
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| r[seed_col] == "4"));
}

#[test]
fn replay_reproduces_recorded_allocations() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = "run.steps = 50\ncontroller.filter = hinf\ncontroller.topology = mimo\n";
    fs::write(dir.path().join("s.conf"), scenario).unwrap();
    let o = provisim(&["run", "s.conf", "--out", "r"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let trace_path = dir.path().join("r/trace.csv");
    let before = read(&trace_path);

    let o = provisim(&["replay", "r/trace.csv", "--scenario", "s.conf", "--out", "p"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(read(&trace_path), before);

    let alloc_of = |csv: &str, col: &str| -> Vec<String> {
        let mut lines = csv.lines();
        let header: Vec<_> = lines.next().unwrap().split(',').collect();
        let i = header.iter().position(|h| *h == col).unwrap();
        lines.map(|l| l.split(',').nth(i).unwrap().to_string()).collect()
    };
    let replayed = read(dir.path().join("p/replay.csv"));
    assert_eq!(alloc_of(&before, "allocation"), alloc_of(&replayed, "allocation"));
}

#[test]
fn replay_refuses_to_overwrite_its_input() {
    let dir = tempfile::tempdir().unwrap();
    let o = provisim(&["run", "--set", "run.steps=20", "--out", "r"], dir.path());
    assert!(o.status.success());
    let trace = dir.path().join("r/trace.csv");
    fs::copy(&trace, dir.path().join("r/replay.csv")).unwrap();
    let before = read(dir.path().join("r/replay.csv"));
    let o = provisim(&["replay", "r/replay.csv", "--out", "r"], dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert_eq!(read(dir.path().join("r/replay.csv")), before);
}

#[test]
fn replay_names_missing_column() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("t.csv"),
        "k,component,demand,usage,observation,allocation,backlog,mrt\n0,0,1,1,1,1,0,0.1\n",
    )
    .unwrap();
    let o = provisim(&["replay", "t.csv"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("'cr'"), "{}", stderr(&o));
}

#[test]
fn unreachable_server_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let port = std::net::TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port();
    let url = format!("http://127.0.0.1:{port}");
    let o = provisim(&["--server", &url, "run"], dir.path());
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn unknown_flag_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = provisim(&["run", "--frobnicate"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}
