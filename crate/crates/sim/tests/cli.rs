use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn jamsnake(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jamsnake"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const QUICK: &str = "runs = 1\n[trajectory]\nkind = \"S\"\nbend_class = \"gentle\"\n";

#[test]
fn schema_prints_a_loadable_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let o = jamsnake(&["schema"], dir.path());
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("n_segments = 12"));
    jamsnake_sim::scenario::Scenario::from_toml(&text).unwrap();
}

#[test]
fn invalid_scenarios_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    for (name, text, needle) in [
        ("zero.toml", format!("runs = 0\n{QUICK}").replace("runs = 1\n", ""), "runs"),
        ("magic.toml", format!("controller = \"magic\"\n{QUICK}"), "ftl"),
        ("broken.toml", "[trajectory\n".to_string(), "line"),
    ] {
        fs::write(dir.path().join(name), text).unwrap();
        let o = jamsnake(&["run", "--scenario", name, "--out", "out"], dir.path());
        assert_eq!(o.status.code(), Some(1), "{name}: {}", stderr(&o));
        assert!(stderr(&o).contains(needle), "{name}: {}", stderr(&o));
        assert!(!dir.path().join("out").exists());
    }
    let o = jamsnake(&["run", "--scenario", "missing.toml", "--out", "out"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn solver_failure_exits_with_two_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let text = "[trajectory]\nkind = \"C\"\nbend_class = \"sharp\"\n\
                [robot]\nsharp_limit = 0.2\n[simulation]\nsteer_slack = 0.0\n";
    fs::write(dir.path().join("s.toml"), text).unwrap();
    fs::create_dir(dir.path().join("out")).unwrap();
    fs::write(dir.path().join("out/keep.txt"), "x").unwrap();
    let o = jamsnake(&["run", "--scenario", "s.toml", "--out", "out"], dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let left: Vec<_> = fs::read_dir(dir.path().join("out")).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(left, vec!["keep.txt"]);
    let stray = fs::read_dir(dir.path()).unwrap().filter(|e| {
        e.as_ref().unwrap().file_name().to_string_lossy().starts_with(".jamsnake")
    });
    assert_eq!(stray.count(), 0);
}

#[test]
fn run_writes_every_output() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("s.toml"), QUICK).unwrap();
    let o = jamsnake(&["run", "--scenario", "s.toml", "--out", "out"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let out = dir.path().join("out");
    for f in [
        "events.csv",
        "forces.csv",
        "summary.csv",
        "lambda.csv",
        "sweep_S-gentle.svg",
        "effective_config.toml",
        "metadata.json",
    ] {
        assert!(out.join(f).exists(), "{f}");
    }
    let events = fs::read_to_string(out.join("events.csv")).unwrap();
    assert!(events.starts_with("strategy,time_s,step_id,fjm_index,action,base_insertion_mm\n"));
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(summary.starts_with("scenario,checkpoint,ES1 I,ES1 II,ES1 III\n"));
    assert_eq!(summary.lines().count(), 4);
    let svg = fs::read_to_string(out.join("sweep_S-gentle.svg")).unwrap();
    assert!(svg.contains("λ ="));
}

#[test]
fn precision_variable_controls_csv_digits() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("s.toml"), QUICK).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_jamsnake"))
        .args(["run", "--scenario", "s.toml", "--out", "out"])
        .env("JAMSNAKE_CSV_PRECISION", "2")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let lambda = fs::read_to_string(dir.path().join("out/lambda.csv")).unwrap();
    let value = lambda.lines().nth(1).unwrap().split(',').nth(4).unwrap();
    let digits = value.trim_start_matches("0.").trim_start_matches('0').len();
    assert!(digits <= 2, "{value}");

    let o = Command::new(env!("CARGO_BIN_EXE_jamsnake"))
        .args(["run", "--scenario", "s.toml", "--out", "bad"])
        .env("JAMSNAKE_CSV_PRECISION", "many")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(!dir.path().join("bad").exists());
}

#[test]
fn compare_of_identical_runs_has_unit_ratios() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("s.toml"), QUICK).unwrap();
    for out in ["a", "b"] {
        let o = jamsnake(&["run", "--scenario", "s.toml", "--out", out], dir.path());
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let o = jamsnake(&["compare", "--out", "cmp", "a", "b"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("cmp/comparison.csv")).unwrap();
    let mut r = csv::Reader::from_reader(csv.as_bytes());
    for rec in r.records() {
        let rec = rec.unwrap();
        let b_ratio = rec.get(6).unwrap();
        assert!(b_ratio == "1" || b_ratio == "--", "{rec:?}");
    }
    assert!(dir.path().join("cmp/comparison.txt").exists());
}

#[test]
fn compare_rejects_different_trajectories() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("s.toml"), QUICK).unwrap();
    fs::write(dir.path().join("c.toml"), QUICK.replace("\"S\"", "\"C\"")).unwrap();
    for (file, out) in [("s.toml", "a"), ("c.toml", "b")] {
        assert!(jamsnake(&["run", "--scenario", file, "--out", out], dir.path()).status.success());
    }
    let o = jamsnake(&["compare", "--out", "cmp", "a", "b"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("incompatible"));
    assert!(!dir.path().join("cmp").exists());
}

#[test]
fn unknown_suite_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = jamsnake(&["verify", "--suite", "nope"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}
