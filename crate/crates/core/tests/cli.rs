use std::process::{Command, Output};

mod common;

fn aft(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aft")).args(args).output().unwrap()
}

fn path(name: &str) -> String {
    common::data_dir().join(name).to_string_lossy().into_owned()
}

#[test]
fn probe_selects_methods_for_worked_inventory() {
    let dir = tempfile::tempdir().unwrap();
    let out = aft(&[
        "probe",
        "--inventory",
        &path("lshw_inspiron6000.txt"),
        "--kb",
        &path("worked.kb"),
        "--methods",
        &path("worked_methods.csv"),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with("slot,assumed_behavior,selected_method,cost\n"));
    assert!(stdout.contains("DIMM_A,f3,M3,5\n"), "{stdout}");
    assert!(stdout.contains("DIMM_B,f1,M1,2\n"), "{stdout}");
    let written = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert_eq!(written, stdout);
}

#[test]
fn probe_exits_two_when_no_method_tolerates() {
    let dir = tempfile::tempdir().unwrap();
    let kb = dir.path().join("f2.kb");
    std::fs::write(&kb, "serial=F33DD2FD -> f2\n").unwrap();
    let out = aft(&[
        "probe",
        "--inventory",
        &path("lshw_inspiron6000.txt"),
        "--kb",
        kb.to_str().unwrap(),
        "--methods",
        &path("worked_methods.csv"),
        "--default",
        "f1",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("DIMM_B,f2,,\n"), "{stdout}");
    assert!(stdout.contains("DIMM_A,f1,M1,2\n"), "{stdout}");
}

#[test]
fn invalid_scenario_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("bad.scenario");
    std::fs::write(&scenario, "[scenario]\nkind = redundancy_experiment\nlength = 10\n[redundancy]\ncalm_window = soon\n").unwrap();
    let out = aft(&["run", scenario.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("calm_window"), "{stderr}");

    std::fs::write(&scenario, "[scenario]\nkind = redundancy_experiment\nlength = 10\nbogus = 1\n").unwrap();
    let out = aft(&["run", scenario.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr).unwrap().contains("bogus"));
}

#[test]
fn replay_check_without_previous_outputs_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = aft(&[
        "replay-check",
        &path("scenarios/quiet.scenario"),
        "--out",
        dir.path().join("missing").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn different_seed_is_detected_by_replay_check() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.scenario");
    let b = dir.path().join("b.scenario");
    let body = |seed: u64| {
        format!(
            "[scenario]\nkind = redundancy_experiment\nseed = {seed}\nlength = 20000\n[redundancy]\nburst_rate = 0.002\ncalm_window = 50\n"
        )
    };
    std::fs::write(&a, body(1)).unwrap();
    std::fs::write(&b, body(2)).unwrap();
    let out = dir.path().join("out");
    let o = out.to_str().unwrap();
    assert_eq!(aft(&["run", a.to_str().unwrap(), "--out", o]).status.code(), Some(0));
    assert_eq!(aft(&["replay-check", a.to_str().unwrap(), "--out", o]).status.code(), Some(0));
    let differs = aft(&["replay-check", b.to_str().unwrap(), "--out", o]);
    assert_eq!(differs.status.code(), Some(3));
    assert!(String::from_utf8(differs.stdout).unwrap().contains("trace.csv"));
}

#[test]
fn pattern_run_writes_events_and_dag() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().to_str().unwrap();
    let out = aft(&["run", &path("scenarios/watchdog_permanent.scenario"), "--out", o]);
    assert_eq!(out.status.code(), Some(0));
    let events = std::fs::read_to_string(dir.path().join("events.log")).unwrap();
    assert_eq!(events.matches("switch D1->D2").count(), 1, "{events}");
    let dag = std::fs::read_to_string(dir.path().join("dag.txt")).unwrap();
    assert!(dag.contains("c3.1") && dag.contains("c3.2"), "{dag}");
    let clashes = std::fs::read_to_string(dir.path().join("clashes.csv")).unwrap();
    assert!(clashes.contains("e1:c3"), "{clashes}");
}
