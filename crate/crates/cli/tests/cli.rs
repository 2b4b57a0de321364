use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use rwpt::fms::{fms_initial, fms_rules, FmsParams};
use rwpt::statespace::apply_label;
use rwpt::{emit_net, parse_net, UndefinedPolicy};
use rwpt_cli::simulate;

fn rwpt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rwpt")).args(args).output().expect("spawn rwpt")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn final_search_m3() {
    let o = rwpt(&["search", "--model", "fms", "-M", "3", "--final"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.starts_with("No solution."), "{out}");
    assert!(out.contains("states: 350 "), "{out}");
}

#[test]
fn json_search_record() {
    let o = rwpt(&["search", "--model", "fms", "-M", "3", "--reach", "--pred", "dead", "--json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["states"], 350);
    assert_eq!(v["truncated"], false);
    assert_eq!(v["solutions"].as_array().unwrap().len(), 6);
    assert!(v["elapsedMs"].is_number());
    assert!(v["undefinedStates"].as_array().unwrap().is_empty());
    // solutions are ordered by state key, so the output is stable
    let again: serde_json::Value = serde_json::from_str(&stdout(&rwpt(&[
        "search", "--model", "fms", "-M", "3", "--reach", "--pred", "dead", "--json", "--threads", "3",
    ])))
    .unwrap();
    assert_eq!(v["solutions"], again["solutions"]);
}

#[test]
fn truncated_search_exits_1() {
    let o = rwpt(&["search", "--model", "fms", "-M", "3", "--final", "--max-states", "10"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("(truncated)"));
}

#[test]
fn one_step_from_state_file() {
    let dir = tempfile::tempdir().unwrap();
    let state = "place p0 p1 p2 p3 p4 p5 p6 p7 p8\n\
                 trans t0 : in 2*p1 ; out p2 p3\n\
                 trans t1 : in p2 ; out p4 ; inh p7\n\
                 trans t2 : in p3 ; out p5 ; inh p8\n\
                 trans t3 : in p4 p5 ; out p6\n\
                 trans t4 : in p6 ; out 2*p1\n\
                 trans t5 : in p0 ; out p7\n\
                 trans t6 : in p0 ; out p8\n\
                 marking p8 10*p3 10*p4\n";
    let file = write(dir.path(), "dead.state", state);
    let o = rwpt(&["search", "--net", &file, "--model", "fms", "-M", "10", "--one-step", "--json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let sols = v["solutions"].as_array().unwrap();
    assert_eq!(sols.len(), 1);
    assert_eq!(sols[0]["marking"], "1*p0 + 10*p2 + 10*p4");
    let next = parse_net(sols[0]["state"].as_str().unwrap()).unwrap();
    assert!(next.net().get(rwpt::t(2)).is_none());

    // without --model only firing applies, and the state is dead
    let o = rwpt(&["search", "--net", &file, "--one-step"]);
    assert!(stdout(&o).contains("No solution."));
}

#[test]
fn emitted_state_round_trips_through_cli() {
    let dir = tempfile::tempdir().unwrap();
    let s = fms_initial(FmsParams::new(10)).unwrap();
    let file = write(dir.path(), "init.net", &emit_net(&s));
    let o = rwpt(&["search", "--net", &file, "--model", "fms", "-M", "10", "--max-depth", "0", "--json"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(parse_net(v["solutions"][0]["state"].as_str().unwrap()).unwrap(), s);
}

#[test]
fn parse_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let file = write(dir.path(), "dup.net", "place p1\ntrans t1 : in p1\ntrans t1 : out p1\n");
    let o = rwpt(&["search", "--net", &file, "--final"]);
    assert_eq!(o.status.code(), Some(3));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 3"), "{err}");
    assert!(err.contains("duplicate transition t1"), "{err}");

    assert_eq!(rwpt(&["search", "--bogus"]).status.code(), Some(3));
    assert_eq!(rwpt(&["search", "--model", "fms", "--reach", "--pred", "sideways"]).status.code(), Some(3));
    assert_eq!(rwpt(&["--help"]).status.code(), Some(0));
}

#[test]
fn semiflow_commands() {
    let out = stdout(&rwpt(&["semiflows", "--model", "fms", "--kind", "p", "--check-coverage"]));
    assert!(out.contains("pin1  p0 + p7 + p8"), "{out}");
    assert!(out.contains("p1 + 2*p2 + 2*p4 + 2*p6"), "{out}");
    assert!(out.contains("p1 + 2*p3 + 2*p5 + 2*p6"), "{out}");
    assert!(out.contains("covered by P-semiflows"), "{out}");

    let out = stdout(&rwpt(&["semiflows", "--model", "fms-faulty-2", "--kind", "t"]));
    assert_eq!(out.trim(), "tin1  2*t0 + 2*t2 + t3 + t4");

    let dir = tempfile::tempdir().unwrap();
    let file = write(dir.path(), "grow.net", "place p1 p2\ntrans t1 : in p1 ; out p1 p2\nmarking p1\n");
    let out = stdout(&rwpt(&["semiflows", "--net", &file, "--kind", "p", "--check-coverage"]));
    assert!(out.contains("not covered"), "{out}");
}

#[test]
fn invariant_command() {
    let o = rwpt(&[
        "search", "--model", "fms", "-M", "5", "--invariant", "p0 + p8 == 1", "--on-net", "fms-faulty-2",
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("holds"));
    let o = rwpt(&["search", "--model", "fms", "-M", "3", "--invariant", "p6 == 0"]);
    let out = stdout(&o);
    assert!(out.contains("violated"), "{out}");
    assert!(out.contains("--firing(t3)-->"), "{out}");
}

#[test]
fn simulate_is_seeded_and_echoes_initial() {
    let a = rwpt(&["simulate", "--model", "fms", "-M", "3", "--steps", "5", "--seed", "7"]);
    let b = rwpt(&["simulate", "--model", "fms", "-M", "3", "--steps", "5", "--seed", "7"]);
    assert_eq!(stdout(&a), stdout(&b));
    let zero = stdout(&rwpt(&["simulate", "--model", "fms", "-M", "3", "--steps", "0"]));
    assert!(zero.contains("marking 1*p0 6*p1"), "{zero}");
}

#[test]
fn simulated_traces_replay() {
    let params = FmsParams::new(3);
    let s0 = fms_initial(params).unwrap();
    let rules = fms_rules(params);
    for seed in 0..20 {
        let trace = simulate(&s0, &rules, 60, seed, UndefinedPolicy::Filter).unwrap();
        let mut cur = s0.clone();
        for (label, _) in &trace.steps {
            cur = apply_label(&cur, label, &rules).unwrap().expect("label applies");
        }
        assert_eq!(&cur, trace.final_state());
    }
}

#[test]
fn simulate_halts_on_dead_state() {
    let dir = tempfile::tempdir().unwrap();
    let file = write(dir.path(), "once.net", "place p1 p2\ntrans t1 : in p1 ; out p2\nmarking p1\n");
    let out = stdout(&rwpt(&["simulate", "--net", &file, "--steps", "5"]));
    assert!(out.contains("halted after 1 steps"), "{out}");
}

#[test]
fn rg_writes_dot() {
    let dir = tempfile::tempdir().unwrap();
    let dot = dir.path().join("rg.dot");
    let o = rwpt(&["rg", "--model", "fms", "-M", "1", "-o", dot.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = fs::read_to_string(dot).unwrap();
    assert!(text.starts_with("digraph"));
    assert!(text.contains("firing(t0)"));
    assert!(!text.contains("r1("));
    let with_rules = stdout(&rwpt(&["rg", "--model", "fms", "-M", "1", "--with-rules"]));
    assert!(with_rules.contains("r1("));
}
