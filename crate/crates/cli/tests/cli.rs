use std::process::{Command, Output};

use serde_json::Value;

fn crossprob(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crossprob"))
        .args(args)
        .env_remove("CROSSPROB_THREADS")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn nc_four() {
    let out = crossprob(&["nc", "--n", "4"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["count"], 14);
    assert_eq!(v["partitions"].as_array().unwrap().len(), 14);
    assert!(v["partitions"].as_array().unwrap().iter().any(|p| p == "{(1,4),(2,3)}"));
}

#[test]
fn mobius_four() {
    let out = crossprob(&["mobius", "--n", "4"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["mu_bottom_top"], -5);
    let row = v["to_top"]
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["partition"] == "{(1),(2),(3),(4)}")
        .unwrap();
    assert_eq!(row["mu"], -5);
    let full = json(&crossprob(&["mobius", "--n", "3", "--full"]));
    // 5 elements; comparable pairs: 5 reflexive + 4 from 0 + 3 atoms to 1 = 12
    assert_eq!(full["intervals"].as_array().unwrap().len(), 12);
}

#[test]
fn out_of_range_lattice_is_an_input_error() {
    let out = crossprob(&["nc", "--n", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out)["error"]["kind"], "domain");
    let out = crossprob(&["mobius", "--n", "9"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn moments_and_cumulants_tables() {
    let v = json(&crossprob(&["cumulants", "--scenario", "f2_diag2"]));
    assert_eq!(v["cumulants"]["k(a,b)"]["entries"], serde_json::json!(["4+0*i", "6+0*i"]));
    assert_eq!(v["factorized"]["k(a,b)"], v["cumulants"]["k(a,b)"]);
    assert_eq!(v["cumulants"]["k(a,u)"]["entries"], serde_json::json!(["0+0*i", "0+0*i"]));
    assert!(v["factorized"].get("k(x,a,b,x)").is_none());

    let m = json(&crossprob(&["moments", "--scenario", "f2_diag2"]));
    let rows = m["moments"].as_array().unwrap();
    let nested = rows
        .iter()
        .find(|r| r["tuple"] == "a,u,v,b" && r["partition"] == "{(1,4),(2,3)}")
        .unwrap();
    assert_eq!(nested["value"]["entries"], serde_json::json!(["4+0*i", "6+0*i"]));
}

#[test]
fn check_freeness_reports() {
    let out = crossprob(&["check-freeness", "--scenario", "z2z3_diag6", "--trials", "20", "--max-order", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["verdict"], true);
    let r = &v["reports"][0];
    assert_eq!(r["max_order"], 3);
    assert_eq!(r["trials"], 20);
    assert_eq!(r["violations"], serde_json::json!([]));
}

#[test]
fn bad_scenarios_exit_two_with_error_object() {
    let dir = std::env::temp_dir().join(format!("crossprob-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();

    let broken = dir.join("broken.json");
    std::fs::write(&broken, "{ not json").unwrap();
    let out = crossprob(&["moments", "--scenario", broken.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out)["error"]["kind"], "parse");

    let exact_conj = dir.join("exact_conj.json");
    std::fs::write(
        &exact_conj,
        r#"{"schema": "crossprob.scenario/1", "group": {"free_group": 1},
            "coefficients": {"shape": "full", "dimension": 2, "mode": "exact"},
            "action": {"kind": "unitary_conjugation", "generators": [[[0, 1], [1, 0]]]}}"#,
    )
    .unwrap();
    let out = crossprob(&["verify-paper", "--scenario", exact_conj.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let v = json(&out);
    assert_eq!(v["error"]["kind"], "config");
    assert!(v["error"]["message"].as_str().unwrap().contains("permutation"));

    let out = crossprob(&["verify-paper", "--scenario", "does_not_exist"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out)["error"]["kind"], "config");

    let out = crossprob(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out)["error"]["kind"], "usage");
}

#[test]
fn thread_env_var_is_validated() {
    let out = Command::new(env!("CARGO_BIN_EXE_crossprob"))
        .args(["nc", "--n", "3"])
        .env("CROSSPROB_THREADS", "lots")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let ok = Command::new(env!("CARGO_BIN_EXE_crossprob"))
        .args(["nc", "--n", "3"])
        .env("CROSSPROB_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(0));
}

#[test]
fn verify_paper_on_a_fixture() {
    let out = crossprob(&["verify-paper", "--seed", "3", "--scenario", "f2_full2_float"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["command"], "verify-paper");
    assert_eq!(v["seed"], 3);
    assert_eq!(v["verdict"], true);
    for key in ["(2.3)", "(2.4)", "(2.7)", "(2.8)", "Thm3.1", "Cor3.2", "Example2.1", "Example2.2"] {
        assert_eq!(v["sections"][key]["passed"], true, "{key}");
    }
}
