use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lacewalk")).args(args).output().expect("binary runs")
}

fn json(args: &[&str]) -> Value {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn verify_recursion_is_exact() {
    let v = json(&["verify", "--d", "1", "--L", "1", "--tau", "2", "--nmax", "6"]);
    let recursion: Vec<&Value> = v["reports"].as_array().unwrap().iter().filter(|r| r["check"] == "recursion").collect();
    assert_eq!(recursion.len(), 7);
    assert!(recursion.iter().all(|r| r["residual"] == "0/1" && r["verdict"] == "PASS"));
    assert!(v["reports"].as_array().unwrap().iter().any(|r| r["check"] == "tail-identity"));
    assert!(v["reports"].as_array().unwrap().iter().any(|r| r["check"] == "lace-partition"));
}

#[test]
fn transfer_pc_one_dimension() {
    let v = json(&["pc", "--d", "1", "--L", "1", "--tau", "3"]);
    let pc = v["rows"][0]["pc"].as_f64().unwrap();
    assert!((pc - 2.0).abs() < 1e-10, "{pc}");
}

#[test]
fn fixed_point_pc_close_to_transfer() {
    let fp = json(&["pc", "--d", "5", "--tau", "2", "--method", "fixed-point", "--tol", "1e-14"]);
    let tm = json(&["pc", "--d", "5", "--tau", "2"]);
    let (a, b) = (fp["rows"][0]["pc"].as_f64().unwrap(), tm["rows"][0]["pc"].as_f64().unwrap());
    assert!((a - b).abs() < 5e-3, "{a} vs {b}");
}

#[test]
fn empty_tau_list_is_a_config_error() {
    for args in [&["scan"][..], &["scan", "--tau-list", ""][..]] {
        let out = run(args);
        assert_eq!(out.status.code(), Some(2));
        assert!(out.stdout.is_empty());
        assert!(stderr(&out).contains("`tau-list`"), "{}", stderr(&out));
    }
}

#[test]
fn bad_values_name_their_field() {
    for (args, field) in [
        (&["pc", "--tau", "0"][..], "tau"),
        (&["enumerate", "--d", "x"][..], "d"),
        (&["pc", "--method", "guess"][..], "method"),
        (&["clt", "--n-list", "0"][..], "n-list"),
    ] {
        let out = run(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(stderr(&out).contains(&format!("field `{field}`")), "{args:?}: {}", stderr(&out));
    }
}

#[test]
fn library_argument_errors_exit_2() {
    let out = run(&["const", "--d", "2"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["verify", "--tau", "inf", "--suite", "tail"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unwritable_output_names_out() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("missing").join("r.json");
    let out = run(&["enumerate", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("field `out`"));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    for (cmd, fmt) in [("enumerate", "json"), ("pi", "csv"), ("verify", "json")] {
        let path = dir.path().join(format!("{cmd}.{fmt}"));
        let files: Vec<String> = (0..2)
            .map(|_| {
                let out = run(&[cmd, "--d", "2", "--tau", "3", "--nmax", "4", "--format", fmt, "--out", path.to_str().unwrap()]);
                assert!(out.status.success(), "{}", stderr(&out));
                assert!(out.stdout.is_empty());
                std::fs::read_to_string(&path).unwrap()
            })
            .collect();
        assert!(!files[0].is_empty());
        assert_eq!(files[0], files[1], "{cmd}");
    }
}

#[test]
fn thread_count_does_not_change_results() {
    let one = run(&["pi", "--d", "2", "--nmax", "5", "--threads", "1"]);
    let four = run(&["pi", "--d", "2", "--nmax", "5", "--threads", "4"]);
    let strip = |o: &Output| {
        let mut v: Value = serde_json::from_slice(&o.stdout).unwrap();
        v["config"].as_object_mut().unwrap().remove("threads");
        v
    };
    assert_eq!(strip(&one), strip(&four));
}

#[test]
fn json_documents_follow_the_schema() {
    let schema = lacewalk::report::schema();
    for args in [
        &["dist-check", "--d", "2", "--nmax", "10"][..],
        &["enumerate", "--d", "1", "--nmax", "6"][..],
        &["pi", "--d", "1", "--nmax", "4"][..],
        &["verify", "--d", "1", "--nmax", "5"][..],
        &["pc", "--d", "2", "--tau-list", "2,3"][..],
        &["scan", "--d", "1", "--tau-list", "2,3,4"][..],
        &["clt", "--d", "1"][..],
        &["const", "--d", "5"][..],
    ] {
        let v = json(args);
        lacewalk::report::validate(&schema, &v).unwrap_or_else(|e| panic!("{args:?}: {e}"));
        assert_eq!(v["command"], args[0]);
    }
}

#[test]
fn rationals_are_written_as_fractions() {
    let v = json(&["enumerate", "--d", "1", "--tau", "inf", "--nmax", "2"]);
    assert_eq!(v["rows"][2]["c_n"], "1/2");
    assert_eq!(v["rows"][2]["count"], "2");
    let v = json(&["pi", "--d", "1", "--nmax", "2"]);
    assert_eq!(v["summary"]["pi_hat_zero[1,2]"], "1/2");
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("job.toml");
    std::fs::write(&path, "# job\nd = 2\nmemory = 3\nnmax = 3\n").unwrap();
    let p = path.to_str().unwrap();
    let v = json(&["enumerate", "--config", p]);
    assert_eq!(v["config"]["d"], 2);
    assert_eq!(v["config"]["tau"], "3");
    assert_eq!(v["rows"].as_array().unwrap().len(), 4);
    let v = json(&["enumerate", "--config", p, "--d", "1", "--memory", "inf"]);
    assert_eq!(v["config"]["d"], 1);
    assert_eq!(v["config"]["tau"], "inf");

    std::fs::write(&path, "walks = 3\n").unwrap();
    let out = run(&["enumerate", "--config", p]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("field `walks`"));
}

#[test]
fn csv_output_layout() {
    let out = run(&["verify", "--d", "1", "--nmax", "3", "--format", "csv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "# lacewalk verify");
    assert!(lines[1].starts_with("# config {"));
    assert!(lines[2].starts_with("# summary {"));
    assert_eq!(lines[3], "check,params,residual,bound,verdict");
    assert!(lines[4].starts_with("recursion,"));

    let out = run(&["enumerate", "--d", "1", "--nmax", "2", "--format", "csv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.ends_with("n,c_n,count,mu_bound\n0,1/1,1,\n1,1/1,2,1.0\n2,1/2,2,0.7071067811865476\n"), "{text}");
}

#[test]
fn failed_checks_exit_1() {
    // tau = 6 in d = 5 is beyond the transfer-matrix state cap
    let out = run(&["scan", "--d", "5", "--tau-list", "6"]);
    assert_eq!(out.status.code(), Some(1));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["reports"][0]["verdict"], "FAIL");
    assert!(v["rows"][0]["error"].as_str().unwrap().contains("state explosion"));
}
