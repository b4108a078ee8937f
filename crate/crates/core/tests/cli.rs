//! The `dx` binary end to end.

use std::path::PathBuf;
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn dx(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dx")).args(args).current_dir(fixtures()).output().expect("dx runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", stdout(o)))
}

#[test]
fn eval_copy_uses_the_fast_path() {
    let o = dx(&["eval", "-m", "copy.dx", "-s", "copy.inst", "-q", "copy.q"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = json(&o);
    assert_eq!(v["answers"], serde_json::json!([["a", "b"]]));
    assert_eq!(v["semantics"], "gcwa-star");
    assert_eq!(v["meta"]["path"], "fast");
    let text = stdout(&o);
    let at: Vec<usize> = ["\"query\"", "\"semantics\"", "\"answers\"", "\"meta\""].iter().map(|k| text.find(k).unwrap()).collect();
    assert!(at.windows(2).all(|w| w[0] < w[1]), "{text}");
}

#[test]
fn eval_text_format() {
    let o = dx(&["eval", "-m", "copy.dx", "-s", "copy.inst", "-q", "copy.q", "--format", "text"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("(a, b)"), "{}", stdout(&o));
}

#[test]
fn core_of_ef_has_one_null() {
    let o = dx(&["core", "-m", "ef.dx", "-s", "ef.inst"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "E(a,_n1).\nF(_n1,b).\n");
}

#[test]
fn chase_writes_to_a_file() {
    let dir = std::env::temp_dir().join(format!("dx-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let out = dir.join("chase.inst");
    let o = dx(&["chase", "-m", "leq2.dx", "-s", "leq.inst", "-o", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(&out).unwrap(), "E(a,a).\nE(a,_n1).\n");
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn blocks_report_packedness() {
    let o = dx(&["blocks", "-m", "naf.dx", "-t", "naf.inst"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("# block 3 (2 nulls, not packed)"), "{text}");
    assert!(text.ends_with("# blocks: 3, max nulls per block: 2, bs: 0, packed: false, core: true\n"), "{text}");
}

#[test]
fn minrep_lists_representatives() {
    let o = dx(&["minrep", "-m", "ef.dx", "-s", "ef.inst", "--consts", "a,b"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.starts_with("# representative 1\n"), "{text}");
    assert!(text.contains("E(a,_n1).\nF(_n1,b).\n"), "{text}");
}

#[test]
fn oracle_semantics_with_diagnostics() {
    let o = dx(&["eval", "-m", "pe.dx", "-s", "pe.inst", "-q", "pe.q", "--oracle", "--semantics", "rcwa"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["answers"], serde_json::json!([]));
    assert!(v["meta"]["diagnostics"][0].as_str().unwrap().starts_with("no RCWA-solution"));
    assert_eq!(v["meta"]["budget"]["fresh_constants"], 4);

    let o = dx(&["eval", "-m", "eff.dx", "-s", "eff.inst", "-q", "eff.q", "--oracle", "--semantics", "gcwa"]);
    assert_eq!(json(&o)["answers"], serde_json::json!([]));
    let o = dx(&["eval", "-m", "eff.dx", "-s", "eff.inst", "-q", "eff.q", "--oracle"]);
    assert_eq!(json(&o)["answers"], serde_json::json!([[]]));
}

#[test]
fn multiple_queries_give_an_array() {
    let o = dx(&["eval", "-m", "ef.dx", "-s", "ef.inst", "-q", "ef.q"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = json(&o);
    let names: Vec<&str> = v.as_array().unwrap().iter().map(|d| d["query"].as_str().unwrap()).collect();
    assert_eq!(names, ["q", "r"]);
}

#[test]
fn compare_on_a_fixture_agrees() {
    let o = dx(&["compare", "-m", "rand.dx", "-s", "rand.inst", "-q", "rand.q"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o), "query: q\nfast: {(a), (b)}\ngeneral: {(a), (b)}\noracle: {(a), (b)}\nagree: true\n");
}

#[test]
fn random_compare_is_seeded() {
    let run = |seed: &str| {
        let o = Command::new(env!("CARGO_BIN_EXE_dx"))
            .args(["compare", "--random", "--count", "10"])
            .env("DX_SEED", seed)
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        stdout(&o)
    };
    let a = run("7");
    assert_eq!(a, run("7"));
    assert!(a.contains("seed: 7"), "{a}");
    assert!(a.contains("agree: true"), "{a}");
}

#[test]
fn parse_errors_point_at_the_input() {
    let dir = std::env::temp_dir().join(format!("dx-bad-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let bad = dir.join("bad.dx");
    std::fs::write(&bad, "source R/2.\ntarget Rp/2.\ntgd R(x,y) -> Rp(x,.\n").unwrap();
    let o = dx(&["chase", "-m", bad.to_str().unwrap(), "-s", "copy.inst"]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("bad.dx:3:"), "{err}");
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn exit_codes() {
    // usage
    assert_eq!(dx(&["eval", "-m", "copy.dx", "-s", "copy.inst"]).status.code(), Some(1));
    assert_eq!(dx(&["eval", "-m", "two_three.dx", "-s", "two_three.inst", "-q", "two_three.q"]).status.code(), Some(1));
    assert_eq!(dx(&["eval", "-m", "pe.dx", "-s", "pe.inst", "-q", "pe.q", "--semantics", "cwa"]).status.code(), Some(1));
    assert_eq!(dx(&["chase", "-m", "missing.dx", "-s", "copy.inst"]).status.code(), Some(1));
    // precondition: the source must be ground
    let dir = std::env::temp_dir().join(format!("dx-null-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let src = dir.join("null.inst");
    std::fs::write(&src, "R(a,_n1).\n").unwrap();
    let o = dx(&["core", "-m", "copy.dx", "-s", src.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("null"), "{}", stderr(&o));
    std::fs::remove_dir_all(&dir).unwrap();
    // budget
    let o = dx(&["eval", "-m", "mot.dx", "-s", "mot.inst", "-q", "pe.q", "--oracle", "--budget-rounds", "0", "--budget-fresh", "2", "--budget-atoms", "10"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    // help
    assert_eq!(dx(&["--help"]).status.code(), Some(0));
}

#[test]
fn fallback_is_reported() {
    let o = dx(&["eval", "-m", "chain.dx", "-s", "chain.inst", "-q", "chain.q"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stderr(&o).starts_with("warning: fast path not applicable"), "{}", stderr(&o));
    let v = json(&o);
    assert_eq!(v["meta"]["path"], "general");
    assert_eq!(v["answers"], serde_json::json!([]));

    let o = dx(&["eval", "-m", "chain.dx", "-s", "chain.inst", "-q", "chain.q", "--no-fallback"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("not packed"), "{}", stderr(&o));
}

#[test]
fn deterministic_output() {
    let args = ["eval", "-m", "ef.dx", "-s", "ef.inst", "-q", "ef_oracle.q", "--oracle"];
    assert_eq!(dx(&args).stdout, dx(&args).stdout);
}
