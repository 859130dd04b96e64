use std::path::Path;
use std::process::{Command, Output};

use ces_cli::exit;
use sha2::{Digest, Sha256};

fn ces(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ces")).args(args).env_remove("CES_CONFIG").output().unwrap()
}

fn tiny_case(dir: &Path) -> String {
    let case = dir.join("case");
    let out = ces(&["synth-case", "--kind", "tiny", "--out", case.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    case.to_str().unwrap().to_string()
}

fn case_args(case: &str, out: &Path) -> Vec<String> {
    vec![
        "--config".into(),
        format!("{case}/case.toml"),
        "--traces".into(),
        format!("{case}/traces.csv"),
        "--feeder".into(),
        format!("{case}/feeder_lines.csv"),
        "--tariff".into(),
        format!("{case}/tariff.csv"),
        "--out".into(),
        out.to_str().unwrap().into(),
    ]
}

fn run(sub: &str, case: &str, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![sub.to_string()];
    args.extend(case_args(case, out));
    args.extend(extra.iter().map(|s| s.to_string()));
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    ces(&refs)
}

fn digest(path: &Path) -> Vec<u8> {
    Sha256::digest(std::fs::read(path).unwrap()).to_vec()
}

#[test]
fn plan_writes_reproducible_reports_and_a_plot() {
    let dir = tempfile::tempdir().unwrap();
    let case = tiny_case(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let res = run("plan", &case, out, &["--ets", "avg"]);
        assert_eq!(res.status.code(), Some(exit::OK), "{}", String::from_utf8_lossy(&res.stderr));
        assert!(String::from_utf8_lossy(&res.stdout).starts_with("ETS1 (avg): node "));
    }
    let solution = std::fs::read_to_string(a.join("solution.csv")).unwrap();
    assert!(solution.starts_with("ets,scheme,node,capacity_kwh,rated_kw,f_inv,f_opC,f_opP,"));
    assert_eq!(solution.lines().count(), 2);
    for f in ["solution.csv", "dispatch.csv"] {
        assert_eq!(digest(&a.join(f)), digest(&b.join(f)), "{f}");
    }

    let dispatch = a.join("dispatch.csv");
    let svgs: Vec<_> = ["x.svg", "y.svg"].iter().map(|n| a.join(n)).collect();
    for svg in &svgs {
        let res = ces(&["plot", "--dispatch", dispatch.to_str().unwrap(), "--day", "0", "--output", svg.to_str().unwrap()]);
        assert_eq!(res.status.code(), Some(exit::OK), "{}", String::from_utf8_lossy(&res.stderr));
    }
    assert_eq!(digest(&svgs[0]), digest(&svgs[1]));
    let res = ces(&["plot", "--dispatch", dispatch.to_str().unwrap(), "--day", "3"]);
    assert_eq!(res.status.code(), Some(exit::VALIDATION));
}

#[test]
fn export_mps_writes_the_stage_three_problem() {
    let dir = tempfile::tempdir().unwrap();
    let case = tiny_case(dir.path());
    let out = dir.path().join("o");
    let res = run("export-mps", &case, &out, &["--stage", "3", "--ets", "scaled:1.5"]);
    assert_eq!(res.status.code(), Some(exit::OK), "{}", String::from_utf8_lossy(&res.stderr));
    let text = std::fs::read(out.join("stage3.mps")).unwrap();
    let pb = ces_milp::mps::read_mps(&text[..]).unwrap();
    let stage1 = {
        let res = run("export-mps", &case, &out, &["--stage", "1", "--ets", "scaled:1.5"]);
        assert!(res.status.success());
        ces_milp::mps::read_mps(&std::fs::read(out.join("stage1.mps")).unwrap()[..]).unwrap()
    };
    assert_eq!(pb.rows.len(), stage1.rows.len() + 2);
    assert_eq!(pb.columns.len(), stage1.columns.len());
    assert!(out.join("stage3.mps.names.csv").exists());
}

#[test]
fn gen_scenarios_uses_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let case = tiny_case(dir.path());
    let out = dir.path().join("s");
    let res = ces(&[
        "gen-scenarios",
        "--traces",
        &format!("{case}/traces.csv"),
        "--out",
        out.to_str().unwrap(),
        "--set",
        "n_reduced_scenarios=3",
    ]);
    assert_eq!(res.status.code(), Some(exit::OK), "{}", String::from_utf8_lossy(&res.stderr));
    let omega = std::fs::read_to_string(out.join("omega.csv")).unwrap();
    assert_eq!(omega.lines().count(), 1 + 3 * 24);
}

#[test]
fn config_path_can_come_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let case = tiny_case(dir.path());
    std::fs::write(dir.path().join("bad.toml"), "n_reduced_scenarios = 0\n").unwrap();
    let res = Command::new(env!("CARGO_BIN_EXE_ces"))
        .args(["gen-scenarios", "--traces", &format!("{case}/traces.csv"), "--out", dir.path().join("e").to_str().unwrap()])
        .env("CES_CONFIG", dir.path().join("bad.toml"))
        .output()
        .unwrap();
    assert_eq!(res.status.code(), Some(exit::VALIDATION));
}

#[test]
fn exit_codes_follow_the_error_category() {
    let dir = tempfile::tempdir().unwrap();
    let case = tiny_case(dir.path());
    let out = dir.path().join("x");
    assert_eq!(ces(&["plan", "--bogus"]).status.code(), Some(exit::USAGE));
    assert_eq!(ces(&["frobnicate"]).status.code(), Some(exit::USAGE));
    assert_eq!(run("plan", &case, &out, &["--ets", "scaled:1"]).status.code(), Some(exit::USAGE));
    assert_eq!(ces(&["--help"]).status.code(), Some(exit::OK));

    assert_eq!(run("plan", &case, &out, &["--set", "sigma_lo=0.5", "--set", "sigma_hi=0.3"]).status.code(), Some(exit::VALIDATION));
    assert_eq!(run("plan", &case, &out, &["--set", "no_such_key=1"]).status.code(), Some(exit::VALIDATION));

    std::fs::write(dir.path().join("bad_tariff.csv"), "t,lambda_g_aud_per_kwh\n0,abc\n").unwrap();
    let mut args = vec!["plan".to_string()];
    args.extend(case_args(&case, &out));
    let i = args.iter().position(|a| a == "--tariff").unwrap();
    args[i + 1] = dir.path().join("bad_tariff.csv").to_str().unwrap().into();
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    assert_eq!(ces(&refs).status.code(), Some(exit::PARSE));

    // A voltage band this narrow cannot carry the feeder's load.
    let res = run("plan", &case, &out, &["--set", "v_min=0.9999", "--set", "v_max=1.0001"]);
    assert_eq!(res.status.code(), Some(exit::INFEASIBLE), "{}", String::from_utf8_lossy(&res.stderr));
}
