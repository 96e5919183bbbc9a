use std::process::Command;

use algred::cli::run;
use algred::model::Fixture;

fn algred(args: &[&str]) -> algred::cli::Outcome {
    run(std::iter::once("algred").chain(args.iter().copied()))
}

#[test]
fn list_fixtures_names_every_builtin() {
    let out = algred(&["list-fixtures"]);
    assert_eq!(out.code, 0);
    for name in ["fix-tm2", "fix-so3", "fix-tm2-translation", "fix-act", "fix-mag", "fix-so3-act", "broken"] {
        assert!(out.stdout.lines().any(|l| l.split_whitespace().next() == Some(name)), "{name} missing");
    }
}

#[test]
fn broken_structure_fails_jacobi() {
    let out = algred(&["check-axioms", "--fixture", "broken"]);
    assert_eq!(out.code, 1, "{}", out.stdout);
    let jacobi = out.stdout.lines().find(|l| l.contains("axioms/jacobi")).expect("jacobi line");
    assert!(jacobi.starts_with("FAIL"), "{jacobi}");
}

#[test]
fn broken_model_file_fails_jacobi() {
    let path = std::env::temp_dir().join(format!("algred-broken-{}.toml", std::process::id()));
    std::fs::write(&path, algred::fixtures::source("broken").unwrap()).unwrap();
    let out = algred(&["check-axioms", "--model", path.to_str().unwrap()]);
    std::fs::remove_file(&path).unwrap();
    assert_eq!(out.code, 1);
    assert!(out.stdout.lines().any(|l| l.starts_with("FAIL axioms/jacobi")), "{}", out.stdout);
}

#[test]
fn quotient_export_is_the_reduced_plane() {
    let out = algred(&["prolong", "--quotient", "--fixture", "fix-mag"]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let f = Fixture::from_str(&out.stdout, "q").unwrap();
    assert_eq!((f.model.dim(), f.model.rank()), (2, 2));
    assert!(f.model.check_axioms(&Default::default()).iter().all(|r| r.pass));
    assert_eq!(algred(&["prolong", "--quotient", "--fixture", "fix-so3-act"]).code, 3);
}

#[test]
fn broken_structure_is_refused_where_validated() {
    let out = algred(&["verify", "lifts", "--fixture", "broken"]);
    assert_eq!(out.code, 3);
    assert!(out.stderr.contains("model error"));
}

#[test]
fn numbered_alias_runs_the_reduced_fiber_suite() {
    let out = algred(&["verify", "theorem-2.8", "--fixture", "fix-tm2-translation", "--mu", "0"]);
    assert_eq!(out.code, 0, "{}{}", out.stdout, out.stderr);
    assert!(out.stdout.contains("reduce/kernel-is-isotropy"));
    let named = algred(&["verify", "reduced-fiber", "--fixture", "fix-tm2-translation", "--mu", "0"]);
    assert_eq!(named.stdout, out.stdout.replace("theorem-2.8", "reduced-fiber"));
}

#[test]
fn json_reports_are_byte_identical_across_runs() {
    let dir = std::env::temp_dir().join(format!("algred-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let (a, b) = (dir.join("a.json"), dir.join("b.json"));
    for path in [&a, &b] {
        let out = algred(&["verify", "magnetic", "--fixture", "fix-mag", "--samples", "8", "--out", path.to_str().unwrap()]);
        assert_eq!(out.code, 0, "{}", out.stdout);
    }
    let (ta, tb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(ta, tb);
    let v: serde_json::Value = serde_json::from_slice(&ta).unwrap();
    assert!(v["records"].as_array().is_some_and(|r| !r.is_empty()), "{v}");
    let other = dir.join("c.json");
    algred(&["verify", "magnetic", "--fixture", "fix-mag", "--samples", "8", "--seed", "5", "--out", other.to_str().unwrap()]);
    assert_ne!(std::fs::read(&other).unwrap(), ta);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn prolongation_round_trips_through_the_model_format() {
    let out = algred(&["prolong", "--fixture", "fix-so3"]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let f = Fixture::from_str(&out.stdout, "p").unwrap();
    assert_eq!(f.model.rank(), 6);
    assert_eq!(f.model.dim(), 3);
    assert!(f.model.check_axioms(&Default::default()).iter().all(|r| r.pass));
}

#[test]
fn reduce_reports_the_coadjoint_orbit_dimension() {
    // J = −y here, so the level set of (0,0,1) is y = (0,0,−1).
    let out = algred(&["reduce", "--fixture", "fix-so3", "--mu", "0,0,1", "--at", "0,0,-1"]);
    assert_eq!(out.code, 0, "{}{}", out.stdout, out.stderr);
    assert!(out.stdout.contains("dim K/G_μ = 2"), "{}", out.stdout);
    let off = algred(&["reduce", "--fixture", "fix-so3", "--mu", "0,0,1", "--at", "0,1,1"]);
    assert_eq!(off.code, 2, "{}", off.stderr);
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(algred(&["verify", "no-such-suite", "--fixture", "fix-so3"]).code, 2);
    assert_eq!(algred(&["check-axioms"]).code, 2);
    assert_eq!(algred(&["check-axioms", "--fixture", "fix-so3", "--tol-scale", "0"]).code, 2);
    assert_eq!(algred(&["verify", "momentum", "--fixture", "fix-so3", "--mu", "1,2"]).code, 2);
    assert_eq!(algred(&["check-axioms", "--fixture", "no-such-fixture"]).code, 3);
    assert_eq!(algred(&["--help"]).code, 0);
}

#[test]
fn missing_sections_are_model_errors() {
    let out = algred(&["verify", "magnetic", "--fixture", "fix-so3"]);
    assert_eq!(out.code, 3);
    assert!(out.stderr.contains("connection"), "{}", out.stderr);
}

#[test]
fn dynamics_writes_trajectories() {
    let path = std::env::temp_dir().join(format!("algred-traj-{}.csv", std::process::id()));
    let out = algred(&["dynamics", "--fixture", "fix-tm2-translation", "--csv", path.to_str().unwrap()]);
    assert_eq!(out.code, 0, "{}", out.stdout);
    let text = std::fs::read_to_string(&path).unwrap();
    std::fs::remove_file(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,projected1,projected2,reduced1,reduced2"));
    assert!(lines.count() > 100);
}

#[test]
fn binary_forwards_the_exit_code() {
    let bin = env!("CARGO_BIN_EXE_algred");
    let ok = Command::new(bin).args(["check-axioms", "--fixture", "fix-tm2"]).output().unwrap();
    assert_eq!(ok.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&ok.stdout).contains("PASS axioms/jacobi"));
    let bad = Command::new(bin).args(["check-axioms", "--fixture", "broken"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(1));
}
