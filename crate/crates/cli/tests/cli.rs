use std::path::{Path, PathBuf};
use std::process::Command;

fn otess(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_otess")).args(args).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn write_scenario(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn report(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

const TWO_SITES: &str = r#"{
  "domain": "unit_square",
  "p": 2,
  "resolution": 64,
  "sites": [
    {"position": [0.2713, 0.4589], "target_mass": 0.5},
    {"position": [0.7287, 0.5411], "target_mass": 0.5}
  ]
}"#;

#[test]
fn solve_writes_report_and_figure() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = write_scenario(tmp.path(), "two.json", TWO_SITES);
    let out = tmp.path().join("out");
    let (code, err) = otess(&["solve", "--scenario", scenario.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let r = report(&out);
    assert_eq!(r["schema_version"], 1);
    assert_eq!(r["solver"]["converged"], true);
    for s in r["sites"].as_array().unwrap() {
        assert!((s["mass"].as_f64().unwrap() - 0.5).abs() <= 1e-3);
        assert_eq!(s["components"], 1);
        assert_eq!(s["convex"], true);
    }
    let svg = std::fs::read_to_string(out.join("figure.svg")).unwrap();
    assert!(svg.starts_with("<?xml") && svg.trim_end().ends_with("</svg>"));
}

#[test]
fn input_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = TWO_SITES.replace("\"target_mass\": 0.5}\n", "\"target_mass\": 0.6}\n");
    let scenario = write_scenario(tmp.path(), "bad.json", &bad);
    let (code, err) = otess(&["solve", "--scenario", scenario.to_str().unwrap(), "--out", "unused"]);
    assert_eq!(code, 2);
    assert!(err.contains("sum to 1"), "{err}");

    let scenario = write_scenario(tmp.path(), "weights.json", TWO_SITES);
    let (code, err) = otess(&["tessellate", "--scenario", scenario.to_str().unwrap(), "--out", "unused"]);
    assert_eq!(code, 2, "{err}");

    let (code, _) = otess(&["solve", "--scenario", "/nonexistent/scenario.json"]);
    assert_eq!(code, 2);
}

#[test]
fn unconverged_solve_exits_with_three_and_still_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let text = r#"{
      "domain": "unit_square", "p": 2, "resolution": 64,
      "sites": [
        {"position": [0.1371, 0.2293], "target_mass": 0.7},
        {"position": [0.8129, 0.6917], "target_mass": 0.2},
        {"position": [0.4413, 0.8551], "target_mass": 0.1}
      ],
      "solver": {"tol": 1e-4, "max_iter": 1}
    }"#;
    let scenario = write_scenario(tmp.path(), "short.json", text);
    let out = tmp.path().join("out");
    let (code, _) = otess(&["solve", "--scenario", scenario.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, 3);
    assert_eq!(report(&out)["solver"]["converged"], false);
}

#[test]
fn failed_check_exits_with_four() {
    let tmp = tempfile::tempdir().unwrap();
    let text = r#"{"p": 1.5, "alpha": 5}"#;
    let scenario = write_scenario(tmp.path(), "coarse.json", text);
    let out = tmp.path().join("out");
    // far too coarse to resolve the thin second component
    let args = [
        "witness-convex",
        "--scenario",
        scenario.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--resolution",
        "16",
    ];
    let (code, err) = otess(&args);
    assert_eq!(code, 4, "{err}");
    assert_eq!(report(&out)["checks"]["components"], false);
}

#[test]
fn seed_override_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let text = r#"{
      "domain": {"sphere": {"n_lat": 24, "n_lon": 48}}, "p": 2,
      "random_sites": {"count": 4, "seed": 1, "masses": "random"}
    }"#;
    let scenario = write_scenario(tmp.path(), "sphere.json", text);
    let mut reports = Vec::new();
    for (k, seed) in ["7", "7", "8"].iter().enumerate() {
        let out = tmp.path().join(format!("out{k}"));
        let args = ["solve", "--scenario", scenario.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", seed];
        let (code, err) = otess(&args);
        assert_eq!(code, 0, "{err}");
        let mut r = report(&out);
        r.as_object_mut().unwrap().remove("timing");
        reports.push(r);
    }
    assert_eq!(reports[0], reports[1]);
    assert_ne!(reports[0]["sites"], reports[2]["sites"]);
    assert_eq!(reports[0]["scenario"]["random_sites"]["seed"], 7);
}

#[test]
fn levelcurve_exports_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let text = r#"{"mode": "levelcurve", "p": 1.5, "alpha": 5, "y_max": 6, "steps": 120, "resolution": 64}"#;
    let scenario = write_scenario(tmp.path(), "curve.json", text);
    let out = tmp.path().join("out");
    let (code, err) = otess(&["levelcurve", "--scenario", scenario.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let csv = std::fs::read_to_string(out.join("level_curve.csv")).unwrap();
    assert!(csv.starts_with("y,x\n"));
    assert!(csv.lines().count() > 100);
    assert!(report(&out)["level_curve"]["inflection_y"].as_f64().is_some());
}
