mod common;

use std::process::Command;

use hypvol::cli::{run, Outcome};
use serde_json::Value;

fn fx(name: &str) -> String {
    common::fixtures().join(name).display().to_string()
}

fn hv(args: &[&str]) -> Outcome {
    run(std::iter::once("hypvol").chain(args.iter().copied()))
}

fn result(o: &Outcome) -> Value {
    let v: Value = serde_json::from_str(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", o.stdout));
    v["result"].clone()
}

#[test]
fn rep_vol_prints_the_figure_eight_volume() {
    let o = hv(&["rep", "vol", "--tri", &fx("fig8.json"), "--rep", &fx("fig8_geometric.json"), "--seed", "0"]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    assert!(o.stdout.contains("2.02988"));
    let r = result(&o);
    assert!((r["volume"].as_f64().unwrap() - 2.0298832128).abs() < 1e-5);
    assert_eq!(r["tolerance"].as_f64().unwrap(), 1e-9);
}

#[test]
fn broken_triangulation_exits_two_with_violations() {
    let o = hv(&["tri", "validate", "--tri", &fx("broken.json"), "--no-timestamp"]);
    assert_eq!(o.code, 2);
    let rows = result(&o)["rows"].as_array().unwrap().clone();
    assert!(rows.iter().any(|v| v["kind"] == "unknown generator"));
    assert!(rows.iter().any(|v| v["kind"] == "degenerate slot"));
}

#[test]
fn validation_of_shipped_fixtures() {
    let o = hv(&["tri", "validate", "--tri", &fx("punctured_torus.json")]);
    assert_eq!(o.code, 0);
    assert_eq!(result(&o)["closed"], true);
    let o = hv(&["tri", "validate", "--tri", &fx("fig8.json"), "--rep", &fx("fig8_geometric.json")]);
    assert_eq!(o.code, 0);
    assert_eq!(result(&o)["matching"], "developed");
    assert_eq!(result(&o)["closed"], true);
}

#[test]
fn path_scan_verdicts_set_the_exit_code() {
    let conj = hv(&["path", "scan", "--path", &fx("conj.json"), "--tri", &fx("fig8.json"), "--expect-constant"]);
    assert_eq!(conj.code, 0, "{}", conj.stderr);
    assert_eq!(result(&conj)["verdict"], "constant");
    let args = ["path", "scan", "--path", &fx("dehn.json"), "--tri", &fx("fig8.json"), "--samples", "4"];
    let dehn = hv(&args);
    assert_eq!(dehn.code, 0);
    assert_eq!(result(&dehn)["monotone"], "decreasing");
    let mut strict = args.to_vec();
    strict.push("--expect-constant");
    assert_eq!(hv(&strict).code, 1);
}

#[test]
fn output_is_deterministic_without_timestamp() {
    let args = ["rep", "vol", "--tri", &fx("fig8.json"), "--rep", &fx("fig8_geometric.json"), "--no-timestamp"];
    let a = hv(&args);
    let b = hv(&args);
    assert_eq!(a, b);
    assert!(!a.stdout.contains("timestamp"));
    let c = hv(&args[..args.len() - 1]);
    assert!(c.stdout.contains("timestamp"));
}

#[test]
fn csv_and_pretty_renderings() {
    let base = ["tri", "solve", "--tri", &fx("fig8.json"), "--no-timestamp"];
    let mut csv = base.to_vec();
    csv.extend(["--format", "csv"]);
    let o = hv(&csv);
    assert_eq!(o.code, 0);
    let mut lines = o.stdout.lines();
    assert_eq!(lines.next().unwrap(), "im,re,tetrahedron");
    assert_eq!(lines.count(), 2);
    let mut pretty = base.to_vec();
    pretty.push("--pretty");
    let o = hv(&pretty);
    assert!(o.stdout.contains("edge_residual"));
    assert!(o.stdout.lines().any(|l| l.starts_with("0.866")));
}

#[test]
fn simplex_subcommands() {
    let o = hv(&["simplex", "vol", "--simplex", &fx("regular_ideal_tet.json")]);
    assert_eq!(o.code, 0);
    assert!((result(&o)["unsigned_volume"].as_f64().unwrap() - 1.0149416064).abs() < 1e-9);
    let o = hv(&["simplex", "angle", "--simplex", &fx("regular_ideal_tet.json")]);
    assert_eq!(result(&o)["rows"].as_array().unwrap().len(), 6);
    let o = hv(&["simplex", "schlafli", "--family", &fx("family_3d_ideal.json"), "--samples", "3"]);
    assert_eq!(o.code, 0, "{}", o.stdout);
    assert_eq!(result(&o)["truncated"], true);
}

#[test]
fn rep_check_classify_and_toledo() {
    let t = fx("punctured_torus.json");
    let r = fx("punctured_torus_fuchsian.json");
    assert_eq!(hv(&["rep", "check", "--tri", &t, "--rep", &r]).code, 0);
    let o = hv(&["rep", "classify", "--tri", &t, "--rep", &r]);
    assert_eq!(result(&o)["rows"][0]["class"], "parabolic_fix");
    let o = hv(&["rep", "toledo", "--tri", &t, "--rep", &r]);
    assert!((result(&o)["toledo_over_2pi"].as_f64().unwrap().abs() - 1.0).abs() < 1e-9);
    let o = hv(&["rep", "toledo", "--tri", &fx("fig8.json"), "--rep", &fx("fig8_geometric.json")]);
    assert_eq!(o.code, 2);
}

#[test]
fn usage_errors() {
    assert_eq!(hv(&["frobnicate"]).code, 2);
    assert_eq!(hv(&["rep", "vol", "--tri", "missing.json", "--rep", "missing.json"]).code, 2);
    assert_eq!(hv(&["--help"]).code, 0);
}

#[test]
fn binary_resolves_inputs_from_the_fixture_directory() {
    let out = Command::new(env!("CARGO_BIN_EXE_hypvol"))
        .args(["rep", "vol", "--tri", "fig8.json", "--rep", "fig8_geometric.json", "--no-timestamp"])
        .env("HYPVOL_FIXTURES", common::fixtures())
        .current_dir(std::env::temp_dir())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8(out.stdout).unwrap().contains("2.02988"));
    let out = Command::new(env!("CARGO_BIN_EXE_hypvol"))
        .args(["path", "scan", "--path", "conj.json", "--tri", "fig8.json", "--expect-constant"])
        .env("HYPVOL_FIXTURES", common::fixtures())
        .current_dir(std::env::temp_dir())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
}
