//! End-to-end tests of the `transit` binary.

use std::path::Path;
use std::process::{Command, Output};

use transit_cli::config::read_config_file;
use transit_cli::{extract_config, MapSpec, Subcommand};
use transit_core::TransitDecomposition;

fn transit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_transit")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = transit(args);
    assert!(out.status.success(), "transit {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn verify_passes_and_catches_an_injected_fault() {
    let out = ok(&["verify", "--samples", "1000000"]);
    let report = String::from_utf8(out.stdout).unwrap();
    assert!(report.contains("expected (2, 3, 2)"), "{report}");
    assert!(!report.contains("[FAIL]"), "{report}");

    for fault in ["linear-tj", "linear-average", "diag-tj", "shear-tj"] {
        let out = transit(&["verify", "--samples", "1000000", "--inject-fault", fault]);
        assert_eq!(out.status.code(), Some(1), "fault {fault} was not caught");
        assert!(String::from_utf8_lossy(&out.stdout).contains("[FAIL]"));
    }
}

#[test]
fn bad_parameters_exit_with_a_field_diagnostic() {
    let out = transit(&["decompose", "--map", "linear", "--lambda", "0.5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("lambda"));

    let out = transit(&["henon-zone", "--k", "9"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains('k'));

    let out = transit(&["sweep", "--k-min", "0.5", "--k-max", "0.4"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("k_max"));
}

#[test]
fn shear_decomposition_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("shear.csv");
    ok(&["decompose", "--map", "shear", "--samples", "1000000", "--out", path_str(&out)]);
    let (d, _) = TransitDecomposition::read_csv(std::fs::File::open(&out).unwrap()).unwrap();
    for j in 1..=5u64 {
        let exact = transit_core::analytic::shear_tj(j as i64).unwrap();
        let z = (d.measure(j) - exact) / d.stderr_of(j);
        assert!(z.abs() < 4.0, "j = {j}: {} vs {exact} ({z:.1} sigma)", d.measure(j));
    }
    assert!((d.measure(2) - 1.0 / 6.0).abs() < 4.0 * d.stderr_of(2));
    assert!(dir.path().join("shear.summary.json").exists());
    assert!(dir.path().join("shear.dist.csv").exists());
}

#[test]
fn linear_decomposition_mean_exit_time() {
    let out = ok(&["decompose", "--map", "linear", "--lambda", "3", "--samples", "1000000", "--format", "json"]);
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let avg = doc["summary"]["avg_exit_entry"]["value"].as_f64().unwrap();
    // <t+>_I = lambda / (lambda - 1) for the linear map.
    assert!((avg - 1.5).abs() < 0.005 * 1.5, "<t+>_I = {avg}");
    assert_eq!(extract_config(std::str::from_utf8(&out.stdout).unwrap()).unwrap().map, Some(MapSpec::Linear { lambda: 3.0 }));
}

#[test]
fn henon_decomposition_has_no_short_exits() {
    let out = ok(&["decompose", "--map", "henon", "--k", "0.5", "--n-pixels", "400", "--samples", "100000"]);
    let (d, _) = TransitDecomposition::read_csv(out.stdout.as_slice()).unwrap();
    let first = d.bins.iter().position(|&m| m > 0.0).map(|i| i + 1);
    assert_eq!(first, Some(4), "first nonzero bin");
}

#[test]
fn zone_boundary_is_resolved() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("zone.csv");
    ok(&["henon-zone", "--k", "0.5", "--n-pixels", "2000", "--out", path_str(&out)]);
    let text = std::fs::read_to_string(&out).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "x,y,which_manifold,iterate_depth");
    assert!(rows.len() - 1 >= 4000, "{} vertices", rows.len() - 1);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("zone.summary.json")).unwrap()).unwrap();
    let mu_i = summary["summary"]["areas"]["lobe_action"].as_f64().unwrap();
    assert!(mu_i > 0.0 && mu_i < summary["summary"]["areas"]["zone_action"].as_f64().unwrap());
}

#[test]
fn sweep_writes_ordered_rows_with_fixed_header() {
    let out = ok(&["sweep", "--k-min", "0.3", "--k-max", "0.5", "--steps", "3", "--n-pixels", "200", "--t-max", "1000"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(
        rows[0],
        "k,mu_A,mu_I,avg_exit_I,mu_A_acc,mu_A_i,acc_frac,inacc_frac,censored_frac,N,t_max,seconds,status"
    );
    let ks: Vec<&str> = rows[1..].iter().map(|r| r.split(',').next().unwrap()).collect();
    assert_eq!(ks.len(), 3);
    let ks: Vec<f64> = ks.iter().map(|k| k.parse().unwrap()).collect();
    assert_eq!(ks, vec![0.3, 0.4, 0.5]);
    assert!(rows[1..].iter().all(|r| r.ends_with(",ok") || r.ends_with(",mostly_trapped")));
    // Without --timing the seconds column stays empty.
    assert!(rows[1..].iter().all(|r| r.split(',').nth(11) == Some("")));
}

#[test]
fn outputs_are_reproducible_and_independent_of_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, jobs: &str| -> String {
        let out = dir.path().join(name);
        ok(&[
            "sweep", "--k-min", "0.4", "--k-max", "0.6", "--steps", "2", "--n-pixels", "200", "--t-max", "1000",
            "--jobs", jobs, "--out", path_str(&out),
        ]);
        // The embedded config records the output path; normalise it.
        std::fs::read_to_string(&out).unwrap().replace(path_str(&out), "OUT")
    };
    let data = |s: &str| s.lines().filter(|l| !l.starts_with("# config")).collect::<Vec<_>>().join("\n");
    assert_eq!(run("a.csv", "1"), run("b.csv", "1"));
    assert_eq!(data(&run("c.csv", "1")), data(&run("d.csv", "3")));

    let decompose = |jobs: &str| {
        let out = ok(&["decompose", "--map", "henon", "--k", "0.5", "--n-pixels", "200", "--samples", "50000", "--jobs", jobs]);
        String::from_utf8(out.stdout).unwrap()
    };
    assert_eq!(data(&decompose("1")), data(&decompose("2")));
}

#[test]
fn embedded_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run.csv");
    ok(&["decompose", "--map", "diag", "--eigenvalues", "2,1.5,1/3", "--samples", "20000", "--seed", "7", "--out", path_str(&out)]);
    let cfg = read_config_file(&out).unwrap();
    assert_eq!(cfg.subcommand, Subcommand::Decompose);
    assert_eq!(cfg.seed, 7);
    assert_eq!(cfg.samples, 20000);
    assert_eq!(cfg.map, Some(MapSpec::Diag { eigenvalues: vec![2.0, 1.5, 1.0 / 3.0] }));
    assert_eq!(read_config_file(&dir.path().join("run.dist.csv")).unwrap(), cfg);
    assert_eq!(read_config_file(&dir.path().join("run.summary.json")).unwrap(), cfg);

    // Re-running from the recovered configuration gives the same bytes.
    let again = transit_cli::commands::decompose(&cfg).unwrap();
    let mut buf = Vec::new();
    let mut cfg_stdout = cfg.clone();
    cfg_stdout.out = None;
    transit_cli::commands::write_decompose(&cfg_stdout, &again, &mut buf).unwrap();
    let original = std::fs::read_to_string(&out).unwrap();
    let rerun = String::from_utf8(buf).unwrap();
    let body = |s: &str| s.lines().filter(|l| !l.starts_with("# config")).collect::<Vec<_>>().join("\n");
    assert_eq!(body(&original), body(&rerun));
}
