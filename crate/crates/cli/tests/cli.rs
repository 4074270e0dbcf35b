use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn geomppca(args: &[&str], out: &Path) -> Output {
    geomppca_env(args, out, &[])
}

fn geomppca_env(args: &[&str], out: &Path, env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_geomppca"));
    cmd.args(args).arg("--out").arg(out);
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn ok(o: &Output) {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(str::to_string).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(str::to_string).collect()).collect();
    (header, rows)
}

fn column(header: &[String], rows: &[Vec<String>], name: &str) -> Vec<f64> {
    let c = header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"));
    rows.iter().map(|r| r[c].parse().unwrap()).collect()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const SAMPLE: &[&str] = &["sample", "--lambda", "0.4", "--angle", "0.3", "--sigma", "0.075", "--N", "64", "--n", "50", "--seed", "5"];

#[test]
fn sample_reruns_are_bitwise_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    ok(&geomppca(SAMPLE, &a));
    ok(&geomppca(SAMPLE, &b));
    for f in ["trajectories.csv", "endpoints.csv", "config.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let (header, rows) = read_csv(&a.join("endpoints.csv"));
    assert_eq!(rows.len(), 64);
    assert_eq!(&header[..3], ["sample_id", "x1", "x2"]);
    let (_, traj) = read_csv(&a.join("trajectories.csv"));
    assert_eq!(traj.len(), 64 * 51);
}

#[test]
fn replaying_config_reproduces_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    ok(&geomppca(SAMPLE, &a));
    let config = a.join("config.json");
    ok(&geomppca(&["run", "--config", config.to_str().unwrap()], &b));
    for f in ["trajectories.csv", "endpoints.csv", "config.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn thread_count_does_not_change_results() {
    let tmp = tempfile::tempdir().unwrap();
    let args = ["density", "--lambda", "0.4", "--sigma", "0.1", "--grid", "-0.5:0.5:3", "--n", "10", "--bridges", "64"];
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    ok(&geomppca_env(&args, &a, &[("GEOMPPCA_THREADS", "1")]));
    ok(&geomppca_env(&args, &b, &[("GEOMPPCA_THREADS", "4")]));
    assert_eq!(fs::read(a.join("density.csv")).unwrap(), fs::read(b.join("density.csv")).unwrap());
}

#[test]
fn flat_density_matches_the_gaussian() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("d");
    let args = ["density", "--manifold", "flat2", "--W", "0.8,0;0.3,0.5", "--sigma", "0.2", "--grid", "-1:1:3", "--n", "10", "--bridges", "2000", "--seed", "1"];
    ok(&geomppca(&args, &out));
    let (header, rows) = read_csv(&out.join("density.csv"));
    assert_eq!(rows.len(), 9);
    let (x1, x2) = (column(&header, &rows, "x1"), column(&header, &rows, "x2"));
    let (p, se) = (column(&header, &rows, "density_volg"), column(&header, &rows, "stderr"));
    // covariance W Wᵀ + σ² I
    let (a, b, c) = (0.64 + 0.04, 0.24, 0.09 + 0.25 + 0.04);
    let det = a * c - b * b;
    for i in 0..9 {
        let q = (c * x1[i] * x1[i] - 2.0 * b * x1[i] * x2[i] + a * x2[i] * x2[i]) / det;
        let exact = (-0.5 * q).exp() / (2.0 * std::f64::consts::PI * det.sqrt());
        assert!((p[i] - exact).abs() < 3.0 * se[i], "({}, {}): {} vs {exact} ± {}", x1[i], x2[i], p[i], se[i]);
    }
    assert_eq!(x2[..3], [-1.0, 0.0, 1.0]);
}

#[test]
fn invalid_manifold_fails_without_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("never");
    let o = geomppca(&["sample", "--manifold", "torus", "--lambda", "1", "--sigma", "0.1"], &out);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("torus"));
    assert!(!out.exists());
}

#[test]
fn failing_run_removes_partial_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("partial");
    // the data are written before the fit rejects k
    let o = geomppca(&["fit", "--manifold", "flat2", "--true-lambda", "1", "--true-sigma", "0.2", "--N", "5", "--k", "3"], &out);
    assert!(!o.status.success());
    assert!(!out.exists());
}

#[test]
fn bridge_writes_paths_and_latent_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("b");
    ok(&geomppca(&["bridge", "--lambda", "0.4", "--sigma", "0.1", "--target", "0.3,-0.1", "--n", "20", "--bridges", "50"], &out));
    let (header, rows) = read_csv(&out.join("bridges.csv"));
    assert_eq!(rows.len(), 50 * 21);
    let x1 = column(&header, &rows, "x1");
    assert!((x1[20] - 0.3).abs() < 1e-9);
    let (header, rows) = read_csv(&out.join("latent_mean.csv"));
    assert_eq!(rows.len(), 21);
    assert_eq!(column(&header, &rows, "xhat1")[0], 0.0);
    let s = read_json(&out.join("latent_summary.json"));
    assert_eq!(s["n_samples"], 50);
    assert!(s["density"]["density_volg"].as_f64().unwrap() > 0.0);
    assert!(read_json(&out.join("diagnostics.json"))["min_ess"].as_f64().unwrap() > 1.0);
}

#[test]
fn fit_on_synthetic_data() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("f");
    let args = [
        "fit", "--manifold", "flat2", "--true-lambda", "1", "--true-sigma", "0.3", "--N", "40", "--sim-steps", "1", "--k", "1", "--n", "2",
        "--bridges", "100", "--max-iter", "4", "--seed", "2",
    ];
    ok(&geomppca(&args, &out));
    let (_, data) = read_csv(&out.join("data.csv"));
    assert_eq!(data.len(), 40);
    let (header, trace) = read_csv(&out.join("trace.csv"));
    assert!(!trace.is_empty());
    assert!(header.contains(&"lambda1".to_string()));
    let fit = read_json(&out.join("fit.json"));
    let w = fit["params"]["w"].as_array().unwrap();
    assert_eq!(w.len(), 2);
    assert_eq!(w[0].as_array().unwrap().len(), 1);
    let var = fit["eigen"]["variances"][0].as_f64().unwrap();
    assert!(var > 0.3 && var < 3.0, "{var}");

    // the fitted parameters feed other commands
    let comp = tmp.path().join("c");
    let fit_json = out.join("fit.json");
    let data_csv = out.join("data.csv");
    ok(&geomppca(
        &[
            "components", "--manifold", "flat2", "--params", fit_json.to_str().unwrap(), "--data", data_csv.to_str().unwrap(), "--n", "5",
            "--bridges", "40",
        ],
        &comp,
    ));
    let (header, rows) = read_csv(&comp.join("components.csv"));
    assert_eq!(rows.len(), 40);
    assert!(header.contains(&"z1".to_string()));
}

#[test]
fn mpp_shoots_and_estimates() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("shoot");
    ok(&geomppca(&["mpp", "--W", "0.5,0;0,0.3", "--sigma", "0.1", "--target", "0.2,0.1", "--steps", "50"], &out));
    let (header, rows) = read_csv(&out.join("mpp.csv"));
    assert_eq!(rows.len(), 51);
    assert!(header.contains(&"nu2_2".to_string()));
    let j = read_json(&out.join("mpp.json"));
    assert!(j["endpoint_residual"].as_f64().unwrap() < 1e-6);

    let est = tmp.path().join("est");
    ok(&geomppca(
        &["mpp", "--W", "0.5,0;0,0.5", "--sigma", "0.1", "--true-lambda", "0.04,0.01", "--true-sigma", "0.001", "--N", "20", "--steps", "20"],
        &est,
    ));
    let j = read_json(&est.join("mpp.json"));
    assert_eq!(j["sq_distances"].as_array().unwrap().len(), 20);

    let bad = tmp.path().join("bad");
    assert!(!geomppca(&["mpp", "--W", "0.5,0;0,0.5", "--sigma", "0.1"], &bad).status.success());
}

#[test]
fn baselines_on_a_file() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data.csv");
    fs::write(&data, "x1,x2\n0.1,0.0\n-0.1,0.02\n0.2,-0.01\n-0.2,0.0\n0.05,0.01\n").unwrap();
    for method in ["ppca", "tpca"] {
        let out = tmp.path().join(method);
        ok(&geomppca(&["baseline", "--method", method, "--data", data.to_str().unwrap()], &out));
        let j = read_json(&out.join("baseline.json"));
        assert_eq!(j["method"], method);
        assert_eq!(j["data"].as_array().unwrap().len(), 5);
        assert!(j["eigvals"][0].as_f64().unwrap() > j["eigvals"][1].as_f64().unwrap());
    }
}
