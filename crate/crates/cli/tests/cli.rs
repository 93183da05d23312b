use std::path::PathBuf;
use std::process::{Command, Output};

use heatpar_core::bessel::{kernel_halfline, kernel_halfline_dirichlet};

fn data(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "data", name].iter().collect();
    p.to_string_lossy().into_owned()
}

fn heatpar(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_heatpar")).args(args).output().expect("binary runs")
}

fn status(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// (t, x, y, value) rows of a kernel CSV.
fn rows(o: &Output) -> Vec<(f64, usize, usize, f64)> {
    let text = stdout(o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,x,y,value"));
    lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[1].parse().unwrap(), f[2].parse().unwrap(), f[3].parse().unwrap())
        })
        .collect()
}

#[test]
fn k2_spectral_row() {
    let o = heatpar(&["kernel", "--graph", &data("k2.toml"), "--t-max", "1", "--steps", "4"]);
    assert_eq!(status(&o), 0);
    let r = rows(&o);
    assert_eq!(r.len(), 5 * 4);
    let (t, x, y, v) = r[16];
    assert_eq!((t, x, y), (1.0, 0, 0));
    assert!((v - (1.0 + (-2f64).exp()) / 2.0).abs() < 1e-15);
    // 17 significant digits
    assert!(stdout(&o).lines().nth(17).unwrap().ends_with("e-1") && stdout(&o).contains("5.6766764161830"));
}

#[test]
fn single_vertex_kernel_is_one() {
    for method in ["spectral", "expm", "parametrix-diagonal"] {
        let o = heatpar(&["kernel", "--graph", &data("single_vertex.toml"), "--steps", "8", "--method", method]);
        assert_eq!(status(&o), 0, "{method}");
        assert!(rows(&o).iter().all(|r| r.3 == 1.0), "{method}");
    }
}

#[test]
fn k5_minus_edge_verifies() {
    let o = heatpar(&[
        "verify", "--graph", &data("k5_minus_edge.toml"), "--method", "parametrix-restriction", "--steps", "1000",
        "--budget", "5e-6",
    ]);
    assert_eq!(status(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = heatpar(&[
        "verify", "--graph", &data("k5_minus_edge.toml"), "--method", "closed-form-complete", "--budget", "1e-10",
        "--t-max", "4", "--steps", "16",
    ]);
    assert_eq!(status(&o), 0);
}

#[test]
fn spectral_matches_expm() {
    let o = heatpar(&[
        "verify", "--graph", &data("random8.toml"), "--method", "expm", "--budget", "1e-10", "--t-max", "3", "--steps", "30",
    ]);
    assert_eq!(status(&o), 0);
}

#[test]
fn coarse_grid_reports_budget_failure() {
    let o = heatpar(&[
        "verify", "--graph", &data("k5_minus_edge.toml"), "--method", "parametrix-restriction", "--steps", "4",
        "--budget", "5e-6", "--format", "json",
    ]);
    assert_eq!(status(&o), 3);
    let report: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["within_budget"], false);
    assert!(report["sup"].as_f64().unwrap() > 5e-6);
    assert!(String::from_utf8_lossy(&o.stderr).contains("exceeds budget"));
}

#[test]
fn halfline_closed_forms() {
    let o = heatpar(&["kernel", "--graph", &data("halfline_window.toml"), "--method", "closed-form-halfline", "--t-max", "2", "--steps", "4"]);
    assert_eq!(status(&o), 0);
    for (t, x, y, v) in rows(&o) {
        let e = kernel_halfline(x as i64, y as i64, t).unwrap();
        assert!((v - e).abs() <= 1e-16 + 1e-13 * e.abs(), "{v} vs {e}");
    }
    let o = heatpar(&[
        "kernel", "--graph", &data("halfline_window.toml"), "--method", "closed-form-halfline", "--boundary", "dirichlet",
        "--t-max", "2", "--steps", "2",
    ]);
    assert_eq!(status(&o), 0);
    for (t, x, y, v) in rows(&o) {
        let e = kernel_halfline_dirichlet(x as i64, y as i64, t).unwrap();
        assert!((v - e).abs() <= 1e-16 + 1e-13 * e.abs(), "{v} vs {e}");
    }
}

#[test]
fn halfline_parametrices_verify() {
    for method in ["parametrix-restriction", "dirichlet"] {
        let o = heatpar(&[
            "verify", "--graph", &data("halfline_window.toml"), "--method", method, "--reference", "closed-form-halfline",
            "--t-max", "2", "--steps", "800", "--budget", "1e-5",
        ]);
        assert_eq!(status(&o), 0, "{method}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn embedded_path_verifies() {
    let o = heatpar(&[
        "verify", "--graph", &data("path3_interval.toml"), "--method", "parametrix-embed", "--t-max", "0.5", "--tol", "1e-13",
        "--budget", "1e-3",
    ]);
    assert_eq!(status(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn identities() {
    let o = heatpar(&["identity", "watson", "--m", "0", "--n", "0", "--x", "2", "--terms", "40", "--format", "json"]);
    assert_eq!(status(&o), 0);
    let r: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(r["residual"].as_f64().unwrap() <= 1e-8);
    assert!((r["rhs"].as_f64().unwrap() - 2f64.sinh()).abs() < 1e-13);

    let o = heatpar(&["identity", "intro", "--x", "1", "--y", "0", "--t", "1", "--order", "20", "--format", "json"]);
    assert_eq!(status(&o), 0);
    let r: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(r["residual"].as_f64().unwrap() <= 1e-6);

    for name in ["watson", "intro", "halfline-special-1", "halfline-special-2"] {
        let o = heatpar(&["identity", name, "--x", if name == "watson" { "0" } else { "1" }, "--t", "0", "--format", "json"]);
        assert_eq!(status(&o), 0, "{name}");
        let r: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
        assert_eq!(r["residual"].as_f64().unwrap(), 0.0, "{name}");
    }

    assert_eq!(status(&heatpar(&["identity", "watson", "--x", "100"])), 2);
    assert_eq!(status(&heatpar(&["identity", "intro", "--x", "0"])), 2);
    assert_eq!(status(&heatpar(&["identity", "intro", "--x", "1", "--quad-steps", "4", "--tol", "1e-14"])), 3);
}

#[test]
fn input_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "vertices = [0, 1]\nedges = [{ u = 0, v = 1 }\n").unwrap();
    let o = heatpar(&["kernel", "--graph", bad.to_str().unwrap()]);
    assert_eq!(status(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 2") && err.contains("column"), "{err}");

    assert_eq!(status(&heatpar(&["kernel", "--graph", &data("k2.toml"), "--method", "dirichlet"])), 2);
    assert_eq!(status(&heatpar(&["kernel", "--graph", &data("k2.toml"), "--t-max", "0"])), 2);
    assert_eq!(status(&heatpar(&["kernel", "--graph", &data("k2.toml"), "--steps", "0"])), 2);
    assert_eq!(status(&heatpar(&["kernel", "--graph", &data("missing.toml")])), 2);
    assert_eq!(status(&heatpar(&["kernel"])), 2);
}

#[test]
fn output_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for threads in ["1", "1", "2"] {
        let out = dir.path().join(format!("k{}.csv", outputs.len()));
        let o = Command::new(env!("CARGO_BIN_EXE_heatpar"))
            .env("HEATPAR_THREADS", threads)
            .args([
                "kernel", "--graph", &data("random8.toml"), "--method", "parametrix-diagonal", "--steps", "300", "--out",
                out.to_str().unwrap(),
            ])
            .output()
            .unwrap();
        assert_eq!(status(&o), 0);
        outputs.push(std::fs::read(&out).unwrap());
    }
    assert!(outputs.windows(2).all(|w| w[0] == w[1]));
    let o = Command::new(env!("CARGO_BIN_EXE_heatpar"))
        .env("HEATPAR_THREADS", "zero")
        .args(["kernel", "--graph", &data("k2.toml")])
        .output()
        .unwrap();
    assert_eq!(status(&o), 2);
}

#[test]
fn export_writes_all_series() {
    let o = heatpar(&["export", "--graph", &data("k5_minus_edge.toml"), "--method", "parametrix-restriction", "--steps", "10", "--format", "json"]);
    assert_eq!(status(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    for s in ["parametrix", "heat_image", "correction", "kernel"] {
        assert_eq!(v["series"][s].as_array().unwrap().len(), 11, "{s}");
    }
    // the ambient kernel starts at the identity and F vanishes at t = 0
    assert_eq!(v["series"]["parametrix"][0][0][0], 1.0);
    assert_eq!(v["series"]["correction"][0][1][2], 0.0);
    assert_eq!(status(&heatpar(&["export", "--graph", &data("k2.toml"), "--method", "spectral"])), 2);
}
