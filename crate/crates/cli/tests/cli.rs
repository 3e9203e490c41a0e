use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};

fn cylflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cylflow"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn out_arg(dir: &Path) -> String {
    dir.to_str().unwrap().to_string()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn spectrum_rows(dir: &Path) -> Vec<(String, f64, String)> {
    let text = std::fs::read_to_string(dir.join("spectrum.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("alpha_multi_index,fourier_m,eigenvalue,classification")
    );
    lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            assert_eq!(f.len(), 4, "{l}");
            (f[0].to_string(), f[2].parse().unwrap(), f[3].to_string())
        })
        .collect()
}

#[test]
fn spectrum_lists_lowest_levels() {
    let dir = tempfile::tempdir().unwrap();
    let o = cylflow(&[
        "spectrum",
        "--a",
        "0.5",
        "--naxis",
        "1",
        "--out",
        &out_arg(dir.path()),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = spectrum_rows(dir.path());
    let lowest: Vec<f64> = rows.iter().take(7).map(|r| r.1).collect();
    assert_eq!(lowest, vec![-1.0, -0.5, -0.5, -0.5, 0.0, 0.0, 0.0]);
    assert_eq!(rows[0].2, "unstable");
    assert_eq!(rows[4].2, "zero");
    assert!(rows.windows(2).all(|w| w[0].1 <= w[1].1));
}

#[test]
fn manifest_hashes_match_files() {
    let dir = tempfile::tempdir().unwrap();
    let o = cylflow(&[
        "spectrum",
        "--naxis",
        "2",
        "--ny",
        "6",
        "--m-omega",
        "3",
        "--out",
        &out_arg(dir.path()),
    ]);
    assert!(o.status.success());
    let m = read_json(&dir.path().join("manifest.json"));
    assert_eq!(m["command"], "spectrum");
    let arts = m["artifacts"].as_array().unwrap();
    assert_eq!(arts.len(), 2);
    for a in arts {
        let data = std::fs::read(dir.path().join(a["file"].as_str().unwrap())).unwrap();
        let hex: String = Sha256::digest(&data)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect();
        assert_eq!(a["sha256"].as_str().unwrap(), hex);
        assert_eq!(a["bytes"].as_u64().unwrap() as usize, data.len());
    }
}

#[test]
fn reruns_are_byte_identical() {
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&d1, &d2] {
        let o = cylflow(&[
            "simulate",
            "--tau-max",
            "1",
            "--seed",
            "7",
            "--out",
            &out_arg(d.path()),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let m1 = std::fs::read(d1.path().join("manifest.json")).unwrap();
    let m2 = std::fs::read(d2.path().join("manifest.json")).unwrap();
    assert_eq!(m1, m2);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "[spectrum]\na = 0.6\nnaxis = 1\nny = 8\nm_omega = 2\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = cylflow(&[
        "--config",
        cfg.to_str().unwrap(),
        "spectrum",
        "--a",
        "0.5",
        "--out",
        &out_arg(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = spectrum_rows(&out);
    assert_eq!(rows[0].1, -1.0);
    // ny = 8 and m_omega = 2 from the file: 9 Hermite degrees times 5 frequencies.
    assert_eq!(rows.len(), 9 * 5);
    let written = std::fs::read_to_string(out.join("config.toml")).unwrap();
    assert!(written.contains("a = 0.5"), "{written}");
}

#[test]
fn invalid_configuration_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = cylflow(&["manifold", "--delta", "0.5", "--out", &out_arg(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("delta"));

    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[manifold]\nunknown_key = 1\n").unwrap();
    let o = cylflow(&[
        "--config",
        cfg.to_str().unwrap(),
        "manifold",
        "--out",
        &out_arg(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(2));

    let o = cylflow(&[
        "reconstruct",
        "--path",
        "/nonexistent/path.json",
        "--out",
        &out_arg(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn zero_amplitude_has_no_nonlinear_remainder() {
    let dir = tempfile::tempdir().unwrap();
    let o = cylflow(&[
        "verify",
        "--suite",
        "nonlinearity",
        "--amplitude",
        "0",
        "--out",
        &out_arg(dir.path()),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = read_json(&dir.path().join("report.json"));
    assert_eq!(r["pass"], true);
    assert!(r["remainder_norm"].as_f64().unwrap() < 1e-12, "{r}");
    assert!(String::from_utf8_lossy(&o.stdout).contains("[PASS] identity_residual"));
}

#[test]
fn failed_verification_exits_with_one() {
    // The symmetry parameters of the computed fixed point do not decay, so this suite fails.
    let dir = tempfile::tempdir().unwrap();
    let o = cylflow(&["verify", "--suite", "decay", "--out", &out_arg(dir.path())]);
    assert_eq!(
        o.status.code(),
        Some(1),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let r = read_json(&dir.path().join("report.json"));
    assert_eq!(r["pass"], false);
    assert!(dir.path().join("manifest.json").exists());
}

#[test]
fn manifold_then_reconstruct() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m");
    let o = cylflow(&[
        "--jobs",
        "2",
        "manifold",
        "--tau-max",
        "8",
        "--out",
        &out_arg(&m),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = read_json(&m.join("report.json"));
    assert_eq!(r["contracts"], true);
    assert!(r["residuals"]["orthogonality_max"].as_f64().unwrap() <= 1e-6);

    let rec = dir.path().join("r");
    let o = cylflow(&[
        "reconstruct",
        "--path",
        m.join("path.json").to_str().unwrap(),
        "--times",
        "0,0.5",
        "--out",
        &out_arg(&rec),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let surface = std::fs::read_to_string(rec.join("surface.csv")).unwrap();
    // 13 axial points times 16 angles at each of the two times.
    assert_eq!(surface.lines().count(), 1 + 2 * 13 * 16);
    let r = read_json(&rec.join("report.json"));
    assert!(r["scale_residual"].as_f64().unwrap() < 1e-8);
}
