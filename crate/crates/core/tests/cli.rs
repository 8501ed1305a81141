use irregwave::design::DesignDensity;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_irregwave"));
    c.env_remove("IRREGWAVE_THREADS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn scenario(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

/// Writes `x,y` with `y = sin(2 pi x) + 0.3 noise` on a design drawn from `g`.
fn write_data(dir: &Path, g: &DesignDensity, n: usize) -> PathBuf {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let s = g.draw_with(n, &mut rng, 3);
    let mut body = String::from("x,y\n");
    for x in s.xs {
        let e: f64 = StandardNormal.sample(&mut rng);
        body.push_str(&format!(
            "{x},{}\n",
            (2.0 * std::f64::consts::PI * x).sin() + 0.3 * e
        ));
    }
    let p = dir.join("data.csv");
    fs::write(&p, body).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn estimate_routes_by_regime() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(
        dir.path(),
        &DesignDensity::new(0.5, 2.0, 0.0, 1.0).unwrap(),
        1 << 16,
    );
    let out = dir.path().join("two");
    let r = run(&[
        "estimate",
        "--input",
        s(&data),
        "--x0",
        "0.5",
        "--alpha",
        "2",
        "--b",
        "0",
        "--out-dir",
        s(&out),
    ]);
    assert_eq!(
        r.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&r.stderr)
    );
    let fit: serde_json::Value =
        serde_json::from_slice(&fs::read(out.join("fit.json")).unwrap()).unwrap();
    assert_eq!(fit["branch"], "two-stage");
    assert!(fit["m_hat"].is_u64());
    let curve = fs::read_to_string(out.join("curve.csv")).unwrap();
    assert_eq!(curve.lines().next(), Some("x,f_hat"));
    assert_eq!(curve.lines().count(), 4097);

    let out = dir.path().join("one");
    let r = run(&[
        "estimate",
        "--input",
        s(&data),
        "--x0",
        "0.5",
        "--alpha",
        "0.5",
        "--b",
        "0",
        "--out-dir",
        s(&out),
    ]);
    assert_eq!(r.status.code(), Some(0));
    let fit: serde_json::Value =
        serde_json::from_slice(&fs::read(out.join("fit.json")).unwrap()).unwrap();
    assert_eq!(fit["branch"], "integrable");
}

#[test]
fn input_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "").unwrap();
    let r = run(&[
        "estimate",
        "--input",
        s(&empty),
        "--x0",
        "0.5",
        "--alpha",
        "1",
        "--out-dir",
        s(dir.path()),
    ]);
    assert_eq!(r.status.code(), Some(2));

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "x,y\n0.1,0.2\n0.3,0.4\n0.5,zero\n").unwrap();
    let r = run(&[
        "estimate",
        "--input",
        s(&bad),
        "--x0",
        "0.5",
        "--alpha",
        "1",
        "--out-dir",
        s(dir.path()),
    ]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("line 4"));

    let r = run(&[
        "estimate",
        "--input",
        s(&dir.path().join("missing.csv")),
        "--x0",
        "0.5",
        "--alpha",
        "1",
    ]);
    assert_eq!(r.status.code(), Some(2));
    let r = run(&["estimate", "--no-such-flag"]);
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn regime_and_config_errors_exit_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(
        dir.path(),
        &DesignDensity::new(0.5, 0.5, 0.0, 1.0).unwrap(),
        4096,
    );
    let r = run(&[
        "estimate",
        "--input",
        s(&data),
        "--x0",
        "0.5",
        "--alpha",
        "0.5",
        "--estimator",
        "two-stage",
        "--out-dir",
        s(dir.path()),
    ]);
    assert_eq!(r.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&r.stderr).contains("integrable"));

    let cfg = dir.path().join("typo.toml");
    fs::write(&cfg, "x0 = 0.5\nalpah = 1.0\n").unwrap();
    let r = run(&[
        "simulate",
        "--scenario",
        s(&cfg),
        "--out-dir",
        s(dir.path()),
    ]);
    assert_eq!(r.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&r.stderr).contains("alpah"));

    let r = run(&[
        "estimate",
        "--input",
        s(&data),
        "--x0",
        "1.5",
        "--alpha",
        "1",
    ]);
    assert_eq!(r.status.code(), Some(3));
}

#[test]
fn numeric_failures_exit_with_4() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(
        dir.path(),
        &DesignDensity::new(0.5, 1.0, 0.0, 1.0).unwrap(),
        2048,
    );
    // a zero of this order leaves no mass to normalize in double precision
    let r = run(&[
        "estimate",
        "--input",
        s(&data),
        "--x0",
        "0.5",
        "--alpha",
        "1e6",
        "--out-dir",
        s(dir.path()),
    ]);
    assert_eq!(
        r.status.code(),
        Some(4),
        "{}",
        String::from_utf8_lossy(&r.stderr)
    );
}

#[test]
fn rates_reports_slope_theory_and_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let r = run(&[
        "rates",
        "--scenario",
        &scenario("smooth_alpha2.toml"),
        "--replicates",
        "10",
        "--pilot-replicates",
        "5",
        "--out-dir",
        s(dir.path()),
    ]);
    assert_eq!(
        r.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&r.stderr)
    );
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["theory"], -0.5);
    assert!(report["slope"].is_f64());
    assert!(report["pass"].is_boolean());
    let risks = fs::read_to_string(dir.path().join("risks.csv")).unwrap();
    assert_eq!(risks.lines().next(), Some("n,mean_risk,stderr"));
    assert_eq!(risks.lines().count(), 6);
    assert!(String::from_utf8_lossy(&r.stdout).contains("theory -0.5000"));
}

#[test]
fn simulate_is_byte_reproducible_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for (i, threads) in ["1", "1", "3"].iter().enumerate() {
        let out = dir.path().join(format!("run{i}"));
        let r = run(&[
            "--threads",
            threads,
            "--seed",
            "77",
            "simulate",
            "--scenario",
            &scenario("borrowing_alpha1.toml"),
            "--calibrate",
            "false",
            "--d",
            "0.5",
            "--lambda",
            "0.5",
            "--replicates",
            "8",
            "--n-grid",
            "1024,2048,4096",
            "--out-dir",
            s(&out),
        ]);
        assert_eq!(
            r.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&r.stderr)
        );
        outputs.push((
            fs::read(out.join("risks.csv")).unwrap(),
            fs::read(out.join("report.json")).unwrap(),
        ));
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
    let report: serde_json::Value = serde_json::from_slice(&outputs[0].1).unwrap();
    assert_eq!(report["seed"], 77);
    assert!(report["slope"].is_null());
}

#[test]
fn thread_count_may_come_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let r = bin()
        .env("IRREGWAVE_THREADS", "2")
        .args([
            "simulate",
            "--scenario",
            &scenario("exponential.toml"),
            "--replicates",
            "2",
            "--n-grid",
            "4096",
            "--out-dir",
            s(dir.path()),
        ])
        .output()
        .unwrap();
    assert_eq!(
        r.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&r.stderr)
    );
    let bad = bin()
        .env("IRREGWAVE_THREADS", "many")
        .args(["simulate"])
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn fitg_recovers_the_order_of_the_zero() {
    let dir = tempfile::tempdir().unwrap();
    let g = DesignDensity::new(0.5, 1.0, 0.0, 1.0).unwrap();
    let xs = g.draw(100_000, 4).xs;
    let mut body = String::from("x\n");
    for x in xs {
        body.push_str(&format!("{x}\n"));
    }
    let input = dir.path().join("xs.csv");
    fs::write(&input, body).unwrap();
    let r = run(&["fitg", "--input", s(&input), "--out-dir", s(dir.path())]);
    assert_eq!(
        r.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&r.stderr)
    );
    let fit: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("zerofit.json")).unwrap()).unwrap();
    let alpha = fit["alpha_hat"].as_f64().unwrap();
    assert!((alpha - 1.0).abs() < 0.15, "{alpha}");
}

#[test]
fn estimate_output_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(
        dir.path(),
        &DesignDensity::new(0.5, 1.0, 0.0, 1.0).unwrap(),
        1 << 16,
    );
    let mut outputs = Vec::new();
    for i in 0..2 {
        let out = dir.path().join(format!("run{i}"));
        let r = run(&[
            "estimate",
            "--input",
            s(&data),
            "--fit-g",
            "--out-dir",
            s(&out),
        ]);
        assert_eq!(
            r.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&r.stderr)
        );
        outputs.push(
            ["fit.json", "curve.csv", "zerofit.json"].map(|f| fs::read(out.join(f)).unwrap()),
        );
    }
    assert_eq!(outputs[0], outputs[1]);
}
