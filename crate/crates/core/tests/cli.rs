use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn recipe(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../recipes")
        .join(name)
}

fn etrate(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_etrate"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn bounds_prints_six_significant_digits() {
    let dir = TempDir::new().unwrap();
    let cfg = recipe("phase-fast.toml");
    let o = etrate(&["bounds", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    for (name, value) in [
        ("access_rate", "11.5416"),
        ("gamma_c", "0.0863821"),
        ("gamma_eq", "0.138629"),
        ("asymptote", "30.7775"),
    ] {
        let line = text.lines().find(|l| l.starts_with(name)).unwrap();
        assert_eq!(line.split_whitespace().nth(1), Some(value), "{line}");
    }
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("bounds.json")).unwrap())
            .unwrap();
    assert!(json["entries"].as_array().unwrap().len() >= 14);
}

#[test]
fn flags_override_the_config() {
    let dir = TempDir::new().unwrap();
    let cfg = recipe("phase-fast.toml");
    let o = etrate(
        &[
            "bounds",
            "--config",
            cfg.to_str().unwrap(),
            "--a",
            "1",
            "--sigma",
            "0.5",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0);
    assert!(stdout(&o)
        .lines()
        .any(|l| l.starts_with("asymptote") && l.ends_with("6.49213")));
}

#[test]
fn rate_sweep_matches_snapshot() {
    let dir = TempDir::new().unwrap();
    let cfg = recipe("rate-sweep.toml");
    let o = etrate(&["sweep", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let got = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let want = include_str!("golden/rate_sweep.csv");
    assert_eq!(got, want);
}

#[test]
fn analytic_sweep_covers_the_rho0_family() {
    let dir = TempDir::new().unwrap();
    let cfg = recipe("rho0-family.toml");
    let o = etrate(&["sweep", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(code(&o), 0);
    let mut rdr = csv::Reader::from_path(dir.path().join("sweep.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 5 * 101);
    assert!(rows.iter().all(|r| r[4].is_empty() && r[11].is_empty()));
}

#[test]
fn simulate_is_reproducible() {
    let cfg = recipe("closed-loop.toml");
    let run = || {
        let dir = TempDir::new().unwrap();
        let o = etrate(
            &["simulate", "--config", cfg.to_str().unwrap(), "--seed", "3"],
            dir.path(),
        );
        assert_eq!(code(&o), 0, "{}", stdout(&o));
        ["trace.csv", "events.json", "report.json"]
            .map(|f| std::fs::read(dir.path().join(f)).unwrap())
    };
    assert_eq!(run(), run());
}

#[test]
fn zero_delay_one_bit_resets_the_error() {
    let dir = TempDir::new().unwrap();
    let cfg = recipe("closed-loop.toml");
    let o = etrate(
        &[
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--gamma",
            "0",
            "--delay",
            "constant:0",
            "--g",
            "1",
            "--detect",
            "refined",
            "--integrator",
            "exact",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let events: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("events.json")).unwrap())
            .unwrap();
    let receptions: Vec<&serde_json::Value> = events
        .as_array()
        .unwrap()
        .iter()
        .filter(|e| e["kind"] == "reception")
        .collect();
    assert!(!receptions.is_empty());
    for e in receptions {
        assert!(e["z_post"].as_f64().unwrap().abs() <= 1e-12, "{e}");
        assert_eq!(e["g"], 1);
    }
}

#[test]
fn usage_errors_exit_one() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&etrate(&["bogus"], dir.path())), 1);
    let o = etrate(
        &[
            "bounds",
            "--a",
            "1",
            "--sigma",
            "1",
            "--rho0",
            "0.5",
            "--gamma",
            "1",
            "--nu",
            "1",
            "--assumption1",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 1);
    assert_eq!(
        code(&etrate(
            &["bounds", "--a", "-1", "--sigma", "1", "--rho0", "0.5"],
            dir.path()
        )),
        1
    );

    let cfg = dir.path().join("empty.toml");
    std::fs::write(
        &cfg,
        "[plant]\na = 1.0\n[trigger]\nv0 = 0.1\nsigma = 1.0\nrho0 = 0.5\n[sweep]\ngamma = []\n",
    )
    .unwrap();
    assert_eq!(
        code(&etrate(
            &["sweep", "--config", cfg.to_str().unwrap()],
            dir.path()
        )),
        1
    );
}

#[test]
fn divergence_exits_three() {
    let dir = TempDir::new().unwrap();
    let o = etrate(
        &[
            "simulate",
            "--a",
            "5",
            "--sigma",
            "3",
            "--rho0",
            "0.7",
            "--gamma",
            "1",
            "--v0",
            "0.1",
            "--x0",
            "0.05",
            "--xhat0",
            "0",
            "--delay",
            "constant:1",
            "--g",
            "1",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 3);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap())
            .unwrap();
    assert!(report["diverged_at"].as_f64().unwrap() < 7.0);
}

#[test]
fn invariant_violation_exits_two() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("muted.toml");
    std::fs::write(
        &cfg,
        r#"
[jordan]
blocks = [{ eigenvalue = 1.0, order = 2 }]
k = [[3.0, 0.0], [0.0, 3.0]]

[trigger]
v0 = 0.3
sigma = 0.1
rho0 = 0.5
gamma = 0.2

[channel]
delay = "uniform"
seed = 11

[sim]
x0 = [0.3, 0.105]
xhat0 = [0.2, 0.1]
muted = [1]
"#,
    )
    .unwrap();
    let o = etrate(&["simulate", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(code(&o), 2, "{}", stdout(&o));
    assert!(stdout(&o)
        .lines()
        .any(|l| l.starts_with("envelope") && l.contains("VIOLATED")));
}
