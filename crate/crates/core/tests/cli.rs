use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use num_complex::Complex64;

use podnn::io;
use podnn::pod::SnapshotSet;
use podnn::qmc::ParamPoint;

const SMALL: &str = r#"
[problem]
kind = "complex_reaction"
n_dof = 32
s = 4

[qmc]
n_points = 24

[nn]
max_epochs = 40
seed = 4

[study]
n_grid = [8, 16, 32]
test_set_size = 12
train = true
record_timings = false
"#;

fn podnn(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_podnn"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn success(out: &Output) {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.toml"), SMALL).unwrap();
    dir
}

fn run_pipeline(dir: &Path, tag: &str) -> Vec<Vec<u8>> {
    let c = ["--config", "run.toml"];
    let f = |name: &str| format!("{tag}_{name}");
    success(&podnn(
        dir,
        &[&c[..], &["--out", &f("pts.csv"), "qmc"]].concat(),
    ));
    success(&podnn(
        dir,
        &[&c[..], &["--out", &f("s.psnp"), "sample"]].concat(),
    ));
    success(&podnn(
        dir,
        &[&c[..], &["--out", &f("b.prbs"), "pod", &f("s.psnp")]].concat(),
    ));
    success(&podnn(
        dir,
        &[
            &c[..],
            &["--out", &f("m.pmlp"), "train", &f("s.psnp"), &f("b.prbs")],
        ]
        .concat(),
    ));
    let eval = podnn(
        dir,
        &[&c[..], &["eval", &f("m.pmlp"), &f("b.prbs")]].concat(),
    );
    success(&eval);
    success(&podnn(
        dir,
        &[&c[..], &["--out", &f("study"), "study"]].concat(),
    ));
    let mut outputs: Vec<Vec<u8>> = [
        "pts.csv",
        "s.psnp",
        "b.prbs",
        "b.json",
        "m.pmlp",
        "m.csv",
        "study/report.csv",
        "study/report.json",
    ]
    .iter()
    .map(|n| fs::read(dir.join(f(n))).unwrap())
    .collect();
    outputs.push(eval.stdout);
    outputs
}

#[test]
fn every_command_is_idempotent() {
    let dir = setup();
    let first = run_pipeline(dir.path(), "a");
    let second = run_pipeline(dir.path(), "b");
    // the eval output echoes the basis fingerprint, which is identical too
    assert_eq!(first, second);
    let metrics: serde_json::Value = serde_json::from_slice(&first[8]).unwrap();
    assert_eq!(metrics["test_set_size"], 12);
    let csv = String::from_utf8(first[6].clone()).unwrap();
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn thread_count_does_not_change_outputs() {
    let dir = setup();
    for t in ["1", "3"] {
        success(&podnn(
            dir.path(),
            &[
                "--config",
                "run.toml",
                "--threads",
                t,
                "--out",
                &format!("s{t}.psnp"),
                "sample",
            ],
        ));
    }
    assert_eq!(
        fs::read(dir.path().join("s1.psnp")).unwrap(),
        fs::read(dir.path().join("s3.psnp")).unwrap()
    );
}

#[test]
fn qmc_csv_reproduces_the_first_points() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("q.toml"),
        "[problem]\ns = 2\nn_modes = 2\n[qmc]\nn_points = 2\n",
    )
    .unwrap();
    success(&podnn(
        dir.path(),
        &["--config", "q.toml", "--out", "p.csv", "qmc"],
    ));
    let text = fs::read_to_string(dir.path().join("p.csv")).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][0], 0.0);
    assert!((rows[0][1] + 1.0 / 3.0).abs() < 1e-15);
    assert_eq!(rows[1][0], -0.5);
    assert!((rows[1][1] - 1.0 / 3.0).abs() < 1e-15);
}

#[test]
fn rank_one_snapshots_give_one_mode() {
    let dir = setup();
    let v: Vec<Complex64> = (0..32)
        .map(|i| Complex64::new((i as f64 * 0.3).sin(), 0.2))
        .collect();
    let cols: Vec<Vec<Complex64>> = [1.0, -0.5, 2.0, 0.25]
        .iter()
        .map(|&a| v.iter().map(|z| z * a).collect())
        .collect();
    let snap = SnapshotSet::from_columns(vec![ParamPoint::zeros(4); 4], &cols, "").unwrap();
    io::write_snapshots(&dir.path().join("r1.psnp"), &snap).unwrap();
    success(&podnn(
        dir.path(),
        &["--config", "run.toml", "--out", "r1.prbs", "pod", "r1.psnp"],
    ));
    let diag: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("r1.json")).unwrap()).unwrap();
    assert_eq!(diag["rank"], 1);
    assert_eq!(diag["full_rank"], 1);
}

#[test]
fn failures_exit_nonzero_with_a_json_line() {
    let dir = setup();
    fs::write(dir.path().join("bad.toml"), "[problem]\nunknown_key = 3\n").unwrap();
    fs::write(dir.path().join("junk.psnp"), b"NOPE").unwrap();
    let cases: [&[&str]; 3] = [
        &["--config", "bad.toml", "qmc"],
        &["--config", "run.toml", "pod", "junk.psnp"],
        &["--config", "run.toml", "pod", "missing.psnp"],
    ];
    let kinds = ["config", "format", "io"];
    for (args, kind) in cases.iter().zip(kinds) {
        let out = podnn(dir.path(), args);
        assert!(!out.status.success());
        let line = String::from_utf8(out.stderr).unwrap();
        let last = line.lines().last().unwrap();
        let v: serde_json::Value = serde_json::from_str(last).unwrap();
        assert_eq!(v["error"], kind, "{last}");
    }
}

#[test]
fn model_is_bound_to_its_basis() {
    let dir = setup();
    let c = ["--config", "run.toml"];
    success(&podnn(
        dir.path(),
        &[&c[..], &["--out", "s.psnp", "sample"]].concat(),
    ));
    success(&podnn(
        dir.path(),
        &[&c[..], &["--out", "b.prbs", "pod", "s.psnp"]].concat(),
    ));
    success(&podnn(
        dir.path(),
        &[&c[..], &["--out", "m.pmlp", "train", "s.psnp", "b.prbs"]].concat(),
    ));
    fs::write(
        dir.path().join("other.toml"),
        SMALL.replace("n_points = 24", "n_points = 20"),
    )
    .unwrap();
    let o = ["--config", "other.toml"];
    success(&podnn(
        dir.path(),
        &[&o[..], &["--out", "s2.psnp", "sample"]].concat(),
    ));
    success(&podnn(
        dir.path(),
        &[&o[..], &["--out", "b2.prbs", "pod", "s2.psnp"]].concat(),
    ));
    let out = podnn(
        dir.path(),
        &[&c[..], &["eval", "m.pmlp", "b2.prbs"]].concat(),
    );
    assert!(!out.status.success());
}
