use std::path::Path;
use std::process::{Command, Output};

fn supercon(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_supercon"));
    cmd.args(args).env_remove("SUPERCON_SEED");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect();
    out.sort();
    out
}

const SMALL_LINSUP: &str = r#"{
  "suite": "linsup",
  "params": {
    "batch": {"N": 20, "I": 10, "trials": 6},
    "drift": {"N": 40, "I": 20, "trials": 6, "column": 30, "steps": [2, 4, 8]}
  }
}"#;

#[test]
fn com_verify_is_reproducible_across_runs_and_threads() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let common = [
        "run",
        "--suite",
        "com-verify",
        "--seed",
        "7",
        "--trials",
        "50",
        "--dim",
        "40",
    ];
    let ra = supercon(
        &[&common[..], &["--out", a.to_str().unwrap(), "--threads", "1"]].concat(),
        &[],
    );
    let rb = supercon(
        &[&common[..], &["--out", b.to_str().unwrap(), "--threads", "8"]].concat(),
        &[],
    );
    assert!(ra.status.code().is_some_and(|c| c <= 1));
    assert_eq!(ra.status.code(), rb.status.code());
    let fa = csv_files(&a);
    assert!(fa.iter().any(|f| f.0 == "reports.csv"));
    assert_eq!(fa, csv_files(&b));
    let manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["config"]["suite"], "com-verify");
    assert_eq!(manifest["config"]["params"]["sum_trials"], 50);
}

#[test]
fn linsup_config_gives_one_outcome_row_per_trial() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("linsup.json");
    std::fs::write(&cfg, SMALL_LINSUP).unwrap();
    let out = dir.path().join("out");
    let r = supercon(
        &[
            "run",
            "--suite",
            "linsup",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ],
        &[],
    );
    assert!(
        r.status.code().is_some_and(|c| c <= 1),
        "{}",
        String::from_utf8_lossy(&r.stderr)
    );
    let text = std::fs::read_to_string(out.join("outcomes.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 6);
    assert!(text.starts_with("trial,phi_basic,phi_sup,gap,"));

    let hist = dir.path().join("hist.csv");
    let r = supercon(
        &[
            "plotdata",
            "--input",
            out.join("outcomes.csv").to_str().unwrap(),
            "--kind",
            "gap-histogram",
            "--bins",
            "4",
            "--out",
            hist.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(r.status.code(), Some(0));
    let rows: Vec<String> = std::fs::read_to_string(&hist)
        .unwrap()
        .lines()
        .map(String::from)
        .collect();
    assert_eq!(rows[0], "x,y,series,stderr");
    let total: f64 = rows[1..]
        .iter()
        .map(|l| l.split(',').nth(1).unwrap().parse::<f64>().unwrap())
        .sum();
    assert_eq!(rows.len(), 5);
    assert_eq!(total, 6.0);
}

#[test]
fn failing_assertion_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("strict.json");
    let strict = SMALL_LINSUP.replace(r#""params": {"#, r#""params": {"residual_limit": 1e-300,"#);
    std::fs::write(&cfg, strict).unwrap();
    let out = dir.path().join("out");
    let r = supercon(
        &["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()],
        &[],
    );
    assert_eq!(r.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&r.stderr).contains("linsup_max_residual"));
    assert!(out.join("manifest.json").exists());
}

#[test]
fn malformed_config_exits_two_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    for (name, body) in [
        ("bad.json", "{\"suite\": \"linsup\", "),
        ("unknown.json", "{\"suite\": \"linsup\", \"extra\": 1}"),
        (
            "invalid.json",
            "{\"suite\": \"linsup\", \"params\": {\"batch\": {\"decay\": 2.0}}}",
        ),
    ] {
        let cfg = dir.path().join(name);
        std::fs::write(&cfg, body).unwrap();
        let r = supercon(
            &["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()],
            &[],
        );
        assert_eq!(r.status.code(), Some(2), "{name}");
        assert!(!out.exists(), "{name}");
    }
    let r = supercon(
        &["run", "--suite", "scaling", "--out", out.to_str().unwrap()],
        &[("SUPERCON_SEED", "x")],
    );
    assert_eq!(r.status.code(), Some(2));
    let r = supercon(&["run", "--suite", "nonsense"], &[]);
    assert_eq!(r.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn seed_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let r = supercon(
        &[
            "run",
            "--suite",
            "supmatrix-trace",
            "--trials",
            "2",
            "--out",
            out.to_str().unwrap(),
        ],
        &[("SUPERCON_SEED", "31")],
    );
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 31);
    for f in ["checks.csv", "rows.csv", "limits.csv", "entries.csv", "summary.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn plotdata_empty_and_mismatched_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, "").unwrap();
    let out = dir.path().join("plot.csv");
    let r = supercon(
        &[
            "plotdata",
            "--input",
            empty.to_str().unwrap(),
            "--kind",
            "deviation-vs-n",
            "--out",
            out.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(r.status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(&out).unwrap(), "x,y,series,stderr\n");

    let wrong = dir.path().join("wrong.csv");
    std::fs::write(&wrong, "a,b,c\n1,2,3\n").unwrap();
    let r = supercon(
        &[
            "plotdata",
            "--input",
            wrong.to_str().unwrap(),
            "--kind",
            "drift-vs-steps",
            "--out",
            out.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("schema mismatch"));
}
