use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use mfg_core::numkit::spectral_norm;
use mfg_runner::output::{trajectories_header, Manifest};
use mfg_runner::{ExperimentConfig, SeedReport};
use serde_json::{json, Value};

fn bundled(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("configs")
        .join(name)
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mfg-irl"))
}

/// Example I with a small population and short horizons.
fn small_config(dir: &Path) -> PathBuf {
    let mut v: Value =
        serde_json::from_str(&fs::read_to_string(bundled("example1.json")).unwrap()).unwrap();
    v["seeds"] = json!([4]);
    v["n_agents"] = json!(20);
    v["m_realizations"] = json!(10);
    v["rollout"]["horizon"] = json!(1.0);
    v["rollout"]["record_dt"] = json!(0.05);
    let path = dir.join("small.json");
    fs::write(&path, v.to_string()).unwrap();
    path
}

fn run(config: &Path, out: &Path) -> std::process::Output {
    bin()
        .arg("run")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn snapshot(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let manifest: Manifest =
        serde_json::from_str(&fs::read_to_string(root.join("manifest.json")).unwrap()).unwrap();
    manifest
        .files
        .iter()
        .map(|f| (f.path.clone(), fs::read(root.join(&f.path)).unwrap()))
        .collect()
}

#[test]
fn bundled_configs_round_trip() {
    for name in ["example1.json", "example2.json"] {
        let text = fs::read_to_string(bundled(name)).unwrap();
        let cfg = ExperimentConfig::from_json(&text).unwrap();
        let back =
            ExperimentConfig::from_json(&serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
        assert_eq!(cfg, back, "{name}");
    }
}

#[test]
fn validate_reports_through_exit_status() {
    let ok = bin()
        .arg("validate")
        .arg(bundled("example2.json"))
        .output()
        .unwrap();
    assert!(ok.status.success());
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    let mut v: Value =
        serde_json::from_str(&fs::read_to_string(bundled("example1.json")).unwrap()).unwrap();
    v["model"]["Q"] = json!([[1.0, 0.0], [0.0, -1.0]]);
    fs::write(&bad, v.to_string()).unwrap();
    let out = bin().arg("validate").arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("model.Q"));
    let missing = bin()
        .arg("validate")
        .arg(dir.path().join("absent.json"))
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn reruns_are_byte_identical_and_tables_recompute() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let first = run(&config, &a);
    assert!(
        first.status.success(),
        "{}",
        String::from_utf8_lossy(&first.stderr)
    );
    assert!(run(&config, &b).status.success());
    let (sa, sb) = (snapshot(&a), snapshot(&b));
    assert_eq!(sa.keys().collect::<Vec<_>>(), sb.keys().collect::<Vec<_>>());
    for (k, v) in &sa {
        assert!(v == &sb[k], "{k} differs between runs");
    }
    for f in [
        "oracle/solution.json",
        "oracle/mean_field.csv",
        "seed-4/errors.csv",
        "seed-4/trajectories.csv",
    ] {
        assert!(sa.contains_key(f), "{f} missing from manifest");
    }

    let mut traj = csv::Reader::from_path(a.join("seed-4/trajectories.csv")).unwrap();
    let header: Vec<String> = traj.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, trajectories_header(2, 2));
    let rows: Vec<csv::StringRecord> = traj.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 21);
    assert!(rows.iter().all(|r| r.len() == header.len()));

    let report: SeedReport =
        serde_json::from_str(&fs::read_to_string(a.join("seed-4/solution.json")).unwrap()).unwrap();
    let mut errors = csv::Reader::from_path(a.join("seed-4/errors.csv")).unwrap();
    let table: BTreeMap<String, f64> = errors
        .records()
        .map(|r| {
            let r = r.unwrap();
            (r[0].to_string(), r[1].parse().unwrap())
        })
        .collect();
    let (t, s) = (&report.truth, &report.solution);
    let id = s.identified.as_ref().unwrap();
    let cfg = ExperimentConfig::from_json(&fs::read_to_string(&config).unwrap()).unwrap();
    let expected = [
        ("P11", spectral_norm(&(&t.p11 - &s.p11))),
        ("K1", spectral_norm(&(&t.k1 - &s.k1))),
        ("P12", spectral_norm(&(&t.p12 - &s.p12))),
        ("K2", spectral_norm(&(&t.k2 - &s.k2))),
        ("A", spectral_norm(&(&cfg.model.a - &id.a))),
        ("B", spectral_norm(&(&cfg.model.b - &id.b))),
        (
            "A+G",
            spectral_norm(&(&cfg.model.a_plus_g() - &id.a_plus_g)),
        ),
        ("G", spectral_norm(&(&cfg.model.g - &id.g()))),
    ];
    assert_eq!(table.len(), expected.len());
    for (label, e) in expected {
        assert_eq!(table[label], e, "{label}");
    }
}

#[test]
fn oracle_subcommand_writes_truth_only() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .arg("oracle")
        .arg(bundled("example1.json"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    let files = snapshot(dir.path());
    assert_eq!(
        files.keys().map(String::as_str).collect::<Vec<_>>(),
        [
            "oracle/convergence.csv",
            "oracle/mean_field.csv",
            "oracle/solution.json"
        ]
    );
    assert!(String::from_utf8_lossy(&out.stdout).contains("K1*"));
}
