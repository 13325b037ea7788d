use std::path::Path;
use std::process::Command;

const BIN: &str = env!("CARGO_BIN_EXE_uepsim");

const BER: &str = r#"{
  "mode": "ber",
  "seed": 3,
  "code": {"n": 256, "rate": 0.65, "distribution": {"var": [[2, 0.5], [5, 0.5]], "perspective": "node"}},
  "scheme": "type_II",
  "flip": {"k": 3},
  "channel": {"kind": "pr"},
  "snr_db": [12.0, 14.0],
  "budget": {"max_frames": 12, "stop_errors": 50}
}"#;

fn run(dir: &Path, config: &str, extra: &[&str]) -> (i32, String) {
    let cfg = dir.join("cfg.json");
    std::fs::write(&cfg, config).unwrap();
    let out = Command::new(BIN)
        .arg("run")
        .arg(&cfg)
        .arg("--out")
        .arg(dir)
        .args(extra)
        .env_remove("UEPSIM_THREADS")
        .output()
        .unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

#[test]
fn same_seed_gives_identical_csv_for_any_thread_count() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(run(a.path(), BER, &["--threads", "1"]).0, 0);
    assert_eq!(run(b.path(), BER, &["--threads", "3"]).0, 0);
    let x = std::fs::read(a.path().join("ber.csv")).unwrap();
    let y = std::fs::read(b.path().join("ber.csv")).unwrap();
    assert!(!x.is_empty());
    assert_eq!(x, y);
}

#[test]
fn seed_flag_overrides_config() {
    let a = tempfile::tempdir().unwrap();
    assert_eq!(run(a.path(), BER, &["--seed", "99"]).0, 0);
    let r = rows(&a.path().join("ber.csv"));
    assert!(r.iter().all(|row| row[1] == "99"));
}

#[test]
fn noiseless_link_has_no_errors() {
    let cfg = BER.replace(r#""budget""#, r#""noiseless": true, "budget""#);
    let d = tempfile::tempdir().unwrap();
    assert_eq!(run(d.path(), &cfg, &[]).0, 0);
    let r = rows(&d.path().join("ber.csv"));
    assert_eq!(r.len(), 2);
    for row in r {
        assert_eq!(row[4], "12", "all frames run");
        assert_eq!(row[5], "0");
        assert_eq!(row[7], "0");
    }
}

#[test]
fn flip_statistics_match_the_stationary_rate() {
    let cfg = r#"{"mode": "flip_stats", "seed": 8, "flip_stats": {"k": [3], "n": 4096, "trials": 400}}"#;
    let d = tempfile::tempdir().unwrap();
    assert_eq!(run(d.path(), cfg, &[]).0, 0);
    let r = rows(&d.path().join("flip_stats.csv"));
    let (mean, std, oracle): (f64, f64, f64) = (r[0][7].parse().unwrap(), r[0][8].parse().unwrap(), r[0][9].parse().unwrap());
    let se = std / 400f64.sqrt();
    assert!((mean - oracle).abs() < 3.0 * se, "mean {mean} oracle {oracle} se {se}");
}

#[test]
fn bad_config_exits_one_with_line() {
    let d = tempfile::tempdir().unwrap();
    let (code, err) = run(d.path(), &BER.replace("\"scheme\"", "\"schem\""), &[]);
    assert_eq!(code, 1);
    assert!(err.contains("line 5"), "{err}");
    let (code, _) = run(d.path(), BER, &["--threads", "0"]);
    assert_eq!(code, 1);
}

#[test]
fn runtime_failure_exits_two() {
    let cfg = BER.replace(
        r#""distribution": {"var": [[2, 0.5], [5, 0.5]], "perspective": "node"}"#,
        r#""alist": "/nonexistent/code.alist""#,
    );
    let d = tempfile::tempdir().unwrap();
    let (code, err) = run(d.path(), &cfg, &[]);
    assert_eq!(code, 2, "{err}");
}
