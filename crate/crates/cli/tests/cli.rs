use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn enloc(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_enloc"));
    cmd.args(args).env_remove("ENLOC_THREADS");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

const MIS_SMALL: &str = "experiment = \"mis\"\n[mis]\ngraphs = 2\nn = 6\n";

#[test]
fn passing_run_writes_the_full_artifact_set() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "mis.toml", MIS_SMALL);
    let out = tmp.path().join("out");
    let o = enloc(&["simulate", "-c", &cfg, "-o", out.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let files = tree(&out);
    for f in ["config.toml", "record.json", "checks.csv", "plot.svg", "manifest.json"] {
        assert!(files.keys().any(|k| k.ends_with(f)), "missing {f}: {:?}", files.keys());
    }
    let record_path = files.keys().find(|k| k.ends_with("record.json")).unwrap();
    let record: Value = serde_json::from_slice(&files[record_path]).unwrap();
    assert!(record["checks"].as_array().is_some_and(|c| !c.is_empty()));
}

#[test]
fn violation_exits_two_and_points_at_the_check() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "fig1.toml", "outside_tolerance = 1e-12\nsamples = 4\n");
    let out = tmp.path().join("out");
    let o = enloc(&["fig1", "-c", &cfg, "-o", out.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("record.json checks["), "{}", stderr(&o));
    let files = tree(&out);
    let manifest = files.iter().find(|(k, _)| k.ends_with("manifest.json")).unwrap().1;
    let m: Value = serde_json::from_slice(manifest).unwrap();
    assert_eq!(m["runs"][0]["passed"], Value::Bool(false));
}

#[test]
fn unknown_keys_are_all_listed_and_nothing_is_written() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "bad.toml",
        "experiment = \"mis\"\ncolour = 1\n[mis]\ngraphs = 2\nshape = \"round\"\n",
    );
    let out = tmp.path().join("out");
    let o = enloc(&["simulate", "-c", &cfg, "-o", out.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(3));
    let err = stderr(&o);
    assert!(err.contains("colour") && err.contains("mis.shape"), "{err}");
    assert!(!out.exists());
}

#[test]
fn invalid_values_exit_three_without_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cases = [
        ("type.toml", "[mis]\ngraphs = \"five\"\n"),
        ("premise.toml", "[dynamical]\nlambda = 0.9\n"),
        ("range.toml", "experiment = \"mis\"\n[mis]\nn = 0\n"),
    ];
    for (name, body) in cases {
        let cfg = write_config(tmp.path(), name, body);
        let o = enloc(&["simulate", "-c", &cfg, "-o", out.to_str().unwrap()], &[]);
        assert_eq!(o.status.code(), Some(3), "{name}: {}", stderr(&o));
        assert!(!out.exists(), "{name} left outputs behind");
    }
    let o = enloc(
        &["simulate", "-c", "/nonexistent/cfg.toml", "-o", out.to_str().unwrap()],
        &[],
    );
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(enloc(&["no-such-command"], &[]).status.code(), Some(3));
    assert_eq!(
        enloc(&["bounds", "--delta", "2", "--lambda", "1"], &[]).status.code(),
        Some(3)
    );
    assert!(!out.exists());
}

#[test]
fn unwritable_output_is_a_generic_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "mis.toml", MIS_SMALL);
    let blocker = tmp.path().join("file");
    std::fs::write(&blocker, "not a directory").unwrap();
    let o = enloc(&["simulate", "-c", &cfg, "-o", blocker.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn seed_flag_overrides_the_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "mis.toml", &format!("{MIS_SMALL}seed = 5\n"));
    let out = tmp.path().join("out");
    let o = enloc(
        &["simulate", "-c", &cfg, "-o", out.to_str().unwrap(), "--seed", "11"],
        &[],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let files = tree(&out);
    assert!(files.keys().all(|k| k.contains("seed11")), "{:?}", files.keys());
    let echo = files.iter().find(|(k, _)| k.ends_with("config.toml")).unwrap().1;
    assert!(String::from_utf8_lossy(echo).contains("seed = 11"));
}

#[test]
fn thread_count_comes_from_the_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "mis.toml", MIS_SMALL);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let o = enloc(
        &["simulate", "-c", &cfg, "-o", a.to_str().unwrap()],
        &[("ENLOC_THREADS", "1")],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = enloc(
        &["simulate", "-c", &cfg, "-o", b.to_str().unwrap()],
        &[("ENLOC_THREADS", "3")],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let strip = |m: BTreeMap<String, Vec<u8>>| {
        m.into_iter()
            .filter(|(k, _)| !k.ends_with("manifest.json"))
            .collect::<BTreeMap<_, _>>()
    };
    assert_eq!(strip(tree(&a)), strip(tree(&b)));
    let o = enloc(
        &["simulate", "-c", &cfg, "-o", a.to_str().unwrap()],
        &[("ENLOC_THREADS", "many")],
    );
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn bounds_prints_a_report_and_optionally_writes_files() {
    let tmp = tempfile::tempdir().unwrap();
    let o = enloc(
        &["bounds", "--lambda", "1", "--delta", "2", "--d", "3", "--n", "100"],
        &[],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: Value = serde_json::from_slice(&o.stdout).unwrap();
    let ln = report["epsilon1_asymptotic"]["ln"].as_f64().unwrap();
    // -n (d - lambda - lambda ln(d / lambda)) / delta
    let (lambda, delta, d, n) = (1.0f64, 2.0f64, 3.0f64, 100.0f64);
    let expected = -n * (d - lambda - lambda * (d / lambda).ln()) / delta;
    assert!((ln - expected).abs() < 1e-6 * expected.abs(), "{ln} vs {expected}");

    let out = tmp.path().join("b");
    let o = enloc(
        &[
            "bounds",
            "--total-variation",
            "0.5",
            "--delta",
            "1",
            "--window",
            "3",
            "-o",
            out.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let files = tree(&out);
    for f in ["report.json", "curve.csv", "plot.svg", "manifest.json"] {
        assert!(files.keys().any(|k| k.ends_with(f)), "missing {f}");
    }
}

#[test]
fn clusters_reports_the_partition() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("c");
    let o = enloc(&["clusters", "-o", out.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let files = tree(&out);
    let body = files.iter().find(|(k, _)| k.ends_with("clusters.json")).unwrap().1;
    let v: Value = serde_json::from_slice(body).unwrap();
    assert!(v.to_string().contains("clusters"));
}

#[test]
fn reruns_are_byte_identical_apart_from_the_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "mis.toml", MIS_SMALL);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for dir in [&a, &b] {
        let o = enloc(&["simulate", "-c", &cfg, "-o", dir.to_str().unwrap()], &[]);
        assert_eq!(o.status.code(), Some(0));
    }
    let (ta, tb) = (tree(&a), tree(&b));
    assert_eq!(ta.keys().collect::<Vec<_>>(), tb.keys().collect::<Vec<_>>());
    for (k, v) in &ta {
        if !k.ends_with("manifest.json") {
            assert_eq!(v, &tb[k], "{k} differs");
        }
    }
}
