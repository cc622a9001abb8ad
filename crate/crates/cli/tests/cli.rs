use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use stochburgers::io::RunManifest;

const SMALL: &str = "# small grid\nL = 8\nn = 255\ndt = 0.002\nT = 1\nk = 1\nl = 0.3\nJ = 16\nM = 4\nsnapshot_stride = 25\n";

fn sburg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sburg")).args(args).output().expect("binary runs")
}

fn write_cfg(dir: &Path, text: &str) -> String {
    let p = dir.join("run.cfg");
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn kernel_check_prints_table() {
    let o = sburg(&["kernel-check"]);
    assert!(o.status.success());
    let s = String::from_utf8(o.stdout).unwrap();
    assert!(s.contains("mass") && s.contains("(2pi t)^-1/2"));
    assert!(s.trim_end().ends_with("PASS"));
    assert_eq!(s.lines().count(), 5);
}

#[test]
fn simulate_is_byte_identical_across_reruns_and_threads() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(tmp.path(), &format!("{SMALL}retain_states = true\n"));
    let roots = ["a", "b", "c"].map(|r| tmp.path().join(r));
    for (root, threads) in roots.iter().zip(["1", "1", "3"]) {
        let o = sburg(&["--out", root.to_str().unwrap(), "--threads", threads, "simulate", &cfg]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let a = tree(&roots[0]);
    assert_eq!(a, tree(&roots[1]));
    assert_eq!(a, tree(&roots[2]));
    let manifest = a.keys().find(|k| k.ends_with("manifest.json")).unwrap();
    let m = RunManifest::from_json(std::str::from_utf8(&a[manifest]).unwrap()).unwrap();
    assert!(manifest.starts_with(&m.key()));
    assert!(m.outputs.iter().any(|o| o == "traj/0003.csv"));
    assert!(m.outputs.iter().any(|o| o == "traj/0000/00000500.bin"));
    let csv = std::str::from_utf8(&a[&format!("{}/traj/0000.csv", m.key())]).unwrap();
    assert!(csv.starts_with("t,l2sq,lpp,h1sq,tail_N1,tail_N2,c1,"));
    assert_eq!(csv.lines().count(), 1 + 21);
}

#[test]
fn invariant_refuses_outside_regime() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(tmp.path(), &SMALL.replace("l = 0.3", "l = 1.2"));
    let out = tmp.path().join("runs");
    let o = sburg(&["--out", out.to_str().unwrap(), "invariant", &cfg, "--s", "1", "--eps", "0.1"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("3k/7"), "{err}");
    assert!(!out.exists());
}

#[test]
fn config_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(tmp.path(), &format!("{SMALL}colour = red\n"));
    let o = sburg(&["tail", &cfg, "--eps", "0.001"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8(o.stderr).unwrap().contains("unknown key `colour`"));
    let cfg = write_cfg(tmp.path(), "l = 0.3\n");
    assert_eq!(sburg(&["bounds", &cfg]).status.code(), Some(2));
}

#[test]
fn report_commands_write_run_directories() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(tmp.path(), SMALL);
    let out = tmp.path().join("runs");
    let o_str = out.to_str().unwrap();
    for args in [
        vec!["tail", &cfg, "--eps", "0.001"],
        vec!["bounds", &cfg],
        vec!["picard", &cfg, "--N", "5", "--lambda", "1000", "--iters", "12", "--pairs", "4"],
        vec!["feller", &cfg, "--delta", "0.5", "--points", "3", "--pairs", "2"],
    ] {
        let mut full = vec!["--out", o_str];
        full.extend(args.iter().copied());
        let o = sburg(&full);
        assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stdout));
    }
    let dirs: Vec<_> = fs::read_dir(&out).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(dirs.len(), 4);
    for d in dirs {
        assert!(d.join("manifest.json").exists() && d.join("report.txt").exists());
    }
}

#[test]
fn invariant_suite_small() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(tmp.path(), &SMALL.replace("T = 1", "T = 5"));
    let out = tmp.path().join("runs");
    let o = sburg(&["--out", out.to_str().unwrap(), "invariant", &cfg, "--s", "2", "--eps", "0.1"]);
    assert!(matches!(o.status.code(), Some(0) | Some(1)));
    let s = String::from_utf8(o.stdout).unwrap();
    assert!(s.contains("# invariant s=2") && s.contains("# tightness"), "{s}");
    let short = write_cfg(tmp.path(), SMALL);
    assert_eq!(sburg(&["invariant", &short, "--s", "2", "--eps", "0.1"]).status.code(), Some(2));
}
