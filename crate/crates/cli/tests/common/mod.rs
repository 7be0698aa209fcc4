#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn repo_file(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

pub fn gcds(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gcds")).args(args).output().expect("binary runs")
}

/// Every file of `dir` except `meta.json`.
pub fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .filter(|e| e.file_name() != "meta.json")
        .map(|e| (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap()))
        .collect()
}

/// Small runs of every result-producing command. `{ckpt}` is replaced by
/// the checkpoint written by the `train` entry.
pub const SMALL_RUNS: &[(&str, &[&str])] = &[
    ("simulate", &["--model", "M2", "--n-train", "50"]),
    ("train", &["--model", "M4", "--n-train", "200", "--iters", "60", "--batch", "32"]),
    ("evaluate", &["--model", "M4", "--n-train", "200", "--checkpoint", "{ckpt}", "--x", "-1,2", "--j-draws", "500", "--methods", "gcds,ckde"]),
    ("table", &["--model", "M1", "--n-train", "200", "--k-test", "4", "--reps", "2", "--iters", "40", "--batch", "32", "--j-draws", "200", "--tau", "0.25,0.5"]),
    ("density", &["--model", "M4", "--n-train", "200", "--checkpoint", "{ckpt}", "--x", "2", "--j-draws", "500"]),
    ("coverage", &["--model", "M2", "--n-train", "200", "--n-test", "20", "--iters", "40", "--batch", "32", "--j-draws", "200"]),
];

/// Runs every entry of [`SMALL_RUNS`] twice under `root` and returns the
/// commands whose result files differ between the two runs.
pub fn rerun_mismatches(root: &Path) -> Vec<String> {
    let ckpt = root.join("train").join("checkpoint.json");
    let ckpt = ckpt.to_str().unwrap().to_string();
    let mut bad = Vec::new();
    for (command, args) in SMALL_RUNS {
        let out = root.join(command);
        let mut full: Vec<String> = vec![command.to_string(), "--seed".into(), "5".into(), "--out".into(), out.to_str().unwrap().into()];
        full.extend(args.iter().map(|a| a.replace("{ckpt}", &ckpt)));
        let refs: Vec<&str> = full.iter().map(String::as_str).collect();
        let first = gcds(&refs);
        assert!(first.status.success(), "{command}: {}", String::from_utf8_lossy(&first.stderr));
        let a = snapshot(&out);
        let second = gcds(&refs);
        assert!(second.status.success(), "{command}: {}", String::from_utf8_lossy(&second.stderr));
        if a != snapshot(&out) || a.is_empty() {
            bad.push(command.to_string());
        }
    }
    bad
}
