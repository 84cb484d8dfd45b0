#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

pub fn dpt(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dpt")).current_dir(dir).args(args).output().expect("dpt runs")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("dpt exited normally")
}

/// Runs `dpt` and panics with its stderr unless it exits 0.
pub fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = dpt(dir, args);
    assert_eq!(code(&out), 0, "dpt {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

pub fn read(path: impl AsRef<Path>) -> String {
    std::fs::read_to_string(path.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", path.as_ref().display()))
}

pub fn json(path: impl AsRef<Path>) -> serde_json::Value {
    serde_json::from_str(&read(path)).expect("valid JSON")
}

/// Every regular file under `dir`, relative path and bytes, sorted by path.
pub fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().display().to_string();
                out.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}
