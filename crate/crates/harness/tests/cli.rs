// Copyright 2026 The btlab Authors
// SPDX-License-Identifier: Apache-2.0

use std::path::Path;
use std::process::{Command, Output};

use btlab::output::{read_results, OutputFormat};

const BIN: &str = env!("CARGO_BIN_EXE_btlab");

const SMALL: &str = r#"
name = "small"
seed = 7
repetitions = 2
episodes = 300

[task]
kind = "dyck"
d = 16

[task.prompts]
source = "ood"
min_len = 6
max_len = 12

[task.corruption]
epsilon = 0.2

[sampler]
kind = "backtrack"
quota = 2
stride = 2
scope = "sequence"

[sweep]
"sampler.quota" = [0, 2]
"#;

fn btlab(args: &[&str], envs: &[(&str, &Path)]) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args).env_remove("BTLAB_OUT_DIR").env_remove("BTLAB_WORKERS");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = write(dir.path(), "good.toml", SMALL);
    let typo = write(dir.path(), "typo.toml", &SMALL.replace("stride = 2", "strid = 2"));
    let invalid = write(dir.path(), "invalid.toml", &SMALL.replace("d = 16", "d = 15"));

    assert_eq!(btlab(&["validate", &good], &[]).status.code(), Some(0));
    assert_eq!(btlab(&["validate", &typo], &[]).status.code(), Some(1));
    let out = btlab(&["validate", &invalid], &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("task.d"));
    assert_eq!(btlab(&["preset", "no-such-preset"], &[]).status.code(), Some(1));
    let missing = dir.path().join("missing.toml");
    assert_eq!(btlab(&["run", missing.to_str().unwrap()], &[]).status.code(), Some(2));

    let list = btlab(&["list-presets"], &[]);
    assert_eq!(list.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&list.stdout).lines().count(), btlab::presets::PRESETS.len());
}

#[test]
fn reruns_are_byte_identical_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.toml", SMALL);
    let runs = [
        vec!["run", &cfg, "--workers", "1"],
        vec!["run", &cfg, "--workers", "3"],
        vec!["run", &cfg, "--sequential"],
    ];
    let mut files = Vec::new();
    for (i, args) in runs.iter().enumerate() {
        let out = dir.path().join(format!("out{i}"));
        let mut args = args.clone();
        let out_str = out.to_string_lossy().into_owned();
        args.extend(["--out", &out_str]);
        assert!(btlab(&args, &[]).status.success());
        files.push((std::fs::read(out.join("small.csv")).unwrap(), std::fs::read(out.join("small.jsonl")).unwrap()));
    }
    assert!(files.windows(2).all(|w| w[0] == w[1]));

    let other = dir.path().join("seeded");
    let other_str = other.to_string_lossy().into_owned();
    assert!(btlab(&["run", &cfg, "--seed", "8", "--out", &other_str], &[]).status.success());
    assert_ne!(std::fs::read(other.join("small.csv")).unwrap(), files[0].0);
}

#[test]
fn rows_echo_their_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.toml", SMALL);
    let out = dir.path().join("o");
    assert!(btlab(&["run", &cfg, "--out", out.to_str().unwrap(), "--format", "csv"], &[]).status.success());
    assert!(!out.join("small.jsonl").exists());
    let rows = read_results(&out.join("small.csv"), OutputFormat::Csv).unwrap();
    let doc = btlab::ConfigDocument::parse(SMALL).unwrap();
    for row in &rows {
        assert_eq!(row.config().unwrap(), doc.grid[row.grid_index]);
    }
    // per repetition and aggregate rows, ordered by grid point
    assert!(rows.windows(2).all(|w| w[0].grid_index <= w[1].grid_index));
    assert!(rows.iter().any(|r| r.repetition == Some(1)));
}

#[test]
fn output_dir_flag_beats_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.toml", &SMALL.replace("episodes = 300", "episodes = 20"));
    let env_dir = dir.path().join("env");
    let flag_dir = dir.path().join("flag");
    assert!(btlab(&["run", &cfg], &[("BTLAB_OUT_DIR", &env_dir)]).status.success());
    assert!(env_dir.join("small.csv").exists());
    assert!(btlab(&["run", &cfg, "--out", flag_dir.to_str().unwrap()], &[("BTLAB_OUT_DIR", &env_dir)]).status.success());
    assert!(flag_dir.join("small.csv").exists());
}

#[test]
fn external_generator_matches_builtin() {
    let dir = tempfile::tempdir().unwrap();
    let base = "name = \"ext\"\nepisodes = 200\n[task]\nkind = \"uniform-target\"\nd = 6\n[sampler]\nkind = \"tokenwise\"\n";
    let external = format!("{base}[oracle]\nkind = \"subprocess\"\ncommand = [{BIN:?}, \"mock-oracle\", \"--vocab\", \"2\"]\n");
    let mut values = Vec::new();
    for (name, text) in [("a", base.to_string()), ("b", external)] {
        let cfg = write(dir.path(), &format!("{name}.toml"), &text);
        let out = dir.path().join(name);
        assert!(btlab(&["run", &cfg, "--out", out.to_str().unwrap()], &[]).status.success(), "{name}");
        let rows = read_results(&out.join("ext.jsonl"), OutputFormat::JsonLines).unwrap();
        values.push(rows.into_iter().map(|r| (r.metric, r.value, r.std_err)).collect::<Vec<_>>());
    }
    assert_eq!(values[0], values[1]);

    let broken = format!("{base}[oracle]\nkind = \"subprocess\"\ncommand = [{BIN:?}, \"mock-oracle\", \"--scale\", \"0.8\"]\n");
    let cfg = write(dir.path(), "broken.toml", &broken);
    let out = btlab(&["run", &cfg, "--out", dir.path().join("c").to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("malformed"));
}
