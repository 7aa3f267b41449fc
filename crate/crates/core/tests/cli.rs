//! End-to-end checks of the `dqnlab` binary.

use dqn_adapt::adapt::load_checkpoint;
use dqn_adapt::cli::{parse_aggregate, AGGREGATE_HEADER, EVALS_HEADER};
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn dqnlab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dqnlab")).current_dir(dir).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

/// Re-parses an evals.csv under its schema; returns the data rows.
fn parse_evals(text: &str, with_base: bool) -> Vec<Vec<String>> {
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    let want = if with_base { format!("{EVALS_HEADER},base_id") } else { EVALS_HEADER.to_string() };
    assert_eq!(header, want);
    lines
        .map(|l| {
            let f: Vec<String> = l.split(',').map(String::from).collect();
            assert_eq!(f.len(), if with_base { 5 } else { 4 }, "{l}");
            f[0].parse::<usize>().unwrap();
            let acc: f64 = f[1].parse().unwrap();
            assert!((0.0..=1.0).contains(&acc));
            for v in &f[2..4] {
                assert!(v.is_empty() || v.parse::<f64>().is_ok(), "{v}");
            }
            f
        })
        .collect()
}

#[test]
fn oracle_prints_table_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = dqnlab(dir.path(), &["oracle"]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    let csv: Vec<&str> = out.lines().skip_while(|l| *l != "y,x,action,q").skip(1).collect();
    assert_eq!(csv.len(), 24);
    let adapted = stdout(&dqnlab(dir.path(), &["oracle", "--task", "adapted"]));
    assert!(adapted.lines().any(|l| l == "0,1,left,-20"));
    let o = dqnlab(dir.path(), &["oracle", "--variant", "sideways"]);
    assert_eq!(code(&o), 1);
    assert_eq!(code(&dqnlab(dir.path(), &["oracle", "--task", "middle"])), 1);
    let stepped = stdout(&dqnlab(dir.path(), &["oracle", "--variant", "step_augmented", "--include-obstacle"]));
    assert_eq!(stepped.lines().skip_while(|l| *l != "y,x,step,action,q").count() - 1, 7 * 11 * 4);
}

#[test]
fn train_writes_deterministic_outputs() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.txt"), "# table 1 row 6\nalgorithm = 6\n").unwrap();
    let a = dqnlab(dir.path(), &["train", "c.txt", "--outdir", "a"]);
    assert_eq!(code(&a), 0, "{}", String::from_utf8_lossy(&a.stderr));
    assert!(stdout(&a).contains("settle_episode="));
    let b = dqnlab(dir.path(), &["train", "c.txt", "--outdir", "b"]);
    assert_eq!(code(&b), 0);
    let ea = fs::read_to_string(dir.path().join("a/evals.csv")).unwrap();
    let eb = fs::read_to_string(dir.path().join("b/evals.csv")).unwrap();
    assert_eq!(ea, eb);
    assert_eq!(parse_evals(&ea, false).len(), 20_000 / 10);
    let config = fs::read_to_string(dir.path().join("a/config.txt")).unwrap();
    assert!(config.contains("algorithm = alt_onpolicy_expert\n"));
    assert!(load_checkpoint(&dir.path().join("a/model.ckpt")).is_ok());
}

#[test]
fn train_rejects_bad_configs() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.txt"), "episodes = 10\nlearning_rate = 0.1\n").unwrap();
    let o = dqnlab(dir.path(), &["train", "bad.txt"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("bad.txt:2: unknown key `learning_rate`"));
    fs::write(dir.path().join("mse.txt"), "env = intersection\nmse = true\nepisodes = 1\n").unwrap();
    let o = dqnlab(dir.path(), &["train", "mse.txt"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("only defined for the grid"));
    fs::write(dir.path().join("c.txt"), "episodes = 10\n").unwrap();
    fs::write(dir.path().join("blocker"), "").unwrap();
    assert_eq!(code(&dqnlab(dir.path(), &["train", "c.txt", "--outdir", "blocker/sub"])), 2);
}

#[test]
fn adapt_records_base_and_leaves_it_untouched() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("base.txt"), "algorithm = supervised\nepisodes = 2000\noutdir = base\n").unwrap();
    assert_eq!(code(&dqnlab(d, &["train", "base.txt"])), 0);
    let base = d.join("base/model.ckpt");
    let before = fs::read(&base).unwrap();

    fs::write(d.join("re.txt"), "algorithm = 6\nepisodes = 500\noutdir = re\n").unwrap();
    let o = dqnlab(d, &["adapt", "--base", "base/model.ckpt", "re.txt"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read(&base).unwrap(), before);
    let rows = parse_evals(&fs::read_to_string(d.join("re/evals.csv")).unwrap(), true);
    let id = load_checkpoint(&base).unwrap().provenance.id();
    assert!(rows.iter().all(|r| r[4] == id));
    assert!(fs::read_to_string(d.join("re/config.txt")).unwrap().contains("task = adapted\n"));

    let o = dqnlab(d, &["adapt", "--base", "nothere.ckpt", "re.txt", "--outdir", "none"]);
    assert_ne!(code(&o), 0);
    assert!(!d.join("none").exists());

    fs::write(d.join("wrong.txt"), "env = intersection\nepisodes = 1\noutdir = wrong\n").unwrap();
    let o = dqnlab(d, &["adapt", "--base", "base/model.ckpt", "wrong.txt"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("layer dims"));
}

#[test]
fn sweep_aggregates_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let manifest = "episodes = 200\noutdir = sw\nrun supervised fresh 0 1\nrun on_policy fresh 3 4\n";
    fs::write(d.join("m.txt"), manifest).unwrap();
    assert_eq!(code(&dqnlab(d, &["sweep", "m.txt"])), 0);
    let agg = fs::read_to_string(d.join("sw/aggregate.csv")).unwrap();
    assert!(agg.starts_with(AGGREGATE_HEADER));
    let rows = parse_aggregate(&agg, "aggregate.csv").unwrap();
    assert_eq!(rows.len(), 4 + 2);
    assert_eq!(rows.iter().filter(|r| r.seed.is_none()).count(), 2);
    let first_run = fs::read_to_string(d.join("sw/on_policy__fresh__seed3/evals.csv")).unwrap();

    fs::write(d.join("m2.txt"), manifest.replace("outdir = sw", "outdir = sw2")).unwrap();
    assert_eq!(code(&dqnlab(d, &["sweep", "m2.txt"])), 0);
    assert_eq!(fs::read_to_string(d.join("sw2/aggregate.csv")).unwrap(), agg);
    assert_eq!(fs::read_to_string(d.join("sw2/on_policy__fresh__seed3/evals.csv")).unwrap(), first_run);

    fs::write(d.join("empty.txt"), "episodes = 5\n").unwrap();
    assert_eq!(code(&dqnlab(d, &["sweep", "empty.txt"])), 1);

    fs::write(d.join("partial.txt"), "episodes = 20\noutdir = p\nbase gone = gone.ckpt\nrun 1 gone 0\nrun 1 fresh 0\n").unwrap();
    let o = dqnlab(d, &["sweep", "partial.txt"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("on_policy__gone__seed0"));
    assert_eq!(parse_aggregate(&fs::read_to_string(d.join("p/aggregate.csv")).unwrap(), "a").unwrap().len(), 2);

    let report = dqnlab(d, &["report", "sw/aggregate.csv"]);
    assert_eq!(code(&report), 0);
    let text = stdout(&report);
    let on_policy = text.lines().position(|l| l.contains("On-Policy")).unwrap();
    let supervised = text.lines().position(|l| l.contains("Supervised Learning")).unwrap();
    assert!(on_policy < supervised, "table order");
}

#[test]
fn report_handles_empty_and_malformed_input() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("empty.csv"), format!("{AGGREGATE_HEADER}\n")).unwrap();
    assert_eq!(code(&dqnlab(d, &["report", "empty.csv"])), 0);
    fs::write(d.join("bad.csv"), format!("{AGGREGATE_HEADER}\nsupervised,fresh,0,1,,,\nsupervised,fresh,0,oops,,,\n")).unwrap();
    let o = dqnlab(d, &["report", "bad.csv"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("bad.csv:3:"));
}
