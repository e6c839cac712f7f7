mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ttea::checkpoint;
use ttea::cli::{ablate, CHECKPOINT, LOSS_LOG, METRICS, RANKS};
use ttea::dataset::{load_dbp15k, LoadOptions};
use ttea::model::{ModelConfig, TteaModel};
use ttea::{generate_synthetic_pair, TrainConfig, Variant};

use common::{small_config, small_synth};

fn ttea(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ttea"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn gen_small(dir: &Path, entities: usize) {
    let o = ttea(&[
        "gen-synth", "--entities", &entities.to_string(), "--relations", "5", "--emb-dim", "8", "--seed", "3",
        "--out", s(dir),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

const SMALL: [&str; 6] = ["--d-r", "4", "--d-t", "4", "--epochs", "6"];

fn train(data: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["train", "--data", s(data), "--out", s(out)];
    args.extend_from_slice(&SMALL);
    args.extend_from_slice(extra);
    ttea(&args)
}

#[test]
fn gen_synth_is_deterministic_and_loadable() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let o = ttea(&["gen-synth", "--entities", "200", "--seed", "7", "--out", s(d)]);
        assert_eq!(code(&o), 0);
        assert!(String::from_utf8_lossy(&o.stdout).contains("triples"));
    }
    for entry in fs::read_dir(&a).unwrap() {
        let name = entry.unwrap().file_name();
        assert_eq!(fs::read(a.join(&name)).unwrap(), fs::read(b.join(&name)).unwrap(), "{name:?}");
    }
    let task = load_dbp15k(&a, &LoadOptions::default()).unwrap();
    assert_eq!(task.g1.num_entities(), 200);
    assert_eq!(task.seeds_train.len() + task.seeds_test.len(), 200);
}

#[test]
fn gen_synth_rejects_full_drop() {
    let dir = tempfile::tempdir().unwrap();
    let o = ttea(&["gen-synth", "--drop-prob", "1.0", "--out", s(&dir.path().join("x"))]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("drop"));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&ttea(&["train", "--bogus"])), 1);
    assert_eq!(code(&ttea(&["nonsense"])), 1);
    assert_eq!(code(&ttea(&["--help"])), 0);
}

#[test]
fn train_then_eval_reproduces_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let (data, run) = (dir.path().join("data"), dir.path().join("run"));
    gen_small(&data, 40);
    let o = train(&data, &run, &["--eval-every", "2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in [CHECKPOINT, LOSS_LOG, METRICS, RANKS, "manifest.txt"] {
        assert!(run.join(f).exists(), "{f}");
    }
    let log = fs::read_to_string(run.join(LOSS_LOG)).unwrap();
    let lines: Vec<&str> = log.lines().collect();
    assert_eq!(lines[0], "epoch\tloss\thits@1");
    assert_eq!(lines.len(), 7);
    assert_eq!(lines[1].split('\t').count(), 3);
    assert_eq!(lines[2].split('\t').count(), 2);

    let ranks = dir.path().join("ranks.tsv");
    let o = ttea(&["eval", "--model", s(&run), "--data", s(&data), "--ranks", s(&ranks)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(String::from_utf8_lossy(&o.stdout), fs::read_to_string(run.join(METRICS)).unwrap());

    let task = load_dbp15k(&data, &LoadOptions::default()).unwrap();
    assert_eq!(fs::read_to_string(&ranks).unwrap().lines().count(), task.seeds_test.len());
}

#[test]
fn manifest_alone_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let (data, run) = (dir.path().join("data"), dir.path().join("run"));
    gen_small(&data, 40);
    assert_eq!(code(&train(&data, &run, &["--variant", "wo-E", "--cycle-mode", "3", "--seed", "5"])), 0);
    let manifest = fs::read_to_string(run.join("manifest.txt")).unwrap();
    let config: String = manifest
        .lines()
        .filter_map(|l| l.strip_prefix("config\t"))
        .map(|l| format!("{l}\n"))
        .collect();
    let cfg_file = dir.path().join("cfg.txt");
    fs::write(&cfg_file, config).unwrap();
    let rerun = dir.path().join("rerun");
    let o = ttea(&["train", "--data", s(&data), "--config", s(&cfg_file), "--out", s(&rerun)]);
    assert_eq!(code(&o), 0);
    for f in [CHECKPOINT, LOSS_LOG, METRICS] {
        assert_eq!(fs::read(run.join(f)).unwrap(), fs::read(rerun.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn zero_epochs_checkpoints_initial_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let (data, run) = (dir.path().join("data"), dir.path().join("run"));
    gen_small(&data, 40);
    let o = ttea(&["train", "--data", s(&data), "--out", s(&run), "--d-r", "4", "--d-t", "4", "--epochs", "0"]);
    assert_eq!(code(&o), 0);
    let saved = checkpoint::load(&run.join(CHECKPOINT)).unwrap();
    let task = load_dbp15k(&data, &LoadOptions::default()).unwrap();
    let cfg = TrainConfig {
        d_r: 4,
        d_t: 4,
        ..TrainConfig::default()
    };
    let fresh = TteaModel::init(
        ModelConfig::from_train(&cfg, task.emb_dim()).unwrap(),
        &task.init_emb1,
        &task.init_emb2,
        cfg.seed,
    )
    .unwrap();
    assert_eq!(saved, fresh);
    assert_eq!(fs::read_to_string(run.join(LOSS_LOG)).unwrap(), "epoch\tloss\n");
}

#[test]
fn every_variant_trains_from_the_command_line() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    gen_small(&data, 40);
    for v in ["full", "wo-E", "wo-T", "wo-C"] {
        let o = train(&data, &dir.path().join(v), &["--variant", v, "--semi"]);
        assert_eq!(code(&o), 0, "{v}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn eval_errors_have_data_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let (data, other, run) = (dir.path().join("data"), dir.path().join("other"), dir.path().join("run"));
    gen_small(&data, 40);
    gen_small(&other, 50);
    assert_eq!(code(&train(&data, &run, &[])), 0);

    let o = ttea(&["eval", "--model", s(&dir.path().join("missing")), "--data", s(&data)]);
    assert_eq!(code(&o), 2);
    let o = ttea(&["eval", "--model", s(&run), "--data", s(&other)]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("entities"));
    let o = ttea(&["train", "--data", s(&dir.path().join("nope")), "--out", s(&dir.path().join("r"))]);
    assert_eq!(code(&o), 2);
}

#[test]
fn divergence_exits_with_numerical_code() {
    let dir = tempfile::tempdir().unwrap();
    let (data, run) = (dir.path().join("data"), dir.path().join("run"));
    gen_small(&data, 40);
    let o = train(&data, &run, &["--lr", "1e300"]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("epoch"));
}

#[test]
fn ablate_tables_have_one_row_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    gen_small(&data, 40);
    let table = dir.path().join("t.tsv");
    let mut args = vec!["ablate", "--data", s(&data), "--modes", "1,2,3", "--out", s(&table)];
    args.extend_from_slice(&SMALL);
    let o = ttea(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&table).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert_eq!(String::from_utf8_lossy(&o.stdout), text);

    let mut args = vec!["ablate", "--data", s(&data), "--depths", "1,2,3"];
    args.extend_from_slice(&SMALL);
    let o = ttea(&args);
    assert_eq!(String::from_utf8_lossy(&o.stdout).lines().count(), 4);
}

#[test]
fn ablation_records_failed_cells_and_continues() {
    let task = generate_synthetic_pair(&small_synth(1)).unwrap();
    let t = ablate(&task, &small_config(), &[Variant::Full], &[2, 7], &[1], 2).unwrap();
    assert_eq!(t.cells.len(), 2);
    assert_eq!(t.failures(), 1);
    assert!(t.cells[0].outcome.is_ok());
    assert!(t.to_tsv().lines().nth(2).unwrap().contains("failed"));
    assert!(ablate(&task, &small_config(), &[], &[2], &[1], 1).is_err());
}

#[test]
fn ablation_is_independent_of_thread_count() {
    let task = generate_synthetic_pair(&small_synth(2)).unwrap();
    let one = ablate(&task, &small_config(), &Variant::ALL, &[1, 2], &[1], 1).unwrap();
    let many = ablate(&task, &small_config(), &Variant::ALL, &[1, 2], &[1], 3).unwrap();
    assert_eq!(one, many);
}

#[test]
fn check_passes_clean_and_catches_planted_fault() {
    let o = ttea(&["check", "--instances", "3"]);
    assert_eq!(code(&o), 0);
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(out.lines().filter(|l| l.starts_with("PASS\tgrad.op.")).count() >= 20);

    let o = ttea(&["check", "--instances", "3", "--inject-fault", "SegmentSum"]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL\tgrad.op.SegmentSum"));
}
