//! One PASS/FAIL line per acceptance criterion, written straight to stdout
//! so it shows up even under the test harness's output capture.

mod common;

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ttea::autodiff::OpKind;
use ttea::cli::{ablate, threads_from_env, train_run, LOSS_LOG, METRICS, RANKS};
use ttea::dataset::{load_dbp15k, load_kg, write_dbp15k, LoadOptions, ENT_IDS, REF_ENT_IDS, TRIPLES};
use ttea::eval::{evaluate, evaluate_pairs, EvalOptions};
use ttea::selfcheck::{gradient_suite, oracle_suite, SelfCheckOptions, MODULES};
use ttea::{fit, generate_synthetic_pair, oracle, SynthConfig, Tensor, Variant};

use common::{desk_config, desk_synth};

fn report(n: u32, name: &str, passed: bool, detail: &str) {
    let tag = if passed { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    writeln!(out, "[acceptance] criterion {n} {name}: {tag} ({detail})").expect("stdout");
    out.flush().expect("stdout");
}

#[test]
fn criterion_1_gradient_suite() {
    let start = Instant::now();
    let checks = gradient_suite(&SelfCheckOptions::default());
    let secs = start.elapsed().as_secs_f64();
    let worst = checks.iter().map(|c| c.error).fold(0.0, f64::max);
    let ops = checks.iter().filter(|c| c.name.starts_with("grad.op.")).count();
    let modules = checks.iter().filter(|c| c.name.starts_with("grad.module.")).count();
    let min_instances = checks.iter().map(|c| c.instances).min().unwrap_or(0);
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    let passed = failed.is_empty()
        && ops == OpKind::DIFFERENTIABLE.len()
        && modules == MODULES.len()
        && min_instances >= 20
        && worst < 1e-4
        && secs < 120.0;
    report(
        1,
        "gradient suite",
        passed,
        &format!(
            "{ops} ops + {modules} modules, {min_instances} instances each, worst rel err {worst:.2e}, {secs:.1}s, failed {failed:?}"
        ),
    );
    assert!(passed);
}

#[test]
fn criterion_2_oracle_equivalence() {
    let checks = oracle_suite(&SelfCheckOptions {
        instances: 50,
        seed: 2,
        fault: None,
    });
    let worst = checks.iter().map(|c| c.error).fold(0.0, f64::max);
    let names: Vec<&str> = checks.iter().map(|c| c.name.as_str()).collect();
    let passed = checks.iter().all(|c| c.passed) && worst <= 1e-10;
    report(
        2,
        "oracle equivalence",
        passed,
        &format!("{} checks x 50 instances, worst abs diff {worst:.2e}: {}", checks.len(), names.join(", ")),
    );
    assert!(passed);
}

#[test]
fn criterion_3_metric_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let m = 200;
    let mut mismatches = 0;
    for inst in 0..100 {
        let d = rng.random_range(1..6);
        // every other instance on a coarse grid so ties are frequent
        let coarse = inst % 2 == 0;
        let draw = |rng: &mut ChaCha8Rng| -> Vec<Vec<f64>> {
            (0..m)
                .map(|_| {
                    (0..d)
                        .map(|_| if coarse { rng.random_range(0..3) as f64 } else { rng.random_range(-1.0..1.0) })
                        .collect()
                })
                .collect()
        };
        let (r1, r2) = (draw(&mut rng), draw(&mut rng));
        let mut targets: Vec<usize> = (0..m).collect();
        targets.shuffle(&mut rng);
        let pairs: Vec<(usize, usize)> = (0..m).zip(targets).collect();
        let f1 = Tensor::from_rows(&r1).unwrap();
        let f2 = Tensor::from_rows(&r2).unwrap();
        let got = evaluate_pairs(&pairs, &f1, &f2, &EvalOptions::default()).unwrap();
        let want_ranks = oracle::sorted_ranks(&pairs, &r1, &r2);
        let (h1, h10, mrr) = oracle::metrics(&pairs, &r1, &r2);
        let ranks: Vec<usize> = got.ranks.iter().map(|r| r.rank).collect();
        if ranks != want_ranks || got.hits(1) != h1 || got.hits(10) != h10 || got.mrr != mrr {
            mismatches += 1;
        }
    }
    let rows: Vec<Vec<f64>> = (0..m).map(|i| vec![i as f64, -(i as f64)]).collect();
    let f = Tensor::from_rows(&rows).unwrap();
    let pairs: Vec<(usize, usize)> = (0..m).map(|i| (i, i)).collect();
    let perfect = evaluate_pairs(&pairs, &f, &f, &EvalOptions::default()).unwrap();
    let perfect_ok = perfect.hits(1) == 1.0 && perfect.hits(10) == 1.0 && perfect.mrr == 1.0;
    let passed = mismatches == 0 && perfect_ok;
    report(
        3,
        "metric oracle",
        passed,
        &format!("100 instances of 200x200, {mismatches} mismatches; perfect case H@1/H@10/MRR = {}/{}/{}", perfect.hits(1), perfect.hits(10), perfect.mrr),
    );
    assert!(passed);
}

#[test]
fn criterion_4_end_to_end() {
    let start = Instant::now();
    let task = generate_synthetic_pair(&desk_synth()).unwrap();
    let out = fit(&task, &desk_config()).unwrap();
    let r = evaluate(&task, &out.final1, &out.final2, &EvalOptions::default()).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let passed = r.hits(1) >= 0.95 && secs < 300.0;
    report(
        4,
        "end-to-end desk-scale alignment",
        passed,
        &format!(
            "H@1 {:.4} H@10 {:.4} MRR {:.4} on {} test pairs, {} epochs, {secs:.1}s",
            r.hits(1),
            r.hits(10),
            r.mrr,
            r.ranks.len(),
            out.history.len()
        ),
    );
    assert!(passed);
}

#[test]
fn criterion_5_ablation_harness() {
    let task = generate_synthetic_pair(&desk_synth()).unwrap();
    let cfg = desk_config();
    let threads = threads_from_env();
    let modes = ablate(&task, &cfg, &Variant::ALL, &[1, 2, 3], &[2], threads).unwrap();
    let depths = ablate(&task, &cfg, &[Variant::Full], &[2], &[1, 2, 3], threads).unwrap();
    let shaped = |tsv: &str, rows: usize| {
        let lines: Vec<&str> = tsv.lines().collect();
        lines.len() == rows + 1
            && lines[0] == "setting\tH@1\tH@10\tMRR\tstatus"
            && lines.iter().all(|l| l.split('\t').count() == 5)
    };
    let (t_modes, t_depths) = (modes.to_tsv(), depths.to_tsv());
    let passed =
        modes.failures() == 0 && depths.failures() == 0 && shaped(&t_modes, 12) && shaped(&t_depths, 3);
    report(
        5,
        "ablation harness",
        passed,
        &format!(
            "4 variants x 3 modes = {} rows, depths 1..3 = {} rows, {} failed cells",
            modes.cells.len(),
            depths.cells.len(),
            modes.failures() + depths.failures()
        ),
    );
    let mut out = std::io::stdout().lock();
    for line in t_modes.lines().chain(t_depths.lines().skip(1)) {
        writeln!(out, "    {line}").expect("stdout");
    }
    drop(out);
    assert!(passed);
}

#[test]
fn criterion_6_semi_mode() {
    let task = generate_synthetic_pair(&SynthConfig {
        train_ratio: 0.10,
        ..desk_synth()
    })
    .unwrap();
    let base_cfg = desk_config();
    let semi_cfg = ttea::TrainConfig {
        semi: true,
        ..base_cfg.clone()
    };
    let base = fit(&task, &base_cfg).unwrap();
    let semi = fit(&task, &semi_cfg).unwrap();
    let opts = EvalOptions::default();
    let h_base = evaluate(&task, &base.final1, &base.final2, &opts).unwrap().hits(1);
    let h_semi = evaluate(&task, &semi.final1, &semi.final2, &opts).unwrap().hits(1);

    let seed1: HashSet<usize> = task.seeds_train.iter().map(|p| p.0).collect();
    let seed2: HashSet<usize> = task.seeds_train.iter().map(|p| p.1).collect();
    let touches_aligned = semi.proposed.iter().any(|p| seed1.contains(&p.0) || seed2.contains(&p.1));
    let mut used1 = HashSet::new();
    let mut used2 = HashSet::new();
    let no_reuse = semi.proposed.iter().all(|p| used1.insert(p.0) && used2.insert(p.1));
    let grew = semi.train_pairs.len() > task.seeds_train.len();
    let passed = grew && !touches_aligned && no_reuse && h_semi >= h_base - 0.02;
    report(
        6,
        "semi mode",
        passed,
        &format!(
            "train pairs {} -> {}, {} proposals, H@1 base {h_base:.4} semi {h_semi:.4}",
            task.seeds_train.len(),
            semi.train_pairs.len(),
            semi.proposed.len()
        ),
    );
    assert!(passed);
}

#[test]
fn criterion_7_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    write_dbp15k(&generate_synthetic_pair(&desk_synth()).unwrap(), &data).unwrap();
    let mut cfg = desk_config();
    cfg.eval_every = 5;
    cfg.semi = true;
    let runs: Vec<PathBuf> = (0..2).map(|i| dir.path().join(format!("run{i}"))).collect();
    for r in &runs {
        train_run(&data, &cfg, r).unwrap();
    }
    let same = |f: &str| fs::read(runs[0].join(f)).unwrap() == fs::read(runs[1].join(f)).unwrap();
    let files = [LOSS_LOG, METRICS, RANKS, ttea::cli::CHECKPOINT];
    let identical: Vec<bool> = files.iter().map(|f| same(f)).collect();
    let passed = identical.iter().all(|&b| b);
    report(
        7,
        "determinism",
        passed,
        &format!("byte-identical across two runs: {:?}", files.iter().zip(&identical).collect::<Vec<_>>()),
    );
    assert!(passed);
}

/// (entities, relations, triples)
type GraphCounts = (usize, usize, usize);

/// Published statistics per dataset directory: both graphs, then links.
const TABLE1: [(&str, [GraphCounts; 2], usize); 3] = [
    ("zh_en", [(19388, 1700, 70414), (19572, 1322, 95142)], 15000),
    ("ja_en", [(19814, 1298, 77214), (19780, 1152, 93484)], 15000),
    ("fr_en", [(19661, 902, 105998), (19993, 1207, 115722)], 15000),
];

fn dbp15k_root() -> Option<PathBuf> {
    let candidates = [
        std::env::var("TTEA_DBP15K").ok().map(PathBuf::from),
        Some(PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/DBP15K"))),
        Some(PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/dbp15k"))),
    ];
    candidates.into_iter().flatten().find(|p| p.is_dir())
}

#[test]
fn criterion_8_data_layer() {
    let dir = tempfile::tempdir().unwrap();
    let task = generate_synthetic_pair(&desk_synth()).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    write_dbp15k(&task, &a).unwrap();
    let back = load_dbp15k(&a, &LoadOptions::default()).unwrap();
    write_dbp15k(&back, &b).unwrap();
    let lossless = back.g1.base() == task.g1.base()
        && back.g2.base() == task.g2.base()
        && back.seeds_train == task.seeds_train
        && back.seeds_test == task.seeds_test
        && back.init_emb1 == task.init_emb1
        && back.init_emb2 == task.init_emb2
        && fs::read_dir(&a).unwrap().all(|e| {
            let name = e.unwrap().file_name();
            fs::read(a.join(&name)).unwrap() == fs::read(b.join(&name)).unwrap()
        });

    let mut detail = format!("synthetic round-trip lossless: {lossless}");
    let mut real_ok = true;
    match dbp15k_root() {
        None => detail.push_str("; real DBP15K not found (set TTEA_DBP15K), published-statistics check skipped"),
        Some(root) => {
            for (name, sides, links) in TABLE1 {
                let d = root.join(name);
                if !d.is_dir() {
                    detail.push_str(&format!("; {name} absent, skipped"));
                    continue;
                }
                for (side, want) in sides.iter().enumerate() {
                    let got = load_kg(&d.join(ENT_IDS[side]), &d.join(TRIPLES[side]))
                        .map(|(g, _)| (g.num_entities(), g.num_relations(), g.triples().len()));
                    let ok = got.as_ref().is_ok_and(|g| g == want);
                    real_ok &= ok;
                    detail.push_str(&format!("; {name} KG{} {got:?} want {want:?}", side + 1));
                }
                let n_links = fs::read_to_string(d.join(REF_ENT_IDS))
                    .map(|s| s.lines().filter(|l| !l.trim().is_empty()).count())
                    .unwrap_or(0);
                real_ok &= n_links == links;
                detail.push_str(&format!(" links {n_links}"));
            }
        }
    }
    let passed = lossless && real_ok;
    report(8, "data layer", passed, &detail);
    assert!(passed);
}
