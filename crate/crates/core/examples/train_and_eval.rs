// Full run-directory workflow: train, write checkpoint + manifest + logs,
// then reload the checkpoint and evaluate it again.

use ttea::cli::{eval_run, train_run, RunManifest};
use ttea::dataset::write_dbp15k;
use ttea::eval::EvalOptions;
use ttea::{generate_synthetic_pair, SynthConfig, TrainConfig};

pub fn run_example() -> ttea::Result<()> {
    let root = std::env::temp_dir().join(format!("ttea-run-{}", std::process::id()));
    let data = root.join("data");
    write_dbp15k(&generate_synthetic_pair(&SynthConfig::default())?, &data)?;

    let cfg = TrainConfig {
        d_r: 16,
        d_t: 16,
        epochs: 20,
        eval_every: 5,
        ..TrainConfig::default()
    };
    let run = root.join("run");
    let trained = train_run(&data, &cfg, &run)?;
    print!("{}", trained.to_text());

    let (again, _) = eval_run(&run, &data, &EvalOptions::default())?;
    assert_eq!(again.to_text(), trained.report.to_text());
    let manifest = RunManifest::load(&run)?;
    println!("manifest fingerprint {}", manifest.fingerprint);
    println!("re-evaluated from checkpoint: hits@1 {:.3}", again.hits(1));
    std::fs::remove_dir_all(&root).map_err(|e| ttea::Error::io(&root, e))?;
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
