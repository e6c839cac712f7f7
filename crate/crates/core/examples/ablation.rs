// Variant x cycle-mode grid on the synthetic task, printed as a table.

use ttea::cli::{ablate, threads_from_env};
use ttea::{generate_synthetic_pair, SynthConfig, TrainConfig, Variant};

pub fn run_example() -> ttea::Result<String> {
    let task = generate_synthetic_pair(&SynthConfig::default())?;
    let cfg = TrainConfig {
        d_r: 16,
        d_t: 16,
        epochs: 10,
        ..TrainConfig::default()
    };
    let table = ablate(&task, &cfg, &Variant::ALL, &[1, 2, 3], &[2], threads_from_env())?;
    let tsv = table.to_tsv();
    print!("{tsv}");
    Ok(tsv)
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
