// With only 10% of the seeds for training, compares plain training with
// mutual-nearest seed expansion.

use ttea::eval::{evaluate, EvalOptions};
use ttea::{fit, generate_synthetic_pair, SynthConfig, TrainConfig};

pub fn run_example() -> ttea::Result<(f64, f64, usize)> {
    let task = generate_synthetic_pair(&SynthConfig {
        train_ratio: 0.10,
        ..SynthConfig::default()
    })?;
    let base_cfg = TrainConfig {
        d_r: 16,
        d_t: 16,
        ..TrainConfig::default()
    };
    let semi_cfg = TrainConfig {
        semi: true,
        ..base_cfg.clone()
    };
    let opts = EvalOptions::default();
    let base = fit(&task, &base_cfg)?;
    let semi = fit(&task, &semi_cfg)?;
    let h_base = evaluate(&task, &base.final1, &base.final2, &opts)?.hits(1);
    let h_semi = evaluate(&task, &semi.final1, &semi.final2, &opts)?.hits(1);
    let correct = semi.proposed.iter().filter(|p| task.seeds_test.contains(p)).count();
    println!("train pairs: {} -> {}", task.seeds_train.len(), semi.train_pairs.len());
    println!("proposed pairs: {} ({correct} correct)", semi.proposed.len());
    println!("hits@1 base {h_base:.3}, semi {h_semi:.3}");
    Ok((h_base, h_semi, semi.proposed.len()))
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
