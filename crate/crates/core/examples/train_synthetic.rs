// Generates the desk-scale synthetic pair, trains the full model and
// prints the test metrics.

use ttea::eval::{evaluate, EvalOptions};
use ttea::{fit, generate_synthetic_pair, SynthConfig, TrainConfig};

pub fn run_example() -> ttea::Result<f64> {
    let task = generate_synthetic_pair(&SynthConfig::default())?;
    let cfg = TrainConfig {
        d_r: 16,
        d_t: 16,
        ..TrainConfig::default()
    };
    let out = fit(&task, &cfg)?;
    let first = out.history.first().map_or(f64::NAN, |e| e.loss);
    let last = out.history.last().map_or(f64::NAN, |e| e.loss);
    println!("loss {first:.3} -> {last:.3} over {} epochs", out.history.len());
    let report = evaluate(&task, &out.final1, &out.final2, &EvalOptions::default())?;
    print!("{}", report.to_text());
    Ok(report.hits(1))
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
