// Writes a synthetic aligned KG pair in the DBP15K layout and loads it
// back. Pass a directory to keep the output; otherwise a temp dir is used.

use std::path::PathBuf;

use ttea::dataset::{fingerprint, load_dbp15k, write_dbp15k, LoadOptions};
use ttea::{generate_synthetic_pair, SynthConfig};

pub fn run_example() -> ttea::Result<()> {
    let out = match std::env::args().nth(1) {
        Some(p) => PathBuf::from(p),
        None => std::env::temp_dir().join(format!("ttea-synth-{}", std::process::id())),
    };
    let task = generate_synthetic_pair(&SynthConfig::default())?;
    write_dbp15k(&task, &out)?;
    let back = load_dbp15k(&out, &LoadOptions::default())?;
    for (side, g) in [("KG1", &back.g1), ("KG2", &back.g2)] {
        println!(
            "{side}: {} entities, {} relations, {} triples",
            g.num_entities(),
            g.base().num_relations(),
            g.base().triples().len()
        );
    }
    println!("seeds: {} train / {} test", back.seeds_train.len(), back.seeds_test.len());
    println!("fingerprint {}", fingerprint(&out)?);
    assert_eq!(back.seeds_train, task.seeds_train);
    println!("wrote {}", out.display());
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
