// Loads a DBP15K-format directory and prints its statistics. The directory
// comes from the first argument or TTEA_DBP15K; without either it says so
// and exits cleanly.

use std::path::PathBuf;

use ttea::dataset::{load_kg, ENT_IDS, REF_ENT_IDS, TRIPLES};

pub fn run_example() -> ttea::Result<Option<[usize; 3]>> {
    let dir = std::env::args()
        .nth(1)
        .or_else(|| std::env::var("TTEA_DBP15K").ok())
        .map(PathBuf::from);
    let Some(dir) = dir else {
        println!("no dataset given (pass a directory or set TTEA_DBP15K); skipping");
        return Ok(None);
    };
    let mut stats = [0usize; 3];
    for side in 0..2 {
        let (g, _) = load_kg(&dir.join(ENT_IDS[side]), &dir.join(TRIPLES[side]))?;
        println!(
            "KG{}: {} entities, {} relations, {} triples",
            side + 1,
            g.num_entities(),
            g.num_relations(),
            g.triples().len()
        );
        if side == 0 {
            stats = [g.num_entities(), g.num_relations(), g.triples().len()];
        }
    }
    let links = std::fs::read_to_string(dir.join(REF_ENT_IDS))
        .map_err(|e| ttea::Error::io(dir.join(REF_ENT_IDS), e))?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .count();
    println!("{links} reference links");
    Ok(Some(stats))
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
