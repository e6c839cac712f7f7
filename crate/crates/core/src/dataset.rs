//! Alignment tasks and the DBP15K directory layout.
//!
//! All files are UTF-8 and tab separated:
//!
//! | file | line format |
//! |------|-------------|
//! | `ent_ids_1`, `ent_ids_2` | `<id>\t<name>` |
//! | `triples_1`, `triples_2` | `<head id>\t<relation id>\t<tail id>` |
//! | `ref_ent_ids` | `<id in KG1>\t<id in KG2>` |
//! | `ent_emb_1`, `ent_emb_2` | `<id>\t<v1> <v2> ... <v_d>` |
//! | `train_ent_ids` (optional) | `<id in KG1>\t<id in KG2>` |
//!
//! File ids are remapped to dense local ids in `ent_ids` line order, and
//! relation ids to dense ids in ascending file-id order. The two graphs keep
//! independent id spaces. When `train_ent_ids` is present it fixes the
//! training split; otherwise `ref_ent_ids` is split by a seeded shuffle.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::kg::{expand_relations, KnowledgeGraph, RelationExpandedGraph, Triple};
use crate::tensor::Tensor;

pub const ENT_IDS: [&str; 2] = ["ent_ids_1", "ent_ids_2"];
pub const TRIPLES: [&str; 2] = ["triples_1", "triples_2"];
pub const ENT_EMB: [&str; 2] = ["ent_emb_1", "ent_emb_2"];
pub const REF_ENT_IDS: &str = "ref_ent_ids";
pub const TRAIN_ENT_IDS: &str = "train_ent_ids";

pub type SeedPair = (usize, usize);

/// Two relation-expanded graphs, seed pairs split into train and test, and
/// initial name embeddings for both sides.
#[derive(Clone, Debug)]
pub struct AlignmentTask {
    pub g1: RelationExpandedGraph,
    pub g2: RelationExpandedGraph,
    pub seeds_train: Vec<SeedPair>,
    pub seeds_test: Vec<SeedPair>,
    pub init_emb1: Tensor,
    pub init_emb2: Tensor,
}

impl AlignmentTask {
    pub fn new(
        g1: RelationExpandedGraph,
        g2: RelationExpandedGraph,
        seeds_train: Vec<SeedPair>,
        seeds_test: Vec<SeedPair>,
        init_emb1: Tensor,
        init_emb2: Tensor,
    ) -> Result<Self> {
        let task = AlignmentTask {
            g1,
            g2,
            seeds_train,
            seeds_test,
            init_emb1,
            init_emb2,
        };
        task.validate()?;
        Ok(task)
    }

    fn validate(&self) -> Result<()> {
        for (emb, g, side) in [(&self.init_emb1, &self.g1, 1), (&self.init_emb2, &self.g2, 2)] {
            if emb.shape().len() != 2 || emb.shape()[0] != g.num_entities() {
                return Err(Error::Graph(format!(
                    "embedding {side} has shape {:?} for {} entities",
                    emb.shape(),
                    g.num_entities()
                )));
            }
        }
        if self.init_emb1.cols() != self.init_emb2.cols() {
            return Err(Error::Graph(format!(
                "embedding widths differ: {} vs {}",
                self.init_emb1.cols(),
                self.init_emb2.cols()
            )));
        }
        let (mut used1, mut used2) = (HashSet::new(), HashSet::new());
        for &(a, b) in self.seeds_train.iter().chain(&self.seeds_test) {
            if a >= self.g1.num_entities() || b >= self.g2.num_entities() {
                return Err(Error::Graph(format!("seed pair ({a}, {b}) out of range")));
            }
            if !used1.insert(a) || !used2.insert(b) {
                return Err(Error::Graph(format!(
                    "seed pair ({a}, {b}) reuses an entity already in another pair"
                )));
            }
        }
        Ok(())
    }

    pub fn emb_dim(&self) -> usize {
        self.init_emb1.cols()
    }
}

/// Splits links into `(train, test)` with a seeded shuffle.
pub fn split_seeds(links: &[SeedPair], train_ratio: f64, seed: u64) -> Result<(Vec<SeedPair>, Vec<SeedPair>)> {
    if !(train_ratio > 0.0 && train_ratio < 1.0) {
        return Err(Error::Config(format!("train ratio must be in (0, 1), got {train_ratio}")));
    }
    let mut shuffled = links.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    shuffled.shuffle(&mut rng);
    let n_train = (train_ratio * links.len() as f64).round() as usize;
    let test = shuffled.split_off(n_train);
    Ok((shuffled, test))
}

fn read(path: &Path) -> Result<String> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty())
}

fn parse_id(path: &Path, line: usize, field: &str) -> Result<i64> {
    field
        .trim()
        .parse()
        .map_err(|_| parse_err(path, line, format!("expected integer id, found {field:?}")))
}

/// Entity file ids in line order, their names, and the id → index map.
struct EntityTable {
    names: Vec<String>,
    index: HashMap<i64, usize>,
    file_ids: Vec<i64>,
}

fn read_entities(path: &Path) -> Result<EntityTable> {
    let text = read(path)?;
    let mut table = EntityTable {
        names: Vec::new(),
        index: HashMap::new(),
        file_ids: Vec::new(),
    };
    for (ln, line) in lines(&text) {
        let (id, name) = line.split_once('\t').unwrap_or((line, ""));
        let id = parse_id(path, ln, id)?;
        if table.index.insert(id, table.names.len()).is_some() {
            return Err(parse_err(path, ln, format!("duplicate entity id {id}")));
        }
        table.file_ids.push(id);
        table.names.push(name.to_string());
    }
    Ok(table)
}

fn lookup(ents: &EntityTable, path: &Path, line: usize, id: i64) -> Result<usize> {
    ents.index
        .get(&id)
        .copied()
        .ok_or_else(|| parse_err(path, line, format!("unknown entity id {id}")))
}

/// Loads one graph from an `ent_ids` and a `triples` file.
///
/// Duplicate triple lines are dropped with a warning.
pub fn load_kg(ent_path: &Path, triple_path: &Path) -> Result<(KnowledgeGraph, Vec<i64>)> {
    let ents = read_entities(ent_path)?;
    let text = read(triple_path)?;
    let mut raw = Vec::new();
    for (ln, line) in lines(&text) {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(parse_err(triple_path, ln, format!("expected 3 fields, found {}", fields.len())));
        }
        let h = lookup(&ents, triple_path, ln, parse_id(triple_path, ln, fields[0])?)?;
        let r = parse_id(triple_path, ln, fields[1])?;
        let t = lookup(&ents, triple_path, ln, parse_id(triple_path, ln, fields[2])?)?;
        raw.push((h, r, t));
    }
    let rel_ids: BTreeMap<i64, usize> = {
        let mut ids: Vec<i64> = raw.iter().map(|&(_, r, _)| r).collect();
        ids.sort_unstable();
        ids.dedup();
        ids.into_iter().enumerate().map(|(i, r)| (r, i)).collect()
    };
    let mut seen = HashSet::new();
    let mut triples = Vec::with_capacity(raw.len());
    let mut dups = 0usize;
    for (h, r, t) in raw {
        let tr = Triple::new(h, rel_ids[&r], t);
        if seen.insert(tr) {
            triples.push(tr);
        } else {
            dups += 1;
        }
    }
    if dups > 0 {
        log::warn!("{}: dropped {dups} duplicate triples", triple_path.display());
    }
    let n = ents.names.len();
    let kg = KnowledgeGraph::new(n, rel_ids.len(), triples, Some(ents.names))?;
    Ok((kg, ents.file_ids))
}

fn read_pairs(path: &Path, e1: &EntityTable, e2: &EntityTable) -> Result<Vec<SeedPair>> {
    let text = read(path)?;
    let mut out = Vec::new();
    for (ln, line) in lines(&text) {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 {
            return Err(parse_err(path, ln, format!("expected 2 fields, found {}", fields.len())));
        }
        let a = lookup(e1, path, ln, parse_id(path, ln, fields[0])?)?;
        let b = lookup(e2, path, ln, parse_id(path, ln, fields[1])?)?;
        out.push((a, b));
    }
    Ok(out)
}

fn read_embeddings(path: &Path, ents: &EntityTable) -> Result<Tensor> {
    let text = read(path)?;
    let mut rows: Vec<Option<Vec<f64>>> = vec![None; ents.names.len()];
    let mut width = None;
    for (ln, line) in lines(&text) {
        let (id, values) = line
            .split_once('\t')
            .ok_or_else(|| parse_err(path, ln, "expected `<id>\\t<values>`"))?;
        let idx = lookup(ents, path, ln, parse_id(path, ln, id)?)?;
        let v: Vec<f64> = values
            .split_whitespace()
            .map(|s| s.parse::<f64>().map_err(|_| parse_err(path, ln, format!("bad float {s:?}"))))
            .collect::<Result<_>>()?;
        if v.iter().any(|x| !x.is_finite()) {
            return Err(parse_err(path, ln, "non-finite embedding value"));
        }
        match width {
            None => width = Some(v.len()),
            Some(w) if w != v.len() => {
                return Err(parse_err(path, ln, format!("expected {w} values, found {}", v.len())))
            }
            _ => {}
        }
        rows[idx] = Some(v);
    }
    let mut data = Vec::new();
    for (i, row) in rows.into_iter().enumerate() {
        let row = row.ok_or_else(|| {
            parse_err(path, 0, format!("no embedding for entity id {}", ents.file_ids[i]))
        })?;
        data.extend(row);
    }
    Tensor::new(vec![ents.names.len(), width.unwrap_or(0)], data)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LoadOptions {
    pub train_ratio: f64,
    pub split_seed: u64,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            train_ratio: 0.30,
            split_seed: 0,
        }
    }
}

pub fn load_dbp15k(dir: &Path, opts: &LoadOptions) -> Result<AlignmentTask> {
    let e1 = read_entities(&dir.join(ENT_IDS[0]))?;
    let e2 = read_entities(&dir.join(ENT_IDS[1]))?;
    let (kg1, _) = load_kg(&dir.join(ENT_IDS[0]), &dir.join(TRIPLES[0]))?;
    let (kg2, _) = load_kg(&dir.join(ENT_IDS[1]), &dir.join(TRIPLES[1]))?;
    let links = read_pairs(&dir.join(REF_ENT_IDS), &e1, &e2)?;
    let train_path = dir.join(TRAIN_ENT_IDS);
    let (train, test) = if train_path.exists() {
        let train = read_pairs(&train_path, &e1, &e2)?;
        let in_train: HashSet<SeedPair> = train.iter().copied().collect();
        let test = links.iter().copied().filter(|p| !in_train.contains(p)).collect();
        (train, test)
    } else {
        split_seeds(&links, opts.train_ratio, opts.split_seed)?
    };
    let emb1 = read_embeddings(&dir.join(ENT_EMB[0]), &e1)?;
    let emb2 = read_embeddings(&dir.join(ENT_EMB[1]), &e2)?;
    AlignmentTask::new(
        expand_relations(kg1)?,
        expand_relations(kg2)?,
        train,
        test,
        emb1,
        emb2,
    )
}

fn write(path: PathBuf, text: String) -> Result<()> {
    fs::write(&path, text).map_err(|e| Error::io(path, e))
}

/// Writes a task in the same layout, using local ids as file ids. The
/// training split is written to `train_ent_ids` so a reload reproduces it.
pub fn write_dbp15k(task: &AlignmentTask, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (side, (g, emb)) in [(&task.g1, &task.init_emb1), (&task.g2, &task.init_emb2)]
        .into_iter()
        .enumerate()
    {
        let base = g.base();
        let mut ents = String::new();
        for e in 0..base.num_entities() {
            let name = base.entity_names().map_or_else(|| format!("e{e}"), |n| n[e].clone());
            writeln!(ents, "{e}\t{name}").expect("string write");
        }
        write(dir.join(ENT_IDS[side]), ents)?;

        let mut triples = String::new();
        for t in base.triples() {
            writeln!(triples, "{}\t{}\t{}", t.head, t.relation, t.tail).expect("string write");
        }
        write(dir.join(TRIPLES[side]), triples)?;

        let mut embs = String::new();
        for e in 0..emb.rows() {
            let vals: Vec<String> = emb.row(e).iter().map(|v| format!("{v}")).collect();
            writeln!(embs, "{e}\t{}", vals.join(" ")).expect("string write");
        }
        write(dir.join(ENT_EMB[side]), embs)?;
    }
    let pairs = |ps: &[SeedPair]| {
        ps.iter().fold(String::new(), |mut s, (a, b)| {
            writeln!(s, "{a}\t{b}").expect("string write");
            s
        })
    };
    let mut all = task.seeds_train.clone();
    all.extend_from_slice(&task.seeds_test);
    write(dir.join(REF_ENT_IDS), pairs(&all))?;
    write(dir.join(TRAIN_ENT_IDS), pairs(&task.seeds_train))?;
    Ok(())
}

/// SHA-256 over the dataset files present in `dir`, in a fixed order.
pub fn fingerprint(dir: &Path) -> Result<String> {
    let mut hasher = Sha256::new();
    let names = ENT_IDS
        .iter()
        .chain(&TRIPLES)
        .chain(&ENT_EMB)
        .chain([&REF_ENT_IDS, &TRAIN_ENT_IDS]);
    for name in names {
        let path = dir.join(name);
        if path.exists() {
            let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
            hasher.update(name.as_bytes());
            hasher.update((bytes.len() as u64).to_le_bytes());
            hasher.update(&bytes);
        }
    }
    Ok(hex::encode(hasher.finalize()))
}
