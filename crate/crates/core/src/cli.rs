//! Command implementations behind the `ttea` binary.
//!
//! A training run directory holds:
//!
//! | file | contents |
//! |------|----------|
//! | `manifest.txt` | resolved config, seed, dataset fingerprint, artifacts, timings |
//! | `checkpoint.txt` | parameters, see [`crate::checkpoint`] |
//! | `loss.tsv` | `epoch\tloss[\thits@1]` per epoch |
//! | `metrics.tsv` | final test metrics, `metric\tvalue` |
//! | `ranks.tsv` | per-query `query_id\ttrue_id\trank` |
//!
//! Configuration layers, lowest first: built-in defaults, `--config` file,
//! `--set key=value` pairs, dedicated flags.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::autodiff::OpKind;
use crate::checkpoint;
use crate::config::{TrainConfig, Variant};
use crate::dataset::{fingerprint, load_dbp15k, write_dbp15k, AlignmentTask, LoadOptions};
use crate::error::{Error, Result};
use crate::eval::{evaluate, CandidatePool, Direction, EvalOptions, EvalReport};
use crate::model::{GraphContext, EMB1, EMB2};
use crate::selfcheck::{self, SelfCheckOptions, SelfCheckReport};
use crate::synth::{generate_synthetic_pair, SynthConfig};
use crate::train::fit_with;

pub const MANIFEST: &str = "manifest.txt";
pub const CHECKPOINT: &str = "checkpoint.txt";
pub const LOSS_LOG: &str = "loss.tsv";
pub const METRICS: &str = "metrics.tsv";
pub const RANKS: &str = "ranks.tsv";

/// Worker threads for parallel work (ablation cells); unset means 1.
pub const THREADS_ENV: &str = "TTEA_THREADS";

pub fn threads_from_env() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .filter(|&n: &usize| n > 0)
        .unwrap_or(1)
}

#[derive(Debug, Parser)]
#[command(name = "ttea", version, about = "Cross-lingual entity alignment with type-enhanced triple representations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic aligned KG pair in DBP15K layout.
    GenSynth(GenSynthArgs),
    /// Train a model and write a run directory.
    Train(TrainArgs),
    /// Evaluate a trained run on a dataset.
    Eval(EvalArgs),
    /// Train and evaluate over a grid of variants, cycle modes and depths.
    Ablate(AblateArgs),
    /// Run the gradient and oracle self-checks.
    Check(CheckArgs),
}

#[derive(Debug, Clone, Args)]
pub struct GenSynthArgs {
    #[arg(long, default_value_t = 200)]
    pub entities: usize,
    #[arg(long, default_value_t = 20)]
    pub relations: usize,
    #[arg(long, default_value_t = 5.0)]
    pub avg_degree: f64,
    #[arg(long, default_value_t = 0.15)]
    pub drop_prob: f64,
    #[arg(long, default_value_t = 0.3)]
    pub emb_noise: f64,
    #[arg(long, default_value_t = 32)]
    pub emb_dim: usize,
    #[arg(long, default_value_t = 0.30)]
    pub train_ratio: f64,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

impl GenSynthArgs {
    pub fn synth_config(&self) -> SynthConfig {
        SynthConfig {
            n_entities: self.entities,
            n_relations: self.relations,
            avg_degree: self.avg_degree,
            drop_triple_prob: self.drop_prob,
            emb_noise_sigma: self.emb_noise,
            emb_dim: self.emb_dim,
            train_ratio: self.train_ratio,
            seed: self.seed,
        }
    }
}

/// Settings shared by `train` and `ablate`.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// Flat `key = value` config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Any config key, e.g. `--set lr=0.005`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub d_r: Option<usize>,
    #[arg(long)]
    pub d_t: Option<usize>,
    #[arg(long)]
    pub train_ratio: Option<f64>,
}

impl ConfigArgs {
    pub fn resolve(&self) -> Result<TrainConfig> {
        let mut cfg = TrainConfig::default();
        if let Some(path) = &self.config {
            if !path.exists() {
                return Err(Error::MissingFile(path.clone()));
            }
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            cfg.apply_text(&text)?;
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got {kv:?}")))?;
            cfg.set(k, v)?;
        }
        if let Some(v) = self.epochs {
            cfg.epochs = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.lr {
            cfg.lr = v;
        }
        if let Some(v) = self.d_r {
            cfg.d_r = v;
        }
        if let Some(v) = self.d_t {
            cfg.d_t = v;
        }
        if let Some(v) = self.train_ratio {
            cfg.train_ratio = v;
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub common: ConfigArgs,
    /// full, wo-E, wo-T or wo-C.
    #[arg(long)]
    pub variant: Option<Variant>,
    /// 1 = head-tail, 2 = head-tail-head, 3 = head-tail-head-tail.
    #[arg(long)]
    pub cycle_mode: Option<u32>,
    #[arg(long)]
    pub semi: bool,
    /// Log test Hits@1 every this many epochs.
    #[arg(long)]
    pub eval_every: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

impl TrainArgs {
    pub fn resolve(&self) -> Result<TrainConfig> {
        let mut cfg = self.common.resolve()?;
        if let Some(v) = self.variant {
            cfg.variant = v;
        }
        if let Some(m) = self.cycle_mode {
            cfg.cycle_mode = crate::enhance::CycleMode::from_number(m)?;
        }
        if self.semi {
            cfg.semi = true;
        }
        if let Some(e) = self.eval_every {
            cfg.eval_every = e;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// Run directory (or a checkpoint file inside one).
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Rank against every entity of graph 2 instead of the test targets.
    #[arg(long)]
    pub all_candidates: bool,
    /// Average both query directions.
    #[arg(long)]
    pub bidirectional: bool,
    /// Where to write the per-query rank dump.
    #[arg(long)]
    pub ranks: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct AblateArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub common: ConfigArgs,
    /// Comma-separated variants.
    #[arg(long, value_delimiter = ',', default_value = "full")]
    pub variants: Vec<Variant>,
    /// Comma-separated cycle modes.
    #[arg(long, value_delimiter = ',', default_value = "2")]
    pub modes: Vec<u32>,
    /// Comma-separated GCN depths.
    #[arg(long, value_delimiter = ',', default_value = "2")]
    pub depths: Vec<usize>,
    /// Write the table here as well as printing it.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CheckArgs {
    /// Random instances per check.
    #[arg(long, default_value_t = 20)]
    pub instances: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Sign-flip this op's backward rule (e.g. `Tanh`) to exercise the suite.
    #[arg(long)]
    pub inject_fault: Option<String>,
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn load_options(cfg: &TrainConfig) -> LoadOptions {
    LoadOptions {
        train_ratio: cfg.train_ratio,
        split_seed: cfg.seed,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenSynthSummary {
    pub out: PathBuf,
    pub entities: [usize; 2],
    pub triples: [usize; 2],
    pub train_pairs: usize,
    pub test_pairs: usize,
}

impl GenSynthSummary {
    pub fn to_text(&self) -> String {
        format!(
            "wrote {}\nentities\t{}\t{}\ntriples\t{}\t{}\npairs\t{} train\t{} test\n",
            self.out.display(),
            self.entities[0],
            self.entities[1],
            self.triples[0],
            self.triples[1],
            self.train_pairs,
            self.test_pairs
        )
    }
}

pub fn cmd_gen_synth(args: &GenSynthArgs) -> Result<GenSynthSummary> {
    let task = generate_synthetic_pair(&args.synth_config())?;
    write_dbp15k(&task, &args.out)?;
    Ok(GenSynthSummary {
        out: args.out.clone(),
        entities: [task.g1.num_entities(), task.g2.num_entities()],
        triples: [task.g1.base().triples().len(), task.g2.base().triples().len()],
        train_pairs: task.seeds_train.len(),
        test_pairs: task.seeds_test.len(),
    })
}

/// Everything needed to reproduce a run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunManifest {
    pub version: String,
    pub command: String,
    pub data: PathBuf,
    pub fingerprint: String,
    pub config: TrainConfig,
    /// `(label, file name)` relative to the run directory.
    pub artifacts: Vec<(String, String)>,
    /// `(phase, seconds)`
    pub timings: Vec<(String, f64)>,
}

impl RunManifest {
    pub fn to_text(&self) -> String {
        let mut s = String::from("ttea-manifest 1\n");
        writeln!(s, "version\t{}", self.version).expect("string write");
        writeln!(s, "command\t{}", self.command).expect("string write");
        writeln!(s, "data\t{}", self.data.display()).expect("string write");
        writeln!(s, "fingerprint\t{}", self.fingerprint).expect("string write");
        writeln!(s, "seed\t{}", self.config.seed).expect("string write");
        for (label, file) in &self.artifacts {
            writeln!(s, "artifact\t{label}\t{file}").expect("string write");
        }
        for (phase, secs) in &self.timings {
            writeln!(s, "time\t{phase}\t{secs:.3}").expect("string write");
        }
        for line in self.config.to_text().lines() {
            writeln!(s, "config\t{line}").expect("string write");
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |m: String| Error::Checkpoint(format!("manifest: {m}"));
        let mut lines = text.lines();
        if lines.next() != Some("ttea-manifest 1") {
            return Err(bad("missing header".into()));
        }
        let mut m = RunManifest {
            version: String::new(),
            command: String::new(),
            data: PathBuf::new(),
            fingerprint: String::new(),
            config: TrainConfig::default(),
            artifacts: Vec::new(),
            timings: Vec::new(),
        };
        let mut config = String::new();
        for line in lines.filter(|l| !l.is_empty()) {
            let (key, rest) = line.split_once('\t').ok_or_else(|| bad(format!("bad line {line:?}")))?;
            match key {
                "version" => m.version = rest.to_string(),
                "command" => m.command = rest.to_string(),
                "data" => m.data = PathBuf::from(rest),
                "fingerprint" => m.fingerprint = rest.to_string(),
                "seed" => {}
                "artifact" | "time" => {
                    let (a, b) = rest.split_once('\t').ok_or_else(|| bad(format!("bad line {line:?}")))?;
                    if key == "artifact" {
                        m.artifacts.push((a.to_string(), b.to_string()));
                    } else {
                        let secs = b.parse().map_err(|_| bad(format!("bad time {b:?}")))?;
                        m.timings.push((a.to_string(), secs));
                    }
                }
                "config" => {
                    config.push_str(rest);
                    config.push('\n');
                }
                other => return Err(bad(format!("unknown key {other:?}"))),
            }
        }
        m.config = TrainConfig::from_text(&config)?;
        Ok(m)
    }

    pub fn load(run_dir: &Path) -> Result<Self> {
        let path = run_dir.join(MANIFEST);
        if !path.exists() {
            return Err(Error::MissingFile(path));
        }
        Self::from_text(&fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?)
    }
}

#[derive(Clone, Debug)]
pub struct TrainSummary {
    pub run_dir: PathBuf,
    pub manifest: RunManifest,
    pub report: EvalReport,
    pub final_loss: Option<f64>,
    pub train_pairs: usize,
}

impl TrainSummary {
    pub fn to_text(&self) -> String {
        let loss = self.final_loss.map_or_else(|| "-".to_string(), |l| format!("{l:.6}"));
        format!(
            "run\t{}\nfinal_loss\t{loss}\ntrain_pairs\t{}\n{}",
            self.run_dir.display(),
            self.train_pairs,
            self.report.to_text()
        )
    }
}

/// Trains on `data` with a resolved config and writes the run directory.
pub fn train_run(data: &Path, cfg: &TrainConfig, out: &Path) -> Result<TrainSummary> {
    cfg.validate()?;
    let t0 = Instant::now();
    let task = load_dbp15k(data, &load_options(cfg))?;
    let fp = fingerprint(data)?;
    let t_load = t0.elapsed().as_secs_f64();
    create_dir(out)?;

    let header = if cfg.eval_every > 0 {
        "epoch\tloss\thits@1\n"
    } else {
        "epoch\tloss\n"
    };
    let mut loss_log = String::from(header);
    let t1 = Instant::now();
    let outcome = fit_with(&task, cfg, |e| {
        log::info!("epoch {}\tloss {:.6}\tpairs {}", e.epoch, e.loss, e.train_pairs);
        loss_log.push_str(&e.to_line());
        loss_log.push('\n');
    });
    // keep the partial log on failure, it shows where training went wrong
    write(&out.join(LOSS_LOG), &loss_log)?;
    let outcome = outcome?;
    let t_train = t1.elapsed().as_secs_f64();

    checkpoint::save(&outcome.model, &out.join(CHECKPOINT))?;
    let t2 = Instant::now();
    let report = evaluate(&task, &outcome.final1, &outcome.final2, &EvalOptions::default())?;
    write(&out.join(METRICS), &report.to_text())?;
    write(&out.join(RANKS), &report.ranks_text())?;
    let t_eval = t2.elapsed().as_secs_f64();

    let manifest = RunManifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        command: "train".into(),
        data: data.to_path_buf(),
        fingerprint: fp,
        config: cfg.clone(),
        artifacts: [("checkpoint", CHECKPOINT), ("loss", LOSS_LOG), ("metrics", METRICS), ("ranks", RANKS)]
            .iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect(),
        timings: vec![
            ("load".into(), t_load),
            ("train".into(), t_train),
            ("eval".into(), t_eval),
        ],
    };
    write(&out.join(MANIFEST), &manifest.to_text())?;
    Ok(TrainSummary {
        run_dir: out.to_path_buf(),
        manifest,
        report,
        final_loss: outcome.history.last().map(|e| e.loss),
        train_pairs: outcome.train_pairs.len(),
    })
}

pub fn cmd_train(args: &TrainArgs) -> Result<TrainSummary> {
    let cfg = args.resolve()?;
    train_run(&args.data, &cfg, &args.out)
}

/// Metrics of a saved run recomputed from its checkpoint.
pub fn eval_run(run: &Path, data: &Path, opts: &EvalOptions) -> Result<(EvalReport, AlignmentTask)> {
    let run_dir = if run.is_file() {
        run.parent().unwrap_or(Path::new(".")).to_path_buf()
    } else {
        run.to_path_buf()
    };
    let ckpt_path = if run.is_file() { run.to_path_buf() } else { run_dir.join(CHECKPOINT) };
    let model = checkpoint::load(&ckpt_path)?;
    // the split must match training; without a manifest fall back to defaults
    let cfg = match RunManifest::load(&run_dir) {
        Ok(m) => m.config,
        Err(Error::MissingFile(_)) => TrainConfig::default(),
        Err(e) => return Err(e),
    };
    let task = load_dbp15k(data, &load_options(&cfg))?;
    let (n1, n2) = (model.params.get(EMB1)?.rows(), model.params.get(EMB2)?.rows());
    if n1 != task.g1.num_entities() || n2 != task.g2.num_entities() {
        return Err(Error::Eval(format!(
            "checkpoint has {n1}/{n2} entities but the dataset has {}/{}",
            task.g1.num_entities(),
            task.g2.num_entities()
        )));
    }
    let ctx1 = GraphContext::new(&task.g1)?;
    let ctx2 = GraphContext::new(&task.g2)?;
    let (f1, f2) = model.embed(&ctx1, &ctx2)?;
    let report = evaluate(&task, &f1, &f2, opts)?;
    Ok((report, task))
}

pub fn cmd_eval(args: &EvalArgs) -> Result<EvalReport> {
    let opts = EvalOptions {
        pool: if args.all_candidates {
            CandidatePool::AllEntities
        } else {
            CandidatePool::TestTargets
        },
        direction: if args.bidirectional {
            Direction::Bidirectional
        } else {
            Direction::G1ToG2
        },
        ..EvalOptions::default()
    };
    let (report, _) = eval_run(&args.model, &args.data, &opts)?;
    if let Some(path) = &args.ranks {
        write(path, &report.ranks_text())?;
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq)]
pub struct AblationCell {
    pub variant: Variant,
    pub mode: u32,
    pub depth: usize,
    /// `(hits@1, hits@10, mrr)` or the failure message.
    pub outcome: std::result::Result<(f64, f64, f64), String>,
}

impl AblationCell {
    pub fn label(&self) -> String {
        format!("{} mode{} l={}", self.variant, self.mode, self.depth)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AblationTable {
    pub cells: Vec<AblationCell>,
}

impl AblationTable {
    /// Rows are settings, columns `H@1 H@10 MRR` in percent / fraction as
    /// in the published tables, then a status column.
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("setting\tH@1\tH@10\tMRR\tstatus\n");
        for c in &self.cells {
            match &c.outcome {
                Ok((h1, h10, mrr)) => writeln!(
                    s,
                    "{}\t{:.1}\t{:.1}\t{:.3}\tok",
                    c.label(),
                    100.0 * h1,
                    100.0 * h10,
                    mrr
                ),
                Err(e) => writeln!(s, "{}\t-\t-\t-\tfailed: {}", c.label(), e.replace(['\t', '\n'], " ")),
            }
            .expect("string write");
        }
        s
    }

    pub fn failures(&self) -> usize {
        self.cells.iter().filter(|c| c.outcome.is_err()).count()
    }
}

fn run_cell(task: &AlignmentTask, base: &TrainConfig, variant: Variant, mode: u32, depth: usize) -> AblationCell {
    let outcome = (|| -> Result<(f64, f64, f64)> {
        let mut cfg = base.clone();
        cfg.variant = variant;
        cfg.cycle_mode = crate::enhance::CycleMode::from_number(mode)?;
        cfg.gcn_depth = depth;
        let out = crate::train::fit(task, &cfg)?;
        let r = evaluate(task, &out.final1, &out.final2, &EvalOptions::default())?;
        Ok((r.hits(1), r.hits(10), r.mrr))
    })()
    .map_err(|e| e.to_string());
    AblationCell {
        variant,
        mode,
        depth,
        outcome,
    }
}

/// One train + eval per grid cell, in grid order. Cells run on
/// `threads` workers; each cell trains from the shared seed, so results do
/// not depend on the thread count.
pub fn ablate(
    task: &AlignmentTask,
    cfg: &TrainConfig,
    variants: &[Variant],
    modes: &[u32],
    depths: &[usize],
    threads: usize,
) -> Result<AblationTable> {
    let grid: Vec<(Variant, u32, usize)> = variants
        .iter()
        .flat_map(|&v| modes.iter().flat_map(move |&m| depths.iter().map(move |&d| (v, m, d))))
        .collect();
    if grid.is_empty() {
        return Err(Error::Config("empty ablation grid".into()));
    }
    cfg.validate()?;
    let threads = threads.clamp(1, grid.len());
    let mut cells: Vec<Option<AblationCell>> = vec![None; grid.len()];
    std::thread::scope(|s| {
        let chunks: Vec<_> = cells.chunks_mut(grid.len().div_ceil(threads)).collect();
        let mut start = 0;
        for chunk in chunks {
            let range = start..start + chunk.len();
            start = range.end;
            let grid = &grid;
            s.spawn(move || {
                for (slot, &(v, m, d)) in chunk.iter_mut().zip(&grid[range]) {
                    log::info!("ablation cell {v} mode{m} l={d}");
                    *slot = Some(run_cell(task, cfg, v, m, d));
                }
            });
        }
    });
    Ok(AblationTable {
        cells: cells.into_iter().map(|c| c.expect("every cell ran")).collect(),
    })
}

pub fn cmd_ablate(args: &AblateArgs) -> Result<AblationTable> {
    let cfg = args.common.resolve()?;
    let task = load_dbp15k(&args.data, &load_options(&cfg))?;
    let table = ablate(&task, &cfg, &args.variants, &args.modes, &args.depths, threads_from_env())?;
    if let Some(path) = &args.out {
        write(path, &table.to_tsv())?;
    }
    Ok(table)
}

pub fn parse_op_kind(name: &str) -> Result<OpKind> {
    OpKind::DIFFERENTIABLE
        .iter()
        .copied()
        .find(|k| format!("{k:?}").eq_ignore_ascii_case(name))
        .ok_or_else(|| Error::Config(format!("unknown op {name:?}")))
}

pub fn cmd_check(args: &CheckArgs) -> Result<SelfCheckReport> {
    let fault = args.inject_fault.as_deref().map(parse_op_kind).transpose()?;
    let opts = SelfCheckOptions {
        instances: args.instances,
        seed: args.seed,
        fault,
    };
    Ok(selfcheck::run(&opts))
}
