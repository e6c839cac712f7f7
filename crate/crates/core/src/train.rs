//! Margin-based training with nearest-neighbor negatives and optional
//! bidirectional seed expansion.

use std::collections::HashSet;
use std::rc::Rc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Tape, Var};
use crate::config::TrainConfig;
use crate::dataset::{AlignmentTask, SeedPair};
use crate::error::{Error, Result};
use crate::eval::{evaluate, manhattan, EvalOptions};
use crate::model::{GraphContext, ModelConfig, TteaModel};
use crate::optim::{adam_step, AdamState};
use crate::tensor::Tensor;

/// The `k` entities closest to `entity` in `emb`, excluding `entity`
/// itself. Ties go to the lower id.
pub fn k_nearest(emb: &Tensor, entity: usize, k: usize) -> Result<Vec<usize>> {
    let n = emb.rows();
    if k >= n {
        return Err(Error::Config(format!("k = {k} negatives needs more than {n} entities")));
    }
    let q = emb.row(entity);
    let mut scored: Vec<(f64, usize)> = (0..n)
        .filter(|&e| e != entity)
        .map(|e| (manhattan(q, emb.row(e)), e))
        .collect();
    let by = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < scored.len() {
        scored.select_nth_unstable_by(k, by);
        scored.truncate(k);
    }
    scored.sort_by(by);
    Ok(scored.into_iter().map(|(_, e)| e).collect())
}

/// Nearest same-graph neighbors of both sides of one training pair.
#[derive(Clone, Debug, PartialEq)]
pub struct PairNegatives {
    pub pair: SeedPair,
    /// Replacements for the graph-1 entity.
    pub near_source: Vec<usize>,
    /// Replacements for the graph-2 entity.
    pub near_target: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NegativeCache {
    pub pairs: Vec<PairNegatives>,
    pub epoch: usize,
}

pub fn refresh_negatives(
    f1: &Tensor,
    f2: &Tensor,
    train: &[SeedPair],
    k: usize,
    epoch: usize,
) -> Result<NegativeCache> {
    let pairs = train
        .iter()
        .map(|&(a, b)| {
            Ok(PairNegatives {
                pair: (a, b),
                near_source: k_nearest(f1, a, k)?,
                near_target: k_nearest(f2, b, k)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(NegativeCache { pairs, epoch })
}

/// A corrupted pair charged against positive number `owner`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NegativePair {
    pub owner: usize,
    pub pair: SeedPair,
}

/// Expands the cache into corrupted pairs: every neighbor of each side when
/// `all`, otherwise one uniformly sampled neighbor per side.
pub fn negative_pairs(cache: &NegativeCache, all: bool, rng: &mut ChaCha8Rng) -> Vec<NegativePair> {
    let mut out = Vec::new();
    for (owner, p) in cache.pairs.iter().enumerate() {
        let (a, b) = p.pair;
        if all {
            out.extend(p.near_target.iter().map(|&b2| NegativePair { owner, pair: (a, b2) }));
            out.extend(p.near_source.iter().map(|&a2| NegativePair { owner, pair: (a2, b) }));
        } else {
            let b2 = p.near_target[rng.random_range(0..p.near_target.len())];
            let a2 = p.near_source[rng.random_range(0..p.near_source.len())];
            out.push(NegativePair { owner, pair: (a, b2) });
            out.push(NegativePair { owner, pair: (a2, b) });
        }
    }
    out
}

/// Row-wise L1 distance between `f1[idx1]` and `f2[idx2]`.
fn pair_distances(tape: &mut Tape, f1: Var, f2: Var, idx1: Vec<usize>, idx2: Vec<usize>) -> Result<Var> {
    let a = tape.gather(f1, &Rc::from(idx1))?;
    let b = tape.gather(f2, &Rc::from(idx2))?;
    let diff = tape.sub(a, b)?;
    let abs = tape.abs(diff);
    Ok(tape.sum_last_axis(abs))
}

/// `Σ max(dis(pos) − dis(neg) + margin, 0)` over every negative.
pub fn margin_loss(
    tape: &mut Tape,
    f1: Var,
    f2: Var,
    positives: &[SeedPair],
    negatives: &[NegativePair],
    margin: f64,
) -> Result<Var> {
    if negatives.is_empty() {
        return Err(Error::Config("margin loss needs at least one negative pair".into()));
    }
    if let Some(bad) = negatives.iter().find(|n| n.owner >= positives.len()) {
        return Err(Error::Config(format!("negative owner {} out of range", bad.owner)));
    }
    let pos = pair_distances(
        tape,
        f1,
        f2,
        positives.iter().map(|p| p.0).collect(),
        positives.iter().map(|p| p.1).collect(),
    )?;
    let pos = tape.reshape(pos, vec![positives.len(), 1])?;
    let owners: Rc<[usize]> = negatives.iter().map(|n| n.owner).collect();
    let pos = tape.gather(pos, &owners)?;
    let pos = tape.reshape(pos, vec![negatives.len()])?;
    let neg = pair_distances(
        tape,
        f1,
        f2,
        negatives.iter().map(|n| n.pair.0).collect(),
        negatives.iter().map(|n| n.pair.1).collect(),
    )?;
    let gap = tape.sub(pos, neg)?;
    let shifted = tape.add_scalar(gap, margin);
    let hinge = tape.relu(shifted);
    Ok(tape.sum(hinge))
}

fn nearest(query: &[f64], emb: &Tensor, pool: &[usize]) -> Option<usize> {
    let mut best: Option<(f64, usize)> = None;
    for &c in pool {
        let d = manhattan(query, emb.row(c));
        if best.is_none_or(|(bd, bc)| d < bd || (d == bd && c < bc)) {
            best = Some((d, c));
        }
    }
    best.map(|(_, c)| c)
}

/// Mutual-nearest pairs among entities that appear in no training pair.
pub fn expand_seeds_bidirectional(f1: &Tensor, f2: &Tensor, train: &[SeedPair]) -> Vec<SeedPair> {
    let used1: HashSet<usize> = train.iter().map(|p| p.0).collect();
    let used2: HashSet<usize> = train.iter().map(|p| p.1).collect();
    let free1: Vec<usize> = (0..f1.rows()).filter(|e| !used1.contains(e)).collect();
    let free2: Vec<usize> = (0..f2.rows()).filter(|e| !used2.contains(e)).collect();
    let mut out = Vec::new();
    for &a in &free1 {
        let Some(b) = nearest(f1.row(a), f2, &free2) else { break };
        if nearest(f2.row(b), f1, &free1) == Some(a) {
            out.push((a, b));
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f64,
    pub train_pairs: usize,
    pub hits1: Option<f64>,
}

impl EpochLog {
    /// `epoch\tloss[\tH@1]`
    pub fn to_line(&self) -> String {
        match self.hits1 {
            Some(h) => format!("{}\t{}\t{}", self.epoch, self.loss, h),
            None => format!("{}\t{}", self.epoch, self.loss),
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: TteaModel,
    pub history: Vec<EpochLog>,
    /// Final training set, including any pairs added by seed expansion.
    pub train_pairs: Vec<SeedPair>,
    /// Pseudo pairs added by seed expansion, in the order they were added.
    pub proposed: Vec<SeedPair>,
    pub final1: Tensor,
    pub final2: Tensor,
}

pub fn fit(task: &AlignmentTask, cfg: &TrainConfig) -> Result<TrainOutcome> {
    fit_with(task, cfg, |_| {})
}

/// Trains on `task`, calling `on_epoch` after every optimizer step.
pub fn fit_with(
    task: &AlignmentTask,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if task.seeds_train.is_empty() {
        return Err(Error::Config("no training pairs".into()));
    }
    let model_cfg = ModelConfig::from_train(cfg, task.emb_dim())?;
    let mut model = TteaModel::init(model_cfg, &task.init_emb1, &task.init_emb2, cfg.seed)?;
    let ctx1 = GraphContext::new(&task.g1)?;
    let ctx2 = GraphContext::new(&task.g2)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_0f6e);
    let mut adam = AdamState::new(&model.params.tensors());
    let adam_cfg = cfg.adam();

    let mut train = task.seeds_train.clone();
    let mut proposed = Vec::new();
    let mut cache: Option<NegativeCache> = None;
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let mut tape = Tape::new();
        let bound = model.params.bind(&mut tape, true);
        let (f1, f2) = model.forward(&mut tape, &bound, &ctx1, &ctx2)?;

        if epoch % cfg.neg_refresh_epochs == 0 || cache.is_none() {
            let (v1, v2) = (tape.value(f1), tape.value(f2));
            if cfg.semi && epoch > 0 {
                let new = expand_seeds_bidirectional(v1, v2, &train);
                log::debug!("epoch {epoch}: seed expansion added {} pairs", new.len());
                train.extend_from_slice(&new);
                proposed.extend(new);
            }
            cache = Some(refresh_negatives(v1, v2, &train, cfg.neg_k, epoch)?);
        }
        let negatives = negative_pairs(cache.as_ref().expect("refreshed"), cfg.neg_sample_all, &mut rng);
        let hits1 = if cfg.eval_every > 0 && epoch % cfg.eval_every == 0 {
            let report = evaluate(task, tape.value(f1), tape.value(f2), &EvalOptions::default())?;
            Some(report.hits(1))
        } else {
            None
        };

        let loss = margin_loss(&mut tape, f1, f2, &train, &negatives, cfg.margin)?;
        let loss_value = tape.value(loss).item();
        if !loss_value.is_finite() {
            return Err(Error::Diverged {
                epoch,
                msg: format!("loss is {loss_value}"),
            });
        }
        tape.backward(loss)?;
        let grads = bound.grads(&tape);
        if let Some(bad) = grads.iter().position(|g| !g.is_finite()) {
            let name = model.params.names().nth(bad).unwrap_or("?").to_string();
            return Err(Error::Diverged {
                epoch,
                msg: format!("non-finite gradient for {name}"),
            });
        }
        let mut values = model.params.tensors();
        adam_step(&mut values, &grads, &mut adam, &adam_cfg);
        model.params.set_tensors(values);

        let log = EpochLog {
            epoch,
            loss: loss_value,
            train_pairs: train.len(),
            hits1,
        };
        on_epoch(&log);
        history.push(log);
    }

    let (final1, final2) = model.embed(&ctx1, &ctx2)?;
    if !final1.is_finite() || !final2.is_finite() {
        return Err(Error::Diverged {
            epoch: cfg.epochs,
            msg: "non-finite final embeddings".into(),
        });
    }
    Ok(TrainOutcome {
        model,
        history,
        train_pairs: train,
        proposed,
        final1,
        final2,
    })
}
