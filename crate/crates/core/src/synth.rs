//! Synthetic cross-graph alignment tasks for desk-scale experiments.
//!
//! The second graph is an entity-permuted copy of the first with triples
//! dropped at random, and its name embeddings are the permuted first-side
//! embeddings plus Gaussian noise.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::dataset::{split_seeds, AlignmentTask, SeedPair};
use crate::error::{Error, Result};
use crate::kg::{expand_relations, KnowledgeGraph, Triple};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub n_entities: usize,
    pub n_relations: usize,
    /// Mean number of triples touching an entity.
    pub avg_degree: f64,
    pub drop_triple_prob: f64,
    pub emb_noise_sigma: f64,
    pub emb_dim: usize,
    pub train_ratio: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_entities: 200,
            n_relations: 20,
            avg_degree: 5.0,
            drop_triple_prob: 0.15,
            emb_noise_sigma: 0.3,
            emb_dim: 32,
            train_ratio: 0.30,
            seed: 7,
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.n_entities < 10 {
            return bad(format!("n_entities must be >= 10, got {}", self.n_entities));
        }
        if self.n_relations < 2 {
            return bad(format!("n_relations must be >= 2, got {}", self.n_relations));
        }
        if self.avg_degree.is_nan() || self.avg_degree < 1.0 {
            return bad(format!("avg_degree must be >= 1, got {}", self.avg_degree));
        }
        if !(0.0..1.0).contains(&self.drop_triple_prob) {
            return bad(format!(
                "drop_triple_prob must be in [0, 1), got {} (dropping every triple isolates all entities)",
                self.drop_triple_prob
            ));
        }
        if !self.emb_noise_sigma.is_finite() || self.emb_noise_sigma < 0.0 {
            return bad(format!("emb_noise_sigma must be >= 0, got {}", self.emb_noise_sigma));
        }
        if self.emb_dim == 0 {
            return bad("emb_dim must be positive".into());
        }
        let max_triples = self.n_entities * (self.n_entities - 1) * self.n_relations;
        if self.target_triples() > max_triples {
            return bad("avg_degree too large for the entity/relation count".into());
        }
        Ok(())
    }

    fn target_triples(&self) -> usize {
        let by_degree = (self.n_entities as f64 * self.avg_degree / 2.0).round() as usize;
        by_degree.max(self.n_entities - 1).max(self.n_relations)
    }
}

fn random_graph(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Vec<Triple> {
    let n = cfg.n_entities;
    let target = cfg.target_triples();
    let mut seen = HashSet::with_capacity(target);
    let mut triples = Vec::with_capacity(target);
    let mut next_rel = 0usize;
    let mut pick_rel = |rng: &mut ChaCha8Rng| {
        // cycle through every relation once before sampling freely
        if next_rel < cfg.n_relations {
            next_rel += 1;
            next_rel - 1
        } else {
            rng.random_range(0..cfg.n_relations)
        }
    };
    // random spanning tree keeps every entity connected
    for i in 1..n {
        let j = rng.random_range(0..i);
        let r = pick_rel(rng);
        let t = if rng.random_bool(0.5) {
            Triple::new(i, r, j)
        } else {
            Triple::new(j, r, i)
        };
        seen.insert(t);
        triples.push(t);
    }
    while triples.len() < target {
        let h = rng.random_range(0..n);
        let t = rng.random_range(0..n);
        if h == t {
            continue;
        }
        let r = pick_rel(rng);
        let tr = Triple::new(h, r, t);
        if seen.insert(tr) {
            triples.push(tr);
        }
    }
    triples
}

/// Drops triples with probability `p`, except a triple that is the last
/// remaining one for one of its entities or for its relation.
fn drop_triples(triples: &[Triple], cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Vec<Triple> {
    let mut ent_deg = vec![0usize; cfg.n_entities];
    let mut rel_deg = vec![0usize; cfg.n_relations];
    for t in triples {
        ent_deg[t.head] += 1;
        ent_deg[t.tail] += 1;
        rel_deg[t.relation] += 1;
    }
    let mut kept = Vec::with_capacity(triples.len());
    for t in triples {
        let coin = rng.random::<f64>() < cfg.drop_triple_prob;
        let last = ent_deg[t.head] == 1 || ent_deg[t.tail] == 1 || rel_deg[t.relation] == 1;
        if coin && !last {
            ent_deg[t.head] -= 1;
            ent_deg[t.tail] -= 1;
            rel_deg[t.relation] -= 1;
        } else {
            kept.push(*t);
        }
    }
    kept
}

pub fn generate_synthetic_pair(cfg: &SynthConfig) -> Result<AlignmentTask> {
    cfg.validate()?;
    let n = cfg.n_entities;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let triples1 = random_graph(cfg, &mut rng);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng);
    let triples2: Vec<Triple> = drop_triples(&triples1, cfg, &mut rng)
        .into_iter()
        .map(|t| Triple::new(perm[t.head], t.relation, perm[t.tail]))
        .collect();

    let d = cfg.emb_dim;
    let emb1: Vec<f64> = (0..n * d).map(|_| StandardNormal.sample(&mut rng)).collect();
    let noise = Normal::new(0.0, cfg.emb_noise_sigma).map_err(|e| Error::Config(e.to_string()))?;
    let mut emb2 = vec![0.0; n * d];
    for i in 0..n {
        for k in 0..d {
            emb2[perm[i] * d + k] = emb1[i * d + k] + noise.sample(&mut rng);
        }
    }

    let names1 = (0..n).map(|i| format!("kg1/e{i}")).collect();
    let names2 = (0..n).map(|i| format!("kg2/e{i}")).collect();
    let g1 = KnowledgeGraph::new(n, cfg.n_relations, triples1, Some(names1))?;
    let g2 = KnowledgeGraph::new(n, cfg.n_relations, triples2, Some(names2))?;

    let links: Vec<SeedPair> = (0..n).map(|i| (i, perm[i])).collect();
    let (train, test) = split_seeds(&links, cfg.train_ratio, rng.random())?;
    AlignmentTask::new(
        expand_relations(g1)?,
        expand_relations(g2)?,
        train,
        test,
        Tensor::new(vec![n, d], emb1)?,
        Tensor::new(vec![n, d], emb2)?,
    )
}
