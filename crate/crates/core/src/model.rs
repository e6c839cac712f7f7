//! End-to-end forward pass: structure encoder, triple encoder, entity
//! enhancer. Both graphs share every parameter except their own entity
//! embedding tables.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Tape, Var};
use crate::config::{TrainConfig, Variant};
use crate::enhance::{self, CycleMode, NeighborIndex};
use crate::error::{Error, Result};
use crate::kg::RelationExpandedGraph;
use crate::params::{Bound, ParamSet};
use crate::structure;
use crate::tensor::{SparseMatrix, Tensor};
use crate::triple::{self, TripleDims, TripleIndex, TripleSwitches};

pub const EMB1: &str = "emb.kg1";
pub const EMB2: &str = "emb.kg2";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelConfig {
    pub d_e: usize,
    pub d_r: usize,
    pub d_t: usize,
    pub gcn_depth: usize,
    pub cycle_mode: CycleMode,
    pub variant: Variant,
    pub leaky_slope: f64,
}

impl ModelConfig {
    pub fn from_train(cfg: &TrainConfig, emb_dim: usize) -> Result<Self> {
        if let Some(d) = cfg.d_e {
            if d != emb_dim {
                return Err(Error::Config(format!(
                    "d_e = {d} but the name embeddings have width {emb_dim}"
                )));
            }
        }
        Ok(ModelConfig {
            d_e: emb_dim,
            d_r: cfg.d_r,
            d_t: cfg.d_t,
            gcn_depth: cfg.gcn_depth,
            cycle_mode: cfg.cycle_mode,
            variant: cfg.variant,
            leaky_slope: cfg.leaky_slope,
        })
    }

    pub fn switches(&self) -> TripleSwitches {
        TripleSwitches {
            ensemble_attention: self.variant != Variant::WithoutEnsemble,
            type_space: self.variant != Variant::WithoutType,
        }
    }

    pub fn uses_cycle(&self) -> bool {
        self.variant != Variant::WithoutCycle
    }

    pub fn triple_width(&self) -> usize {
        if self.switches().type_space {
            self.d_r + 2 * self.d_t
        } else {
            self.d_r
        }
    }

    pub fn triple_dims(&self) -> TripleDims {
        TripleDims {
            d_e: self.d_e,
            d_r: self.d_r,
            d_t: self.d_t,
        }
    }
}

/// Precomputed per-graph indices consumed by the forward pass.
#[derive(Clone, Debug)]
pub struct GraphContext {
    pub adjacency: Arc<SparseMatrix>,
    pub triples: TripleIndex,
    pub neighbors: NeighborIndex,
}

impl GraphContext {
    /// Triple attention runs over the relation-expanded triples; neighbor
    /// re-aggregation over the undirected base graph.
    pub fn new(g: &RelationExpandedGraph) -> Result<Self> {
        Ok(GraphContext {
            adjacency: Arc::clone(g.adjacency()),
            triples: TripleIndex::new(g.triples(), g.num_entities(), g.num_relations())?,
            neighbors: NeighborIndex::from_graph(g.base()),
        })
    }

    pub fn num_entities(&self) -> usize {
        self.triples.num_entities
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TteaModel {
    pub config: ModelConfig,
    pub params: ParamSet,
}

impl TteaModel {
    /// Fresh parameters; entity tables start from the name embeddings.
    pub fn init(config: ModelConfig, emb1: &Tensor, emb2: &Tensor, seed: u64) -> Result<Self> {
        for e in [emb1, emb2] {
            if e.shape().len() != 2 || e.cols() != config.d_e {
                return Err(Error::shape("model init", e.shape(), &[config.d_e]));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        params.insert(EMB1, emb1.clone());
        params.insert(EMB2, emb2.clone());
        structure::init_params(&mut params, config.d_e, config.gcn_depth, &mut rng);
        if config.uses_cycle() {
            triple::init_params(&mut params, config.triple_dims(), config.switches().type_space, &mut rng);
        }
        enhance::init_params(&mut params, config.triple_width(), config.d_e, &mut rng);
        Ok(TteaModel { config, params })
    }

    /// Final `[n × 2·d_e]` representation of one graph.
    pub fn forward_graph(&self, tape: &mut Tape, p: &Bound, x: Var, ctx: &GraphContext) -> Result<Var> {
        let c = &self.config;
        let h = structure::encode(tape, x, &ctx.adjacency, p, c.gcn_depth)?;
        let triple_repr = if c.uses_cycle() {
            Some(triple::encode(tape, h, &ctx.triples, p, c.switches(), c.leaky_slope)?)
        } else {
            None
        };
        enhance::enhance(
            tape,
            h,
            triple_repr,
            &ctx.triples,
            &ctx.neighbors,
            p,
            c.cycle_mode,
            c.leaky_slope,
        )
    }

    pub fn forward(
        &self,
        tape: &mut Tape,
        p: &Bound,
        ctx1: &GraphContext,
        ctx2: &GraphContext,
    ) -> Result<(Var, Var)> {
        let f1 = self.forward_graph(tape, p, p.var(EMB1), ctx1)?;
        let f2 = self.forward_graph(tape, p, p.var(EMB2), ctx2)?;
        Ok((f1, f2))
    }

    /// Final embeddings of both graphs without recording gradients.
    pub fn embed(&self, ctx1: &GraphContext, ctx2: &GraphContext) -> Result<(Tensor, Tensor)> {
        let mut tape = Tape::new();
        let p = self.params.bind(&mut tape, false);
        let (f1, f2) = self.forward(&mut tape, &p, ctx1, ctx2)?;
        Ok((tape.value(f1).clone(), tape.value(f2).clone()))
    }
}
