//! Triple-aware entity enhancement and neighbor re-aggregation.

use std::rc::Rc;

use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::kg::KnowledgeGraph;
use crate::params::{attention_vector, glorot, Bound, ParamSet};
use crate::tensor::Tensor;
use crate::triple::TripleIndex;

pub mod names {
    pub const W_HEAD: &str = "enhance.w_head";
    pub const W_TAIL: &str = "enhance.w_tail";
    pub const A_HEAD: &str = "enhance.a_head";
    pub const A_TAIL: &str = "enhance.a_tail";
    pub const A_NEIGHBOR: &str = "enhance.a_neighbor";
}

/// Order of head (`H`) and tail (`T`) updates in one cycle.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CycleMode {
    /// H, T
    HeadTail,
    /// H, T, H
    #[default]
    HeadTailHead,
    /// H, T, H, T
    HeadTailHeadTail,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    Head,
    Tail,
}

impl CycleMode {
    pub fn from_number(n: u32) -> Result<Self> {
        match n {
            1 => Ok(CycleMode::HeadTail),
            2 => Ok(CycleMode::HeadTailHead),
            3 => Ok(CycleMode::HeadTailHeadTail),
            _ => Err(Error::Config(format!("cycle mode must be 1, 2 or 3, got {n}"))),
        }
    }

    pub fn number(self) -> u32 {
        match self {
            CycleMode::HeadTail => 1,
            CycleMode::HeadTailHead => 2,
            CycleMode::HeadTailHeadTail => 3,
        }
    }

    pub fn steps(self) -> &'static [Role] {
        use Role::*;
        match self {
            CycleMode::HeadTail => &[Head, Tail],
            CycleMode::HeadTailHead => &[Head, Tail, Head],
            CycleMode::HeadTailHeadTail => &[Head, Tail, Head, Tail],
        }
    }
}

/// `triple_width` is `d_r + 2·d_t`, or `d_r` when the type space is off.
pub fn init_params(params: &mut ParamSet, triple_width: usize, d_e: usize, rng: &mut ChaCha8Rng) {
    params.insert(names::W_HEAD, glorot(triple_width, d_e, rng));
    params.insert(names::W_TAIL, glorot(triple_width, d_e, rng));
    params.insert(names::A_HEAD, attention_vector(2 * d_e, rng));
    params.insert(names::A_TAIL, attention_vector(2 * d_e, rng));
    params.insert(names::A_NEIGHBOR, attention_vector(2 * d_e, rng));
}

/// One residual update: every entity adds `ReLU(Σ α·proj)` over the
/// triples where it plays `role`, with α the per-entity softmax of
/// `LReLU(aᵀ(proj ‖ x_entity))`. Entities with no such triple are left
/// bitwise unchanged.
pub fn role_enhance(
    tape: &mut Tape,
    x: Var,
    proj: Var,
    members: &Rc<[usize]>,
    a: Var,
    slope: f64,
) -> Result<Var> {
    if members.is_empty() {
        return Ok(x);
    }
    let n = tape.shape(x)[0];
    let xe = tape.gather(x, members)?;
    let qk = tape.concat(proj, xe)?;
    let scores = tape.matmul(qk, a)?;
    let scores = tape.reshape(scores, vec![members.len()])?;
    let scores = tape.leaky_relu(scores, slope);
    let alpha = tape.segment_softmax(scores, members, n)?;
    let weighted = tape.mul_rows(proj, alpha)?;
    let pooled = tape.segment_sum(weighted, members, n)?;
    let delta = tape.relu(pooled);
    tape.add(x, delta)
}

pub fn head_enhance(tape: &mut Tape, x: Var, head_proj: Var, idx: &TripleIndex, a: Var, slope: f64) -> Result<Var> {
    role_enhance(tape, x, head_proj, &idx.heads, a, slope)
}

pub fn tail_enhance(tape: &mut Tape, x: Var, tail_proj: Var, idx: &TripleIndex, a: Var, slope: f64) -> Result<Var> {
    role_enhance(tape, x, tail_proj, &idx.tails, a, slope)
}

/// Alternating head/tail updates. The triple projections stay fixed for
/// the whole cycle; each step scores against the latest embeddings.
#[allow(clippy::too_many_arguments)]
pub fn cycle_co_enhance(
    tape: &mut Tape,
    x: Var,
    head_proj: Var,
    tail_proj: Var,
    idx: &TripleIndex,
    a_head: Var,
    a_tail: Var,
    mode: CycleMode,
    slope: f64,
) -> Result<Var> {
    let mut cur = x;
    for role in mode.steps() {
        cur = match role {
            Role::Head => head_enhance(tape, cur, head_proj, idx, a_head, slope)?,
            Role::Tail => tail_enhance(tape, cur, tail_proj, idx, a_tail, slope)?,
        };
    }
    Ok(cur)
}

/// Directed edge lists `(centre, neighbor)` of the undirected base graph,
/// self excluded.
#[derive(Clone, Debug)]
pub struct NeighborIndex {
    pub centres: Rc<[usize]>,
    pub neighbors: Rc<[usize]>,
    pub num_entities: usize,
}

impl NeighborIndex {
    pub fn from_graph(g: &KnowledgeGraph) -> Self {
        Self::from_lists(&g.neighbors())
    }

    pub fn from_lists(lists: &[Vec<usize>]) -> Self {
        let mut centres = Vec::new();
        let mut neighbors = Vec::new();
        for (i, list) in lists.iter().enumerate() {
            for &j in list {
                centres.push(i);
                neighbors.push(j);
            }
        }
        NeighborIndex {
            centres: centres.into(),
            neighbors: neighbors.into(),
            num_entities: lists.len(),
        }
    }
}

/// `x_i ‖ ReLU(Σ_j α_ij x_j)` over neighbors, width `2·d_e`. An entity
/// without neighbors gets a zero block.
pub fn neighbor_reaggregate(
    tape: &mut Tape,
    x: Var,
    nbrs: &NeighborIndex,
    a: Var,
    slope: f64,
) -> Result<Var> {
    let n = tape.shape(x)[0];
    if n != nbrs.num_entities {
        return Err(Error::shape("neighbor_reaggregate", tape.shape(x), &[nbrs.num_entities]));
    }
    let pooled = if nbrs.centres.is_empty() {
        let d = tape.shape(x)[1];
        tape.constant(Tensor::zeros(&[n, d]))
    } else {
        let xc = tape.gather(x, &nbrs.centres)?;
        let xn = tape.gather(x, &nbrs.neighbors)?;
        let pair = tape.concat(xc, xn)?;
        let scores = tape.matmul(pair, a)?;
        let scores = tape.reshape(scores, vec![nbrs.centres.len()])?;
        let scores = tape.leaky_relu(scores, slope);
        let alpha = tape.segment_softmax(scores, &nbrs.centres, n)?;
        let weighted = tape.mul_rows(xn, alpha)?;
        let pooled = tape.segment_sum(weighted, &nbrs.centres, n)?;
        tape.relu(pooled)
    };
    tape.concat(x, pooled)
}

/// Runs the enhancer on one graph. `triple_repr` is `None` to skip the
/// cycle entirely.
#[allow(clippy::too_many_arguments)]
pub fn enhance(
    tape: &mut Tape,
    x: Var,
    triple_repr: Option<Var>,
    idx: &TripleIndex,
    nbrs: &NeighborIndex,
    p: &Bound,
    mode: CycleMode,
    slope: f64,
) -> Result<Var> {
    let x = match triple_repr {
        Some(t) => {
            let head_proj = tape.matmul(t, p.var(names::W_HEAD))?;
            let tail_proj = tape.matmul(t, p.var(names::W_TAIL))?;
            cycle_co_enhance(
                tape,
                x,
                head_proj,
                tail_proj,
                idx,
                p.var(names::A_HEAD),
                p.var(names::A_TAIL),
                mode,
                slope,
            )?
        }
        None => x,
    };
    neighbor_reaggregate(tape, x, nbrs, p.var(names::A_NEIGHBOR), slope)
}
