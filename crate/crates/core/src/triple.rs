//! Type-enhanced ensemble triple representation.
//!
//! Builds one vector per triple from entity embeddings in two spaces:
//!
//! * semantic space: triple specificity `x_i ‖ (x_i ‖ x_j)W_el ‖ x_j`,
//!   refined by head-, tail- and relation-aware attention pooled per
//!   relation, giving `S`;
//! * type space: `tanh(XW + b)` embeddings assembled into type triples,
//!   then fused with `S` by a semantic–type mutual attention.
//!
//! The result `T = (S + S̄ + P + T̄) ‖ r̄ᵗ` has width `d_r + 2·d_t`, where
//! `P` is the projected type triple and `r̄ᵗ` the mean type pair of the
//! relation.

use std::rc::Rc;

use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::kg::Triple;
use crate::params::{attention_vector, glorot, Bound, ParamSet};
use crate::tensor::Tensor;

/// Triple endpoints and relation ids as shared index lists.
#[derive(Clone, Debug)]
pub struct TripleIndex {
    pub heads: Rc<[usize]>,
    pub tails: Rc<[usize]>,
    pub relations: Rc<[usize]>,
    pub num_entities: usize,
    pub num_relations: usize,
    relation_counts: Vec<usize>,
}

impl TripleIndex {
    pub fn new(triples: &[Triple], num_entities: usize, num_relations: usize) -> Result<Self> {
        let mut relation_counts = vec![0usize; num_relations];
        for t in triples {
            if t.head >= num_entities || t.tail >= num_entities || t.relation >= num_relations {
                return Err(Error::Graph(format!("triple {t:?} out of range")));
            }
            relation_counts[t.relation] += 1;
        }
        Ok(TripleIndex {
            heads: triples.iter().map(|t| t.head).collect(),
            tails: triples.iter().map(|t| t.tail).collect(),
            relations: triples.iter().map(|t| t.relation).collect(),
            num_entities,
            num_relations,
            relation_counts,
        })
    }

    pub fn len(&self) -> usize {
        self.heads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heads.is_empty()
    }

    pub fn relation_counts(&self) -> &[usize] {
        &self.relation_counts
    }
}

/// Dimensions and switches of the triple encoder.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TripleDims {
    pub d_e: usize,
    pub d_r: usize,
    pub d_t: usize,
}

pub mod names {
    pub const W_LOCAL: &str = "triple.w_local";
    pub const W_GLOBAL: &str = "triple.w_global";
    pub const W_SPEC: &str = "triple.w_spec";
    pub const W_HEAD: &str = "triple.w_head";
    pub const W_TAIL: &str = "triple.w_tail";
    pub const W_REL_QUERY: &str = "triple.w_rel_query";
    pub const A_HEAD: &str = "triple.a_head";
    pub const A_TAIL: &str = "triple.a_tail";
    pub const A_REL: &str = "triple.a_rel";
    pub const W_TYPE: &str = "type.w";
    pub const B_TYPE: &str = "type.b";
    pub const W_TYPE_REL: &str = "type.w_rel";
    pub const W_TYPE_TRIPLE: &str = "type.w_triple";
    pub const A_TYPE_FROM_SEM: &str = "type.a_sem_type";
    pub const A_SEM_FROM_TYPE: &str = "type.a_type_sem";
}

pub fn init_params(params: &mut ParamSet, dims: TripleDims, with_type: bool, rng: &mut ChaCha8Rng) {
    let TripleDims { d_e, d_r, d_t } = dims;
    params.insert(names::W_LOCAL, glorot(2 * d_e, d_r, rng));
    params.insert(names::W_GLOBAL, glorot(2 * d_e, d_r, rng));
    params.insert(names::W_SPEC, glorot(2 * d_e + d_r, d_r, rng));
    params.insert(names::W_HEAD, glorot(d_e, d_r, rng));
    params.insert(names::W_TAIL, glorot(d_e, d_r, rng));
    params.insert(names::W_REL_QUERY, glorot(d_r, d_r, rng));
    params.insert(names::A_HEAD, attention_vector(2 * d_r, rng));
    params.insert(names::A_TAIL, attention_vector(2 * d_r, rng));
    params.insert(names::A_REL, attention_vector(2 * d_r, rng));
    if with_type {
        params.insert(names::W_TYPE, glorot(d_e, d_t, rng));
        params.insert(names::B_TYPE, Tensor::zeros(&[d_t]));
        params.insert(names::W_TYPE_REL, glorot(2 * d_t, d_r, rng));
        params.insert(names::W_TYPE_TRIPLE, glorot(2 * d_t + d_r, d_r, rng));
        params.insert(names::A_TYPE_FROM_SEM, attention_vector(2 * d_r, rng));
        params.insert(names::A_SEM_FROM_TYPE, attention_vector(2 * d_r, rng));
    }
}

/// Per-row mean of `values` grouped by relation.
fn relation_mean(tape: &mut Tape, values: Var, idx: &TripleIndex) -> Result<Var> {
    if let Some(r) = idx.relation_counts.iter().position(|&c| c == 0) {
        return Err(Error::Segment {
            op: "global_relation",
            msg: format!("relation {r} has no triples to average"),
        });
    }
    let sums = tape.segment_sum(values, &idx.relations, idx.num_relations)?;
    let inv = Tensor::vector(idx.relation_counts.iter().map(|&c| 1.0 / c as f64).collect());
    let inv = tape.constant(inv);
    tape.mul_rows(sums, inv)
}

/// Endpoint pair `x_i ‖ x_j` for every triple.
pub fn pair_concat(tape: &mut Tape, x: Var, idx: &TripleIndex) -> Result<Var> {
    let h = tape.gather(x, &idx.heads)?;
    let t = tape.gather(x, &idx.tails)?;
    tape.concat(h, t)
}

/// `r̄_r`: mean of `x_i ‖ x_j` over the triples of each relation.
pub fn global_relation(tape: &mut Tape, x: Var, idx: &TripleIndex) -> Result<Var> {
    let pairs = pair_concat(tape, x, idx)?;
    relation_mean(tape, pairs, idx)
}

pub struct Specificity {
    /// `r̃_irj = x_i ‖ x_j`
    pub local: Var,
    /// `r̃_irj W_el`
    pub local_proj: Var,
    /// `x_i ‖ r̃_irj W_el ‖ x_j`
    pub specificity: Var,
}

pub fn triple_specificity(tape: &mut Tape, x: Var, idx: &TripleIndex, w_local: Var) -> Result<Specificity> {
    let xh = tape.gather(x, &idx.heads)?;
    let xt = tape.gather(x, &idx.tails)?;
    let local = tape.concat(xh, xt)?;
    let local_proj = tape.matmul(local, w_local)?;
    let left = tape.concat(xh, local_proj)?;
    let specificity = tape.concat(left, xt)?;
    Ok(Specificity {
        local,
        local_proj,
        specificity,
    })
}

pub struct Attention {
    /// One row per group.
    pub output: Var,
    /// One weight per member, summing to one within each group.
    pub weights: Var,
}

/// Scores `aᵀ(query ‖ key)` per row, normalizes `LReLU` of the scores within
/// each group, and pools `values` by those weights.
#[allow(clippy::too_many_arguments)]
fn attend(
    tape: &mut Tape,
    query: Var,
    key: Var,
    values: Var,
    a: Var,
    groups: &Rc<[usize]>,
    num_groups: usize,
    slope: f64,
) -> Result<(Var, Var)> {
    let qk = tape.concat(query, key)?;
    let scores = tape.matmul(qk, a)?;
    let n = tape.shape(scores)[0];
    let scores = tape.reshape(scores, vec![n])?;
    let scores = tape.leaky_relu(scores, slope);
    let weights = tape.segment_softmax(scores, groups, num_groups)?;
    let weighted = tape.mul_rows(values, weights)?;
    let pooled = tape.segment_sum(weighted, groups, num_groups)?;
    Ok((pooled, weights))
}

/// Relation-grouped attention: `LReLU(Σ_{T_r} α·value)` with α the
/// per-relation softmax of `LReLU(aᵀ(query ‖ key))`.
#[allow(clippy::too_many_arguments)]
pub fn role_aware_attention(
    tape: &mut Tape,
    query: Var,
    key: Var,
    values: Var,
    a: Var,
    idx: &TripleIndex,
    slope: f64,
) -> Result<Attention> {
    if let Some(r) = idx.relation_counts.iter().position(|&c| c == 0) {
        return Err(Error::Segment {
            op: "role_aware_attention",
            msg: format!("relation {r} has no triples"),
        });
    }
    let (pooled, weights) = attend(tape, query, key, values, a, &idx.relations, idx.num_relations, slope)?;
    Ok(Attention {
        output: tape.leaky_relu(pooled, slope),
        weights,
    })
}

/// Broadcasts a per-relation row to every triple of that relation.
pub fn per_triple(tape: &mut Tape, per_relation: Var, idx: &TripleIndex) -> Result<Var> {
    tape.gather(per_relation, &idx.relations)
}

/// `S = x̄_h + x̄_t + R̄ + R̃W_s` with the aggregates broadcast per triple.
pub fn semantic_triple(
    tape: &mut Tape,
    head_agg: Var,
    tail_agg: Var,
    rel_agg: Var,
    spec_proj: Var,
    idx: &TripleIndex,
) -> Result<Var> {
    let h = per_triple(tape, head_agg, idx)?;
    let t = per_triple(tape, tail_agg, idx)?;
    let r = per_triple(tape, rel_agg, idx)?;
    let s = tape.add(h, t)?;
    let s = tape.add(s, r)?;
    tape.add(s, spec_proj)
}

/// `tanh(XW + b)`.
pub fn type_projection(tape: &mut Tape, x: Var, w: Var, b: Var) -> Result<Var> {
    let xw = tape.matmul(x, w)?;
    let pre = tape.add(xw, b)?;
    Ok(tape.tanh(pre))
}

pub struct TypeTriple {
    /// `r̄ᵗ_r`, one row per relation.
    pub global: Var,
    /// `rᵗ_irj = r̄ᵗ_r + (xᵗ_i ‖ xᵗ_j)`
    pub relation: Var,
    /// `xᵗ_i ‖ rᵗ_irj W_tr ‖ xᵗ_j`
    pub triple: Var,
}

pub fn type_triple(tape: &mut Tape, xt: Var, idx: &TripleIndex, w_type_rel: Var) -> Result<TypeTriple> {
    let th = tape.gather(xt, &idx.heads)?;
    let tt = tape.gather(xt, &idx.tails)?;
    let local = tape.concat(th, tt)?;
    let global = relation_mean(tape, local, idx)?;
    let spread = per_triple(tape, global, idx)?;
    let relation = tape.add(spread, local)?;
    let proj = tape.matmul(relation, w_type_rel)?;
    let left = tape.concat(th, proj)?;
    let triple = tape.concat(left, tt)?;
    Ok(TypeTriple {
        global,
        relation,
        triple,
    })
}

pub struct Mutual {
    /// `T̄_r`: semantic triples pooled under type-keyed attention.
    pub type_enhanced: Attention,
    /// `S̄_r`: projected type triples pooled under semantic-keyed attention.
    pub semantic_enhanced: Attention,
}

/// Semantic–type mutual attention over the triples of each relation.
pub fn mutual_attention(
    tape: &mut Tape,
    semantic: Var,
    type_proj: Var,
    a_sem_type: Var,
    a_type_sem: Var,
    idx: &TripleIndex,
    slope: f64,
) -> Result<Mutual> {
    let (t_pool, t_w) = attend(
        tape,
        semantic,
        type_proj,
        semantic,
        a_sem_type,
        &idx.relations,
        idx.num_relations,
        slope,
    )?;
    let (s_pool, s_w) = attend(
        tape,
        type_proj,
        semantic,
        type_proj,
        a_type_sem,
        &idx.relations,
        idx.num_relations,
        slope,
    )?;
    Ok(Mutual {
        type_enhanced: Attention {
            output: tape.relu(t_pool),
            weights: t_w,
        },
        semantic_enhanced: Attention {
            output: tape.relu(s_pool),
            weights: s_w,
        },
    })
}

/// `(S + S̄ + P + T̄) ‖ r̄ᵗ`, per-relation terms broadcast per triple.
pub fn fuse_type_enhanced(
    tape: &mut Tape,
    semantic: Var,
    semantic_enhanced: Var,
    type_proj: Var,
    type_enhanced: Var,
    type_global: Var,
    idx: &TripleIndex,
) -> Result<Var> {
    let s_bar = per_triple(tape, semantic_enhanced, idx)?;
    let t_bar = per_triple(tape, type_enhanced, idx)?;
    let r_bar = per_triple(tape, type_global, idx)?;
    let sum = tape.add(semantic, s_bar)?;
    let sum = tape.add(sum, type_proj)?;
    let sum = tape.add(sum, t_bar)?;
    tape.concat(sum, r_bar)
}

/// Which parts of the encoder run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TripleSwitches {
    /// Head/tail/relation-aware attention; when off, `S = R̃W_s`.
    pub ensemble_attention: bool,
    /// Type-space enhancement; when off, the output is `S` itself.
    pub type_space: bool,
}

/// Full triple representation for one graph. Output width is
/// `d_r + 2·d_t`, or `d_r` without the type space.
pub fn encode(
    tape: &mut Tape,
    x: Var,
    idx: &TripleIndex,
    p: &Bound,
    switches: TripleSwitches,
    slope: f64,
) -> Result<Var> {
    use names::*;
    let spec = triple_specificity(tape, x, idx, p.var(W_LOCAL))?;
    let key = tape.matmul(spec.specificity, p.var(W_SPEC))?;

    let semantic = if switches.ensemble_attention {
        let xh = tape.gather(x, &idx.heads)?;
        let xt = tape.gather(x, &idx.tails)?;
        let head_val = tape.matmul(xh, p.var(W_HEAD))?;
        let tail_val = tape.matmul(xt, p.var(W_TAIL))?;
        let head = role_aware_attention(tape, head_val, key, head_val, p.var(A_HEAD), idx, slope)?;
        let tail = role_aware_attention(tape, tail_val, key, tail_val, p.var(A_TAIL), idx, slope)?;

        // overall relation W_g r̄_r + W_l r̃_irj, per triple
        let global = global_relation(tape, x, idx)?;
        let global = tape.matmul(global, p.var(W_GLOBAL))?;
        let global = per_triple(tape, global, idx)?;
        let overall = tape.add(global, spec.local_proj)?;
        let rel_query = tape.matmul(overall, p.var(W_REL_QUERY))?;
        let rel = role_aware_attention(tape, rel_query, key, overall, p.var(A_REL), idx, slope)?;

        semantic_triple(tape, head.output, tail.output, rel.output, key, idx)?
    } else {
        key
    };

    if !switches.type_space {
        return Ok(semantic);
    }
    let xt = type_projection(tape, x, p.var(W_TYPE), p.var(B_TYPE))?;
    let tt = type_triple(tape, xt, idx, p.var(W_TYPE_REL))?;
    let type_proj = tape.matmul(tt.triple, p.var(W_TYPE_TRIPLE))?;
    let mutual = mutual_attention(
        tape,
        semantic,
        type_proj,
        p.var(A_TYPE_FROM_SEM),
        p.var(A_SEM_FROM_TYPE),
        idx,
        slope,
    )?;
    fuse_type_enhanced(
        tape,
        semantic,
        mutual.semantic_enhanced.output,
        type_proj,
        mutual.type_enhanced.output,
        tt.global,
        idx,
    )
}
