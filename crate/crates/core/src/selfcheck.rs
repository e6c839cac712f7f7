//! Numerical self-checks: finite-difference gradients for every
//! differentiable op and composed module, equivalence against the naive
//! oracles, and fault-injection to prove the gradient suite has teeth.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::rc::Rc;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{OpKind, Tape, Var};
use crate::config::Variant;
use crate::enhance::{self, CycleMode, NeighborIndex};
use crate::error::Result;
use crate::eval::{evaluate_pairs, EvalOptions};
use crate::gradcheck::fd_check_with_fault;
use crate::kg::{expand_relations, KnowledgeGraph, Triple};
use crate::model::{GraphContext, ModelConfig, TteaModel};
use crate::oracle;
use crate::params::ParamSet;
use crate::structure;
use crate::tensor::{SparseMatrix, Tensor};
use crate::train::{margin_loss, NegativePair};
use crate::triple::{self, TripleDims, TripleIndex, TripleSwitches};

pub const FD_EPS: f64 = 1e-6;
pub const FD_TOL: f64 = 1e-4;
pub const ORACLE_TOL: f64 = 1e-10;
const SLOPE: f64 = 0.3;

type Forward = Box<dyn Fn(&mut Tape, &[Var]) -> Result<Var>>;

/// A scalar-valued function and the point to check its gradient at.
pub struct GradCase {
    pub forward: Forward,
    pub inputs: Vec<Tensor>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub instances: usize,
    /// Worst error over all instances.
    pub error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SelfCheckReport {
    pub checks: Vec<Check>,
}

impl SelfCheckReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    /// `PASS|FAIL\tname\tinstances\terror\ttolerance` per check.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            let tag = if c.passed { "PASS" } else { "FAIL" };
            writeln!(s, "{tag}\t{}\t{}\t{:.3e}\t{:.0e}", c.name, c.instances, c.error, c.tolerance)
                .expect("string write");
        }
        s
    }
}

#[derive(Clone, Debug)]
pub struct SelfCheckOptions {
    pub instances: usize,
    pub seed: u64,
    /// Backward rule to sign-flip in every gradient check.
    pub fault: Option<OpKind>,
}

impl Default for SelfCheckOptions {
    fn default() -> Self {
        SelfCheckOptions {
            instances: 20,
            seed: 0,
            fault: None,
        }
    }
}

/// Entries bounded away from zero so that no kink lies within `FD_EPS`.
pub fn random_tensor(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let n: usize = shape.iter().product();
    let data = (0..n)
        .map(|_| {
            let m = rng.random_range(0.2..1.5);
            if rng.random_bool(0.5) {
                m
            } else {
                -m
            }
        })
        .collect();
    Tensor::new(shape.to_vec(), data).expect("shape")
}

/// A connected graph: a random spanning tree plus extra triples, relations
/// assigned round-robin first so every one is used.
pub fn random_graph(n: usize, r: usize, num_triples: usize, rng: &mut ChaCha8Rng) -> KnowledgeGraph {
    assert!(n >= 2 && num_triples >= n - 1 && num_triples >= r);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut seen = HashSet::new();
    let mut triples = Vec::with_capacity(num_triples);
    let rel = |k: usize, rng: &mut ChaCha8Rng| if k < r { k } else { rng.random_range(0..r) };
    for i in 1..n {
        let parent = order[rng.random_range(0..i)];
        let (h, t) = if rng.random_bool(0.5) { (parent, order[i]) } else { (order[i], parent) };
        let tr = Triple::new(h, rel(triples.len(), rng), t);
        seen.insert(tr);
        triples.push(tr);
    }
    while triples.len() < num_triples {
        let h = rng.random_range(0..n);
        let t = rng.random_range(0..n);
        let tr = Triple::new(h, rel(triples.len(), rng), t);
        if h != t && seen.insert(tr) {
            triples.push(tr);
        }
    }
    KnowledgeGraph::new(n, r, triples, None).expect("valid random graph")
}

/// Fixed, non-uniform weights so every output entry reaches the loss with
/// a different coefficient.
fn readout(tape: &mut Tape, out: Var) -> Result<Var> {
    let shape = tape.shape(out).to_vec();
    let n: usize = shape.iter().product();
    let w = Tensor::new(shape, (0..n).map(|i| (1.7 * i as f64 + 0.3).sin()).collect())?;
    let w = tape.constant(w);
    let prod = tape.mul(out, w)?;
    Ok(tape.sum(prod))
}

fn case(inputs: Vec<Tensor>, f: impl Fn(&mut Tape, &[Var]) -> Result<Var> + 'static) -> GradCase {
    GradCase {
        forward: Box::new(move |t, v| {
            let out = f(t, v)?;
            readout(t, out)
        }),
        inputs,
    }
}

fn random_ids(len: usize, n: usize, rng: &mut ChaCha8Rng) -> Rc<[usize]> {
    (0..len).map(|_| rng.random_range(0..n)).collect()
}

/// One randomized instance exercising `kind`.
pub fn op_case(kind: OpKind, rng: &mut ChaCha8Rng) -> GradCase {
    let n = rng.random_range(2..5);
    let d = rng.random_range(1..4);
    let mut t = |shape: &[usize]| random_tensor(shape, rng);
    match kind {
        OpKind::MatMul => {
            let k = 3;
            case(vec![t(&[n, k]), t(&[k, d])], |tp, v| tp.matmul(v[0], v[1]))
        }
        OpKind::SpMM => {
            let mut trips = Vec::new();
            let mut r2 = ChaCha8Rng::seed_from_u64(n as u64 * 31 + d as u64);
            for i in 0..n {
                for j in 0..n {
                    if r2.random_bool(0.5) {
                        trips.push((i, j, r2.random_range(-1.0..1.0)));
                    }
                }
            }
            let m = Arc::new(SparseMatrix::from_triplets(n, n, trips).expect("in range"));
            case(vec![t(&[n, d])], move |tp, v| tp.spmm(&m, v[0]))
        }
        OpKind::Concat => case(vec![t(&[n, d]), t(&[n, 2])], |tp, v| tp.concat(v[0], v[1])),
        OpKind::Add => case(vec![t(&[n, d]), t(&[d])], |tp, v| tp.add(v[0], v[1])),
        OpKind::Sub => case(vec![t(&[n, d]), t(&[n, d])], |tp, v| tp.sub(v[0], v[1])),
        OpKind::Mul => case(vec![t(&[n, d]), t(&[n, d])], |tp, v| tp.mul(v[0], v[1])),
        OpKind::Scale => case(vec![t(&[n, d])], |tp, v| Ok(tp.scale(v[0], -1.7))),
        OpKind::AddScalar => case(vec![t(&[n, d])], |tp, v| {
            let s = tp.add_scalar(v[0], 0.4);
            tp.mul(s, s)
        }),
        OpKind::Relu => case(vec![t(&[n, d])], |tp, v| Ok(tp.relu(v[0]))),
        OpKind::LeakyRelu => case(vec![t(&[n, d])], |tp, v| Ok(tp.leaky_relu(v[0], SLOPE))),
        OpKind::Tanh => case(vec![t(&[n, d])], |tp, v| Ok(tp.tanh(v[0]))),
        OpKind::Sigmoid => case(vec![t(&[n, d])], |tp, v| Ok(tp.sigmoid(v[0]))),
        OpKind::Abs => case(vec![t(&[n, d])], |tp, v| Ok(tp.abs(v[0]))),
        OpKind::Sum => GradCase {
            // the readout itself ends in a sum; check the bare op too
            forward: Box::new(|tp, v| {
                let sq = tp.mul(v[0], v[0])?;
                Ok(tp.sum(sq))
            }),
            inputs: vec![t(&[n, d])],
        },
        OpKind::SumLastAxis => case(vec![t(&[n, d + 1])], |tp, v| Ok(tp.sum_last_axis(v[0]))),
        OpKind::Gather => {
            let idx = random_ids(n + 2, n, rng);
            case(vec![random_tensor(&[n, d], rng)], move |tp, v| tp.gather(v[0], &idx))
        }
        OpKind::SegmentSum => {
            let len = n + 3;
            let segs = n + 1;
            let ids = random_ids(len, segs, rng);
            case(vec![random_tensor(&[len, d], rng)], move |tp, v| tp.segment_sum(v[0], &ids, segs))
        }
        OpKind::SegmentSoftmax => {
            let len = n + 3;
            let segs = n;
            let ids = random_ids(len, segs, rng);
            case(vec![random_tensor(&[len], rng)], move |tp, v| tp.segment_softmax(v[0], &ids, segs))
        }
        OpKind::MulRows => case(vec![t(&[n, d]), t(&[n])], |tp, v| tp.mul_rows(v[0], v[1])),
        OpKind::Reshape => case(vec![t(&[n, 2 * d])], move |tp, v| {
            let r = tp.reshape(v[0], vec![2 * n, d])?;
            let w = tp.constant(Tensor::new(vec![d], (0..d).map(|i| i as f64 - 0.5).collect())?);
            tp.mul(r, w)
        }),
        OpKind::Leaf => case(vec![t(&[n, d])], |_, v| Ok(v[0])),
    }
}

/// Parameters of `params` become the checked inputs.
fn param_case(params: ParamSet, f: impl Fn(&mut Tape, &ParamSet, &[Var]) -> Result<Var> + 'static) -> GradCase {
    let inputs = params.tensors();
    case(inputs, move |tp, v| f(tp, &params, v))
}

fn small_graph(rng: &mut ChaCha8Rng) -> (crate::kg::RelationExpandedGraph, usize) {
    let n = rng.random_range(4..7);
    let r = rng.random_range(1..3);
    let m = n - 1 + rng.random_range(0..3);
    let g = expand_relations(random_graph(n, r, m.max(r), rng)).expect("fresh graph");
    (g, n)
}

pub const MODULES: [&str; 7] = [
    "structure_encoder",
    "triple_encoder.full",
    "triple_encoder.wo-E",
    "triple_encoder.wo-T",
    "entity_enhancer",
    "margin_loss",
    "pipeline",
];

/// One randomized instance of a composed module.
pub fn module_case(module: &str, rng: &mut ChaCha8Rng) -> GradCase {
    let d_e = 3;
    let dims = TripleDims { d_e, d_r: 3, d_t: 2 };
    match module {
        "structure_encoder" => {
            let (g, n) = small_graph(rng);
            let depth = rng.random_range(1..3);
            let mut p = ParamSet::new();
            p.insert("x", random_tensor(&[n, d_e], rng));
            structure::init_params(&mut p, d_e, depth, rng);
            // zero biases would make every gate start identical
            for l in 0..depth {
                p.insert(structure::gate_bias_name(l), random_tensor(&[d_e], rng));
            }
            let adj = Arc::clone(g.adjacency());
            param_case(p, move |tp, p, v| {
                let b = p.bound_from(v);
                structure::encode(tp, b.var("x"), &adj, &b, depth)
            })
        }
        m if m.starts_with("triple_encoder") => {
            let switches = TripleSwitches {
                ensemble_attention: m != "triple_encoder.wo-E",
                type_space: m != "triple_encoder.wo-T",
            };
            let (g, n) = small_graph(rng);
            let idx = TripleIndex::new(g.triples(), n, g.num_relations()).expect("valid");
            let mut p = ParamSet::new();
            p.insert("x", random_tensor(&[n, d_e], rng));
            triple::init_params(&mut p, dims, switches.type_space, rng);
            p.insert(triple::names::B_TYPE, random_tensor(&[dims.d_t], rng));
            for a in [
                triple::names::A_HEAD,
                triple::names::A_TAIL,
                triple::names::A_REL,
                triple::names::A_TYPE_FROM_SEM,
                triple::names::A_SEM_FROM_TYPE,
            ] {
                if p.contains(a) {
                    p.insert(a, random_tensor(&[2 * dims.d_r, 1], rng));
                }
            }
            param_case(p, move |tp, p, v| {
                let b = p.bound_from(v);
                triple::encode(tp, b.var("x"), &idx, &b, switches, SLOPE)
            })
        }
        "entity_enhancer" => {
            let (g, n) = small_graph(rng);
            let idx = TripleIndex::new(g.triples(), n, g.num_relations()).expect("valid");
            let nbrs = NeighborIndex::from_graph(g.base());
            let width = 4;
            let mode = CycleMode::from_number(rng.random_range(1..4)).expect("1..=3");
            let mut p = ParamSet::new();
            p.insert("x", random_tensor(&[n, d_e], rng));
            p.insert("t", random_tensor(&[idx.len(), width], rng));
            enhance::init_params(&mut p, width, d_e, rng);
            for a in [enhance::names::A_HEAD, enhance::names::A_TAIL, enhance::names::A_NEIGHBOR] {
                p.insert(a, random_tensor(&[2 * d_e, 1], rng));
            }
            param_case(p, move |tp, p, v| {
                let b = p.bound_from(v);
                enhance::enhance(tp, b.var("x"), Some(b.var("t")), &idx, &nbrs, &b, mode, SLOPE)
            })
        }
        "margin_loss" => {
            let n = 5;
            let pos: Vec<(usize, usize)> = vec![(0, 1), (2, 2), (4, 0)];
            let mut negs = Vec::new();
            for (owner, &(a, b)) in pos.iter().enumerate() {
                for _ in 0..2 {
                    let b2 = (b + rng.random_range(1..n)) % n;
                    let a2 = (a + rng.random_range(1..n)) % n;
                    negs.push(NegativePair { owner, pair: (a, b2) });
                    negs.push(NegativePair { owner, pair: (a2, b) });
                }
            }
            let margin = rng.random_range(0.5..3.0);
            GradCase {
                forward: Box::new(move |tp, v| margin_loss(tp, v[0], v[1], &pos, &negs, margin)),
                inputs: vec![random_tensor(&[n, 4], rng), random_tensor(&[n, 4], rng)],
            }
        }
        "pipeline" => {
            let (g1, n1) = small_graph(rng);
            let (g2, n2) = small_graph(rng);
            let variant = Variant::ALL[rng.random_range(0..4)];
            let config = ModelConfig {
                d_e,
                d_r: dims.d_r,
                d_t: dims.d_t,
                gcn_depth: 1,
                cycle_mode: CycleMode::from_number(rng.random_range(1..4)).expect("1..=3"),
                variant,
                leaky_slope: SLOPE,
            };
            let e1 = random_tensor(&[n1, d_e], rng);
            let e2 = random_tensor(&[n2, d_e], rng);
            let model = TteaModel::init(config, &e1, &e2, rng.random()).expect("init");
            let ctx1 = GraphContext::new(&g1).expect("context");
            let ctx2 = GraphContext::new(&g2).expect("context");
            let pos = vec![(0, 0), (1, 1)];
            let negs = vec![
                NegativePair { owner: 0, pair: (0, 2) },
                NegativePair { owner: 1, pair: (3, 1) },
            ];
            let params = model.params.clone();
            GradCase {
                inputs: params.tensors(),
                forward: Box::new(move |tp, v| {
                    let b = params.bound_from(v);
                    let (f1, f2) = model.forward(tp, &b, &ctx1, &ctx2)?;
                    margin_loss(tp, f1, f2, &pos, &negs, 10.0)
                }),
            }
        }
        other => panic!("unknown module {other:?}"),
    }
}

fn grad_check(name: String, opts: &SelfCheckOptions, mut make: impl FnMut(&mut ChaCha8Rng) -> GradCase) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ fxhash(&name));
    let mut worst = 0.0f64;
    for _ in 0..opts.instances {
        let c = make(&mut rng);
        let err = match fd_check_with_fault(&c.forward, &c.inputs, FD_EPS, opts.fault) {
            Ok(e) if e.is_finite() => e,
            _ => f64::INFINITY,
        };
        worst = worst.max(err);
    }
    Check {
        name,
        instances: opts.instances,
        error: worst,
        tolerance: FD_TOL,
        passed: worst < FD_TOL,
    }
}

/// Stable per-name seed offset.
fn fxhash(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3))
}

pub fn gradient_suite(opts: &SelfCheckOptions) -> Vec<Check> {
    let mut out: Vec<Check> = OpKind::DIFFERENTIABLE
        .iter()
        .map(|&k| grad_check(format!("grad.op.{k:?}"), opts, |rng| op_case(k, rng)))
        .collect();
    out.extend(
        MODULES
            .iter()
            .map(|m| grad_check(format!("grad.module.{m}"), opts, |rng| module_case(m, rng))),
    );
    out
}

fn to_rows(t: &Tensor) -> oracle::Rows {
    (0..t.rows()).map(|i| t.row(i).to_vec()).collect()
}

fn oracle_check(name: &str, opts: &SelfCheckOptions, mut run: impl FnMut(&mut ChaCha8Rng) -> Result<f64>) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ fxhash(name));
    let mut worst = 0.0f64;
    for _ in 0..opts.instances {
        let err = run(&mut rng).unwrap_or(f64::INFINITY);
        worst = worst.max(if err.is_nan() { f64::INFINITY } else { err });
    }
    Check {
        name: name.to_string(),
        instances: opts.instances,
        error: worst,
        tolerance: ORACLE_TOL,
        passed: worst <= ORACLE_TOL,
    }
}

/// Random graph with up to 50 entities / 200 triples, plus its triple list.
fn oracle_graph(rng: &mut ChaCha8Rng) -> (TripleIndex, Vec<(usize, usize, usize)>, KnowledgeGraph) {
    let n = rng.random_range(2..=50);
    let r = rng.random_range(1..=8);
    let m = rng.random_range((n - 1).max(r)..=200.max(n));
    let g = random_graph(n, r, m.min(n * (n - 1) * r).max(n - 1), rng);
    let trips: Vec<(usize, usize, usize)> = g.triples().iter().map(|t| (t.head, t.relation, t.tail)).collect();
    let idx = TripleIndex::new(g.triples(), n, r).expect("valid");
    (idx, trips, g)
}

pub fn oracle_suite(opts: &SelfCheckOptions) -> Vec<Check> {
    let mut out = Vec::new();
    out.push(oracle_check("oracle.segment_sum", opts, |rng| {
        let len = rng.random_range(1..200);
        let n = rng.random_range(1..50);
        let d = rng.random_range(1..5);
        let ids = random_ids(len, n, rng);
        let x = random_tensor(&[len, d], rng);
        let mut tp = Tape::new();
        let v = tp.constant(x.clone());
        let y = tp.segment_sum(v, &ids, n)?;
        Ok(oracle::max_abs_diff(&to_rows(tp.value(y)), &oracle::segment_sum(&to_rows(&x), &ids, n, d)))
    }));
    out.push(oracle_check("oracle.segment_softmax", opts, |rng| {
        let len = rng.random_range(1..200);
        let n = rng.random_range(1..50);
        let ids = random_ids(len, n, rng);
        let x: Vec<f64> = (0..len).map(|_| rng.random_range(-20.0..20.0)).collect();
        let mut tp = Tape::new();
        let v = tp.constant(Tensor::vector(x.clone()));
        let y = tp.segment_softmax(v, &ids, n)?;
        let want = oracle::segment_softmax(&x, &ids, n);
        Ok(tp.value(y).data().iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    }));
    out.push(oracle_check("oracle.global_relation", opts, |rng| {
        let (idx, trips, g) = oracle_graph(rng);
        let x = random_tensor(&[g.num_entities(), 3], rng);
        let mut tp = Tape::new();
        let v = tp.constant(x.clone());
        let y = triple::global_relation(&mut tp, v, &idx)?;
        let want = oracle::global_relation(&to_rows(&x), &trips, g.num_relations());
        Ok(oracle::max_abs_diff(&to_rows(tp.value(y)), &want))
    }));
    out.push(oracle_check("oracle.role_aware_attention", opts, |rng| {
        let (idx, _, g) = oracle_graph(rng);
        let m = g.triples().len();
        let (q, k, val, a) = (
            random_tensor(&[m, 3], rng),
            random_tensor(&[m, 2], rng),
            random_tensor(&[m, 4], rng),
            random_tensor(&[5, 1], rng),
        );
        let mut tp = Tape::new();
        let vars: Vec<Var> = [&q, &k, &val, &a].iter().map(|t| tp.constant((*t).clone())).collect();
        let y = triple::role_aware_attention(&mut tp, vars[0], vars[1], vars[2], vars[3], &idx, SLOPE)?;
        let want = oracle::role_aware_attention(
            &to_rows(&q),
            &to_rows(&k),
            &to_rows(&val),
            a.data(),
            &idx.relations,
            idx.num_relations,
            SLOPE,
        );
        Ok(oracle::max_abs_diff(&to_rows(tp.value(y.output)), &want))
    }));
    out.push(oracle_check("oracle.mutual_attention", opts, |rng| {
        let (idx, _, g) = oracle_graph(rng);
        let m = g.triples().len();
        let (s, t, a1, a2) = (
            random_tensor(&[m, 3], rng),
            random_tensor(&[m, 3], rng),
            random_tensor(&[6, 1], rng),
            random_tensor(&[6, 1], rng),
        );
        let mut tp = Tape::new();
        let vars: Vec<Var> = [&s, &t, &a1, &a2].iter().map(|x| tp.constant((*x).clone())).collect();
        let y = triple::mutual_attention(&mut tp, vars[0], vars[1], vars[2], vars[3], &idx, SLOPE)?;
        let (want_t, want_s) = oracle::mutual_attention(
            &to_rows(&s),
            &to_rows(&t),
            a1.data(),
            a2.data(),
            &idx.relations,
            idx.num_relations,
            SLOPE,
        );
        Ok(oracle::max_abs_diff(&to_rows(tp.value(y.type_enhanced.output)), &want_t)
            .max(oracle::max_abs_diff(&to_rows(tp.value(y.semantic_enhanced.output)), &want_s)))
    }));
    out.push(oracle_check("oracle.head_tail_enhance", opts, |rng| {
        let (idx, trips, g) = oracle_graph(rng);
        let n = g.num_entities();
        let m = trips.len();
        let (x, hp, tpj, ah, at) = (
            random_tensor(&[n, 3], rng),
            random_tensor(&[m, 3], rng),
            random_tensor(&[m, 3], rng),
            random_tensor(&[6, 1], rng),
            random_tensor(&[6, 1], rng),
        );
        let mut tp = Tape::new();
        let v: Vec<Var> = [&x, &hp, &tpj, &ah, &at].iter().map(|t| tp.constant((*t).clone())).collect();
        let h = enhance::head_enhance(&mut tp, v[0], v[1], &idx, v[3], SLOPE)?;
        let t = enhance::tail_enhance(&mut tp, h, v[2], &idx, v[4], SLOPE)?;
        let heads: Vec<usize> = trips.iter().map(|t| t.0).collect();
        let tails: Vec<usize> = trips.iter().map(|t| t.2).collect();
        let want_h = oracle::role_enhance(&to_rows(&x), &to_rows(&hp), &heads, ah.data(), SLOPE);
        let want_t = oracle::role_enhance(&want_h, &to_rows(&tpj), &tails, at.data(), SLOPE);
        Ok(oracle::max_abs_diff(&to_rows(tp.value(h)), &want_h)
            .max(oracle::max_abs_diff(&to_rows(tp.value(t)), &want_t)))
    }));
    out.push(oracle_check("oracle.neighbor_reaggregate", opts, |rng| {
        let (_, _, g) = oracle_graph(rng);
        let n = g.num_entities();
        let lists = g.neighbors();
        let (x, a) = (random_tensor(&[n, 3], rng), random_tensor(&[6, 1], rng));
        let mut tp = Tape::new();
        let (xv, av) = (tp.constant(x.clone()), tp.constant(a.clone()));
        let y = enhance::neighbor_reaggregate(&mut tp, xv, &NeighborIndex::from_lists(&lists), av, SLOPE)?;
        let want = oracle::neighbor_reaggregate(&to_rows(&x), &lists, a.data(), SLOPE);
        Ok(oracle::max_abs_diff(&to_rows(tp.value(y)), &want))
    }));
    out.push(oracle_check("oracle.evaluate", opts, |rng| {
        let m = rng.random_range(1..60);
        let d = rng.random_range(1..4);
        // integer coordinates make ties common
        let grid = |rng: &mut ChaCha8Rng| {
            let data = (0..m * d).map(|_| rng.random_range(0..4) as f64).collect();
            Tensor::new(vec![m, d], data).expect("shape")
        };
        let (f1, f2) = (grid(rng), grid(rng));
        let mut targets: Vec<usize> = (0..m).collect();
        targets.shuffle(rng);
        let pairs: Vec<(usize, usize)> = (0..m).zip(targets).collect();
        let r = evaluate_pairs(&pairs, &f1, &f2, &EvalOptions::default())?;
        let (h1, h10, mrr) = oracle::metrics(&pairs, &to_rows(&f1), &to_rows(&f2));
        Ok((r.hits(1) - h1).abs().max((r.hits(10) - h10).abs()).max((r.mrr - mrr).abs()))
    }));
    out
}

/// Every gradient and oracle check.
pub fn run(opts: &SelfCheckOptions) -> SelfCheckReport {
    let mut checks = gradient_suite(opts);
    checks.extend(oracle_suite(opts));
    SelfCheckReport { checks }
}

/// Whether a sign flip in `kind`'s backward rule makes its own gradient
/// check fail.
pub fn fault_detected(kind: OpKind, instances: usize) -> bool {
    let opts = SelfCheckOptions {
        instances,
        seed: 1,
        fault: Some(kind),
    };
    !grad_check(format!("fault.{kind:?}"), &opts, |rng| op_case(kind, rng)).passed
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clean_build_passes_quick_suite() {
        let opts = SelfCheckOptions {
            instances: 3,
            ..Default::default()
        };
        let report = run(&opts);
        assert!(report.passed(), "{}", report.to_text());
        let ops = report.checks.iter().filter(|c| c.name.starts_with("grad.op.")).count();
        assert_eq!(ops, OpKind::DIFFERENTIABLE.len());
    }

    #[test]
    fn sign_flips_are_detected() {
        for kind in [OpKind::Tanh, OpKind::SegmentSoftmax, OpKind::SpMM] {
            assert!(fault_detected(kind, 3), "{kind:?}");
        }
    }

    #[test]
    fn random_graphs_are_connected_and_cover_relations() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let g = random_graph(10, 4, 15, &mut rng);
            let used: HashSet<usize> = g.triples().iter().map(|t| t.relation).collect();
            assert_eq!(used.len(), 4);
            assert_eq!(g.triples().len(), 15);
        }
    }
}
