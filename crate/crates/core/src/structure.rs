//! Highway-GCN structure encoder.
//!
//! Each layer propagates embeddings over the normalized adjacency with no
//! weight matrix, then mixes the result with the layer input through a
//! sigmoid gate. The gate weights are the only learned parameters.

use std::sync::Arc;

use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::params::{uniform, Bound, ParamSet};
use crate::tensor::{SparseMatrix, Tensor};

pub fn gate_weight_name(layer: usize) -> String {
    format!("gcn.{layer}.w")
}

pub fn gate_bias_name(layer: usize) -> String {
    format!("gcn.{layer}.b")
}

/// Adds per-layer gate parameters `W ~ U(±sqrt(6/(2·d_e)))`, `b = 0`.
pub fn init_params(params: &mut ParamSet, d_e: usize, depth: usize, rng: &mut ChaCha8Rng) {
    let bound = (6.0 / (2 * d_e) as f64).sqrt();
    for l in 0..depth {
        params.insert(gate_weight_name(l), uniform(&[d_e, d_e], bound, rng));
        params.insert(gate_bias_name(l), Tensor::zeros(&[d_e]));
    }
}

/// `ReLU(Â X)`.
pub fn gcn_propagate(tape: &mut Tape, x: Var, adjacency: &Arc<SparseMatrix>) -> Result<Var> {
    let ax = tape.spmm(adjacency, x)?;
    Ok(tape.relu(ax))
}

/// `g·X_new + (1 − g)·X_old` with `g = σ(X_old W + b)`.
pub fn highway_combine(tape: &mut Tape, x_old: Var, x_new: Var, w: Var, b: Var) -> Result<Var> {
    if tape.shape(x_old) != tape.shape(x_new) {
        return Err(Error::shape("highway_combine", tape.shape(x_old), tape.shape(x_new)));
    }
    let xw = tape.matmul(x_old, w)?;
    let pre = tape.add(xw, b)?;
    let gate = tape.sigmoid(pre);
    let neg = tape.scale(gate, -1.0);
    let keep = tape.add_scalar(neg, 1.0);
    let carried = tape.mul(gate, x_new)?;
    let kept = tape.mul(keep, x_old)?;
    tape.add(carried, kept)
}

/// `depth` rounds of propagate-then-gate, sharing parameters across graphs.
pub fn encode(
    tape: &mut Tape,
    x: Var,
    adjacency: &Arc<SparseMatrix>,
    params: &Bound,
    depth: usize,
) -> Result<Var> {
    if depth == 0 {
        return Err(Error::Config("highway-GCN depth must be at least 1".into()));
    }
    let mut h = x;
    for l in 0..depth {
        let propagated = gcn_propagate(tape, h, adjacency)?;
        h = highway_combine(
            tape,
            h,
            propagated,
            params.var(&gate_weight_name(l)),
            params.var(&gate_bias_name(l)),
        )?;
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::{normalized_adjacency, Triple};

    #[test]
    fn zero_input_stays_zero() {
        let adj = Arc::new(normalized_adjacency(3, &[Triple::new(0, 0, 1), Triple::new(1, 0, 2)]).unwrap());
        let mut t = Tape::new();
        let x = t.constant(Tensor::zeros(&[3, 2]));
        let y = gcn_propagate(&mut t, x, &adj).unwrap();
        assert!(t.value(y).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_node_propagation_is_relu() {
        let adj = Arc::new(normalized_adjacency(1, &[]).unwrap());
        let mut t = Tape::new();
        let x = t.constant(Tensor::from_rows(&[vec![-1.5, 2.0]]).unwrap());
        let y = gcn_propagate(&mut t, x, &adj).unwrap();
        assert_eq!(t.value(y).data(), &[0.0, 2.0]);
    }

    #[test]
    fn path_graph_matches_dense_product() {
        let adj = Arc::new(normalized_adjacency(2, &[Triple::new(0, 0, 1)]).unwrap());
        let mut t = Tape::new();
        let x = t.constant(Tensor::from_rows(&[vec![1.0, -4.0], vec![3.0, 2.0]]).unwrap());
        let y = gcn_propagate(&mut t, x, &adj).unwrap();
        // Â = [[.5,.5],[.5,.5]]
        let want = Tensor::from_rows(&[vec![2.0, 0.0], vec![2.0, 0.0]]).unwrap();
        assert!(t.value(y).max_abs_diff(&want) < 1e-12);
    }

    #[test]
    fn equal_inputs_pass_through_gate() {
        let mut t = Tape::new();
        let x = t.constant(Tensor::from_rows(&[vec![0.3, -0.2], vec![1.0, 5.0]]).unwrap());
        let w = t.constant(Tensor::from_rows(&[vec![2.0, -1.0], vec![0.5, 3.0]]).unwrap());
        let b = t.constant(Tensor::vector(vec![0.1, -0.1]));
        let y = highway_combine(&mut t, x, x, w, b).unwrap();
        assert!(t.value(y).max_abs_diff(t.value(x)) < 1e-15);
    }

    #[test]
    fn saturated_gate_keeps_old() {
        let mut t = Tape::new();
        let old = t.constant(Tensor::from_rows(&[vec![0.3, -0.2]]).unwrap());
        let new = t.constant(Tensor::from_rows(&[vec![9.0, 7.0]]).unwrap());
        let w = t.constant(Tensor::zeros(&[2, 2]));
        let b = t.constant(Tensor::full(&[2], -50.0));
        let y = highway_combine(&mut t, old, new, w, b).unwrap();
        assert!(t.value(y).max_abs_diff(t.value(old)) < 1e-9);
    }

    #[test]
    fn depth_one_is_single_round() {
        let adj = Arc::new(normalized_adjacency(3, &[Triple::new(0, 0, 1), Triple::new(2, 0, 1)]).unwrap());
        let mut rng = rand::SeedableRng::seed_from_u64(3);
        let mut p = ParamSet::new();
        init_params(&mut p, 2, 1, &mut rng);
        let x0 = Tensor::from_rows(&[vec![1.0, 0.5], vec![-0.5, 2.0], vec![0.2, 0.2]]).unwrap();

        let mut t = Tape::new();
        let bound = p.bind(&mut t, false);
        let x = t.constant(x0.clone());
        let enc = encode(&mut t, x, &adj, &bound, 1).unwrap();

        let mut t2 = Tape::new();
        let bound2 = p.bind(&mut t2, false);
        let x = t2.constant(x0);
        let prop = gcn_propagate(&mut t2, x, &adj).unwrap();
        let manual = highway_combine(&mut t2, x, prop, bound2.var("gcn.0.w"), bound2.var("gcn.0.b")).unwrap();
        assert_eq!(t.value(enc), t2.value(manual));
    }
}
