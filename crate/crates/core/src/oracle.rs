//! Naive loop implementations used as reference oracles for the tape-based
//! operations. Deliberately written without the tape, without gathers and
//! without shared helpers from the model code.

use crate::eval::manhattan;

pub type Rows = Vec<Vec<f64>>;

fn lrelu(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        slope * x
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn cat(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut v = a.to_vec();
    v.extend_from_slice(b);
    v
}

pub fn segment_sum(rows: &[Vec<f64>], ids: &[usize], n: usize, width: usize) -> Rows {
    let mut out = vec![vec![0.0; width]; n];
    for (s, acc) in out.iter_mut().enumerate() {
        for (row, &id) in rows.iter().zip(ids) {
            if id == s {
                for (a, v) in acc.iter_mut().zip(row) {
                    *a += v;
                }
            }
        }
    }
    out
}

pub fn segment_softmax(logits: &[f64], ids: &[usize], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; logits.len()];
    for s in 0..n {
        let members: Vec<usize> = (0..logits.len()).filter(|&i| ids[i] == s).collect();
        let m = members.iter().map(|&i| logits[i]).fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = members.iter().map(|&i| (logits[i] - m).exp()).sum();
        for &i in &members {
            out[i] = (logits[i] - m).exp() / z;
        }
    }
    out
}

/// Mean of `x_h ‖ x_t` over the triples of each relation.
pub fn global_relation(x: &[Vec<f64>], triples: &[(usize, usize, usize)], num_relations: usize) -> Rows {
    let d = x[0].len();
    (0..num_relations)
        .map(|r| {
            let mut acc = vec![0.0; 2 * d];
            let mut count = 0.0;
            for &(h, rel, t) in triples {
                if rel == r {
                    for c in 0..d {
                        acc[c] += x[h][c];
                        acc[d + c] += x[t][c];
                    }
                    count += 1.0;
                }
            }
            acc.iter().map(|v| v / count).collect()
        })
        .collect()
}

/// Pooled `Σ α·value` per group, α the softmax of `LReLU(a·(q ‖ k))`.
fn grouped_attention(
    query: &[Vec<f64>],
    key: &[Vec<f64>],
    values: &[Vec<f64>],
    a: &[f64],
    groups: &[usize],
    num_groups: usize,
    slope: f64,
) -> Rows {
    let width = values[0].len();
    let mut out = vec![vec![0.0; width]; num_groups];
    for (g, row) in out.iter_mut().enumerate() {
        let members: Vec<usize> = (0..groups.len()).filter(|&i| groups[i] == g).collect();
        let scores: Vec<f64> = members
            .iter()
            .map(|&i| lrelu(dot(a, &cat(&query[i], &key[i])), slope))
            .collect();
        let m = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = scores.iter().map(|s| (s - m).exp()).sum();
        for (k, &i) in members.iter().enumerate() {
            let w = (scores[k] - m).exp() / z;
            for c in 0..width {
                row[c] += w * values[i][c];
            }
        }
    }
    out
}

/// Relation-grouped attention with a leaky-ReLU output.
pub fn role_aware_attention(
    query: &[Vec<f64>],
    key: &[Vec<f64>],
    values: &[Vec<f64>],
    a: &[f64],
    relations: &[usize],
    num_relations: usize,
    slope: f64,
) -> Rows {
    grouped_attention(query, key, values, a, relations, num_relations, slope)
        .into_iter()
        .map(|r| r.into_iter().map(|v| lrelu(v, slope)).collect())
        .collect()
}

/// `(type_enhanced, semantic_enhanced)` with ReLU outputs.
pub fn mutual_attention(
    semantic: &[Vec<f64>],
    type_proj: &[Vec<f64>],
    a_sem_type: &[f64],
    a_type_sem: &[f64],
    relations: &[usize],
    num_relations: usize,
    slope: f64,
) -> (Rows, Rows) {
    let relu = |rows: Rows| -> Rows { rows.into_iter().map(|r| r.into_iter().map(|v| v.max(0.0)).collect()).collect() };
    let t = grouped_attention(semantic, type_proj, semantic, a_sem_type, relations, num_relations, slope);
    let s = grouped_attention(type_proj, semantic, type_proj, a_type_sem, relations, num_relations, slope);
    (relu(t), relu(s))
}

/// Residual update of every entity over the triples where it is listed in
/// `members` (the heads or the tails).
pub fn role_enhance(x: &[Vec<f64>], proj: &[Vec<f64>], members: &[usize], a: &[f64], slope: f64) -> Rows {
    x.iter()
        .enumerate()
        .map(|(e, xe)| {
            let mine: Vec<usize> = (0..members.len()).filter(|&t| members[t] == e).collect();
            if mine.is_empty() {
                return xe.clone();
            }
            let scores: Vec<f64> = mine.iter().map(|&t| lrelu(dot(a, &cat(&proj[t], xe)), slope)).collect();
            let m = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = scores.iter().map(|s| (s - m).exp()).sum();
            let mut pooled = vec![0.0; xe.len()];
            for (k, &t) in mine.iter().enumerate() {
                let w = (scores[k] - m).exp() / z;
                for c in 0..xe.len() {
                    pooled[c] += w * proj[t][c];
                }
            }
            xe.iter().zip(pooled).map(|(v, p)| v + p.max(0.0)).collect()
        })
        .collect()
}

/// `x_i ‖ ReLU(Σ_j α_ij x_j)` over each entity's neighbor list.
pub fn neighbor_reaggregate(x: &[Vec<f64>], neighbors: &[Vec<usize>], a: &[f64], slope: f64) -> Rows {
    x.iter()
        .enumerate()
        .map(|(i, xi)| {
            let mut pooled = vec![0.0; xi.len()];
            let list = &neighbors[i];
            if !list.is_empty() {
                let scores: Vec<f64> = list.iter().map(|&j| lrelu(dot(a, &cat(xi, &x[j])), slope)).collect();
                let m = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let z: f64 = scores.iter().map(|s| (s - m).exp()).sum();
                for (k, &j) in list.iter().enumerate() {
                    let w = (scores[k] - m).exp() / z;
                    for c in 0..xi.len() {
                        pooled[c] += w * x[j][c];
                    }
                }
            }
            cat(xi, &pooled.iter().map(|v| v.max(0.0)).collect::<Vec<_>>())
        })
        .collect()
}

/// Ranks from a fully sorted distance list; on equal distance the true
/// candidate sorts last.
pub fn sorted_ranks(pairs: &[(usize, usize)], f1: &[Vec<f64>], f2: &[Vec<f64>]) -> Vec<usize> {
    let pool: Vec<usize> = pairs.iter().map(|p| p.1).collect();
    pairs
        .iter()
        .map(|&(q, truth)| {
            let mut d: Vec<(f64, bool)> = pool.iter().map(|&c| (manhattan(&f1[q], &f2[c]), c == truth)).collect();
            d.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
            d.iter().position(|e| e.1).expect("truth in pool") + 1
        })
        .collect()
}

/// `(hits@1, hits@10, mrr)` from [`sorted_ranks`].
pub fn metrics(pairs: &[(usize, usize)], f1: &[Vec<f64>], f2: &[Vec<f64>]) -> (f64, f64, f64) {
    let ranks = sorted_ranks(pairs, f1, f2);
    let n = ranks.len() as f64;
    let h = |k: usize| ranks.iter().filter(|&&r| r <= k).count() as f64 / n;
    (h(1), h(10), ranks.iter().map(|&r| 1.0 / r as f64).sum::<f64>() / n)
}

pub fn max_abs_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    assert_eq!(a.len(), b.len(), "row count");
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| {
            assert_eq!(x.len(), y.len(), "row width");
            x.iter().zip(y).map(|(u, v)| (u - v).abs())
        })
        .fold(0.0, f64::max)
}
