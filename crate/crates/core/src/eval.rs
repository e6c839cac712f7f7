//! Ranking evaluation: Hits@k and MRR under Manhattan distance.
//!
//! Ties are broken pessimistically: a candidate at exactly the true
//! candidate's distance counts as closer, so reported metrics are lower
//! bounds and independent of candidate order.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::dataset::{AlignmentTask, SeedPair};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub fn manhattan(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| (a - b).abs()).sum()
}

/// `Σ|u_i − v_i|`, checking widths.
pub fn manhattan_distance(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::shape("manhattan_distance", &[u.len()], &[v.len()]));
    }
    Ok(manhattan(u, v))
}

/// `1 +` the number of other candidates at distance `<=` the true one.
pub fn rank_candidates(query: &[f64], candidates: &[&[f64]], true_index: usize) -> Result<usize> {
    if true_index >= candidates.len() {
        return Err(Error::Eval(format!(
            "true index {true_index} outside candidate set of {}",
            candidates.len()
        )));
    }
    let target = manhattan(query, candidates[true_index]);
    let closer = candidates
        .iter()
        .enumerate()
        .filter(|&(i, c)| i != true_index && manhattan(query, c) <= target)
        .count();
    Ok(closer + 1)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CandidatePool {
    /// Target-side entities of the test pairs.
    #[default]
    TestTargets,
    /// Every entity of the target graph.
    AllEntities,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Direction {
    #[default]
    G1ToG2,
    /// Both directions, metrics averaged over all queries of both.
    Bidirectional,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalOptions {
    pub ks: Vec<usize>,
    pub pool: CandidatePool,
    pub direction: Direction,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            ks: vec![1, 10],
            pool: CandidatePool::TestTargets,
            direction: Direction::G1ToG2,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QueryRank {
    pub query: usize,
    pub truth: usize,
    pub rank: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub hits_at: BTreeMap<usize, f64>,
    pub mrr: f64,
    pub ranks: Vec<QueryRank>,
    pub direction: Direction,
}

impl EvalReport {
    pub fn hits(&self, k: usize) -> f64 {
        self.hits_at.get(&k).copied().unwrap_or(f64::NAN)
    }

    /// One `metric\tvalue` line per metric.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.hits_at {
            writeln!(s, "hits@{k}\t{v}").expect("string write");
        }
        writeln!(s, "mrr\t{}", self.mrr).expect("string write");
        writeln!(s, "queries\t{}", self.ranks.len()).expect("string write");
        s
    }

    /// `query_id\ttrue_id\trank` per query.
    pub fn ranks_text(&self) -> String {
        self.ranks.iter().fold(String::new(), |mut s, r| {
            writeln!(s, "{}\t{}\t{}", r.query, r.truth, r.rank).expect("string write");
            s
        })
    }
}

fn rank_direction(
    pairs: &[SeedPair],
    queries: &Tensor,
    targets: &Tensor,
    pool: CandidatePool,
) -> Result<Vec<QueryRank>> {
    let pool_ids: Vec<usize> = match pool {
        CandidatePool::TestTargets => pairs.iter().map(|&(_, b)| b).collect(),
        CandidatePool::AllEntities => (0..targets.rows()).collect(),
    };
    let mut slot = vec![usize::MAX; targets.rows()];
    for (i, &id) in pool_ids.iter().enumerate() {
        slot[id] = i;
    }
    let candidates: Vec<&[f64]> = pool_ids.iter().map(|&id| targets.row(id)).collect();
    pairs
        .iter()
        .map(|&(q, t)| {
            let rank = rank_candidates(queries.row(q), &candidates, slot[t])?;
            Ok(QueryRank {
                query: q,
                truth: t,
                rank,
            })
        })
        .collect()
}

fn summarize(ranks: Vec<QueryRank>, ks: &[usize], direction: Direction) -> EvalReport {
    let n = ranks.len() as f64;
    let hits_at = ks
        .iter()
        .map(|&k| (k, ranks.iter().filter(|r| r.rank <= k).count() as f64 / n))
        .collect();
    let mrr = ranks.iter().map(|r| 1.0 / r.rank as f64).sum::<f64>() / n;
    EvalReport {
        hits_at,
        mrr,
        ranks,
        direction,
    }
}

/// Metrics for `pairs` given final embeddings of both graphs.
pub fn evaluate_pairs(pairs: &[SeedPair], f1: &Tensor, f2: &Tensor, opts: &EvalOptions) -> Result<EvalReport> {
    if pairs.is_empty() {
        return Err(Error::Eval("empty test set".into()));
    }
    if f1.cols() != f2.cols() {
        return Err(Error::shape("evaluate", f1.shape(), f2.shape()));
    }
    let mut ranks = rank_direction(pairs, f1, f2, opts.pool)?;
    if opts.direction == Direction::Bidirectional {
        let reversed: Vec<SeedPair> = pairs.iter().map(|&(a, b)| (b, a)).collect();
        ranks.extend(rank_direction(&reversed, f2, f1, opts.pool)?);
    }
    Ok(summarize(ranks, &opts.ks, opts.direction))
}

pub fn evaluate(task: &AlignmentTask, f1: &Tensor, f2: &Tensor, opts: &EvalOptions) -> Result<EvalReport> {
    if f1.rows() != task.g1.num_entities() || f2.rows() != task.g2.num_entities() {
        return Err(Error::Eval(format!(
            "embedding rows {}/{} do not match entity counts {}/{}",
            f1.rows(),
            f2.rows(),
            task.g1.num_entities(),
            task.g2.num_entities()
        )));
    }
    evaluate_pairs(&task.seeds_test, f1, f2, opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manhattan_examples() {
        assert_eq!(manhattan_distance(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(manhattan_distance(&[0.0, 0.0], &[1.0, -2.0]).unwrap(), 3.0);
        assert!(manhattan_distance(&[0.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn rank_unique_nearest_and_ties() {
        let c: Vec<Vec<f64>> = vec![vec![0.0], vec![5.0], vec![9.0]];
        let refs: Vec<&[f64]> = c.iter().map(Vec::as_slice).collect();
        assert_eq!(rank_candidates(&[0.1], &refs, 0).unwrap(), 1);
        assert_eq!(rank_candidates(&[9.0], &refs, 0).unwrap(), 3);
        assert!(rank_candidates(&[0.0], &refs, 3).is_err());

        let eq: Vec<Vec<f64>> = (0..10).map(|i| vec![if i % 2 == 0 { 1.0 } else { -1.0 }]).collect();
        let refs: Vec<&[f64]> = eq.iter().map(Vec::as_slice).collect();
        assert_eq!(rank_candidates(&[0.0], &refs, 4).unwrap(), 10);
    }

    #[test]
    fn perfect_and_adversarial() {
        let m = 5;
        let f: Tensor = Tensor::from_rows(&(0..m).map(|i| vec![i as f64 * 10.0]).collect::<Vec<_>>()).unwrap();
        let pairs: Vec<SeedPair> = (0..m).map(|i| (i, i)).collect();
        let r = evaluate_pairs(&pairs, &f, &f, &EvalOptions::default()).unwrap();
        assert_eq!((r.hits(1), r.hits(10), r.mrr), (1.0, 1.0, 1.0));

        // query 0 sits at 0 and its truth (target 0) is placed farthest away
        let q = Tensor::from_rows(&[vec![0.0]]).unwrap();
        let t = Tensor::from_rows(&[vec![100.0], vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        let pairs = [(0usize, 0usize)];
        let opts = EvalOptions { pool: CandidatePool::AllEntities, ..Default::default() };
        let r = evaluate_pairs(&pairs, &q, &t, &opts).unwrap();
        assert_eq!(r.hits(1), 0.0);
        assert_eq!(r.mrr, 1.0 / 4.0);
    }

    #[test]
    fn empty_test_set_is_an_error() {
        let f = Tensor::zeros(&[1, 1]);
        assert!(evaluate_pairs(&[], &f, &f, &EvalOptions::default()).is_err());
    }

    #[test]
    fn report_text_lines() {
        let f = Tensor::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        let r = evaluate_pairs(&[(0, 0), (1, 1)], &f, &f, &EvalOptions::default()).unwrap();
        assert_eq!(r.to_text(), "hits@1\t1\nhits@10\t1\nmrr\t1\nqueries\t2\n");
        assert_eq!(r.ranks_text().lines().count(), 2);
    }
}
