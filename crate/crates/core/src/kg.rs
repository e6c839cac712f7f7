//! Knowledge-graph data model, relation expansion and the symmetric
//! normalized adjacency used by the structure encoder.

use std::collections::{BTreeSet, HashSet};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::tensor::SparseMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    pub head: usize,
    pub relation: usize,
    pub tail: usize,
}

impl Triple {
    pub fn new(head: usize, relation: usize, tail: usize) -> Self {
        Triple {
            head,
            relation,
            tail,
        }
    }
}

/// `(E, R, T)` with dense local ids.
///
/// Construction rejects out-of-range ids, duplicate triples and entities
/// that appear in no triple.
#[derive(Clone, Debug, PartialEq)]
pub struct KnowledgeGraph {
    num_entities: usize,
    num_relations: usize,
    triples: Vec<Triple>,
    entity_names: Option<Vec<String>>,
}

impl KnowledgeGraph {
    pub fn new(
        num_entities: usize,
        num_relations: usize,
        triples: Vec<Triple>,
        entity_names: Option<Vec<String>>,
    ) -> Result<Self> {
        if let Some(names) = &entity_names {
            if names.len() != num_entities {
                return Err(Error::Graph(format!(
                    "{} entity names for {} entities",
                    names.len(),
                    num_entities
                )));
            }
        }
        let mut seen = HashSet::with_capacity(triples.len());
        let mut touched = vec![false; num_entities];
        for t in &triples {
            if t.head >= num_entities || t.tail >= num_entities {
                return Err(Error::Graph(format!(
                    "triple {t:?} references an entity outside 0..{num_entities}"
                )));
            }
            if t.relation >= num_relations {
                return Err(Error::Graph(format!(
                    "triple {t:?} references a relation outside 0..{num_relations}"
                )));
            }
            if !seen.insert(*t) {
                return Err(Error::Graph(format!("duplicate triple {t:?}")));
            }
            touched[t.head] = true;
            touched[t.tail] = true;
        }
        let isolated: Vec<usize> = (0..num_entities).filter(|&e| !touched[e]).collect();
        if !isolated.is_empty() {
            let shown: Vec<String> = isolated.iter().take(20).map(usize::to_string).collect();
            return Err(Error::Graph(format!(
                "{} isolated entities (in no triple): {}{}",
                isolated.len(),
                shown.join(", "),
                if isolated.len() > 20 { ", ..." } else { "" }
            )));
        }
        Ok(KnowledgeGraph {
            num_entities,
            num_relations,
            triples,
            entity_names,
        })
    }

    pub fn num_entities(&self) -> usize {
        self.num_entities
    }

    pub fn num_relations(&self) -> usize {
        self.num_relations
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn entity_names(&self) -> Option<&[String]> {
        self.entity_names.as_deref()
    }

    /// Undirected neighbor lists without self, each sorted and deduplicated.
    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut sets: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); self.num_entities];
        for t in &self.triples {
            if t.head != t.tail {
                sets[t.head].insert(t.tail);
                sets[t.tail].insert(t.head);
            }
        }
        sets.into_iter().map(|s| s.into_iter().collect()).collect()
    }

    /// True when the last relation id holds exactly one self-loop for every
    /// entity, which is the signature of an already expanded graph.
    fn looks_expanded(&self) -> bool {
        if self.num_relations == 0 {
            return false;
        }
        let last = self.num_relations - 1;
        let mut loops = vec![false; self.num_entities];
        let mut count = 0;
        for t in self.triples.iter().filter(|t| t.relation == last) {
            if t.head != t.tail {
                return false;
            }
            loops[t.head] = true;
            count += 1;
        }
        count == self.num_entities && loops.iter().all(|&b| b)
    }
}

/// A graph with original, reverse (`r + |R|`) and one shared self relation
/// (`2|R|`), plus its symmetric normalized adjacency.
#[derive(Clone, Debug)]
pub struct RelationExpandedGraph {
    base: KnowledgeGraph,
    expanded: Vec<Triple>,
    adjacency: Arc<SparseMatrix>,
}

impl RelationExpandedGraph {
    pub fn base(&self) -> &KnowledgeGraph {
        &self.base
    }

    pub fn num_entities(&self) -> usize {
        self.base.num_entities
    }

    /// `2·|R| + 1`.
    pub fn num_relations(&self) -> usize {
        2 * self.base.num_relations + 1
    }

    pub fn self_relation(&self) -> usize {
        2 * self.base.num_relations
    }

    pub fn triples(&self) -> &[Triple] {
        &self.expanded
    }

    pub fn adjacency(&self) -> &Arc<SparseMatrix> {
        &self.adjacency
    }
}

pub fn expand_relations(g: KnowledgeGraph) -> Result<RelationExpandedGraph> {
    if g.looks_expanded() {
        return Err(Error::Graph(
            "relation id collision: graph already carries a self relation on every entity".into(),
        ));
    }
    let r = g.num_relations;
    let mut expanded = Vec::with_capacity(2 * g.triples.len() + g.num_entities);
    expanded.extend_from_slice(&g.triples);
    expanded.extend(g.triples.iter().map(|t| Triple::new(t.tail, t.relation + r, t.head)));
    expanded.extend((0..g.num_entities).map(|e| Triple::new(e, 2 * r, e)));
    let adjacency = Arc::new(normalized_adjacency(g.num_entities, &expanded)?);
    Ok(RelationExpandedGraph {
        base: g,
        expanded,
        adjacency,
    })
}

/// `D̃^(−1/2) Ã D̃^(−1/2)` for `Ã = A + I`, where `A` is the 0/1 adjacency
/// of distinct entity pairs linked by any triple. Self triples and the
/// identity collapse to a single diagonal entry of weight 1.
pub fn normalized_adjacency(n: usize, triples: &[Triple]) -> Result<SparseMatrix> {
    let mut edges: BTreeSet<(usize, usize)> = (0..n).map(|i| (i, i)).collect();
    for t in triples {
        if t.head >= n || t.tail >= n {
            return Err(Error::Graph(format!("triple {t:?} outside 0..{n}")));
        }
        edges.insert((t.head, t.tail));
        edges.insert((t.tail, t.head));
    }
    let mut degree = vec![0.0f64; n];
    for &(i, _) in &edges {
        degree[i] += 1.0;
    }
    let inv_sqrt: Vec<f64> = degree.iter().map(|d| 1.0 / d.sqrt()).collect();
    SparseMatrix::from_triplets(
        n,
        n,
        edges.into_iter().map(|(i, j)| (i, j, inv_sqrt[i] * inv_sqrt[j])),
    )
}

pub fn build_normalized_adjacency(g: &RelationExpandedGraph) -> Arc<SparseMatrix> {
    Arc::clone(&g.adjacency)
}
