//! Sound-word co-occurrence network and its hierarchical clustering.
//!
//! The pipeline is: [`build_cooccurrence`] → [`infomap_partition`] (greedy
//! two-level map equation) → [`louvain_refine`] on oversized communities →
//! [`apply_merge`] with a declarative merge/label file.

mod graph;
mod louvain;
mod mapeq;
mod merge;

pub use graph::{build_cooccurrence, build_cooccurrence_with, CooccurrenceGraph, Graph, Partition};
pub use louvain::{
    louvain, louvain_refine, modularity, HierarchicalPartition, LouvainResult,
    DEFAULT_SIZE_THRESHOLD,
};
pub use mapeq::{infomap_partition, map_equation, MOVE_THRESHOLD};
pub use merge::{apply_merge, parse_merge_map, MergeMap};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("graph has no nodes")]
    EmptyGraph,
    #[error("graph has no edges")]
    NoEdges,
    #[error("partition covers {got} nodes, graph has {expected}")]
    PartitionSize { expected: usize, got: usize },
    #[error("merge map line {line}: {reason}")]
    BadMergeMap { line: usize, reason: String },
    #[error("merge map names community `{0}`, which does not exist")]
    UnknownCommunity(String),
    #[error("merge map target `{0}` does not exist")]
    MergeTargetMissing(String),
    #[error("merge map contains a cycle through `{0}`")]
    MergeCycle(String),
}

/// Normalized mutual information `2·I(X;Y) / (H(X) + H(Y))` between two
/// labelings of the same items. Two single-cluster labelings score 1.
pub fn normalized_mutual_information(a: &[usize], b: &[usize]) -> f64 {
    use std::collections::HashMap;
    assert_eq!(a.len(), b.len(), "labelings must cover the same items");
    let n = a.len() as f64;
    let mut ca: HashMap<usize, f64> = HashMap::new();
    let mut cb: HashMap<usize, f64> = HashMap::new();
    let mut joint: HashMap<(usize, usize), f64> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *ca.entry(x).or_default() += 1.0;
        *cb.entry(y).or_default() += 1.0;
        *joint.entry((x, y)).or_default() += 1.0;
    }
    let entropy = |m: &HashMap<usize, f64>| -> f64 {
        m.values().map(|&c| -(c / n) * (c / n).ln()).sum()
    };
    let (ha, hb) = (entropy(&ca), entropy(&cb));
    if ha + hb == 0.0 {
        return 1.0;
    }
    let mi: f64 = joint
        .iter()
        .map(|(&(x, y), &c)| {
            let p = c / n;
            p * (p / ((ca[&x] / n) * (cb[&y] / n))).ln()
        })
        .sum();
    (2.0 * mi / (ha + hb)).clamp(0.0, 1.0)
}
