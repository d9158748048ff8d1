use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Graph, GraphError, Partition};

/// Communities with more nodes than this are split by [`louvain_refine`].
pub const DEFAULT_SIZE_THRESHOLD: usize = 50;
const GAIN_EPS: f64 = 1e-12;

/// Weighted modularity `Q = Σ_c [L_c/m − (d_c/2m)²]`, where `L_c` is the
/// weight inside community `c` and `d_c` its total degree.
pub fn modularity(graph: &Graph, partition: &Partition) -> Result<f64, GraphError> {
    partition.check(graph)?;
    let m = graph.total_weight();
    if m <= 0.0 {
        return Err(GraphError::NoEdges);
    }
    let k = partition.community_count();
    let mut inside = vec![0.0; k];
    let mut degree = vec![0.0; k];
    for a in 0..graph.node_count() {
        let c = partition.community(a);
        degree[c] += graph.degree(a);
        inside[c] += graph.self_loop(a);
        for &(b, w) in graph.neighbors(a) {
            if b > a && partition.community(b) == c {
                inside[c] += w;
            }
        }
    }
    Ok(inside
        .iter()
        .zip(&degree)
        .map(|(l, d)| l / m - (d / (2.0 * m)).powi(2))
        .sum())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LouvainResult {
    pub partition: Partition,
    /// Modularity of the singleton start, then after every accepted move,
    /// tracked incrementally from the move gains.
    pub q_history: Vec<f64>,
}

/// Local moves in seeded random order; a node joins the neighboring
/// community with the largest strictly positive modularity gain (ties to the
/// lowest id). Returns the community label of each node.
/// `q` is the modularity of the singleton partition of `graph` and is
/// advanced by the gain of every accepted move.
fn local_moves(graph: &Graph, rng: &mut ChaCha8Rng, q: &mut f64, q_history: &mut Vec<f64>) -> Vec<usize> {
    let n = graph.node_count();
    let two_m = 2.0 * graph.total_weight();
    let k: Vec<f64> = (0..n).map(|a| graph.degree(a)).collect();
    let mut of: Vec<usize> = (0..n).collect();
    let mut tot = k.clone();
    let mut w_to = vec![0.0; n];
    let mut touched = Vec::new();
    let mut order: Vec<usize> = (0..n).collect();
    loop {
        order.shuffle(rng);
        let mut moved = false;
        for &a in &order {
            let from = of[a];
            for &(b, w) in graph.neighbors(a) {
                let c = of[b];
                if w_to[c] == 0.0 {
                    touched.push(c);
                }
                w_to[c] += w;
            }
            touched.sort_unstable();
            touched.dedup();
            tot[from] -= k[a];
            let gain = |c: usize, w: f64| w - tot[c] * k[a] / two_m;
            let stay = gain(from, w_to[from]);
            let mut best = (stay, from);
            let mut best_other: Option<(f64, usize)> = None;
            for &c in &touched {
                if c == from {
                    continue;
                }
                let g = gain(c, w_to[c]);
                if best_other.is_none_or(|(bg, _)| g > bg) {
                    best_other = Some((g, c));
                }
            }
            if let Some((g, c)) = best_other {
                if g > stay + GAIN_EPS {
                    best = (g, c);
                    *q += (g - stay) / (0.5 * two_m);
                    q_history.push(*q);
                }
            }
            tot[best.1] += k[a];
            if best.1 != from {
                of[a] = best.1;
                moved = true;
            }
            for &c in &touched {
                w_to[c] = 0.0;
            }
            touched.clear();
        }
        if !moved {
            return of;
        }
    }
}

/// Multi-level Louvain: local moves, then aggregation of communities into
/// nodes, repeated until a level makes no merge.
pub fn louvain(graph: &Graph, seed: u64) -> Result<LouvainResult, GraphError> {
    let n = graph.node_count();
    if n == 0 {
        return Err(GraphError::EmptyGraph);
    }
    if graph.total_weight() <= 0.0 {
        return Err(GraphError::NoEdges);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Aggregation preserves modularity, so the tracked value carries across levels.
    let mut q = modularity(graph, &Partition::singletons(n))?;
    let mut q_history = vec![q];
    let mut level = graph.clone();
    let mut of: Vec<usize> = (0..n).collect();
    loop {
        let moves = Partition::from_labels(&local_moves(&level, &mut rng, &mut q, &mut q_history));
        if moves.community_count() == level.node_count() {
            break;
        }
        for c in of.iter_mut() {
            *c = moves.community(*c);
        }
        level = level.aggregate(&moves);
    }
    Ok(LouvainResult {
        partition: Partition::from_labels(&of),
        q_history,
    })
}

/// Top-level partition with optional sub-partitions of its communities.
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchicalPartition {
    pub top: Partition,
    /// Members of each top community, ascending.
    members: Vec<Vec<usize>>,
    /// Sub-partition of each top community over its members, if it was split.
    children: Vec<Option<Partition>>,
}

impl HierarchicalPartition {
    pub fn flat(top: Partition) -> Self {
        let members = top.members();
        let children = vec![None; members.len()];
        HierarchicalPartition {
            top,
            members,
            children,
        }
    }

    /// Attaches a sub-partition over the members of `community`.
    pub fn set_children(&mut self, community: usize, sub: Partition) {
        assert_eq!(sub.len(), self.members[community].len(), "sub-partition must cover the members");
        self.children[community] = (sub.community_count() > 1).then_some(sub);
    }

    pub fn children(&self, community: usize) -> Option<&Partition> {
        self.children[community].as_ref()
    }

    pub fn members(&self, community: usize) -> &[usize] {
        &self.members[community]
    }

    /// Community ids from the top level down.
    pub fn path(&self, node: usize) -> Vec<usize> {
        let top = self.top.community(node);
        match &self.children[top] {
            Some(sub) => {
                let local = self.members[top].binary_search(&node).expect("node is a member");
                vec![top, sub.community(local)]
            }
            None => vec![top],
        }
    }

    /// Community keys from the top down: `c<top>` then `c<top>.<sub>`.
    pub fn key_path(&self, node: usize) -> Vec<String> {
        let path = self.path(node);
        let mut keys = vec![format!("c{}", path[0])];
        if let Some(sub) = path.get(1) {
            keys.push(format!("c{}.{}", path[0], sub));
        }
        keys
    }

    /// Every community key, top-level keys first in id order, each followed by its children.
    pub fn keys(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (c, child) in self.children.iter().enumerate() {
            out.push(format!("c{c}"));
            if let Some(sub) = child {
                out.extend((0..sub.community_count()).map(|s| format!("c{c}.{s}")));
            }
        }
        out
    }
}

/// Splits every community with more than `size_threshold` nodes by running
/// [`louvain`] on its induced subgraph. Sub-communities become children of
/// the original community; communities at or below the threshold, and those
/// Louvain leaves whole, are kept as they are.
pub fn louvain_refine(
    graph: &Graph,
    partition: &Partition,
    size_threshold: usize,
    seed: u64,
) -> Result<HierarchicalPartition, GraphError> {
    partition.check(graph)?;
    let mut hp = HierarchicalPartition::flat(partition.clone());
    for c in 0..hp.members.len() {
        if hp.members[c].len() <= size_threshold {
            continue;
        }
        let sub = graph.induced(&hp.members[c]);
        if sub.total_weight() <= 0.0 {
            continue;
        }
        let result = louvain(&sub, seed.wrapping_add(c as u64))?;
        if result.partition.community_count() > 1 {
            hp.children[c] = Some(result.partition);
        }
    }
    Ok(hp)
}
