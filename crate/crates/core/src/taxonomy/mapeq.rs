use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Graph, GraphError, Partition};

/// Smallest description-length gain (bits) that counts as an improvement.
pub const MOVE_THRESHOLD: f64 = 1e-10;

fn plogp(p: f64) -> f64 {
    if p > 0.0 {
        p * p.log2()
    } else {
        0.0
    }
}

/// Two-level map equation in bits, undirected flow `p_α = k_α / 2m`:
///
/// `L = plogp(Σq_i) − 2·Σ plogp(q_i) − Σ plogp(p_α) + Σ plogp(q_i + p_i)`
///
/// where `q_i` is the flow across module `i`'s boundary and `p_i` the flow
/// inside it. Disconnected components share one flow normalization.
pub fn map_equation(graph: &Graph, partition: &Partition) -> Result<f64, GraphError> {
    if graph.node_count() == 0 {
        return Err(GraphError::EmptyGraph);
    }
    partition.check(graph)?;
    let two_m = 2.0 * graph.total_weight();
    if two_m <= 0.0 {
        return Err(GraphError::NoEdges);
    }
    let k = partition.community_count();
    let mut exit = vec![0.0; k];
    let mut flow = vec![0.0; k];
    let mut node_term = 0.0;
    for a in 0..graph.node_count() {
        let p = graph.degree(a) / two_m;
        node_term += plogp(p);
        let c = partition.community(a);
        flow[c] += p;
        for &(b, w) in graph.neighbors(a) {
            if partition.community(b) != c {
                exit[c] += w / two_m;
            }
        }
    }
    let total_exit: f64 = exit.iter().sum();
    Ok(plogp(total_exit) - 2.0 * exit.iter().map(|&q| plogp(q)).sum::<f64>() - node_term
        + exit.iter().zip(&flow).map(|(&q, &p)| plogp(q + p)).sum::<f64>())
}

/// Flow view of one aggregation level: node visit rates, node exit rates and
/// per-edge flow between distinct nodes.
struct Level {
    flow: Vec<f64>,
    exit: Vec<f64>,
    adj: Vec<Vec<(usize, f64)>>,
}

impl Level {
    fn from_graph(graph: &Graph) -> Self {
        let two_m = 2.0 * graph.total_weight();
        let adj: Vec<Vec<(usize, f64)>> = (0..graph.node_count())
            .map(|a| graph.neighbors(a).iter().map(|&(b, w)| (b, w / two_m)).collect())
            .collect();
        Level {
            flow: (0..graph.node_count()).map(|a| graph.degree(a) / two_m).collect(),
            exit: adj.iter().map(|nb| nb.iter().map(|e| e.1).sum()).collect(),
            adj,
        }
    }

    fn len(&self) -> usize {
        self.flow.len()
    }

    fn aggregate(&self, modules: &Partition) -> Level {
        let g = Graph::from_edges(
            self.len(),
            self.adj
                .iter()
                .enumerate()
                .flat_map(|(a, nb)| nb.iter().filter(move |e| e.0 > a).map(move |&(b, w)| (a, b, w))),
        )
        .aggregate(modules);
        let k = modules.community_count();
        let mut flow = vec![0.0; k];
        for a in 0..self.len() {
            flow[modules.community(a)] += self.flow[a];
        }
        let adj: Vec<Vec<(usize, f64)>> = (0..k).map(|c| g.neighbors(c).to_vec()).collect();
        Level {
            flow,
            exit: adj.iter().map(|nb| nb.iter().map(|e| e.1).sum()).collect(),
            adj,
        }
    }
}

/// Module bookkeeping for incremental evaluation of the module-dependent
/// part of the map equation.
struct Modules {
    of: Vec<usize>,
    exit: Vec<f64>,
    flow: Vec<f64>,
    sum_exit: f64,
}

impl Modules {
    fn singletons(level: &Level) -> Self {
        Modules {
            of: (0..level.len()).collect(),
            exit: level.exit.clone(),
            flow: level.flow.clone(),
            sum_exit: level.exit.iter().sum(),
        }
    }

    /// Change in L when a node with (`node_exit`, `node_flow`) moves from
    /// `from` to `to`, given its edge flow into each.
    fn delta(&self, from: usize, to: usize, node_exit: f64, node_flow: f64, w_from: f64, w_to: f64) -> (f64, f64, f64) {
        let (ea, fa, eb, fb) = (self.exit[from], self.flow[from], self.exit[to], self.flow[to]);
        let na = (ea - node_exit + 2.0 * w_from).max(0.0);
        let nb = (eb + node_exit - 2.0 * w_to).max(0.0);
        let sum = (self.sum_exit - ea - eb + na + nb).max(0.0);
        let d = plogp(sum) - plogp(self.sum_exit)
            - 2.0 * (plogp(na) + plogp(nb) - plogp(ea) - plogp(eb))
            + plogp(na + fa - node_flow)
            + plogp(nb + fb + node_flow)
            - plogp(ea + fa)
            - plogp(eb + fb);
        (d, na, nb)
    }
}

/// Repeated passes of best single-node moves in seeded random order.
/// Returns the module of each node of the level.
fn optimize_level(level: &Level, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = level.len();
    let mut m = Modules::singletons(level);
    let mut order: Vec<usize> = (0..n).collect();
    let mut w_to = vec![0.0; n];
    let mut touched: Vec<usize> = Vec::new();
    loop {
        order.shuffle(rng);
        let mut moved = false;
        for &a in &order {
            let from = m.of[a];
            for &(b, w) in &level.adj[a] {
                let c = m.of[b];
                if w_to[c] == 0.0 {
                    touched.push(c);
                }
                w_to[c] += w;
            }
            touched.sort_unstable();
            touched.dedup();
            let w_from = w_to[from];
            let mut best: Option<(f64, usize, f64, f64)> = None;
            for &c in &touched {
                if c == from {
                    continue;
                }
                let (d, na, nb) = m.delta(from, c, level.exit[a], level.flow[a], w_from, w_to[c]);
                if best.is_none_or(|(bd, ..)| d < bd) {
                    best = Some((d, c, na, nb));
                }
            }
            for &c in &touched {
                w_to[c] = 0.0;
            }
            touched.clear();
            if let Some((d, to, na, nb)) = best {
                if d < -MOVE_THRESHOLD {
                    m.sum_exit = m.sum_exit - m.exit[from] - m.exit[to] + na + nb;
                    m.exit[from] = na;
                    m.exit[to] = nb;
                    m.flow[from] -= level.flow[a];
                    m.flow[to] += level.flow[a];
                    m.of[a] = to;
                    moved = true;
                }
            }
        }
        if !moved {
            return m.of;
        }
    }
}

/// Greedy minimization of [`map_equation`]: start from singletons, move
/// nodes one at a time to the neighboring module with the largest gain (ties
/// to the lowest module id), aggregate modules into nodes and repeat until no
/// move gains more than [`MOVE_THRESHOLD`] bits. The seed only fixes the
/// node visit order.
pub fn infomap_partition(graph: &Graph, seed: u64) -> Result<Partition, GraphError> {
    let n = graph.node_count();
    if n == 0 {
        return Err(GraphError::EmptyGraph);
    }
    if graph.total_weight() <= 0.0 {
        return Ok(Partition::singletons(n));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut level = Level::from_graph(graph);
    let mut of: Vec<usize> = (0..n).collect();
    loop {
        let modules = Partition::from_labels(&optimize_level(&level, &mut rng));
        if modules.community_count() == level.len() {
            break;
        }
        for c in of.iter_mut() {
            *c = modules.community(*c);
        }
        level = level.aggregate(&modules);
    }
    Ok(Partition::from_labels(&of))
}
