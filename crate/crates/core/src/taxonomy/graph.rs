use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::GraphError;
use crate::ingest::PhotoRecord;
use crate::lexicon::{normalize, Lexicon};
use crate::par::Exec;

/// Undirected weighted graph. Self-loops are kept apart from the adjacency
/// lists; they only appear in aggregated graphs.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    adj: Vec<Vec<(usize, f64)>>,
    self_loops: Vec<f64>,
}

impl Graph {
    /// Builds from an edge list, summing repeated edges. `(i, i, w)` adds a self-loop.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Self {
        let mut maps: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n];
        let mut self_loops = vec![0.0; n];
        for (i, j, w) in edges {
            if i == j {
                self_loops[i] += w;
            } else {
                *maps[i].entry(j).or_default() += w;
                *maps[j].entry(i).or_default() += w;
            }
        }
        Graph {
            adj: maps.into_iter().map(|m| m.into_iter().collect()).collect(),
            self_loops,
        }
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    /// Neighbors other than the node itself, sorted by id.
    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.adj[i]
    }

    pub fn self_loop(&self, i: usize) -> f64 {
        self.self_loops[i]
    }

    /// Weighted degree; a self-loop counts twice.
    pub fn degree(&self, i: usize) -> f64 {
        self.adj[i].iter().map(|e| e.1).sum::<f64>() + 2.0 * self.self_loops[i]
    }

    /// Total edge weight `m` (each undirected edge once).
    pub fn total_weight(&self) -> f64 {
        let between: f64 = self.adj.iter().flatten().map(|e| e.1).sum();
        between / 2.0 + self.self_loops.iter().sum::<f64>()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
            + self.self_loops.iter().filter(|&&w| w != 0.0).count()
    }

    /// Edges `(i, j, w)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(i, nb)| nb.iter().filter(move |e| e.0 > i).map(move |&(j, w)| (i, j, w)))
    }

    /// Subgraph induced by `nodes`; node `k` of the result is `nodes[k]`.
    pub fn induced(&self, nodes: &[usize]) -> Graph {
        let local: HashMap<usize, usize> = nodes.iter().enumerate().map(|(k, &v)| (v, k)).collect();
        let mut edges = Vec::new();
        for (k, &v) in nodes.iter().enumerate() {
            for &(u, w) in &self.adj[v] {
                if let Some(&l) = local.get(&u) {
                    if l > k {
                        edges.push((k, l, w));
                    }
                }
            }
            if self.self_loops[v] != 0.0 {
                edges.push((k, k, self.self_loops[v]));
            }
        }
        Graph::from_edges(nodes.len(), edges)
    }

    /// One node per community; internal weight becomes a self-loop.
    pub fn aggregate(&self, partition: &Partition) -> Graph {
        let mut edges = Vec::new();
        for (i, nb) in self.adj.iter().enumerate() {
            let ci = partition.community(i);
            for &(j, w) in nb {
                if j > i {
                    edges.push((ci, partition.community(j), w));
                }
            }
            if self.self_loops[i] != 0.0 {
                edges.push((ci, ci, self.self_loops[i]));
            }
        }
        Graph::from_edges(partition.community_count(), edges)
    }
}

/// Node → community, ids contiguous from 0 and numbered in order of each
/// community's lowest node.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Partition {
    assignment: Vec<usize>,
    count: usize,
}

impl Partition {
    /// Relabels arbitrary community labels into canonical form.
    pub fn from_labels<T: Eq + std::hash::Hash + Copy>(labels: &[T]) -> Self {
        let mut ids = HashMap::new();
        let assignment = labels
            .iter()
            .map(|l| {
                let next = ids.len();
                *ids.entry(*l).or_insert(next)
            })
            .collect();
        Partition {
            assignment,
            count: ids.len(),
        }
    }

    pub fn singletons(n: usize) -> Self {
        Partition {
            assignment: (0..n).collect(),
            count: n,
        }
    }

    pub fn single(n: usize) -> Self {
        Partition {
            assignment: vec![0; n],
            count: usize::from(n > 0),
        }
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn community(&self, node: usize) -> usize {
        self.assignment[node]
    }

    pub fn community_count(&self) -> usize {
        self.count
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    /// Members of each community, ascending.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.count];
        for (node, &c) in self.assignment.iter().enumerate() {
            out[c].push(node);
        }
        out
    }

    pub(crate) fn check(&self, graph: &Graph) -> Result<(), GraphError> {
        if self.len() != graph.node_count() {
            return Err(GraphError::PartitionSize {
                expected: graph.node_count(),
                got: self.len(),
            });
        }
        Ok(())
    }
}

/// Word co-occurrence network: nodes are sound words, edge weights count the
/// photos tagged with both words.
#[derive(Debug, Clone, PartialEq)]
pub struct CooccurrenceGraph {
    /// Node labels, sorted.
    pub words: Vec<String>,
    /// `(i, j, photos)` with `i < j`, sorted.
    pub edges: Vec<(usize, usize, u64)>,
}

impl CooccurrenceGraph {
    pub fn graph(&self) -> Graph {
        Graph::from_edges(
            self.words.len(),
            self.edges.iter().map(|&(i, j, w)| (i, j, w as f64)),
        )
    }

    pub fn weight(&self, a: &str, b: &str) -> u64 {
        let (Ok(i), Ok(j)) = (
            self.words.binary_search_by(|w| w.as_str().cmp(a)),
            self.words.binary_search_by(|w| w.as_str().cmp(b)),
        ) else {
            return 0;
        };
        let key = (i.min(j), i.max(j));
        self.edges
            .binary_search_by(|e| (e.0, e.1).cmp(&key))
            .map(|k| self.edges[k].2)
            .unwrap_or(0)
    }
}

pub fn build_cooccurrence(photos: &[PhotoRecord], sound_terms: &Lexicon) -> CooccurrenceGraph {
    build_cooccurrence_with(photos, sound_terms, Exec::default())
}

/// Each photo adds 1 to every unordered pair of distinct sound words among
/// its normalized tags; repeats within a photo count once. Nodes are the
/// sound words found on at least one photo.
pub fn build_cooccurrence_with(
    photos: &[PhotoRecord],
    sound_terms: &Lexicon,
    exec: Exec,
) -> CooccurrenceGraph {
    let terms = sound_terms.terms();
    let index: HashMap<&str, u32> = terms.iter().enumerate().map(|(i, t)| (*t, i as u32)).collect();
    let partials = exec.map_chunks(photos, 4096, |chunk| {
        let mut seen = BTreeSet::new();
        let mut pairs: HashMap<(u32, u32), u64> = HashMap::new();
        for photo in chunk {
            let words: Vec<u32> = photo
                .tags
                .iter()
                .filter_map(|t| normalize(t))
                .filter_map(|t| index.get(t.as_str()).copied())
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            for (k, &a) in words.iter().enumerate() {
                seen.insert(a);
                for &b in &words[k + 1..] {
                    *pairs.entry((a, b)).or_default() += 1;
                }
            }
        }
        (seen, pairs)
    });
    let mut seen = BTreeSet::new();
    let mut pairs: BTreeMap<(u32, u32), u64> = BTreeMap::new();
    for (s, p) in partials {
        seen.extend(s);
        for (k, w) in p {
            *pairs.entry(k).or_default() += w;
        }
    }
    // Terms are sorted, so remapping the seen subset keeps words sorted.
    let remap: HashMap<u32, usize> = seen.iter().enumerate().map(|(k, &t)| (t, k)).collect();
    CooccurrenceGraph {
        words: seen.iter().map(|&t| terms[t as usize].to_string()).collect(),
        edges: pairs
            .into_iter()
            .map(|((a, b), w)| (remap[&a], remap[&b], w))
            .collect(),
    }
}
