//! Nearest-neighbour graphs over word sets, their Laplacian spectra and the
//! spectral similarity Δ between two graphs.
//!
//! Δ is the sum of squared differences of the `k` largest Laplacian
//! eigenvalues, where `k` is the smaller of the two per-graph cut-offs. A
//! graph's cut-off is the smallest `k` whose top-`k` eigenvalues hold more
//! than 90% of its total spectral mass. Δ = 0 means the truncated spectra
//! coincide; larger values mean less similar graphs.

mod subgraph;
mod vf2;

use std::cmp::Ordering;
use std::collections::HashMap;

use serde::Serialize;

use crate::embeddings::EmbeddingSpace;
use crate::error::{Error, Result};
use crate::numerics::{dot, sym_eigenvalues, Matrix};

pub use subgraph::{sampled_subgraph_similarity, SampleConfig, SubgraphReport, SubgraphSample};
pub use vf2::{vf2_isomorphic, vf2_isomorphic_with_limit, DEFAULT_MAX_ISOMORPHISM_NODES};

/// Share of total spectral mass the retained eigenvalues must exceed.
pub const SPECTRAL_MASS_THRESHOLD: f64 = 0.9;

/// Undirected, unweighted simple graph over a labelled node list.
#[derive(Clone, Debug, PartialEq)]
pub struct NnGraph {
    nodes: Vec<String>,
    adjacency: Matrix,
}

impl NnGraph {
    pub fn from_edges(nodes: Vec<String>, edges: &[(usize, usize)]) -> Result<Self> {
        let n = nodes.len();
        let mut adjacency = Matrix::zeros(n, n);
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::InvalidConfig(format!("edge ({a}, {b}) out of range for {n} nodes")));
            }
            if a == b {
                return Err(Error::InvalidConfig(format!("self-loop on node {a}")));
            }
            adjacency.set(a, b, 1.0);
            adjacency.set(b, a, 1.0);
        }
        Ok(Self { nodes, adjacency })
    }

    pub fn from_adjacency(nodes: Vec<String>, adjacency: Matrix) -> Result<Self> {
        let n = nodes.len();
        if adjacency.rows() != n || adjacency.cols() != n {
            return Err(Error::DimensionMismatch {
                context: "adjacency vs node count".into(),
                expected: n,
                found: adjacency.rows(),
            });
        }
        for i in 0..n {
            if adjacency.get(i, i) != 0.0 {
                return Err(Error::InvalidConfig(format!("self-loop on node {i}")));
            }
            for j in 0..n {
                let v = adjacency.get(i, j);
                if (v != 0.0 && v != 1.0) || v != adjacency.get(j, i) {
                    return Err(Error::InvalidConfig(format!(
                        "adjacency must be symmetric 0/1, entry ({i}, {j}) = {v}"
                    )));
                }
            }
        }
        Ok(Self { nodes, adjacency })
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn adjacency(&self) -> &Matrix {
        &self.adjacency
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adjacency.get(a, b) != 0.0
    }

    pub fn edge_count(&self) -> usize {
        (0..self.node_count())
            .map(|i| ((i + 1)..self.node_count()).filter(|&j| self.has_edge(i, j)).count())
            .sum()
    }

    pub fn degree(&self, i: usize) -> usize {
        (0..self.node_count()).filter(|&j| self.has_edge(i, j)).count()
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.node_count()).filter(move |&j| self.has_edge(i, j))
    }

    /// Undirected edge list with `a < b`, in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.node_count();
        (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .filter(|&(i, j)| self.has_edge(i, j))
            .collect()
    }
}

/// Which words a node may pick its nearest neighbours from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NeighborScope {
    /// Neighbours are chosen among the graph's own nodes.
    #[default]
    NodeSet,
    /// Neighbours are chosen over the whole vocabulary; an edge is kept only
    /// when the chosen neighbour is itself a node. Nodes may end up isolated.
    FullVocabulary,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct GraphOptions {
    pub neighbors_per_node: usize,
    pub scope: NeighborScope,
}

impl Default for GraphOptions {
    fn default() -> Self {
        Self {
            neighbors_per_node: 1,
            scope: NeighborScope::NodeSet,
        }
    }
}

/// Top-`m` candidates by cosine, ties going to the more frequent word.
fn top_neighbors(candidates: impl Iterator<Item = (usize, f64)>, m: usize) -> Vec<usize> {
    let mut scored: Vec<(usize, f64)> = candidates.collect();
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal).then(a.0.cmp(&b.0)));
    scored.truncate(m);
    scored.into_iter().map(|(i, _)| i).collect()
}

/// Symmetrized `neighbors_per_node`-NN graph over `nodes`.
pub fn build_nn_graph<S: AsRef<str>>(
    space: &EmbeddingSpace,
    nodes: &[S],
    opts: &GraphOptions,
) -> Result<NnGraph> {
    space.require_normalized("nearest-neighbour graph")?;
    if nodes.len() < 2 {
        return Err(Error::TooFewNodes { found: nodes.len() });
    }
    if opts.neighbors_per_node == 0 {
        return Err(Error::InvalidConfig("neighbors_per_node must be positive".into()));
    }
    let mut rows = Vec::with_capacity(nodes.len());
    let mut position: HashMap<usize, usize> = HashMap::with_capacity(nodes.len());
    for (pos, w) in nodes.iter().enumerate() {
        let w = w.as_ref();
        let row = space.index_of(w).ok_or_else(|| Error::UnknownWord { word: w.to_owned() })?;
        if position.insert(row, pos).is_some() {
            return Err(Error::InvalidConfig(format!("duplicate graph node {w:?}")));
        }
        rows.push(row);
    }

    let vectors = space.vectors();
    let n = nodes.len();
    let mut edges = Vec::new();
    for (pos, &row) in rows.iter().enumerate() {
        let x = vectors.row(row);
        match opts.scope {
            NeighborScope::NodeSet => {
                // candidate key is the vocabulary row, i.e. frequency rank
                let cands = rows
                    .iter()
                    .filter(|&&r| r != row)
                    .map(|&r| (r, dot(x, vectors.row(r))));
                for r in top_neighbors(cands, opts.neighbors_per_node.min(n - 1)) {
                    edges.push((pos, position[&r]));
                }
            }
            NeighborScope::FullVocabulary => {
                let cands = (0..space.len())
                    .filter(|&r| r != row)
                    .map(|r| (r, dot(x, vectors.row(r))));
                for r in top_neighbors(cands, opts.neighbors_per_node) {
                    if let Some(&other) = position.get(&r) {
                        edges.push((pos, other));
                    }
                }
            }
        }
    }
    NnGraph::from_edges(nodes.iter().map(|w| w.as_ref().to_owned()).collect(), &edges)
}

/// Graph Laplacian `L = D − A`.
#[derive(Clone, Debug, PartialEq)]
pub struct Laplacian {
    pub matrix: Matrix,
}

pub fn laplacian(g: &NnGraph) -> Laplacian {
    let n = g.node_count();
    let mut matrix = Matrix::zeros(n, n);
    for i in 0..n {
        let mut degree = 0.0;
        for j in 0..n {
            let a = g.adjacency.get(i, j);
            degree += a;
            if a != 0.0 {
                matrix.set(i, j, -a);
            }
        }
        matrix.set(i, i, degree);
    }
    Laplacian { matrix }
}

/// Laplacian eigenvalues, descending.
pub fn laplacian_spectrum(g: &NnGraph) -> Result<Vec<f64>> {
    Ok(sym_eigenvalues(&laplacian(g).matrix)?.eigenvalues)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EigenSimilarity {
    pub delta: f64,
    pub k_used: usize,
    pub k_source: usize,
    pub k_target: usize,
    /// Leading `k_used` eigenvalues of each graph.
    pub spectrum_source: Vec<f64>,
    pub spectrum_target: Vec<f64>,
}

/// Smallest `k` whose leading eigenvalues exceed 90% of the spectral mass;
/// `None` when the spectrum carries no mass.
pub fn spectral_cutoff(spectrum: &[f64]) -> Option<usize> {
    let total: f64 = spectrum.iter().sum();
    if total <= 0.0 {
        return None;
    }
    let mut acc = 0.0;
    for (i, l) in spectrum.iter().enumerate() {
        acc += l;
        if acc / total > SPECTRAL_MASS_THRESHOLD {
            return Some(i + 1);
        }
    }
    Some(spectrum.len())
}

/// Δ between two descending spectra.
pub fn eigensimilarity_from_spectra(source: &[f64], target: &[f64]) -> Result<EigenSimilarity> {
    let k_source = spectral_cutoff(source).ok_or(Error::ZeroSpectrum { which: "source" })?;
    let k_target = spectral_cutoff(target).ok_or(Error::ZeroSpectrum { which: "target" })?;
    let k_used = k_source.min(k_target);
    let delta = source[..k_used]
        .iter()
        .zip(&target[..k_used])
        .map(|(a, b)| (a - b).powi(2))
        .sum();
    Ok(EigenSimilarity {
        delta,
        k_used,
        k_source,
        k_target,
        spectrum_source: source[..k_used].to_vec(),
        spectrum_target: target[..k_used].to_vec(),
    })
}

pub fn eigensimilarity(g1: &NnGraph, g2: &NnGraph) -> Result<EigenSimilarity> {
    for g in [g1, g2] {
        if g.node_count() < 2 {
            return Err(Error::TooFewNodes { found: g.node_count() });
        }
    }
    eigensimilarity_from_spectra(&laplacian_spectrum(g1)?, &laplacian_spectrum(g2)?)
}
