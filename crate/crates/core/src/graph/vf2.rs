//! Exact graph isomorphism for undirected graphs with the VF2 state-space
//! search (Cordella et al.): grow a partial node mapping one pair at a time,
//! pruning with adjacency consistency against the mapped core and
//! look-ahead counts over the terminal sets.

use super::NnGraph;
use crate::error::{Error, Result};

pub const DEFAULT_MAX_ISOMORPHISM_NODES: usize = 64;

const UNMAPPED: usize = usize::MAX;

struct Side {
    adj: Vec<Vec<usize>>,
    core: Vec<usize>,
    // depth at which a node entered the terminal set, 0 if never
    term: Vec<usize>,
}

impl Side {
    fn new(g: &NnGraph) -> Self {
        let n = g.node_count();
        Self {
            adj: (0..n).map(|i| g.neighbors(i).collect()).collect(),
            core: vec![UNMAPPED; n],
            term: vec![0; n],
        }
    }

    fn in_terminal(&self, i: usize) -> bool {
        self.term[i] > 0 && self.core[i] == UNMAPPED
    }

    fn terminal_size(&self) -> usize {
        (0..self.core.len()).filter(|&i| self.in_terminal(i)).count()
    }

    fn push(&mut self, node: usize, partner: usize, depth: usize) {
        self.core[node] = partner;
        if self.term[node] == 0 {
            self.term[node] = depth;
        }
        for k in 0..self.adj[node].len() {
            let nb = self.adj[node][k];
            if self.term[nb] == 0 {
                self.term[nb] = depth;
            }
        }
    }

    fn pop(&mut self, node: usize, depth: usize) {
        self.core[node] = UNMAPPED;
        for t in self.term.iter_mut() {
            if *t == depth {
                *t = 0;
            }
        }
    }

    /// (mapped neighbours, unmapped terminal neighbours, remaining neighbours)
    fn lookahead(&self, node: usize) -> (usize, usize, usize) {
        let mut counts = (0, 0, 0);
        for &nb in &self.adj[node] {
            if self.core[nb] != UNMAPPED {
                counts.0 += 1;
            } else if self.term[nb] > 0 {
                counts.1 += 1;
            } else {
                counts.2 += 1;
            }
        }
        counts
    }
}

struct State {
    g1: Side,
    g2: Side,
    depth: usize,
}

impl State {
    fn candidates(&self) -> Option<(usize, Vec<usize>)> {
        let n = self.g1.core.len();
        let t1 = self.g1.terminal_size();
        let t2 = self.g2.terminal_size();
        if t1 > 0 && t2 > 0 {
            let a = (0..n).find(|&i| self.g1.in_terminal(i))?;
            let bs = (0..n).filter(|&j| self.g2.in_terminal(j)).collect();
            Some((a, bs))
        } else if t1 == 0 && t2 == 0 {
            let a = (0..n).find(|&i| self.g1.core[i] == UNMAPPED)?;
            let bs = (0..n).filter(|&j| self.g2.core[j] == UNMAPPED).collect();
            Some((a, bs))
        } else {
            None
        }
    }

    fn feasible(&self, a: usize, b: usize) -> bool {
        if self.g1.adj[a].len() != self.g2.adj[b].len() {
            return false;
        }
        for &na in &self.g1.adj[a] {
            let mapped = self.g1.core[na];
            if mapped != UNMAPPED && !self.g2.adj[b].contains(&mapped) {
                return false;
            }
        }
        for &nb in &self.g2.adj[b] {
            let mapped = self.g2.core[nb];
            if mapped != UNMAPPED && !self.g1.adj[a].contains(&mapped) {
                return false;
            }
        }
        self.g1.lookahead(a) == self.g2.lookahead(b)
    }

    fn search(&mut self) -> bool {
        if self.depth == self.g1.core.len() {
            return true;
        }
        let Some((a, bs)) = self.candidates() else {
            return false;
        };
        for b in bs {
            if !self.feasible(a, b) {
                continue;
            }
            self.depth += 1;
            let depth = self.depth;
            self.g1.push(a, b, depth);
            self.g2.push(b, a, depth);
            if self.search() {
                return true;
            }
            self.g1.pop(a, depth);
            self.g2.pop(b, depth);
            self.depth -= 1;
        }
        false
    }
}

fn sorted_degrees(g: &NnGraph) -> Vec<usize> {
    let mut d: Vec<usize> = (0..g.node_count()).map(|i| g.degree(i)).collect();
    d.sort_unstable();
    d
}

pub fn vf2_isomorphic(g1: &NnGraph, g2: &NnGraph) -> Result<bool> {
    vf2_isomorphic_with_limit(g1, g2, DEFAULT_MAX_ISOMORPHISM_NODES)
}

/// Exact isomorphism test; graphs larger than `max_nodes` are rejected.
pub fn vf2_isomorphic_with_limit(g1: &NnGraph, g2: &NnGraph, max_nodes: usize) -> Result<bool> {
    let nodes = g1.node_count().max(g2.node_count());
    if nodes > max_nodes {
        return Err(Error::GraphTooLarge {
            nodes,
            limit: max_nodes,
        });
    }
    if g1.node_count() != g2.node_count()
        || g1.edge_count() != g2.edge_count()
        || sorted_degrees(g1) != sorted_degrees(g2)
    {
        return Ok(false);
    }
    let mut state = State {
        g1: Side::new(g1),
        g2: Side::new(g2),
        depth: 0,
    };
    Ok(state.search())
}
