//! Effective resistances, leverage scores, and tree marginals conditioned on
//! a set of edges being present.
//!
//! The leverage `ℓ_e = w_e · R_eff(u, v)` is the probability that `e` lies
//! in a w-uniform spanning tree. Conditioning on a forest `S ⊆ T` is the same
//! as contracting `S`, so conditional marginals are leverage scores of the
//! contracted multigraph.
//!
//! Leverage is computed block by block: an edge's effective resistance only
//! depends on its biconnected block, since every path leaving the block
//! passes through a cut vertex. This keeps graphs such as many cliques
//! sharing one hub cheap even when the whole graph is far too large for a
//! dense pseudoinverse.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{laplacian, DisjointSets, WeightedGraph};
use crate::matrix::{spd_inverse, Matrix};

/// Per-edge leverage scores of one graph.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeverageProfile {
    graph_id: u64,
    scores: Vec<f64>,
}

impl LeverageProfile {
    pub fn graph_id(&self) -> u64 {
        self.graph_id
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn get(&self, e: usize) -> f64 {
        self.scores[e]
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Kahan-compensated `Σ_e ℓ_e`; equals `n − 1` for a connected graph.
    pub fn total(&self) -> f64 {
        let mut sum = 0.0;
        let mut c = 0.0;
        for &x in &self.scores {
            let y = x - c;
            let t = sum + y;
            c = (t - sum) - y;
            sum = t;
        }
        sum
    }

    pub fn max(&self) -> f64 {
        self.scores.iter().copied().fold(0.0, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.scores.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// `L^† = (L + 11ᵀ/n)^{-1} − 11ᵀ/n` for a connected graph, via Cholesky.
pub fn laplacian_pinv(g: &WeightedGraph) -> Result<Matrix> {
    let n = g.n();
    let mut shifted = laplacian(g);
    let c = 1.0 / n as f64;
    for i in 0..n {
        for x in shifted.row_mut(i) {
            *x += c;
        }
    }
    let mut inv = spd_inverse(&shifted)
        .ok_or_else(|| Error::Precondition("shifted Laplacian is not positive definite".into()))?;
    for i in 0..n {
        for x in inv.row_mut(i) {
            *x -= c;
        }
    }
    Ok(inv)
}

/// Answers many effective-resistance queries from one pseudoinverse.
#[derive(Clone, Debug)]
pub struct ResistanceOracle {
    pinv: Matrix,
}

impl ResistanceOracle {
    pub fn new(g: &WeightedGraph) -> Result<Self> {
        Ok(Self {
            pinv: laplacian_pinv(g)?,
        })
    }

    pub fn pinv(&self) -> &Matrix {
        &self.pinv
    }

    /// `b_{uv}ᵀ L^† b_{uv}`; zero when `u = v`.
    pub fn resistance(&self, u: usize, v: usize) -> f64 {
        if u == v {
            return 0.0;
        }
        let p = &self.pinv;
        p[(u, u)] + p[(v, v)] - 2.0 * p[(u, v)]
    }
}

/// Effective resistance between `u` and `v`. By convention `R(u, u) = 0`.
pub fn effective_resistance(g: &WeightedGraph, u: usize, v: usize) -> Result<f64> {
    if u >= g.n() || v >= g.n() {
        return Err(Error::InvalidParameter(format!(
            "vertex pair ({u}, {v}) outside 0..{}",
            g.n()
        )));
    }
    if u == v {
        return Ok(0.0);
    }
    Ok(ResistanceOracle::new(g)?.resistance(u, v))
}

/// Leverage scores from a single dense pseudoinverse of the whole graph.
pub fn leverage_scores_dense(g: &WeightedGraph) -> Result<LeverageProfile> {
    let oracle = ResistanceOracle::new(g)?;
    let scores = g
        .edges()
        .iter()
        .map(|e| e.w * oracle.resistance(e.u, e.v))
        .collect();
    Ok(LeverageProfile {
        graph_id: g.id(),
        scores,
    })
}

/// Leverage scores, solved independently on each biconnected block.
pub fn leverage_scores(g: &WeightedGraph) -> Result<LeverageProfile> {
    let mut scores = vec![0.0; g.m()];
    for block in biconnected_blocks(g) {
        if block.len() == 1 {
            // bridge
            scores[block[0]] = 1.0;
            continue;
        }
        let (sub, _) = g.edge_subgraph(&block)?;
        let oracle = ResistanceOracle::new(&sub)?;
        for (local, &orig) in block.iter().enumerate() {
            let e = sub.edge(local);
            scores[orig] = e.w * oracle.resistance(e.u, e.v);
        }
    }
    Ok(LeverageProfile {
        graph_id: g.id(),
        scores,
    })
}

/// Partition of the edge set into biconnected blocks (iterative Tarjan).
/// Parallel edges between the same pair fall into one block; a bridge is a
/// block of its own.
pub fn biconnected_blocks(g: &WeightedGraph) -> Vec<Vec<usize>> {
    const UNSEEN: usize = usize::MAX;
    let n = g.n();
    let adj = g.incident_edges();
    let mut disc = vec![UNSEEN; n];
    let mut low = vec![0; n];
    let mut clock = 0;
    let mut edge_stack: Vec<usize> = Vec::new();
    let mut blocks = Vec::new();
    // (vertex, edge used to reach it, next adjacency index)
    let mut stack: Vec<(usize, usize, usize)> = Vec::new();

    for root in 0..n {
        if disc[root] != UNSEEN {
            continue;
        }
        disc[root] = clock;
        low[root] = clock;
        clock += 1;
        stack.push((root, UNSEEN, 0));
        while let Some(top) = stack.last_mut() {
            let (v, parent_edge) = (top.0, top.1);
            if top.2 < adj[v].len() {
                let e = adj[v][top.2];
                top.2 += 1;
                if e == parent_edge {
                    continue;
                }
                let w = g.edge(e).other(v);
                if disc[w] == UNSEEN {
                    edge_stack.push(e);
                    disc[w] = clock;
                    low[w] = clock;
                    clock += 1;
                    stack.push((w, e, 0));
                } else if disc[w] < disc[v] {
                    edge_stack.push(e);
                    low[v] = low[v].min(disc[w]);
                }
            } else {
                stack.pop();
                if let Some(&(p, _, _)) = stack.last() {
                    low[p] = low[p].min(low[v]);
                    if low[v] >= disc[p] {
                        let mut block = Vec::new();
                        while let Some(e) = edge_stack.pop() {
                            block.push(e);
                            if e == parent_edge {
                                break;
                            }
                        }
                        block.sort_unstable();
                        blocks.push(block);
                    }
                }
            }
        }
    }
    blocks
}

/// A forest of edges conditioned to be in the tree, realized by merging
/// their endpoints.
#[derive(Clone, Debug)]
pub struct ContractionState {
    graph_id: u64,
    contracted: Vec<usize>,
    merged: DisjointSets,
}

impl ContractionState {
    pub fn new(g: &WeightedGraph) -> Self {
        Self {
            graph_id: g.id(),
            contracted: Vec::new(),
            merged: DisjointSets::new(g.n()),
        }
    }

    /// Conditions on all of `edges`; fails if they contain a cycle.
    pub fn from_edges(g: &WeightedGraph, edges: &[usize]) -> Result<Self> {
        let mut s = Self::new(g);
        for &e in edges {
            s = s.contract(g, e)?;
        }
        Ok(s)
    }

    /// Returns the state with `e` additionally contracted.
    pub fn contract(&self, g: &WeightedGraph, e: usize) -> Result<Self> {
        if g.id() != self.graph_id {
            return Err(Error::GraphMismatch);
        }
        if e >= g.m() {
            return Err(Error::InvalidParameter(format!(
                "edge {e} outside 0..{}",
                g.m()
            )));
        }
        let mut next = self.clone();
        let edge = g.edge(e);
        if !next.merged.union(edge.u, edge.v) {
            return Err(Error::InvalidConditioning { edge: e });
        }
        next.contracted.push(e);
        Ok(next)
    }

    pub fn contracted(&self) -> &[usize] {
        &self.contracted
    }

    pub fn is_contracted(&self, e: usize) -> bool {
        self.contracted.contains(&e)
    }

    /// Whether `e` has become a self-loop (both ends merged).
    pub fn is_loop(&mut self, g: &WeightedGraph, e: usize) -> bool {
        let edge = g.edge(e);
        self.merged.find(edge.u) == self.merged.find(edge.v)
    }
}

/// `Pr[e ∈ T | S ⊆ T]` for every edge, where `S` is the contracted forest.
///
/// Contracted edges report 1, edges turned into self-loops report 0, and
/// every other edge reports its leverage in the contracted multigraph.
pub fn conditional_marginals(g: &WeightedGraph, state: &ContractionState) -> Result<Vec<f64>> {
    if g.id() != state.graph_id {
        return Err(Error::GraphMismatch);
    }
    let mut merged = state.merged.clone();
    let n = g.n();
    let mut label = vec![usize::MAX; n];
    let mut count = 0;
    for v in 0..n {
        let r = merged.find(v);
        if label[r] == usize::MAX {
            label[r] = count;
            count += 1;
        }
    }
    let mut probs = vec![0.0; g.m()];
    for &e in &state.contracted {
        probs[e] = 1.0;
    }
    if count < 2 {
        return Ok(probs);
    }
    let mut residual = Vec::new();
    let mut edges = Vec::new();
    for (idx, e) in g.edges().iter().enumerate() {
        let (a, b) = (label[merged.find(e.u)], label[merged.find(e.v)]);
        if a != b {
            residual.push(idx);
            edges.push((a, b, e.w));
        }
    }
    let contracted = WeightedGraph::new(count, edges)?;
    let lev = leverage_scores(&contracted)?;
    for (local, &orig) in residual.iter().enumerate() {
        probs[orig] = lev.get(local);
    }
    Ok(probs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{clique_star, complete, path, ring};

    fn weighted_triangle() -> WeightedGraph {
        // a = (0,1) w1, b = (1,2) w1, c = (0,2) w2
        WeightedGraph::new(3, [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 2.0)]).unwrap()
    }

    #[test]
    fn resistance_examples() {
        let single = WeightedGraph::new(2, [(0, 1, 4.0)]).unwrap();
        assert!((effective_resistance(&single, 0, 1).unwrap() - 0.25).abs() < 1e-14);
        let k3 = complete(3).unwrap();
        assert!((effective_resistance(&k3, 0, 1).unwrap() - 2.0 / 3.0).abs() < 1e-14);
        assert_eq!(effective_resistance(&k3, 2, 2).unwrap(), 0.0);
        let k7 = complete(7).unwrap();
        assert!((effective_resistance(&k7, 3, 5).unwrap() - 2.0 / 7.0).abs() < 1e-14);
    }

    #[test]
    fn leverage_examples() {
        let p = path(5).unwrap();
        for l in leverage_scores(&p).unwrap().scores() {
            assert!((l - 1.0).abs() < 1e-12);
        }
        let k3 = leverage_scores(&complete(3).unwrap()).unwrap();
        for l in k3.scores() {
            assert!((l - 2.0 / 3.0).abs() < 1e-14);
        }
        let wt = leverage_scores(&weighted_triangle()).unwrap();
        let expected = [0.6, 0.6, 0.8];
        for (l, e) in wt.scores().iter().zip(expected) {
            assert!((l - e).abs() < 1e-14, "{:?}", wt.scores());
        }
    }

    #[test]
    fn block_and_dense_routes_agree() {
        for g in [
            clique_star(3, 4).unwrap(),
            ring(7).unwrap(),
            WeightedGraph::new(
                6,
                [
                    (0, 1, 1.0),
                    (1, 2, 2.0),
                    (2, 0, 0.5),
                    (2, 3, 1.0),
                    (3, 4, 3.0),
                    (4, 5, 1.0),
                    (5, 3, 1.5),
                    (4, 5, 0.25),
                ],
            )
            .unwrap(),
        ] {
            let a = leverage_scores(&g).unwrap();
            let b = leverage_scores_dense(&g).unwrap();
            for (x, y) in a.scores().iter().zip(b.scores()) {
                assert!((x - y).abs() < 1e-12);
            }
            assert!((a.total() - (g.n() - 1) as f64).abs() < 1e-10);
        }
    }

    #[test]
    fn blocks_of_clique_star() {
        let g = clique_star(4, 5).unwrap();
        let blocks = biconnected_blocks(&g);
        assert_eq!(blocks.len(), 4);
        assert!(blocks.iter().all(|b| b.len() == 10));
        let total: usize = blocks.iter().map(Vec::len).sum();
        assert_eq!(total, g.m());
    }

    #[test]
    fn blocks_of_a_path_are_bridges() {
        let g = path(6).unwrap();
        let blocks = biconnected_blocks(&g);
        assert_eq!(blocks.len(), 5);
    }

    #[test]
    fn contraction_marginals() {
        let k3 = complete(3).unwrap();
        let empty = ContractionState::new(&k3);
        let base = conditional_marginals(&k3, &empty).unwrap();
        for p in &base {
            assert!((p - 2.0 / 3.0).abs() < 1e-14);
        }
        let s = empty.contract(&k3, 0).unwrap();
        let cond = conditional_marginals(&k3, &s).unwrap();
        assert_eq!(cond[0], 1.0);
        assert!((cond[1] - 0.5).abs() < 1e-14 && (cond[2] - 0.5).abs() < 1e-14);

        let wt = weighted_triangle();
        let s = ContractionState::from_edges(&wt, &[0]).unwrap();
        let cond = conditional_marginals(&wt, &s).unwrap();
        assert!((cond[2] - 2.0 / 3.0).abs() < 1e-14);
        assert!((cond[1] - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn contraction_rejects_cycles() {
        let k3 = complete(3).unwrap();
        let s = ContractionState::from_edges(&k3, &[0, 1]).unwrap();
        assert!(matches!(
            s.contract(&k3, 2),
            Err(Error::InvalidConditioning { edge: 2 })
        ));
        // full tree contracted: remaining edge is a loop with marginal 0
        let probs = conditional_marginals(&k3, &s).unwrap();
        assert_eq!(probs, vec![1.0, 1.0, 0.0]);
    }

    #[test]
    fn contraction_rejects_foreign_graph() {
        let k3 = complete(3).unwrap();
        let k4 = complete(4).unwrap();
        let s = ContractionState::new(&k3);
        assert!(matches!(s.contract(&k4, 0), Err(Error::GraphMismatch)));
        assert!(matches!(
            conditional_marginals(&k4, &s),
            Err(Error::GraphMismatch)
        ));
    }
}
