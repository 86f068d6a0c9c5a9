//! Spanning trees: Wilson sampling, exhaustive enumeration, inverse-leverage
//! reweighting, and averaging.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{DisjointSets, WeightedGraph};
use crate::leverage::LeverageProfile;
use crate::matrix::Matrix;

/// Largest edge count [`enumerate_trees`] accepts.
pub const ENUMERATE_MAX_EDGES: usize = 22;

/// The generator behind every sampled tree.
pub type TreeRng = ChaCha8Rng;

/// Generator for trial `trial` of a run seeded with `base_seed`.
pub fn trial_rng(base_seed: u64, trial: u64) -> TreeRng {
    TreeRng::seed_from_u64(base_seed.wrapping_add(trial))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightMode {
    Original,
    InverseLeverage,
}

/// An edge subset of size `n − 1` of a parent graph that is acyclic and
/// spanning, with one weight per tree edge.
#[derive(Clone, Debug, PartialEq)]
pub struct SpanningTree {
    graph_id: u64,
    n: usize,
    edges: Vec<usize>,
    weights: Vec<f64>,
    mode: WeightMode,
}

impl SpanningTree {
    /// Validates `edges` as a spanning tree of `g` and attaches the original
    /// edge weights.
    pub fn from_edges(g: &WeightedGraph, edges: &[usize]) -> Result<Self> {
        let mut sorted = edges.to_vec();
        sorted.sort_unstable();
        if sorted.len() + 1 != g.n() {
            return Err(Error::InvalidParameter(format!(
                "a spanning tree of {} vertices needs {} edges, got {}",
                g.n(),
                g.n() - 1,
                sorted.len()
            )));
        }
        let mut dsu = DisjointSets::new(g.n());
        for &e in &sorted {
            if e >= g.m() {
                return Err(Error::InvalidParameter(format!(
                    "edge {e} outside 0..{}",
                    g.m()
                )));
            }
            let edge = g.edge(e);
            if !dsu.union(edge.u, edge.v) {
                return Err(Error::InvalidParameter(format!("edge {e} closes a cycle")));
            }
        }
        let weights = sorted.iter().map(|&e| g.edge(e).w).collect();
        Ok(Self {
            graph_id: g.id(),
            n: g.n(),
            edges: sorted,
            weights,
            mode: WeightMode::Original,
        })
    }

    pub fn graph_id(&self) -> u64 {
        self.graph_id
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Edge ids in ascending order.
    pub fn edges(&self) -> &[usize] {
        &self.edges
    }

    /// Weights aligned with [`edges`](Self::edges).
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mode(&self) -> WeightMode {
        self.mode
    }

    pub fn contains(&self, e: usize) -> bool {
        self.edges.binary_search(&e).is_ok()
    }

    pub fn laplacian(&self, g: &WeightedGraph) -> Result<Matrix> {
        self.check_parent(g)?;
        let mut l = Matrix::zeros(self.n);
        self.accumulate_laplacian(g, &mut l, 1.0);
        Ok(l)
    }

    /// `out += scale · L_T`
    fn accumulate_laplacian(&self, g: &WeightedGraph, out: &mut Matrix, scale: f64) {
        for (&e, &w) in self.edges.iter().zip(&self.weights) {
            let edge = g.edge(e);
            let w = scale * w;
            out[(edge.u, edge.u)] += w;
            out[(edge.v, edge.v)] += w;
            out[(edge.u, edge.v)] -= w;
            out[(edge.v, edge.u)] -= w;
        }
    }

    /// Unweighted tree degree of every vertex.
    pub fn degrees(&self, g: &WeightedGraph) -> Vec<usize> {
        let mut d = vec![0; self.n];
        for &e in &self.edges {
            let edge = g.edge(e);
            d[edge.u] += 1;
            d[edge.v] += 1;
        }
        d
    }

    /// Weighted tree degree of every vertex, using the tree's weights.
    pub fn weighted_degrees(&self, g: &WeightedGraph) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for (&e, &w) in self.edges.iter().zip(&self.weights) {
            let edge = g.edge(e);
            d[edge.u] += w;
            d[edge.v] += w;
        }
        d
    }

    pub fn to_record(&self) -> TreeRecord {
        TreeRecord {
            n: self.n,
            edges: self.edges.clone(),
            weights: self.weights.clone(),
        }
    }

    fn check_parent(&self, g: &WeightedGraph) -> Result<()> {
        if g.id() != self.graph_id {
            return Err(Error::GraphMismatch);
        }
        Ok(())
    }
}

/// Text form of a tree for experiment logs: `n; e1 e2 …; w1 w2 …`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeRecord {
    pub n: usize,
    pub edges: Vec<usize>,
    pub weights: Vec<f64>,
}

impl fmt::Display for TreeRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{};", self.n)?;
        for e in &self.edges {
            write!(f, " {e}")?;
        }
        write!(f, ";")?;
        for w in &self.weights {
            write!(f, " {w}")?;
        }
        Ok(())
    }
}

impl std::str::FromStr for TreeRecord {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |message: String| Error::Parse { line: 1, message };
        let parts: Vec<&str> = s.trim().split(';').collect();
        if parts.len() != 3 {
            return Err(bad(format!(
                "expected 3 ';'-separated fields, got {}",
                parts.len()
            )));
        }
        let n = parts[0]
            .trim()
            .parse()
            .map_err(|_| bad(format!("bad vertex count {:?}", parts[0])))?;
        let edges = parts[1]
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| bad(format!("bad edge id {t:?}"))))
            .collect::<Result<Vec<usize>>>()?;
        let weights = parts[2]
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| bad(format!("bad weight {t:?}"))))
            .collect::<Result<Vec<f64>>>()?;
        if edges.len() != weights.len() {
            return Err(bad("edge and weight lists differ in length".into()));
        }
        Ok(Self { n, edges, weights })
    }
}

/// Wilson's loop-erased random walk sampler with reusable buffers.
///
/// The walk is rooted at vertex 0. From `u` the next edge is drawn with
/// probability `w_e / wdeg(u)` by inverting the cumulative weights of `u`'s
/// incident edges in edge-index order, so a seed fixes the tree.
pub struct WilsonSampler<'g> {
    g: &'g WeightedGraph,
    offsets: Vec<usize>,
    incident: Vec<usize>,
    cumulative: Vec<f64>,
    in_tree: Vec<bool>,
    next_edge: Vec<usize>,
}

impl<'g> WilsonSampler<'g> {
    pub fn new(g: &'g WeightedGraph) -> Self {
        let adj = g.incident_edges();
        let mut offsets = Vec::with_capacity(g.n() + 1);
        let mut incident = Vec::with_capacity(2 * g.m());
        let mut cumulative = Vec::with_capacity(2 * g.m());
        offsets.push(0);
        for list in &adj {
            let mut acc = 0.0;
            for &e in list {
                acc += g.edge(e).w;
                incident.push(e);
                cumulative.push(acc);
            }
            offsets.push(incident.len());
        }
        Self {
            g,
            offsets,
            incident,
            cumulative,
            in_tree: vec![false; g.n()],
            next_edge: vec![usize::MAX; g.n()],
        }
    }

    #[inline]
    fn step(&self, u: usize, rng: &mut impl Rng) -> usize {
        let (lo, hi) = (self.offsets[u], self.offsets[u + 1]);
        let cum = &self.cumulative[lo..hi];
        let r = rng.gen::<f64>() * cum[cum.len() - 1];
        let idx = cum.partition_point(|&c| c <= r).min(cum.len() - 1);
        self.incident[lo + idx]
    }

    /// Edge ids of one w-uniform spanning tree, unsorted.
    pub fn sample_edges(&mut self, rng: &mut impl Rng) -> Vec<usize> {
        let n = self.g.n();
        self.in_tree.iter_mut().for_each(|x| *x = false);
        self.in_tree[0] = true;
        let mut tree = Vec::with_capacity(n - 1);
        for start in 1..n {
            let mut u = start;
            while !self.in_tree[u] {
                let e = self.step(u, rng);
                self.next_edge[u] = e;
                u = self.g.edge(e).other(u);
            }
            u = start;
            while !self.in_tree[u] {
                self.in_tree[u] = true;
                let e = self.next_edge[u];
                tree.push(e);
                u = self.g.edge(e).other(u);
            }
        }
        tree
    }

    pub fn sample(&mut self, rng: &mut impl Rng) -> SpanningTree {
        let mut edges = self.sample_edges(rng);
        edges.sort_unstable();
        let weights = edges.iter().map(|&e| self.g.edge(e).w).collect();
        SpanningTree {
            graph_id: self.g.id(),
            n: self.g.n(),
            edges,
            weights,
            mode: WeightMode::Original,
        }
    }
}

/// One w-uniform spanning tree drawn with a fresh generator seeded by `seed`.
pub fn sample_tree_wilson(g: &WeightedGraph, seed: u64) -> SpanningTree {
    let mut rng = TreeRng::seed_from_u64(seed);
    WilsonSampler::new(g).sample(&mut rng)
}

/// Every spanning tree with its exact probability under the w-uniform law.
#[derive(Clone, Debug)]
pub struct TreeDistributionTable {
    m: usize,
    entries: Vec<(Vec<usize>, f64)>,
    total_weight: f64,
}

impl TreeDistributionTable {
    pub fn entries(&self) -> &[(Vec<usize>, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `Σ_T Π_{e∈T} w_e`
    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }

    pub fn probability_sum(&self) -> f64 {
        kahan_sum(self.entries.iter().map(|(_, p)| *p))
    }

    /// `Pr[e ∈ T]` for every edge.
    pub fn marginals(&self) -> Vec<f64> {
        let mut acc = vec![(0.0, 0.0); self.m];
        for (tree, p) in &self.entries {
            for &e in tree {
                let (sum, c) = &mut acc[e];
                let y = p - *c;
                let t = *sum + y;
                *c = (t - *sum) - y;
                *sum = t;
            }
        }
        acc.into_iter().map(|(s, _)| s).collect()
    }

    pub fn probability_of(&self, edges: &[usize]) -> f64 {
        let mut sorted = edges.to_vec();
        sorted.sort_unstable();
        self.entries
            .iter()
            .find(|(t, _)| *t == sorted)
            .map_or(0.0, |(_, p)| *p)
    }
}

fn kahan_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for x in values {
        let y = x - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}

/// Lists every spanning tree by edge-subset recursion with cycle pruning and
/// cross-checks the total weight against the matrix-tree determinant.
pub fn enumerate_trees(g: &WeightedGraph) -> Result<TreeDistributionTable> {
    if g.m() > ENUMERATE_MAX_EDGES {
        return Err(Error::SizeGuard {
            what: "edge count for tree enumeration",
            limit: ENUMERATE_MAX_EDGES,
            actual: g.m(),
        });
    }
    let mut found: Vec<(Vec<usize>, f64)> = Vec::new();
    let mut chosen = Vec::with_capacity(g.n() - 1);
    extend_forest(
        g,
        0,
        &DisjointSets::new(g.n()),
        &mut chosen,
        1.0,
        &mut found,
    );

    let total = kahan_sum(found.iter().map(|(_, w)| *w));
    let det = matrix_tree_weight(g);
    if (total - det).abs() > 1e-9 * det.abs().max(1.0) {
        return Err(Error::OracleMismatch(format!(
            "enumerated tree weight {total} differs from matrix-tree determinant {det}"
        )));
    }
    let entries = found.into_iter().map(|(t, w)| (t, w / total)).collect();
    Ok(TreeDistributionTable {
        m: g.m(),
        entries,
        total_weight: total,
    })
}

fn extend_forest(
    g: &WeightedGraph,
    next: usize,
    dsu: &DisjointSets,
    chosen: &mut Vec<usize>,
    weight: f64,
    out: &mut Vec<(Vec<usize>, f64)>,
) {
    let need = g.n() - 1 - chosen.len();
    if need == 0 {
        out.push((chosen.clone(), weight));
        return;
    }
    if g.m() - next < need {
        return;
    }
    let edge = g.edge(next);
    let mut with = dsu.clone();
    if with.union(edge.u, edge.v) {
        chosen.push(next);
        extend_forest(g, next + 1, &with, chosen, weight * edge.w, out);
        chosen.pop();
    }
    extend_forest(g, next + 1, dsu, chosen, weight, out);
}

/// `det` of the Laplacian with row and column 0 removed: the weighted
/// spanning-tree count.
pub fn matrix_tree_weight(g: &WeightedGraph) -> f64 {
    let l = crate::graph::laplacian(g);
    let k = g.n() - 1;
    let mut a: Vec<Vec<f64>> = (1..g.n()).map(|i| l.row(i)[1..].to_vec()).collect();
    let mut det = 1.0;
    for col in 0..k {
        let pivot = (col..k)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .expect("nonempty");
        if a[pivot][col] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            a.swap(pivot, col);
            det = -det;
        }
        let p = a[col][col];
        det *= p;
        for r in (col + 1)..k {
            let factor = a[r][col] / p;
            if factor == 0.0 {
                continue;
            }
            for c in col..k {
                a[r][c] -= factor * a[col][c];
            }
        }
    }
    det
}

/// Replaces each tree edge weight `w_e` by `w_e / ℓ_e`.
pub fn reweight_tree(t: &SpanningTree, lev: &LeverageProfile) -> Result<SpanningTree> {
    if t.mode != WeightMode::Original {
        return Err(Error::WeightMode(
            "tree is already inverse-leverage weighted".into(),
        ));
    }
    if lev.graph_id() != t.graph_id {
        return Err(Error::GraphMismatch);
    }
    let weights = t
        .edges
        .iter()
        .zip(&t.weights)
        .map(|(&e, &w)| w / lev.get(e))
        .collect();
    Ok(SpanningTree {
        weights,
        mode: WeightMode::InverseLeverage,
        ..t.clone()
    })
}

/// `(1/t) Σ_i L_{T_i}` over inverse-leverage weighted trees of `g`.
pub fn average_trees(g: &WeightedGraph, trees: &[SpanningTree]) -> Result<Matrix> {
    if trees.is_empty() {
        return Err(Error::Empty("tree list"));
    }
    let mut out = Matrix::zeros(g.n());
    let scale = 1.0 / trees.len() as f64;
    for t in trees {
        t.check_parent(g)?;
        if t.mode != WeightMode::InverseLeverage {
            return Err(Error::WeightMode(
                "average_trees needs inverse-leverage weighted trees".into(),
            ));
        }
        t.accumulate_laplacian(g, &mut out, scale);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{complete, laplacian, path};
    use crate::leverage::leverage_scores;

    #[test]
    fn tree_graph_returns_itself() {
        let g = path(6).unwrap();
        for seed in 0..20 {
            let t = sample_tree_wilson(&g, seed);
            assert_eq!(t.edges(), &[0, 1, 2, 3, 4]);
        }
    }

    #[test]
    fn wilson_is_deterministic() {
        let g = complete(12).unwrap();
        assert_eq!(sample_tree_wilson(&g, 7), sample_tree_wilson(&g, 7));
        let a: Vec<_> = (0..10)
            .map(|s| sample_tree_wilson(&g, s).edges().to_vec())
            .collect();
        assert!(a.windows(2).any(|w| w[0] != w[1]));
    }

    #[test]
    fn sampled_trees_are_spanning() {
        let g = complete(9).unwrap();
        let mut sampler = WilsonSampler::new(&g);
        let mut rng = trial_rng(3, 0);
        for _ in 0..50 {
            let t = sampler.sample(&mut rng);
            SpanningTree::from_edges(&g, t.edges()).unwrap();
        }
    }

    #[test]
    fn enumeration_counts() {
        let k3 = enumerate_trees(&complete(3).unwrap()).unwrap();
        assert_eq!(k3.len(), 3);
        for (_, p) in k3.entries() {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
        let k4 = enumerate_trees(&complete(4).unwrap()).unwrap();
        assert_eq!(k4.len(), 16);
        assert!((matrix_tree_weight(&complete(4).unwrap()) - 16.0).abs() < 1e-12);
        let p4 = enumerate_trees(&path(4).unwrap()).unwrap();
        assert_eq!(p4.len(), 1);
        assert_eq!(p4.entries()[0].1, 1.0);
    }

    #[test]
    fn enumeration_size_guard() {
        let k8 = complete(8).unwrap(); // 28 edges
        assert!(matches!(enumerate_trees(&k8), Err(Error::SizeGuard { .. })));
    }

    #[test]
    fn weighted_triangle_table() {
        let g = WeightedGraph::new(3, [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 2.0)]).unwrap();
        let table = enumerate_trees(&g).unwrap();
        assert!((table.probability_of(&[0, 1]) - 0.2).abs() < 1e-15);
        assert!((table.probability_of(&[0, 2]) - 0.4).abs() < 1e-15);
        assert!((table.probability_of(&[1, 2]) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn reweighting_examples() {
        let g = path(4).unwrap();
        let lev = leverage_scores(&g).unwrap();
        let t = reweight_tree(&sample_tree_wilson(&g, 1), &lev).unwrap();
        assert!(t.weights().iter().all(|w| (w - 1.0).abs() < 1e-12));

        let k3 = complete(3).unwrap();
        let lev = leverage_scores(&k3).unwrap();
        let t = reweight_tree(&SpanningTree::from_edges(&k3, &[0, 1]).unwrap(), &lev).unwrap();
        assert!(t.weights().iter().all(|w| (w - 1.5).abs() < 1e-14));
        assert!(reweight_tree(&t, &lev).is_err());

        let n = 10;
        let kn = complete(n).unwrap();
        let lev = leverage_scores(&kn).unwrap();
        let t = reweight_tree(&sample_tree_wilson(&kn, 5), &lev).unwrap();
        assert!(t
            .weights()
            .iter()
            .all(|w| (w - n as f64 / 2.0).abs() < 1e-12));

        let other = leverage_scores(&complete(4).unwrap()).unwrap();
        assert!(matches!(
            reweight_tree(&sample_tree_wilson(&k3, 0), &other),
            Err(Error::GraphMismatch)
        ));
    }

    #[test]
    fn exact_average_of_all_triangle_trees_is_the_graph() {
        let k3 = complete(3).unwrap();
        let lev = leverage_scores(&k3).unwrap();
        let table = enumerate_trees(&k3).unwrap();
        let mut expectation = Matrix::zeros(3);
        for (edges, p) in table.entries() {
            let t = reweight_tree(&SpanningTree::from_edges(&k3, edges).unwrap(), &lev).unwrap();
            expectation
                .add_scaled(&average_trees(&k3, &[t]).unwrap(), *p)
                .unwrap();
        }
        assert!(expectation.sub(&laplacian(&k3)).unwrap().max_abs() < 1e-10);
    }

    #[test]
    fn averaging_rules() {
        let k3 = complete(3).unwrap();
        let lev = leverage_scores(&k3).unwrap();
        assert!(matches!(average_trees(&k3, &[]), Err(Error::Empty(_))));
        let raw = sample_tree_wilson(&k3, 0);
        assert!(matches!(
            average_trees(&k3, std::slice::from_ref(&raw)),
            Err(Error::WeightMode(_))
        ));
        let t = reweight_tree(&raw, &lev).unwrap();
        let one = average_trees(&k3, std::slice::from_ref(&t)).unwrap();
        assert_eq!(one, t.laplacian(&k3).unwrap());
        let two = average_trees(&k3, &[t.clone(), t]).unwrap();
        assert!(one.sub(&two).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn record_format() {
        let k3 = complete(3).unwrap();
        let t = SpanningTree::from_edges(&k3, &[2, 0]).unwrap();
        let line = t.to_record().to_string();
        assert_eq!(line, "3; 0 2; 1 1");
        let back: TreeRecord = line.parse().unwrap();
        assert_eq!(back, t.to_record());
        assert!("3; 0 2; 1".parse::<TreeRecord>().is_err());
        assert!("3; 0 2".parse::<TreeRecord>().is_err());
    }

    #[test]
    fn from_edges_validates() {
        let k3 = complete(3).unwrap();
        assert!(SpanningTree::from_edges(&k3, &[0]).is_err());
        let k4 = complete(4).unwrap();
        // edges 0=(0,1), 1=(0,2), 3=(1,2) form a triangle
        assert!(SpanningTree::from_edges(&k4, &[0, 1, 3]).is_err());
    }
}
