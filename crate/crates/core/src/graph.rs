//! Weighted undirected multigraphs, their Laplacians, and the benchmark
//! constructions used by the experiments.
//!
//! Edges are the ground set of the spanning-tree measure, so parallel edges
//! stay distinct and keep their index `0..m`. Every stored edge is oriented
//! with `u < v`; the incidence vector of edge `e` is `+1` at `u` and `−1` at `v`.

use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Attempts made by [`Construction::ErdosRenyiConnected`] before giving up.
pub const ER_MAX_ATTEMPTS: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub w: f64,
}

impl Edge {
    pub fn other(&self, x: usize) -> usize {
        if x == self.u {
            self.v
        } else {
            self.u
        }
    }

    pub fn touches(&self, x: usize) -> bool {
        self.u == x || self.v == x
    }
}

/// Signed incidence vector of one edge: `+1` at `head`, `−1` at `tail`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IncidenceRow {
    pub head: usize,
    pub tail: usize,
}

impl IncidenceRow {
    pub fn to_dense(self, n: usize) -> Vec<f64> {
        let mut b = vec![0.0; n];
        b[self.head] = 1.0;
        b[self.tail] = -1.0;
        b
    }

    /// `bᵀ x`
    #[inline]
    pub fn dot(self, x: &[f64]) -> f64 {
        x[self.head] - x[self.tail]
    }
}

/// A connected weighted undirected multigraph on vertices `0..n`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedGraph {
    n: usize,
    edges: Vec<Edge>,
    fingerprint: u64,
}

impl WeightedGraph {
    /// Validates and builds a graph. Edges given as `(u, v, w)` are reoriented
    /// so that `u < v`; self-loops, non-positive weights and disconnected
    /// inputs are rejected.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let g = Self::new_unchecked_connectivity(n, edges)?;
        let components = g.component_count();
        if components != 1 {
            return Err(Error::Disconnected { components });
        }
        Ok(g)
    }

    fn new_unchecked_connectivity(
        n: usize,
        edges: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidGraph(format!(
                "need at least 2 vertices, got {n}"
            )));
        }
        let mut stored = Vec::new();
        for (idx, (u, v, w)) in edges.into_iter().enumerate() {
            if u >= n || v >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge {idx} ({u}, {v}) references a vertex outside 0..{n}"
                )));
            }
            if u == v {
                return Err(Error::InvalidGraph(format!(
                    "edge {idx} is a self-loop at {u}"
                )));
            }
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::InvalidGraph(format!(
                    "edge {idx} has non-positive or non-finite weight {w}"
                )));
            }
            let (u, v) = if u < v { (u, v) } else { (v, u) };
            stored.push(Edge { u, v, w });
        }
        let mut g = Self {
            n,
            edges: stored,
            fingerprint: 0,
        };
        g.fingerprint = g.compute_fingerprint();
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> &Edge {
        &self.edges[e]
    }

    pub fn incidence(&self, e: usize) -> IncidenceRow {
        let edge = &self.edges[e];
        IncidenceRow {
            head: edge.u,
            tail: edge.v,
        }
    }

    /// Stable identity of the graph contents, used to catch trees and
    /// leverage profiles being paired with the wrong graph.
    pub fn id(&self) -> u64 {
        self.fingerprint
    }

    pub fn weighted_degrees(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for e in &self.edges {
            d[e.u] += e.w;
            d[e.v] += e.w;
        }
        d
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.n];
        for e in &self.edges {
            d[e.u] += 1;
            d[e.v] += 1;
        }
        d
    }

    /// Edge ids incident to each vertex, in edge-index order.
    pub fn incident_edges(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for (idx, e) in self.edges.iter().enumerate() {
            adj[e.u].push(idx);
            adj[e.v].push(idx);
        }
        adj
    }

    /// True when `m = n − 1` (a connected graph with that many edges is a tree).
    pub fn is_tree(&self) -> bool {
        self.m() + 1 == self.n
    }

    pub fn is_unit_weight(&self) -> bool {
        self.edges.iter().all(|e| e.w == 1.0)
    }

    fn component_count(&self) -> usize {
        let mut dsu = DisjointSets::new(self.n);
        let mut components = self.n;
        for e in &self.edges {
            if dsu.union(e.u, e.v) {
                components -= 1;
            }
        }
        components
    }

    fn compute_fingerprint(&self) -> u64 {
        // FNV-1a over (n, u, v, weight bits)
        const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
        const PRIME: u64 = 0x0000_0100_0000_01b3;
        let mut h = OFFSET;
        let mut feed = |x: u64| {
            for byte in x.to_le_bytes() {
                h ^= byte as u64;
                h = h.wrapping_mul(PRIME);
            }
        };
        feed(self.n as u64);
        for e in &self.edges {
            feed(e.u as u64);
            feed(e.v as u64);
            feed(e.w.to_bits());
        }
        h
    }

    /// Reads the plain-text format: a header line `n m` followed by `m` lines
    /// `u v w`. Blank lines and lines starting with `#` are skipped.
    pub fn read_from(reader: impl BufRead) -> Result<Self> {
        let mut lines =
            reader
                .lines()
                .enumerate()
                .map(|(i, l)| (i + 1, l))
                .filter(|(_, l)| match l {
                    Ok(s) => {
                        let t = s.trim();
                        !t.is_empty() && !t.starts_with('#')
                    }
                    Err(_) => true,
                });
        let (hline, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            message: "missing header line \"n m\"".into(),
        })?;
        let header = header?;
        let mut it = header.split_whitespace();
        let n: usize = parse_field(it.next(), hline, "n")?;
        let m: usize = parse_field(it.next(), hline, "m")?;
        let mut edges = Vec::with_capacity(m);
        for _ in 0..m {
            let (lno, line) = lines.next().ok_or(Error::Parse {
                line: hline,
                message: format!("expected {m} edge lines, found {}", edges.len()),
            })?;
            let line = line?;
            let mut f = line.split_whitespace();
            let u: usize = parse_field(f.next(), lno, "u")?;
            let v: usize = parse_field(f.next(), lno, "v")?;
            let w: f64 = parse_field(f.next(), lno, "w")?;
            edges.push((u, v, w));
        }
        if let Some((lno, _)) = lines.next() {
            return Err(Error::Parse {
                line: lno,
                message: format!("trailing content after {m} edges"),
            });
        }
        Self::new(n, edges)
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(f))
    }

    /// Writes the plain-text format. Weights use the shortest representation
    /// that parses back to the identical `f64`.
    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "{} {}", self.n, self.m())?;
        for e in &self.edges {
            writeln!(w, "{} {} {}", e.u, e.v, e.w)?;
        }
        Ok(())
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        let mut buf = std::io::BufWriter::new(f);
        self.write_to(&mut buf)?;
        buf.flush()?;
        Ok(())
    }

    /// Induced multigraph on the given edge subset with vertices relabelled
    /// densely in order of first appearance. Returns the graph and the
    /// original id of each new vertex.
    pub(crate) fn edge_subgraph(&self, edge_ids: &[usize]) -> Result<(Self, Vec<usize>)> {
        let mut relabel = vec![usize::MAX; self.n];
        let mut originals = Vec::new();
        let mut edges = Vec::with_capacity(edge_ids.len());
        for &id in edge_ids {
            let e = self.edges[id];
            for x in [e.u, e.v] {
                if relabel[x] == usize::MAX {
                    relabel[x] = originals.len();
                    originals.push(x);
                }
            }
            edges.push((relabel[e.u], relabel[e.v], e.w));
        }
        let g = Self::new(originals.len(), edges)?;
        Ok((g, originals))
    }
}

fn parse_field<T: std::str::FromStr>(tok: Option<&str>, line: usize, name: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| Error::Parse {
        line,
        message: format!("missing field {name}"),
    })?;
    tok.parse().map_err(|_| Error::Parse {
        line,
        message: format!("cannot parse {name} from {tok:?}"),
    })
}

/// `L = Σ_e w_e b_e b_eᵀ`
pub fn laplacian(g: &WeightedGraph) -> Matrix {
    laplacian_with_weights(g.n(), g.edges().iter().map(|e| (e.u, e.v, e.w)))
}

/// Laplacian of an arbitrary weighted edge list on `n` vertices.
pub fn laplacian_with_weights(
    n: usize,
    edges: impl IntoIterator<Item = (usize, usize, f64)>,
) -> Matrix {
    let mut l = Matrix::zeros(n);
    for (u, v, w) in edges {
        l[(u, u)] += w;
        l[(v, v)] += w;
        l[(u, v)] -= w;
        l[(v, u)] -= w;
    }
    l
}

/// Union-find with path halving and union by size.
#[derive(Clone, Debug)]
pub struct DisjointSets {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl DisjointSets {
    pub fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Merges the sets of `a` and `b`; returns false if they were already joined.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        true
    }
}

/// Benchmark graph families. All constructions use unit weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Construction {
    Complete {
        n: usize,
    },
    Ring {
        n: usize,
    },
    /// `num_cliques` copies of `K_{clique_size}` glued at vertex 0.
    CliqueStar {
        num_cliques: usize,
        clique_size: usize,
    },
    /// `G(n, p)` resampled until connected.
    ErdosRenyiConnected {
        n: usize,
        p: f64,
        seed: u64,
    },
}

impl fmt::Display for Construction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Construction::Complete { n } => write!(f, "k:{n}"),
            Construction::Ring { n } => write!(f, "ring:{n}"),
            Construction::CliqueStar {
                num_cliques,
                clique_size,
            } => write!(f, "cliquestar:{num_cliques},{clique_size}"),
            Construction::ErdosRenyiConnected { n, p, seed } => write!(f, "er:{n},{p}@{seed}"),
        }
    }
}

impl Construction {
    /// Number of vertices the construction produces.
    pub fn vertex_count(&self) -> usize {
        match *self {
            Construction::Complete { n }
            | Construction::Ring { n }
            | Construction::ErdosRenyiConnected { n, .. } => n,
            Construction::CliqueStar {
                num_cliques,
                clique_size,
            } => num_cliques * (clique_size - 1) + 1,
        }
    }

    /// Closed-form edge count, `None` for the random family.
    pub fn expected_edge_count(&self) -> Option<usize> {
        match *self {
            Construction::Complete { n } => Some(n * (n - 1) / 2),
            Construction::Ring { n } => Some(n),
            Construction::CliqueStar {
                num_cliques,
                clique_size,
            } => Some(num_cliques * clique_size * (clique_size - 1) / 2),
            Construction::ErdosRenyiConnected { .. } => None,
        }
    }

    pub fn build(&self) -> Result<WeightedGraph> {
        match *self {
            Construction::Complete { n } => {
                if n < 2 {
                    return Err(Error::InvalidParameter(format!(
                        "complete graph needs n >= 2, got {n}"
                    )));
                }
                WeightedGraph::new(n, complete_edges(&(0..n).collect::<Vec<_>>()))
            }
            Construction::Ring { n } => {
                if n < 3 {
                    return Err(Error::InvalidParameter(format!(
                        "ring needs n >= 3, got {n}"
                    )));
                }
                WeightedGraph::new(n, (0..n).map(|i| (i, (i + 1) % n, 1.0)))
            }
            Construction::CliqueStar {
                num_cliques,
                clique_size,
            } => {
                if num_cliques < 1 || clique_size < 3 {
                    return Err(Error::InvalidParameter(format!(
                        "clique star needs num_cliques >= 1 and clique_size >= 3, got ({num_cliques}, {clique_size})"
                    )));
                }
                let n = self.vertex_count();
                let mut edges = Vec::with_capacity(self.expected_edge_count().unwrap_or(0));
                for c in 0..num_cliques {
                    let mut members = vec![0];
                    members.extend((0..clique_size - 1).map(|j| 1 + c * (clique_size - 1) + j));
                    edges.extend(complete_edges(&members));
                }
                WeightedGraph::new(n, edges)
            }
            Construction::ErdosRenyiConnected { n, p, seed } => {
                if n < 2 || !(p > 0.0 && p <= 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "erdos-renyi needs n >= 2 and p in (0, 1], got ({n}, {p})"
                    )));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                for _ in 0..ER_MAX_ATTEMPTS {
                    let mut edges = Vec::new();
                    for u in 0..n {
                        for v in (u + 1)..n {
                            if rng.gen::<f64>() < p {
                                edges.push((u, v, 1.0));
                            }
                        }
                    }
                    match WeightedGraph::new(n, edges) {
                        Ok(g) => return Ok(g),
                        Err(Error::Disconnected { .. }) => continue,
                        Err(e) => return Err(e),
                    }
                }
                Err(Error::InvalidParameter(format!(
                    "no connected G({n}, {p}) sample in {ER_MAX_ATTEMPTS} attempts"
                )))
            }
        }
    }
}

impl std::str::FromStr for Construction {
    type Err = Error;

    /// Parses `k:n`, `ring:n`, `cliquestar:L,s` and `er:n,p` with an optional
    /// `@seed` suffix on the random family (default seed 0).
    fn from_str(spec: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("unrecognized construction spec '{spec}'"));
        let (kind, args) = spec.trim().split_once(':').ok_or_else(bad)?;
        let int = |s: &str| s.trim().parse::<usize>().map_err(|_| bad());
        match kind.to_ascii_lowercase().as_str() {
            "k" | "complete" => Ok(Construction::Complete { n: int(args)? }),
            "ring" | "cycle" => Ok(Construction::Ring { n: int(args)? }),
            "cliquestar" => {
                let (l, s) = args.split_once(',').ok_or_else(bad)?;
                Ok(Construction::CliqueStar {
                    num_cliques: int(l)?,
                    clique_size: int(s)?,
                })
            }
            "er" => {
                let (body, seed) = match args.split_once('@') {
                    Some((b, s)) => (b, s.trim().parse::<u64>().map_err(|_| bad())?),
                    None => (args, 0),
                };
                let (n, p) = body.split_once(',').ok_or_else(bad)?;
                let p = p.trim().parse::<f64>().map_err(|_| bad())?;
                Ok(Construction::ErdosRenyiConnected {
                    n: int(n)?,
                    p,
                    seed,
                })
            }
            _ => Err(bad()),
        }
    }
}

fn complete_edges(members: &[usize]) -> Vec<(usize, usize, f64)> {
    let mut edges = Vec::with_capacity(members.len() * members.len().saturating_sub(1) / 2);
    for (i, &a) in members.iter().enumerate() {
        for &b in &members[i + 1..] {
            edges.push((a, b, 1.0));
        }
    }
    edges
}

pub fn complete(n: usize) -> Result<WeightedGraph> {
    Construction::Complete { n }.build()
}

pub fn ring(n: usize) -> Result<WeightedGraph> {
    Construction::Ring { n }.build()
}

pub fn clique_star(num_cliques: usize, clique_size: usize) -> Result<WeightedGraph> {
    Construction::CliqueStar {
        num_cliques,
        clique_size,
    }
    .build()
}

pub fn path(n: usize) -> Result<WeightedGraph> {
    WeightedGraph::new(n, (0..n.saturating_sub(1)).map(|i| (i, i + 1, 1.0)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_vertex_laplacian() {
        let g = WeightedGraph::new(2, [(0, 1, 1.0)]).unwrap();
        let l = laplacian(&g);
        assert_eq!(l.as_slice(), &[1.0, -1.0, -1.0, 1.0]);
    }

    #[test]
    fn rejects_self_loops_and_bad_weights() {
        assert!(matches!(
            WeightedGraph::new(3, [(0, 0, 1.0), (0, 1, 1.0), (1, 2, 1.0)]),
            Err(Error::InvalidGraph(_))
        ));
        assert!(WeightedGraph::new(2, [(0, 1, 0.0)]).is_err());
        assert!(WeightedGraph::new(2, [(0, 1, f64::NAN)]).is_err());
        assert!(WeightedGraph::new(2, [(0, 2, 1.0)]).is_err());
    }

    #[test]
    fn rejects_disconnected() {
        let err = WeightedGraph::new(4, [(0, 1, 1.0), (2, 3, 1.0)]).unwrap_err();
        assert!(matches!(err, Error::Disconnected { components: 2 }));
    }

    #[test]
    fn canonical_orientation() {
        let g = WeightedGraph::new(3, [(2, 0, 1.0), (1, 2, 1.0)]).unwrap();
        assert_eq!((g.edge(0).u, g.edge(0).v), (0, 2));
        assert_eq!(g.incidence(0), IncidenceRow { head: 0, tail: 2 });
    }

    #[test]
    fn parallel_edges_are_distinct() {
        let g = WeightedGraph::new(2, [(0, 1, 1.0), (1, 0, 2.0)]).unwrap();
        assert_eq!(g.m(), 2);
        assert_eq!(laplacian(&g)[(0, 0)], 3.0);
    }

    #[test]
    fn triangle_and_clique_star_counts() {
        let k3 = complete(3).unwrap();
        assert_eq!(k3.m(), 3);
        let cs = clique_star(2, 3).unwrap();
        assert_eq!((cs.n(), cs.m()), (5, 6));
        assert_eq!(cs.degrees()[0], 4);
        let big = clique_star(10, 10).unwrap();
        assert_eq!((big.n(), big.m()), (91, 450));
    }

    #[test]
    fn clique_star_cliques_share_only_the_hub() {
        let g = clique_star(3, 4).unwrap();
        // each non-hub vertex sees exactly its own clique
        for (v, d) in g.degrees().into_iter().enumerate().skip(1) {
            assert_eq!(d, 3, "vertex {v}");
        }
        assert_eq!(g.degrees()[0], 9);
    }

    #[test]
    fn construction_edge_counts_over_grid() {
        for n in 2..12 {
            let c = Construction::Complete { n };
            assert_eq!(c.build().unwrap().m(), c.expected_edge_count().unwrap());
        }
        for n in 3..12 {
            let c = Construction::Ring { n };
            assert_eq!(c.build().unwrap().m(), c.expected_edge_count().unwrap());
        }
        for l in 1..5 {
            for s in 3..7 {
                let c = Construction::CliqueStar {
                    num_cliques: l,
                    clique_size: s,
                };
                let g = c.build().unwrap();
                assert_eq!(g.m(), c.expected_edge_count().unwrap());
                assert_eq!(g.n(), c.vertex_count());
            }
        }
    }

    #[test]
    fn invalid_construction_parameters() {
        assert!(matches!(
            Construction::CliqueStar {
                num_cliques: 0,
                clique_size: 4
            }
            .build(),
            Err(Error::InvalidParameter(_))
        ));
        assert!(Construction::CliqueStar {
            num_cliques: 2,
            clique_size: 2
        }
        .build()
        .is_err());
        assert!(Construction::Ring { n: 2 }.build().is_err());
        assert!(Construction::ErdosRenyiConnected {
            n: 5,
            p: 0.0,
            seed: 1
        }
        .build()
        .is_err());
    }

    #[test]
    fn erdos_renyi_is_seeded_and_connected() {
        let c = Construction::ErdosRenyiConnected {
            n: 20,
            p: 0.2,
            seed: 9,
        };
        let a = c.build().unwrap();
        let b = c.build().unwrap();
        assert_eq!(a, b);
        assert_eq!(a.id(), b.id());
    }

    #[test]
    fn file_round_trip_is_bit_faithful() {
        let g = WeightedGraph::new(3, [(0, 1, 0.1), (1, 2, 1.0 / 3.0), (0, 2, 2.5e-7)]).unwrap();
        let mut buf = Vec::new();
        g.write_to(&mut buf).unwrap();
        let back = WeightedGraph::read_from(buf.as_slice()).unwrap();
        assert_eq!(g, back);
        for (a, b) in g.edges().iter().zip(back.edges()) {
            assert_eq!(a.w.to_bits(), b.w.to_bits());
        }
    }

    #[test]
    fn reader_reports_line_numbers() {
        let text = "3 2\n0 1 1.0\n1 x 1.0\n";
        match WeightedGraph::read_from(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(WeightedGraph::read_from("3 3\n0 1 1\n".as_bytes()).is_err());
    }

    #[test]
    fn construction_specs_round_trip() {
        for spec in ["k:5", "ring:100", "cliquestar:100,100", "er:30,0.2@7"] {
            let c: Construction = spec.parse().unwrap();
            assert_eq!(c.to_string(), spec);
        }
        let c: Construction = "er:10,0.5".parse().unwrap();
        assert_eq!(
            c,
            Construction::ErdosRenyiConnected {
                n: 10,
                p: 0.5,
                seed: 0
            }
        );
        for bad in ["k", "k:x", "cliquestar:3", "er:5", "torus:4", "er:5,0.1@z"] {
            assert!(bad.parse::<Construction>().is_err(), "{bad}");
        }
    }
}
