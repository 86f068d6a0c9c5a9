//! Desk-scale reproductions of the spanning-tree sparsification results.
//!
//! Every experiment fans its trials out with rayon and collects them in trial
//! order, so a report depends only on `(parameters, base_seed)`. Trial `j`
//! draws from `trial_rng(base_seed, j)`. Reports carry no wall-clock data;
//! callers that want provenance wrap them.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{clique_star, complete, laplacian, Construction, WeightedGraph};
use crate::leverage::{laplacian_pinv, leverage_scores, LeverageProfile};
use crate::matrix::Matrix;
use crate::spectral::{eigvals_sym, NormalizedFrame, PencilExtremes};
use crate::srdiag::{binomial_lower_p_value, binomial_upper_p_value, ln_binomial_upper, ln_choose};
use crate::treesample::{enumerate_trees, reweight_tree, trial_rng, SpanningTree, WilsonSampler};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Explicit constant in the single-tree upper bound envelope `C · ln n`.
pub const SINGLE_TREE_ENVELOPE_CONSTANT: f64 = 100.0;

/// Finite-sample gate for the sum-of-trees sparsifier.
pub const SPARSIFIER_PASS_GATE: f64 = 0.9;

/// Finite-sample gate for the multi-tree lower bound.
pub const VIOLATION_GATE: f64 = 0.95;

/// Significance level of the one-sided binomial consistency tests.
pub const CONSISTENCY_LEVEL: f64 = 0.01;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphDescriptor {
    pub label: String,
    pub n: usize,
    pub m: usize,
    pub fingerprint: String,
}

impl GraphDescriptor {
    pub fn new(label: &str, g: &WeightedGraph) -> Self {
        Self {
            label: label.to_string(),
            n: g.n(),
            m: g.m(),
            fingerprint: format!("{:016x}", g.id()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialExtremes {
    pub trial: usize,
    pub seed: u64,
    pub lambda_min_pos: f64,
    pub lambda_max: f64,
}

fn seeds(base_seed: u64, trials: usize) -> Vec<u64> {
    (0..trials as u64)
        .map(|j| base_seed.wrapping_add(j))
        .collect()
}

fn run_trials<T: Send>(
    trials: usize,
    f: impl Fn(usize) -> Result<T> + Sync + Send,
) -> Result<Vec<T>> {
    (0..trials).into_par_iter().map(f).collect()
}

fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    }
}

fn extremes_csv(rows: &[TrialExtremes], eps: Option<f64>) -> String {
    let mut out = String::from("trial,seed,lambda_min_pos,lambda_max");
    if eps.is_some() {
        out.push_str(",within");
    }
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{:e},{:e}",
            r.trial, r.seed, r.lambda_min_pos, r.lambda_max
        ));
        if let Some(eps) = eps {
            let p = PencilExtremes {
                lambda_min_pos: r.lambda_min_pos,
                lambda_max: r.lambda_max,
            };
            out.push_str(if p.within(eps) { ",1" } else { ",0" });
        }
        out.push('\n');
    }
    out
}

/// Pencil extremes of a weighted spanning tree against `G`.
///
/// The nonzero spectrum of `(L_G^†)^{1/2} L_T (L_G^†)^{1/2}` equals the
/// spectrum of the `(n−1)×(n−1)` Gram matrix
/// `√(w_a w_b) · b_aᵀ L_G^† b_b`, so no `n×n` products are needed.
pub fn tree_extremes(
    g: &WeightedGraph,
    pinv: &Matrix,
    edges: &[usize],
    weights: &[f64],
) -> Result<PencilExtremes> {
    let k = edges.len();
    let mut gram = Matrix::zeros(k);
    for a in 0..k {
        let ea = g.edge(edges[a]);
        for b in a..k {
            let eb = g.edge(edges[b]);
            let r =
                pinv[(ea.u, eb.u)] - pinv[(ea.u, eb.v)] - pinv[(ea.v, eb.u)] + pinv[(ea.v, eb.v)];
            let x = (weights[a] * weights[b]).sqrt() * r;
            gram[(a, b)] = x;
            gram[(b, a)] = x;
        }
    }
    let vals = eigvals_sym(&gram)?;
    Ok(PencilExtremes {
        lambda_min_pos: vals.first().copied().unwrap_or(0.0).max(0.0),
        lambda_max: vals.last().copied().unwrap_or(0.0),
    })
}

// ---------------------------------------------------------------------------
// Single reweighted tree, upper side

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SingleTreeUpperReport {
    pub schema_version: u32,
    pub experiment: String,
    pub graph: GraphDescriptor,
    pub trials: usize,
    pub base_seed: u64,
    pub seeds: Vec<u64>,
    pub per_trial: Vec<TrialExtremes>,
    pub max_lambda: f64,
    pub median_lambda: f64,
    pub ln_n: f64,
    pub log2_n: f64,
    pub envelope: f64,
    pub envelope_note: String,
    /// `max λ_max / ln n`
    pub empirical_constant: f64,
    pub passed: bool,
}

impl SingleTreeUpperReport {
    pub fn to_csv(&self) -> String {
        extremes_csv(&self.per_trial, None)
    }
}

/// `λ_max` of one inverse-leverage reweighted tree per trial, against
/// `100 · ln n`.
pub fn run_single_tree_upper(
    g: &WeightedGraph,
    label: &str,
    trials: usize,
    base_seed: u64,
) -> Result<SingleTreeUpperReport> {
    let lev = leverage_scores(g)?;
    let pinv = laplacian_pinv(g)?;
    let per_trial = run_trials(trials, |j| {
        let mut rng = trial_rng(base_seed, j as u64);
        let tree = reweight_tree(&WilsonSampler::new(g).sample(&mut rng), &lev)?;
        let ex = tree_extremes(g, &pinv, tree.edges(), tree.weights())?;
        Ok(TrialExtremes {
            trial: j,
            seed: base_seed.wrapping_add(j as u64),
            lambda_min_pos: ex.lambda_min_pos,
            lambda_max: ex.lambda_max,
        })
    })?;
    let lambdas: Vec<f64> = per_trial.iter().map(|t| t.lambda_max).collect();
    let max_lambda = lambdas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ln_n = (g.n() as f64).ln();
    let envelope = SINGLE_TREE_ENVELOPE_CONSTANT * ln_n;
    Ok(SingleTreeUpperReport {
        schema_version: REPORT_SCHEMA_VERSION,
        experiment: "single_tree_upper".into(),
        graph: GraphDescriptor::new(label, g),
        trials,
        base_seed,
        seeds: seeds(base_seed, trials),
        median_lambda: median(&lambdas),
        max_lambda,
        ln_n,
        log2_n: (g.n() as f64).log2(),
        envelope,
        envelope_note: "explicit constant 100 from the concentration argument with R = mu = 1; \
                        the asymptotic statement only promises O(log n)"
            .into(),
        empirical_constant: max_lambda / ln_n,
        passed: max_lambda <= envelope,
        per_trial,
    })
}

// ---------------------------------------------------------------------------
// Average of t reweighted trees

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum TreeCount {
    Explicit {
        t: usize,
    },
    /// `t = ceil(c · ε^{−2} · (ln n)²)`
    Multiplier {
        c: f64,
    },
}

impl TreeCount {
    pub fn resolve(&self, n: usize, eps: f64) -> Result<usize> {
        match *self {
            TreeCount::Explicit { t } if t >= 1 => Ok(t),
            TreeCount::Explicit { .. } => Err(Error::InvalidParameter(
                "tree count must be at least 1".into(),
            )),
            TreeCount::Multiplier { c } if c > 0.0 && c.is_finite() => {
                let ln_n = (n as f64).ln();
                Ok(((c * ln_n * ln_n / (eps * eps)).ceil() as usize).max(1))
            }
            TreeCount::Multiplier { c } => Err(Error::InvalidParameter(format!(
                "c_mult must be positive, got {c}"
            ))),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SparsifierReport {
    pub schema_version: u32,
    pub experiment: String,
    pub graph: GraphDescriptor,
    pub t: usize,
    pub tree_count: TreeCount,
    pub eps_target: f64,
    /// Per-tree norm bound after scaling by `1/t`.
    pub r_normalization: f64,
    pub trials: usize,
    pub base_seed: u64,
    pub seeds: Vec<u64>,
    pub per_trial: Vec<TrialExtremes>,
    pub pass_fraction: f64,
    pub gate: f64,
    pub mean_deviation: f64,
    pub ln_n: f64,
    pub log2_n: f64,
    pub passed: bool,
}

impl SparsifierReport {
    pub fn to_csv(&self) -> String {
        extremes_csv(&self.per_trial, Some(self.eps_target))
    }
}

/// `L_H = (1/t) Σ_i w'(T_i)` for `t` trees drawn from one generator.
pub fn averaged_tree_laplacian(
    g: &WeightedGraph,
    lev: &LeverageProfile,
    t: usize,
    rng: &mut impl rand::Rng,
) -> Result<Matrix> {
    let mut sampler = WilsonSampler::new(g);
    let mut l = Matrix::zeros(g.n());
    let scale = 1.0 / t as f64;
    for _ in 0..t {
        for e in sampler.sample_edges(rng) {
            let edge = g.edge(e);
            let w = scale * edge.w / lev.get(e);
            l[(edge.u, edge.u)] += w;
            l[(edge.v, edge.v)] += w;
            l[(edge.u, edge.v)] -= w;
            l[(edge.v, edge.u)] -= w;
        }
    }
    Ok(l)
}

pub fn run_sum_trees(
    g: &WeightedGraph,
    label: &str,
    eps: f64,
    count: TreeCount,
    trials: usize,
    base_seed: u64,
) -> Result<SparsifierReport> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "eps must lie in (0, 1), got {eps}"
        )));
    }
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be positive".into()));
    }
    let t = count.resolve(g.n(), eps)?;
    let lev = leverage_scores(g)?;
    let frame = NormalizedFrame::new(&laplacian(g))?;
    let per_trial = run_trials(trials, |j| {
        let mut rng = trial_rng(base_seed, j as u64);
        let l_h = averaged_tree_laplacian(g, &lev, t, &mut rng)?;
        let ex = frame.extremes(&l_h)?;
        Ok(TrialExtremes {
            trial: j,
            seed: base_seed.wrapping_add(j as u64),
            lambda_min_pos: ex.lambda_min_pos,
            lambda_max: ex.lambda_max,
        })
    })?;
    let within = per_trial
        .iter()
        .filter(|r| {
            PencilExtremes {
                lambda_min_pos: r.lambda_min_pos,
                lambda_max: r.lambda_max,
            }
            .within(eps)
        })
        .count();
    let pass_fraction = within as f64 / trials as f64;
    let mean_deviation = per_trial
        .iter()
        .map(|r| {
            (1.0 - r.lambda_min_pos)
                .abs()
                .max((r.lambda_max - 1.0).abs())
        })
        .sum::<f64>()
        / trials as f64;
    Ok(SparsifierReport {
        schema_version: REPORT_SCHEMA_VERSION,
        experiment: "sum_trees".into(),
        graph: GraphDescriptor::new(label, g),
        t,
        tree_count: count,
        eps_target: eps,
        r_normalization: 1.0 / t as f64,
        trials,
        base_seed,
        seeds: seeds(base_seed, trials),
        per_trial,
        pass_fraction,
        gate: SPARSIFIER_PASS_GATE,
        mean_deviation,
        ln_n: (g.n() as f64).ln(),
        log2_n: (g.n() as f64).log2(),
        passed: pass_fraction >= SPARSIFIER_PASS_GATE,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TTrendReport {
    pub schema_version: u32,
    pub graph: GraphDescriptor,
    pub eps: f64,
    pub trials: usize,
    pub base_seed: u64,
    pub t_values: Vec<usize>,
    pub mean_deviations: Vec<f64>,
    /// Mean deviation at `4t₀` below the one at `t₀`.
    pub decreasing: bool,
}

/// Mean `max |extreme − 1|` at `t₀, 2t₀, 4t₀` with shared seeds.
pub fn t_trend_check(
    g: &WeightedGraph,
    label: &str,
    eps: f64,
    t0: usize,
    trials: usize,
    base_seed: u64,
) -> Result<TTrendReport> {
    let t_values = vec![t0, 2 * t0, 4 * t0];
    let mean_deviations = t_values
        .iter()
        .map(|&t| {
            Ok(
                run_sum_trees(g, label, eps, TreeCount::Explicit { t }, trials, base_seed)?
                    .mean_deviation,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TTrendReport {
        schema_version: REPORT_SCHEMA_VERSION,
        graph: GraphDescriptor::new(label, g),
        eps,
        trials,
        base_seed,
        decreasing: mean_deviations[2] < mean_deviations[0],
        t_values,
        mean_deviations,
    })
}

// ---------------------------------------------------------------------------
// Several trees on the clique star, degree violations

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiTreeLowerParams {
    pub num_cliques: usize,
    pub clique_size: usize,
    pub eps: f64,
    pub trials: usize,
    pub base_seed: u64,
    /// Replaces `max(1, floor(0.05 ε^{−2} ln n))`.
    pub t_override: Option<usize>,
    /// Refuse `ε` outside `(5/s, 1/2)`.
    pub enforce_window: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegreeViolationTrial {
    pub trial: usize,
    pub seed: u64,
    pub over: usize,
    pub under: usize,
    /// Vertex whose `wdeg_H / wdeg_G` is farthest from 1.
    pub witness: usize,
    pub witness_ratio: f64,
}

impl DegreeViolationTrial {
    pub fn violated(&self) -> bool {
        self.over + self.under > 0
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MultiTreeLowerReport {
    pub schema_version: u32,
    pub experiment: String,
    pub graph: GraphDescriptor,
    pub num_cliques: usize,
    pub clique_size: usize,
    /// `s − 1`, the degree of every non-hub vertex.
    pub d: usize,
    pub d_role: String,
    pub hub_degree: usize,
    pub eps: f64,
    pub window: (f64, f64),
    pub window_enforced: bool,
    pub t: usize,
    pub t_rule: String,
    pub ln_n: f64,
    pub log2_n: f64,
    pub leverage_method: String,
    pub leverage_range: (f64, f64),
    pub trials: usize,
    pub base_seed: u64,
    pub seeds: Vec<u64>,
    pub per_trial: Vec<DegreeViolationTrial>,
    pub violation_fraction: f64,
    pub gate: f64,
    pub passed: bool,
}

/// Counts vertices whose weighted degree leaves `[(1−ε)·wdeg_G, (1+ε)·wdeg_G]`.
fn degree_violations(wdeg_g: &[f64], wdeg_h: &[f64], eps: f64) -> (usize, usize, usize, f64) {
    let mut over = 0;
    let mut under = 0;
    let mut witness = 0;
    let mut witness_ratio = 1.0;
    for (v, (&dg, &dh)) in wdeg_g.iter().zip(wdeg_h).enumerate() {
        let ratio = dh / dg;
        if ratio > 1.0 + eps {
            over += 1;
        } else if ratio < 1.0 - eps {
            under += 1;
        }
        if (ratio - 1.0).abs() > (witness_ratio - 1.0_f64).abs() {
            witness = v;
            witness_ratio = ratio;
        }
    }
    (over, under, witness, witness_ratio)
}

fn averaged_weighted_degrees(
    g: &WeightedGraph,
    lev: &LeverageProfile,
    trees: &[Vec<usize>],
) -> Vec<f64> {
    let mut deg = vec![0.0; g.n()];
    let scale = 1.0 / trees.len() as f64;
    for tree in trees {
        for &e in tree {
            let edge = g.edge(e);
            let w = scale * edge.w / lev.get(e);
            deg[edge.u] += w;
            deg[edge.v] += w;
        }
    }
    deg
}

pub fn run_multi_tree_lower(p: &MultiTreeLowerParams) -> Result<MultiTreeLowerReport> {
    let s = p.clique_size;
    let window = (5.0 / s as f64, 0.5);
    if !(p.eps > 0.0 && p.eps < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "eps must lie in (0, 1), got {}",
            p.eps
        )));
    }
    if p.enforce_window && !(p.eps > window.0 && p.eps < window.1) {
        return Err(Error::InvalidParameter(format!(
            "eps = {} is outside the admissible window ({}, {}) for clique size {s}",
            p.eps, window.0, window.1
        )));
    }
    if p.trials == 0 {
        return Err(Error::InvalidParameter("trials must be positive".into()));
    }
    let g = clique_star(p.num_cliques, s)?;
    let ln_n = (g.n() as f64).ln();
    let (t, t_rule) = match p.t_override {
        Some(t) if t >= 1 => (t, "override".to_string()),
        Some(_) => {
            return Err(Error::InvalidParameter(
                "tree count must be at least 1".into(),
            ))
        }
        None => (
            ((0.05 * ln_n / (p.eps * p.eps)).floor() as usize).max(1),
            "max(1, floor(0.05 * eps^-2 * ln n))".to_string(),
        ),
    };
    // Each clique plus the hub is a biconnected block, so its scores come
    // from that block alone.
    let lev = leverage_scores(&g)?;
    let wdeg_g = g.weighted_degrees();
    let per_trial = run_trials(p.trials, |j| {
        let mut rng = trial_rng(p.base_seed, j as u64);
        let mut sampler = WilsonSampler::new(&g);
        let trees: Vec<Vec<usize>> = (0..t).map(|_| sampler.sample_edges(&mut rng)).collect();
        let wdeg_h = averaged_weighted_degrees(&g, &lev, &trees);
        let (over, under, witness, witness_ratio) = degree_violations(&wdeg_g, &wdeg_h, p.eps);
        Ok(DegreeViolationTrial {
            trial: j,
            seed: p.base_seed.wrapping_add(j as u64),
            over,
            under,
            witness,
            witness_ratio,
        })
    })?;
    let violation_fraction =
        per_trial.iter().filter(|r| r.violated()).count() as f64 / p.trials as f64;
    let label = Construction::CliqueStar {
        num_cliques: p.num_cliques,
        clique_size: s,
    }
    .to_string();
    Ok(MultiTreeLowerReport {
        schema_version: REPORT_SCHEMA_VERSION,
        experiment: "multi_tree_lower".into(),
        graph: GraphDescriptor::new(&label, &g),
        num_cliques: p.num_cliques,
        clique_size: s,
        d: s - 1,
        d_role: "clique_size - 1, the degree of every non-hub vertex; the hub has degree num_cliques * (clique_size - 1)".into(),
        hub_degree: p.num_cliques * (s - 1),
        eps: p.eps,
        window,
        window_enforced: p.enforce_window,
        t,
        t_rule,
        ln_n,
        log2_n: (g.n() as f64).log2(),
        leverage_method: "per biconnected block: every clique together with the hub is one block, \
                          so each clique's scores are computed on that clique subgraph alone"
            .into(),
        leverage_range: (lev.min(), lev.max()),
        trials: p.trials,
        base_seed: p.base_seed,
        seeds: seeds(p.base_seed, p.trials),
        per_trial,
        violation_fraction,
        gate: VIOLATION_GATE,
        passed: violation_fraction >= VIOLATION_GATE,
    })
}

/// Exact probability that a single reweighted tree violates some weighted
/// degree by more than `ε`, by enumerating every spanning tree.
pub fn exact_single_tree_violation_probability(g: &WeightedGraph, eps: f64) -> Result<f64> {
    let table = enumerate_trees(g)?;
    let lev = leverage_scores(g)?;
    let wdeg_g = g.weighted_degrees();
    let mut total = 0.0;
    for (edges, prob) in table.entries() {
        let wdeg_h = averaged_weighted_degrees(g, &lev, std::slice::from_ref(edges));
        let (over, under, _, _) = degree_violations(&wdeg_g, &wdeg_h, eps);
        if over + under > 0 {
            total += prob;
        }
    }
    Ok(total)
}

// ---------------------------------------------------------------------------
// Single tree on the clique star, star certificates

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StarCertificate {
    pub trial: usize,
    pub seed: u64,
    /// Non-hub vertex of maximum tree degree.
    pub vertex: usize,
    pub degree: usize,
    /// `d*/2`: the tree is certified not to satisfy `L_T ⪯ (d*/2) L_G`.
    pub certified_ratio: f64,
    /// `xᵀ L_T x / xᵀ L_G x` for the star test vector on the full graph.
    pub test_quotient: f64,
    pub valid: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SingleTreeLowerReport {
    pub schema_version: u32,
    pub experiment: String,
    pub graph: GraphDescriptor,
    pub num_cliques: usize,
    pub clique_size: usize,
    /// `s − 1`, the graph degree of every non-hub vertex.
    pub d: usize,
    pub d_role: String,
    pub trials: usize,
    pub base_seed: u64,
    pub seeds: Vec<u64>,
    pub per_trial: Vec<StarCertificate>,
    /// `(d*, count)` pairs in increasing `d*`.
    pub degree_histogram: Vec<(usize, usize)>,
    pub ln_s: f64,
    pub log2_s: f64,
    /// `(ln s) / 2`
    pub ratio_threshold: f64,
    /// Fraction of trials with a valid certificate of ratio at least the threshold.
    pub frequency_at_threshold: f64,
    pub valid_fraction: f64,
}

/// Rayleigh quotient of the star vector `x = (d, −1, …, −1)/√(d² + d)` on
/// `center` and its tree neighbours.
fn star_quotient(
    g: &WeightedGraph,
    incident: &[Vec<usize>],
    tree: &SpanningTree,
    center: usize,
) -> f64 {
    let neighbours: Vec<usize> = tree
        .edges()
        .iter()
        .filter(|&&e| g.edge(e).touches(center))
        .map(|&e| g.edge(e).other(center))
        .collect();
    let d = neighbours.len() as f64;
    let norm = (d * d + d).sqrt();
    let x = |v: usize| -> f64 {
        if v == center {
            d / norm
        } else if neighbours.contains(&v) {
            -1.0 / norm
        } else {
            0.0
        }
    };
    let mut touching: Vec<usize> = std::iter::once(center)
        .chain(neighbours.iter().copied())
        .flat_map(|v| incident[v].iter().copied())
        .collect();
    touching.sort_unstable();
    touching.dedup();
    let mut num = 0.0;
    let mut den = 0.0;
    for &e in &touching {
        let edge = g.edge(e);
        let diff = x(edge.u) - x(edge.v);
        den += edge.w * diff * diff;
        if let Ok(pos) = tree.edges().binary_search(&e) {
            num += tree.weights()[pos] * diff * diff;
        }
    }
    num / den
}

pub fn run_single_tree_lower(
    num_cliques: usize,
    clique_size: usize,
    trials: usize,
    base_seed: u64,
) -> Result<SingleTreeLowerReport> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be positive".into()));
    }
    let g = clique_star(num_cliques, clique_size)?;
    let lev = leverage_scores(&g)?;
    let incident = g.incident_edges();
    let per_trial = run_trials(trials, |j| {
        let mut rng = trial_rng(base_seed, j as u64);
        let tree = reweight_tree(&WilsonSampler::new(&g).sample(&mut rng), &lev)?;
        let degrees = tree.degrees(&g);
        let d_star = degrees[1..].iter().copied().max().unwrap_or(0);
        let mut best: Option<(usize, f64)> = None;
        for v in (1..g.n()).filter(|&v| degrees[v] == d_star) {
            let q = star_quotient(&g, &incident, &tree, v);
            if best.is_none_or(|(_, bq)| q > bq) {
                best = Some((v, q));
            }
        }
        let (vertex, test_quotient) = best.expect("non-hub vertices exist");
        let certified_ratio = d_star as f64 / 2.0;
        Ok(StarCertificate {
            trial: j,
            seed: base_seed.wrapping_add(j as u64),
            vertex,
            degree: d_star,
            certified_ratio,
            test_quotient,
            valid: test_quotient > certified_ratio,
        })
    })?;
    let mut hist = std::collections::BTreeMap::new();
    for c in &per_trial {
        *hist.entry(c.degree).or_insert(0usize) += 1;
    }
    let ln_s = (clique_size as f64).ln();
    let threshold = ln_s / 2.0;
    let hits = per_trial
        .iter()
        .filter(|c| c.valid && c.certified_ratio >= threshold)
        .count();
    let valid = per_trial.iter().filter(|c| c.valid).count();
    let label = Construction::CliqueStar {
        num_cliques,
        clique_size,
    }
    .to_string();
    Ok(SingleTreeLowerReport {
        schema_version: REPORT_SCHEMA_VERSION,
        experiment: "single_tree_lower".into(),
        graph: GraphDescriptor::new(&label, &g),
        num_cliques,
        clique_size,
        d: clique_size - 1,
        d_role: "clique_size - 1 bounds the tree degree d* of every non-hub vertex".into(),
        trials,
        base_seed,
        seeds: seeds(base_seed, trials),
        per_trial,
        degree_histogram: hist.into_iter().collect(),
        ln_s,
        log2_s: (clique_size as f64).log2(),
        ratio_threshold: threshold,
        frequency_at_threshold: hits as f64 / trials as f64,
        valid_fraction: valid as f64 / trials as f64,
    })
}

// ---------------------------------------------------------------------------
// Degree law of uniform trees of K_n

/// Law of a fixed vertex's degree in a uniform tree of `K_n`,
/// `1 + Bin(n − 2, 1/n)`, indexed by degree `0..n`.
pub fn prufer_degree_pmf(n: usize) -> Vec<f64> {
    let mut pmf = vec![0.0; n];
    let (k, p) = ((n - 2) as u64, 1.0 / n as f64);
    for d in 1..n {
        let i = (d - 1) as u64;
        pmf[d] = (ln_choose(k, i) + i as f64 * p.ln() + (k - i) as f64 * (-p).ln_1p()).exp();
    }
    pmf
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DegreeHistogram {
    pub schema_version: u32,
    pub n: usize,
    pub vertex: usize,
    pub samples: usize,
    pub base_seed: u64,
    /// Observed counts indexed by degree.
    pub counts: Vec<u64>,
    pub reference_pmf: Vec<f64>,
    /// Number of distinct observed degrees.
    pub bins: usize,
    pub tv_distance: f64,
    pub gate: f64,
    pub passed: bool,
}

pub fn total_variation(counts: &[u64], pmf: &[f64]) -> f64 {
    let total: u64 = counts.iter().sum();
    0.5 * counts
        .iter()
        .zip(pmf)
        .map(|(&c, &p)| (c as f64 / total as f64 - p).abs())
        .sum::<f64>()
}

/// Degree histogram of vertex 0 over `samples` Wilson trees of `K_n`.
pub fn run_degree_dist(n: usize, samples: usize, base_seed: u64) -> Result<DegreeHistogram> {
    if n < 3 {
        return Err(Error::InvalidParameter(format!(
            "degree law needs n >= 3, got {n}"
        )));
    }
    if samples == 0 {
        return Err(Error::InvalidParameter("samples must be positive".into()));
    }
    let g = complete(n)?;
    let incident = g.incident_edges();
    let counts = (0..samples as u64)
        .into_par_iter()
        .fold(
            || (WilsonSampler::new(&g), vec![0u64; n]),
            |(mut sampler, mut counts), j| {
                let mut rng = trial_rng(base_seed, j);
                let mut edges = sampler.sample_edges(&mut rng);
                edges.sort_unstable();
                let d = incident[0]
                    .iter()
                    .filter(|e| edges.binary_search(e).is_ok())
                    .count();
                counts[d] += 1;
                (sampler, counts)
            },
        )
        .map(|(_, c)| c)
        .reduce(
            || vec![0u64; n],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    let pmf = prufer_degree_pmf(n);
    let bins = counts.iter().filter(|&&c| c > 0).count();
    let tv = total_variation(&counts, &pmf);
    let gate = 4.0 * (bins as f64 / samples as f64).sqrt();
    Ok(DegreeHistogram {
        schema_version: REPORT_SCHEMA_VERSION,
        n,
        vertex: 0,
        samples,
        base_seed,
        counts,
        reference_pmf: pmf,
        bins,
        tv_distance: tv,
        gate,
        passed: tv <= gate,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExactDegreeLaw {
    pub n: usize,
    pub enumerated_pmf: Vec<f64>,
    pub reference_pmf: Vec<f64>,
    pub max_abs_error: f64,
}

/// Degree law of vertex 0 over every spanning tree of `K_n`; `n ≤ 7`.
pub fn exact_degree_law(n: usize) -> Result<ExactDegreeLaw> {
    if n < 3 {
        return Err(Error::InvalidParameter(format!(
            "degree law needs n >= 3, got {n}"
        )));
    }
    let g = complete(n)?;
    let table = enumerate_trees(&g)?;
    let mut pmf = vec![0.0; n];
    for (edges, prob) in table.entries() {
        let d = edges.iter().filter(|&&e| g.edge(e).touches(0)).count();
        pmf[d] += prob;
    }
    let reference = prufer_degree_pmf(n);
    let max_abs_error = pmf
        .iter()
        .zip(&reference)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(ExactDegreeLaw {
        n,
        enumerated_pmf: pmf,
        reference_pmf: reference,
        max_abs_error,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DegreeTailReport {
    pub schema_version: u32,
    pub n: usize,
    pub min_degree: usize,
    pub trials: usize,
    pub base_seed: u64,
    /// Trees with some vertex of degree at least `min_degree`.
    pub observed: usize,
    /// `Pr[1 + Bin(n−2, 1/n) ≥ min_degree]` for one fixed vertex.
    pub single_vertex_probability: f64,
    /// `min(1, n · single)`
    pub union_upper: f64,
    /// A single fixed vertex is a sub-event: `single ≤ Pr[event]`.
    pub lower_envelope: f64,
    pub p_value_above_union: f64,
    pub p_value_below_single: f64,
    pub consistent: bool,
}

/// How often a uniform tree of `K_n` has a vertex of degree `≥ min_degree`,
/// compared to the exact single-vertex tail and its union bound.
pub fn degree_tail_check(
    n: usize,
    min_degree: usize,
    trials: usize,
    base_seed: u64,
) -> Result<DegreeTailReport> {
    if n < 3 || min_degree < 1 || trials == 0 {
        return Err(Error::InvalidParameter(format!(
            "degree tail needs n >= 3, min_degree >= 1 and trials > 0, got ({n}, {min_degree}, {trials})"
        )));
    }
    let g = complete(n)?;
    let hits: Vec<bool> = run_trials(trials, |j| {
        let mut rng = trial_rng(base_seed, j as u64);
        let tree = WilsonSampler::new(&g).sample(&mut rng);
        Ok(tree.degrees(&g).into_iter().any(|d| d >= min_degree))
    })?;
    let observed = hits.iter().filter(|&&h| h).count();
    let single = ln_binomial_upper((n - 2) as u64, 1.0 / n as f64, (min_degree - 1) as u64).exp();
    let union_upper = (n as f64 * single).min(1.0);
    let above = binomial_upper_p_value(trials as u64, union_upper, observed as u64);
    let below = binomial_lower_p_value(trials as u64, single, observed as u64);
    Ok(DegreeTailReport {
        schema_version: REPORT_SCHEMA_VERSION,
        n,
        min_degree,
        trials,
        base_seed,
        observed,
        single_vertex_probability: single,
        union_upper,
        lower_envelope: single,
        p_value_above_union: above,
        p_value_below_single: below,
        consistent: above >= CONSISTENCY_LEVEL && below >= CONSISTENCY_LEVEL,
    })
}

// ---------------------------------------------------------------------------
// Unweighted trees

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ThinTreeReport {
    pub schema_version: u32,
    pub experiment: String,
    pub graph: GraphDescriptor,
    pub trials: usize,
    pub base_seed: u64,
    pub seeds: Vec<u64>,
    pub per_trial: Vec<TrialExtremes>,
    pub max_leverage: f64,
    pub ln_n: f64,
    pub log2_n: f64,
    /// `100 · max ℓ · ln n`
    pub envelope: f64,
    pub max_lambda: f64,
    pub passed: bool,
}

impl ThinTreeReport {
    pub fn to_csv(&self) -> String {
        extremes_csv(&self.per_trial, None)
    }
}

/// `λ_max` of the normalized tree with its original unit weights.
pub fn run_unweighted_thin_tree(
    g: &WeightedGraph,
    label: &str,
    trials: usize,
    base_seed: u64,
) -> Result<ThinTreeReport> {
    if !g.is_unit_weight() {
        return Err(Error::InvalidParameter(
            "thin-tree experiment needs a unit-weight graph".into(),
        ));
    }
    let lev = leverage_scores(g)?;
    let pinv = laplacian_pinv(g)?;
    let per_trial = run_trials(trials, |j| {
        let mut rng = trial_rng(base_seed, j as u64);
        let tree = WilsonSampler::new(g).sample(&mut rng);
        let ex = tree_extremes(g, &pinv, tree.edges(), tree.weights())?;
        Ok(TrialExtremes {
            trial: j,
            seed: base_seed.wrapping_add(j as u64),
            lambda_min_pos: ex.lambda_min_pos,
            lambda_max: ex.lambda_max,
        })
    })?;
    let max_lambda = per_trial
        .iter()
        .map(|t| t.lambda_max)
        .fold(f64::NEG_INFINITY, f64::max);
    let ln_n = (g.n() as f64).ln();
    let envelope = SINGLE_TREE_ENVELOPE_CONSTANT * lev.max() * ln_n;
    Ok(ThinTreeReport {
        schema_version: REPORT_SCHEMA_VERSION,
        experiment: "unweighted_thin_tree".into(),
        graph: GraphDescriptor::new(label, g),
        trials,
        base_seed,
        seeds: seeds(base_seed, trials),
        per_trial,
        max_leverage: lev.max(),
        ln_n,
        log2_n: (g.n() as f64).log2(),
        envelope,
        max_lambda,
        passed: max_lambda <= envelope,
    })
}

// ---------------------------------------------------------------------------
// Test corpus

/// Deterministic weights in `[0.5, 2]` on the edges of `g`.
pub fn with_random_weights(g: &WeightedGraph, seed: u64) -> Result<WeightedGraph> {
    use rand::Rng;
    let mut rng = trial_rng(seed, 0);
    WeightedGraph::new(
        g.n(),
        g.edges()
            .iter()
            .map(|e| (e.u, e.v, rng.gen_range(0.5..=2.0)))
            .collect::<Vec<_>>(),
    )
}

/// Named graphs shared by tests, benchmarks and the CLI. Graphs above 100
/// vertices are included only when `include_large` is set.
pub fn corpus(include_large: bool) -> Result<Vec<(String, WeightedGraph)>> {
    let mut out: Vec<(String, WeightedGraph)> = Vec::new();
    let mut add = |label: &str, g: WeightedGraph| out.push((label.to_string(), g));
    for spec in [
        "k:3",
        "k:4",
        "k:5",
        "k:6",
        "ring:6",
        "ring:9",
        "ring:30",
        "cliquestar:2,3",
        "cliquestar:3,3",
        "cliquestar:4,5",
        "er:8,0.4@3",
        "er:30,0.2@1",
        "k:20",
        "ring:100",
        "k:100",
    ] {
        let c: Construction = spec.parse()?;
        add(spec, c.build()?);
    }
    add("path:5", crate::graph::path(5)?);
    add(
        "tri:1,1,2",
        WeightedGraph::new(3, [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 2.0)])?,
    );
    add(
        "diamond:weighted",
        WeightedGraph::new(
            4,
            [
                (0, 1, 1.0),
                (1, 2, 2.0),
                (2, 3, 3.0),
                (3, 0, 0.5),
                (0, 2, 1.5),
            ],
        )?,
    );
    add(
        "multi:2",
        WeightedGraph::new(3, [(0, 1, 1.0), (0, 1, 2.0), (1, 2, 1.0), (0, 2, 0.25)])?,
    );
    add("k:5~w", with_random_weights(&complete(5)?, 5)?);
    add(
        "er:8,0.4@3~w",
        with_random_weights(&"er:8,0.4@3".parse::<Construction>()?.build()?, 8)?,
    );
    add(
        "er:40,0.15@2~w",
        with_random_weights(&"er:40,0.15@2".parse::<Construction>()?.build()?, 40)?,
    );
    if include_large {
        for spec in ["k:500", "cliquestar:100,100", "er:1000,0.01@7", "ring:2000"] {
            let c: Construction = spec.parse()?;
            add(spec, c.build()?);
        }
    }
    Ok(out)
}
