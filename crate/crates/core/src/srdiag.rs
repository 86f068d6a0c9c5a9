//! Diagnostics for the Strongly Rayleigh concentration argument, measured on
//! spanning-tree measures where every conditional expectation is exact.
//!
//! * shrinking marginals: conditioning on edges never raises another edge's
//!   marginal;
//! * the Doob martingale `M_i = E[Σ_{e∈T} A_e | γ_1..γ_i]` over a uniformly
//!   ordered tree, with its increments `X_i` and predictable quadratic
//!   variation `W_i`;
//! * binomial tail machinery for the reverse Chernoff bound and the
//!   Stirling-type binomial lower bound.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{laplacian, DisjointSets, WeightedGraph};
use crate::leverage::{conditional_marginals, leverage_scores, ContractionState};
use crate::matrix::Matrix;
use crate::spectral::{check_symmetric_triangle, eigvals_sym, spectral_norm, NormalizedFrame};
use crate::treesample::{reweight_tree, trial_rng, SpanningTree, TreeRng, WilsonSampler};

/// Largest edge count for the exhaustive shrinking-marginals suite.
pub const SHRINKING_MAX_EDGES: usize = 10;

/// Largest vertex count for exact martingale traces.
pub const MARTINGALE_MAX_VERTICES: usize = 12;

/// Slack allowed when comparing a conditional marginal to its unconditional value.
pub const SHRINKING_TOL: f64 = 1e-10;

/// Slack for the per-step martingale bounds.
pub const STEP_BOUND_TOL: f64 = 1e-8;

// ---------------------------------------------------------------------------
// Shrinking marginals

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MarginalComparison {
    pub forest: Vec<usize>,
    pub target: usize,
    pub conditional: f64,
    pub unconditional: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ShrinkingMarginalsReport {
    pub n: usize,
    pub m: usize,
    pub forests_checked: usize,
    pub pairs_checked: usize,
    pub violations: usize,
    /// `max (conditional − unconditional)` over all pairs.
    pub worst_margin: f64,
    pub tol: f64,
    pub passed: bool,
    pub entries: Vec<MarginalComparison>,
}

/// Checks `Pr[j ∈ T | S ⊆ T] ≤ Pr[j ∈ T]` for every forest `S` and every
/// edge `j ∉ S`.
pub fn shrinking_marginals_suite(g: &WeightedGraph) -> Result<ShrinkingMarginalsReport> {
    if g.m() > SHRINKING_MAX_EDGES {
        return Err(Error::SizeGuard {
            what: "edge count for the shrinking-marginals suite",
            limit: SHRINKING_MAX_EDGES,
            actual: g.m(),
        });
    }
    let unconditional = leverage_scores(g)?;
    let mut forests = Vec::new();
    collect_forests(
        g,
        0,
        &DisjointSets::new(g.n()),
        &mut Vec::new(),
        &mut forests,
    );

    let mut entries = Vec::new();
    let mut worst = f64::NEG_INFINITY;
    let mut violations = 0;
    for forest in &forests {
        let state = ContractionState::from_edges(g, forest)?;
        let cond = conditional_marginals(g, &state)?;
        for j in (0..g.m()).filter(|j| !forest.contains(j)) {
            let margin = cond[j] - unconditional.get(j);
            worst = worst.max(margin);
            if margin > SHRINKING_TOL {
                violations += 1;
            }
            entries.push(MarginalComparison {
                forest: forest.clone(),
                target: j,
                conditional: cond[j],
                unconditional: unconditional.get(j),
            });
        }
    }
    Ok(ShrinkingMarginalsReport {
        n: g.n(),
        m: g.m(),
        forests_checked: forests.len(),
        pairs_checked: entries.len(),
        violations,
        worst_margin: worst,
        tol: SHRINKING_TOL,
        passed: violations == 0,
        entries,
    })
}

/// Every acyclic edge subset, including the empty one.
fn collect_forests(
    g: &WeightedGraph,
    next: usize,
    dsu: &DisjointSets,
    chosen: &mut Vec<usize>,
    out: &mut Vec<Vec<usize>>,
) {
    if next == g.m() {
        out.push(chosen.clone());
        return;
    }
    let edge = g.edge(next);
    let mut with = dsu.clone();
    if with.union(edge.u, edge.v) {
        chosen.push(next);
        collect_forests(g, next + 1, &with, chosen, out);
        chosen.pop();
    }
    collect_forests(g, next + 1, dsu, chosen, out);
}

// ---------------------------------------------------------------------------
// Doob martingale traces

/// One exact run of the tree martingale in the normalized frame.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MartingaleTrace {
    /// Homogeneity degree, `n − 1`.
    pub k: usize,
    /// Tree edges in reveal order.
    pub ordering: Vec<usize>,
    /// `M_0, …, M_k`.
    #[serde(skip)]
    pub m_seq: Vec<Matrix>,
    /// `‖X_i‖` for `i = 1..k`.
    pub x_norms: Vec<f64>,
    /// `‖W_i‖` for `i = 1..k`.
    pub w_norms: Vec<f64>,
    /// `λ_max(E[X_i² | γ_{<i}])`.
    pub step_variances: Vec<f64>,
    /// `‖E[A_{γ_i} | γ_{<i}]‖`.
    pub mean_edge_norms: Vec<f64>,
    /// `‖E[X_i | γ_{<i}]‖`, zero for a martingale.
    pub zero_mean_residuals: Vec<f64>,
    /// `|Σ_e Pr[γ_i = e | γ_{<i}] − 1|` per step.
    pub selection_mass_errors: Vec<f64>,
    /// Smallest eigenvalue of each `W_i − W_{i−1}`; nonnegative when `W` is monotone.
    pub w_increment_min_eigs: Vec<f64>,
    /// `max_e ‖A_e‖`.
    pub r: f64,
    /// `‖E[Σ ξ_e A_e]‖`.
    pub mu: f64,
    /// `‖M_0 − Π‖_max`.
    pub initial_error: f64,
    /// `‖M_k − Σ_{e∈T} A_e‖_max`.
    pub final_error: f64,
}

impl MartingaleTrace {
    /// `4μR / (k + 1 − i)` for step `i` (1-based).
    pub fn step_bound(&self, i: usize) -> f64 {
        4.0 * self.mu * self.r / (self.k + 1 - i) as f64
    }

    /// `4μR · Σ_{j≤i} 1/(k + 1 − j)`, the bound the step lemma gives for `‖W_i‖`.
    pub fn cumulative_bound(&self, i: usize) -> f64 {
        (1..=i).map(|j| self.step_bound(j)).sum()
    }

    /// `10 μ R ln k`.
    pub fn quadratic_variation_bound(&self) -> f64 {
        10.0 * self.mu * self.r * (self.k as f64).ln()
    }

    pub fn max_x_norm(&self) -> f64 {
        self.x_norms.iter().copied().fold(0.0, f64::max)
    }

    pub fn final_w_norm(&self) -> f64 {
        self.w_norms.last().copied().unwrap_or(0.0)
    }

    pub fn max_zero_mean_residual(&self) -> f64 {
        self.zero_mean_residuals.iter().copied().fold(0.0, f64::max)
    }

    pub fn w_is_monotone(&self) -> bool {
        self.w_increment_min_eigs.iter().all(|&l| l >= -1e-12)
    }

    /// One line per step: `i ‖X_i‖ ‖W_i‖ bound_i`, where `bound_i` is the
    /// cumulative step bound on `‖W_i‖`.
    pub fn dump_lines(&self) -> Vec<String> {
        (1..=self.k)
            .map(|i| {
                format!(
                    "{} {:.12e} {:.12e} {:.12e}",
                    i,
                    self.x_norms[i - 1],
                    self.w_norms[i - 1],
                    self.cumulative_bound(i)
                )
            })
            .collect()
    }

    pub fn summary(&self) -> MartingaleSummary {
        MartingaleSummary {
            k: self.k,
            ordering: self.ordering.clone(),
            r: self.r,
            mu: self.mu,
            max_x_norm: self.max_x_norm(),
            final_w_norm: self.final_w_norm(),
            w_bound: self.quadratic_variation_bound(),
            max_zero_mean_residual: self.max_zero_mean_residual(),
            initial_error: self.initial_error,
            final_error: self.final_error,
            w_monotone: self.w_is_monotone(),
            step_bounds_hold: check_step_variance_bound(self),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MartingaleSummary {
    pub k: usize,
    pub ordering: Vec<usize>,
    pub r: f64,
    pub mu: f64,
    pub max_x_norm: f64,
    pub final_w_norm: f64,
    pub w_bound: f64,
    pub max_zero_mean_residual: f64,
    pub initial_error: f64,
    pub final_error: f64,
    pub w_monotone: bool,
    pub step_bounds_hold: bool,
}

/// Normalized edge matrices `A_e = u_e u_eᵀ` with
/// `u_e = (w_e/ℓ_e)^{1/2} (L_G^†)^{1/2} b_e`.
struct EdgeFrame {
    vectors: Vec<Vec<f64>>,
    n: usize,
}

impl EdgeFrame {
    fn new(g: &WeightedGraph) -> Result<Self> {
        let frame = NormalizedFrame::new(&laplacian(g))?;
        let lev = leverage_scores(g)?;
        let vectors = g
            .edges()
            .iter()
            .enumerate()
            .map(|(i, e)| frame.edge_vector(e.u, e.v, e.w / lev.get(i)))
            .collect();
        Ok(Self { vectors, n: g.n() })
    }

    /// `Σ_e c_e A_e`
    fn combine(&self, coeffs: &[f64]) -> Matrix {
        let mut m = Matrix::zeros(self.n);
        for (u, &c) in self.vectors.iter().zip(coeffs) {
            if c != 0.0 {
                m.add_outer(u, c);
            }
        }
        m
    }

    fn norm(&self, e: usize) -> f64 {
        self.vectors[e].iter().map(|x| x * x).sum()
    }
}

/// Exact trace for a given tree and reveal order.
pub fn martingale_trace_with_order(
    g: &WeightedGraph,
    ordering: &[usize],
) -> Result<MartingaleTrace> {
    if g.n() > MARTINGALE_MAX_VERTICES {
        return Err(Error::SizeGuard {
            what: "vertex count for exact martingale traces",
            limit: MARTINGALE_MAX_VERTICES,
            actual: g.n(),
        });
    }
    let tree = SpanningTree::from_edges(g, ordering)?;
    let k = g.n() - 1;
    let frame = EdgeFrame::new(g)?;
    let r = (0..g.m()).map(|e| frame.norm(e)).fold(0.0, f64::max);

    let mut state = ContractionState::new(g);
    let mut q = conditional_marginals(g, &state)?;
    let m0 = frame.combine(&q);
    let mu = spectral_norm(&m0)?;
    let initial_error = m0.sub(&Matrix::centering_projection(g.n()))?.max_abs();

    let mut m_seq = vec![m0];
    let mut w = Matrix::zeros(g.n());
    let mut trace = MartingaleTrace {
        k,
        ordering: ordering.to_vec(),
        m_seq: Vec::new(),
        x_norms: Vec::with_capacity(k),
        w_norms: Vec::with_capacity(k),
        step_variances: Vec::with_capacity(k),
        mean_edge_norms: Vec::with_capacity(k),
        zero_mean_residuals: Vec::with_capacity(k),
        selection_mass_errors: Vec::with_capacity(k),
        w_increment_min_eigs: Vec::with_capacity(k),
        r,
        mu,
        initial_error,
        final_error: 0.0,
    };

    for (step, &revealed) in ordering.iter().enumerate() {
        let remaining = (k - step) as f64;
        let prev = m_seq.last().expect("nonempty").clone();
        let mut mean_x = Matrix::zeros(g.n());
        let mut second_moment = Matrix::zeros(g.n());
        let mut mean_edge = Matrix::zeros(g.n());
        let mut mass = 0.0;
        let mut chosen = None;
        for e in 0..g.m() {
            if state.is_contracted(e) || q[e] <= 0.0 {
                continue;
            }
            let p = q[e] / remaining;
            let next_state = state.contract(g, e)?;
            let next_q = conditional_marginals(g, &next_state)?;
            let m_e = frame.combine(&next_q);
            let mut x = m_e.sub(&prev)?;
            x.symmetrize();
            mean_x.add_scaled(&x, p)?;
            second_moment.add_scaled(&x.square(), p)?;
            mean_edge.add_outer(&frame.vectors[e], p);
            mass += p;
            if e == revealed {
                chosen = Some((next_state, next_q, m_e, x));
            }
        }
        let (next_state, next_q, m_e, x) = chosen.ok_or_else(|| {
            Error::Precondition(format!("edge {revealed} has zero conditional probability"))
        })?;
        mean_x.symmetrize();
        second_moment.symmetrize();
        mean_edge.symmetrize();
        let increment_eigs = eigvals_sym(&second_moment)?;
        w.add_scaled(&second_moment, 1.0)?;

        trace.x_norms.push(spectral_norm(&x)?);
        trace.w_norms.push(spectral_norm(&w)?);
        trace
            .step_variances
            .push(*increment_eigs.last().unwrap_or(&0.0));
        trace
            .w_increment_min_eigs
            .push(*increment_eigs.first().unwrap_or(&0.0));
        trace.mean_edge_norms.push(spectral_norm(&mean_edge)?);
        trace.zero_mean_residuals.push(spectral_norm(&mean_x)?);
        trace.selection_mass_errors.push((mass - 1.0).abs());
        m_seq.push(m_e);
        state = next_state;
        q = next_q;
    }

    let mut tree_sum = Matrix::zeros(g.n());
    for &e in tree.edges() {
        tree_sum.add_outer(&frame.vectors[e], 1.0);
    }
    trace.final_error = m_seq.last().expect("nonempty").sub(&tree_sum)?.max_abs();
    trace.m_seq = m_seq;
    Ok(trace)
}

/// Samples a tree with Wilson's algorithm, reveals its edges in uniformly
/// random order, and traces the martingale exactly. Both draws come from one
/// generator seeded with `seed`.
pub fn martingale_trace(g: &WeightedGraph, seed: u64) -> Result<MartingaleTrace> {
    if g.n() > MARTINGALE_MAX_VERTICES {
        return Err(Error::SizeGuard {
            what: "vertex count for exact martingale traces",
            limit: MARTINGALE_MAX_VERTICES,
            actual: g.n(),
        });
    }
    let mut rng = TreeRng::seed_from_u64(seed);
    let mut ordering = WilsonSampler::new(g).sample_edges(&mut rng);
    ordering.sort_unstable();
    ordering.shuffle(&mut rng);
    martingale_trace_with_order(g, &ordering)
}

/// Per-step checks: `λ_max(E[X_i² | ·]) ≤ 4μR/(k+1−i)` and
/// `‖E[A_{γ_i} | ·]‖ ≤ μ/(k+1−i)`.
pub fn check_step_variance_bound(trace: &MartingaleTrace) -> bool {
    (1..=trace.k).all(|i| {
        let remaining = (trace.k + 1 - i) as f64;
        trace.step_variances[i - 1] <= trace.step_bound(i) + STEP_BOUND_TOL
            && trace.mean_edge_norms[i - 1] <= trace.mu / remaining + STEP_BOUND_TOL
    })
}

// ---------------------------------------------------------------------------
// Matrix concentration envelopes

/// `n · exp(−ε²μ / (R(ln k + ε)))`, the tail form with the unspecified
/// constant set to one.
pub fn unit_constant_envelope(n: usize, k: usize, eps: f64, mu: f64, r: f64) -> f64 {
    n as f64 * (-(eps * eps * mu) / (r * ((k as f64).ln() + eps))).exp()
}

/// `n · exp(−3ε²μ / ((60 ln k + 2ε) R))`, the Freedman-derived one-sided tail.
pub fn freedman_envelope(n: usize, k: usize, eps: f64, mu: f64, r: f64) -> f64 {
    n as f64 * (-(3.0 * eps * eps * mu) / ((60.0 * (k as f64).ln() + 2.0 * eps) * r)).exp()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TailEnvelopeRow {
    pub eps: f64,
    pub exceed_count: usize,
    pub empirical_fraction: f64,
    pub unit_constant_envelope: f64,
    pub freedman_envelope: f64,
    /// One-sided p-value of the observed count under the unit-constant envelope.
    pub unit_constant_p_value: f64,
    pub freedman_p_value: f64,
    pub consistent_at_001: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TailEnvelopeReport {
    pub n: usize,
    pub k: usize,
    pub samples: usize,
    pub base_seed: u64,
    pub mu: f64,
    pub r: f64,
    pub max_deviation: f64,
    pub rows: Vec<TailEnvelopeRow>,
}

/// Measures `‖Σ_{e∈T} A_e − Π‖` over sampled trees and tabulates how often
/// it exceeds each `ε`, next to both concentration envelopes. Recorded only;
/// the envelope constant is not pinned down.
pub fn tail_envelope_report(
    g: &WeightedGraph,
    eps_values: &[f64],
    samples: usize,
    base_seed: u64,
) -> Result<TailEnvelopeReport> {
    use rayon::prelude::*;

    let l = laplacian(g);
    let frame = NormalizedFrame::new(&l)?;
    let lev = leverage_scores(g)?;
    let pi = Matrix::centering_projection(g.n());
    let deviations: Vec<f64> = (0..samples as u64)
        .into_par_iter()
        .map(|trial| -> Result<f64> {
            let mut rng = trial_rng(base_seed, trial);
            let tree = WilsonSampler::new(g).sample(&mut rng);
            let t = reweight_tree(&tree, &lev)?;
            let m = frame.normalize(&t.laplacian(g)?)?;
            spectral_norm(&m.sub(&pi)?)
        })
        .collect::<Result<_>>()?;
    let (mu, r) = (1.0, 1.0);
    let k = g.n() - 1;
    let rows = eps_values
        .iter()
        .map(|&eps| {
            let count = deviations.iter().filter(|&&d| d >= eps).count();
            let unit = unit_constant_envelope(g.n(), k, eps, mu, r);
            let fr = freedman_envelope(g.n(), k, eps, mu, r);
            let pv_unit = binomial_upper_p_value(samples as u64, unit.min(1.0), count as u64);
            let pv_fr = binomial_upper_p_value(samples as u64, fr.min(1.0), count as u64);
            TailEnvelopeRow {
                eps,
                exceed_count: count,
                empirical_fraction: count as f64 / samples as f64,
                unit_constant_envelope: unit,
                freedman_envelope: fr,
                unit_constant_p_value: pv_unit,
                freedman_p_value: pv_fr,
                consistent_at_001: pv_unit >= 0.01 || pv_fr >= 0.01,
            }
        })
        .collect();
    Ok(TailEnvelopeReport {
        n: g.n(),
        k,
        samples,
        base_seed,
        mu,
        r,
        max_deviation: deviations.iter().copied().fold(0.0, f64::max),
        rows,
    })
}

// ---------------------------------------------------------------------------
// Binomial tails

/// `Pr[Bin(k, p) ≥ threshold]` with `p ∈ (0, 1/2]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinomialTailQuery {
    pub k: u64,
    pub p: f64,
    pub threshold: u64,
}

impl BinomialTailQuery {
    pub fn new(k: u64, p: f64, threshold: u64) -> Result<Self> {
        if !(p > 0.0 && p <= 0.5) {
            return Err(Error::InvalidParameter(format!(
                "p must lie in (0, 1/2], got {p}"
            )));
        }
        if threshold > k {
            return Err(Error::InvalidParameter(format!(
                "threshold {threshold} exceeds trial count {k}"
            )));
        }
        Ok(Self { k, p, threshold })
    }
}

pub fn binomial_tail(q: &BinomialTailQuery) -> f64 {
    ln_binomial_tail(q).exp()
}

/// Natural log of `Pr[Bin(k, p) ≥ threshold]`; finite even when the tail
/// underflows `f64`.
pub fn ln_binomial_tail(q: &BinomialTailQuery) -> f64 {
    ln_upper_tail(q.k, q.threshold, q.p.ln(), (-q.p).ln_1p())
}

/// `ln Pr[Bin(k, p) ≥ threshold]` for any `p ∈ [0, 1]`.
pub fn ln_binomial_upper(k: u64, p: f64, threshold: u64) -> f64 {
    if threshold == 0 {
        return 0.0;
    }
    if threshold > k || p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return 0.0;
    }
    ln_upper_tail(k, threshold, p.ln(), (-p).ln_1p())
}

/// `ln Pr[Bin(k, p) ≤ threshold]` for any `p ∈ [0, 1]`.
pub fn ln_binomial_lower(k: u64, p: f64, threshold: u64) -> f64 {
    if threshold >= k {
        return 0.0;
    }
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return f64::NEG_INFINITY;
    }
    // X ≤ t  ⟺  k − X ≥ k − t, and k − X ~ Bin(k, 1 − p)
    ln_upper_tail(k, k - threshold, (-p).ln_1p(), p.ln())
}

/// `Pr[Bin(n, p) ≥ observed]`, the one-sided p-value against excess counts.
pub fn binomial_upper_p_value(n: u64, p: f64, observed: u64) -> f64 {
    ln_binomial_upper(n, p, observed).exp()
}

/// `Pr[Bin(n, p) ≤ observed]`, the one-sided p-value against deficient counts.
pub fn binomial_lower_p_value(n: u64, p: f64, observed: u64) -> f64 {
    ln_binomial_lower(n, p, observed).exp()
}

/// `ln C(k, i)` by a compensated sum of `ln((k − i + j)/j)`.
pub fn ln_choose(k: u64, i: u64) -> f64 {
    let i = i.min(k - i);
    let mut sum = 0.0;
    let mut c = 0.0;
    for j in 1..=i {
        let term = ((k - i + j) as f64 / j as f64).ln();
        let y = term - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}

fn ln_upper_tail(k: u64, threshold: u64, ln_p: f64, ln_q: f64) -> f64 {
    if threshold == 0 {
        return 0.0;
    }
    if threshold > k {
        return f64::NEG_INFINITY;
    }
    let ln_odds = ln_p - ln_q;
    let mut terms = Vec::with_capacity((k - threshold + 1) as usize);
    let mut lt = ln_choose(k, threshold) + threshold as f64 * ln_p + (k - threshold) as f64 * ln_q;
    for i in threshold..=k {
        terms.push(lt);
        if i < k {
            lt += ((k - i) as f64 / (i + 1) as f64).ln() + ln_odds;
        }
    }
    log_sum_exp(&terms)
}

/// `ln Σ exp(x_i)` with Neumaier summation of the shifted terms.
fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for &x in xs {
        let v = (x - max).exp();
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    max + (sum + c).ln()
}

// ---------------------------------------------------------------------------
// Reverse Chernoff

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReverseChernoffOutcome {
    pub k: u64,
    pub p: f64,
    pub eps: f64,
    /// `ln Pr[X ≥ (1+ε)p]`
    pub ln_upper_tail: f64,
    /// `ln Pr[X ≤ (1−ε)p]`
    pub ln_lower_tail: f64,
    /// `−9 ε² p k`
    pub ln_bound: f64,
    pub upper_holds: bool,
    pub lower_holds: bool,
}

impl ReverseChernoffOutcome {
    pub fn holds(&self) -> bool {
        self.upper_holds && self.lower_holds
    }
}

fn nearest_int_if_close(x: f64) -> Option<f64> {
    let r = x.round();
    ((x - r).abs() <= 1e-9 * x.abs().max(1.0)).then_some(r)
}

/// Checks both tails of the mean of `k` Bernoulli(p) variables against
/// `exp(−9ε²pk)`. Requires `ε, p ∈ (0, 1/2]` and `ε²pk ≥ 3`.
pub fn reverse_chernoff_check(k: u64, p: f64, eps: f64) -> Result<ReverseChernoffOutcome> {
    if !(eps > 0.0 && eps <= 0.5) {
        return Err(Error::Precondition(format!(
            "eps must lie in (0, 1/2], got {eps}"
        )));
    }
    if !(p > 0.0 && p <= 0.5) {
        return Err(Error::Precondition(format!(
            "p must lie in (0, 1/2], got {p}"
        )));
    }
    let strength = eps * eps * p * k as f64;
    if strength < 3.0 {
        return Err(Error::Precondition(format!(
            "eps^2 p k = {strength} is below 3"
        )));
    }
    let upper_x = (1.0 + eps) * p * k as f64;
    let upper_thr = nearest_int_if_close(upper_x).unwrap_or_else(|| upper_x.ceil()) as u64;
    let lower_x = (1.0 - eps) * p * k as f64;
    let lower_thr = nearest_int_if_close(lower_x).unwrap_or_else(|| lower_x.floor()) as u64;

    let ln_upper = ln_binomial_upper(k, p, upper_thr);
    let ln_lower = ln_binomial_lower(k, p, lower_thr);
    let ln_bound = -9.0 * strength;
    Ok(ReverseChernoffOutcome {
        k,
        p,
        eps,
        ln_upper_tail: ln_upper,
        ln_lower_tail: ln_lower,
        ln_bound,
        upper_holds: ln_upper >= ln_bound,
        lower_holds: ln_lower >= ln_bound,
    })
}

/// Default grid of `(k, p, ε)` triples; callers filter by the hypotheses.
pub fn reverse_chernoff_default_grid() -> Vec<(u64, f64, f64)> {
    let ks = [
        10u64, 20, 30, 50, 75, 100, 150, 200, 300, 500, 750, 1000, 1500, 2000, 3000, 5000,
    ];
    let mut grid = Vec::new();
    for &k in &ks {
        for pi in 1..=10 {
            let p = 0.05 * pi as f64;
            for ei in 0..=8 {
                let eps = 0.1 + 0.05 * ei as f64;
                if eps * eps * p * k as f64 >= 3.0 {
                    grid.push((k, p, eps));
                }
            }
        }
    }
    grid
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReverseChernoffReport {
    pub triples: usize,
    pub failures: usize,
    pub min_upper_slack: f64,
    pub min_lower_slack: f64,
    pub passed: bool,
    pub outcomes: Vec<ReverseChernoffOutcome>,
}

pub fn reverse_chernoff_suite(grid: &[(u64, f64, f64)]) -> Result<ReverseChernoffReport> {
    let outcomes = grid
        .iter()
        .map(|&(k, p, eps)| reverse_chernoff_check(k, p, eps))
        .collect::<Result<Vec<_>>>()?;
    let failures = outcomes.iter().filter(|o| !o.holds()).count();
    let min_upper_slack = outcomes
        .iter()
        .map(|o| o.ln_upper_tail - o.ln_bound)
        .fold(f64::INFINITY, f64::min);
    let min_lower_slack = outcomes
        .iter()
        .map(|o| o.ln_lower_tail - o.ln_bound)
        .fold(f64::INFINITY, f64::min);
    Ok(ReverseChernoffReport {
        triples: outcomes.len(),
        failures,
        min_upper_slack,
        min_lower_slack,
        passed: failures == 0,
        outcomes,
    })
}

// ---------------------------------------------------------------------------
// Stirling-type binomial lower bound

/// `ln C(k, l)`, exact integer arithmetic while it fits in `u128`.
fn ln_choose_exact(k: u64, l: u64) -> f64 {
    if k <= 120 {
        let l = l.min(k - l);
        let mut c: u128 = 1;
        for i in 0..l {
            c = c * (k - i) as u128 / (i + 1) as u128;
        }
        (c as f64).ln()
    } else {
        ln_choose(k, l)
    }
}

/// `ln` of `(1/(e·√(2πl))) (k/l)^l (k/(k−l))^{k−l}`.
pub fn ln_stirling_binom_lower(k: u64, l: u64) -> f64 {
    let (kf, lf) = (k as f64, l as f64);
    -1.0 - 0.5 * (2.0 * std::f64::consts::PI * lf).ln()
        + lf * (kf / lf).ln()
        + (kf - lf) * (kf / (kf - lf)).ln()
}

/// `C(k, l) ≥ (1/(e·√(2πl))) (k/l)^l (k/(k−l))^{k−l}` for `1 ≤ l ≤ k−1`.
pub fn check_stirling_binom_lower(k: u64, l: u64) -> Result<bool> {
    if l == 0 || l >= k {
        return Err(Error::Precondition(format!(
            "need 1 <= l <= k-1, got k={k}, l={l}"
        )));
    }
    Ok(ln_choose_exact(k, l) >= ln_stirling_binom_lower(k, l))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StirlingReport {
    pub k_max: u64,
    pub pairs: usize,
    pub failures: usize,
    pub min_log_slack: f64,
    pub passed: bool,
}

pub fn stirling_suite(k_max: u64) -> StirlingReport {
    let mut pairs = 0;
    let mut failures = 0;
    let mut min_slack = f64::INFINITY;
    for k in 2..=k_max {
        for l in 1..k {
            pairs += 1;
            let slack = ln_choose_exact(k, l) - ln_stirling_binom_lower(k, l);
            min_slack = min_slack.min(slack);
            if slack < 0.0 {
                failures += 1;
            }
        }
    }
    StirlingReport {
        k_max,
        pairs,
        failures,
        min_log_slack: min_slack,
        passed: failures == 0,
    }
}

// ---------------------------------------------------------------------------
// Symmetric-matrix square inequality

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MatrixFactReport {
    pub pairs: usize,
    pub max_dim: usize,
    pub failures: usize,
    pub min_witness_gap: f64,
    pub passed: bool,
}

/// Random symmetric pair with entries uniform in `[−1, 1]`.
pub fn random_symmetric(dim: usize, rng: &mut impl Rng) -> Matrix {
    let mut a = Matrix::zeros(dim);
    for i in 0..dim {
        for j in i..dim {
            let x = rng.gen_range(-1.0..=1.0);
            a[(i, j)] = x;
            a[(j, i)] = x;
        }
    }
    a
}

/// Checks `(A − B)² ⪯ 2A² + 2B²` on `pairs` random symmetric pairs of
/// dimension `1..=max_dim`.
pub fn matrix_fact_suite(pairs: usize, max_dim: usize, seed: u64) -> Result<MatrixFactReport> {
    if max_dim == 0 {
        return Err(Error::InvalidParameter("max_dim must be positive".into()));
    }
    let mut rng = TreeRng::seed_from_u64(seed);
    let mut failures = 0;
    let mut min_gap = f64::INFINITY;
    for _ in 0..pairs {
        let dim = rng.gen_range(1..=max_dim);
        let a = random_symmetric(dim, &mut rng);
        let b = random_symmetric(dim, &mut rng);
        let v = check_symmetric_triangle(&a, &b)?;
        min_gap = min_gap.min(v.witness_gap);
        if !v.holds || v.witness_gap < -1e-9 {
            failures += 1;
        }
    }
    Ok(MatrixFactReport {
        pairs,
        max_dim,
        failures,
        min_witness_gap: min_gap,
        passed: failures == 0,
    })
}
