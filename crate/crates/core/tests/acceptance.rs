//! Acceptance gate: one line per criterion, nonzero exit if any fails.

mod common;

use std::time::{Duration, Instant};

use treespark::experiments::{
    corpus, exact_degree_law, run_degree_dist, run_multi_tree_lower, run_single_tree_upper,
    run_sum_trees, MultiTreeLowerParams, TreeCount,
};
use treespark::graph::complete;
use treespark::srdiag::{
    check_step_variance_bound, martingale_trace, matrix_fact_suite, reverse_chernoff_default_grid,
    reverse_chernoff_suite, shrinking_marginals_suite,
};
use treespark::treesample::trial_rng;
use treespark::{enumerate_trees, leverage_scores, Construction, Result, WilsonSampler};

struct Outcome {
    passed: bool,
    detail: String,
}

fn criterion(id: u32, name: &str, limit: Duration, f: impl FnOnce() -> Result<Outcome>) -> bool {
    let start = Instant::now();
    let result = std::panic::catch_unwind(std::panic::AssertUnwindSafe(f));
    let elapsed = start.elapsed();
    let (passed, detail) = match result {
        Ok(Ok(o)) => (o.passed, o.detail),
        Ok(Err(e)) => (false, format!("error: {e}")),
        Err(_) => (false, "panicked".to_string()),
    };
    let in_time = elapsed <= limit;
    let ok = passed && in_time;
    println!(
        "criterion {id:>2} {}: {name}: {detail}; {:.1}s of {}s{}",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        limit.as_secs(),
        if in_time { "" } else { " (over time)" }
    );
    ok
}

fn minutes(m: u64) -> Duration {
    Duration::from_secs(60 * m)
}

fn marginal_law() -> Result<Outcome> {
    const SAMPLES: usize = 200_000;
    let mut worst_exact: f64 = 0.0;
    let mut worst_sigma: f64 = 0.0;
    let mut edges_checked = 0;
    for gi in 0..20u64 {
        let g = common::random_small_graph(1000 + gi, 6, 10);
        let exact = enumerate_trees(&g)?.marginals();
        let lev = leverage_scores(&g)?;
        for (a, b) in exact.iter().zip(lev.scores()) {
            worst_exact = worst_exact.max((a - b).abs());
        }
        let mut counts = vec![0u64; g.m()];
        let mut sampler = WilsonSampler::new(&g);
        let mut rng = trial_rng(77 + gi, 0);
        for _ in 0..SAMPLES {
            for e in sampler.sample_edges(&mut rng) {
                counts[e] += 1;
            }
        }
        for (e, &c) in counts.iter().enumerate() {
            let l = lev.get(e);
            let dev = (c as f64 / SAMPLES as f64 - l).abs();
            let sigma = (l * (1.0 - l) / SAMPLES as f64).sqrt();
            let z = if sigma > 0.0 {
                dev / sigma
            } else if dev == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            worst_sigma = worst_sigma.max(z);
            edges_checked += 1;
        }
    }
    Ok(Outcome {
        passed: worst_exact <= 1e-10 && worst_sigma <= 4.0,
        detail: format!(
            "20 graphs, {edges_checked} edges; max |enum - leverage| = {worst_exact:.2e}, max Wilson z = {worst_sigma:.2}"
        ),
    })
}

fn foster() -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    let mut largest = 0;
    for (_, g) in corpus(true)? {
        let lev = leverage_scores(&g)?;
        worst = worst.max((lev.total() - (g.n() - 1) as f64).abs());
        count += 1;
        largest = largest.max(g.n());
    }
    Ok(Outcome {
        passed: worst <= 1e-8,
        detail: format!("{count} graphs up to n = {largest}; max |sum - (n-1)| = {worst:.2e}"),
    })
}

fn shrinking() -> Result<Outcome> {
    let mut graphs = 0;
    let mut pairs = 0;
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    for (_, g) in corpus(false)?.into_iter().filter(|(_, g)| g.m() <= 9) {
        let r = shrinking_marginals_suite(&g)?;
        graphs += 1;
        pairs += r.pairs_checked;
        violations += r.violations;
        worst = worst.max(r.worst_margin);
    }
    Ok(Outcome {
        passed: violations == 0 && graphs > 0,
        detail: format!("{graphs} graphs, {pairs} (forest, edge) pairs, {violations} violations, max excess {worst:.2e}"),
    })
}

fn martingale() -> Result<Outcome> {
    let specs = [
        "k:4",
        "k:5",
        "k:6",
        "k:8",
        "ring:7",
        "cliquestar:2,4",
        "er:8,0.5@3",
        "cliquestar:3,3",
    ];
    let mut graphs: Vec<_> = specs
        .iter()
        .map(|s| s.parse::<Construction>().and_then(|c| c.build()))
        .collect::<Result<_>>()?;
    graphs.push(treespark::experiments::with_random_weights(
        &complete(6)?,
        6,
    )?);
    graphs.push(treespark::experiments::with_random_weights(
        &"er:8,0.5@4".parse::<Construction>()?.build()?,
        8,
    )?);

    let traces = 200;
    let mut failures = Vec::new();
    let (mut max_res, mut max_x, mut max_w_ratio) = (0.0f64, 0.0f64, 0.0f64);
    for i in 0..traces {
        let g = &graphs[i % graphs.len()];
        let t = martingale_trace(g, 5000 + i as u64)?;
        let w_bound = 10.0 * (t.k as f64).ln();
        max_res = max_res.max(t.max_zero_mean_residual());
        max_x = max_x.max(t.max_x_norm());
        max_w_ratio = max_w_ratio.max(t.final_w_norm() / w_bound);
        let unit_scale = (t.mu - 1.0).abs() < 1e-8 && (t.r - 1.0).abs() < 1e-8;
        let ok = t.max_zero_mean_residual() <= 1e-8
            && t.max_x_norm() <= 1.0 + 1e-8
            && unit_scale
            && (1..=t.k).all(|s| t.step_variances[s - 1] <= 4.0 / (t.k + 1 - s) as f64 + 1e-8)
            && check_step_variance_bound(&t)
            && t.final_w_norm() <= w_bound + 1e-6;
        if !ok {
            failures.push(i);
        }
    }
    Ok(Outcome {
        passed: failures.is_empty(),
        detail: format!(
            "{traces} traces on {} graphs; max residual {max_res:.1e}, max |X| {max_x:.4}, max |W_k|/(10 ln k) {max_w_ratio:.3}, failing traces {failures:?}",
            graphs.len()
        ),
    })
}

fn single_tree_upper() -> Result<Outcome> {
    let r = run_single_tree_upper(&complete(500)?, "k:500", 50, 2024)?;
    let ln_n = 500f64.ln();
    Ok(Outcome {
        passed: r.passed && r.median_lambda <= 3.0 * ln_n,
        detail: format!(
            "K_500, 50 trees; max lambda {:.3} (envelope {:.1}), median {:.3} (gate {:.2}), max/ln n = {:.3}",
            r.max_lambda,
            r.envelope,
            r.median_lambda,
            3.0 * ln_n,
            r.empirical_constant
        ),
    })
}

fn sum_trees() -> Result<Outcome> {
    let r = run_sum_trees(
        &complete(200)?,
        "k:200",
        0.5,
        TreeCount::Multiplier { c: 1.0 },
        10,
        42,
    )?;
    let lo = r
        .per_trial
        .iter()
        .map(|t| t.lambda_min_pos)
        .fold(f64::INFINITY, f64::min);
    let hi = r.per_trial.iter().map(|t| t.lambda_max).fold(0.0, f64::max);
    Ok(Outcome {
        passed: r.t == 113 && r.passed,
        detail: format!(
            "K_200, eps 0.5, t = {}, 10 trials; pass fraction {:.2} (gate 0.9), extremes over trials [{lo:.3}, {hi:.3}]",
            r.t, r.pass_fraction
        ),
    })
}

fn multi_tree_lower() -> Result<Outcome> {
    let r = run_multi_tree_lower(&MultiTreeLowerParams {
        num_cliques: 100,
        clique_size: 100,
        eps: 0.4,
        trials: 20,
        base_seed: 7,
        t_override: None,
        enforce_window: true,
    })?;
    Ok(Outcome {
        passed: r.passed && r.t == 2,
        detail: format!(
            "cliquestar 100x100 (n = {}), eps 0.4, t = {}; violation fraction {:.2} (gate 0.95); leverage per block in [{:.4}, {:.4}]",
            r.graph.n, r.t, r.violation_fraction, r.leverage_range.0, r.leverage_range.1
        ),
    })
}

fn degree_law() -> Result<Outcome> {
    let h = run_degree_dist(50, 200_000, 31)?;
    let exact = exact_degree_law(3)?;
    let n3_ok = exact.max_abs_error <= 1e-12
        && (exact.enumerated_pmf[1] - 2.0 / 3.0).abs() <= 1e-12
        && (exact.enumerated_pmf[2] - 1.0 / 3.0).abs() <= 1e-12;
    Ok(Outcome {
        passed: h.tv_distance <= 0.01 && h.passed && n3_ok,
        detail: format!(
            "n = 50, 200000 samples: TV {:.4} over {} bins; n = 3 exhaustive max error {:.1e}",
            h.tv_distance, h.bins, exact.max_abs_error
        ),
    })
}

fn reverse_chernoff() -> Result<Outcome> {
    let r = reverse_chernoff_suite(&reverse_chernoff_default_grid())?;
    Ok(Outcome {
        passed: r.passed && r.triples >= 200,
        detail: format!(
            "{} triples, {} failures; min log slack upper {:.2}, lower {:.2}",
            r.triples, r.failures, r.min_upper_slack, r.min_lower_slack
        ),
    })
}

fn matrix_fact() -> Result<Outcome> {
    let r = matrix_fact_suite(1000, 16, 99)?;
    Ok(Outcome {
        passed: r.passed && r.min_witness_gap >= -1e-9,
        detail: format!(
            "1000 pairs up to dimension 16; min witness gap {:.3e}",
            r.min_witness_gap
        ),
    })
}

fn main() {
    let results = [
        criterion(
            1,
            "marginal law, enumeration vs leverage vs Wilson",
            minutes(2),
            marginal_law,
        ),
        criterion(2, "leverage scores sum to n - 1", minutes(5), foster),
        criterion(3, "shrinking marginals", minutes(3), shrinking),
        criterion(
            4,
            "martingale increments and variation",
            minutes(10),
            martingale,
        ),
        criterion(
            5,
            "single reweighted tree upper bound",
            minutes(10),
            single_tree_upper,
        ),
        criterion(6, "average of trees sparsifies", minutes(15), sum_trees),
        criterion(
            7,
            "few trees violate weighted degrees",
            minutes(20),
            multi_tree_lower,
        ),
        criterion(8, "degree law of uniform trees", minutes(5), degree_law),
        criterion(
            9,
            "reverse Chernoff on exact binomials",
            minutes(1),
            reverse_chernoff,
        ),
        criterion(10, "(A - B)^2 <= 2A^2 + 2B^2", minutes(1), matrix_fact),
    ];
    let passed = results.iter().filter(|&&ok| ok).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
